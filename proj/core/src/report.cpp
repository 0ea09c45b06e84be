#include "abdo/report.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "abdo/csv.hpp"
#include "abdo/error.hpp"
#include "abdo/metrics.hpp"

namespace abdo {
namespace {

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                    "#9467bd", "#8c564b", "#e377c2", "#17becf"};

std::string two_decimals(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string opt_text(const std::optional<double>& v) { return v ? format_double(*v) : std::string(); }

std::optional<double> parse_opt(const std::string& field, std::size_t line, const char* column) {
  if (field.empty()) return std::nullopt;
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc() || ptr != field.data() + field.size() || !std::isfinite(v)) {
    throw ParseError("line " + std::to_string(line) + ": bad number '" + field + "' in " + column, 0);
  }
  return v;
}

std::string xml(std::string_view text) {
  std::string out;
  for (char c : text) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

std::string px(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string file_token(std::string_view name) {
  std::string out;
  for (char c : name) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
                    c == '-' || c == '_' || c == '.';
    out.push_back(ok ? c : '_');
  }
  return out;
}

struct Axis {
  double lo = 0.0;
  double hi = 1.0;
  double top = 0.0;
  double bottom = 1.0;

  double map(double v) const { return bottom - (v - lo) / (hi - lo) * (bottom - top); }
};

Axis make_axis(double lo, double hi, double top, double bottom) {
  if (!(hi > lo)) {
    lo -= 0.5;
    hi += 0.5;
  }
  const double pad = (hi - lo) * 0.05;
  return {lo - pad, hi + pad, top, bottom};
}

void draw_y_axis(std::ostream& os, const Axis& axis, double x, double width) {
  os << "<line x1=\"" << px(x) << "\" y1=\"" << px(axis.top) << "\" x2=\"" << px(x) << "\" y2=\""
     << px(axis.bottom) << "\" stroke=\"#000\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double v = axis.lo + (axis.hi - axis.lo) * i / 4.0;
    const double y = axis.map(v);
    os << "<line x1=\"" << px(x) << "\" y1=\"" << px(y) << "\" x2=\"" << px(x + width)
       << "\" y2=\"" << px(y) << "\" stroke=\"#ddd\"/>\n";
    char label[32];
    std::snprintf(label, sizeof label, "%.3g", v);
    os << "<text x=\"" << px(x - 4) << "\" y=\"" << px(y + 4)
       << "\" font-size=\"10\" text-anchor=\"end\">" << label << "</text>\n";
  }
}

void svg_open(std::ostream& os, double width, double height, std::string_view title) {
  os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
     << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" << px(width)
     << "\" height=\"" << px(height) << "\" viewBox=\"0 0 " << px(width) << ' ' << px(height)
     << "\" font-family=\"sans-serif\">\n"
     << "<title>" << xml(title) << "</title>\n"
     << "<rect width=\"100%\" height=\"100%\" fill=\"#fff\"/>\n";
}

void legend(std::ostream& os, const std::vector<std::string>& methods, double x, double y) {
  for (std::size_t m = 0; m < methods.size(); ++m) {
    const double yy = y + 16.0 * static_cast<double>(m);
    os << "<rect x=\"" << px(x) << "\" y=\"" << px(yy - 9) << "\" width=\"10\" height=\"10\" fill=\""
       << kPalette[m % 8] << "\"/>\n"
       << "<text x=\"" << px(x + 14) << "\" y=\"" << px(yy) << "\" font-size=\"11\">"
       << xml(methods[m]) << "</text>\n";
  }
}

}  // namespace

std::string format_double(double value) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  if (ec != std::errc()) throw Error("cannot format number");
  return std::string(buf, ptr);
}

std::string records_to_csv(const std::vector<EvaluationRecord>& records) {
  std::ostringstream os;
  write_csv_row(os, {"dataset", "subject", "sequence", "method", "region", "dice", "hd95_mm",
                     "gt_volume_ml", "pred_volume_ml"});
  for (const auto& r : records) {
    write_csv_row(os, {r.key.dataset, r.key.subject, r.key.sequence, r.key.method, r.region,
                       opt_text(r.dice), opt_text(r.hd95_mm), format_double(r.gt_volume_ml),
                       format_double(r.pred_volume_ml)});
  }
  return os.str();
}

std::vector<EvaluationRecord> parse_records_csv(std::string_view text) {
  const CsvTable table = parse_csv(text);
  const std::size_t c_dataset = table.column("dataset"), c_subject = table.column("subject"),
                    c_sequence = table.column("sequence"), c_method = table.column("method"),
                    c_region = table.column("region"), c_dice = table.column("dice"),
                    c_hd = table.column("hd95_mm"), c_gt = table.column("gt_volume_ml"),
                    c_pred = table.column("pred_volume_ml");
  std::vector<EvaluationRecord> out;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const CsvRow& row = table.rows[i];
    const std::size_t line = table.lines[i];
    EvaluationRecord r;
    r.key = {row[c_dataset], row[c_subject], row[c_sequence], row[c_method]};
    r.region = row[c_region];
    r.dice = parse_opt(row[c_dice], line, "dice");
    r.hd95_mm = parse_opt(row[c_hd], line, "hd95_mm");
    const auto gt = parse_opt(row[c_gt], line, "gt_volume_ml");
    const auto pred = parse_opt(row[c_pred], line, "pred_volume_ml");
    if (!gt || !pred) throw ParseError("line " + std::to_string(line) + ": volumes are required", 0);
    r.gt_volume_ml = *gt;
    r.pred_volume_ml = *pred;
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<EvaluationRecord> read_records_csv(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return parse_records_csv(ss.str());
}

std::string summary_to_csv(const SummaryTable& summary) {
  std::ostringstream os;
  CsvRow header{"dataset", "region", "metric", "method", "n", "n_missing", "mean", "std",
                "mean_std", "best"};
  if (summary.has_significance) header.push_back("significant");
  write_csv_row(os, header);
  for (const auto& c : summary.cells) {
    std::string mean_std;
    if (c.mean) mean_std = two_decimals(*c.mean) + (c.stddev ? " (" + two_decimals(*c.stddev) + ")" : "");
    CsvRow row{c.dataset,
               c.region,
               std::string(metric_name(c.metric)),
               c.method,
               std::to_string(c.n),
               std::to_string(c.n_missing),
               c.mean ? two_decimals(*c.mean) : "",
               c.stddev ? two_decimals(*c.stddev) : "",
               mean_std,
               c.best ? "1" : "0"};
    if (summary.has_significance) row.push_back(c.significant ? "1" : "0");
    write_csv_row(os, row);
  }
  return os.str();
}

std::string friedman_to_csv(const RepeatabilityReport& report) {
  std::ostringstream os;
  write_csv_row(os, {"dataset", "region", "method", "metric", "subjects_used", "subjects_dropped",
                     "chi2", "p_value"});
  for (const auto& f : report.friedman) {
    write_csv_row(os, {f.dataset, f.region, f.method, f.metric, std::to_string(f.subjects_used),
                       std::to_string(f.subjects_dropped),
                       f.result ? format_double(f.result->statistic) : "",
                       f.result ? format_double(f.result->p_value) : ""});
  }
  return os.str();
}

BoxStats box_stats(std::vector<double> values) {
  if (values.empty()) throw EmptyInput("box_stats of an empty set");
  std::sort(values.begin(), values.end());
  BoxStats s;
  s.n = values.size();
  std::vector<double> scratch = values;
  s.q1 = percentile(scratch, 0.25);
  s.median = percentile(scratch, 0.5);
  s.q3 = percentile(scratch, 0.75);
  const double iqr = s.q3 - s.q1;
  const double lo = s.q1 - 1.5 * iqr, hi = s.q3 + 1.5 * iqr;
  s.whisker_low = s.q1;
  s.whisker_high = s.q3;
  bool have_low = false;
  for (double v : values) {
    if (v < lo || v > hi) {
      s.outliers.push_back(v);
      continue;
    }
    if (!have_low) {
      s.whisker_low = std::min(v, s.q1);
      have_low = true;
    }
    s.whisker_high = std::max(v, s.q3);
  }
  return s;
}

std::string boxplot_svg(const std::vector<EvaluationRecord>& records, const std::string& dataset,
                        SummaryMetric metric) {
  std::vector<std::string> regions, methods;
  std::map<std::pair<std::string, std::string>, std::vector<double>> values;
  for (const auto& r : records) {
    if (r.key.dataset != dataset) continue;
    if (std::find(regions.begin(), regions.end(), r.region) == regions.end()) regions.push_back(r.region);
    if (std::find(methods.begin(), methods.end(), r.key.method) == methods.end()) {
      methods.push_back(r.key.method);
    }
    const auto& v = metric == SummaryMetric::kDice ? r.dice : r.hd95_mm;
    if (v) values[{r.region, r.key.method}].push_back(*v);
  }
  std::sort(regions.begin(), regions.end());
  std::sort(methods.begin(), methods.end());

  double lo = INFINITY, hi = -INFINITY;
  for (const auto& [k, v] : values) {
    for (double x : v) {
      lo = std::min(lo, x);
      hi = std::max(hi, x);
    }
  }
  if (values.empty()) lo = hi = 0.0;

  const double left = 60.0, top = 30.0, plot_h = 300.0, box_w = 18.0, gap = 6.0;
  const double group_w = static_cast<double>(methods.size()) * (box_w + gap) + 20.0;
  const double plot_w = std::max(1.0, static_cast<double>(regions.size())) * group_w;
  const double width = left + plot_w + 140.0, height = top + plot_h + 50.0;
  const Axis axis = make_axis(lo, hi, top, top + plot_h);

  std::ostringstream os;
  svg_open(os, width, height, dataset + " " + std::string(metric_name(metric)));
  draw_y_axis(os, axis, left, plot_w);
  os << "<text x=\"14\" y=\"" << px(top + plot_h / 2) << "\" font-size=\"12\" transform=\"rotate(-90 14 "
     << px(top + plot_h / 2) << ")\" text-anchor=\"middle\">" << metric_name(metric) << "</text>\n";

  for (std::size_t g = 0; g < regions.size(); ++g) {
    const double gx = left + static_cast<double>(g) * group_w + 10.0;
    os << "<text x=\"" << px(gx + (group_w - 20.0) / 2) << "\" y=\"" << px(top + plot_h + 20)
       << "\" font-size=\"11\" text-anchor=\"middle\">" << xml(regions[g]) << "</text>\n";
    for (std::size_t m = 0; m < methods.size(); ++m) {
      const auto it = values.find({regions[g], methods[m]});
      if (it == values.end()) continue;
      const BoxStats s = box_stats(it->second);
      const double x = gx + static_cast<double>(m) * (box_w + gap);
      const double cx = x + box_w / 2;
      const char* color = kPalette[m % 8];
      os << "<g>\n<desc>region=" << xml(regions[g]) << ";method=" << xml(methods[m]) << ";n=" << s.n
         << ";q1=" << format_double(s.q1) << ";median=" << format_double(s.median)
         << ";q3=" << format_double(s.q3) << ";whisker_low=" << format_double(s.whisker_low)
         << ";whisker_high=" << format_double(s.whisker_high) << ";outliers=" << s.outliers.size()
         << "</desc>\n";
      os << "<line x1=\"" << px(cx) << "\" y1=\"" << px(axis.map(s.whisker_low)) << "\" x2=\"" << px(cx)
         << "\" y2=\"" << px(axis.map(s.whisker_high)) << "\" stroke=\"#000\"/>\n";
      for (double w : {s.whisker_low, s.whisker_high}) {
        os << "<line x1=\"" << px(x + 4) << "\" y1=\"" << px(axis.map(w)) << "\" x2=\"" << px(x + box_w - 4)
           << "\" y2=\"" << px(axis.map(w)) << "\" stroke=\"#000\"/>\n";
      }
      const double y3 = axis.map(s.q3), y1 = axis.map(s.q1);
      os << "<rect x=\"" << px(x) << "\" y=\"" << px(y3) << "\" width=\"" << px(box_w) << "\" height=\""
         << px(std::max(y1 - y3, 0.5)) << "\" fill=\"" << color << "\" fill-opacity=\"0.6\" stroke=\"#000\"/>\n";
      os << "<line x1=\"" << px(x) << "\" y1=\"" << px(axis.map(s.median)) << "\" x2=\"" << px(x + box_w)
         << "\" y2=\"" << px(axis.map(s.median)) << "\" stroke=\"#000\" stroke-width=\"2\"/>\n";
      for (double o : s.outliers) {
        os << "<circle cx=\"" << px(cx) << "\" cy=\"" << px(axis.map(o)) << "\" r=\"2.5\" fill=\"none\" stroke=\""
           << color << "\"/>\n";
      }
      os << "</g>\n";
    }
  }
  legend(os, methods, left + plot_w + 20.0, top + 10.0);
  os << "</svg>\n";
  return os.str();
}

std::string repeatability_svg(const RepeatabilityReport& report, const std::string& dataset) {
  const auto seq_it = report.sequences.find(dataset);
  const std::vector<std::string> sequences =
      seq_it == report.sequences.end() ? std::vector<std::string>{} : seq_it->second;
  std::vector<std::string> regions, methods;
  for (const auto& t : report.trajectories) {
    if (t.dataset != dataset) continue;
    if (std::find(regions.begin(), regions.end(), t.region) == regions.end()) regions.push_back(t.region);
    if (std::find(methods.begin(), methods.end(), t.method) == methods.end()) methods.push_back(t.method);
  }
  std::sort(regions.begin(), regions.end());
  std::sort(methods.begin(), methods.end());

  const double left = 60.0, top = 30.0, panel_w = 220.0, panel_h = 260.0, panel_gap = 70.0;
  const double width = left + static_cast<double>(std::max<std::size_t>(regions.size(), 1)) * (panel_w + panel_gap) + 120.0;
  const double height = top + panel_h + 60.0;
  std::ostringstream os;
  svg_open(os, width, height, dataset + " volume repeatability");

  for (std::size_t g = 0; g < regions.size(); ++g) {
    const double px0 = left + static_cast<double>(g) * (panel_w + panel_gap);
    double lo = INFINITY, hi = -INFINITY;
    for (const auto& t : report.trajectories) {
      if (t.dataset != dataset || t.region != regions[g]) continue;
      for (const auto& v : t.volumes_ml) {
        if (v) {
          lo = std::min(lo, *v);
          hi = std::max(hi, *v);
        }
      }
    }
    if (lo > hi) lo = hi = 0.0;
    const Axis axis = make_axis(lo, hi, top, top + panel_h);
    draw_y_axis(os, axis, px0, panel_w);
    os << "<text x=\"" << px(px0 + panel_w / 2) << "\" y=\"" << px(top - 10)
       << "\" font-size=\"12\" text-anchor=\"middle\">" << xml(regions[g]) << " (mL)</text>\n";
    const double step = sequences.size() > 1 ? panel_w / static_cast<double>(sequences.size() - 1) * 0.8 : 0.0;
    const double x0 = px0 + (sequences.size() > 1 ? panel_w * 0.1 : panel_w / 2);
    for (std::size_t s = 0; s < sequences.size(); ++s) {
      os << "<text x=\"" << px(x0 + step * static_cast<double>(s)) << "\" y=\"" << px(top + panel_h + 18)
         << "\" font-size=\"10\" text-anchor=\"middle\">" << xml(sequences[s]) << "</text>\n";
    }
    for (const auto& t : report.trajectories) {
      if (t.dataset != dataset || t.region != regions[g]) continue;
      const auto m = static_cast<std::size_t>(std::find(methods.begin(), methods.end(), t.method) - methods.begin());
      const char* color = kPalette[m % 8];
      os << "<g>\n<desc>subject=" << xml(t.subject) << ";method=" << xml(t.method) << ";volumes=";
      for (std::size_t s = 0; s < t.volumes_ml.size(); ++s) {
        if (s) os << ',';
        if (t.volumes_ml[s]) os << format_double(*t.volumes_ml[s]);
      }
      os << "</desc>\n";
      for (std::size_t s = 0; s + 1 < t.volumes_ml.size(); ++s) {
        if (!t.volumes_ml[s] || !t.volumes_ml[s + 1]) continue;
        os << "<line x1=\"" << px(x0 + step * static_cast<double>(s)) << "\" y1=\"" << px(axis.map(*t.volumes_ml[s]))
           << "\" x2=\"" << px(x0 + step * static_cast<double>(s + 1)) << "\" y2=\""
           << px(axis.map(*t.volumes_ml[s + 1])) << "\" stroke=\"" << color << "\" stroke-opacity=\"0.7\"/>\n";
      }
      for (std::size_t s = 0; s < t.volumes_ml.size(); ++s) {
        if (!t.volumes_ml[s]) continue;
        os << "<circle cx=\"" << px(x0 + step * static_cast<double>(s)) << "\" cy=\"" << px(axis.map(*t.volumes_ml[s]))
           << "\" r=\"2.5\" fill=\"" << color << "\"/>\n";
      }
      os << "</g>\n";
    }
  }
  legend(os, methods, width - 110.0, top + 10.0);
  os << "</svg>\n";
  return os.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view content) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot write " + path.string());
  os.write(content.data(), static_cast<std::streamsize>(content.size()));
  os.close();
  if (!os) throw IoError("failed writing " + path.string());
}

std::vector<std::filesystem::path> emit_reports(const std::vector<EvaluationRecord>& records,
                                                const SummaryTable& summary,
                                                const RepeatabilityReport& repeatability,
                                                const std::filesystem::path& out_dir) {
  std::vector<std::filesystem::path> written;
  auto emit = [&](const std::string& name, const std::string& content) {
    write_text_file(out_dir / name, content);
    written.push_back(out_dir / name);
  };
  emit("records.csv", records_to_csv(records));
  emit("summary.csv", summary_to_csv(summary));
  emit("repeatability_friedman.csv", friedman_to_csv(repeatability));
  std::set<std::string> datasets;
  for (const auto& r : records) datasets.insert(r.key.dataset);
  for (const auto& d : datasets) {
    for (SummaryMetric m : {SummaryMetric::kDice, SummaryMetric::kHd95}) {
      emit("boxplot_" + std::string(m == SummaryMetric::kDice ? "dice" : "hd95") + "_" + file_token(d) + ".svg",
           boxplot_svg(records, d, m));
    }
    emit("repeatability_" + file_token(d) + ".svg", repeatability_svg(repeatability, d));
  }
  return written;
}

}  // namespace abdo
