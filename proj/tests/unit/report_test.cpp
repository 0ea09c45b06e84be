#include <gtest/gtest.h>

#include <fstream>
#include <regex>
#include <sstream>

#include <abdo/csv.hpp>
#include <abdo/error.hpp>
#include <abdo/report.hpp>

#include "oracles.hpp"
#include "support.hpp"

namespace {

using abdo::EvaluationRecord;

EvaluationRecord rec(std::string dataset, std::string method, std::string subject, std::string region,
                     std::optional<double> dice, std::optional<double> hd, double pred_ml = 10.0) {
  EvaluationRecord r;
  r.key = {std::move(dataset), std::move(subject), "T1", std::move(method)};
  r.region = std::move(region);
  r.dice = dice;
  r.hd95_mm = hd;
  r.gt_volume_ml = 12.5;
  r.pred_volume_ml = pred_ml;
  return r;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

TEST(FormatDouble, ShortestRoundTrip) {
  EXPECT_EQ(abdo::format_double(0.1), "0.1");
  EXPECT_EQ(abdo::format_double(1.0), "1");
  EXPECT_EQ(abdo::format_double(0.027000000000000003), "0.027000000000000003");
  EXPECT_EQ(std::stod(abdo::format_double(1.0 / 3.0)), 1.0 / 3.0);
}

TEST(RecordsCsv, RoundTripWithMissing) {
  const std::vector<EvaluationRecord> records{
      rec("D,1", "A", "s1", "liver", 0.91234567890123, 3.5),
      rec("D,1", "A", "s2", "liver", std::nullopt, std::nullopt, 0.0)};
  const std::string text = abdo::records_to_csv(records);
  EXPECT_EQ(text.substr(0, text.find('\n')),
            "dataset,subject,sequence,method,region,dice,hd95_mm,gt_volume_ml,pred_volume_ml");
  const auto back = abdo::parse_records_csv(text);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].key, records[0].key);
  EXPECT_EQ(*back[0].dice, *records[0].dice);
  EXPECT_FALSE(back[1].dice.has_value());
  EXPECT_EQ(back[1].pred_volume_ml, 0.0);
  EXPECT_EQ(abdo::records_to_csv(back), text);
}

TEST(RecordsCsv, BadNumberCitesLine) {
  const std::string text =
      "dataset,subject,sequence,method,region,dice,hd95_mm,gt_volume_ml,pred_volume_ml\n"
      "D,s,T1,A,liver,abc,1,1,1\n";
  try {
    abdo::parse_records_csv(text);
    FAIL();
  } catch (const abdo::ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
  }
}

TEST(SummaryCsv, HandComputedLayout) {
  abdo::SummaryTable t;
  t.has_significance = true;
  abdo::SummaryCell c;
  c.dataset = "D";
  c.region = "liver";
  c.method = "A";
  c.n = 3;
  c.n_missing = 1;
  c.mean = 0.912;
  c.stddev = 0.0349;
  c.best = true;
  c.significant = true;
  t.cells.push_back(c);
  c.method = "B";
  c.n = 1;
  c.mean = 0.5;
  c.stddev.reset();
  c.best = false;
  c.significant = false;
  t.cells.push_back(c);
  EXPECT_EQ(abdo::summary_to_csv(t),
            "dataset,region,metric,method,n,n_missing,mean,std,mean_std,best,significant\n"
            "D,liver,dice,A,3,1,0.91,0.03,0.91 (0.03),1,1\n"
            "D,liver,dice,B,1,1,0.50,,0.50,0,0\n");
  t.has_significance = false;
  EXPECT_EQ(abdo::summary_to_csv(t).substr(0, 63),
            "dataset,region,metric,method,n,n_missing,mean,std,mean_std,best");
}

TEST(BoxStats, MatchesOracleQuartiles) {
  std::mt19937_64 rng(12);
  std::lognormal_distribution<double> dist(0.0, 0.8);
  for (int t = 0; t < 30; ++t) {
    std::vector<double> v(1 + t * 3);
    for (auto& x : v) x = dist(rng);
    const auto s = abdo::box_stats(v);
    EXPECT_DOUBLE_EQ(s.q1, oracle::quantile(v, 0.25));
    EXPECT_DOUBLE_EQ(s.median, oracle::quantile(v, 0.5));
    EXPECT_DOUBLE_EQ(s.q3, oracle::quantile(v, 0.75));
    const double iqr = s.q3 - s.q1;
    std::size_t outliers = 0;
    double lo = s.q1, hi = s.q3;
    for (double x : v) {
      if (x < s.q1 - 1.5 * iqr || x > s.q3 + 1.5 * iqr) {
        ++outliers;
      } else {
        lo = std::min(lo, x);
        hi = std::max(hi, x);
      }
    }
    EXPECT_EQ(s.outliers.size(), outliers);
    EXPECT_EQ(s.whisker_low, lo);
    EXPECT_EQ(s.whisker_high, hi);
  }
  EXPECT_THROW(abdo::box_stats({}), abdo::EmptyInput);
}

TEST(BoxStats, SmallExample) {
  const auto s = abdo::box_stats({1, 2, 3, 4, 100});
  EXPECT_DOUBLE_EQ(s.q1, 2.0);
  EXPECT_DOUBLE_EQ(s.median, 3.0);
  EXPECT_DOUBLE_EQ(s.q3, 4.0);
  EXPECT_DOUBLE_EQ(s.whisker_low, 1.0);
  EXPECT_DOUBLE_EQ(s.whisker_high, 4.0);
  EXPECT_EQ(s.outliers, (std::vector<double>{100}));
}

TEST(BoxplotSvg, DescribesEveryBox) {
  std::vector<EvaluationRecord> records;
  for (int s = 0; s < 9; ++s) {
    records.push_back(rec("D", "A", "s" + std::to_string(s), "liver", 0.8 + 0.01 * s, 2.0 + s));
    records.push_back(rec("D", "B", "s" + std::to_string(s), "liver", 0.7 + 0.02 * s, 3.0));
  }
  records.push_back(rec("Other", "A", "x", "liver", 0.1, 1.0));
  const std::string svg = abdo::boxplot_svg(records, "D", abdo::SummaryMetric::kDice);
  EXPECT_EQ(svg.rfind("<?xml", 0), 0u);
  std::regex desc("<desc>region=([^;]+);method=([^;]+);n=(\\d+);q1=([^;]+);median=([^;]+);q3=([^;]+);");
  std::vector<std::smatch> matches;
  for (auto it = std::sregex_iterator(svg.begin(), svg.end(), desc); it != std::sregex_iterator(); ++it) {
    matches.push_back(*it);
  }
  ASSERT_EQ(matches.size(), 2u);
  EXPECT_EQ(matches[0][2], "A");
  EXPECT_EQ(matches[0][3], "9");
  EXPECT_DOUBLE_EQ(std::stod(matches[0][5]), 0.84);
  EXPECT_DOUBLE_EQ(std::stod(matches[1][4]), oracle::quantile({0.7, 0.72, 0.74, 0.76, 0.78, 0.8, 0.82, 0.84, 0.86}, 0.25));
}

TEST(RepeatabilitySvg, GapInDescription) {
  abdo::RepeatabilityReport r;
  r.sequences["D"] = {"T1", "T2", "DWI"};
  r.trajectories.push_back({"D", "s1", "liver", "A", {10.0, std::nullopt, 12.5}});
  const std::string svg = abdo::repeatability_svg(r, "D");
  EXPECT_NE(svg.find("subject=s1;method=A;volumes=10,,12.5"), std::string::npos);
  // No segment crosses the gap.
  EXPECT_EQ(svg.find("<line x1", svg.find("volumes=")), std::string::npos);
}

TEST(EmitReports, ByteIdenticalAcrossRuns) {
  std::vector<EvaluationRecord> records;
  for (int s = 0; s < 6; ++s) {
    records.push_back(rec("D/x", "A", "s" + std::to_string(s), "liver", 0.9 - 0.01 * s, 1.5 + s));
    records.push_back(rec("D/x", "B", "s" + std::to_string(s), "liver", 0.8, 4.0));
  }
  const auto summary = abdo::summarize(records);
  const auto rep = abdo::repeatability_report(records);
  testing_support::TempDir a("report_a"), b("report_b");
  const auto files_a = abdo::emit_reports(records, summary, rep, a.path());
  const auto files_b = abdo::emit_reports(records, summary, rep, b.path());
  ASSERT_EQ(files_a.size(), 6u);
  EXPECT_TRUE(std::filesystem::exists(a / "boxplot_dice_D_x.svg"));
  EXPECT_TRUE(std::filesystem::exists(a / "repeatability_D_x.svg"));
  for (std::size_t i = 0; i < files_a.size(); ++i) {
    EXPECT_EQ(files_a[i].filename(), files_b[i].filename());
    EXPECT_EQ(slurp(files_a[i]), slurp(files_b[i])) << files_a[i];
  }
}

TEST(EmitReports, NoRecordsWritesHeadersOnly) {
  testing_support::TempDir dir("report_empty");
  const auto files = abdo::emit_reports({}, abdo::summarize({}), abdo::repeatability_report({}), dir.path());
  ASSERT_EQ(files.size(), 3u);
  for (const auto& f : files) {
    const auto t = abdo::read_csv(f);
    EXPECT_FALSE(t.header.empty());
    EXPECT_TRUE(t.rows.empty());
  }
}

}  // namespace
