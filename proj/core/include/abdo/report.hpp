#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "abdo/bench.hpp"

namespace abdo {

/// Shortest decimal text that round-trips to the same double.
std::string format_double(double value);

/// Columns: dataset,subject,sequence,method,region,dice,hd95_mm,gt_volume_ml,
/// pred_volume_ml. Missing metrics are empty fields.
std::string records_to_csv(const std::vector<EvaluationRecord>& records);
std::vector<EvaluationRecord> parse_records_csv(std::string_view text);
std::vector<EvaluationRecord> read_records_csv(const std::filesystem::path& path);

/// Columns: dataset,region,metric,method,n,n_missing,mean,std,mean_std,best
/// and, when the table has one, significant. Numbers use two decimals.
std::string summary_to_csv(const SummaryTable& summary);

/// Columns: dataset,region,method,metric,subjects_used,subjects_dropped,
/// chi2,p_value.
std::string friedman_to_csv(const RepeatabilityReport& report);

struct BoxStats {
  std::size_t n = 0;
  double q1 = 0.0;
  double median = 0.0;
  double q3 = 0.0;
  /// Most extreme values within 1.5 IQR of the box.
  double whisker_low = 0.0;
  double whisker_high = 0.0;
  std::vector<double> outliers;
};

/// Quartiles by linear interpolation between order statistics.
BoxStats box_stats(std::vector<double> values);

/// Box plot per region and method. Each box is a <g> whose <desc> reads
/// `region=..;method=..;n=..;q1=..;median=..;q3=..;whisker_low=..;whisker_high=..;outliers=..`.
std::string boxplot_svg(const std::vector<EvaluationRecord>& records, const std::string& dataset,
                        SummaryMetric metric);

/// Per-region panels of per-subject volume lines across sequences, broken at
/// missing points.
std::string repeatability_svg(const RepeatabilityReport& report, const std::string& dataset);

/// Writes records.csv, summary.csv, repeatability_friedman.csv and, when there
/// are records, boxplot_<metric>_<dataset>.svg and repeatability_<dataset>.svg.
/// Returns the written paths.
std::vector<std::filesystem::path> emit_reports(const std::vector<EvaluationRecord>& records,
                                                const SummaryTable& summary,
                                                const RepeatabilityReport& repeatability,
                                                const std::filesystem::path& out_dir);

/// Writes `content` to `path`, creating parent directories.
void write_text_file(const std::filesystem::path& path, std::string_view content);

}  // namespace abdo
