#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "harness/event_log.hpp"

namespace harness {

/// Per-(task, eval block) performance plus per-task training curves of one
/// lifetime.
struct PerformanceTable {
  struct EvalBlock {
    std::int64_t block_num = 0;
    /// Mean episode reward per task; variants weighted equally.
    std::map<std::string, double> performance;
  };
  struct LearnBlock {
    std::int64_t block_num = 0;
    std::vector<std::string> tasks;
  };

  /// Task names in order of first appearance.
  std::vector<std::string> tasks;
  std::vector<EvalBlock> eval_blocks;
  std::vector<LearnBlock> learn_blocks;
  /// Training episode rewards per task in (block, completion) order.
  std::map<std::string, std::vector<double>> training_curves;

  std::optional<double> performance(const std::string& task, std::int64_t eval_block_num) const;
};

PerformanceTable build_performance_table(const std::vector<EpisodeRecord>& episodes);

/// One metric value with the reasons any terms were skipped.
struct MetricValue {
  std::optional<double> value;
  std::map<std::string, double> per_task;
  std::vector<std::string> notes;
};

MetricValue compute_pm(const PerformanceTable& table);
MetricValue compute_mtp(const PerformanceTable& table);
MetricValue compute_mep(const PerformanceTable& table);
MetricValue compute_ft(const PerformanceTable& table);
MetricValue compute_bt(const PerformanceTable& table);

/// Trailing flat-window mean over windows of min(window, size) values; the
/// result has size - w + 1 entries.
std::vector<double> smooth_curve(const std::vector<double>& values, std::size_t window = 10);

struct Saturation {
  double value = 0.0;
  /// 1-based index into the curve.
  std::int64_t experience = 0;
};

/// Peak of the curve and the first index reaching 95% of it (or equal to it
/// when the peak is not positive).
Saturation saturation(const std::vector<double>& values);

/// Area under a unit-spaced curve by the trapezoid rule.
double trapezoid_auc(const std::vector<double>& values);

/// Single-task expert training curves per task.
struct STEStore {
  std::map<std::string, std::vector<double>> curves;

  /// Reads <dir>/<task>/..., where each task directory holds one or more
  /// lifetime logs; multiple logs are averaged pointwise over their common
  /// length.
  static STEStore load(const std::filesystem::path& dir);
  /// Builds a store from the learning episodes of existing logs.
  static STEStore from_episodes(const std::vector<EpisodeRecord>& episodes);
};

MetricValue compute_rp(const PerformanceTable& table, const STEStore& ste);
MetricValue compute_se(const PerformanceTable& table, const STEStore& ste);

struct LifetimeReport {
  std::string lifetime;
  MetricValue pm, mtp, mep, ft, bt, rp, se;
};

LifetimeReport compute_lifetime_report(const std::string& label, const PerformanceTable& table,
                                       const STEStore* ste);

struct AggregateMetric {
  std::optional<double> mean;
  std::optional<double> std_dev;
  std::int64_t count = 0;
};

struct MetricsReport {
  std::vector<LifetimeReport> lifetimes;
  std::map<std::string, AggregateMetric> aggregate;
  /// Lifetimes left out of the report and why.
  std::vector<std::string> notes;
};

inline constexpr const char* kMetricNames[] = {"pm", "mtp", "mep", "ft", "bt", "rp", "se"};

const MetricValue& metric_by_name(const LifetimeReport& report, const std::string& name);

/// Mean and sample standard deviation over lifetimes where a metric exists.
MetricsReport aggregate_report(std::vector<LifetimeReport> lifetimes);

/// Reads every lifetime under `log_dir` and reports on each.
MetricsReport compute_metrics(const std::filesystem::path& log_dir, const STEStore* ste);

std::string report_to_json(const MetricsReport& report);
std::string report_to_csv(const MetricsReport& report);

/// Rows of (lifetime, block_num, task, performance) for plotting.
std::string curve_data_csv(const std::filesystem::path& log_dir);

}  // namespace harness
