// Robust evaluation statistics over (estimate, reference) DBH pairs.
//
// Inputs are meters; outputs are centimeters or percent as named.

#ifndef DBH_METRICS_HPP
#define DBH_METRICS_HPP

#include <span>
#include <string>
#include <vector>

namespace dbh {

struct EvalRecord {
  std::string tree_id;
  double estimate = 0.0;   // meters
  double reference = 0.0;  // meters, > 0
};

struct BoxStats {
  double median = 0, q1 = 0, q3 = 0;
  double whisker_low = 0, whisker_high = 0;
  std::vector<double> outliers;  // ascending
};

struct MetricsReport {
  std::size_t count = 0;
  double median_bias = 0;  // cm
  double mad = 0;          // cm
  double rcv = 0;          // percent
  double r_squared = 0;
  bool r_squared_defined = false;
  std::vector<double> relative_errors;  // percent, record order
  BoxStats box;                         // of relative_errors
};

/// Median with the mean-of-central-pair convention for even counts.
[[nodiscard]] double median(std::vector<double> values);

/// Type-7 quantile: linear interpolation between order statistics.
[[nodiscard]] double quantile(std::vector<double> values, double p);

[[nodiscard]] double median_bias(std::span<const EvalRecord> records);
[[nodiscard]] double mad(std::span<const EvalRecord> records);
[[nodiscard]] double rcv(std::span<const EvalRecord> records);
/// R^2 of the OLS regression of estimate on reference.
[[nodiscard]] double r_squared(std::span<const EvalRecord> records);
[[nodiscard]] std::vector<double> relative_errors(std::span<const EvalRecord> records);
[[nodiscard]] BoxStats tukey_box(std::span<const double> values);

/// All statistics; R^2 is left undefined (not thrown) when degenerate.
[[nodiscard]] MetricsReport compute_metrics(std::span<const EvalRecord> records);

}  // namespace dbh

#endif  // DBH_METRICS_HPP
