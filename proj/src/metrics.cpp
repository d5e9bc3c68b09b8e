#include "dbh/metrics.hpp"

#include "dbh/core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace dbh {

namespace {

constexpr double kCm = 100.0;

void require_nonempty(std::span<const EvalRecord> records) {
  if (records.empty()) throw PreconditionError("metrics need at least one record");
}

std::vector<double> errors_cm(std::span<const EvalRecord> records) {
  std::vector<double> e;
  e.reserve(records.size());
  for (const auto& r : records) e.push_back((r.estimate - r.reference) * kCm);
  return e;
}

}  // namespace

double median(std::vector<double> values) {
  if (values.empty()) throw PreconditionError("median of an empty sequence");
  const std::size_t n = values.size();
  auto mid = values.begin() + static_cast<std::ptrdiff_t>(n / 2);
  std::nth_element(values.begin(), mid, values.end());
  if (n % 2 == 1) return *mid;
  const double upper = *mid;
  const double lower = *std::max_element(values.begin(), mid);
  return 0.5 * (lower + upper);
}

double quantile(std::vector<double> values, double p) {
  if (values.empty()) throw PreconditionError("quantile of an empty sequence");
  std::sort(values.begin(), values.end());
  const double h = (static_cast<double>(values.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

double median_bias(std::span<const EvalRecord> records) {
  require_nonempty(records);
  return median(errors_cm(records));
}

double mad(std::span<const EvalRecord> records) {
  require_nonempty(records);
  const auto e = errors_cm(records);
  const double m = median(e);
  std::vector<double> dev;
  dev.reserve(e.size());
  for (const double x : e) dev.push_back(std::abs(x - m));
  return median(std::move(dev));
}

double rcv(std::span<const EvalRecord> records) {
  require_nonempty(records);
  std::vector<double> refs;
  for (const auto& r : records) refs.push_back(r.reference * kCm);
  const double ref_median = median(std::move(refs));
  if (!(ref_median > 0)) throw PreconditionError("rCV: median reference must be positive");
  return mad(records) / ref_median * 100.0;
}

double r_squared(std::span<const EvalRecord> records) {
  if (records.size() < 3) throw PreconditionError("R^2 needs at least 3 records");
  const auto n = static_cast<double>(records.size());
  double mx = 0, my = 0;
  for (const auto& r : records) {
    mx += r.reference;
    my += r.estimate;
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0, syy = 0;
  for (const auto& r : records) {
    const double dx = r.reference - mx, dy = r.estimate - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  if (!(syy > 0)) throw PreconditionError("R^2 undefined: estimates have zero variance");
  if (!(sxx > 0)) throw PreconditionError("R^2 undefined: references have zero variance");
  const double beta = sxy / sxx;
  const double alpha = my - beta * mx;
  double ss_res = 0;
  for (const auto& r : records) {
    const double res = r.estimate - (alpha + beta * r.reference);
    ss_res += res * res;
  }
  return 1.0 - ss_res / syy;
}

std::vector<double> relative_errors(std::span<const EvalRecord> records) {
  std::vector<double> out;
  out.reserve(records.size());
  for (const auto& r : records) {
    if (!(r.reference > 0)) throw PreconditionError("reference DBH must be positive");
    out.push_back(std::abs(r.estimate - r.reference) / r.reference * 100.0);
  }
  return out;
}

BoxStats tukey_box(std::span<const double> values) {
  if (values.empty()) throw PreconditionError("box statistics of an empty sequence");
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  BoxStats box;
  box.median = quantile(v, 0.5);
  box.q1 = quantile(v, 0.25);
  box.q3 = quantile(v, 0.75);
  const double iqr = box.q3 - box.q1;
  const double lo_fence = box.q1 - 1.5 * iqr, hi_fence = box.q3 + 1.5 * iqr;
  box.whisker_low = box.q1;
  box.whisker_high = box.q3;
  bool first = true;
  for (const double x : v) {  // ascending
    if (x < lo_fence || x > hi_fence) {
      box.outliers.push_back(x);
      continue;
    }
    if (first) box.whisker_low = x;
    first = false;
    box.whisker_high = x;
  }
  return box;
}

MetricsReport compute_metrics(std::span<const EvalRecord> records) {
  require_nonempty(records);
  MetricsReport m;
  m.count = records.size();
  m.median_bias = median_bias(records);
  m.mad = mad(records);
  m.rcv = rcv(records);
  try {
    m.r_squared = r_squared(records);
    m.r_squared_defined = true;
  } catch (const PreconditionError&) {
    m.r_squared_defined = false;
  }
  m.relative_errors = relative_errors(records);
  m.box = tukey_box(m.relative_errors);
  return m;
}

}  // namespace dbh
