// Independent reference implementations used as test oracles.
//
// Each oracle favours the most literal, unoptimized formulation of its
// definition (full sorts, exhaustive loops, O(n^2) neighbour scans) so that
// it shares no code path with the library under test.

#ifndef DBH_TESTS_ORACLES_HPP
#define DBH_TESTS_ORACLES_HPP

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <deque>
#include <map>
#include <numbers>
#include <vector>

namespace oracle {

inline double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

/// Hyndman-Fan type 7.
inline double quantile(std::vector<double> v, double p) {
  std::sort(v.begin(), v.end());
  const double pos = p * static_cast<double>(v.size() - 1);
  const double f = std::floor(pos);
  const auto i = static_cast<std::size_t>(f);
  if (i + 1 >= v.size()) return v.back();
  return v[i] * (1.0 - (pos - f)) + v[i + 1] * (pos - f);
}

struct Pair {
  double est, ref;  // meters
};

inline double median_bias_cm(const std::vector<Pair>& r) {
  std::vector<double> e;
  for (const auto& x : r) e.push_back(100.0 * x.est - 100.0 * x.ref);
  return median(e);
}

inline double mad_cm(const std::vector<Pair>& r) {
  std::vector<double> e;
  for (const auto& x : r) e.push_back(100.0 * x.est - 100.0 * x.ref);
  const double m = median(e);
  std::vector<double> d;
  for (const double x : e) d.push_back(std::fabs(x - m));
  return median(d);
}

inline double rcv_pct(const std::vector<Pair>& r) {
  std::vector<double> y;
  for (const auto& x : r) y.push_back(100.0 * x.ref);
  return 100.0 * mad_cm(r) / median(y);
}

/// Squared Pearson correlation, which equals the OLS R^2 of a simple regression.
inline double r_squared(const std::vector<Pair>& r) {
  const double n = static_cast<double>(r.size());
  double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
  for (const auto& p : r) {
    sx += p.ref;
    sy += p.est;
  }
  const double mx = sx / n, my = sy / n;
  for (const auto& p : r) {
    sxx += (p.ref - mx) * (p.ref - mx);
    syy += (p.est - my) * (p.est - my);
    sxy += (p.ref - mx) * (p.est - my);
  }
  return sxy * sxy / (sxx * syy);
}

inline std::vector<double> relative_errors(const std::vector<Pair>& r) {
  std::vector<double> out;
  for (const auto& p : r) out.push_back(std::fabs(p.est - p.ref) / p.ref * 100.0);
  return out;
}

struct Box {
  double median, q1, q3, lo, hi;
  std::vector<double> outliers;
};

inline Box tukey(std::vector<double> v) {
  Box b;
  b.median = quantile(v, 0.5);
  b.q1 = quantile(v, 0.25);
  b.q3 = quantile(v, 0.75);
  const double iqr = b.q3 - b.q1;
  std::sort(v.begin(), v.end());
  std::vector<double> inside;
  for (const double x : v) {
    if (x < b.q1 - 1.5 * iqr || x > b.q3 + 1.5 * iqr) b.outliers.push_back(x);
    else inside.push_back(x);
  }
  b.lo = inside.empty() ? b.q1 : inside.front();
  b.hi = inside.empty() ? b.q3 : inside.back();
  return b;
}

/// Exhaustive Otsu over the 255 interior edges of a 256-bin histogram on
/// [min, max], class means from bin centers, first maximum wins (within a
/// relative 1e-12 so that identical partitions tie).
inline double otsu(const std::vector<double>& values) {
  const double lo = *std::min_element(values.begin(), values.end());
  const double hi = *std::max_element(values.begin(), values.end());
  const double w = (hi - lo) / 256.0;
  auto bin = [&](double v) { return std::min(255, static_cast<int>(std::floor((v - lo) / w))); };
  std::vector<double> score(256, 0.0);
  double best = 0;
  for (int k = 1; k < 256; ++k) {
    double n0 = 0, n1 = 0, s0 = 0, s1 = 0;
    for (const double v : values) {
      const int b = bin(v);
      const double center = lo + (b + 0.5) * w;
      if (b < k) {
        n0 += 1;
        s0 += center;
      } else {
        n1 += 1;
        s1 += center;
      }
    }
    if (n0 == 0 || n1 == 0) continue;
    const double n = n0 + n1;
    const double d = s0 / n0 - s1 / n1;
    score[static_cast<std::size_t>(k)] = (n0 / n) * (n1 / n) * d * d;
    best = std::max(best, score[static_cast<std::size_t>(k)]);
  }
  for (int k = 1; k < 256; ++k)
    if (score[static_cast<std::size_t>(k)] >= best * (1.0 - 1e-12)) return lo + k * w;
  return lo + w;
}

/// Textbook DBSCAN with O(n^2) neighbourhoods, seeds in index order.
inline std::vector<int> dbscan(const Eigen::Matrix3Xd& p, double eps, int min_pts) {
  const auto n = static_cast<int>(p.cols());
  std::vector<std::vector<int>> nb(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if ((p.col(i) - p.col(j)).norm() <= eps) nb[static_cast<std::size_t>(i)].push_back(j);
  std::vector<int> label(static_cast<std::size_t>(n), -2);  // -2 unvisited
  int c = 0;
  for (int i = 0; i < n; ++i) {
    if (label[static_cast<std::size_t>(i)] != -2) continue;
    if (static_cast<int>(nb[static_cast<std::size_t>(i)].size()) < min_pts) {
      label[static_cast<std::size_t>(i)] = -1;
      continue;
    }
    label[static_cast<std::size_t>(i)] = c;
    std::deque<int> queue(nb[static_cast<std::size_t>(i)].begin(), nb[static_cast<std::size_t>(i)].end());
    while (!queue.empty()) {
      const int j = queue.front();
      queue.pop_front();
      auto& lj = label[static_cast<std::size_t>(j)];
      if (lj == -1) lj = c;  // border point previously marked noise
      if (lj != -2) continue;
      lj = c;
      if (static_cast<int>(nb[static_cast<std::size_t>(j)].size()) >= min_pts)
        queue.insert(queue.end(), nb[static_cast<std::size_t>(j)].begin(), nb[static_cast<std::size_t>(j)].end());
    }
    ++c;
  }
  return label;
}

/// True when two labelings induce the same partition (noise must match noise).
inline bool same_partition(const std::vector<int>& a, const std::vector<int>& b) {
  if (a.size() != b.size()) return false;
  std::map<int, int> ab, ba;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if ((a[i] < 0) != (b[i] < 0)) return false;
    if (a[i] < 0) continue;
    auto [it1, new1] = ab.emplace(a[i], b[i]);
    auto [it2, new2] = ba.emplace(b[i], a[i]);
    if (it1->second != b[i] || it2->second != a[i]) return false;
  }
  return true;
}

/// Perimeter of the ellipse with semi-axes a, b by composite Simpson.
inline double ellipse_perimeter(double a, double b, int panels = 1 << 20) {
  auto f = [&](double t) { return std::sqrt(a * a * std::sin(t) * std::sin(t) + b * b * std::cos(t) * std::cos(t)); };
  const double h = 2 * std::numbers::pi / panels;
  double s = f(0) + f(2 * std::numbers::pi);
  for (int k = 1; k < panels; ++k) s += (k % 2 ? 4 : 2) * f(k * h);
  return s * h / 3;
}

}  // namespace oracle

#endif  // DBH_TESTS_ORACLES_HPP
