#include "dbh/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <variant>

namespace dbh {

namespace {

using Field = std::variant<double PipelineConfig::*, int PipelineConfig::*,
                           std::uint32_t PipelineConfig::*, std::uint64_t PipelineConfig::*,
                           bool PipelineConfig::*>;

const std::vector<std::pair<std::string, Field>>& fields() {
  static const std::vector<std::pair<std::string, Field>> table = {
      {"seed", &PipelineConfig::seed},
      {"min_label_count", &PipelineConfig::min_label_count},
      {"flip_v", &PipelineConfig::flip_v},
      {"ground_dist_thresh", &PipelineConfig::ground_dist_thresh},
      {"ground_iterations", &PipelineConfig::ground_iterations},
      {"ground_clearance", &PipelineConfig::ground_clearance},
      {"normal_k", &PipelineConfig::normal_k},
      {"max_tilt_deg", &PipelineConfig::max_tilt_deg},
      {"dbscan_eps", &PipelineConfig::dbscan_eps},
      {"dbscan_min_pts", &PipelineConfig::dbscan_min_pts},
      {"size_filter_log", &PipelineConfig::size_filter_log},
      {"size_filter_min_gap_ratio", &PipelineConfig::size_filter_min_gap_ratio},
      {"expand_radius", &PipelineConfig::expand_radius},
      {"expand_max_passes", &PipelineConfig::expand_max_passes},
      {"transfer_radius", &PipelineConfig::transfer_radius},
      {"rigid_only", &PipelineConfig::rigid_only},
      {"band_low", &PipelineConfig::band_low},
      {"band_high", &PipelineConfig::band_high},
      {"ransac_sample_size", &PipelineConfig::ransac_sample_size},
      {"ransac_inlier_tol", &PipelineConfig::ransac_inlier_tol},
      {"ransac_iterations", &PipelineConfig::ransac_iterations},
      {"fourier_degree", &PipelineConfig::fourier_degree},
      {"fourier_circle_center", &PipelineConfig::fourier_circle_center},
      {"spline_ctrl", &PipelineConfig::spline_ctrl},
      {"alpha_scale", &PipelineConfig::alpha_scale},
  };
  return table;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T value{};
  const char* first = text.data();
  const char* last = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc{} || ptr != last)
    throw ParseError("config key '" + key + "': cannot parse value '" + text + "'");
  return value;
}

/// Shortest text that parses back to the same double.
std::string format_double(double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

}  // namespace

void PipelineConfig::set(const std::string& key, const std::string& value) {
  for (const auto& [name, field] : fields()) {
    if (name != key) continue;
    std::visit(
        [&](auto member) {
          using T = std::remove_reference_t<decltype(this->*member)>;
          if constexpr (std::is_same_v<T, bool>) {
            if (value == "true" || value == "1") this->*member = true;
            else if (value == "false" || value == "0") this->*member = false;
            else throw ParseError("config key '" + key + "': expected true/false, got '" + value + "'");
          } else {
            this->*member = parse_number<T>(key, value);
          }
        },
        field);
    return;
  }
  throw ParseError("unknown config key '" + key + "'");
}

std::vector<std::pair<std::string, std::string>> PipelineConfig::to_key_values() const {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& [name, field] : fields()) {
    std::visit(
        [&](auto member) {
          using T = std::remove_cvref_t<decltype(this->*member)>;
          if constexpr (std::is_same_v<T, bool>) out.emplace_back(name, (this->*member) ? "true" : "false");
          else if constexpr (std::is_same_v<T, double>) out.emplace_back(name, format_double(this->*member));
          else out.emplace_back(name, std::to_string(this->*member));
        },
        field);
  }
  return out;
}

void PipelineConfig::validate() const {
  auto require = [](bool ok, const char* key) {
    if (!ok) throw PreconditionError(std::string("config: '") + key + "' must be strictly positive");
  };
  require(min_label_count >= 1, "min_label_count");
  require(ground_dist_thresh > 0, "ground_dist_thresh");
  require(ground_iterations > 0, "ground_iterations");
  require(ground_clearance > 0, "ground_clearance");
  require(normal_k >= 3, "normal_k");
  require(max_tilt_deg > 0 && max_tilt_deg <= 90, "max_tilt_deg");
  require(dbscan_eps > 0, "dbscan_eps");
  require(dbscan_min_pts > 0, "dbscan_min_pts");
  if (!(size_filter_min_gap_ratio >= 0))
    throw PreconditionError("config: 'size_filter_min_gap_ratio' must be non-negative");
  require(expand_radius > 0, "expand_radius");
  require(expand_max_passes > 0, "expand_max_passes");
  require(transfer_radius > 0, "transfer_radius");
  require(band_low > 0, "band_low");
  require(band_high > 0, "band_high");
  if (!(band_low < band_high)) throw PreconditionError("config: band_low must be below band_high");
  require(ransac_sample_size > 0, "ransac_sample_size");
  require(ransac_inlier_tol > 0, "ransac_inlier_tol");
  require(ransac_iterations > 0, "ransac_iterations");
  require(fourier_degree > 0, "fourier_degree");
  require(spline_ctrl >= 4, "spline_ctrl");
  require(alpha_scale > 0, "alpha_scale");
}

FitOptions PipelineConfig::fit_options() const {
  FitOptions opts;
  opts.band_low = band_low;
  opts.band_high = band_high;
  opts.ransac.sample_size = ransac_sample_size;
  opts.ransac.inlier_tol = ransac_inlier_tol;
  opts.ransac.iterations = ransac_iterations;
  opts.ransac.fourier_degree = fourier_degree;
  opts.ransac.fourier_circle_center = fourier_circle_center;
  opts.ransac.spline_ctrl = spline_ctrl;
  opts.ransac.alpha_scale = alpha_scale;
  return opts;
}

PipelineConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open config file " + path.string());
  PipelineConfig cfg;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ParseError(path.string() + ":" + std::to_string(lineno) + ": expected 'key = value'");
    try {
      cfg.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const ParseError& e) {
      throw ParseError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return cfg;
}

void write_config(const PipelineConfig& config, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write config file " + path.string());
  for (const auto& [k, v] : config.to_key_values()) out << k << " = " << v << '\n';
}

}  // namespace dbh
