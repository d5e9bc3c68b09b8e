#include "dbh/io.hpp"

#include <json.hpp>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <limits>
#include <set>
#include <sstream>

namespace dbh {

using json = nlohmann::ordered_json;

static_assert(std::endian::native == std::endian::little, "binary PLY I/O assumes a little-endian host");

namespace {

std::string where(const fs::path& path, std::size_t line) {
  return path.string() + ":" + std::to_string(line) + ": ";
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::ofstream open_output(const fs::path& path, bool binary = false) {
  std::ofstream out(path, binary ? std::ios::binary | std::ios::trunc : std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  return out;
}

std::vector<std::string> split_ws(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream ss(line);
  std::string tok;
  while (ss >> tok) out.push_back(tok);
  return out;
}

bool parse_double(const std::string& tok, double& value) {
  char* end = nullptr;
  value = std::strtod(tok.c_str(), &end);
  return end != tok.c_str() && *end == '\0';
}

double round_to(double v, double quantum) { return std::round(v / quantum) * quantum; }

// ---------------------------------------------------------------------------
// PLY
// ---------------------------------------------------------------------------

enum class PlyType { i8, u8, i16, u16, i32, u32, f32, f64 };

std::optional<PlyType> ply_type(const std::string& name) {
  if (name == "char" || name == "int8") return PlyType::i8;
  if (name == "uchar" || name == "uint8") return PlyType::u8;
  if (name == "short" || name == "int16") return PlyType::i16;
  if (name == "ushort" || name == "uint16") return PlyType::u16;
  if (name == "int" || name == "int32") return PlyType::i32;
  if (name == "uint" || name == "uint32") return PlyType::u32;
  if (name == "float" || name == "float32") return PlyType::f32;
  if (name == "double" || name == "float64") return PlyType::f64;
  return std::nullopt;
}

std::size_t ply_size(PlyType t) {
  switch (t) {
    case PlyType::i8: case PlyType::u8: return 1;
    case PlyType::i16: case PlyType::u16: return 2;
    case PlyType::i32: case PlyType::u32: case PlyType::f32: return 4;
    case PlyType::f64: return 8;
  }
  return 0;
}

double read_binary(const char* p, PlyType t) {
  auto get = [p](auto v) {
    std::memcpy(&v, p, sizeof(v));
    return static_cast<double>(v);
  };
  switch (t) {
    case PlyType::i8: return get(std::int8_t{});
    case PlyType::u8: return get(std::uint8_t{});
    case PlyType::i16: return get(std::int16_t{});
    case PlyType::u16: return get(std::uint16_t{});
    case PlyType::i32: return get(std::int32_t{});
    case PlyType::u32: return get(std::uint32_t{});
    case PlyType::f32: return get(float{});
    case PlyType::f64: return get(double{});
  }
  return 0;
}

struct PlyProperty {
  std::string name;
  PlyType type = PlyType::f32;
  bool is_list = false;
  PlyType count_type = PlyType::u8;
};

struct PlyElement {
  std::string name;
  std::size_t count = 0;
  std::vector<PlyProperty> properties;
};

struct PlyHeader {
  bool binary = false;
  std::vector<PlyElement> elements;
  std::size_t body_offset = 0;  // byte offset of the first body byte
  std::size_t header_lines = 0;
};

PlyHeader parse_ply_header(const std::string& data, const fs::path& path) {
  PlyHeader header;
  std::size_t pos = 0, line_no = 0;
  bool have_format = false, ended = false;
  while (pos < data.size()) {
    const std::size_t eol = data.find('\n', pos);
    if (eol == std::string::npos) break;
    std::string line = data.substr(pos, eol - pos);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    pos = eol + 1;
    ++line_no;
    const auto tok = split_ws(line);
    if (line_no == 1) {
      if (tok.size() != 1 || tok[0] != "ply") throw ParseError(where(path, 1) + "missing 'ply' magic");
      continue;
    }
    if (tok.empty() || tok[0] == "comment" || tok[0] == "obj_info") continue;
    if (tok[0] == "format") {
      if (tok.size() != 3) throw ParseError(where(path, line_no) + "malformed format line");
      if (tok[1] == "ascii") header.binary = false;
      else if (tok[1] == "binary_little_endian") header.binary = true;
      else throw ParseError(where(path, line_no) + "unsupported PLY format '" + tok[1] + "'");
      have_format = true;
    } else if (tok[0] == "element") {
      if (tok.size() != 3) throw ParseError(where(path, line_no) + "malformed element line");
      PlyElement el;
      el.name = tok[1];
      try {
        const long long c = std::stoll(tok[2]);
        if (c < 0) throw std::invalid_argument("negative");
        el.count = static_cast<std::size_t>(c);
      } catch (const std::exception&) {
        throw ParseError(where(path, line_no) + "invalid element count '" + tok[2] + "'");
      }
      header.elements.push_back(el);
    } else if (tok[0] == "property") {
      if (header.elements.empty()) throw ParseError(where(path, line_no) + "property before any element");
      PlyProperty prop;
      if (tok.size() == 5 && tok[1] == "list") {
        const auto ct = ply_type(tok[2]);
        const auto vt = ply_type(tok[3]);
        if (!ct || !vt) throw ParseError(where(path, line_no) + "unknown list property type");
        prop.is_list = true;
        prop.count_type = *ct;
        prop.type = *vt;
        prop.name = tok[4];
      } else if (tok.size() == 3) {
        const auto t = ply_type(tok[1]);
        if (!t) throw ParseError(where(path, line_no) + "unknown property type '" + tok[1] + "'");
        prop.type = *t;
        prop.name = tok[2];
      } else {
        throw ParseError(where(path, line_no) + "malformed property line");
      }
      header.elements.back().properties.push_back(prop);
    } else if (tok[0] == "end_header") {
      ended = true;
      break;
    } else {
      throw ParseError(where(path, line_no) + "unexpected header keyword '" + tok[0] + "'");
    }
  }
  if (!ended) throw ParseError(path.string() + ": PLY header has no end_header");
  if (!have_format) throw ParseError(path.string() + ": PLY header has no format line");
  header.body_offset = pos;
  header.header_lines = line_no;
  return header;
}

struct VertexLayout {
  int x = -1, y = -1, z = -1, nx = -1, ny = -1, nz = -1, r = -1, g = -1, b = -1;
};

VertexLayout vertex_layout(const PlyElement& el, const fs::path& path) {
  VertexLayout l;
  for (std::size_t i = 0; i < el.properties.size(); ++i) {
    const auto& p = el.properties[i];
    const int k = static_cast<int>(i);
    if (p.is_list) continue;
    if (p.name == "x") l.x = k;
    else if (p.name == "y") l.y = k;
    else if (p.name == "z") l.z = k;
    else if (p.name == "nx") l.nx = k;
    else if (p.name == "ny") l.ny = k;
    else if (p.name == "nz") l.nz = k;
    else if (p.name == "red" || p.name == "r") l.r = k;
    else if (p.name == "green" || p.name == "g") l.g = k;
    else if (p.name == "blue" || p.name == "b") l.b = k;
  }
  if (l.x < 0 || l.y < 0 || l.z < 0)
    throw ParseError(path.string() + ": vertex element lacks x/y/z properties");
  const int normals = (l.nx >= 0) + (l.ny >= 0) + (l.nz >= 0);
  const int colors = (l.r >= 0) + (l.g >= 0) + (l.b >= 0);
  if (normals != 0 && normals != 3) throw ParseError(path.string() + ": incomplete normal properties");
  if (colors != 0 && colors != 3) throw ParseError(path.string() + ": incomplete color properties");
  return l;
}

std::uint8_t to_color(double v, PlyType t) {
  if (t == PlyType::f32 || t == PlyType::f64) v *= 255.0;
  return static_cast<std::uint8_t>(std::clamp(std::round(v), 0.0, 255.0));
}

void finalize_cloud(PointCloud& cloud) {
  if (!cloud.has_normals()) return;
  for (Index i = 0; i < cloud.normals.cols(); ++i) {
    const double len = cloud.normals.col(i).norm();
    if (!(len > 0) || !std::isfinite(len)) {
      cloud.normals.resize(3, 0);  // unusable normals; downstream recomputes them
      return;
    }
    cloud.normals.col(i) /= len;
  }
}

PointCloud load_ply(const std::string& data, const fs::path& path) {
  const PlyHeader header = parse_ply_header(data, path);
  const auto vit = std::find_if(header.elements.begin(), header.elements.end(),
                                [](const PlyElement& e) { return e.name == "vertex"; });
  if (vit == header.elements.end()) throw ParseError(path.string() + ": PLY has no vertex element");
  const VertexLayout layout = vertex_layout(*vit, path);
  const auto n = static_cast<Index>(vit->count);

  PointCloud cloud;
  cloud.points.resize(3, n);
  if (layout.nx >= 0) cloud.normals.resize(3, n);
  if (layout.r >= 0) cloud.colors.resize(3, n);

  auto store = [&](Index i, const std::vector<double>& values, const std::string& loc) {
    const Vec3 p(values[static_cast<std::size_t>(layout.x)], values[static_cast<std::size_t>(layout.y)],
                 values[static_cast<std::size_t>(layout.z)]);
    if (!p.allFinite()) throw ParseError(loc + "non-finite coordinate in vertex " + std::to_string(i));
    cloud.points.col(i) = p;
    if (layout.nx >= 0)
      cloud.normals.col(i) = Vec3(values[static_cast<std::size_t>(layout.nx)], values[static_cast<std::size_t>(layout.ny)],
                                  values[static_cast<std::size_t>(layout.nz)]);
    if (layout.r >= 0) {
      const auto& props = vit->properties;
      cloud.colors(0, i) = to_color(values[static_cast<std::size_t>(layout.r)], props[static_cast<std::size_t>(layout.r)].type);
      cloud.colors(1, i) = to_color(values[static_cast<std::size_t>(layout.g)], props[static_cast<std::size_t>(layout.g)].type);
      cloud.colors(2, i) = to_color(values[static_cast<std::size_t>(layout.b)], props[static_cast<std::size_t>(layout.b)].type);
    }
  };

  if (!header.binary) {
    std::size_t pos = header.body_offset, line_no = header.header_lines;
    auto next_line = [&](std::string& line) {
      while (pos < data.size()) {
        std::size_t eol = data.find('\n', pos);
        if (eol == std::string::npos) eol = data.size();
        line = data.substr(pos, eol - pos);
        pos = eol + 1;
        ++line_no;
        if (!split_ws(line).empty()) return true;
      }
      return false;
    };
    std::string line;
    for (const auto& el : header.elements) {
      const bool is_vertex = &el == &*vit;
      for (std::size_t i = 0; i < el.count; ++i) {
        if (!next_line(line))
          throw ParseError(path.string() + ": element '" + el.name + "' declares " + std::to_string(el.count) +
                           " entries but the file ends after " + std::to_string(i));
        if (!is_vertex) continue;
        const auto tok = split_ws(line);
        if (tok.size() != el.properties.size())
          throw ParseError(where(path, line_no) + "expected " + std::to_string(el.properties.size()) +
                           " values, found " + std::to_string(tok.size()));
        std::vector<double> values(tok.size());
        for (std::size_t k = 0; k < tok.size(); ++k) {
          if (!parse_double(tok[k], values[k]))
            throw ParseError(where(path, line_no) + "cannot parse value '" + tok[k] + "'");
        }
        store(static_cast<Index>(i), values, where(path, line_no));
      }
    }
  } else {
    std::size_t offset = header.body_offset;
    auto need = [&](std::size_t bytes, const PlyElement& el, std::size_t i) {
      if (offset + bytes > data.size())
        throw ParseError(path.string() + ": element '" + el.name + "' declares " + std::to_string(el.count) +
                         " entries but the file ends after " + std::to_string(i) + " (byte offset " +
                         std::to_string(offset) + ")");
    };
    for (const auto& el : header.elements) {
      const bool is_vertex = &el == &*vit;
      std::vector<double> values(el.properties.size());
      for (std::size_t i = 0; i < el.count; ++i) {
        for (std::size_t k = 0; k < el.properties.size(); ++k) {
          const auto& prop = el.properties[k];
          if (prop.is_list) {
            need(ply_size(prop.count_type), el, i);
            const double c = read_binary(data.data() + offset, prop.count_type);
            offset += ply_size(prop.count_type);
            if (c < 0) throw ParseError(path.string() + ": negative list length at byte " + std::to_string(offset));
            const auto bytes = static_cast<std::size_t>(c) * ply_size(prop.type);
            need(bytes, el, i);
            offset += bytes;
            values[k] = 0;
          } else {
            need(ply_size(prop.type), el, i);
            values[k] = read_binary(data.data() + offset, prop.type);
            offset += ply_size(prop.type);
          }
        }
        if (is_vertex) store(static_cast<Index>(i), values, path.string() + ": byte " + std::to_string(offset) + ": ");
      }
    }
  }
  finalize_cloud(cloud);
  return cloud;
}

PointCloud load_xyz(const std::string& data, const fs::path& path) {
  std::vector<Vec3> pts;
  std::istringstream in(data);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto tok = split_ws(line);
    if (tok.empty()) continue;
    if (tok.size() < 3) throw ParseError(where(path, line_no) + "expected at least 3 coordinates");
    Vec3 p;
    for (int k = 0; k < 3; ++k) {
      if (!parse_double(tok[static_cast<std::size_t>(k)], p[k]))
        throw ParseError(where(path, line_no) + "cannot parse coordinate '" + tok[static_cast<std::size_t>(k)] + "'");
    }
    if (!p.allFinite()) throw ParseError(where(path, line_no) + "non-finite coordinate");
    pts.push_back(p);
  }
  PointCloud cloud;
  cloud.points.resize(3, static_cast<Index>(pts.size()));
  for (std::size_t i = 0; i < pts.size(); ++i) cloud.points.col(static_cast<Index>(i)) = pts[i];
  return cloud;
}

// ---------------------------------------------------------------------------
// PGM
// ---------------------------------------------------------------------------

std::size_t pgm_token(const std::string& data, std::size_t pos, std::string& tok) {
  while (pos < data.size()) {
    if (data[pos] == '#') {
      while (pos < data.size() && data[pos] != '\n') ++pos;
    } else if (std::isspace(static_cast<unsigned char>(data[pos]))) {
      ++pos;
    } else {
      break;
    }
  }
  const std::size_t start = pos;
  while (pos < data.size() && !std::isspace(static_cast<unsigned char>(data[pos])) && data[pos] != '#') ++pos;
  tok = data.substr(start, pos - start);
  return pos;
}

json estimate_json(const DBHEstimate& e) {
  json j;
  j["id"] = e.segment_id;
  j["method"] = std::string(to_string(e.method));
  j["dbh_cm"] = round_to(e.dbh * 100.0, 1e-4);
  j["inlier_ratio"] = round_to(e.inlier_ratio, 1e-6);
  j["band_points"] = e.band_points;
  j["position"] = {round_to(e.position.x(), 1e-6), round_to(e.position.y(), 1e-6),
                   round_to(e.position.z(), 1e-6)};
  return j;
}

json metrics_json(const MetricsReport& m) {
  json j;
  j["count"] = m.count;
  j["median_bias_cm"] = m.median_bias;
  j["mad_cm"] = m.mad;
  j["rcv_percent"] = m.rcv;
  j["r_squared"] = m.r_squared_defined ? json(m.r_squared) : json(nullptr);
  j["relative_errors_percent"] = m.relative_errors;
  json box;
  box["median"] = m.box.median;
  box["q1"] = m.box.q1;
  box["q3"] = m.box.q3;
  box["whisker_low"] = m.box.whisker_low;
  box["whisker_high"] = m.box.whisker_high;
  box["outliers"] = m.box.outliers;
  j["box"] = box;
  return j;
}

}  // namespace

// ---------------------------------------------------------------------------
// Point clouds
// ---------------------------------------------------------------------------

PointCloud load_point_cloud(const fs::path& path) {
  const std::string data = read_file(path);
  const bool is_ply = data.rfind("ply\n", 0) == 0 || data.rfind("ply\r\n", 0) == 0 || path.extension() == ".ply";
  return is_ply ? load_ply(data, path) : load_xyz(data, path);
}

void write_ply(const PointCloud& cloud, const fs::path& path, PlyEncoding encoding) {
  cloud.validate();
  auto out = open_output(path, encoding == PlyEncoding::binary);
  const Index n = cloud.size();
  out << "ply\n"
      << "format " << (encoding == PlyEncoding::binary ? "binary_little_endian" : "ascii") << " 1.0\n"
      << "element vertex " << n << '\n'
      << "property double x\nproperty double y\nproperty double z\n";
  if (cloud.has_normals()) out << "property double nx\nproperty double ny\nproperty double nz\n";
  if (cloud.has_colors()) out << "property uchar red\nproperty uchar green\nproperty uchar blue\n";
  out << "end_header\n";
  if (encoding == PlyEncoding::binary) {
    for (Index i = 0; i < n; ++i) {
      out.write(reinterpret_cast<const char*>(cloud.points.col(i).data()), 3 * sizeof(double));
      if (cloud.has_normals()) out.write(reinterpret_cast<const char*>(cloud.normals.col(i).data()), 3 * sizeof(double));
      if (cloud.has_colors()) out.write(reinterpret_cast<const char*>(cloud.colors.col(i).data()), 3);
    }
  } else {
    out << std::setprecision(std::numeric_limits<double>::max_digits10);
    for (Index i = 0; i < n; ++i) {
      out << cloud.points(0, i) << ' ' << cloud.points(1, i) << ' ' << cloud.points(2, i);
      if (cloud.has_normals()) out << ' ' << cloud.normals(0, i) << ' ' << cloud.normals(1, i) << ' ' << cloud.normals(2, i);
      if (cloud.has_colors())
        out << ' ' << int(cloud.colors(0, i)) << ' ' << int(cloud.colors(1, i)) << ' ' << int(cloud.colors(2, i));
      out << '\n';
    }
  }
  if (!out) throw Error("failed writing " + path.string());
}

void write_xyz(const PointCloud& cloud, const fs::path& path) {
  auto out = open_output(path);
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (Index i = 0; i < cloud.size(); ++i)
    out << cloud.points(0, i) << ' ' << cloud.points(1, i) << ' ' << cloud.points(2, i) << '\n';
}

// ---------------------------------------------------------------------------
// Poses
// ---------------------------------------------------------------------------

std::vector<std::pair<std::string, Pose>> load_poses(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());
  std::vector<std::pair<std::string, Pose>> poses;
  std::set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto tok = split_ws(line);
    if (tok.empty()) continue;
    if (tok.size() != 13)
      throw ParseError(where(path, line_no) + "expected frame id + 3 translation + 9 rotation values");
    double v[12];
    for (int k = 0; k < 12; ++k) {
      if (!parse_double(tok[static_cast<std::size_t>(k) + 1], v[k]) || !std::isfinite(v[k]))
        throw ParseError(where(path, line_no) + "invalid number '" + tok[static_cast<std::size_t>(k) + 1] + "'");
    }
    const std::string& id = tok[0];
    if (!seen.insert(id).second) throw ParseError(where(path, line_no) + "duplicate frame id '" + id + "'");
    Pose pose;
    pose.translation = Vec3(v[0], v[1], v[2]);
    pose.rotation << v[3], v[4], v[5], v[6], v[7], v[8], v[9], v[10], v[11];
    if (pose.rotation.determinant() <= 0)
      throw ParseError(where(path, line_no) + "frame '" + id + "': rotation has non-positive determinant");
    if (!is_rotation(pose.rotation, 1e-3))
      throw ParseError(where(path, line_no) + "frame '" + id + "': rotation is not orthonormal");
    pose.rotation = orthonormalize(pose.rotation);
    poses.emplace_back(id, pose);
  }
  return poses;
}

void write_poses(std::span<const std::pair<std::string, Pose>> poses, const fs::path& path) {
  auto out = open_output(path);
  out << "# frame_id tx ty tz r00 r01 r02 r10 r11 r12 r20 r21 r22\n";
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (const auto& [id, pose] : poses) {
    out << id;
    for (int k = 0; k < 3; ++k) out << ' ' << pose.translation[k];
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) out << ' ' << pose.rotation(r, c);
    out << '\n';
  }
}

// ---------------------------------------------------------------------------
// Masks
// ---------------------------------------------------------------------------

EquirectMask load_mask(const fs::path& path) {
  const std::string data = read_file(path);
  std::string tok;
  std::size_t pos = pgm_token(data, 0, tok);
  if (tok != "P5") throw ParseError(path.string() + ": unsupported PGM magic '" + tok + "' (expected P5)");
  long long dims[3];
  for (auto& d : dims) {
    pos = pgm_token(data, pos, tok);
    try {
      d = std::stoll(tok);
    } catch (const std::exception&) {
      throw ParseError(path.string() + ": malformed PGM header near byte " + std::to_string(pos));
    }
  }
  const auto [w, h, maxval] = std::tuple{dims[0], dims[1], dims[2]};
  if (w < 2 || h < 2) throw ParseError(path.string() + ": mask must be at least 2x2");
  if (maxval != 255) throw ParseError(path.string() + ": PGM maxval must be 255");
  if (pos >= data.size() || !std::isspace(static_cast<unsigned char>(data[pos])))
    throw ParseError(path.string() + ": malformed PGM header");
  ++pos;
  const auto expected = static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
  if (data.size() - pos != expected)
    throw ParseError(path.string() + ": payload has " + std::to_string(data.size() - pos) + " bytes, expected " +
                     std::to_string(expected));
  EquirectMask mask(static_cast<int>(w), static_cast<int>(h));
  for (int v = 0; v < h; ++v)
    for (int u = 0; u < w; ++u)
      mask.set(u, v, static_cast<unsigned char>(data[pos + static_cast<std::size_t>(v) * w + u]) >= 128);
  return mask;
}

void write_mask(const EquirectMask& mask, const fs::path& path) {
  auto out = open_output(path, true);
  out << "P5\n" << mask.width() << ' ' << mask.height() << "\n255\n";
  std::string row(static_cast<std::size_t>(mask.width()), '\0');
  for (int v = 0; v < mask.height(); ++v) {
    for (int u = 0; u < mask.width(); ++u) row[static_cast<std::size_t>(u)] = mask.at(u, v) ? char(255) : char(0);
    out.write(row.data(), static_cast<std::streamsize>(row.size()));
  }
}

// ---------------------------------------------------------------------------
// Trajectories and references
// ---------------------------------------------------------------------------

Trajectory load_trajectory(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());
  std::vector<Vec3> pts;
  std::vector<double> stamps;
  std::size_t columns = 0, line_no = 0;
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto tok = split_ws(line);
    if (tok.empty()) continue;
    if (tok.size() != 3 && tok.size() != 4) throw ParseError(where(path, line_no) + "expected 'x y z' or 't x y z'");
    if (columns == 0) columns = tok.size();
    if (tok.size() != columns) throw ParseError(where(path, line_no) + "inconsistent column count");
    std::vector<double> v(tok.size());
    for (std::size_t k = 0; k < tok.size(); ++k) {
      if (!parse_double(tok[k], v[k]) || !std::isfinite(v[k]))
        throw ParseError(where(path, line_no) + "invalid number '" + tok[k] + "'");
    }
    const std::size_t off = columns == 4 ? 1 : 0;
    if (columns == 4) {
      if (!stamps.empty() && !(v[0] > stamps.back()))
        throw ParseError(where(path, line_no) + "timestamps must increase");
      stamps.push_back(v[0]);
    }
    pts.emplace_back(v[off], v[off + 1], v[off + 2]);
  }
  Trajectory traj;
  traj.positions.resize(3, static_cast<Index>(pts.size()));
  for (std::size_t i = 0; i < pts.size(); ++i) traj.positions.col(static_cast<Index>(i)) = pts[i];
  traj.timestamps = std::move(stamps);
  return traj;
}

void write_trajectory(const Trajectory& trajectory, const fs::path& path) {
  auto out = open_output(path);
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  const bool stamped = !trajectory.timestamps.empty();
  for (Index i = 0; i < trajectory.size(); ++i) {
    if (stamped) out << trajectory.timestamps[static_cast<std::size_t>(i)] << ' ';
    out << trajectory.positions(0, i) << ' ' << trajectory.positions(1, i) << ' ' << trajectory.positions(2, i) << '\n';
  }
}

std::vector<Reference> load_references(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());
  std::vector<Reference> refs;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!cells.empty() && cells[0] == "id") continue;  // header
    if (cells.size() != 2 && cells.size() != 5)
      throw ParseError(where(path, line_no) + "expected id,dbh_cm[,x,y,z]");
    Reference r;
    r.id = cells[0];
    double v;
    if (!parse_double(cells[1], v) || !(v > 0)) throw ParseError(where(path, line_no) + "reference DBH must be positive");
    r.dbh = v / 100.0;
    if (cells.size() == 5) {
      Vec3 p;
      for (int k = 0; k < 3; ++k) {
        if (!parse_double(cells[static_cast<std::size_t>(k) + 2], p[k]))
          throw ParseError(where(path, line_no) + "invalid position");
      }
      r.position = p;
    }
    refs.push_back(r);
  }
  return refs;
}

void write_references(std::span<const Reference> references, const fs::path& path) {
  auto out = open_output(path);
  const bool with_pos = std::all_of(references.begin(), references.end(), [](const auto& r) { return r.position.has_value(); });
  out << (with_pos ? "id,dbh_cm,x,y,z\n" : "id,dbh_cm\n");
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (const auto& r : references) {
    out << r.id << ',' << r.dbh * 100.0;
    if (with_pos) out << ',' << r.position->x() << ',' << r.position->y() << ',' << r.position->z();
    out << '\n';
  }
}

// ---------------------------------------------------------------------------
// Reports and segments
// ---------------------------------------------------------------------------

std::string report_json(std::span<const DBHEstimate> estimates,
                        const std::map<CurveKind, MetricsReport>& metrics) {
  if (estimates.empty()) throw PreconditionError("report needs at least one estimate");
  json root;
  root["format"] = "dbh-report/1";
  root["units"] = {{"dbh", "cm"}, {"position", "m"}};
  json trees = json::array();
  for (const auto& e : estimates) trees.push_back(estimate_json(e));
  root["trees"] = trees;
  if (!metrics.empty()) {
    json m;
    for (const auto& [kind, report] : metrics) m[std::string(to_string(kind))] = metrics_json(report);
    root["metrics"] = m;
  }
  return root.dump(2) + "\n";
}

void write_report(std::span<const DBHEstimate> estimates, const std::map<CurveKind, MetricsReport>& metrics,
                  const fs::path& path) {
  const std::string text = report_json(estimates, metrics);
  auto out = open_output(path, true);
  out << text;
  if (!out) throw Error("failed writing " + path.string());
}

std::vector<DBHEstimate> load_report(const fs::path& path) {
  json root;
  try {
    root = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  std::vector<DBHEstimate> out;
  try {
    for (const auto& t : root.at("trees")) {
      DBHEstimate e;
      e.segment_id = t.at("id").get<int>();
      e.method = parse_curve_kind(t.at("method").get<std::string>());
      e.dbh = t.at("dbh_cm").get<double>() / 100.0;
      e.inlier_ratio = t.at("inlier_ratio").get<double>();
      e.band_points = t.at("band_points").get<Index>();
      const auto& p = t.at("position");
      e.position = Vec3(p.at(0).get<double>(), p.at(1).get<double>(), p.at(2).get<double>());
      out.push_back(e);
    }
  } catch (const json::exception& e) {
    throw ParseError(path.string() + ": malformed report: " + e.what());
  }
  return out;
}

void write_segments(std::span<const TrunkSegment> segments, Index cloud_size, const fs::path& path) {
  json root;
  root["format"] = "dbh-segments/1";
  root["cloud_points"] = cloud_size;
  json segs = json::array();
  for (const auto& s : segments) {
    json j;
    j["id"] = s.id;
    j["indices"] = s.indices;
    segs.push_back(j);
  }
  root["segments"] = segs;
  auto out = open_output(path, true);
  out << root.dump() << '\n';
}

std::vector<TrunkSegment> load_segments(const fs::path& path) {
  std::vector<TrunkSegment> out;
  try {
    const json root = json::parse(read_file(path));
    for (const auto& s : root.at("segments")) {
      TrunkSegment seg;
      seg.id = s.at("id").get<int>();
      seg.indices = s.at("indices").get<IndexList>();
      out.push_back(std::move(seg));
    }
  } catch (const json::exception& e) {
    throw ParseError(path.string() + ": malformed segments file: " + e.what());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Inspection scene
// ---------------------------------------------------------------------------

fs::path inspection_sidecar_path(const fs::path& scene_path) {
  fs::path p = scene_path;
  p.replace_extension(".dbh.json");
  return p;
}

void write_inspection_scene(const PointCloud& cloud, std::span<const TrunkSegment> segments,
                            std::span<const DBHEstimate> estimates, const fs::path& path) {
  for (const auto& s : segments) {
    for (const Index i : s.indices) {
      if (i < 0 || i >= cloud.size())
        throw PreconditionError("segment " + std::to_string(s.id) + " references point " + std::to_string(i) +
                                " outside a cloud of " + std::to_string(cloud.size()));
    }
  }
  PointCloud scene;
  scene.points = cloud.points;
  if (cloud.has_colors()) {
    scene.colors = cloud.colors;
  } else {
    scene.colors = Colors::Constant(3, cloud.size(), std::uint8_t{160});
  }
  for (const auto& s : segments) {
    for (const Index i : s.indices) scene.colors.col(i) = Eigen::Matrix<std::uint8_t, 3, 1>(255, 0, 0);
  }
  write_ply(scene, path, PlyEncoding::binary);

  json root;
  root["scene"] = path.filename().string();
  json segs = json::array();
  for (const auto& s : segments) {
    json j;
    j["id"] = s.id;
    j["points"] = s.indices.size();
    json dbh = json::object();
    for (const auto& e : estimates) {
      if (e.segment_id == s.id) dbh[std::string(to_string(e.method))] = round_to(e.dbh * 100.0, 1e-4);
    }
    j["dbh_cm"] = dbh;
    segs.push_back(j);
  }
  root["segments"] = segs;
  auto out = open_output(inspection_sidecar_path(path), true);
  out << root.dump(2) << '\n';
}

}  // namespace dbh
