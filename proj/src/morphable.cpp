#include "morphable.hpp"
#include "errors.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "rng.hpp"

namespace tpdr {

namespace {

constexpr char kB64Alphabet[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

std::string base64_encode(const std::vector<uint8_t>& bytes) {
  std::string out;
  out.reserve((bytes.size() + 2) / 3 * 4);
  size_t i = 0;
  for (; i + 3 <= bytes.size(); i += 3) {
    const uint32_t v = (bytes[i] << 16) | (bytes[i + 1] << 8) | bytes[i + 2];
    out.push_back(kB64Alphabet[(v >> 18) & 63]);
    out.push_back(kB64Alphabet[(v >> 12) & 63]);
    out.push_back(kB64Alphabet[(v >> 6) & 63]);
    out.push_back(kB64Alphabet[v & 63]);
  }
  const size_t rem = bytes.size() - i;
  if (rem == 1) {
    const uint32_t v = bytes[i] << 16;
    out.push_back(kB64Alphabet[(v >> 18) & 63]);
    out.push_back(kB64Alphabet[(v >> 12) & 63]);
    out += "==";
  } else if (rem == 2) {
    const uint32_t v = (bytes[i] << 16) | (bytes[i + 1] << 8);
    out.push_back(kB64Alphabet[(v >> 18) & 63]);
    out.push_back(kB64Alphabet[(v >> 12) & 63]);
    out.push_back(kB64Alphabet[(v >> 6) & 63]);
    out.push_back('=');
  }
  return out;
}

std::vector<uint8_t> base64_decode(const std::string& text) {
  std::array<int8_t, 256> lut;
  lut.fill(-1);
  for (int i = 0; i < 64; ++i) lut[static_cast<uint8_t>(kB64Alphabet[i])] = static_cast<int8_t>(i);
  if (text.size() % 4 != 0) throw ParseError("base64: length not a multiple of 4");
  std::vector<uint8_t> out;
  out.reserve(text.size() / 4 * 3);
  for (size_t i = 0; i < text.size(); i += 4) {
    int vals[4];
    int pad = 0;
    for (int j = 0; j < 4; ++j) {
      const char c = text[i + j];
      if (c == '=') {
        if (i + 4 != text.size() || j < 2) throw ParseError("base64: misplaced padding");
        vals[j] = 0;
        ++pad;
      } else {
        if (pad > 0 || lut[static_cast<uint8_t>(c)] < 0) {
          throw ParseError("base64: invalid character");
        }
        vals[j] = lut[static_cast<uint8_t>(c)];
      }
    }
    const uint32_t v = (vals[0] << 18) | (vals[1] << 12) | (vals[2] << 6) | vals[3];
    out.push_back(static_cast<uint8_t>((v >> 16) & 0xff));
    if (pad < 2) out.push_back(static_cast<uint8_t>((v >> 8) & 0xff));
    if (pad < 1) out.push_back(static_cast<uint8_t>(v & 0xff));
  }
  return out;
}

std::string encode_f64(const std::vector<double>& values) {
  std::vector<uint8_t> bytes(values.size() * 8);
  for (size_t i = 0; i < values.size(); ++i) {
    const uint64_t u = std::bit_cast<uint64_t>(values[i]);
    for (int b = 0; b < 8; ++b) bytes[i * 8 + b] = static_cast<uint8_t>((u >> (8 * b)) & 0xff);
  }
  return base64_encode(bytes);
}

std::vector<double> decode_f64(const std::string& text, size_t expected, const char* field) {
  const std::vector<uint8_t> bytes = base64_decode(text);
  if (bytes.size() != expected * 8) {
    throw ParseError(std::string("model json: field '") + field + "' has " +
                             std::to_string(bytes.size() / 8) + " values, expected " +
                             std::to_string(expected));
  }
  std::vector<double> values(expected);
  for (size_t i = 0; i < expected; ++i) {
    uint64_t u = 0;
    for (int b = 0; b < 8; ++b) u |= static_cast<uint64_t>(bytes[i * 8 + b]) << (8 * b);
    values[i] = std::bit_cast<double>(u);
  }
  return values;
}

std::string encode_u32(const std::vector<int64_t>& values) {
  std::vector<uint8_t> bytes(values.size() * 4);
  for (size_t i = 0; i < values.size(); ++i) {
    const auto u = static_cast<uint32_t>(values[i]);
    for (int b = 0; b < 4; ++b) bytes[i * 4 + b] = static_cast<uint8_t>((u >> (8 * b)) & 0xff);
  }
  return base64_encode(bytes);
}

std::vector<int64_t> decode_u32(const std::string& text, const char* field) {
  const std::vector<uint8_t> bytes = base64_decode(text);
  if (bytes.size() % 4 != 0) {
    throw ParseError(std::string("model json: field '") + field + "' has partial entries");
  }
  std::vector<int64_t> values(bytes.size() / 4);
  for (size_t i = 0; i < values.size(); ++i) {
    uint32_t u = 0;
    for (int b = 0; b < 4; ++b) u |= static_cast<uint32_t>(bytes[i * 4 + b]) << (8 * b);
    values[i] = u;
  }
  return values;
}

Vec3 normalized(const Vec3& v) {
  const double n = std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
  return {v[0] / n, v[1] / n, v[2] / n};
}

double dist(const Vec3& a, const Vec3& b) {
  const double dx = a[0] - b[0], dy = a[1] - b[1], dz = a[2] - b[2];
  return std::sqrt(dx * dx + dy * dy + dz * dz);
}

// Smooth unit-amplitude bump over direction space.
double bump(const Vec3& u, const Vec3& center, double width) {
  const double d = dist(u, center);
  return std::exp(-d * d / (2.0 * width * width));
}

void subtract_component_means(std::vector<double>& basis, int64_t n_basis, int64_t n_vertices) {
  for (int64_t k = 0; k < n_basis; ++k) {
    for (int a = 0; a < 3; ++a) {
      double mean = 0.0;
      for (int64_t v = 0; v < n_vertices; ++v) mean += basis[(k * n_vertices + v) * 3 + a];
      mean /= static_cast<double>(n_vertices);
      for (int64_t v = 0; v < n_vertices; ++v) basis[(k * n_vertices + v) * 3 + a] -= mean;
    }
  }
}

constexpr Vec3 kMouthCenterDir = {0.0, 0.4309458, -0.9024017};  // normalize((0,0.42,-0.88))
constexpr double kMouthRadius = 0.30;

}  // namespace

void MorphableModel::validate() const {
  const int64_t v_count = n_vertices;
  if (v_count <= 0) throw std::invalid_argument("morphable: no vertices");
  auto check_size = [&](const std::vector<double>& arr, int64_t expected, const char* name) {
    if (static_cast<int64_t>(arr.size()) != expected) {
      throw std::invalid_argument(std::string("morphable: '") + name + "' has " +
                                  std::to_string(arr.size()) + " values, expected " +
                                  std::to_string(expected));
    }
  };
  check_size(base, v_count * 3, "template");
  check_size(shape_basis, n_shape * v_count * 3, "shape_basis");
  check_size(expr_basis, n_expr * v_count * 3, "expr_basis");
  check_size(ncc, v_count * 3, "ncc");
  if (triangles.empty() || triangles.size() % 3 != 0) {
    throw std::invalid_argument("morphable: triangle list size not a multiple of 3");
  }
  for (const int64_t idx : triangles) {
    if (idx < 0 || idx >= v_count) {
      throw std::invalid_argument("morphable: triangle index " + std::to_string(idx) +
                                  " out of range [0," + std::to_string(v_count) + ")");
    }
  }
  // NCC is the per-component min-max normalization of the template.
  for (int a = 0; a < 3; ++a) {
    double lo = base[a], hi = base[a];
    for (int64_t v = 0; v < v_count; ++v) {
      lo = std::min(lo, base[v * 3 + a]);
      hi = std::max(hi, base[v * 3 + a]);
    }
    if (!(hi > lo)) throw std::invalid_argument("morphable: degenerate template extent");
    for (int64_t v = 0; v < v_count; ++v) {
      const double expect = (base[v * 3 + a] - lo) / (hi - lo);
      if (std::abs(ncc[v * 3 + a] - expect) > 1e-12) {
        throw std::invalid_argument("morphable: ncc is not the normalized template");
      }
    }
  }
  // Centering convention for both bases.
  auto check_centered = [&](const std::vector<double>& basis, int64_t n_basis, const char* name) {
    for (int64_t k = 0; k < n_basis; ++k) {
      for (int a = 0; a < 3; ++a) {
        double sum = 0.0;
        for (int64_t v = 0; v < v_count; ++v) sum += basis[(k * v_count + v) * 3 + a];
        if (std::abs(sum / static_cast<double>(v_count)) > 1e-9) {
          throw std::invalid_argument(std::string("morphable: '") + name + "' vector " +
                                      std::to_string(k) + " is not zero-mean");
        }
      }
    }
  };
  check_centered(shape_basis, n_shape, "shape_basis");
  check_centered(expr_basis, n_expr, "expr_basis");
}

std::vector<double> compute_vertices(const MorphableModel& model, const FaceCoefficients& coeffs) {
  if (static_cast<int64_t>(coeffs.z_shp.size()) != model.n_shape) {
    throw std::invalid_argument("compute_vertices: z_shp has " +
                                std::to_string(coeffs.z_shp.size()) + " entries, basis has " +
                                std::to_string(model.n_shape));
  }
  if (static_cast<int64_t>(coeffs.z_exp.size()) != model.n_expr) {
    throw std::invalid_argument("compute_vertices: z_exp has " +
                                std::to_string(coeffs.z_exp.size()) + " entries, basis has " +
                                std::to_string(model.n_expr));
  }
  const int64_t n = model.n_vertices;
  std::vector<double> verts = model.base;
  for (int64_t k = 0; k < model.n_shape; ++k) {
    const double z = coeffs.z_shp[k];
    if (z == 0.0) continue;
    const double* row = model.shape_basis.data() + k * n * 3;
    for (int64_t i = 0; i < n * 3; ++i) verts[i] += z * row[i];
  }
  for (int64_t k = 0; k < model.n_expr; ++k) {
    const double z = coeffs.z_exp[k];
    if (z == 0.0) continue;
    const double* row = model.expr_basis.data() + k * n * 3;
    for (int64_t i = 0; i < n * 3; ++i) verts[i] += z * row[i];
  }
  rigid_apply(coeffs.R, coeffs.t, verts);
  return verts;
}

FaceCoefficients neutralize(const FaceCoefficients& coeffs) {
  FaceCoefficients out;
  out.z_shp = coeffs.z_shp;
  out.z_exp.assign(coeffs.z_exp.size(), 0.0);
  return out;
}

MorphableModel make_toy_head(uint64_t seed, int n_shape, int n_expr) {
  if (n_shape < 1 || n_expr < 1) throw std::invalid_argument("make_toy_head: empty basis");
  constexpr int kRings = 21;
  constexpr int kCols = 24;
  const int64_t n_vertices = 2 + kRings * kCols;

  // Head frame matches the image convention: +y down, nose toward -z, so the
  // frontal camera at -z sees an upright face. Column 0 is the face midline.
  std::vector<Vec3> dirs(n_vertices);
  dirs[0] = {0.0, -1.0, 0.0};
  for (int r = 0; r < kRings; ++r) {
    const double theta = M_PI * (r + 1) / (kRings + 1);
    for (int c = 0; c < kCols; ++c) {
      const double phi = 2.0 * M_PI * c / kCols;
      dirs[1 + r * kCols + c] = {std::sin(theta) * std::sin(phi), -std::cos(theta),
                                 -std::sin(theta) * std::cos(phi)};
    }
  }
  dirs[n_vertices - 1] = {0.0, 1.0, 0.0};

  MorphableModel model;
  model.n_vertices = n_vertices;
  model.n_shape = n_shape;
  model.n_expr = n_expr;
  model.base.resize(n_vertices * 3);
  const Vec3 radii = {0.62, 0.85, 0.70};
  const Vec3 nose_dir = normalized({0.0, 0.12, -1.0});
  const Vec3 eye_l = normalized({-0.38, -0.22, -0.85});
  const Vec3 eye_r = normalized({0.38, -0.22, -0.85});
  for (int64_t v = 0; v < n_vertices; ++v) {
    const Vec3& u = dirs[v];
    double out_z = -0.16 * bump(u, nose_dir, 0.22);        // nose sticks out (-z)
    out_z += -0.05 * bump(u, kMouthCenterDir, 0.16);       // lips
    out_z += 0.045 * (bump(u, eye_l, 0.14) + bump(u, eye_r, 0.14));  // sockets
    model.base[v * 3 + 0] = radii[0] * u[0];
    model.base[v * 3 + 1] = radii[1] * u[1];
    model.base[v * 3 + 2] = radii[2] * u[2] + out_z;
  }

  // Lat-long triangulation: pole fans plus ring quads split into two.
  auto ring_vertex = [&](int r, int c) { return int64_t(1 + r * kCols + (c % kCols)); };
  for (int c = 0; c < kCols; ++c) {
    model.triangles.insert(model.triangles.end(), {0, ring_vertex(0, c + 1), ring_vertex(0, c)});
  }
  for (int r = 0; r + 1 < kRings; ++r) {
    for (int c = 0; c < kCols; ++c) {
      const int64_t a = ring_vertex(r, c), b = ring_vertex(r, c + 1);
      const int64_t d = ring_vertex(r + 1, c), e = ring_vertex(r + 1, c + 1);
      model.triangles.insert(model.triangles.end(), {a, b, d});
      model.triangles.insert(model.triangles.end(), {b, e, d});
    }
  }
  for (int c = 0; c < kCols; ++c) {
    model.triangles.insert(model.triangles.end(),
                           {ring_vertex(kRings - 1, c), ring_vertex(kRings - 1, c + 1),
                            n_vertices - 1});
  }

  Rng rng(seed);
  auto random_unit = [&]() {
    Vec3 v;
    do {
      v = {rng.normal(), rng.normal(), rng.normal()};
    } while (std::abs(v[0]) + std::abs(v[1]) + std::abs(v[2]) < 1e-6);
    return normalized(v);
  };
  auto random_bump_field = [&](std::vector<double>& dst, int64_t k, int n_bumps) {
    for (int b = 0; b < n_bumps; ++b) {
      const Vec3 center = random_unit();
      const double width = rng.uniform(0.35, 0.6);
      const Vec3 dir = random_unit();
      const double amp = rng.uniform(0.02, 0.05);
      for (int64_t v = 0; v < n_vertices; ++v) {
        const double g = amp * bump(dirs[v], center, width);
        dst[(k * n_vertices + v) * 3 + 0] += g * dir[0];
        dst[(k * n_vertices + v) * 3 + 1] += g * dir[1];
        dst[(k * n_vertices + v) * 3 + 2] += g * dir[2];
      }
    }
  };

  model.shape_basis.assign(n_shape * n_vertices * 3, 0.0);
  for (int64_t k = 0; k < n_shape; ++k) random_bump_field(model.shape_basis, k, 3);
  subtract_component_means(model.shape_basis, n_shape, n_vertices);

  model.expr_basis.assign(n_expr * n_vertices * 3, 0.0);
  // Vector 0: mouth opening. Support is exactly the mouth region; weighting
  // a(v) = w(v) (h(v) - hbar_w) with hbar_w the w-weighted mean of h makes
  // each component zero-mean without touching vertices outside the region.
  {
    std::vector<double> w(n_vertices, 0.0), h(n_vertices, 0.0);
    double sw = 0.0, swh = 0.0;
    for (int64_t v = 0; v < n_vertices; ++v) {
      const double d = dist(dirs[v], kMouthCenterDir);
      if (d >= kMouthRadius) continue;
      const double q = 1.0 - (d / kMouthRadius) * (d / kMouthRadius);
      w[v] = q * q;
      h[v] = dirs[v][1];
      sw += w[v];
      swh += w[v] * h[v];
    }
    const double hbar = swh / sw;
    for (int64_t v = 0; v < n_vertices; ++v) {
      if (w[v] == 0.0) continue;
      const double a = w[v] * (h[v] - hbar);
      model.expr_basis[v * 3 + 1] = 0.8 * a;    // lower lip down, upper lip up
      model.expr_basis[v * 3 + 2] = -0.25 * a;  // opening recedes slightly
    }
  }
  for (int64_t k = 1; k < n_expr; ++k) random_bump_field(model.expr_basis, k, 2);
  if (n_expr > 1) {
    // Centering must not widen vector 0's support; center the others only.
    std::vector<double> rest(model.expr_basis.begin() + n_vertices * 3, model.expr_basis.end());
    subtract_component_means(rest, n_expr - 1, n_vertices);
    std::copy(rest.begin(), rest.end(), model.expr_basis.begin() + n_vertices * 3);
  }

  model.ncc.resize(n_vertices * 3);
  for (int a = 0; a < 3; ++a) {
    double lo = model.base[a], hi = model.base[a];
    for (int64_t v = 0; v < n_vertices; ++v) {
      lo = std::min(lo, model.base[v * 3 + a]);
      hi = std::max(hi, model.base[v * 3 + a]);
    }
    for (int64_t v = 0; v < n_vertices; ++v) {
      model.ncc[v * 3 + a] = (model.base[v * 3 + a] - lo) / (hi - lo);
    }
  }
  model.validate();
  return model;
}

std::vector<int64_t> expr_support_vertices(const MorphableModel& model, int64_t k) {
  if (k < 0 || k >= model.n_expr) {
    throw std::invalid_argument("expr_support_vertices: basis index " + std::to_string(k) +
                                " out of range");
  }
  std::vector<int64_t> support;
  for (int64_t v = 0; v < model.n_vertices; ++v) {
    const double* row = model.expr_basis.data() + (k * model.n_vertices + v) * 3;
    if (row[0] != 0.0 || row[1] != 0.0 || row[2] != 0.0) support.push_back(v);
  }
  return support;
}

std::string model_to_json(const MorphableModel& model) {
  model.validate();
  nlohmann::json j;
  j["type"] = "morphable";
  j["version"] = 1;
  j["n_vertices"] = model.n_vertices;
  j["n_shape"] = model.n_shape;
  j["n_expr"] = model.n_expr;
  j["template"] = encode_f64(model.base);
  j["shape_basis"] = encode_f64(model.shape_basis);
  j["expr_basis"] = encode_f64(model.expr_basis);
  j["ncc"] = encode_f64(model.ncc);
  j["triangles"] = encode_u32(model.triangles);
  return j.dump(2);
}

MorphableModel model_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const std::exception& e) {
    throw ParseError(std::string("model json: parse error: ") + e.what());
  }
  if (!j.is_object() || j.value("type", "") != "morphable") {
    throw ParseError("model json: not a morphable model document");
  }
  if (j.value("version", 0) != 1) throw ParseError("model json: unsupported version");
  MorphableModel model;
  try {
    model.n_vertices = j.at("n_vertices").get<int64_t>();
    model.n_shape = j.at("n_shape").get<int64_t>();
    model.n_expr = j.at("n_expr").get<int64_t>();
    const int64_t v = model.n_vertices;
    model.base = decode_f64(j.at("template").get<std::string>(), v * 3, "template");
    model.shape_basis =
        decode_f64(j.at("shape_basis").get<std::string>(), model.n_shape * v * 3, "shape_basis");
    model.expr_basis =
        decode_f64(j.at("expr_basis").get<std::string>(), model.n_expr * v * 3, "expr_basis");
    model.ncc = decode_f64(j.at("ncc").get<std::string>(), v * 3, "ncc");
    model.triangles = decode_u32(j.at("triangles").get<std::string>(), "triangles");
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("model json: ") + e.what());
  }
  model.validate();
  return model;
}

void save_model(const std::string& path, const MorphableModel& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("save_model: cannot open " + path);
  out << model_to_json(model) << "\n";
  if (!out) throw IoError("save_model: short write to " + path);
}

MorphableModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("load_model: cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return model_from_json(ss.str());
}

}  // namespace tpdr
