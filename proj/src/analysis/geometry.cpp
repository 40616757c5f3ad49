#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include "beamassist/analysis/engine.hpp"
#include "beamassist/error.hpp"

namespace beamassist::analysis {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Uniform in (0, 1).
double unit(std::uint64_t bits) { return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53; }

// Standard normal for pixel `idx`; depends only on (seed, idx).
double normal_at(std::uint64_t seed, std::uint64_t idx) {
  const std::uint64_t k = splitmix64(seed ^ splitmix64(idx));
  const double u1 = unit(splitmix64(k)), u2 = unit(splitmix64(k + 1));
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace

void DetectorGeometry::validate() const {
  if (!(pixel_size_mm > 0 && distance_m > 0 && wavelength_A > 0 && rows > 0 && cols > 0))
    throw Error("InvalidGeometry", "pixel size, distance, wavelength and shape must be positive");
  if (!(center_col >= 0 && center_col <= cols - 1 && center_row >= 0 && center_row <= rows - 1))
    throw Error("InvalidGeometry", "beam center outside the frame");
}

json geometry_to_json(const DetectorGeometry& g) {
  return json{{"pixel_size_mm", g.pixel_size_mm}, {"distance_m", g.distance_m}, {"wavelength_A", g.wavelength_A},
              {"rows", g.rows},   {"cols", g.cols},  {"center_row", g.center_row}, {"center_col", g.center_col}};
}

DetectorGeometry geometry_from_json(const json& j) {
  DetectorGeometry g;
  try {
    g.pixel_size_mm = j.value("pixel_size_mm", g.pixel_size_mm);
    g.distance_m = j.value("distance_m", g.distance_m);
    g.wavelength_A = j.value("wavelength_A", g.wavelength_A);
    g.rows = j.value("rows", g.rows);
    g.cols = j.value("cols", g.cols);
    g.center_row = j.value("center_row", (g.rows - 1) / 2.0);
    g.center_col = j.value("center_col", (g.cols - 1) / 2.0);
  } catch (const json::exception& e) {
    throw Error("InvalidGeometry", e.what());
  }
  g.validate();
  return g;
}

QPoint pixel_to_q(const DetectorGeometry& g, double row, double col) {
  const double dx = col - g.center_col;
  const double dz = g.center_row - row;
  const double r_px = std::hypot(dx, dz);
  if (r_px == 0) return {};
  const double two_theta = std::atan(r_px * g.pixel_size_mm / (g.distance_m * 1000.0));
  const double q = 4.0 * std::numbers::pi / g.wavelength_A * std::sin(two_theta / 2.0);
  return {q, q * dx / r_px, q * dz / r_px};
}

std::optional<std::pair<double, double>> q_to_pixel(const DetectorGeometry& g, double qr, double qz) {
  const double q = std::hypot(qr, qz);
  if (q == 0) return std::make_pair(g.center_row, g.center_col);
  const double s = q * g.wavelength_A / (4.0 * std::numbers::pi);
  if (s >= std::sqrt(0.5)) return std::nullopt;  // 2theta >= 90 degrees
  const double two_theta = 2.0 * std::asin(s);
  const double r_px = g.distance_m * 1000.0 * std::tan(two_theta) / g.pixel_size_mm;
  return std::make_pair(g.center_row - r_px * qz / q, g.center_col + r_px * qr / q);
}

PixelMap compute_pixel_map(const DetectorGeometry& g, Exec exec) {
  g.validate();
  const std::size_t n = static_cast<std::size_t>(g.rows) * g.cols;
  PixelMap m;
  m.q.resize(n);
  m.qr.resize(n);
  m.qz.resize(n);
  m.chi.resize(n);
  auto fill_row = [&](int r) {
    for (int c = 0; c < g.cols; ++c) {
      const std::size_t i = static_cast<std::size_t>(r) * g.cols + c;
      const QPoint p = pixel_to_q(g, r, c);
      m.q[i] = p.q;
      m.qr[i] = p.qr;
      m.qz[i] = p.qz;
      double chi = std::atan2(g.center_row - r, c - g.center_col) * 180.0 / std::numbers::pi;
      if (chi < 0) chi += 360.0;
      m.chi[i] = chi >= 360.0 ? 0.0 : chi;
    }
  };
  if (exec == Exec::parallel) {
#pragma omp parallel for schedule(static)
    for (int r = 0; r < g.rows; ++r) fill_row(r);
  } else {
    for (int r = 0; r < g.rows; ++r) fill_row(r);
  }
  m.q_min = m.q[0];
  m.q_max = m.q[0];
  for (double q : m.q) {
    m.q_min = std::min(m.q_min, q);
    m.q_max = std::max(m.q_max, q);
  }
  return m;
}

DetectorFrame synth_frame(const DetectorGeometry& g, const SynthSpec& spec) {
  g.validate();
  const PixelMap m = compute_pixel_map(g);
  for (const auto& ring : spec.rings) {
    if (!(ring.q0 >= m.q_min && ring.q0 <= m.q_max))
      throw Error("RingOutOfRange", "ring at q=" + std::to_string(ring.q0) + " outside detector range [" +
                                        std::to_string(m.q_min) + ", " + std::to_string(m.q_max) + "]");
    if (!(ring.sigma > 0)) throw Error("InvalidArgs", "ring width must be positive");
  }
  DetectorFrame f;
  f.geometry = g;
  f.intensities.resize(m.q.size());
  const long long n = static_cast<long long>(m.q.size());
#pragma omp parallel for schedule(static)
  for (long long i = 0; i < n; ++i) {
    double v = spec.background;
    for (const auto& ring : spec.rings) {
      const double d = m.q[i] - ring.q0;
      v += ring.amplitude * std::exp(-d * d / (2.0 * ring.sigma * ring.sigma));
    }
    if (spec.noise_seed) v += spec.noise_scale * std::sqrt(std::max(v, 0.0)) * normal_at(*spec.noise_seed, i);
    f.intensities[i] = static_cast<float>(std::max(v, 0.0));
  }
  f.metadata["source"] = "synthetic";
  if (spec.noise_seed) f.metadata["noise_seed"] = std::to_string(*spec.noise_seed);
  return f;
}

void write_frame(const DetectorFrame& f, const std::string& path) {
  const auto p = std::filesystem::path(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("InvalidFrame", "cannot write " + path);
    for (float v : f.intensities) {
      std::uint32_t bits;
      std::memcpy(&bits, &v, 4);
      const char b[4] = {static_cast<char>(bits), static_cast<char>(bits >> 8), static_cast<char>(bits >> 16),
                         static_cast<char>(bits >> 24)};
      out.write(b, 4);
    }
  }
  json side = geometry_to_json(f.geometry);
  side["dtype"] = "float32le";
  side["metadata"] = json::object();
  for (const auto& [k, v] : f.metadata) side["metadata"][k] = v;
  std::ofstream js(path + ".json", std::ios::binary);
  js << side.dump(2) << "\n";
}

DetectorFrame read_frame(const std::string& path) {
  std::ifstream js(path + ".json", std::ios::binary);
  if (!js) throw Error("InvalidFrame", "missing sidecar " + path + ".json");
  json side;
  try {
    side = json::parse(js);
  } catch (const json::exception& e) {
    throw Error("InvalidFrame", std::string("bad sidecar: ") + e.what());
  }
  DetectorFrame f;
  f.geometry = geometry_from_json(side);
  if (side.contains("metadata"))
    for (const auto& [k, v] : side["metadata"].items()) f.metadata[k] = v.is_string() ? v.get<std::string>() : v.dump();
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("InvalidFrame", "cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  const std::string raw = ss.str();
  const std::size_t n = static_cast<std::size_t>(f.geometry.rows) * f.geometry.cols;
  if (raw.size() != n * 4)
    throw Error("InvalidFrame", path + " holds " + std::to_string(raw.size()) + " bytes, expected " +
                                    std::to_string(n * 4));
  f.intensities.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto* b = reinterpret_cast<const unsigned char*>(raw.data() + 4 * i);
    const std::uint32_t bits = b[0] | (b[1] << 8) | (b[2] << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
    std::memcpy(&f.intensities[i], &bits, 4);
    if (!std::isfinite(f.intensities[i]) || f.intensities[i] < 0)
      throw Error("InvalidFrame", "non-finite or negative intensity at pixel " + std::to_string(i));
  }
  return f;
}

}  // namespace beamassist::analysis
