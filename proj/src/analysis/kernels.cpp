#include <algorithm>
#include <cmath>
#include <sstream>

#include "beamassist/analysis/engine.hpp"
#include "beamassist/error.hpp"
#include "beamassist/text.hpp"

namespace beamassist::analysis {

namespace {

// Rows per partial histogram in the parallel path. Fixed so that results do
// not depend on the thread count.
constexpr int kRowBlock = 32;

struct Bins {
  std::vector<double> sum;
  std::vector<long> count;
};

Bins accumulate_serial(const std::vector<int>& key, const std::vector<float>& v, int nbins) {
  Bins b{std::vector<double>(nbins, 0.0), std::vector<long>(nbins, 0)};
  for (std::size_t i = 0; i < key.size(); ++i) {
    if (key[i] < 0) continue;
    b.sum[key[i]] += v[i];
    ++b.count[key[i]];
  }
  return b;
}

Bins accumulate_parallel(const std::vector<int>& key, const std::vector<float>& v, int nbins, int rows, int cols) {
  const int nblocks = (rows + kRowBlock - 1) / kRowBlock;
  std::vector<Bins> part(nblocks);
#pragma omp parallel for schedule(dynamic)
  for (int blk = 0; blk < nblocks; ++blk) {
    Bins& b = part[blk];
    b.sum.assign(nbins, 0.0);
    b.count.assign(nbins, 0);
    const std::size_t lo = static_cast<std::size_t>(blk) * kRowBlock * cols;
    const std::size_t hi = std::min(key.size(), static_cast<std::size_t>(blk + 1) * kRowBlock * cols);
    for (std::size_t i = lo; i < hi; ++i) {
      if (key[i] < 0) continue;
      b.sum[key[i]] += v[i];
      ++b.count[key[i]];
    }
  }
  Bins out{std::vector<double>(nbins, 0.0), std::vector<long>(nbins, 0)};
  for (const auto& b : part)
    for (int k = 0; k < nbins; ++k) {
      out.sum[k] += b.sum[k];
      out.count[k] += b.count[k];
    }
  return out;
}

// Assigns each pixel a bin of `coord` over [lo, hi] when `select` holds.
template <typename Select>
std::vector<int> bin_keys(const std::vector<double>& coord, double lo, double hi, int nbins, Select select,
                          Exec exec) {
  std::vector<int> key(coord.size(), -1);
  const double w = (hi - lo) / nbins;
  const long long n = static_cast<long long>(coord.size());
  auto one = [&](long long i) {
    if (!select(i)) return;
    const double x = coord[i];
    if (x < lo || x > hi) return;
    int k = static_cast<int>((x - lo) / w);
    key[i] = std::clamp(k, 0, nbins - 1);
  };
  if (exec == Exec::parallel) {
#pragma omp parallel for schedule(static)
    for (long long i = 0; i < n; ++i) one(i);
  } else {
    for (long long i = 0; i < n; ++i) one(i);
  }
  return key;
}

Curve make_curve(const DetectorFrame& f, const std::vector<int>& key, double lo, double hi, int nbins,
                 const std::string& label, Exec exec) {
  const Bins b = exec == Exec::parallel ? accumulate_parallel(key, f.intensities, nbins, f.geometry.rows, f.geometry.cols)
                                        : accumulate_serial(key, f.intensities, nbins);
  Curve c;
  c.bin_width = (hi - lo) / nbins;
  c.x_label = label;
  for (int k = 0; k < nbins; ++k) {
    if (b.count[k] == 0) continue;
    c.x.push_back(lo + (k + 0.5) * c.bin_width);
    c.y.push_back(b.sum[k] / b.count[k]);
    c.counts.push_back(b.count[k]);
  }
  if (c.x.empty()) throw Error("EmptyROI", "no pixels satisfy the selection");
  return c;
}

void check_bins(int bins) {
  if (bins < 1) throw Error("InvalidArgs", "bin count must be positive");
}

void check_thickness(double t) {
  if (!(t > 0)) throw Error("InvalidArgs", "thickness must be positive");
}

std::pair<double, double> range_of(const std::vector<double>& v) {
  const auto [a, b] = std::minmax_element(v.begin(), v.end());
  return {*a, *b};
}

// Nearest source pixel for (qx, qz), or -1.
long long nearest_pixel(const DetectorGeometry& g, double qx, double qz) {
  const auto rc = q_to_pixel(g, qx, qz);
  if (!rc) return -1;
  const long r = std::lround(rc->first), c = std::lround(rc->second);
  if (r < 0 || r >= g.rows || c < 0 || c >= g.cols) return -1;
  return static_cast<long long>(r) * g.cols + c;
}

template <typename Fill>
void for_rows(int rows, Exec exec, Fill fill) {
  if (exec == Exec::parallel) {
#pragma omp parallel for schedule(static)
    for (int r = 0; r < rows; ++r) fill(r);
  } else {
    for (int r = 0; r < rows; ++r) fill(r);
  }
}

}  // namespace

std::string curve_to_csv(const Curve& c) {
  std::ostringstream out;
  out << c.x_label << ",intensity\n";
  for (std::size_t i = 0; i < c.x.size(); ++i) out << text::format_number(c.x[i]) << ',' << text::format_number(c.y[i]) << '\n';
  return out.str();
}

Curve circular_average(const DetectorFrame& f, int bins, Exec exec) {
  check_bins(bins);
  const PixelMap m = compute_pixel_map(f.geometry, exec);
  const auto key = bin_keys(m.q, m.q_min, m.q_max, bins, [](long long) { return true; }, exec);
  return make_curve(f, key, m.q_min, m.q_max, bins, "q", exec);
}

Curve sector_average(const DetectorFrame& f, double chi_center, double chi_width, int bins, Exec exec) {
  check_bins(bins);
  if (!(chi_width > 0 && chi_width <= 360)) throw Error("InvalidArgs", "sector width must lie in (0, 360]");
  const PixelMap m = compute_pixel_map(f.geometry, exec);
  auto in_sector = [&](long long i) {
    double d = std::fmod(m.chi[i] - chi_center, 360.0);
    if (d > 180) d -= 360;
    if (d < -180) d += 360;
    return std::abs(d) <= chi_width / 2;
  };
  const auto key = bin_keys(m.q, m.q_min, m.q_max, bins, in_sector, exec);
  return make_curve(f, key, m.q_min, m.q_max, bins, "q", exec);
}

Curve linecut_qr(const DetectorFrame& f, double qz, double thickness, int bins, Exec exec) {
  check_bins(bins);
  check_thickness(thickness);
  const PixelMap m = compute_pixel_map(f.geometry, exec);
  const auto [lo, hi] = range_of(m.qr);
  const auto key = bin_keys(m.qr, lo, hi, bins, [&](long long i) { return std::abs(m.qz[i] - qz) <= thickness / 2; }, exec);
  return make_curve(f, key, lo, hi, bins, "qr", exec);
}

Curve linecut_qz(const DetectorFrame& f, double qr, double thickness, int bins, Exec exec) {
  check_bins(bins);
  check_thickness(thickness);
  const PixelMap m = compute_pixel_map(f.geometry, exec);
  const auto [lo, hi] = range_of(m.qz);
  const auto key = bin_keys(m.qz, lo, hi, bins, [&](long long i) { return std::abs(m.qr[i] - qr) <= thickness / 2; }, exec);
  return make_curve(f, key, lo, hi, bins, "qz", exec);
}

Curve linecut_angle(const DetectorFrame& f, double q, double thickness, int bins, Exec exec) {
  check_bins(bins);
  check_thickness(thickness);
  const PixelMap m = compute_pixel_map(f.geometry, exec);
  const auto key = bin_keys(m.chi, 0.0, 360.0, bins, [&](long long i) { return std::abs(m.q[i] - q) <= thickness / 2; }, exec);
  return make_curve(f, key, 0.0, 360.0, bins, "chi", exec);
}

Image q_image(const DetectorFrame& f, Exec exec) {
  const auto& g = f.geometry;
  const PixelMap m = compute_pixel_map(g, exec);
  Image img;
  img.rows = g.rows;
  img.cols = g.cols;
  std::tie(img.x_min, img.x_max) = range_of(m.qr);
  std::tie(img.y_min, img.y_max) = range_of(m.qz);
  img.x_label = "qx";
  img.y_label = "qz";
  img.data.assign(static_cast<std::size_t>(img.rows) * img.cols, 0.0f);
  const double dx = (img.x_max - img.x_min) / std::max(1, img.cols - 1);
  const double dz = (img.y_max - img.y_min) / std::max(1, img.rows - 1);
  for_rows(img.rows, exec, [&](int r) {
    const double qz = img.y_max - r * dz;
    for (int c = 0; c < img.cols; ++c) {
      const long long src = nearest_pixel(g, img.x_min + c * dx, qz);
      if (src >= 0) img.data[static_cast<std::size_t>(r) * img.cols + c] = f.intensities[src];
    }
  });
  return img;
}

Image qr_image(const DetectorFrame& f, Exec exec) {
  const auto& g = f.geometry;
  const PixelMap m = compute_pixel_map(g, exec);
  Image img;
  img.rows = g.rows;
  img.cols = std::max(2, g.cols / 2);
  const auto [xlo, xhi] = range_of(m.qr);
  img.x_min = 0;
  img.x_max = std::max(std::abs(xlo), std::abs(xhi));
  std::tie(img.y_min, img.y_max) = range_of(m.qz);
  img.x_label = "qr";
  img.y_label = "qz";
  img.data.assign(static_cast<std::size_t>(img.rows) * img.cols, 0.0f);
  const double dx = img.x_max / (img.cols - 1);
  const double dz = (img.y_max - img.y_min) / std::max(1, img.rows - 1);
  for_rows(img.rows, exec, [&](int r) {
    const double qz = img.y_max - r * dz;
    for (int c = 0; c < img.cols; ++c) {
      const double qr = c * dx;
      double sum = 0;
      int n = 0;
      for (double sign : {1.0, -1.0}) {
        const long long src = nearest_pixel(g, sign * qr, qz);
        if (src >= 0) {
          sum += f.intensities[src];
          ++n;
        }
        if (qr == 0) break;
      }
      if (n) img.data[static_cast<std::size_t>(r) * img.cols + c] = static_cast<float>(sum / n);
    }
  });
  return img;
}

Image downsample(const DetectorFrame& f, int max_side) {
  if (max_side < 1) throw Error("InvalidArgs", "max_side must be positive");
  const auto& g = f.geometry;
  const int factor = std::max(1, (std::max(g.rows, g.cols) + max_side - 1) / max_side);
  Image img;
  img.rows = (g.rows + factor - 1) / factor;
  img.cols = (g.cols + factor - 1) / factor;
  img.x_min = 0;
  img.x_max = g.cols;
  img.y_min = 0;
  img.y_max = g.rows;
  img.x_label = "col";
  img.y_label = "row";
  img.data.assign(static_cast<std::size_t>(img.rows) * img.cols, 0.0f);
  for (int r = 0; r < img.rows; ++r)
    for (int c = 0; c < img.cols; ++c) {
      double sum = 0;
      int n = 0;
      for (int rr = r * factor; rr < std::min(g.rows, (r + 1) * factor); ++rr)
        for (int cc = c * factor; cc < std::min(g.cols, (c + 1) * factor); ++cc) {
          sum += f.at(rr, cc);
          ++n;
        }
      img.data[static_cast<std::size_t>(r) * img.cols + c] = static_cast<float>(sum / n);
    }
  return img;
}

}  // namespace beamassist::analysis
