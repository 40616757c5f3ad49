#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>

#include "beamassist/analysis/engine.hpp"
#include "beamassist/error.hpp"

namespace beamassist::analysis {

std::vector<std::uint8_t> to_8bit(const Image& img) {
  std::vector<double> v(img.data.size());
  double lo = INFINITY, hi = -INFINITY;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double x = std::isfinite(img.data[i]) ? img.data[i] : 0.0;
    v[i] = std::log1p(std::max(x, 0.0));
    lo = std::min(lo, v[i]);
    hi = std::max(hi, v[i]);
  }
  std::vector<std::uint8_t> out(v.size(), 0);
  if (v.empty() || hi <= lo) return out;
  for (std::size_t i = 0; i < v.size(); ++i)
    out[i] = static_cast<std::uint8_t>(std::lround(255.0 * (v[i] - lo) / (hi - lo)));
  return out;
}

void write_png(const Image& img, const std::string& path) {
  const auto p = std::filesystem::path(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  const auto bytes = to_8bit(img);
  png_image pi;
  std::memset(&pi, 0, sizeof pi);
  pi.version = PNG_IMAGE_VERSION;
  pi.width = static_cast<png_uint_32>(img.cols);
  pi.height = static_cast<png_uint_32>(img.rows);
  pi.format = PNG_FORMAT_GRAY;
  if (!png_image_write_to_file(&pi, path.c_str(), 0, bytes.data(), 0, nullptr)) {
    const std::string msg = pi.message;
    png_image_free(&pi);
    throw Error("IOError", "cannot write " + path + ": " + msg);
  }
}

std::vector<std::uint8_t> read_png_gray(const std::string& path, int& rows, int& cols) {
  png_image pi;
  std::memset(&pi, 0, sizeof pi);
  pi.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&pi, path.c_str())) throw Error("IOError", "cannot read " + path);
  pi.format = PNG_FORMAT_GRAY;
  std::vector<std::uint8_t> out(PNG_IMAGE_SIZE(pi));
  if (!png_image_finish_read(&pi, nullptr, out.data(), 0, nullptr)) {
    png_image_free(&pi);
    throw Error("IOError", "cannot decode " + path);
  }
  rows = static_cast<int>(pi.height);
  cols = static_cast<int>(pi.width);
  return out;
}

}  // namespace beamassist::analysis
