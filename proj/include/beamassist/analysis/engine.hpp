#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "beamassist/analysis/protocol.hpp"
#include "json.hpp"

namespace beamassist::analysis {

using json = nlohmann::ordered_json;

struct DetectorGeometry {
  double pixel_size_mm = 0.172;
  double distance_m = 0.26;
  double wavelength_A = 0.9184;
  int rows = 1043;
  int cols = 981;
  double center_col = 490.0;
  double center_row = 521.0;

  // Throws Error("InvalidGeometry").
  void validate() const;
};

json geometry_to_json(const DetectorGeometry& g);
DetectorGeometry geometry_from_json(const json& j);

struct QPoint {
  double q = 0, qr = 0, qz = 0;
};

// qr points right, qz points up (decreasing row index).
QPoint pixel_to_q(const DetectorGeometry& g, double row, double col);
// Inverse of pixel_to_q for an in-plane (qr, qz); nullopt past 90 degrees.
std::optional<std::pair<double, double>> q_to_pixel(const DetectorGeometry& g, double qr, double qz);

struct DetectorFrame {
  DetectorGeometry geometry;
  std::vector<float> intensities;  // row-major, rows * cols
  std::map<std::string, std::string> metadata;

  float at(int row, int col) const { return intensities[static_cast<std::size_t>(row) * geometry.cols + col]; }
};

struct Ring {
  double q0 = 1.5;
  double amplitude = 1000.0;
  double sigma = 0.05;
};

struct SynthSpec {
  std::vector<Ring> rings;
  double background = 0.0;
  // Poisson-like Gaussian noise with standard deviation noise_scale * sqrt(I).
  std::optional<std::uint64_t> noise_seed;
  double noise_scale = 1.0;
};

// Throws Error("RingOutOfRange").
DetectorFrame synth_frame(const DetectorGeometry& g, const SynthSpec& spec);

// Float32 little-endian grid at `path`, geometry sidecar at `path + ".json"`.
void write_frame(const DetectorFrame& f, const std::string& path);
// Throws Error("InvalidFrame").
DetectorFrame read_frame(const std::string& path);

enum class Exec { serial, parallel };

// Per-pixel coordinates, row-major.
struct PixelMap {
  std::vector<double> q, qr, qz, chi;  // chi in degrees, [0, 360), 90 = up
  double q_min = 0, q_max = 0;
};

PixelMap compute_pixel_map(const DetectorGeometry& g, Exec exec = Exec::parallel);

struct Curve {
  std::vector<double> x;
  std::vector<double> y;
  std::vector<long> counts;  // pixels per kept bin
  double bin_width = 0;
  std::string x_label = "q";
};

// Two columns with a header line.
std::string curve_to_csv(const Curve& c);

inline constexpr int kDefaultBins = 400;
inline constexpr double kDefaultThickness = 0.05;

// Errors: EmptyROI, InvalidArgs.
Curve circular_average(const DetectorFrame& f, int bins = kDefaultBins, Exec exec = Exec::parallel);
// Azimuth window in degrees (90 = up); default 60..120.
Curve sector_average(const DetectorFrame& f, double chi_center = 90.0, double chi_width = 60.0,
                     int bins = kDefaultBins, Exec exec = Exec::parallel);
Curve linecut_qr(const DetectorFrame& f, double qz, double thickness = kDefaultThickness, int bins = kDefaultBins,
                 Exec exec = Exec::parallel);
Curve linecut_qz(const DetectorFrame& f, double qr, double thickness = kDefaultThickness, int bins = kDefaultBins,
                 Exec exec = Exec::parallel);
Curve linecut_angle(const DetectorFrame& f, double q, double thickness = kDefaultThickness, int bins = 360,
                    Exec exec = Exec::parallel);

struct Image {
  int rows = 0, cols = 0;
  std::vector<float> data;  // row-major, row 0 at the top
  double x_min = 0, x_max = 0, y_min = 0, y_max = 0;
  std::string x_label, y_label;
};

// Nearest-neighbour remap onto a regular (qx, qz) grid the size of the frame.
Image q_image(const DetectorFrame& f, Exec exec = Exec::parallel);
// Same with qr folded to |qx|; both halves of the detector are averaged.
Image qr_image(const DetectorFrame& f, Exec exec = Exec::parallel);
// Block-mean downsample so that the longer side is at most max_side.
Image downsample(const DetectorFrame& f, int max_side = 256);

// log1p scaling to 8 bits, then PNG (grayscale).
std::vector<std::uint8_t> to_8bit(const Image& img);
void write_png(const Image& img, const std::string& path);
// Returns rows, cols and pixels; for tests.
std::vector<std::uint8_t> read_png_gray(const std::string& path, int& rows, int& cols);

enum class FitModel {
  // q^2 * a * exp(-(q-q0)^2 / 2 s^2) + m q + c; the Gaussian describes I(q).
  scaled_gaussian,
  // a * exp(-(q-q0)^2 / 2 s^2) + m q + c directly on q^2 I(q).
  plain_gaussian,
};

struct PeakFit {
  double q0 = 0, amplitude = 0, sigma = 0, slope = 0, intercept = 0;
  double residual_norm = 0;
  int iterations = 0;
  bool no_peak = false;
  FitModel model = FitModel::scaled_gaussian;
};

json peak_fit_to_json(const PeakFit& p);

double fit_model_value(FitModel m, const std::vector<double>& params, double q);
// Central-difference Jacobian of the model over xs, one row per point.
std::vector<std::vector<double>> fit_jacobian(FitModel m, const std::vector<double>& params,
                                              const std::vector<double>& xs);

// Fits q^2 I(q) of a curve. Throws Error("FitDiverged") or Error("InvalidArgs")
// when fewer than 10 bins are available.
PeakFit fit_q2I(const Curve& c, FitModel model = FitModel::scaled_gaussian);
PeakFit circular_average_q2I_fit(const DetectorFrame& f, FitModel model = FitModel::scaled_gaussian,
                                 Exec exec = Exec::parallel);

struct AnalysisResult {
  ProtocolCommand command;
  std::optional<Curve> curve;
  std::optional<Image> image;
  std::optional<PeakFit> fit;
  std::vector<std::string> files;  // written outputs
  std::string summary;
};

// Runs one protocol with the Analyst defaults and writes its outputs
// (CSV, PNG, JSON) into out_dir when non-empty.
AnalysisResult dispatch_protocol(const ProtocolCommand& cmd, const DetectorFrame& f, const std::string& out_dir = {},
                                 Exec exec = Exec::parallel);

}  // namespace beamassist::analysis
