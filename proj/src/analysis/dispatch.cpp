#include <algorithm>
#include <filesystem>
#include <fstream>

#include "beamassist/analysis/engine.hpp"
#include "beamassist/error.hpp"
#include "beamassist/text.hpp"

namespace beamassist::analysis {

namespace {

std::string peak_summary(const Curve& c) {
  const std::size_t k = std::max_element(c.y.begin(), c.y.end()) - c.y.begin();
  return std::to_string(c.x.size()) + " points, maximum at " + c.x_label + "=" + text::format_number(c.x[k]);
}

void write_text(const std::string& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("IOError", "cannot write " + path);
  out << body;
}

}  // namespace

AnalysisResult dispatch_protocol(const ProtocolCommand& cmd, const DetectorFrame& f, const std::string& out_dir,
                                 Exec exec) {
  AnalysisResult res;
  res.command = cmd;
  const double thickness = cmd.thickness.value_or(kDefaultThickness);
  const std::string stem = protocol_name(cmd.protocol);
  switch (cmd.protocol) {
    case Protocol::thumbnails: res.image = downsample(f, 256); break;
    case Protocol::circular_average: res.curve = circular_average(f, kDefaultBins, exec); break;
    case Protocol::circular_average_q2I_fit:
      res.curve = circular_average(f, kDefaultBins, exec);
      res.fit = fit_q2I(*res.curve);
      break;
    case Protocol::sector_average: res.curve = sector_average(f, cmd.arg.value_or(90.0), 60.0, kDefaultBins, exec); break;
    case Protocol::linecut_angle: {
      double q = 0;
      if (cmd.arg) {
        q = *cmd.arg;
      } else {
        const Curve ca = circular_average(f, kDefaultBins, exec);
        q = ca.x[std::max_element(ca.y.begin(), ca.y.end()) - ca.y.begin()];
      }
      res.command.arg = q;
      res.curve = linecut_angle(f, q, thickness, 360, exec);
      break;
    }
    case Protocol::linecut_qr: res.curve = linecut_qr(f, cmd.arg.value_or(0.0), thickness, kDefaultBins, exec); break;
    case Protocol::linecut_qz: res.curve = linecut_qz(f, cmd.arg.value_or(0.0), thickness, kDefaultBins, exec); break;
    case Protocol::q_image: res.image = q_image(f, exec); break;
    case Protocol::qr_image: res.image = qr_image(f, exec); break;
  }

  if (res.fit)
    res.summary = stem + ": q0=" + text::format_number(res.fit->q0) + " sigma=" + text::format_number(res.fit->sigma) +
                  (res.fit->no_peak ? " (no peak)" : "");
  else if (res.curve)
    res.summary = res.command.to_string() + ": " + peak_summary(*res.curve);
  else
    res.summary = stem + ": " + std::to_string(res.image->cols) + "x" + std::to_string(res.image->rows) + " image";

  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    const std::string base = (std::filesystem::path(out_dir) / stem).string();
    if (res.curve) {
      write_text(base + ".csv", curve_to_csv(*res.curve));
      res.files.push_back(base + ".csv");
    }
    if (res.image) {
      write_png(*res.image, base + ".png");
      res.files.push_back(base + ".png");
    }
    if (res.fit) {
      write_text(base + ".json", peak_fit_to_json(*res.fit).dump(2) + "\n");
      res.files.push_back(base + ".json");
    }
  }
  return res;
}

}  // namespace beamassist::analysis
