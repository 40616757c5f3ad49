#include <benchmark/benchmark.h>

#include "beamassist/analysis/engine.hpp"

using namespace beamassist::analysis;

namespace {

const DetectorFrame& frame() {
  static const DetectorFrame f = [] {
    SynthSpec s;
    s.rings = {Ring{1.5, 1000.0, 0.05}};
    s.background = 1.0;
    s.noise_seed = 1;
    return synth_frame(DetectorGeometry{}, s);
  }();
  return f;
}

Exec exec_of(const benchmark::State& st) { return st.range(0) ? Exec::parallel : Exec::serial; }

void label(benchmark::State& st) { st.SetLabel(st.range(0) ? "omp" : "serial"); }

void BM_pixel_map(benchmark::State& st) {
  for (auto _ : st) benchmark::DoNotOptimize(compute_pixel_map(frame().geometry, exec_of(st)));
  label(st);
}

void BM_circular_average(benchmark::State& st) {
  for (auto _ : st) benchmark::DoNotOptimize(circular_average(frame(), kDefaultBins, exec_of(st)));
  label(st);
}

void BM_sector_average(benchmark::State& st) {
  for (auto _ : st) benchmark::DoNotOptimize(sector_average(frame(), 90.0, 60.0, kDefaultBins, exec_of(st)));
  label(st);
}

void BM_linecut_angle(benchmark::State& st) {
  for (auto _ : st) benchmark::DoNotOptimize(linecut_angle(frame(), 1.5, kDefaultThickness, 360, exec_of(st)));
  label(st);
}

void BM_q_image(benchmark::State& st) {
  for (auto _ : st) benchmark::DoNotOptimize(q_image(frame(), exec_of(st)));
  label(st);
}

void BM_q2I_fit(benchmark::State& st) {
  for (auto _ : st) benchmark::DoNotOptimize(circular_average_q2I_fit(frame(), FitModel::scaled_gaussian, exec_of(st)));
  label(st);
}

}  // namespace

BENCHMARK(BM_pixel_map)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_circular_average)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_sector_average)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_linecut_angle)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_q_image)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_q2I_fit)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
