#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "beamassist/analysis/engine.hpp"
#include "beamassist/error.hpp"

namespace beamassist::analysis {

namespace {

constexpr int kMaxIterations = 200;
constexpr int kMaxDampingFailures = 10;
constexpr double kRelTol = 1e-8;

// params: a, q0, sigma, slope, intercept
double step_for(std::size_t j, double p) {
  const double floor = (j == 1 || j == 2) ? 1e-3 : 1.0;
  return 1e-6 * std::max(std::abs(p), floor);
}

double sse(FitModel m, const std::vector<double>& p, const std::vector<double>& xs, const std::vector<double>& ys) {
  double s = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double r = ys[i] - fit_model_value(m, p, xs[i]);
    s += r * r;
  }
  return s;
}

}  // namespace

double fit_model_value(FitModel m, const std::vector<double>& p, double q) {
  const double d = q - p[1];
  double g = p[0] * std::exp(-d * d / (2.0 * p[2] * p[2]));
  if (m == FitModel::scaled_gaussian) g *= q * q;
  return g + p[3] * q + p[4];
}

std::vector<std::vector<double>> fit_jacobian(FitModel m, const std::vector<double>& params,
                                              const std::vector<double>& xs) {
  std::vector<std::vector<double>> J(xs.size(), std::vector<double>(params.size()));
  for (std::size_t j = 0; j < params.size(); ++j) {
    const double h = step_for(j, params[j]);
    auto up = params, dn = params;
    up[j] += h;
    dn[j] -= h;
    for (std::size_t i = 0; i < xs.size(); ++i)
      J[i][j] = (fit_model_value(m, up, xs[i]) - fit_model_value(m, dn, xs[i])) / (2.0 * h);
  }
  return J;
}

json peak_fit_to_json(const PeakFit& p) {
  return json{{"model", p.model == FitModel::scaled_gaussian ? "q2_gaussian" : "gaussian"},
              {"q0", p.q0},
              {"amplitude", p.amplitude},
              {"sigma", p.sigma},
              {"slope", p.slope},
              {"intercept", p.intercept},
              {"residual_norm", p.residual_norm},
              {"iterations", p.iterations},
              {"no_peak", p.no_peak}};
}

PeakFit fit_q2I(const Curve& c, FitModel model) {
  const std::size_t n = c.x.size();
  if (n < 10) throw Error("InvalidArgs", "peak fit needs at least 10 bins, got " + std::to_string(n));
  std::vector<double> ys(n);
  for (std::size_t i = 0; i < n; ++i) ys[i] = c.x[i] * c.x[i] * c.y[i];

  const std::size_t imax = std::max_element(ys.begin(), ys.end()) - ys.begin();
  const double slope0 = (ys.back() - ys.front()) / (c.x.back() - c.x.front());
  const double icpt0 = ys.front() - slope0 * c.x.front();
  const double q0 = c.x[imax];
  double a0 = ys[imax] - (slope0 * q0 + icpt0);
  if (model == FitModel::scaled_gaussian && q0 > 0) a0 /= q0 * q0;
  std::vector<double> p = {a0, q0, 3.0 * c.bin_width, slope0, icpt0};

  double cur = sse(model, p, c.x, ys);
  double lambda = 1e-3;
  int it = 0;
  bool converged = false;
  while (it < kMaxIterations && !converged) {
    ++it;
    const auto J = fit_jacobian(model, p, c.x);
    Eigen::Matrix<double, 5, 5> A = Eigen::Matrix<double, 5, 5>::Zero();
    Eigen::Matrix<double, 5, 1> g = Eigen::Matrix<double, 5, 1>::Zero();
    for (std::size_t i = 0; i < n; ++i) {
      const double r = ys[i] - fit_model_value(model, p, c.x[i]);
      for (int a = 0; a < 5; ++a) {
        g(a) += J[i][a] * r;
        for (int b = 0; b < 5; ++b) A(a, b) += J[i][a] * J[i][b];
      }
    }
    int failures = 0;
    for (;;) {
      Eigen::Matrix<double, 5, 5> M = A;
      for (int k = 0; k < 5; ++k) M(k, k) += lambda * std::max(A(k, k), 1e-12 * (A.trace() + 1e-300));
      const Eigen::Matrix<double, 5, 1> delta = M.ldlt().solve(g);
      std::vector<double> trial = p;
      for (int k = 0; k < 5; ++k) trial[k] += delta(k);
      trial[2] = std::abs(trial[2]);
      const double next = trial[2] > 0 && delta.allFinite() ? sse(model, trial, c.x, ys) : INFINITY;
      if (std::isfinite(next) && next < cur) {
        const double rel = (cur - next) / std::max(cur, 1e-300);
        p = trial;
        cur = next;
        lambda = std::max(lambda / 10.0, 1e-12);
        if (rel < kRelTol) converged = true;
        break;
      }
      lambda *= 10.0;
      if (++failures >= kMaxDampingFailures) {
        // No descent direction left: accept if the gradient vanishes relative
        // to the residual (a minimum), otherwise report divergence.
        double worst = 0;
        const double rn = std::sqrt(cur);
        for (int k = 0; k < 5; ++k) {
          const double col = std::sqrt(A(k, k));
          if (col > 0 && rn > 0) worst = std::max(worst, std::abs(g(k)) / (col * rn));
        }
        if (worst < 1e-6 || cur == 0) {
          converged = true;
          break;
        }
        throw Error("FitDiverged", "residual did not decrease over " + std::to_string(kMaxDampingFailures) +
                                       " damping attempts (iteration " + std::to_string(it) + ")");
      }
    }
  }

  PeakFit out;
  out.model = model;
  out.amplitude = p[0];
  out.q0 = p[1];
  out.sigma = p[2];
  out.slope = p[3];
  out.intercept = p[4];
  out.residual_norm = std::sqrt(cur);
  out.iterations = it;
  const double scale = model == FitModel::scaled_gaussian ? out.q0 * out.q0 : 1.0;
  const double background = std::abs(out.slope * out.q0 + out.intercept);
  out.no_peak = !(out.amplitude * scale > 1e-6 * std::max(background, 1e-300)) || out.q0 < c.x.front() ||
                out.q0 > c.x.back();
  return out;
}

PeakFit circular_average_q2I_fit(const DetectorFrame& f, FitModel model, Exec exec) {
  return fit_q2I(circular_average(f, kDefaultBins, exec), model);
}

}  // namespace beamassist::analysis
