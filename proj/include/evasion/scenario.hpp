#ifndef EVASION_SCENARIO_HPP_
#define EVASION_SCENARIO_HPP_

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "evasion/errors.hpp"
#include "evasion/geometry.hpp"
#include "evasion/gp_model.hpp"

namespace evasion {

/// One Gaussian bump A * exp(-|x - c|^2 / w^2) of surveillance intensity.
struct ObserverPeak {
  Point center;
  double amplitude = 1.0;
  double width = 0.1;

  friend bool operator==(const ObserverPeak&, const ObserverPeak&) = default;
};

/// Everything one experiment needs: ground truth, grids, learner settings.
struct Scenario {
  std::string name = "scenario";
  Domain domain;
  int obs_cells = 20;
  int pde_nodes = 101;
  Point start{0.5, 0.45};
  std::vector<ObserverPeak> peaks;
  double background = 0.01;
  double speed = 1.0;
  long long episodes = 15000;
  std::uint64_t seed = 1;

  double gamma = 0.01;
  double k_min = 1e-3;
  double epsilon = 1e-3;
  long long n_min = 20;
  std::optional<double> t_min;   // default: cell diameter / speed
  std::optional<double> h_path;  // default: half the PDE spacing
  double prior_mean = -0.6931471805599453;
  double alpha = 1.0;
  double beta = 0.2;
  bool bonus_uses_sqrt = false;
  long long tune_every = 1000;

  ObsGrid obs_grid() const { return ObsGrid(domain, obs_cells); }
  PdeGrid pde_grid() const { return PdeGrid(domain, pde_nodes); }
  double min_cell_time() const { return t_min.value_or(obs_grid().cell_diameter() / speed); }
  double path_step() const { return h_path.value_or(0.5 * pde_grid().spacing()); }
  GpHyper initial_hyper() const { return {alpha, beta, prior_mean}; }

  friend bool operator==(const Scenario&, const Scenario&) = default;
};

/// Checks the invariants a run relies on; throws ContractViolation.
inline void validate(const Scenario& s) {
  const auto require = [](bool ok, const std::string& msg) {
    if (!ok) throw ContractViolation("scenario: " + msg);
  };
  require(s.obs_cells >= 1, "obs_grid must be >= 1");
  require(s.pde_nodes >= 3, "pde_grid must be >= 3");
  require(s.domain.interior(s.start), "start point must be interior");
  require(s.background >= 0.0, "background must be >= 0");
  require(!s.peaks.empty() || s.background > 0.0, "intensity is identically zero");
  for (const ObserverPeak& p : s.peaks) {
    require(p.amplitude > 0.0 && p.width > 0.0, "peak amplitude and width must be positive");
  }
  require(s.speed > 0.0, "speed must be positive");
  require(s.episodes >= 1, "episodes must be >= 1");
  require(s.gamma > 0.0 && s.gamma < 1.0, "gamma must lie in (0, 1)");
  require(s.k_min > 0.0, "k_min must be positive");
  require(s.epsilon > 0.0, "epsilon must be positive");
  require(s.n_min >= 0, "n_min must be >= 0");
  require(!s.t_min || *s.t_min > 0.0, "t_min must be positive");
  require(!s.h_path || *s.h_path > 0.0, "h_path must be positive");
  require(s.alpha > 0.0 && s.beta > 0.0, "alpha and beta must be positive");
  require(s.tune_every >= 1, "tune_every must be >= 1");
}

/// K(x) = k0 + sum of peaks, sampled at every PDE node.
inline ScalarField build_intensity(const std::vector<ObserverPeak>& peaks, double background,
                                   const PdeGrid& grid) {
  if (peaks.empty() && !(background > 0.0)) {
    throw ContractViolation("build_intensity: intensity would be identically zero");
  }
  ScalarField k = ScalarField::sample(grid, [&](Point x) {
    double v = background;
    for (const ObserverPeak& p : peaks) {
      v += p.amplitude * std::exp(-squared_distance(x, p.center) / (p.width * p.width));
    }
    return v;
  });
  if (!(k.max() > 0.0)) throw ContractViolation("build_intensity: intensity is zero everywhere");
  return k;
}

inline ScalarField build_intensity(const Scenario& s) {
  return build_intensity(s.peaks, s.background, s.pde_grid());
}

}  // namespace evasion

#endif  // EVASION_SCENARIO_HPP_
