#ifndef EVASION_EPISODE_HPP_
#define EVASION_EPISODE_HPP_

// One escape attempt under the true intensity: hazard accumulation along the
// planned path, exponential-threshold capture sampling and the per-cell
// right-censored observations it produces.

#include <cstddef>
#include <optional>
#include <vector>

#include "evasion/censored_stats.hpp"
#include "evasion/geometry.hpp"
#include "evasion/path_tracer.hpp"
#include "evasion/rng.hpp"

namespace evasion {

/// (cell, delta, R): R = min(S, t) for one visit, delta = 1 iff captured in it.
struct CensoredObservation {
  CellId cell;
  int captured = 0;
  double exposure = 0.0;
};

struct EpisodeOutcome {
  bool captured = false;
  std::optional<Point> capture_point;
  std::optional<double> capture_arc_length;
  double cumulative_intensity = 0.0;  // J of the whole planned path
  std::vector<CensoredObservation> observations;
};

/// Cumulative hazard at every vertex: H[k] = sum over segments before k of
/// K(midpoint) * segment time. The last entry is the path's J.
inline std::vector<double> cumulative_hazard(const Trajectory& t,
                                             const ScalarField& intensity) {
  std::vector<double> h(t.size(), 0.0);
  for (std::size_t k = 1; k < t.size(); ++k) {
    const Point mid = 0.5 * (t.vertices[k - 1] + t.vertices[k]);
    h[k] = h[k - 1] + interpolate(intensity, mid) * (t.time[k] - t.time[k - 1]);
  }
  return h;
}

/// Composite-midpoint quadrature of the integral of K / f along the path.
inline double cumulative_intensity(const Trajectory& t, const ScalarField& intensity) {
  if (t.size() < 2) return 0.0;
  return cumulative_hazard(t, intensity).back();
}

/// Runs the path against a given exponential threshold `threshold`; capture
/// happens where the cumulative hazard first reaches it.
inline EpisodeOutcome simulate_episode_with_threshold(const Trajectory& t,
                                                      const ScalarField& intensity,
                                                      const ObsGrid& grid,
                                                      double threshold) {
  EpisodeOutcome out;
  const std::vector<double> hazard = cumulative_hazard(t, intensity);
  out.cumulative_intensity = hazard.empty() ? 0.0 : hazard.back();
  out.captured = t.size() >= 2 && out.cumulative_intensity >= threshold;

  double capture_s = t.length();
  if (out.captured) {
    // First segment whose end hazard reaches the threshold.
    std::size_t k = 1;
    while (hazard[k] < threshold) ++k;
    const double dh = hazard[k] - hazard[k - 1];
    const double frac = dh > 0.0 ? (threshold - hazard[k - 1]) / dh : 0.0;
    capture_s = t.arc_length[k - 1] + frac * (t.arc_length[k] - t.arc_length[k - 1]);
    out.capture_arc_length = capture_s;
    out.capture_point = t.point_at(capture_s);
  }

  // A capture on a cell's exit boundary belongs to that cell, where the hazard
  // accrued; the tolerance keeps rounding from charging the next cell instead.
  const double boundary_tol = 1e-12 * t.length();
  const std::vector<CellVisit> visits = segment_by_cells(t, grid);
  for (std::size_t v = 0; v < visits.size(); ++v) {
    const CellVisit& visit = visits[v];
    const bool last = v + 1 == visits.size();
    if (out.captured && (capture_s <= visit.exit_s + boundary_tol || last)) {
      const double r = std::min(t.time_at(capture_s) - visit.entry_time, visit.duration);
      out.observations.push_back({visit.cell, 1, std::max(r, 0.0)});
      break;
    }
    out.observations.push_back({visit.cell, 0, visit.duration});
  }
  return out;
}

/// Draws E ~ Exponential(1) from `rng` (one draw) and simulates the episode.
inline EpisodeOutcome simulate_episode(const Trajectory& t, const ScalarField& intensity,
                                       const ObsGrid& grid, RngStream& rng) {
  return simulate_episode_with_threshold(t, intensity, grid, rng.exponential());
}

/// G_c += delta, G_t += R, G_n += 1 for every observation.
inline void update_stats(CellStats& stats, const EpisodeOutcome& outcome) {
  for (const CensoredObservation& obs : outcome.observations) {
    const std::size_t c = stats.grid.linear(obs.cell);
    stats.captures[c] += obs.captured;
    stats.time[c] += obs.exposure;
    stats.entries[c] += 1;
  }
}

}  // namespace evasion

#endif  // EVASION_EPISODE_HPP_
