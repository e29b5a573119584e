#ifndef EVASION_CENSORED_STATS_HPP_
#define EVASION_CENSORED_STATS_HPP_

// Per-cell capture/time/entry accumulators, the censored-data MLE of a
// piecewise-constant intensity and its lower-confidence planning field.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <ostream>
#include <string_view>
#include <utility>
#include <vector>

#include "evasion/errors.hpp"
#include "evasion/geometry.hpp"

namespace evasion {

/// Accumulators per observation cell, indexed by ObsGrid::linear.
struct CellStats {
  ObsGrid grid;
  std::vector<double> captures;       // G_c
  std::vector<double> time;           // G_t
  std::vector<std::int64_t> entries;  // G_n

  CellStats() = default;
  explicit CellStats(const ObsGrid& g)
      : grid(g),
        captures(g.cell_count(), 0.0),
        time(g.cell_count(), 0.0),
        entries(g.cell_count(), 0) {}

  std::size_t size() const { return captures.size(); }

  friend bool operator==(const CellStats&, const CellStats&) = default;
};

/// K~ and its estimated variance per cell.
struct PcEstimate {
  std::vector<double> intensity;  // K~ = G_c / G_t
  std::vector<double> variance;   // sigma~^2 = G_c / G_t^2
};

/// Stats with G_c = eps * k_min and G_t = eps everywhere, so K~ starts at k_min.
inline CellStats init_stats(double eps, double k_min, const ObsGrid& grid) {
  detail::require(eps > 0.0 && k_min > 0.0, "init_stats: eps and k_min must be positive");
  CellStats s(grid);
  std::fill(s.captures.begin(), s.captures.end(), eps * k_min);
  std::fill(s.time.begin(), s.time.end(), eps);
  return s;
}

inline PcEstimate mle_estimates(const CellStats& stats) {
  PcEstimate est;
  est.intensity.resize(stats.size());
  est.variance.resize(stats.size());
  for (std::size_t c = 0; c < stats.size(); ++c) {
    const double gt = stats.time[c];
    if (!(gt > 0.0)) throw ContractViolation("mle_estimates: accumulated time must be positive");
    est.intensity[c] = stats.captures[c] / gt;
    est.variance[c] = stats.captures[c] / (gt * gt);
  }
  return est;
}

/// sqrt(log(T |G| / gamma)), the confidence multiplier shared by both models.
inline double confidence_multiplier(long long episodes, std::size_t cells,
                                    double gamma) {
  detail::require(episodes >= 1 && cells >= 1, "confidence_multiplier: T and |G| must be >= 1");
  detail::require(gamma > 0.0 && gamma < 1.0, "confidence_multiplier: gamma must lie in (0, 1)");
  return std::sqrt(std::log(static_cast<double>(episodes) *
                            static_cast<double>(cells) / gamma));
}

/// Per-cell K^ = max(K~ - c * sigma~, k_min).
inline std::vector<double> lower_confidence_cells(const PcEstimate& est,
                                                  long long episodes,
                                                  std::size_t cells,
                                                  double gamma, double k_min) {
  const double c = confidence_multiplier(episodes, cells, gamma);
  std::vector<double> out(est.intensity.size());
  for (std::size_t k = 0; k < out.size(); ++k) {
    out[k] = std::max(est.intensity[k] - c * std::sqrt(est.variance[k]), k_min);
  }
  return out;
}

/// Piecewise-constant prolongation of per-cell values to PDE nodes. A node
/// on an interior cell boundary takes the mean of the cells meeting there.
inline ScalarField prolong_cells(const std::vector<double>& cell_values,
                                 const ObsGrid& obs, const PdeGrid& pde) {
  detail::require(cell_values.size() == obs.cell_count(),
                  "prolong_cells: one value per observation cell required");
  detail::require(obs.domain() == pde.domain(),
                  "prolong_cells: grids cover different domains");
  const int cells = obs.cells_per_side();
  const int n = pde.nodes_per_side();

  // For each node coordinate: the owning cell(s) along one axis.
  using Owners = std::vector<std::pair<int, int>>;  // (first, last) cell
  const auto owners_along = [&](int count) {
    Owners out(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
      const double t = static_cast<double>(i) * cells / (n - 1);
      const double r = std::round(t);
      if (std::abs(t - r) <= 1e-9) {
        const int line = static_cast<int>(r);
        out[static_cast<std::size_t>(i)] = {std::max(line - 1, 0), std::min(line, cells - 1)};
      } else {
        const int c = std::clamp(static_cast<int>(std::floor(t)), 0, cells - 1);
        out[static_cast<std::size_t>(i)] = {c, c};
      }
    }
    return out;
  };
  const Owners ox = owners_along(n);
  const Owners oy = owners_along(n);

  ScalarField f(pde);
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      const auto [x0, x1] = ox[static_cast<std::size_t>(i)];
      const auto [y0, y1] = oy[static_cast<std::size_t>(j)];
      double sum = 0.0;
      int count = 0;
      for (int cy = y0; cy <= y1; ++cy) {
        for (int cx = x0; cx <= x1; ++cx) {
          sum += cell_values[obs.linear({cx, cy})];
          ++count;
        }
      }
      f(i, j) = sum / count;
    }
  }
  return f;
}

/// Lower-confidence piecewise-constant planning field on the PDE grid.
inline ScalarField lower_confidence_pc(const PcEstimate& est, long long episodes,
                                       double gamma, double k_min,
                                       const ObsGrid& obs, const PdeGrid& pde) {
  return prolong_cells(
      lower_confidence_cells(est, episodes, obs.cell_count(), gamma, k_min), obs, pde);
}

/// `i,j,Gc,Gt,Gn,Ktilde,sigma2`. Cells with G_t = 0 report 0 estimates.
inline void write_stats_csv(std::ostream& os, const CellStats& stats) {
  os << "i,j,Gc,Gt,Gn,Ktilde,sigma2\n";
  char buf[64];
  const auto put = [&](double v) {
    const auto r = std::to_chars(buf, buf + sizeof(buf), v);
    os << std::string_view(buf, static_cast<std::size_t>(r.ptr - buf));
  };
  for (std::size_t k = 0; k < stats.size(); ++k) {
    const CellId id = stats.grid.from_linear(k);
    const double gc = stats.captures[k];
    const double gt = stats.time[k];
    os << id.i << ',' << id.j << ',';
    put(gc);
    os << ',';
    put(gt);
    os << ',' << stats.entries[k] << ',';
    put(gt > 0.0 ? gc / gt : 0.0);
    os << ',';
    put(gt > 0.0 ? gc / (gt * gt) : 0.0);
    os << '\n';
  }
}

}  // namespace evasion

#endif  // EVASION_CENSORED_STATS_HPP_
