#ifndef EVASION_PATH_TRACER_HPP_
#define EVASION_PATH_TRACER_HPP_

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <optional>
#include <ostream>
#include <sstream>
#include <string_view>
#include <vector>

#include "evasion/errors.hpp"
#include "evasion/geometry.hpp"

namespace evasion {

/// Polyline from the start point to the boundary with cumulative arc length
/// and cumulative travel time at every vertex.
struct Trajectory {
  std::vector<Point> vertices;
  std::vector<double> arc_length;
  std::vector<double> time;

  std::size_t size() const { return vertices.size(); }
  double length() const { return arc_length.empty() ? 0.0 : arc_length.back(); }
  double total_time() const { return time.empty() ? 0.0 : time.back(); }

  /// Appends a vertex; `dt` is the travel time of the new segment.
  void append(Point p, double dt) {
    if (vertices.empty()) {
      vertices.push_back(p);
      arc_length.push_back(0.0);
      time.push_back(0.0);
      return;
    }
    arc_length.push_back(arc_length.back() + norm(p - vertices.back()));
    time.push_back(time.back() + dt);
    vertices.push_back(p);
  }

  /// Index k of the segment [k, k+1] containing arc length `s` (clamped).
  std::size_t segment_at(double s) const {
    if (vertices.size() < 2) return 0;
    const auto it = std::upper_bound(arc_length.begin(), arc_length.end(), s);
    const auto k = static_cast<std::size_t>(std::max<std::ptrdiff_t>(
        0, std::distance(arc_length.begin(), it) - 1));
    return std::min(k, vertices.size() - 2);
  }

  Point point_at(double s) const {
    if (vertices.size() < 2) return vertices.front();
    const std::size_t k = segment_at(s);
    const double len = arc_length[k + 1] - arc_length[k];
    const double t = len > 0.0 ? std::clamp((s - arc_length[k]) / len, 0.0, 1.0) : 0.0;
    return vertices[k] + t * (vertices[k + 1] - vertices[k]);
  }

  double time_at(double s) const {
    if (vertices.size() < 2) return 0.0;
    const std::size_t k = segment_at(s);
    const double len = arc_length[k + 1] - arc_length[k];
    const double t = len > 0.0 ? std::clamp((s - arc_length[k]) / len, 0.0, 1.0) : 0.0;
    return time[k] + t * (time[k + 1] - time[k]);
  }
};

/// One uninterrupted stay inside an observation cell.
struct CellVisit {
  CellId cell;
  double entry_s = 0.0;
  double exit_s = 0.0;
  double entry_time = 0.0;
  double duration = 0.0;
};

namespace detail {

// Central differences of the bilinear interpolant over one grid spacing,
// shortened to one-sided near the boundary.
inline Point field_gradient(const ScalarField& u, Point p) {
  const PdeGrid& g = u.grid();
  const Domain& d = g.domain();
  const double xl = std::max(p.x - g.hx(), d.lower().x);
  const double xr = std::min(p.x + g.hx(), d.upper().x);
  const double yl = std::max(p.y - g.hy(), d.lower().y);
  const double yr = std::min(p.y + g.hy(), d.upper().y);
  return {(interpolate(u, {xr, p.y}) - interpolate(u, {xl, p.y})) / (xr - xl),
          (interpolate(u, {p.x, yr}) - interpolate(u, {p.x, yl})) / (yr - yl)};
}

inline double speed_at(const ScalarField* speed, Point p) {
  return speed ? interpolate(*speed, p) : 1.0;
}

}  // namespace detail

/// Gradient magnitude below which a point counts as a tie (flat top or
/// symmetric shock) and the query point is nudged.
inline constexpr double kGradientTieThreshold = 1e-12;
inline constexpr double kTiePerturbation = 1e-9;

/// Number of sampled step directions used to police the gradient step.
inline constexpr int kSampledDirections = 72;
/// The gradient step is kept when it achieves this fraction of the best
/// sampled decrease of u.
inline constexpr double kGradientAcceptance = 0.9;

namespace detail {

struct StepChoice {
  Point direction;
  double value;
};

// Best unit direction for a step of length h from p, by sampling the circle
// (ties go to the smallest angle counter-clockwise from +x) and then
// halving an angular bracket around the winner.
inline StepChoice best_sampled_step(const ScalarField& u, Point p, double h) {
  const Domain& d = u.grid().domain();
  const auto value_at = [&](double angle) {
    return interpolate(u, d.clamp(p + h * Point{std::cos(angle), std::sin(angle)}));
  };
  constexpr double kTwoPi = 6.283185307179586;
  double best_angle = 0.0;
  double best_value = value_at(0.0);
  for (int k = 1; k < kSampledDirections; ++k) {
    const double angle = kTwoPi * k / kSampledDirections;
    const double v = value_at(angle);
    if (v < best_value) {
      best_value = v;
      best_angle = angle;
    }
  }
  double span = 0.5 * kTwoPi / kSampledDirections;
  for (int it = 0; it < 10; ++it, span *= 0.5) {
    const double lo = value_at(best_angle - span);
    const double hi = value_at(best_angle + span);
    if (lo < best_value && lo <= hi) {
      best_value = lo;
      best_angle -= span;
    } else if (hi < best_value) {
      best_value = hi;
      best_angle += span;
    }
  }
  return {{std::cos(best_angle), std::sin(best_angle)}, best_value};
}

// Lowest grid node within one cell diagonal of p: the corners of the
// enclosing cell, or all eight neighbours when p sits on a node.
inline std::optional<Point> lowest_nearby_node(const ScalarField& u, Point p) {
  const PdeGrid& g = u.grid();
  const Domain& d = g.domain();
  const int n = g.nodes_per_side();
  const int i0 = std::clamp(static_cast<int>(std::floor((p.x - d.lower().x) / g.hx())), 0, n - 2);
  const int j0 = std::clamp(static_cast<int>(std::floor((p.y - d.lower().y) / g.hy())), 0, n - 2);
  const double reach = std::hypot(g.hx(), g.hy()) * (1.0 + 1e-9);
  std::optional<Point> best;
  double best_value = 0.0;
  for (int j = std::max(j0 - 1, 0); j <= std::min(j0 + 2, n - 1); ++j) {
    for (int i = std::max(i0 - 1, 0); i <= std::min(i0 + 2, n - 1); ++i) {
      const Point q = g.node(i, j);
      if (norm(q - p) > reach || q == p) continue;
      if (!best || u(i, j) < best_value) {
        best = q;
        best_value = u(i, j);
      }
    }
  }
  return best;
}

}  // namespace detail

/// Follows -grad u / |grad u| in steps of `h_path` from `x0` until within
/// `h_path` of the boundary, then appends the projection onto the boundary.
///
/// At shocks of u (ridges where several optimal paths meet) the central
/// difference loses its transverse component and the gradient step would
/// ride the ridge. Each gradient step is therefore compared with the best of
/// a sampled set of step directions and replaced by it when it achieves less
/// than kGradientAcceptance of that decrease. Tie steps keep the nudged
/// gradient: near a discretely rounded maximum the sampled search would
/// otherwise favour the diagonals. When no sampled step descends, the path
/// moves to the lowest nearby grid node if that is lower.
///
/// `speed` is only used to turn segment lengths into travel times; null
/// means unit speed.
inline Trajectory trace_path(const ScalarField& u, Point x0, double h_path,
                             const ScalarField* speed = nullptr) {
  const Domain& domain = u.grid().domain();
  if (!(h_path > 0.0)) throw ContractViolation("trace_path: h_path must be positive");
  if (!domain.contains(x0)) throw DomainError("trace_path: start point outside domain");

  Trajectory path;
  path.append(x0, 0.0);
  const auto max_steps =
      static_cast<std::size_t>(std::ceil(10.0 * domain.diameter() / h_path));

  Point p = x0;
  std::size_t steps = 0;
  while (domain.distance_to_boundary(p) > h_path) {
    if (++steps > max_steps) {
      std::ostringstream os;
      os << "trace_path: no boundary reached after " << max_steps << " steps";
      throw NonConvergenceError(os.str());
    }
    Point grad = detail::field_gradient(u, p);
    const bool tie = norm(grad) < kGradientTieThreshold;
    // Ties: nudge along +x, +y, -x, -y in turn. A diagonal nudge would sit
    // on the diagonal ridge of a symmetric field and follow it to a corner.
    static constexpr Point kNudges[] = {{kTiePerturbation, 0.0},
                                        {0.0, kTiePerturbation},
                                        {-kTiePerturbation, 0.0},
                                        {0.0, -kTiePerturbation}};
    for (const Point nudge : kNudges) {
      if (norm(grad) >= kGradientTieThreshold) break;
      grad = detail::field_gradient(u, domain.clamp(p + nudge));
    }
    const double mag = norm(grad);
    if (!std::isfinite(mag)) throw NonConvergenceError("trace_path: invalid gradient");

    const double here = interpolate(u, p);
    const detail::StepChoice sampled = detail::best_sampled_step(u, p, h_path);
    Point next = domain.clamp(p + h_path * sampled.direction);
    bool gradient_step = false;
    if (mag >= kGradientTieThreshold) {
      const Point along_gradient = domain.clamp(p - (h_path / mag) * grad);
      const double drop = here - interpolate(u, along_gradient);
      if (tie || (drop > 0.0 && drop >= kGradientAcceptance * (here - sampled.value))) {
        next = along_gradient;
        gradient_step = true;
      }
    }
    if (!gradient_step && !(sampled.value < here)) {
      // Descent continues only inside a channel narrower than the step;
      // such channels run through grid nodes, so move to the lowest one.
      const std::optional<Point> node = detail::lowest_nearby_node(u, p);
      if (node && interpolate(u, *node) < here) next = *node;
    }
    const Point mid = 0.5 * (p + next);
    path.append(next, norm(next - p) / detail::speed_at(speed, mid));
    p = next;
  }
  const Point exit = domain.project_to_boundary(p);
  if (!(exit == p)) {
    path.append(exit, norm(exit - p) / detail::speed_at(speed, 0.5 * (p + exit)));
  }
  return path;
}

/// Splits the polyline at every observation-cell boundary crossing. Time of
/// each segment is shared out in proportion to length, so durations sum to
/// the trajectory's total time.
inline std::vector<CellVisit> segment_by_cells(const Trajectory& t,
                                               const ObsGrid& grid) {
  std::vector<CellVisit> visits;
  if (t.size() < 2) return visits;
  const Domain& d = grid.domain();
  const int n = grid.cells_per_side();
  const auto cell_units = [&](Point p) {
    return Point{(p.x - d.lower().x) / d.width() * n,
                 (p.y - d.lower().y) / d.height() * n};
  };

  std::vector<double> cuts;
  for (std::size_t k = 0; k + 1 < t.size(); ++k) {
    const Point a = t.vertices[k];
    const Point b = t.vertices[k + 1];
    const double seg_len = t.arc_length[k + 1] - t.arc_length[k];
    const double seg_time = t.time[k + 1] - t.time[k];
    if (!(seg_len > 0.0)) continue;

    const Point ca = cell_units(a);
    const Point cb = cell_units(b);
    cuts.assign({0.0, 1.0});
    const auto add_crossings = [&cuts](double from, double to) {
      if (from == to) return;
      const double lo = std::min(from, to);
      const double hi = std::max(from, to);
      for (double line = std::floor(lo) + 1.0; line < hi; line += 1.0) {
        cuts.push_back((line - from) / (to - from));
      }
    };
    add_crossings(ca.x, cb.x);
    add_crossings(ca.y, cb.y);
    std::sort(cuts.begin(), cuts.end());
    // Coincident crossings (a corner) must not leave a sliver behind.
    cuts.erase(std::unique(cuts.begin(), cuts.end(),
                           [](double x, double y) { return y - x <= 1e-12; }),
               cuts.end());
    if (cuts.back() != 1.0) cuts.back() = 1.0;

    for (std::size_t c = 0; c + 1 < cuts.size(); ++c) {
      const double t0 = cuts[c];
      const double t1 = cuts[c + 1];
      const Point mid = a + (0.5 * (t0 + t1)) * (b - a);
      const CellId cell = cell_index(d.clamp(mid), grid);
      const double entry_s = t.arc_length[k] + t0 * seg_len;
      const double exit_s = t.arc_length[k] + t1 * seg_len;
      const double dur = (t1 - t0) * seg_time;
      if (!visits.empty() && visits.back().cell == cell) {
        visits.back().exit_s = exit_s;
        visits.back().duration += dur;
      } else {
        visits.push_back({cell, entry_s, exit_s, t.time[k] + t0 * seg_time, dur});
      }
    }
  }
  return visits;
}

/// `s,x,y` rows, one per vertex.
inline void write_trajectory_csv(std::ostream& os, const Trajectory& t) {
  os << "s,x,y\n";
  char buf[64];
  const auto num = [&buf](double v) {
    const auto r = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string_view(buf, static_cast<std::size_t>(r.ptr - buf));
  };
  for (std::size_t k = 0; k < t.size(); ++k) {
    os << num(t.arc_length[k]) << ',';
    os << num(t.vertices[k].x) << ',';
    os << num(t.vertices[k].y) << '\n';
  }
}

}  // namespace evasion

#endif  // EVASION_PATH_TRACER_HPP_
