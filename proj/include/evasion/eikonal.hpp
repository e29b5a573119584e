#ifndef EVASION_EIKONAL_HPP_
#define EVASION_EIKONAL_HPP_

// Fast Marching solver for |grad u| f = K on the PDE grid with u = 0 on the
// whole boundary, first-order upwind discretization.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include "evasion/errors.hpp"
#include "evasion/geometry.hpp"

namespace evasion {

/// Accepted neighbor values along one axis; either side may be missing.
struct NeighborPair {
  std::optional<double> lower;
  std::optional<double> upper;

  std::optional<double> smallest() const {
    if (lower && upper) return std::min(*lower, *upper);
    return lower ? lower : upper;
  }
};

/// Upwind update for a node with per-axis spacings `hx`, `hy`.
inline double upwind_update(const NeighborPair& horizontal,
                            const NeighborPair& vertical, double k, double f,
                            double hx, double hy) {
  if (!(k > 0.0 && f > 0.0 && hx > 0.0 && hy > 0.0)) {
    throw ContractViolation("upwind_update: k, f and spacings must be positive");
  }
  const std::optional<double> a = horizontal.smallest();
  const std::optional<double> b = vertical.smallest();
  if (!a && !b) throw ContractViolation("upwind_update: no accepted neighbor");

  const double r = k / f;
  if (!b) return *a + r * hx;
  if (!a) return *b + r * hy;

  const double one_sided = std::min(*a + r * hx, *b + r * hy);
  if (hx == hy) {
    const double w = r * hx;
    const double diff = *a - *b;
    const double disc = 2.0 * w * w - diff * diff;
    if (disc < 0.0) return one_sided;
    const double u = 0.5 * (*a + *b + std::sqrt(disc));
    return u >= std::max(*a, *b) ? u : one_sided;
  }
  // (u - a)^2 / hx^2 + (u - b)^2 / hy^2 = r^2
  const double ix = 1.0 / (hx * hx);
  const double iy = 1.0 / (hy * hy);
  const double qa = ix + iy;
  const double qb = -2.0 * (*a * ix + *b * iy);
  const double qc = *a * *a * ix + *b * *b * iy - r * r;
  const double disc = qb * qb - 4.0 * qa * qc;
  if (disc < 0.0) return one_sided;
  const double u = (-qb + std::sqrt(disc)) / (2.0 * qa);
  return u >= std::max(*a, *b) ? u : one_sided;
}

/// Square-spacing form: w = k h / f.
inline double upwind_update(const NeighborPair& horizontal,
                            const NeighborPair& vertical, double k, double f,
                            double h) {
  return upwind_update(horizontal, vertical, k, f, h, h);
}

enum class NodeLabel : std::uint8_t { kFar, kConsidered, kAccepted };

namespace detail {

// Binary min-heap of node indices keyed on (value, index) with decrease-key.
class NodeHeap {
 public:
  NodeHeap(const std::vector<double>& keys, std::size_t capacity)
      : keys_(keys), slot_(capacity, kAbsent) {}

  bool empty() const { return heap_.empty(); }
  std::size_t size() const { return heap_.size(); }
  bool contains(std::size_t node) const { return slot_[node] != kAbsent; }

  void push(std::size_t node) {
    slot_[node] = heap_.size();
    heap_.push_back(node);
    sift_up(heap_.size() - 1);
  }

  // Call after lowering keys_[node].
  void decreased(std::size_t node) { sift_up(slot_[node]); }

  std::size_t pop() {
    const std::size_t top = heap_.front();
    swap_slots(0, heap_.size() - 1);
    heap_.pop_back();
    slot_[top] = kAbsent;
    if (!heap_.empty()) sift_down(0);
    return top;
  }

 private:
  static constexpr std::size_t kAbsent = std::numeric_limits<std::size_t>::max();

  bool before(std::size_t a, std::size_t b) const {
    return keys_[a] < keys_[b] || (keys_[a] == keys_[b] && a < b);
  }

  void swap_slots(std::size_t s, std::size_t t) {
    std::swap(heap_[s], heap_[t]);
    slot_[heap_[s]] = s;
    slot_[heap_[t]] = t;
  }

  void sift_up(std::size_t s) {
    while (s > 0) {
      const std::size_t parent = (s - 1) / 2;
      if (!before(heap_[s], heap_[parent])) break;
      swap_slots(s, parent);
      s = parent;
    }
  }

  void sift_down(std::size_t s) {
    const std::size_t n = heap_.size();
    for (;;) {
      const std::size_t l = 2 * s + 1;
      if (l >= n) break;
      std::size_t best = l;
      if (l + 1 < n && before(heap_[l + 1], heap_[l])) best = l + 1;
      if (!before(heap_[best], heap_[s])) break;
      swap_slots(s, best);
      s = best;
    }
  }

  const std::vector<double>& keys_;
  std::vector<std::size_t> heap_;
  std::vector<std::size_t> slot_;
};

inline void check_positive_field(const ScalarField& f, const char* what) {
  for (double v : f.values()) {
    if (!(v > 0.0) || !std::isfinite(v)) throw ContractViolation(what);
  }
}

}  // namespace detail

/// Solves |grad u| f = cost with u = 0 on the boundary by Fast Marching.
///
/// Throws NumericalError when the values overflow.
/// Boundary nodes are accepted first in index order, then nodes leave the
/// heap in order of (tentative value, node index). When `acceptance_order`
/// is non-null it receives every node index in the order it was accepted.
inline ScalarField solve_eikonal(const ScalarField& speed,
                                 const ScalarField& cost,
                                 std::vector<std::size_t>* acceptance_order = nullptr) {
  if (!(speed.grid() == cost.grid())) {
    throw ContractViolation("solve_eikonal: speed and cost live on different grids");
  }
  detail::check_positive_field(speed, "solve_eikonal: speed must be positive and finite");
  detail::check_positive_field(cost, "solve_eikonal: cost must be positive and finite");

  const PdeGrid& grid = cost.grid();
  const int n = grid.nodes_per_side();
  const double hx = grid.hx();
  const double hy = grid.hy();
  constexpr double kInf = std::numeric_limits<double>::infinity();

  std::vector<double> u(grid.node_count(), kInf);
  std::vector<NodeLabel> label(grid.node_count(), NodeLabel::kFar);
  detail::NodeHeap heap(u, grid.node_count());
  if (acceptance_order) {
    acceptance_order->clear();
    acceptance_order->reserve(grid.node_count());
  }

  const auto accepted_value = [&](int i, int j) -> std::optional<double> {
    if (i < 0 || j < 0 || i >= n || j >= n) return std::nullopt;
    const std::size_t k = grid.index(i, j);
    if (label[k] != NodeLabel::kAccepted) return std::nullopt;
    return u[k];
  };

  const auto relax = [&](int i, int j) {
    if (i < 0 || j < 0 || i >= n || j >= n) return;
    const std::size_t k = grid.index(i, j);
    if (label[k] == NodeLabel::kAccepted) return;
    const NeighborPair horizontal{accepted_value(i - 1, j), accepted_value(i + 1, j)};
    const NeighborPair vertical{accepted_value(i, j - 1), accepted_value(i, j + 1)};
    const double candidate =
        upwind_update(horizontal, vertical, cost[k], speed[k], hx, hy);
    if (label[k] == NodeLabel::kFar) {
      u[k] = candidate;
      label[k] = NodeLabel::kConsidered;
      heap.push(k);
    } else if (candidate < u[k]) {
      u[k] = candidate;
      heap.decreased(k);
    }
  };

  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      if (!grid.on_boundary(i, j)) continue;
      const std::size_t k = grid.index(i, j);
      u[k] = 0.0;
      label[k] = NodeLabel::kAccepted;
      if (acceptance_order) acceptance_order->push_back(k);
    }
  }
  for (int j = 1; j < n - 1; ++j) {
    for (int i = 1; i < n - 1; ++i) {
      if (grid.on_boundary(i - 1, j) || grid.on_boundary(i + 1, j) ||
          grid.on_boundary(i, j - 1) || grid.on_boundary(i, j + 1)) {
        relax(i, j);
      }
    }
  }

  while (!heap.empty()) {
    const std::size_t k = heap.pop();
    label[k] = NodeLabel::kAccepted;
    if (acceptance_order) acceptance_order->push_back(k);
    const int i = static_cast<int>(k % static_cast<std::size_t>(n));
    const int j = static_cast<int>(k / static_cast<std::size_t>(n));
    relax(i - 1, j);
    relax(i + 1, j);
    relax(i, j - 1);
    relax(i, j + 1);
  }

  for (const double v : u) {
    if (!std::isfinite(v)) {
      throw NumericalError("solve_eikonal: value overflow (cost/speed ratio too large)");
    }
  }
  return ScalarField(grid, std::move(u));
}

/// Unit-speed convenience overload.
inline ScalarField solve_eikonal(const ScalarField& cost) {
  return solve_eikonal(ScalarField(cost.grid(), 1.0), cost);
}

}  // namespace evasion

#endif  // EVASION_EIKONAL_HPP_
