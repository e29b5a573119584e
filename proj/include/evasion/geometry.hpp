#ifndef EVASION_GEOMETRY_HPP_
#define EVASION_GEOMETRY_HPP_

// Domain, the vertex-centered PDE grid, the area-based observation grid,
// nodal scalar fields and the point <-> cell mappings between them.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "evasion/errors.hpp"

namespace evasion {

struct Point {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point&, const Point&) = default;
};

inline Point operator+(Point a, Point b) { return {a.x + b.x, a.y + b.y}; }
inline Point operator-(Point a, Point b) { return {a.x - b.x, a.y - b.y}; }
inline Point operator*(double s, Point a) { return {s * a.x, s * a.y}; }
inline double dot(Point a, Point b) { return a.x * b.x + a.y * b.y; }
inline double norm(Point a) { return std::hypot(a.x, a.y); }
inline double squared_distance(Point a, Point b) {
  const Point d = a - b;
  return dot(d, d);
}

/// Axis-aligned rectangle. Defaults to the unit square.
class Domain {
 public:
  Domain() = default;
  Domain(Point lower, Point upper) : lower_(lower), upper_(upper) {
    if (!(upper.x > lower.x && upper.y > lower.y)) {
      throw ContractViolation("domain: upper corner must exceed lower corner");
    }
  }

  Point lower() const { return lower_; }
  Point upper() const { return upper_; }
  double width() const { return upper_.x - lower_.x; }
  double height() const { return upper_.y - lower_.y; }
  double diameter() const { return std::hypot(width(), height()); }
  double area() const { return width() * height(); }

  /// Closed-set membership with a relative slack of `rel_tol` of the extent.
  bool contains(Point p, double rel_tol = 0.0) const {
    const double sx = rel_tol * width();
    const double sy = rel_tol * height();
    return p.x >= lower_.x - sx && p.x <= upper_.x + sx &&
           p.y >= lower_.y - sy && p.y <= upper_.y + sy;
  }

  bool interior(Point p) const {
    return p.x > lower_.x && p.x < upper_.x && p.y > lower_.y &&
           p.y < upper_.y;
  }

  /// Euclidean distance from an interior point to the nearest side.
  double distance_to_boundary(Point p) const {
    return std::min({p.x - lower_.x, upper_.x - p.x, p.y - lower_.y,
                     upper_.y - p.y});
  }

  /// Orthogonal projection onto the nearest side.
  Point project_to_boundary(Point p) const {
    const double dl = p.x - lower_.x;
    const double dr = upper_.x - p.x;
    const double db = p.y - lower_.y;
    const double dt = upper_.y - p.y;
    const double d = std::min({dl, dr, db, dt});
    if (d == dl) return {lower_.x, p.y};
    if (d == dr) return {upper_.x, p.y};
    if (d == db) return {p.x, lower_.y};
    return {p.x, upper_.y};
  }

  Point clamp(Point p) const {
    return {std::clamp(p.x, lower_.x, upper_.x),
            std::clamp(p.y, lower_.y, upper_.y)};
  }

  friend bool operator==(const Domain&, const Domain&) = default;

 private:
  Point lower_{0.0, 0.0};
  Point upper_{1.0, 1.0};
};

/// Vertex-centered node grid: `n` nodes per side, boundary nodes on the
/// domain boundary.
class PdeGrid {
 public:
  PdeGrid() : PdeGrid(Domain{}, 101) {}
  PdeGrid(Domain domain, int nodes_per_side)
      : domain_(domain), n_(nodes_per_side) {
    if (n_ < 3) throw ContractViolation("pde grid: need at least 3 nodes per side");
    hx_ = domain_.width() / (n_ - 1);
    hy_ = domain_.height() / (n_ - 1);
  }

  const Domain& domain() const { return domain_; }
  int nodes_per_side() const { return n_; }
  std::size_t node_count() const {
    return static_cast<std::size_t>(n_) * static_cast<std::size_t>(n_);
  }
  double hx() const { return hx_; }
  double hy() const { return hy_; }
  /// Spacing of a square grid; the smaller one otherwise.
  double spacing() const { return std::min(hx_, hy_); }

  std::size_t index(int i, int j) const {
    return static_cast<std::size_t>(i) +
           static_cast<std::size_t>(j) * static_cast<std::size_t>(n_);
  }

  Point node(int i, int j) const {
    // Last node is pinned to the upper corner so the boundary is hit exactly.
    const double x = (i == n_ - 1)
                         ? domain_.upper().x
                         : domain_.lower().x + domain_.width() * i / (n_ - 1);
    const double y = (j == n_ - 1)
                         ? domain_.upper().y
                         : domain_.lower().y + domain_.height() * j / (n_ - 1);
    return {x, y};
  }

  bool on_boundary(int i, int j) const {
    return i == 0 || j == 0 || i == n_ - 1 || j == n_ - 1;
  }

  friend bool operator==(const PdeGrid&, const PdeGrid&) = default;

 private:
  Domain domain_;
  int n_;
  double hx_;
  double hy_;
};

struct CellId {
  int i = 0;
  int j = 0;

  friend bool operator==(const CellId&, const CellId&) = default;
};

/// Coarse partition of the domain into `cells_per_side`^2 equal cells.
class ObsGrid {
 public:
  ObsGrid() : ObsGrid(Domain{}, 20) {}
  ObsGrid(Domain domain, int cells_per_side)
      : domain_(domain), n_(cells_per_side) {
    if (n_ < 1) throw ContractViolation("observation grid: need at least 1 cell");
  }

  const Domain& domain() const { return domain_; }
  int cells_per_side() const { return n_; }
  std::size_t cell_count() const {
    return static_cast<std::size_t>(n_) * static_cast<std::size_t>(n_);
  }
  double cell_width() const { return domain_.width() / n_; }
  double cell_height() const { return domain_.height() / n_; }
  double cell_diameter() const { return std::hypot(cell_width(), cell_height()); }

  bool valid(CellId id) const {
    return id.i >= 0 && id.j >= 0 && id.i < n_ && id.j < n_;
  }

  std::size_t linear(CellId id) const {
    return static_cast<std::size_t>(id.i) +
           static_cast<std::size_t>(id.j) * static_cast<std::size_t>(n_);
  }

  CellId from_linear(std::size_t k) const {
    return {static_cast<int>(k % static_cast<std::size_t>(n_)),
            static_cast<int>(k / static_cast<std::size_t>(n_))};
  }

  friend bool operator==(const ObsGrid&, const ObsGrid&) = default;

 private:
  Domain domain_;
  int n_;
};

inline CellId cell_index(Point p, const ObsGrid& grid) {
  const Domain& d = grid.domain();
  if (!d.contains(p)) {
    std::ostringstream os;
    os << "cell_index: point (" << p.x << ", " << p.y << ") outside domain";
    throw DomainError(os.str());
  }
  const int n = grid.cells_per_side();
  const auto locate = [n](double t) {
    return std::clamp(static_cast<int>(std::floor(t * n)), 0, n - 1);
  };
  return {locate((p.x - d.lower().x) / d.width()),
          locate((p.y - d.lower().y) / d.height())};
}

inline Point cell_center(CellId id, const ObsGrid& grid) {
  if (!grid.valid(id)) throw DomainError("cell_center: invalid cell id");
  const Domain& d = grid.domain();
  return {d.lower().x + (id.i + 0.5) * grid.cell_width(),
          d.lower().y + (id.j + 0.5) * grid.cell_height()};
}

/// Real value per PDE-grid node, stored with (i, j) -> i + j * n.
class ScalarField {
 public:
  ScalarField() = default;
  explicit ScalarField(const PdeGrid& grid, double fill = 0.0)
      : grid_(grid), values_(grid.node_count(), fill) {}
  ScalarField(const PdeGrid& grid, std::vector<double> values)
      : grid_(grid), values_(std::move(values)) {
    if (values_.size() != grid_.node_count()) {
      throw ContractViolation("scalar field: value count does not match grid");
    }
  }

  /// Samples `fn(Point)` at every node.
  template <typename Fn>
  static ScalarField sample(const PdeGrid& grid, Fn&& fn) {
    ScalarField f(grid);
    const int n = grid.nodes_per_side();
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i) f.values_[grid.index(i, j)] = fn(grid.node(i, j));
    return f;
  }

  const PdeGrid& grid() const { return grid_; }
  std::size_t size() const { return values_.size(); }

  double operator()(int i, int j) const { return values_[grid_.index(i, j)]; }
  double& operator()(int i, int j) { return values_[grid_.index(i, j)]; }
  double operator[](std::size_t k) const { return values_[k]; }
  double& operator[](std::size_t k) { return values_[k]; }

  const std::vector<double>& values() const { return values_; }
  std::vector<double>& values() { return values_; }

  bool all_finite() const {
    return std::all_of(values_.begin(), values_.end(),
                       [](double v) { return std::isfinite(v); });
  }
  double min() const { return *std::min_element(values_.begin(), values_.end()); }
  double max() const { return *std::max_element(values_.begin(), values_.end()); }

 private:
  PdeGrid grid_;
  std::vector<double> values_;
};

/// Bilinear interpolation; exact at nodes and for fields affine per axis.
inline double interpolate(const ScalarField& f, Point p) {
  const PdeGrid& g = f.grid();
  const Domain& d = g.domain();
  // Slack absorbs round-off in points computed on the boundary.
  if (!d.contains(p, 1e-12)) {
    std::ostringstream os;
    os << "interpolate: point (" << p.x << ", " << p.y << ") outside domain";
    throw DomainError(os.str());
  }
  const int n = g.nodes_per_side();
  const double tx = std::clamp((p.x - d.lower().x) / d.width(), 0.0, 1.0) * (n - 1);
  const double ty = std::clamp((p.y - d.lower().y) / d.height(), 0.0, 1.0) * (n - 1);
  const int i = std::min(static_cast<int>(tx), n - 2);
  const int j = std::min(static_cast<int>(ty), n - 2);
  const double fx = tx - i;
  const double fy = ty - j;
  const double v00 = f(i, j);
  const double v10 = f(i + 1, j);
  const double v01 = f(i, j + 1);
  const double v11 = f(i + 1, j + 1);
  return (1.0 - fy) * ((1.0 - fx) * v00 + fx * v10) +
         fy * ((1.0 - fx) * v01 + fx * v11);
}

/// Writes `i,j,value` rows in storage order with round-trip precision.
inline void write_field_csv(std::ostream& os, const ScalarField& f) {
  const PdeGrid& g = f.grid();
  const int n = g.nodes_per_side();
  os << "i,j,value\n";
  char buf[64];
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      const auto res = std::to_chars(buf, buf + sizeof(buf), f(i, j));
      os << i << ',' << j << ',' << std::string_view(buf, res.ptr - buf) << '\n';
    }
  }
}

inline ScalarField read_field_csv(std::istream& is, const PdeGrid& grid) {
  ScalarField f(grid);
  std::vector<bool> seen(grid.node_count(), false);
  std::string line;
  if (!std::getline(is, line) || line != "i,j,value") {
    throw ContractViolation("field csv: missing header 'i,j,value'");
  }
  const int n = grid.nodes_per_side();
  std::size_t rows = 0;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto c1 = line.find(',');
    const auto c2 = line.find(',', c1 + 1);
    if (c1 == std::string::npos || c2 == std::string::npos) {
      throw ContractViolation("field csv: malformed row '" + line + "'");
    }
    int i = 0, j = 0;
    double v = 0.0;
    const char* b = line.data();
    const bool ok = std::from_chars(b, b + c1, i).ec == std::errc{} &&
                    std::from_chars(b + c1 + 1, b + c2, j).ec == std::errc{} &&
                    std::from_chars(b + c2 + 1, b + line.size(), v).ec == std::errc{};
    if (!ok || i < 0 || j < 0 || i >= n || j >= n) {
      throw ContractViolation("field csv: bad row '" + line + "'");
    }
    f(i, j) = v;
    seen[grid.index(i, j)] = true;
    ++rows;
  }
  if (rows != grid.node_count() ||
      !std::all_of(seen.begin(), seen.end(), [](bool s) { return s; })) {
    throw ContractViolation("field csv: node count does not match grid");
  }
  return f;
}

}  // namespace evasion

#endif  // EVASION_GEOMETRY_HPP_
