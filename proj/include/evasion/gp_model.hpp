#ifndef EVASION_GP_MODEL_HPP_
#define EVASION_GP_MODEL_HPP_

// Gaussian-process regression on Z = log K from per-cell censored estimates.
//
// Observations are cell centers with Z~ = log(G_c / G_t) and noise variance
// 1 / G_c on the diagonal of the Gram matrix. The covariance is the squared
// exponential alpha * exp(-|x - x'|^2 / beta^2). All solves go through a
// Cholesky factor of Sigma~ = Sigma_ob + diag(noise) + jitter * I.

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <optional>
#include <ostream>
#include <string_view>
#include <utility>
#include <vector>

#include "evasion/censored_stats.hpp"
#include "evasion/errors.hpp"
#include "evasion/geometry.hpp"

namespace evasion {

struct GpHyper {
  double alpha = 1.0;        // prior variance of Z
  double beta = 0.2;         // length scale
  double prior_mean = -0.6931471805599453;  // constant m for Z, log(0.5)

  friend bool operator==(const GpHyper&, const GpHyper&) = default;
};

struct GpObservations {
  std::vector<CellId> cells;
  std::vector<Point> points;
  std::vector<double> values;  // Z~
  std::vector<double> noise;   // variance of Z~

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }

  void push_back(CellId cell, Point p, double value, double noise_variance) {
    cells.push_back(cell);
    points.push_back(p);
    values.push_back(value);
    noise.push_back(noise_variance);
  }
};

/// Posterior mean M and variance rho of Z on the PDE grid.
struct GpPosterior {
  ScalarField mean;
  ScalarField variance;
};

inline double kernel(Point a, Point b, const GpHyper& h) {
  return h.alpha * std::exp(-squared_distance(a, b) / (h.beta * h.beta));
}

/// Cells with G_c >= 1, G_n >= n_min and G_t >= t_min, in cell order.
inline GpObservations select_observable(const CellStats& stats, long long n_min,
                                        double t_min) {
  detail::require(t_min > 0.0, "select_observable: t_min must be positive");
  GpObservations obs;
  for (std::size_t k = 0; k < stats.size(); ++k) {
    const double gc = stats.captures[k];
    const double gt = stats.time[k];
    if (gc >= 1.0 && stats.entries[k] >= n_min && gt >= t_min) {
      const CellId id = stats.grid.from_linear(k);
      obs.push_back(id, cell_center(id, stats.grid), std::log(gc / gt), 1.0 / gc);
    }
  }
  return obs;
}

inline constexpr double kInitialJitter = 1e-10;  // times alpha
inline constexpr double kMaxJitter = 1e-6;       // times alpha

/// Cholesky factor of Sigma~ with the jitter that made it succeed.
struct GramFactor {
  Eigen::LLT<Eigen::MatrixXd> llt;
  double jitter = 0.0;

  /// log |Sigma~| from the factor's diagonal.
  double log_det() const {
    const auto& l = llt.matrixLLT();
    double s = 0.0;
    for (Eigen::Index k = 0; k < l.rows(); ++k) s += std::log(l(k, k));
    return 2.0 * s;
  }
};

inline Eigen::MatrixXd gram_matrix(const GpObservations& obs, const GpHyper& h) {
  const auto n = static_cast<Eigen::Index>(obs.size());
  Eigen::MatrixXd g(n, n);
  for (Eigen::Index a = 0; a < n; ++a) {
    g(a, a) = h.alpha + obs.noise[static_cast<std::size_t>(a)];
    for (Eigen::Index b = 0; b < a; ++b) {
      const double k = kernel(obs.points[static_cast<std::size_t>(a)],
                              obs.points[static_cast<std::size_t>(b)], h);
      g(a, b) = k;
      g(b, a) = k;
    }
  }
  return g;
}

/// Factorizes Sigma~ + jitter * I, doubling the jitter from 1e-10 alpha up to
/// 1e-6 alpha until the factorization succeeds.
inline GramFactor factorize(const GpObservations& obs, const GpHyper& h) {
  detail::require(!obs.empty(), "factorize: no observations");
  detail::require(h.alpha > 0.0 && h.beta > 0.0, "factorize: alpha and beta must be positive");
  const Eigen::MatrixXd gram = gram_matrix(obs, h);
  GramFactor f;
  for (double jitter = kInitialJitter * h.alpha; jitter <= kMaxJitter * h.alpha * (1 + 1e-12);
       jitter *= 2.0) {
    Eigen::MatrixXd m = gram;
    m.diagonal().array() += jitter;
    f.llt.compute(m);
    if (f.llt.info() == Eigen::Success) {
      f.jitter = jitter;
      return f;
    }
  }
  throw IllConditionedError("gp: Gram matrix not positive definite at maximum jitter");
}

inline Eigen::VectorXd centered_values(const GpObservations& obs, const GpHyper& h) {
  Eigen::VectorXd z(static_cast<Eigen::Index>(obs.size()));
  for (std::size_t a = 0; a < obs.size(); ++a) {
    z(static_cast<Eigen::Index>(a)) = obs.values[a] - h.prior_mean;
  }
  return z;
}

/// Posterior mean and variance of Z at arbitrary query points.
inline std::pair<std::vector<double>, std::vector<double>> posterior(
    const GpObservations& obs, const GpHyper& h, const std::vector<Point>& query) {
  const GramFactor f = factorize(obs, h);
  const Eigen::VectorXd weights = f.llt.solve(centered_values(obs, h));
  const auto n = static_cast<Eigen::Index>(obs.size());
  const auto q = static_cast<Eigen::Index>(query.size());

  Eigen::MatrixXd cross(n, q);
  for (Eigen::Index c = 0; c < q; ++c) {
    for (Eigen::Index a = 0; a < n; ++a) {
      cross(a, c) = kernel(obs.points[static_cast<std::size_t>(a)],
                           query[static_cast<std::size_t>(c)], h);
    }
  }
  const Eigen::VectorXd mean = cross.transpose() * weights;
  f.llt.matrixL().solveInPlace(cross);
  const Eigen::VectorXd reduction = cross.colwise().squaredNorm().transpose();

  std::vector<double> m(query.size());
  std::vector<double> rho(query.size());
  for (Eigen::Index c = 0; c < q; ++c) {
    m[static_cast<std::size_t>(c)] = h.prior_mean + mean(c);
    rho[static_cast<std::size_t>(c)] = std::max(h.alpha - reduction(c), 0.0);
  }
  return {std::move(m), std::move(rho)};
}

/// Log marginal likelihood of the centered observations.
inline double log_marginal_likelihood(const GpObservations& obs, const GpHyper& h) {
  const GramFactor f = factorize(obs, h);
  const Eigen::VectorXd z = centered_values(obs, h);
  const Eigen::VectorXd v = f.llt.matrixL().solve(z);
  const double n = static_cast<double>(obs.size());
  return -0.5 * v.squaredNorm() - 0.5 * f.log_det() -
         0.5 * n * std::log(2.0 * std::numbers::pi);
}

/// K^ = exp(M - c * rho) node by node, c = sqrt(log(T |G| / gamma)). With
/// `bonus_uses_sqrt` the bonus is c * sqrt(rho) instead.
inline ScalarField lower_confidence_gp(const ScalarField& mean, const ScalarField& variance,
                                       long long episodes, std::size_t cells, double gamma,
                                       bool bonus_uses_sqrt = false) {
  detail::require(mean.grid() == variance.grid(), "lower_confidence_gp: grid mismatch");
  const double c = confidence_multiplier(episodes, cells, gamma);
  ScalarField k(mean.grid());
  for (std::size_t i = 0; i < k.size(); ++i) {
    const double bonus = bonus_uses_sqrt ? std::sqrt(std::max(variance[i], 0.0)) : variance[i];
    k[i] = std::exp(mean[i] - c * bonus);
  }
  return k;
}

struct HyperBounds {
  double alpha_min = 1e-2;
  double alpha_max = 1e4;
  double beta_min = 0.025;
  double beta_max = std::numbers::sqrt2;

  /// Length-scale range [h_cell / 2, domain diameter].
  static HyperBounds for_grid(const ObsGrid& grid) {
    HyperBounds b;
    b.beta_min = 0.5 * std::min(grid.cell_width(), grid.cell_height());
    b.beta_max = grid.domain().diameter();
    return b;
  }
};

struct TuneResult {
  GpHyper hyper;
  double lml = 0.0;
};

/// Maximizes the log marginal likelihood over (alpha, beta) with m fixed:
/// a log-spaced grid over the bounds followed by a shrinking compass search
/// in log coordinates. The current hyperparameters are always a candidate,
/// so the returned LML is never below LML(current). With one observation
/// the likelihood does not depend on beta and `current` is returned as is.
inline TuneResult tune_hyperparameters(const GpObservations& obs, const GpHyper& current,
                                       const HyperBounds& bounds) {
  detail::require(!obs.empty(), "tune_hyperparameters: no observations");
  constexpr double kFailed = -std::numeric_limits<double>::infinity();
  const auto evaluate = [&](double log_a, double log_b) {
    GpHyper h = current;
    h.alpha = std::exp(log_a);
    h.beta = std::exp(log_b);
    try {
      return log_marginal_likelihood(obs, h);
    } catch (const IllConditionedError&) {
      return kFailed;
    }
  };

  TuneResult best{current, evaluate(std::log(current.alpha), std::log(current.beta))};
  if (obs.size() == 1) return best;

  const double la0 = std::log(bounds.alpha_min);
  const double la1 = std::log(bounds.alpha_max);
  const double lb0 = std::log(bounds.beta_min);
  const double lb1 = std::log(bounds.beta_max);
  constexpr int kAlphaSteps = 13;
  constexpr int kBetaSteps = 11;

  double best_la = std::log(current.alpha);
  double best_lb = std::log(current.beta);
  double best_val = best.lml;
  const auto consider = [&](double la, double lb) {
    const double v = evaluate(la, lb);
    if (v > best_val) {
      best_val = v;
      best_la = la;
      best_lb = lb;
      return true;
    }
    return false;
  };

  for (int a = 0; a < kAlphaSteps; ++a) {
    for (int b = 0; b < kBetaSteps; ++b) {
      consider(la0 + (la1 - la0) * a / (kAlphaSteps - 1),
               lb0 + (lb1 - lb0) * b / (kBetaSteps - 1));
    }
  }

  double step_a = 0.5 * (la1 - la0) / (kAlphaSteps - 1);
  double step_b = 0.5 * (lb1 - lb0) / (kBetaSteps - 1);
  while (step_a > 1e-3 || step_b > 1e-3) {
    const double ca = best_la;
    const double cb = best_lb;
    bool moved = false;
    moved |= ca + step_a <= la1 && consider(ca + step_a, cb);
    moved |= !moved && ca - step_a >= la0 && consider(ca - step_a, cb);
    moved |= !moved && cb + step_b <= lb1 && consider(ca, cb + step_b);
    moved |= !moved && cb - step_b >= lb0 && consider(ca, cb - step_b);
    if (!moved) {
      step_a *= 0.5;
      step_b *= 0.5;
    }
  }

  if (best_val > best.lml) {
    best.hyper.alpha = std::exp(best_la);
    best.hyper.beta = std::exp(best_lb);
    best.lml = best_val;
  }
  return best;
}

/// Posterior on every PDE node for observations at observation-cell centers.
///
/// The kernel factors as alpha * gx(dx) * gy(dy) and both the node and the
/// cell-center sets are tensor grids, so cross covariances come from two
/// small 1-D tables. The Cholesky factor and Sigma~^{-1} are cached and
/// reused while the observed cells, their noise and the hyperparameters stay
/// the same; only the mean is then recomputed.
class GridPosterior {
 public:
  GridPosterior(const ObsGrid& obs_grid, const PdeGrid& pde_grid)
      : obs_grid_(obs_grid), pde_grid_(pde_grid) {
    detail::require(obs_grid.domain() == pde_grid.domain(),
                    "GridPosterior: grids cover different domains");
  }

  /// Prior state: M = m, rho = 0 everywhere.
  GpPosterior prior(const GpHyper& h) const {
    return {ScalarField(pde_grid_, h.prior_mean), ScalarField(pde_grid_, 0.0)};
  }

  /// Recomputes the posterior; `out` must hold fields on the PDE grid.
  void update(const GpObservations& obs, const GpHyper& h, GpPosterior& out) {
    detail::require(!obs.empty(), "GridPosterior: no observations");
    const bool same_gram = cached_ && h == hyper_ && obs.cells == cells_ && obs.noise == noise_;
    if (!same_gram) {
      factor_ = factorize(obs, h);
      hyper_ = h;
      cells_ = obs.cells;
      noise_ = obs.noise;
      cached_ = true;
      build_tables(h);
      cache_inverse_and_rows();
    }
    const Eigen::VectorXd weights = factor_.llt.solve(centered_values(obs, h));
    fill_mean(weights, h, out.mean);
    if (!same_gram) fill_variance(h, out.variance);
    ++updates_;
    if (!same_gram) ++refactorizations_;
  }

  std::size_t updates() const { return updates_; }
  std::size_t refactorizations() const { return refactorizations_; }

 private:
  void build_tables(const GpHyper& h) {
    const int n = pde_grid_.nodes_per_side();
    const int c = obs_grid_.cells_per_side();
    const double inv_b2 = 1.0 / (h.beta * h.beta);
    const Domain& d = pde_grid_.domain();
    tx_.assign(static_cast<std::size_t>(n * c), 0.0);
    ty_.assign(static_cast<std::size_t>(n * c), 0.0);
    for (int i = 0; i < n; ++i) {
      const Point p = pde_grid_.node(i, i);
      for (int a = 0; a < c; ++a) {
        const double cx = d.lower().x + (a + 0.5) * obs_grid_.cell_width();
        const double cy = d.lower().y + (a + 0.5) * obs_grid_.cell_height();
        tx_[static_cast<std::size_t>(i * c + a)] = std::exp(-(p.x - cx) * (p.x - cx) * inv_b2);
        ty_[static_cast<std::size_t>(i * c + a)] = std::exp(-(p.y - cy) * (p.y - cy) * inv_b2);
      }
    }
  }

  // Observations arrive sorted by (j, i); record the contiguous run of each
  // occupied observation row.
  void cache_inverse_and_rows() {
    rows_.clear();
    for (std::size_t p = 0; p < cells_.size(); ++p) {
      if (rows_.empty() || rows_.back().row != cells_[p].j) {
        rows_.push_back({cells_[p].j, p, p + 1});
      } else {
        rows_.back().end = p + 1;
      }
    }
    inverse_ = factor_.llt.solve(
        Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(cells_.size()),
                                  static_cast<Eigen::Index>(cells_.size())));
  }

  void fill_mean(const Eigen::VectorXd& weights, const GpHyper& h, ScalarField& mean) const {
    const int n = pde_grid_.nodes_per_side();
    const int c = obs_grid_.cells_per_side();
    // s[i][r] = sum over observations p in row r of gx(i, p.i) * w_p
    std::vector<double> s(static_cast<std::size_t>(n) * rows_.size(), 0.0);
    for (int i = 0; i < n; ++i) {
      for (std::size_t r = 0; r < rows_.size(); ++r) {
        double acc = 0.0;
        for (std::size_t p = rows_[r].begin; p < rows_[r].end; ++p) {
          acc += tx_[static_cast<std::size_t>(i * c + cells_[p].i)] *
                 weights(static_cast<Eigen::Index>(p));
        }
        s[static_cast<std::size_t>(i) * rows_.size() + r] = acc;
      }
    }
    for (int j = 0; j < n; ++j) {
      for (int i = 0; i < n; ++i) {
        double acc = 0.0;
        for (std::size_t r = 0; r < rows_.size(); ++r) {
          acc += s[static_cast<std::size_t>(i) * rows_.size() + r] *
                 ty_[static_cast<std::size_t>(j * c + rows_[r].row)];
        }
        mean(i, j) = h.prior_mean + h.alpha * acc;
      }
    }
  }

  void fill_variance(const GpHyper& h, ScalarField& variance) const {
    const int n = pde_grid_.nodes_per_side();
    const int c = obs_grid_.cells_per_side();
    const std::size_t m = cells_.size();
    const std::size_t nr = rows_.size();
    std::vector<double> gx(m);
    std::vector<double> d(m * nr);
    std::vector<double> block(nr * nr);
    std::vector<double> gy(nr);
    const double a2 = h.alpha * h.alpha;
    for (int i = 0; i < n; ++i) {
      for (std::size_t p = 0; p < m; ++p) {
        gx[p] = tx_[static_cast<std::size_t>(i * c + cells_[p].i)];
      }
      // d[p][r] = sum over q in row r of inverse(p, q) * gx[q]
      for (std::size_t p = 0; p < m; ++p) {
        const double* row = inverse_.data() + p * m;  // symmetric: column p == row p
        for (std::size_t r = 0; r < nr; ++r) {
          double acc = 0.0;
          for (std::size_t q = rows_[r].begin; q < rows_[r].end; ++q) acc += row[q] * gx[q];
          d[p * nr + r] = acc;
        }
      }
      // block[r][t] = sum over p in row r of gx[p] * d[p][t]
      std::fill(block.begin(), block.end(), 0.0);
      for (std::size_t r = 0; r < nr; ++r) {
        for (std::size_t p = rows_[r].begin; p < rows_[r].end; ++p) {
          for (std::size_t t = 0; t < nr; ++t) block[r * nr + t] += gx[p] * d[p * nr + t];
        }
      }
      for (int j = 0; j < n; ++j) {
        for (std::size_t r = 0; r < nr; ++r) {
          gy[r] = ty_[static_cast<std::size_t>(j * c + rows_[r].row)];
        }
        double quad = 0.0;
        for (std::size_t r = 0; r < nr; ++r) {
          double acc = 0.0;
          for (std::size_t t = 0; t < nr; ++t) acc += block[r * nr + t] * gy[t];
          quad += gy[r] * acc;
        }
        variance(i, j) = std::max(h.alpha - a2 * quad, 0.0);
      }
    }
  }

  struct RowSegment {
    int row;
    std::size_t begin;
    std::size_t end;
  };

  ObsGrid obs_grid_;
  PdeGrid pde_grid_;
  bool cached_ = false;
  GpHyper hyper_;
  std::vector<CellId> cells_;
  std::vector<double> noise_;
  GramFactor factor_;
  Eigen::MatrixXd inverse_;
  std::vector<double> tx_;
  std::vector<double> ty_;
  std::vector<RowSegment> rows_;
  std::size_t updates_ = 0;
  std::size_t refactorizations_ = 0;
};

/// `i,j,M,rho` rows over the PDE nodes.
inline void write_gp_csv(std::ostream& os, const GpPosterior& post) {
  os << "i,j,M,rho\n";
  char buf[64];
  const auto put = [&](double v) {
    const auto r = std::to_chars(buf, buf + sizeof(buf), v);
    os << std::string_view(buf, static_cast<std::size_t>(r.ptr - buf));
  };
  const int n = post.mean.grid().nodes_per_side();
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      os << i << ',' << j << ',';
      put(post.mean(i, j));
      os << ',';
      put(post.variance(i, j));
      os << '\n';
    }
  }
}

}  // namespace evasion

#endif  // EVASION_GP_MODEL_HPP_
