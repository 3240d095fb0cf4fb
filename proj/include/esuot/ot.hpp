#pragma once

// Entropic optimal transport between empirical point clouds.

#include "esuot/common.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <vector>

namespace esuot::ot {

enum class CostExponent { Euclidean = 1, SquaredEuclidean = 2 };

struct CostMatrix {
  Matrix values;  // [n x m]
  CostExponent exponent = CostExponent::SquaredEuclidean;
  double scale = 1.0;
};

/// values(i, j) = scale * ||x_i - y_j||^p.
inline CostMatrix cost_matrix(const Matrix& xs, const Matrix& ys, CostExponent exponent, double scale = 1.0) {
  require_shape(xs.cols() == ys.cols(), "cost_matrix: point dimensions differ");
  CostMatrix c{Matrix(xs.rows(), ys.rows()), exponent, scale};
  for (Eigen::Index j = 0; j < ys.rows(); ++j)
    for (Eigen::Index i = 0; i < xs.rows(); ++i) c.values(i, j) = (xs.row(i) - ys.row(j)).squaredNorm();
  if (exponent == CostExponent::Euclidean) c.values = c.values.cwiseSqrt();
  c.values *= scale;
  return c;
}

struct SinkhornPlan {
  Matrix coupling;
  Vector row_marginal;
  Vector col_marginal;
  Vector row_potential;  // f, with coupling = exp((f_i + g_j - C_ij) / eps)
  Vector col_potential;  // g
  double epsilon = 0.0;
  int iterations_used = 0;
  bool converged = false;
  double marginal_violation = std::numeric_limits<double>::infinity();
};

struct SinkhornOptions {
  int max_iters = 10000;
  double tol = 1e-9;
};

inline Vector uniform_weights(Eigen::Index n) { return Vector::Constant(n, 1.0 / static_cast<double>(n)); }

/// Log-domain Sinkhorn iteration. The column update is applied last, so column
/// marginals are exact to rounding; convergence is judged on the rows.
/// `col_init` warm-starts the column potential g.
inline SinkhornPlan sinkhorn(const CostMatrix& cost, const Vector& a, const Vector& b, double epsilon,
                             SinkhornOptions opt = {}, const Vector* col_init = nullptr) {
  const Matrix& c = cost.values;
  const Eigen::Index n = c.rows();
  const Eigen::Index m = c.cols();
  require_shape(a.size() == n && b.size() == m, "sinkhorn: marginal sizes do not match cost matrix");
  if (!(epsilon > 0.0)) throw ConfigError("sinkhorn: epsilon must be positive");
  if (std::abs(a.sum() - 1.0) > 1e-12 || std::abs(b.sum() - 1.0) > 1e-12 || a.minCoeff() < 0 || b.minCoeff() < 0)
    throw ContractError("sinkhorn: marginals must be probability vectors");

  const Vector log_a = a.array().log();
  const Vector log_b = b.array().log();
  Vector f = Vector::Zero(n);
  Vector g = Vector::Zero(m);
  if (col_init) {
    require_shape(col_init->size() == m, "sinkhorn: warm start has the wrong size");
    g = *col_init;
  }
  Matrix scratch(n, m);

  SinkhornPlan plan;
  plan.epsilon = epsilon;
  plan.row_marginal = a;
  plan.col_marginal = b;

  auto row_lse = [&](const Vector& gv) {
    // LSE_j (g_j - C_ij) / eps for every row
    scratch = (-c).rowwise() + gv.transpose();
    scratch /= epsilon;
    Vector out(n);
    for (Eigen::Index i = 0; i < n; ++i) out(i) = log_sum_exp(scratch.row(i).transpose());
    return out;
  };
  auto col_lse = [&](const Vector& fv) {
    scratch = (-c).colwise() + fv;
    scratch /= epsilon;
    Vector out(m);
    for (Eigen::Index j = 0; j < m; ++j) out(j) = log_sum_exp(scratch.col(j));
    return out;
  };

  Vector lse = row_lse(g);
  for (int it = 1; it <= opt.max_iters; ++it) {
    f = epsilon * (log_a - lse);
    for (Eigen::Index i = 0; i < n; ++i)
      if (a(i) == 0.0) f(i) = -std::numeric_limits<double>::infinity();
    g = epsilon * (log_b - col_lse(f));
    for (Eigen::Index j = 0; j < m; ++j)
      if (b(j) == 0.0) g(j) = -std::numeric_limits<double>::infinity();
    plan.iterations_used = it;

    // row mass under the updated potentials; lse is reused by the next f-update
    lse = row_lse(g);
    Vector row_mass(n);
    for (Eigen::Index i = 0; i < n; ++i) row_mass(i) = a(i) == 0.0 ? 0.0 : std::exp(f(i) / epsilon + lse(i));
    plan.marginal_violation = (row_mass - a).cwiseAbs().maxCoeff();
    if (!std::isfinite(plan.marginal_violation)) throw NumericError("sinkhorn: non-finite potentials");
    if (plan.marginal_violation <= opt.tol) {
      plan.converged = true;
      break;
    }
  }

  plan.coupling.resize(n, m);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < m; ++j) {
      const double e = (f(i) + g(j) - c(i, j)) / epsilon;
      plan.coupling(i, j) = std::isfinite(e) ? std::exp(e) : 0.0;
    }
  plan.row_potential = f;
  plan.col_potential = g;
  return plan;
}

/// sum_ij pi_ij c_ij, without the entropy term.
inline double transport_cost(const SinkhornPlan& plan, const CostMatrix& cost) {
  require_shape(plan.coupling.rows() == cost.values.rows() && plan.coupling.cols() == cost.values.cols(),
                "transport_cost: plan and cost shapes differ");
  return plan.coupling.cwiseProduct(cost.values).sum();
}

/// Row-normalised plan average of the target points: x~_i = sum_j pi_ij y_j / sum_j pi_ij.
inline Matrix barycentric_project(const SinkhornPlan& plan, const Matrix& ys) {
  require_shape(plan.coupling.cols() == ys.rows(), "barycentric_project: plan columns != number of target points");
  const Vector mass = plan.coupling.rowwise().sum();
  for (Eigen::Index i = 0; i < mass.size(); ++i)
    if (!(mass(i) > 0.0)) throw DataError("barycentric_project: row " + std::to_string(i) + " carries no mass");
  Matrix out = plan.coupling * ys;
  out.array().colwise() /= mass.array();
  return out;
}

/// Deterministic, order-independent subsample: rows sorted lexicographically,
/// then taken at an even stride. Returns the input when it already fits.
inline Matrix canonical_subsample(const Matrix& points, Eigen::Index cap) {
  if (cap <= 0 || points.rows() <= cap) return points;
  std::vector<Eigen::Index> order(static_cast<std::size_t>(points.rows()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index i, Eigen::Index j) {
    for (Eigen::Index k = 0; k < points.cols(); ++k) {
      if (points(i, k) < points(j, k)) return true;
      if (points(i, k) > points(j, k)) return false;
    }
    return false;
  });
  Matrix out(cap, points.cols());
  const double stride = static_cast<double>(points.rows()) / static_cast<double>(cap);
  for (Eigen::Index k = 0; k < cap; ++k)
    out.row(k) = points.row(order[static_cast<std::size_t>(static_cast<double>(k) * stride)]);
  return out;
}

struct DistanceOptions {
  double epsilon = 0.05;
  Eigen::Index max_points = 512;
  SinkhornOptions sinkhorn{2000, 1e-5};
};

/// Sinkhorn with epsilon annealing: solve at a coarse epsilon first (halving
/// from the largest cost), warm-starting each level from the previous one.
/// Only the final level is held to opt.tol.
inline SinkhornPlan sinkhorn_annealed(const CostMatrix& cost, const Vector& a, const Vector& b, double epsilon,
                                      SinkhornOptions opt = {}) {
  if (!(epsilon > 0.0)) throw ConfigError("sinkhorn: epsilon must be positive");
  std::vector<double> levels{epsilon};
  const double top = cost.values.size() > 0 ? cost.values.maxCoeff() : 0.0;
  while (levels.back() * 2.0 < top) levels.push_back(levels.back() * 2.0);
  std::reverse(levels.begin(), levels.end());
  Vector g;
  SinkhornPlan plan;
  for (std::size_t k = 0; k < levels.size(); ++k) {
    const bool last = k + 1 == levels.size();
    const SinkhornOptions o = last ? opt : SinkhornOptions{std::min(opt.max_iters, 50), opt.tol};
    plan = sinkhorn(cost, a, b, levels[k], o, k == 0 ? nullptr : &g);
    g = plan.col_potential;
  }
  return plan;
}

/// Plug-in Sinkhorn estimate of W_p^p between two clouds with uniform weights.
/// Clouds larger than max_points are canonically subsampled.
inline double sinkhorn_distance(const Matrix& xs, const Matrix& ys, CostExponent exponent,
                                const DistanceOptions& opt = {}) {
  if (xs.rows() == 0 || ys.rows() == 0) throw ContractError("sinkhorn_distance: empty point set");
  const Matrix x = canonical_subsample(xs, opt.max_points);
  const Matrix y = canonical_subsample(ys, opt.max_points);
  const CostMatrix c = cost_matrix(x, y, exponent, 1.0);
  const SinkhornPlan plan =
      sinkhorn_annealed(c, uniform_weights(x.rows()), uniform_weights(y.rows()), opt.epsilon, opt.sinkhorn);
  return transport_cost(plan, c);
}

inline double sinkhorn_w2(const Matrix& xs, const Matrix& ys, const DistanceOptions& opt = {}) {
  return sinkhorn_distance(xs, ys, CostExponent::SquaredEuclidean, opt);
}

inline double sinkhorn_w1(const Matrix& xs, const Matrix& ys, const DistanceOptions& opt = {}) {
  return sinkhorn_distance(xs, ys, CostExponent::Euclidean, opt);
}

}  // namespace esuot::ot
