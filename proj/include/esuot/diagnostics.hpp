#pragma once

// Diagnostics around the transport sequence: distance-to-target trajectories,
// generalization-bound terms, the score-based (estimate-then-transport)
// comparison, and the step-size advisory.

#include "esuot/classifier.hpp"
#include "esuot/common.hpp"
#include "esuot/nn.hpp"
#include "esuot/ot.hpp"
#include "esuot/suot.hpp"

#include <algorithm>
#include <functional>
#include <limits>
#include <string>
#include <vector>

namespace esuot::diag {

/// Sinkhorn W2^2 from every x_t to the target.
inline Vector w2_trajectory(const std::vector<Matrix>& domains, const Matrix& target,
                            const ot::DistanceOptions& opt = {}) {
  if (domains.empty()) throw ContractError("w2_trajectory: no domains");
  Vector out(static_cast<Eigen::Index>(domains.size()));
  for (std::size_t t = 0; t < domains.size(); ++t) {
    require_shape(domains[t].cols() == target.cols(), "w2_trajectory: dimension mismatch at domain " + std::to_string(t));
    out(static_cast<Eigen::Index>(t)) = ot::sinkhorn_w2(domains[t], target, opt);
  }
  return out;
}

/// True when each value is at most (1 + slack) times its predecessor.
inline bool non_increasing(const Vector& v, double slack) {
  for (Eigen::Index i = 1; i < v.size(); ++i)
    if (v(i) > v(i - 1) * (1.0 + slack)) return false;
  return true;
}

// ---- bound terms ----

struct BoundReport {
  double iota = 1.0;  // upper bound for cross-entropy, not a measurement
  double zeta = 0.0;
  double cumulative_cost = 0.0;
  double stat_term = 0.0;
  double source_error = 0.0;  // empirical error of h_0 on the source, in [0, 1]
  std::vector<double> stage_w1;
  std::vector<double> stage_disagreement;
  std::vector<std::string> unestimated{"optimal_hypothesis_error"};

  double bound_value() const { return source_error + iota * zeta * cumulative_cost + stat_term; }
};

struct LabeledPoints {
  Matrix features;
  std::vector<int> labels;
};

inline double spectral_product(const nn::NetParams& net, int iters = 1000) {
  double z = 1.0;
  for (const auto& l : net.layers) z *= nn::spectral_norm(l.weight, iters);
  return z;
}

/// Fraction of points in `b` whose nearest neighbour in `a` carries a different label.
inline double nn_label_disagreement(const LabeledPoints& a, const LabeledPoints& b) {
  if (a.features.rows() == 0 || b.features.rows() == 0) throw ContractError("nn_label_disagreement: empty domain");
  std::size_t differ = 0;
  for (Eigen::Index i = 0; i < b.features.rows(); ++i) {
    Eigen::Index best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < a.features.rows(); ++j) {
      const double d = (a.features.row(j) - b.features.row(i)).squaredNorm();
      if (d < best_d) {
        best_d = d;
        best = j;
      }
    }
    differ += a.labels[static_cast<std::size_t>(best)] != b.labels[static_cast<std::size_t>(i)];
  }
  return static_cast<double>(differ) / static_cast<double>(b.features.rows());
}

inline BoundReport estimate_bound_terms(const Classifier& classifier, const std::vector<LabeledPoints>& domains,
                                        Eigen::Index sample_size, int stages, double source_error = 0.0,
                                        const ot::DistanceOptions& opt = {}) {
  if (domains.size() < 2) throw ContractError("estimate_bound_terms: needs at least two domains");
  if (sample_size < 1) throw ContractError("estimate_bound_terms: sample_size must be >= 1");
  BoundReport r;
  r.zeta = spectral_product(classifier.net);
  r.stat_term = static_cast<double>(stages) / std::sqrt(static_cast<double>(sample_size));
  r.source_error = source_error;
  for (std::size_t t = 1; t < domains.size(); ++t) {
    const double w1 = ot::sinkhorn_w1(domains[t - 1].features, domains[t].features, opt);
    const double dis = nn_label_disagreement(domains[t - 1], domains[t]);
    r.stage_w1.push_back(w1);
    r.stage_disagreement.push_back(dis);
    r.cumulative_cost += std::max(0.0, w1) + (r.zeta > 0.0 ? dis / r.zeta : 0.0);
  }
  return r;
}

// ---- score matching and Langevin transport ----

struct ScoreModel {
  nn::NetParams net;  // d -> d
  double noise_sigma = 0.1;
};

struct DsmConfig {
  double sigma = 0.1;
  int hidden = 128;
  int epochs = 2000;  // optimizer steps
  int batch = 256;
  double lr = 1e-3;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(sigma > 0.0)) throw ConfigError("dsm sigma must be > 0");
    if (hidden < 1 || epochs < 0 || batch < 1) throw ConfigError("dsm hidden/epochs/batch out of range");
    if (!(lr > 0.0)) throw ConfigError("dsm lr must be > 0");
  }
};

/// Denoising score matching: mean_i || s(x_i + sigma z_i) + z_i / sigma ||^2.
inline nn::GradBundle dsm_objective_grad(const nn::NetParams& net, const Matrix& x, const Matrix& z, double sigma) {
  require_shape(x.rows() == z.rows() && x.cols() == z.cols(), "dsm: noise shape mismatch");
  const double b = static_cast<double>(x.rows());
  return nn::grad(net, x + sigma * z, [&](const Matrix& s) {
    const Matrix r = s + z / sigma;
    return nn::LossHead{r.squaredNorm() / b, 2.0 * r / b};
  });
}

struct ScoreFit {
  ScoreModel model;
  std::vector<double> losses;
};

inline ScoreFit dsm_train(const DsmConfig& cfg, const Matrix& samples) {
  cfg.validate();
  if (samples.rows() == 0) throw ContractError("dsm_train: no samples");
  const int d = static_cast<int>(samples.cols());
  ScoreFit fit;
  fit.model.noise_sigma = cfg.sigma;
  fit.model.net = nn::mlp_init({d, cfg.hidden, cfg.hidden, d}, nn::Activation::SiLU, false, mix_seed(cfg.seed, 11));
  nn::AdamState adam = nn::AdamState::for_net(fit.model.net);
  Rng rng(mix_seed(cfg.seed, 12));
  const Eigen::Index bs = std::min<Eigen::Index>(cfg.batch, samples.rows());
  for (int e = 0; e < cfg.epochs; ++e) {
    const Matrix x = gather_rows(samples, sample_indices(rng, samples.rows(), bs));
    const Matrix z = standard_normal(rng, x.rows(), x.cols());
    const nn::GradBundle g = dsm_objective_grad(fit.model.net, x, z, cfg.sigma);
    fit.losses.push_back(g.loss_value);
    nn::adam_step(fit.model.net, g, adam, cfg.lr);
  }
  return fit;
}

using ScoreFn = std::function<Matrix(const Matrix&)>;

inline ScoreFn score_fn(const ScoreModel& m) {
  return [net = m.net](const Matrix& x) { return nn::mlp_forward(net, x); };
}

/// x <- x + (step / 2) s(x) + sqrt(step) xi. When `snapshots` is given, it
/// receives x before the first step and after every `snapshot_every` steps.
inline Matrix langevin_transport(const ScoreFn& score, const Matrix& x0, double step, int n_steps,
                                 std::uint64_t seed, std::vector<Matrix>* snapshots = nullptr,
                                 int snapshot_every = 0) {
  if (!(step > 0.0)) throw ConfigError("langevin_transport: step must be > 0");
  if (n_steps < 0) throw ConfigError("langevin_transport: n_steps must be >= 0");
  Rng rng(seed);
  Matrix x = x0;
  if (snapshots) snapshots->push_back(x);
  const double root = std::sqrt(step);
  for (int k = 0; k < n_steps; ++k) {
    const Matrix s = score(x);
    require_shape(s.rows() == x.rows() && s.cols() == x.cols(), "langevin_transport: score shape mismatch");
    x += 0.5 * step * s + root * standard_normal(rng, x.rows(), x.cols());
    if (!x.allFinite()) throw NumericError("langevin_transport: non-finite state at step " + std::to_string(k));
    if (snapshots && snapshot_every > 0 && (k + 1) % snapshot_every == 0) snapshots->push_back(x);
  }
  return x;
}

// ---- estimate-then-transport vs direct transport ----

struct MotivationConfig {
  suot::ESuotConfig transport;
  DsmConfig dsm;
  double langevin_step = 0.01;
  int langevin_steps = 500;
  int snapshots = 6;  // Langevin snapshots including the initial cloud
  ot::DistanceOptions eval;
  std::uint64_t seed = 0;

  void validate() const {
    transport.validate();
    dsm.validate();
    if (!(langevin_step > 0.0) || langevin_steps < 1) throw ConfigError("langevin step/steps out of range");
    if (snapshots < 2) throw ConfigError("snapshots must be >= 2");
  }
};

struct MotivationResult {
  double w2_est_trans = 0.0;
  double w2_dir_trans = 0.0;
  std::vector<Matrix> langevin_snapshots;
  Matrix dir_trans;

  std::string winner() const { return w2_dir_trans < w2_est_trans ? "dir_trans" : "est_trans"; }
};

/// Even target rows train both routes; odd rows are held out for scoring.
inline MotivationResult motivation_compare(const MotivationConfig& cfg, const Matrix& source, const Matrix& target) {
  cfg.validate();
  if (source.cols() != 2 || target.cols() != 2) throw ContractError("motivation_compare expects 2-D point clouds");
  if (target.rows() < 2) throw ContractError("motivation_compare needs at least two target points");
  std::vector<Eigen::Index> fit_rows, held_rows;
  for (Eigen::Index i = 0; i < target.rows(); ++i) (i % 2 == 0 ? fit_rows : held_rows).push_back(i);
  const Matrix fit_target = gather_rows(target, fit_rows);
  const Matrix held_target = gather_rows(target, held_rows);

  MotivationResult r;
  DsmConfig dc = cfg.dsm;
  dc.seed = mix_seed(cfg.seed, 21);
  const ScoreFit score = dsm_train(dc, fit_target);
  const int every = std::max(1, cfg.langevin_steps / (cfg.snapshots - 1));
  const Matrix est = langevin_transport(score_fn(score.model), source, cfg.langevin_step, cfg.langevin_steps,
                                        mix_seed(cfg.seed, 22), &r.langevin_snapshots, every);
  r.w2_est_trans = ot::sinkhorn_w2(est, held_target, cfg.eval);

  suot::ESuotConfig tc = cfg.transport;
  tc.seed = mix_seed(cfg.seed, 23);
  tc.stages = 1;
  const suot::TransportStage stage = suot::train_stage(tc, source, fit_target, 0);
  r.dir_trans = nn::mlp_forward(stage.map, source);
  r.w2_dir_trans = ot::sinkhorn_w2(r.dir_trans, held_target, cfg.eval);
  return r;
}

// ---- step-size advisory ----

struct StepAdvisory {
  bool ok = false;
  double limit = 0.0;
};

/// eta must lie strictly below min(1 / grad_of_variation_bound, light_tail / grad_norm_bound).
inline StepAdvisory step_size_advisory(double eta, double grad_norm_bound, double grad_of_variation_bound,
                                       double light_tail) {
  if (!(eta > 0.0) || !(grad_norm_bound > 0.0) || !(grad_of_variation_bound > 0.0) || !(light_tail > 0.0))
    throw ConfigError("step_size_advisory: all inputs must be > 0");
  StepAdvisory a;
  a.limit = std::min(1.0 / grad_of_variation_bound, light_tail / grad_norm_bound);
  a.ok = eta < a.limit;
  return a;
}

}  // namespace esuot::diag
