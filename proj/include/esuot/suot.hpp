#pragma once

// Entropy-regularized semi-dual unbalanced OT (E-SUOT).
//
// Each stage t solves one minimum-movement step toward the target:
//   potential:  min_w  eps * E_{x_t}[ log E_{x_T} exp((w(x_T) - c(x_t, x_T)) / eps) ] + E_{x_T}[f*(-w(x_T))]
//   map:        min_T  E_{x_t}[ c(x_t, T(x_t)) - w(T(x_t)) ]
// with c(x, y) = ||x - y||^2 / (2 eta). The map is fitted after the potential,
// with the potential frozen. Pushing all samples through T gives x_{t+1}.

#include "esuot/common.hpp"
#include "esuot/dataset.hpp"
#include "esuot/divergence.hpp"
#include "esuot/nn.hpp"
#include "esuot/ot.hpp"

#include <string>
#include <string_view>
#include <vector>

namespace esuot::suot {

enum class Trainer { ESuot, Adversarial, Barycentric };

inline std::string to_string(Trainer t) {
  switch (t) {
    case Trainer::ESuot: return "esuot";
    case Trainer::Adversarial: return "adversarial";
    case Trainer::Barycentric: return "barycentric";
  }
  return "?";
}

inline Trainer parse_trainer(std::string_view s) {
  if (s == "esuot") return Trainer::ESuot;
  if (s == "adversarial") return Trainer::Adversarial;
  if (s == "barycentric") return Trainer::Barycentric;
  throw ConfigError("unknown trainer '" + std::string(s) + "' (expected esuot|adversarial|barycentric)");
}

struct ESuotConfig {
  double epsilon = 0.1;  // entropy strength
  double eta = 0.5;      // JKO step size
  int stages = 5;        // T
  int batch = 1024;      // minibatch size (source and target batches are equal)
  int epochs = 300;      // optimizer steps per training phase
  double lr = 1e-3;
  ConjugateKind conjugate = ConjugateKind::KL;
  Trainer trainer = Trainer::ESuot;
  std::uint64_t seed = 0;
  int hidden = 128;          // width of the potential and map networks
  bool warm_start = false;   // initialise stage t from stage t-1 networks
  double gauge_weight = 0.0; // weight of (mean w)^2; pins the additive gauge of the identity penalty

  void validate() const {
    if (!(epsilon > 0.0)) throw ConfigError("epsilon must be > 0");
    if (!(eta > 0.0)) throw ConfigError("eta must be > 0");
    if (stages < 1) throw ConfigError("stages must be >= 1");
    if (batch < 1) throw ConfigError("batch must be >= 1");
    if (epochs < 1) throw ConfigError("epochs must be >= 1");
    if (!(lr > 0.0)) throw ConfigError("lr must be > 0");
    if (hidden < 1) throw ConfigError("hidden must be >= 1");
    if (gauge_weight < 0.0) throw ConfigError("gauge_weight must be >= 0");
    if (trainer == Trainer::Adversarial && conjugate == ConjugateKind::Identity)
      throw ConfigError("the adversarial trainer is unbounded with the identity conjugate");
  }
};

struct PotentialLoss {
  double value = 0.0;
  Vector grad;  // d value / d w_target
};

/// Minibatch E-SUOT potential objective and its gradient in the target-side
/// potential values. cost is [source x target] and already carries 1/(2 eta).
inline PotentialLoss potential_loss_with_grad(const Vector& w_target, const ot::CostMatrix& cost, double epsilon,
                                              ConjugateKind conjugate) {
  const Matrix& c = cost.values;
  const Eigen::Index bs = c.rows();
  const Eigen::Index bt = c.cols();
  if (bs == 0 || bt == 0) throw ContractError("potential_loss: empty batch");
  require_shape(w_target.size() == bt, "potential_loss: w_target must align with cost columns");
  if (!(epsilon > 0.0)) throw ConfigError("potential_loss: epsilon must be > 0");

  Matrix s = (-c).rowwise() + w_target.transpose();
  s /= epsilon;
  PotentialLoss out;
  out.grad = Vector::Zero(bt);
  double acc = 0.0;
  const double log_bt = std::log(static_cast<double>(bt));
  for (Eigen::Index j = 0; j < bs; ++j) {
    const double m = s.row(j).maxCoeff();
    const RowVector e = (s.row(j).array() - m).exp().matrix();
    const double z = e.sum();
    acc += m + std::log(z) - log_bt;
    out.grad += e.transpose() / z;
  }
  out.value = epsilon * acc / static_cast<double>(bs) + marginal_penalty(conjugate, w_target);
  out.grad = out.grad / static_cast<double>(bs) + marginal_penalty_grad(conjugate, w_target);
  if (!std::isfinite(out.value) || !out.grad.allFinite()) throw NumericError("potential_loss: non-finite value");
  return out;
}

inline double potential_loss(const Vector& w_target, const ot::CostMatrix& cost, double epsilon,
                             ConjugateKind conjugate) {
  return potential_loss_with_grad(w_target, cost, epsilon, conjugate).value;
}

/// (1/B) sum_i [ ||x_i - mapped_i||^2 / (2 eta) - w(mapped_i) ].
inline double map_loss(const Matrix& x_t, const Matrix& mapped, const Vector& w_of_mapped, double eta) {
  if (x_t.rows() == 0) throw ContractError("map_loss: empty batch");
  require_shape(x_t.rows() == mapped.rows() && x_t.cols() == mapped.cols() && w_of_mapped.size() == x_t.rows(),
                "map_loss: shapes do not align");
  const double b = static_cast<double>(x_t.rows());
  return ((x_t - mapped).rowwise().squaredNorm().sum() / (2.0 * eta) - w_of_mapped.sum()) / b;
}

// ---- network-level objectives (value + parameter gradient) ----

/// Potential objective on a (source batch, target batch) pair.
inline nn::GradBundle potential_objective_grad(const nn::NetParams& potential, const Matrix& source_batch,
                                               const Matrix& target_batch, const ESuotConfig& cfg) {
  const ot::CostMatrix cost =
      ot::cost_matrix(source_batch, target_batch, ot::CostExponent::SquaredEuclidean, 1.0 / (2.0 * cfg.eta));
  return nn::grad(potential, target_batch, [&](const Matrix& out) {
    const Vector w = out.col(0);
    PotentialLoss pl = potential_loss_with_grad(w, cost, cfg.epsilon, cfg.conjugate);
    if (cfg.gauge_weight > 0.0) {
      const double mean_w = w.mean();
      pl.value += cfg.gauge_weight * mean_w * mean_w;
      pl.grad.array() += 2.0 * cfg.gauge_weight * mean_w / static_cast<double>(w.size());
    }
    return nn::LossHead{pl.value, pl.grad};
  });
}

/// Map objective with the potential frozen; gradient is for the map only.
inline nn::GradBundle map_objective_grad(const nn::NetParams& map, const nn::NetParams& potential,
                                         const Matrix& x_batch, double eta) {
  const nn::ForwardCache tc = nn::forward_cached(map, x_batch);
  const nn::ForwardCache wc = nn::forward_cached(potential, tc.output);
  const double b = static_cast<double>(x_batch.rows());
  const double value = map_loss(x_batch, tc.output, wc.output.col(0), eta);
  const nn::Backprop wb = nn::backward(potential, wc, Matrix::Constant(x_batch.rows(), 1, -1.0 / b));
  const Matrix d_mapped = (tc.output - x_batch) / (eta * b) + wb.input_grad;
  nn::Backprop tb = nn::backward(map, tc, d_mapped);
  tb.grads.loss_value = value;
  return std::move(tb.grads);
}

/// Adversarial (entropy-free) potential step: E w(T(x)) + E f*(-w(x_T)), map frozen.
inline nn::GradBundle adversarial_potential_grad(const nn::NetParams& potential, const Matrix& mapped_batch,
                                                 const Matrix& target_batch, ConjugateKind conjugate) {
  const double b = static_cast<double>(mapped_batch.rows());
  nn::GradBundle g = nn::grad(potential, mapped_batch, [&](const Matrix& out) {
    return nn::LossHead{out.col(0).mean(), Matrix::Constant(out.rows(), 1, 1.0 / b)};
  });
  g += nn::grad(potential, target_batch, [&](const Matrix& out) {
    const Vector w = out.col(0);
    return nn::LossHead{marginal_penalty(conjugate, w), marginal_penalty_grad(conjugate, w)};
  });
  return g;
}

/// Barycentric regression: (1/B) sum_i ||x~_i - T(x_i)||^2.
inline nn::GradBundle barycentric_regression_grad(const nn::NetParams& map, const Matrix& x_batch,
                                                  const Matrix& projected) {
  require_shape(projected.rows() == x_batch.rows() && projected.cols() == x_batch.cols(),
                "barycentric regression: projected points misaligned");
  const double b = static_cast<double>(x_batch.rows());
  return nn::grad(map, x_batch, [&](const Matrix& out) {
    const Matrix diff = out - projected;
    return nn::LossHead{diff.rowwise().squaredNorm().sum() / b, 2.0 * diff / b};
  });
}

// ---- trainers ----

struct StageFit {
  nn::NetParams net;
  std::vector<double> losses;  // one entry per epoch
};

struct TransportStage {
  nn::NetParams potential;  // empty for the barycentric trainer
  nn::NetParams map;
  int stage_index = 0;
  std::vector<double> potential_curve;
  std::vector<double> map_curve;
  int skipped_batches = 0;
};

/// First-layer weight scale of a fresh potential, relative to the usual
/// uniform init. Smaller weights keep the network smooth away from the target
/// samples, where the map still queries it.
inline constexpr double kPotentialInputScale = 0.5;

inline nn::NetParams make_potential_net(const ESuotConfig& cfg, Eigen::Index dim, std::uint64_t seed) {
  nn::NetParams net = nn::mlp_init({static_cast<int>(dim), cfg.hidden, 1}, nn::Activation::SiLU, false, seed);
  net.layers.front().weight *= kPotentialInputScale;
  return net;
}

/// Residual map; the output layer starts at zero so a fresh map is the identity.
inline nn::NetParams make_map_net(const ESuotConfig& cfg, Eigen::Index dim, std::uint64_t seed) {
  nn::NetParams net =
      nn::mlp_init({static_cast<int>(dim), cfg.hidden, static_cast<int>(dim)}, nn::Activation::SiLU, true, seed);
  net.layers.back().weight.setZero();
  return net;
}

inline Eigen::Index effective_batch(const ESuotConfig& cfg, Eigen::Index n) {
  return std::min<Eigen::Index>(cfg.batch, n);
}

inline void check_pair(const Matrix& source, const Matrix& target) {
  if (source.rows() == 0 || target.rows() == 0) throw ContractError("training needs non-empty sample sets");
  require_shape(source.cols() == target.cols(), "source and target feature dims differ");
}

/// Fit the stage potential by minibatch Adam. `init` (optional) warm-starts.
inline StageFit train_potential(const ESuotConfig& cfg, const Matrix& source, const Matrix& target, Rng& rng,
                                const nn::NetParams* init = nullptr) {
  check_pair(source, target);
  StageFit fit;
  fit.net = init ? *init : make_potential_net(cfg, source.cols(), rng());
  nn::AdamState adam = nn::AdamState::for_net(fit.net);
  const Eigen::Index bs = effective_batch(cfg, source.rows());
  const Eigen::Index bt = effective_batch(cfg, target.rows());
  for (int e = 0; e < cfg.epochs; ++e) {
    const Matrix xs = gather_rows(source, sample_indices(rng, source.rows(), bs));
    const Matrix xt = gather_rows(target, sample_indices(rng, target.rows(), bt));
    nn::GradBundle g;
    try {
      g = potential_objective_grad(fit.net, xs, xt, cfg);
    } catch (const NumericError& err) {
      throw NumericError(std::string("potential epoch ") + std::to_string(e) + ": " + err.what());
    }
    fit.losses.push_back(g.loss_value);
    nn::adam_step(fit.net, g, adam, cfg.lr);
  }
  return fit;
}

/// Fit the stage map against a frozen potential.
inline StageFit train_map(const ESuotConfig& cfg, const nn::NetParams& potential, const Matrix& source, Rng& rng,
                          const nn::NetParams* init = nullptr) {
  if (source.rows() == 0) throw ContractError("train_map: empty source");
  require_shape(potential.in_dim() == source.cols() && potential.out_dim() == 1,
                "train_map: potential does not match the feature dim");
  StageFit fit;
  fit.net = init ? *init : make_map_net(cfg, source.cols(), rng());
  nn::AdamState adam = nn::AdamState::for_net(fit.net);
  const Eigen::Index bs = effective_batch(cfg, source.rows());
  for (int e = 0; e < cfg.epochs; ++e) {
    const Matrix xs = gather_rows(source, sample_indices(rng, source.rows(), bs));
    nn::GradBundle g;
    try {
      g = map_objective_grad(fit.net, potential, xs, cfg.eta);
    } catch (const NumericError& err) {
      throw NumericError(std::string("map epoch ") + std::to_string(e) + ": " + err.what());
    }
    fit.losses.push_back(g.loss_value);
    nn::adam_step(fit.net, g, adam, cfg.lr);
  }
  return fit;
}

inline TransportStage esuot_train_stage(const ESuotConfig& cfg, const Matrix& source, const Matrix& target, Rng& rng,
                                        const TransportStage* previous = nullptr) {
  StageFit w = train_potential(cfg, source, target, rng, previous ? &previous->potential : nullptr);
  StageFit t = train_map(cfg, w.net, source, rng, previous ? &previous->map : nullptr);
  TransportStage stage;
  stage.potential = std::move(w.net);
  stage.map = std::move(t.net);
  stage.potential_curve = std::move(w.losses);
  stage.map_curve = std::move(t.losses);
  return stage;
}

/// Alternating sup-inf training without entropy: one potential step, then one
/// map step per epoch. Aborts when the smoothed potential loss exceeds 1e6 in magnitude.
inline TransportStage adversarial_train_stage(const ESuotConfig& cfg, const Matrix& source, const Matrix& target,
                                              Rng& rng, const TransportStage* previous = nullptr) {
  check_pair(source, target);
  if (cfg.conjugate == ConjugateKind::Identity)
    throw ConfigError("the adversarial trainer is unbounded with the identity conjugate");
  TransportStage stage;
  stage.potential = previous ? previous->potential : make_potential_net(cfg, source.cols(), rng());
  stage.map = previous ? previous->map : make_map_net(cfg, source.cols(), rng());
  nn::AdamState adam_w = nn::AdamState::for_net(stage.potential);
  nn::AdamState adam_t = nn::AdamState::for_net(stage.map);
  const Eigen::Index bs = effective_batch(cfg, source.rows());
  const Eigen::Index bt = effective_batch(cfg, target.rows());
  double smoothed = 0.0;
  for (int e = 0; e < cfg.epochs; ++e) {
    const Matrix xs = gather_rows(source, sample_indices(rng, source.rows(), bs));
    const Matrix xt = gather_rows(target, sample_indices(rng, target.rows(), bt));
    const Matrix mapped = nn::mlp_forward(stage.map, xs);
    nn::GradBundle gw = adversarial_potential_grad(stage.potential, mapped, xt, cfg.conjugate);
    smoothed = e == 0 ? gw.loss_value : 0.1 * gw.loss_value + 0.9 * smoothed;
    if (std::abs(smoothed) > 1e6)
      throw NumericError("adversarial training diverged at epoch " + std::to_string(e));
    stage.potential_curve.push_back(gw.loss_value);
    nn::adam_step(stage.potential, gw, adam_w, cfg.lr);

    const Matrix xs2 = gather_rows(source, sample_indices(rng, source.rows(), bs));
    nn::GradBundle gt = map_objective_grad(stage.map, stage.potential, xs2, cfg.eta);
    stage.map_curve.push_back(gt.loss_value);
    nn::adam_step(stage.map, gt, adam_t, cfg.lr);
  }
  return stage;
}

/// Balanced entropic OT between the two minibatches (cost / (2 eta), entropy eps),
/// barycentric projection of the source batch, then least-squares regression of
/// the map onto the projected points.
inline TransportStage barycentric_train_stage(const ESuotConfig& cfg, const Matrix& source, const Matrix& target,
                                              Rng& rng, const TransportStage* previous = nullptr) {
  check_pair(source, target);
  TransportStage stage;
  stage.map = previous ? previous->map : make_map_net(cfg, source.cols(), rng());
  nn::AdamState adam = nn::AdamState::for_net(stage.map);
  const Eigen::Index bs = effective_batch(cfg, source.rows());
  const Eigen::Index bt = effective_batch(cfg, target.rows());
  for (int e = 0; e < cfg.epochs; ++e) {
    const Matrix xs = gather_rows(source, sample_indices(rng, source.rows(), bs));
    const Matrix xt = gather_rows(target, sample_indices(rng, target.rows(), bt));
    const ot::CostMatrix cost = ot::cost_matrix(xs, xt, ot::CostExponent::SquaredEuclidean, 1.0 / (2.0 * cfg.eta));
    const ot::SinkhornPlan plan =
        ot::sinkhorn(cost, ot::uniform_weights(bs), ot::uniform_weights(bt), cfg.epsilon, {500, 1e-6});
    Matrix projected;
    try {
      projected = ot::barycentric_project(plan, xt);
    } catch (const DataError&) {
      ++stage.skipped_batches;
      continue;
    }
    nn::GradBundle g = barycentric_regression_grad(stage.map, xs, projected);
    stage.map_curve.push_back(g.loss_value);
    nn::adam_step(stage.map, g, adam, cfg.lr);
  }
  return stage;
}

struct TransportSequence {
  std::vector<TransportStage> stages;
  ESuotConfig config;

  /// Push points through the first `count` maps (all of them by default).
  Matrix apply(const Matrix& x, int count = -1) const {
    Matrix out = x;
    const int n = count < 0 ? static_cast<int>(stages.size()) : count;
    for (int t = 0; t < n; ++t) out = nn::mlp_forward(stages[static_cast<std::size_t>(t)].map, out);
    return out;
  }
};

/// Seed of the RNG stream that drives stage t.
inline std::uint64_t stage_seed(std::uint64_t run_seed, int t) { return mix_seed(run_seed, 1000u + static_cast<unsigned>(t)); }

inline TransportStage train_stage(const ESuotConfig& cfg, const Matrix& source, const Matrix& target, int t,
                                  const TransportStage* previous = nullptr) {
  Rng rng(stage_seed(cfg.seed, t));
  TransportStage stage;
  switch (cfg.trainer) {
    case Trainer::ESuot: stage = esuot_train_stage(cfg, source, target, rng, previous); break;
    case Trainer::Adversarial: stage = adversarial_train_stage(cfg, source, target, rng, previous); break;
    case Trainer::Barycentric: stage = barycentric_train_stage(cfg, source, target, rng, previous); break;
  }
  stage.stage_index = t;
  return stage;
}

struct SequenceResult {
  TransportSequence sequence;
  std::vector<Dataset> domains;  // x_0 (the source) .. x_T; labels carried unchanged
};

/// The staged loop: fit stage t on (x_t, target), then x_{t+1} = T_t(x_t) for every source sample.
inline SequenceResult build_sequence(const ESuotConfig& cfg, const Dataset& source, const Dataset& target) {
  cfg.validate();
  check_pair(source.features, target.features);
  SequenceResult res;
  res.sequence.config = cfg;
  res.domains.push_back(source.with_features(source.features, 0));
  for (int t = 0; t < cfg.stages; ++t) {
    const Matrix& x_t = res.domains.back().features;
    const TransportStage* prev = cfg.warm_start && t > 0 ? &res.sequence.stages.back() : nullptr;
    TransportStage stage;
    Matrix next;
    try {
      stage = train_stage(cfg, x_t, target.features, t, prev);
      next = nn::mlp_forward(stage.map, x_t);
    } catch (const NumericError& err) {
      throw NumericError("stage " + std::to_string(t) + ": " + err.what());
    }
    res.domains.push_back(res.domains.back().with_features(std::move(next), t + 1));
    res.sequence.stages.push_back(std::move(stage));
  }
  return res;
}

}  // namespace esuot::suot
