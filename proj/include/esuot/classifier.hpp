#pragma once

// Softmax classifiers: cross-entropy, minibatch training, argmax prediction.

#include "esuot/common.hpp"
#include "esuot/dataset.hpp"
#include "esuot/nn.hpp"

#include <algorithm>
#include <numeric>
#include <vector>

namespace esuot {

struct Classifier {
  nn::NetParams net;  // logit head, output dim == class_count
  int class_count = 2;
};

struct ClassifierConfig {
  int hidden = 100;
  int epochs = 100;  // full passes over the data
  int batch = 256;
  double lr = 1e-3;
  std::uint64_t seed = 0;

  void validate() const {
    if (hidden < 1) throw ConfigError("classifier hidden width must be >= 1");
    if (epochs < 0) throw ConfigError("classifier epochs must be >= 0");
    if (batch < 1) throw ConfigError("classifier batch must be >= 1");
    if (!(lr > 0.0)) throw ConfigError("classifier lr must be > 0");
  }
};

/// Three dense layers with ReLU, hidden width cfg.hidden.
inline Classifier make_classifier(const ClassifierConfig& cfg, Eigen::Index dim, int class_count) {
  if (class_count < 1) throw ConfigError("class_count must be >= 1");
  Classifier c;
  c.class_count = class_count;
  c.net = nn::mlp_init({static_cast<int>(dim), cfg.hidden, cfg.hidden, class_count}, nn::Activation::ReLU, false,
                       cfg.seed);
  return c;
}

inline void check_labels(const std::vector<int>& labels, Eigen::Index rows, int class_count) {
  require_shape(static_cast<Eigen::Index>(labels.size()) == rows, "label count does not match rows");
  for (int y : labels)
    if (y < 0 || y >= class_count)
      throw ContractError("label " + std::to_string(y) + " out of range for " + std::to_string(class_count) +
                          " classes");
}

/// Mean cross-entropy of logits against labels, and its gradient in the logits.
inline nn::LossHead cross_entropy_head(const Matrix& logits, const std::vector<int>& labels) {
  check_labels(labels, logits.rows(), static_cast<int>(logits.cols()));
  const double b = static_cast<double>(logits.rows());
  nn::LossHead h;
  h.output_grad.resize(logits.rows(), logits.cols());
  double acc = 0.0;
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double lse = log_sum_exp(logits.row(i).transpose());
    const int y = labels[static_cast<std::size_t>(i)];
    acc += lse - logits(i, y);
    h.output_grad.row(i) = (logits.row(i).array() - lse).exp().matrix() / b;
    h.output_grad(i, y) -= 1.0 / b;
  }
  h.value = acc / b;
  return h;
}

inline double cross_entropy_loss(const Classifier& c, const Matrix& features, const std::vector<int>& labels) {
  if (features.rows() == 0) throw ContractError("cross_entropy_loss: empty batch");
  return cross_entropy_head(nn::mlp_forward(c.net, features), labels).value;
}

/// Argmax of the logits; ties go to the lowest class index.
inline std::vector<int> predict(const Classifier& c, const Matrix& features) {
  const Matrix logits = nn::mlp_forward(c.net, features);
  std::vector<int> out(static_cast<std::size_t>(logits.rows()));
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    int best = 0;
    for (Eigen::Index k = 1; k < logits.cols(); ++k)
      if (logits(i, k) > logits(i, best)) best = static_cast<int>(k);
    out[static_cast<std::size_t>(i)] = best;
  }
  return out;
}

/// Percent of rows whose prediction equals the label.
inline double accuracy(const std::vector<int>& predicted, const std::vector<int>& labels) {
  require_shape(predicted.size() == labels.size(), "accuracy: size mismatch");
  if (labels.empty()) throw ContractError("accuracy: no samples");
  std::size_t hit = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) hit += predicted[i] == labels[i];
  return 100.0 * static_cast<double>(hit) / static_cast<double>(labels.size());
}

inline double accuracy(const Classifier& c, const Dataset& data) {
  return accuracy(predict(c, data.features), data.require_labels("accuracy"));
}

struct ClassifierFit {
  Classifier classifier;
  std::vector<double> losses;  // mean minibatch loss per epoch
  double train_accuracy = 0.0;
};

/// Continue training `start` for `epochs` shuffled passes with a fresh Adam state.
inline ClassifierFit fit_classifier(const ClassifierConfig& cfg, Classifier start, const Matrix& features,
                                    const std::vector<int>& labels, int epochs, std::uint64_t seed) {
  cfg.validate();
  if (features.rows() == 0) throw ContractError("fit_classifier: empty dataset");
  check_labels(labels, features.rows(), start.class_count);
  require_shape(features.cols() == start.net.in_dim(), "fit_classifier: feature dim does not match the network");
  ClassifierFit fit;
  fit.classifier = std::move(start);
  nn::AdamState adam = nn::AdamState::for_net(fit.classifier.net);
  Rng rng(seed);
  std::vector<Eigen::Index> order(static_cast<std::size_t>(features.rows()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  const std::size_t b = static_cast<std::size_t>(cfg.batch);
  for (int e = 0; e < epochs; ++e) {
    std::shuffle(order.begin(), order.end(), rng);
    double sum = 0.0;
    int batches = 0;
    for (std::size_t lo = 0; lo < order.size(); lo += b) {
      const std::vector<Eigen::Index> idx(order.begin() + static_cast<std::ptrdiff_t>(lo),
                                          order.begin() + static_cast<std::ptrdiff_t>(std::min(order.size(), lo + b)));
      std::vector<int> y(idx.size());
      for (std::size_t k = 0; k < idx.size(); ++k) y[k] = labels[static_cast<std::size_t>(idx[k])];
      const nn::GradBundle g = nn::grad(fit.classifier.net, gather_rows(features, idx),
                                        [&](const Matrix& logits) { return cross_entropy_head(logits, y); });
      nn::adam_step(fit.classifier.net, g, adam, cfg.lr);
      sum += g.loss_value;
      ++batches;
    }
    fit.losses.push_back(sum / batches);
  }
  fit.train_accuracy = accuracy(predict(fit.classifier, features), labels);
  return fit;
}

inline ClassifierFit train_classifier(const ClassifierConfig& cfg, const Dataset& data) {
  const auto& labels = data.require_labels("train_classifier");
  return fit_classifier(cfg, make_classifier(cfg, data.dim(), data.class_count), data.features, labels, cfg.epochs,
                        mix_seed(cfg.seed, 7));
}

}  // namespace esuot
