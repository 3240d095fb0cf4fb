#pragma once

// Gradual domain adaptation along a learned transport sequence: train on the
// source, push the labeled source samples through each stage map (labels ride
// along), and fine-tune the classifier on every generated domain in turn.
// Target labels are only ever used for evaluation.

#include "esuot/classifier.hpp"
#include "esuot/dataset.hpp"
#include "esuot/diagnostics.hpp"
#include "esuot/ot.hpp"
#include "esuot/suot.hpp"

#include <algorithm>
#include <limits>
#include <optional>
#include <vector>

namespace esuot::gda {

struct GdaConfig {
  suot::ESuotConfig transport;
  ClassifierConfig classifier;
  int finetune_epochs = -1;  // per stage; -1 means classifier.epochs / 5
  bool w2_report = true;     // Sinkhorn W2 from each domain to the target
  bool bound_report = true;
  ot::DistanceOptions eval;

  int resolved_finetune_epochs() const {
    return finetune_epochs >= 0 ? finetune_epochs : std::max(1, classifier.epochs / 5);
  }

  void validate() const {
    transport.validate();
    classifier.validate();
    if (finetune_epochs < -1) throw ConfigError("finetune_epochs must be >= 0 (or -1 for the default)");
  }
};

struct StageRecord {
  int stage = 0;
  double w2_to_target = -1.0;  // -1 when not computed
  double accuracy = 0.0;       // held-out target accuracy of h_stage; NaN for an unlabeled target
};

struct GdaReport {
  double source_only_accuracy = 0.0;
  double source_train_accuracy = 0.0;
  std::vector<StageRecord> per_stage;  // stage 0 is the source-only classifier
  double final_accuracy = 0.0;
  std::optional<diag::BoundReport> bound;
  suot::TransportSequence sequence;
  Classifier final_classifier;
};

/// Fine-tune from `start` on labeled points (warm start, fresh optimizer state).
inline Classifier fine_tune(const ClassifierConfig& cfg, const Classifier& start, const Matrix& features,
                            const std::vector<int>& labels, int epochs, std::uint64_t seed) {
  return fit_classifier(cfg, start, features, labels, epochs, seed).classifier;
}

/// Pseudo-label `unlabeled` by argmax of the current classifier and fine-tune
/// on those labels; repeated `rounds` times.
inline Classifier self_train(const ClassifierConfig& cfg, const Classifier& classifier, const Matrix& unlabeled,
                             int rounds, int epochs_per_round) {
  if (rounds < 0) throw ConfigError("self_train: rounds must be >= 0");
  Classifier c = classifier;
  for (int r = 0; r < rounds; ++r) {
    const std::vector<int> pseudo = predict(c, unlabeled);
    c = fine_tune(cfg, c, unlabeled, pseudo, epochs_per_round, mix_seed(cfg.seed, 300u + static_cast<unsigned>(r)));
  }
  return c;
}

/// Full pipeline. `target` may carry labels; they are stripped before any
/// training and used only to score each stage.
inline GdaReport run_gda(const GdaConfig& cfg, const Dataset& source, const Dataset& target) {
  cfg.validate();
  source.validate();
  target.validate();
  require_shape(source.dim() == target.dim(), "run_gda: source and target feature dims differ");
  const std::vector<int>& source_labels = source.require_labels("run_gda (source)");
  const Dataset train_target = target.unlabeled();
  auto score = [&](const Classifier& c) {
    return target.labeled() ? accuracy(c, target) : std::numeric_limits<double>::quiet_NaN();
  };

  GdaReport rep;
  ClassifierFit h0 = train_classifier(cfg.classifier, source);
  rep.source_train_accuracy = h0.train_accuracy;
  rep.source_only_accuracy = score(h0.classifier);

  suot::SequenceResult seq = suot::build_sequence(cfg.transport, source, train_target);
  std::vector<double> w2(seq.domains.size(), -1.0);
  if (cfg.w2_report)
    for (std::size_t t = 0; t < seq.domains.size(); ++t)
      w2[t] = ot::sinkhorn_w2(seq.domains[t].features, train_target.features, cfg.eval);

  rep.per_stage.push_back({0, w2[0], rep.source_only_accuracy});
  Classifier h = h0.classifier;
  for (std::size_t t = 1; t < seq.domains.size(); ++t) {
    h = fine_tune(cfg.classifier, h, seq.domains[t].features, source_labels, cfg.resolved_finetune_epochs(),
                  mix_seed(cfg.classifier.seed, 100u + t));
    rep.per_stage.push_back({static_cast<int>(t), w2[t], score(h)});
  }
  rep.final_accuracy = rep.per_stage.back().accuracy;

  if (cfg.bound_report) {
    std::vector<diag::LabeledPoints> domains;
    for (const auto& d : seq.domains) domains.push_back({d.features, source_labels});
    rep.bound = diag::estimate_bound_terms(h, domains, source.size(), cfg.transport.stages,
                                           1.0 - rep.source_train_accuracy / 100.0, cfg.eval);
  }
  rep.sequence = std::move(seq.sequence);
  rep.final_classifier = std::move(h);
  return rep;
}

}  // namespace esuot::gda
