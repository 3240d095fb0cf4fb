// Gradual adaptation on two moons rotated by 45 degrees: a classifier trained
// on the source is fine-tuned along the generated intermediate domains.

#include "esuot/data.hpp"
#include "esuot/gda.hpp"

#include <cstdio>

int main(int argc, char** argv) {
  using namespace esuot;
  const std::uint64_t seed = argc > 1 ? std::strtoull(argv[1], nullptr, 10) : 1;
  data::SyntheticSpec spec;
  spec.angle_deg = 45.0;
  spec.seed = seed;
  const auto [source, target] = data::generate(spec);

  gda::GdaConfig cfg;
  cfg.transport.epsilon = 0.01;
  cfg.transport.batch = 256;
  cfg.transport.seed = seed;
  cfg.classifier.seed = seed;
  const gda::GdaReport r = gda::run_gda(cfg, source, target);

  for (const auto& s : r.per_stage)
    std::printf("stage %d  target accuracy %5.1f%%  W2^2 to target %.4f\n", s.stage, s.accuracy, s.w2_to_target);
  const Classifier st = gda::self_train(cfg.classifier, train_classifier(cfg.classifier, source).classifier,
                                        target.features, 1, cfg.resolved_finetune_epochs());
  std::printf("source only %.1f%%  self-train %.1f%%  gradual %.1f%%\n", r.source_only_accuracy, accuracy(st, target),
              r.final_accuracy);
}
