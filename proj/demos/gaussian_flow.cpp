// Transport a Gaussian cloud toward a shifted copy in five stages and print
// the Sinkhorn W2 to the target after every stage.

#include "esuot/data.hpp"
#include "esuot/diagnostics.hpp"
#include "esuot/suot.hpp"

#include <cstdio>

int main() {
  using namespace esuot;
  data::SyntheticSpec spec;
  spec.family = data::Family::GaussianShift;
  spec.shift = {4.0, 0.0};
  spec.noise = 1.0;
  spec.seed = 1;
  const auto [source, target] = data::generate(spec);

  suot::ESuotConfig cfg;
  cfg.batch = 256;
  cfg.seed = 1;
  const suot::SequenceResult seq = suot::build_sequence(cfg, source, target.unlabeled());

  std::vector<Matrix> clouds;
  for (const auto& d : seq.domains) clouds.push_back(d.features);
  const Vector w2 = diag::w2_trajectory(clouds, target.features);
  for (Eigen::Index t = 0; t < w2.size(); ++t) {
    const RowVector mean = clouds[static_cast<std::size_t>(t)].colwise().mean();
    std::printf("stage %ld  mean (%6.3f, %6.3f)  W2^2 to target %.4f\n", static_cast<long>(t), mean(0), mean(1), w2(t));
  }
  std::printf("non-increasing within 5%%: %s\n", diag::non_increasing(w2, 0.05) ? "yes" : "no");
}
