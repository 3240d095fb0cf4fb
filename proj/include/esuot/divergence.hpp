#pragma once

// Convex conjugates f* of the divergence family and the target-side penalty
// E_{p_T}[f*(-w(x))] of the semi-dual objective.
//
// Convention: f*(z) = sup_{y >= 0} (z y - f(y)). For KL, f(u) = u log u, which
// gives f*(z) = exp(z - 1). Do not mix with the exp(z) - 1 convention.

#include "esuot/common.hpp"

#include <string>
#include <string_view>

namespace esuot {

enum class ConjugateKind { KL, ChiSq, Identity, Softplus };

inline std::string to_string(ConjugateKind k) {
  switch (k) {
    case ConjugateKind::KL: return "kl";
    case ConjugateKind::ChiSq: return "chi2";
    case ConjugateKind::Identity: return "identity";
    case ConjugateKind::Softplus: return "softplus";
  }
  return "?";
}

inline ConjugateKind parse_conjugate(std::string_view s) {
  if (s == "kl") return ConjugateKind::KL;
  if (s == "chi2") return ConjugateKind::ChiSq;
  if (s == "identity") return ConjugateKind::Identity;
  if (s == "softplus") return ConjugateKind::Softplus;
  throw ConfigError("unknown conjugate '" + std::string(s) + "' (expected kl|chi2|identity|softplus)");
}

struct ConjugateValue {
  double value;
  double derivative;
};

/// f*(z) and df*/dz. The Identity variant is handled by marginal_penalty only.
inline ConjugateValue fstar_eval(ConjugateKind kind, double z) {
  if (!std::isfinite(z)) throw NumericError("fstar_eval: non-finite argument");
  switch (kind) {
    case ConjugateKind::KL: {
      const double e = std::exp(z - 1.0);
      return {e, e};
    }
    case ConjugateKind::ChiSq:
      // f(u) = (u - 1)^2; derivative at the kink z = -2 taken from the left (0).
      if (z > -2.0) return {0.25 * z * z + z, 0.5 * z + 1.0};
      return {-1.0, 0.0};
    case ConjugateKind::Softplus: {
      const double value = std::log1p(std::exp(-std::abs(z))) + std::max(z, 0.0);
      const double deriv = z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
      return {value, deriv};
    }
    case ConjugateKind::Identity:
      throw ContractError("fstar_eval: identity conjugate must be routed through marginal_penalty");
  }
  throw ContractError("fstar_eval: unknown conjugate");
}

/// (1/B) sum_j f*(-w_j). For Identity the divergence term is dropped and the
/// penalty is the linear balanced-OT term (1/B) sum_j (-w_j).
inline double marginal_penalty(ConjugateKind kind, const Eigen::Ref<const Vector>& w_on_target) {
  if (w_on_target.size() == 0) throw ContractError("marginal_penalty: empty batch");
  if (kind == ConjugateKind::Identity) return -w_on_target.mean();
  double s = 0.0;
  for (Eigen::Index j = 0; j < w_on_target.size(); ++j) s += fstar_eval(kind, -w_on_target(j)).value;
  return s / static_cast<double>(w_on_target.size());
}

/// d marginal_penalty / d w_j.
inline Vector marginal_penalty_grad(ConjugateKind kind, const Eigen::Ref<const Vector>& w_on_target) {
  const Eigen::Index b = w_on_target.size();
  if (b == 0) throw ContractError("marginal_penalty: empty batch");
  Vector g(b);
  for (Eigen::Index j = 0; j < b; ++j)
    g(j) = kind == ConjugateKind::Identity ? -1.0 : -fstar_eval(kind, -w_on_target(j)).derivative;
  return g / static_cast<double>(b);
}

}  // namespace esuot
