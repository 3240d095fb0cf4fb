#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace esuot {

// Samples are stored one per row: [N x d].
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;
using Rng = std::mt19937_64;

// Error hierarchy. The CLI maps ConfigError -> 2, DataError/ParseError -> 3,
// NumericError -> 4.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ConfigError : Error {
  using Error::Error;
};
struct ShapeError : Error {
  using Error::Error;
};
struct ContractError : Error {
  using Error::Error;
};
struct DataError : Error {
  using Error::Error;
};
struct ParseError : DataError {
  using DataError::DataError;
};
struct NumericError : Error {
  using Error::Error;
};

inline void require_shape(bool ok, const std::string& what) {
  if (!ok) throw ShapeError(what);
}

inline void require_finite(const Eigen::Ref<const Matrix>& m, const std::string& where) {
  if (!m.allFinite()) throw NumericError("non-finite value in " + where);
}

// splitmix64 finaliser; used to derive independent child seeds from a run seed.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (salt + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

inline Matrix standard_normal(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
  std::normal_distribution<double> nd(0.0, 1.0);
  Matrix out(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) out(i, j) = nd(rng);
  return out;
}

// Uniform draw with replacement of `count` row indices from [0, n).
inline std::vector<Eigen::Index> sample_indices(Rng& rng, Eigen::Index n, Eigen::Index count) {
  if (count <= 0) return {};
  if (n <= 0) throw ContractError("sample_indices: cannot draw from an empty set");
  std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(count));
  for (auto& i : idx) i = pick(rng);
  return idx;
}

inline Matrix gather_rows(const Matrix& m, const std::vector<Eigen::Index>& idx) {
  Matrix out(static_cast<Eigen::Index>(idx.size()), m.cols());
  for (std::size_t k = 0; k < idx.size(); ++k) out.row(static_cast<Eigen::Index>(k)) = m.row(idx[k]);
  return out;
}

// log(mean(exp(v))) with max-shift.
inline double log_mean_exp(const Eigen::Ref<const Vector>& v) {
  const double m = v.maxCoeff();
  if (!std::isfinite(m)) return m;
  return m + std::log((v.array() - m).exp().mean());
}

inline double log_sum_exp(const Eigen::Ref<const Vector>& v) {
  const double m = v.maxCoeff();
  if (!std::isfinite(m)) return m;
  return m + std::log((v.array() - m).exp().sum());
}

// Exponentially smoothed copy of a loss trace (s_0 = x_0).
inline std::vector<double> smooth_trace(const std::vector<double>& trace, double alpha = 0.1) {
  std::vector<double> out;
  out.reserve(trace.size());
  double s = 0.0;
  for (std::size_t i = 0; i < trace.size(); ++i) {
    s = i == 0 ? trace[0] : alpha * trace[i] + (1.0 - alpha) * s;
    out.push_back(s);
  }
  return out;
}

}  // namespace esuot
