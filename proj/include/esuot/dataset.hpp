#pragma once

#include "esuot/common.hpp"

#include <algorithm>
#include <optional>
#include <vector>

namespace esuot {

/// Feature matrix with optional integer labels in [0, class_count).
struct Dataset {
  Matrix features;                         // [N x d]
  std::optional<std::vector<int>> labels;  // absent for unlabeled data
  int domain_index = 0;
  int class_count = 2;

  Eigen::Index size() const { return features.rows(); }
  Eigen::Index dim() const { return features.cols(); }
  bool labeled() const { return labels.has_value(); }

  const std::vector<int>& require_labels(const char* who) const {
    if (!labels) throw ContractError(std::string(who) + ": dataset has no labels");
    return *labels;
  }

  void validate() const {
    if (features.rows() < 1) throw DataError("dataset is empty");
    if (!features.allFinite()) throw DataError("dataset contains non-finite features");
    if (class_count < 1) throw DataError("dataset class_count must be >= 1");
    if (labels) {
      if (static_cast<Eigen::Index>(labels->size()) != features.rows())
        throw DataError("dataset label count does not match feature rows");
      for (int y : *labels)
        if (y < 0 || y >= class_count) throw DataError("label " + std::to_string(y) + " out of range");
    }
  }

  /// Same labels and metadata, new features (labels ride along unchanged).
  Dataset with_features(Matrix f, int new_domain) const {
    Dataset out = *this;
    out.features = std::move(f);
    out.domain_index = new_domain;
    return out;
  }

  Dataset unlabeled() const {
    Dataset out = *this;
    out.labels.reset();
    return out;
  }
};

inline int infer_class_count(const std::vector<int>& labels, int at_least = 2) {
  int k = at_least;
  for (int y : labels) k = std::max(k, y + 1);
  return k;
}

}  // namespace esuot
