#ifndef CRASHML_TYPES_HPP
#define CRASHML_TYPES_HPP

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

namespace crashml {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

enum class FeatureKind { Numeric, Categorical };

struct FeatureMeta {
  std::string name;
  FeatureKind kind = FeatureKind::Numeric;
  std::vector<std::string> levels;  // categorical only; matrix cells hold level indices

  int level_count() const { return static_cast<int>(levels.size()); }
};

enum class ResponseMode { Rate, Counts };

// Model-ready table: one row per road section, response is either the
// exposure-normalized crash rate or the mean yearly crash count.
struct Dataset {
  Matrix features;                // n x p
  Vector response;                // n
  std::vector<FeatureMeta> meta;  // p entries
  ResponseMode mode = ResponseMode::Rate;

  Eigen::Index n_rows() const { return features.rows(); }
  Eigen::Index n_features() const { return features.cols(); }

  // Index of the named feature, -1 when absent.
  int feature_index(const std::string& name) const {
    for (std::size_t j = 0; j < meta.size(); ++j) {
      if (meta[j].name == name) return static_cast<int>(j);
    }
    return -1;
  }
};

// Borrowed view of a feature matrix and response used by the tree learner,
// so ensembles can refit on residuals without copying the matrix.
struct DataView {
  const Matrix& features;
  const Vector& response;
  const std::vector<FeatureMeta>& meta;

  DataView(const Matrix& x, const Vector& y, const std::vector<FeatureMeta>& m)
      : features(x), response(y), meta(m) {}
  DataView(const Dataset& d)  // NOLINT(google-explicit-constructor)
      : features(d.features), response(d.response), meta(d.meta) {}

  Eigen::Index n_rows() const { return features.rows(); }
  Eigen::Index n_features() const { return features.cols(); }
};

}  // namespace crashml

#endif  // CRASHML_TYPES_HPP
