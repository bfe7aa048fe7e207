#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "mia/encoder.hpp"

namespace mia {

enum class ClassifierKind { logistic_regression, linear_svm, decision_tree, gaussian_naive_bayes, knn };

std::string_view to_string(ClassifierKind kind);
ClassifierKind parse_classifier(std::string_view text);
const std::vector<ClassifierKind>& all_classifiers();

/// Classifier family plus a complete hyperparameter map.
///   logistic_regression: learning_rate 0.1, epochs 500, l2 1e-4
///   linear_svm:          lambda 1e-3, epochs 1000
///   decision_tree:       max_depth 8, min_leaf 5
///   gaussian_naive_bayes: var_floor 1e-9
///   knn:                 k 5
struct ClassifierSpec {
  ClassifierKind kind = ClassifierKind::logistic_regression;
  std::map<std::string, double> hyperparams;

  // Fills defaults, then applies overrides; unknown keys throw ConfigError.
  static ClassifierSpec make(ClassifierKind kind, const std::map<std::string, double>& overrides = {});
  double get(const std::string& key) const { return hyperparams.at(key); }
};

// Per-dimension min-max bounds fit on the training features. A constant
// dimension is only shifted.
struct MinMaxScaler {
  std::vector<double> min;
  std::vector<double> max;

  static MinMaxScaler fit(const std::vector<std::vector<double>>& rows);
  std::vector<double> apply(const std::vector<double>& row) const;
};

namespace detail {
class Model {
 public:
  virtual ~Model() = default;
  virtual double score(const std::vector<double>& scaled) const = 0;
  virtual nlohmann::json params() const = 0;
};
}  // namespace detail

/// Immutable after fit; copies share the underlying model and are safe to
/// score from several threads.
class TrainedAttack {
 public:
  const ClassifierSpec& spec() const noexcept { return spec_; }
  ClassifierKind kind() const noexcept { return spec_.kind; }
  std::size_t feature_dim() const noexcept { return feature_dim_; }
  const MinMaxScaler& scaler() const noexcept { return scaler_; }

  // Membership score in [0, 1]. Throws DimensionMismatch.
  double score(const std::vector<double>& features) const;
  double score(const FeatureVec& feature) const { return score(feature.values); }

  nlohmann::json to_json() const;
  static TrainedAttack from_json(const nlohmann::json& doc);
  void save(const std::filesystem::path& path) const;
  static TrainedAttack load(const std::filesystem::path& path);

 private:
  friend TrainedAttack fit(const ClassifierSpec&, const std::vector<std::vector<double>>&, const std::vector<bool>&);

  ClassifierSpec spec_;
  std::size_t feature_dim_ = 0;
  MinMaxScaler scaler_;
  std::shared_ptr<const detail::Model> model_;
};

// Throws DegenerateLabels when a class is missing (or fewer than 2 rows) and
// DimensionMismatch when rows differ in length or labels do not line up.
TrainedAttack fit(const ClassifierSpec& spec, const std::vector<std::vector<double>>& features,
                  const std::vector<bool>& labels);
TrainedAttack fit(const ClassifierSpec& spec, const std::vector<FeatureVec>& features, const std::vector<bool>& labels);

double score(const TrainedAttack& model, const FeatureVec& feature);

namespace logistic {

struct LossAndGradient {
  double loss = 0.0;
  std::vector<double> gradient;  // d/dw_1..d/dw_F, then d/db
};

// Mean log-loss plus (l2 / 2) |w|^2 (bias unpenalized) for parameters
// [w_1..w_F, b] on rows `x` with 0/1 targets.
LossAndGradient loss_and_gradient(const std::vector<double>& params, const std::vector<std::vector<double>>& x,
                                  const std::vector<bool>& y, double l2);

}  // namespace logistic

}  // namespace mia
