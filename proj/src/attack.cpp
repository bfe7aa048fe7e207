#include "mia/attack.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mia/error.hpp"
#include "mia/util.hpp"

namespace mia {

using json = nlohmann::json;

std::string_view to_string(ClassifierKind kind) {
  switch (kind) {
    case ClassifierKind::logistic_regression: return "logistic_regression";
    case ClassifierKind::linear_svm: return "linear_svm";
    case ClassifierKind::decision_tree: return "decision_tree";
    case ClassifierKind::gaussian_naive_bayes: return "gaussian_naive_bayes";
    case ClassifierKind::knn: return "knn";
  }
  return "?";
}

ClassifierKind parse_classifier(std::string_view text) {
  for (auto kind : all_classifiers()) {
    if (text == to_string(kind)) return kind;
  }
  if (text == "logistic") return ClassifierKind::logistic_regression;
  if (text == "svm") return ClassifierKind::linear_svm;
  if (text == "tree") return ClassifierKind::decision_tree;
  if (text == "naive_bayes" || text == "nb") return ClassifierKind::gaussian_naive_bayes;
  throw Error(ErrorCode::ConfigError, "unknown classifier '" + std::string(text) + "'");
}

const std::vector<ClassifierKind>& all_classifiers() {
  static const std::vector<ClassifierKind> kinds = {
      ClassifierKind::logistic_regression, ClassifierKind::linear_svm, ClassifierKind::decision_tree,
      ClassifierKind::gaussian_naive_bayes, ClassifierKind::knn};
  return kinds;
}

ClassifierSpec ClassifierSpec::make(ClassifierKind kind, const std::map<std::string, double>& overrides) {
  ClassifierSpec spec;
  spec.kind = kind;
  switch (kind) {
    case ClassifierKind::logistic_regression:
      spec.hyperparams = {{"learning_rate", 0.1}, {"epochs", 500}, {"l2", 1e-4}};
      break;
    case ClassifierKind::linear_svm:
      spec.hyperparams = {{"lambda", 1e-3}, {"epochs", 1000}};
      break;
    case ClassifierKind::decision_tree:
      spec.hyperparams = {{"max_depth", 8}, {"min_leaf", 5}};
      break;
    case ClassifierKind::gaussian_naive_bayes:
      spec.hyperparams = {{"var_floor", 1e-9}};
      break;
    case ClassifierKind::knn:
      spec.hyperparams = {{"k", 5}};
      break;
  }
  for (const auto& [key, value] : overrides) {
    auto it = spec.hyperparams.find(key);
    if (it == spec.hyperparams.end()) {
      throw Error(ErrorCode::ConfigError,
                  "hyperparameter '" + key + "' does not apply to " + std::string(to_string(kind)));
    }
    it->second = value;
  }
  return spec;
}

MinMaxScaler MinMaxScaler::fit(const std::vector<std::vector<double>>& rows) {
  MinMaxScaler s;
  if (rows.empty()) return s;
  s.min = rows.front();
  s.max = rows.front();
  for (const auto& r : rows) {
    for (std::size_t j = 0; j < r.size(); ++j) {
      s.min[j] = std::min(s.min[j], r[j]);
      s.max[j] = std::max(s.max[j], r[j]);
    }
  }
  return s;
}

std::vector<double> MinMaxScaler::apply(const std::vector<double>& row) const {
  std::vector<double> out(row.size());
  for (std::size_t j = 0; j < row.size(); ++j) {
    const double range = max[j] - min[j];
    out[j] = range > 0.0 ? (row[j] - min[j]) / range : row[j] - min[j];
  }
  return out;
}

namespace {

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double dot(const std::vector<double>& w, const std::vector<double>& x) {
  double s = 0.0;
  for (std::size_t j = 0; j < x.size(); ++j) s += w[j] * x[j];
  return s;
}

// ---------------------------------------------------------------------------

class LinearModel final : public detail::Model {
 public:
  LinearModel(std::vector<double> weights, double bias) : weights_(std::move(weights)), bias_(bias) {}

  double score(const std::vector<double>& x) const override { return sigmoid(dot(weights_, x) + bias_); }
  json params() const override { return {{"weights", weights_}, {"bias", bias_}}; }

  static std::shared_ptr<LinearModel> from(const json& p) {
    return std::make_shared<LinearModel>(p.at("weights").get<std::vector<double>>(), p.at("bias").get<double>());
  }

 private:
  std::vector<double> weights_;
  double bias_;
};

std::shared_ptr<detail::Model> fit_logistic(const ClassifierSpec& spec, const std::vector<std::vector<double>>& x,
                                            const std::vector<bool>& y) {
  const std::size_t dim = x.front().size();
  const double lr = spec.get("learning_rate");
  const auto epochs = static_cast<long>(spec.get("epochs"));
  const double l2 = spec.get("l2");
  std::vector<double> params(dim + 1, 0.0);
  for (long e = 0; e < epochs; ++e) {
    const auto lg = logistic::loss_and_gradient(params, x, y, l2);
    for (std::size_t j = 0; j <= dim; ++j) params[j] -= lr * lg.gradient[j];
  }
  const double bias = params.back();
  params.pop_back();
  return std::make_shared<LinearModel>(std::move(params), bias);
}

// Full-batch Pegasos: step 1/(lambda t), projection onto the ball of radius
// 1/sqrt(lambda). The bias rides along as a constant-1 feature.
std::shared_ptr<detail::Model> fit_svm(const ClassifierSpec& spec, const std::vector<std::vector<double>>& x,
                                       const std::vector<bool>& y) {
  const std::size_t dim = x.front().size();
  const double lambda = spec.get("lambda");
  const auto epochs = static_cast<long>(spec.get("epochs"));
  const auto n = static_cast<double>(x.size());
  std::vector<double> w(dim + 1, 0.0);
  std::vector<double> grad(dim + 1);
  for (long t = 1; t <= epochs; ++t) {
    const double eta = 1.0 / (lambda * static_cast<double>(t));
    for (std::size_t j = 0; j <= dim; ++j) grad[j] = lambda * w[j];
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double yi = y[i] ? 1.0 : -1.0;
      const double margin = yi * (dot(w, x[i]) + w[dim]);
      if (margin < 1.0) {
        for (std::size_t j = 0; j < dim; ++j) grad[j] -= yi * x[i][j] / n;
        grad[dim] -= yi / n;
      }
    }
    for (std::size_t j = 0; j <= dim; ++j) w[j] -= eta * grad[j];
    double norm = 0.0;
    for (double v : w) norm += v * v;
    norm = std::sqrt(norm);
    const double radius = 1.0 / std::sqrt(lambda);
    if (norm > radius) {
      for (double& v : w) v *= radius / norm;
    }
  }
  const double bias = w.back();
  w.pop_back();
  return std::make_shared<LinearModel>(std::move(w), bias);
}

// ---------------------------------------------------------------------------

class TreeModel final : public detail::Model {
 public:
  struct Node {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0;  // member fraction of the training rows reaching here
  };

  explicit TreeModel(std::vector<Node> nodes) : nodes_(std::move(nodes)) {}

  double score(const std::vector<double>& x) const override {
    int i = 0;
    while (nodes_[static_cast<std::size_t>(i)].feature >= 0) {
      const Node& n = nodes_[static_cast<std::size_t>(i)];
      i = x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right;
    }
    return nodes_[static_cast<std::size_t>(i)].value;
  }

  json params() const override {
    std::vector<int> feature, left, right;
    std::vector<double> threshold, value;
    for (const auto& n : nodes_) {
      feature.push_back(n.feature);
      left.push_back(n.left);
      right.push_back(n.right);
      threshold.push_back(n.threshold);
      value.push_back(n.value);
    }
    return {{"feature", feature}, {"threshold", threshold}, {"left", left}, {"right", right}, {"value", value}};
  }

  static std::shared_ptr<TreeModel> from(const json& p) {
    const auto feature = p.at("feature").get<std::vector<int>>();
    const auto threshold = p.at("threshold").get<std::vector<double>>();
    const auto left = p.at("left").get<std::vector<int>>();
    const auto right = p.at("right").get<std::vector<int>>();
    const auto value = p.at("value").get<std::vector<double>>();
    const std::size_t n = feature.size();
    if (n == 0 || threshold.size() != n || left.size() != n || right.size() != n || value.size() != n) {
      throw Error(ErrorCode::SchemaError, "decision tree arrays disagree in length");
    }
    std::vector<Node> nodes(n);
    for (std::size_t i = 0; i < n; ++i) {
      nodes[i] = Node{feature[i], threshold[i], left[i], right[i], value[i]};
      if (feature[i] >= 0 && (left[i] <= static_cast<int>(i) || right[i] <= static_cast<int>(i) ||
                              left[i] >= static_cast<int>(n) || right[i] >= static_cast<int>(n))) {
        throw Error(ErrorCode::SchemaError, "decision tree child index out of range");
      }
    }
    return std::make_shared<TreeModel>(std::move(nodes));
  }

 private:
  std::vector<Node> nodes_;
};

class TreeBuilder {
 public:
  TreeBuilder(const std::vector<std::vector<double>>& x, const std::vector<bool>& y, int max_depth, std::size_t min_leaf)
      : x_(x), y_(y), max_depth_(max_depth), min_leaf_(std::max<std::size_t>(1, min_leaf)) {}

  std::vector<TreeModel::Node> build() {
    std::vector<std::size_t> idx(x_.size());
    std::iota(idx.begin(), idx.end(), 0);
    grow(idx, 0);
    return std::move(nodes_);
  }

 private:
  static double gini(double pos, double total) {
    if (total <= 0.0) return 0.0;
    const double p = pos / total;
    return 2.0 * p * (1.0 - p);
  }

  int grow(const std::vector<std::size_t>& idx, int depth) {
    const int id = static_cast<int>(nodes_.size());
    nodes_.emplace_back();
    double pos = 0.0;
    for (std::size_t i : idx) pos += y_[i] ? 1.0 : 0.0;
    const auto total = static_cast<double>(idx.size());
    nodes_[static_cast<std::size_t>(id)].value = pos / total;

    const double parent = gini(pos, total);
    if (depth >= max_depth_ || idx.size() < 2 * min_leaf_ || parent == 0.0) return id;

    // Scan features in order and thresholds ascending; only a strictly better
    // impurity replaces the incumbent, so ties keep the lower feature/threshold.
    double best_impurity = parent;
    int best_feature = -1;
    double best_threshold = 0.0;
    const std::size_t dim = x_.front().size();
    std::vector<std::size_t> order(idx);
    for (std::size_t f = 0; f < dim; ++f) {
      std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return x_[a][f] < x_[b][f] || (x_[a][f] == x_[b][f] && a < b);
      });
      double left_pos = 0.0;
      for (std::size_t k = 0; k + 1 < order.size(); ++k) {
        left_pos += y_[order[k]] ? 1.0 : 0.0;
        const double lo = x_[order[k]][f];
        const double hi = x_[order[k + 1]][f];
        if (lo == hi) continue;
        const std::size_t n_left = k + 1;
        const std::size_t n_right = order.size() - n_left;
        if (n_left < min_leaf_ || n_right < min_leaf_) continue;
        const auto nl = static_cast<double>(n_left);
        const auto nr = static_cast<double>(n_right);
        const double impurity = (nl * gini(left_pos, nl) + nr * gini(pos - left_pos, nr)) / total;
        if (impurity < best_impurity - 1e-12) {
          best_impurity = impurity;
          best_feature = static_cast<int>(f);
          best_threshold = lo + (hi - lo) / 2.0;
        }
      }
    }
    if (best_feature < 0) return id;

    std::vector<std::size_t> left, right;
    for (std::size_t i : idx) {
      (x_[i][static_cast<std::size_t>(best_feature)] <= best_threshold ? left : right).push_back(i);
    }
    nodes_[static_cast<std::size_t>(id)].feature = best_feature;
    nodes_[static_cast<std::size_t>(id)].threshold = best_threshold;
    const int l = grow(left, depth + 1);
    const int r = grow(right, depth + 1);
    nodes_[static_cast<std::size_t>(id)].left = l;
    nodes_[static_cast<std::size_t>(id)].right = r;
    return id;
  }

  const std::vector<std::vector<double>>& x_;
  const std::vector<bool>& y_;
  int max_depth_;
  std::size_t min_leaf_;
  std::vector<TreeModel::Node> nodes_;
};

// ---------------------------------------------------------------------------

class NaiveBayesModel final : public detail::Model {
 public:
  struct ClassStats {
    double log_prior = 0.0;
    std::vector<double> mean;
    std::vector<double> var;
  };

  NaiveBayesModel(ClassStats member, ClassStats nonmember)
      : member_(std::move(member)), nonmember_(std::move(nonmember)) {}

  double score(const std::vector<double>& x) const override {
    return sigmoid(log_likelihood(member_, x) - log_likelihood(nonmember_, x));
  }

  json params() const override {
    auto dump = [](const ClassStats& c) { return json{{"log_prior", c.log_prior}, {"mean", c.mean}, {"var", c.var}}; };
    return {{"member", dump(member_)}, {"nonmember", dump(nonmember_)}};
  }

  static std::shared_ptr<NaiveBayesModel> from(const json& p) {
    auto load = [](const json& j) {
      return ClassStats{j.at("log_prior").get<double>(), j.at("mean").get<std::vector<double>>(),
                        j.at("var").get<std::vector<double>>()};
    };
    return std::make_shared<NaiveBayesModel>(load(p.at("member")), load(p.at("nonmember")));
  }

 private:
  static double log_likelihood(const ClassStats& c, const std::vector<double>& x) {
    double ll = c.log_prior;
    for (std::size_t j = 0; j < x.size(); ++j) {
      const double d = x[j] - c.mean[j];
      ll -= 0.5 * (std::log(2.0 * M_PI * c.var[j]) + d * d / c.var[j]);
    }
    return ll;
  }

  ClassStats member_;
  ClassStats nonmember_;
};

std::shared_ptr<detail::Model> fit_naive_bayes(const ClassifierSpec& spec, const std::vector<std::vector<double>>& x,
                                               const std::vector<bool>& y) {
  const std::size_t dim = x.front().size();
  const double floor = spec.get("var_floor");
  auto stats = [&](bool cls) {
    NaiveBayesModel::ClassStats c;
    c.mean.assign(dim, 0.0);
    c.var.assign(dim, 0.0);
    double n = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (y[i] != cls) continue;
      n += 1.0;
      for (std::size_t j = 0; j < dim; ++j) c.mean[j] += x[i][j];
    }
    for (double& m : c.mean) m /= n;
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (y[i] != cls) continue;
      for (std::size_t j = 0; j < dim; ++j) {
        const double d = x[i][j] - c.mean[j];
        c.var[j] += d * d;
      }
    }
    for (double& v : c.var) v = std::max(v / n, floor);
    c.log_prior = std::log(n / static_cast<double>(x.size()));
    return c;
  };
  return std::make_shared<NaiveBayesModel>(stats(true), stats(false));
}

// ---------------------------------------------------------------------------

class KnnModel final : public detail::Model {
 public:
  KnnModel(std::size_t k, std::vector<std::vector<double>> points, std::vector<bool> labels)
      : k_(std::min(k, points.size())), points_(std::move(points)), labels_(std::move(labels)) {}

  double score(const std::vector<double>& x) const override {
    std::vector<std::pair<double, std::size_t>> dist(points_.size());
    for (std::size_t i = 0; i < points_.size(); ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < x.size(); ++j) {
        const double d = x[j] - points_[i][j];
        s += d * d;
      }
      dist[i] = {s, i};
    }
    // Pair ordering breaks distance ties by the lower training index.
    std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k_), dist.end());
    double members = 0.0;
    for (std::size_t i = 0; i < k_; ++i) members += labels_[dist[i].second] ? 1.0 : 0.0;
    return members / static_cast<double>(k_);
  }

  json params() const override {
    std::vector<int> labels(labels_.begin(), labels_.end());
    return {{"k", k_}, {"points", points_}, {"labels", labels}};
  }

  static std::shared_ptr<KnnModel> from(const json& p) {
    const auto ints = p.at("labels").get<std::vector<int>>();
    auto points = p.at("points").get<std::vector<std::vector<double>>>();
    if (points.empty() || ints.size() != points.size()) throw Error(ErrorCode::SchemaError, "knn arrays disagree");
    return std::make_shared<KnnModel>(p.at("k").get<std::size_t>(), std::move(points),
                                      std::vector<bool>(ints.begin(), ints.end()));
  }

 private:
  std::size_t k_;
  std::vector<std::vector<double>> points_;
  std::vector<bool> labels_;
};

std::shared_ptr<const detail::Model> model_from_json(ClassifierKind kind, const json& p) {
  switch (kind) {
    case ClassifierKind::logistic_regression:
    case ClassifierKind::linear_svm: return LinearModel::from(p);
    case ClassifierKind::decision_tree: return TreeModel::from(p);
    case ClassifierKind::gaussian_naive_bayes: return NaiveBayesModel::from(p);
    case ClassifierKind::knn: return KnnModel::from(p);
  }
  throw Error(ErrorCode::SchemaError, "unknown classifier kind");
}

}  // namespace

namespace logistic {

LossAndGradient loss_and_gradient(const std::vector<double>& params, const std::vector<std::vector<double>>& x,
                                  const std::vector<bool>& y, double l2) {
  const std::size_t dim = params.size() - 1;
  const auto n = static_cast<double>(x.size());
  LossAndGradient out;
  out.gradient.assign(dim + 1, 0.0);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double z = dot(params, x[i]) + params[dim];
    const double target = y[i] ? 1.0 : 0.0;
    // log(1 + e^z) - t z, evaluated without overflow.
    out.loss += (z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z))) - target * z;
    const double residual = sigmoid(z) - target;
    for (std::size_t j = 0; j < dim; ++j) out.gradient[j] += residual * x[i][j];
    out.gradient[dim] += residual;
  }
  out.loss /= n;
  for (double& g : out.gradient) g /= n;
  for (std::size_t j = 0; j < dim; ++j) {
    out.loss += 0.5 * l2 * params[j] * params[j];
    out.gradient[j] += l2 * params[j];
  }
  return out;
}

}  // namespace logistic

double TrainedAttack::score(const std::vector<double>& features) const {
  if (features.size() != feature_dim_) {
    throw Error(ErrorCode::DimensionMismatch, "model expects " + std::to_string(feature_dim_) +
                                                  " features, got " + std::to_string(features.size()));
  }
  const double s = model_->score(scaler_.apply(features));
  if (std::isnan(s)) return 0.5;
  return std::clamp(s, 0.0, 1.0);
}

json TrainedAttack::to_json() const {
  return {{"kind", std::string(to_string(spec_.kind))},
          {"hyperparams", spec_.hyperparams},
          {"feature_dim", feature_dim_},
          {"scaler", {{"min", scaler_.min}, {"max", scaler_.max}}},
          {"params", model_->params()}};
}

TrainedAttack TrainedAttack::from_json(const json& doc) {
  try {
    TrainedAttack t;
    const auto kind = parse_classifier(doc.at("kind").get<std::string>());
    t.spec_ = ClassifierSpec::make(kind, doc.at("hyperparams").get<std::map<std::string, double>>());
    t.feature_dim_ = doc.at("feature_dim").get<std::size_t>();
    t.scaler_.min = doc.at("scaler").at("min").get<std::vector<double>>();
    t.scaler_.max = doc.at("scaler").at("max").get<std::vector<double>>();
    if (t.scaler_.min.size() != t.feature_dim_ || t.scaler_.max.size() != t.feature_dim_) {
      throw Error(ErrorCode::SchemaError, "scaler bounds do not match feature_dim");
    }
    t.model_ = model_from_json(kind, doc.at("params"));
    return t;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::SchemaError, std::string("model file: ") + e.what());
  }
}

void TrainedAttack::save(const std::filesystem::path& path) const { write_file(path, to_json().dump(1) + "\n"); }

TrainedAttack TrainedAttack::load(const std::filesystem::path& path) {
  json doc;
  try {
    doc = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::SchemaError, path.string() + ": " + e.what());
  }
  return from_json(doc);
}

TrainedAttack fit(const ClassifierSpec& spec_in, const std::vector<std::vector<double>>& features,
                  const std::vector<bool>& labels) {
  if (features.size() != labels.size()) {
    throw Error(ErrorCode::DimensionMismatch, std::to_string(features.size()) + " feature rows vs " +
                                                  std::to_string(labels.size()) + " labels");
  }
  const auto positives = std::count(labels.begin(), labels.end(), true);
  if (features.size() < 2 || positives == 0 || positives == static_cast<long>(labels.size())) {
    throw Error(ErrorCode::DegenerateLabels, "training data needs both members and nonmembers");
  }
  const std::size_t dim = features.front().size();
  if (dim == 0) throw Error(ErrorCode::DimensionMismatch, "empty feature vectors");
  for (const auto& row : features) {
    if (row.size() != dim) throw Error(ErrorCode::DimensionMismatch, "feature rows differ in length");
  }

  TrainedAttack t;
  t.spec_ = ClassifierSpec::make(spec_in.kind, spec_in.hyperparams);
  t.feature_dim_ = dim;
  t.scaler_ = MinMaxScaler::fit(features);
  std::vector<std::vector<double>> scaled;
  scaled.reserve(features.size());
  for (const auto& row : features) scaled.push_back(t.scaler_.apply(row));

  switch (t.spec_.kind) {
    case ClassifierKind::logistic_regression: t.model_ = fit_logistic(t.spec_, scaled, labels); break;
    case ClassifierKind::linear_svm: t.model_ = fit_svm(t.spec_, scaled, labels); break;
    case ClassifierKind::decision_tree:
      t.model_ = std::make_shared<TreeModel>(TreeBuilder(scaled, labels, static_cast<int>(t.spec_.get("max_depth")),
                                                         static_cast<std::size_t>(t.spec_.get("min_leaf")))
                                                 .build());
      break;
    case ClassifierKind::gaussian_naive_bayes: t.model_ = fit_naive_bayes(t.spec_, scaled, labels); break;
    case ClassifierKind::knn:
      t.model_ = std::make_shared<KnnModel>(static_cast<std::size_t>(std::max(1.0, t.spec_.get("k"))),
                                            std::move(scaled), labels);
      break;
  }
  return t;
}

TrainedAttack fit(const ClassifierSpec& spec, const std::vector<FeatureVec>& features, const std::vector<bool>& labels) {
  std::vector<std::vector<double>> rows;
  rows.reserve(features.size());
  for (const auto& f : features) rows.push_back(f.values);
  return fit(spec, rows, labels);
}

double score(const TrainedAttack& model, const FeatureVec& feature) { return model.score(feature); }

}  // namespace mia
