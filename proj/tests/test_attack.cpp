#include <algorithm>
#include <cmath>
#include <numeric>

#include "doctest.h"
#include "helpers.hpp"
#include "mia/attack.hpp"
#include "mia/error.hpp"
#include "mia/eval.hpp"

using namespace mia;
using testutil::separable_2d;
using testutil::TempDir;

namespace {

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error thrown");
  return ErrorCode::IoError;
}

double auc_of(const TrainedAttack& m, const testutil::Task& t) {
  std::vector<double> s;
  for (const auto& row : t.x) s.push_back(m.score(row));
  return roc_curve(s, t.y).auc;
}

std::vector<std::size_t> ranking(const std::vector<double>& scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return scores[a] < scores[b]; });
  return order;
}

}  // namespace

TEST_CASE("logistic fits a monotone 1-D task") {
  std::vector<std::vector<double>> x;
  std::vector<bool> y;
  for (int i = 0; i < 50; ++i) {
    x.push_back({0.0});
    y.push_back(false);
    x.push_back({1.0});
    y.push_back(true);
  }
  const auto m = fit(ClassifierSpec::make(ClassifierKind::logistic_regression), x, y);
  CHECK(m.score({1.0}) > m.score({0.0}));
  CHECK(m.feature_dim() == 1);
}

TEST_CASE("fit rejects bad input") {
  const std::vector<std::vector<double>> x = {{1}, {2}, {3}};
  CHECK(code_of([&] { fit(ClassifierSpec::make(ClassifierKind::knn), x, {true, true, true}); }) ==
        ErrorCode::DegenerateLabels);
  CHECK(code_of([&] { fit(ClassifierSpec::make(ClassifierKind::knn), x, {true, false}); }) ==
        ErrorCode::DimensionMismatch);
  CHECK(code_of([&] {
          fit(ClassifierSpec::make(ClassifierKind::knn), {{1}, {2, 3}}, {true, false});
        }) == ErrorCode::DimensionMismatch);
  const auto m = fit(ClassifierSpec::make(ClassifierKind::decision_tree), x, {true, false, true});
  CHECK(code_of([&] { m.score({1.0, 2.0}); }) == ErrorCode::DimensionMismatch);
  CHECK(code_of([] { ClassifierSpec::make(ClassifierKind::knn, {{"depth", 3}}); }) == ErrorCode::ConfigError);
  CHECK(code_of([] { parse_classifier("forest"); }) == ErrorCode::ConfigError);
}

TEST_CASE("classifier names and defaults") {
  CHECK(all_classifiers().size() == 5);
  CHECK(parse_classifier("logistic") == ClassifierKind::logistic_regression);
  CHECK(parse_classifier("svm") == ClassifierKind::linear_svm);
  CHECK(parse_classifier("tree") == ClassifierKind::decision_tree);
  CHECK(parse_classifier("nb") == ClassifierKind::gaussian_naive_bayes);
  CHECK(parse_classifier("knn") == ClassifierKind::knn);
  const auto lr = ClassifierSpec::make(ClassifierKind::logistic_regression);
  CHECK(lr.get("learning_rate") == 0.1);
  CHECK(lr.get("epochs") == 500);
  CHECK(lr.get("l2") == 1e-4);
  CHECK(ClassifierSpec::make(ClassifierKind::linear_svm).get("lambda") == 1e-3);
  CHECK(ClassifierSpec::make(ClassifierKind::linear_svm).get("epochs") == 1000);
  CHECK(ClassifierSpec::make(ClassifierKind::decision_tree).get("max_depth") == 8);
  CHECK(ClassifierSpec::make(ClassifierKind::decision_tree).get("min_leaf") == 5);
  CHECK(ClassifierSpec::make(ClassifierKind::gaussian_naive_bayes).get("var_floor") == 1e-9);
  CHECK(ClassifierSpec::make(ClassifierKind::knn).get("k") == 5);
  CHECK(ClassifierSpec::make(ClassifierKind::knn, {{"k", 3}}).get("k") == 3);
}

TEST_CASE("save and reload keep scores") {
  TempDir dir;
  const auto task = separable_2d(1, 120);
  Rng rng(2);
  for (auto kind : all_classifiers()) {
    const auto m = fit(ClassifierSpec::make(kind), task.x, task.y);
    const auto path = dir / (std::string(to_string(kind)) + ".json");
    m.save(path);
    const auto back = TrainedAttack::load(path);
    CHECK(back.kind() == kind);
    CHECK(back.spec().hyperparams == m.spec().hyperparams);
    for (int i = 0; i < 100; ++i) {
      const std::vector<double> v = {rng.uniform() * 4 - 2, rng.uniform() * 4 - 2};
      CHECK(back.score(v) == m.score(v));
    }
    const auto j = m.to_json();
    for (const char* key : {"kind", "hyperparams", "feature_dim", "scaler", "params"}) CHECK(j.contains(key));
  }
}

TEST_CASE("per-kind scoring rules") {
  const auto task = separable_2d(3, 60);
  const auto knn = fit(ClassifierSpec::make(ClassifierKind::knn, {{"k", 1}}), task.x, task.y);
  for (std::size_t i = 0; i < task.x.size(); ++i) CHECK(knn.score(task.x[i]) == (task.y[i] ? 1.0 : 0.0));

  // Symmetric classes around zero.
  std::vector<std::vector<double>> x;
  std::vector<bool> y;
  for (double d : {-0.5, -0.2, 0.0, 0.3, 0.4}) {
    x.push_back({1.0 + d});
    y.push_back(true);
    x.push_back({-1.0 - d});
    y.push_back(false);
  }
  const auto nb = fit(ClassifierSpec::make(ClassifierKind::gaussian_naive_bayes), x, y);
  CHECK(std::abs(nb.score({0.0}) - 0.5) < 1e-9);
  CHECK(nb.score({1.0}) > 0.99);

  const std::vector<std::vector<double>> pure = {{0}, {0.1}, {0.2}, {0.3}, {0.4}, {0.5}, {5}, {5.1}, {5.2}, {5.3}, {5.4}, {5.5}};
  std::vector<bool> labels(12, false);
  for (int i = 6; i < 12; ++i) labels[i] = true;
  const auto tree = fit(ClassifierSpec::make(ClassifierKind::decision_tree), pure, labels);
  CHECK(tree.score({5.2}) == 1.0);
  CHECK(tree.score({0.2}) == 0.0);

  const auto svm = fit(ClassifierSpec::make(ClassifierKind::linear_svm), task.x, task.y);
  CHECK(svm.score({1.0, 0.0}) > 0.5);
  CHECK(svm.score({-1.0, 0.0}) < 0.5);
}

TEST_CASE("scores stay in [0, 1]") {
  const auto task = separable_2d(4, 100);
  Rng rng(5);
  for (auto kind : all_classifiers()) {
    const auto m = fit(ClassifierSpec::make(kind), task.x, task.y);
    for (int i = 0; i < 10000; ++i) {
      const std::vector<double> v = {rng.normal() * 100, rng.normal() * 100};
      const double s = m.score(v);
      REQUIRE(s >= 0.0);
      REQUIRE(s <= 1.0);
    }
  }
}

TEST_CASE("tree and knn rankings ignore positive rescaling") {
  const auto task = separable_2d(6, 150);
  const auto eval = separable_2d(7, 80);
  for (auto kind : {ClassifierKind::decision_tree, ClassifierKind::knn}) {
    for (double c : {2.0, 3.7, 0.01}) {
      auto scaled = task.x;
      for (auto& r : scaled) for (auto& v : r) v *= c;
      const auto a = fit(ClassifierSpec::make(kind), task.x, task.y);
      const auto b = fit(ClassifierSpec::make(kind), scaled, task.y);
      std::vector<double> sa, sb;
      for (const auto& r : eval.x) {
        sa.push_back(a.score(r));
        sb.push_back(b.score({r[0] * c, r[1] * c}));
      }
      CHECK(ranking(sa) == ranking(sb));
    }
  }
}

TEST_CASE("logistic gradient matches central differences") {
  Rng rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 5 + rng.below(20), f = 1 + rng.below(5);
    std::vector<std::vector<double>> x(n, std::vector<double>(f));
    std::vector<bool> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      for (auto& v : x[i]) v = rng.normal();
      y[i] = rng.coin();
    }
    std::vector<double> params(f + 1);
    for (auto& p : params) p = rng.normal();
    const double l2 = 0.01 * rng.uniform();
    const auto analytic = logistic::loss_and_gradient(params, x, y, l2);
    for (std::size_t k = 0; k < params.size(); ++k) {
      const double h = 1e-5;
      auto up = params, down = params;
      up[k] += h;
      down[k] -= h;
      const double numeric =
          (logistic::loss_and_gradient(up, x, y, l2).loss - logistic::loss_and_gradient(down, x, y, l2).loss) / (2 * h);
      CHECK(std::abs(numeric - analytic.gradient[k]) <= 1e-5 * std::max(1.0, std::abs(numeric)));
    }
  }
}

TEST_CASE("separable and shuffled tasks") {
  for (auto kind : all_classifiers()) {
    double shuffled_total = 0;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const auto train = separable_2d(100 + seed, 500), test = separable_2d(200 + seed, 500);
      CHECK(auc_of(fit(ClassifierSpec::make(kind), train.x, train.y), test) >= 0.95);
      auto noisy = train, noisy_test = test;
      Rng rng(300 + seed);
      rng.shuffle(noisy.y);
      rng.shuffle(noisy_test.y);
      shuffled_total += auc_of(fit(ClassifierSpec::make(kind), noisy.x, noisy.y), noisy_test);
    }
    const double mean = shuffled_total / 5;
    INFO(to_string(kind), " shuffled mean ", mean);
    CHECK(mean >= 0.45);
    CHECK(mean <= 0.55);
  }
}
