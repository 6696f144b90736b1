#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "stepnav/adaptive.hpp"
#include "stepnav/evaluation.hpp"
#include "stepnav/features.hpp"
#include "stepnav/mrmr.hpp"
#include "stepnav/svm.hpp"

using namespace stepnav;

namespace {

FeatureWindow constant_window(const Vec3& v, double roll, double pitch, double yaw, std::size_t n) {
  FeatureWindow w;
  for (std::size_t i = 0; i < n; ++i) w.push(FeatureWindow::Sample{v, roll, pitch, yaw});
  return w;
}

}  // namespace

TEST_CASE("features follow their closed forms") {
  const FeatureWindow w = constant_window(Vec3(3.0, 4.0, 0.0), 0.1, -0.2, 0.5, kFeatureWindow);
  const NoiseDescriptor n{1e-6, 4e-4, 1e-2, 2.0};
  const FeatureVector f = extract_features(w, n);
  const auto& x = f.values;
  CHECK(x[0] == doctest::Approx(1e-3));
  CHECK(x[1] == doctest::Approx(2e-2));
  CHECK(x[2] == doctest::Approx(0.1));
  CHECK(x[3] == 2.0);
  CHECK(x[4] == doctest::Approx(9.0));
  CHECK(x[5] == doctest::Approx(16.0));
  CHECK(x[6] == 0.0);
  CHECK(x[7] == doctest::Approx(0.01));
  CHECK(x[8] == doctest::Approx(0.04));
  CHECK(x[9] == doctest::Approx(0.25));
  CHECK(x[10] == doctest::Approx(std::sqrt(1e-6 + 4e-4 + 1e-2)));
  CHECK(x[11] == doctest::Approx(std::sqrt(1e6 + 2500.0 + 100.0)));
  CHECK(x[12] == doctest::Approx((1e-3 + 2e-2) / 0.1));
  CHECK(x[13] == doctest::Approx(0.02));
  CHECK(x[14] == doctest::Approx(5.0));
  CHECK(x[15] == doctest::Approx(x[12] * 5.0));
  CHECK_FALSE(f.floored);
  CHECK_FALSE(f.warmup);
}

TEST_CASE("zero variances are floored and short windows flagged") {
  const FeatureWindow w = constant_window(Vec3(1.0, 0.0, 0.0), 0, 0, 0, 10);
  const FeatureVector f = extract_features(w, NoiseDescriptor{0.0, 0.0, 0.0, 1.0});
  CHECK(f.floored);
  CHECK(f.warmup);
  CHECK(std::all_of(f.values.begin(), f.values.end(), [](double v) { return std::isfinite(v); }));
  CHECK(f.values[10] == 0.0);
  CHECK_THROWS_AS(extract_features(FeatureWindow{}, NoiseDescriptor{}), ValidationError);
}

TEST_CASE("window keeps the newest samples") {
  FeatureWindow w(3);
  for (int i = 1; i <= 5; ++i) w.push(FeatureWindow::Sample{Vec3(i, 0, 0), 0, 0, 0});
  CHECK(w.size() == 3);
  CHECK(w.samples().front().velocity.x() == 3.0);
  CHECK(feature_names().size() == kFeatureCount);
  CHECK(feature_names()[0] == "x_hi_1");
  CHECK(feature_names()[15] == "x_lo_6");
}

TEST_CASE("linear SVM separates two blobs") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g(0.0, 0.3);
  const int n = 80;
  MatrixX X(n, 2);
  std::vector<int> y(n);
  for (int i = 0; i < n; ++i) {
    y[i] = i % 2 ? 1 : -1;
    X(i, 0) = y[i] * 1.0 + g(rng);
    X(i, 1) = g(rng);
  }
  const SvmModel m = train_svm(X, y);
  CHECK(m.info.converged);
  int correct = 0;
  for (int i = 0; i < n; ++i) correct += (m.decision(VectorX(X.row(i).transpose())) > 0) == (y[i] == 1);
  CHECK(correct == n);
  // Primal weights and the support expansion agree.
  double s = m.bias;
  const VectorX z = m.standardizer.apply(VectorX(X.row(0).transpose()));
  for (Eigen::Index i = 0; i < m.support.rows(); ++i) s += m.coef(i) * m.support.row(i).dot(z);
  CHECK(s == doctest::Approx(m.decision(VectorX(X.row(0).transpose()))));
}

TEST_CASE("quadratic kernel learns a ring") {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  MatrixX X(200, 2);
  std::vector<int> y(200);
  for (int i = 0; i < 200; ++i) {
    double a, b;
    do {
      a = u(rng), b = u(rng);
    } while (std::abs(a * a + b * b - 0.4) < 0.08);
    X(i, 0) = a, X(i, 1) = b;
    y[i] = a * a + b * b < 0.4 ? 1 : -1;
  }
  SvmParams p;
  p.kernel = KernelKind::Poly2;
  p.C = 10.0;
  const SvmModel m = train_svm(X, y, p);
  CHECK(m.info.converged);
  int correct = 0;
  for (int i = 0; i < 200; ++i) correct += (m.decision(VectorX(X.row(i).transpose())) > 0) == (y[i] == 1);
  CHECK(correct >= 196);
}

TEST_CASE("svm input validation") {
  MatrixX X(4, 1);
  X << 1, 2, 3, 4;
  CHECK_THROWS_AS(train_svm(X, {1, 1, 1, 1}), ValidationError);
  CHECK_THROWS_AS(train_svm(X, {1, -1, 1}), ValidationError);
  CHECK(label_from_step(0.002) == 1);
  CHECK(label_from_step(0.04) == -1);
  CHECK_THROWS(label_from_step(0.01));
  CHECK(step_from_label(1) == 0.002);
}

TEST_CASE("trapezoid AuC equals pair counting on random small instances") {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> size(2, 20), coin(0, 1), level(0, 5);
  int checked = 0;
  for (int trial = 0; trial < 2000; ++trial) {
    const int n = size(rng);
    std::vector<double> s(static_cast<std::size_t>(n));
    std::vector<int> y(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      s[static_cast<std::size_t>(i)] = level(rng) * 0.5;  // coarse levels force ties
      y[static_cast<std::size_t>(i)] = coin(rng) ? 1 : -1;
    }
    if (std::count(y.begin(), y.end(), 1) == 0 || std::count(y.begin(), y.end(), -1) == 0) continue;
    const double a = trapezoid_auc(roc_curve(s, y));
    const double b = pairwise_auc(s, y);
    CHECK(std::abs(a - b) < 1e-12);
    ++checked;
  }
  CHECK(checked > 1500);
}

TEST_CASE("ROC endpoints and accuracy") {
  const std::vector<double> s = {0.9, 0.8, -0.1, -0.5};
  const std::vector<int> y = {1, -1, 1, -1};
  const auto roc = roc_curve(s, y);
  CHECK(roc.front().fpr == 0.0);
  CHECK(roc.front().tpr == 0.0);
  CHECK(roc.back().fpr == 1.0);
  CHECK(roc.back().tpr == 1.0);
  const EvalReport r = evaluate_scores(s, y);
  CHECK(r.accuracy == 0.5);
  CHECK(r.auc == doctest::Approx(0.75));
  CHECK(r.confusion.tp == 1);
  CHECK(r.confusion.fp == 1);
  CHECK_THROWS(roc_curve({1.0}, {1}));
}

TEST_CASE("mutual information matches the direct sum") {
  const std::vector<int> a = {0, 0, 1, 1, 2, 2, 0, 1};
  const std::vector<int> b = {0, 1, 1, 1, 0, 0, 0, 1};
  double mi = 0.0;
  const double n = 8.0;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 2; ++j) {
      double pij = 0, pi = 0, pj = 0;
      for (std::size_t k = 0; k < a.size(); ++k) {
        pij += a[k] == i && b[k] == j;
        pi += a[k] == i;
        pj += b[k] == j;
      }
      if (pij > 0) mi += pij / n * std::log((pij / n) / ((pi / n) * (pj / n)));
    }
  }
  CHECK(mutual_information(a, b) == doctest::Approx(mi).epsilon(1e-12));
  CHECK(mutual_information(a, a) > mutual_information(a, b));
  CHECK(mutual_information({1, 1, 1}, {0, 1, 0}) == 0.0);
}

TEST_CASE("equal-frequency bins keep ties together") {
  VectorX v(8);
  v << 5, 1, 1, 1, 2, 3, 4, 6;
  const auto b = equal_frequency_bins(v, 4);
  CHECK(b[1] == b[2]);
  CHECK(b[2] == b[3]);
  CHECK(b[0] >= b[6]);
  CHECK(*std::max_element(b.begin(), b.end()) < 4);
}

TEST_CASE("mrmr puts the informative feature first") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g(0.0, 1.0);
  const int n = 400;
  MatrixX X(n, 4);
  std::vector<int> y(n);
  for (int i = 0; i < n; ++i) {
    const double s = g(rng);
    y[i] = s > 0 ? 1 : -1;
    X(i, 0) = g(rng);
    X(i, 1) = s;
    X(i, 2) = s;  // duplicate
    X(i, 3) = 0.5 * s + g(rng);
  }
  const auto r = mrmr_rank(X, y);
  REQUIRE(r.size() == 4);
  CHECK(r[0].feature == 1);
  CHECK(r[1].feature != 2);
}

TEST_CASE("hysteresis needs a full agreeing history") {
  AdaptivePolicyState s;
  s.current = 0.002;
  s.capacity = 3;
  CHECK(adaptive_step(s, 0.04) == 0.002);
  CHECK(adaptive_step(s, 0.04) == 0.002);
  CHECK(adaptive_step(s, 0.04) == 0.04);
  CHECK(s.switches == 1);
  CHECK(adaptive_step(s, 0.002) == 0.04);
  CHECK(adaptive_step(s, 0.04) == 0.04);
  CHECK(adaptive_step(s, 0.002) == 0.04);
  CHECK(adaptive_step(s, 0.002) == 0.04);
  CHECK(adaptive_step(s, 0.002) == 0.002);
  CHECK(s.switches == 2);
}

TEST_CASE("without hysteresis every change switches") {
  AdaptivePolicyState s;
  s.current = 0.002;
  s.hysteresis = false;
  CHECK(adaptive_step(s, 0.04) == 0.04);
  CHECK(adaptive_step(s, 0.002) == 0.002);
  CHECK(s.switches == 2);
}

TEST_CASE("constant models decide one class") {
  Features x{};
  x.fill(0.3);
  CHECK(constant_model(0.002)->predict_step(x) == 0.002);
  CHECK(constant_model(0.04)->predict_step(x) == 0.04);
}

TEST_CASE("duplicating a separable training set keeps the decision function") {
  MatrixX X(8, 2);
  X << 0, 0, 1, 0, 0, 1, 1, 1, 4, 4, 5, 4, 4, 5, 5, 5;
  const std::vector<int> y = {-1, -1, -1, -1, 1, 1, 1, 1};
  MatrixX X2(16, 2);
  X2 << X, X;
  std::vector<int> y2 = y;
  y2.insert(y2.end(), y.begin(), y.end());
  SvmParams p;
  p.C = 100.0;
  p.tolerance = 1e-12;
  const SvmModel a = train_svm(X, y, p);
  const SvmModel b = train_svm(X2, y2, p);
  for (double u = -1.0; u <= 6.0; u += 0.5) {
    for (double v = -1.0; v <= 6.0; v += 0.5) {
      VectorX q(2);
      q << u, v;
      CHECK(std::abs(a.decision(q) - b.decision(q)) < 1e-8);
    }
  }
}
