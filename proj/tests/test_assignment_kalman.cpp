#include <doctest.h>

#include <random>

#include "occtool/assignment.hpp"
#include "occtool/geometry.hpp"
#include "occtool/kalman.hpp"
#include "test_support.hpp"

using namespace occtool;

TEST_CASE("iou basics") {
  const Box a{0, 0, 10, 10};
  CHECK(iou(a, a) == doctest::Approx(1.0));
  CHECK(iou(a, Box{5, 0, 10, 10}) == doctest::Approx(1.0 / 3.0));
  CHECK(iou(a, Box{100, 100, 10, 10}) == 0.0);
}

TEST_CASE("assign: single admissible pair") {
  Eigen::MatrixXd cost(1, 1);
  cost << 0.1;
  const auto a = assign(cost, 0.5);
  REQUIRE(a.matches.size() == 1);
  CHECK(a.matches[0] == std::pair<int, int>{0, 0});
  CHECK(a.unmatched_rows.empty());
  CHECK(a.unmatched_cols.empty());
}

TEST_CASE("assign: diagonal structure matches the brute-force oracle") {
  Eigen::MatrixXd cost(2, 2);
  cost << 0.1, 0.9, 0.9, 0.1;
  const auto a = assign(cost, 1.0);
  const auto oracle = testsupport::brute_force_assign(cost, 1.0);
  CHECK(a.matches == oracle.matches);
  REQUIRE(a.matches.size() == 2);
  CHECK(a.matches[0] == std::pair<int, int>{0, 0});
  CHECK(a.matches[1] == std::pair<int, int>{1, 1});
}

TEST_CASE("assign: everything above the gate stays unmatched") {
  Eigen::MatrixXd cost(2, 3);
  cost.setConstant(0.9);
  const auto a = assign(cost, 0.5);
  CHECK(a.matches.empty());
  CHECK(a.unmatched_rows == std::vector<int>{0, 1});
  CHECK(a.unmatched_cols == std::vector<int>{0, 1, 2});
}

TEST_CASE("assign: ties break toward low row then low column") {
  Eigen::MatrixXd cost(2, 2);
  cost.setConstant(0.25);
  const auto a = assign(cost, 1.0);
  REQUIRE(a.matches.size() == 2);
  CHECK(a.matches[0] == std::pair<int, int>{0, 0});
  CHECK(a.matches[1] == std::pair<int, int>{1, 1});
}

TEST_CASE("assign: prefers more matches over cheaper partial matchings") {
  // Row 0 could grab column 1 cheaply and strand row 1; the optimum keeps
  // both rows matched.
  Eigen::MatrixXd cost(2, 2);
  cost << 0.9, 0.05, 1e9, 0.2;
  const auto a = assign(cost, 1.0);
  REQUIRE(a.matches.size() == 2);
  CHECK(a.matches[0] == std::pair<int, int>{0, 0});
  CHECK(a.matches[1] == std::pair<int, int>{1, 1});
}

TEST_CASE("assign agrees with the exhaustive oracle on random gated matrices") {
  std::mt19937 rng(20240811);
  std::uniform_real_distribution<double> cost_dist(0.0, 1.0);
  std::uniform_int_distribution<int> size_dist(1, 5);
  for (int trial = 0; trial < 300; ++trial) {
    const int n = size_dist(rng), m = size_dist(rng);
    Eigen::MatrixXd cost(n, m);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < m; ++j) cost(i, j) = cost_dist(rng);
    const double gate = 0.7;
    const auto got = assign(cost, gate);
    const auto want = testsupport::brute_force_assign(cost, gate);
    CAPTURE(trial);
    CHECK(got.matches == want.matches);
    CHECK(got.unmatched_rows == want.unmatched_rows);
    CHECK(got.unmatched_cols == want.unmatched_cols);
  }
}

TEST_CASE("kalman: stationary prediction keeps position, grows uncertainty") {
  KalmanBoxFilter kf;
  kf.initiate(Box{100, 200, 40, 80});
  const auto mean_before = kf.mean();
  const double trace_before = kf.covariance().trace();
  kf.predict();
  CHECK(kf.mean()(0) == doctest::Approx(mean_before(0)));
  CHECK(kf.mean()(1) == doctest::Approx(mean_before(1)));
  CHECK(kf.covariance().trace() > trace_before);
}

TEST_CASE("kalman: unit velocity advances center-x one per step") {
  KalmanBoxFilter kf;
  kf.initiate(Box{0, 0, 40, 80});
  // Feed two updates one pixel apart, then check the learned motion moves x.
  for (int t = 1; t <= 20; ++t) {
    kf.predict();
    kf.update(Box{static_cast<double>(t), 0, 40, 80});
  }
  const double cx = kf.mean()(0);
  kf.predict();
  CHECK(kf.mean()(0) == doctest::Approx(cx + 1.0).epsilon(0.01));
}

TEST_CASE("kalman: two predicts equal one two-step transition on the mean") {
  KalmanBoxFilter kf;
  kf.initiate(Box{10, 20, 30, 60});
  kf.predict();
  kf.update(Box{14, 26, 30, 60});  // give it a velocity
  const auto state = kf.mean();

  KalmanBoxFilter twice = kf;
  twice.predict();
  twice.predict();

  const auto f = KalmanBoxFilter::transition_matrix();
  const auto f2 = (f * f).eval();
  const auto expected = (f2 * state).eval();
  for (int i = 0; i < 8; ++i)
    CHECK(twice.mean()(i) == doctest::Approx(expected(i)).epsilon(1e-12));
}

TEST_CASE("kalman: covariance stays symmetric PSD through random updates") {
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> jitter(-3.0, 3.0);
  KalmanBoxFilter kf;
  kf.initiate(Box{50, 50, 40, 80});
  for (int t = 0; t < 200; ++t) {
    kf.predict();
    if (t % 3 != 2)
      kf.update(Box{50 + jitter(rng), 50 + jitter(rng), 40 + jitter(rng), 80 + jitter(rng)});
    const auto& cov = kf.covariance();
    CHECK((cov - cov.transpose()).cwiseAbs().maxCoeff() <= 1e-9);
    const Eigen::SelfAdjointEigenSolver<KalmanBoxFilter::Mat8> es(cov);
    CHECK(es.eigenvalues().minCoeff() >= -1e-9);
  }
}
