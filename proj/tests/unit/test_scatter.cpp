#include <doctest.h>

#include <random>

#include "support/fixtures.hpp"
#include "support/oracles.hpp"
#include "marginforge/error.hpp"
#include "marginforge/scatter.hpp"

using namespace marginforge;

namespace {

double rel(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return (a - b).norm() / std::max(1.0, b.norm());
}

}  // namespace

TEST_CASE("one-dimensional two-class fixture") {
  const VectorSet data = fixture::set(fixture::row({0, 2, 4, 6}), {"A", "A", "B", "B"});
  const ScatterStatistics s = compute_scatter(data);
  CHECK(s.class_means(0, 0) == 1.0);
  CHECK(s.class_means(0, 1) == 5.0);
  CHECK(s.overall_mean[0] == 3.0);
  CHECK(s.sigma_b(0, 0) == doctest::Approx(8.0).epsilon(1e-15));
  CHECK(s.sigma_w(0, 0) == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(s.sigma_t(0, 0) == doctest::Approx(10.0).epsilon(1e-15));
  CHECK(s.class_sizes == std::vector<std::size_t>{2, 2});
}

TEST_CASE("coincident class means give zero between-class scatter") {
  const VectorSet data = fixture::set(fixture::row({-1, 1, -2, 2}), {"A", "A", "B", "B"});
  const ScatterStatistics s = compute_scatter(data);
  CHECK(s.sigma_b(0, 0) == 0.0);
  CHECK(s.sigma_t(0, 0) == doctest::Approx(s.sigma_w(0, 0)));
}

TEST_CASE("identical class members give zero within-class scatter") {
  Eigen::MatrixXd x(2, 4);
  x << 1, 1, 3, 3,
       2, 2, -1, -1;
  const ScatterStatistics s = compute_scatter(fixture::set(x, {"A", "A", "B", "B"}));
  CHECK(s.sigma_w.norm() == 0.0);
  CHECK(rel(s.sigma_t, s.sigma_b) <= 1e-15);
}

TEST_CASE("scatter matrices agree with the direct definitions") {
  std::mt19937_64 rng(101);
  for (int k = 0; k < 50; ++k) {
    const VectorSet data = oracle::random_classes(rng, 2 + k % 6, 3 + k % 9, 2, 12);
    const ScatterStatistics s = compute_scatter(data);
    const oracle::Scatter o = oracle::naive_scatter(data);
    CHECK(rel(s.sigma_b, o.sb) <= 1e-12);
    CHECK(rel(s.sigma_w, o.sw) <= 1e-12);
    CHECK(rel(s.sigma_t, o.st) <= 1e-12);
    CHECK(rel(s.sigma_t, s.sigma_b + s.sigma_w) <= 1e-12);
    CHECK(rel(s.sigma_b, s.sigma_b.transpose()) == 0.0);
  }
}

TEST_CASE("translation leaves every scatter matrix unchanged") {
  std::mt19937_64 rng(7);
  const VectorSet data = oracle::random_classes(rng, 4, 5, 3, 8);
  Eigen::VectorXd shift(5);
  shift << 100, -3, 0.5, 42, 7;
  const VectorSet moved(data.columns().colwise() + shift,
                        std::vector<std::string>(data.ids().begin(), data.ids().end()),
                        std::vector<std::string>(data.labels().begin(), data.labels().end()));
  const ScatterStatistics a = compute_scatter(data);
  const ScatterStatistics b = compute_scatter(moved);
  CHECK(rel(b.sigma_b, a.sigma_b) <= 1e-10);
  CHECK(rel(b.sigma_w, a.sigma_w) <= 1e-10);
  CHECK(rel(b.sigma_t, a.sigma_t) <= 1e-10);
}

TEST_CASE("orthogonal change of basis conjugates the scatter matrices") {
  std::mt19937_64 rng(8);
  for (int k = 0; k < 10; ++k) {
    const VectorSet data = oracle::random_classes(rng, 3, 6, 3, 9);
    const Eigen::MatrixXd q = fixture::random_orthogonal(rng, 6);
    const VectorSet rotated(q * data.columns(), std::vector<std::string>(data.ids().begin(), data.ids().end()),
                            std::vector<std::string>(data.labels().begin(), data.labels().end()));
    const ScatterStatistics a = compute_scatter(data);
    const ScatterStatistics b = compute_scatter(rotated);
    CHECK(rel(b.sigma_b, q * a.sigma_b * q.transpose()) <= 1e-12);
    CHECK(rel(b.sigma_w, q * a.sigma_w * q.transpose()) <= 1e-12);
  }
}

TEST_CASE("scatter factors reproduce the total and between-class scatter") {
  std::mt19937_64 rng(9);
  for (int k = 0; k < 20; ++k) {
    const VectorSet data = oracle::random_classes(rng, 2 + k % 5, 4 + k % 7, 2, 10);
    const ScatterStatistics s = compute_scatter(data);
    const Eigen::MatrixXd x = total_scatter_factor(s, data);
    const Eigen::MatrixXd u = between_scatter_factor(s);
    CHECK(x.cols() == static_cast<Eigen::Index>(data.size()));
    CHECK(u.cols() == static_cast<Eigen::Index>(s.class_count()));
    CHECK(rel(x * x.transpose(), s.sigma_t) <= 1e-12);
    CHECK(rel(u * u.transpose(), s.sigma_b) <= 1e-12);
  }
}

TEST_CASE("a single class is rejected") {
  try {
    compute_scatter(fixture::set(fixture::row({1, 2, 3}), {"A", "A", "A"}));
    FAIL("expected too few classes");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kTooFewClasses);
  }
}
