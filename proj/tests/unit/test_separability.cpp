#include <doctest.h>

#include <cmath>
#include <random>

#include "support/fixtures.hpp"
#include "support/oracles.hpp"
#include "marginforge/separability.hpp"

using namespace marginforge;

namespace {

const MatchingContext kUnit(Eigen::MatrixXd::Identity(1, 1), InverseSource::kExact);

VectorSet two_pairs() { return fixture::set(fixture::row({0, 2, 4, 6}), {"A", "A", "B", "B"}); }

// Two classes at centroids 0 and `gap`, members at +-spread.
VectorSet spaced(double gap, double spread) {
  return fixture::set(fixture::row({-spread, spread, gap - spread, gap + spread}), {"A", "A", "B", "B"});
}

}  // namespace

TEST_CASE("1-D fixture: DBI, DI, FDR and SC by hand") {
  const VectorSet t = two_pairs();
  CHECK(davies_bouldin(t, kUnit) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(dunn(t, kUnit) == doctest::Approx(4.0).epsilon(1e-15));
  CHECK(fisher_ratio(t, kUnit) == doctest::Approx(2.0).epsilon(1e-15));
  // s(0) = (5 - 1)/5, s(2) = (3 - 1)/3, mirrored for B.
  CHECK(silhouette(t, kUnit) == doctest::Approx((0.8 + 2.0 / 3.0) / 2).epsilon(1e-15));

  const SeparabilityReport r = compute_separability(t, kUnit);
  CHECK(r.dbi == doctest::Approx(0.5));
  CHECK(r.class_sigma == std::vector<double>{1.0, 1.0});
  CHECK(r.class_centroids(0, 0) == 1.0);
  CHECK(r.class_centroids(0, 1) == 5.0);
  CHECK(r.warnings.empty());
}

TEST_CASE("singleton classes at distinct points have zero DBI") {
  const VectorSet t = fixture::set(fixture::row({0, 3, 7}), {"A", "B", "C"});
  CHECK(davies_bouldin(t, kUnit) == 0.0);
}

TEST_CASE("shrinking within-class spread strictly decreases DBI") {
  double last = std::numeric_limits<double>::infinity();
  for (double spread : {1.5, 1.0, 0.5, 0.25, 0.1}) {
    const double dbi = davies_bouldin(spaced(5, spread), kUnit);
    CHECK(dbi < last);
    last = dbi;
  }
}

TEST_CASE("Dunn index fixtures") {
  const VectorSet three = fixture::set(fixture::row({-1, 1, 4, 6, 10, 10}), {"A", "A", "B", "B", "C", "C"});
  CHECK(dunn(three, kUnit) == doctest::Approx(5.0).epsilon(1e-15));
  const VectorSet twins = fixture::set(fixture::row({0, 2, 0, 2}), {"A", "A", "B", "B"});
  CHECK(dunn(twins, kUnit) == 0.0);
}

TEST_CASE("silhouette fixtures and bounds") {
  const VectorSet dup = fixture::set(fixture::row({0, 0, 10, 10}), {"A", "A", "B", "B"});
  CHECK(silhouette(dup, kUnit) == 1.0);
  const VectorSet same = fixture::set(fixture::row({0, 1, 2, 0, 1, 2}), {"A", "A", "A", "B", "B", "B"});
  CHECK(silhouette(same, kUnit) <= 0.0);

  std::mt19937_64 rng(91);
  for (int k = 0; k < 50; ++k) {
    const VectorSet t = oracle::random_classes(rng, 2 + k % 5, 1 + k % 4, 1, 6, 0.5 + k % 3, 1.0);
    const MatchingContext ctx(Eigen::MatrixXd::Identity(t.dimension(), t.dimension()), InverseSource::kExact);
    const double sc = silhouette(t, ctx);
    CHECK(sc >= -1.0);
    CHECK(sc <= 1.0);
  }
}

TEST_CASE("Fisher ratio fixtures") {
  const VectorSet exact = fixture::set(fixture::row({1, 1, 5, 5}), {"A", "A", "B", "B"});
  CHECK(std::isinf(fisher_ratio(exact, kUnit)));
  const SeparabilityReport r = compute_separability(exact, kUnit);
  CHECK(std::isinf(r.fdr));
  CHECK(std::isinf(r.di));
  CHECK_FALSE(r.warnings.empty());
}

TEST_CASE("coefficients are translation invariant") {
  std::mt19937_64 rng(92);
  for (int k = 0; k < 10; ++k) {
    const VectorSet t = oracle::random_classes(rng, 4, 3, 3, 7);
    const VectorSet moved(t.columns().colwise() + Eigen::Vector3d(10, -20, 3.5),
                          std::vector<std::string>(t.ids().begin(), t.ids().end()),
                          std::vector<std::string>(t.labels().begin(), t.labels().end()));
    const MatchingContext ctx(Eigen::Matrix3d::Identity(), InverseSource::kExact);
    const SeparabilityReport a = compute_separability(t, ctx);
    const SeparabilityReport b = compute_separability(moved, ctx);
    CHECK(b.dbi == doctest::Approx(a.dbi).epsilon(1e-9));
    CHECK(b.di == doctest::Approx(a.di).epsilon(1e-9));
    CHECK(b.sc == doctest::Approx(a.sc).epsilon(1e-9));
    CHECK(b.fdr == doctest::Approx(a.fdr).epsilon(1e-9));
  }
}

TEST_CASE("coefficients survive linear recombination when the context is rebuilt") {
  std::mt19937_64 rng(93);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int k = 0; k < 10; ++k) {
    const VectorSet t = oracle::random_classes(rng, 4, 3, 4, 8);
    Eigen::Matrix3d a = Eigen::Matrix3d::NullaryExpr([&] { return n(rng); }) + 2 * Eigen::Matrix3d::Identity();
    const VectorSet mixed(a.transpose() * t.columns(), std::vector<std::string>(t.ids().begin(), t.ids().end()),
                          std::vector<std::string>(t.labels().begin(), t.labels().end()));
    const SeparabilityReport r1 = compute_separability(t, build_matching_context(t));
    const SeparabilityReport r2 = compute_separability(mixed, build_matching_context(mixed));
    CHECK(r2.dbi == doctest::Approx(r1.dbi).epsilon(1e-6));
    CHECK(r2.di == doctest::Approx(r1.di).epsilon(1e-6));
    CHECK(r2.sc == doctest::Approx(r1.sc).epsilon(1e-6));
    CHECK(r2.fdr == doctest::Approx(r1.fdr).epsilon(1e-6));
  }
}

TEST_CASE("wider centroid spacing raises DI and FDR and lowers DBI") {
  double dbi = std::numeric_limits<double>::infinity(), di = 0, fdr = 0;
  for (double gap : {2.5, 3.0, 5.0, 8.0, 20.0}) {
    const VectorSet t = spaced(gap, 1.0);
    CHECK(davies_bouldin(t, kUnit) < dbi);
    CHECK(dunn(t, kUnit) > di);
    CHECK(fisher_ratio(t, kUnit) > fdr);
    dbi = davies_bouldin(t, kUnit);
    di = dunn(t, kUnit);
    fdr = fisher_ratio(t, kUnit);
  }
}
