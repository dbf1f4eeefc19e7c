#include <doctest.h>

#include <random>

#include "support/fixtures.hpp"
#include "support/oracles.hpp"
#include "marginforge/error.hpp"
#include "marginforge/template_space.hpp"

using namespace marginforge;

namespace {

MatchingContext context_of(const Eigen::MatrixXd& inverse) { return MatchingContext(inverse, InverseSource::kExact); }

Eigen::MatrixXd random_spd(std::mt19937_64& rng, Eigen::Index d) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::MatrixXd a(d, d);
  for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = n(rng);
  return a * a.transpose() + 0.1 * Eigen::MatrixXd::Identity(d, d);
}

ErrorCode code_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::kInternal;
}

}  // namespace

TEST_CASE("template extraction projects and keeps identity") {
  FeatureTransform t = identity_transform(3);
  t.phi = Eigen::MatrixXd::Zero(3, 1);
  t.phi(0, 0) = 1;
  t.delta = Eigen::VectorXd::Ones(1);
  FlatSample s;
  s.sample_id = "s";
  s.label = "L";
  s.vector = Eigen::Vector3d(5, 7, 9);
  const GaitTemplate g = extract_template(t, s);
  REQUIRE(g.vector.size() == 1);
  CHECK(g.vector[0] == 5);
  CHECK(g.sample_id == "s");
  CHECK(g.label == "L");
  s.vector.setZero();
  CHECK(extract_template(t, s).vector[0] == 0);
  s.vector = Eigen::Vector2d(1, 2);
  CHECK_THROWS_AS(extract_template(t, s), Error);
}

TEST_CASE("template extraction is linear") {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n(0.0, 1.0);
  FeatureTransform t = identity_transform(5);
  t.phi = Eigen::MatrixXd::NullaryExpr(5, 3, [&] { return n(rng); });
  t.delta = Eigen::VectorXd::Ones(3);
  FlatSample x, y, z;
  x.vector = Eigen::VectorXd::NullaryExpr(5, [&] { return n(rng); });
  y.vector = Eigen::VectorXd::NullaryExpr(5, [&] { return n(rng); });
  z.vector = 2.5 * x.vector - 0.75 * y.vector;
  const Eigen::VectorXd lhs = extract_template(t, z).vector;
  const Eigen::VectorXd rhs = 2.5 * extract_template(t, x).vector - 0.75 * extract_template(t, y).vector;
  CHECK((lhs - rhs).norm() <= 1e-12 * std::max(1.0, rhs.norm()));
}

TEST_CASE("MMC templates have identity total scatter") {
  std::mt19937_64 rng(44);
  for (int k = 0; k < 10; ++k) {
    const VectorSet data = oracle::random_classes(rng, 5, 12, 5, 10);
    const FeatureTransform t = learn_transform(Method::kMmc, data);
    const MatchingContext ctx = build_matching_context(extract_templates(t, data));
    const Eigen::Index m = t.feature_dim();
    CHECK((ctx.inverse() - Eigen::MatrixXd::Identity(m, m)).norm() <= 1e-6);
    CHECK(ctx.source() == InverseSource::kExact);
    const VectorSet tpl = extract_templates(t, data);
    for (std::size_t i = 0; i + 1 < tpl.size(); ++i) {
      const Eigen::VectorXd a = tpl.columns().col(static_cast<Eigen::Index>(i));
      const Eigen::VectorXd b = tpl.columns().col(static_cast<Eigen::Index>(i + 1));
      const double e = (a - b).norm();
      CHECK(std::abs(mahalanobis(ctx, a, b) - e) <= 1e-5 * std::max(1e-12, e));
    }
  }
}

TEST_CASE("repeated templates give a hand-computable 1x1 context") {
  // mu = 2, St = (1 + 1)/2 + (1 + 1)/2 = 2.
  const VectorSet tpl = fixture::set(fixture::row({1, 1, 3, 3}), {"A", "A", "B", "B"});
  const MatchingContext ctx = build_matching_context(tpl);
  CHECK(ctx.inverse()(0, 0) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(mahalanobis(ctx, Eigen::VectorXd::Constant(1, 1), Eigen::VectorXd::Constant(1, 3)) ==
        doctest::Approx(std::sqrt(2.0)).epsilon(1e-14));
}

TEST_CASE("ill-conditioned scatter takes the ridge and stays positive definite") {
  Eigen::MatrixXd x(2, 4);
  x << 0, 1, 4, 6,
       0, 1e-9, 2e-9, 0;
  const MatchingContext ctx = build_matching_context(fixture::set(x, {"A", "A", "B", "B"}));
  CHECK(ctx.source() == InverseSource::kRidge);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(ctx.inverse());
  CHECK(eig.eigenvalues().minCoeff() > 0);
  CHECK(ctx.inverse().allFinite());
}

TEST_CASE("degenerate contexts are rejected") {
  CHECK(code_of([] { build_matching_context(fixture::set(fixture::row({2, 2, 2, 2}), {"A", "A", "B", "B"})); }) ==
        ErrorCode::kDegenerate);
  Eigen::Matrix2d asym;
  asym << 1, 0.5, 0, 1;
  CHECK(code_of([&] { context_of(asym); }) == ErrorCode::kSchema);
  Eigen::Matrix2d indef;
  indef << 1, 0, 0, -1;
  CHECK(code_of([&] { context_of(indef); }) == ErrorCode::kSchema);
}

TEST_CASE("mahalanobis fixtures") {
  const MatchingContext id = context_of(Eigen::Matrix2d::Identity());
  CHECK(mahalanobis(id, Eigen::Vector2d(0, 0), Eigen::Vector2d(3, 4)) == 5.0);
  CHECK(mahalanobis(id, Eigen::Vector2d(1.5, -2), Eigen::Vector2d(1.5, -2)) == 0.0);
  const MatchingContext diag = context_of(Eigen::Vector2d(0.25, 1).asDiagonal());
  CHECK(mahalanobis(diag, Eigen::Vector2d(2, 0), Eigen::Vector2d(0, 0)) == 1.0);
  CHECK_THROWS_AS(mahalanobis(id, Eigen::Vector3d(0, 0, 0), Eigen::Vector2d(0, 0)), Error);
}

TEST_CASE("whitener reproduces the Mahalanobis distance as Euclidean") {
  std::mt19937_64 rng(81);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int k = 0; k < 20; ++k) {
    const Eigen::Index d = 1 + k % 6;
    const MatchingContext ctx = context_of(random_spd(rng, d));
    CHECK((ctx.whitener().transpose() * ctx.whitener() - ctx.inverse()).norm() <= 1e-9 * ctx.inverse().norm());
    const Eigen::VectorXd a = Eigen::VectorXd::NullaryExpr(d, [&] { return n(rng); });
    const Eigen::VectorXd b = Eigen::VectorXd::NullaryExpr(d, [&] { return n(rng); });
    const double w = (ctx.whitener() * (a - b)).norm();
    CHECK(std::abs(mahalanobis(ctx, a, b) - w) <= 1e-9 * std::max(1.0, w));
  }
}

TEST_CASE("mahalanobis is a metric for positive definite contexts") {
  std::mt19937_64 rng(82);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int k = 0; k < 200; ++k) {
    const Eigen::Index d = 1 + k % 7;
    const MatchingContext ctx = context_of(random_spd(rng, d));
    const Eigen::VectorXd a = Eigen::VectorXd::NullaryExpr(d, [&] { return n(rng); });
    const Eigen::VectorXd b = Eigen::VectorXd::NullaryExpr(d, [&] { return n(rng); });
    const Eigen::VectorXd c = Eigen::VectorXd::NullaryExpr(d, [&] { return n(rng); });
    const double ab = mahalanobis(ctx, a, b), ba = mahalanobis(ctx, b, a);
    const double bc = mahalanobis(ctx, b, c), ac = mahalanobis(ctx, a, c);
    CHECK(ab >= 0);
    CHECK(std::abs(ab - ba) <= 1e-9 * std::max(1.0, ab));
    CHECK(mahalanobis(ctx, a, a) == 0.0);
    CHECK(ac <= ab + bc + 1e-9 * std::max(1.0, ac));
  }
}

TEST_CASE("linear recombination of features with a rebuilt context preserves distances") {
  std::mt19937_64 rng(83);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int k = 0; k < 20; ++k) {
    const VectorSet tpl = oracle::random_classes(rng, 4, 3, 4, 8);
    Eigen::MatrixXd a = Eigen::MatrixXd::NullaryExpr(3, 3, [&] { return n(rng); });
    a += 2 * Eigen::MatrixXd::Identity(3, 3);
    const VectorSet mixed(a.transpose() * tpl.columns(), std::vector<std::string>(tpl.ids().begin(), tpl.ids().end()),
                          std::vector<std::string>(tpl.labels().begin(), tpl.labels().end()));
    const MatchingContext c1 = build_matching_context(tpl);
    const MatchingContext c2 = build_matching_context(mixed);
    for (std::size_t i = 0; i < tpl.size(); ++i) {
      for (std::size_t j = i + 1; j < tpl.size(); ++j) {
        const auto ii = static_cast<Eigen::Index>(i), jj = static_cast<Eigen::Index>(j);
        const double d1 = mahalanobis(c1, tpl.columns().col(ii), tpl.columns().col(jj));
        const double d2 = mahalanobis(c2, mixed.columns().col(ii), mixed.columns().col(jj));
        CHECK(std::abs(d1 - d2) <= 1e-6 * d1);
      }
    }
  }
}

TEST_CASE("gallery store round-trips and detects staleness") {
  std::mt19937_64 rng(84);
  const VectorSet data = oracle::random_classes(rng, 3, 6, 4, 6);
  const FeatureTransform t = learn_transform(Method::kMmc, data);
  const VectorSet tpl = extract_templates(t, data);
  GalleryStore store;
  store.transform_fingerprint = transform_fingerprint(t);
  store.context = build_matching_context(tpl);
  for (std::size_t n = 0; n < tpl.size(); ++n) {
    store.templates.push_back({tpl.id(n), tpl.label(n), tpl.columns().col(static_cast<Eigen::Index>(n))});
  }
  const std::string text = serialize_gallery(store);
  const GalleryStore back = parse_gallery(text);
  CHECK(back.transform_fingerprint == store.transform_fingerprint);
  CHECK(back.context.inverse() == store.context.inverse());
  REQUIRE(back.templates.size() == store.templates.size());
  for (std::size_t n = 0; n < back.templates.size(); ++n) {
    CHECK(back.templates[n].sample_id == store.templates[n].sample_id);
    CHECK(back.templates[n].label == store.templates[n].label);
    CHECK(back.templates[n].vector == store.templates[n].vector);
  }
  CHECK(serialize_gallery(back) == text);

  CHECK(code_of([&] { parse_gallery(text.substr(0, text.size() / 2)); }) == ErrorCode::kParse);
  CHECK_NOTHROW(ensure_fresh(back, t));
  const FeatureTransform other = learn_transform(Method::kPcaLda, data);
  CHECK(code_of([&] { ensure_fresh(back, other); }) == ErrorCode::kStale);
}
