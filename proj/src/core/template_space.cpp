#include "marginforge/template_space.hpp"

#include <spdlog/spdlog.h>

#include <cmath>
#include <limits>
#include <nlohmann/json.hpp>

#include "marginforge/error.hpp"
#include "marginforge/io.hpp"
#include "marginforge/scatter.hpp"

namespace marginforge {

using nlohmann::json;

MatchingContext::MatchingContext(Eigen::MatrixXd inverse, InverseSource source)
    : inverse_(std::move(inverse)), source_(source) {
  require(inverse_.rows() == inverse_.cols() && inverse_.rows() > 0,
          "matching context: inverse must be a nonempty square matrix");
  if (!inverse_.allFinite()) fail(ErrorCode::kSchema, "matching context: non-finite inverse");
  const double scale = inverse_.norm();
  if ((inverse_ - inverse_.transpose()).norm() > 1e-9 * scale) {
    fail(ErrorCode::kSchema, "matching context: inverse is not symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (inverse_ + inverse_.transpose()));
  if (!(eig.eigenvalues().minCoeff() > 0)) {
    fail(ErrorCode::kSchema, "matching context: inverse is not positive definite");
  }
  whitener_ = eig.eigenvalues().cwiseSqrt().asDiagonal() * eig.eigenvectors().transpose();
}

GaitTemplate extract_template(const FeatureTransform& transform, const FlatSample& sample) {
  require(sample.vector.size() == transform.input_dim(),
          "extract_template: sample dimension " + std::to_string(sample.vector.size()) +
              " does not match transform input " + std::to_string(transform.input_dim()));
  return GaitTemplate{sample.sample_id, sample.label, transform.phi.transpose() * sample.vector};
}

VectorSet extract_templates(const FeatureTransform& transform, const VectorSet& samples) {
  require(samples.dimension() == transform.input_dim(),
          "extract_templates: sample dimension does not match transform input");
  return VectorSet(transform.phi.transpose() * samples.columns(),
                   std::vector<std::string>(samples.ids().begin(), samples.ids().end()),
                   std::vector<std::string>(samples.labels().begin(), samples.labels().end()));
}

MatchingContext build_matching_context(const VectorSet& learning_templates) {
  const ScatterStatistics stats = compute_scatter(learning_templates);
  Eigen::MatrixXd total = stats.sigma_t;
  const Eigen::Index dim = total.rows();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(total);
  const double lmax = eig.eigenvalues().maxCoeff();
  const double lmin = eig.eigenvalues().minCoeff();
  if (!(lmax > 0)) fail(ErrorCode::kDegenerate, "feature-space total scatter is zero");

  InverseSource source = InverseSource::kExact;
  const double condition = lmin > 0 ? lmax / lmin : std::numeric_limits<double>::infinity();
  Eigen::VectorXd lambda = eig.eigenvalues();
  if (condition > 1e12) {
    const double ridge = 1e-10 * total.trace() / static_cast<double>(dim);
    lambda.array() += ridge;
    source = InverseSource::kRidge;
    spdlog::warn("matching context: condition number {:.3g} > 1e12, added ridge {:.3g}", condition, ridge);
  }
  // Negative round-off eigenvalues cannot survive the ridge, but clamp anyway.
  lambda = lambda.cwiseMax(std::numeric_limits<double>::min());
  Eigen::MatrixXd inverse =
      eig.eigenvectors() * lambda.cwiseInverse().asDiagonal() * eig.eigenvectors().transpose();
  inverse = (0.5 * (inverse + inverse.transpose())).eval();
  return MatchingContext(std::move(inverse), source);
}

double mahalanobis(const MatchingContext& context, const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  require(a.size() == context.dimension() && b.size() == context.dimension(),
          "mahalanobis: template dimension does not match context");
  const Eigen::VectorXd d = a - b;
  return std::sqrt(std::max(0.0, d.dot(context.inverse() * d)));
}

double mahalanobis(const MatchingContext& context, const GaitTemplate& a, const GaitTemplate& b) {
  return mahalanobis(context, a.vector, b.vector);
}

Eigen::MatrixXd whiten(const MatchingContext& context, const Eigen::MatrixXd& columns) {
  require(columns.rows() == context.dimension(), "whiten: dimension does not match context");
  return context.whitener() * columns;
}

void ensure_fresh(const GalleryStore& store, const FeatureTransform& transform) {
  const std::string fp = transform_fingerprint(transform);
  if (fp != store.transform_fingerprint) {
    fail(ErrorCode::kStale, "gallery was enrolled with transform " + store.transform_fingerprint +
                                " but the supplied transform is " + fp);
  }
}

std::string serialize_gallery(const GalleryStore& store) {
  json inverse = json::array();
  const auto& inv = store.context.inverse();
  for (Eigen::Index i = 0; i < inv.rows(); ++i) {
    for (Eigen::Index j = 0; j < inv.cols(); ++j) inverse.push_back(inv(i, j));
  }
  json templates = json::array();
  for (const auto& t : store.templates) {
    json v = json::array();
    for (Eigen::Index i = 0; i < t.vector.size(); ++i) v.push_back(t.vector[i]);
    templates.push_back({{"sample_id", t.sample_id}, {"label", t.label}, {"vector", std::move(v)}});
  }
  json doc = {{"transform_fingerprint", store.transform_fingerprint},
              {"context",
               {{"dim", inv.rows()},
                {"inverse", std::move(inverse)},
                {"source", store.context.source() == InverseSource::kRidge ? "ridge" : "exact"}}},
              {"templates", std::move(templates)}};
  return doc.dump();
}

GalleryStore parse_gallery(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    fail(ErrorCode::kParse, std::string("gallery: malformed JSON: ") + e.what());
  }
  try {
    GalleryStore store;
    store.transform_fingerprint = doc.at("transform_fingerprint").get<std::string>();
    const auto& ctx = doc.at("context");
    const auto dim = ctx.at("dim").get<Eigen::Index>();
    const auto& flat = ctx.at("inverse");
    if (dim < 1 || flat.size() != static_cast<std::size_t>(dim * dim)) {
      fail(ErrorCode::kSchema, "gallery: context inverse size does not match dim");
    }
    Eigen::MatrixXd inverse(dim, dim);
    for (Eigen::Index i = 0; i < dim; ++i) {
      for (Eigen::Index j = 0; j < dim; ++j) inverse(i, j) = flat.at(static_cast<std::size_t>(i * dim + j)).get<double>();
    }
    const std::string source = ctx.at("source").get<std::string>();
    if (source != "exact" && source != "ridge") fail(ErrorCode::kSchema, "gallery: unknown context source");
    store.context = MatchingContext(std::move(inverse), source == "ridge" ? InverseSource::kRidge : InverseSource::kExact);
    for (const auto& t : doc.at("templates")) {
      GaitTemplate g;
      g.sample_id = t.at("sample_id").get<std::string>();
      g.label = t.at("label").get<std::string>();
      const auto& v = t.at("vector");
      if (v.size() != static_cast<std::size_t>(dim)) fail(ErrorCode::kSchema, "gallery: template dimension mismatch");
      g.vector.resize(dim);
      for (Eigen::Index i = 0; i < dim; ++i) g.vector[i] = v.at(static_cast<std::size_t>(i)).get<double>();
      if (!g.vector.allFinite()) fail(ErrorCode::kSchema, "gallery: non-finite template");
      store.templates.push_back(std::move(g));
    }
    return store;
  } catch (const json::exception& e) {
    fail(ErrorCode::kSchema, std::string("gallery: ") + e.what());
  }
}

void save_gallery(const GalleryStore& store, const std::string& path) {
  write_text_file_atomic(path, serialize_gallery(store) + "\n");
}

GalleryStore load_gallery(const std::string& path) { return parse_gallery(read_text_file(path)); }

}  // namespace marginforge
