#include "marginforge/learners.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <nlohmann/json.hpp>
#include <numeric>

#include "marginforge/error.hpp"
#include "marginforge/io.hpp"

namespace marginforge {

using nlohmann::json;

const char* method_name(Method method) noexcept {
  switch (method) {
    case Method::kMmc: return "mmc";
    case Method::kPcaLda: return "pca_lda";
    case Method::kIdentity: return "identity";
  }
  return "unknown";
}

Method parse_method(std::string_view name) {
  if (name == "mmc") return Method::kMmc;
  if (name == "pca_lda" || name == "pca-lda") return Method::kPcaLda;
  if (name == "identity") return Method::kIdentity;
  fail(ErrorCode::kInvalidArgument, "unknown method '" + std::string(name) + "'");
}

void canonicalize_signs(Eigen::MatrixXd& columns) {
  for (Eigen::Index j = 0; j < columns.cols(); ++j) {
    Eigen::Index arg = 0;
    double best = -1;
    for (Eigen::Index i = 0; i < columns.rows(); ++i) {
      const double a = std::abs(columns(i, j));
      if (a > best) {
        best = a;
        arg = i;
      }
    }
    if (columns(arg, j) < 0) columns.col(j) *= -1.0;
  }
}

EigenSelection select_margin_eigenvalues(const Eigen::VectorXd& delta, std::size_t max_kept) {
  EigenSelection sel;
  for (Eigen::Index i = 0; i < delta.size(); ++i) {
    if (delta[i] >= 0.5 && sel.kept_indices.size() < max_kept) sel.kept_indices.push_back(i);
  }
  if (sel.kept_indices.empty() && delta.size() > 0) {
    Eigen::Index top = 0;
    delta.maxCoeff(&top);
    sel.kept_indices.push_back(top);
    sel.fallback_used = true;
  }
  sel.discarded_count = static_cast<std::size_t>(delta.size()) - sel.kept_indices.size();
  return sel;
}

MmcEigenbasis mmc_eigenbasis(const ScatterStatistics& stats, const VectorSet& data) {
  const Eigen::MatrixXd x = total_scatter_factor(stats, data);
  const Eigen::MatrixXd upsilon = between_scatter_factor(stats);

  // St = X X^T: Omega = left singular vectors, Theta = squared singular values.
  Eigen::BDCSVD<Eigen::MatrixXd> svd_x(x, Eigen::ComputeThinU);
  const Eigen::VectorXd& s = svd_x.singularValues();
  const double s_max = s.size() > 0 ? s[0] : 0.0;
  if (!(s_max > 0) || !std::isfinite(s_max)) {
    fail(ErrorCode::kDegenerate, "total scatter is numerically zero; MMC is undefined");
  }
  const double tol = static_cast<double>(std::max(x.rows(), x.cols())) *
                     std::numeric_limits<double>::epsilon() * s_max;
  Eigen::Index rank = 0;
  while (rank < s.size() && s[rank] > tol) ++rank;

  const Eigen::MatrixXd omega = svd_x.matrixU().leftCols(rank);
  const Eigen::VectorXd inv_sqrt_theta = s.head(rank).cwiseInverse();

  // Xi = left singular vectors of Theta^{-1/2} Omega^T Upsilon.
  const Eigen::MatrixXd whitened_between = inv_sqrt_theta.asDiagonal() * (omega.transpose() * upsilon);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd_b(whitened_between, Eigen::ComputeThinU);
  const Eigen::MatrixXd& xi = svd_b.matrixU();

  Eigen::MatrixXd psi = omega * (inv_sqrt_theta.asDiagonal() * xi);
  const Eigen::MatrixXd projected = psi.transpose() * stats.sigma_b * psi;
  Eigen::VectorXd delta = projected.diagonal();

  // Order columns by delta, descending; stable so ties keep SVD order.
  std::vector<Eigen::Index> order(static_cast<std::size_t>(delta.size()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index a, Eigen::Index b) { return delta[a] > delta[b]; });

  MmcEigenbasis basis;
  basis.rank = rank;
  basis.psi.resize(psi.rows(), psi.cols());
  basis.delta.resize(delta.size());
  for (std::size_t k = 0; k < order.size(); ++k) {
    basis.psi.col(static_cast<Eigen::Index>(k)) = psi.col(order[k]);
    basis.delta[static_cast<Eigen::Index>(k)] = delta[order[k]];
  }
  Eigen::MatrixXd off = projected;
  off.diagonal().setZero();
  basis.offdiag_frobenius = off.norm();
  return basis;
}

FeatureTransform learn_mmc(const ScatterStatistics& stats, const VectorSet& data) {
  if (stats.class_count() < 2) fail(ErrorCode::kTooFewClasses, "MMC needs at least 2 classes");
  const MmcEigenbasis basis = mmc_eigenbasis(stats, data);
  const EigenSelection sel = select_margin_eigenvalues(basis.delta, stats.class_count() - 1);

  FeatureTransform t;
  t.method = Method::kMmc;
  t.fallback_used = sel.fallback_used;
  t.phi.resize(basis.psi.rows(), static_cast<Eigen::Index>(sel.kept_indices.size()));
  t.delta.resize(static_cast<Eigen::Index>(sel.kept_indices.size()));
  for (std::size_t k = 0; k < sel.kept_indices.size(); ++k) {
    t.phi.col(static_cast<Eigen::Index>(k)) = basis.psi.col(sel.kept_indices[k]);
    t.delta[static_cast<Eigen::Index>(k)] = basis.delta[sel.kept_indices[k]];
  }
  canonicalize_signs(t.phi);
  if (basis.offdiag_frobenius > 1e-6) {
    t.warnings.push_back("mmc: off-diagonal part of psi^T Sb psi has Frobenius norm " +
                         std::to_string(basis.offdiag_frobenius));
    spdlog::warn("{}", t.warnings.back());
  }
  if (sel.fallback_used) {
    t.warnings.push_back("mmc: no eigenvalue >= 1/2, kept the largest (" +
                         std::to_string(t.delta[0]) + ")");
    spdlog::warn("{}", t.warnings.back());
  }
  spdlog::debug("mmc: rank(St)={} kept {} of {} directions", basis.rank, t.feature_dim(),
                basis.delta.size());
  return t;
}

EigenPairs oracle_eigen(const ScatterStatistics& stats) {
  const Eigen::Index dim = stats.dimension();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> total(stats.sigma_t);
  const Eigen::VectorXd& lambda = total.eigenvalues();  // ascending
  const double lambda_max = lambda.size() > 0 ? lambda[lambda.size() - 1] : 0.0;
  EigenPairs out;
  if (!(lambda_max > 0)) return out;
  const double tol = static_cast<double>(dim) * std::numeric_limits<double>::epsilon() * lambda_max;

  std::vector<Eigen::Index> range;
  for (Eigen::Index i = lambda.size() - 1; i >= 0; --i) {
    if (lambda[i] > tol) range.push_back(i);
  }
  Eigen::MatrixXd whiten(dim, static_cast<Eigen::Index>(range.size()));
  for (std::size_t k = 0; k < range.size(); ++k) {
    whiten.col(static_cast<Eigen::Index>(k)) =
        total.eigenvectors().col(range[k]) / std::sqrt(lambda[range[k]]);
  }
  Eigen::MatrixXd m = whiten.transpose() * stats.sigma_b * whiten;
  m = 0.5 * (m + m.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> reduced(m);
  out.values = reduced.eigenvalues().reverse();
  out.vectors = whiten * reduced.eigenvectors().rowwise().reverse();
  return out;
}

double mmc_objective(const Eigen::MatrixXd& phi, const ScatterStatistics& stats) {
  require(phi.rows() == stats.dimension(), "mmc_objective: dimension mismatch");
  return (phi.transpose() * (stats.sigma_b - stats.sigma_w) * phi).trace();
}

double mmc_objective(const FeatureTransform& transform, const ScatterStatistics& stats) {
  return mmc_objective(transform.phi, stats);
}

FeatureTransform learn_pcalda(const ScatterStatistics& stats, const VectorSet& data,
                              std::optional<std::size_t> pca_dim) {
  const std::size_t classes = stats.class_count();
  if (classes < 2) fail(ErrorCode::kTooFewClasses, "PCA+LDA needs at least 2 classes");
  const std::size_t n = data.size();
  const std::size_t dim = static_cast<std::size_t>(stats.dimension());
  const std::size_t k = pca_dim.value_or(classes);
  require(k >= classes && k + classes <= n,
          "learn_pcalda: pca_dim must satisfy C <= pca_dim <= N - C (C=" + std::to_string(classes) +
              ", N=" + std::to_string(n) + ", pca_dim=" + std::to_string(k) + ")");
  require(k <= dim, "learn_pcalda: pca_dim exceeds the input dimension");

  // Leading eigenvectors of St via the SVD of its factor X (X X^T = St).
  const Eigen::MatrixXd x = total_scatter_factor(stats, data);
  Eigen::BDCSVD<Eigen::MatrixXd> svd_x(x, Eigen::ComputeThinU);
  if (!(svd_x.singularValues().size() > 0 && svd_x.singularValues()[0] > 0)) {
    fail(ErrorCode::kDegenerate, "total scatter is numerically zero; PCA+LDA is undefined");
  }
  const Eigen::Index kk = static_cast<Eigen::Index>(k);
  const Eigen::MatrixXd pca = svd_x.matrixU().leftCols(kk);

  Eigen::MatrixXd sw = pca.transpose() * stats.sigma_w * pca;
  Eigen::MatrixXd sb = pca.transpose() * stats.sigma_b * pca;
  sw = 0.5 * (sw + sw.transpose()).eval();
  sb = 0.5 * (sb + sb.transpose()).eval();

  FeatureTransform t;
  t.method = Method::kPcaLda;

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> sw_eig(sw, Eigen::EigenvaluesOnly);
  const double sw_max = sw_eig.eigenvalues().maxCoeff();
  const double sw_min = sw_eig.eigenvalues().minCoeff();
  if (!(sw_max > 0) || sw_min <= 1e-12 * sw_max) {
    double trace = sw.trace();
    if (!(trace > 0)) trace = (pca.transpose() * stats.sigma_t * pca).trace();
    if (!(trace > 0)) fail(ErrorCode::kDegenerate, "PCA+LDA: projected scatter is zero");
    const double ridge = 1e-8 * trace / static_cast<double>(k);
    sw.diagonal().array() += ridge;
    t.ridge_used = true;
    t.warnings.push_back("pca_lda: projected within-class scatter singular, added ridge " +
                         std::to_string(ridge));
    spdlog::warn("{}", t.warnings.back());
  }

  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> lda(sb, sw);
  if (lda.info() != Eigen::Success) {
    fail(ErrorCode::kDegenerate, "PCA+LDA: generalized eigenproblem failed");
  }
  const Eigen::VectorXd values = lda.eigenvalues().reverse();
  const Eigen::MatrixXd vectors = lda.eigenvectors().rowwise().reverse();
  const double top = values[0];
  Eigen::Index keep = 0;
  const Eigen::Index max_keep = static_cast<Eigen::Index>(classes - 1);
  while (keep < max_keep && keep < values.size() && top > 0 && values[keep] > 1e-12 * top) ++keep;
  if (keep == 0) {
    keep = 1;
    t.fallback_used = true;
    t.warnings.push_back("pca_lda: no positive discriminant eigenvalue, kept the largest");
    spdlog::warn("{}", t.warnings.back());
  }
  t.phi = pca * vectors.leftCols(keep);
  t.delta = values.head(keep);
  canonicalize_signs(t.phi);
  return t;
}

FeatureTransform identity_transform(Eigen::Index dim) {
  FeatureTransform t;
  t.method = Method::kIdentity;
  t.phi = Eigen::MatrixXd::Identity(dim, dim);
  t.delta = Eigen::VectorXd::Ones(dim);
  return t;
}

FeatureTransform learn_transform(Method method, const VectorSet& data,
                                 std::optional<std::size_t> pca_dim) {
  if (method == Method::kIdentity) return identity_transform(data.dimension());
  const ScatterStatistics stats = compute_scatter(data);
  return method == Method::kMmc ? learn_mmc(stats, data) : learn_pcalda(stats, data, pca_dim);
}

namespace {

json to_json(const FeatureTransform& t) {
  json phi = json::array();
  for (Eigen::Index i = 0; i < t.phi.rows(); ++i) {
    for (Eigen::Index j = 0; j < t.phi.cols(); ++j) phi.push_back(t.phi(i, j));
  }
  json delta = json::array();
  for (Eigen::Index i = 0; i < t.delta.size(); ++i) delta.push_back(t.delta[i]);
  return json{{"method", method_name(t.method)},
              {"input_dim", t.input_dim()},
              {"feature_dim", t.feature_dim()},
              {"delta", std::move(delta)},
              {"phi", std::move(phi)},
              {"fallback_used", t.fallback_used},
              {"ridge_used", t.ridge_used}};
}

}  // namespace

std::string serialize_transform(const FeatureTransform& transform) {
  return to_json(transform).dump();
}

FeatureTransform parse_transform(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    fail(ErrorCode::kParse, std::string("transform: malformed JSON: ") + e.what());
  }
  try {
    FeatureTransform t;
    t.method = parse_method(doc.at("method").get<std::string>());
    const auto in = doc.at("input_dim").get<Eigen::Index>();
    const auto out = doc.at("feature_dim").get<Eigen::Index>();
    const auto& phi = doc.at("phi");
    const auto& delta = doc.at("delta");
    if (in < 1 || out < 1 || phi.size() != static_cast<std::size_t>(in * out) ||
        delta.size() != static_cast<std::size_t>(out)) {
      fail(ErrorCode::kSchema, "transform: dimensions do not match array sizes");
    }
    t.phi.resize(in, out);
    for (Eigen::Index i = 0; i < in; ++i) {
      for (Eigen::Index j = 0; j < out; ++j) {
        t.phi(i, j) = phi.at(static_cast<std::size_t>(i * out + j)).get<double>();
      }
    }
    t.delta.resize(out);
    for (Eigen::Index j = 0; j < out; ++j) t.delta[j] = delta.at(static_cast<std::size_t>(j)).get<double>();
    t.fallback_used = doc.at("fallback_used").get<bool>();
    t.ridge_used = doc.at("ridge_used").get<bool>();
    if (!t.phi.allFinite() || !t.delta.allFinite()) fail(ErrorCode::kSchema, "transform: non-finite entries");
    return t;
  } catch (const json::exception& e) {
    fail(ErrorCode::kSchema, std::string("transform: ") + e.what());
  }
}

void save_transform(const FeatureTransform& transform, const std::string& path) {
  write_text_file_atomic(path, serialize_transform(transform) + "\n");
}

FeatureTransform load_transform(const std::string& path) { return parse_transform(read_text_file(path)); }

std::string transform_fingerprint(const FeatureTransform& transform) {
  return hex64(fnv1a64(serialize_transform(transform)));
}

}  // namespace marginforge
