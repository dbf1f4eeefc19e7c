#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "marginforge/dataset.hpp"
#include "marginforge/scatter.hpp"

namespace marginforge {

enum class Method { kMmc, kPcaLda, kIdentity };

const char* method_name(Method method) noexcept;  // "mmc", "pca_lda", "identity"
Method parse_method(std::string_view name);       // also accepts "pca-lda"

/// Learned linear feature map: templates are phi^T * x.
struct FeatureTransform {
  Method method = Method::kMmc;
  Eigen::MatrixXd phi;    // input_dim x feature_dim
  Eigen::VectorXd delta;  // eigenvalue of each kept column
  bool fallback_used = false;
  bool ridge_used = false;
  std::vector<std::string> warnings;  // in-memory only, not serialized

  Eigen::Index input_dim() const noexcept { return phi.rows(); }
  Eigen::Index feature_dim() const noexcept { return phi.cols(); }
};

struct EigenSelection {
  std::vector<Eigen::Index> kept_indices;
  std::size_t discarded_count = 0;
  bool fallback_used = false;
};

// Keeps every index with delta >= 1/2 (exact comparison), at most `max_kept`.
// With nothing eligible, keeps the single largest and flags the fallback.
EigenSelection select_margin_eigenvalues(const Eigen::VectorXd& delta, std::size_t max_kept);

/// Simultaneous diagonalizer of (Sb, St) from the two-step SVD route:
/// psi^T St psi = I and psi^T Sb psi = diag(delta), delta sorted descending.
struct MmcEigenbasis {
  Eigen::MatrixXd psi;
  Eigen::VectorXd delta;
  Eigen::Index rank = 0;         // numerical rank of St
  double offdiag_frobenius = 0;  // of psi^T Sb psi
};

MmcEigenbasis mmc_eigenbasis(const ScatterStatistics& stats, const VectorSet& data);

FeatureTransform learn_mmc(const ScatterStatistics& stats, const VectorSet& data);

/// Test oracle: generalized eigenpairs of Sb v = delta St v on range(St),
/// from a dense eigendecomposition of St. Eigenvalues sorted descending,
/// eigenvectors St-orthonormal.
struct EigenPairs {
  Eigen::VectorXd values;
  Eigen::MatrixXd vectors;
};

EigenPairs oracle_eigen(const ScatterStatistics& stats);

// tr(phi^T (Sb - Sw) phi)
double mmc_objective(const Eigen::MatrixXd& phi, const ScatterStatistics& stats);
double mmc_objective(const FeatureTransform& transform, const ScatterStatistics& stats);

// PCA to `pca_dim` components (default C), then LDA on the projected scatters.
FeatureTransform learn_pcalda(const ScatterStatistics& stats, const VectorSet& data,
                              std::optional<std::size_t> pca_dim = std::nullopt);

FeatureTransform identity_transform(Eigen::Index dim);

FeatureTransform learn_transform(Method method, const VectorSet& data,
                                 std::optional<std::size_t> pca_dim = std::nullopt);

// Flips each column so its largest-magnitude entry (first on ties) is positive.
void canonicalize_signs(Eigen::MatrixXd& columns);

std::string serialize_transform(const FeatureTransform& transform);
FeatureTransform parse_transform(std::string_view text);
void save_transform(const FeatureTransform& transform, const std::string& path);
FeatureTransform load_transform(const std::string& path);

// FNV-1a of the serialized form, as 16 hex digits.
std::string transform_fingerprint(const FeatureTransform& transform);

}  // namespace marginforge
