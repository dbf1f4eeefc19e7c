#pragma once

#include <Eigen/Dense>
#include <string>
#include <string_view>
#include <vector>

#include "marginforge/dataset.hpp"
#include "marginforge/learners.hpp"

namespace marginforge {

struct GaitTemplate {
  std::string sample_id;
  std::string label;
  Eigen::VectorXd vector;
};

enum class InverseSource { kExact, kRidge };

/// Inverse feature-space total scatter used by the Mahalanobis distance.
/// Immutable; `whitener` W satisfies W^T W = inverse, so the Mahalanobis
/// distance equals the Euclidean distance between W a and W b.
class MatchingContext {
 public:
  MatchingContext() = default;
  // Validates symmetry (1e-9 relative) and positive eigenvalues.
  MatchingContext(Eigen::MatrixXd inverse, InverseSource source);

  const Eigen::MatrixXd& inverse() const noexcept { return inverse_; }
  const Eigen::MatrixXd& whitener() const noexcept { return whitener_; }
  InverseSource source() const noexcept { return source_; }
  Eigen::Index dimension() const noexcept { return inverse_.rows(); }

 private:
  Eigen::MatrixXd inverse_;
  Eigen::MatrixXd whitener_;
  InverseSource source_ = InverseSource::kExact;
};

GaitTemplate extract_template(const FeatureTransform& transform, const FlatSample& sample);
VectorSet extract_templates(const FeatureTransform& transform, const VectorSet& samples);

/// Inverts the total scatter of the given labeled templates. If its condition
/// number exceeds 1e12, a ridge of 1e-10 * tr / dim is added first.
MatchingContext build_matching_context(const VectorSet& learning_templates);

double mahalanobis(const MatchingContext& context, const Eigen::VectorXd& a, const Eigen::VectorXd& b);
double mahalanobis(const MatchingContext& context, const GaitTemplate& a, const GaitTemplate& b);

// Applies the context's whitener to every column.
Eigen::MatrixXd whiten(const MatchingContext& context, const Eigen::MatrixXd& columns);

struct GalleryStore {
  std::string transform_fingerprint;
  MatchingContext context;
  std::vector<GaitTemplate> templates;
};

// Throws kStale if the store was built with a different transform.
void ensure_fresh(const GalleryStore& store, const FeatureTransform& transform);

std::string serialize_gallery(const GalleryStore& store);
GalleryStore parse_gallery(std::string_view text);
void save_gallery(const GalleryStore& store, const std::string& path);
GalleryStore load_gallery(const std::string& path);

}  // namespace marginforge
