#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "marginforge/dataset.hpp"
#include "marginforge/template_space.hpp"

namespace marginforge {

/// Class-separability coefficients of labeled templates under a Mahalanobis
/// context. A zero denominator yields +infinity and a warning.
struct SeparabilityReport {
  double dbi = 0;
  double di = 0;
  double sc = 0;
  double fdr = 0;
  std::vector<double> class_sigma;   // mean member-to-centroid distance per class
  Eigen::MatrixXd class_centroids;  // feature_dim x C
  std::vector<std::string> warnings;
};

double davies_bouldin(const VectorSet& templates, const MatchingContext& context);
double dunn(const VectorSet& templates, const MatchingContext& context);
// a(x) averages over all N_c members of x's class, x itself included.
double silhouette(const VectorSet& templates, const MatchingContext& context);
double fisher_ratio(const VectorSet& templates, const MatchingContext& context);

SeparabilityReport compute_separability(const VectorSet& templates, const MatchingContext& context);

}  // namespace marginforge
