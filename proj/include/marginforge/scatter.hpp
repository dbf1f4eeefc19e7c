#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <string>
#include <vector>

#include "marginforge/dataset.hpp"

namespace marginforge {

/// Class means and scatter matrices of a labeled vector set.
///
/// Conventions (these matter for the MMC objective tr(Sb - Sw)):
///   Sb = sum_c (mu_c - mu)(mu_c - mu)^T            (not weighted by N_c)
///   Sw = sum_c 1/N_c sum_{n in c} (x_n - mu_c)(x_n - mu_c)^T
///   St = sum_c 1/N_c sum_{n in c} (x_n - mu)(x_n - mu)^T  = Sb + Sw
/// with mu the plain mean of all N samples.
struct ScatterStatistics {
  std::vector<std::string> classes;
  std::vector<std::size_t> class_sizes;
  Eigen::MatrixXd class_means;  // D x C
  Eigen::VectorXd overall_mean;
  Eigen::MatrixXd sigma_b;
  Eigen::MatrixXd sigma_w;
  Eigen::MatrixXd sigma_t;

  Eigen::Index dimension() const noexcept { return overall_mean.size(); }
  std::size_t class_count() const noexcept { return classes.size(); }
};

// Requires >= 2 classes; accumulates in sample order with compensated sums.
ScatterStatistics compute_scatter(const VectorSet& data);

// X = [(x_n - mu) / sqrt(N_{c(n)})], so X X^T = St.
Eigen::MatrixXd total_scatter_factor(const ScatterStatistics& stats, const VectorSet& data);

// Upsilon = [(mu_c - mu)], so Upsilon Upsilon^T = Sb.
Eigen::MatrixXd between_scatter_factor(const ScatterStatistics& stats);

}  // namespace marginforge
