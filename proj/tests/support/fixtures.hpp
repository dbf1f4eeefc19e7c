#pragma once

#include <Eigen/Dense>
#include <random>
#include <string>
#include <vector>

#include "marginforge/dataset.hpp"

namespace fixture {

// Labeled columns with ids "n0", "n1", ...
inline marginforge::VectorSet set(const Eigen::MatrixXd& columns, const std::vector<std::string>& labels) {
  std::vector<std::string> ids;
  for (std::size_t n = 0; n < labels.size(); ++n) ids.push_back("n" + std::to_string(n));
  return marginforge::VectorSet(columns, ids, labels);
}

inline Eigen::MatrixXd row(std::initializer_list<double> values) {
  Eigen::MatrixXd m(1, static_cast<Eigen::Index>(values.size()));
  Eigen::Index i = 0;
  for (double v : values) m(0, i++) = v;
  return m;
}

inline Eigen::MatrixXd random_orthogonal(std::mt19937_64& rng, Eigen::Index d) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::MatrixXd a(d, d);
  for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = n(rng);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
  return qr.householderQ() * Eigen::MatrixXd::Identity(d, d);
}

}  // namespace fixture
