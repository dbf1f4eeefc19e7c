#pragma once

// Independent reference computations for tests. Nothing here calls the
// library code it is used to check.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <random>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "marginforge/classification.hpp"
#include "marginforge/dataset.hpp"

namespace oracle {

inline std::string label_of(std::size_t c) {
  std::string s = "c";
  if (c < 10) s += '0';
  return s + std::to_string(c);
}

// Gaussian classes with random sizes in [nc_min, nc_max].
inline marginforge::VectorSet random_classes(std::mt19937_64& rng, std::size_t classes, Eigen::Index dim,
                                             std::size_t nc_min, std::size_t nc_max, double spread = 3.0,
                                             double noise = 1.0) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> size(nc_min, nc_max);
  std::vector<Eigen::VectorXd> cols;
  std::vector<std::string> ids, labels;
  for (std::size_t c = 0; c < classes; ++c) {
    Eigen::VectorXd mean(dim);
    for (Eigen::Index i = 0; i < dim; ++i) mean[i] = spread * normal(rng);
    const std::size_t n = size(rng);
    for (std::size_t k = 0; k < n; ++k) {
      Eigen::VectorXd x(dim);
      for (Eigen::Index i = 0; i < dim; ++i) x[i] = mean[i] + noise * normal(rng);
      cols.push_back(x);
      ids.push_back(label_of(c) + "_" + std::to_string(k));
      labels.push_back(label_of(c));
    }
  }
  Eigen::MatrixXd m(dim, static_cast<Eigen::Index>(cols.size()));
  for (std::size_t k = 0; k < cols.size(); ++k) m.col(static_cast<Eigen::Index>(k)) = cols[k];
  return marginforge::VectorSet(std::move(m), std::move(ids), std::move(labels));
}

struct Scatter {
  Eigen::MatrixXd sb, sw, st;
  std::size_t classes = 0;
};

// Plain double loops over the definitions; no compensation, no factorization.
inline Scatter naive_scatter(const Eigen::MatrixXd& x, const std::vector<std::string>& labels) {
  std::map<std::string, std::vector<Eigen::Index>> groups;
  for (Eigen::Index n = 0; n < x.cols(); ++n) groups[labels[static_cast<std::size_t>(n)]].push_back(n);
  const Eigen::Index d = x.rows();
  Eigen::VectorXd mu = Eigen::VectorXd::Zero(d);
  for (Eigen::Index n = 0; n < x.cols(); ++n) mu += x.col(n);
  mu /= static_cast<double>(x.cols());
  Scatter s;
  s.classes = groups.size();
  s.sb = Eigen::MatrixXd::Zero(d, d);
  s.sw = Eigen::MatrixXd::Zero(d, d);
  s.st = Eigen::MatrixXd::Zero(d, d);
  for (const auto& [label, members] : groups) {
    Eigen::VectorXd mc = Eigen::VectorXd::Zero(d);
    for (Eigen::Index n : members) mc += x.col(n);
    mc /= static_cast<double>(members.size());
    s.sb += (mc - mu) * (mc - mu).transpose();
    Eigen::MatrixXd w = Eigen::MatrixXd::Zero(d, d);
    Eigen::MatrixXd t = Eigen::MatrixXd::Zero(d, d);
    for (Eigen::Index n : members) {
      w += (x.col(n) - mc) * (x.col(n) - mc).transpose();
      t += (x.col(n) - mu) * (x.col(n) - mu).transpose();
    }
    s.sw += w / static_cast<double>(members.size());
    s.st += t / static_cast<double>(members.size());
  }
  return s;
}

inline Scatter naive_scatter(const marginforge::VectorSet& set) {
  return naive_scatter(set.columns(), std::vector<std::string>(set.labels().begin(), set.labels().end()));
}

struct Subspace {
  Eigen::VectorXd values;   // descending
  Eigen::MatrixXd vectors;  // St-orthonormal columns
};

// Generalized eigenpairs of (Sb, St) on range(St): reduce both matrices to an
// orthonormal basis of range(St), then solve the definite reduced problem.
inline Subspace generalized_pairs(const Scatter& s) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(s.st);
  const Eigen::VectorXd& lam = eig.eigenvalues();
  const double tol = 1e-11 * lam.cwiseAbs().maxCoeff();
  std::vector<Eigen::Index> range;
  for (Eigen::Index i = 0; i < lam.size(); ++i) {
    if (lam[i] > tol) range.push_back(i);
  }
  Eigen::MatrixXd u(s.st.rows(), static_cast<Eigen::Index>(range.size()));
  for (std::size_t k = 0; k < range.size(); ++k) u.col(static_cast<Eigen::Index>(k)) = eig.eigenvectors().col(range[k]);
  const Eigen::MatrixXd a = u.transpose() * s.sb * u;
  const Eigen::MatrixXd b = u.transpose() * s.st * u;
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> gen(0.5 * (a + a.transpose()), 0.5 * (b + b.transpose()));
  const Eigen::Index r = a.rows();
  Subspace out;
  out.values.resize(r);
  out.vectors.resize(s.st.rows(), r);
  for (Eigen::Index k = 0; k < r; ++k) {
    out.values[k] = gen.eigenvalues()[r - 1 - k];
    out.vectors.col(k) = u * gen.eigenvectors().col(r - 1 - k);
  }
  return out;
}

// Columns with eigenvalue >= 1/2, at most classes - 1 of them; the top column
// alone when none qualifies.
inline Subspace margin_subspace(const Scatter& s) {
  const Subspace all = generalized_pairs(s);
  Eigen::Index keep = 0;
  while (keep < all.values.size() && keep < static_cast<Eigen::Index>(s.classes) - 1 && all.values[keep] >= 0.5) {
    ++keep;
  }
  if (keep == 0 && all.values.size() > 0) keep = 1;
  return Subspace{all.values.head(keep), all.vectors.leftCols(keep)};
}

inline Eigen::MatrixXd orthonormal_columns(const Eigen::MatrixXd& m) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeThinU);
  return svd.matrixU().leftCols(m.cols());
}

// Largest principal angle between two column spans of equal dimension, from
// sin(theta) = ||(I - Qa Qa^T) Qb||_2, which stays accurate for tiny angles.
inline double max_principal_angle(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  if (a.cols() != b.cols()) return std::numeric_limits<double>::infinity();
  if (a.cols() == 0) return 0.0;
  const Eigen::MatrixXd qa = orthonormal_columns(a);
  const Eigen::MatrixXd qb = orthonormal_columns(b);
  const Eigen::MatrixXd residual = qb - qa * (qa.transpose() * qb);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(residual);
  const double s = svd.singularValues().size() > 0 ? svd.singularValues()[0] : 0.0;
  return std::asin(std::min(1.0, s));
}

// ---- DTW -----------------------------------------------------------------

// Minimum over every monotone warping path with steps (1,0), (0,1), (1,1).
inline double dtw_by_paths(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, Eigen::Index i = 0, Eigen::Index j = 0) {
  const double here = (a.row(i) - b.row(j)).norm();
  if (i == a.rows() - 1 && j == b.rows() - 1) return here;
  double best = std::numeric_limits<double>::infinity();
  if (i + 1 < a.rows()) best = std::min(best, dtw_by_paths(a, b, i + 1, j));
  if (j + 1 < b.rows()) best = std::min(best, dtw_by_paths(a, b, i, j + 1));
  if (i + 1 < a.rows() && j + 1 < b.rows()) best = std::min(best, dtw_by_paths(a, b, i + 1, j + 1));
  return here + best;
}

// ---- metric curves --------------------------------------------------------

struct Rates {
  std::vector<double> thresholds;
  std::vector<double> far, frr;
};

// Every distinct distance as a threshold, counted by linear scans.
inline Rates exhaustive_rates(const std::vector<marginforge::DistanceRecord>& records) {
  std::set<double> distinct;
  for (const auto& r : records) distinct.insert(r.distance);
  Rates out;
  double genuine = 0, impostor = 0;
  for (const auto& r : records) (r.genuine ? genuine : impostor) += 1;
  for (double t : distinct) {
    double fa = 0, fr = 0;
    for (const auto& r : records) {
      if (r.genuine && r.distance > t) fr += 1;
      if (!r.genuine && r.distance <= t) fa += 1;
    }
    out.thresholds.push_back(t);
    out.far.push_back(fa / impostor);
    out.frr.push_back(fr / genuine);
  }
  return out;
}

// ROC polyline: (0,0), one (FAR, TAR) per threshold, (1,1); repeated
// consecutive points collapsed.
inline std::vector<std::pair<double, double>> exhaustive_roc(const std::vector<marginforge::DistanceRecord>& records) {
  std::set<double> distinct;
  double genuine = 0, impostor = 0;
  for (const auto& r : records) {
    distinct.insert(r.distance);
    (r.genuine ? genuine : impostor) += 1;
  }
  std::vector<std::pair<double, double>> pts = {{0.0, 0.0}};
  for (double t : distinct) {
    double fa = 0, ta = 0;
    for (const auto& r : records) {
      if (r.distance <= t) (r.genuine ? ta : fa) += 1;
    }
    pts.emplace_back(fa / impostor, ta / genuine);
  }
  pts.emplace_back(1.0, 1.0);
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  return pts;
}

// Precision/recall polyline keeping, per recall, the value at the smallest
// threshold; prefixed with (0, first precision).
inline std::vector<std::pair<double, double>> exhaustive_pr(const std::vector<marginforge::DistanceRecord>& records) {
  std::set<double> distinct;
  double genuine = 0;
  for (const auto& r : records) {
    distinct.insert(r.distance);
    if (r.genuine) genuine += 1;
  }
  std::vector<std::pair<double, double>> pts;
  for (double t : distinct) {
    double tp = 0, accepted = 0;
    for (const auto& r : records) {
      if (r.distance <= t) {
        accepted += 1;
        if (r.genuine) tp += 1;
      }
    }
    if (tp == 0) continue;
    const double recall = tp / genuine;
    if (!pts.empty() && pts.back().first == recall) continue;
    if (pts.empty()) pts.emplace_back(0.0, tp / accepted);
    pts.emplace_back(recall, tp / accepted);
  }
  return pts;
}

inline double trapezoid(const std::vector<std::pair<double, double>>& pts) {
  double area = 0;
  for (std::size_t k = 1; k < pts.size(); ++k) {
    area += (pts[k].first - pts[k - 1].first) * (pts[k].second + pts[k - 1].second) / 2;
  }
  return area;
}

// Rank of each probe's true class among classes sorted by their best
// (distance, gallery_id); CMC point k = fraction of probes with rank <= k.
inline std::vector<double> exhaustive_cmc(const std::vector<marginforge::DistanceRecord>& records) {
  std::map<std::string, std::map<std::string, std::pair<double, std::string>>> best;
  std::map<std::string, std::string> truth;
  std::set<std::string> classes;
  for (const auto& r : records) {
    classes.insert(r.gallery_label);
    auto key = std::make_pair(r.distance, r.gallery_id);
    auto& slot = best[r.probe_id];
    auto it = slot.find(r.gallery_label);
    if (it == slot.end() || key < it->second) slot[r.gallery_label] = key;
    if (r.genuine) truth[r.probe_id] = r.gallery_label;
  }
  std::vector<double> cmc(classes.size(), 0.0);
  for (const auto& [probe, per_class] : best) {
    std::vector<std::tuple<double, std::string, std::string>> order;
    for (const auto& [label, key] : per_class) order.emplace_back(key.first, key.second, label);
    std::sort(order.begin(), order.end());
    auto t = truth.find(probe);
    if (t == truth.end()) continue;
    for (std::size_t k = 0; k < order.size(); ++k) {
      if (std::get<2>(order[k]) == t->second) {
        for (std::size_t r = k; r < cmc.size(); ++r) cmc[r] += 1;
        break;
      }
    }
  }
  for (double& v : cmc) v /= static_cast<double>(best.size());
  return cmc;
}

}  // namespace oracle
