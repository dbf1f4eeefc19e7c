#include "marginforge/separability.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include "marginforge/error.hpp"

namespace marginforge {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Templates and centroids in whitened coordinates, where the Mahalanobis
// distance is Euclidean.
struct Geometry {
  Eigen::MatrixXd points;
  Eigen::MatrixXd centroids;
  Eigen::VectorXd overall;
  std::vector<double> sigma;
};

Geometry geometry(const VectorSet& templates, const MatchingContext& context) {
  if (templates.class_count() < 2) {
    fail(ErrorCode::kTooFewClasses, "separability coefficients need at least 2 classes");
  }
  Geometry g;
  g.points = whiten(context, templates.columns());
  const std::size_t classes = templates.class_count();
  g.centroids.resize(g.points.rows(), static_cast<Eigen::Index>(classes));
  for (std::size_t c = 0; c < classes; ++c) {
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(g.points.rows());
    const auto members = templates.class_members(c);
    for (std::size_t n : members) sum += g.points.col(static_cast<Eigen::Index>(n));
    g.centroids.col(static_cast<Eigen::Index>(c)) = sum / static_cast<double>(members.size());
  }
  g.overall = g.points.rowwise().mean();
  g.sigma.resize(classes);
  for (std::size_t c = 0; c < classes; ++c) {
    double total = 0;
    const auto members = templates.class_members(c);
    for (std::size_t n : members) {
      total += (g.points.col(static_cast<Eigen::Index>(n)) - g.centroids.col(static_cast<Eigen::Index>(c))).norm();
    }
    g.sigma[c] = total / static_cast<double>(members.size());
  }
  return g;
}

double centroid_distance(const Geometry& g, std::size_t a, std::size_t b) {
  return (g.centroids.col(static_cast<Eigen::Index>(a)) - g.centroids.col(static_cast<Eigen::Index>(b))).norm();
}

double dbi_of(const Geometry& g) {
  const std::size_t classes = g.sigma.size();
  double total = 0;
  for (std::size_t c = 0; c < classes; ++c) {
    double worst = 0;
    for (std::size_t o = 0; o < classes; ++o) {
      if (o == c) continue;
      const double d = centroid_distance(g, c, o);
      if (!(d > 0)) return kInf;
      worst = std::max(worst, (g.sigma[c] + g.sigma[o]) / d);
    }
    total += worst;
  }
  return total / static_cast<double>(classes);
}

double di_of(const Geometry& g) {
  const std::size_t classes = g.sigma.size();
  double nearest = kInf;
  for (std::size_t c = 0; c < classes; ++c) {
    for (std::size_t o = c + 1; o < classes; ++o) nearest = std::min(nearest, centroid_distance(g, c, o));
  }
  const double spread = *std::max_element(g.sigma.begin(), g.sigma.end());
  if (!(spread > 0)) return kInf;
  return nearest / spread;
}

double fdr_of(const Geometry& g, const VectorSet& templates) {
  const std::size_t classes = g.sigma.size();
  double between = 0;
  for (std::size_t c = 0; c < classes; ++c) {
    between += (g.centroids.col(static_cast<Eigen::Index>(c)) - g.overall).norm();
  }
  between /= static_cast<double>(classes);
  double within = 0;
  for (std::size_t c = 0; c < classes; ++c) {
    within += g.sigma[c] * static_cast<double>(templates.class_members(c).size());
  }
  within /= static_cast<double>(templates.size());
  if (!(within > 0)) return kInf;
  return between / within;
}

double sc_of(const Geometry& g, const VectorSet& templates) {
  const std::size_t n = templates.size();
  const std::size_t classes = templates.class_count();
  double total = 0;
  std::vector<double> class_sum(classes);
  for (std::size_t i = 0; i < n; ++i) {
    std::fill(class_sum.begin(), class_sum.end(), 0.0);
    const auto xi = g.points.col(static_cast<Eigen::Index>(i));
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      class_sum[templates.class_of(j)] += (xi - g.points.col(static_cast<Eigen::Index>(j))).norm();
    }
    const std::size_t own = templates.class_of(i);
    const double a = class_sum[own] / static_cast<double>(templates.class_members(own).size());
    double b = kInf;
    for (std::size_t c = 0; c < classes; ++c) {
      if (c == own) continue;
      b = std::min(b, class_sum[c] / static_cast<double>(templates.class_members(c).size()));
    }
    const double denom = std::max(a, b);
    if (denom > 0) total += (b - a) / denom;
  }
  return total / static_cast<double>(n);
}

}  // namespace

double davies_bouldin(const VectorSet& templates, const MatchingContext& context) {
  return dbi_of(geometry(templates, context));
}

double dunn(const VectorSet& templates, const MatchingContext& context) {
  return di_of(geometry(templates, context));
}

double silhouette(const VectorSet& templates, const MatchingContext& context) {
  return sc_of(geometry(templates, context), templates);
}

double fisher_ratio(const VectorSet& templates, const MatchingContext& context) {
  return fdr_of(geometry(templates, context), templates);
}

SeparabilityReport compute_separability(const VectorSet& templates, const MatchingContext& context) {
  Geometry g = geometry(templates, context);
  SeparabilityReport r;
  r.dbi = dbi_of(g);
  r.di = di_of(g);
  r.sc = sc_of(g, templates);
  r.fdr = fdr_of(g, templates);
  const auto note = [&](double value, const char* name, const char* why) {
    if (!std::isfinite(value)) {
      r.warnings.push_back(std::string(name) + " is infinite: " + why);
      spdlog::warn("{}", r.warnings.back());
    }
  };
  note(r.dbi, "DBI", "coincident class centroids");
  note(r.di, "DI", "every class has zero spread");
  note(r.fdr, "FDR", "all templates sit on their class centroids");
  r.class_sigma = g.sigma;
  // Report centroids in feature coordinates, not whitened ones.
  r.class_centroids.resize(templates.dimension(), static_cast<Eigen::Index>(templates.class_count()));
  for (std::size_t c = 0; c < templates.class_count(); ++c) {
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(templates.dimension());
    for (std::size_t n : templates.class_members(c)) sum += templates.columns().col(static_cast<Eigen::Index>(n));
    r.class_centroids.col(static_cast<Eigen::Index>(c)) = sum / static_cast<double>(templates.class_members(c).size());
  }
  return r;
}

}  // namespace marginforge
