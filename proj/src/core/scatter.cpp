#include "marginforge/scatter.hpp"

#include "marginforge/error.hpp"

namespace marginforge {

namespace {

// Kahan-compensated accumulator of weighted rank-one updates, upper triangle.
class CompensatedOuterSum {
 public:
  explicit CompensatedOuterSum(Eigen::Index dim)
      : sum_(Eigen::MatrixXd::Zero(dim, dim)), carry_(Eigen::MatrixXd::Zero(dim, dim)) {}

  void add(const Eigen::VectorXd& v, double weight) {
    const Eigen::Index dim = v.size();
    for (Eigen::Index j = 0; j < dim; ++j) {
      const double vj = weight * v[j];
      for (Eigen::Index i = 0; i <= j; ++i) {
        const double y = v[i] * vj - carry_(i, j);
        const double t = sum_(i, j) + y;
        carry_(i, j) = (t - sum_(i, j)) - y;
        sum_(i, j) = t;
      }
    }
  }

  Eigen::MatrixXd symmetric() const {
    Eigen::MatrixXd out = sum_;
    out.triangularView<Eigen::StrictlyLower>() = sum_.transpose().triangularView<Eigen::StrictlyLower>();
    return out;
  }

 private:
  Eigen::MatrixXd sum_;
  Eigen::MatrixXd carry_;
};

Eigen::VectorXd compensated_mean(const Eigen::MatrixXd& columns, std::span<const std::size_t> which) {
  const Eigen::Index dim = columns.rows();
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(dim);
  Eigen::VectorXd carry = Eigen::VectorXd::Zero(dim);
  for (std::size_t n : which) {
    const auto x = columns.col(static_cast<Eigen::Index>(n));
    for (Eigen::Index k = 0; k < dim; ++k) {
      const double y = x[k] - carry[k];
      const double t = sum[k] + y;
      carry[k] = (t - sum[k]) - y;
      sum[k] = t;
    }
  }
  return sum / static_cast<double>(which.size());
}

}  // namespace

ScatterStatistics compute_scatter(const VectorSet& data) {
  const std::size_t classes = data.class_count();
  if (classes < 2) {
    fail(ErrorCode::kTooFewClasses,
         "scatter statistics need at least 2 classes, got " + std::to_string(classes));
  }
  const Eigen::Index dim = data.dimension();
  require(dim > 0, "compute_scatter: zero-dimensional data");

  ScatterStatistics stats;
  stats.classes.assign(data.classes().begin(), data.classes().end());
  std::vector<std::size_t> everyone(data.size());
  for (std::size_t n = 0; n < everyone.size(); ++n) everyone[n] = n;
  stats.overall_mean = compensated_mean(data.columns(), everyone);
  stats.class_means.resize(dim, static_cast<Eigen::Index>(classes));

  CompensatedOuterSum between(dim);
  CompensatedOuterSum within(dim);
  CompensatedOuterSum total(dim);
  for (std::size_t c = 0; c < classes; ++c) {
    const auto members = data.class_members(c);
    stats.class_sizes.push_back(members.size());
    const Eigen::VectorXd mean = compensated_mean(data.columns(), members);
    stats.class_means.col(static_cast<Eigen::Index>(c)) = mean;
    between.add(mean - stats.overall_mean, 1.0);
    const double weight = 1.0 / static_cast<double>(members.size());
    for (std::size_t n : members) {
      const auto x = data.columns().col(static_cast<Eigen::Index>(n));
      within.add(x - mean, weight);
      total.add(x - stats.overall_mean, weight);
    }
  }
  stats.sigma_b = between.symmetric();
  stats.sigma_w = within.symmetric();
  stats.sigma_t = total.symmetric();
  return stats;
}

Eigen::MatrixXd total_scatter_factor(const ScatterStatistics& stats, const VectorSet& data) {
  require(data.dimension() == stats.dimension(), "total_scatter_factor: dimension mismatch");
  Eigen::MatrixXd x(data.dimension(), static_cast<Eigen::Index>(data.size()));
  for (std::size_t c = 0; c < data.class_count(); ++c) {
    const auto members = data.class_members(c);
    const double scale = 1.0 / std::sqrt(static_cast<double>(members.size()));
    for (std::size_t n : members) {
      const auto col = static_cast<Eigen::Index>(n);
      x.col(col) = scale * (data.columns().col(col) - stats.overall_mean);
    }
  }
  return x;
}

Eigen::MatrixXd between_scatter_factor(const ScatterStatistics& stats) {
  return stats.class_means.colwise() - stats.overall_mean;
}

}  // namespace marginforge
