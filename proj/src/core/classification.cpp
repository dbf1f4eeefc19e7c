#include "marginforge/classification.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <tuple>

#include "marginforge/error.hpp"

namespace marginforge {

const char* curve_kind_name(CurveKind kind) noexcept {
  switch (kind) {
    case CurveKind::kCmc: return "cmc";
    case CurveKind::kFarFrr: return "far_frr";
    case CurveKind::kRoc: return "roc";
    case CurveKind::kRclPcn: return "rcl_pcn";
  }
  return "unknown";
}

std::string classify_wta(const GaitTemplate& probe, std::span<const GaitTemplate> gallery,
                         const MatchingContext& context) {
  require(!gallery.empty(), "classify_wta: empty gallery");
  const GaitTemplate* best = nullptr;
  double best_distance = std::numeric_limits<double>::infinity();
  for (const auto& g : gallery) {
    const double d = mahalanobis(context, probe, g);
    if (best == nullptr || d < best_distance || (d == best_distance && g.sample_id < best->sample_id)) {
      best = &g;
      best_distance = d;
    }
  }
  return best->label;
}

UnlabeledProbes strip_labels(const VectorSet& templates, std::span<const std::size_t> members) {
  UnlabeledProbes probes;
  probes.vectors.resize(templates.dimension(), static_cast<Eigen::Index>(members.size()));
  for (std::size_t k = 0; k < members.size(); ++k) {
    probes.ids.push_back(templates.id(members[k]));
    probes.vectors.col(static_cast<Eigen::Index>(k)) = templates.columns().col(static_cast<Eigen::Index>(members[k]));
  }
  return probes;
}

std::vector<DistanceRecord> compute_distances(const UnlabeledProbes& probes, const VectorSet& gallery,
                                              std::span<const std::size_t> gallery_members,
                                              const MatchingContext& context) {
  require(!gallery_members.empty(), "compute_distances: empty gallery");
  const Eigen::MatrixXd wp = whiten(context, probes.vectors);
  Eigen::MatrixXd wg(wp.rows(), static_cast<Eigen::Index>(gallery_members.size()));
  for (std::size_t k = 0; k < gallery_members.size(); ++k) {
    wg.col(static_cast<Eigen::Index>(k)) = gallery.columns().col(static_cast<Eigen::Index>(gallery_members[k]));
  }
  wg = whiten(context, wg);
  std::vector<DistanceRecord> records;
  records.reserve(probes.ids.size() * gallery_members.size());
  for (std::size_t p = 0; p < probes.ids.size(); ++p) {
    for (std::size_t k = 0; k < gallery_members.size(); ++k) {
      const std::size_t g = gallery_members[k];
      records.push_back({probes.ids[p], gallery.id(g), gallery.label(g),
                         (wp.col(static_cast<Eigen::Index>(p)) - wg.col(static_cast<Eigen::Index>(k))).norm(),
                         false});
    }
  }
  return records;
}

void mark_genuine(std::vector<DistanceRecord>& records,
                  const std::map<std::string, std::string>& true_labels) {
  for (auto& r : records) {
    auto it = true_labels.find(r.probe_id);
    require(it != true_labels.end(), "mark_genuine: no ground truth for probe '" + r.probe_id + "'");
    r.genuine = it->second == r.gallery_label;
  }
}

namespace {

bool better(const DistanceRecord& a, const DistanceRecord& b) {
  return std::tie(a.distance, a.gallery_id) < std::tie(b.distance, b.gallery_id);
}

// probe_id -> gallery_label -> best record
std::map<std::string, std::map<std::string, const DistanceRecord*>> best_per_class(
    std::span<const DistanceRecord> records) {
  std::map<std::string, std::map<std::string, const DistanceRecord*>> best;
  for (const auto& r : records) {
    const DistanceRecord*& slot = best[r.probe_id][r.gallery_label];
    if (slot == nullptr || better(r, *slot)) slot = &r;
  }
  return best;
}

struct Populations {
  std::vector<double> genuine;
  std::vector<double> impostor;
  std::vector<double> thresholds;  // distinct distances, ascending
};

Populations split(std::span<const DistanceRecord> records) {
  Populations p;
  for (const auto& r : records) {
    require(r.distance >= 0 && std::isfinite(r.distance), "distance records must be finite and >= 0");
    (r.genuine ? p.genuine : p.impostor).push_back(r.distance);
    p.thresholds.push_back(r.distance);
  }
  std::sort(p.genuine.begin(), p.genuine.end());
  std::sort(p.impostor.begin(), p.impostor.end());
  std::sort(p.thresholds.begin(), p.thresholds.end());
  p.thresholds.erase(std::unique(p.thresholds.begin(), p.thresholds.end()), p.thresholds.end());
  return p;
}

std::size_t accepted(const std::vector<double>& sorted, double threshold) {
  return static_cast<std::size_t>(std::upper_bound(sorted.begin(), sorted.end(), threshold) - sorted.begin());
}

void require_both(const Populations& p) {
  require(!p.genuine.empty(), "threshold metrics need at least one genuine record");
  require(!p.impostor.empty(), "threshold metrics need at least one impostor record");
}

}  // namespace

std::vector<DistanceRecord> reduce_to_class_best(std::span<const DistanceRecord> records) {
  std::vector<DistanceRecord> out;
  for (const auto& [probe, classes] : best_per_class(records)) {
    for (const auto& [label, record] : classes) out.push_back(*record);
  }
  return out;
}

std::map<std::string, std::string> wta_predictions(std::span<const DistanceRecord> records) {
  std::map<std::string, const DistanceRecord*> best;
  for (const auto& r : records) {
    const DistanceRecord*& slot = best[r.probe_id];
    if (slot == nullptr || better(r, *slot)) slot = &r;
  }
  std::map<std::string, std::string> out;
  for (const auto& [probe, record] : best) out.emplace(probe, record->gallery_label);
  return out;
}

CmcResult cmc_curve(std::span<const DistanceRecord> records) {
  require(!records.empty(), "cmc_curve: no distance records");
  std::set<std::string> gallery_classes;
  for (const auto& r : records) gallery_classes.insert(r.gallery_label);
  const std::size_t classes = gallery_classes.size();

  CmcResult result;
  std::vector<std::size_t> hits_at_rank(classes + 1, 0);
  for (const auto& [probe, best] : best_per_class(records)) {
    ++result.probes;
    const DistanceRecord* truth = nullptr;
    for (const auto& [label, record] : best) {
      if (record->genuine) truth = record;
    }
    if (truth == nullptr) {
      ++result.unmatched_probes;
      continue;
    }
    std::size_t rank = 1;
    for (const auto& [label, record] : best) {
      if (record != truth && better(*record, *truth)) ++rank;
    }
    ++hits_at_rank[rank];
  }
  result.curve.kind = CurveKind::kCmc;
  std::size_t cumulative = 0;
  for (std::size_t k = 1; k <= classes; ++k) {
    cumulative += hits_at_rank[k];
    result.curve.x.push_back(static_cast<double>(k));
    result.curve.y.push_back(static_cast<double>(cumulative) / static_cast<double>(result.probes));
  }
  result.ccr = result.curve.y.front();
  return result;
}

ThresholdResult far_frr_curves(std::span<const DistanceRecord> records) {
  const Populations p = split(records);
  require_both(p);
  const double g = static_cast<double>(p.genuine.size());
  const double i = static_cast<double>(p.impostor.size());
  ThresholdResult result;
  result.curve.kind = CurveKind::kFarFrr;
  // -infinity sentinel: nothing accepted.
  double prev_far = 0;
  double prev_frr = 1;
  bool found = false;
  for (double t : p.thresholds) {
    const double far = static_cast<double>(accepted(p.impostor, t)) / i;
    const double frr = static_cast<double>(p.genuine.size() - accepted(p.genuine, t)) / g;
    result.curve.x.push_back(t);
    result.curve.y.push_back(far);
    result.curve.y2.push_back(frr);
    if (!found && far - frr >= 0) {
      found = true;
      const double diff = far - frr;
      if (diff == 0) {
        result.headline = far;
      } else {
        const double prev_diff = prev_far - prev_frr;  // < 0
        const double s = -prev_diff / (diff - prev_diff);
        result.headline = prev_far + s * (far - prev_far);
      }
    }
    prev_far = far;
    prev_frr = frr;
  }
  return result;
}

ThresholdResult roc_curve(std::span<const DistanceRecord> records) {
  const Populations p = split(records);
  require_both(p);
  const double g = static_cast<double>(p.genuine.size());
  const double i = static_cast<double>(p.impostor.size());
  ThresholdResult result;
  result.curve.kind = CurveKind::kRoc;
  auto push = [&](double far, double tar) {
    if (!result.curve.x.empty() && result.curve.x.back() == far && result.curve.y.back() == tar) return;
    result.curve.x.push_back(far);
    result.curve.y.push_back(tar);
  };
  push(0.0, 0.0);
  for (double t : p.thresholds) {
    push(static_cast<double>(accepted(p.impostor, t)) / i, static_cast<double>(accepted(p.genuine, t)) / g);
  }
  push(1.0, 1.0);
  double area = 0;
  for (std::size_t k = 1; k < result.curve.x.size(); ++k) {
    area += (result.curve.x[k] - result.curve.x[k - 1]) * (result.curve.y[k] + result.curve.y[k - 1]) / 2;
  }
  result.headline = area;
  return result;
}

ThresholdResult rcl_pcn_curve(std::span<const DistanceRecord> records) {
  const Populations p = split(records);
  require(!p.genuine.empty(), "rcl_pcn_curve: need at least one genuine record");
  const double g = static_cast<double>(p.genuine.size());
  ThresholdResult result;
  result.curve.kind = CurveKind::kRclPcn;
  for (double t : p.thresholds) {
    const std::size_t hits = accepted(p.genuine, t);
    if (hits == 0) continue;
    const double recall = static_cast<double>(hits) / g;
    // Keep the smallest threshold reaching each recall (its precision is the highest).
    if (!result.curve.x.empty() && result.curve.x.back() == recall) continue;
    const double precision = static_cast<double>(hits) / static_cast<double>(hits + accepted(p.impostor, t));
    if (result.curve.x.empty()) {
      result.curve.x.push_back(0.0);
      result.curve.y.push_back(precision);
    }
    result.curve.x.push_back(recall);
    result.curve.y.push_back(precision);
  }
  double area = 0;
  for (std::size_t k = 1; k < result.curve.x.size(); ++k) {
    area += (result.curve.x[k] - result.curve.x[k - 1]) * (result.curve.y[k] + result.curve.y[k - 1]) / 2;
  }
  result.headline = area;
  return result;
}

}  // namespace marginforge
