#include "marginforge/protocol.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <atomic>
#include <exception>
#include <iterator>
#include <limits>
#include <map>
#include <random>
#include <thread>

#include "marginforge/error.hpp"
#include "marginforge/template_space.hpp"

namespace marginforge {

const char* pair_policy_name(PairPolicy policy) noexcept {
  return policy == PairPolicy::kAll ? "all" : "class_best";
}

const char* context_policy_name(ContextPolicy policy) noexcept {
  return policy == ContextPolicy::kLearning ? "learning" : "gallery";
}

PairPolicy parse_pair_policy(std::string_view name) {
  if (name == "all") return PairPolicy::kAll;
  if (name == "class_best" || name == "class-best") return PairPolicy::kClassBest;
  fail(ErrorCode::kInvalidArgument, "unknown pair policy '" + std::string(name) + "' (expected all or class-best)");
}

ContextPolicy parse_context_policy(std::string_view name) {
  if (name == "learning") return ContextPolicy::kLearning;
  if (name == "gallery") return ContextPolicy::kGallery;
  fail(ErrorCode::kInvalidArgument,
       "unknown context source '" + std::string(name) + "' (expected learning or gallery)");
}

namespace {

std::mt19937_64 seeded(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  return std::mt19937_64(seq);
}

// Unbiased draw in [0, bound) by rejection; independent of the standard
// library's distribution implementation.
std::uint64_t bounded(std::mt19937_64& rng, std::uint64_t bound) {
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t r;
  do {
    r = rng();
  } while (r >= limit);
  return r % bound;
}

void shuffle(std::vector<std::size_t>& v, std::mt19937_64& rng) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[bounded(rng, i)]);
}

// Stratified assignment: within each class (in label order) a shuffled
// round-robin whose starting fold carries over between classes.
std::vector<std::vector<std::size_t>> stratify(const std::vector<std::vector<std::size_t>>& classes,
                                               std::size_t folds, std::mt19937_64& rng) {
  std::vector<std::vector<std::size_t>> out(folds);
  std::size_t offset = 0;
  for (const auto& members : classes) {
    std::vector<std::size_t> order = members;
    shuffle(order, rng);
    for (std::size_t k = 0; k < order.size(); ++k) out[(offset + k) % folds].push_back(order[k]);
    offset = (offset + order.size()) % folds;
  }
  for (auto& f : out) std::sort(f.begin(), f.end());
  return out;
}

VectorSet subset(const VectorSet& set, std::span<const std::size_t> positions) {
  Eigen::MatrixXd cols(set.dimension(), static_cast<Eigen::Index>(positions.size()));
  std::vector<std::string> ids;
  std::vector<std::string> labels;
  for (std::size_t k = 0; k < positions.size(); ++k) {
    cols.col(static_cast<Eigen::Index>(k)) = set.columns().col(static_cast<Eigen::Index>(positions[k]));
    ids.push_back(set.id(positions[k]));
    labels.push_back(set.label(positions[k]));
  }
  return VectorSet(std::move(cols), std::move(ids), std::move(labels));
}

void check_plan(const LabeledDataset& dataset, const FoldPlan& plan) {
  require(plan.outer.size() >= 2, "fold plan needs at least 2 outer folds");
  require(plan.inner.size() == plan.outer.size(), "fold plan: inner plan count differs from outer fold count");
  std::vector<int> seen(dataset.size(), 0);
  for (const auto& fold : plan.outer) {
    for (std::size_t n : fold) {
      require(n < dataset.size(), "fold plan: sample index out of range");
      ++seen[n];
    }
  }
  require(std::all_of(seen.begin(), seen.end(), [](int s) { return s == 1; }),
          "fold plan: outer folds do not partition the dataset");
  for (std::size_t f = 0; f < plan.outer.size(); ++f) {
    std::vector<std::size_t> inner_all;
    for (const auto& fold : plan.inner[f]) inner_all.insert(inner_all.end(), fold.begin(), fold.end());
    std::sort(inner_all.begin(), inner_all.end());
    require(inner_all == evaluation_indices(plan, f),
            "fold plan: inner folds of outer fold " + std::to_string(f) + " do not partition its evaluation set");
  }
}

double mean_of(const std::vector<FoldResult>& folds, double (*get)(const FoldResult&)) {
  double total = 0;
  for (const auto& f : folds) total += get(f);
  return total / static_cast<double>(folds.size());
}

// Piecewise-linear value at `at` of a curve with nondecreasing x spanning it;
// at a vertical segment the last (highest) point wins.
double sample_curve(const CurveSeries& c, double at) {
  const auto it = std::upper_bound(c.x.begin(), c.x.end(), at);
  if (it == c.x.begin()) return c.y.front();
  const std::size_t j = static_cast<std::size_t>(it - c.x.begin()) - 1;
  if (c.x[j] == at || j + 1 == c.x.size()) return c.y[j];
  const double s = (at - c.x[j]) / (c.x[j + 1] - c.x[j]);
  return c.y[j] + s * (c.y[j + 1] - c.y[j]);
}

std::vector<double> levels() {
  std::vector<double> out(kAggregationLevels);
  for (std::size_t i = 0; i < kAggregationLevels; ++i) {
    out[i] = static_cast<double>(i) / static_cast<double>(kAggregationLevels - 1);
  }
  return out;
}

std::size_t count_le(const std::vector<double>& sorted, double t) {
  return static_cast<std::size_t>(std::upper_bound(sorted.begin(), sorted.end(), t) - sorted.begin());
}

AggregatedCurves aggregate(const std::vector<FoldResult>& folds) {
  AggregatedCurves a;
  const double n = static_cast<double>(folds.size());

  a.cmc.kind = CurveKind::kCmc;
  std::size_t ranks = 0;
  for (const auto& f : folds) ranks = std::max(ranks, f.cmc.curve.y.size());
  for (std::size_t k = 0; k < ranks; ++k) {
    double total = 0;
    for (const auto& f : folds) total += k < f.cmc.curve.y.size() ? f.cmc.curve.y[k] : f.cmc.curve.y.back();
    a.cmc.x.push_back(static_cast<double>(k + 1));
    a.cmc.y.push_back(total / n);
  }

  const std::vector<double> grid = levels();
  const std::size_t steps = kAggregationLevels - 1;
  a.far_frr.kind = CurveKind::kFarFrr;
  a.far_frr.x = grid;
  a.far_frr.y.assign(grid.size(), 0.0);
  a.far_frr.y2.assign(grid.size(), 0.0);
  for (const auto& f : folds) {
    std::vector<double> pooled;
    std::merge(f.genuine_distances.begin(), f.genuine_distances.end(), f.impostor_distances.begin(),
               f.impostor_distances.end(), std::back_inserter(pooled));
    const double g = static_cast<double>(f.genuine_distances.size());
    const double im = static_cast<double>(f.impostor_distances.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
      // Threshold = ceil(q * n)-th smallest pooled distance.
      const std::size_t rank = (i * pooled.size() + steps - 1) / steps;
      const double t = pooled[rank == 0 ? 0 : rank - 1];
      a.far_frr.y[i] += static_cast<double>(count_le(f.impostor_distances, t)) / im / n;
      a.far_frr.y2[i] += (g - static_cast<double>(count_le(f.genuine_distances, t))) / g / n;
    }
  }

  a.roc.kind = CurveKind::kRoc;
  a.rcl_pcn.kind = CurveKind::kRclPcn;
  a.roc.x = grid;
  a.rcl_pcn.x = grid;
  a.roc.y.assign(grid.size(), 0.0);
  a.rcl_pcn.y.assign(grid.size(), 0.0);
  for (const auto& f : folds) {
    for (std::size_t i = 0; i < grid.size(); ++i) {
      a.roc.y[i] += sample_curve(f.roc.curve, grid[i]) / n;
      a.rcl_pcn.y[i] += sample_curve(f.rcl_pcn.curve, grid[i]) / n;
    }
  }
  return a;
}

FoldResult run_fold_unchecked(const LabeledDataset& dataset, const FoldPlan& plan, std::size_t fold,
                              const ProtocolConfig& config) {
  FoldResult r;
  r.fold = fold;
  const std::vector<std::size_t> evaluation = evaluation_indices(plan, fold);
  r.learning_size = plan.outer[fold].size();
  r.evaluation_size = evaluation.size();
  auto warn = [&](const std::string& message) {
    r.warnings.push_back("fold " + std::to_string(fold) + ": " + message);
    spdlog::warn("{}", r.warnings.back());
  };

  const VectorSet learning_set = flatten_samples(dataset, plan.outer[fold]);
  const FeatureTransform transform = learn_fold_transform(dataset, plan, fold, config);
  r.feature_dim = transform.feature_dim();
  r.fallback_used = transform.fallback_used;
  r.ridge_used = transform.ridge_used;
  for (const auto& w : transform.warnings) warn(w);

  const VectorSet learning_templates = extract_templates(transform, learning_set);
  const MatchingContext learning_context = build_matching_context(learning_templates);
  r.context_source = learning_context.source();
  if (learning_context.source() == InverseSource::kRidge) warn("learning-fold matching context is ridge-regularized");

  const VectorSet evaluation_templates = extract_templates(transform, flatten_samples(dataset, evaluation));
  if (config.context_source == ContextPolicy::kLearning) {
    r.separability = compute_separability(evaluation_templates, learning_context);
  } else {
    r.separability = compute_separability(evaluation_templates, build_matching_context(evaluation_templates));
  }
  for (const auto& w : r.separability.warnings) warn(w);

  std::vector<DistanceRecord> records;
  for (std::size_t i = 0; i < plan.inner[fold].size(); ++i) {
    std::vector<std::size_t> probes;
    std::vector<std::size_t> gallery;
    std::size_t next = 0;
    const auto& probe_fold = plan.inner[fold][i];
    for (std::size_t pos = 0; pos < evaluation.size(); ++pos) {
      if (next < probe_fold.size() && probe_fold[next] == evaluation[pos]) {
        probes.push_back(pos);
        ++next;
      } else {
        gallery.push_back(pos);
      }
    }
    if (probes.empty()) continue;
    require(!gallery.empty(), "inner fold leaves an empty gallery");
    std::vector<DistanceRecord> batch;
    if (config.context_source == ContextPolicy::kLearning) {
      batch = compute_distances(strip_labels(evaluation_templates, probes), evaluation_templates, gallery,
                                learning_context);
    } else {
      const MatchingContext gallery_context = build_matching_context(subset(evaluation_templates, gallery));
      batch = compute_distances(strip_labels(evaluation_templates, probes), evaluation_templates, gallery,
                                gallery_context);
    }
    records.insert(records.end(), std::make_move_iterator(batch.begin()), std::make_move_iterator(batch.end()));
  }

  std::map<std::string, std::string> truth;
  for (std::size_t pos = 0; pos < evaluation_templates.size(); ++pos) {
    truth.emplace(evaluation_templates.id(pos), evaluation_templates.label(pos));
  }
  mark_genuine(records, truth);

  r.cmc = cmc_curve(records);
  if (r.cmc.unmatched_probes > 0) {
    warn(std::to_string(r.cmc.unmatched_probes) + " probe(s) had no gallery template of their class");
  }
  const auto predictions = wta_predictions(records);
  std::size_t hits = 0;
  for (const auto& [probe, label] : predictions) hits += truth.at(probe) == label ? 1 : 0;
  r.wta_accuracy = static_cast<double>(hits) / static_cast<double>(predictions.size());

  const std::vector<DistanceRecord> scored =
      config.pair_policy == PairPolicy::kAll ? std::move(records) : reduce_to_class_best(records);
  r.far_frr = far_frr_curves(scored);
  r.roc = roc_curve(scored);
  r.rcl_pcn = rcl_pcn_curve(scored);
  for (const auto& rec : scored) (rec.genuine ? r.genuine_distances : r.impostor_distances).push_back(rec.distance);
  std::sort(r.genuine_distances.begin(), r.genuine_distances.end());
  std::sort(r.impostor_distances.begin(), r.impostor_distances.end());
  r.genuine_pairs = r.genuine_distances.size();
  r.impostor_pairs = r.impostor_distances.size();
  return r;
}

}  // namespace

FoldPlan plan_folds(const LabeledDataset& dataset, std::size_t outer, std::size_t inner, std::uint64_t seed) {
  require(outer >= 2, "outer fold count must be at least 2");
  require(inner >= 2, "inner fold count must be at least 2");
  for (std::size_t c = 0; c < dataset.class_count(); ++c) {
    if (dataset.class_members(c).size() < outer) {
      fail(ErrorCode::kClassTooSmall, "class '" + dataset.class_labels()[c] + "' has " +
                                          std::to_string(dataset.class_members(c).size()) +
                                          " samples but the outer loop needs at least " + std::to_string(outer));
    }
  }
  FoldPlan plan;
  plan.seed = seed;
  plan.stratified = true;

  std::vector<std::vector<std::size_t>> classes;
  for (std::size_t c = 0; c < dataset.class_count(); ++c) {
    classes.emplace_back(dataset.class_members(c).begin(), dataset.class_members(c).end());
  }
  std::mt19937_64 outer_rng = seeded(seed, 0);
  plan.outer = stratify(classes, outer, outer_rng);

  for (std::size_t f = 0; f < outer; ++f) {
    const std::vector<std::size_t> evaluation = evaluation_indices(plan, f);
    require(evaluation.size() >= inner, "evaluation set of outer fold " + std::to_string(f) + " has " +
                                            std::to_string(evaluation.size()) + " samples, fewer than " +
                                            std::to_string(inner) + " inner folds");
    std::vector<std::vector<std::size_t>> by_class(dataset.class_count());
    for (std::size_t n : evaluation) by_class[dataset.class_of(n)].push_back(n);
    std::mt19937_64 inner_rng = seeded(seed, f + 1);
    plan.inner.push_back(stratify(by_class, inner, inner_rng));
  }
  return plan;
}

std::vector<std::size_t> evaluation_indices(const FoldPlan& plan, std::size_t fold) {
  require(fold < plan.outer.size(), "outer fold index out of range");
  std::vector<std::size_t> out;
  for (std::size_t f = 0; f < plan.outer.size(); ++f) {
    if (f != fold) out.insert(out.end(), plan.outer[f].begin(), plan.outer[f].end());
  }
  std::sort(out.begin(), out.end());
  return out;
}

FeatureTransform learn_fold_transform(const LabeledDataset& dataset, const FoldPlan& plan, std::size_t fold,
                                      const ProtocolConfig& config) {
  require(fold < plan.outer.size(), "outer fold index out of range");
  const VectorSet learning_set = flatten_samples(dataset, plan.outer[fold]);
  return learn_transform(config.method, learning_set, config.pca_dim);
}

FoldResult run_outer_fold(const LabeledDataset& dataset, const FoldPlan& plan, std::size_t fold,
                          const ProtocolConfig& config) {
  try {
    return run_fold_unchecked(dataset, plan, fold, config);
  } catch (const Error& e) {
    throw Error(e.code(), "outer fold " + std::to_string(fold) + ": " + e.what());
  }
}

EvaluationReport run_protocol(const LabeledDataset& dataset, const FoldPlan& plan, const ProtocolConfig& config) {
  check_plan(dataset, plan);
  spdlog::info("evaluating {} with {} outer folds on {} samples", method_name(config.method), plan.outer.size(),
               dataset.size());

  const std::size_t count = plan.outer.size();
  std::vector<FoldResult> folds(count);
  std::vector<std::exception_ptr> errors(count);
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t f = next++; f < count; f = next++) {
      try {
        folds[f] = run_outer_fold(dataset, plan, f, config);
      } catch (...) {
        errors[f] = std::current_exception();
      }
    }
  };
  const std::size_t threads = std::clamp<std::size_t>(config.workers, 1, count);
  if (threads == 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(work);
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  EvaluationReport report;
  report.config = config;
  report.sample_count = dataset.size();
  report.class_count = dataset.class_count();
  report.input_dim = flatten_samples(dataset, std::vector<std::size_t>{0}).dimension();
  report.folds = std::move(folds);
  report.curves = aggregate(report.folds);
  const auto& fs = report.folds;
  report.headline.ccr = mean_of(fs, [](const FoldResult& f) { return f.cmc.ccr; });
  report.headline.eer = mean_of(fs, [](const FoldResult& f) { return f.far_frr.headline; });
  report.headline.auc = mean_of(fs, [](const FoldResult& f) { return f.roc.headline; });
  report.headline.map = mean_of(fs, [](const FoldResult& f) { return f.rcl_pcn.headline; });
  report.headline.dbi = mean_of(fs, [](const FoldResult& f) { return f.separability.dbi; });
  report.headline.di = mean_of(fs, [](const FoldResult& f) { return f.separability.di; });
  report.headline.sc = mean_of(fs, [](const FoldResult& f) { return f.separability.sc; });
  report.headline.fdr = mean_of(fs, [](const FoldResult& f) { return f.separability.fdr; });
  for (const auto& f : report.folds) report.warnings.insert(report.warnings.end(), f.warnings.begin(), f.warnings.end());
  return report;
}

EvaluationReport evaluate(const LabeledDataset& dataset, const ProtocolConfig& config) {
  return run_protocol(dataset, plan_folds(dataset, config.outer_folds, config.inner_folds, config.seed), config);
}

}  // namespace marginforge
