#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "marginforge/classification.hpp"
#include "marginforge/dataset.hpp"
#include "marginforge/learners.hpp"
#include "marginforge/separability.hpp"

namespace marginforge {

enum class PairPolicy { kAll, kClassBest };
enum class ContextPolicy { kLearning, kGallery };

const char* pair_policy_name(PairPolicy policy) noexcept;        // "all", "class_best"
const char* context_policy_name(ContextPolicy policy) noexcept;  // "learning", "gallery"
PairPolicy parse_pair_policy(std::string_view name);             // also accepts "class-best"
ContextPolicy parse_context_policy(std::string_view name);

struct ProtocolConfig {
  Method method = Method::kMmc;
  std::size_t outer_folds = 3;
  std::size_t inner_folds = 10;
  std::uint64_t seed = 1;
  PairPolicy pair_policy = PairPolicy::kAll;
  ContextPolicy context_source = ContextPolicy::kLearning;
  std::optional<std::size_t> pca_dim;
  std::size_t workers = 1;  // never affects results
};

/// Dataset indices, ascending within each fold. outer[f] partitions the
/// dataset; inner[f] partitions the evaluation set of outer fold f (every
/// sample outside outer[f]).
struct FoldPlan {
  std::vector<std::vector<std::size_t>> outer;
  std::vector<std::vector<std::vector<std::size_t>>> inner;
  std::uint64_t seed = 0;
  bool stratified = true;
};

// Throws kClassTooSmall naming the first class with fewer than `outer` samples.
FoldPlan plan_folds(const LabeledDataset& dataset, std::size_t outer, std::size_t inner, std::uint64_t seed);

// Evaluation set of outer fold f, ascending.
std::vector<std::size_t> evaluation_indices(const FoldPlan& plan, std::size_t fold);

// The transform of outer fold f; reads only samples in plan.outer[fold].
FeatureTransform learn_fold_transform(const LabeledDataset& dataset, const FoldPlan& plan, std::size_t fold,
                                      const ProtocolConfig& config);

struct FoldResult {
  std::size_t fold = 0;
  std::size_t learning_size = 0;
  std::size_t evaluation_size = 0;
  Eigen::Index feature_dim = 0;
  bool fallback_used = false;
  bool ridge_used = false;
  InverseSource context_source = InverseSource::kExact;
  SeparabilityReport separability;
  CmcResult cmc;
  ThresholdResult far_frr;
  ThresholdResult roc;
  ThresholdResult rcl_pcn;
  double wta_accuracy = 0;  // winner-takes-all hit rate over every probe
  std::size_t genuine_pairs = 0;
  std::size_t impostor_pairs = 0;
  std::vector<double> genuine_distances;   // sorted; resampling only
  std::vector<double> impostor_distances;  // sorted; resampling only
  std::vector<std::string> warnings;
};

FoldResult run_outer_fold(const LabeledDataset& dataset, const FoldPlan& plan, std::size_t fold,
                          const ProtocolConfig& config);

struct Headline {
  double ccr = 0;
  double eer = 0;
  double auc = 0;
  double map = 0;
  double dbi = 0;
  double di = 0;
  double sc = 0;
  double fdr = 0;
};

/// Fold-mean curves. cmc is indexed by rank; far_frr by threshold quantile
/// (x = quantile level of the pooled fold distances); roc by FAR; rcl_pcn by
/// recall. Grids have 1001 uniform levels in [0, 1].
struct AggregatedCurves {
  CurveSeries cmc;
  CurveSeries far_frr;
  CurveSeries roc;
  CurveSeries rcl_pcn;
};

struct EvaluationReport {
  ProtocolConfig config;
  std::size_t sample_count = 0;
  std::size_t class_count = 0;
  Eigen::Index input_dim = 0;
  std::vector<FoldResult> folds;
  AggregatedCurves curves;
  Headline headline;
  std::vector<std::string> warnings;
};

constexpr std::size_t kAggregationLevels = 1001;

EvaluationReport run_protocol(const LabeledDataset& dataset, const FoldPlan& plan, const ProtocolConfig& config);

// plan_folds + run_protocol with the config's fold counts and seed.
EvaluationReport evaluate(const LabeledDataset& dataset, const ProtocolConfig& config);

}  // namespace marginforge
