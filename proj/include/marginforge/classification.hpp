#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "marginforge/dataset.hpp"
#include "marginforge/template_space.hpp"

namespace marginforge {

struct DistanceRecord {
  std::string probe_id;
  std::string gallery_id;
  std::string gallery_label;
  double distance = 0;
  bool genuine = false;  // probe's true label == gallery_label
};

enum class CurveKind { kCmc, kFarFrr, kRoc, kRclPcn };

const char* curve_kind_name(CurveKind kind) noexcept;

/// Plot-ready curve. For kFarFrr, x is the threshold, y the FAR and y2 the
/// FRR; every other kind leaves y2 empty.
struct CurveSeries {
  CurveKind kind = CurveKind::kCmc;
  std::vector<double> x;
  std::vector<double> y;
  std::vector<double> y2;
};

struct CmcResult {
  CurveSeries curve;
  double ccr = 0;
  std::size_t probes = 0;
  std::size_t unmatched_probes = 0;  // true class absent from the gallery
};

struct ThresholdResult {
  CurveSeries curve;
  double headline = 0;  // EER, AUC or MAP
};

// Label of the closest gallery template; ties go to the smallest sample_id.
std::string classify_wta(const GaitTemplate& probe, std::span<const GaitTemplate> gallery,
                         const MatchingContext& context);

/// Probes with their labels removed; truth is restored only for scoring.
struct UnlabeledProbes {
  std::vector<std::string> ids;
  Eigen::MatrixXd vectors;  // feature_dim x P
};

UnlabeledProbes strip_labels(const VectorSet& templates, std::span<const std::size_t> members);

// All probe x gallery distances; `genuine` is left false.
std::vector<DistanceRecord> compute_distances(const UnlabeledProbes& probes, const VectorSet& gallery,
                                              std::span<const std::size_t> gallery_members,
                                              const MatchingContext& context);

void mark_genuine(std::vector<DistanceRecord>& records,
                  const std::map<std::string, std::string>& true_labels);

// One minimum-distance record per (probe, gallery class); ties by gallery_id.
std::vector<DistanceRecord> reduce_to_class_best(std::span<const DistanceRecord> records);

// Winner-takes-all label per probe: gallery label of the (distance, gallery_id)
// minimum record.
std::map<std::string, std::string> wta_predictions(std::span<const DistanceRecord> records);

CmcResult cmc_curve(std::span<const DistanceRecord> records);
ThresholdResult far_frr_curves(std::span<const DistanceRecord> records);
ThresholdResult roc_curve(std::span<const DistanceRecord> records);
ThresholdResult rcl_pcn_curve(std::span<const DistanceRecord> records);

}  // namespace marginforge
