#include "marginforge/report.hpp"

#include <charconv>
#include <cmath>
#include <filesystem>
#include <nlohmann/json.hpp>

#include "marginforge/error.hpp"
#include "marginforge/io.hpp"

namespace marginforge {

using nlohmann::ordered_json;

namespace {

ordered_json number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

ordered_json numbers(const std::vector<double>& values) {
  ordered_json out = ordered_json::array();
  for (double v : values) out.push_back(number(v));
  return out;
}

std::string shortest(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

ordered_json curve_json(const CurveSeries& c) {
  if (c.kind == CurveKind::kFarFrr) {
    return {{"x", numbers(c.x)}, {"far", numbers(c.y)}, {"frr", numbers(c.y2)}};
  }
  return {{"x", numbers(c.x)}, {"y", numbers(c.y)}};
}

ordered_json fold_json(const FoldResult& f) {
  const SeparabilityReport& s = f.separability;
  return {
      {"fold", f.fold},
      {"learning_size", f.learning_size},
      {"evaluation_size", f.evaluation_size},
      {"feature_dim", f.feature_dim},
      {"fallback_used", f.fallback_used},
      {"ridge_used", f.ridge_used},
      {"context_inverse", f.context_source == InverseSource::kRidge ? "ridge" : "exact"},
      {"separability",
       {{"dbi", number(s.dbi)},
        {"di", number(s.di)},
        {"sc", number(s.sc)},
        {"fdr", number(s.fdr)},
        {"class_sigma", numbers(s.class_sigma)}}},
      {"ccr", number(f.cmc.ccr)},
      {"wta_accuracy", number(f.wta_accuracy)},
      {"eer", number(f.far_frr.headline)},
      {"auc", number(f.roc.headline)},
      {"map", number(f.rcl_pcn.headline)},
      {"probes", f.cmc.probes},
      {"unmatched_probes", f.cmc.unmatched_probes},
      {"genuine_pairs", f.genuine_pairs},
      {"impostor_pairs", f.impostor_pairs},
  };
}

}  // namespace

std::string report_to_json(const EvaluationReport& report) {
  const ProtocolConfig& c = report.config;
  const Headline& h = report.headline;
  ordered_json folds = ordered_json::array();
  for (const auto& f : report.folds) folds.push_back(fold_json(f));
  ordered_json doc = {
      {"format", "marginforge-report"},
      {"version", 1},
      {"config",
       {{"method", method_name(c.method)},
        {"outer_folds", c.outer_folds},
        {"inner_folds", c.inner_folds},
        {"seed", c.seed},
        {"pair_policy", pair_policy_name(c.pair_policy)},
        {"context_source", context_policy_name(c.context_source)},
        {"pca_dim", c.pca_dim ? ordered_json(*c.pca_dim) : ordered_json(nullptr)}}},
      {"dataset", {{"samples", report.sample_count}, {"classes", report.class_count}, {"input_dim", report.input_dim}}},
      {"headline",
       {{"ccr", number(h.ccr)},
        {"eer", number(h.eer)},
        {"auc", number(h.auc)},
        {"map", number(h.map)},
        {"dbi", number(h.dbi)},
        {"di", number(h.di)},
        {"sc", number(h.sc)},
        {"fdr", number(h.fdr)}}},
      {"aggregation",
       {{"scalars", "unweighted mean over outer folds"},
        {"cmc", "pointwise mean by rank"},
        {"far_frr", "pointwise mean over threshold quantile levels of each fold's pooled distances"},
        {"roc", "pointwise mean over FAR levels, linear interpolation"},
        {"rcl_pcn", "pointwise mean over recall levels, linear interpolation"},
        {"levels", kAggregationLevels}}},
      {"folds", std::move(folds)},
      {"curves",
       {{"cmc", curve_json(report.curves.cmc)},
        {"far_frr", curve_json(report.curves.far_frr)},
        {"roc", curve_json(report.curves.roc)},
        {"rcl_pcn", curve_json(report.curves.rcl_pcn)}}},
      {"warnings", report.warnings},
  };
  return doc.dump(2) + "\n";
}

std::string curve_to_csv(const CurveSeries& curve) {
  std::string out = "kind,x,y\n";
  const auto rows = [&](const std::string& kind, const std::vector<double>& ys) {
    for (std::size_t i = 0; i < curve.x.size(); ++i) {
      out += kind + ',' + shortest(curve.x[i]) + ',' + shortest(ys[i]) + '\n';
    }
  };
  if (curve.kind == CurveKind::kFarFrr) {
    rows("far", curve.y);
    rows("frr", curve.y2);
  } else {
    rows(curve_kind_name(curve.kind), curve.y);
  }
  return out;
}

void write_report(const EvaluationReport& report, const std::string& json_path, const std::string& curves_dir) {
  if (!curves_dir.empty()) {
    std::error_code ec;
    std::filesystem::create_directories(curves_dir, ec);
    if (ec) fail(ErrorCode::kIo, "cannot create curve directory '" + curves_dir + "': " + ec.message());
    const std::filesystem::path dir(curves_dir);
    for (const CurveSeries* c : {&report.curves.cmc, &report.curves.far_frr, &report.curves.roc,
                                 &report.curves.rcl_pcn}) {
      write_text_file_atomic((dir / (std::string(curve_kind_name(c->kind)) + ".csv")).string(), curve_to_csv(*c));
    }
  }
  write_text_file_atomic(json_path, report_to_json(report));
}

}  // namespace marginforge
