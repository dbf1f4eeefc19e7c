#include "marginforge/marginforge.h"

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <cstring>
#include <exception>
#include <limits>
#include <new>
#include <nlohmann/json.hpp>
#include <string>
#include <utility>

#include "marginforge/classification.hpp"
#include "marginforge/dataset.hpp"
#include "marginforge/error.hpp"
#include "marginforge/learners.hpp"
#include "marginforge/preprocess.hpp"
#include "marginforge/protocol.hpp"
#include "marginforge/report.hpp"
#include "marginforge/template_space.hpp"

namespace mf = marginforge;

struct mf_dataset {
  mf::LabeledDataset value;
};
struct mf_transform {
  mf::FeatureTransform value;
};
struct mf_gallery {
  mf::GalleryStore value;
};
struct mf_report {
  mf::EvaluationReport value;
};

namespace {

thread_local std::string last_error;

spdlog::level::level_enum parse_level(const char* text) {
  const std::string name = text;
  const auto level = spdlog::level::from_str(name);
  // from_str maps unknown names to off.
  if (level == spdlog::level::off && name != "off") {
    marginforge::fail(marginforge::ErrorCode::kInvalidArgument, "unknown log level '" + name + "'");
  }
  return level;
}

struct LoggingSetup {
  LoggingSetup() {
    auto logger = spdlog::stderr_color_mt("marginforge");
    spdlog::set_default_logger(logger);
    spdlog::set_level(spdlog::level::warn);
    if (const char* env = std::getenv("MARGINFORGE_LOG"); env != nullptr && *env != '\0') {
      try {
        spdlog::set_level(parse_level(env));
      } catch (const std::exception&) {
        spdlog::warn("ignoring MARGINFORGE_LOG='{}': unknown level", env);
      }
    }
  }
};

const LoggingSetup logging_setup;

template <typename F>
mf_status guarded(F&& body) {
  try {
    body();
    last_error.clear();
    return MF_OK;
  } catch (const mf::Error& e) {
    last_error = e.what();
    return static_cast<mf_status>(e.code());
  } catch (const std::bad_alloc&) {
    last_error = "out of memory";
    return MF_ERR_INTERNAL;
  } catch (const std::exception& e) {
    last_error = e.what();
    return MF_ERR_INTERNAL;
  } catch (...) {
    last_error = "unknown failure";
    return MF_ERR_INTERNAL;
  }
}

void need(const void* p, const char* what) {
  if (p == nullptr) mf::fail(mf::ErrorCode::kInvalidArgument, std::string(what) + " is NULL");
}

char* duplicate(const std::string& text) {
  char* out = static_cast<char*>(std::malloc(text.size() + 1));
  if (out == nullptr) throw std::bad_alloc();
  std::memcpy(out, text.c_str(), text.size() + 1);
  return out;
}

mf::Method to_method(mf_method m) {
  switch (m) {
    case MF_METHOD_MMC: return mf::Method::kMmc;
    case MF_METHOD_PCA_LDA: return mf::Method::kPcaLda;
    case MF_METHOD_IDENTITY: return mf::Method::kIdentity;
  }
  mf::fail(mf::ErrorCode::kInvalidArgument, "unknown method");
}

std::optional<std::size_t> to_pca_dim(size_t pca_dim) {
  return pca_dim == 0 ? std::nullopt : std::optional<std::size_t>(pca_dim);
}

}  // namespace

extern "C" {

const char* mf_version(void) { return "0.1.0"; }

const char* mf_status_name(mf_status status) {
  if (status == MF_OK) return "MF_OK";
  if (status < MF_ERR_INVALID_ARGUMENT || status > MF_ERR_INTERNAL) return "MF_ERR_UNKNOWN";
  return mf::error_code_name(static_cast<mf::ErrorCode>(status));
}

const char* mf_last_error(void) { return last_error.c_str(); }

void mf_string_free(char* text) { std::free(text); }

mf_status mf_set_log_level(const char* level) {
  return guarded([&] {
    need(level, "level");
    spdlog::set_level(parse_level(level));
  });
}

void mf_synthetic_spec_default(mf_synthetic_spec* spec) {
  if (spec == nullptr) return;
  const mf::SyntheticSpec d;
  *spec = {d.classes, d.samples_per_class, d.joints, d.frames, d.class_spread, d.noise, d.seed};
}

mf_status mf_dataset_generate(const mf_synthetic_spec* spec, mf_dataset** out) {
  return guarded([&] {
    need(spec, "spec");
    need(out, "out");
    const mf::SyntheticSpec s{spec->classes, spec->samples_per_class, spec->joints, spec->frames,
                              spec->class_spread, spec->noise, spec->seed};
    *out = new mf_dataset{mf::generate_synthetic(s)};
  });
}

mf_status mf_dataset_load(const char* path, mf_dataset** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    *out = new mf_dataset{mf::load_dataset(path, mf::dataset_format_from_path(path))};
  });
}

mf_status mf_dataset_save(const mf_dataset* dataset, const char* path) {
  return guarded([&] {
    need(dataset, "dataset");
    need(path, "path");
    mf::save_dataset(dataset->value, path, mf::dataset_format_from_path(path));
  });
}

mf_status mf_dataset_shuffle_labels(const mf_dataset* dataset, uint64_t seed, mf_dataset** out) {
  return guarded([&] {
    need(dataset, "dataset");
    need(out, "out");
    *out = new mf_dataset{mf::shuffle_labels(dataset->value, seed)};
  });
}

size_t mf_dataset_size(const mf_dataset* dataset) { return dataset ? dataset->value.size() : 0; }

size_t mf_dataset_class_count(const mf_dataset* dataset) { return dataset ? dataset->value.class_count() : 0; }

size_t mf_dataset_joint_count(const mf_dataset* dataset) { return dataset ? dataset->value.joint_count() : 0; }

size_t mf_dataset_frame_count(const mf_dataset* dataset) {
  if (dataset == nullptr || !dataset->value.time_normalized()) return 0;
  return dataset->value.sample(0).frame_count();
}

void mf_dataset_free(mf_dataset* dataset) { delete dataset; }

void mf_preprocess_options_default(mf_preprocess_options* options) {
  if (options == nullptr) return;
  const mf::PreprocessOptions d;
  *options = {d.align ? 1 : 0, static_cast<mf_axis>(d.up_axis), d.center ? 1 : 0, d.root_joint, 0,
              std::numeric_limits<double>::infinity(), d.resample ? 1 : 0, d.target_frames};
}

mf_status mf_dataset_preprocess(const mf_dataset* dataset, const mf_preprocess_options* options,
                                mf_dataset** out, size_t* removed_count) {
  return guarded([&] {
    need(dataset, "dataset");
    need(options, "options");
    need(out, "out");
    if (options->up_axis < MF_AXIS_X || options->up_axis > MF_AXIS_Z) {
      mf::fail(mf::ErrorCode::kInvalidArgument, "unknown up axis");
    }
    mf::PreprocessOptions o;
    o.align = options->align != 0;
    o.up_axis = static_cast<mf::Axis>(options->up_axis);
    o.center = options->center != 0;
    o.root_joint = options->root_joint;
    if (options->filter != 0) o.dtw_threshold = options->dtw_threshold;
    o.resample = options->resample != 0;
    o.target_frames = options->target_frames;
    mf::PreprocessResult r = mf::preprocess_dataset(dataset->value, o);
    if (removed_count != nullptr) *removed_count = r.removed_ids.size();
    *out = new mf_dataset{std::move(r.dataset)};
  });
}

mf_status mf_transform_learn(const mf_dataset* dataset, mf_method method, size_t pca_dim, mf_transform** out) {
  return guarded([&] {
    need(dataset, "dataset");
    need(out, "out");
    const mf::Method m = to_method(method);
    if (dataset->value.class_count() < 2 && m != mf::Method::kIdentity) {
      mf::fail(mf::ErrorCode::kTooFewClasses, "learning needs at least 2 classes, dataset has " +
                                                  std::to_string(dataset->value.class_count()));
    }
    *out = new mf_transform{mf::learn_transform(m, mf::flatten_all(dataset->value), to_pca_dim(pca_dim))};
  });
}

mf_status mf_transform_load(const char* path, mf_transform** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    *out = new mf_transform{mf::load_transform(path)};
  });
}

mf_status mf_transform_save(const mf_transform* transform, const char* path) {
  return guarded([&] {
    need(transform, "transform");
    need(path, "path");
    mf::save_transform(transform->value, path);
  });
}

size_t mf_transform_input_dim(const mf_transform* transform) {
  return transform ? static_cast<size_t>(transform->value.input_dim()) : 0;
}

size_t mf_transform_feature_dim(const mf_transform* transform) {
  return transform ? static_cast<size_t>(transform->value.feature_dim()) : 0;
}

int mf_transform_fallback_used(const mf_transform* transform) {
  return transform && transform->value.fallback_used ? 1 : 0;
}

mf_status mf_transform_delta(const mf_transform* transform, double* values, size_t count) {
  return guarded([&] {
    need(transform, "transform");
    need(values, "values");
    const auto& delta = transform->value.delta;
    if (count < static_cast<size_t>(delta.size())) {
      mf::fail(mf::ErrorCode::kInvalidArgument, "delta buffer holds " + std::to_string(count) + " values, need " +
                                                    std::to_string(delta.size()));
    }
    for (Eigen::Index i = 0; i < delta.size(); ++i) values[i] = delta[i];
  });
}

mf_status mf_transform_fingerprint(const mf_transform* transform, char** out) {
  return guarded([&] {
    need(transform, "transform");
    need(out, "out");
    *out = duplicate(mf::transform_fingerprint(transform->value));
  });
}

void mf_transform_free(mf_transform* transform) { delete transform; }

mf_status mf_gallery_enroll(const mf_transform* transform, const mf_dataset* dataset, mf_gallery** out) {
  return guarded([&] {
    need(transform, "transform");
    need(dataset, "dataset");
    need(out, "out");
    const mf::VectorSet templates = mf::extract_templates(transform->value, mf::flatten_all(dataset->value));
    mf::GalleryStore store;
    store.transform_fingerprint = mf::transform_fingerprint(transform->value);
    store.context = mf::build_matching_context(templates);
    for (std::size_t n = 0; n < templates.size(); ++n) {
      store.templates.push_back(
          {templates.id(n), templates.label(n), templates.columns().col(static_cast<Eigen::Index>(n))});
    }
    *out = new mf_gallery{std::move(store)};
  });
}

mf_status mf_gallery_load(const char* path, mf_gallery** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    *out = new mf_gallery{mf::load_gallery(path)};
  });
}

mf_status mf_gallery_save(const mf_gallery* gallery, const char* path) {
  return guarded([&] {
    need(gallery, "gallery");
    need(path, "path");
    mf::save_gallery(gallery->value, path);
  });
}

size_t mf_gallery_size(const mf_gallery* gallery) { return gallery ? gallery->value.templates.size() : 0; }

mf_status mf_gallery_identify(const mf_gallery* gallery, const mf_transform* transform, const mf_dataset* probes,
                              char** json_out) {
  return guarded([&] {
    need(gallery, "gallery");
    need(transform, "transform");
    need(probes, "probes");
    need(json_out, "json_out");
    const mf::GalleryStore& store = gallery->value;
    mf::ensure_fresh(store, transform->value);
    if (store.templates.empty()) mf::fail(mf::ErrorCode::kInvalidArgument, "gallery has no templates");
    const mf::VectorSet flat = mf::flatten_all(probes->value);
    nlohmann::ordered_json result = nlohmann::ordered_json::array();
    for (std::size_t n = 0; n < flat.size(); ++n) {
      mf::GaitTemplate probe = mf::extract_template(
          transform->value, {flat.id(n), std::string(), flat.columns().col(static_cast<Eigen::Index>(n))});
      const mf::GaitTemplate* best = nullptr;
      double best_distance = 0;
      for (const auto& g : store.templates) {
        const double d = mf::mahalanobis(store.context, probe, g);
        if (best == nullptr || d < best_distance || (d == best_distance && g.sample_id < best->sample_id)) {
          best = &g;
          best_distance = d;
        }
      }
      result.push_back({{"sample_id", flat.id(n)}, {"label", best->label}, {"distance", best_distance}});
    }
    *json_out = duplicate(result.dump(2) + "\n");
  });
}

void mf_gallery_free(mf_gallery* gallery) { delete gallery; }

void mf_eval_config_default(mf_eval_config* config) {
  if (config == nullptr) return;
  const mf::ProtocolConfig d;
  *config = {MF_METHOD_MMC, d.outer_folds, d.inner_folds, d.seed, MF_PAIRS_ALL, MF_CONTEXT_LEARNING, 0, d.workers};
}

mf_status mf_evaluate(const mf_dataset* dataset, const mf_eval_config* config, mf_report** out) {
  return guarded([&] {
    need(dataset, "dataset");
    need(config, "config");
    need(out, "out");
    mf::ProtocolConfig c;
    c.method = to_method(config->method);
    c.outer_folds = config->outer_folds;
    c.inner_folds = config->inner_folds;
    c.seed = config->seed;
    c.pair_policy = config->pair_policy == MF_PAIRS_CLASS_BEST ? mf::PairPolicy::kClassBest : mf::PairPolicy::kAll;
    c.context_source =
        config->context_source == MF_CONTEXT_GALLERY ? mf::ContextPolicy::kGallery : mf::ContextPolicy::kLearning;
    c.pca_dim = to_pca_dim(config->pca_dim);
    c.workers = config->workers;
    if (dataset->value.class_count() < 2) {
      mf::fail(mf::ErrorCode::kTooFewClasses, "evaluation needs at least 2 classes, dataset has " +
                                                  std::to_string(dataset->value.class_count()));
    }
    *out = new mf_report{mf::evaluate(dataset->value, c)};
  });
}

mf_status mf_report_headline(const mf_report* report, mf_headline* out) {
  return guarded([&] {
    need(report, "report");
    need(out, "out");
    const mf::Headline& h = report->value.headline;
    *out = {h.ccr, h.eer, h.auc, h.map, h.dbi, h.di, h.sc, h.fdr};
  });
}

size_t mf_report_fold_count(const mf_report* report) { return report ? report->value.folds.size() : 0; }

mf_status mf_report_to_json(const mf_report* report, char** out) {
  return guarded([&] {
    need(report, "report");
    need(out, "out");
    *out = duplicate(mf::report_to_json(report->value));
  });
}

mf_status mf_report_write(const mf_report* report, const char* json_path, const char* curves_dir) {
  return guarded([&] {
    need(report, "report");
    need(json_path, "json_path");
    mf::write_report(report->value, json_path, curves_dir ? curves_dir : "");
  });
}

void mf_report_free(mf_report* report) { delete report; }

}  // extern "C"
