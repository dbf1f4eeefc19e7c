#ifndef MARGINFORGE_MARGINFORGE_H
#define MARGINFORGE_MARGINFORGE_H

/*
 * C interface to marginforge: maximum-margin feature learning, Mahalanobis
 * template matching and nested cross-validated evaluation of gait samples.
 *
 * Every fallible call returns an mf_status. On failure, mf_last_error()
 * returns a message describing the most recent failure on the calling thread.
 * Handles are opaque and owned by the caller; release each with its _free
 * function. Strings returned through char** must be released with
 * mf_string_free.
 */

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  if defined(MARGINFORGE_BUILDING_LIBRARY)
#    define MF_API __declspec(dllexport)
#  else
#    define MF_API __declspec(dllimport)
#  endif
#else
#  define MF_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum mf_status {
  MF_OK = 0,
  MF_ERR_INVALID_ARGUMENT = 1,
  MF_ERR_IO = 2,
  MF_ERR_PARSE = 3,
  MF_ERR_SCHEMA = 4,
  MF_ERR_TOO_FEW_CLASSES = 5,
  MF_ERR_CLASS_TOO_SMALL = 6,
  MF_ERR_DEGENERATE = 7,
  MF_ERR_ALIGNMENT = 8,
  MF_ERR_STALE = 9,
  MF_ERR_INTERNAL = 10
} mf_status;

typedef struct mf_dataset mf_dataset;
typedef struct mf_transform mf_transform;
typedef struct mf_gallery mf_gallery;
typedef struct mf_report mf_report;

typedef enum mf_method { MF_METHOD_MMC = 0, MF_METHOD_PCA_LDA = 1, MF_METHOD_IDENTITY = 2 } mf_method;
typedef enum mf_pair_policy { MF_PAIRS_ALL = 0, MF_PAIRS_CLASS_BEST = 1 } mf_pair_policy;
typedef enum mf_context_source { MF_CONTEXT_LEARNING = 0, MF_CONTEXT_GALLERY = 1 } mf_context_source;
typedef enum mf_axis { MF_AXIS_X = 0, MF_AXIS_Y = 1, MF_AXIS_Z = 2 } mf_axis;

MF_API const char* mf_version(void);
/* Symbolic name such as "MF_ERR_TOO_FEW_CLASSES"; never NULL. */
MF_API const char* mf_status_name(mf_status status);
/* Message of the last failing call on this thread; "" if none. */
MF_API const char* mf_last_error(void);
MF_API void mf_string_free(char* text);
/*
 * Log level: trace, debug, info, warn, error, critical or off. Logs go to
 * stderr. The initial level comes from the MARGINFORGE_LOG environment
 * variable, defaulting to warn.
 */
MF_API mf_status mf_set_log_level(const char* level);

/* ---- datasets ---------------------------------------------------------- */

typedef struct mf_synthetic_spec {
  size_t classes;
  size_t samples_per_class;
  size_t joints;
  size_t frames;
  double class_spread;
  double noise;
  uint64_t seed;
} mf_synthetic_spec;

MF_API void mf_synthetic_spec_default(mf_synthetic_spec* spec);
MF_API mf_status mf_dataset_generate(const mf_synthetic_spec* spec, mf_dataset** out);
/* Format follows the extension: .csv is CSV, anything else JSON Lines. */
MF_API mf_status mf_dataset_load(const char* path, mf_dataset** out);
MF_API mf_status mf_dataset_save(const mf_dataset* dataset, const char* path);
MF_API mf_status mf_dataset_shuffle_labels(const mf_dataset* dataset, uint64_t seed, mf_dataset** out);
MF_API size_t mf_dataset_size(const mf_dataset* dataset);
MF_API size_t mf_dataset_class_count(const mf_dataset* dataset);
MF_API size_t mf_dataset_joint_count(const mf_dataset* dataset);
/* Common frame count, or 0 if the samples differ in length. */
MF_API size_t mf_dataset_frame_count(const mf_dataset* dataset);
MF_API void mf_dataset_free(mf_dataset* dataset);

typedef struct mf_preprocess_options {
  int align;                /* nonzero: rotate each sample to face +Z */
  mf_axis up_axis;
  int center;               /* nonzero: translate the root joint to the origin */
  size_t root_joint;
  int filter;               /* nonzero: drop samples beyond dtw_threshold of their class medoid */
  double dtw_threshold;
  int resample;             /* nonzero: resample to target_frames */
  size_t target_frames;     /* 0: average length after filtering */
} mf_preprocess_options;

MF_API void mf_preprocess_options_default(mf_preprocess_options* options);
/* removed_count may be NULL. */
MF_API mf_status mf_dataset_preprocess(const mf_dataset* dataset, const mf_preprocess_options* options,
                                       mf_dataset** out, size_t* removed_count);

/* ---- transforms -------------------------------------------------------- */

/* pca_dim 0 selects the default (class count). */
MF_API mf_status mf_transform_learn(const mf_dataset* dataset, mf_method method, size_t pca_dim,
                                    mf_transform** out);
MF_API mf_status mf_transform_load(const char* path, mf_transform** out);
MF_API mf_status mf_transform_save(const mf_transform* transform, const char* path);
MF_API size_t mf_transform_input_dim(const mf_transform* transform);
MF_API size_t mf_transform_feature_dim(const mf_transform* transform);
MF_API int mf_transform_fallback_used(const mf_transform* transform);
/* Eigenvalue of each kept column; `values` holds feature_dim entries. */
MF_API mf_status mf_transform_delta(const mf_transform* transform, double* values, size_t count);
MF_API mf_status mf_transform_fingerprint(const mf_transform* transform, char** out);
MF_API void mf_transform_free(mf_transform* transform);

/* ---- galleries --------------------------------------------------------- */

/* Templates of every sample plus the matching context built from them. */
MF_API mf_status mf_gallery_enroll(const mf_transform* transform, const mf_dataset* dataset, mf_gallery** out);
MF_API mf_status mf_gallery_load(const char* path, mf_gallery** out);
MF_API mf_status mf_gallery_save(const mf_gallery* gallery, const char* path);
MF_API size_t mf_gallery_size(const mf_gallery* gallery);
/*
 * Winner-takes-all identification of every probe sample. Labels of the probe
 * dataset are ignored. Result: JSON array of {"sample_id", "label",
 * "distance"}. Fails with MF_ERR_STALE if the gallery was enrolled with a
 * different transform.
 */
MF_API mf_status mf_gallery_identify(const mf_gallery* gallery, const mf_transform* transform,
                                     const mf_dataset* probes, char** json_out);
MF_API void mf_gallery_free(mf_gallery* gallery);

/* ---- evaluation -------------------------------------------------------- */

typedef struct mf_eval_config {
  mf_method method;
  size_t outer_folds;
  size_t inner_folds;
  uint64_t seed;
  mf_pair_policy pair_policy;
  mf_context_source context_source;
  size_t pca_dim;  /* 0: default */
  size_t workers;  /* never changes results */
} mf_eval_config;

typedef struct mf_headline {
  double ccr;
  double eer;
  double auc;
  double map;
  double dbi;
  double di;
  double sc;
  double fdr;
} mf_headline;

MF_API void mf_eval_config_default(mf_eval_config* config);
MF_API mf_status mf_evaluate(const mf_dataset* dataset, const mf_eval_config* config, mf_report** out);
MF_API mf_status mf_report_headline(const mf_report* report, mf_headline* out);
MF_API size_t mf_report_fold_count(const mf_report* report);
MF_API mf_status mf_report_to_json(const mf_report* report, char** out);
/* Writes the JSON report and, if curves_dir is non-NULL, one CSV per curve kind. */
MF_API mf_status mf_report_write(const mf_report* report, const char* json_path, const char* curves_dir);
MF_API void mf_report_free(mf_report* report);

#ifdef __cplusplus
}
#endif

#endif
