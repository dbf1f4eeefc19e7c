#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "marginforge/dataset.hpp"

namespace marginforge {

enum class Axis { kX = 0, kY = 1, kZ = 2 };

// Translates every frame so that `root_joint` sits at the origin.
GaitSample center_on_root(const GaitSample& sample, std::size_t root_joint);

/// Rigidly rotates the sample so the walker faces +Z with +Y up and +X to the
/// walker's left. `up_axis` names the up axis of the input coordinates; the
/// walk direction is the first-to-last displacement of `root_joint` projected
/// onto the horizontal plane. Must run before center_on_root (centering erases
/// the root trajectory). Throws kAlignment if that displacement is zero.
GaitSample align_walk_direction(const GaitSample& sample, Axis up_axis, std::size_t root_joint = 0);

// Linear interpolation of every coordinate signal at `frames` uniformly spaced
// parameters over [0, 1]; endpoints are reproduced exactly.
GaitSample resample_time(const GaitSample& sample, std::size_t frames);

// round-half-up of the mean raw frame count, at least 2.
std::size_t average_length(std::span<const GaitSample> samples);
std::size_t average_length(const LabeledDataset& dataset);

/// Per-frame feature sequence: one row per frame.
using FrameSequence = Eigen::MatrixXd;

// Classic unconstrained DTW: Euclidean local cost, steps (1,0) (0,1) (1,1),
// both endpoints aligned.
double dtw_distance(const FrameSequence& a, const FrameSequence& b);

// Rows are frames, columns the 3*J joint coordinates of the frame.
FrameSequence frame_sequence(const GaitSample& sample);

std::vector<GaitSample> filter_gait_cycles(std::span<const GaitSample> candidates,
                                           const GaitSample& exemplar, double threshold);

// Candidate minimizing the summed DTW distance to all others; ties go to the
// smallest sample_id.
std::size_t dtw_medoid(std::span<const GaitSample> candidates);

struct PreprocessOptions {
  bool align = true;
  Axis up_axis = Axis::kY;
  bool center = true;
  std::size_t root_joint = 0;
  std::optional<double> dtw_threshold;  // per-class filter against the class medoid
  bool resample = true;
  std::size_t target_frames = 0;  // 0: average length after filtering
};

struct PreprocessResult {
  LabeledDataset dataset;
  std::vector<std::string> removed_ids;
  std::size_t target_frames = 0;  // 0 when not resampled
};

// align -> center -> DTW filter -> resample, each stage optional.
PreprocessResult preprocess_dataset(const LabeledDataset& dataset, const PreprocessOptions& options);

}  // namespace marginforge
