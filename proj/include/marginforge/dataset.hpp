#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace marginforge {

using Point3 = Eigen::Vector3d;

// Coordinates of every joint at one time step, in meters.
using JointFrame = std::vector<Point3>;

/// One gait cycle: a sequence of joint frames with an optional identity label.
struct GaitSample {
  std::string sample_id;
  std::optional<std::string> label;
  std::vector<JointFrame> frames;

  std::size_t frame_count() const noexcept { return frames.size(); }
  std::size_t joint_count() const noexcept { return frames.empty() ? 0 : frames.front().size(); }
};

// Throws kSchema unless the sample has >= 2 frames, a uniform joint count >= 1
// and finite coordinates.
void validate_sample(const GaitSample& sample);

/// Immutable set of labeled gait samples with a dense class index.
///
/// Labels are opaque strings; class indices follow the lexicographic order of
/// the labels so the mapping is independent of sample order.
class LabeledDataset {
 public:
  explicit LabeledDataset(std::vector<GaitSample> samples);

  std::span<const GaitSample> samples() const noexcept { return samples_; }
  const GaitSample& sample(std::size_t n) const { return samples_.at(n); }
  std::size_t size() const noexcept { return samples_.size(); }
  std::size_t joint_count() const noexcept { return joint_count_; }

  std::size_t class_count() const noexcept { return class_labels_.size(); }
  std::span<const std::string> class_labels() const noexcept { return class_labels_; }
  std::span<const std::size_t> class_members(std::size_t c) const { return class_index_.at(c); }
  std::size_t class_of(std::size_t n) const { return class_of_.at(n); }

  // True when every sample has the same frame count.
  bool time_normalized() const noexcept;

 private:
  std::vector<GaitSample> samples_;
  std::size_t joint_count_ = 0;
  std::vector<std::string> class_labels_;
  std::vector<std::vector<std::size_t>> class_index_;
  std::vector<std::size_t> class_of_;
};

/// A gait sample flattened to D = 3*J*T, frame-major, joint-minor,
/// coordinate-innermost.
struct FlatSample {
  std::string sample_id;
  std::string label;
  Eigen::VectorXd vector;
};

FlatSample flatten(const GaitSample& sample, std::size_t frames);
std::vector<JointFrame> unflatten(const Eigen::VectorXd& vector, std::size_t joints,
                                  std::size_t frames);

/// Column-major collection of labeled vectors (samples or templates) grouped
/// by class. Classes are the sorted distinct labels.
class VectorSet {
 public:
  VectorSet() = default;
  VectorSet(Eigen::MatrixXd columns, std::vector<std::string> ids,
            std::vector<std::string> labels);

  const Eigen::MatrixXd& columns() const noexcept { return columns_; }
  Eigen::Index dimension() const noexcept { return columns_.rows(); }
  std::size_t size() const noexcept { return ids_.size(); }
  const std::string& id(std::size_t n) const { return ids_.at(n); }
  const std::string& label(std::size_t n) const { return labels_.at(n); }
  std::span<const std::string> ids() const noexcept { return ids_; }
  std::span<const std::string> labels() const noexcept { return labels_; }

  std::size_t class_count() const noexcept { return classes_.size(); }
  std::span<const std::string> classes() const noexcept { return classes_; }
  std::size_t class_of(std::size_t n) const { return class_of_.at(n); }
  std::span<const std::size_t> class_members(std::size_t c) const { return members_.at(c); }

 private:
  Eigen::MatrixXd columns_;
  std::vector<std::string> ids_;
  std::vector<std::string> labels_;
  std::vector<std::string> classes_;
  std::vector<std::size_t> class_of_;
  std::vector<std::vector<std::size_t>> members_;
};

// Flattens the samples at `indices`, in that order. Requires a common frame
// count across the selection.
VectorSet flatten_samples(const LabeledDataset& dataset, std::span<const std::size_t> indices);
VectorSet flatten_all(const LabeledDataset& dataset);

enum class DatasetFormat { kJsonl, kCsv };

DatasetFormat dataset_format_from_path(std::string_view path);

LabeledDataset parse_dataset(std::string_view text, DatasetFormat format);
LabeledDataset load_dataset(const std::string& path, DatasetFormat format);
std::string serialize_dataset(const LabeledDataset& dataset, DatasetFormat format);
void save_dataset(const LabeledDataset& dataset, const std::string& path, DatasetFormat format);

struct SyntheticSpec {
  std::size_t classes = 10;
  std::size_t samples_per_class = 50;
  std::size_t joints = 5;
  std::size_t frames = 10;
  double class_spread = 5.0;  // scale of the per-class mean trajectory
  double noise = 0.5;         // per-sample perturbation scale
  std::uint64_t seed = 7;
};

/// Gaussian class structure: each class mean trajectory ~ N(0, spread^2 I),
/// each sample = class mean + N(0, noise^2 I). Pure function of `spec`.
LabeledDataset generate_synthetic(const SyntheticSpec& spec);

// Seeded random permutation of the label column (class sizes preserved).
LabeledDataset shuffle_labels(const LabeledDataset& dataset, std::uint64_t seed);

}  // namespace marginforge
