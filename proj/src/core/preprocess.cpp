#include "marginforge/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "marginforge/error.hpp"

namespace marginforge {

GaitSample center_on_root(const GaitSample& sample, std::size_t root_joint) {
  require(root_joint < sample.joint_count(),
          "center_on_root: root joint " + std::to_string(root_joint) + " out of range");
  GaitSample out = sample;
  for (auto& frame : out.frames) {
    const Point3 root = frame[root_joint];
    for (auto& p : frame) p -= root;
    frame[root_joint].setZero();
  }
  return out;
}

namespace {

// Proper rotation taking `up` onto +Y.
Eigen::Matrix3d up_to_y(Axis up) {
  Eigen::Matrix3d r;
  switch (up) {
    case Axis::kY:
      r.setIdentity();
      break;
    case Axis::kZ:  // (x, y, z) -> (x, z, -y)
      r << 1, 0, 0,
           0, 0, 1,
           0, -1, 0;
      break;
    case Axis::kX:  // (x, y, z) -> (-y, x, z)
      r << 0, -1, 0,
           1, 0, 0,
           0, 0, 1;
      break;
  }
  return r;
}

}  // namespace

GaitSample align_walk_direction(const GaitSample& sample, Axis up_axis, std::size_t root_joint) {
  require(sample.frame_count() >= 2, "align_walk_direction: need at least 2 frames");
  require(root_joint < sample.joint_count(), "align_walk_direction: root joint out of range");
  const Eigen::Matrix3d to_y = up_to_y(up_axis);
  const Point3 displacement =
      to_y * (sample.frames.back()[root_joint] - sample.frames.front()[root_joint]);
  const double horizontal = std::hypot(displacement.x(), displacement.z());

  double scale = 1.0;
  for (const auto& frame : sample.frames) {
    for (const auto& p : frame) scale = std::max(scale, p.cwiseAbs().maxCoeff());
  }
  if (!(horizontal > 1e-12 * scale)) {
    fail(ErrorCode::kAlignment,
         "sample '" + sample.sample_id + "': zero horizontal root displacement, walk direction undefined");
  }

  // Rotation about +Y by -atan2(dx, dz) sends (dx, 0, dz) to (0, 0, |h|).
  const double angle = -std::atan2(displacement.x(), displacement.z());
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  Eigen::Matrix3d about_y;
  about_y << c, 0, s,
             0, 1, 0,
             -s, 0, c;
  const Eigen::Matrix3d rotation = about_y * to_y;

  GaitSample out = sample;
  for (auto& frame : out.frames) {
    for (auto& p : frame) p = rotation * p;
  }
  return out;
}

GaitSample resample_time(const GaitSample& sample, std::size_t frames) {
  require(frames >= 2, "resample_time: target frame count must be >= 2");
  require(sample.frame_count() >= 2, "resample_time: sample needs at least 2 frames");
  const std::size_t raw = sample.frame_count();
  GaitSample out;
  out.sample_id = sample.sample_id;
  out.label = sample.label;
  out.frames.reserve(frames);
  for (std::size_t k = 0; k < frames; ++k) {
    // Exact position k*(raw-1)/(frames-1) split into integer and fractional parts.
    const std::size_t numerator = k * (raw - 1);
    const std::size_t i = numerator / (frames - 1);
    const std::size_t rem = numerator % (frames - 1);
    if (rem == 0) {
      out.frames.push_back(sample.frames[i]);
      continue;
    }
    const double f = static_cast<double>(rem) / static_cast<double>(frames - 1);
    const auto& lo = sample.frames[i];
    const auto& hi = sample.frames[i + 1];
    JointFrame frame(lo.size());
    for (std::size_t j = 0; j < lo.size(); ++j) frame[j] = lo[j] + f * (hi[j] - lo[j]);
    out.frames.push_back(std::move(frame));
  }
  return out;
}

std::size_t average_length(std::span<const GaitSample> samples) {
  require(!samples.empty(), "average_length: empty dataset");
  std::size_t total = 0;
  for (const auto& s : samples) total += s.frame_count();
  const std::size_t n = samples.size();
  const std::size_t rounded = (2 * total + n) / (2 * n);
  return std::max<std::size_t>(rounded, 2);
}

std::size_t average_length(const LabeledDataset& dataset) {
  return average_length(dataset.samples());
}

double dtw_distance(const FrameSequence& a, const FrameSequence& b) {
  require(a.rows() > 0 && b.rows() > 0, "dtw_distance: empty sequence");
  require(a.cols() == b.cols(), "dtw_distance: per-frame dimensionality mismatch");
  const Eigen::Index n = a.rows();
  const Eigen::Index m = b.rows();
  constexpr double inf = std::numeric_limits<double>::infinity();
  std::vector<double> prev(static_cast<std::size_t>(m), inf);
  std::vector<double> cur(static_cast<std::size_t>(m), inf);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < m; ++j) {
      const double cost = (a.row(i) - b.row(j)).norm();
      double best;
      if (i == 0 && j == 0) {
        best = 0.0;
      } else {
        best = inf;
        if (i > 0) best = std::min(best, prev[static_cast<std::size_t>(j)]);
        if (j > 0) best = std::min(best, cur[static_cast<std::size_t>(j - 1)]);
        if (i > 0 && j > 0) best = std::min(best, prev[static_cast<std::size_t>(j - 1)]);
      }
      cur[static_cast<std::size_t>(j)] = best + cost;
    }
    std::swap(prev, cur);
  }
  return prev[static_cast<std::size_t>(m - 1)];
}

FrameSequence frame_sequence(const GaitSample& sample) {
  const Eigen::Index joints = static_cast<Eigen::Index>(sample.joint_count());
  FrameSequence seq(static_cast<Eigen::Index>(sample.frame_count()), 3 * joints);
  for (Eigen::Index t = 0; t < seq.rows(); ++t) {
    const auto& frame = sample.frames[static_cast<std::size_t>(t)];
    for (Eigen::Index j = 0; j < joints; ++j) {
      seq.block<1, 3>(t, 3 * j) = frame[static_cast<std::size_t>(j)].transpose();
    }
  }
  return seq;
}

std::vector<GaitSample> filter_gait_cycles(std::span<const GaitSample> candidates,
                                           const GaitSample& exemplar, double threshold) {
  require(threshold >= 0, "filter_gait_cycles: threshold must be >= 0");
  const FrameSequence reference = frame_sequence(exemplar);
  std::vector<GaitSample> kept;
  for (const auto& candidate : candidates) {
    if (dtw_distance(frame_sequence(candidate), reference) <= threshold) kept.push_back(candidate);
  }
  return kept;
}

std::size_t dtw_medoid(std::span<const GaitSample> candidates) {
  require(!candidates.empty(), "dtw_medoid: no candidates");
  std::vector<FrameSequence> seqs;
  for (const auto& c : candidates) seqs.push_back(frame_sequence(c));
  const std::size_t n = candidates.size();
  std::vector<double> total(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double d = dtw_distance(seqs[i], seqs[j]);
      total[i] += d;
      total[j] += d;
    }
  }
  std::size_t best = 0;
  for (std::size_t i = 1; i < n; ++i) {
    if (total[i] < total[best] || (total[i] == total[best] && candidates[i].sample_id < candidates[best].sample_id)) {
      best = i;
    }
  }
  return best;
}

PreprocessResult preprocess_dataset(const LabeledDataset& dataset, const PreprocessOptions& options) {
  std::vector<GaitSample> samples(dataset.samples().begin(), dataset.samples().end());
  for (auto& s : samples) {
    try {
      if (options.align) s = align_walk_direction(s, options.up_axis, options.root_joint);
      if (options.center) s = center_on_root(s, options.root_joint);
    } catch (const Error& e) {
      throw Error(e.code(), "sample '" + s.sample_id + "': " + e.what());
    }
  }

  std::vector<std::string> removed;
  if (options.dtw_threshold) {
    require(*options.dtw_threshold >= 0, "dtw threshold must be >= 0");
    for (std::size_t c = 0; c < dataset.class_count(); ++c) {
      std::vector<GaitSample> members;
      for (std::size_t n : dataset.class_members(c)) members.push_back(samples[n]);
      const GaitSample exemplar = members[dtw_medoid(members)];
      std::vector<GaitSample> survivors = filter_gait_cycles(members, exemplar, *options.dtw_threshold);
      std::size_t next = 0;
      for (const auto& m : members) {
        if (next < survivors.size() && survivors[next].sample_id == m.sample_id) {
          ++next;
        } else {
          removed.push_back(m.sample_id);
        }
      }
    }
    // Restore input order.
    std::vector<GaitSample> ordered;
    for (auto& s : samples) {
      if (std::find(removed.begin(), removed.end(), s.sample_id) == removed.end()) ordered.push_back(std::move(s));
    }
    samples = std::move(ordered);
    std::sort(removed.begin(), removed.end());
  }

  std::size_t frames = 0;
  if (options.resample) {
    frames = options.target_frames != 0 ? options.target_frames : average_length(samples);
    for (auto& s : samples) s = resample_time(s, frames);
  }
  return PreprocessResult{LabeledDataset(std::move(samples)), std::move(removed), frames};
}

}  // namespace marginforge
