#include "marginforge/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <nlohmann/json.hpp>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "marginforge/error.hpp"
#include "marginforge/io.hpp"

namespace marginforge {

using nlohmann::json;

void validate_sample(const GaitSample& sample) {
  if (sample.frames.size() < 2) {
    fail(ErrorCode::kSchema, "sample '" + sample.sample_id + "' has fewer than 2 frames");
  }
  const std::size_t joints = sample.frames.front().size();
  if (joints == 0) fail(ErrorCode::kSchema, "sample '" + sample.sample_id + "' has no joints");
  for (std::size_t t = 0; t < sample.frames.size(); ++t) {
    const auto& frame = sample.frames[t];
    if (frame.size() != joints) {
      fail(ErrorCode::kSchema, "sample '" + sample.sample_id + "' frame " + std::to_string(t) +
                                   " has " + std::to_string(frame.size()) + " joints, expected " +
                                   std::to_string(joints));
    }
    for (const auto& p : frame) {
      if (!p.allFinite()) {
        fail(ErrorCode::kSchema, "sample '" + sample.sample_id + "' has a non-finite coordinate");
      }
    }
  }
}

LabeledDataset::LabeledDataset(std::vector<GaitSample> samples) : samples_(std::move(samples)) {
  if (samples_.empty()) fail(ErrorCode::kSchema, "no samples");
  std::set<std::string> seen_ids;
  std::map<std::string, std::vector<std::size_t>> by_label;
  joint_count_ = samples_.front().joint_count();
  for (std::size_t n = 0; n < samples_.size(); ++n) {
    const auto& s = samples_[n];
    validate_sample(s);
    if (s.joint_count() != joint_count_) {
      fail(ErrorCode::kSchema, "sample '" + s.sample_id + "' has " +
                                   std::to_string(s.joint_count()) + " joints, dataset has " +
                                   std::to_string(joint_count_));
    }
    if (!s.label) fail(ErrorCode::kSchema, "sample '" + s.sample_id + "' is unlabeled");
    if (!seen_ids.insert(s.sample_id).second) {
      fail(ErrorCode::kSchema, "duplicate sample_id '" + s.sample_id + "'");
    }
    by_label[*s.label].push_back(n);
  }
  class_of_.resize(samples_.size());
  for (auto& [label, members] : by_label) {
    for (std::size_t n : members) class_of_[n] = class_labels_.size();
    class_labels_.push_back(label);
    class_index_.push_back(std::move(members));
  }
}

bool LabeledDataset::time_normalized() const noexcept {
  return std::all_of(samples_.begin(), samples_.end(), [&](const GaitSample& s) {
    return s.frame_count() == samples_.front().frame_count();
  });
}

FlatSample flatten(const GaitSample& sample, std::size_t frames) {
  require(sample.frame_count() == frames,
          "flatten: sample '" + sample.sample_id + "' has " +
              std::to_string(sample.frame_count()) + " frames, expected " +
              std::to_string(frames));
  const std::size_t joints = sample.joint_count();
  FlatSample flat{sample.sample_id, sample.label.value_or(""),
                  Eigen::VectorXd(static_cast<Eigen::Index>(3 * joints * frames))};
  Eigen::Index k = 0;
  for (const auto& frame : sample.frames) {
    for (const auto& p : frame) {
      flat.vector[k++] = p.x();
      flat.vector[k++] = p.y();
      flat.vector[k++] = p.z();
    }
  }
  return flat;
}

std::vector<JointFrame> unflatten(const Eigen::VectorXd& vector, std::size_t joints,
                                  std::size_t frames) {
  require(static_cast<std::size_t>(vector.size()) == 3 * joints * frames,
          "unflatten: vector length does not equal 3*J*T");
  std::vector<JointFrame> out(frames, JointFrame(joints));
  Eigen::Index k = 0;
  for (auto& frame : out) {
    for (auto& p : frame) {
      p = Point3(vector[k], vector[k + 1], vector[k + 2]);
      k += 3;
    }
  }
  return out;
}

VectorSet::VectorSet(Eigen::MatrixXd columns, std::vector<std::string> ids,
                     std::vector<std::string> labels)
    : columns_(std::move(columns)), ids_(std::move(ids)), labels_(std::move(labels)) {
  require(static_cast<std::size_t>(columns_.cols()) == ids_.size() && ids_.size() == labels_.size(),
          "VectorSet: column, id and label counts differ");
  std::map<std::string, std::vector<std::size_t>> by_label;
  for (std::size_t n = 0; n < labels_.size(); ++n) by_label[labels_[n]].push_back(n);
  class_of_.resize(labels_.size());
  for (auto& [label, members] : by_label) {
    for (std::size_t n : members) class_of_[n] = classes_.size();
    classes_.push_back(label);
    members_.push_back(std::move(members));
  }
}

VectorSet flatten_samples(const LabeledDataset& dataset, std::span<const std::size_t> indices) {
  require(!indices.empty(), "flatten_samples: empty selection");
  const std::size_t frames = dataset.sample(indices.front()).frame_count();
  const Eigen::Index dim = static_cast<Eigen::Index>(3 * dataset.joint_count() * frames);
  Eigen::MatrixXd columns(dim, static_cast<Eigen::Index>(indices.size()));
  std::vector<std::string> ids;
  std::vector<std::string> labels;
  ids.reserve(indices.size());
  labels.reserve(indices.size());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const auto& sample = dataset.sample(indices[i]);
    if (sample.frame_count() != frames) {
      fail(ErrorCode::kSchema, "samples are not time-normalized ('" + sample.sample_id + "' has " +
                                   std::to_string(sample.frame_count()) + " frames, expected " +
                                   std::to_string(frames) + "); resample them first");
    }
    FlatSample flat = flatten(sample, frames);
    columns.col(static_cast<Eigen::Index>(i)) = flat.vector;
    ids.push_back(std::move(flat.sample_id));
    labels.push_back(std::move(flat.label));
  }
  return VectorSet(std::move(columns), std::move(ids), std::move(labels));
}

VectorSet flatten_all(const LabeledDataset& dataset) {
  std::vector<std::size_t> all(dataset.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  return flatten_samples(dataset, all);
}

DatasetFormat dataset_format_from_path(std::string_view path) {
  return path.ends_with(".csv") ? DatasetFormat::kCsv : DatasetFormat::kJsonl;
}

namespace {

[[noreturn]] void parse_fail(std::size_t line, const std::string& what) {
  fail(ErrorCode::kParse, "line " + std::to_string(line) + ": " + what);
}

GaitSample sample_from_json(const json& record, std::size_t line) {
  if (!record.is_object()) parse_fail(line, "record is not a JSON object");
  GaitSample sample;
  if (!record.contains("sample_id") || !record["sample_id"].is_string()) {
    parse_fail(line, "missing string field 'sample_id'");
  }
  sample.sample_id = record["sample_id"].get<std::string>();
  if (record.contains("label") && !record["label"].is_null()) {
    if (!record["label"].is_string()) parse_fail(line, "'label' must be a string");
    sample.label = record["label"].get<std::string>();
  }
  if (!record.contains("frames") || !record["frames"].is_array()) {
    parse_fail(line, "missing array field 'frames'");
  }
  for (const auto& frame : record["frames"]) {
    if (!frame.is_array()) parse_fail(line, "frame is not an array of joints");
    JointFrame joints;
    joints.reserve(frame.size());
    for (const auto& p : frame) {
      if (!p.is_array() || p.size() != 3 || !p[0].is_number() || !p[1].is_number() ||
          !p[2].is_number()) {
        parse_fail(line, "joint coordinate must be [x, y, z]");
      }
      joints.emplace_back(p[0].get<double>(), p[1].get<double>(), p[2].get<double>());
    }
    sample.frames.push_back(std::move(joints));
  }
  try {
    validate_sample(sample);
  } catch (const Error& e) {
    fail(ErrorCode::kSchema, "line " + std::to_string(line) + ": " + e.what());
  }
  return sample;
}

std::vector<GaitSample> parse_jsonl(std::string_view text) {
  std::vector<GaitSample> samples;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    ++line_no;
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) {
      if (end == text.size()) break;
      continue;
    }
    json record;
    try {
      record = json::parse(line);
    } catch (const json::parse_error& e) {
      parse_fail(line_no, std::string("malformed JSON: ") + e.what());
    }
    samples.push_back(sample_from_json(record, line_no));
    if (end == text.size()) break;
  }
  return samples;
}

std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  for (;;) {
    std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return fields;
}

template <typename T>
T parse_number(std::string_view field, std::size_t line, const char* what) {
  T value{};
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc() || ptr != field.data() + field.size()) {
    parse_fail(line, std::string("invalid ") + what + " '" + std::string(field) + "'");
  }
  return value;
}

std::vector<GaitSample> parse_csv(std::string_view text) {
  std::vector<GaitSample> samples;
  std::set<std::string> finished;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  bool header_seen = false;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    ++line_no;
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    if (!header_seen) {
      if (line != "sample_id,label,frame,joint,x,y,z") {
        parse_fail(line_no, "expected header 'sample_id,label,frame,joint,x,y,z'");
      }
      header_seen = true;
      continue;
    }
    auto fields = split_csv(line);
    if (fields.size() != 7) parse_fail(line_no, "expected 7 fields");
    const std::string id(fields[0]);
    const std::string label(fields[1]);
    const auto frame = parse_number<std::size_t>(fields[2], line_no, "frame index");
    const auto joint = parse_number<std::size_t>(fields[3], line_no, "joint index");
    const Point3 p(parse_number<double>(fields[4], line_no, "x"),
                   parse_number<double>(fields[5], line_no, "y"),
                   parse_number<double>(fields[6], line_no, "z"));

    if (samples.empty() || samples.back().sample_id != id) {
      if (!samples.empty()) finished.insert(samples.back().sample_id);
      if (finished.count(id)) parse_fail(line_no, "rows of sample '" + id + "' are not contiguous");
      GaitSample s;
      s.sample_id = id;
      if (!label.empty()) s.label = label;
      samples.push_back(std::move(s));
    }
    GaitSample& s = samples.back();
    if (s.label.value_or("") != label) parse_fail(line_no, "label changes within sample '" + id + "'");
    if (joint == 0) {
      if (frame != s.frames.size()) parse_fail(line_no, "frame index out of order");
      s.frames.emplace_back();
    } else if (s.frames.empty() || frame + 1 != s.frames.size()) {
      parse_fail(line_no, "frame index out of order");
    }
    if (joint != s.frames.back().size()) parse_fail(line_no, "joint index out of order");
    s.frames.back().push_back(p);
  }
  for (const auto& s : samples) validate_sample(s);
  return samples;
}

void append_double(std::string& out, double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  out.append(buf, ptr);
}

}  // namespace

LabeledDataset parse_dataset(std::string_view text, DatasetFormat format) {
  return LabeledDataset(format == DatasetFormat::kCsv ? parse_csv(text) : parse_jsonl(text));
}

LabeledDataset load_dataset(const std::string& path, DatasetFormat format) {
  return parse_dataset(read_text_file(path), format);
}

std::string serialize_dataset(const LabeledDataset& dataset, DatasetFormat format) {
  std::string out;
  if (format == DatasetFormat::kJsonl) {
    for (const auto& s : dataset.samples()) {
      json frames = json::array();
      for (const auto& frame : s.frames) {
        json joints = json::array();
        for (const auto& p : frame) joints.push_back({p.x(), p.y(), p.z()});
        frames.push_back(std::move(joints));
      }
      json record = {{"sample_id", s.sample_id}, {"label", *s.label}, {"frames", std::move(frames)}};
      out += record.dump();
      out += '\n';
    }
    return out;
  }
  std::vector<const GaitSample*> order;
  for (const auto& s : dataset.samples()) order.push_back(&s);
  std::sort(order.begin(), order.end(),
            [](const GaitSample* a, const GaitSample* b) { return a->sample_id < b->sample_id; });
  out += "sample_id,label,frame,joint,x,y,z\n";
  for (const GaitSample* s : order) {
    for (std::size_t t = 0; t < s->frames.size(); ++t) {
      for (std::size_t j = 0; j < s->frames[t].size(); ++j) {
        const auto& p = s->frames[t][j];
        out += s->sample_id;
        out += ',';
        out += *s->label;
        out += ',';
        out += std::to_string(t);
        out += ',';
        out += std::to_string(j);
        for (int k = 0; k < 3; ++k) {
          out += ',';
          append_double(out, p[k]);
        }
        out += '\n';
      }
    }
  }
  return out;
}

void save_dataset(const LabeledDataset& dataset, const std::string& path, DatasetFormat format) {
  write_text_file_atomic(path, serialize_dataset(dataset, format));
}

LabeledDataset generate_synthetic(const SyntheticSpec& spec) {
  require(spec.classes >= 2, "generate_synthetic: need at least 2 classes");
  require(spec.samples_per_class >= 2, "generate_synthetic: need at least 2 samples per class");
  require(spec.joints >= 1, "generate_synthetic: need at least 1 joint");
  require(spec.frames >= 2, "generate_synthetic: need at least 2 frames");
  require(std::isfinite(spec.class_spread) && spec.class_spread > 0,
          "generate_synthetic: class spread must be > 0");
  require(std::isfinite(spec.noise) && spec.noise >= 0, "generate_synthetic: noise must be >= 0");

  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> unit(0.0, 1.0);
  const std::size_t dim = 3 * spec.joints * spec.frames;
  const int width = static_cast<int>(std::to_string(spec.classes - 1).size());
  const int sample_width = static_cast<int>(std::to_string(spec.samples_per_class - 1).size());
  auto padded = [](std::size_t v, int w) {
    std::string s = std::to_string(v);
    return std::string(static_cast<std::size_t>(std::max(0, w - static_cast<int>(s.size()))), '0') + s;
  };

  std::vector<GaitSample> samples;
  samples.reserve(spec.classes * spec.samples_per_class);
  Eigen::VectorXd mean(static_cast<Eigen::Index>(dim));
  Eigen::VectorXd draw(static_cast<Eigen::Index>(dim));
  for (std::size_t c = 0; c < spec.classes; ++c) {
    for (Eigen::Index k = 0; k < mean.size(); ++k) mean[k] = spec.class_spread * unit(rng);
    const std::string label = "s" + padded(c, std::max(2, width));
    for (std::size_t i = 0; i < spec.samples_per_class; ++i) {
      for (Eigen::Index k = 0; k < draw.size(); ++k) draw[k] = mean[k] + spec.noise * unit(rng);
      GaitSample s;
      s.sample_id = label + "_" + padded(i, std::max(3, sample_width));
      s.label = label;
      s.frames = unflatten(draw, spec.joints, spec.frames);
      samples.push_back(std::move(s));
    }
  }
  return LabeledDataset(std::move(samples));
}

LabeledDataset shuffle_labels(const LabeledDataset& dataset, std::uint64_t seed) {
  std::vector<std::string> labels;
  labels.reserve(dataset.size());
  for (const auto& s : dataset.samples()) labels.push_back(*s.label);
  std::mt19937_64 rng(seed);
  std::shuffle(labels.begin(), labels.end(), rng);
  std::vector<GaitSample> samples(dataset.samples().begin(), dataset.samples().end());
  for (std::size_t n = 0; n < samples.size(); ++n) samples[n].label = labels[n];
  return LabeledDataset(std::move(samples));
}

}  // namespace marginforge
