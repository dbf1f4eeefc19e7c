// marginforge command-line front end. Talks to the library only through the
// C interface.

#include <CLI11.hpp>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <nlohmann/json.hpp>
#include <optional>
#include <sstream>
#include <string>
#include <unistd.h>
#include <vector>

#include "marginforge/marginforge.h"

namespace {

constexpr int kUsageExit = 2;

// Library statuses map to exit codes 10 + status so every status is distinct
// from usage errors.
int exit_code_for(mf_status status) { return 10 + static_cast<int>(status); }

std::string quoted(const std::string& text) {
  std::string out = "\"";
  for (char c : text) {
    if (c == '"' || c == '\\') {
      out += '\\';
      out += c;
    } else if (c == '\n') {
      out += "\\n";
    } else {
      out += c;
    }
  }
  return out + "\"";
}

int report_error(const std::string& code, int exit_code, const std::string& message) {
  std::cerr << "error: code=" << code << " exit=" << exit_code << " message=" << quoted(message) << "\n";
  return exit_code;
}

struct Failure {
  mf_status status;
  std::string message;
};

void check(mf_status status) {
  if (status != MF_OK) throw Failure{status, mf_last_error()};
}

struct UsageFailure {
  std::string message;
};

template <typename T, void (*Free)(T*)>
struct Deleter {
  void operator()(T* p) const { Free(p); }
};
using Dataset = std::unique_ptr<mf_dataset, Deleter<mf_dataset, mf_dataset_free>>;
using Transform = std::unique_ptr<mf_transform, Deleter<mf_transform, mf_transform_free>>;
using Gallery = std::unique_ptr<mf_gallery, Deleter<mf_gallery, mf_gallery_free>>;
using Report = std::unique_ptr<mf_report, Deleter<mf_report, mf_report_free>>;
using CString = std::unique_ptr<char, Deleter<char, mf_string_free>>;

Dataset load_dataset(const std::string& path) {
  mf_dataset* raw = nullptr;
  check(mf_dataset_load(path.c_str(), &raw));
  return Dataset(raw);
}

Transform load_transform(const std::string& path) {
  mf_transform* raw = nullptr;
  check(mf_transform_load(path.c_str(), &raw));
  return Transform(raw);
}

void write_atomic(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Failure{MF_ERR_IO, "cannot open '" + tmp + "' for writing"};
    out << content;
    out.flush();
    if (!out) throw Failure{MF_ERR_IO, "failed writing '" + tmp + "'"};
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw Failure{MF_ERR_IO, "cannot rename onto '" + path + "'"};
  }
}

mf_method method_from(const std::string& name) {
  if (name == "mmc") return MF_METHOD_MMC;
  if (name == "pca-lda" || name == "pca_lda") return MF_METHOD_PCA_LDA;
  if (name == "identity") return MF_METHOD_IDENTITY;
  throw UsageFailure{"unknown method '" + name + "'"};
}

const char* method_label(mf_method m) {
  switch (m) {
    case MF_METHOD_MMC: return "mmc";
    case MF_METHOD_PCA_LDA: return "pca_lda";
    case MF_METHOD_IDENTITY: return "identity";
  }
  return "?";
}

// ---- configuration file ----------------------------------------------------

// Flattens a JSON object of flag values into argv tokens placed ahead of
// the command-line flags, so explicit flags win under TakeLast.
std::vector<std::string> config_arguments(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Failure{MF_ERR_IO, "cannot open config '" + path + "'"};
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw Failure{MF_ERR_PARSE, "config '" + path + "': " + e.what()};
  }
  if (!doc.is_object()) throw Failure{MF_ERR_SCHEMA, "config '" + path + "' must be a JSON object"};
  std::vector<std::string> args;
  const auto scalar = [&](const std::string& key, const nlohmann::json& v) -> std::string {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_number_integer() || v.is_number_unsigned() || v.is_number_float()) return v.dump();
    throw Failure{MF_ERR_SCHEMA, "config key '" + key + "' has an unsupported value"};
  };
  for (const auto& [raw_key, value] : doc.items()) {
    std::string key = raw_key;
    std::replace(key.begin(), key.end(), '_', '-');
    const std::string flag = "--" + key;
    if (value.is_boolean()) {
      if (value.get<bool>()) args.push_back(flag);
    } else if (value.is_array()) {
      args.push_back(flag);
      for (const auto& item : value) args.push_back(scalar(raw_key, item));
    } else if (!value.is_null()) {
      args.push_back(flag);
      args.push_back(scalar(raw_key, value));
    }
  }
  return args;
}

// argv with config-file flags spliced in right after the subcommand name.
std::vector<std::string> expand_arguments(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  std::optional<std::string> config;
  std::vector<std::string> rest;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config") {
      if (i + 1 >= args.size()) throw UsageFailure{"--config needs a file argument"};
      config = args[++i];
    } else if (args[i].rfind("--config=", 0) == 0) {
      config = args[i].substr(9);
    } else {
      rest.push_back(args[i]);
    }
  }
  if (!config) return rest;
  std::vector<std::string> expanded;
  std::size_t insert_at = rest.empty() || rest.front().rfind("-", 0) == 0 ? 0 : 1;
  expanded.insert(expanded.end(), rest.begin(), rest.begin() + static_cast<std::ptrdiff_t>(insert_at));
  const std::vector<std::string> from_file = config_arguments(*config);
  expanded.insert(expanded.end(), from_file.begin(), from_file.end());
  expanded.insert(expanded.end(), rest.begin() + static_cast<std::ptrdiff_t>(insert_at), rest.end());
  return expanded;
}

// ---- evaluation option block, shared by evaluate and compare -------------

struct EvalFlags {
  std::string method = "mmc";
  std::uint64_t seed = 1;
  std::size_t outer_folds = 3;
  std::size_t inner_folds = 10;
  std::string pair_policy = "all";
  std::string context_source = "learning";
  std::size_t pca_dim = 0;
  std::size_t workers = 1;
};

void add_eval_flags(CLI::App* cmd, EvalFlags& f, bool with_method) {
  if (with_method) {
    cmd->add_option("--method", f.method, "Feature learner")
        ->check(CLI::IsMember({"mmc", "pca-lda", "pca_lda", "identity"}))
        ->capture_default_str();
  }
  cmd->add_option("--seed", f.seed, "Fold-assignment seed")->capture_default_str();
  cmd->add_option("--outer-folds", f.outer_folds, "Outer cross-validation folds")->capture_default_str();
  cmd->add_option("--inner-folds", f.inner_folds, "Inner cross-validation folds")->capture_default_str();
  cmd->add_option("--pair-policy", f.pair_policy, "Genuine/impostor pairs for threshold metrics")
      ->check(CLI::IsMember({"all", "class-best", "class_best"}))
      ->capture_default_str();
  cmd->add_option("--context-source", f.context_source, "Templates whose scatter defines the Mahalanobis metric")
      ->check(CLI::IsMember({"learning", "gallery"}))
      ->capture_default_str();
  cmd->add_option("--pca-dim", f.pca_dim, "PCA dimension for pca-lda (0: class count)")->capture_default_str();
  cmd->add_option("--workers", f.workers, "Worker threads (results do not depend on it)")
      ->check(CLI::Range(std::size_t{1}, std::size_t{1024}))
      ->capture_default_str();
}

mf_eval_config eval_config(const EvalFlags& f, mf_method method) {
  mf_eval_config c;
  mf_eval_config_default(&c);
  c.method = method;
  c.seed = f.seed;
  c.outer_folds = f.outer_folds;
  c.inner_folds = f.inner_folds;
  c.pair_policy = f.pair_policy == "all" ? MF_PAIRS_ALL : MF_PAIRS_CLASS_BEST;
  c.context_source = f.context_source == "learning" ? MF_CONTEXT_LEARNING : MF_CONTEXT_GALLERY;
  c.pca_dim = f.pca_dim;
  c.workers = f.workers;
  return c;
}

Report run_eval(const mf_dataset* dataset, const EvalFlags& f, mf_method method) {
  const mf_eval_config c = eval_config(f, method);
  mf_report* raw = nullptr;
  check(mf_evaluate(dataset, &c, &raw));
  return Report(raw);
}

// ---- compare table ---------------------------------------------------------

struct Row {
  std::string method;
  mf_headline h;
};

std::string cell(double v, int precision) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::ostringstream s;
  s.setf(std::ios::fixed);
  s.precision(precision);
  s << v;
  return s.str();
}

std::string format_table(const std::vector<Row>& rows) {
  const std::vector<std::string> header = {"Method", "DBI", "DI", "SC", "FDR", "CCR", "EER", "AUC", "MAP"};
  std::vector<std::vector<std::string>> cells = {header};
  for (const auto& r : rows) {
    cells.push_back({r.method, cell(r.h.dbi, 4), cell(r.h.di, 4), cell(r.h.sc, 4), cell(r.h.fdr, 4),
                     cell(r.h.ccr, 4), cell(r.h.eer, 4), cell(r.h.auc, 4), cell(r.h.map, 4)});
  }
  std::vector<std::size_t> width(header.size(), 0);
  for (const auto& row : cells) {
    for (std::size_t i = 0; i < row.size(); ++i) width[i] = std::max(width[i], row[i].size());
  }
  std::string out;
  for (std::size_t r = 0; r < cells.size(); ++r) {
    for (std::size_t i = 0; i < cells[r].size(); ++i) {
      const std::string& c = cells[r][i];
      if (i == 0) {
        out += c + std::string(width[i] - c.size(), ' ');
      } else {
        out += "  " + std::string(width[i] - c.size(), ' ') + c;
      }
    }
    out += '\n';
    if (r == 0) {
      std::size_t total = 0;
      for (std::size_t w : width) total += w;
      out += std::string(total + 2 * (width.size() - 1), '-') + '\n';
    }
  }
  return out;
}

double json_number(const nlohmann::json& v) {
  if (v.is_number()) return v.get<double>();
  if (v.is_string()) {
    const std::string s = v.get<std::string>();
    if (s == "inf") return INFINITY;
    if (s == "-inf") return -INFINITY;
    if (s == "nan") return NAN;
  }
  throw Failure{MF_ERR_SCHEMA, "report headline value is not a number"};
}

Row row_from_report_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Failure{MF_ERR_IO, "cannot open report '" + path + "'"};
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw Failure{MF_ERR_PARSE, "report '" + path + "': " + e.what()};
  }
  try {
    const auto& h = doc.at("headline");
    return Row{doc.at("config").at("method").get<std::string>(),
               {json_number(h.at("ccr")), json_number(h.at("eer")), json_number(h.at("auc")),
                json_number(h.at("map")), json_number(h.at("dbi")), json_number(h.at("di")),
                json_number(h.at("sc")), json_number(h.at("fdr"))}};
  } catch (const nlohmann::json::exception& e) {
    throw Failure{MF_ERR_SCHEMA, "report '" + path + "': " + e.what()};
  }
}

std::string default_curves_dir(const std::string& report_path) {
  std::filesystem::path p(report_path);
  return (p.parent_path() / (p.stem().string() + "_curves")).string();
}

void emit(const std::string& output, const std::string& content) {
  if (output.empty() || output == "-") {
    std::cout << content;
  } else {
    write_atomic(output, content);
  }
}

void make_multi_take_last(CLI::App* app) {
  for (CLI::Option* opt : app->get_options()) {
    if (opt->get_expected_max() <= 1) opt->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  }
  for (CLI::App* sub : app->get_subcommands({})) make_multi_take_last(sub);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"marginforge: maximum-margin gait features, Mahalanobis matching and nested cross-validation"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(mf_version()));
  app.footer(
      "Every subcommand also accepts --config FILE: a JSON object whose keys are flag names; "
      "explicit flags override it.\nLog level: MARGINFORGE_LOG=trace|debug|info|warn|error|off.\n"
      "Exit codes: 0 ok, 2 usage, 10+status for library errors (see mf_status).");

  // gen
  std::string gen_output;
  std::size_t gen_classes = 10, gen_per_class = 50, gen_joints = 5, gen_frames = 10;
  double gen_spread = 5.0, gen_noise = 0.5;
  std::uint64_t gen_seed = 7;
  std::optional<std::uint64_t> gen_shuffle;
  auto* gen = app.add_subcommand("gen", "Generate a synthetic labeled dataset");
  gen->add_option("--output,-o", gen_output, "Dataset file (.jsonl or .csv)")->required();
  gen->add_option("--classes", gen_classes, "Number of identities")->capture_default_str();
  gen->add_option("--per-class", gen_per_class, "Samples per identity")->capture_default_str();
  gen->add_option("--joints", gen_joints, "Joints per frame")->capture_default_str();
  gen->add_option("--frames", gen_frames, "Frames per sample")->capture_default_str();
  gen->add_option("--class-spread", gen_spread, "Scale of class mean trajectories")->capture_default_str();
  gen->add_option("--noise", gen_noise, "Per-sample noise scale")->capture_default_str();
  gen->add_option("--seed", gen_seed, "Generator seed")->capture_default_str();
  gen->add_option("--shuffle-labels", gen_shuffle, "Permute labels with this seed (chance-level control)");

  // preprocess
  std::string pre_input, pre_output, pre_up = "y";
  std::size_t pre_root = 0, pre_frames = 0;
  std::optional<double> pre_dtw;
  bool pre_no_align = false, pre_no_center = false, pre_no_resample = false;
  auto* pre = app.add_subcommand("preprocess", "Align, center, filter and time-normalize a dataset");
  pre->add_option("--input,-i", pre_input, "Input dataset")->required();
  pre->add_option("--output,-o", pre_output, "Output dataset")->required();
  pre->add_option("--root-joint", pre_root, "Root joint index")->capture_default_str();
  pre->add_option("--up-axis", pre_up, "Up axis of the input coordinates")
      ->check(CLI::IsMember({"x", "y", "z"}))
      ->capture_default_str();
  pre->add_option("--target-frames", pre_frames, "Frames after resampling (0: average length)")
      ->capture_default_str();
  pre->add_option("--dtw-threshold", pre_dtw, "Drop samples farther than this DTW distance from their class medoid");
  pre->add_flag("--no-align", pre_no_align, "Skip walk-direction alignment");
  pre->add_flag("--no-center", pre_no_center, "Skip root centering");
  pre->add_flag("--no-resample", pre_no_resample, "Skip time normalization");

  // learn
  std::string learn_input, learn_output, learn_method = "mmc";
  std::size_t learn_pca = 0;
  auto* learn = app.add_subcommand("learn", "Learn a feature transform from a labeled dataset");
  learn->add_option("--input,-i", learn_input, "Labeled, time-normalized dataset")->required();
  learn->add_option("--output,-o", learn_output, "Transform file")->required();
  learn->add_option("--method", learn_method, "Feature learner")
      ->check(CLI::IsMember({"mmc", "pca-lda", "pca_lda", "identity"}))
      ->capture_default_str();
  learn->add_option("--pca-dim", learn_pca, "PCA dimension for pca-lda (0: class count)")->capture_default_str();

  // enroll
  std::string enroll_input, enroll_transform, enroll_output;
  auto* enroll = app.add_subcommand("enroll", "Extract gallery templates and their matching context");
  enroll->add_option("--input,-i", enroll_input, "Labeled gallery dataset")->required();
  enroll->add_option("--transform,-t", enroll_transform, "Transform file")->required();
  enroll->add_option("--output,-o", enroll_output, "Gallery file")->required();

  // identify
  std::string ident_input, ident_transform, ident_gallery, ident_output;
  auto* identify = app.add_subcommand("identify", "Winner-takes-all identification of probe samples");
  identify->add_option("--input,-i", ident_input, "Probe dataset (labels ignored)")->required();
  identify->add_option("--transform,-t", ident_transform, "Transform file")->required();
  identify->add_option("--gallery,-g", ident_gallery, "Gallery file")->required();
  identify->add_option("--output,-o", ident_output, "Result JSON (default: stdout)");

  // evaluate
  std::string eval_input, eval_output, eval_curves;
  EvalFlags eval_flags;
  auto* evaluate = app.add_subcommand("evaluate", "Nested cross-validated evaluation of one method");
  evaluate->add_option("--input,-i", eval_input, "Labeled, time-normalized dataset")->required();
  evaluate->add_option("--output,-o", eval_output, "Report JSON")->required();
  evaluate->add_option("--curves-dir", eval_curves, "Directory for curve CSVs (default: <report stem>_curves)");
  add_eval_flags(evaluate, eval_flags, true);

  // compare
  std::string cmp_input, cmp_output;
  std::vector<std::string> cmp_methods = {"mmc", "pca-lda", "identity"};
  std::vector<std::string> cmp_reports;
  EvalFlags cmp_flags;
  auto* compare = app.add_subcommand("compare", "Side-by-side headline table across methods");
  auto* cmp_in = compare->add_option("--input,-i", cmp_input, "Dataset to evaluate with every method");
  auto* cmp_rep = compare->add_option("--reports", cmp_reports, "Existing report JSON files to tabulate");
  cmp_in->excludes(cmp_rep);
  compare->add_option("--methods", cmp_methods, "Methods to evaluate")
      ->check(CLI::IsMember({"mmc", "pca-lda", "pca_lda", "identity"}))
      ->capture_default_str();
  compare->add_option("--output,-o", cmp_output, "Table file (default: stdout)");
  add_eval_flags(compare, cmp_flags, false);

  make_multi_take_last(&app);

  std::vector<std::string> args;
  try {
    args = expand_arguments(argc, argv);
  } catch (const UsageFailure& u) {
    return report_error("usage", kUsageExit, u.message);
  } catch (const Failure& f) {
    return report_error(mf_status_name(f.status), exit_code_for(f.status), f.message);
  }
  std::reverse(args.begin(), args.end());  // CLI11 consumes vectors back to front

  try {
    app.parse(args);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report_error("usage", kUsageExit, e.what());
  }

  try {
    if (gen->parsed()) {
      mf_synthetic_spec spec;
      mf_synthetic_spec_default(&spec);
      spec.classes = gen_classes;
      spec.samples_per_class = gen_per_class;
      spec.joints = gen_joints;
      spec.frames = gen_frames;
      spec.class_spread = gen_spread;
      spec.noise = gen_noise;
      spec.seed = gen_seed;
      mf_dataset* raw = nullptr;
      check(mf_dataset_generate(&spec, &raw));
      Dataset ds(raw);
      if (gen_shuffle) {
        mf_dataset* shuffled = nullptr;
        check(mf_dataset_shuffle_labels(ds.get(), *gen_shuffle, &shuffled));
        ds.reset(shuffled);
      }
      check(mf_dataset_save(ds.get(), gen_output.c_str()));
    } else if (pre->parsed()) {
      Dataset ds = load_dataset(pre_input);
      mf_preprocess_options o;
      mf_preprocess_options_default(&o);
      o.align = pre_no_align ? 0 : 1;
      o.center = pre_no_center ? 0 : 1;
      o.resample = pre_no_resample ? 0 : 1;
      o.root_joint = pre_root;
      o.up_axis = pre_up == "x" ? MF_AXIS_X : pre_up == "z" ? MF_AXIS_Z : MF_AXIS_Y;
      o.target_frames = pre_frames;
      if (pre_dtw) {
        o.filter = 1;
        o.dtw_threshold = *pre_dtw;
      }
      mf_dataset* raw = nullptr;
      std::size_t removed = 0;
      check(mf_dataset_preprocess(ds.get(), &o, &raw, &removed));
      Dataset out(raw);
      check(mf_dataset_save(out.get(), pre_output.c_str()));
      if (removed > 0) std::cerr << "preprocess: removed " << removed << " sample(s) by DTW filter\n";
    } else if (learn->parsed()) {
      Dataset ds = load_dataset(learn_input);
      mf_transform* raw = nullptr;
      check(mf_transform_learn(ds.get(), method_from(learn_method), learn_pca, &raw));
      Transform t(raw);
      check(mf_transform_save(t.get(), learn_output.c_str()));
    } else if (enroll->parsed()) {
      Dataset ds = load_dataset(enroll_input);
      Transform t = load_transform(enroll_transform);
      mf_gallery* raw = nullptr;
      check(mf_gallery_enroll(t.get(), ds.get(), &raw));
      Gallery g(raw);
      check(mf_gallery_save(g.get(), enroll_output.c_str()));
    } else if (identify->parsed()) {
      Dataset probes = load_dataset(ident_input);
      Transform t = load_transform(ident_transform);
      mf_gallery* raw = nullptr;
      check(mf_gallery_load(ident_gallery.c_str(), &raw));
      Gallery g(raw);
      char* json = nullptr;
      check(mf_gallery_identify(g.get(), t.get(), probes.get(), &json));
      CString text(json);
      emit(ident_output, text.get());
    } else if (evaluate->parsed()) {
      Dataset ds = load_dataset(eval_input);
      Report r = run_eval(ds.get(), eval_flags, method_from(eval_flags.method));
      const std::string curves = eval_curves.empty() ? default_curves_dir(eval_output) : eval_curves;
      check(mf_report_write(r.get(), eval_output.c_str(), curves.c_str()));
    } else if (compare->parsed()) {
      std::vector<Row> rows;
      if (!cmp_reports.empty()) {
        for (const auto& path : cmp_reports) rows.push_back(row_from_report_file(path));
      } else {
        if (cmp_input.empty()) throw UsageFailure{"compare needs --input or --reports"};
        Dataset ds = load_dataset(cmp_input);
        for (const auto& name : cmp_methods) {
          const mf_method m = method_from(name);
          Report r = run_eval(ds.get(), cmp_flags, m);
          Row row{method_label(m), {}};
          check(mf_report_headline(r.get(), &row.h));
          rows.push_back(row);
        }
      }
      emit(cmp_output, format_table(rows));
    }
  } catch (const Failure& f) {
    return report_error(mf_status_name(f.status), exit_code_for(f.status), f.message);
  } catch (const UsageFailure& u) {
    return report_error("usage", kUsageExit, u.message);
  } catch (const std::exception& e) {
    return report_error("MF_ERR_INTERNAL", exit_code_for(MF_ERR_INTERNAL), e.what());
  }
  return 0;
}
