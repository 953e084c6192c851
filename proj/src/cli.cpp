// SPDX-License-Identifier: Apache-2.0

#include "dcca/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "dcca/digest.hpp"
#include "dcca/error.hpp"
#include "dcca/eval.hpp"
#include "dcca/remote_embed.hpp"
#include "dcca/synth.hpp"

namespace dcca {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

void add_config_option(CLI::App* sub) {
  // consumed by expand_config before parsing
  sub->add_option("--config", "JSON file with option values (flags override it)");
}

bool has_flag(const std::vector<std::string>& args, const std::string& flag) {
  for (const auto& a : args) {
    if (a == flag || a.rfind(flag + "=", 0) == 0) return true;
  }
  return false;
}

// Appends "--key value" for every config key not already given on the command
// line. Keys are option long names; underscores and dashes are interchangeable.
std::vector<std::string> expand_config(std::vector<std::string> args) {
  std::string file;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) file = args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) file = args[i].substr(9);
  }
  if (file.empty()) return args;
  std::ifstream in(file);
  if (!in) throw CLI::ParseError("cannot open config file " + file, CLI::ExitCodes::FileError);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw CLI::ParseError(std::string("config is not valid JSON: ") + e.what(),
                          CLI::ExitCodes::ConversionError);
  }
  if (!j.is_object()) {
    throw CLI::ParseError("config must be a JSON object", CLI::ExitCodes::ConversionError);
  }
  const auto text = [](const json& v) { return v.is_string() ? v.get<std::string>() : v.dump(); };
  const std::vector<std::string> given = args;
  for (const auto& [key, value] : j.items()) {
    std::string flag = "--" + key;
    std::replace(flag.begin(), flag.end(), '_', '-');
    if (flag == "--config" || has_flag(given, flag)) continue;
    if (value.is_boolean()) {
      if (value.get<bool>()) args.push_back(flag);
      continue;
    }
    args.push_back(flag);
    if (value.is_array()) {
      for (const auto& v : value) args.push_back(text(v));
    } else {
      args.push_back(text(value));
    }
  }
  return args;
}

json read_json_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw_data("IoError", "cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw_data("InputParseError", path.string() + ": " + e.what());
  }
}

std::vector<std::string> read_string_list(const fs::path& path) {
  if (path.extension() == ".json") {
    const json j = read_json_file(path);
    try {
      return j.get<std::vector<std::string>>();
    } catch (const json::exception& e) {
      throw_data("InputParseError", path.string() + ": expected a JSON array of strings");
    }
  }
  std::ifstream in(path);
  if (!in) throw_data("IoError", "cannot open " + path.string());
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) out.push_back(line);
  }
  return out;
}

void write_json_file(const json& j, const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw_data("IoError", "cannot open " + path.string() + " for writing");
  out << j.dump(2) << '\n';
}

std::string format_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

std::string endpoint_or_env(const std::string& flag) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv(kEndpointEnv); env != nullptr && *env != '\0') return env;
  throw_usage("MissingEndpoint", std::string("no --endpoint given and ") + kEndpointEnv + " is unset");
}

// ---------------------------------------------------------------- prompts

struct PromptsArgs {
  std::string classes;
  std::string tmpl = "waffle_chars";
  std::size_t k = 500;
  std::uint64_t seed = 1234;
  std::string wordlist;
  std::string attributes;
  std::string out;
};

void add_prompts(CLI::App& app, PromptsArgs& a, std::function<void()>& action) {
  auto* sub = app.add_subcommand("prompts", "Generate class prompts and random sentences (JSONL)");
  add_config_option(sub);
  sub->add_option("--classes", a.classes, "Class names (JSON array or one per line)")->required();
  sub->add_option("--template", a.tmpl, "plain | waffle_words | waffle_chars")->capture_default_str();
  sub->add_option("--k", a.k, "Random sentences per class")->capture_default_str();
  sub->add_option("--seed", a.seed, "Prompt seed")->capture_default_str();
  sub->add_option("--wordlist", a.wordlist, "Words for waffle_words");
  sub->add_option("--attributes", a.attributes, "Contextual attributes to expand each class with");
  sub->add_option("--out", a.out, "Output JSONL path")->required();
  sub->callback([&a, &action] {
    action = [&a] {
      std::vector<std::string> classes = read_string_list(a.classes);
      if (!a.attributes.empty()) {
        AttributeSpec spec;
        spec.attribute_values = read_string_list(a.attributes);
        classes = expand_with_attributes(classes, spec).names;
      }
      std::vector<std::string> words;
      if (!a.wordlist.empty()) words = read_string_list(a.wordlist);
      const PromptSet set = build_prompt_set(classes, parse_template(a.tmpl), a.k, a.seed,
                                             a.wordlist.empty() ? nullptr : &words);
      write_prompt_set(set, a.out);
    };
  });
}

// ------------------------------------------------------------------ embed

struct EmbedArgs {
  std::string prompts;
  std::string kind = "original";
  std::string model;
  std::string role = "clip-text";
  std::string space = "euclidean";
  std::string endpoint;
  std::string dtype = "f32";
  std::string out;
};

void add_embed(CLI::App& app, EmbedArgs& a, std::function<void()>& action) {
  auto* sub = app.add_subcommand("embed", "Fetch embeddings for a prompt file from the embedding service");
  add_config_option(sub);
  sub->add_option("--prompts", a.prompts, "Prompt JSONL")->required();
  sub->add_option("--kind", a.kind, "original | random")->capture_default_str();
  sub->add_option("--model", a.model, "Model id on the service")->required();
  sub->add_option("--role", a.role, "clip-text | sentence-encoder")->capture_default_str();
  sub->add_option("--space", a.space, "euclidean | hyperbolic")->capture_default_str();
  sub->add_option("--endpoint", a.endpoint, std::string("Service URL (default $") + kEndpointEnv + ")");
  sub->add_option("--dtype", a.dtype, "f32 | f64")->capture_default_str();
  sub->add_option("--out", a.out, "Output EMBX path")->required();
  sub->callback([&a, &action] {
    action = [&a] {
      if (a.kind != "original" && a.kind != "random") {
        throw_usage("InvalidArgument", "--kind must be original or random");
      }
      if (a.dtype != "f32" && a.dtype != "f64") throw_usage("InvalidArgument", "--dtype must be f32 or f64");
      const PromptSet set = read_prompt_set(a.prompts);
      const auto& texts = a.kind == "original" ? set.originals : set.randoms;
      EmbeddingMatrix e = remote_embed(endpoint_or_env(a.endpoint), a.model, texts, parse_space(a.space));
      e.manifest.role = a.role;
      e.manifest.prompt_file = a.prompts;
      e.manifest.seed = set.seed;
      e.manifest.extra["kind"] = a.kind;
      write_embx(e, a.out, a.dtype == "f32" ? Dtype::F32 : Dtype::F64);
    };
  });
}

// ------------------------------------------------------------------- fuse

struct FuseArgs {
  std::string prompts;
  std::string clip_class, se_class, clip_rand, se_rand;
  std::string clip_model, se_model;
  std::string se_space = "hyperbolic";
  std::string endpoint;
  Index d_cca = 64;
  double reg_eps = 1e-4;
  double eig_floor = kDefaultEigFloor;
  std::string center_mode = "raw";
  bool first_cca_only = false;
  bool no_normalize_clip = false;
  bool normalize_se = false;
  std::string out;
};

struct RoleSource {
  std::optional<std::pair<std::string, std::string>> files;  // class, random
  std::optional<std::string> model;
};

RoleSource resolve_role(const char* role, const std::string& cls, const std::string& rnd,
                        const std::string& model) {
  const bool has_files = !cls.empty() || !rnd.empty();
  if (has_files == !model.empty()) {
    throw_usage("UsageError", std::string("role ") + role +
                                  ": give either both embedding files or a remote model id, not both");
  }
  RoleSource s;
  if (has_files) {
    if (cls.empty() || rnd.empty()) {
      throw_usage("UsageError", std::string("role ") + role + ": both class and random files are required");
    }
    s.files = std::make_pair(cls, rnd);
  } else {
    s.model = model;
  }
  return s;
}

void add_fuse(CLI::App& app, FuseArgs& a, std::function<void()>& action) {
  auto* sub = app.add_subcommand("fuse", "Fit the two-stage CCA fusion and write the merged head");
  add_config_option(sub);
  sub->add_option("--prompts", a.prompts, "Prompt JSONL the embeddings were built from")->required();
  sub->add_option("--clip-class", a.clip_class, "CLIP class-prompt embeddings (EMBX)");
  sub->add_option("--se-class", a.se_class, "Sentence-encoder class-prompt embeddings (EMBX)");
  sub->add_option("--clip-rand", a.clip_rand, "CLIP random-sentence embeddings (EMBX)");
  sub->add_option("--se-rand", a.se_rand, "Sentence-encoder random-sentence embeddings (EMBX)");
  sub->add_option("--clip-model", a.clip_model, "Fetch CLIP embeddings remotely with this model id");
  sub->add_option("--se-model", a.se_model, "Fetch sentence-encoder embeddings remotely");
  sub->add_option("--se-space", a.se_space, "Space requested for remote sentence embeddings")
      ->capture_default_str();
  sub->add_option("--endpoint", a.endpoint, "Embedding service URL");
  sub->add_option("--d-cca", a.d_cca, "First-stage CCA dimension")->capture_default_str();
  sub->add_option("--reg-eps", a.reg_eps, "Relative ridge")->capture_default_str();
  sub->add_option("--eig-floor", a.eig_floor, "Relative eigenvalue floor")->capture_default_str();
  sub->add_option("--center-mode", a.center_mode, "raw | centered")->capture_default_str();
  sub->add_flag("--first-cca-only", a.first_cca_only, "Skip the second CCA (W = first-stage head)");
  sub->add_flag("--no-normalize-clip", a.no_normalize_clip, "Keep CLIP rows unnormalized");
  sub->add_flag("--normalize-se", a.normalize_se, "L2-normalize sentence rows after the log map");
  sub->add_option("--out", a.out, "Output head EMBX path")->required();
  sub->callback([&a, &action] {
    action = [&a] {
      const RoleSource clip = resolve_role("clip", a.clip_class, a.clip_rand, a.clip_model);
      const RoleSource se = resolve_role("sentence-encoder", a.se_class, a.se_rand, a.se_model);
      const PromptSet prompts = read_prompt_set(a.prompts);

      json input_digests = {{"prompts", sha256_file(a.prompts)}};
      const auto load = [&](const RoleSource& src, bool random, const char* role, Space space,
                            const char* key) {
        EmbeddingMatrix e;
        if (src.files) {
          const std::string& path = random ? src.files->second : src.files->first;
          e = read_embx(path);
          input_digests[key] = sha256_file(path);
        } else {
          e = remote_embed(endpoint_or_env(a.endpoint), *src.model,
                           random ? prompts.randoms : prompts.originals, space);
          e.manifest.seed = prompts.seed;
          input_digests[key] = sha256_matrix(e.matrix);
        }
        if (e.manifest.role.empty()) e.manifest.role = role;
        return e;
      };
      const Space se_space = parse_space(a.se_space);
      const EmbeddingMatrix clip_class = load(clip, false, "clip-text", Space::Euclidean, "clip_class");
      const EmbeddingMatrix clip_rand = load(clip, true, "clip-text", Space::Euclidean, "clip_rand");
      const EmbeddingMatrix se_class = load(se, false, "sentence-encoder", se_space, "se_class");
      const EmbeddingMatrix se_rand = load(se, true, "sentence-encoder", se_space, "se_rand");

      const IngestOptions clip_opts{!a.no_normalize_clip};
      const IngestOptions se_opts{a.normalize_se};

      PipelineConfig cfg;
      cfg.d_cca = a.d_cca;
      cfg.reg_eps = a.reg_eps;
      cfg.eig_floor = a.eig_floor;
      cfg.center_mode = parse_center_mode(a.center_mode);
      cfg.first_cca_only = a.first_cca_only;

      const FusedHead head =
          run_doublecca(prompts, ingest(clip_class, clip_opts), ingest(se_class, se_opts),
                        ingest(clip_rand, clip_opts), ingest(se_rand, se_opts), cfg);
      json config_json = head.config.to_json();
      config_json["normalize_clip"] = clip_opts.normalize;
      config_json["normalize_se"] = se_opts.normalize;
      save_head(head, a.out,
                {{"config_digest", sha256_json(config_json)},
                 {"ingest", {{"normalize_clip", clip_opts.normalize}, {"normalize_se", se_opts.normalize}}},
                 {"input_digests", input_digests}});
    };
  });
}

// ------------------------------------------------------------------- eval

struct EvalArgs {
  std::string head;
  std::string images;
  std::string labels;
  std::string group_names;
  std::size_t attr_count = 1;
  std::string aggregation = "max";
  bool no_normalize_images = false;
  std::string out;
};

GroupedEvalSet load_eval_set(const EvalArgs& a) {
  GroupedEvalSet set;
  set.images = read_embx(a.images);
  if (!a.no_normalize_images) {
    set.images = ingest(set.images, IngestOptions{true});
  }
  LabelFile labels = read_labels(a.labels);
  set.labels = std::move(labels.labels);
  set.groups = std::move(labels.groups);
  set.group_names = std::move(labels.group_names);
  if (!a.group_names.empty()) set.group_names = read_string_list(a.group_names);
  if (set.group_names.empty()) {
    std::size_t n_groups = 0;
    for (const auto g : set.groups) n_groups = std::max(n_groups, g + 1);
    for (std::size_t g = 0; g < n_groups; ++g) set.group_names.push_back("group" + std::to_string(g));
  }
  return set;
}

void add_eval(CLI::App& app, EvalArgs& a, std::function<void()>& action) {
  auto* sub = app.add_subcommand("eval", "Zero-shot evaluation with group-robustness metrics");
  add_config_option(sub);
  sub->add_option("--head", a.head, "Head EMBX (n rows, or n * attr-count rows)")->required();
  sub->add_option("--images", a.images, "Image embeddings (EMBX)")->required();
  sub->add_option("--labels", a.labels, "Labels/groups (CSV index,label,group or JSON)")->required();
  sub->add_option("--group-names", a.group_names, "Group names (JSON array)");
  sub->add_option("--attr-count", a.attr_count, "Attribute rows per class in the head")->capture_default_str();
  sub->add_option("--aggregation", a.aggregation, "max | mean over attribute rows")->capture_default_str();
  sub->add_flag("--no-normalize-images", a.no_normalize_images, "Use image rows as stored");
  sub->add_option("--out", a.out, "Report JSON path")->required();
  sub->callback([&a, &action] {
    action = [&a] {
      const EmbeddingMatrix head = read_embx(a.head);
      const GroupedEvalSet set = load_eval_set(a);
      const auto head_rows = static_cast<std::size_t>(head.matrix.rows());
      if (a.attr_count == 0 || head_rows % a.attr_count != 0) {
        throw_data("ShapeMismatch", "head rows are not a multiple of --attr-count");
      }
      const std::size_t n_classes = head_rows / a.attr_count;
      const Aggregation agg = parse_aggregation(a.aggregation);
      set.validate(n_classes);

      MetricsReport report;
      if (a.attr_count == 1) {
        report = evaluate(head.matrix, set);
      } else {
        const ExpandedClasses expansion = uniform_expansion(n_classes, a.attr_count);
        report = report_from_predictions(
            classify_rows_expanded(head.matrix, set.images.matrix, expansion, agg), set);
        report.aggregation = aggregation_name(agg);
      }
      const json options = {{"attr_count", a.attr_count},
                            {"aggregation", report.aggregation},
                            {"normalize_images", !a.no_normalize_images},
                            {"head", sha256_file(a.head)},
                            {"images", sha256_file(a.images)},
                            {"labels", sha256_file(a.labels)}};
      report.config_digest = sha256_json(options);
      json j = report.to_json();
      j["provenance"] = options;
      write_json_file(j, a.out);
    };
  });
}

// ---------------------------------------------------------- synth / sweep

struct SynthArgs {
  SynthParams data;
  std::size_t k = 500;
  std::optional<std::uint64_t> prompt_seed;
  std::string out_dir;
};

void add_synth_options(CLI::App* sub, SynthParams& p) {
  sub->add_option("--seed", p.seed, "Dataset seed")->capture_default_str();
  sub->add_option("--n-classes", p.n_classes)->capture_default_str();
  sub->add_option("--n-groups", p.n_groups, "Attribute values")->capture_default_str();
  sub->add_option("--d", p.d, "Embedding dimension")->capture_default_str();
  sub->add_option("--strength", p.spurious_strength, "Spurious strength in [0,1]")->capture_default_str();
  sub->add_option("--majority", p.majority_fraction, "Majority fraction in (0.5,1]")->capture_default_str();
  sub->add_option("--m", p.m, "Number of images")->capture_default_str();
}

void add_synth(CLI::App& app, SynthArgs& a, std::function<void()>& action) {
  auto* sub = app.add_subcommand("synth", "Write a synthetic spurious-correlation benchmark");
  add_config_option(sub);
  add_synth_options(sub, a.data);
  sub->add_option("--k", a.k, "Random sentences per class")->capture_default_str();
  sub->add_option("--prompt-seed", a.prompt_seed, "Prompt seed (defaults to --seed)");
  sub->add_option("--out-dir", a.out_dir, "Output directory")->required();
  sub->callback([&a, &action] {
    action = [&a] {
      BenchmarkSpec spec;
      spec.data = a.data;
      spec.pipeline.k = a.k;
      spec.pipeline.seed = a.prompt_seed.value_or(a.data.seed);
      write_benchmark_inputs(make_benchmark_inputs(spec), spec, a.out_dir);
    };
  });
}

struct SweepArgs {
  SynthParams data;
  std::vector<std::size_t> k_values{10, 100, 500, 1000};
  std::vector<Index> d_cca_values{64};
  std::vector<std::uint64_t> seeds{1234};
  double reg_eps = 1e-4;
  bool first_cca_only = false;
  std::string out_dir;
};

void run_sweep(const SweepArgs& a, std::ostream& out) {
  fs::create_directories(fs::path(a.out_dir) / "reports");
  std::ostringstream csv;
  csv << "k,d_cca,avg,worst,gap,worst_var,n_ok,status\n";
  for (const auto k : a.k_values) {
    for (const auto d_cca : a.d_cca_values) {
      std::vector<double> avg, worst, gap;
      std::string status = "ok";
      for (const auto seed : a.seeds) {
        BenchmarkSpec spec;
        spec.data = a.data;
        spec.pipeline.k = k;
        spec.pipeline.d_cca = d_cca;
        spec.pipeline.seed = seed;
        spec.pipeline.reg_eps = a.reg_eps;
        spec.pipeline.first_cca_only = a.first_cca_only;
        const fs::path report_path = fs::path(a.out_dir) / "reports" /
                                     ("k" + std::to_string(k) + "_d" + std::to_string(d_cca) +
                                      "_seed" + std::to_string(seed) + ".json");
        json point = {{"k", k}, {"d_cca", d_cca}, {"seed", seed}};
        try {
          const BenchmarkResult r = run_synthetic_benchmark(spec);
          json j = r.fused.to_json();
          j["config_digest"] = sha256_json({{"pipeline", spec.pipeline.to_json()},
                                            {"synth", spec.data.to_json()},
                                            {"text", spec.text.to_json()}});
          j["grid_point"] = point;
          j["baseline"] = r.baseline.to_json();
          write_json_file(j, report_path);
          avg.push_back(r.fused.avg_acc);
          worst.push_back(r.fused.worst_acc);
          gap.push_back(r.fused.gap);
        } catch (const Error& e) {
          status = e.kind();
          write_json_file({{"error", e.kind()}, {"message", e.what()}, {"grid_point", point}}, report_path);
        }
      }
      const auto mean = [](const std::vector<double>& v) {
        double s = 0.0;
        for (const double x : v) s += x;
        return s / static_cast<double>(v.size());
      };
      csv << k << ',' << d_cca << ',';
      if (avg.empty()) {
        csv << ",,,,0," << status << '\n';
        continue;
      }
      const double mw = mean(worst);
      double var = 0.0;
      for (const double w : worst) var += (w - mw) * (w - mw);
      var /= static_cast<double>(worst.size());
      csv << format_number(mean(avg)) << ',' << format_number(mw) << ',' << format_number(mean(gap))
          << ',' << format_number(var) << ',' << avg.size() << ',' << status << '\n';
    }
  }
  const fs::path csv_path = fs::path(a.out_dir) / "sweep.csv";
  std::ofstream f(csv_path, std::ios::binary | std::ios::trunc);
  if (!f) throw_data("IoError", "cannot write " + csv_path.string());
  f << csv.str();
  out << csv.str();
}

void add_sweep(CLI::App& app, SweepArgs& a, std::function<void()>& action, std::ostream& out) {
  auto* sub = app.add_subcommand("sweep", "Ablation grid over K and CCA dimension on the synthetic benchmark");
  add_config_option(sub);
  add_synth_options(sub, a.data);
  sub->add_option("--k-values", a.k_values, "Random sentences per class")->delimiter(',')->capture_default_str();
  sub->add_option("--d-cca-values", a.d_cca_values, "First-stage CCA dimensions")->delimiter(',')->capture_default_str();
  sub->add_option("--seeds", a.seeds, "Prompt seeds per grid point")->delimiter(',')->capture_default_str();
  sub->add_option("--reg-eps", a.reg_eps)->capture_default_str();
  sub->add_flag("--first-cca-only", a.first_cca_only);
  sub->add_option("--out-dir", a.out_dir, "Output directory")->required();
  sub->callback([&a, &action, &out] { action = [&a, &out] { run_sweep(a, out); }; });
}

void print_error(std::ostream& err, const std::string& kind, const std::string& message, int code) {
  err << json{{"error", kind}, {"message", message}, {"exit_code", code}}.dump() << '\n';
}

}  // namespace

int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"DoubleCCA text-embedding fusion for zero-shot classifiers", "dcca"};
  app.require_subcommand(1);

  std::function<void()> action;
  PromptsArgs prompts;
  EmbedArgs embed;
  FuseArgs fuse;
  EvalArgs eval;
  SynthArgs synth;
  SweepArgs sweep;
  add_prompts(app, prompts, action);
  add_embed(app, embed, action);
  add_fuse(app, fuse, action);
  add_eval(app, eval, action);
  add_synth(app, synth, action);
  add_sweep(app, sweep, action, out);

  std::vector<std::string> storage{"dcca"};
  std::vector<char*> argv;

  try {
    const auto expanded = expand_config(args);
    storage.insert(storage.end(), expanded.begin(), expanded.end());
    for (auto& s : storage) argv.push_back(s.data());
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::Success& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    print_error(err, "UsageError", e.what(), 1);
    return 1;
  }

  try {
    if (action) action();
    return 0;
  } catch (const Error& e) {
    const int code = exit_code_for(e.category());
    print_error(err, e.kind(), e.what(), code);
    return code;
  } catch (const nlohmann::json::exception& e) {
    print_error(err, "InputParseError", e.what(), 2);
    return 2;
  } catch (const std::exception& e) {
    print_error(err, "InternalError", e.what(), 2);
    return 2;
  }
}

int run_command(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run_command(args, std::cout, std::cerr);
}

}  // namespace dcca
