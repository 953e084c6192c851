// SPDX-License-Identifier: Apache-2.0

#include "dcca/synth.hpp"

#include <fstream>

#include "dcca/digest.hpp"
#include "dcca/error.hpp"

namespace dcca {

namespace {

// Stream tags so the image set, the directions and the text world never share draws.
constexpr std::uint64_t kDirectionStream = 0x6469726563746e73ULL;
constexpr std::uint64_t kSampleStream = 0x73616d706c657321ULL;
constexpr std::uint64_t kTextStream = 0x7465787477726c64ULL;

Matrix gaussian(SplitMix64& rng, Index rows, Index cols) {
  Matrix g(rows, cols);
  for (Index r = 0; r < rows; ++r) {
    for (Index c = 0; c < cols; ++c) g(r, c) = rng.normal();
  }
  return g;
}

// `count` orthonormal rows in R^dim.
Matrix orthonormal_rows(SplitMix64& rng, Index count, Index dim) {
  const Matrix g = gaussian(rng, dim, count);
  Eigen::HouseholderQR<Matrix> qr(g);
  const Matrix q = qr.householderQ() * Matrix::Identity(dim, count);
  return q.transpose();
}

Matrix unit_columns(SplitMix64& rng, Index rows, Index cols) {
  Matrix g = gaussian(rng, rows, cols);
  for (Index c = 0; c < cols; ++c) g.col(c).normalize();
  return g;
}

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

nlohmann::json SynthParams::to_json() const {
  return {{"n_classes", n_classes},
          {"n_groups", n_groups},
          {"d", d},
          {"spurious_strength", spurious_strength},
          {"majority_fraction", majority_fraction},
          {"m", m},
          {"seed", seed},
          {"noise_sigma", noise_sigma}};
}

nlohmann::json SynthTextParams::to_json() const {
  return {{"d_se", d_se},
          {"text_bias", text_bias},
          {"latent_dim", latent_dim},
          {"clip_latent_scale", clip_latent_scale},
          {"se_latent_scale", se_latent_scale},
          {"clip_nuisance", clip_nuisance},
          {"clip_noise", clip_noise},
          {"se_noise", se_noise},
          {"se_radius", se_radius}};
}

SynthDataset synth_generate(const SynthParams& p) {
  if (p.n_classes < 2) throw_usage("InvalidArgument", "synth: need at least two classes");
  if (p.n_groups < 1) throw_usage("InvalidArgument", "synth: need at least one attribute value");
  if (p.d < static_cast<Index>(p.n_classes + p.n_groups)) {
    throw_data("DimensionTooSmall", "synth: d = " + std::to_string(p.d) +
                                        " is below n_classes + n_groups = " +
                                        std::to_string(p.n_classes + p.n_groups));
  }
  if (p.m < 10 * p.n_classes * p.n_groups) {
    throw_usage("InvalidArgument", "synth: m must be at least 10 * n_classes * n_groups");
  }
  if (p.spurious_strength < 0.0 || p.spurious_strength > 1.0) {
    throw_usage("InvalidArgument", "synth: spurious_strength must lie in [0, 1]");
  }
  if (!(p.majority_fraction > 0.5 && p.majority_fraction <= 1.0)) {
    throw_usage("InvalidArgument", "synth: majority_fraction must lie in (0.5, 1]");
  }

  SynthDataset out;
  SplitMix64 dir_rng(p.seed ^ kDirectionStream);
  const Matrix basis =
      orthonormal_rows(dir_rng, static_cast<Index>(p.n_classes + p.n_groups), p.d);
  out.dirs.class_dirs = basis.topRows(static_cast<Index>(p.n_classes));
  out.dirs.group_dirs = basis.bottomRows(static_cast<Index>(p.n_groups));
  for (std::size_t y = 0; y < p.n_classes; ++y) {
    out.dirs.majority_attribute.push_back(y % p.n_groups);
    out.class_names.push_back("class" + std::to_string(y));
  }
  for (std::size_t a = 0; a < p.n_groups; ++a) out.attribute_names.push_back("attr" + std::to_string(a));

  auto& eval = out.eval;
  for (std::size_t y = 0; y < p.n_classes; ++y) {
    for (std::size_t a = 0; a < p.n_groups; ++a) {
      eval.group_names.push_back(out.class_names[y] + "/" + out.attribute_names[a]);
    }
  }

  SplitMix64 rng(p.seed ^ kSampleStream);
  Matrix images(static_cast<Index>(p.m), p.d);
  for (std::size_t i = 0; i < p.m; ++i) {
    const std::size_t y = rng.below(p.n_classes);
    const std::size_t major = out.dirs.majority_attribute[y];
    std::size_t a = major;
    if (p.n_groups > 1 && rng.uniform() >= p.majority_fraction) {
      a = rng.below(p.n_groups - 1);
      if (a >= major) ++a;
    }
    Vector x = out.dirs.class_dirs.row(static_cast<Index>(y)).transpose() +
               p.spurious_strength * out.dirs.group_dirs.row(static_cast<Index>(a)).transpose();
    for (Index c = 0; c < p.d; ++c) x(c) += p.noise_sigma * rng.normal();
    images.row(static_cast<Index>(i)) = x.normalized().transpose();
    eval.labels.push_back(y);
    eval.groups.push_back(cross_group(y, a, p.n_groups));
    out.attributes.push_back(a);
  }
  eval.images = make_embedding(std::move(images), "synthetic-image", std::string(kRoleClipImage));
  eval.images.manifest.seed = p.seed;
  eval.images.manifest.normalized = true;
  return out;
}

std::string dataset_digest(const GroupedEvalSet& eval) {
  nlohmann::json j = {{"images", sha256_matrix(eval.images.matrix)},
                      {"labels", eval.labels},
                      {"groups", eval.groups},
                      {"group_names", eval.group_names}};
  return sha256_json(j);
}

SynthTextEncoders::SynthTextEncoders(const SynthDirections& dirs,
                                     std::vector<std::string> class_names,
                                     const SynthTextParams& params, std::uint64_t seed)
    : class_names_(std::move(class_names)), params_(params), seed_(seed) {
  const Index n = dirs.class_dirs.rows();
  const Index d = dirs.class_dirs.cols();
  if (static_cast<Index>(class_names_.size()) != n) {
    throw_usage("InvalidArgument", "synthetic encoders: class name count differs from directions");
  }
  if (params.d_se < n) throw_data("DimensionTooSmall", "synthetic encoders: d_se below n_classes");
  group_dirs_ = dirs.group_dirs;
  class_text_.resize(n, d);
  for (Index y = 0; y < n; ++y) {
    const auto major = static_cast<Index>(dirs.majority_attribute[static_cast<std::size_t>(y)]);
    class_text_.row(y) = dirs.class_dirs.row(y) + params.text_bias * dirs.group_dirs.row(major);
  }
  SplitMix64 rng(seed ^ kTextStream);
  clip_latent_ = params.clip_latent_scale * unit_columns(rng, d, params.latent_dim);
  se_class_ = orthonormal_rows(rng, n, params.d_se);
  se_latent_ = params.se_latent_scale * unit_columns(rng, params.d_se, params.latent_dim);
}

std::size_t SynthTextEncoders::class_of(const std::string& text, std::string* noise) const {
  const auto parsed = parse_prompt(text, class_names_);
  if (!parsed) throw_data("InputParseError", "synthetic encoder cannot parse '" + text + "'");
  for (std::size_t c = 0; c < class_names_.size(); ++c) {
    if (class_names_[c] == parsed->class_name) {
      *noise = parsed->noise;
      return c;
    }
  }
  throw_data("InputParseError", "unknown class in '" + text + "'");
}

Matrix SynthTextEncoders::encode_clip(const std::vector<std::string>& texts) const {
  Matrix out(static_cast<Index>(texts.size()), class_text_.cols());
  for (std::size_t i = 0; i < texts.size(); ++i) {
    std::string noise;
    const std::size_t c = class_of(texts[i], &noise);
    Vector x = class_text_.row(static_cast<Index>(c)).transpose();
    if (!noise.empty()) {
      SplitMix64 shared(fnv1a(texts[i]) ^ seed_);
      Vector z(params_.latent_dim);
      for (Index l = 0; l < z.size(); ++l) z(l) = shared.normal();
      x += clip_latent_ * z;
      SplitMix64 own(shared.next() ^ 0xC11Bu);
      for (Index g = 0; g < group_dirs_.rows(); ++g) {
        x += params_.clip_nuisance * own.normal() * group_dirs_.row(g).transpose();
      }
      for (Index k = 0; k < x.size(); ++k) x(k) += params_.clip_noise * own.normal();
    }
    out.row(static_cast<Index>(i)) = x.transpose();
  }
  return out;
}

Matrix SynthTextEncoders::encode_se(const std::vector<std::string>& texts) const {
  Matrix out(static_cast<Index>(texts.size()), se_class_.cols());
  for (std::size_t i = 0; i < texts.size(); ++i) {
    std::string noise;
    const std::size_t c = class_of(texts[i], &noise);
    Vector x = se_class_.row(static_cast<Index>(c)).transpose();
    if (!noise.empty()) {
      SplitMix64 shared(fnv1a(texts[i]) ^ seed_);
      Vector z(params_.latent_dim);
      for (Index l = 0; l < z.size(); ++l) z(l) = shared.normal();
      x += se_latent_ * z;
      SplitMix64 own(shared.next() ^ 0x5E5Eu);
      for (Index k = 0; k < x.size(); ++k) x(k) += params_.se_noise * own.normal();
    }
    out.row(static_cast<Index>(i)) = params_.se_radius * x.transpose();
  }
  return poincare_exp_map(out);
}

BenchmarkInputs make_benchmark_inputs(const BenchmarkSpec& spec) {
  BenchmarkInputs in;
  in.dataset = synth_generate(spec.data);
  in.prompts = build_prompt_set(in.dataset.class_names, spec.prompt_template, spec.pipeline.k,
                                spec.pipeline.seed);
  const SynthTextEncoders enc(in.dataset.dirs, in.dataset.class_names, spec.text, spec.data.seed);

  const auto wrap = [&](Matrix m, const char* model, std::string_view role, Space space) {
    EmbeddingMatrix e = make_embedding(std::move(m), model, std::string(role), space);
    e.manifest.seed = in.prompts.seed;
    return e;
  };
  in.clip_class = wrap(enc.encode_clip(in.prompts.originals), "synthetic-clip-text",
                       kRoleClipText, Space::Euclidean);
  in.clip_rand = wrap(enc.encode_clip(in.prompts.randoms), "synthetic-clip-text", kRoleClipText,
                      Space::Euclidean);
  in.se_class = wrap(enc.encode_se(in.prompts.originals), "synthetic-sentence-encoder",
                     kRoleSentenceEncoder, Space::Hyperbolic);
  in.se_rand = wrap(enc.encode_se(in.prompts.randoms), "synthetic-sentence-encoder",
                    kRoleSentenceEncoder, Space::Hyperbolic);
  return in;
}

BenchmarkResult run_benchmark(const BenchmarkInputs& in, const PipelineConfig& config) {
  const auto prep = [](const EmbeddingMatrix& e) {
    return ingest(e, default_ingest_options(e.manifest.role));
  };
  const EmbeddingMatrix clip_class = prep(in.clip_class);
  BenchmarkResult r;
  r.head = run_doublecca(in.prompts, clip_class, prep(in.se_class), prep(in.clip_rand),
                         prep(in.se_rand), config);
  r.fused = evaluate(r.head.w, in.dataset.eval);
  r.baseline = evaluate(clip_class.matrix, in.dataset.eval);
  return r;
}

BenchmarkResult run_synthetic_benchmark(const BenchmarkSpec& spec) {
  return run_benchmark(make_benchmark_inputs(spec), spec.pipeline);
}

void write_benchmark_inputs(const BenchmarkInputs& in, const BenchmarkSpec& spec,
                            const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_embx(in.dataset.eval.images, dir / "images.embx", Dtype::F64);
  LabelFile labels{in.dataset.eval.labels, in.dataset.eval.groups, in.dataset.eval.group_names};
  write_labels_csv(labels, dir / "labels.csv");
  write_labels_json(labels, dir / "eval_set.json");
  {
    std::ofstream out(dir / "classes.json", std::ios::binary | std::ios::trunc);
    out << nlohmann::json(in.dataset.class_names).dump() << '\n';
  }
  const auto prompt_file = dir / "prompts.jsonl";
  write_prompt_set(in.prompts, prompt_file);
  const auto tag = [&](EmbeddingMatrix e) {
    e.manifest.prompt_file = prompt_file.filename().string();
    return e;
  };
  write_embx(tag(in.clip_class), dir / "clip_class.embx", Dtype::F64);
  write_embx(tag(in.se_class), dir / "se_class.embx", Dtype::F64);
  write_embx(tag(in.clip_rand), dir / "clip_rand.embx", Dtype::F64);
  write_embx(tag(in.se_rand), dir / "se_rand.embx", Dtype::F64);

  nlohmann::json meta = {{"synth", spec.data.to_json()},
                         {"text", spec.text.to_json()},
                         {"prompt_seed", spec.pipeline.seed},
                         {"k", spec.pipeline.k},
                         {"dataset_digest", dataset_digest(in.dataset.eval)}};
  std::ofstream out(dir / "synth.json", std::ios::binary | std::ios::trunc);
  out << meta.dump(2) << '\n';
}

}  // namespace dcca
