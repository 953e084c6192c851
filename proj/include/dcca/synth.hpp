// SPDX-License-Identifier: Apache-2.0
//
// Desk-scale stand-in for a spurious-correlation benchmark: a synthetic image
// embedding set where a nuisance attribute ("background") co-occurs with the
// label, plus a pair of synthetic text encoders that play the CLIP text tower
// and the (hyperbolic) sentence encoder.

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "dcca/eval.hpp"
#include "dcca/pipeline.hpp"
#include "dcca/prompts.hpp"

namespace dcca {

struct SynthParams {
  std::size_t n_classes = 2;
  std::size_t n_groups = 2;  // attribute values; eval groups are label x attribute
  Index d = 64;
  double spurious_strength = 0.7;
  double majority_fraction = 0.95;
  std::size_t m = 4000;
  std::uint64_t seed = 1234;
  double noise_sigma = 0.1;

  nlohmann::json to_json() const;
};

struct SynthDirections {
  Matrix class_dirs;  // n_classes x d, orthonormal rows
  Matrix group_dirs;  // n_groups x d, orthonormal rows, orthogonal to class_dirs
  std::vector<std::size_t> majority_attribute;  // per class
};

struct SynthDataset {
  GroupedEvalSet eval;
  SynthDirections dirs;
  std::vector<std::size_t> attributes;  // raw attribute per sample
  std::vector<std::string> class_names;
  std::vector<std::string> attribute_names;
};

/// Throws DimensionTooSmall when d < n_classes + n_groups, and InvalidArgument
/// for m < 10 n_classes n_groups or parameters outside their ranges.
SynthDataset synth_generate(const SynthParams& params);

std::string dataset_digest(const GroupedEvalSet& eval);

struct SynthTextParams {
  Index d_se = 96;
  double text_bias = 1.5;        // CLIP class text leans toward its majority attribute
  Index latent_dim = 24;         // sentence content shared by both encoders
  double clip_latent_scale = 0.15;
  double se_latent_scale = 0.15;
  double clip_nuisance = 0.5;    // CLIP-only jitter along attribute directions
  double clip_noise = 0.05;
  double se_noise = 0.05;
  double se_radius = 0.5;        // tangent-space scale before the exponential map

  nlohmann::json to_json() const;
};

/// Deterministic text "encoders" over prompts of the form
/// "a photo of a <class>[, <noise>]". The noise text seeds the per-sentence
/// latent, so identical prompts always embed identically.
class SynthTextEncoders {
 public:
  SynthTextEncoders(const SynthDirections& dirs, std::vector<std::string> class_names,
                    const SynthTextParams& params, std::uint64_t seed);

  Matrix encode_clip(const std::vector<std::string>& texts) const;
  /// Points inside the unit Poincare ball.
  Matrix encode_se(const std::vector<std::string>& texts) const;

  Index clip_dim() const { return class_text_.cols(); }
  Index se_dim() const { return se_class_.cols(); }

 private:
  std::size_t class_of(const std::string& text, std::string* noise) const;

  std::vector<std::string> class_names_;
  SynthTextParams params_;
  Matrix class_text_;    // n x d
  Matrix group_dirs_;    // g x d
  Matrix clip_latent_;   // d x L
  Matrix se_class_;      // n x d_se
  Matrix se_latent_;     // d_se x L
  std::uint64_t seed_;
};

struct BenchmarkSpec {
  SynthParams data;
  SynthTextParams text;
  PipelineConfig pipeline;  // pipeline.seed is the prompt seed
  TemplateId prompt_template = TemplateId::WaffleChars;
};

struct BenchmarkInputs {
  SynthDataset dataset;
  PromptSet prompts;
  EmbeddingMatrix clip_class;  // raw (un-ingested) encoder outputs
  EmbeddingMatrix se_class;
  EmbeddingMatrix clip_rand;
  EmbeddingMatrix se_rand;
};

BenchmarkInputs make_benchmark_inputs(const BenchmarkSpec& spec);

struct BenchmarkResult {
  MetricsReport baseline;  // plain CLIP class-prompt head
  MetricsReport fused;
  FusedHead head;
};

/// Ingests with the default role options, fuses, and evaluates both heads.
BenchmarkResult run_benchmark(const BenchmarkInputs& inputs, const PipelineConfig& config);
BenchmarkResult run_synthetic_benchmark(const BenchmarkSpec& spec);

/// Writes images/labels/prompts/embeddings for the CLI workflow into `dir`.
void write_benchmark_inputs(const BenchmarkInputs& inputs, const BenchmarkSpec& spec,
                            const std::filesystem::path& dir);

}  // namespace dcca
