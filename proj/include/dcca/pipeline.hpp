// SPDX-License-Identifier: Apache-2.0
//
// Two-stage CCA fusion of a CLIP text head with a sentence-encoder head.
//
// Stage one fits CCA between CLIP and sentence-encoder embeddings of the
// random sentences and turns the class embeddings into two heads
//   W_x  = X    W_x W_x^T      (n x d)
//   W_se = X_se W_se W_x^T     (n x d)
// Stage two scores the random sentences with both heads, fits CCA between the
// two logit sets (P_A, P_B) and merges the heads:
//   M = (P_B P_A^{-1})^T,   W = (W_x + M W_se) / 2.

#pragma once

#include <cstdint>
#include <string>

#include "dcca/cca.hpp"
#include "dcca/embedding_store.hpp"
#include "dcca/prompts.hpp"
#include "json.hpp"

namespace dcca {

enum class CenterMode { Raw, Centered };

std::string_view center_mode_name(CenterMode m);
CenterMode parse_center_mode(std::string_view name);

inline constexpr double kSingularPaCondition = 1e12;

struct PipelineConfig {
  Index d_cca = 64;
  std::size_t k = 500;
  std::uint64_t seed = 1234;
  double reg_eps = 1e-4;
  double eig_floor = kDefaultEigFloor;
  CenterMode center_mode = CenterMode::Raw;
  bool first_cca_only = false;

  nlohmann::json to_json() const;
};

struct StageOneResult {
  CcaTransform transform;  // view A = CLIP text (d), view B = sentence encoder (d_se)
  Matrix w_hat_x;          // n x d
  Matrix w_hat_se;         // n x d
};

struct FusedHead {
  Matrix w;    // n x d
  Matrix m;    // n x n
  Matrix p_a;  // n x n
  Matrix p_b;  // n x n
  Matrix w_hat_x;
  Matrix w_hat_se;
  Vector stage_one_correlations;
  Vector stage_two_correlations;  // empty when the second stage is skipped
  PipelineConfig config;
  nlohmann::json provenance = nlohmann::json::object();
};

StageOneResult first_stage(const Matrix& x_clip_classes, const Matrix& x_se_classes,
                           const Matrix& f_r, const Matrix& f_rse, const PipelineConfig& config);

struct SimulatedLogits {
  Matrix x_a;  // kn x n, row i = W_x f_r[i]
  Matrix x_b;  // kn x n, row i = W_se f_r[i]
};

SimulatedLogits simulate_logits(const StageOneResult& s1, const Matrix& f_r);

FusedHead second_stage(const Matrix& x_a, const Matrix& x_b, const StageOneResult& s1,
                       const PipelineConfig& config);

/// first_stage -> simulate_logits -> second_stage, after checking the
/// embedding counts (and seeds, where recorded) against the prompt set.
/// Inputs are used as given; apply `ingest` beforehand.
FusedHead run_doublecca(const PromptSet& prompts, const EmbeddingMatrix& clip_class,
                        const EmbeddingMatrix& se_class, const EmbeddingMatrix& clip_rand,
                        const EmbeddingMatrix& se_rand, const PipelineConfig& config);

nlohmann::json provenance_json(const FusedHead& head);

std::filesystem::path provenance_path(const std::filesystem::path& embx_path);

/// Writes W as EMBX (f64) plus "<stem>.provenance.json".
void save_head(const FusedHead& head, const std::filesystem::path& path,
               const nlohmann::json& extra_provenance = nlohmann::json::object());

}  // namespace dcca
