// SPDX-License-Identifier: Apache-2.0

#include "dcca/pipeline.hpp"

#include <fstream>

#include "dcca/error.hpp"

namespace dcca {

namespace {

std::vector<double> to_std(const Vector& v) { return {v.data(), v.data() + v.size()}; }

std::string shape(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

}  // namespace

std::string_view center_mode_name(CenterMode m) {
  return m == CenterMode::Centered ? "centered" : "raw";
}

CenterMode parse_center_mode(std::string_view name) {
  if (name == "raw") return CenterMode::Raw;
  if (name == "centered") return CenterMode::Centered;
  throw_usage("InvalidArgument", "unknown center mode '" + std::string(name) + "'");
}

nlohmann::json PipelineConfig::to_json() const {
  return {{"d_cca", d_cca},
          {"k", k},
          {"seed", seed},
          {"reg_eps", reg_eps},
          {"eig_floor", eig_floor},
          {"center_mode", center_mode_name(center_mode)},
          {"first_cca_only", first_cca_only}};
}

StageOneResult first_stage(const Matrix& x_clip_classes, const Matrix& x_se_classes,
                           const Matrix& f_r, const Matrix& f_rse, const PipelineConfig& config) {
  require_valid(x_clip_classes, "CLIP class embeddings");
  require_valid(x_se_classes, "sentence-encoder class embeddings");
  require_valid(f_r, "CLIP random-sentence embeddings");
  require_valid(f_rse, "sentence-encoder random-sentence embeddings");

  const Index n = x_clip_classes.rows();
  if (x_se_classes.rows() != n) {
    throw_data("AlignmentError", "class embeddings have " + std::to_string(n) + " and " +
                                     std::to_string(x_se_classes.rows()) + " rows");
  }
  const auto expected = static_cast<Index>(config.k) * n;
  if (f_r.rows() != expected || f_rse.rows() != expected) {
    throw_data("AlignmentError", "random-sentence embeddings have " + std::to_string(f_r.rows()) +
                                     " and " + std::to_string(f_rse.rows()) +
                                     " rows, expected k*n = " + std::to_string(expected));
  }
  if (f_r.cols() != x_clip_classes.cols()) {
    throw_data("ShapeMismatch", "CLIP class embeddings " + shape(x_clip_classes) +
                                    " vs random-sentence embeddings " + shape(f_r));
  }
  if (f_rse.cols() != x_se_classes.cols()) {
    throw_data("ShapeMismatch", "sentence-encoder class embeddings " + shape(x_se_classes) +
                                    " vs random-sentence embeddings " + shape(f_rse));
  }

  CcaConfig cca;
  cca.out_dim = config.d_cca;
  cca.reg_eps = config.reg_eps;
  cca.eig_floor = config.eig_floor;

  StageOneResult s1;
  s1.transform = fit_cca(f_r, f_rse, cca);
  const Matrix& w_x = s1.transform.w_a;
  const Matrix& w_se = s1.transform.w_b;

  if (config.center_mode == CenterMode::Centered) {
    const Matrix x = x_clip_classes.rowwise() - s1.transform.mean_a.transpose();
    const Matrix x_se = x_se_classes.rowwise() - s1.transform.mean_b.transpose();
    s1.w_hat_x = x * w_x * w_x.transpose();
    s1.w_hat_se = x_se * w_se * w_x.transpose();
  } else {
    s1.w_hat_x = x_clip_classes * w_x * w_x.transpose();
    s1.w_hat_se = x_se_classes * w_se * w_x.transpose();
  }
  return s1;
}

SimulatedLogits simulate_logits(const StageOneResult& s1, const Matrix& f_r) {
  require_valid(f_r, "simulate_logits input");
  if (f_r.cols() != s1.w_hat_x.cols()) {
    throw_data("ShapeMismatch", "random-sentence embeddings " + shape(f_r) +
                                    " do not match head " + shape(s1.w_hat_x));
  }
  return {f_r * s1.w_hat_x.transpose(), f_r * s1.w_hat_se.transpose()};
}

FusedHead second_stage(const Matrix& x_a, const Matrix& x_b, const StageOneResult& s1,
                       const PipelineConfig& config) {
  const Index n = s1.w_hat_x.rows();
  if (n < 2) throw_data("TooFewClasses", "second stage needs at least two classes");
  if (x_a.rows() != x_b.rows() || x_a.cols() != x_b.cols() || x_a.cols() != n) {
    throw_data("ShapeMismatch", "simulated logits " + shape(x_a) + " and " + shape(x_b) +
                                    " must both be kn x " + std::to_string(n));
  }

  FusedHead head;
  head.config = config;
  head.w_hat_x = s1.w_hat_x;
  head.w_hat_se = s1.w_hat_se;
  head.stage_one_correlations = s1.transform.correlations;

  if (config.first_cca_only) {
    head.w = s1.w_hat_x;
    head.m = Matrix::Identity(n, n);
    head.p_a = Matrix::Identity(n, n);
    head.p_b = Matrix::Identity(n, n);
    return head;
  }

  CcaConfig cca;
  cca.out_dim = n;
  cca.reg_eps = config.reg_eps;
  cca.eig_floor = config.eig_floor;
  const CcaTransform t = fit_cca(x_a, x_b, cca);
  head.p_a = t.w_a;
  head.p_b = t.w_b;
  head.stage_two_correlations = t.correlations;

  const double cond = condition_number(head.p_a);
  if (!(cond <= kSingularPaCondition)) {
    throw_numerical("SingularPA", "P_A condition number " + std::to_string(cond) +
                                      " exceeds 1e12; increase reg_eps");
  }
  // M = (P_B P_A^{-1})^T = P_A^{-T} P_B^T
  head.m = head.p_a.transpose().fullPivLu().solve(head.p_b.transpose());
  head.w = 0.5 * (s1.w_hat_x + head.m * s1.w_hat_se);
  require_valid(head.w, "merged head");
  return head;
}

FusedHead run_doublecca(const PromptSet& prompts, const EmbeddingMatrix& clip_class,
                        const EmbeddingMatrix& se_class, const EmbeddingMatrix& clip_rand,
                        const EmbeddingMatrix& se_rand, const PipelineConfig& config) {
  const auto n = static_cast<std::uint64_t>(prompts.n_classes());
  const auto kn = n * prompts.k;
  const auto check_rows = [](const EmbeddingMatrix& e, std::uint64_t rows, const char* what) {
    e.validate();
    if (static_cast<std::uint64_t>(e.matrix.rows()) != rows) {
      throw_data("AlignmentError", std::string(what) + " has " + std::to_string(e.matrix.rows()) +
                                       " rows, prompt set implies " + std::to_string(rows));
    }
  };
  check_rows(clip_class, n, "CLIP class embedding");
  check_rows(se_class, n, "sentence-encoder class embedding");
  check_rows(clip_rand, kn, "CLIP random-sentence embedding");
  check_rows(se_rand, kn, "sentence-encoder random-sentence embedding");
  for (const auto* e : {&clip_class, &se_class, &clip_rand, &se_rand}) {
    if (e->manifest.seed && *e->manifest.seed != prompts.seed) {
      throw_data("AlignmentError", "embedding '" + e->manifest.model_id + "' was built with seed " +
                                       std::to_string(*e->manifest.seed) + ", prompt set uses " +
                                       std::to_string(prompts.seed));
    }
  }

  PipelineConfig cfg = config;
  cfg.k = prompts.k;
  cfg.seed = prompts.seed;

  const StageOneResult s1 =
      first_stage(clip_class.matrix, se_class.matrix, clip_rand.matrix, se_rand.matrix, cfg);
  const SimulatedLogits logits = simulate_logits(s1, clip_rand.matrix);
  FusedHead head = second_stage(logits.x_a, logits.x_b, s1, cfg);

  head.provenance["prompts"] = {{"classes", prompts.class_names},
                                {"template", template_name(prompts.tmpl)},
                                {"k", prompts.k},
                                {"seed", prompts.seed}};
  head.provenance["inputs"] = {{"clip_class", clip_class.manifest.to_json()},
                               {"se_class", se_class.manifest.to_json()},
                               {"clip_rand", clip_rand.manifest.to_json()},
                               {"se_rand", se_rand.manifest.to_json()}};
  return head;
}

nlohmann::json provenance_json(const FusedHead& head) {
  nlohmann::json j = head.provenance;
  j["config"] = head.config.to_json();
  j["shape"] = {head.w.rows(), head.w.cols()};
  j["stage_one_correlations"] = to_std(head.stage_one_correlations);
  j["stage_two_correlations"] = to_std(head.stage_two_correlations);
  nlohmann::json m = nlohmann::json::array();
  for (Index r = 0; r < head.m.rows(); ++r) m.push_back(to_std(head.m.row(r).transpose()));
  j["merge_matrix"] = m;
  return j;
}

std::filesystem::path provenance_path(const std::filesystem::path& embx_path) {
  std::filesystem::path p = embx_path;
  p.replace_extension(".provenance.json");
  return p;
}

void save_head(const FusedHead& head, const std::filesystem::path& path,
               const nlohmann::json& extra_provenance) {
  EmbeddingMatrix e = make_embedding(head.w, "doublecca-head", std::string(kRoleClipText));
  e.manifest.seed = head.config.seed;
  e.manifest.extra["first_cca_only"] = head.config.first_cca_only;
  write_embx(e, path, Dtype::F64);

  nlohmann::json prov = provenance_json(head);
  for (const auto& [key, value] : extra_provenance.items()) prov[key] = value;
  std::ofstream out(provenance_path(path), std::ios::binary | std::ios::trunc);
  if (!out) throw_data("IoError", "cannot write provenance for " + path.string());
  out << prov.dump(2) << '\n';
}

}  // namespace dcca
