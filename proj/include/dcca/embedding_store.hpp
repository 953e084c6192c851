// SPDX-License-Identifier: Apache-2.0
//
// EMBX embedding files and the geometry/normalization applied at ingestion.
//
// EMBX layout (all little-endian):
//   "EMBX" | u32 version = 1 | u8 dtype (0 = f32, 1 = f64) | 3 zero bytes |
//   u64 rows | u64 cols | rows * cols values, row-major
// The manifest lives next to it as "<stem>.json".

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "dcca/numerics.hpp"
#include "json.hpp"

namespace dcca {

enum class Space { Euclidean, Hyperbolic };
enum class Dtype : std::uint8_t { F32 = 0, F64 = 1 };

std::string_view space_name(Space s);
Space parse_space(std::string_view name);

inline constexpr std::uint32_t kEmbxVersion = 1;
inline constexpr std::size_t kEmbxHeaderBytes = 28;
inline constexpr double kPoincareClamp = 1.0 - 1e-7;

inline constexpr std::string_view kRoleClipText = "clip-text";
inline constexpr std::string_view kRoleClipImage = "clip-image";
inline constexpr std::string_view kRoleSentenceEncoder = "sentence-encoder";

struct EmbeddingManifest {
  std::string model_id;
  std::string role;  // one of the kRole* labels, or empty when unknown
  Space space = Space::Euclidean;
  std::optional<std::string> prompt_file;
  std::optional<std::uint64_t> seed;
  bool normalized = false;
  std::uint64_t count = 0;
  std::uint64_t dim = 0;
  // Free-form provenance carried along (extra keys are preserved on round-trip).
  nlohmann::json extra = nlohmann::json::object();

  nlohmann::json to_json() const;
  static EmbeddingManifest from_json(const nlohmann::json& j);
  bool operator==(const EmbeddingManifest&) const = default;
};

struct EmbeddingMatrix {
  Matrix matrix;
  EmbeddingManifest manifest;

  /// Throws ManifestMismatch if count/dim disagree with the matrix, or
  /// InvalidManifest if a non-sentence-encoder role claims hyperbolic space.
  void validate() const;
};

/// Builds an EmbeddingMatrix whose manifest count/dim match `m`.
EmbeddingMatrix make_embedding(Matrix m, std::string model_id, std::string role,
                               Space space = Space::Euclidean);

std::filesystem::path manifest_path(const std::filesystem::path& embx_path);

void write_embx(const EmbeddingMatrix& e, const std::filesystem::path& path,
                Dtype dtype = Dtype::F64);

/// Reads the matrix and its sidecar manifest (a default manifest is synthesized
/// when the sidecar is missing).
EmbeddingMatrix read_embx(const std::filesystem::path& path);

/// Parses just the header; exposed for tooling and tests.
struct EmbxHeader {
  std::uint32_t version = 0;
  Dtype dtype = Dtype::F64;
  std::uint64_t rows = 0;
  std::uint64_t cols = 0;
};
EmbxHeader read_embx_header(const std::filesystem::path& path);

Matrix l2_normalize_rows(const Matrix& m);

/// Logarithmic map at the origin of the unit Poincare ball:
/// x -> artanh(min(|x|, clamp)) x / |x|; the zero row maps to zero.
Matrix poincare_log_map(const Matrix& m, double clamp = kPoincareClamp);

/// Inverse of poincare_log_map (for |v| below the clamp radius).
Matrix poincare_exp_map(const Matrix& m);

struct IngestOptions {
  bool normalize = true;  // L2-normalize rows after any geometry mapping
};

/// Maps hyperbolic rows to the tangent space, optionally normalizes, and
/// records both in the returned manifest (space becomes euclidean).
EmbeddingMatrix ingest(const EmbeddingMatrix& e, const IngestOptions& options);

/// Role-based defaults: clip text/image rows are normalized, sentence-encoder
/// rows are only log-mapped.
IngestOptions default_ingest_options(std::string_view role);

}  // namespace dcca
