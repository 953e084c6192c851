// SPDX-License-Identifier: Apache-2.0

#include "dcca/embedding_store.hpp"

#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <vector>

#include "dcca/error.hpp"

namespace dcca {

namespace {

constexpr std::array<char, 4> kMagic = {'E', 'M', 'B', 'X'};

template <typename U>
void put_le(std::vector<unsigned char>& buf, U v) {
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    buf.push_back(static_cast<unsigned char>(v >> (8 * i)));
  }
}

template <typename U>
U get_le(const unsigned char* p) {
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(p[i]) << (8 * i);
  return v;
}

EmbxHeader parse_header(const unsigned char* p, std::size_t size, const std::string& where) {
  if (size < kMagic.size() || std::memcmp(p, kMagic.data(), kMagic.size()) != 0) {
    throw_data("BadMagic", where + ": not an EMBX file");
  }
  if (size < kEmbxHeaderBytes) throw_data("TruncatedFile", where + ": header is incomplete");
  EmbxHeader h;
  h.version = get_le<std::uint32_t>(p + 4);
  if (h.version != kEmbxVersion) {
    throw_data("UnsupportedVersion", where + ": EMBX version " + std::to_string(h.version));
  }
  const unsigned char dtype = p[8];
  if (dtype > 1) throw_data("DtypeUnknown", where + ": dtype code " + std::to_string(dtype));
  h.dtype = static_cast<Dtype>(dtype);
  h.rows = get_le<std::uint64_t>(p + 12);
  h.cols = get_le<std::uint64_t>(p + 20);
  return h;
}

std::vector<unsigned char> slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw_data("IoError", "cannot open " + path.string());
  return std::vector<unsigned char>(std::istreambuf_iterator<char>(in), {});
}

}  // namespace

std::string_view space_name(Space s) { return s == Space::Hyperbolic ? "hyperbolic" : "euclidean"; }

Space parse_space(std::string_view name) {
  if (name == "euclidean") return Space::Euclidean;
  if (name == "hyperbolic") return Space::Hyperbolic;
  throw_usage("UnknownSpace", "unknown embedding space '" + std::string(name) + "'");
}

nlohmann::json EmbeddingManifest::to_json() const {
  nlohmann::json j = extra.is_object() ? extra : nlohmann::json::object();
  j["model_id"] = model_id;
  j["role"] = role;
  j["space"] = space_name(space);
  j["prompt_file"] = prompt_file ? nlohmann::json(*prompt_file) : nlohmann::json(nullptr);
  j["seed"] = seed ? nlohmann::json(*seed) : nlohmann::json(nullptr);
  j["normalized"] = normalized;
  j["count"] = count;
  j["dim"] = dim;
  return j;
}

EmbeddingManifest EmbeddingManifest::from_json(const nlohmann::json& j) {
  EmbeddingManifest m;
  m.model_id = j.value("model_id", std::string());
  m.role = j.value("role", std::string());
  m.space = parse_space(j.value("space", std::string("euclidean")));
  if (j.contains("prompt_file") && !j["prompt_file"].is_null()) {
    m.prompt_file = j["prompt_file"].get<std::string>();
  }
  if (j.contains("seed") && !j["seed"].is_null()) m.seed = j["seed"].get<std::uint64_t>();
  m.normalized = j.value("normalized", false);
  m.count = j.value("count", std::uint64_t{0});
  m.dim = j.value("dim", std::uint64_t{0});
  m.extra = j;
  for (const char* key :
       {"model_id", "role", "space", "prompt_file", "seed", "normalized", "count", "dim"}) {
    m.extra.erase(key);
  }
  return m;
}

void EmbeddingMatrix::validate() const {
  if (manifest.count != static_cast<std::uint64_t>(matrix.rows()) ||
      manifest.dim != static_cast<std::uint64_t>(matrix.cols())) {
    throw_data("ManifestMismatch", "manifest declares " + std::to_string(manifest.count) + "x" +
                                       std::to_string(manifest.dim) + " but matrix is " +
                                       std::to_string(matrix.rows()) + "x" +
                                       std::to_string(matrix.cols()));
  }
  if (manifest.space == Space::Hyperbolic && !manifest.role.empty() &&
      manifest.role != kRoleSentenceEncoder) {
    throw_data("InvalidManifest", "hyperbolic space is only valid for the sentence-encoder role");
  }
}

EmbeddingMatrix make_embedding(Matrix m, std::string model_id, std::string role, Space space) {
  EmbeddingMatrix e;
  e.manifest.model_id = std::move(model_id);
  e.manifest.role = std::move(role);
  e.manifest.space = space;
  e.manifest.count = static_cast<std::uint64_t>(m.rows());
  e.manifest.dim = static_cast<std::uint64_t>(m.cols());
  e.matrix = std::move(m);
  e.validate();
  return e;
}

std::filesystem::path manifest_path(const std::filesystem::path& embx_path) {
  std::filesystem::path p = embx_path;
  p.replace_extension(".json");
  return p;
}

void write_embx(const EmbeddingMatrix& e, const std::filesystem::path& path, Dtype dtype) {
  require_valid(e.matrix, "write_embx");
  e.validate();
  const auto rows = static_cast<std::uint64_t>(e.matrix.rows());
  const auto cols = static_cast<std::uint64_t>(e.matrix.cols());
  const std::size_t width = dtype == Dtype::F32 ? 4 : 8;

  std::vector<unsigned char> buf;
  buf.reserve(kEmbxHeaderBytes + rows * cols * width);
  buf.insert(buf.end(), kMagic.begin(), kMagic.end());
  put_le<std::uint32_t>(buf, kEmbxVersion);
  buf.push_back(static_cast<unsigned char>(dtype));
  buf.insert(buf.end(), 3, 0);
  put_le<std::uint64_t>(buf, rows);
  put_le<std::uint64_t>(buf, cols);
  for (Index r = 0; r < e.matrix.rows(); ++r) {
    for (Index c = 0; c < e.matrix.cols(); ++c) {
      const double v = e.matrix(r, c);
      if (dtype == Dtype::F32) {
        put_le<std::uint32_t>(buf, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
      } else {
        put_le<std::uint64_t>(buf, std::bit_cast<std::uint64_t>(v));
      }
    }
  }

  {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw_data("IoError", "cannot open " + path.string() + " for writing");
    out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!out) throw_data("IoError", "failed writing " + path.string());
  }
  std::ofstream mout(manifest_path(path), std::ios::binary | std::ios::trunc);
  if (!mout) throw_data("IoError", "cannot write manifest for " + path.string());
  mout << e.manifest.to_json().dump(2) << '\n';
}

EmbxHeader read_embx_header(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw_data("IoError", "cannot open " + path.string());
  std::array<unsigned char, kEmbxHeaderBytes> head{};
  in.read(reinterpret_cast<char*>(head.data()), head.size());
  return parse_header(head.data(), static_cast<std::size_t>(in.gcount()), path.string());
}

EmbeddingMatrix read_embx(const std::filesystem::path& path) {
  const std::vector<unsigned char> bytes = slurp(path);
  const EmbxHeader h = parse_header(bytes.data(), bytes.size(), path.string());
  const std::size_t width = h.dtype == Dtype::F32 ? 4 : 8;
  if (h.rows == 0 || h.cols == 0) throw_data("ShapeMismatch", path.string() + ": empty matrix");
  const std::uint64_t expected = kEmbxHeaderBytes + h.rows * h.cols * width;
  if (bytes.size() < expected) {
    throw_data("TruncatedFile", path.string() + ": payload has " +
                                    std::to_string(bytes.size() - kEmbxHeaderBytes) +
                                    " bytes, header implies " +
                                    std::to_string(expected - kEmbxHeaderBytes));
  }

  EmbeddingMatrix e;
  e.matrix.resize(static_cast<Index>(h.rows), static_cast<Index>(h.cols));
  const unsigned char* p = bytes.data() + kEmbxHeaderBytes;
  for (Index r = 0; r < e.matrix.rows(); ++r) {
    for (Index c = 0; c < e.matrix.cols(); ++c, p += width) {
      e.matrix(r, c) = h.dtype == Dtype::F32
                           ? static_cast<double>(std::bit_cast<float>(get_le<std::uint32_t>(p)))
                           : std::bit_cast<double>(get_le<std::uint64_t>(p));
    }
  }
  require_valid(e.matrix, path.string());

  const auto mpath = manifest_path(path);
  if (std::filesystem::exists(mpath)) {
    std::ifstream min(mpath);
    try {
      e.manifest = EmbeddingManifest::from_json(nlohmann::json::parse(min));
    } catch (const nlohmann::json::exception& ex) {
      throw_data("InputParseError", mpath.string() + ": " + ex.what());
    }
  } else {
    e.manifest.count = h.rows;
    e.manifest.dim = h.cols;
  }
  e.validate();
  return e;
}

Matrix l2_normalize_rows(const Matrix& m) {
  require_valid(m, "l2_normalize_rows");
  Matrix out = m;
  for (Index r = 0; r < out.rows(); ++r) {
    const double norm = out.row(r).norm();
    if (norm == 0.0) throw_data("ZeroRow", "row " + std::to_string(r) + " has zero norm");
    out.row(r) /= norm;
  }
  return out;
}

Matrix poincare_log_map(const Matrix& m, double clamp) {
  require_valid(m, "poincare_log_map");
  Matrix out = m;
  for (Index r = 0; r < out.rows(); ++r) {
    const double norm = out.row(r).norm();
    if (norm == 0.0) continue;
    out.row(r) *= std::atanh(std::min(norm, clamp)) / norm;
  }
  return out;
}

Matrix poincare_exp_map(const Matrix& m) {
  require_valid(m, "poincare_exp_map");
  Matrix out = m;
  for (Index r = 0; r < out.rows(); ++r) {
    const double norm = out.row(r).norm();
    if (norm == 0.0) continue;
    out.row(r) *= std::tanh(norm) / norm;
  }
  return out;
}

EmbeddingMatrix ingest(const EmbeddingMatrix& e, const IngestOptions& options) {
  e.validate();
  EmbeddingMatrix out = e;
  if (e.manifest.space == Space::Hyperbolic) {
    out.matrix = poincare_log_map(e.matrix);
    out.manifest.space = Space::Euclidean;
    out.manifest.extra["log_mapped"] = true;
  }
  if (options.normalize) {
    out.matrix = l2_normalize_rows(out.matrix);
    out.manifest.normalized = true;
  }
  return out;
}

IngestOptions default_ingest_options(std::string_view role) {
  IngestOptions opts;
  opts.normalize = role != kRoleSentenceEncoder;
  return opts;
}

}  // namespace dcca
