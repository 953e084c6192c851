// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "dcca/numerics.hpp"
#include "json.hpp"

namespace dcca {

std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);
/// Digest of the little-endian f64 bytes of `m` (row-major) plus its shape.
std::string sha256_matrix(const Matrix& m);
inline std::string sha256_json(const nlohmann::json& j) { return sha256_hex(j.dump()); }

}  // namespace dcca
