// SPDX-License-Identifier: Apache-2.0
//
// Subcommands: prompts, embed, fuse, eval, synth, sweep.
// Exit codes: 0 ok, 1 usage, 2 data/shape, 3 numerical. Failures also print a
// single-line JSON object {"error": kind, "message": ..., "exit_code": ...}
// on the error stream.

#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace dcca {

/// Environment variable consulted when no --endpoint is given.
inline constexpr const char* kEndpointEnv = "DCCA_EMBED_ENDPOINT";

/// `args` excludes the program name.
int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

int run_command(int argc, char** argv);

}  // namespace dcca
