// SPDX-License-Identifier: Apache-2.0

#include "dcca/cli.hpp"

int main(int argc, char** argv) { return dcca::run_command(argc, argv); }
