// Copyright 2026 The Forge Authors
// SPDX-License-Identifier: Apache-2.0
//

#include "forge/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return forge::run_cli(args);
}
