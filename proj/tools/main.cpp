// Copyright (c) 2026 the relight authors.
// SPDX-License-Identifier: Apache-2.0

#include "relight/cli.hpp"

int main(int argc, char** argv) { return relight::cli_main(argc, argv); }
