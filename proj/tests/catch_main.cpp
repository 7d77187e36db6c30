// Copyright (c) 2026 the relight authors.
// SPDX-License-Identifier: Apache-2.0

#include <catch2/catch_amalgamated.cpp>
