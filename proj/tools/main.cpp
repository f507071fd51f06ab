// Copyright (C) 2026 The dbae authors
// SPDX-License-Identifier: Apache-2.0
#include "dbae/cli.hpp"

int main(int argc, char** argv) { return dbae::run_cli(argc, argv); }
