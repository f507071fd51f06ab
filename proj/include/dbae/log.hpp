// Copyright (C) 2026 The dbae authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <string_view>

namespace dbae::log {

void warn(std::string_view message);

/// Number of warnings emitted since process start; tests use it to observe
/// soft failures that do not throw.
std::size_t warning_count();

void set_quiet(bool quiet);

}  // namespace dbae::log
