// Copyright 2026 The lexstat Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


// File and process helpers. Internal to the library.

#ifndef LEXSTAT_SRC_FSUTIL_HPP_
#define LEXSTAT_SRC_FSUTIL_HPP_

#include <chrono>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "lexstat/types.hpp"

namespace lexstat::detail {

/// Writes to `<path>.tmp`, fsyncs, then renames over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

std::string read_file(const std::filesystem::path& path);

/// JSON that may carry the non-standard literals NaN, Infinity and
/// -Infinity (as written by Python's json module). They load as null.
/// Returns nullopt when the file is missing or does not parse.
std::optional<Json> read_json_lenient(const std::filesystem::path& path);

/// Spawns `argv` with stdout/stderr appended to `log_file` and `extra_env`
/// added to the inherited environment. Returns the pid.
int spawn_process(const std::vector<std::string>& argv, const std::filesystem::path& log_file,
                  const std::map<std::string, std::string>& extra_env = {});

/// Non-blocking when `block` is false; returns the exit status once the
/// process ended (128 + signal for a killed child).
std::optional<int> poll_process(int pid, bool block);

/// True when `path` names an executable regular file.
bool is_executable(const std::filesystem::path& path);

}  // namespace lexstat::detail

#endif  // LEXSTAT_SRC_FSUTIL_HPP_
