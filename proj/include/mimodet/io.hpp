// Copyright 2026 The mimodet Authors
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

#pragma once

#include <string>

namespace mimodet {

std::string read_text_file(const std::string& path);
/// Writes via a temporary file and rename so readers never see partial output.
void write_text_file(const std::string& path, const std::string& text);
void ensure_directory(const std::string& path);

/// Fixed-format decimal rendering used in every emitted table.
std::string format_double(double v);

}  // namespace mimodet
