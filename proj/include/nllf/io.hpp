// Copyright 2026 The NLLF Authors.
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

#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace nllf::io {

using Json = nlohmann::json;
using OrderedJson = nlohmann::ordered_json;

using CsvRow = std::vector<std::string>;

// RFC 4180 reader: quoted fields may contain separators, quotes ("") and
// newlines. Throws ParseError with the 1-based record number on bad quoting.
std::vector<CsvRow> parse_csv(std::string_view text);
std::string format_csv_field(std::string_view field);
std::string format_csv_row(const CsvRow& row);

// Calls `visit(json, line_number)` for every non-blank line.
void for_each_jsonl(const std::string& path,
                    const std::function<void(const OrderedJson&, std::size_t)>& visit);
std::string to_jsonl(const std::vector<OrderedJson>& records);

// Shortest decimal that round-trips the double exactly.
std::string format_double(double value);

}  // namespace nllf::io
