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

#include <filesystem>
#include <string>

#include "nllf/common.hpp"

namespace nllf::testing {

/// Fresh empty directory under the working directory.
inline std::string scratch_dir(const std::string& name) {
  const auto p = std::filesystem::current_path() / "unit_scratch" / name;
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p.string();
}

inline std::string source_path(const std::string& relative) {
  return std::string(NLLF_SOURCE_DIR) + "/" + relative;
}

}  // namespace nllf::testing
