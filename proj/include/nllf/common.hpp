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

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <functional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace nllf {

// Error hierarchy. The CLI maps each family onto an exit code.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ParseError : Error {
  using Error::Error;
};
struct ValidationError : Error {
  using Error::Error;
};
struct ConfigError : Error {
  using Error::Error;
};
struct TemplateError : Error {
  using Error::Error;
};
struct InputError : Error {
  using Error::Error;
};
struct InternalError : Error {
  using Error::Error;
};
struct TrainingError : Error {
  using Error::Error;
};
struct StalenessError : Error {
  using Error::Error;
};
struct TransportError : Error {
  TransportError(const std::string& what, int attempts)
      : Error(what), attempts(attempts) {}
  int attempts;
};

enum class Label { negative = 0, positive = 1 };

std::string to_string(Label label);
Label label_from_string(std::string_view text);

// Warning channel. Defaults to stderr; tests install a capturing handler.
using WarningHandler = std::function<void(const std::string&)>;
void warn(const std::string& message);
WarningHandler set_warning_handler(WarningHandler handler);

class ScopedWarningCapture {
 public:
  ScopedWarningCapture();
  ~ScopedWarningCapture();
  ScopedWarningCapture(const ScopedWarningCapture&) = delete;
  ScopedWarningCapture& operator=(const ScopedWarningCapture&) = delete;
  const std::vector<std::string>& messages() const { return messages_; }

 private:
  std::vector<std::string> messages_;
  WarningHandler previous_;
};

// Hex SHA-256 of arbitrary bytes.
std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::string& path);

// Deterministic random source. The standard distributions are
// implementation-defined, so sampling goes through these helpers.
using Rng = std::mt19937_64;
std::size_t uniform_index(Rng& rng, std::size_t n);
double uniform_unit(Rng& rng);
double normal_sample(Rng& rng);

template <typename T>
void shuffle(std::vector<T>& items, Rng& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    std::swap(items[i - 1], items[uniform_index(rng, i)]);
  }
}

// Text helpers. Bytes >= 0x80 are treated as word characters so UTF-8
// words survive tokenization intact.
std::string to_lower_ascii(std::string_view text);
std::string trim(std::string_view text);
std::string casefold(std::string_view text);
bool is_word_byte(unsigned char c);
std::vector<std::string> word_tokens(std::string_view text);
std::vector<char32_t> utf8_decode(std::string_view text);
std::string join(std::span<const std::string> parts, std::string_view sep);
std::vector<std::string> split_lines(std::string_view text);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view contents);
bool file_exists(const std::string& path);

// Logistic function, clamped so the result stays strictly inside (0, 1)
// even where the exact value rounds to 0 or 1 in double precision.
inline double sigmoid(double x) {
  double v;
  if (x >= 0.0) {
    v = 1.0 / (1.0 + std::exp(-x));
  } else {
    const double z = std::exp(x);
    v = z / (1.0 + z);
  }
  return std::clamp(v, std::numeric_limits<double>::min(),
                    std::nextafter(1.0, 0.0));
}

}  // namespace nllf
