/*
 * Copyright 2026 The promptforge authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace promptforge {

/// Byte length of the UTF-8 sequence starting at `lead`. Stray
/// continuation or invalid lead bytes are treated as length-1 units so
/// that malformed input degrades gracefully instead of throwing.
inline std::size_t utf8_sequence_length(unsigned char lead) {
  if (lead < 0x80) return 1;
  if ((lead & 0xE0) == 0xC0) return 2;
  if ((lead & 0xF0) == 0xE0) return 3;
  if ((lead & 0xF8) == 0xF0) return 4;
  return 1;
}

/// Splits a string into Unicode scalar values, each kept as its UTF-8
/// byte sequence. Character-level edits operate on these units so a
/// multi-byte character is never cut in half.
inline std::vector<std::string> utf8_scalars(std::string_view s) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < s.size()) {
    std::size_t len = utf8_sequence_length(static_cast<unsigned char>(s[i]));
    if (i + len > s.size()) len = 1;
    out.emplace_back(s.substr(i, len));
    i += len;
  }
  return out;
}

inline std::string join_scalars(const std::vector<std::string>& scalars) {
  std::string out;
  for (const auto& sc : scalars) out += sc;
  return out;
}

}  // namespace promptforge
