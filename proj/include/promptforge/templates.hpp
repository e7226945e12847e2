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

#include <map>
#include <string>
#include <string_view>

#include "promptforge/util.hpp"

namespace promptforge {

/// Replaces every occurrence of "{key}" for the given keys. Unknown
/// braced text is left untouched.
inline std::string fill_template(
    std::string_view tmpl, const std::map<std::string, std::string>& slots) {
  std::string out(tmpl);
  for (const auto& [key, value] : slots) {
    std::string needle = "{" + key + "}";
    std::size_t pos = 0;
    while ((pos = out.find(needle, pos)) != std::string::npos) {
      out.replace(pos, needle.size(), value);
      pos += value.size();
    }
  }
  return out;
}

inline std::string load_template(const std::string& path) {
  return read_text_file(path);
}

}  // namespace promptforge
