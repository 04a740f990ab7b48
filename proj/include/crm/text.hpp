// Copyright 2026 The CRM Audit Authors
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
#include <string_view>

// Unicode helpers. All offsets in this project are Unicode scalar offsets,
// so text that needs positional work is held as std::u32string.
namespace crm::text {

// Throws DataError on malformed UTF-8.
std::u32string decode_utf8(std::string_view bytes);
std::string encode_utf8(std::u32string_view scalars);

bool is_letter(char32_t c);          // general category L*
bool is_decimal_digit(char32_t c);   // general category Nd
bool is_alnum(char32_t c);           // L* or Nd
// Python `re` \w for str patterns: letters, anything with a numeric type, '_'.
bool is_word(char32_t c);
bool is_space(char32_t c);

std::u32string nfkc(std::u32string_view s);
std::u32string nfc(std::u32string_view s);
// Full (locale-independent) Unicode lowercasing.
std::u32string lower(std::u32string_view s);

inline std::u32string substr(const std::u32string& s, size_t begin, size_t end) {
  return s.substr(begin, end - begin);
}

}  // namespace crm::text
