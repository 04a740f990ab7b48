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

#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include "json.hpp"

// Line-delimited JSON records: one UTF-8 object per line.
namespace crm::jsonl {

using Json = nlohmann::json;

// Canonical single-line serialization used for every file and wire message.
std::string dump(const Json& j);
Json parse_line(const std::string& line, const std::string& where);

// Streams non-empty lines; `where` for errors is "<path>:<line>".
void for_each(const std::filesystem::path& path,
              const std::function<void(const Json&, const std::string& where)>& fn);
std::vector<Json> read_all(const std::filesystem::path& path);

// Writes to "<path>.tmp" and renames on commit(), so a crashed stage never
// leaves a truncated output that a later stage would trust.
class Writer {
 public:
  explicit Writer(std::filesystem::path path, bool append = false);
  Writer(const Writer&) = delete;
  Writer& operator=(const Writer&) = delete;
  ~Writer();

  void write(const Json& record);
  void write_raw(const std::string& line);
  void commit();

 private:
  std::filesystem::path path_;
  std::filesystem::path tmp_;
  std::ofstream out_;
  bool committed_ = false;
};

const std::string& get_string(const Json& j, const char* key, const std::string& where);
std::string get_string_or(const Json& j, const char* key, std::string fallback);

void write_text_file(const std::filesystem::path& path, const std::string& content);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace crm::jsonl
