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

#include "crm/jsonl.hpp"

#include <sstream>

#include "crm/error.hpp"

namespace crm::jsonl {

std::string dump(const Json& j) {
  return j.dump(-1, ' ', false, Json::error_handler_t::strict);
}

Json parse_line(const std::string& line, const std::string& where) {
  try {
    return Json::parse(line);
  } catch (const Json::parse_error& e) {
    throw DataError(where + ": malformed JSON record: " + e.what());
  }
}

void for_each(const std::filesystem::path& path,
              const std::function<void(const Json&, const std::string&)>& fn) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    std::string where = path.string() + ":" + std::to_string(line_no);
    fn(parse_line(line, where), where);
  }
}

std::vector<Json> read_all(const std::filesystem::path& path) {
  std::vector<Json> out;
  for_each(path, [&](const Json& j, const std::string&) { out.push_back(j); });
  return out;
}

Writer::Writer(std::filesystem::path path, bool append)
    : path_(std::move(path)), tmp_(path_.string() + ".tmp") {
  if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
  if (append && std::filesystem::exists(path_)) {
    std::filesystem::copy_file(path_, tmp_, std::filesystem::copy_options::overwrite_existing);
    out_.open(tmp_, std::ios::binary | std::ios::app);
  } else {
    out_.open(tmp_, std::ios::binary | std::ios::trunc);
  }
  if (!out_) throw DataError("cannot write " + tmp_.string());
}

Writer::~Writer() {
  if (!committed_) {
    out_.close();
    std::error_code ec;
    std::filesystem::remove(tmp_, ec);
  }
}

void Writer::write(const Json& record) { write_raw(dump(record)); }

void Writer::write_raw(const std::string& line) {
  out_ << line << '\n';
}

void Writer::commit() {
  out_.flush();
  if (!out_) throw DataError("write failed for " + tmp_.string());
  out_.close();
  std::filesystem::rename(tmp_, path_);
  committed_ = true;
}

const std::string& get_string(const Json& j, const char* key, const std::string& where) {
  auto it = j.find(key);
  if (it == j.end() || !it->is_string()) {
    throw DataError(where + ": missing string field '" + key + "'");
  }
  return it->get_ref<const std::string&>();
}

std::string get_string_or(const Json& j, const char* key, std::string fallback) {
  auto it = j.find(key);
  if (it == j.end() || !it->is_string()) return fallback;
  return it->get<std::string>();
}

void write_text_file(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + tmp.string());
    out << content;
    if (!out) throw DataError("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace crm::jsonl
