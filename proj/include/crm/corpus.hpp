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

#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "crm/protocol.hpp"
#include "crm/types.hpp"

namespace crm::corpus {

using Json = nlohmann::json;

struct Document {
  std::string doc_id;
  std::string lang;  // ISO-639-3
  std::u32string text;
  bool member = true;  // drawn from the audited model's training split
};

// Half-open [begin, end) in Unicode scalar offsets.
struct Span {
  size_t begin = 0;
  size_t end = 0;
  bool overlaps(const Span& o) const { return begin < o.end && o.begin < end; }
  bool contains(const Span& o) const { return begin <= o.begin && o.end <= end; }
  bool operator==(const Span&) const = default;
};

struct PiiEntity {
  PiiKind kind = PiiKind::email;
  std::string surface;  // UTF-8 of text[span]
  Span span;
};

struct PiiTriplet {
  std::string triplet_id;
  std::string doc_id;
  std::string lang;
  bool member = true;
  PiiEntity name;
  PiiEntity email;
  PiiEntity phone;
  std::string context;
  std::string verbatim_prefix_email;
  std::string verbatim_prefix_phone;
};
Json to_json(const PiiTriplet& t);
PiiTriplet triplet_from_json(const Json& j, const std::string& where);

struct MiaWindow {
  std::string doc_id;
  std::string lang;
  std::string text;
  int token_count = 0;
  bool member = false;
  std::string anchor_email;
};
Json to_json(const MiaWindow& w);
MiaWindow window_from_json(const Json& j, const std::string& where);

// Language -> ordered list of international dialing codes. Order matters:
// it is the alternation order of the phone pattern.
class CountryCodeTable {
 public:
  static CountryCodeTable from_json(const Json& j);
  static CountryCodeTable load(const std::filesystem::path& path);

  // Throws MissingCountryCodes.
  const std::vector<std::string>& codes_for(const std::string& lang) const;
  bool has(const std::string& lang) const { return codes_.contains(lang); }
  const std::string& version() const { return version_; }

 private:
  std::string version_;
  std::map<std::string, std::vector<std::string>> codes_;
};

// [A-Za-z0-9._%+-]+@[A-Za-z0-9.\-]+\.[A-Za-z]{2,5}, scanned left to right
// with backtracking semantics identical to Python's re.finditer.
std::vector<PiiEntity> scan_emails(const Document& doc);

// (?<!\w)\+(?:c1|c2|...)(?:[ \t.\-()]*\d){6,12}(?!\w) with \w and \d in
// their Unicode (str-pattern) meaning.
std::vector<PiiEntity> scan_phones(const Document& doc, std::span<const std::string> country_codes);
std::vector<PiiEntity> scan_phones(const Document& doc, const CountryCodeTable& table);

// Occurrences of externally annotated name strings, excluding any that
// overlap an email or phone span.
std::vector<PiiEntity> locate_names(const Document& doc, const std::vector<std::string>& names,
                                    std::span<const PiiEntity> blocked);

// Drop-reason counters per language.
class SkipReport {
 public:
  void add(const std::string& lang, const std::string& reason, size_t n = 1);
  void merge(const SkipReport& other);
  size_t count(const std::string& lang, const std::string& reason) const;
  Json to_json() const;

 private:
  std::map<std::string, std::map<std::string, size_t>> counts_;
};

struct TripletOptions {
  // Candidate window: the email..phone stretch widened by this many scalars.
  size_t window_scalars = 100;
};

// True when the normalized name and the normalized local part contain one
// another (either direction), both non-empty.
bool name_matches_local_part(const std::string& name, const std::string& email);

// Pairs each email with its nearest phone (one-to-one, closest first), then
// keeps a pair when exactly one name lies in its candidate window or when
// exactly one of several names matches the email local part. Verbatim
// prefixes are left empty.
std::vector<PiiTriplet> build_triplets(const Document& doc, std::span<const PiiEntity> emails,
                                       std::span<const PiiEntity> phones,
                                       std::span<const PiiEntity> names, SkipReport& report,
                                       const TripletOptions& opts = {});

using TokenizeFn = std::function<adapter::Tokenization(const std::string&)>;

// Text of the last <= max_tokens tokens of doc.text[0, target.begin) under
// the audited model's tokenizer. Offsets returned by the tokenizer index
// into the prefix, so the result is an exact slice of the document.
std::string extract_verbatim_prefix(const Document& doc, const PiiEntity& target,
                                    const TokenizeFn& tokenize, size_t max_tokens = 100);

struct MiaWindowOptions {
  size_t min_tokens = 50;
  size_t max_tokens = 150;
  // Preferred window size; clamped into [min_tokens, max_tokens].
  size_t target_tokens = 100;
};

// Contiguous token window around the email: grown symmetrically, borrowing
// from the other side when one side runs out. Throws WindowUnsatisfiable if
// the email alone exceeds max_tokens or the document has fewer than
// min_tokens tokens.
MiaWindow extract_mia_window(const Document& doc, const PiiEntity& email, const TokenizeFn& tokenize,
                             const MiaWindowOptions& opts = {});

Document document_from_json(const Json& j, const std::string& where, bool member);

}  // namespace crm::corpus
