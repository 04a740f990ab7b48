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

#include "crm/corpus.hpp"

#include <algorithm>
#include <set>
#include <tuple>

#include "crm/cue.hpp"
#include "crm/error.hpp"
#include "crm/jsonl.hpp"
#include "crm/text.hpp"

namespace crm::corpus {
namespace {

bool is_ascii_alnum(char32_t c) {
  return (c >= U'A' && c <= U'Z') || (c >= U'a' && c <= U'z') || (c >= U'0' && c <= U'9');
}
bool is_ascii_letter(char32_t c) { return (c >= U'A' && c <= U'Z') || (c >= U'a' && c <= U'z'); }
bool is_local_char(char32_t c) {
  return is_ascii_alnum(c) || c == U'.' || c == U'_' || c == U'%' || c == U'+' || c == U'-';
}
bool is_domain_char(char32_t c) { return is_ascii_alnum(c) || c == U'.' || c == U'-'; }
bool is_phone_separator(char32_t c) {
  return c == U' ' || c == U'\t' || c == U'.' || c == U'-' || c == U'(' || c == U')';
}

PiiEntity make_entity(const Document& doc, PiiKind kind, size_t begin, size_t end) {
  return {kind, text::encode_utf8(text::substr(doc.text, begin, end)), {begin, end}};
}

PiiEntity entity_from(const Json& j, const char* key, PiiKind kind, const std::string& where) {
  PiiEntity e;
  e.kind = kind;
  e.surface = jsonl::get_string(j, key, where);
  if (auto spans = j.find("spans"); spans != j.end() && spans->contains(key)) {
    const auto& s = (*spans)[key];
    e.span = {s.at(0).get<size_t>(), s.at(1).get<size_t>()};
  }
  return e;
}

}  // namespace

Json to_json(const PiiTriplet& t) {
  return {{"triplet_id", t.triplet_id},
          {"doc_id", t.doc_id},
          {"lang", t.lang},
          {"split", t.member ? "train" : "test"},
          {"name", t.name.surface},
          {"email", t.email.surface},
          {"phone", t.phone.surface},
          {"context", t.context},
          {"verbatim_prefix_email", t.verbatim_prefix_email},
          {"verbatim_prefix_phone", t.verbatim_prefix_phone},
          {"spans",
           {{"name", {t.name.span.begin, t.name.span.end}},
            {"email", {t.email.span.begin, t.email.span.end}},
            {"phone", {t.phone.span.begin, t.phone.span.end}}}}};
}

PiiTriplet triplet_from_json(const Json& j, const std::string& where) {
  PiiTriplet t;
  t.doc_id = jsonl::get_string(j, "doc_id", where);
  t.triplet_id = jsonl::get_string_or(j, "triplet_id", t.doc_id);
  t.lang = jsonl::get_string(j, "lang", where);
  t.member = jsonl::get_string_or(j, "split", "train") == "train";
  t.name = entity_from(j, "name", PiiKind::name, where);
  t.email = entity_from(j, "email", PiiKind::email, where);
  t.phone = entity_from(j, "phone", PiiKind::phone, where);
  t.context = jsonl::get_string_or(j, "context", "");
  t.verbatim_prefix_email = jsonl::get_string_or(j, "verbatim_prefix_email", "");
  t.verbatim_prefix_phone = jsonl::get_string_or(j, "verbatim_prefix_phone", "");
  return t;
}

Json to_json(const MiaWindow& w) {
  return {{"doc_id", w.doc_id},         {"lang", w.lang},     {"text", w.text},
          {"token_count", w.token_count}, {"member", w.member}, {"anchor_email", w.anchor_email}};
}

MiaWindow window_from_json(const Json& j, const std::string& where) {
  MiaWindow w;
  w.doc_id = jsonl::get_string(j, "doc_id", where);
  w.lang = jsonl::get_string(j, "lang", where);
  w.text = jsonl::get_string(j, "text", where);
  w.anchor_email = jsonl::get_string(j, "anchor_email", where);
  if (!j.contains("member") || !j["member"].is_boolean()) throw DataError(where + ": missing boolean 'member'");
  w.member = j["member"].get<bool>();
  w.token_count = j.value("token_count", 0);
  return w;
}

CountryCodeTable CountryCodeTable::from_json(const Json& j) {
  CountryCodeTable t;
  t.version_ = j.value("version", "unversioned");
  auto langs = j.find("languages");
  if (langs == j.end() || !langs->is_object()) throw ConfigError("country code table needs a 'languages' object");
  for (const auto& [lang, entry] : langs->items()) {
    const Json& codes = entry.is_object() ? entry.at("codes") : entry;
    std::vector<std::string> list;
    for (const auto& c : codes) {
      std::string code = c.get<std::string>();
      if (code.empty() || !std::all_of(code.begin(), code.end(), [](char ch) { return ch >= '0' && ch <= '9'; })) {
        throw ConfigError("country code for '" + lang + "' must be ASCII digits: '" + code + "'");
      }
      list.push_back(std::move(code));
    }
    if (list.empty()) throw ConfigError("empty country code list for '" + lang + "'");
    t.codes_[lang] = std::move(list);
  }
  return t;
}

CountryCodeTable CountryCodeTable::load(const std::filesystem::path& path) {
  try {
    return from_json(Json::parse(jsonl::read_text_file(path)));
  } catch (const Json::exception& e) {
    throw ConfigError("bad country code table " + path.string() + ": " + e.what());
  }
}

const std::vector<std::string>& CountryCodeTable::codes_for(const std::string& lang) const {
  auto it = codes_.find(lang);
  if (it == codes_.end()) throw MissingCountryCodes("no country codes configured for language '" + lang + "'");
  return it->second;
}

std::vector<PiiEntity> scan_emails(const Document& doc) {
  const std::u32string& s = doc.text;
  const size_t n = s.size();
  std::vector<PiiEntity> out;
  size_t scan = 0;
  for (size_t at = 0; at < n; ++at) {
    if (s[at] != U'@' || at < scan) continue;
    size_t local_begin = at;
    while (local_begin > scan && is_local_char(s[local_begin - 1])) --local_begin;
    if (local_begin == at) continue;
    size_t domain_end = at + 1;
    while (domain_end < n && is_domain_char(s[domain_end])) ++domain_end;
    // Greedy domain, then backtrack to the last '.' followed by >= 2 letters.
    for (size_t dot = domain_end; dot-- > at + 2;) {
      if (s[dot] != U'.') continue;
      size_t letters = 0;
      while (dot + 1 + letters < n && letters < 5 && is_ascii_letter(s[dot + 1 + letters])) ++letters;
      if (letters < 2) continue;
      size_t end = dot + 1 + letters;
      out.push_back(make_entity(doc, PiiKind::email, local_begin, end));
      scan = end;
      break;
    }
  }
  return out;
}

std::vector<PiiEntity> scan_phones(const Document& doc, std::span<const std::string> country_codes) {
  if (country_codes.empty()) throw MissingCountryCodes("no country codes for language '" + doc.lang + "'");
  const std::u32string& s = doc.text;
  const size_t n = s.size();
  std::vector<PiiEntity> out;
  size_t i = 0;
  while (i < n) {
    if (s[i] != U'+' || (i > 0 && text::is_word(s[i - 1]))) {
      ++i;
      continue;
    }
    size_t match_end = 0;
    for (const auto& code : country_codes) {
      size_t pos = i + 1;
      bool code_ok = pos + code.size() <= n;
      for (size_t k = 0; code_ok && k < code.size(); ++k) {
        code_ok = s[pos + k] == static_cast<char32_t>(code[k]);
      }
      if (!code_ok) continue;
      pos += code.size();
      std::vector<size_t> rep_ends;
      while (rep_ends.size() < 12) {
        size_t j = pos;
        while (j < n && is_phone_separator(s[j])) ++j;
        if (j < n && text::is_decimal_digit(s[j])) {
          pos = j + 1;
          rep_ends.push_back(pos);
        } else {
          break;
        }
      }
      for (size_t reps = rep_ends.size(); reps >= 6; --reps) {
        size_t end = rep_ends[reps - 1];
        if (end == n || !text::is_word(s[end])) {
          match_end = end;
          break;
        }
      }
      if (match_end != 0) break;
    }
    if (match_end != 0) {
      out.push_back(make_entity(doc, PiiKind::phone, i, match_end));
      i = match_end;
    } else {
      ++i;
    }
  }
  return out;
}

std::vector<PiiEntity> scan_phones(const Document& doc, const CountryCodeTable& table) {
  return scan_phones(doc, table.codes_for(doc.lang));
}

std::vector<PiiEntity> locate_names(const Document& doc, const std::vector<std::string>& names,
                                    std::span<const PiiEntity> blocked) {
  std::vector<PiiEntity> out;
  std::set<std::string> seen;
  for (const auto& name : names) {
    if (name.empty() || !seen.insert(name).second) continue;
    std::u32string needle = text::decode_utf8(name);
    for (size_t pos = doc.text.find(needle); pos != std::u32string::npos;
         pos = doc.text.find(needle, pos + needle.size())) {
      Span span{pos, pos + needle.size()};
      bool clash = std::any_of(blocked.begin(), blocked.end(),
                               [&](const PiiEntity& e) { return e.span.overlaps(span); });
      if (!clash) out.push_back({PiiKind::name, name, span});
    }
  }
  std::sort(out.begin(), out.end(), [](const PiiEntity& a, const PiiEntity& b) {
    return std::tie(a.span.begin, a.span.end, a.surface) < std::tie(b.span.begin, b.span.end, b.surface);
  });
  return out;
}

void SkipReport::add(const std::string& lang, const std::string& reason, size_t n) {
  counts_[lang][reason] += n;
}

void SkipReport::merge(const SkipReport& other) {
  for (const auto& [lang, reasons] : other.counts_) {
    for (const auto& [reason, n] : reasons) counts_[lang][reason] += n;
  }
}

size_t SkipReport::count(const std::string& lang, const std::string& reason) const {
  auto it = counts_.find(lang);
  if (it == counts_.end()) return 0;
  auto r = it->second.find(reason);
  return r == it->second.end() ? 0 : r->second;
}

Json SkipReport::to_json() const {
  Json j = Json::object();
  for (const auto& [lang, reasons] : counts_) {
    for (const auto& [reason, n] : reasons) j[lang][reason] = n;
  }
  return j;
}

bool name_matches_local_part(const std::string& name, const std::string& email) {
  auto at = email.find('@');
  std::string local = at == std::string::npos ? email : email.substr(0, at);
  auto n = cue::normalize(name).text;
  auto l = cue::normalize(local).text;
  if (n.empty() || l.empty()) return false;
  return l.find(n) != std::u32string::npos || n.find(l) != std::u32string::npos;
}

std::vector<PiiTriplet> build_triplets(const Document& doc, std::span<const PiiEntity> emails,
                                       std::span<const PiiEntity> phones,
                                       std::span<const PiiEntity> names, SkipReport& report,
                                       const TripletOptions& opts) {
  struct Pair {
    size_t distance;
    size_t e;
    size_t p;
  };
  std::vector<Pair> pairs;
  for (size_t e = 0; e < emails.size(); ++e) {
    for (size_t p = 0; p < phones.size(); ++p) {
      const Span& a = emails[e].span;
      const Span& b = phones[p].span;
      size_t gap = a.overlaps(b) ? 0 : (a.end <= b.begin ? b.begin - a.end : a.begin - b.end);
      pairs.push_back({gap, e, p});
    }
  }
  std::sort(pairs.begin(), pairs.end(), [&](const Pair& x, const Pair& y) {
    return std::tie(x.distance, emails[x.e].span.begin, phones[x.p].span.begin) <
           std::tie(y.distance, emails[y.e].span.begin, phones[y.p].span.begin);
  });
  std::vector<bool> e_used(emails.size(), false);
  std::vector<bool> p_used(phones.size(), false);
  std::vector<Pair> chosen;
  for (const auto& pr : pairs) {
    if (e_used[pr.e] || p_used[pr.p]) continue;
    if (emails[pr.e].span.overlaps(phones[pr.p].span)) continue;
    e_used[pr.e] = p_used[pr.p] = true;
    chosen.push_back(pr);
  }
  std::sort(chosen.begin(), chosen.end(), [&](const Pair& x, const Pair& y) {
    return std::tie(emails[x.e].span.begin, phones[x.p].span.begin) <
           std::tie(emails[y.e].span.begin, phones[y.p].span.begin);
  });
  size_t unpaired = std::count(e_used.begin(), e_used.end(), false);
  if (unpaired > 0) report.add(doc.lang, "unpaired_email", unpaired);

  std::vector<PiiTriplet> out;
  std::set<std::tuple<std::string, std::string, std::string>> seen;
  for (const auto& pr : chosen) {
    const PiiEntity& email = emails[pr.e];
    const PiiEntity& phone = phones[pr.p];
    size_t lo = std::min(email.span.begin, phone.span.begin);
    size_t hi = std::max(email.span.end, phone.span.end);
    Span window{lo > opts.window_scalars ? lo - opts.window_scalars : 0,
                std::min(doc.text.size(), hi + opts.window_scalars)};

    std::vector<const PiiEntity*> in_window;  // first occurrence of each distinct name
    for (const auto& name : names) {
      if (!window.contains(name.span)) continue;
      bool dup = std::any_of(in_window.begin(), in_window.end(),
                             [&](const PiiEntity* n) { return n->surface == name.surface; });
      if (!dup) in_window.push_back(&name);
    }
    const PiiEntity* owner = nullptr;
    if (in_window.empty()) {
      report.add(doc.lang, "no_name_in_window");
      continue;
    }
    if (in_window.size() == 1) {
      owner = in_window.front();
    } else {
      std::vector<const PiiEntity*> matching;
      for (const PiiEntity* n : in_window) {
        if (name_matches_local_part(n->surface, email.surface)) matching.push_back(n);
      }
      if (matching.size() != 1) {
        report.add(doc.lang, "ambiguous_names");
        continue;
      }
      owner = matching.front();
      report.add(doc.lang, "disambiguated_by_local_part");
    }
    if (!seen.emplace(owner->surface, email.surface, phone.surface).second) {
      report.add(doc.lang, "duplicate_triplet");
      continue;
    }
    PiiTriplet t;
    t.doc_id = doc.doc_id;
    t.lang = doc.lang;
    t.member = doc.member;
    t.name = *owner;
    t.email = email;
    t.phone = phone;
    t.context = text::encode_utf8(text::substr(doc.text, window.begin, window.end));
    out.push_back(std::move(t));
  }
  for (size_t k = 0; k < out.size(); ++k) out[k].triplet_id = doc.doc_id + "#" + std::to_string(k);
  return out;
}

std::string extract_verbatim_prefix(const Document& doc, const PiiEntity& target,
                                    const TokenizeFn& tokenize, size_t max_tokens) {
  if (target.span.begin == 0) throw PreconditionError("target starts the document; there is no prefix");
  std::u32string prefix = text::substr(doc.text, 0, target.span.begin);
  adapter::Tokenization toks = tokenize(text::encode_utf8(prefix));
  if (toks.empty()) return "";
  size_t first = toks.size() > max_tokens ? toks.size() - max_tokens : 0;
  size_t begin = std::min(toks[first].begin, prefix.size());
  return text::encode_utf8(text::substr(prefix, begin, prefix.size()));
}

MiaWindow extract_mia_window(const Document& doc, const PiiEntity& email, const TokenizeFn& tokenize,
                             const MiaWindowOptions& opts) {
  adapter::Tokenization toks = tokenize(text::encode_utf8(doc.text));
  const size_t total = toks.size();
  if (total < opts.min_tokens) {
    throw WindowUnsatisfiable(doc.doc_id + ": document has " + std::to_string(total) +
                              " tokens, fewer than " + std::to_string(opts.min_tokens));
  }
  size_t first = total;
  size_t last = 0;
  for (size_t i = 0; i < total; ++i) {
    if (toks[i].end > email.span.begin && toks[i].begin < email.span.end) {
      first = std::min(first, i);
      last = i;
    }
  }
  if (first == total) throw WindowUnsatisfiable(doc.doc_id + ": email span is not covered by any token");
  const size_t email_tokens = last - first + 1;
  if (email_tokens > opts.max_tokens) {
    throw WindowUnsatisfiable(doc.doc_id + ": email spans " + std::to_string(email_tokens) + " tokens");
  }
  size_t want = std::clamp(opts.target_tokens, opts.min_tokens, opts.max_tokens);
  want = std::max(std::min(want, total), email_tokens);
  size_t extra = want - email_tokens;
  size_t left_avail = first;
  size_t right_avail = total - 1 - last;
  size_t left = extra / 2;
  size_t right = extra - left;
  if (left > left_avail) {
    right += left - left_avail;
    left = left_avail;
  }
  if (right > right_avail) {
    left += right - right_avail;
    right = right_avail;
  }
  const size_t lo = first - left;
  const size_t hi = last + right;
  MiaWindow w;
  w.doc_id = doc.doc_id;
  w.lang = doc.lang;
  w.member = doc.member;
  w.anchor_email = email.surface;
  w.token_count = static_cast<int>(hi - lo + 1);
  w.text = text::encode_utf8(text::substr(doc.text, toks[lo].begin, toks[hi].end));
  if (static_cast<size_t>(w.token_count) < opts.min_tokens) {
    throw WindowUnsatisfiable(doc.doc_id + ": window below minimum size");
  }
  return w;
}

Document document_from_json(const Json& j, const std::string& where, bool member) {
  Document d;
  d.doc_id = jsonl::get_string(j, "id", where);
  d.lang = jsonl::get_string(j, "lang", where);
  d.text = text::decode_utf8(jsonl::get_string(j, "text", where));
  d.member = j.contains("member") && j["member"].is_boolean() ? j["member"].get<bool>() : member;
  return d;
}

}  // namespace crm::corpus
