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

#include "crm/mia.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <tuple>

#include "crm/error.hpp"
#include "crm/jsonl.hpp"
#include "crm/text.hpp"

namespace crm::mia {

namespace {

double neumaier_sum(std::span<const double> xs) {
  double sum = 0.0;
  double c = 0.0;
  for (double x : xs) {
    const double t = sum + x;
    if (std::fabs(sum) >= std::fabs(x)) {
      c += (sum - t) + x;
    } else {
      c += (x - t) + sum;
    }
    sum = t;
  }
  return sum + c;
}

double mean(std::span<const double> xs) {
  if (xs.empty()) throw PreconditionError("mean of empty sequence");
  return neumaier_sum(xs) / static_cast<double>(xs.size());
}

void require_tokens(const ScoreTrace& t) {
  if (t.logprobs.empty()) throw PreconditionError("score trace has no tokens");
}

double lowest_k_mean(std::vector<double> values, double k_fraction) {
  if (!(k_fraction > 0.0 && k_fraction <= 1.0)) throw PreconditionError("k_fraction must lie in (0, 1]");
  if (values.empty()) throw PreconditionError("score trace has no tokens");
  auto m = static_cast<size_t>(std::ceil(k_fraction * static_cast<double>(values.size()) - 1e-12));
  m = std::clamp<size_t>(m, 1, values.size());
  std::partial_sort(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(m), values.end());
  values.resize(m);
  return mean(values);
}

}  // namespace

std::string_view to_string(Attack a) {
  switch (a) {
    case Attack::loss: return "loss";
    case Attack::zlib: return "zlib";
    case Attack::ref: return "ref";
    case Attack::ne_ran: return "ne_ran";
    case Attack::ne_pii: return "ne_pii";
    case Attack::min_k: return "min_k";
    case Attack::min_k_pp: return "min_k_pp";
    case Attack::dc_pdd: return "dc_pdd";
  }
  return "?";
}

Attack attack_from_string(std::string_view s) {
  for (Attack a : kAllAttacks) {
    if (to_string(a) == s) return a;
  }
  throw ConfigError("unknown attack: " + std::string(s));
}

double loss_score(const ScoreTrace& trace) {
  require_tokens(trace);
  return mean(trace.logprobs);
}

size_t zlib_length(std::string_view utf8) {
  uLongf bound = compressBound(static_cast<uLong>(utf8.size()));
  std::vector<Bytef> buf(bound);
  const int rc = compress2(buf.data(), &bound, reinterpret_cast<const Bytef*>(utf8.data()),
                           static_cast<uLong>(utf8.size()), Z_DEFAULT_COMPRESSION);
  if (rc != Z_OK) throw Error("zlib compression failed");
  return bound;
}

double zlib_score(std::string_view text, const ScoreTrace& trace) {
  if (text.empty()) throw PreconditionError("zlib score of empty text");
  require_tokens(trace);
  return neumaier_sum(trace.logprobs) / static_cast<double>(zlib_length(text));
}

double ref_score(const ScoreTrace& target, const ScoreTrace& reference) {
  return loss_score(target) - loss_score(reference);
}

double neighborhood_score(const ScoreTrace& self, std::span<const ScoreTrace> neighbors) {
  if (neighbors.empty()) throw PreconditionError("neighborhood score needs at least one neighbor");
  std::vector<double> losses;
  losses.reserve(neighbors.size());
  for (const auto& n : neighbors) losses.push_back(loss_score(n));
  return loss_score(self) - mean(losses);
}

double min_k_score(const ScoreTrace& trace, double k_fraction) {
  return lowest_k_mean(trace.logprobs, k_fraction);
}

double min_k_pp_score(const ScoreTrace& trace, double k_fraction) {
  if (!trace.has_stats()) throw MissingStats("Min-K%++ needs vocab_mu and vocab_sigma");
  const auto& mu = *trace.vocab_mu;
  const auto& sigma = *trace.vocab_sigma;
  if (mu.size() != trace.size() || sigma.size() != trace.size()) {
    throw MissingStats("token statistics do not match the trace length");
  }
  std::vector<double> z(trace.size());
  for (size_t i = 0; i < z.size(); ++i) {
    if (!(sigma[i] > 0.0)) throw DataError("non-positive vocab_sigma");
    z[i] = (trace.logprobs[i] - mu[i]) / sigma[i];
  }
  return lowest_k_mean(std::move(z), k_fraction);
}

// ---- token frequencies ----

double TokenFrequencyTable::frequency(const std::string& token) const {
  auto it = counts.find(token);
  if (it == counts.end() || it->second == 0 || total == 0) return epsilon;
  return static_cast<double>(it->second) / static_cast<double>(total);
}

void TokenFrequencyTable::save(const std::filesystem::path& path) const {
  jsonl::Writer w(path);
  w.write(Json{{"lang", lang}, {"tokenizer_id", tokenizer_id}, {"total", total}, {"epsilon", epsilon}});
  for (const auto& [tok, c] : counts) w.write(Json{{"token", tok}, {"count", c}});
  w.commit();
}

TokenFrequencyTable TokenFrequencyTable::load(const std::filesystem::path& path) {
  TokenFrequencyTable t;
  bool header = true;
  jsonl::for_each(path, [&](const Json& j, const std::string& where) {
    try {
      if (header) {
        t.lang = j.at("lang").get<std::string>();
        t.tokenizer_id = j.at("tokenizer_id").get<std::string>();
        t.total = j.at("total").get<std::uint64_t>();
        t.epsilon = j.at("epsilon").get<double>();
        header = false;
      } else {
        t.counts[j.at("token").get<std::string>()] = j.at("count").get<std::uint64_t>();
      }
    } catch (const Json::exception& e) {
      throw DataError(where + ": bad frequency table entry: " + e.what());
    }
  });
  if (header) throw MissingFrequencyTable("empty frequency table: " + path.string());
  if (!(t.epsilon > 0.0)) throw DataError(path.string() + ": epsilon must be positive");
  return t;
}

TokenFrequencyTable build_frequency_table(std::span<const std::string> texts, const corpus::TokenizeFn& tokenize,
                                          std::string lang, std::string tokenizer_id,
                                          std::optional<double> epsilon) {
  TokenFrequencyTable t;
  t.lang = std::move(lang);
  t.tokenizer_id = std::move(tokenizer_id);
  for (const auto& text : texts) {
    for (const auto& tok : tokenize(text)) {
      ++t.counts[tok.text];
      ++t.total;
    }
  }
  if (t.total == 0) throw PreconditionError("frequency table over an empty corpus");
  t.epsilon = epsilon.value_or(1.0 / static_cast<double>(t.total));
  if (!(t.epsilon > 0.0)) throw PreconditionError("epsilon must be positive");
  return t;
}

double default_dc_pdd_clamp(const TokenFrequencyTable& freq) { return 0.01 * std::fabs(std::log(freq.epsilon)); }

double dc_pdd_score(const ScoreTrace& trace, const TokenFrequencyTable* freq, std::optional<double> clamp) {
  if (freq == nullptr) throw MissingFrequencyTable("DC-PDD needs a token frequency table");
  require_tokens(trace);
  if (trace.target_tokens.size() != trace.size()) throw DataError("trace tokens and logprobs differ in length");
  const double a = clamp.value_or(default_dc_pdd_clamp(*freq));
  std::set<std::string> seen;
  std::vector<double> alphas;
  for (size_t i = 0; i < trace.size(); ++i) {
    if (!seen.insert(trace.target_tokens[i]).second) continue;
    const double p = std::exp(trace.logprobs[i]);
    const double f = freq->frequency(trace.target_tokens[i]);
    alphas.push_back(std::min(p * std::log(1.0 / f), a));
  }
  return mean(alphas);
}

// ---- Ne-PII ----

NeighborPools NeighborPools::load(const std::filesystem::path& emails, const std::filesystem::path& names) {
  auto read_lines = [](const std::filesystem::path& p) {
    std::vector<std::string> out;
    std::string content = jsonl::read_text_file(p);
    size_t start = 0;
    while (start <= content.size()) {
      size_t nl = content.find('\n', start);
      if (nl == std::string::npos) nl = content.size();
      std::string line = content.substr(start, nl - start);
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (!line.empty()) out.push_back(line);
      start = nl + 1;
    }
    return out;
  };
  NeighborPools p;
  if (!emails.empty()) p.emails = read_lines(emails);
  if (!names.empty()) p.names = read_lines(names);
  return p;
}

namespace {

enum class Slot { email, phone, name, date };

struct Hit {
  corpus::Span span;
  Slot slot;
  size_t keep_prefix = 0;  // scalars copied verbatim (phone "+code")
};

bool is_ascii_digit(char32_t c) { return c >= U'0' && c <= U'9'; }

// \d{1,4}[./-]\d{1,2}[./-]\d{1,4} over ASCII digits, not adjacent to
// further digits.
std::vector<corpus::Span> scan_dates(const std::u32string& s) {
  std::vector<corpus::Span> out;
  auto digits = [&](size_t i) {
    size_t j = i;
    while (j < s.size() && is_ascii_digit(s[j])) ++j;
    return j - i;
  };
  auto is_sep = [](char32_t c) { return c == U'.' || c == U'/' || c == U'-'; };
  size_t i = 0;
  while (i < s.size()) {
    if (!is_ascii_digit(s[i]) || (i > 0 && is_ascii_digit(s[i - 1]))) {
      ++i;
      continue;
    }
    const size_t a = digits(i);
    size_t j = i + a;
    bool ok = a <= 4 && j < s.size() && is_sep(s[j]);
    size_t b = 0, c = 0;
    if (ok) {
      b = digits(j + 1);
      ok = b >= 1 && b <= 2 && j + 1 + b < s.size() && is_sep(s[j + 1 + b]);
    }
    if (ok) {
      c = digits(j + 2 + b);
      ok = c >= 1 && c <= 4;
    }
    if (ok) {
      const size_t end = j + 2 + b + c;
      out.push_back({i, end});
      i = end;
    } else {
      i += a;
    }
  }
  return out;
}

size_t phone_code_length(const std::u32string& text, const corpus::Span& span,
                         std::span<const std::string> codes) {
  size_t best = 0;
  for (const auto& code : codes) {
    if (code.size() <= best || span.begin + 1 + code.size() > span.end) continue;
    bool match = true;
    for (size_t k = 0; k < code.size(); ++k) {
      if (text[span.begin + 1 + k] != static_cast<char32_t>(static_cast<unsigned char>(code[k]))) {
        match = false;
        break;
      }
    }
    if (match) best = code.size();
  }
  return 1 + best;
}

}  // namespace

NePiiVariants nepii_substitute(const corpus::MiaWindow& window, const NeighborPools& pools, std::uint64_t seed,
                               std::span<const std::string> names, std::span<const std::string> country_codes,
                               int n) {
  if (n < 1) throw PreconditionError("need at least one neighbor");
  corpus::Document doc{window.doc_id, window.lang, text::decode_utf8(window.text), window.member};

  std::vector<Hit> hits;
  std::vector<corpus::PiiEntity> blocked;
  for (auto& e : corpus::scan_emails(doc)) {
    hits.push_back({e.span, Slot::email});
    blocked.push_back(e);
  }
  if (!country_codes.empty()) {
    for (auto& p : corpus::scan_phones(doc, country_codes)) {
      bool clash = std::any_of(blocked.begin(), blocked.end(), [&](const auto& b) { return b.span.overlaps(p.span); });
      if (clash) continue;
      hits.push_back({p.span, Slot::phone, phone_code_length(doc.text, p.span, country_codes)});
      blocked.push_back(p);
    }
  }
  std::vector<std::string> name_list(names.begin(), names.end());
  for (auto& nm : corpus::locate_names(doc, name_list, blocked)) {
    hits.push_back({nm.span, Slot::name});
    blocked.push_back(nm);
  }
  for (auto& d : scan_dates(doc.text)) {
    bool clash = std::any_of(blocked.begin(), blocked.end(), [&](const auto& b) { return b.span.overlaps(d); });
    if (!clash) hits.push_back({d, Slot::date});
  }
  std::sort(hits.begin(), hits.end(), [](const Hit& a, const Hit& b) { return a.span.begin < b.span.begin; });

  NePiiVariants out;
  if (hits.empty()) {
    out.variants.assign(static_cast<size_t>(n), window.text);
    return out;
  }
  const bool need_emails = std::any_of(hits.begin(), hits.end(), [](const Hit& h) { return h.slot == Slot::email; });
  const bool need_names = std::any_of(hits.begin(), hits.end(), [](const Hit& h) { return h.slot == Slot::name; });
  if (need_emails && pools.emails.empty()) throw EmptyPool("window has emails but the email pool is empty");
  if (need_names && pools.names.empty()) throw EmptyPool("window has names but the name pool is empty");

  out.substituted = true;
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> digit(0, 9);
  for (int v = 0; v < n; ++v) {
    std::u32string res;
    size_t pos = 0;
    for (const auto& h : hits) {
      res.append(doc.text, pos, h.span.begin - pos);
      switch (h.slot) {
        case Slot::email: {
          std::uniform_int_distribution<size_t> pick(0, pools.emails.size() - 1);
          res += text::decode_utf8(pools.emails[pick(rng)]);
          break;
        }
        case Slot::name: {
          std::uniform_int_distribution<size_t> pick(0, pools.names.size() - 1);
          res += text::decode_utf8(pools.names[pick(rng)]);
          break;
        }
        case Slot::phone:
        case Slot::date: {
          for (size_t i = h.span.begin; i < h.span.end; ++i) {
            const char32_t c = doc.text[i];
            if (i - h.span.begin >= h.keep_prefix && text::is_decimal_digit(c)) {
              res += static_cast<char32_t>(U'0' + digit(rng));
            } else {
              res += c;
            }
          }
          break;
        }
      }
      pos = h.span.end;
    }
    res.append(doc.text, pos, std::u32string::npos);
    out.variants.push_back(text::encode_utf8(res));
  }
  return out;
}

// ---- records ----

Json to_json(const MiaRecord& r) {
  Json traces = Json::object();
  for (const auto& [k, v] : r.traces) {
    Json arr = Json::array();
    for (const auto& t : v) arr.push_back(adapter::to_json(t));
    traces[k] = std::move(arr);
  }
  Json neighbors = Json::object();
  for (const auto& [k, v] : r.neighbor_texts) neighbors[k] = v;
  Json scores = Json::object();
  for (const auto& [k, v] : r.scores) scores[k] = v;
  return Json{{"window", corpus::to_json(r.window)},
              {"model", r.model},
              {"traces", std::move(traces)},
              {"neighbors", std::move(neighbors)},
              {"nepii_substituted", r.nepii_substituted},
              {"scores", std::move(scores)}};
}

MiaRecord mia_record_from_json(const Json& j, const std::string& where) {
  MiaRecord r;
  try {
    r.window = corpus::window_from_json(j.at("window"), where);
    r.model = j.value("model", "");
    if (j.contains("traces")) {
      for (const auto& [k, v] : j.at("traces").items()) {
        auto& dst = r.traces[k];
        for (const auto& t : v) dst.push_back(adapter::trace_from_json(t));
      }
    }
    if (j.contains("neighbors")) {
      for (const auto& [k, v] : j.at("neighbors").items()) r.neighbor_texts[k] = v.get<std::vector<std::string>>();
    }
    r.nepii_substituted = j.value("nepii_substituted", false);
    if (j.contains("scores")) {
      for (const auto& [k, v] : j.at("scores").items()) r.scores[k] = v.get<double>();
    }
  } catch (const Json::exception& e) {
    throw DataError(where + ": bad MIA record: " + e.what());
  } catch (const AdapterError& e) {
    throw DataError(where + ": " + e.what());
  }
  return r;
}

std::map<std::string, double> score_record(const MiaRecord& r, std::span<const Attack> attacks,
                                           const AttackParams& params, const TokenFrequencyTable* freq) {
  std::map<std::string, double> out;
  auto traces = [&](const char* key) -> const std::vector<ScoreTrace>* {
    auto it = r.traces.find(key);
    return it == r.traces.end() || it->second.empty() ? nullptr : &it->second;
  };
  const auto* self = traces("self");
  if (self == nullptr) return out;
  const ScoreTrace& s = self->front();
  for (Attack a : attacks) {
    const std::string name(to_string(a));
    switch (a) {
      case Attack::loss: out[name] = loss_score(s); break;
      case Attack::zlib: out[name] = zlib_score(r.window.text, s); break;
      case Attack::ref:
        if (const auto* ref = traces("reference")) out[name] = ref_score(s, ref->front());
        break;
      case Attack::ne_ran:
        if (const auto* nb = traces("ne_ran")) out[name] = neighborhood_score(s, *nb);
        break;
      case Attack::ne_pii:
        if (const auto* nb = traces("ne_pii")) out[name] = neighborhood_score(s, *nb);
        break;
      case Attack::min_k: out[name] = min_k_score(s, params.k_fraction); break;
      case Attack::min_k_pp:
        if (s.has_stats()) out[name] = min_k_pp_score(s, params.k_fraction);
        break;
      case Attack::dc_pdd:
        if (freq != nullptr) out[name] = dc_pdd_score(s, freq, params.dc_pdd_clamp);
        break;
    }
  }
  return out;
}

std::vector<LangRoc> evaluate_by_language(std::span<const MiaRecord> records, std::span<const Attack> attacks,
                                          std::span<const double> fprs) {
  std::map<std::pair<std::string, std::string>, std::vector<const MiaRecord*>> groups;
  for (const auto& r : records) {
    groups[{r.model, r.window.lang}].push_back(&r);
    groups[{r.model, "all"}].push_back(&r);
  }
  std::vector<LangRoc> out;
  for (const auto& [key, rs] : groups) {
    for (Attack a : attacks) {
      const std::string name(to_string(a));
      std::vector<double> mem, non;
      for (const auto* r : rs) {
        auto it = r->scores.find(name);
        if (it == r->scores.end()) continue;
        (r->window.member ? mem : non).push_back(it->second);
      }
      if (mem.empty() || non.empty()) continue;
      out.push_back({key.first, key.second, roc::evaluate(name, mem, non, fprs)});
    }
  }
  return out;
}

}  // namespace crm::mia
