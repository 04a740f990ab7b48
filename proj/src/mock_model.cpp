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

#include "crm/mock_model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "crm/error.hpp"
#include "crm/jsonl.hpp"
#include "crm/text.hpp"

namespace crm::mock {
namespace {

bool is_mark(char32_t c) {
  // Combining marks keep Indic/Thai syllables inside one token.
  return (c >= 0x0300 && c <= 0x036F) || (c >= 0x0900 && c <= 0x0DFF) ||
         (c >= 0x0E31 && c <= 0x0E4E) || (c >= 0x1AB0 && c <= 0x1AFF) ||
         (c >= 0x20D0 && c <= 0x20FF);
}

bool is_word_scalar(char32_t c) { return text::is_alnum(c) || is_mark(c); }

bool is_upper_letter(char32_t c) {
  return text::is_letter(c) && text::lower(std::u32string(1, c)) != std::u32string(1, c);
}

bool is_lower_letter(char32_t c) { return text::is_letter(c) && !is_upper_letter(c); }

const std::set<std::u32string>& stopwords() {
  static const std::set<std::u32string> words = {
      U"The", U"A", U"An", U"Contact", U"Please", U"Call", U"Email", U"Phone", U"Dear",
      U"Best", U"Regards", U"Kind", U"Hello", U"Hi", U"Mr", U"Mrs", U"Ms", U"Dr",
      U"Office", U"Team", U"Street", U"Reach", U"Write", U"Thanks", U"Thank", U"Visit",
      U"For", U"Our", U"Your", U"My", U"This", U"If", U"Sales", U"Support", U"Tel", U"Fax",
      U"Mail", U"Questions", U"Bookings", U"Booking", U"Open", U"Monday", U"Friday"};
  return words;
}

bool is_name_word(const std::u32string& w) {
  if (w.size() < 2 || !is_upper_letter(w[0])) return false;
  return std::all_of(w.begin() + 1, w.end(), is_lower_letter);
}

// Maximal runs of >= 2 capitalized words separated by single spaces, with
// stopwords trimmed from the ends.
std::vector<std::string> name_runs(const std::string& utf8) {
  std::u32string s = text::decode_utf8(utf8);
  std::vector<std::string> out;
  std::vector<std::u32string> run;
  auto flush = [&] {
    while (!run.empty() && stopwords().contains(run.front())) run.erase(run.begin());
    while (!run.empty() && stopwords().contains(run.back())) run.pop_back();
    if (run.size() >= 2) {
      std::u32string joined = run[0];
      for (size_t k = 1; k < run.size(); ++k) joined += U" " + run[k];
      out.push_back(text::encode_utf8(joined));
    }
    run.clear();
  };
  size_t prev_end = 0;
  size_t i = 0;
  while (i < s.size()) {
    if (!text::is_letter(s[i])) {
      ++i;
      continue;
    }
    size_t j = i;
    while (j < s.size() && text::is_letter(s[j])) ++j;
    std::u32string w = s.substr(i, j - i);
    if (is_name_word(w)) {
      bool adjacent = !run.empty() && prev_end + 1 == i && s[prev_end] == U' ';
      if (!adjacent) flush();
      run.push_back(std::move(w));
      prev_end = j;
    } else {
      flush();
    }
    i = j;
  }
  flush();
  return out;
}

std::string key_of(const int* ids, size_t n) {
  return std::string(reinterpret_cast<const char*>(ids), n * sizeof(int));
}

double unit_uniform(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * (1.0 / 9007199254740992.0);
}

std::string trim_right(std::string s) {
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\n')) s.pop_back();
  return s;
}

}  // namespace

adapter::Tokenization tokenize(const std::string& utf8) {
  std::u32string s = text::decode_utf8(utf8);
  adapter::Tokenization out;
  size_t i = 0;
  const size_t n = s.size();
  while (i < n) {
    size_t start = i;
    if (s[i] == U' ' && i + 1 < n && !text::is_space(s[i + 1])) ++i;
    if (is_word_scalar(s[i])) {
      while (i < n && is_word_scalar(s[i])) ++i;
    } else {
      ++i;
    }
    out.push_back({text::encode_utf8(s.substr(start, i - start)), start, i});
  }
  return out;
}

std::vector<std::pair<size_t, size_t>> plan_mask_spans(size_t num_words, double fraction,
                                                       size_t max_span, std::mt19937_64& rng) {
  std::vector<std::pair<size_t, size_t>> spans;
  if (num_words == 0) return spans;
  max_span = std::max<size_t>(1, max_span);
  size_t target = static_cast<size_t>(std::llround(fraction * static_cast<double>(num_words)));
  target = std::clamp<size_t>(target, 1, num_words);
  std::vector<bool> used(num_words, false);
  auto free_block = [&](size_t b, size_t len) {
    size_t lo = b == 0 ? 0 : b - 1;
    size_t hi = std::min(num_words, b + len + 1);
    for (size_t k = lo; k < hi; ++k) {
      if (used[k]) return false;
    }
    return true;
  };
  size_t covered = 0;
  while (covered < target) {
    size_t want = std::min<size_t>(1 + rng() % max_span, target - covered);
    bool placed = false;
    for (size_t len = want; len >= 1 && !placed; --len) {
      if (len > num_words) continue;
      for (int attempt = 0; attempt < 64 && !placed; ++attempt) {
        size_t b = rng() % (num_words - len + 1);
        if (free_block(b, len)) {
          for (size_t k = b; k < b + len; ++k) used[k] = true;
          spans.emplace_back(b, len);
          covered += len;
          placed = true;
        }
      }
      if (!placed) {
        for (size_t b = 0; b + len <= num_words && !placed; ++b) {
          if (free_block(b, len)) {
            for (size_t k = b; k < b + len; ++k) used[k] = true;
            spans.emplace_back(b, len);
            covered += len;
            placed = true;
          }
        }
      }
    }
    if (!placed) break;
  }
  std::sort(spans.begin(), spans.end());
  return spans;
}

MockModel::MockModel(const std::vector<std::string>& training_texts, MockModelConfig config)
    : config_(std::move(config)) {
  std::vector<std::vector<std::string>> docs;
  std::set<std::string> uniq;
  for (const auto& t : training_texts) {
    std::vector<std::string> toks;
    for (auto& tok : tokenize(t)) toks.push_back(std::move(tok.text));
    uniq.insert(toks.begin(), toks.end());
    docs.push_back(std::move(toks));
  }
  vocab_.push_back("<unk>");
  vocab_.insert(vocab_.end(), uniq.begin(), uniq.end());
  for (size_t i = 0; i < vocab_.size(); ++i) ids_[vocab_[i]] = static_cast<int>(i);

  std::vector<double> counts(vocab_.size(), 0.0);
  double total = 0.0;
  ngrams_.resize(config_.max_order + 1);
  for (const auto& toks : docs) {
    std::vector<int> ids;
    for (const auto& tok : toks) ids.push_back(ids_.at(tok));
    for (size_t i = 0; i < ids.size(); ++i) {
      counts[ids[i]] += 1.0;
      total += 1.0;
      for (size_t order = 1; order <= config_.max_order && order <= i; ++order) {
        ngrams_[order][key_of(ids.data() + i - order, order)][ids[i]] += 1;
      }
    }
  }
  base_.resize(vocab_.size());
  const double denom = total + static_cast<double>(vocab_.size());
  for (size_t i = 0; i < vocab_.size(); ++i) base_[i] = (counts[i] + 1.0) / denom;

  for (const auto& w : vocab_) {
    std::string bare = (!w.empty() && w[0] == ' ') ? w.substr(1) : w;
    std::u32string u = text::decode_utf8(bare);
    if (u.size() >= 2 && std::all_of(u.begin(), u.end(), [](char32_t c) { return text::is_letter(c); })) {
      filler_words_.push_back(bare);
    }
  }
  std::sort(filler_words_.begin(), filler_words_.end());
  filler_words_.erase(std::unique(filler_words_.begin(), filler_words_.end()), filler_words_.end());
  if (filler_words_.empty()) filler_words_ = {"lorem", "ipsum", "dolor"};
}

MockModel MockModel::uniform(std::vector<std::string> vocab, std::string model_id) {
  MockModel m;
  m.uniform_ = true;
  m.config_.model_id = std::move(model_id);
  m.config_.copy_rule = false;
  m.config_.max_order = 0;
  std::sort(vocab.begin(), vocab.end());
  vocab.erase(std::unique(vocab.begin(), vocab.end()), vocab.end());
  m.vocab_ = std::move(vocab);
  for (size_t i = 0; i < m.vocab_.size(); ++i) m.ids_[m.vocab_[i]] = static_cast<int>(i);
  m.base_.assign(m.vocab_.size(), 1.0 / static_cast<double>(m.vocab_.size()));
  m.ngrams_.resize(1);
  m.filler_words_ = m.vocab_;
  return m;
}

int MockModel::id_of(const std::string& tok) const {
  auto it = ids_.find(tok);
  if (it != ids_.end()) return it->second;
  if (uniform_) throw ModelError("token '" + tok + "' is outside the uniform vocabulary");
  return 0;
}

std::optional<std::string> MockModel::copy_continuation(const std::string& prompt) const {
  if (!config_.copy_rule) return std::nullopt;
  std::string tail = trim_right(prompt);
  std::transform(tail.begin(), tail.end(), tail.begin(), [](unsigned char c) { return std::tolower(c); });
  auto ends_with = [&](std::string_view suffix) {
    return tail.size() >= suffix.size() && tail.compare(tail.size() - suffix.size(), suffix.size(), suffix) == 0;
  };
  if (!ends_with("email:") && !ends_with("email is")) return std::nullopt;
  auto names = name_runs(prompt);
  if (names.empty()) return std::nullopt;
  const std::string& name = names.back();
  auto first_space = name.find(' ');
  auto last_space = name.rfind(' ');
  std::string first = name.substr(0, first_space);
  std::string last = name.substr(last_space + 1);
  auto low = [](std::string s) { return text::encode_utf8(text::lower(text::decode_utf8(s))); };
  return low(first) + "." + low(last) + "@gmail.com";
}

MockModel::Step MockModel::start(const std::string& prompt) const {
  Step s;
  auto toks = tokenize(prompt);
  if (!uniform_ && toks.size() > 1 && toks.back().text == " ") {
    toks.pop_back();
    s.pending_space = true;
  }
  for (const auto& tok : toks) {
    auto it = ids_.find(tok.text);
    s.ctx.push_back(it == ids_.end() ? 0 : it->second);
  }
  if (auto cont = copy_continuation(prompt)) {
    for (auto& tok : tokenize(*cont)) s.copy_tokens.push_back(std::move(tok.text));
    s.copy_alive = true;
  }
  return s;
}

std::string MockModel::spaced(const Step& s, const std::string& tok) const {
  if (absorbs_space(s) && !tok.empty() && tok[0] != ' ' && ids_.contains(" " + tok)) return " " + tok;
  return tok;
}

void MockModel::advance(Step& s, const std::string& tok) const {
  auto it = ids_.find(spaced(s, tok));
  s.ctx.push_back(it == ids_.end() ? 0 : it->second);
  if (s.copy_alive) {
    s.copy_alive = s.emitted < s.copy_tokens.size() && s.copy_tokens[s.emitted] == tok;
  }
  ++s.emitted;
}

MockModel::Dist MockModel::next(const Step& s) const {
  Dist d;
  d.p = base_;
  if (uniform_) return d;
  const double w = config_.primary_weight;
  if (s.copy_alive && s.emitted < s.copy_tokens.size()) {
    for (double& v : d.p) v *= (1.0 - w);
    const std::string& tok = s.copy_tokens[s.emitted];
    auto it = ids_.find(tok);
    if (it != ids_.end()) {
      d.p[it->second] += w;
    } else {
      d.extra = tok;
      d.extra_p = w;
    }
    return d;
  }
  const size_t max_order = std::min(config_.max_order, s.ctx.size());
  for (size_t order = max_order; order >= config_.min_lookup_order && order >= 1; --order) {
    const int* key_begin = s.ctx.data() + s.ctx.size() - order;
    if (std::find(key_begin, key_begin + order, 0) != key_begin + order) continue;
    auto hit = ngrams_[order].find(key_of(key_begin, order));
    if (hit == ngrams_[order].end()) continue;
    double total = 0.0;
    for (const auto& [id, c] : hit->second) total += c;
    for (double& v : d.p) v *= (1.0 - w);
    for (const auto& [id, c] : hit->second) d.p[id] += w * c / total;
    break;
  }
  return d;
}

double MockModel::prob_of(const Dist& d, const std::string& tok) const {
  if (!d.extra.empty() && tok == d.extra) return d.extra_p;
  return d.p[static_cast<size_t>(id_of(tok))];
}

adapter::ScoreTrace MockModel::score(const std::string& prompt, const std::string& target,
                                     bool with_stats) const {
  if (target.empty()) throw ModelError("empty target");
  adapter::ScoreTrace trace;
  Step s = start(prompt);
  const auto target_tokens = tokenize(target);
  if (absorbs_space(s) && spaced(s, target_tokens.front().text) == target_tokens.front().text) {
    // Nothing to merge the space into: it stays a token of the prompt.
    s.ctx.push_back(id_of(" "));
    s.pending_space = false;
  }
  std::vector<double> mus;
  std::vector<double> sigmas;
  for (const auto& tok : target_tokens) {
    Dist d = next(s);
    trace.target_tokens.push_back(tok.text);
    trace.logprobs.push_back(std::log(prob_of(d, spaced(s, tok.text))));
    if (with_stats) {
      double mu = 0.0;
      auto acc_mu = [&](double p) {
        if (p > 0.0) mu += p * std::log(p);
      };
      for (double p : d.p) acc_mu(p);
      acc_mu(d.extra_p);
      double var = 0.0;
      auto acc_var = [&](double p) {
        if (p > 0.0) var += p * (std::log(p) - mu) * (std::log(p) - mu);
      };
      for (double p : d.p) acc_var(p);
      acc_var(d.extra_p);
      mus.push_back(mu);
      // A flat distribution has zero spread; report a floor so the
      // standardized score stays defined.
      sigmas.push_back(std::max(std::sqrt(var), 1e-9));
    }
    advance(s, tok.text);
  }
  if (with_stats) {
    trace.vocab_mu = std::move(mus);
    trace.vocab_sigma = std::move(sigmas);
  }
  return trace;
}

adapter::GenerationResult MockModel::greedy(const std::string& prompt, int max_new_tokens) const {
  adapter::GenerationResult out;
  out.decoding = adapter::Decoding::greedy;
  Step s = start(prompt);
  for (int step = 0; step < max_new_tokens; ++step) {
    Dist d = next(s);
    size_t best = 0;
    for (size_t i = 1; i < d.p.size(); ++i) {
      if (d.p[i] > d.p[best]) best = i;
    }
    std::string tok = (!d.extra.empty() && d.extra_p > d.p[best]) ? d.extra : vocab_[best];
    if (tok == "<unk>") break;
    out.text += absorbs_space(s) && tok[0] == ' ' ? tok.substr(1) : tok;
    ++out.token_count;
    advance(s, tok);
  }
  return out;
}

adapter::GenerationResult MockModel::sample(const std::string& prompt, int max_new_tokens, int top_k,
                                            std::uint64_t seed) const {
  adapter::GenerationResult out;
  out.decoding = adapter::Decoding::topk;
  std::mt19937_64 rng(seed);
  Step s = start(prompt);
  for (int step = 0; step < max_new_tokens; ++step) {
    Dist d = next(s);
    std::vector<std::pair<double, int>> cand;  // (p, id); id -1 is the extra token
    cand.reserve(d.p.size() + 1);
    for (size_t i = 1; i < d.p.size(); ++i) cand.emplace_back(d.p[i], static_cast<int>(i));
    if (!d.extra.empty()) cand.emplace_back(d.extra_p, -1);
    if (cand.empty()) break;
    size_t k = std::min<size_t>(static_cast<size_t>(top_k), cand.size());
    std::partial_sort(cand.begin(), cand.begin() + static_cast<long>(k), cand.end(),
                      [](const auto& a, const auto& b) {
                        return a.first != b.first ? a.first > b.first : a.second < b.second;
                      });
    double mass = 0.0;
    for (size_t i = 0; i < k; ++i) mass += cand[i].first;
    double u = unit_uniform(rng) * mass;
    size_t pick = k - 1;
    for (size_t i = 0; i < k; ++i) {
      u -= cand[i].first;
      if (u < 0.0) {
        pick = i;
        break;
      }
    }
    std::string tok = cand[pick].second < 0 ? d.extra : vocab_[static_cast<size_t>(cand[pick].second)];
    out.text += absorbs_space(s) && !tok.empty() && tok[0] == ' ' ? tok.substr(1) : tok;
    ++out.token_count;
    advance(s, tok);
  }
  return out;
}

std::vector<std::string> MockModel::infill(const std::string& text, int n, double mask_fraction,
                                           int max_span, std::uint64_t seed) const {
  std::u32string s = text::decode_utf8(text);
  std::vector<std::pair<size_t, size_t>> words;  // scalar spans
  for (size_t i = 0; i < s.size();) {
    if (text::is_space(s[i])) {
      ++i;
      continue;
    }
    size_t j = i;
    while (j < s.size() && !text::is_space(s[j])) ++j;
    words.emplace_back(i, j);
    i = j;
  }
  std::vector<std::string> variants;
  for (int v = 0; v < n; ++v) {
    std::mt19937_64 rng(seed + static_cast<std::uint64_t>(v) * 0x9E3779B97F4A7C15ULL);
    auto spans = plan_mask_spans(words.size(), mask_fraction, static_cast<size_t>(std::max(1, max_span)), rng);
    std::u32string out;
    size_t cursor = 0;
    for (const auto& [first, len] : spans) {
      for (size_t w = first; w < first + len; ++w) {
        auto [b, e] = words[w];
        out += s.substr(cursor, b - cursor);
        std::u32string original = s.substr(b, e - b);
        std::u32string repl;
        do {
          repl = text::decode_utf8(filler_words_[rng() % filler_words_.size()]);
        } while (repl == original && filler_words_.size() > 1);
        if (repl == original) repl += U"x";
        out += repl;
        cursor = e;
      }
    }
    out += s.substr(cursor);
    variants.push_back(text::encode_utf8(out));
  }
  return variants;
}

std::vector<std::string> MockModel::annotate_names(const std::string& text) const {
  std::vector<std::string> out;
  for (auto& name : name_runs(text)) {
    if (std::find(out.begin(), out.end(), name) == out.end()) out.push_back(std::move(name));
  }
  return out;
}

adapter::Json MockAdapterServer::handle(const adapter::Json& request) const {
  using adapter::Json;
  using adapter::RequestKind;
  Json req_id = request.contains("req_id") ? request["req_id"] : Json();
  try {
    const Json& payload = request.at("payload");
    RequestKind kind = adapter::request_kind_from_string(request.at("kind").get<std::string>());
    switch (kind) {
      case RequestKind::hello:
        return adapter::make_ok(req_id, {{"protocol_version", adapter::kProtocolVersion},
                                         {"model_id", model_->model_id()},
                                         {"tokenizer_id", kTokenizerId}});
      case RequestKind::score_target:
      case RequestKind::token_stats: {
        bool stats = kind == RequestKind::token_stats || payload.value("with_stats", false);
        auto trace = model_->score(payload.at("prompt").get<std::string>(),
                                   payload.at("target").get<std::string>(), stats);
        return adapter::make_ok(req_id, adapter::to_json(trace));
      }
      case RequestKind::generate_greedy:
        return adapter::make_ok(req_id, adapter::to_json(model_->greedy(
                                            payload.at("prompt").get<std::string>(),
                                            payload.value("max_new_tokens", 15))));
      case RequestKind::generate_sample:
        return adapter::make_ok(req_id, adapter::to_json(model_->sample(
                                            payload.at("prompt").get<std::string>(),
                                            payload.value("max_new_tokens", 256),
                                            payload.value("top_k", 40),
                                            payload.at("seed").get<std::uint64_t>())));
      case RequestKind::tokenize_text:
        return adapter::make_ok(req_id, adapter::to_json(tokenize(payload.at("text").get<std::string>())));
      case RequestKind::infill_neighbors:
        return adapter::make_ok(
            req_id, {{"variants", model_->infill(payload.at("text").get<std::string>(),
                                                 payload.value("n", 10),
                                                 payload.value("mask_fraction", 0.2),
                                                 payload.value("max_span", 3),
                                                 payload.value("seed", std::uint64_t{0}))}});
      case RequestKind::annotate_names:
        return adapter::make_ok(req_id, {{"names", model_->annotate_names(payload.at("text").get<std::string>())}});
    }
    return adapter::make_error(req_id, "BadRequest", "unhandled kind");
  } catch (const ModelError& e) {
    return adapter::make_error(req_id, "ModelError", e.what());
  } catch (const std::exception& e) {
    return adapter::make_error(req_id, "BadRequest", e.what());
  }
}

std::string MockAdapterServer::handle_line(const std::string& line) const {
  adapter::Json req;
  try {
    req = adapter::Json::parse(line);
  } catch (const adapter::Json::parse_error& e) {
    return jsonl::dump(adapter::make_error(nullptr, "BadRequest", e.what()));
  }
  return jsonl::dump(handle(req));
}

std::vector<std::string> load_training_texts(const std::vector<std::string>& paths) {
  std::vector<std::string> texts;
  for (const auto& p : paths) {
    jsonl::for_each(p, [&](const jsonl::Json& j, const std::string& where) {
      texts.push_back(jsonl::get_string(j, "text", where));
    });
  }
  return texts;
}

}  // namespace crm::mock
