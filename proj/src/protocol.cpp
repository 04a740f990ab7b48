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

#include "crm/protocol.hpp"

#include <array>
#include <cmath>
#include <utility>

#include "crm/error.hpp"

namespace crm::adapter {
namespace {

constexpr std::array<std::pair<RequestKind, std::string_view>, 8> kKinds{{
    {RequestKind::hello, "hello"},
    {RequestKind::score_target, "score_target"},
    {RequestKind::generate_greedy, "generate_greedy"},
    {RequestKind::generate_sample, "generate_sample"},
    {RequestKind::tokenize_text, "tokenize_text"},
    {RequestKind::token_stats, "token_stats"},
    {RequestKind::infill_neighbors, "infill_neighbors"},
    {RequestKind::annotate_names, "annotate_names"},
}};

std::vector<double> number_list(const Json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || !it->is_array()) {
    throw AdapterError(std::string("trace is missing list '") + key + "'");
  }
  std::vector<double> out;
  out.reserve(it->size());
  for (const auto& v : *it) {
    if (!v.is_number()) throw AdapterError(std::string("non-numeric entry in '") + key + "'");
    out.push_back(v.get<double>());
  }
  return out;
}

}  // namespace

std::string_view to_string(RequestKind k) {
  for (const auto& [kind, name] : kKinds) {
    if (kind == k) return name;
  }
  return "?";
}

RequestKind request_kind_from_string(std::string_view s) {
  for (const auto& [kind, name] : kKinds) {
    if (name == s) return kind;
  }
  throw AdapterError("unknown request kind '" + std::string(s) + "'");
}

void validate(const ScoreTrace& trace) {
  const size_t n = trace.logprobs.size();
  if (trace.target_tokens.size() != n) {
    throw AdapterError("trace length mismatch: " + std::to_string(trace.target_tokens.size()) +
                       " tokens vs " + std::to_string(n) + " logprobs");
  }
  for (double lp : trace.logprobs) {
    if (!std::isfinite(lp) || lp > 0.0) {
      throw AdapterError("trace logprob must be finite and <= 0, got " + std::to_string(lp));
    }
  }
  if (trace.vocab_mu.has_value() != trace.vocab_sigma.has_value()) {
    throw AdapterError("vocab_mu and vocab_sigma must be supplied together");
  }
  if (trace.vocab_mu) {
    if (trace.vocab_mu->size() != n || trace.vocab_sigma->size() != n) {
      throw AdapterError("vocab statistics length mismatch");
    }
    for (double mu : *trace.vocab_mu) {
      if (!std::isfinite(mu)) throw AdapterError("vocab_mu must be finite");
    }
    for (double sigma : *trace.vocab_sigma) {
      if (!std::isfinite(sigma) || sigma <= 0.0) throw AdapterError("vocab_sigma must be > 0");
    }
  }
}

Json to_json(const ScoreTrace& trace) {
  Json j = {{"target_tokens", trace.target_tokens}, {"logprobs", trace.logprobs}};
  if (trace.vocab_mu) j["vocab_mu"] = *trace.vocab_mu;
  if (trace.vocab_sigma) j["vocab_sigma"] = *trace.vocab_sigma;
  return j;
}

ScoreTrace trace_from_json(const Json& j) {
  ScoreTrace t;
  auto toks = j.find("target_tokens");
  if (toks == j.end() || !toks->is_array()) throw AdapterError("trace is missing 'target_tokens'");
  for (const auto& v : *toks) {
    if (!v.is_string()) throw AdapterError("non-string target token");
    t.target_tokens.push_back(v.get<std::string>());
  }
  t.logprobs = number_list(j, "logprobs");
  if (j.contains("vocab_mu") && !j["vocab_mu"].is_null()) t.vocab_mu = number_list(j, "vocab_mu");
  if (j.contains("vocab_sigma") && !j["vocab_sigma"].is_null()) {
    t.vocab_sigma = number_list(j, "vocab_sigma");
  }
  validate(t);
  return t;
}

std::string_view to_string(Decoding d) { return d == Decoding::greedy ? "greedy" : "topk"; }

Json to_json(const GenerationResult& g) {
  return {{"text", g.text}, {"token_count", g.token_count}, {"decoding", to_string(g.decoding)}};
}

GenerationResult generation_from_json(const Json& j) {
  try {
    GenerationResult g;
    g.text = j.at("text").get<std::string>();
    g.token_count = j.at("token_count").get<int>();
    std::string dec = j.value("decoding", "greedy");
    if (dec == "greedy") {
      g.decoding = Decoding::greedy;
    } else if (dec == "topk") {
      g.decoding = Decoding::topk;
    } else {
      throw AdapterError("unknown decoding '" + dec + "'");
    }
    return g;
  } catch (const Json::exception& e) {
    throw AdapterError(std::string("malformed generation result: ") + e.what());
  }
}

Json to_json(const Tokenization& t) {
  Json tokens = Json::array();
  Json offsets = Json::array();
  for (const auto& tok : t) {
    tokens.push_back(tok.text);
    offsets.push_back({tok.begin, tok.end});
  }
  return {{"tokens", std::move(tokens)}, {"offsets", std::move(offsets)}};
}

Tokenization tokenization_from_json(const Json& j) {
  try {
    const auto& tokens = j.at("tokens");
    const auto& offsets = j.at("offsets");
    if (tokens.size() != offsets.size()) throw AdapterError("tokens/offsets length mismatch");
    Tokenization out;
    out.reserve(tokens.size());
    size_t prev_end = 0;
    for (size_t i = 0; i < tokens.size(); ++i) {
      Token tok{tokens[i].get<std::string>(), offsets[i].at(0).get<size_t>(),
                offsets[i].at(1).get<size_t>()};
      if (tok.end < tok.begin || tok.begin < prev_end) {
        throw AdapterError("token offsets must be ordered and non-overlapping");
      }
      prev_end = tok.end;
      out.push_back(std::move(tok));
    }
    return out;
  } catch (const Json::exception& e) {
    throw AdapterError(std::string("malformed tokenization: ") + e.what());
  }
}

Json make_request(long long req_id, RequestKind kind, Json payload) {
  return {{"req_id", req_id}, {"kind", to_string(kind)}, {"payload", std::move(payload)}};
}

Json make_ok(const Json& req_id, Json result) {
  return {{"req_id", req_id}, {"ok", true}, {"result", std::move(result)}};
}

Json make_error(const Json& req_id, std::string_view type, std::string_view message) {
  return {{"req_id", req_id}, {"ok", false}, {"error", {{"type", type}, {"message", message}}}};
}

}  // namespace crm::adapter
