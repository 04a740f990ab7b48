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

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

// Model-adapter wire contract. Every message is one JSON object per line:
//   request  {"req_id": <int>, "kind": <string>, "payload": {...}}
//   response {"req_id": <int>, "ok": true,  "result": {...}}
//            {"req_id": <int>, "ok": false, "error": {"type": ..., "message": ...}}
// The first exchange of a session is a "hello" carrying protocol_version.
// Log-probabilities are natural logs.
namespace crm::adapter {

using Json = nlohmann::json;

inline constexpr int kProtocolVersion = 1;

enum class RequestKind {
  hello,
  score_target,
  generate_greedy,
  generate_sample,
  tokenize_text,
  token_stats,
  infill_neighbors,
  annotate_names,
};

std::string_view to_string(RequestKind k);
RequestKind request_kind_from_string(std::string_view s);  // throws AdapterError

struct ScoreTrace {
  std::vector<std::string> target_tokens;
  std::vector<double> logprobs;
  // Mean / standard deviation of log p(v) under the next-token distribution
  // at each target position. Only Min-K%++ needs them.
  std::optional<std::vector<double>> vocab_mu;
  std::optional<std::vector<double>> vocab_sigma;

  size_t size() const { return logprobs.size(); }
  bool has_stats() const { return vocab_mu.has_value() && vocab_sigma.has_value(); }
};

// Enforces the boundary invariants: equal lengths, finite logprobs <= 0,
// sigma > 0. Throws AdapterError naming the violation.
void validate(const ScoreTrace& trace);
Json to_json(const ScoreTrace& trace);
ScoreTrace trace_from_json(const Json& j);  // validates

enum class Decoding { greedy, topk };
std::string_view to_string(Decoding d);

struct GenerationResult {
  std::string text;
  int token_count = 0;
  Decoding decoding = Decoding::greedy;
};
Json to_json(const GenerationResult& g);
GenerationResult generation_from_json(const Json& j);

// Offsets are Unicode scalar offsets into the tokenized text.
struct Token {
  std::string text;
  size_t begin = 0;
  size_t end = 0;
};
using Tokenization = std::vector<Token>;
Json to_json(const Tokenization& t);
Tokenization tokenization_from_json(const Json& j);

struct HelloInfo {
  int protocol_version = 0;
  std::string model_id;
  std::string tokenizer_id;
};

Json make_request(long long req_id, RequestKind kind, Json payload);
Json make_ok(const Json& req_id, Json result);
Json make_error(const Json& req_id, std::string_view type, std::string_view message);

}  // namespace crm::adapter
