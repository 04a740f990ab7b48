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

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "crm/protocol.hpp"

// Deterministic in-process backend used by tests, the fixture pipeline and
// the crm-mock-adapter binary. It is a small language model with three
// sources of next-token mass:
//   * copy rule: an associative prompt ending in "email: " / "email is "
//     that mentions a capitalized two-word name is continued with
//     "<first>.<last>@gmail.com", mimicking name-driven completion;
//   * lookup: the longest suffix of the context (up to max_order tokens,
//     at least min_lookup_order) seen in the training texts votes for the
//     tokens that followed it, which reproduces memorized continuations;
//   * base: add-one smoothed unigram over the training vocabulary.
// The active primary source gets `primary_weight` and the base the rest.
namespace crm::mock {

// Fixed pre-tokenizer: an optional single leading space followed by a run
// of letters/digits/marks, or a single other scalar.
adapter::Tokenization tokenize(const std::string& utf8);
inline constexpr const char* kTokenizerId = "mock-pretok-v1";

struct MockModelConfig {
  std::string model_id = "mock-ngram";
  size_t max_order = 12;
  size_t min_lookup_order = 3;
  double primary_weight = 0.9;
  bool copy_rule = true;
};

// Word-level mask plan for neighbor infilling: non-overlapping,
// non-adjacent spans of 1..max_span words covering round(fraction * words)
// words (at least one). Returned as (first_word, length), sorted.
std::vector<std::pair<size_t, size_t>> plan_mask_spans(size_t num_words, double fraction,
                                                       size_t max_span, std::mt19937_64& rng);

class MockModel {
 public:
  MockModel(const std::vector<std::string>& training_texts, MockModelConfig config = {});
  // Uniform distribution over a fixed vocabulary; every target token must
  // be one of `vocab`.
  static MockModel uniform(std::vector<std::string> vocab, std::string model_id = "mock-uniform");

  const std::string& model_id() const { return config_.model_id; }
  size_t vocab_size() const { return vocab_.size(); }

  adapter::ScoreTrace score(const std::string& prompt, const std::string& target,
                            bool with_stats) const;
  adapter::GenerationResult greedy(const std::string& prompt, int max_new_tokens) const;
  adapter::GenerationResult sample(const std::string& prompt, int max_new_tokens, int top_k,
                                   std::uint64_t seed) const;
  std::vector<std::string> infill(const std::string& text, int n, double mask_fraction,
                                  int max_span, std::uint64_t seed) const;
  std::vector<std::string> annotate_names(const std::string& text) const;

  // Continuation the copy rule would produce for this prompt, if any.
  std::optional<std::string> copy_continuation(const std::string& prompt) const;

 private:
  MockModel() = default;

  struct Dist {
    std::vector<double> p;  // indexed by vocab id
    std::string extra;      // out-of-vocabulary copy token, if any
    double extra_p = 0.0;
  };
  struct Step {
    std::vector<int> ctx;
    std::vector<std::string> copy_tokens;
    bool copy_alive = false;
    size_t emitted = 0;
    // Prompt ended in a lone space token; the first continuation token
    // absorbs it, as in the training tokenization.
    bool pending_space = false;
  };

  int id_of(const std::string& tok) const;
  Step start(const std::string& prompt) const;
  Dist next(const Step& s) const;
  void advance(Step& s, const std::string& tok) const;
  std::string spaced(const Step& s, const std::string& tok) const;
  bool absorbs_space(const Step& s) const { return s.pending_space && s.emitted == 0 && !s.copy_alive; }
  double prob_of(const Dist& d, const std::string& tok) const;

  MockModelConfig config_;
  bool uniform_ = false;
  std::vector<std::string> vocab_;  // id 0 is <unk>
  std::unordered_map<std::string, int> ids_;
  std::vector<double> base_;
  // order -> context key -> next id -> count
  std::vector<std::unordered_map<std::string, std::map<int, int>>> ngrams_;
  std::vector<std::string> filler_words_;
};

// Serves the adapter protocol on top of a MockModel.
class MockAdapterServer {
 public:
  explicit MockAdapterServer(std::shared_ptr<const MockModel> model) : model_(std::move(model)) {}
  adapter::Json handle(const adapter::Json& request) const;
  std::string handle_line(const std::string& line) const;

 private:
  std::shared_ptr<const MockModel> model_;
};

// Loads the "text" field of every record in line-delimited corpus files.
std::vector<std::string> load_training_texts(const std::vector<std::string>& paths);

}  // namespace crm::mock
