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

#include <condition_variable>
#include <cstdint>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "crm/protocol.hpp"
#include "crm/transport.hpp"

namespace crm::adapter {

struct ClientOptions {
  // Upper bound on requests awaiting a response.
  size_t max_in_flight = 16;
};

// Thread-safe adapter session. Requests are pipelined up to the in-flight
// window and responses are matched back to callers by req_id, so the
// adapter may answer in any order.
class AdapterClient {
 public:
  // Performs the protocol handshake; throws AdapterError on version mismatch.
  explicit AdapterClient(std::unique_ptr<Transport> transport, ClientOptions opts = {});
  ~AdapterClient();
  AdapterClient(const AdapterClient&) = delete;
  AdapterClient& operator=(const AdapterClient&) = delete;

  const HelloInfo& info() const { return info_; }

  std::future<Json> submit(RequestKind kind, Json payload);
  Json call(RequestKind kind, Json payload) { return submit(kind, std::move(payload)).get(); }

  ScoreTrace score_target(const std::string& prompt, const std::string& target,
                          bool with_stats = false);
  GenerationResult generate_greedy(const std::string& prompt, int max_new_tokens = 15);
  GenerationResult generate_sample(const std::string& prompt, std::uint64_t seed,
                                   int max_new_tokens = 256, int top_k = 40);
  Tokenization tokenize_text(const std::string& text);
  std::vector<std::string> infill_neighbors(const std::string& text, std::uint64_t seed,
                                            int n = 10, double mask_fraction = 0.2,
                                            int max_span = 3);
  std::vector<std::string> annotate_names(const std::string& text, const std::string& lang);

  // Payload builders and result parsers shared with batch callers that use
  // submit() directly.
  static Json score_payload(const std::string& prompt, const std::string& target, bool with_stats);
  static ScoreTrace parse_score(const Json& result);
  static GenerationResult parse_generation(const Json& result, int max_new_tokens);

 private:
  void reader_loop();
  void fail_all(const std::string& why);

  std::unique_ptr<Transport> transport_;
  ClientOptions opts_;
  HelloInfo info_;

  std::mutex mu_;
  std::condition_variable slot_cv_;
  std::map<long long, std::promise<Json>> pending_;
  long long next_id_ = 1;
  bool dead_ = false;
  std::string dead_reason_;

  std::mutex send_mu_;
  std::thread reader_;
};

}  // namespace crm::adapter
