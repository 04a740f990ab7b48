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

#include "crm/adapter_client.hpp"

#include <iostream>

#include "crm/error.hpp"
#include "crm/jsonl.hpp"

namespace crm::adapter {

AdapterClient::AdapterClient(std::unique_ptr<Transport> transport, ClientOptions opts)
    : transport_(std::move(transport)), opts_(opts) {
  if (opts_.max_in_flight == 0) opts_.max_in_flight = 1;
  reader_ = std::thread([this] { reader_loop(); });
  try {
    Json hello = call(RequestKind::hello, {{"protocol_version", kProtocolVersion}});
    info_.protocol_version = hello.value("protocol_version", 0);
    info_.model_id = hello.value("model_id", "");
    info_.tokenizer_id = hello.value("tokenizer_id", info_.model_id);
    if (info_.protocol_version != kProtocolVersion) {
      throw AdapterError("adapter speaks protocol_version " +
                         std::to_string(info_.protocol_version) + ", expected " +
                         std::to_string(kProtocolVersion));
    }
  } catch (...) {
    transport_->shutdown_send();
    reader_.join();
    throw;
  }
}

AdapterClient::~AdapterClient() {
  transport_->shutdown_send();
  if (reader_.joinable()) reader_.join();
}

std::future<Json> AdapterClient::submit(RequestKind kind, Json payload) {
  long long id = 0;
  std::future<Json> fut;
  {
    std::unique_lock lock(mu_);
    slot_cv_.wait(lock, [&] { return dead_ || pending_.size() < opts_.max_in_flight; });
    if (dead_) throw AdapterError("adapter session closed: " + dead_reason_);
    id = next_id_++;
    fut = pending_[id].get_future();
  }
  std::string line = jsonl::dump(make_request(id, kind, std::move(payload)));
  try {
    std::lock_guard lock(send_mu_);
    transport_->send(line);
  } catch (...) {
    std::lock_guard lock(mu_);
    auto it = pending_.find(id);
    if (it != pending_.end()) {
      it->second.set_exception(std::current_exception());
      pending_.erase(it);
      slot_cv_.notify_all();
    }
  }
  return fut;
}

void AdapterClient::reader_loop() {
  try {
    while (auto line = transport_->receive()) {
      if (line->empty()) continue;
      Json msg;
      try {
        msg = Json::parse(*line);
      } catch (const Json::parse_error&) {
        std::cerr << "adapter: discarding unparsable response line\n";
        continue;
      }
      if (!msg.is_object() || !msg.contains("req_id") || !msg["req_id"].is_number_integer()) {
        std::cerr << "adapter: discarding response without integer req_id\n";
        continue;
      }
      std::promise<Json> promise;
      {
        std::lock_guard lock(mu_);
        auto it = pending_.find(msg["req_id"].get<long long>());
        if (it == pending_.end()) {
          std::cerr << "adapter: response for unknown req_id " << msg["req_id"] << "\n";
          continue;
        }
        promise = std::move(it->second);
        pending_.erase(it);
        slot_cv_.notify_all();
      }
      if (msg.value("ok", false)) {
        promise.set_value(msg.value("result", Json::object()));
      } else {
        const Json err = msg.value("error", Json::object());
        std::string text = err.value("type", std::string("ModelError")) + ": " +
                           err.value("message", std::string("unspecified backend error"));
        promise.set_exception(std::make_exception_ptr(ModelError(text)));
      }
    }
    fail_all("adapter closed its output");
  } catch (const std::exception& e) {
    fail_all(e.what());
  }
}

void AdapterClient::fail_all(const std::string& why) {
  std::lock_guard lock(mu_);
  dead_ = true;
  dead_reason_ = why;
  for (auto& [id, promise] : pending_) {
    promise.set_exception(std::make_exception_ptr(AdapterError("request " + std::to_string(id) +
                                                               " failed: " + why)));
  }
  pending_.clear();
  slot_cv_.notify_all();
}

Json AdapterClient::score_payload(const std::string& prompt, const std::string& target,
                                  bool with_stats) {
  if (target.empty()) throw PreconditionError("score_target requires a non-empty target");
  return {{"prompt", prompt}, {"target", target}, {"with_stats", with_stats}};
}

ScoreTrace AdapterClient::parse_score(const Json& result) {
  ScoreTrace t = trace_from_json(result);
  if (t.size() == 0) throw AdapterError("adapter returned an empty trace for a non-empty target");
  return t;
}

GenerationResult AdapterClient::parse_generation(const Json& result, int max_new_tokens) {
  GenerationResult g = generation_from_json(result);
  if (g.token_count < 0 || g.token_count > max_new_tokens) {
    throw AdapterError("adapter generated " + std::to_string(g.token_count) +
                       " tokens, limit was " + std::to_string(max_new_tokens));
  }
  return g;
}

ScoreTrace AdapterClient::score_target(const std::string& prompt, const std::string& target,
                                       bool with_stats) {
  Json payload = score_payload(prompt, target, with_stats);
  ScoreTrace t = parse_score(call(with_stats ? RequestKind::token_stats : RequestKind::score_target,
                                  std::move(payload)));
  if (with_stats && !t.has_stats()) throw AdapterError("token_stats response lacks statistics");
  return t;
}

GenerationResult AdapterClient::generate_greedy(const std::string& prompt, int max_new_tokens) {
  if (max_new_tokens <= 0) throw PreconditionError("max_new_tokens must be positive");
  Json r = call(RequestKind::generate_greedy, {{"prompt", prompt}, {"max_new_tokens", max_new_tokens}});
  GenerationResult g = parse_generation(r, max_new_tokens);
  if (g.decoding != Decoding::greedy) throw AdapterError("greedy request answered with sampling");
  return g;
}

GenerationResult AdapterClient::generate_sample(const std::string& prompt, std::uint64_t seed,
                                                int max_new_tokens, int top_k) {
  if (max_new_tokens <= 0 || top_k <= 0) throw PreconditionError("max_new_tokens and top_k must be positive");
  Json r = call(RequestKind::generate_sample, {{"prompt", prompt},
                                               {"max_new_tokens", max_new_tokens},
                                               {"top_k", top_k},
                                               {"seed", seed}});
  return parse_generation(r, max_new_tokens);
}

Tokenization AdapterClient::tokenize_text(const std::string& text) {
  return tokenization_from_json(call(RequestKind::tokenize_text, {{"text", text}}));
}

std::vector<std::string> AdapterClient::infill_neighbors(const std::string& text, std::uint64_t seed,
                                                         int n, double mask_fraction, int max_span) {
  if (text.empty()) throw PreconditionError("infill_neighbors requires non-empty text");
  Json r = call(RequestKind::infill_neighbors, {{"text", text},
                                                {"n", n},
                                                {"mask_fraction", mask_fraction},
                                                {"max_span", max_span},
                                                {"seed", seed}});
  auto variants = r.value("variants", std::vector<std::string>{});
  if (static_cast<int>(variants.size()) != n) {
    throw AdapterError("infill_neighbors returned " + std::to_string(variants.size()) +
                       " variants, expected " + std::to_string(n));
  }
  return variants;
}

std::vector<std::string> AdapterClient::annotate_names(const std::string& text, const std::string& lang) {
  Json r = call(RequestKind::annotate_names, {{"text", text}, {"lang", lang}});
  return r.value("names", std::vector<std::string>{});
}

}  // namespace crm::adapter
