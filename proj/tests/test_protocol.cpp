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

#include <gtest/gtest.h>

#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <thread>

#include "crm/adapter_client.hpp"
#include "crm/error.hpp"
#include "crm/jsonl.hpp"
#include "crm/mock_model.hpp"
#include "crm/protocol.hpp"
#include "crm/transport.hpp"
#include "test_util.hpp"

using namespace crm;
using namespace crm::adapter;

namespace {

std::shared_ptr<const mock::MockModel> uniform_model() {
  return std::make_shared<const mock::MockModel>(mock::MockModel::uniform({"x", "-", "y", "z"}));
}

std::unique_ptr<Transport> loopback(size_t window = 1) {
  auto server = std::make_shared<mock::MockAdapterServer>(uniform_model());
  return std::make_unique<LoopbackTransport>([server](const std::string& l) { return server->handle_line(l); },
                                             window);
}

void check_uniform_session(AdapterClient& client, size_t n) {
  std::vector<std::future<Json>> futs;
  std::vector<std::string> targets;
  for (size_t i = 0; i < n; ++i) {
    std::string t = "x";
    for (size_t k = 0; k < i % 4; ++k) t += "-y";
    targets.push_back(t);
    futs.push_back(client.submit(RequestKind::score_target, AdapterClient::score_payload("z", t, false)));
  }
  for (size_t i = 0; i < n; ++i) {
    ScoreTrace tr = AdapterClient::parse_score(futs[i].get());
    ASSERT_EQ(tr.size(), 1 + 2 * (i % 4)) << i;
    for (double lp : tr.logprobs) EXPECT_NEAR(lp, std::log(0.25), 1e-12);
  }
}

}  // namespace

TEST(Trace, ValidationRejectsBoundaryViolations) {
  ScoreTrace ok{{"a", "b"}, {-0.5, 0.0}, std::nullopt, std::nullopt};
  EXPECT_NO_THROW(validate(ok));
  auto bad = ok;
  bad.logprobs.push_back(-1.0);
  EXPECT_THROW(validate(bad), AdapterError);
  bad = ok;
  bad.logprobs[0] = 0.1;
  EXPECT_THROW(validate(bad), AdapterError);
  bad = ok;
  bad.logprobs[0] = -INFINITY;
  EXPECT_THROW(validate(bad), AdapterError);
  bad = ok;
  bad.vocab_mu = std::vector<double>{-1, -1};
  EXPECT_THROW(validate(bad), AdapterError);
  bad.vocab_sigma = std::vector<double>{1.0, 0.0};
  EXPECT_THROW(validate(bad), AdapterError);
  bad.vocab_sigma = std::vector<double>{1.0};
  EXPECT_THROW(validate(bad), AdapterError);
  bad.vocab_sigma = std::vector<double>{1.0, 2.0};
  EXPECT_NO_THROW(validate(bad));
  EXPECT_THROW(trace_from_json(Json::parse(R"({"target_tokens":["a"],"logprobs":["x"]})")), AdapterError);
  EXPECT_THROW(trace_from_json(Json::parse(R"({"target_tokens":["a"]})")), AdapterError);
}

TEST(Trace, JsonRoundTrip) {
  ScoreTrace t{{"a", " b"}, {-0.25, -3.0}, std::vector<double>{-2.0, -1.5}, std::vector<double>{0.5, 1.0}};
  ScoreTrace back = trace_from_json(to_json(t));
  EXPECT_EQ(back.target_tokens, t.target_tokens);
  EXPECT_EQ(back.logprobs, t.logprobs);
  EXPECT_EQ(back.vocab_mu, t.vocab_mu);
  EXPECT_EQ(back.vocab_sigma, t.vocab_sigma);
  Tokenization tok{{"ab", 0, 2}, {" c", 2, 4}};
  auto tb = tokenization_from_json(to_json(tok));
  ASSERT_EQ(tb.size(), 2u);
  EXPECT_EQ(tb[1].text, " c");
  EXPECT_EQ(tb[1].end, 4u);
}

TEST(Messages, Shapes) {
  auto r = make_request(7, RequestKind::token_stats, {{"prompt", "p"}});
  EXPECT_EQ(r["req_id"], 7);
  EXPECT_EQ(r["kind"], "token_stats");
  auto e = make_error(7, "ModelError", "boom");
  EXPECT_EQ(e["ok"], false);
  EXPECT_EQ(e["error"]["type"], "ModelError");
  EXPECT_EQ(make_ok(7, {{"a", 1}})["result"]["a"], 1);
  EXPECT_THROW(request_kind_from_string("fly"), AdapterError);
  for (auto k : {RequestKind::hello, RequestKind::infill_neighbors, RequestKind::annotate_names}) {
    EXPECT_EQ(request_kind_from_string(to_string(k)), k);
  }
}

TEST(Client, HandshakeReportsModel) {
  AdapterClient c(loopback());
  EXPECT_EQ(c.info().protocol_version, kProtocolVersion);
  EXPECT_EQ(c.info().model_id, "mock-uniform");
  EXPECT_EQ(c.info().tokenizer_id, mock::kTokenizerId);
}

TEST(Client, DemultiplexesOutOfOrderResponses) {
  AdapterClient c(loopback(4), {8});
  check_uniform_session(c, 8);
}

TEST(Client, ModelErrorIsPerRequest) {
  AdapterClient c(loopback());
  EXPECT_THROW(c.score_target("z", "q"), ModelError);  // outside the vocabulary
  EXPECT_EQ(c.score_target("z", "x").size(), 1u);
  EXPECT_THROW(c.score_target("z", ""), PreconditionError);
}

TEST(Client, VersionMismatchFailsHandshake) {
  auto t = std::make_unique<LoopbackTransport>([](const std::string& line) {
    auto req = Json::parse(line);
    return jsonl::dump(make_ok(req["req_id"], {{"protocol_version", 2}, {"model_id", "future"}}));
  });
  EXPECT_THROW(AdapterClient c(std::move(t)), AdapterError);
}

TEST(Client, ClosedAdapterFailsPendingRequests) {
  EXPECT_THROW(AdapterClient c(std::make_unique<ProcessTransport>("exit 0")), AdapterError);
  EXPECT_THROW(AdapterClient c(std::make_unique<ProcessTransport>("read line; exit 0")), AdapterError);
}

TEST(Client, IgnoresGarbageAndUnknownIds) {
  const std::string script =
      "read l; echo 'not json'; echo '{\"req_id\": 999, \"ok\": true}'; "
      "echo '{\"req_id\": 1, \"ok\": true, \"result\": {\"protocol_version\": 1, \"model_id\": \"sh\"}}'; "
      "cat > /dev/null";
  AdapterClient c(std::make_unique<ProcessTransport>(script));
  EXPECT_EQ(c.info().model_id, "sh");
  EXPECT_EQ(c.info().tokenizer_id, "sh");
}

TEST(ProcessTransport, MockAdapterBinaryWithReordering) {
  std::string cmd = std::string(CRM_MOCK_ADAPTER) + " --uniform-vocab x,-,y,z --reorder 3";
  AdapterClient c(open_transport(cmd), {6});
  EXPECT_EQ(c.info().model_id, "mock-uniform");
  check_uniform_session(c, 20);
  auto tok = c.tokenize_text("x-y");
  EXPECT_EQ(tok.size(), 3u);
}

TEST(UnixSocketTransport, MockAdapterServesSocket) {
  crm::testing::TempDir dir;
  const std::string sock = (dir.path() / "a.sock").string();
  pid_t pid = ::fork();
  ASSERT_GE(pid, 0);
  if (pid == 0) {
    ::execl(CRM_MOCK_ADAPTER, CRM_MOCK_ADAPTER, "--uniform-vocab", "x,-,y,z", "--socket", sock.c_str(),
            static_cast<char*>(nullptr));
    ::_exit(127);
  }
  for (int i = 0; i < 200 && !std::filesystem::exists(sock); ++i) {
    std::this_thread::sleep_for(std::chrono::milliseconds(10));
  }
  {
    AdapterClient c(open_transport("unix:" + sock));
    check_uniform_session(c, 10);
  }
  ::kill(pid, SIGTERM);
  ::waitpid(pid, nullptr, 0);
  EXPECT_THROW(UnixSocketTransport("/nonexistent/dir/s.sock"), AdapterError);
}

TEST(Transport, EmptyEndpointRejected) { EXPECT_THROW(open_transport(""), ConfigError); }
