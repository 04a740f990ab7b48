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

// crm-mock-adapter: deterministic n-gram backend speaking the adapter
// protocol on stdin/stdout, or on a unix socket with --socket.

#include <CLI11.hpp>

#include <poll.h>
#include <sys/socket.h>
#include <sys/un.h>
#include <unistd.h>

#include <algorithm>
#include <csignal>
#include <cstring>
#include <iostream>
#include <memory>
#include <sstream>

#include "crm/error.hpp"
#include "crm/mock_model.hpp"
#include "crm/transport.hpp"

namespace {

using crm::mock::MockAdapterServer;

// Answers one stream of requests. With reorder > 1 responses are held and
// released in reverse batches, to exercise out-of-order clients. A batch
// is also released once input goes idle.
void serve(int in_fd, int out_fd, const MockAdapterServer& server, size_t reorder) {
  crm::adapter::FdLineReader reader(in_fd);
  std::vector<std::string> held;
  auto flush = [&] {
    std::reverse(held.begin(), held.end());
    for (const auto& r : held) crm::adapter::write_all(out_fd, r + "\n");
    held.clear();
  };
  auto idle = [&] {
    if (reader.line_ready()) return false;
    pollfd p{in_fd, POLLIN, 0};
    return ::poll(&p, 1, 20) == 0;
  };
  for (;;) {
    // Never sit on held responses while the client waits for them.
    if (!held.empty() && idle()) flush();
    auto line = reader.next();
    if (!line) break;
    if (line->empty()) continue;
    std::string resp = server.handle_line(*line);
    if (reorder <= 1 || line->find("\"hello\"") != std::string::npos) {
      flush();
      crm::adapter::write_all(out_fd, resp + "\n");
      continue;
    }
    held.push_back(std::move(resp));
    if (held.size() >= reorder) flush();
  }
  flush();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mock model adapter"};
  std::vector<std::string> corpora;
  std::string model_id;
  std::string uniform_vocab;
  std::string socket_path;
  bool no_copy = false;
  size_t reorder = 1;
  app.add_option("--corpus", corpora, "Training corpus (line-delimited {id, lang, text}); repeatable");
  app.add_option("--model-id", model_id, "Model id reported in the handshake (default mock-ngram, or mock-uniform)");
  app.add_option("--uniform-vocab", uniform_vocab, "Comma-separated vocabulary of a uniform model");
  app.add_flag("--no-copy-rule", no_copy, "Disable name-driven email completion");
  app.add_option("--reorder", reorder, "Release responses in reversed batches of this size");
  app.add_option("--socket", socket_path, "Serve on a unix socket instead of stdin/stdout");
  CLI11_PARSE(app, argc, argv);

  std::signal(SIGPIPE, SIG_IGN);
  std::shared_ptr<const crm::mock::MockModel> model;
  try {
    if (!uniform_vocab.empty()) {
      std::vector<std::string> vocab;
      std::stringstream ss(uniform_vocab);
      for (std::string tok; std::getline(ss, tok, ',');) vocab.push_back(tok);
      model = std::make_shared<const crm::mock::MockModel>(crm::mock::MockModel::uniform(vocab, model_id.empty() ? "mock-uniform" : model_id));
    } else {
      crm::mock::MockModelConfig cfg;
      if (!model_id.empty()) cfg.model_id = model_id;
      cfg.copy_rule = !no_copy;
      model = std::make_shared<const crm::mock::MockModel>(crm::mock::load_training_texts(corpora), cfg);
    }
  } catch (const std::exception& e) {
    std::cerr << "crm-mock-adapter: " << e.what() << "\n";
    return 2;
  }
  MockAdapterServer server(model);

  if (socket_path.empty()) {
    serve(STDIN_FILENO, STDOUT_FILENO, server, reorder);
    return 0;
  }
  const int fd = ::socket(AF_UNIX, SOCK_STREAM, 0);
  sockaddr_un addr{};
  addr.sun_family = AF_UNIX;
  if (fd < 0 || socket_path.size() >= sizeof(addr.sun_path)) {
    std::cerr << "crm-mock-adapter: cannot create socket\n";
    return 2;
  }
  std::strncpy(addr.sun_path, socket_path.c_str(), sizeof(addr.sun_path) - 1);
  ::unlink(socket_path.c_str());
  if (::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0 || ::listen(fd, 4) != 0) {
    std::cerr << "crm-mock-adapter: cannot listen on " << socket_path << "\n";
    return 2;
  }
  for (;;) {
    const int conn = ::accept(fd, nullptr, nullptr);
    if (conn < 0) continue;
    try {
      serve(conn, conn, server, reorder);
    } catch (const std::exception& e) {
      std::cerr << "crm-mock-adapter: " << e.what() << "\n";
    }
    ::close(conn);
  }
}
