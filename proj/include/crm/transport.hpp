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
#include <deque>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <sys/types.h>

namespace crm::adapter {

// A bidirectional line channel. send() may be called from several threads
// (the client serializes it); receive() is only called by one reader.
class Transport {
 public:
  virtual ~Transport() = default;
  virtual void send(const std::string& line) = 0;
  // Blocks for the next line; nullopt on end of stream.
  virtual std::optional<std::string> receive() = 0;
  // Signals end of requests; the peer is expected to drain and close.
  virtual void shutdown_send() = 0;
};

// Buffered newline splitting over a file descriptor.
class FdLineReader {
 public:
  explicit FdLineReader(int fd) : fd_(fd) {}
  std::optional<std::string> next();
  // A complete line is already buffered, so next() will not block.
  bool line_ready() const { return buf_.find('\n') != std::string::npos || eof_; }

 private:
  int fd_;
  std::string buf_;
  bool eof_ = false;
};

void write_all(int fd, const std::string& data);

// Spawns `/bin/sh -c <command>` and talks over its stdin/stdout. The
// child's stderr is inherited.
class ProcessTransport : public Transport {
 public:
  explicit ProcessTransport(const std::string& command);
  ~ProcessTransport() override;
  void send(const std::string& line) override;
  std::optional<std::string> receive() override;
  void shutdown_send() override;

 private:
  pid_t pid_ = -1;
  int to_child_ = -1;
  int from_child_ = -1;
  std::unique_ptr<FdLineReader> reader_;
};

// Connects to an adapter listening on a local (AF_UNIX) socket.
class UnixSocketTransport : public Transport {
 public:
  explicit UnixSocketTransport(const std::string& path);
  ~UnixSocketTransport() override;
  void send(const std::string& line) override;
  std::optional<std::string> receive() override;
  void shutdown_send() override;

 private:
  int fd_ = -1;
  std::unique_ptr<FdLineReader> reader_;
};

// In-process transport: each request line is answered by `handler`.
// With reorder_window > 1, responses are held back and released in reverse
// order once the window fills, which exercises req_id demultiplexing. The
// first response (the handshake) is never held.
class LoopbackTransport : public Transport {
 public:
  using Handler = std::function<std::string(const std::string&)>;
  explicit LoopbackTransport(Handler handler, size_t reorder_window = 1);
  void send(const std::string& line) override;
  std::optional<std::string> receive() override;
  void shutdown_send() override;

 private:
  Handler handler_;
  size_t window_;
  std::mutex mu_;
  std::condition_variable cv_;
  std::vector<std::string> held_;
  std::deque<std::string> ready_;
  bool closed_ = false;
  bool greeted_ = false;
};

// Builds a transport from an endpoint string: "unix:<path>" connects to a
// socket, anything else is a shell command.
std::unique_ptr<Transport> open_transport(const std::string& endpoint);

}  // namespace crm::adapter
