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

#include "crm/transport.hpp"

#include <algorithm>
#include <cerrno>
#include <csignal>
#include <cstring>

#include <sys/socket.h>
#include <sys/un.h>
#include <sys/wait.h>
#include <unistd.h>

#include "crm/error.hpp"

namespace crm::adapter {
namespace {

void ignore_sigpipe() {
  static const bool done = [] {
    std::signal(SIGPIPE, SIG_IGN);
    return true;
  }();
  (void)done;
}

}  // namespace

std::optional<std::string> FdLineReader::next() {
  while (true) {
    auto nl = buf_.find('\n');
    if (nl != std::string::npos) {
      std::string line = buf_.substr(0, nl);
      buf_.erase(0, nl + 1);
      return line;
    }
    if (eof_) {
      if (buf_.empty()) return std::nullopt;
      std::string line = std::move(buf_);
      buf_.clear();
      return line;
    }
    char chunk[65536];
    ssize_t n = ::read(fd_, chunk, sizeof chunk);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw AdapterError(std::string("adapter read failed: ") + std::strerror(errno));
    }
    if (n == 0) {
      eof_ = true;
    } else {
      buf_.append(chunk, static_cast<size_t>(n));
    }
  }
}

void write_all(int fd, const std::string& data) {
  size_t off = 0;
  while (off < data.size()) {
    ssize_t n = ::write(fd, data.data() + off, data.size() - off);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw AdapterError(std::string("adapter write failed: ") + std::strerror(errno));
    }
    off += static_cast<size_t>(n);
  }
}

ProcessTransport::ProcessTransport(const std::string& command) {
  ignore_sigpipe();
  int in_pipe[2];
  int out_pipe[2];
  if (::pipe(in_pipe) != 0 || ::pipe(out_pipe) != 0) {
    throw AdapterError(std::string("pipe failed: ") + std::strerror(errno));
  }
  pid_ = ::fork();
  if (pid_ < 0) throw AdapterError(std::string("fork failed: ") + std::strerror(errno));
  if (pid_ == 0) {
    ::dup2(in_pipe[0], STDIN_FILENO);
    ::dup2(out_pipe[1], STDOUT_FILENO);
    ::close(in_pipe[0]);
    ::close(in_pipe[1]);
    ::close(out_pipe[0]);
    ::close(out_pipe[1]);
    ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
    ::_exit(127);
  }
  ::close(in_pipe[0]);
  ::close(out_pipe[1]);
  to_child_ = in_pipe[1];
  from_child_ = out_pipe[0];
  reader_ = std::make_unique<FdLineReader>(from_child_);
}

ProcessTransport::~ProcessTransport() {
  shutdown_send();
  if (from_child_ >= 0) ::close(from_child_);
  if (pid_ > 0) {
    int status = 0;
    ::waitpid(pid_, &status, 0);
  }
}

void ProcessTransport::send(const std::string& line) {
  if (to_child_ < 0) throw AdapterError("adapter input already closed");
  write_all(to_child_, line + "\n");
}

std::optional<std::string> ProcessTransport::receive() { return reader_->next(); }

void ProcessTransport::shutdown_send() {
  if (to_child_ >= 0) {
    ::close(to_child_);
    to_child_ = -1;
  }
}

UnixSocketTransport::UnixSocketTransport(const std::string& path) {
  ignore_sigpipe();
  sockaddr_un addr{};
  addr.sun_family = AF_UNIX;
  if (path.size() >= sizeof(addr.sun_path)) throw AdapterError("socket path too long: " + path);
  std::memcpy(addr.sun_path, path.c_str(), path.size() + 1);
  fd_ = ::socket(AF_UNIX, SOCK_STREAM, 0);
  if (fd_ < 0) throw AdapterError(std::string("socket failed: ") + std::strerror(errno));
  if (::connect(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) {
    int err = errno;
    ::close(fd_);
    throw AdapterError("cannot connect to " + path + ": " + std::strerror(err));
  }
  reader_ = std::make_unique<FdLineReader>(fd_);
}

UnixSocketTransport::~UnixSocketTransport() {
  if (fd_ >= 0) ::close(fd_);
}

void UnixSocketTransport::send(const std::string& line) { write_all(fd_, line + "\n"); }

std::optional<std::string> UnixSocketTransport::receive() { return reader_->next(); }

void UnixSocketTransport::shutdown_send() {
  if (fd_ >= 0) ::shutdown(fd_, SHUT_WR);
}

LoopbackTransport::LoopbackTransport(Handler handler, size_t reorder_window)
    : handler_(std::move(handler)), window_(std::max<size_t>(1, reorder_window)) {}

void LoopbackTransport::send(const std::string& line) {
  std::string response = handler_(line);
  std::lock_guard lock(mu_);
  if (!greeted_) {
    greeted_ = true;
    ready_.push_back(std::move(response));
    cv_.notify_all();
    return;
  }
  held_.push_back(std::move(response));
  if (held_.size() >= window_) {
    for (auto it = held_.rbegin(); it != held_.rend(); ++it) ready_.push_back(std::move(*it));
    held_.clear();
    cv_.notify_all();
  }
}

std::optional<std::string> LoopbackTransport::receive() {
  std::unique_lock lock(mu_);
  cv_.wait(lock, [&] { return !ready_.empty() || closed_; });
  if (!ready_.empty()) {
    std::string line = std::move(ready_.front());
    ready_.pop_front();
    return line;
  }
  return std::nullopt;
}

void LoopbackTransport::shutdown_send() {
  std::lock_guard lock(mu_);
  for (auto it = held_.rbegin(); it != held_.rend(); ++it) ready_.push_back(std::move(*it));
  held_.clear();
  closed_ = true;
  cv_.notify_all();
}

std::unique_ptr<Transport> open_transport(const std::string& endpoint) {
  if (endpoint.rfind("unix:", 0) == 0) {
    return std::make_unique<UnixSocketTransport>(endpoint.substr(5));
  }
  if (endpoint.empty()) throw ConfigError("adapter endpoint is empty");
  return std::make_unique<ProcessTransport>(endpoint);
}

}  // namespace crm::adapter
