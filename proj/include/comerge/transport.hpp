// Copyright 2026 The CoMerge Authors
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

#ifndef COMERGE__TRANSPORT_HPP_
#define COMERGE__TRANSPORT_HPP_

#include <netdb.h>
#include <poll.h>
#include <signal.h>
#include <sys/socket.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>
#include <functional>
#include <memory>
#include <string>
#include <utility>

#include "comerge/error.hpp"

// Byte-stream transports for the external reasoner. One request document is
// written, the write side is closed, and the full reply is read until EOF.
namespace comerge::planning
{

class Transport
{
public:
  virtual ~Transport() = default;
  /// Throws Error(kTransport) on connection failure or timeout.
  virtual std::string exchange(const std::string & request, std::chrono::milliseconds timeout) = 0;
  virtual std::string describe() const = 0;
};

/// In-process transport, used by tests and fixtures.
class FunctionTransport : public Transport
{
public:
  explicit FunctionTransport(std::function<std::string(const std::string &)> fn)
  : fn_(std::move(fn)) {}

  std::string exchange(const std::string & request, std::chrono::milliseconds) override
  {
    return fn_(request);
  }
  std::string describe() const override {return "function";}

private:
  std::function<std::string(const std::string &)> fn_;
};

namespace detail
{
using Clock = std::chrono::steady_clock;

inline int remaining_ms(Clock::time_point deadline)
{
  const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now());
  return left.count() < 0 ? 0 : static_cast<int>(left.count());
}

inline void wait_fd(int fd, short events, Clock::time_point deadline, const std::string & who)
{
  for (;;) {
    pollfd p{fd, events, 0};
    const int rc = ::poll(&p, 1, remaining_ms(deadline));
    if (rc > 0) {
      return;
    }
    if (rc == 0) {
      throw Error(ErrorKind::kTransport, who + ": timed out");
    }
    if (errno != EINTR) {
      throw Error(ErrorKind::kTransport, who + ": poll failed: " + std::strerror(errno));
    }
  }
}

inline void write_all(int fd, const std::string & data, Clock::time_point deadline, const std::string & who, bool socket)
{
  std::size_t off = 0;
  while (off < data.size()) {
    wait_fd(fd, POLLOUT, deadline, who);
    const ssize_t n = socket ?
      ::send(fd, data.data() + off, data.size() - off, MSG_NOSIGNAL) :
      ::write(fd, data.data() + off, data.size() - off);
    if (n < 0) {
      if (errno == EINTR || errno == EAGAIN) {
        continue;
      }
      throw Error(ErrorKind::kTransport, who + ": write failed: " + std::strerror(errno));
    }
    off += static_cast<std::size_t>(n);
  }
}

inline std::string read_all(int fd, Clock::time_point deadline, const std::string & who)
{
  std::string out;
  char buf[4096];
  for (;;) {
    wait_fd(fd, POLLIN, deadline, who);
    const ssize_t n = ::read(fd, buf, sizeof(buf));
    if (n < 0) {
      if (errno == EINTR || errno == EAGAIN) {
        continue;
      }
      throw Error(ErrorKind::kTransport, who + ": read failed: " + std::strerror(errno));
    }
    if (n == 0) {
      return out;
    }
    out.append(buf, static_cast<std::size_t>(n));
  }
}

class Fd
{
public:
  explicit Fd(int fd = -1)
  : fd_(fd) {}
  Fd(const Fd &) = delete;
  Fd & operator=(const Fd &) = delete;
  ~Fd() {reset();}
  int get() const {return fd_;}
  void reset()
  {
    if (fd_ >= 0) {
      ::close(fd_);
    }
    fd_ = -1;
  }

private:
  int fd_;
};
}  // namespace detail

/// Runs `/bin/sh -c command` per request; the request goes to stdin, the
/// reply is the child's stdout.
class ProcessTransport : public Transport
{
public:
  explicit ProcessTransport(std::string command)
  : command_(std::move(command)) {}

  std::string exchange(const std::string & request, std::chrono::milliseconds timeout) override
  {
    const std::string who = "exec:" + command_;
    const auto deadline = detail::Clock::now() + timeout;
    int in_pipe[2];
    int out_pipe[2];
    if (::pipe(in_pipe) != 0) {
      throw Error(ErrorKind::kTransport, who + ": pipe failed");
    }
    if (::pipe(out_pipe) != 0) {
      ::close(in_pipe[0]);
      ::close(in_pipe[1]);
      throw Error(ErrorKind::kTransport, who + ": pipe failed");
    }
    const pid_t pid = ::fork();
    if (pid < 0) {
      for (int fd : {in_pipe[0], in_pipe[1], out_pipe[0], out_pipe[1]}) {
        ::close(fd);
      }
      throw Error(ErrorKind::kTransport, who + ": fork failed");
    }
    if (pid == 0) {
      ::dup2(in_pipe[0], STDIN_FILENO);
      ::dup2(out_pipe[1], STDOUT_FILENO);
      for (int fd : {in_pipe[0], in_pipe[1], out_pipe[0], out_pipe[1]}) {
        ::close(fd);
      }
      ::execl("/bin/sh", "sh", "-c", command_.c_str(), static_cast<char *>(nullptr));
      ::_exit(127);
    }
    ::close(in_pipe[0]);
    ::close(out_pipe[1]);
    detail::Fd to_child(in_pipe[1]);
    detail::Fd from_child(out_pipe[0]);
    std::string reply;
    try {
      // A child that exits without reading would raise SIGPIPE on write.
      struct sigaction ignore{};
      struct sigaction previous{};
      ignore.sa_handler = SIG_IGN;
      ::sigaction(SIGPIPE, &ignore, &previous);
      try {
        detail::write_all(to_child.get(), request, deadline, who, false);
      } catch (const Error &) {
        ::sigaction(SIGPIPE, &previous, nullptr);
        throw;
      }
      ::sigaction(SIGPIPE, &previous, nullptr);
      to_child.reset();
      reply = detail::read_all(from_child.get(), deadline, who);
    } catch (const Error &) {
      ::kill(pid, SIGKILL);
      ::waitpid(pid, nullptr, 0);
      throw;
    }
    int status = 0;
    ::waitpid(pid, &status, 0);
    if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) {
      throw Error(ErrorKind::kTransport, who + ": reasoner process exited abnormally");
    }
    return reply;
  }

  std::string describe() const override {return "exec:" + command_;}

private:
  std::string command_;
};

/// One TCP connection per request; the request is terminated by a write-side shutdown.
class TcpTransport : public Transport
{
public:
  TcpTransport(std::string host, int port)
  : host_(std::move(host)), port_(port) {}

  std::string exchange(const std::string & request, std::chrono::milliseconds timeout) override
  {
    const std::string who = describe();
    const auto deadline = detail::Clock::now() + timeout;
    addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo * res = nullptr;
    if (::getaddrinfo(host_.c_str(), std::to_string(port_).c_str(), &hints, &res) != 0 || !res) {
      throw Error(ErrorKind::kTransport, who + ": cannot resolve host");
    }
    std::unique_ptr<addrinfo, decltype(&::freeaddrinfo)> guard(res, &::freeaddrinfo);
    int connected = -1;
    for (addrinfo * ai = res; ai && connected < 0; ai = ai->ai_next) {
      const int fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
      if (fd < 0) {
        continue;
      }
      if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) {
        connected = fd;
      } else {
        ::close(fd);
      }
    }
    detail::Fd sock(connected);
    if (sock.get() < 0) {
      throw Error(ErrorKind::kTransport, who + ": connection refused");
    }
    detail::write_all(sock.get(), request, deadline, who, true);
    ::shutdown(sock.get(), SHUT_WR);
    return detail::read_all(sock.get(), deadline, who);
  }

  std::string describe() const override {return "tcp://" + host_ + ":" + std::to_string(port_);}

private:
  std::string host_;
  int port_;
};

/// Parses "tcp://host:port" or "exec:command". Throws kConfig when malformed.
inline std::unique_ptr<Transport> make_transport(const std::string & endpoint)
{
  const std::string tcp = "tcp://";
  const std::string exec = "exec:";
  if (endpoint.rfind(tcp, 0) == 0) {
    const std::string rest = endpoint.substr(tcp.size());
    const auto colon = rest.rfind(':');
    if (colon == std::string::npos || colon == 0 || colon + 1 == rest.size()) {
      throw Error(ErrorKind::kConfig, "endpoint: expected tcp://host:port, got " + endpoint);
    }
    const std::string port_text = rest.substr(colon + 1);
    int port = 0;
    for (char c : port_text) {
      if (c < '0' || c > '9' || port > 65535) {
        throw Error(ErrorKind::kConfig, "endpoint: bad port in " + endpoint);
      }
      port = port * 10 + (c - '0');
    }
    if (port < 1 || port > 65535) {
      throw Error(ErrorKind::kConfig, "endpoint: port out of range in " + endpoint);
    }
    return std::make_unique<TcpTransport>(rest.substr(0, colon), port);
  }
  if (endpoint.rfind(exec, 0) == 0 && endpoint.size() > exec.size()) {
    return std::make_unique<ProcessTransport>(endpoint.substr(exec.size()));
  }
  throw Error(ErrorKind::kConfig, "endpoint: expected tcp://host:port or exec:command, got " + endpoint);
}

}  // namespace comerge::planning

#endif  // COMERGE__TRANSPORT_HPP_
