#pragma once

#include <cerrno>
#include <cstdlib>
#include <cstring>
#include <memory>
#include <mutex>
#include <span>
#include <sstream>
#include <string>

#include <signal.h>
#include <sys/socket.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include "monofix/oracle.hpp"

namespace monofix {

class ProtocolError : public OracleError {
 public:
  using OracleError::OracleError;
};

struct SubprocessOptions {
  // Clamp out-of-range answers to [0,1] (with a recorded warning) instead of
  // failing.
  bool clamp = false;
};

namespace detail {

// A child process running `/bin/sh -c command` whose stdin and stdout are one
// end of a socket pair. stderr is inherited. Exchanges are serialized.
class LineProcess {
 public:
  explicit LineProcess(const std::string& command) {
    int fds[2];
    if (::socketpair(AF_UNIX, SOCK_STREAM, 0, fds) != 0)
      throw ProtocolError(std::string("socketpair: ") + std::strerror(errno));
    pid_ = ::fork();
    if (pid_ < 0) {
      ::close(fds[0]);
      ::close(fds[1]);
      throw ProtocolError(std::string("fork: ") + std::strerror(errno));
    }
    if (pid_ == 0) {
      ::close(fds[0]);
      ::dup2(fds[1], STDIN_FILENO);
      ::dup2(fds[1], STDOUT_FILENO);
      if (fds[1] != STDIN_FILENO && fds[1] != STDOUT_FILENO) ::close(fds[1]);
      ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
      ::_exit(127);
    }
    ::close(fds[1]);
    fd_ = fds[0];
  }

  LineProcess(const LineProcess&) = delete;
  LineProcess& operator=(const LineProcess&) = delete;

  ~LineProcess() {
    if (fd_ >= 0) ::close(fd_);
    if (pid_ > 0) {
      int status = 0;
      // Closing our end delivers EOF; a well-behaved child exits on its own.
      for (int i = 0; i < 50; ++i) {
        if (::waitpid(pid_, &status, WNOHANG) == pid_) return;
        ::usleep(2000);
      }
      ::kill(pid_, SIGTERM);
      ::waitpid(pid_, &status, 0);
    }
  }

  std::string exchange(const std::string& request) {
    std::lock_guard lock(mutex_);
    if (dead_) throw ProtocolError("oracle process has exited");
    std::size_t off = 0;
    while (off < request.size()) {
      auto n = ::send(fd_, request.data() + off, request.size() - off, MSG_NOSIGNAL);
      if (n < 0) {
        if (errno == EINTR) continue;
        dead_ = true;
        throw ProtocolError(std::string("oracle process closed its input: ") + std::strerror(errno));
      }
      off += static_cast<std::size_t>(n);
    }
    std::string line;
    while (true) {
      auto pos = buffer_.find('\n');
      if (pos != std::string::npos) {
        line = buffer_.substr(0, pos);
        buffer_.erase(0, pos + 1);
        break;
      }
      char chunk[4096];
      auto n = ::recv(fd_, chunk, sizeof chunk, 0);
      if (n < 0 && errno == EINTR) continue;
      if (n <= 0) {
        dead_ = true;
        throw ProtocolError("oracle process exited before answering");
      }
      buffer_.append(chunk, static_cast<std::size_t>(n));
    }
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return line;
  }

 private:
  pid_t pid_ = -1;
  int fd_ = -1;
  bool dead_ = false;
  std::string buffer_;
  std::mutex mutex_;
};

inline std::string format_request(std::span<const double> x) {
  std::ostringstream os;
  os.precision(17);
  for (std::size_t i = 0; i < x.size(); ++i) os << (i ? " " : "") << x[i];
  os << '\n';
  return os.str();
}

inline double parse_response(const std::string& line) {
  const char* begin = line.c_str();
  while (*begin == ' ' || *begin == '\t') ++begin;
  char* end = nullptr;
  errno = 0;
  double v = std::strtod(begin, &end);
  if (end == begin || errno == ERANGE) throw ProtocolError("malformed oracle response '" + line + "'");
  while (*end == ' ' || *end == '\t') ++end;
  if (*end != '\0') throw ProtocolError("malformed oracle response '" + line + "'");
  return v;
}

}  // namespace detail

// External black box speaking a line protocol: one request line of d
// space-separated decimals per query, one decimal answer line in [0,1] back.
inline QueryOracle make_subprocess_oracle(const std::string& command, int dimension,
                                          SubprocessOptions options = {}) {
  if (dimension < 1) throw DimensionError("oracle dimension must be >= 1");
  auto proc = std::make_shared<detail::LineProcess>(command);
  return QueryOracle(
      static_cast<std::size_t>(dimension),
      [proc](std::span<const double> x) {
        return detail::parse_response(proc->exchange(detail::format_request(x)));
      },
      options.clamp ? RangePolicy::clamp : RangePolicy::reject);
}

}  // namespace monofix
