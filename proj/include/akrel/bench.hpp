#pragma once

#include <poll.h>
#include <signal.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <atomic>
#include <cerrno>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <memory>
#include <numbers>
#include <string>
#include <vector>

#include <json.hpp>

#include "akrel/error.hpp"
#include "akrel/rv_model.hpp"

namespace akrel {

/// Modified Rastrigin limit state on two inputs.
template <class Point>
double rastrigin(const Point& x) {
  if (x.size() != 2) throw InvalidArgument("rastrigin: expects 2 inputs");
  double s = 0.0;
  for (int i = 0; i < 2; ++i) s += x[i] * x[i] - 5.0 * std::cos(2.0 * std::numbers::pi * x[i]);
  return 10.0 - s;
}

template <class Point>
double linear_gaussian(const Point& x, double beta) {
  if (x.size() != 1) throw InvalidArgument("linear_gaussian: expects 1 input");
  return beta - x[0];
}

/// Child process answering one JSON batch per line on its standard streams.
class ExternalProcess {
 public:
  ExternalProcess(std::string command, double timeout_s) : cmd_(std::move(command)), timeout_s_(timeout_s) {
    int in[2], out[2];
    if (pipe(in) != 0 || pipe(out) != 0) throw ExternalEvaluatorFailure("pipe: " + std::string(std::strerror(errno)));
    pid_ = fork();
    if (pid_ < 0) throw ExternalEvaluatorFailure("fork: " + std::string(std::strerror(errno)));
    if (pid_ == 0) {
      dup2(in[0], STDIN_FILENO);
      dup2(out[1], STDOUT_FILENO);
      close(in[0]);
      close(in[1]);
      close(out[0]);
      close(out[1]);
      execl("/bin/sh", "sh", "-c", cmd_.c_str(), static_cast<char*>(nullptr));
      _exit(127);
    }
    close(in[0]);
    close(out[1]);
    to_child_ = in[1];
    from_child_ = out[0];
    signal(SIGPIPE, SIG_IGN);
  }

  ExternalProcess(const ExternalProcess&) = delete;
  ExternalProcess& operator=(const ExternalProcess&) = delete;

  ~ExternalProcess() {
    try {
      close_child();
    } catch (...) {
    }
  }

  std::vector<double> request(const RowMatrix& pts) {
    if (pid_ <= 0) throw ExternalEvaluatorFailure("external evaluator already closed");
    nlohmann::json req = nlohmann::json::array();
    for (Eigen::Index i = 0; i < pts.rows(); ++i) {
      nlohmann::json row = nlohmann::json::array();
      for (Eigen::Index j = 0; j < pts.cols(); ++j) row.push_back(pts(i, j));
      req.push_back(std::move(row));
    }
    const std::string line = req.dump() + "\n";
    std::size_t off = 0;
    while (off < line.size()) {
      const ssize_t w = write(to_child_, line.data() + off, line.size() - off);
      if (w < 0) {
        if (errno == EINTR) continue;
        fail("write to evaluator failed: " + std::string(std::strerror(errno)));
      }
      off += static_cast<std::size_t>(w);
    }
    const std::string reply = read_line();
    nlohmann::json js;
    try {
      js = nlohmann::json::parse(reply);
    } catch (const nlohmann::json::exception& e) {
      fail("malformed evaluator reply: " + std::string(e.what()));
    }
    if (!js.is_array() || js.size() != static_cast<std::size_t>(pts.rows()))
      fail("evaluator reply must be an array of " + std::to_string(pts.rows()) + " numbers");
    std::vector<double> out;
    for (const auto& v : js) {
      if (!v.is_number()) fail("evaluator reply contains a non-number");
      out.push_back(v.get<double>());
    }
    return out;
  }

  /// Closes the pipes and reaps the child; a nonzero exit is an error.
  void close_child() {
    if (pid_ <= 0) return;
    ::close(to_child_);
    ::close(from_child_);
    int status = 0;
    waitpid(pid_, &status, 0);
    pid_ = -1;
    if (!WIFEXITED(status) || WEXITSTATUS(status) != 0)
      throw ExternalEvaluatorFailure("evaluator '" + cmd_ + "' exited with status " +
                                     std::to_string(WIFEXITED(status) ? WEXITSTATUS(status) : -1));
  }

 private:
  [[noreturn]] void fail(const std::string& msg) {
    if (pid_ > 0) {
      kill(pid_, SIGKILL);
      ::close(to_child_);
      ::close(from_child_);
      waitpid(pid_, nullptr, 0);
      pid_ = -1;
    }
    throw ExternalEvaluatorFailure(msg);
  }

  std::string read_line() {
    const auto deadline = std::chrono::steady_clock::now() + std::chrono::duration<double>(timeout_s_);
    for (;;) {
      const auto nl = buf_.find('\n');
      if (nl != std::string::npos) {
        std::string line = buf_.substr(0, nl);
        buf_.erase(0, nl + 1);
        return line;
      }
      const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
      if (left.count() <= 0) fail("evaluator timed out");
      pollfd pfd{from_child_, POLLIN, 0};
      const int r = poll(&pfd, 1, static_cast<int>(std::min<long long>(left.count(), 1 << 30)));
      if (r < 0 && errno == EINTR) continue;
      if (r <= 0) continue;
      char chunk[4096];
      const ssize_t n = read(from_child_, chunk, sizeof chunk);
      if (n < 0 && errno == EINTR) continue;
      if (n <= 0) {
        int status = 0;
        waitpid(pid_, &status, 0);
        pid_ = -1;
        ::close(to_child_);
        ::close(from_child_);
        throw ExternalEvaluatorFailure("evaluator exited before replying (status " +
                                       std::to_string(WIFEXITED(status) ? WEXITSTATUS(status) : -1) + ")");
      }
      buf_.append(chunk, static_cast<std::size_t>(n));
    }
  }

  std::string cmd_;
  double timeout_s_;
  pid_t pid_ = -1;
  int to_child_ = -1;
  int from_child_ = -1;
  std::string buf_;
};

/// A performance function with a count of real evaluations.
class LimitState {
 public:
  enum class Kind { rastrigin, linear_gaussian, external };

  static LimitState make_rastrigin() { return LimitState(Kind::rastrigin, 2); }
  static LimitState make_linear_gaussian(double beta) {
    LimitState ls(Kind::linear_gaussian, 1);
    ls.beta_ = beta;
    return ls;
  }
  static LimitState make_external(std::string command, std::size_t dim, double timeout_s = 300.0) {
    if (dim < 1) throw InvalidArgument("external limit state needs dimension >= 1");
    LimitState ls(Kind::external, dim);
    ls.command_ = std::move(command);
    ls.timeout_s_ = timeout_s;
    return ls;
  }

  Kind kind() const { return kind_; }
  std::size_t dim() const { return dim_; }
  double beta() const { return beta_; }
  const std::string& command() const { return command_; }
  std::size_t calls() const { return calls_; }

  /// Built-in response without touching the counter (used for reference
  /// estimates, never for the learning loop).
  template <class Point>
  double exact(const Point& x) const {
    switch (kind_) {
      case Kind::rastrigin: return rastrigin(x);
      case Kind::linear_gaussian: return linear_gaussian(x, beta_);
      case Kind::external: break;
    }
    throw InvalidArgument("external limit states have no built-in response");
  }

  std::vector<double> evaluate(const RowMatrix& pts) {
    if (pts.rows() == 0) throw InvalidArgument("evaluate: empty batch");
    if (static_cast<std::size_t>(pts.cols()) != dim_) throw InvalidArgument("evaluate: dimension mismatch");
    std::vector<double> out;
    if (kind_ == Kind::external) {
      if (!proc_) proc_ = std::make_shared<ExternalProcess>(command_, timeout_s_);
      out = proc_->request(pts);
    } else {
      out.resize(static_cast<std::size_t>(pts.rows()));
      for (Eigen::Index i = 0; i < pts.rows(); ++i) out[static_cast<std::size_t>(i)] = exact(pts.row(i));
    }
    calls_ += out.size();
    return out;
  }

  /// Shuts down an external evaluator, surfacing a nonzero exit.
  void close() {
    if (proc_) {
      auto p = std::move(proc_);
      p->close_child();
    }
  }

 private:
  LimitState(Kind k, std::size_t d) : kind_(k), dim_(d) {}

  Kind kind_;
  std::size_t dim_;
  double beta_ = 0.0;
  std::string command_;
  double timeout_s_ = 300.0;
  std::size_t calls_ = 0;
  std::shared_ptr<ExternalProcess> proc_;
};

}  // namespace akrel
