#include "dfoattack/remote_oracle.hpp"

#include <condition_variable>
#include <csignal>
#include <cstring>
#include <mutex>
#include <regex>
#include <string>

#include <fcntl.h>
#include <poll.h>
#include <sys/wait.h>
#include <unistd.h>

#include <httplib.h>

#include "dfoattack/errors.hpp"

namespace dfoattack {

struct ConcurrencyGate::State {
  std::mutex mutex;
  std::condition_variable cv;
  std::size_t available;
};

ConcurrencyGate::ConcurrencyGate(std::size_t max_in_flight) : state_(std::make_shared<State>()) {
  state_->available = max_in_flight == 0 ? 1 : max_in_flight;
}

void ConcurrencyGate::acquire() {
  std::unique_lock lock(state_->mutex);
  state_->cv.wait(lock, [&] { return state_->available > 0; });
  --state_->available;
}

void ConcurrencyGate::release() {
  {
    std::lock_guard lock(state_->mutex);
    ++state_->available;
  }
  state_->cv.notify_one();
}

namespace {

class GateGuard {
 public:
  explicit GateGuard(ConcurrencyGate& gate) : gate_(gate) { gate_.acquire(); }
  ~GateGuard() { gate_.release(); }
  GateGuard(const GateGuard&) = delete;
  GateGuard& operator=(const GateGuard&) = delete;

 private:
  ConcurrencyGate& gate_;
};

}  // namespace

HttpOracle::HttpOracle(std::string url, RemoteEndpoint endpoint)
    : HttpOracle(std::move(url), endpoint, ConcurrencyGate(endpoint.max_concurrency)) {}

HttpOracle::HttpOracle(std::string url, RemoteEndpoint endpoint, ConcurrencyGate gate)
    : url_(std::move(url)), endpoint_(endpoint), gate_(std::move(gate)) {
  static const std::regex pattern(R"(^http://([^/:]+)(?::(\d+))?(/.*)?$)");
  std::smatch m;
  if (!std::regex_match(url_, m, pattern)) {
    throw ContractViolation("HttpOracle: expected http://host[:port]/path, got '" + url_ + "'");
  }
  host_ = m[1].str();
  port_ = m[2].matched ? std::stoi(m[2].str()) : 80;
  path_ = m[3].matched ? m[3].str() : "/predict";
  if (endpoint_.num_classes < 2) throw InvalidObjective("remote oracle needs num_classes >= 2");
}

std::unique_ptr<QueryOracle> HttpOracle::clone() const {
  return std::make_unique<HttpOracle>(url_, endpoint_, gate_);
}

std::vector<double> HttpOracle::do_query(std::span<const double> point) {
  GateGuard guard(gate_);
  httplib::Client client(host_, port_);
  const auto seconds = std::chrono::duration_cast<std::chrono::seconds>(endpoint_.timeout);
  const auto micros = std::chrono::duration_cast<std::chrono::microseconds>(endpoint_.timeout - seconds);
  client.set_connection_timeout(seconds.count(), micros.count());
  client.set_read_timeout(seconds.count(), micros.count());
  client.set_write_timeout(seconds.count(), micros.count());
  auto res = client.Post(path_, encode_request(point, endpoint_.shape), "application/json");
  if (!res) {
    throw EvaluationError("remote oracle " + url_ + " failed: " + httplib::to_string(res.error()));
  }
  if (res->status != 200) {
    throw EvaluationError("remote oracle " + url_ + " returned HTTP " + std::to_string(res->status));
  }
  return decode_reply(res->body, endpoint_.num_classes);
}

PipeOracle::PipeOracle(std::vector<std::string> argv, RemoteEndpoint endpoint)
    : argv_(std::move(argv)), endpoint_(endpoint) {
  if (argv_.empty()) throw ContractViolation("PipeOracle: empty command");
  if (endpoint_.num_classes < 2) throw InvalidObjective("remote oracle needs num_classes >= 2");
  int in_pipe[2];
  int out_pipe[2];
  if (pipe(in_pipe) != 0) throw Error("PipeOracle: pipe() failed");
  if (pipe(out_pipe) != 0) {
    close(in_pipe[0]);
    close(in_pipe[1]);
    throw Error("PipeOracle: pipe() failed");
  }
  std::vector<char*> args;
  for (auto& a : argv_) args.push_back(a.data());
  args.push_back(nullptr);

  pid_ = fork();
  if (pid_ < 0) throw Error("PipeOracle: fork() failed");
  if (pid_ == 0) {
    dup2(in_pipe[0], STDIN_FILENO);
    dup2(out_pipe[1], STDOUT_FILENO);
    close(in_pipe[0]);
    close(in_pipe[1]);
    close(out_pipe[0]);
    close(out_pipe[1]);
    execvp(args[0], args.data());
    _exit(127);
  }
  close(in_pipe[0]);
  close(out_pipe[1]);
  to_child_ = in_pipe[1];
  from_child_ = out_pipe[0];
  // A dead child must surface as EvaluationError on write, not kill us.
  std::signal(SIGPIPE, SIG_IGN);
  fcntl(to_child_, F_SETFD, FD_CLOEXEC);
  fcntl(from_child_, F_SETFD, FD_CLOEXEC);
}

PipeOracle::~PipeOracle() { shutdown(); }

void PipeOracle::shutdown() {
  if (to_child_ >= 0) close(to_child_);
  if (from_child_ >= 0) close(from_child_);
  to_child_ = from_child_ = -1;
  if (pid_ > 0) {
    int status = 0;
    if (waitpid(pid_, &status, WNOHANG) == 0) {
      // Closing stdin normally ends the child; give it a moment, then insist.
      for (int i = 0; i < 50 && waitpid(pid_, &status, WNOHANG) == 0; ++i) usleep(10000);
      if (waitpid(pid_, &status, WNOHANG) == 0) {
        kill(pid_, SIGKILL);
        waitpid(pid_, &status, 0);
      }
    }
    pid_ = -1;
  }
}

std::unique_ptr<QueryOracle> PipeOracle::clone() const {
  return std::make_unique<PipeOracle>(argv_, endpoint_);
}

std::string PipeOracle::read_line() {
  const auto deadline = std::chrono::steady_clock::now() + endpoint_.timeout;
  for (;;) {
    const auto nl = buffer_.find('\n');
    if (nl != std::string::npos) {
      std::string line = buffer_.substr(0, nl);
      buffer_.erase(0, nl + 1);
      return line;
    }
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
        deadline - std::chrono::steady_clock::now());
    if (left.count() <= 0) throw EvaluationError("pipe oracle timed out");
    pollfd pfd{from_child_, POLLIN, 0};
    const int ready = poll(&pfd, 1, static_cast<int>(left.count()));
    if (ready == 0) throw EvaluationError("pipe oracle timed out");
    if (ready < 0) {
      if (errno == EINTR) continue;
      throw EvaluationError("pipe oracle poll failed");
    }
    char chunk[4096];
    const ssize_t got = read(from_child_, chunk, sizeof chunk);
    if (got <= 0) throw EvaluationError("pipe oracle closed its output");
    buffer_.append(chunk, static_cast<std::size_t>(got));
  }
}

std::vector<double> PipeOracle::do_query(std::span<const double> point) {
  if (to_child_ < 0) throw EvaluationError("pipe oracle is not running");
  std::string message = encode_request(point, endpoint_.shape);
  message.push_back('\n');
  std::size_t sent = 0;
  while (sent < message.size()) {
    const ssize_t w = write(to_child_, message.data() + sent, message.size() - sent);
    if (w < 0) {
      if (errno == EINTR) continue;
      throw EvaluationError("pipe oracle write failed");
    }
    sent += static_cast<std::size_t>(w);
  }
  return decode_reply(read_line(), endpoint_.num_classes);
}

}  // namespace dfoattack
