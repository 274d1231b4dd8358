#pragma once

#include <chrono>
#include <cstddef>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "dfoattack/models.hpp"
#include "dfoattack/oracle.hpp"

namespace dfoattack {

// Wire protocol, one JSON object per query:
//   request  {"image": [n decimals], "shape": [h, w, c]}
//   reply    {"logits": [n_c decimals]}
// Over HTTP it is POSTed to the endpoint path; over a pipe each message is a
// single line.

std::string encode_request(std::span<const double> image, const Shape& shape);
/// Parses and validates a reply. Throws EvaluationError when malformed or
/// when the length differs from num_classes.
std::vector<double> decode_reply(const std::string& body, std::size_t num_classes);

/// Server side: request JSON -> reply JSON. Errors come back as {"error": msg}.
std::string handle_request(const Classifier& model, const std::string& body);

/// Serves requests line by line until EOF.
void serve_stream(const Classifier& model, std::istream& in, std::ostream& out);

/// Blocking HTTP server on host:port answering POST `path`.
void serve_http(const Classifier& model, const std::string& host, int port,
                const std::string& path = "/predict");

/// Limits the number of in-flight requests across clones of a remote oracle.
class ConcurrencyGate {
 public:
  explicit ConcurrencyGate(std::size_t max_in_flight);
  void acquire();
  void release();

 private:
  struct State;
  std::shared_ptr<State> state_;
};

struct RemoteEndpoint {
  Shape shape;
  std::size_t num_classes = 0;
  std::chrono::milliseconds timeout{30000};
  std::size_t max_concurrency = 1;
};

/// HTTP client oracle. One counted query per successful round trip.
class HttpOracle final : public QueryOracle {
 public:
  /// url: http://host:port/path
  HttpOracle(std::string url, RemoteEndpoint endpoint);
  HttpOracle(std::string url, RemoteEndpoint endpoint, ConcurrencyGate gate);

  Shape input_shape() const override { return endpoint_.shape; }
  std::size_t num_classes() const override { return endpoint_.num_classes; }
  std::unique_ptr<QueryOracle> clone() const override;

 protected:
  std::vector<double> do_query(std::span<const double> point) override;

 private:
  std::string url_;
  std::string host_;
  int port_ = 80;
  std::string path_;
  RemoteEndpoint endpoint_;
  ConcurrencyGate gate_;
};

/// Child-process oracle speaking the line protocol on stdin/stdout. Each
/// instance (and each clone) owns its own child process.
class PipeOracle final : public QueryOracle {
 public:
  PipeOracle(std::vector<std::string> argv, RemoteEndpoint endpoint);
  ~PipeOracle() override;
  PipeOracle(const PipeOracle&) = delete;
  PipeOracle& operator=(const PipeOracle&) = delete;

  Shape input_shape() const override { return endpoint_.shape; }
  std::size_t num_classes() const override { return endpoint_.num_classes; }
  std::unique_ptr<QueryOracle> clone() const override;

 protected:
  std::vector<double> do_query(std::span<const double> point) override;

 private:
  std::string read_line();
  void shutdown();

  std::vector<std::string> argv_;
  RemoteEndpoint endpoint_;
  int pid_ = -1;
  int to_child_ = -1;
  int from_child_ = -1;
  std::string buffer_;
};

}  // namespace dfoattack
