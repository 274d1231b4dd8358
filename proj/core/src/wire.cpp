#include <istream>
#include <ostream>
#include <string>

#include <nlohmann/json.hpp>

#include "dfoattack/errors.hpp"
#include "dfoattack/remote_oracle.hpp"

#include <httplib.h>

namespace dfoattack {

using nlohmann::json;

std::string encode_request(std::span<const double> image, const Shape& shape) {
  json j;
  j["image"] = std::vector<double>(image.begin(), image.end());
  j["shape"] = {shape.height, shape.width, shape.channels};
  return j.dump();
}

std::vector<double> decode_reply(const std::string& body, std::size_t num_classes) {
  json j;
  try {
    j = json::parse(body);
  } catch (const json::exception& e) {
    throw EvaluationError(std::string("malformed oracle reply: ") + e.what());
  }
  if (j.contains("error")) {
    throw EvaluationError("oracle reported an error: " + j["error"].dump());
  }
  if (!j.contains("logits") || !j["logits"].is_array()) {
    throw EvaluationError("oracle reply has no 'logits' array");
  }
  std::vector<double> logits;
  for (const auto& v : j["logits"]) {
    if (!v.is_number()) throw EvaluationError("oracle reply has a non-numeric logit");
    logits.push_back(v.get<double>());
  }
  if (logits.size() != num_classes) {
    throw EvaluationError("oracle reply has " + std::to_string(logits.size()) +
                          " logits, expected " + std::to_string(num_classes));
  }
  return logits;
}

std::string handle_request(const Classifier& model, const std::string& body) {
  try {
    const json j = json::parse(body);
    const Shape expected = model.input_shape();
    const auto shape = j.at("shape").get<std::vector<std::size_t>>();
    if (shape.size() != 3 || shape[0] != expected.height || shape[1] != expected.width ||
        shape[2] != expected.channels) {
      return json{{"error", "shape mismatch"}}.dump();
    }
    const auto image = j.at("image").get<std::vector<double>>();
    return json{{"logits", model.predict(image)}}.dump();
  } catch (const std::exception& e) {
    return json{{"error", e.what()}}.dump();
  }
}

void serve_stream(const Classifier& model, std::istream& in, std::ostream& out) {
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    out << handle_request(model, line) << '\n';
    out.flush();
  }
}

void serve_http(const Classifier& model, const std::string& host, int port,
                const std::string& path) {
  httplib::Server server;
  server.Post(path, [&model](const httplib::Request& req, httplib::Response& res) {
    res.set_content(handle_request(model, req.body), "application/json");
  });
  if (!server.listen(host, port)) {
    throw Error("cannot listen on " + host + ":" + std::to_string(port));
  }
}

}  // namespace dfoattack
