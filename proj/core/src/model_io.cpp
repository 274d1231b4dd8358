#include <cerrno>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "dfoattack/errors.hpp"
#include "dfoattack/models.hpp"

namespace dfoattack {

namespace {

struct Token {
  std::string text;
  std::size_t line;
};

std::vector<Token> tokenize(std::string_view text) {
  std::vector<Token> tokens;
  std::size_t line = 1;
  std::size_t i = 0;
  while (i < text.size()) {
    const char c = text[i];
    if (c == '\n') {
      ++line;
      ++i;
    } else if (c == '#') {
      while (i < text.size() && text[i] != '\n') ++i;
    } else if (c == ' ' || c == '\t' || c == '\r') {
      ++i;
    } else {
      const std::size_t start = i;
      while (i < text.size() && text[i] != '\n' && text[i] != ' ' && text[i] != '\t' &&
             text[i] != '\r' && text[i] != '#') {
        ++i;
      }
      tokens.push_back({std::string(text.substr(start, i - start)), line});
    }
  }
  return tokens;
}

class Reader {
 public:
  Reader(std::vector<Token> tokens, std::string source)
      : tokens_(std::move(tokens)), source_(std::move(source)) {}

  [[noreturn]] void fail(const std::string& what) const {
    const std::size_t line = pos_ < tokens_.size() ? tokens_[pos_].line
                                                   : (tokens_.empty() ? 1 : tokens_.back().line);
    throw ParseError(source_, line, what);
  }

  const Token& next(const std::string& context) {
    if (pos_ >= tokens_.size()) fail("unexpected end of file, missing " + context);
    return tokens_[pos_++];
  }

  void expect(const std::string& keyword) {
    if (pos_ >= tokens_.size()) fail("unexpected end of file, missing section '" + keyword + "'");
    if (tokens_[pos_].text != keyword) {
      fail("expected '" + keyword + "', found '" + tokens_[pos_].text + "'");
    }
    ++pos_;
  }

  std::size_t size_value(const std::string& context) {
    const Token& t = next(context);
    std::size_t v = 0;
    const auto [ptr, ec] = std::from_chars(t.text.data(), t.text.data() + t.text.size(), v);
    if (ec != std::errc{} || ptr != t.text.data() + t.text.size()) {
      --pos_;
      fail("expected a non-negative integer for " + context + ", found '" + t.text + "'");
    }
    return v;
  }

  double real_value(const std::string& context) {
    const Token& t = next(context);
    errno = 0;
    char* end = nullptr;
    const double v = std::strtod(t.text.c_str(), &end);
    if (end != t.text.c_str() + t.text.size() || errno == ERANGE) {
      --pos_;
      fail("expected a number for " + context + ", found '" + t.text + "'");
    }
    return v;
  }

  const std::string& word(const std::string& context) { return next(context).text; }
  bool done() const { return pos_ >= tokens_.size(); }

 private:
  std::vector<Token> tokens_;
  std::string source_;
  std::size_t pos_ = 0;
};

TinyMLPModel::Layer read_layer(Reader& in, std::size_t index) {
  const std::string tag = "layer " + std::to_string(index);
  in.expect("layer");
  const std::size_t out = in.size_value(tag + " output size");
  const std::size_t inputs = in.size_value(tag + " input size");
  TinyMLPModel::Layer layer;
  layer.weights.resize(static_cast<Eigen::Index>(out), static_cast<Eigen::Index>(inputs));
  layer.biases.resize(static_cast<Eigen::Index>(out));
  in.expect("weights");
  for (Eigen::Index r = 0; r < layer.weights.rows(); ++r) {
    for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) {
      layer.weights(r, c) = in.real_value(tag + " weights");
    }
  }
  in.expect("biases");
  for (Eigen::Index r = 0; r < layer.biases.size(); ++r) {
    layer.biases(r) = in.real_value(tag + " biases");
  }
  return layer;
}

std::string fmt17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_layer(std::ostringstream& os, const Eigen::MatrixXd& w, const Eigen::VectorXd& b) {
  os << "layer " << w.rows() << ' ' << w.cols() << "\nweights\n";
  for (Eigen::Index r = 0; r < w.rows(); ++r) {
    for (Eigen::Index c = 0; c < w.cols(); ++c) os << (c ? " " : "") << fmt17(w(r, c));
    os << '\n';
  }
  os << "biases\n";
  for (Eigen::Index r = 0; r < b.size(); ++r) os << (r ? " " : "") << fmt17(b(r));
  os << '\n';
}

}  // namespace

std::shared_ptr<Classifier> parse_model(std::string_view text, const std::string& source) {
  Reader in(tokenize(text), source);
  in.expect("dfoattack-model");
  if (in.size_value("format version") != 1) in.fail("unsupported format version");
  in.expect("kind");
  const std::string kind = in.word("model kind");
  if (kind != "linear" && kind != "mlp") in.fail("unknown model kind '" + kind + "'");

  in.expect("input_shape");
  Shape shape;
  shape.height = in.size_value("input height");
  shape.width = in.size_value("input width");
  shape.channels = in.size_value("input channels");
  if (shape.size() == 0) in.fail("input shape must be positive");

  Activation activation = Activation::relu;
  if (kind == "mlp") {
    in.expect("activation");
    const std::string act = in.word("activation");
    if (act == "relu") {
      activation = Activation::relu;
    } else if (act == "tanh") {
      activation = Activation::tanh;
    } else {
      in.fail("unknown activation '" + act + "'");
    }
  }

  in.expect("layers");
  const std::size_t count = in.size_value("layer count");
  if (count == 0) in.fail("at least one layer is required");
  if (kind == "linear" && count != 1) in.fail("a linear model has exactly one layer");

  std::vector<TinyMLPModel::Layer> layers;
  std::size_t expected_inputs = shape.size();
  for (std::size_t l = 0; l < count; ++l) {
    auto layer = read_layer(in, l);
    if (static_cast<std::size_t>(layer.weights.cols()) != expected_inputs) {
      throw ShapeError(source + ": layer " + std::to_string(l) + " declares " +
                       std::to_string(layer.weights.cols()) + " inputs, expected " +
                       std::to_string(expected_inputs));
    }
    expected_inputs = static_cast<std::size_t>(layer.weights.rows());
    layers.push_back(std::move(layer));
  }
  in.expect("end");
  if (!in.done()) in.fail("trailing content after 'end'");

  if (kind == "linear") {
    return std::make_shared<LinearSoftmaxModel>(shape, std::move(layers[0].weights),
                                                std::move(layers[0].biases));
  }
  return std::make_shared<TinyMLPModel>(shape, std::move(layers), activation);
}

std::shared_ptr<Classifier> load_model(const std::filesystem::path& path) {
  std::ifstream file(path, std::ios::binary);
  if (!file) throw Error("cannot open model file " + path.string());
  std::ostringstream buf;
  buf << file.rdbuf();
  return parse_model(buf.str(), path.string());
}

std::string format_model(const Classifier& model) {
  std::ostringstream os;
  const Shape s = model.input_shape();
  os << "dfoattack-model 1\n";
  if (const auto* linear = dynamic_cast<const LinearSoftmaxModel*>(&model)) {
    os << "kind linear\ninput_shape " << s.height << ' ' << s.width << ' ' << s.channels << '\n';
    os << "layers 1\n";
    write_layer(os, linear->weights(), linear->biases());
  } else if (const auto* mlp = dynamic_cast<const TinyMLPModel*>(&model)) {
    os << "kind mlp\ninput_shape " << s.height << ' ' << s.width << ' ' << s.channels << '\n';
    os << "activation " << (mlp->activation() == Activation::relu ? "relu" : "tanh") << '\n';
    os << "layers " << mlp->layers().size() << '\n';
    for (const auto& layer : mlp->layers()) write_layer(os, layer.weights, layer.biases);
  } else {
    throw ContractViolation("format_model: unsupported classifier type");
  }
  os << "end\n";
  return os.str();
}

void save_model(const Classifier& model, const std::filesystem::path& path) {
  std::ofstream file(path, std::ios::binary);
  if (!file) throw Error("cannot write model file " + path.string());
  file << format_model(model);
  if (!file) throw Error("failed writing model file " + path.string());
}

}  // namespace dfoattack
