#include "dfoattack/experiment.hpp"

#include <atomic>
#include <bit>
#include <chrono>
#include <fstream>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include "dfoattack/errors.hpp"
#include "dfoattack/masked_oracle.hpp"
#include "dfoattack/models.hpp"
#include "dfoattack/random.hpp"
#include "dfoattack/remote_oracle.hpp"

namespace dfoattack {

using nlohmann::json;

std::vector<LabeledImage> parse_image_set(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError("<image set>", 1, e.what());
  }
  try {
    const auto dims = j.at("shape").get<std::vector<std::size_t>>();
    if (dims.size() != 3) throw ShapeError("image set shape must have three entries");
    const Shape shape{dims[0], dims[1], dims[2]};
    double lower = InputTensor::kDefaultLower;
    double upper = InputTensor::kDefaultUpper;
    if (j.contains("bounds")) {
      const auto b = j["bounds"].get<std::vector<double>>();
      if (b.size() != 2) throw ShapeError("image set bounds must be [lower, upper]");
      lower = b[0];
      upper = b[1];
    }
    std::vector<LabeledImage> images;
    for (const auto& item : j.at("images")) {
      images.push_back({item.at("id").get<std::string>(),
                        InputTensor(shape, item.at("data").get<std::vector<double>>(), lower, upper)});
    }
    return images;
  } catch (const json::exception& e) {
    throw ParseError("<image set>", 1, e.what());
  }
}

std::vector<LabeledImage> load_image_set(const std::filesystem::path& path) {
  std::ifstream file(path, std::ios::binary);
  if (!file) throw Error("cannot open image set " + path.string());
  std::ostringstream buf;
  buf << file.rdbuf();
  try {
    return parse_image_set(buf.str());
  } catch (const ParseError& e) {
    throw Error(path.string() + ": " + e.what());
  }
}

void save_image_set(std::span<const LabeledImage> images, const std::filesystem::path& path) {
  if (images.empty()) throw ContractViolation("save_image_set: no images");
  const Shape s = images.front().image.shape();
  json j;
  j["shape"] = {s.height, s.width, s.channels};
  j["bounds"] = {images.front().image.lower(), images.front().image.upper()};
  j["images"] = json::array();
  for (const auto& img : images) {
    j["images"].push_back({{"id", img.id},
                           {"data", std::vector<double>(img.image.data().begin(),
                                                        img.image.data().end())}});
  }
  std::ofstream file(path, std::ios::binary);
  if (!file) throw Error("cannot write image set " + path.string());
  file << j.dump() << '\n';
}

TargetProtocol parse_target_protocol(std::string_view name) {
  if (name == "all-other-classes" || name == "all") return TargetProtocol::all_other_classes;
  if (name == "random-class" || name == "random") return TargetProtocol::random_class;
  throw InvalidPlan("unknown target protocol '" + std::string(name) + "'");
}

std::string_view to_string(TargetProtocol protocol) noexcept {
  return protocol == TargetProtocol::all_other_classes ? "all-other-classes" : "random-class";
}

void ExperimentConfig::validate() const {
  if (attacks.empty()) throw InvalidPlan("experiment needs at least one attack");
  if (epsilons.empty()) throw InvalidPlan("experiment needs at least one epsilon");
  for (double e : epsilons) {
    if (!(e > 0.0)) throw InvalidPlan("epsilon values must be positive");
  }
  if (parallelism == 0) throw InvalidPlan("parallelism must be at least 1");
  const int sources = static_cast<int>(!oracle.model_path.empty()) +
                      static_cast<int>(!oracle.remote_url.empty()) +
                      static_cast<int>(!oracle.remote_command.empty());
  if (sources != 1) throw InvalidPlan("set exactly one of model path, remote url, remote command");
  if (!oracle.model_path.empty() && !std::filesystem::exists(oracle.model_path)) {
    throw InvalidPlan("model file not found: " + oracle.model_path.string());
  }
  if (!image_set.empty() && !std::filesystem::exists(image_set)) {
    throw InvalidPlan("image set not found: " + image_set.string());
  }
  if ((!oracle.remote_url.empty() || !oracle.remote_command.empty()) &&
      oracle.remote_num_classes < 2) {
    throw InvalidPlan("remote oracles need the number of classes");
  }
}

nlohmann::ordered_json to_json(const AttackRecord& r) {
  nlohmann::ordered_json j;
  j["image_id"] = r.image_id;
  j["original_class"] = r.original_class;
  j["target_class"] = r.target_class;
  j["epsilon"] = r.epsilon;
  j["attack"] = r.attack;
  j["seed"] = r.seed;
  j["success"] = r.success;
  j["queries"] = r.queries;
  if (std::isfinite(r.final_loss)) {
    j["final_loss"] = r.final_loss;
  } else {
    j["final_loss"] = nullptr;
  }
  j["status"] = r.status;
  if (!r.error.empty()) j["error"] = r.error;
  if (r.off_mask_support) j["off_mask_support"] = *r.off_mask_support;
  j["wall_time_s"] = r.wall_time_s;
  return j;
}

AttackRecord record_from_json(const nlohmann::json& j) {
  AttackRecord r;
  r.image_id = j.at("image_id").get<std::string>();
  r.original_class = j.at("original_class").get<ClassIndex>();
  r.target_class = j.at("target_class").get<ClassIndex>();
  r.epsilon = j.at("epsilon").get<double>();
  r.attack = j.at("attack").get<std::string>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.success = j.at("success").get<bool>();
  r.queries = j.at("queries").get<std::size_t>();
  r.final_loss = j.at("final_loss").is_null() ? std::numeric_limits<double>::infinity()
                                               : j["final_loss"].get<double>();
  r.status = j.value("status", "ok");
  r.error = j.value("error", "");
  if (j.contains("off_mask_support")) r.off_mask_support = j["off_mask_support"].get<std::size_t>();
  r.wall_time_s = j.value("wall_time_s", 0.0);
  return r;
}

std::uint64_t derive_seed(std::uint64_t global_seed, std::string_view image_id, ClassIndex target,
                          std::string_view attack, double epsilon) {
  std::uint64_t h = splitmix64(global_seed);
  h = hash_combine(h, hash_string(image_id));
  h = hash_combine(h, static_cast<std::uint64_t>(target));
  h = hash_combine(h, hash_string(attack));
  h = hash_combine(h, std::bit_cast<std::uint64_t>(epsilon));
  return h;
}

OracleFactory make_oracle_factory(const OracleSource& source, const Shape& shape) {
  if (!source.model_path.empty()) {
    std::shared_ptr<const Classifier> model = load_model(source.model_path);
    if (model->input_shape() != shape) {
      throw ShapeError("model input shape does not match the image set");
    }
    return [model] { return std::make_unique<ClassifierOracle>(model); };
  }
  RemoteEndpoint endpoint;
  endpoint.shape = shape;
  endpoint.num_classes = source.remote_num_classes;
  endpoint.timeout = source.remote_timeout;
  endpoint.max_concurrency = source.remote_max_concurrency;
  if (!source.remote_url.empty()) {
    // Clones share the gate, so the cap applies across workers.
    auto prototype = std::make_shared<HttpOracle>(source.remote_url, endpoint);
    return [prototype] { return prototype->clone(); };
  }
  if (!source.remote_command.empty()) {
    auto argv = source.remote_command;
    return [argv, endpoint] { return std::make_unique<PipeOracle>(argv, endpoint); };
  }
  throw InvalidPlan("no oracle source configured");
}

namespace {

struct Task {
  std::size_t image = 0;
  ClassIndex original = 0;
  ClassIndex target = 0;
  double epsilon = 0.0;
  std::size_t attack = 0;
  std::string setup_error;
};

AttackRecord run_task(const ExperimentConfig& config, const OracleFactory& factory,
                      const LabeledImage& image, const Task& task) {
  const AttackSettings& settings = config.attacks[task.attack];
  AttackRecord rec;
  rec.image_id = image.id;
  rec.original_class = task.original;
  rec.target_class = task.target;
  rec.epsilon = task.epsilon;
  rec.attack = settings.name();
  rec.seed = derive_seed(config.seed, image.id, task.target, rec.attack, task.epsilon);
  if (!task.setup_error.empty()) {
    rec.status = "error";
    rec.error = task.setup_error;
    rec.final_loss = std::numeric_limits<double>::infinity();
    return rec;
  }

  const auto start = std::chrono::steady_clock::now();
  try {
    RunParameters run;
    run.epsilon = task.epsilon;
    run.max_queries = config.max_queries;
    run.seed = rec.seed;
    std::unique_ptr<QueryOracle> oracle = factory();
    if (config.mask_top_k) {
      run.active_pixels = variance_mask(image.image, *config.mask_top_k);
      oracle = std::make_unique<MaskedOracle>(std::move(oracle), image.image, run.active_pixels);
    }
    const AttackResult result = run_attack(settings, run, *oracle, image.image, task.target);
    rec.queries = result.queries;
    rec.final_loss = result.final_loss;
    rec.success = result.success;
    if (result.queries != oracle->query_count()) {
      rec.status = "error";
      rec.error = "query accounting mismatch";
    }
    if (config.mask_top_k) {
      std::vector<bool> in_mask(image.image.size(), false);
      for (std::size_t i : run.active_pixels) in_mask[i] = true;
      std::size_t outside = 0;
      for (std::size_t i = 0; i < result.perturbation.size(); ++i) {
        if (!in_mask[i] && result.perturbation[i] != 0.0) ++outside;
      }
      rec.off_mask_support = outside;
    }
    if (result.success) {
      const auto logits = oracle->peek(image.image.perturbed(result.perturbation));
      if (argmax(logits) != task.target) {
        rec.success = false;
        rec.status = "inconsistent";
      }
    }
  } catch (const std::exception& e) {
    rec.success = false;
    rec.status = "error";
    rec.error = e.what();
  }
  rec.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return rec;
}

}  // namespace

std::vector<AttackRecord> run_experiment(const ExperimentConfig& config,
                                         const OracleFactory& factory,
                                         std::span<const LabeledImage> images,
                                         std::ostream* stream) {
  if (config.attacks.empty()) throw InvalidPlan("experiment needs at least one attack");
  if (config.epsilons.empty()) throw InvalidPlan("experiment needs at least one epsilon");
  if (config.parallelism == 0) throw InvalidPlan("parallelism must be at least 1");
  if (images.empty()) return {};

  std::vector<Task> tasks;
  {
    auto probe = factory();
    const std::size_t classes = probe->num_classes();
    for (std::size_t im = 0; im < images.size(); ++im) {
      const LabeledImage& image = images[im];
      ClassIndex original = 0;
      std::string setup_error;
      try {
        original = argmax(probe->peek(image.image.data()));
      } catch (const std::exception& e) {
        setup_error = std::string("original class: ") + e.what();
      }
      for (double eps : config.epsilons) {
        std::vector<ClassIndex> targets;
        if (config.protocol == TargetProtocol::all_other_classes) {
          for (ClassIndex t = 0; t < classes; ++t) {
            if (t != original) targets.push_back(t);
          }
        } else {
          Rng rng(derive_seed(config.seed, image.id, 0, "target", 0.0));
          std::uniform_int_distribution<ClassIndex> pick(0, classes - 2);
          const ClassIndex t = pick(rng);
          targets.push_back(t >= original ? t + 1 : t);
        }
        for (ClassIndex t : targets) {
          for (std::size_t a = 0; a < config.attacks.size(); ++a) {
            tasks.push_back({im, original, t, eps, a, setup_error});
          }
        }
      }
    }
  }

  std::vector<AttackRecord> records(tasks.size());
  std::vector<bool> done(tasks.size(), false);
  std::size_t flushed = 0;
  std::mutex writer;
  std::atomic<std::size_t> next{0};

  auto worker = [&] {
    for (;;) {
      const std::size_t k = next.fetch_add(1);
      if (k >= tasks.size()) return;
      AttackRecord rec = run_task(config, factory, images[tasks[k].image], tasks[k]);
      std::lock_guard lock(writer);
      records[k] = std::move(rec);
      done[k] = true;
      while (flushed < tasks.size() && done[flushed]) {
        if (stream) *stream << to_json(records[flushed]).dump() << '\n' << std::flush;
        ++flushed;
      }
    }
  };

  const std::size_t threads = std::min(config.parallelism, tasks.size());
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t i = 0; i < threads; ++i) pool.emplace_back(worker);
  }
  return records;
}

std::vector<AttackRecord> run_experiment(const ExperimentConfig& config) {
  config.validate();
  const auto images = load_image_set(config.image_set);
  if (images.empty()) return {};
  const OracleFactory factory = make_oracle_factory(config.oracle, images.front().image.shape());
  if (config.output_dir.empty()) return run_experiment(config, factory, images, nullptr);
  std::filesystem::create_directories(config.output_dir);
  const auto path = config.output_dir / "records.jsonl";
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  return run_experiment(config, factory, images, &out);
}

}  // namespace dfoattack
