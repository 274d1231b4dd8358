// dfoattack command-line front end.
//
//   dfoattack attack   single image, prints the result as JSON
//   dfoattack bench    campaign over an image set; records, CDFs and plots
//   dfoattack cdf      records.jsonl -> cdf.csv
//   dfoattack plot     cdf.csv -> one SVG per epsilon
//   dfoattack serve    answer wire-protocol queries for a model (HTTP or stdio)
//   dfoattack generate random linear-softmax model and image set
//
// Options can also come from an INI/TOML file given as --config FILE before
// the subcommand, with one [section] per subcommand; flags override it.

#include <algorithm>
#include <cstdio>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "dfoattack/attacks.hpp"
#include "dfoattack/errors.hpp"
#include "dfoattack/experiment.hpp"
#include "dfoattack/masked_oracle.hpp"
#include "dfoattack/models.hpp"
#include "dfoattack/random.hpp"
#include "dfoattack/remote_oracle.hpp"
#include "dfoattack/report.hpp"

namespace {

using namespace dfoattack;

struct AttackFlags {
  std::string attack = "bobyqa";
  std::size_t batch_size = 25;
  std::size_t kappa = 50;
  std::string strategy = "variance";
  double square_fraction = 0.1;
  std::size_t parsimonious_grid = 2;
  std::size_t population = 6;
  double mutation = 0.05;
  double momentum = 0.9;
  std::size_t directions = 25;
};

void add_attack_flags(CLI::App* app, AttackFlags& f) {
  app->add_option("--batch-size", f.batch_size, "Coordinates per bobyqa batch (b)")
      ->capture_default_str();
  app->add_option("--kappa", f.kappa, "Queries per bobyqa batch")->capture_default_str();
  app->add_option("--strategy", f.strategy, "Sub-sampling: random, ordered or variance")
      ->capture_default_str();
  app->add_option("--square-fraction", f.square_fraction, "Initial square area fraction")
      ->capture_default_str();
  app->add_option("--parsimonious-grid", f.parsimonious_grid, "Initial blocks per side")
      ->capture_default_str();
  app->add_option("--population", f.population, "GenAttack population")->capture_default_str();
  app->add_option("--mutation", f.mutation, "GenAttack mutation probability")
      ->capture_default_str();
  app->add_option("--momentum", f.momentum, "Frank-Wolfe momentum")->capture_default_str();
  app->add_option("--directions", f.directions, "Frank-Wolfe directions per estimate")
      ->capture_default_str();
}

AttackSettings settings_for(const std::string& name, const AttackFlags& f) {
  AttackSettings s;
  s.kind = parse_attack_kind(name);
  s.batch_size = f.batch_size;
  s.queries_per_batch = f.kappa;
  s.strategy = parse_sampling_strategy(f.strategy);
  s.square.initial_fraction = f.square_fraction;
  s.parsimonious.initial_grid = f.parsimonious_grid;
  s.genattack.population = f.population;
  s.genattack.mutation_probability = f.mutation;
  s.frank_wolfe.momentum = f.momentum;
  s.frank_wolfe.directions = f.directions;
  return s;
}

struct OracleFlags {
  std::string model;
  std::string remote_url;
  std::string remote_command;
  std::size_t num_classes = 0;
  double timeout_s = 30.0;
  std::size_t max_concurrency = 1;
};

void add_oracle_flags(CLI::App* app, OracleFlags& f) {
  auto* model = app->add_option("--model", f.model, "Model file");
  auto* url = app->add_option("--remote-url", f.remote_url, "Remote oracle http://host:port/path");
  auto* cmd = app->add_option("--remote-command", f.remote_command,
                              "Child process command line (whitespace separated) speaking the line protocol");
  model->excludes(url)->excludes(cmd);
  url->excludes(cmd);
  app->add_option("--num-classes", f.num_classes, "Class count of a remote oracle");
  app->add_option("--timeout", f.timeout_s, "Remote timeout in seconds")->capture_default_str();
  app->add_option("--max-concurrency", f.max_concurrency, "Remote in-flight request cap")
      ->capture_default_str();
}

OracleSource source_for(const OracleFlags& f) {
  OracleSource s;
  s.model_path = f.model;
  s.remote_url = f.remote_url;
  std::istringstream words(f.remote_command);
  for (std::string w; words >> w;) s.remote_command.push_back(w);
  s.remote_num_classes = f.num_classes;
  s.remote_timeout = std::chrono::milliseconds(static_cast<long long>(f.timeout_s * 1000.0));
  s.remote_max_concurrency = f.max_concurrency;
  return s;
}

struct CommonRun {
  std::vector<double> eps{0.05};
  std::size_t max_queries = 3000;
  std::uint64_t seed = 0;
  std::optional<std::size_t> mask_top_k;
  std::string out;
};

int cmd_attack(const OracleFlags& of, const AttackFlags& af, const CommonRun& run,
               const std::string& images_path, std::size_t index, std::optional<ClassIndex> target) {
  const auto images = load_image_set(images_path);
  if (index >= images.size()) throw InvalidPlan("image index out of range");
  const LabeledImage& image = images[index];
  OracleSource source = source_for(of);
  ExperimentConfig check;
  check.attacks = {settings_for(af.attack, af)};
  check.oracle = source;
  check.epsilons = run.eps;
  check.validate();
  auto oracle = make_oracle_factory(source, image.image.shape())();

  const ClassIndex original = argmax(oracle->peek(image.image.data()));
  ClassIndex t;
  if (target) {
    t = *target;
  } else {
    t = (original + 1) % oracle->num_classes();
  }
  AttackObjective{t, original, oracle->num_classes()}.validate();

  RunParameters params;
  params.epsilon = run.eps.front();
  params.max_queries = run.max_queries;
  params.seed = run.seed;
  if (run.mask_top_k) {
    params.active_pixels = variance_mask(image.image, *run.mask_top_k);
    oracle = std::make_unique<MaskedOracle>(std::move(oracle), image.image, params.active_pixels);
  }
  const AttackSettings settings = check.attacks.front();
  const AttackResult r = run_attack(settings, params, *oracle, image.image, t);

  nlohmann::ordered_json j;
  j["image_id"] = image.id;
  j["attack"] = settings.name();
  j["original_class"] = original;
  j["target_class"] = t;
  j["epsilon"] = params.epsilon;
  j["success"] = r.success;
  j["queries"] = r.queries;
  j["final_loss"] = r.final_loss;
  j["final_class"] = r.final_class;
  j["level_reached"] = r.level_reached;
  j["linf"] = linf_norm(r.perturbation);
  std::cout << j.dump(2) << '\n';
  if (!run.out.empty()) {
    nlohmann::ordered_json full = j;
    full["perturbation"] = r.perturbation;
    write_text_file(run.out, full.dump() + "\n");
  }
  return 0;
}

int cmd_bench(const OracleFlags& of, const AttackFlags& af, const CommonRun& run,
              const std::vector<std::string>& attacks, const std::string& images_path,
              const std::string& protocol, std::size_t jobs, std::size_t grid_step) {
  ExperimentConfig config;
  for (const auto& a : attacks) config.attacks.push_back(settings_for(a, af));
  config.oracle = source_for(of);
  config.image_set = images_path;
  config.epsilons = run.eps;
  config.max_queries = run.max_queries;
  config.protocol = parse_target_protocol(protocol);
  config.seed = run.seed;
  config.parallelism = jobs;
  config.mask_top_k = run.mask_top_k;
  config.output_dir = run.out.empty() ? "results" : run.out;

  const auto records = run_experiment(config);
  std::size_t ok = 0, wins = 0;
  for (const auto& r : records) {
    ok += r.status == "ok";
    wins += r.success;
  }
  std::cerr << records.size() << " attacks, " << wins << " successful, "
            << records.size() - ok << " with errors\n";
  if (records.empty()) return 0;
  const auto grid = uniform_grid(config.max_queries, grid_step);
  const auto curves = compute_curves(records, grid);
  const auto files = emit_outputs(records, curves, config.output_dir);
  std::cerr << "wrote " << files.records.string() << ", " << files.cdf.string() << " and "
            << files.plots.size() << " plot(s)\n";
  return 0;
}

int cmd_generate(std::size_t classes, std::vector<std::size_t> shape, std::size_t count,
                 std::uint64_t seed, const std::string& model_out, const std::string& images_out) {
  if (shape.size() != 3) throw InvalidPlan("--shape takes H W C");
  const Shape s{shape[0], shape[1], shape[2]};
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd w(classes, s.size());
  for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = normal(rng);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(classes));
  save_model(LinearSoftmaxModel(s, w, b), model_out);

  std::uniform_real_distribution<double> pixel(-0.5, 0.5);
  std::vector<LabeledImage> images;
  for (std::size_t k = 0; k < count; ++k) {
    std::vector<double> data(s.size());
    for (double& v : data) v = pixel(rng);
    images.push_back({"img" + std::to_string(k), InputTensor(s, std::move(data))});
  }
  save_image_set(images, images_out);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Query-efficient black-box adversarial attacks and benchmarks"};
  app.set_config("--config", "", "Read options from a config file");
  app.require_subcommand(1);

  OracleFlags oracle_flags;
  AttackFlags attack_flags;
  CommonRun run;

  auto add_run_flags = [&](CLI::App* sub) {
    sub->add_option("--eps", run.eps, "l-inf budget(s)")->capture_default_str();
    sub->add_option("--max-queries", run.max_queries, "Query budget per attack")
        ->capture_default_str();
    sub->add_option("--seed", run.seed, "Seed")->capture_default_str();
    sub->add_option("--mask-top-k", run.mask_top_k, "Only perturb the k highest-variance pixels");
    sub->add_option("--out", run.out, "Output file or directory");
    add_oracle_flags(sub, oracle_flags);
    add_attack_flags(sub, attack_flags);
  };

  auto* attack = app.add_subcommand("attack", "Attack one image");
  std::string images_path;
  std::size_t index = 0;
  std::optional<ClassIndex> target;
  add_run_flags(attack);
  attack->add_option("--attack", attack_flags.attack,
                     "bobyqa, square, parsimonious, genattack or frankwolfe")
      ->capture_default_str();
  attack->add_option("--images", images_path, "Image set JSON")->required();
  attack->add_option("--index", index, "Image position in the set")->capture_default_str();
  attack->add_option("--target", target, "Target class (default: original + 1)");

  auto* bench = app.add_subcommand("bench", "Run a campaign");
  std::vector<std::string> attacks{"bobyqa"};
  std::string protocol = "all-other-classes";
  std::size_t jobs = 1;
  std::size_t grid_step = 50;
  add_run_flags(bench);
  bench->add_option("--attack", attacks, "Attacks to compare")->capture_default_str();
  bench->add_option("--images", images_path, "Image set JSON")->required();
  bench->add_option("--protocol", protocol, "all-other-classes or random-class")
      ->capture_default_str();
  bench->add_option("--jobs", jobs, "Parallel workers")->capture_default_str();
  bench->add_option("--grid-step", grid_step, "CDF query grid spacing")->capture_default_str();

  auto* cdf = app.add_subcommand("cdf", "Aggregate records into success-rate CDFs");
  std::string records_path;
  std::string cdf_out = "cdf.csv";
  std::size_t cdf_max = 3000;
  cdf->add_option("--records", records_path, "records.jsonl")->required();
  cdf->add_option("--max-queries", cdf_max, "Grid end")->capture_default_str();
  cdf->add_option("--grid-step", grid_step, "Grid spacing")->capture_default_str();
  cdf->add_option("--out", cdf_out, "CSV output")->capture_default_str();

  auto* plot = app.add_subcommand("plot", "Render CDF curves as SVG");
  std::string cdf_in;
  std::string plot_dir = ".";
  plot->add_option("--cdf", cdf_in, "cdf.csv")->required();
  plot->add_option("--out", plot_dir, "Output directory")->capture_default_str();

  auto* serve = app.add_subcommand("serve", "Expose a model over the wire protocol");
  std::string serve_model;
  std::string host = "127.0.0.1";
  int port = 0;
  bool stdio = false;
  serve->add_option("--model", serve_model, "Model file")->required();
  serve->add_option("--host", host, "Bind address")->capture_default_str();
  auto* port_opt = serve->add_option("--port", port, "HTTP port");
  auto* stdio_opt = serve->add_flag("--stdio", stdio, "Line protocol on stdin/stdout");
  port_opt->excludes(stdio_opt);

  auto* generate = app.add_subcommand("generate", "Random linear-softmax model and images");
  std::size_t classes = 10;
  std::vector<std::size_t> shape{8, 8, 3};
  std::size_t count = 10;
  std::uint64_t gen_seed = 0;
  std::string model_out = "model.txt";
  std::string images_out = "images.json";
  generate->add_option("--classes", classes, "Number of classes")->capture_default_str();
  generate->add_option("--shape", shape, "H W C")->expected(3)->capture_default_str();
  generate->add_option("--count", count, "Number of images")->capture_default_str();
  generate->add_option("--seed", gen_seed, "Seed")->capture_default_str();
  generate->add_option("--model-out", model_out, "Model file")->capture_default_str();
  generate->add_option("--images-out", images_out, "Image set file")->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*attack) {
      return cmd_attack(oracle_flags, attack_flags, run, images_path, index, target);
    }
    if (*bench) {
      return cmd_bench(oracle_flags, attack_flags, run, attacks, images_path, protocol, jobs,
                       grid_step);
    }
    if (*cdf) {
      const auto records = read_records(records_path);
      if (records.empty()) throw Error("no records in " + records_path);
      const auto curves = compute_curves(records, uniform_grid(cdf_max, grid_step));
      write_text_file(cdf_out, format_cdf_csv(curves));
      return 0;
    }
    if (*plot) {
      const auto curves = parse_cdf_csv(read_text_file(cdf_in));
      std::vector<double> eps;
      for (const auto& c : curves) {
        if (std::find(eps.begin(), eps.end(), c.epsilon) == eps.end()) eps.push_back(c.epsilon);
      }
      std::filesystem::create_directories(plot_dir);
      for (double e : eps) {
        char name[64];
        std::snprintf(name, sizeof name, "plot_eps_%g.svg", e);
        write_text_file(std::filesystem::path(plot_dir) / name, render_svg(curves, e));
      }
      return 0;
    }
    if (*serve) {
      const auto model = load_model(serve_model);
      if (stdio) {
        serve_stream(*model, std::cin, std::cout);
        return 0;
      }
      if (port_opt->count() == 0 || port <= 0) throw InvalidPlan("serve needs --port or --stdio");
      serve_http(*model, host, port);
      return 0;
    }
    if (*generate) {
      return cmd_generate(classes, shape, count, gen_seed, model_out, images_out);
    }
  } catch (const std::exception& e) {
    std::cerr << "dfoattack: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
