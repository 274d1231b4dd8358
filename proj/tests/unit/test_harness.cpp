#include <algorithm>
#include <filesystem>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "dfoattack/errors.hpp"
#include "dfoattack/experiment.hpp"
#include "dfoattack/models.hpp"
#include "dfoattack/report.hpp"
#include "oracles.hpp"

using namespace dfoattack;

namespace {

std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() /
             ("dfoattack_" + name + "_" + std::to_string(::getpid()));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

std::shared_ptr<LinearSoftmaxModel> random_model(Shape shape, std::size_t classes, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd w(static_cast<Eigen::Index>(classes), static_cast<Eigen::Index>(shape.size()));
  for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = normal(rng);
  return std::make_shared<LinearSoftmaxModel>(shape, w, Eigen::VectorXd::Zero(w.rows()));
}

std::vector<LabeledImage> random_images(Shape shape, std::size_t count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  std::vector<LabeledImage> out;
  for (std::size_t k = 0; k < count; ++k) {
    std::vector<double> v(shape.size());
    for (double& x : v) x = u(rng);
    out.push_back({"img" + std::to_string(k), InputTensor(shape, std::move(v))});
  }
  return out;
}

OracleFactory factory_for(std::shared_ptr<const Classifier> model) {
  return [model] { return std::make_unique<ClassifierOracle>(model); };
}

ExperimentConfig base_config(std::size_t max_queries = 200) {
  ExperimentConfig cfg;
  AttackSettings bob;
  bob.kind = AttackKind::bobyqa;
  bob.batch_size = 4;
  bob.queries_per_batch = 8;
  AttackSettings sq;
  sq.kind = AttackKind::square;
  cfg.attacks = {bob, sq};
  cfg.epsilons = {0.1};
  cfg.max_queries = max_queries;
  cfg.seed = 11;
  return cfg;
}

std::string strip_wall_time(std::span<const AttackRecord> records) {
  std::string out;
  for (const auto& r : records) {
    auto j = to_json(r);
    j.erase("wall_time_s");
    out += j.dump() + "\n";
  }
  return out;
}

AttackRecord record(std::string attack, double eps, bool success, std::size_t queries) {
  AttackRecord r;
  r.image_id = "x";
  r.attack = std::move(attack);
  r.epsilon = eps;
  r.success = success;
  r.queries = queries;
  return r;
}

// Reports the target class once the counted budget reaches a threshold, but
// the uncounted bookkeeping evaluation always sees the original class.
class LyingOracle final : public QueryOracle {
 public:
  Shape input_shape() const override { return Shape{2, 2, 1}; }
  std::size_t num_classes() const override { return 2; }
  std::unique_ptr<QueryOracle> clone() const override { return std::make_unique<LyingOracle>(); }

 protected:
  std::vector<double> do_query(std::span<const double>) override {
    ++calls_;
    if (calls_ <= 1) return {1.0, 0.0};  // original-class probe
    return calls_ % 2 == 0 ? std::vector<double>{0.0, 1.0} : std::vector<double>{1.0, 0.0};
  }

 private:
  std::size_t calls_ = 0;
};

class FailingOracle final : public QueryOracle {
 public:
  explicit FailingOracle(std::shared_ptr<const Classifier> model) : model_(std::move(model)) {}
  Shape input_shape() const override { return model_->input_shape(); }
  std::size_t num_classes() const override { return model_->num_classes(); }
  std::unique_ptr<QueryOracle> clone() const override { return std::make_unique<FailingOracle>(model_); }

 protected:
  std::vector<double> do_query(std::span<const double> x) override {
    if (++calls_ > 3) throw EvaluationError("backend went away");
    return model_->predict(x);
  }

 private:
  std::shared_ptr<const Classifier> model_;
  std::size_t calls_ = 0;
};

}  // namespace

TEST(Experiment, EmptyImageSetGivesNoRecords) {
  const auto model = random_model(Shape{4, 4, 1}, 10, 1);
  EXPECT_TRUE(run_experiment(base_config(), factory_for(model), {}).empty());
}

TEST(Experiment, AllOtherClassesOneRecordPerTarget) {
  const Shape shape{4, 4, 1};
  const auto model = random_model(shape, 10, 2);
  const auto images = random_images(shape, 1, 3);
  auto cfg = base_config(50);
  cfg.attacks.resize(1);
  const auto records = run_experiment(cfg, factory_for(model), images);
  ASSERT_EQ(records.size(), 9u);
  const ClassIndex original = argmax(model->predict(images[0].image.data()));
  std::set<ClassIndex> targets;
  for (const auto& r : records) {
    EXPECT_EQ(r.original_class, original);
    EXPECT_NE(r.target_class, original);
    EXPECT_EQ(r.status, "ok");
    EXPECT_LE(r.queries, 50u);
    targets.insert(r.target_class);
  }
  EXPECT_EQ(targets.size(), 9u);
  EXPECT_TRUE(std::is_sorted(records.begin(), records.end(),
                             [](const auto& a, const auto& b) { return a.target_class < b.target_class; }));
}

TEST(Experiment, TaskOrderImageEpsilonTargetAttack) {
  const Shape shape{4, 4, 1};
  const auto model = random_model(shape, 3, 4);
  const auto images = random_images(shape, 2, 5);
  auto cfg = base_config(20);
  cfg.epsilons = {0.2, 0.05};
  const auto records = run_experiment(cfg, factory_for(model), images);
  ASSERT_EQ(records.size(), 2u * 2u * 2u * 2u);
  std::size_t k = 0;
  for (const auto& img : images) {
    for (double eps : cfg.epsilons) {
      for (int t = 0; t < 2; ++t) {
        for (const auto& a : cfg.attacks) {
          EXPECT_EQ(records[k].image_id, img.id);
          EXPECT_EQ(records[k].epsilon, eps);
          EXPECT_EQ(records[k].attack, a.name());
          ++k;
        }
      }
    }
  }
}

TEST(Experiment, ParallelMatchesSerial) {
  const Shape shape{4, 4, 2};
  const auto model = random_model(shape, 4, 6);
  const auto images = random_images(shape, 3, 7);
  auto cfg = base_config(60);
  const auto serial = run_experiment(cfg, factory_for(model), images);
  cfg.parallelism = 4;
  std::ostringstream streamed;
  const auto parallel = run_experiment(cfg, factory_for(model), images, &streamed);
  EXPECT_EQ(strip_wall_time(serial), strip_wall_time(parallel));
  EXPECT_EQ(streamed.str(), format_records_jsonl(parallel));
  const auto again = run_experiment(base_config(60), factory_for(model), images);
  EXPECT_EQ(strip_wall_time(serial), strip_wall_time(again));
}

TEST(Experiment, SeedsDependOnIdentityOnly) {
  const auto a = derive_seed(1, "img0", 3, "bobyqa", 0.05);
  EXPECT_EQ(a, derive_seed(1, "img0", 3, "bobyqa", 0.05));
  EXPECT_NE(a, derive_seed(2, "img0", 3, "bobyqa", 0.05));
  EXPECT_NE(a, derive_seed(1, "img1", 3, "bobyqa", 0.05));
  EXPECT_NE(a, derive_seed(1, "img0", 4, "bobyqa", 0.05));
  EXPECT_NE(a, derive_seed(1, "img0", 3, "square", 0.05));
  EXPECT_NE(a, derive_seed(1, "img0", 3, "bobyqa", 0.1));
}

TEST(Experiment, RandomClassProtocol) {
  const Shape shape{4, 4, 1};
  const auto model = random_model(shape, 10, 8);
  const auto images = random_images(shape, 6, 9);
  auto cfg = base_config(20);
  cfg.attacks.resize(1);
  cfg.protocol = TargetProtocol::random_class;
  const auto records = run_experiment(cfg, factory_for(model), images);
  ASSERT_EQ(records.size(), images.size());
  for (const auto& r : records) EXPECT_NE(r.target_class, r.original_class);
  EXPECT_EQ(strip_wall_time(records), strip_wall_time(run_experiment(cfg, factory_for(model), images)));
}

TEST(Experiment, OracleErrorsAreRecordedNotFatal) {
  const Shape shape{4, 4, 1};
  const auto model = random_model(shape, 3, 10);
  const auto images = random_images(shape, 1, 11);
  auto cfg = base_config(100);
  const auto records = run_experiment(
      cfg, [model] { return std::make_unique<FailingOracle>(model); }, images);
  ASSERT_EQ(records.size(), 4u);
  for (const auto& r : records) {
    EXPECT_EQ(r.status, "error");
    EXPECT_FALSE(r.success);
    EXPECT_NE(r.error.find("backend went away"), std::string::npos);
  }
}

TEST(Experiment, UnreproducedSuccessIsInconsistent) {
  const std::vector<LabeledImage> images{{"a", InputTensor(Shape{2, 2, 1}, std::vector<double>(4, 0.0))}};
  auto cfg = base_config(10);
  cfg.attacks.resize(1);
  cfg.attacks[0].batch_size = 1;
  cfg.attacks[0].queries_per_batch = 2;
  const auto records = run_experiment(cfg, [] { return std::make_unique<LyingOracle>(); }, images);
  ASSERT_EQ(records.size(), 1u);
  EXPECT_EQ(records[0].status, "inconsistent");
  EXPECT_FALSE(records[0].success);
}

TEST(Experiment, MaskedRunsReportSupport) {
  const Shape shape{4, 4, 1};
  const auto model = random_model(shape, 3, 12);
  const auto images = random_images(shape, 1, 13);
  auto cfg = base_config(60);
  cfg.mask_top_k = 5;
  const auto records = run_experiment(cfg, factory_for(model), images);
  for (const auto& r : records) {
    EXPECT_EQ(r.status, "ok") << r.error;
    ASSERT_TRUE(r.off_mask_support.has_value());
    EXPECT_EQ(*r.off_mask_support, 0u);
  }
}

TEST(Experiment, ConfigValidation) {
  const auto dir = temp_dir("validate");
  auto cfg = base_config();
  EXPECT_THROW(cfg.validate(), InvalidPlan);  // no oracle source
  cfg.oracle.model_path = dir / "missing.txt";
  cfg.image_set = dir / "missing.json";
  EXPECT_THROW(cfg.validate(), Error);
  const auto model = random_model(Shape{2, 2, 1}, 3, 1);
  save_model(*model, dir / "m.txt");
  save_image_set(random_images(Shape{2, 2, 1}, 1, 1), dir / "i.json");
  cfg.oracle.model_path = dir / "m.txt";
  cfg.image_set = dir / "i.json";
  EXPECT_NO_THROW(cfg.validate());
  auto bad = cfg;
  bad.epsilons = {0.0};
  EXPECT_THROW(bad.validate(), Error);
  bad = cfg;
  bad.attacks.clear();
  EXPECT_THROW(bad.validate(), Error);
  bad = cfg;
  bad.parallelism = 0;
  EXPECT_THROW(bad.validate(), Error);
  bad = cfg;
  bad.oracle.remote_url = "http://127.0.0.1:9/predict";
  EXPECT_THROW(bad.validate(), Error);
  std::filesystem::remove_all(dir);
}

TEST(Experiment, FileDrivenCampaignWritesRecords) {
  const auto dir = temp_dir("campaign");
  const Shape shape{4, 4, 1};
  save_model(*random_model(shape, 3, 20), dir / "m.txt");
  save_image_set(random_images(shape, 2, 21), dir / "i.json");
  auto cfg = base_config(40);
  cfg.oracle.model_path = dir / "m.txt";
  cfg.image_set = dir / "i.json";
  cfg.output_dir = dir / "out";
  const auto records = run_experiment(cfg);
  EXPECT_EQ(records.size(), 8u);
  EXPECT_EQ(read_text_file(dir / "out" / "records.jsonl"), format_records_jsonl(records));
  std::filesystem::remove_all(dir);
}

TEST(ImageSet, RoundTripAndErrors) {
  const auto dir = temp_dir("images");
  const auto images = random_images(Shape{2, 3, 2}, 3, 30);
  save_image_set(images, dir / "i.json");
  const auto loaded = load_image_set(dir / "i.json");
  ASSERT_EQ(loaded.size(), 3u);
  for (std::size_t k = 0; k < 3; ++k) {
    EXPECT_EQ(loaded[k].id, images[k].id);
    EXPECT_EQ(loaded[k].image.shape(), images[k].image.shape());
    EXPECT_TRUE(std::ranges::equal(loaded[k].image.data(), images[k].image.data()));
  }
  EXPECT_THROW(parse_image_set(R"({"shape": [1, 1, 1], "images": [{"id": "a", "data": [0.1, 0.2]}]})"), Error);
  EXPECT_THROW(parse_image_set("{"), Error);
  EXPECT_THROW(parse_image_set(R"({"shape": [1, 1, 1], "images": [{"id": "a", "data": [3.0]}]})"), Error);
  EXPECT_EQ(parse_target_protocol("all-other-classes"), TargetProtocol::all_other_classes);
  EXPECT_EQ(parse_target_protocol("random-class"), TargetProtocol::random_class);
  EXPECT_THROW(parse_target_protocol("some"), Error);
  std::filesystem::remove_all(dir);
}

TEST(Cdf, WorkedExample) {
  const std::vector<AttackRecord> rs{record("a", 0.1, true, 4), record("a", 0.1, true, 9),
                                     record("a", 0.1, false, 3000)};
  const std::vector<std::size_t> grid{5, 10};
  const auto cdf = compute_cdf(rs, grid);
  EXPECT_EQ(cdf.queries, grid);
  EXPECT_DOUBLE_EQ(cdf.fraction[0], 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(cdf.fraction[1], 2.0 / 3.0);
}

TEST(Cdf, AllFailuresAndAllSuccesses) {
  const std::vector<std::size_t> grid{1, 100, 1000};
  const std::vector<AttackRecord> fails{record("a", 0.1, false, 5), record("a", 0.1, false, 50)};
  for (double f : compute_cdf(fails, grid).fraction) EXPECT_EQ(f, 0.0);
  const std::vector<AttackRecord> wins{record("a", 0.1, true, 1), record("a", 0.1, true, 1000)};
  EXPECT_EQ(compute_cdf(wins, grid).fraction, (std::vector<double>{0.5, 0.5, 1.0}));
}

TEST(Cdf, Contracts) {
  const std::vector<std::size_t> grid{1, 2};
  EXPECT_THROW(compute_cdf({}, grid), ContractViolation);
  const std::vector<AttackRecord> rs{record("a", 0.1, true, 1)};
  const std::vector<std::size_t> bad{2, 2};
  EXPECT_THROW(compute_cdf(rs, bad), ContractViolation);
  EXPECT_EQ(uniform_grid(100, 30), (std::vector<std::size_t>{30, 60, 90, 100}));
  EXPECT_EQ(uniform_grid(100, 50), (std::vector<std::size_t>{50, 100}));
}

TEST(Cdf, CurvesCsvSvgJsonl) {
  std::vector<AttackRecord> rs;
  std::mt19937_64 rng(40);
  std::uniform_int_distribution<std::size_t> q(1, 300);
  for (const char* a : {"bobyqa", "square", "parsimonious"}) {
    for (double eps : {0.05, 0.1}) {
      for (int k = 0; k < 7; ++k) rs.push_back(record(a, eps, k % 3 != 0, q(rng)));
    }
  }
  const auto grid = uniform_grid(300, 25);
  const auto curves = compute_curves(rs, grid);
  ASSERT_EQ(curves.size(), 6u);
  EXPECT_EQ(curves[0].attack, "bobyqa");
  EXPECT_EQ(curves[0].epsilon, 0.05);

  EXPECT_EQ(parse_cdf_csv(format_cdf_csv(curves)), curves);

  const auto svg = render_svg(curves, 0.1);
  std::size_t polylines = 0;
  for (auto p = svg.find("<polyline class=\"cdf\""); p != std::string::npos;
       p = svg.find("<polyline class=\"cdf\"", p + 1)) {
    ++polylines;
  }
  EXPECT_EQ(polylines, 3u);
  for (const char* a : {"bobyqa", "square", "parsimonious"}) {
    EXPECT_NE(svg.find(std::string("data-attack=\"") + a + "\""), std::string::npos);
  }

  const auto jsonl = format_records_jsonl(rs);
  EXPECT_EQ(static_cast<std::size_t>(std::count(jsonl.begin(), jsonl.end(), '\n')), rs.size());
  const auto parsed = parse_records_jsonl(jsonl);
  EXPECT_EQ(format_records_jsonl(parsed), jsonl);
  EXPECT_THROW(parse_records_jsonl(jsonl + "{broken\n"), ParseError);
}

TEST(Cdf, EmitOutputs) {
  const auto dir = temp_dir("emit");
  const std::vector<AttackRecord> rs{record("bobyqa", 0.05, true, 10), record("square", 0.05, false, 50),
                                     record("bobyqa", 0.1, true, 20)};
  const auto curves = compute_curves(rs, uniform_grid(50, 10));
  const auto files = emit_outputs(rs, curves, dir);
  EXPECT_TRUE(std::filesystem::exists(files.records));
  EXPECT_TRUE(std::filesystem::exists(files.cdf));
  ASSERT_EQ(files.plots.size(), 2u);
  for (const auto& p : files.plots) EXPECT_TRUE(std::filesystem::exists(p));
  EXPECT_EQ(parse_cdf_csv(read_text_file(files.cdf)), curves);
  std::filesystem::remove_all(dir);
}

TEST(Records, NonFiniteLossIsNull) {
  auto r = record("bobyqa", 0.05, false, 10);
  r.final_loss = std::numeric_limits<double>::infinity();
  const auto j = to_json(r);
  EXPECT_TRUE(j.at("final_loss").is_null());
  EXPECT_TRUE(std::isinf(record_from_json(nlohmann::json::parse(j.dump())).final_loss));
}
