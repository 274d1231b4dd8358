#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "dfoattack/attacks.hpp"
#include "dfoattack/oracle.hpp"
#include "dfoattack/tensor.hpp"

namespace dfoattack {

struct LabeledImage {
  std::string id;
  InputTensor image;
};

// Image sets are JSON:
//   {"shape": [h, w, c], "bounds": [l, u], "images": [{"id": "...", "data": [...]}, ...]}
// "bounds" is optional and defaults to [-0.5, 0.5].
std::vector<LabeledImage> parse_image_set(const std::string& text);
std::vector<LabeledImage> load_image_set(const std::filesystem::path& path);
void save_image_set(std::span<const LabeledImage> images, const std::filesystem::path& path);

enum class TargetProtocol { all_other_classes, random_class };
TargetProtocol parse_target_protocol(std::string_view name);
std::string_view to_string(TargetProtocol protocol) noexcept;

/// Where a campaign's oracles come from. Exactly one source is set.
struct OracleSource {
  std::filesystem::path model_path;
  std::string remote_url;
  std::vector<std::string> remote_command;
  std::chrono::milliseconds remote_timeout{30000};
  std::size_t remote_max_concurrency = 1;
  /// Class count of a remote oracle (local models report their own).
  std::size_t remote_num_classes = 0;
};

struct ExperimentConfig {
  std::vector<AttackSettings> attacks;
  OracleSource oracle;
  std::filesystem::path image_set;
  std::vector<double> epsilons;
  std::size_t max_queries = 3000;
  TargetProtocol protocol = TargetProtocol::all_other_classes;
  std::uint64_t seed = 0;
  std::size_t parallelism = 1;
  /// Restrict every attack to the k highest-variance pixels of its image.
  std::optional<std::size_t> mask_top_k;
  /// Records stream to output_dir/records.jsonl when set.
  std::filesystem::path output_dir;

  void validate() const;
};

struct AttackRecord {
  std::string image_id;
  ClassIndex original_class = 0;
  ClassIndex target_class = 0;
  double epsilon = 0.0;
  std::string attack;
  std::uint64_t seed = 0;
  bool success = false;
  std::size_t queries = 0;
  double final_loss = 0.0;
  /// "ok", "error" (oracle/runtime failure) or "inconsistent" (success not
  /// reproduced by the bookkeeping evaluation).
  std::string status = "ok";
  std::string error;
  /// Count of perturbed pixels outside the mask; present for masked runs.
  std::optional<std::size_t> off_mask_support;
  double wall_time_s = 0.0;
};

/// Field order is fixed so equal records serialise to equal bytes.
nlohmann::ordered_json to_json(const AttackRecord& record);
AttackRecord record_from_json(const nlohmann::json& j);

/// Per-attack seed from the campaign seed and the attack's identity only, so
/// scheduling order never changes results.
std::uint64_t derive_seed(std::uint64_t global_seed, std::string_view image_id, ClassIndex target,
                          std::string_view attack, double epsilon);

using OracleFactory = std::function<std::unique_ptr<QueryOracle>()>;

OracleFactory make_oracle_factory(const OracleSource& source, const Shape& shape);

/// Runs the whole campaign. Records come back (and are streamed) in task
/// order: image, then epsilon, then target, then attack.
std::vector<AttackRecord> run_experiment(const ExperimentConfig& config);

/// Same, with the oracle factory and images supplied directly. When `stream`
/// is non-null each record is written as one JSON line as soon as every
/// earlier task has finished.
std::vector<AttackRecord> run_experiment(const ExperimentConfig& config,
                                         const OracleFactory& factory,
                                         std::span<const LabeledImage> images,
                                         std::ostream* stream = nullptr);

}  // namespace dfoattack
