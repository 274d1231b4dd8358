#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "dfoattack/experiment.hpp"

namespace dfoattack {

/// fraction[i] = #(success && queries <= grid[i]) / #records.
struct SuccessCDF {
  std::vector<std::size_t> queries;
  std::vector<double> fraction;

  bool operator==(const SuccessCDF&) const = default;
};

/// Throws ContractViolation for an empty record set or a non-increasing grid.
SuccessCDF compute_cdf(std::span<const AttackRecord> records, std::span<const std::size_t> grid);

/// step, 2*step, ..., up to and including max_queries.
std::vector<std::size_t> uniform_grid(std::size_t max_queries, std::size_t step);

struct CdfCurve {
  std::string attack;
  double epsilon = 0.0;
  SuccessCDF cdf;

  bool operator==(const CdfCurve&) const = default;
};

/// One curve per (attack, epsilon) pair present, sorted by attack then epsilon.
std::vector<CdfCurve> compute_curves(std::span<const AttackRecord> records,
                                     std::span<const std::size_t> grid);

std::string format_records_jsonl(std::span<const AttackRecord> records);
std::vector<AttackRecord> parse_records_jsonl(const std::string& text);
std::vector<AttackRecord> read_records(const std::filesystem::path& path);

/// CSV with header "queries,fraction,attack,epsilon"; reals use 17
/// significant digits so parsing recovers them exactly.
std::string format_cdf_csv(std::span<const CdfCurve> curves);
std::vector<CdfCurve> parse_cdf_csv(const std::string& text);

/// Line plot (queries vs cumulative fraction) of every curve at `epsilon`.
std::string render_svg(std::span<const CdfCurve> curves, double epsilon);

struct EmittedFiles {
  std::filesystem::path records;
  std::filesystem::path cdf;
  std::vector<std::filesystem::path> plots;
};

/// records.jsonl, cdf.csv and plot_eps_<epsilon>.svg per epsilon.
EmittedFiles emit_outputs(std::span<const AttackRecord> records, std::span<const CdfCurve> curves,
                          const std::filesystem::path& dir);

void write_text_file(const std::filesystem::path& path, const std::string& text);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace dfoattack
