#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <bmf/bmf.hpp>

namespace bmf::cli {

inline constexpr const char* kVersion = "bmf 1.0.0";

enum exit_code : int { ok = 0, usage = 1, data = 2, diverged = 3 };

// Runs one command line (without the program name) and returns its exit
// code. Normal output goes to `out`, diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// Flat `key = value` file; '#' starts a comment. A JSON run manifest is
// accepted too, in which case its "config" object supplies the pairs.
std::vector<std::pair<std::string, std::string>> read_config(const std::string& path);

std::pair<std::size_t, std::size_t> parse_grid(const std::string& text);

struct VariantSummary {
  std::string variant;  // pmf | svd | bcsvd
  std::string grid;
  std::string mode;
  std::size_t workers = 1;
  std::size_t repeats = 0;
  std::vector<double> rmse;
  std::vector<double> secs_per_iter;
  std::vector<std::string> failures;
  Summary rmse_stats;
  Summary secs_stats;
};

struct BenchmarkOptions {
  std::string dataset_name;  // ml-100k, ml-1m, or a label for --input
  DatasetSpec data;
  std::vector<std::string> variants{"pmf", "svd", "bcsvd"};
  std::size_t repeats = 3;
  std::size_t row_blocks = 8;
  std::size_t col_blocks = 8;
  std::size_t workers = 8;
  double fraction = 0.8;
  std::uint64_t seed = 42;
  Hyperparams svd = Hyperparams::svd_defaults();
  Hyperparams pmf = Hyperparams::pmf_defaults();
  StopMetric stop_metric = StopMetric::test;
  EvalOptions eval;
};

struct BenchmarkResult {
  std::vector<VariantSummary> rows;
  std::string manifest_json;  // full manifest, also written to disk by the CLI
  bool any_failure = false;
};

// Seeded repeats r = 0..repeats-1 use split seed and init seed `seed + r`,
// so svd and bcsvd start from identical models on identical splits.
BenchmarkResult run_benchmark(const BenchmarkOptions& opts, std::ostream& log);

std::string summary_csv(const BenchmarkResult& result, const std::string& dataset);

}  // namespace bmf::cli
