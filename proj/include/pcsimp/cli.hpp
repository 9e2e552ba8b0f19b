#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "pcsimp/io.hpp"
#include "pcsimp/metrics.hpp"
#include "pcsimp/network.hpp"

namespace pcs {

enum class Method { Random, Fps, Tcp, Qem, Learned };

Method parse_method(std::string_view name);
std::string_view method_name(Method method);

struct RunConfig {
  Method method = Method::Fps;
  std::optional<double> ratio;
  std::optional<std::size_t> target_count;
  std::size_t k_descriptor = 20;
  std::uint64_t seed = 0;
  std::filesystem::path checkpoint_path;
  std::filesystem::path input_path;
  std::filesystem::path output_path;
  std::optional<FileFormat> output_format;

  /// Exactly one of ratio / target_count; learned needs a checkpoint path.
  void validate() const;
  std::size_t resolve_target(std::size_t n) const;
};

/// Runs one simplifier. `params` is required for Method::Learned. Subset methods
/// return a point set; QEM returns the decimated mesh.
Geometry simplify_geometry(const Geometry& input, const RunConfig& config,
                           const NetworkParameters* params = nullptr);

struct BenchInput {
  std::string name;
  Geometry geometry;
};

struct BenchRow {
  std::string shape;
  std::string method;
  double ratio = 0.0;
  std::size_t n_in = 0;
  std::size_t n_out = 0;
  MetricsReport metrics;
};

struct BenchConfig {
  std::vector<Method> methods;
  std::vector<double> ratios;
  MetricsConfig metrics;
  std::uint64_t seed = 0;
  const NetworkParameters* params = nullptr;
  std::size_t threads = 1;
  bool timing = true;
};

/// Every (input, method, ratio) cell; QEM cells are produced for mesh inputs only.
/// Rows come back sorted by (shape, method, ratio) whatever the thread count.
std::vector<BenchRow> run_bench(const std::vector<BenchInput>& inputs, const BenchConfig& config);

std::string bench_csv_header();
std::string bench_csv(const std::vector<BenchRow>& rows);

/// Worker count for `bench`: hardware concurrency capped by SIMPLIFY_PC_THREADS.
std::size_t bench_threads();

/// Command-line entry point. `args` excludes the program name.
/// Returns 0 on success, 1 on usage errors, 2 on data errors.
int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int cli_main(int argc, char** argv);

}  // namespace pcs
