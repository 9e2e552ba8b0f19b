#include "pcsimp/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdlib>
#include <iostream>
#include <thread>
#include <tuple>

#include "pcsimp/checkpoint.hpp"
#include "pcsimp/descriptors.hpp"
#include "pcsimp/error.hpp"
#include "pcsimp/model.hpp"
#include "pcsimp/qem.hpp"
#include "pcsimp/sampling.hpp"
#include "pcsimp/synth.hpp"
#include "pcsimp/text.hpp"
#include "pcsimp/trainer.hpp"

namespace pcs {

Method parse_method(std::string_view name) {
  if (name == "random" || name == "uniform") return Method::Random;
  if (name == "fps") return Method::Fps;
  if (name == "tcp") return Method::Tcp;
  if (name == "qem") return Method::Qem;
  if (name == "learned") return Method::Learned;
  throw Error(ErrorCode::BadParams, "unknown method '" + std::string(name) + "'");
}

std::string_view method_name(Method method) {
  switch (method) {
    case Method::Random: return "random";
    case Method::Fps: return "fps";
    case Method::Tcp: return "tcp";
    case Method::Qem: return "qem";
    case Method::Learned: return "learned";
  }
  return "?";
}

void RunConfig::validate() const {
  if (ratio.has_value() == target_count.has_value())
    throw Error(ErrorCode::BadParams, "give exactly one of ratio and target count");
  if (ratio && !(*ratio > 0.0 && *ratio <= 1.0)) throw Error(ErrorCode::BadRatio, "ratio must lie in (0, 1]");
  if (target_count && *target_count == 0) throw Error(ErrorCode::BadParams, "target count must be positive");
  if (method == Method::Learned && checkpoint_path.empty())
    throw Error(ErrorCode::BadParams, "the learned method needs a checkpoint");
  if (k_descriptor == 0) throw Error(ErrorCode::BadParams, "descriptor k must be positive");
}

std::size_t RunConfig::resolve_target(std::size_t n) const {
  if (ratio) return pcs::target_count(n, *ratio);
  if (*target_count > n) throw Error(ErrorCode::BadParams, "target count exceeds the input size");
  return *target_count;
}

Geometry simplify_geometry(const Geometry& input, const RunConfig& config, const NetworkParameters* params) {
  config.validate();
  const auto& pts = input.positions;
  if (config.method == Method::Qem) {
    if (!input.is_mesh()) throw Error(ErrorCode::NotAMesh, "QEM needs a mesh input");
    const QemResult r = qem_simplify(input.mesh(), config.resolve_target(pts.size()));
    return Geometry{r.mesh.positions, {}, r.mesh.faces};
  }
  if (pts.empty()) throw Error(ErrorCode::EmptyCloud, "input has no points");
  const std::size_t m = config.resolve_target(pts.size());
  Geometry out;
  switch (config.method) {
    case Method::Random: out.positions = random_sample(pts, m, config.seed).positions; break;
    case Method::Fps: out.positions = fps_sample(pts, m).positions; break;
    case Method::Tcp: {
      const auto d = compute_descriptors(pts, config.k_descriptor);
      out.positions = tcp_sample(pts, d.mean_curvature, m).positions;
      break;
    }
    case Method::Learned: {
      if (!params) throw Error(ErrorCode::BadParams, "the learned method needs parameters");
      out.positions = simplify_learned(pts, m, *params).positions;
      break;
    }
    case Method::Qem: break;
  }
  return out;
}

std::size_t bench_threads() {
  std::size_t n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("SIMPLIFY_PC_THREADS")) {
    if (const auto cap = parse_integer(env); cap && *cap > 0) n = std::min(n, static_cast<std::size_t>(*cap));
  }
  return n;
}

std::vector<BenchRow> run_bench(const std::vector<BenchInput>& inputs, const BenchConfig& config) {
  struct Cell {
    std::size_t input;
    Method method;
    double ratio;
  };
  std::vector<Cell> cells;
  for (std::size_t i = 0; i < inputs.size(); ++i)
    for (Method m : config.methods) {
      if (m == Method::Qem && !inputs[i].geometry.is_mesh()) continue;
      for (double r : config.ratios) cells.push_back({i, m, r});
    }

  // Reference descriptors are shared by every cell of an input.
  std::vector<PointCloud> references(inputs.size());
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    references[i] = PointCloud(inputs[i].geometry.positions);
    references[i].descriptors =
        compute_descriptors(references[i].positions, config.metrics.descriptor_k, config.metrics.bandwidth);
  }

  std::vector<BenchRow> rows(cells.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t c = next++; c < cells.size(); c = next++) {
      try {
        const Cell& cell = cells[c];
        RunConfig run;
        run.method = cell.method;
        run.ratio = cell.ratio;
        run.seed = config.seed;
        run.k_descriptor = config.metrics.descriptor_k;
        run.checkpoint_path = "<memory>";
        const auto t0 = std::chrono::steady_clock::now();
        const Geometry out = simplify_geometry(inputs[cell.input].geometry, run, config.params);
        const auto t1 = std::chrono::steady_clock::now();
        BenchRow& row = rows[c];
        row.shape = inputs[cell.input].name;
        row.method = std::string(method_name(cell.method));
        row.ratio = cell.ratio;
        row.n_in = inputs[cell.input].geometry.positions.size();
        row.n_out = out.positions.size();
        row.metrics = evaluate_pair(references[cell.input], PointCloud(out.positions), config.metrics);
        if (config.timing) row.metrics.wall_time_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
      } catch (...) {
        const std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  const std::size_t threads = std::clamp<std::size_t>(config.threads, 1, std::max<std::size_t>(cells.size(), 1));
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);

  std::stable_sort(rows.begin(), rows.end(), [](const BenchRow& a, const BenchRow& b) {
    return std::tie(a.shape, a.method, a.ratio) < std::tie(b.shape, b.method, b.ratio);
  });
  return rows;
}

std::string bench_csv_header() { return "shape,method,ratio,n_in,n_out," + metrics_csv_header(); }

std::string bench_csv(const std::vector<BenchRow>& rows) {
  std::string out = bench_csv_header() + "\n";
  for (const BenchRow& r : rows) {
    out += r.shape + ',' + r.method + ',' + format_double(r.ratio) + ',' + std::to_string(r.n_in) + ',' +
           std::to_string(r.n_out) + ',' + metrics_csv_row(r.metrics) + '\n';
  }
  return out;
}

namespace {

bool is_geometry_file(const std::filesystem::path& p) {
  try {
    format_from_path(p);
    return std::filesystem::is_regular_file(p);
  } catch (const Error&) {
    return false;
  }
}

// Files given directly plus supported files inside given directories, sorted per directory.
std::vector<std::filesystem::path> expand_inputs(const std::vector<std::string>& items) {
  std::vector<std::filesystem::path> out;
  for (const auto& item : items) {
    const std::filesystem::path p(item);
    if (std::filesystem::is_directory(p)) {
      std::vector<std::filesystem::path> found;
      for (const auto& e : std::filesystem::directory_iterator(p))
        if (is_geometry_file(e.path())) found.push_back(e.path());
      std::sort(found.begin(), found.end());
      out.insert(out.end(), found.begin(), found.end());
    } else if (std::filesystem::exists(p)) {
      out.push_back(p);
    } else {
      throw Error(ErrorCode::IoFailure, "no such file or directory: " + item);
    }
  }
  return out;
}

std::vector<double> parse_ratio_list(const std::vector<double>& ratios) {
  for (double r : ratios)
    if (!(r > 0.0 && r <= 1.0)) throw Error(ErrorCode::BadRatio, "ratio " + format_double(r) + " outside (0, 1]");
  return ratios;
}

void write_output(const std::filesystem::path& path, const Geometry& g, const std::optional<std::string>& format) {
  const FileFormat f = format ? parse_format(*format) : format_from_path(path);
  write_file(path, write_geometry(g, f));
}

struct SimplifyArgs {
  std::string method = "fps";
  std::optional<double> ratio;
  std::optional<std::size_t> target;
  std::string input, output, checkpoint;
  std::optional<std::string> format;
  std::size_t k = 20;
  std::uint64_t seed = 0;
};

struct TrainArgs {
  std::vector<std::string> dataset;
  std::size_t synthetic = 0;
  std::size_t points = 2000;
  std::string checkpoint, loss_log;
  std::size_t epochs = 150;
  double lr = 1e-3;
  double lr_decay = 0.99;
  std::string decay_mode = "lr";
  double tau = 10.0;
  double lambda = 1.0;
  std::string weight_norm = "zscore";
  std::string tau_combine = "multiply";
  std::vector<double> ratios{0.05, 0.1, 0.2, 0.3, 0.5, 0.8};
  std::size_t k = 20;
  std::size_t latent = 64;
  std::uint64_t seed = 0;
  bool fixed_start = false;
  bool quiet = false;
};

struct EvalArgs {
  std::string reference, simplified;
  std::size_t k = 20;
  bool squared_covariance = false;
  std::string format = "csv";
  bool no_header = false;
};

struct BenchArgs {
  std::vector<std::string> inputs;
  std::vector<std::string> shapes;
  std::size_t points = 2000;
  std::vector<std::string> methods{"fps", "random", "tcp"};
  std::vector<double> ratios{0.2, 0.1, 0.05};
  std::string checkpoint, output;
  std::size_t k = 20;
  std::uint64_t seed = 0;
  bool no_timing = false;
};

struct CurvatureArgs {
  std::string input, output;
  std::size_t k = 20;
};

struct NoiseArgs {
  std::string input, output;
  double sigma = 0.01;
  bool absolute = false;
  std::uint64_t seed = 0;
};

struct SynthArgs {
  std::string shape = "bumpy_sphere";
  std::size_t points = 2000;
  std::uint64_t seed = 0;
  std::string output;
  bool mesh = false;
};

int run_simplify(const SimplifyArgs& a, std::ostream& out) {
  RunConfig run;
  run.method = parse_method(a.method);
  run.ratio = a.ratio;
  run.target_count = a.target;
  run.k_descriptor = a.k;
  run.seed = a.seed;
  run.checkpoint_path = a.checkpoint;
  run.input_path = a.input;
  run.output_path = a.output;
  run.validate();
  const Geometry input = parse_geometry(run.input_path);
  std::optional<NetworkParameters> params;
  if (run.method == Method::Learned) params = load_checkpoint(run.checkpoint_path);
  const Geometry result = simplify_geometry(input, run, params ? &*params : nullptr);
  write_output(run.output_path, result, a.format);
  out << "wrote " << result.positions.size() << " points to " << a.output << "\n";
  return 0;
}

int run_train(const TrainArgs& a, std::ostream& out) {
  TrainConfig config;
  config.epochs = a.epochs;
  config.learning_rate = a.lr;
  config.lr_decay_per_epoch = a.lr_decay;
  if (a.decay_mode == "lr") {
    config.decay_mode = TrainConfig::DecayMode::LearningRate;
  } else if (a.decay_mode == "l2") {
    config.decay_mode = TrainConfig::DecayMode::L2;
  } else {
    throw Error(ErrorCode::BadParams, "decay mode must be lr or l2");
  }
  config.seed = a.seed;
  config.ratio_schedule = parse_ratio_list(a.ratios);
  config.random_start = !a.fixed_start;

  LossConfig loss;
  loss.tau = a.tau;
  loss.lambda_curv = a.lambda;
  loss.descriptor_k = a.k;
  if (a.weight_norm == "zscore") {
    loss.weight_normalization = LossConfig::Normalization::ZScore;
  } else if (a.weight_norm == "minmax") {
    loss.weight_normalization = LossConfig::Normalization::MinMax;
  } else {
    throw Error(ErrorCode::BadParams, "weight normalization must be zscore or minmax");
  }
  if (a.tau_combine == "multiply") {
    loss.weight_combine = LossConfig::Combine::Multiply;
  } else if (a.tau_combine == "divide") {
    loss.weight_combine = LossConfig::Combine::Divide;
  } else {
    throw Error(ErrorCode::BadParams, "tau combine must be multiply or divide");
  }

  ModelConfig model;
  model.latent_dim = a.latent;
  model.descriptor_k = a.k;
  model.seed = a.seed;

  std::vector<PointCloud> dataset;
  for (const auto& path : expand_inputs(a.dataset)) dataset.push_back(parse_geometry(path).cloud());
  for (std::size_t i = 0; i < a.synthetic; ++i)
    dataset.push_back(synth_shape(ShapeKind::BumpySphere, a.points, a.seed + i).cloud);
  if (dataset.empty()) throw Error(ErrorCode::BadParams, "training needs --dataset or --synthetic");

  std::string log = loss_log_csv({});
  train(dataset, config, loss, model, [&](const EpochRecord& r, const NetworkParameters& p) {
    log += loss_log_row(r);
    if (!a.quiet) out << loss_log_row(r);
    save_checkpoint(a.checkpoint, p);
    if (!a.loss_log.empty()) write_file(a.loss_log, log);
  });
  return 0;
}

MetricsConfig metrics_config(std::size_t k, bool squared) {
  MetricsConfig m;
  m.descriptor_k = k;
  m.loss.descriptor_k = k;
  if (squared) m.sdm.covariance_form = SdmConfig::CovarianceForm::SquaredCovariance;
  return m;
}

int run_eval(const EvalArgs& a, std::ostream& out) {
  const MetricsConfig config = metrics_config(a.k, a.squared_covariance);
  const PointCloud ref = parse_geometry(std::filesystem::path(a.reference)).cloud();
  const PointCloud simp = parse_geometry(std::filesystem::path(a.simplified)).cloud();
  const MetricsReport report = evaluate_pair(ref, simp, config);
  if (a.format == "text") {
    out << metrics_record(report);
  } else if (a.format == "csv") {
    if (!a.no_header) out << metrics_csv_header() << "\n";
    out << metrics_csv_row(report) << "\n";
  } else {
    throw Error(ErrorCode::BadParams, "eval format must be csv or text");
  }
  return 0;
}

int run_bench_command(const BenchArgs& a, std::ostream& out) {
  BenchConfig config;
  for (const auto& m : a.methods) config.methods.push_back(parse_method(m));
  config.ratios = parse_ratio_list(a.ratios);
  config.metrics = metrics_config(a.k, false);
  config.seed = a.seed;
  config.threads = bench_threads();
  config.timing = !a.no_timing;

  std::optional<NetworkParameters> params;
  if (std::find(config.methods.begin(), config.methods.end(), Method::Learned) != config.methods.end()) {
    if (a.checkpoint.empty()) throw Error(ErrorCode::BadParams, "the learned method needs --checkpoint");
    params = load_checkpoint(a.checkpoint);
    config.params = &*params;
  }

  std::vector<BenchInput> inputs;
  for (const auto& path : expand_inputs(a.inputs)) inputs.push_back({path.stem().string(), parse_geometry(path)});
  for (const auto& name : a.shapes) {
    const ShapeKind kind = parse_shape_kind(name);
    SynthShape s = synth_shape(kind, a.points, a.seed);
    Geometry g{s.cloud.positions, {}, {}};
    if (kind == ShapeKind::Icosphere) g.faces = s.mesh->faces;
    inputs.push_back({name, std::move(g)});
  }
  if (inputs.empty()) throw Error(ErrorCode::BadParams, "bench needs --inputs or --shapes");

  const std::string csv = bench_csv(run_bench(inputs, config));
  if (a.output.empty()) {
    out << csv;
  } else {
    write_file(a.output, csv);
  }
  return 0;
}

int run_curvature(const CurvatureArgs& a, std::ostream& out) {
  if (format_from_path(a.output) != FileFormat::Ply)
    throw Error(ErrorCode::UnsupportedFormat, "curvature output must be a .ply file");
  const Geometry g = parse_geometry(std::filesystem::path(a.input));
  const SurfaceDescriptors d = compute_descriptors(g.positions, a.k);
  write_file(a.output, curvature_ply(g.positions, d.mean_curvature));
  out << "wrote " << g.positions.size() << " points to " << a.output << "\n";
  return 0;
}

int run_noise(const NoiseArgs& a, std::ostream& out) {
  const Geometry g = parse_geometry(std::filesystem::path(a.input));
  Geometry noisy = g;
  noisy.positions = add_noise(g.cloud(), a.sigma, a.seed, a.absolute).positions;
  noisy.normals.clear();
  write_output(a.output, noisy, std::nullopt);
  out << "wrote " << noisy.positions.size() << " points to " << a.output << "\n";
  return 0;
}

int run_synth(const SynthArgs& a, std::ostream& out) {
  const ShapeKind kind = parse_shape_kind(a.shape);
  const SynthShape s = synth_shape(kind, a.points, a.seed);
  Geometry g;
  if ((a.mesh || kind == ShapeKind::Icosphere) && s.mesh) {
    g.positions = s.mesh->positions;
    g.faces = s.mesh->faces;
  } else {
    g.positions = s.cloud.positions;
  }
  write_output(a.output, g, std::nullopt);
  out << "wrote " << g.positions.size() << " points to " << a.output << "\n";
  return 0;
}

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::BadRatio:
    case ErrorCode::BadParams: return 1;
    default: return 2;
  }
}

}  // namespace

int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Point cloud simplification toolkit", "pcsimp"};
  app.require_subcommand(1);

  SimplifyArgs sa;
  auto* simplify = app.add_subcommand("simplify", "Simplify a point cloud or mesh");
  simplify->add_option("--method,-m", sa.method, "random | fps | tcp | qem | learned")->capture_default_str();
  auto* ratio_opt = simplify->add_option("--ratio,-r", sa.ratio, "Output/input point ratio in (0, 1]");
  simplify->add_option("--target,-t", sa.target, "Output point count")->excludes(ratio_opt);
  simplify->add_option("--input,-i", sa.input, "Input file")->required();
  simplify->add_option("--output,-o", sa.output, "Output file")->required();
  simplify->add_option("--format", sa.format, "ply | obj | off | xyz (default: output extension)");
  simplify->add_option("--checkpoint,-c", sa.checkpoint, "Checkpoint for the learned method");
  simplify->add_option("--k", sa.k, "Descriptor neighborhood size")->capture_default_str();
  simplify->add_option("--seed", sa.seed, "Random seed")->capture_default_str();

  TrainArgs ta;
  auto* train_cmd = app.add_subcommand("train", "Train the learned simplifier");
  train_cmd->add_option("--dataset,-d", ta.dataset, "Training files or directories");
  train_cmd->add_option("--synthetic", ta.synthetic, "Number of generated bumpy spheres to add");
  train_cmd->add_option("--points", ta.points, "Points per generated cloud")->capture_default_str();
  train_cmd->add_option("--checkpoint,-c", ta.checkpoint, "Checkpoint output path")->required();
  train_cmd->add_option("--loss-log", ta.loss_log, "Per-epoch loss CSV");
  train_cmd->add_option("--epochs", ta.epochs)->capture_default_str();
  train_cmd->add_option("--lr", ta.lr, "Initial learning rate")->capture_default_str();
  train_cmd->add_option("--lr-decay", ta.lr_decay, "Per-epoch decay factor")->capture_default_str();
  train_cmd->add_option("--decay-mode", ta.decay_mode, "lr (multiplicative) | l2 (penalty)")->capture_default_str();
  train_cmd->add_option("--tau", ta.tau)->capture_default_str();
  train_cmd->add_option("--lambda", ta.lambda, "Curvature error weight")->capture_default_str();
  train_cmd->add_option("--weight-norm", ta.weight_norm, "zscore | minmax")->capture_default_str();
  train_cmd->add_option("--tau-combine", ta.tau_combine, "multiply | divide")->capture_default_str();
  train_cmd->add_option("--ratios", ta.ratios, "Simplification ratios drawn per step")->delimiter(',');
  train_cmd->add_option("--k", ta.k, "Descriptor neighborhood size")->capture_default_str();
  train_cmd->add_option("--latent-dim", ta.latent)->capture_default_str();
  train_cmd->add_option("--seed", ta.seed)->capture_default_str();
  train_cmd->add_flag("--fixed-start", ta.fixed_start, "Always start latent FPS at point 0");
  train_cmd->add_flag("--quiet,-q", ta.quiet);

  EvalArgs ea;
  auto* eval = app.add_subcommand("eval", "Compare a simplified cloud against its reference");
  eval->add_option("reference", ea.reference)->required();
  eval->add_option("simplified", ea.simplified)->required();
  eval->add_option("--k", ea.k, "Descriptor neighborhood size")->capture_default_str();
  eval->add_flag("--sdm-squared-covariance", ea.squared_covariance, "Square the SDM covariance term");
  eval->add_option("--format", ea.format, "csv | text")->capture_default_str();
  eval->add_flag("--no-header", ea.no_header);

  BenchArgs ba;
  auto* bench = app.add_subcommand("bench", "Evaluate methods x ratios x inputs");
  bench->add_option("--inputs", ba.inputs, "Input files or directories");
  bench->add_option("--shapes", ba.shapes, "Generated shapes")->delimiter(',');
  bench->add_option("--points", ba.points, "Points per generated shape")->capture_default_str();
  bench->add_option("--methods", ba.methods)->delimiter(',');
  bench->add_option("--ratios", ba.ratios)->delimiter(',');
  bench->add_option("--checkpoint,-c", ba.checkpoint);
  bench->add_option("--output,-o", ba.output, "CSV path (default: stdout)");
  bench->add_option("--k", ba.k)->capture_default_str();
  bench->add_option("--seed", ba.seed)->capture_default_str();
  bench->add_flag("--no-timing", ba.no_timing, "Report wall_time_ms as 0 for reproducible output");

  CurvatureArgs ca;
  auto* curv = app.add_subcommand("curvature", "Write mean curvature as PLY vertex colors");
  curv->add_option("input", ca.input)->required();
  curv->add_option("output", ca.output)->required();
  curv->add_option("--k", ca.k)->capture_default_str();

  NoiseArgs na;
  auto* noise = app.add_subcommand("noise", "Add Gaussian noise to a cloud");
  noise->add_option("input", na.input)->required();
  noise->add_option("output", na.output)->required();
  noise->add_option("--sigma", na.sigma, "Std as a fraction of the bbox diagonal")->capture_default_str();
  noise->add_flag("--absolute-sigma", na.absolute, "Interpret --sigma as an absolute std");
  noise->add_option("--seed", na.seed)->capture_default_str();

  SynthArgs ya;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic shape");
  synth->add_option("--shape", ya.shape, "sphere | bumpy_sphere | cube | torus | plane | icosphere")
      ->capture_default_str();
  synth->add_option("--points", ya.points)->capture_default_str();
  synth->add_option("--seed", ya.seed)->capture_default_str();
  synth->add_option("--output,-o", ya.output)->required();
  synth->add_flag("--mesh", ya.mesh, "Write the mesh when the shape has one");

  std::vector<const char*> argv{"pcsimp"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return 1;
  }

  try {
    if (*simplify) return run_simplify(sa, out);
    if (*train_cmd) return run_train(ta, out);
    if (*eval) return run_eval(ea, out);
    if (*bench) return run_bench_command(ba, out);
    if (*curv) return run_curvature(ca, out);
    if (*noise) return run_noise(na, out);
    if (*synth) return run_synth(ya, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}

int cli_main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return cli_main(args, std::cout, std::cerr);
}

}  // namespace pcs
