#include "commands.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "CLI11.hpp"
#include "peanoseg/error.hpp"
#include "peanoseg/imaging.hpp"
#include "peanoseg/pipeline.hpp"
#include "peanoseg/shapes.hpp"

namespace peanoseg::cli {

namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument:
    case ErrorCode::kCapacity:
      return kExitConfig;
    case ErrorCode::kBadFormat:
    case ErrorCode::kBadShape:
    case ErrorCode::kTooManyLevels:
    case ErrorCode::kIo:
      return kExitIo;
    default:
      return kExitModel;
  }
}

[[noreturn]] void config_error(const std::string& what) {
  throw Error(ErrorCode::kInvalidArgument, what);
}

struct SemFlags {
  std::size_t iters = 100;
  double tol = 1e-4;
  bool approx = false;

  SemConfig config(std::uint64_t seed) const {
    SemConfig c;
    c.max_iters = iters;
    c.tol = tol;
    c.seed = seed;
    c.approx = approx;
    c.validate();
    return c;
  }
};

void add_sem_flags(CLI::App* app, SemFlags& flags) {
  app->add_option("--sem-iters", flags.iters, "Maximum SEM iterations")->capture_default_str();
  app->add_option("--sem-tol", flags.tol, "Stop when no parameter moves more than this")
      ->capture_default_str();
  app->add_flag("--approx", flags.approx, "Sample from the plain-scan posterior during SEM");
}

Method require_method(const std::string& name) {
  auto m = parse_method(name);
  if (!m) config_error("unknown method '" + name + "' (hmc-ps, hmc-cps, hemc-cps)");
  return *m;
}

unsigned worker_count(std::size_t jobs) {
  unsigned n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("PEANOSEG_THREADS")) {
    const long cap = std::strtol(env, nullptr, 10);
    if (cap >= 1) n = std::min<unsigned>(n, static_cast<unsigned>(cap));
  }
  return static_cast<unsigned>(std::min<std::size_t>(n, std::max<std::size_t>(jobs, 1)));
}

std::string join(const std::vector<double>& v) {
  std::ostringstream s;
  s << std::setprecision(10);
  for (std::size_t i = 0; i < v.size(); ++i) s << (i ? "," : "") << v[i];
  return s.str();
}

std::string join_matrix(const Matrix& m) {
  return join(std::vector<double>(m.values().begin(), m.values().end()));
}

void append_csv_row(const fs::path& path, const std::string& row) {
  const bool fresh = !fs::exists(path) || fs::file_size(path) == 0;
  std::ofstream out(path, std::ios::app);
  if (!out) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  if (fresh) out << "image,method,seed,error,iters,seconds,stddev\n";
  out << row << '\n';
  if (!out) throw Error(ErrorCode::kIo, "failed writing " + path.string());
}

// ---------------------------------------------------------------- scan

int cmd_scan(unsigned order, std::ostream& out) {
  const ScanLayout layout = build_scan(order);
  const std::size_t side = layout.shape().side;
  for (std::uint32_t r = 0; r < side; ++r) {
    for (std::uint32_t c = 0; c < side; ++c) {
      out << (c ? " " : "") << layout.rank({r, c});
    }
    out << '\n';
  }
  return kExitOk;
}

// ---------------------------------------------------------------- truth

int cmd_truth(const std::string& shape, unsigned order, std::uint64_t seed, const fs::path& out_path,
              std::ostream& out) {
  const LabelImage img = shapes::by_name(shape, order, seed);
  save_segmentation(img, out_path);
  out << "wrote " << out_path.string() << " (" << shape << ", " << img.shape.side << "x"
      << img.shape.side << ")\n";
  return kExitOk;
}

// ---------------------------------------------------------------- synth

struct SynthFlags {
  fs::path truth;
  std::vector<double> means{0.0, 1.0};
  std::vector<double> vars{1.0, 1.0};
  std::uint64_t seed = 1;
  fs::path out;
};

int cmd_synth(const SynthFlags& f, std::ostream& out) {
  if (f.means.size() != f.vars.size()) config_error("--means and --vars differ in length");
  const LabelImage truth = load_labels(f.truth, f.means.size());
  const ObservedImage noisy = synth_noise(truth, f.means, f.vars, f.seed);
  save_observation(noisy, f.out);

  json meta = {{"truth", f.truth.string()}, {"means", f.means}, {"variances", f.vars},
               {"seed", f.seed}, {"side", truth.shape.side}, {"output", f.out.string()}};
  if (f.out.extension() != ".pfm") {
    const auto [lo, hi] = std::minmax_element(noisy.values.begin(), noisy.values.end());
    meta["pgm_mapping"] = {{"min", *lo}, {"max", *hi}};
  }
  fs::path sidecar = f.out;
  sidecar += ".json";
  std::ofstream side(sidecar);
  if (!side) throw Error(ErrorCode::kIo, "cannot write " + sidecar.string());
  side << meta.dump(2) << '\n';
  out << "wrote " << f.out.string() << " and " << sidecar.string() << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------- segment

struct SegmentFlags {
  fs::path input;
  std::string method;
  std::size_t classes = 2;
  std::uint64_t seed = 1;
  bool crop = false;
  fs::path out;
  fs::path csv;
  fs::path trace;
  SemFlags sem;
};

int cmd_segment(const SegmentFlags& f, std::ostream& out) {
  const Method method = require_method(f.method);
  if (f.classes < 1) config_error("--classes must be >= 1");
  if (fs::exists(f.out) && fs::exists(f.input) && fs::equivalent(f.out, f.input)) {
    config_error("--out would overwrite the input image");
  }
  const SemConfig config = f.sem.config(f.seed);
  const ObservedImage image = load_grayscale(f.input, f.crop);
  const ScanGeometry geometry = ScanGeometry::of_order(image.shape.order);

  const SegmentationRun run = segment(image, geometry, method, f.classes, config);
  save_segmentation(run.labels, f.out);

  json report = {{"image", f.input.string()},  {"method", to_string(method)},
                 {"classes", f.classes},       {"seed", f.seed},
                 {"iterations", run.iterations}, {"converged", run.converged},
                 {"seconds", run.seconds},     {"output", f.out.string()}};
  auto put_params = [&](const auto& p) {
    report["means"] = p.means;
    report["variances"] = p.variances;
    report["joint_h"] = join_matrix(p.joint_h);
    report["joint_v"] = join_matrix(p.joint_v);
  };
  if (run.hmc) put_params(*run.hmc);
  if (run.evidential) put_params(*run.evidential);
  out << report.dump(2) << '\n';

  if (!f.csv.empty()) {
    std::ostringstream row;
    row << f.input.stem().string() << ',' << to_string(method) << ',' << f.seed << ",,"
        << run.iterations << ',' << std::setprecision(6) << run.seconds << ',';
    append_csv_row(f.csv, row.str());
  }
  if (!f.trace.empty()) {
    std::ofstream trace_out(f.trace);
    if (!trace_out) throw Error(ErrorCode::kIo, "cannot write " + f.trace.string());
    if (run.hmc) write_trace_csv(trace_out, std::span<const HmcParams>(run.hmc_trace));
    if (run.evidential) write_trace_csv(trace_out, std::span<const EvidentialParams>(run.evidential_trace));
  }
  return kExitOk;
}

// ---------------------------------------------------------------- eval

// Loads a label map without knowing K in advance; classes shrink to the
// number of levels present.
LabelImage load_any_labels(const fs::path& path) {
  LabelImage img = load_labels(path, kMaxScoredClasses);
  img.classes = *std::max_element(img.labels.begin(), img.labels.end());
  return img;
}

int cmd_eval(const fs::path& truth_path, const fs::path& pred_path, std::ostream& out) {
  LabelImage truth = load_any_labels(truth_path);
  LabelImage pred = load_any_labels(pred_path);
  const std::size_t k = std::max(truth.classes, pred.classes);
  truth.classes = pred.classes = k;
  out << std::fixed << std::setprecision(4) << error_rate(truth, pred) << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------- bench

struct BenchFlags {
  fs::path truth;
  std::string shape;
  unsigned order = 7;
  std::vector<std::string> methods{"hmc-ps", "hmc-cps", "hemc-cps"};
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  std::vector<double> means{0.0, 1.0};
  std::vector<double> vars{1.0, 1.0};
  fs::path csv;
  SemFlags sem;
};

struct BenchCell {
  Method method;
  std::uint64_t seed;
  double error = 0.0;
  std::size_t iters = 0;
  double seconds = 0.0;
};

int cmd_bench(const BenchFlags& f, std::ostream& out) {
  if (f.truth.empty() == f.shape.empty()) config_error("give exactly one of --truth or --shape");
  if (f.means.size() != f.vars.size()) config_error("--means and --vars differ in length");
  if (f.csv.empty()) config_error("--csv is required");
  std::vector<Method> methods;
  for (const auto& m : f.methods) methods.push_back(require_method(m));
  if (f.seeds.empty()) config_error("--seeds must list at least one seed");

  const std::size_t classes = f.means.size();
  LabelImage truth = f.truth.empty() ? shapes::by_name(f.shape, f.order) : load_labels(f.truth, classes);
  truth.classes = classes;
  const std::string image_name = f.truth.empty() ? f.shape : f.truth.stem().string();
  const ScanGeometry geometry = ScanGeometry::of_order(truth.shape.order);
  for (std::uint64_t seed : f.seeds) f.sem.config(seed);

  std::vector<BenchCell> cells;
  for (Method m : methods) {
    for (std::uint64_t s : f.seeds) cells.push_back({m, s});
  }

  // Each cell is independent and seeded, so workers only share the index.
  std::atomic<std::size_t> next{0};
  std::mutex failure_mutex;
  std::exception_ptr failure;
  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < cells.size();) {
      try {
        BenchCell& cell = cells[i];
        const ObservedImage noisy = synth_noise(truth, f.means, f.vars, cell.seed);
        const SegmentationRun run = segment(noisy, geometry, cell.method, classes, f.sem.config(cell.seed));
        cell.error = error_rate(truth, run.labels);
        cell.iters = run.iterations;
        cell.seconds = run.seconds;
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  const unsigned workers = worker_count(cells.size());
  for (unsigned t = 1; t < workers; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);

  std::ofstream csv(f.csv);
  if (!csv) throw Error(ErrorCode::kIo, "cannot write " + f.csv.string());
  csv << "image,method,seed,error,iters,seconds,stddev\n";
  csv << std::setprecision(6);
  for (const auto& c : cells) {
    csv << image_name << ',' << to_string(c.method) << ',' << c.seed << ',' << c.error << ','
        << c.iters << ',' << c.seconds << ",\n";
  }
  out << std::left << std::setw(10) << "method" << std::setw(12) << "mean" << "stddev\n";
  for (Method m : methods) {
    double sum = 0.0, sq = 0.0, iters = 0.0, secs = 0.0;
    std::size_t n = 0;
    for (const auto& c : cells) {
      if (c.method != m) continue;
      sum += c.error;
      sq += c.error * c.error;
      iters += static_cast<double>(c.iters);
      secs += c.seconds;
      ++n;
    }
    const double mean = sum / static_cast<double>(n);
    const double var = n > 1 ? std::max(0.0, (sq - static_cast<double>(n) * mean * mean) /
                                                 static_cast<double>(n - 1))
                             : 0.0;
    const double sd = std::sqrt(var);
    csv << image_name << ',' << to_string(m) << ",mean," << mean << ','
        << iters / static_cast<double>(n) << ',' << secs / static_cast<double>(n) << ',' << sd
        << '\n';
    out << std::setw(10) << to_string(m) << std::setw(12) << std::fixed << std::setprecision(4)
        << mean << sd << '\n';
  }
  if (!csv) throw Error(ErrorCode::kIo, "failed writing " + f.csv.string());
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Unsupervised image segmentation with hidden Markov chains on a Peano scan", "peanoseg"};
  app.require_subcommand(1);

  unsigned scan_order = 2;
  auto* scan = app.add_subcommand("scan", "Print the rank grid of the Peano scan");
  scan->add_option("--order", scan_order, "Grid order k (side 2^k)")->capture_default_str();

  std::string truth_shape;
  unsigned truth_order = 7;
  std::uint64_t truth_seed = 1;
  fs::path truth_out;
  auto* truth = app.add_subcommand("truth", "Write a synthetic two-class ground truth image");
  truth->add_option("--shape", truth_shape, "stripes | rings | walk | stripes-blocks")->required();
  truth->add_option("--order", truth_order, "Grid order k")->capture_default_str();
  truth->add_option("--seed", truth_seed, "Seed for random shapes")->capture_default_str();
  truth->add_option("--out", truth_out, "Output PGM")->required();

  SynthFlags synth_flags;
  auto* synth = app.add_subcommand("synth", "Add class-conditional Gaussian noise to a label image");
  synth->add_option("--truth", synth_flags.truth, "Ground-truth label PGM")->required();
  synth->add_option("--means", synth_flags.means, "Per-class means")->delimiter(',')->capture_default_str();
  synth->add_option("--vars", synth_flags.vars, "Per-class variances")->delimiter(',')->capture_default_str();
  synth->add_option("--seed", synth_flags.seed, "Noise seed")->capture_default_str();
  synth->add_option("--out", synth_flags.out, "Output image (.pfm keeps reals, else PGM)")->required();

  SegmentFlags seg_flags;
  auto* seg = app.add_subcommand("segment", "Estimate parameters with SEM and write the MPM segmentation");
  seg->add_option("input", seg_flags.input, "Observed image (PGM or PFM)")->required();
  seg->add_option("--method", seg_flags.method, "hmc-ps | hmc-cps | hemc-cps")->required();
  seg->add_option("--classes", seg_flags.classes, "Number of classes K")->capture_default_str();
  seg->add_option("--seed", seg_flags.seed, "SEM sampling seed")->capture_default_str();
  seg->add_flag("--crop", seg_flags.crop, "Center-crop to the largest power-of-two square");
  seg->add_option("--out", seg_flags.out, "Output label PGM")->required();
  seg->add_option("--csv", seg_flags.csv, "Append a report row to this CSV");
  seg->add_option("--trace", seg_flags.trace, "Write the SEM parameter trace as CSV");
  add_sem_flags(seg, seg_flags.sem);

  fs::path eval_truth, eval_pred;
  auto* eval = app.add_subcommand("eval", "Print the permutation-minimized error rate");
  eval->add_option("truth", eval_truth, "Ground-truth label PGM")->required();
  eval->add_option("prediction", eval_pred, "Predicted label PGM")->required();

  BenchFlags bench_flags;
  auto* bench = app.add_subcommand("bench", "Noise, segment and score over methods and seeds");
  bench->add_option("--truth", bench_flags.truth, "Ground-truth label PGM");
  bench->add_option("--shape", bench_flags.shape, "Built-in truth shape instead of --truth");
  bench->add_option("--order", bench_flags.order, "Grid order for --shape")->capture_default_str();
  bench->add_option("--method", bench_flags.methods, "Methods to compare")->delimiter(',')->capture_default_str();
  bench->add_option("--seed", bench_flags.seeds, "Seeds, one cell per method and seed")->delimiter(',')->capture_default_str();
  bench->add_option("--means", bench_flags.means, "Per-class noise means")->delimiter(',')->capture_default_str();
  bench->add_option("--vars", bench_flags.vars, "Per-class noise variances")->delimiter(',')->capture_default_str();
  bench->add_option("--csv", bench_flags.csv, "Output CSV")->required();
  add_sem_flags(bench, bench_flags.sem);

  std::vector<std::string> rest(args.rbegin(), args.rend() - 1);
  try {
    app.parse(rest);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*scan) return cmd_scan(scan_order, out);
    if (*truth) return cmd_truth(truth_shape, truth_order, truth_seed, truth_out, out);
    if (*synth) return cmd_synth(synth_flags, out);
    if (*seg) return cmd_segment(seg_flags, out);
    if (*eval) return cmd_eval(eval_truth, eval_pred, out);
    if (*bench) return cmd_bench(bench_flags, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitModel;
  }
  return kExitConfig;
}

}  // namespace peanoseg::cli
