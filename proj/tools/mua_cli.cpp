// mua: command-line front end for synthesis, segmentation, unmixing,
// evaluation and parameter sweeps.
//
// Exit status: 0 ok, 1 invalid input or parameters, 2 file I/O failure.

#include "mua/bench.hpp"
#include "mua/io.hpp"
#include "mua/metrics.hpp"
#include "mua/pipeline.hpp"
#include "mua/synth.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <limits>
#include <string>

namespace {

using namespace mua;

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitIo = 2;

// "k=v k=v" description tokens, as written by synth and unmix.
std::map<std::string, std::string> description_fields(const std::string& text) {
  std::map<std::string, std::string> out;
  for (const auto tok : detail::split(text, ' ')) {
    const auto eq = tok.find('=');
    if (eq == std::string_view::npos) continue;
    out.emplace(std::string(tok.substr(0, eq)), std::string(tok.substr(eq + 1)));
  }
  return out;
}

double field_double(const std::map<std::string, std::string>& f, const std::string& key) {
  const auto it = f.find(key);
  if (it == f.end()) return std::nan("");
  if (it->second == "inf") return std::numeric_limits<double>::infinity();
  return detail::parse_number<double>(it->second).value_or(std::nan(""));
}

struct SynthArgs {
  std::string dataset = "dc1";
  long bands = 224;
  long library_size = 240;
  double min_angle = 4.44;
  double snr = 20.0;
  std::uint64_t seed = 0;
  std::optional<std::uint64_t> noise_seed;
  std::string out_dir = ".";
};

int run_synth(const SynthArgs& a) {
  SceneSpec spec;
  spec.dataset = parse_dataset(a.dataset);
  spec.bands = a.bands;
  spec.library_size = a.library_size;
  spec.min_angle = a.min_angle;
  spec.snr_db = a.snr;
  spec.seed = a.seed;
  spec.noise_seed = a.noise_seed;
  const Scene scene = make_scene(spec);
  const fs::path dir(a.out_dir);
  const std::string desc = spec.describe();
  write_cube(dir / "cube.bin", scene.observed, spec.seed, desc);
  const HyperspectralImage truth(scene.observed.rows(), scene.observed.cols(),
                                 scene.truth.values());
  write_cube(dir / "truth.bin", truth, spec.seed, desc + " content=abundances");
  write_library(dir / "library.csv", scene.library);
  std::cout << "wrote " << (dir / "cube.bin").string() << ", truth.bin, library.csv ("
            << scene.observed.rows() << "x" << scene.observed.cols() << ", "
            << scene.library.count() << " signatures, realized SNR "
            << detail::format_double(realized_snr_db(scene.clean.data(), scene.observed.data())) << " dB)\n";
  return kExitOk;
}

struct SegmentArgs {
  std::string cube;
  std::string method = "slic";
  long region_size = 6;
  double compactness = std::nan("");
  long iters = 10;
  std::uint64_t seed = 0;
  std::string out;
};

int run_segment(const SegmentArgs& a) {
  const auto [header, image] = read_cube(a.cube);
  const SegmentMap seg = build_segments(image, parse_transform(a.method), a.region_size,
                                        a.compactness, a.iters, a.seed);
  write_segment_map(a.out, seg);
  std::cout << seg.segment_count() << " segments over " << seg.pixels() << " pixels\n";
  return kExitOk;
}

struct UnmixArgs {
  std::string cube;
  std::string library;
  std::string method = "mua";
  std::string transform = "slic";
  std::string segments;
  double lambda_c = std::nan("");
  double lambda = std::nan("");
  double beta = std::nan("");
  double mu = SolverConfig{}.mu;
  bool fixed_mu = false;
  long region_size = 6;
  double compactness = std::nan("");
  double tol = SolverConfig{}.tol;
  long max_iters = SolverConfig{}.max_iters;
  int threads = 1;
  std::uint64_t seed = 0;
  std::string out_dir = ".";
  bool maps = false;
};

int run_unmix(const UnmixArgs& a) {
  const auto [header, image] = read_cube(a.cube);
  const SpectralLibrary library = read_library(a.library);
  validate_pair(image, library);
  SolverConfig solver;
  solver.mu = a.mu;
  solver.adapt_mu = !a.fixed_mu;
  solver.tol = a.tol;
  solver.max_iters = a.max_iters;
  solver.threads = a.threads;

  const auto input = description_fields(header.description);
  std::string desc = "method=" + a.method;
  KeyValues report{{"method", a.method}};
  Matrix estimate;
  const auto add_solve = [&](const std::string& prefix, const SolveReport& r) {
    report.emplace_back(prefix + "iterations", std::to_string(r.iterations));
    report.emplace_back(prefix + "converged", r.converged ? "true" : "false");
    report.emplace_back(prefix + "primal_residual", detail::format_double(r.final_primal_residual));
    report.emplace_back(prefix + "dual_residual", detail::format_double(r.final_dual_residual));
    report.emplace_back(prefix + "final_mu", detail::format_double(r.final_mu));
    report.emplace_back(prefix + "objective", detail::format_double(r.objective));
    report.emplace_back(prefix + "runtime_s", detail::format_double(r.wall_time));
  };

  if (parse_method(a.method) == Method::Sunsal) {
    const SolveReport r = sunsal_unmix(image, library, a.lambda, solver);
    desc += " lambda=" + detail::format_double(a.lambda);
    report.emplace_back("lambda", detail::format_double(a.lambda));
    add_solve("", r);
    estimate = r.abundances.values();
  } else {
    MuaConfig cfg;
    cfg.lambda_c = a.lambda_c;
    cfg.lambda = a.lambda;
    cfg.beta = a.beta;
    cfg.transform = parse_transform(a.transform);
    cfg.region_size = a.region_size;
    cfg.compactness = a.compactness;
    cfg.seed = a.seed;
    cfg.solver = solver;
    const MuaResult r = a.segments.empty()
                            ? mua_unmix(image, library, cfg)
                            : mua_unmix(image, library, cfg, read_segment_map(a.segments));
    const std::string transform = a.segments.empty() ? a.transform : "file";
    desc += " transform=" + transform + " lambda_c=" + detail::format_double(a.lambda_c) +
            " lambda=" + detail::format_double(a.lambda) +
            " beta=" + detail::format_double(a.beta) +
            " region_size=" + std::to_string(a.region_size);
    report.emplace_back("transform", transform);
    report.emplace_back("lambda_c", detail::format_double(a.lambda_c));
    report.emplace_back("lambda", detail::format_double(a.lambda));
    report.emplace_back("beta", detail::format_double(a.beta));
    report.emplace_back("region_size", std::to_string(a.region_size));
    report.emplace_back("segments", std::to_string(r.segment_map.segment_count()));
    report.emplace_back("segment_time_s", detail::format_double(r.segment_time));
    add_solve("coarse_", r.coarse_report);
    add_solve("", r.fine_report);
    report.emplace_back("total_runtime_s", detail::format_double(r.wall_time));
    estimate = r.abundances.values();
  }
  if (input.count("snr_db")) desc += " snr_db=" + input.at("snr_db");

  const fs::path dir(a.out_dir);
  const HyperspectralImage out(image.rows(), image.cols(), estimate);
  write_cube(dir / "abundances.bin", out, header.seed, desc);
  write_key_values(dir / "report.txt", report);
  if (a.maps) export_abundance_maps(estimate, image.rows(), image.cols(), dir / "maps");
  for (const auto& [k, v] : report) std::cout << k << ": " << v << "\n";
  return kExitOk;
}

struct EvalArgs {
  std::string truth;
  std::string estimate;
  std::string out;
};

int run_eval(const EvalArgs& a) {
  const auto [th, truth_img] = read_cube(a.truth);
  const auto [eh, est_img] = read_cube(a.estimate);
  const AbundanceMatrix truth(truth_img.data());
  const AbundanceMatrix estimate(est_img.data());
  const auto f = description_fields(eh.description);
  EvalRow row;
  row.config_hash = fnv1a_hex(eh.description);
  row.transform = f.count("transform") ? f.at("transform") : "none";
  row.lambda_c = field_double(f, "lambda_c");
  row.lambda = field_double(f, "lambda");
  row.beta = field_double(f, "beta");
  if (f.count("region_size"))
    row.region_size = detail::parse_number<Index>(f.at("region_size")).value_or(0);
  row.snr_db = field_double(f, "snr_db");
  row.sre_db = sre(truth, estimate);
  row.rmse = rmse(truth, estimate);
  const fs::path report = fs::path(a.estimate).parent_path() / "report.txt";
  std::error_code ec;
  if (fs::exists(report, ec)) {
    const KeyValues kv = read_key_values(report);
    const auto t = lookup(kv, "total_runtime_s") ? lookup(kv, "total_runtime_s")
                                                  : lookup(kv, "runtime_s");
    if (t) row.runtime_s = detail::parse_number<double>(*t).value_or(std::nan(""));
  }
  append_eval_row(a.out, row);
  std::cout << "SRE " << detail::format_double(row.sre_db) << " dB, RMSE "
            << detail::format_double(row.rmse) << "\n";
  return kExitOk;
}

struct BenchArgs {
  std::string config;
  std::string out;
  std::string best;
  int threads = 1;
};

int run_bench_cmd(const BenchArgs& a) {
  const BenchResult result = run_bench(read_sweep(a.config), a.threads);
  write_eval_csv(a.out, result.rows);
  const EvalRow& best = result.rows[result.best];
  KeyValues kv{{"config_hash", best.config_hash}};
  for (const auto& [k, v] : result.cells[result.best])
    if (k != "threads") kv.emplace_back(k, v);
  kv.emplace_back("sre_db", detail::format_double(best.sre_db));
  kv.emplace_back("rmse", detail::format_double(best.rmse));
  const fs::path best_path = a.best.empty() ? fs::path(a.out + ".best.txt") : fs::path(a.best);
  write_key_values(best_path, kv);
  std::cout << result.rows.size() << " rows written to " << a.out << "\nbest:\n";
  for (const auto& [k, v] : kv) std::cout << "  " << k << ": " << v << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multiscale sparse unmixing of hyperspectral cubes"};
  app.require_subcommand(1);

  SynthArgs synth;
  auto* s = app.add_subcommand("synth", "Generate a synthetic cube, ground truth and library");
  s->add_option("--dataset", synth.dataset, "dc1 or dc2")->check(CLI::IsMember({"dc1", "dc2"}));
  s->add_option("--bands", synth.bands, "Spectral bands");
  s->add_option("--library-size", synth.library_size, "Library signatures");
  s->add_option("--min-angle", synth.min_angle, "Minimum pairwise angle (degrees)");
  s->add_option("--snr", synth.snr, "Noise SNR in dB (inf for none)");
  s->add_option("--seed", synth.seed, "Seed for library, abundances and noise");
  s->add_option("--noise-seed", synth.noise_seed, "Separate noise seed");
  s->add_option("--out-dir", synth.out_dir, "Output directory");

  SegmentArgs seg;
  auto* g = app.add_subcommand("segment", "Segment a cube and write the label map");
  g->add_option("--cube", seg.cube, "Input cube")->required();
  g->add_option("--method", seg.method, "slic, kmeans or grid");
  g->add_option("--region-size", seg.region_size, "Target segment side in pixels");
  g->add_option("--compactness", seg.compactness, "SLIC compactness");
  g->add_option("--iters", seg.iters, "SLIC / k-means iterations");
  g->add_option("--seed", seg.seed, "k-means seed");
  g->add_option("--out", seg.out, "Output segment map")->required();

  UnmixArgs un;
  auto* u = app.add_subcommand("unmix", "Estimate abundances");
  u->add_option("--cube", un.cube, "Observed cube")->required();
  u->add_option("--library", un.library, "Library CSV")->required();
  u->add_option("--method", un.method, "mua or sunsal")->check(CLI::IsMember({"mua", "sunsal"}));
  u->add_option("--transform", un.transform, "slic, kmeans or grid");
  u->add_option("--segments", un.segments, "Use this segment map instead of segmenting");
  u->add_option("--lambda-c", un.lambda_c, "Coarse sparsity weight");
  u->add_option("--lambda", un.lambda, "Sparsity weight")->required();
  u->add_option("--beta", un.beta, "Weight of the coarse prior");
  u->add_option("--mu", un.mu, "Initial ADMM penalty");
  u->add_flag("--fixed-mu", un.fixed_mu, "Keep mu fixed");
  u->add_option("--region-size", un.region_size, "Target segment side in pixels");
  u->add_option("--compactness", un.compactness, "SLIC compactness");
  u->add_option("--tol", un.tol, "Stopping tolerance");
  u->add_option("--max-iters", un.max_iters, "Iteration cap per solve");
  u->add_option("--threads", un.threads, "Solver threads");
  u->add_option("--seed", un.seed, "k-means seed");
  u->add_option("--out-dir", un.out_dir, "Output directory");
  u->add_flag("--maps", un.maps, "Also write PGM abundance maps");

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "Score an estimate against ground truth");
  e->add_option("--truth", ev.truth, "Ground-truth abundance cube")->required();
  e->add_option("--estimate", ev.estimate, "Estimated abundance cube")->required();
  e->add_option("--out", ev.out, "CSV to append to")->required();

  BenchArgs bn;
  auto* b = app.add_subcommand("bench", "Run a parameter sweep");
  b->add_option("--config", bn.config, "Sweep file")->required();
  b->add_option("--out", bn.out, "Results CSV")->required();
  b->add_option("--best", bn.best, "Where to record the best row");
  b->add_option("--threads", bn.threads, "Parallel cells");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int rc = app.exit(err);
    return rc == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (*s) return run_synth(synth);
    if (*g) return run_segment(seg);
    if (*u) return run_unmix(un);
    if (*e) return run_eval(ev);
    if (*b) return run_bench_cmd(bn);
  } catch (const Error& err) {
    std::cerr << "error: " << err.what() << "\n";
    return is_io_error(err.code()) ? kExitIo : kExitValidation;
  } catch (const fs::filesystem_error& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kExitIo;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kExitValidation;
  }
  return kExitValidation;
}
