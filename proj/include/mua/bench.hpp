#pragma once

// Reproducible experiments: seeded synthetic scenes and grid sweeps over
// unmixing parameters, one evaluation row per parameter combination.

#include "mua/io.hpp"
#include "mua/metrics.hpp"
#include "mua/pipeline.hpp"
#include "mua/synth.hpp"

#include <atomic>
#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <string>
#include <thread>
#include <vector>

namespace mua {

enum class Dataset { Dc1, Dc2 };

inline Dataset parse_dataset(std::string_view name) {
  if (name == "dc1") return Dataset::Dc1;
  if (name == "dc2") return Dataset::Dc2;
  throw Error(ErrorCode::InvalidArgument, "unknown dataset '" + std::string(name) + "'");
}

inline constexpr std::string_view to_string(Dataset d) {
  return d == Dataset::Dc1 ? "dc1" : "dc2";
}

/// Everything needed to regenerate a noisy synthetic scene. The library,
/// abundance layout and noise draw from seed, seed + 1 and seed + 2.
struct SceneSpec {
  Dataset dataset = Dataset::Dc1;
  Index bands = 224;
  Index library_size = 240;
  double min_angle = 4.44;
  double snr_db = 20.0;
  std::uint64_t seed = 0;
  /// Overrides seed + 2 for the noise draw.
  std::optional<std::uint64_t> noise_seed;

  std::uint64_t library_seed() const { return seed; }
  std::uint64_t scene_seed() const { return seed + 1; }
  std::uint64_t noise_draw_seed() const { return noise_seed.value_or(seed + 2); }

  std::string describe() const {
    return "dataset=" + std::string(to_string(dataset)) + " bands=" + std::to_string(bands) +
           " library_size=" + std::to_string(library_size) +
           " min_angle=" + detail::format_double(min_angle) +
           " snr_db=" + detail::format_double(snr_db) + " seed=" + std::to_string(seed) +
           " noise_seed=" + std::to_string(noise_draw_seed());
  }
};

struct Scene {
  SpectralLibrary library;
  AbundanceMatrix truth;
  HyperspectralImage clean;
  HyperspectralImage observed;
  double snr_db;
};

inline Scene make_scene(const SceneSpec& spec) {
  SpectralLibrary library =
      generate_library(spec.bands, spec.library_size, spec.min_angle, spec.library_seed());
  SyntheticScene s = [&] {
    if (spec.dataset == Dataset::Dc1) {
      Dc1Params p;
      p.seed = spec.scene_seed();
      return generate_dc1(library, p);
    }
    Dc2Params p;
    p.seed = spec.scene_seed();
    return generate_dc2(library, p);
  }();
  HyperspectralImage observed = add_noise(s.clean, spec.snr_db, spec.noise_draw_seed());
  return Scene{std::move(library), std::move(s.truth), std::move(s.clean),
               std::move(observed), spec.snr_db};
}

enum class Method { Mua, Sunsal };

inline Method parse_method(std::string_view name) {
  if (name == "mua") return Method::Mua;
  if (name == "sunsal") return Method::Sunsal;
  throw Error(ErrorCode::InvalidArgument, "unknown method '" + std::string(name) + "'");
}

/// Keys accepted in a sweep file. `threads` sets the number of parallel
/// cells and is excluded from the configuration hash.
inline const std::set<std::string>& sweep_keys() {
  static const std::set<std::string> keys{
      "dataset", "bands",  "library_size", "min_angle",   "snr",       "seed",
      "noise_seed", "cube", "truth",       "library",     "method",    "transform",
      "lambda_c", "lambda", "beta",        "region_size", "compactness", "mu",
      "adapt_mu", "tol",    "max_iters",   "threads"};
  return keys;
}

using SweepCell = std::map<std::string, std::string>;

/// Hash of every key except `threads`, in key order.
inline std::string config_hash(const SweepCell& cell) {
  std::string canon;
  for (const auto& [k, v] : cell) {
    if (k == "threads") continue;
    canon += k + "=" + v + ";";
  }
  return fnv1a_hex(canon);
}

namespace detail {

inline double cell_double(const SweepCell& c, const std::string& key, double fallback) {
  const auto it = c.find(key);
  if (it == c.end()) return fallback;
  const auto v = parse_number<double>(it->second);
  if (!v) throw Error(ErrorCode::InvalidArgument, key + " is not a number: " + it->second);
  return *v;
}

inline std::optional<double> cell_opt_double(const SweepCell& c, const std::string& key) {
  if (!c.count(key)) return std::nullopt;
  return cell_double(c, key, 0.0);
}

inline std::int64_t cell_int(const SweepCell& c, const std::string& key, std::int64_t fallback) {
  const auto it = c.find(key);
  if (it == c.end()) return fallback;
  const auto v = parse_number<std::int64_t>(it->second);
  if (!v) throw Error(ErrorCode::InvalidArgument, key + " is not an integer: " + it->second);
  return *v;
}

inline std::string cell_str(const SweepCell& c, const std::string& key, std::string fallback) {
  const auto it = c.find(key);
  return it == c.end() ? fallback : it->second;
}

inline bool parse_bool(std::string_view v) {
  if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
  if (v == "0" || v == "false" || v == "no" || v == "off") return false;
  throw Error(ErrorCode::InvalidArgument, "expected a boolean, got '" + std::string(v) + "'");
}

}  // namespace detail

inline SceneSpec scene_spec_of(const SweepCell& c) {
  SceneSpec s;
  s.dataset = parse_dataset(detail::cell_str(c, "dataset", "dc1"));
  s.bands = detail::cell_int(c, "bands", s.bands);
  s.library_size = detail::cell_int(c, "library_size", s.library_size);
  s.min_angle = detail::cell_double(c, "min_angle", s.min_angle);
  s.snr_db = detail::cell_double(c, "snr", s.snr_db);
  s.seed = static_cast<std::uint64_t>(detail::cell_int(c, "seed", 0));
  if (c.count("noise_seed"))
    s.noise_seed = static_cast<std::uint64_t>(detail::cell_int(c, "noise_seed", 0));
  return s;
}

/// Scene for a cell: files when `cube`/`truth`/`library` are given,
/// otherwise generated from the dataset keys.
inline Scene load_or_make_scene(const SweepCell& c) {
  if (c.count("cube") || c.count("truth") || c.count("library")) {
    if (!c.count("cube") || !c.count("truth") || !c.count("library"))
      throw Error(ErrorCode::InvalidArgument, "cube, truth and library must be given together");
    auto [h, cube] = read_cube(c.at("cube"));
    auto [th, truth_img] = read_cube(c.at("truth"));
    SpectralLibrary lib = read_library(c.at("library"));
    AbundanceMatrix truth(truth_img.data());
    return Scene{std::move(lib), std::move(truth), cube, cube,
                 detail::cell_double(c, "snr", std::nan(""))};
  }
  return make_scene(scene_spec_of(c));
}

/// Solver and pipeline settings of a cell.
inline MuaConfig mua_config_of(const SweepCell& c) {
  MuaConfig m;
  m.lambda_c = detail::cell_double(c, "lambda_c", std::nan(""));
  m.lambda = detail::cell_double(c, "lambda", std::nan(""));
  m.beta = detail::cell_double(c, "beta", std::nan(""));
  m.transform = parse_transform(detail::cell_str(c, "transform", "slic"));
  m.region_size = detail::cell_int(c, "region_size", m.region_size);
  m.compactness = detail::cell_double(c, "compactness", std::nan(""));
  m.seed = static_cast<std::uint64_t>(detail::cell_int(c, "seed", 0));
  m.solver.mu = detail::cell_double(c, "mu", m.solver.mu);
  m.solver.tol = detail::cell_double(c, "tol", m.solver.tol);
  m.solver.max_iters = detail::cell_int(c, "max_iters", m.solver.max_iters);
  if (c.count("adapt_mu")) m.solver.adapt_mu = detail::parse_bool(c.at("adapt_mu"));
  return m;
}

struct CellOutcome {
  EvalRow row;
  Matrix abundances;
};

inline CellOutcome run_cell(const SweepCell& cell, const Scene& scene) {
  const Method method = parse_method(detail::cell_str(cell, "method", "mua"));
  const MuaConfig cfg = mua_config_of(cell);
  CellOutcome out;
  EvalRow& row = out.row;
  row.config_hash = config_hash(cell);
  row.snr_db = scene.snr_db;
  row.lambda = cfg.lambda;
  if (method == Method::Sunsal) {
    const SolveReport r = sunsal_unmix(scene.observed, scene.library, cfg.lambda, cfg.solver);
    row.transform = "none";
    row.runtime_s = r.wall_time;
    out.abundances = r.abundances.values();
  } else {
    const MuaResult r = mua_unmix(scene.observed, scene.library, cfg);
    row.transform = std::string(to_string(cfg.transform));
    row.lambda_c = cfg.lambda_c;
    row.beta = cfg.beta;
    row.region_size = cfg.region_size;
    row.runtime_s = r.wall_time;
    out.abundances = r.abundances.values();
  }
  const AbundanceMatrix estimate(out.abundances);
  row.sre_db = sre(scene.truth, estimate);
  row.rmse = rmse(scene.truth, estimate);
  return out;
}

struct BenchResult {
  /// Rows sorted by config hash.
  std::vector<EvalRow> rows;
  /// Abundance estimates in the same order as `rows`.
  std::vector<Matrix> abundances;
  /// Index into `rows` of the highest SRE (first on ties).
  std::size_t best = 0;
  std::vector<SweepCell> cells;
};

/// Runs every cell of the sweep. Scenes are built once per distinct data
/// configuration; cells run on `threads` workers and the output order does
/// not depend on scheduling.
inline BenchResult run_bench(const Sweep& sweep, int threads = 1) {
  for (const auto& [key, values] : sweep)
    if (!sweep_keys().count(key))
      throw Error(ErrorCode::InvalidArgument, "unknown sweep key '" + key + "'");
  std::vector<SweepCell> cells = expand_sweep(sweep);
  if (cells.empty()) throw Error(ErrorCode::InvalidArgument, "empty sweep");
  for (const auto& c : cells)
    if (c.count("threads")) threads = static_cast<int>(detail::cell_int(c, "threads", threads));
  if (threads < 1) throw Error(ErrorCode::InvalidArgument, "threads must be >= 1");

  static const std::set<std::string> data_keys{"dataset", "bands", "library_size", "min_angle",
                                               "snr",     "seed",  "noise_seed",   "cube",
                                               "truth",   "library"};
  const auto data_key = [&](const SweepCell& c) {
    std::string k;
    for (const auto& [key, v] : c)
      if (data_keys.count(key)) k += key + "=" + v + ";";
    return k;
  };
  std::map<std::string, std::shared_ptr<const Scene>> scenes;
  for (const auto& c : cells) {
    const auto k = data_key(c);
    if (!scenes.count(k)) scenes.emplace(k, std::make_shared<const Scene>(load_or_make_scene(c)));
  }

  std::vector<CellOutcome> outcomes(cells.size());
  std::atomic<std::size_t> next{0};
  std::mutex error_mutex;
  std::exception_ptr failure;
  const auto worker = [&] {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= cells.size()) return;
      try {
        outcomes[i] = run_cell(cells[i], *scenes.at(data_key(cells[i])));
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  {
    std::vector<std::jthread> pool;
    const auto n = std::min<std::size_t>(static_cast<std::size_t>(threads), cells.size());
    for (std::size_t t = 1; t < n; ++t) pool.emplace_back(worker);
    worker();
  }
  if (failure) std::rethrow_exception(failure);

  std::vector<std::size_t> order(cells.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return outcomes[a].row.config_hash < outcomes[b].row.config_hash;
  });
  BenchResult result;
  for (const std::size_t i : order) {
    result.rows.push_back(outcomes[i].row);
    result.abundances.push_back(std::move(outcomes[i].abundances));
    result.cells.push_back(cells[i]);
  }
  for (std::size_t i = 1; i < result.rows.size(); ++i)
    if (result.rows[i].sre_db > result.rows[result.best].sre_db) result.best = i;
  return result;
}

}  // namespace mua
