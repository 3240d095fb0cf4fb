#pragma once

// Command-line front end: gen-data, run-gda, ablate, label-shift, motivation.
//
// Every command accepts `--config FILE` with `key = value` lines ('#' starts a
// comment). File entries are applied first and flags given on the command line
// override them. SUOT_SEED, when set, overrides --seed.
//
// Exit codes: 0 ok, 2 configuration, 3 data, 4 numeric failure.

#include "esuot/classifier.hpp"
#include "esuot/data.hpp"
#include "esuot/diagnostics.hpp"
#include "esuot/divergence.hpp"
#include "esuot/gda.hpp"
#include "esuot/suot.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace esuot::cli {

using Json = nlohmann::ordered_json;

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitNumeric = 4;

/// SUOT_SEED, when set, replaces the seed given on the command line.
inline std::uint64_t env_seed(std::uint64_t fallback) {
  const char* env = std::getenv("SUOT_SEED");
  if (!env || !*env) return fallback;
  try {
    std::size_t used = 0;
    const std::uint64_t v = std::stoull(env, &used);
    if (used != std::string(env).size()) throw std::invalid_argument(env);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("SUOT_SEED is not an unsigned integer: " + std::string(env));
  }
}

// ---- shared option groups ----

struct DataOptions {
  std::string family = "two_moons_rotation";
  int n = 2000;
  std::optional<double> angle;
  double shift_x = 0.0;
  double shift_y = 0.0;
  double noise = -1.0;  // < 0: family default
  std::string source_csv;
  std::string target_csv;

  bool from_csv() const { return !source_csv.empty() || !target_csv.empty(); }
};

inline double default_noise(data::Family f) {
  switch (f) {
    case data::Family::TwoMoonsRotation: return 0.08;
    case data::Family::GaussianShift: return 1.0;
    case data::Family::GaussianRingShift: return 0.2;
    case data::Family::PortraitsLikeDrift: return 1.0;
  }
  return 1.0;
}

inline data::SyntheticSpec synthetic_spec(const DataOptions& o, std::uint64_t seed) {
  data::SyntheticSpec s;
  s.family = data::parse_family(o.family);
  if (data::family_uses_angle(s.family) && !o.angle)
    throw ConfigError("--angle is required for family " + o.family);
  s.n = o.n;
  s.angle_deg = o.angle.value_or(0.0);
  s.shift = {o.shift_x, o.shift_y};
  s.noise = o.noise < 0.0 ? default_noise(s.family) : o.noise;
  s.seed = seed;
  s.validate();
  return s;
}

inline std::pair<Dataset, Dataset> load_data(const DataOptions& o, std::uint64_t seed) {
  if (o.from_csv()) {
    if (o.source_csv.empty() || o.target_csv.empty())
      throw ConfigError("--source-csv and --target-csv must be given together");
    Dataset s = data::load_csv(o.source_csv);
    Dataset t = data::load_csv(o.target_csv);
    if (s.dim() != t.dim()) throw DataError("source and target CSVs have different feature counts");
    return {std::move(s), std::move(t)};
  }
  return data::generate(synthetic_spec(o, seed));
}

inline Json data_json(const DataOptions& o) {
  Json j;
  if (o.from_csv()) {
    j["source_csv"] = o.source_csv;
    j["target_csv"] = o.target_csv;
    return j;
  }
  const data::Family f = data::parse_family(o.family);
  j["family"] = o.family;
  j["n"] = o.n;
  if (o.angle) j["angle_deg"] = *o.angle;
  j["shift"] = {o.shift_x, o.shift_y};
  j["noise"] = o.noise < 0.0 ? default_noise(f) : o.noise;
  return j;
}

struct RunOptions {
  suot::ESuotConfig transport;
  std::string fstar = "kl";
  std::string trainer = "esuot";
  ClassifierConfig classifier;
  int finetune_epochs = -1;
  std::uint64_t seed = 0;
  std::optional<double> advisory_a;  // bound on the first variation
  std::optional<double> advisory_bg;  // bound on its gradient
  std::optional<double> advisory_h0;  // light-tail constant

  void resolve() {
    transport.conjugate = parse_conjugate(fstar);
    transport.trainer = suot::parse_trainer(trainer);
    seed = env_seed(seed);
    transport.seed = seed;
    classifier.seed = seed;
    transport.validate();
    classifier.validate();
  }

  gda::GdaConfig gda_config() const {
    gda::GdaConfig g;
    g.transport = transport;
    g.classifier = classifier;
    g.finetune_epochs = finetune_epochs;
    return g;
  }
};

inline void add_data_options(CLI::App& app, DataOptions& o) {
  app.add_option("--family", o.family, "two_moons_rotation|gaussian_shift|gaussian_ring_shift|portraits_like_drift");
  app.add_option("--n", o.n, "samples per domain");
  app.add_option("--angle", o.angle, "rotation in degrees (rotation families)");
  app.add_option("--shift-x", o.shift_x);
  app.add_option("--shift-y", o.shift_y);
  app.add_option("--noise", o.noise, "family noise level (default depends on the family)");
  app.add_option("--source-csv", o.source_csv);
  app.add_option("--target-csv", o.target_csv);
}

inline void add_run_options(CLI::App& app, RunOptions& o) {
  auto& t = o.transport;
  app.add_option("--epsilon", t.epsilon, "entropy strength");
  app.add_option("--eta", t.eta, "step size");
  app.add_option("--stages", t.stages, "number of transport stages T");
  app.add_option("--batch", t.batch);
  app.add_option("--epochs", t.epochs, "optimizer steps per training phase");
  app.add_option("--lr", t.lr);
  app.add_option("--hidden", t.hidden, "width of potential and map networks");
  app.add_flag("--warm-start", t.warm_start);
  app.add_option("--gauge-weight", t.gauge_weight);
  app.add_option("--fstar", o.fstar, "kl|chi2|identity|softplus");
  app.add_option("--trainer", o.trainer, "esuot|adversarial|barycentric");
  app.add_option("--clf-epochs", o.classifier.epochs);
  app.add_option("--clf-hidden", o.classifier.hidden);
  app.add_option("--clf-batch", o.classifier.batch);
  app.add_option("--clf-lr", o.classifier.lr);
  app.add_option("--finetune-epochs", o.finetune_epochs, "per-stage fine-tune passes (default clf-epochs/5)");
  app.add_option("--seed", o.seed);
  app.add_option("--advisory-a", o.advisory_a);
  app.add_option("--advisory-bg", o.advisory_bg);
  app.add_option("--advisory-h0", o.advisory_h0);
}

inline Json transport_json(const suot::ESuotConfig& c) {
  Json j;
  j["epsilon"] = c.epsilon;
  j["eta"] = c.eta;
  j["stages"] = c.stages;
  j["batch"] = c.batch;
  j["epochs"] = c.epochs;
  j["lr"] = c.lr;
  j["fstar"] = to_string(c.conjugate);
  j["trainer"] = suot::to_string(c.trainer);
  j["hidden"] = c.hidden;
  j["warm_start"] = c.warm_start;
  j["gauge_weight"] = c.gauge_weight;
  return j;
}

inline Json run_json(const RunOptions& o) {
  Json j = transport_json(o.transport);
  j["clf_epochs"] = o.classifier.epochs;
  j["clf_hidden"] = o.classifier.hidden;
  j["clf_batch"] = o.classifier.batch;
  j["clf_lr"] = o.classifier.lr;
  j["finetune_epochs"] = o.gda_config().resolved_finetune_epochs();
  j["seed"] = o.seed;
  return j;
}

inline Json number_or_null(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

inline Json bound_json(const diag::BoundReport& b) {
  Json j;
  j["iota"] = b.iota;
  j["iota_is_upper_bound"] = true;
  j["zeta"] = b.zeta;
  j["cumulative_cost"] = b.cumulative_cost;
  j["stat_term"] = b.stat_term;
  j["source_error"] = b.source_error;
  j["bound"] = b.bound_value();
  j["stage_w1"] = b.stage_w1;
  j["stage_disagreement"] = b.stage_disagreement;
  j["unestimated"] = b.unestimated;
  return j;
}

inline Json gda_json(const gda::GdaReport& r) {
  Json j;
  j["source_only_accuracy"] = number_or_null(r.source_only_accuracy);
  j["source_train_accuracy"] = r.source_train_accuracy;
  Json stages = Json::array();
  for (const auto& s : r.per_stage) {
    Json e;
    e["stage"] = s.stage;
    e["w2_to_target"] = s.w2_to_target < 0.0 ? Json(nullptr) : Json(s.w2_to_target);
    e["accuracy"] = number_or_null(s.accuracy);
    stages.push_back(e);
  }
  j["per_stage"] = stages;
  j["final_accuracy"] = number_or_null(r.final_accuracy);
  if (r.bound) j["bound_report"] = bound_json(*r.bound);
  Json curves = Json::array();
  for (const auto& st : r.sequence.stages) {
    Json c;
    c["stage"] = st.stage_index;
    c["potential_loss"] = st.potential_curve;
    c["map_loss"] = st.map_curve;
    c["skipped_batches"] = st.skipped_batches;
    curves.push_back(c);
  }
  j["training_curves"] = curves;
  return j;
}

// ---- config file ----

inline std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

/// `key = value` lines to `--key=value` tokens. Underscores in keys become dashes.
inline std::vector<std::string> config_tokens(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  std::vector<std::string> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(path + ":" + std::to_string(lineno) + ": expected key = value");
    std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError(path + ":" + std::to_string(lineno) + ": empty key");
    std::replace(key.begin(), key.end(), '_', '-');
    out.push_back("--" + key + "=" + value);
  }
  return out;
}

/// Insert config-file tokens right after the subcommand name so that the
/// command-line flags that follow take precedence.
inline std::vector<std::string> expand_config(const std::vector<std::string>& args) {
  std::vector<std::string> rest;
  std::string path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config") {
      if (i + 1 >= args.size()) throw ConfigError("--config needs a file name");
      path = args[++i];
    } else if (args[i].rfind("--config=", 0) == 0) {
      path = args[i].substr(9);
    } else {
      rest.push_back(args[i]);
    }
  }
  if (path.empty() || rest.empty()) return rest;
  std::vector<std::string> out{rest.front()};
  for (auto& t : config_tokens(path)) out.push_back(std::move(t));
  out.insert(out.end(), rest.begin() + 1, rest.end());
  return out;
}

// ---- output helpers ----

inline void write_text(const std::string& path, const std::string& text, std::ostream& fallback) {
  if (path.empty() || path == "-") {
    fallback << text;
    return;
  }
  const std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  out << text;
}

inline std::string table_text(const data::Table& t) {
  std::ostringstream os;
  data::write_table(os, t);
  return os.str();
}

inline std::vector<std::uint64_t> seed_list(std::uint64_t base, int count) {
  if (count < 1) throw ConfigError("--n-seeds must be >= 1");
  std::vector<std::uint64_t> s;
  for (int i = 0; i < count; ++i) s.push_back(base + static_cast<std::uint64_t>(i));
  return s;
}

/// Run `count` independent jobs on up to `jobs` threads. Results are written by
/// index, so output order never depends on scheduling.
inline void parallel_for(int count, int jobs, const std::function<void(int)>& fn) {
  if (jobs < 1) throw ConfigError("--jobs must be >= 1");
  if (jobs == 1 || count <= 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex m;
  std::vector<std::thread> pool;
  for (int w = 0; w < std::min(jobs, count); ++w)
    pool.emplace_back([&] {
      for (int i = next++; i < count; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(m);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

inline std::string fmt(double v) { return std::isfinite(v) ? data::format_double(v) : ""; }

// ---- commands ----

inline int cmd_gen_data(const DataOptions& d, std::uint64_t seed, const std::string& out_dir, std::ostream& log) {
  if (d.from_csv()) throw ConfigError("gen-data generates synthetic data; --source-csv/--target-csv do not apply");
  auto [s, t] = data::generate(synthetic_spec(d, seed));
  const std::filesystem::path dir(out_dir);
  std::filesystem::create_directories(dir);
  data::save_csv(s, (dir / "source.csv").string());
  data::save_csv(t, (dir / "target.csv").string());
  log << "wrote " << (dir / "source.csv").string() << " and " << (dir / "target.csv").string() << "\n";
  return kExitOk;
}

inline Json run_gda_report(const DataOptions& d, RunOptions o, bool w2_report) {
  const auto start = std::chrono::steady_clock::now();
  o.resolve();
  auto [source, target] = load_data(d, o.seed);
  gda::GdaConfig cfg = o.gda_config();
  cfg.w2_report = w2_report;
  const gda::GdaReport r = gda::run_gda(cfg, source, target);

  Json j;
  j["schema_version"] = 1;
  j["command"] = "run-gda";
  j["config"] = run_json(o);
  j["data"] = data_json(d);
  j["seed"] = o.seed;
  const Json body = gda_json(r);
  for (auto& [k, v] : body.items()) j[k] = v;
  if (o.advisory_a && o.advisory_bg && o.advisory_h0) {
    const auto a = diag::step_size_advisory(o.transport.eta, *o.advisory_a, *o.advisory_bg, *o.advisory_h0);
    j["step_size_advisory"] = {{"eta", o.transport.eta}, {"limit", a.limit}, {"ok", a.ok}};
  }
  j["wall_time_s"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return j;
}

struct GridPoint {
  suot::Trainer trainer;
  ConjugateKind conjugate;
};

/// Trainer x conjugate combinations that are defined: the adversarial trainer
/// is unbounded with the identity conjugate, and the barycentric trainer does
/// not use a conjugate at all (one row, labelled with the configured kind).
inline std::vector<GridPoint> ablation_grid(ConjugateKind barycentric_label) {
  const ConjugateKind all[] = {ConjugateKind::KL, ConjugateKind::ChiSq, ConjugateKind::Identity,
                               ConjugateKind::Softplus};
  std::vector<GridPoint> g;
  for (auto k : all) g.push_back({suot::Trainer::ESuot, k});
  for (auto k : all)
    if (k != ConjugateKind::Identity) g.push_back({suot::Trainer::Adversarial, k});
  g.push_back({suot::Trainer::Barycentric, barycentric_label});
  return g;
}

inline void set_sweep_value(RunOptions& o, const std::string& param, double v) {
  auto& t = o.transport;
  if (param == "epsilon") t.epsilon = v;
  else if (param == "eta") t.eta = v;
  else if (param == "batch") t.batch = static_cast<int>(v);
  else if (param == "stages") t.stages = static_cast<int>(v);
  else if (param == "epochs") t.epochs = static_cast<int>(v);
  else if (param == "lr") t.lr = v;
  else throw ConfigError("cannot sweep '" + param + "' (expected epsilon|eta|batch|stages|epochs|lr)");
  if ((param == "batch" || param == "stages" || param == "epochs") && v != std::floor(v))
    throw ConfigError("--sweep " + param + " needs integer values");
}

inline data::Table run_ablation(const DataOptions& d, RunOptions base, const std::string& sweep,
                                const std::vector<double>& values, int n_seeds, int jobs) {
  base.resolve();
  struct Job {
    RunOptions opt;
    std::string param;
    std::string value;
  };
  std::vector<Job> grid;
  if (sweep.empty()) {
    if (!values.empty()) throw ConfigError("--values needs --sweep");
    for (const auto& p : ablation_grid(base.transport.conjugate)) {
      RunOptions o = base;
      o.transport.trainer = p.trainer;
      o.transport.conjugate = p.conjugate;
      o.trainer = suot::to_string(p.trainer);
      o.fstar = to_string(p.conjugate);
      grid.push_back({o, "", ""});
    }
  } else {
    if (values.empty()) throw ConfigError("--sweep needs --values");
    for (double v : values) {
      RunOptions o = base;
      set_sweep_value(o, sweep, v);
      o.transport.validate();
      grid.push_back({o, sweep, data::format_double(v)});
    }
  }
  const auto seeds = seed_list(base.seed, n_seeds);
  const int total = static_cast<int>(grid.size() * seeds.size());
  std::vector<std::vector<std::string>> rows(static_cast<std::size_t>(total));
  parallel_for(total, jobs, [&](int i) {
    const Job& job = grid[static_cast<std::size_t>(i) / seeds.size()];
    const std::uint64_t seed = seeds[static_cast<std::size_t>(i) % seeds.size()];
    RunOptions o = job.opt;
    o.seed = seed;
    o.transport.seed = seed;
    o.classifier.seed = seed;
    auto [s, t] = load_data(d, seed);
    gda::GdaConfig cfg = o.gda_config();
    cfg.w2_report = false;
    cfg.bound_report = false;
    const gda::GdaReport r = gda::run_gda(cfg, s, t);
    rows[static_cast<std::size_t>(i)] = {suot::to_string(o.transport.trainer), to_string(o.transport.conjugate),
                                         job.param, job.value, std::to_string(seed),
                                         fmt(r.source_only_accuracy), fmt(r.final_accuracy)};
  });
  data::Table t;
  t.header = {"trainer", "fstar", "param", "value", "seed", "source_accuracy", "final_accuracy"};
  t.rows = std::move(rows);
  return t;
}

/// Balanced comparator: identity penalty plus a quadratic anchor on mean(w),
/// which stands in for the hard target-marginal constraint.
inline suot::ESuotConfig balanced_comparator(suot::ESuotConfig c, double anchor_weight) {
  c.conjugate = ConjugateKind::Identity;
  c.gauge_weight = anchor_weight;
  return c;
}

inline data::Table run_label_shift(const DataOptions& d, RunOptions base, const std::vector<double>& priors,
                                   double anchor_weight, int n_seeds, int jobs) {
  base.resolve();
  if (priors.empty()) throw ConfigError("--priors must list at least one value");
  for (double p : priors)
    if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("priors must lie in [0, 1]");
  if (!(anchor_weight > 0.0)) throw ConfigError("--anchor-weight must be > 0");
  const auto seeds = seed_list(base.seed, n_seeds);
  const int total = static_cast<int>(priors.size() * seeds.size());
  std::vector<std::vector<std::string>> rows(static_cast<std::size_t>(total));
  parallel_for(total, jobs, [&](int i) {
    const double prior = priors[static_cast<std::size_t>(i) / seeds.size()];
    const std::uint64_t seed = seeds[static_cast<std::size_t>(i) % seeds.size()];
    auto [s, t] = load_data(d, seed);
    const Dataset shifted = data::resample_label_shift(t, {prior, static_cast<int>(t.size()), mix_seed(seed, 77)});
    RunOptions o = base;
    o.seed = seed;
    o.transport.seed = seed;
    o.classifier.seed = seed;
    gda::GdaConfig unbalanced = o.gda_config();
    unbalanced.w2_report = false;
    unbalanced.bound_report = false;
    gda::GdaConfig balanced = unbalanced;
    balanced.transport = balanced_comparator(unbalanced.transport, anchor_weight);
    const gda::GdaReport ru = gda::run_gda(unbalanced, s, shifted);
    const gda::GdaReport rb = gda::run_gda(balanced, s, shifted);
    rows[static_cast<std::size_t>(i)] = {data::format_double(prior), std::to_string(seed), fmt(ru.source_only_accuracy),
                                         fmt(rb.final_accuracy), fmt(ru.final_accuracy)};
  });
  data::Table t;
  t.header = {"prior", "seed", "initial_accuracy", "balanced_accuracy", "unbalanced_accuracy"};
  t.rows = std::move(rows);
  return t;
}

struct MotivationOptions {
  int n = 2000;
  double shift_x = 1.5;
  double shift_y = 0.0;
  double noise = 0.2;
  diag::MotivationConfig cfg;
  std::uint64_t seed = 0;

  MotivationOptions() {
    cfg.transport.eta = 10.0;
    cfg.transport.batch = 256;
  }
};

struct MotivationRun {
  diag::MotivationResult result;
  Json json;
  data::Table snapshots;
};

inline MotivationRun run_motivation(MotivationOptions o) {
  o.seed = env_seed(o.seed);
  data::SyntheticSpec spec;
  spec.family = data::Family::GaussianRingShift;
  spec.n = o.n;
  spec.shift = {o.shift_x, o.shift_y};
  spec.noise = o.noise;
  spec.seed = o.seed;
  auto [s, t] = data::generate(spec);
  o.cfg.seed = o.seed;
  MotivationRun run;
  run.result = diag::motivation_compare(o.cfg, s.features, t.features);

  Json j;
  j["schema_version"] = 1;
  j["command"] = "motivation";
  j["config"] = {{"n", o.n},
                 {"shift", {o.shift_x, o.shift_y}},
                 {"noise", o.noise},
                 {"transport", transport_json(o.cfg.transport)},
                 {"dsm_sigma", o.cfg.dsm.sigma},
                 {"dsm_epochs", o.cfg.dsm.epochs},
                 {"langevin_step", o.cfg.langevin_step},
                 {"langevin_steps", o.cfg.langevin_steps},
                 {"snapshots", o.cfg.snapshots},
                 {"seed", o.seed}};
  j["w2_est_trans"] = run.result.w2_est_trans;
  j["w2_dir_trans"] = run.result.w2_dir_trans;
  j["winner"] = run.result.winner();
  run.json = j;

  // snapshot k is stored as a dataset with domain index k
  Dataset all;
  const auto& snaps = run.result.langevin_snapshots;
  const Eigen::Index n = s.size();
  all.features.resize(n * static_cast<Eigen::Index>(snaps.size()), 2);
  for (std::size_t k = 0; k < snaps.size(); ++k) all.features.middleRows(static_cast<Eigen::Index>(k) * n, n) = snaps[k];
  run.snapshots = data::dataset_to_table(all);
  for (std::size_t k = 0; k < snaps.size(); ++k)
    for (Eigen::Index i = 0; i < n; ++i)
      run.snapshots.rows[k * static_cast<std::size_t>(n) + static_cast<std::size_t>(i)].back() = std::to_string(k);
  return run;
}

// ---- entry point ----

inline std::vector<double> parse_list(const std::string& s, const char* flag) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    try {
      out.push_back(data::parse_double(item, 0));
    } catch (const Error&) {
      throw ConfigError(std::string(flag) + ": '" + item + "' is not a number");
    }
  }
  return out;
}

inline int run(const std::vector<std::string>& raw_args, std::ostream& out, std::ostream& err) {
  try {
    const std::vector<std::string> args = expand_config(raw_args);

    CLI::App app{"Entropy-regularized semi-dual unbalanced OT for gradual domain adaptation"};
    app.require_subcommand(1);
    app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

    DataOptions data_opt;
    RunOptions run_opt;
    std::string out_path;
    std::uint64_t gen_seed = 0;

    CLI::App* gen = app.add_subcommand("gen-data", "write source.csv and target.csv for a synthetic family");
    add_data_options(*gen, data_opt);
    gen->add_option("--seed", gen_seed);
    gen->add_option("--out", out_path, "output directory")->required();

    CLI::App* gda_cmd = app.add_subcommand("run-gda", "full adaptation pipeline, JSON report");
    add_data_options(*gda_cmd, data_opt);
    add_run_options(*gda_cmd, run_opt);
    gda_cmd->add_option("--out", out_path, "report path (default stdout)");
    bool no_w2 = false;
    gda_cmd->add_flag("--no-w2", no_w2, "skip per-stage Sinkhorn W2");

    CLI::App* abl = app.add_subcommand("ablate", "trainer x conjugate grid, or a 1-D sweep; long-format CSV");
    add_data_options(*abl, data_opt);
    add_run_options(*abl, run_opt);
    std::string sweep, values;
    int n_seeds = 1;
    int jobs = 1;
    abl->add_option("--sweep", sweep, "epsilon|eta|batch|stages|epochs|lr");
    abl->add_option("--values", values, "comma-separated sweep values");
    abl->add_option("--n-seeds", n_seeds);
    abl->add_option("--jobs", jobs);
    abl->add_option("--out", out_path, "CSV path (default stdout)");

    CLI::App* ls = app.add_subcommand("label-shift", "balanced vs unbalanced transport under target label shift");
    add_data_options(*ls, data_opt);
    add_run_options(*ls, run_opt);
    std::string priors = "0.0,0.5,1.0";
    double anchor = 1.0;
    ls->add_option("--priors", priors, "comma-separated target p(y=1)");
    ls->add_option("--anchor-weight", anchor, "weight of the mean(w)^2 anchor in the balanced comparator");
    ls->add_option("--n-seeds", n_seeds);
    ls->add_option("--jobs", jobs);
    ls->add_option("--out", out_path, "CSV path (default stdout)");

    CLI::App* mot = app.add_subcommand("motivation", "score-based Langevin transport vs a learned map");
    MotivationOptions mo;
    std::string snap_path;
    mot->add_option("--n", mo.n);
    mot->add_option("--shift-x", mo.shift_x);
    mot->add_option("--shift-y", mo.shift_y);
    mot->add_option("--noise", mo.noise);
    mot->add_option("--eta", mo.cfg.transport.eta);
    mot->add_option("--epsilon", mo.cfg.transport.epsilon);
    mot->add_option("--batch", mo.cfg.transport.batch);
    mot->add_option("--epochs", mo.cfg.transport.epochs);
    mot->add_option("--lr", mo.cfg.transport.lr);
    mot->add_option("--dsm-sigma", mo.cfg.dsm.sigma);
    mot->add_option("--dsm-epochs", mo.cfg.dsm.epochs);
    mot->add_option("--langevin-step", mo.cfg.langevin_step);
    mot->add_option("--langevin-steps", mo.cfg.langevin_steps);
    mot->add_option("--snapshots", mo.cfg.snapshots);
    mot->add_option("--seed", mo.seed);
    mot->add_option("--out", out_path, "JSON path (default stdout)");
    mot->add_option("--snapshots-csv", snap_path, "Langevin particle snapshots");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
      app.parse(reversed);
    } catch (const CLI::ParseError& e) {
      const int code = app.exit(e, out, err);
      return code == 0 ? kExitOk : kExitConfig;
    }

    if (gen->parsed()) {
      return cmd_gen_data(data_opt, env_seed(gen_seed), out_path, err);
    }
    if (gda_cmd->parsed()) {
      write_text(out_path, run_gda_report(data_opt, run_opt, !no_w2).dump(2) + "\n", out);
      return kExitOk;
    }
    if (abl->parsed()) {
      write_text(out_path, table_text(run_ablation(data_opt, run_opt, sweep, parse_list(values, "--values"), n_seeds, jobs)),
                 out);
      return kExitOk;
    }
    if (ls->parsed()) {
      write_text(out_path,
                 table_text(run_label_shift(data_opt, run_opt, parse_list(priors, "--priors"), anchor, n_seeds, jobs)),
                 out);
      return kExitOk;
    }
    if (mot->parsed()) {
      const MotivationRun r = run_motivation(mo);
      if (!snap_path.empty()) write_text(snap_path, table_text(r.snapshots), out);
      write_text(out_path, r.json.dump(2) + "\n", out);
      return kExitOk;
    }
    return kExitConfig;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const ContractError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const ShapeError& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  }
}

}  // namespace esuot::cli
