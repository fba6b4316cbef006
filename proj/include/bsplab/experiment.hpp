#pragma once

// Reproducible experiment runner behind the bsplab CLI. A command reads one
// JSON config, applies command-line overrides (flag > config > default),
// validates every field, runs, and writes its outputs under the output
// directory. Every output embeds the config hash and the master seed.
//
// Exit codes: 0 success / no violation, 2 config error, 3 violations found.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "bsplab/error.hpp"
#include "bsplab/exact.hpp"
#include "bsplab/json.hpp"
#include "bsplab/mechanism.hpp"
#include "bsplab/stake.hpp"
#include "bsplab/utility.hpp"
#include "bsplab/verifier.hpp"

namespace bsplab {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitViolation = 3;

/// Command-line overrides; unset fields fall back to the config file.
struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  std::optional<std::string> axis;
  std::optional<std::string> mode;
};

struct ExperimentConfig {
  Json doc;  // config after overrides
  std::optional<std::uint64_t> seed;
  std::filesystem::path out_dir{"out"};
  std::filesystem::path base_dir{"."};  // relative paths inside the config resolve here
};

/// FNV-1a over the canonical (sorted-key, compact) dump of the config,
/// leaving out fields that cannot change results (output directory, threads).
inline std::uint64_t config_hash(const Json& doc) {
  Json canonical = doc;
  if (canonical.is_object()) {
    canonical.erase("output");
    if (canonical.contains("simulate") && canonical["simulate"].is_object()) canonical["simulate"].erase("threads");
  }
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : canonical.dump()) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

inline ExperimentConfig make_config(Json doc, const Overrides& ov, std::filesystem::path base_dir = ".") {
  if (!doc.is_object()) throw Error(Errc::config, "config root must be an object");
  if (ov.seed) doc["seed"] = *ov.seed;
  if (ov.out_dir) doc["output"] = *ov.out_dir;
  if (ov.axis) doc["sweep"]["axis"] = *ov.axis;
  if (ov.mode) doc["check"]["mode"] = *ov.mode;
  ExperimentConfig cfg;
  if (doc.contains("seed")) {
    if (!doc["seed"].is_number_unsigned()) throw Error(Errc::config, "seed: expected a non-negative integer");
    cfg.seed = doc["seed"].get<std::uint64_t>();
  }
  if (doc.contains("output")) {
    if (!doc["output"].is_string()) throw Error(Errc::config, "output: expected a path string");
    cfg.out_dir = doc["output"].get<std::string>();
  }
  cfg.base_dir = std::move(base_dir);
  cfg.doc = std::move(doc);
  return cfg;
}

inline ExperimentConfig load_config(const std::filesystem::path& path, const Overrides& ov) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::config, "cannot open config " + path.string());
  Json doc;
  try {
    doc = Json::parse(in, nullptr, true, true);
  } catch (const Json::parse_error& e) {
    throw Error(Errc::config, path.string() + ": " + e.what());
  }
  return make_config(std::move(doc), ov, path.parent_path());
}

namespace detail {

inline const Json& section(const ExperimentConfig& cfg, const std::string& name) {
  if (!cfg.doc.contains(name) || !cfg.doc[name].is_object()) {
    throw Error(Errc::config, "missing section '" + name + "'");
  }
  return cfg.doc[name];
}

inline Rational exact_field(const Json& sec, const std::string& path, const std::string& key,
                            std::optional<Rational> fallback = std::nullopt) {
  if (!sec.contains(key)) {
    if (fallback) return *fallback;
    throw Error(Errc::config, path + "." + key + ": missing");
  }
  return exact_from_json(sec[key], path + "." + key);
}

inline std::int64_t int_field(const Json& sec, const std::string& path, const std::string& key,
                              std::optional<std::int64_t> fallback = std::nullopt) {
  if (!sec.contains(key)) {
    if (fallback) return *fallback;
    throw Error(Errc::config, path + "." + key + ": missing");
  }
  if (!sec[key].is_number_integer()) throw Error(Errc::config, path + "." + key + ": expected an integer");
  return sec[key].get<std::int64_t>();
}

inline std::string string_field(const Json& sec, const std::string& path, const std::string& key,
                                std::optional<std::string> fallback = std::nullopt) {
  if (!sec.contains(key)) {
    if (fallback) return *fallback;
    throw Error(Errc::config, path + "." + key + ": missing");
  }
  if (!sec[key].is_string()) throw Error(Errc::config, path + "." + key + ": expected a string");
  return sec[key].get<std::string>();
}

inline std::uint64_t require_seed(const ExperimentConfig& cfg) {
  if (!cfg.seed) throw Error(Errc::config, "seed: a master seed is required for this command");
  return *cfg.seed;
}

inline void write_file(const std::filesystem::path& path, const std::string& content) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::io, "cannot write " + path.string());
  out << content;
  if (!out) throw Error(Errc::io, "write failed for " + path.string());
}

inline Json provenance(const ExperimentConfig& cfg) {
  Json j;
  j["config_hash"] = hex64(config_hash(cfg.doc));
  if (cfg.seed) {
    j["seed"] = *cfg.seed;
  } else {
    j["seed"] = nullptr;
  }
  return j;
}

inline std::string dump(const Json& j) { return j.dump(2) + "\n"; }

}  // namespace detail

inline MechanismParams parse_mechanism(const ExperimentConfig& cfg) {
  const Json& m = detail::section(cfg, "mechanism");
  MechanismParams p;
  p.block_size = static_cast<int>(detail::int_field(m, "mechanism", "B"));
  p.payment_index = static_cast<int>(detail::int_field(m, "mechanism", "k"));
  p.max_collusion = static_cast<int>(detail::int_field(m, "mechanism", "c", 1));
  p.theta = detail::exact_field(m, "mechanism", "theta");
  p.gamma = detail::exact_field(m, "mechanism", "gamma", Rational{1});
  p.tick = detail::exact_field(m, "mechanism", "delta", Rational{1});
  p.tail_bound = detail::exact_field(m, "mechanism", "kappa", Rational{1});
  const auto verdict = validate_params(p);
  if (!verdict.usable()) {
    throw Error(Errc::config, "mechanism: " + std::string(errc_name(*verdict.error)) + ": " + verdict.message);
  }
  return p;
}

inline LongRunParams parse_long_run(const ExperimentConfig& cfg) {
  const Json& s = detail::section(cfg, "long_run");
  LongRunParams lr;
  lr.cartel = s.value("cartel", false);
  lr.initial_share = detail::exact_field(s, "long_run", "pi0", lr.cartel ? std::optional<Rational>{1} : std::nullopt);
  lr.reward = detail::exact_field(s, "long_run", "R");
  try {
    validate_long_run(lr);
  } catch (const Error& e) {
    throw Error(Errc::config, std::string("long_run: ") + e.what());
  }
  return lr;
}

/// Scenario plus the verifier bounds from the "scenario" section.
struct ScenarioConfig {
  Scenario scenario;
  StrategyBounds bounds;
  ProfileOptions profiles;
  std::vector<std::vector<ParticipantId>> coalitions;
};

inline ScenarioConfig parse_scenario(const ExperimentConfig& cfg) {
  ScenarioConfig out;
  out.scenario.params = parse_mechanism(cfg);
  out.scenario.lr = parse_long_run(cfg);
  const Json& s = detail::section(cfg, "scenario");
  if (!s.contains("values") || !s["values"].is_array()) throw Error(Errc::config, "scenario.values: expected an array");
  for (std::size_t i = 0; i < s["values"].size(); ++i) {
    const auto v = exact_from_json(s["values"][i], "scenario.values[" + std::to_string(i) + "]");
    if (!is_multiple_of(v, out.scenario.params.tick)) {
      throw Error(Errc::config, "scenario.values[" + std::to_string(i) + "]: " + to_string(v) +
                                    " is not a multiple of delta");
    }
    out.scenario.true_values.push_back(v);
  }
  if (out.scenario.true_values.size() <= static_cast<std::size_t>(out.scenario.params.payment_index)) {
    throw Error(Errc::config, "scenario.values: need more than k users");
  }
  Rational top{0};
  for (const auto& v : out.scenario.true_values) top = std::max(top, v);
  out.scenario.grid_max = detail::exact_field(s, "scenario", "grid_max", top + 2 * out.scenario.params.tick);
  out.bounds.grid_max = out.scenario.grid_max;
  out.bounds.max_fakes = static_cast<int>(detail::int_field(s, "scenario", "max_fakes", 1));
  out.bounds.user_sybils = s.value("user_sybils", true);
  out.bounds.budget = static_cast<std::uint64_t>(detail::int_field(s, "scenario", "budget", 20'000'000));
  if (s.contains("sample")) out.bounds.sample = static_cast<std::uint64_t>(detail::int_field(s, "scenario", "sample"));
  out.bounds.seed = cfg.seed.value_or(0);
  out.profiles.corner_profiles = s.value("corner_profiles", true);
  out.profiles.random_profiles = static_cast<std::size_t>(detail::int_field(s, "scenario", "random_profiles", 0));
  out.profiles.seed = cfg.seed.value_or(0);
  if (out.bounds.max_fakes < 0) throw Error(Errc::config, "scenario.max_fakes: must be >= 0");
  if (s.contains("colluders")) {
    for (const auto& group : s["colluders"]) {
      std::vector<ParticipantId> ids;
      for (const auto& id : group) {
        if (!id.is_number_unsigned() || id.get<std::size_t>() >= out.scenario.true_values.size()) {
          throw Error(Errc::config, "scenario.colluders: unknown user " + id.dump());
        }
        ids.push_back(id.get<ParticipantId>());
      }
      if (ids.empty() || static_cast<int>(ids.size()) > out.scenario.params.max_collusion) {
        throw Error(Errc::config, "scenario.colluders: each group needs 1..c users");
      }
      out.coalitions.push_back(std::move(ids));
    }
  } else {
    out.coalitions = coalitions_up_to(out.scenario.true_values.size(), out.scenario.params.max_collusion);
  }
  try {
    require_grid(out.scenario, out.bounds.grid_max);
  } catch (const Error& e) {
    throw Error(Errc::config, std::string("scenario: ") + e.what());
  }
  return out;
}

// ---------------------------------------------------------------------------
// simulate

inline int run_simulate(const ExperimentConfig& cfg, std::ostream& log = std::cout) {
  const std::uint64_t seed = detail::require_seed(cfg);
  const Json& s = detail::section(cfg, "simulate");
  const Rational m0 = detail::exact_field(s, "simulate", "M0");
  const Rational n0 = detail::exact_field(s, "simulate", "N0");
  const Rational p = detail::exact_field(s, "simulate", "p");
  const Rational ph = detail::exact_field(s, "simulate", "p_h");
  const Rational reward = detail::exact_field(s, "simulate", "R");
  if (m0 <= 0 || m0 >= n0) throw Error(Errc::config, "simulate: need 0 < M0 < N0");
  const StakeSetup setup = scale_to_integers(m0, n0, p, ph, reward);

  SimulationOptions opts;
  opts.horizon = detail::int_field(s, "simulate", "horizon");
  const auto paths = detail::int_field(s, "simulate", "paths");
  if (paths < 1) throw Error(Errc::config, "simulate.paths: must be >= 1");
  opts.paths = static_cast<std::size_t>(paths);
  opts.master_seed = seed;
  opts.keep_paths = static_cast<std::size_t>(detail::int_field(s, "simulate", "keep_paths", 4));
  opts.record_every = detail::int_field(s, "simulate", "record_every", std::max<std::int64_t>(1, opts.horizon / 1000));
  if (s.contains("checkpoints")) {
    for (const auto& t : s["checkpoints"]) {
      if (!t.is_number_integer()) throw Error(Errc::config, "simulate.checkpoints: expected integers");
      opts.checkpoints.push_back(t.get<std::int64_t>());
    }
  }
  if (s.contains("threads")) opts.threads = static_cast<unsigned>(detail::int_field(s, "simulate", "threads"));
  validate_options(opts);

  const auto result = simulate(setup, opts);

  LongRunParams lr;
  lr.initial_share = m0 / n0;
  lr.reward = reward;
  lr.honest_return = ph;
  const Rational target = long_run_miner_utility(p, lr);
  const double gap = std::abs(result.estimate - to_double(target));

  Json summary = detail::provenance(cfg);
  summary["estimate"] = result.estimate;
  summary["std_error"] = result.std_error;
  put_exact(summary, "target", target);
  summary["abs_gap"] = gap;
  summary["rel_gap"] = target != 0 ? gap / to_double(target) : gap;
  summary["regime"] = p == ph ? "honest" : (p > ph ? "overpaid" : "underpaid");
  summary["horizon"] = opts.horizon;
  summary["paths"] = opts.paths;
  summary["scale"] = setup.scale;

  const std::size_t kept = std::min(opts.keep_paths, result.trajectories.size());
  std::span<const StakeTrajectory> kept_trajs(result.trajectories.data(), kept);
  if (p != ph) {
    Rational worst{0};
    for (const auto& t : result.trajectories) worst = std::max(worst, pathwise_invariant_residual(t));
    put_exact(summary, "invariant_residual", worst);
  }
  if (p == ph) {
    const auto mc = honest_martingale_check(result.trajectories, lr.initial_share);
    Json rows = Json::array();
    for (const auto& r : mc.rows) {
      rows.push_back({{"t", r.epoch},
                      {"mean_ratio", r.mean_ratio},
                      {"std_error", r.std_error},
                      {"deviation", r.deviation},
                      {"total_deterministic", r.total_deterministic},
                      {"pass", r.pass}});
    }
    summary["martingale"] = {{"rows", rows}, {"pass", mc.pass}};
  } else if (p > ph) {
    const auto sub = submartingale_diagnostic(result.trajectories, setup.scale);
    summary["submartingale"] = {{"pole", sub.pole},
                                {"excluded", sub.excluded},
                                {"mean_increment", sub.mean_increment},
                                {"increment_std_error", sub.increment_std_error},
                                {"mean_terminal", sub.mean_terminal},
                                {"limit", sub.limit},
                                {"bound_violations", sub.bound_violations}};
  }

  const auto prov = detail::provenance(cfg);
  std::ostringstream csv;
  write_trajectories_csv(csv, kept_trajs,
                         {"config_hash=" + prov["config_hash"].get<std::string>(),
                          "seed=" + std::to_string(seed), "scale=" + std::to_string(setup.scale)});
  detail::write_file(cfg.out_dir / "trajectories.csv", csv.str());
  detail::write_file(cfg.out_dir / "simulate_summary.json", detail::dump(summary));
  log << "estimate " << result.estimate << " (se " << result.std_error << "), target " << to_double(target)
      << ", gap " << gap << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// check

inline int run_check(const ExperimentConfig& cfg, std::ostream& log = std::cout) {
  const auto sc = parse_scenario(cfg);
  std::string mode = "theorem";
  if (cfg.doc.contains("check")) mode = detail::string_field(cfg.doc["check"], "check", "mode", "theorem");
  if (mode != "theorem" && mode != "prop34") throw Error(Errc::config, "check.mode: expected theorem or prop34");

  Json report = detail::provenance(cfg);
  report["mode"] = mode;
  report["scenario"] = scenario_json(sc.scenario);
  bool violated = false;

  if (mode == "theorem") {
    Json results = Json::array();
    auto record = [&](const VerificationResult& r) {
      violated = violated || !r.ok();
      for (const auto& w : r.warnings) log << r.property << " warning: " << w << "\n";
      log << r.property << ": " << r.violations.size() << " violations over " << r.evaluated << " strategies"
          << (r.within_hypotheses ? "" : " (out-of-theorem)") << "\n";
      results.push_back(to_json(sc.scenario, r));
    };
    record(check_uic(sc.scenario, sc.bounds, sc.profiles));
    record(check_mic(sc.scenario, sc.bounds, sc.profiles));
    for (const auto& coalition : sc.coalitions) {
      auto r = check_cscp(sc.scenario, coalition, sc.bounds);
      r.property += " colluders=" + Json(coalition).dump();
      record(r);
    }
    report["results"] = std::move(results);
  } else {
    const Rational eps = sc.scenario.params.tick;
    const auto r = tail_overbid_report(sc.scenario, eps);
    std::vector<Rational> sorted = sc.scenario.true_values;
    std::sort(sorted.begin(), sorted.end(), std::greater<>());
    Rational tail{0};
    for (std::size_t i = static_cast<std::size_t>(sc.scenario.params.payment_index);
         i < std::min(sorted.size(), static_cast<std::size_t>(sc.scenario.params.block_size)); ++i) {
      tail += sorted[i];
    }
    Json cx = to_json(sc.scenario, r);
    put_exact(cx, "epsilon", eps);
    put_exact(cx, "predicted_delta", collusive_overbid_gain(sc.scenario.params, sc.scenario.lr, tail, eps));
    report["counterexample"] = std::move(cx);
    violated = r.violation;
    log << "tail overbid by " << to_string(eps) << ": joint delta " << to_string(r.delta) << "\n";
  }
  report["violations_found"] = violated;
  detail::write_file(cfg.out_dir / "check_report.json", detail::dump(report));
  return violated ? kExitViolation : kExitOk;
}

// ---------------------------------------------------------------------------
// sweep

struct SweepPoint {
  double x = 0.0;
  std::optional<double> theta_bar;
};

struct SweepResult {
  std::string axis;
  std::vector<SweepPoint> points;
  std::string expected_shape;  // non-decreasing | non-increasing | unimodal
  bool shape_pass = true;
  std::optional<double> peak;  // predicted peak on the R axis
  std::vector<std::string> failures;
};

struct SweepBase {
  double pi0 = 0.5;
  double reward = 1.0;
  double tick = 2.0;
  double kappa = 10.0;
  double gamma = 1.0;
};

inline std::optional<double> theta_bar_at(const SweepBase& b, const std::string& axis, double x) {
  SweepBase v = b;
  if (axis == "pi0") v.pi0 = x;
  else if (axis == "R") v.reward = x;
  else if (axis == "delta") v.tick = x;
  else if (axis == "kappa") v.kappa = x;
  return theta_bar<double>(v.pi0, v.reward, v.tick, v.kappa, v.gamma);
}

/// Evaluates theta_bar along one axis and checks the expected shape:
/// non-decreasing in delta and pi0, non-increasing in kappa, and rising then
/// falling in R around (1-pi0) kappa gamma delta / ((1-pi0) kappa + pi0 delta).
inline SweepResult sweep_theta_bar(const SweepBase& base, const std::string& axis, std::span<const double> grid) {
  SweepResult out;
  out.axis = axis;
  if (axis != "pi0" && axis != "R" && axis != "delta" && axis != "kappa") {
    throw Error(Errc::config, "sweep.axis: expected one of pi0, R, delta, kappa");
  }
  for (std::size_t i = 1; i < grid.size(); ++i) {
    if (!(grid[i] > grid[i - 1])) throw Error(Errc::config, "sweep grid must be strictly increasing");
  }
  for (double x : grid) out.points.push_back({x, theta_bar_at(base, axis, x)});

  constexpr double tol = 1e-12;
  auto le = [](double a, double b) { return a <= b + tol * std::max(1.0, std::abs(b)); };
  if (axis == "R") {
    out.expected_shape = "unimodal";
    out.peak = theta_bar_peak_reward<double>(base.pi0, base.tick, base.kappa, base.gamma);
  } else {
    out.expected_shape = axis == "kappa" ? "non-increasing" : "non-decreasing";
  }
  const SweepPoint* prev = nullptr;
  for (const auto& pt : out.points) {
    if (!pt.theta_bar) {
      prev = nullptr;
      continue;
    }
    if (*pt.theta_bar > base.gamma + tol) out.failures.push_back("theta_bar above gamma at x=" + std::to_string(pt.x));
    if (prev) {
      bool good = true;
      if (axis == "R" && prev->x < *out.peak && pt.x > *out.peak) {
        const auto top = theta_bar_at(base, axis, *out.peak);
        good = top && le(*prev->theta_bar, *top) && le(*pt.theta_bar, *top);
      } else {
        bool rising = axis != "kappa";
        if (axis == "R") rising = pt.x <= *out.peak;
        good = rising ? le(*prev->theta_bar, *pt.theta_bar) : le(*pt.theta_bar, *prev->theta_bar);
      }
      if (!good) out.failures.push_back("shape broken between x=" + std::to_string(prev->x) + " and " + std::to_string(pt.x));
    }
    prev = &pt;
  }
  out.shape_pass = out.failures.empty();
  return out;
}

inline std::vector<double> linear_grid(double from, double to, std::size_t points) {
  if (points < 2 || !(to > from)) throw Error(Errc::config, "sweep: need points >= 2 and to > from");
  std::vector<double> grid(points);
  for (std::size_t i = 0; i < points; ++i) {
    grid[i] = from + (to - from) * static_cast<double>(i) / static_cast<double>(points - 1);
  }
  return grid;
}

inline int run_sweep(const ExperimentConfig& cfg, std::ostream& log = std::cout) {
  const Json& s = detail::section(cfg, "sweep");
  const std::string axis = detail::string_field(s, "sweep", "axis");
  SweepBase base;
  auto num = [&](const char* key, double fallback) {
    return s.contains(key) ? to_double(exact_from_json(s[key], std::string("sweep.") + key)) : fallback;
  };
  base.pi0 = num("pi0", base.pi0);
  base.reward = num("R", base.reward);
  base.tick = num("delta", base.tick);
  base.kappa = num("kappa", base.kappa);
  base.gamma = num("gamma", base.gamma);
  if (base.gamma <= 0 || base.gamma > 1) throw Error(Errc::config, "sweep.gamma: outside (0, 1]");
  const auto grid = linear_grid(num("from", 0.0), num("to", 1.0),
                                static_cast<std::size_t>(detail::int_field(s, "sweep", "points", 100)));
  const auto result = sweep_theta_bar(base, axis, grid);

  const auto prov = detail::provenance(cfg);
  std::ostringstream csv;
  csv << "# bsplab sweep csv v1\n# config_hash=" << prov["config_hash"].get<std::string>() << "\n# seed="
      << (cfg.seed ? std::to_string(*cfg.seed) : "none") << "\n";
  csv << axis << ",theta_bar,feasible\n";
  char buf[64];
  for (const auto& pt : result.points) {
    std::snprintf(buf, sizeof buf, "%.12g", pt.x);
    csv << buf << ',';
    if (pt.theta_bar) {
      std::snprintf(buf, sizeof buf, "%.12g", *pt.theta_bar);
      csv << buf << ",1\n";
    } else {
      csv << ",0\n";
    }
  }
  Json verdict = prov;
  verdict["axis"] = axis;
  verdict["expected_shape"] = result.expected_shape;
  verdict["pass"] = result.shape_pass;
  verdict["failures"] = result.failures;
  if (result.peak) verdict["predicted_peak"] = *result.peak;
  std::size_t infeasible = 0;
  for (const auto& pt : result.points) infeasible += pt.theta_bar ? 0 : 1;
  verdict["infeasible_points"] = infeasible;
  detail::write_file(cfg.out_dir / ("sweep_" + axis + ".csv"), csv.str());
  detail::write_file(cfg.out_dir / ("sweep_" + axis + ".json"), detail::dump(verdict));
  log << "sweep " << axis << ": " << result.points.size() << " points, shape " << result.expected_shape
      << (result.shape_pass ? " ok" : " BROKEN") << "\n";
  return result.shape_pass ? kExitOk : kExitViolation;
}

// ---------------------------------------------------------------------------
// block

/// Mempool text: one bid per line, "id,owner,value,amount[,fake]"; blank lines
/// and lines starting with '#' are ignored, as is a header line starting with "id".
inline std::vector<Bid> parse_mempool(std::istream& in, const Rational& tick) {
  std::vector<Bid> bids;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos || line[first] == '#') continue;
    if (line.compare(first, 2, "id") == 0) continue;
    std::vector<std::string> cols;
    std::stringstream ss(line);
    for (std::string col; std::getline(ss, col, ',');) cols.push_back(col);
    auto fail = [&](const std::string& msg) {
      throw Error(Errc::parse, "mempool line " + std::to_string(lineno) + ": " + msg);
    };
    if (cols.size() < 4 || cols.size() > 5) fail("expected id,owner,value,amount[,fake]");
    Bid b;
    try {
      const auto id = parse_exact(cols[0]);
      const auto owner = parse_exact(cols[1]);
      if (!is_integer(id) || id < 0 || !is_integer(owner) || owner < 0) fail("id and owner must be non-negative integers");
      b.id = static_cast<BidId>(id.numerator());
      b.owner = static_cast<ParticipantId>(owner.numerator());
      b.value = parse_exact(cols[2]);
      b.amount = parse_exact(cols[3]);
    } catch (const Error& e) {
      if (e.code() == Errc::parse && std::string(e.what()).find("mempool line") != std::string::npos) throw;
      fail(e.what());
    }
    if (cols.size() == 5) {
      std::string f = cols[4];
      f.erase(0, f.find_first_not_of(" \t"));
      f.erase(f.find_last_not_of(" \t") + 1);
      if (f == "1" || f == "true" || f == "fake") b.fake = true;
      else if (!(f == "0" || f == "false" || f.empty())) fail("fake flag must be 0/1/true/false");
    }
    try {
      validate_bid(b, tick);
    } catch (const Error& e) {
      fail(e.what());
    }
    for (const auto& other : bids) {
      if (other.id == b.id) fail("duplicate bid id " + std::to_string(b.id));
    }
    bids.push_back(b);
  }
  return bids;
}

inline int run_block_command(const ExperimentConfig& cfg, std::ostream& log = std::cout) {
  const Json& s = detail::section(cfg, "block");
  const MechanismParams params = parse_mechanism(cfg);
  const auto verdict = validate_params(params);

  std::filesystem::path mempool_path = detail::string_field(s, "block", "mempool");
  if (mempool_path.is_relative()) mempool_path = cfg.base_dir / mempool_path;
  std::ifstream in(mempool_path);
  if (!in) throw Error(Errc::config, "block.mempool: cannot open " + mempool_path.string());
  std::vector<Bid> mempool;
  try {
    mempool = parse_mempool(in, params.tick);
  } catch (const Error& e) {
    throw Error(Errc::config, e.what());
  }
  if (mempool.size() <= static_cast<std::size_t>(params.payment_index)) {
    throw Error(Errc::config, "block.mempool: need more than k bids, got " + std::to_string(mempool.size()));
  }
  std::optional<std::uint64_t> sample_seed;
  if (s.value("sample", false)) sample_seed = detail::require_seed(cfg);

  const BlockOutcome outcome = run_block(mempool, params, sample_seed);
  Json j = detail::provenance(cfg);
  j["status"] = verdict.status == ParamsStatus::trivial ? "TRIVIAL" : "OK";
  j["outcome"] = to_json(outcome);
  detail::write_file(cfg.out_dir / "block.json", detail::dump(j));
  log << "p=" << to_string(outcome.payment) << " revenue=" << to_string(outcome.miner_revenue)
      << " burn=" << to_string(outcome.expected_burn) << " q=" << to_string(outcome.confirm_prob)
      << (outcome.trivial ? " TRIVIAL" : "") << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// counterexample

inline int run_counterexample(const ExperimentConfig& cfg, std::ostream& log = std::cout) {
  const auto params = parse_mechanism(cfg);
  const auto lr = parse_long_run(cfg);
  std::uint64_t budget = 1'000'000;
  int max_ticks = 8;
  if (cfg.doc.contains("counterexample")) {
    const Json& s = cfg.doc["counterexample"];
    budget = static_cast<std::uint64_t>(detail::int_field(s, "counterexample", "budget", 1'000'000));
    max_ticks = static_cast<int>(detail::int_field(s, "counterexample", "max_value_ticks", 8));
  }
  const auto found = find_cscp_counterexample(params, lr, budget, max_ticks);
  Json j = detail::provenance(cfg);
  j["found"] = found.has_value();
  if (found) {
    j["counterexample"] = to_json(found->scenario, found->report);
    j["evaluated"] = found->evaluated;
    log << "counterexample found, joint delta " << to_string(found->report.delta) << "\n";
  } else {
    log << "no counterexample within budget " << budget << "\n";
  }
  detail::write_file(cfg.out_dir / "counterexample.json", detail::dump(j));
  return found ? kExitViolation : kExitOk;
}

/// Dispatches a named command; maps configuration problems to exit code 2.
inline int run_command(const std::string& command, const ExperimentConfig& cfg, std::ostream& log = std::cout,
                       std::ostream& err = std::cerr) {
  try {
    if (command == "simulate") return run_simulate(cfg, log);
    if (command == "check") return run_check(cfg, log);
    if (command == "sweep") return run_sweep(cfg, log);
    if (command == "block") return run_block_command(cfg, log);
    if (command == "counterexample") return run_counterexample(cfg, log);
    err << "unknown command " << command << "\n";
    return kExitConfig;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    switch (e.code()) {
      case Errc::io:
      case Errc::invariant:
      case Errc::budget_exceeded:
        return 1;
      default:
        return kExitConfig;
    }
  } catch (const Json::exception& e) {
    err << "error: config: " << e.what() << "\n";
    return kExitConfig;
  }
}

}  // namespace bsplab
