#pragma once

// Stake dynamics of a proof-of-stake miner competing against the honest rest
// of the network. Each epoch the miner is selected with probability M/N; when
// selected both M and N grow by G = p + R, otherwise only N grows by
// G_h = p_h + R. All quantities are integers in a common base unit so the
// conservation identity of the strategic case is checked with zero residual.
//
// The long-run utility liminf E[M_t]/t is estimated by the Cesaro value M_T/T
// at the horizon; the chain converges almost surely in all three regimes
// (p = p_h, p > p_h, p < p_h), which justifies reading off the terminal value.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdint>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "bsplab/error.hpp"
#include "bsplab/exact.hpp"
#include "bsplab/parallel.hpp"

namespace bsplab {

struct StakeState {
  std::int64_t miner = 0;  // M_t
  std::int64_t total = 1;  // N_t
  std::int64_t epoch = 0;  // t
};

/// Per-epoch increments, in integer base units.
struct StakeModel {
  std::int64_t payment = 0;         // p, what the miner actually collects
  std::int64_t honest_payment = 0;  // p_h, what an honest proposer collects
  std::int64_t reward = 0;          // R

  std::int64_t gain() const { return payment + reward; }
  std::int64_t honest_gain() const { return honest_payment + reward; }
  bool honest() const { return payment == honest_payment; }
};

/// Exact-rational stake experiment inputs, and their integer scaling.
struct StakeSetup {
  StakeState initial;
  StakeModel model;
  std::int64_t scale = 1;  // one original currency unit = `scale` base units
};

inline StakeSetup scale_to_integers(const Rational& miner0, const Rational& total0, const Rational& payment,
                                    const Rational& honest_payment, const Rational& reward) {
  const std::vector<Rational> all{miner0, total0, payment, honest_payment, reward};
  for (const auto& v : all) {
    if (v < 0) throw Error(Errc::config, "stake quantities must be non-negative");
  }
  if (total0 <= 0) throw Error(Errc::config, "initial total stake must be positive");
  if (miner0 > total0) throw Error(Errc::config, "initial miner stake exceeds total stake");
  const std::int64_t scale = common_denominator(all);
  auto as_int = [scale](const Rational& v) {
    const Rational s = v * Rational{scale};
    return s.numerator();
  };
  StakeSetup setup;
  setup.scale = scale;
  setup.initial = {as_int(miner0), as_int(total0), 0};
  setup.model = {as_int(payment), as_int(honest_payment), as_int(reward)};
  if (setup.model.gain() <= 0 && setup.model.honest_gain() <= 0) {
    throw Error(Errc::config, "p + R and p_h + R cannot both be zero");
  }
  return setup;
}

/// One epoch of the chain.
template <class URBG>
StakeState step(const StakeState& state, const StakeModel& model, URBG& rng) {
  StakeState next = state;
  ++next.epoch;
  bool selected = false;
  if (state.miner >= state.total) {
    selected = true;
  } else if (state.miner > 0) {
    std::uniform_int_distribution<std::int64_t> draw(0, state.total - 1);
    selected = draw(rng) < state.miner;
  }
  if (selected) {
    next.miner += model.gain();
    next.total += model.gain();
  } else {
    next.total += model.honest_gain();
  }
  return next;
}

inline StakeState step(const StakeState& state, const StakeModel& model, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return step(state, model, rng);
}

struct StakeTrajectory {
  std::uint64_t path_id = 0;
  StakeModel model;
  std::vector<StakeState> states;  // recorded epochs, always starting at t = 0
};

struct SimulationOptions {
  std::int64_t horizon = 1;
  std::size_t paths = 1;
  std::uint64_t master_seed = 0;
  std::size_t keep_paths = 0;           // paths whose states are recorded on the stride
  std::int64_t record_every = 1;        // stride for kept paths
  std::vector<std::int64_t> checkpoints;  // recorded on every path
  unsigned threads = default_threads();
};

struct SimulationResult {
  double estimate = 0.0;   // mean over paths of M_T / T, in original units
  double std_error = 0.0;
  std::vector<double> terminal_rates;  // per path
  std::vector<StakeTrajectory> trajectories;
  std::int64_t scale = 1;
};

inline void validate_options(const SimulationOptions& opts) {
  if (opts.horizon < 1) throw Error(Errc::config, "horizon must be >= 1");
  if (opts.paths < 1) throw Error(Errc::config, "paths must be >= 1");
  if (opts.record_every < 1) throw Error(Errc::config, "record_every must be >= 1");
  for (auto t : opts.checkpoints) {
    if (t < 0 || t > opts.horizon) throw Error(Errc::config, "checkpoint " + std::to_string(t) + " outside horizon");
  }
}

/// Runs `paths` independent chains; path i is driven by derive_seed(master, i).
inline SimulationResult simulate(const StakeSetup& setup, const SimulationOptions& opts) {
  validate_options(opts);
  std::vector<char> is_checkpoint(static_cast<std::size_t>(opts.horizon) + 1, 0);
  for (auto t : opts.checkpoints) is_checkpoint[static_cast<std::size_t>(t)] = 1;
  is_checkpoint[0] = 1;
  is_checkpoint[static_cast<std::size_t>(opts.horizon)] = 1;

  SimulationResult result;
  result.scale = setup.scale;
  result.terminal_rates.resize(opts.paths);
  result.trajectories.resize(opts.paths);

  parallel_for(opts.paths, opts.threads, [&](std::size_t i) {
    std::mt19937_64 rng(derive_seed(opts.master_seed, i));
    const bool kept = i < opts.keep_paths;
    StakeTrajectory& traj = result.trajectories[i];
    traj.path_id = i;
    traj.model = setup.model;
    StakeState s = setup.initial;
    traj.states.push_back(s);
    for (std::int64_t t = 1; t <= opts.horizon; ++t) {
      s = step(s, setup.model, rng);
      if (is_checkpoint[static_cast<std::size_t>(t)] || (kept && t % opts.record_every == 0)) {
        traj.states.push_back(s);
      }
    }
    result.terminal_rates[i] =
        static_cast<double>(s.miner) / static_cast<double>(setup.scale) / static_cast<double>(opts.horizon);
  });

  double sum = 0.0;
  for (double r : result.terminal_rates) sum += r;
  const double n = static_cast<double>(opts.paths);
  result.estimate = sum / n;
  if (opts.paths > 1) {
    double ss = 0.0;
    for (double r : result.terminal_rates) ss += (r - result.estimate) * (r - result.estimate);
    result.std_error = std::sqrt(ss / (n - 1.0) / n);
  }
  return result;
}

/// (G_h - G) M_t + G N_t - G G_h t; constant along every path when p != p_h.
inline __int128 scaled_conserved_quantity(const StakeModel& model, const StakeState& s) {
  const __int128 g = model.gain();
  const __int128 gh = model.honest_gain();
  return (gh - g) * s.miner + g * s.total - g * gh * s.epoch;
}

/// Max over recorded epochs of |M_t + G/(G_h-G) N_t + G G_h/(G-G_h) t - c|,
/// in base units. Exact; any nonzero value is a simulator bug.
inline Rational pathwise_invariant_residual(const StakeTrajectory& traj) {
  if (traj.model.honest()) throw Error(Errc::degenerate, "identity undefined when p = p_h");
  if (traj.states.empty()) return Rational{0};
  const __int128 k0 = scaled_conserved_quantity(traj.model, traj.states.front());
  __int128 worst = 0;
  for (const auto& s : traj.states) {
    __int128 d = scaled_conserved_quantity(traj.model, s) - k0;
    if (d < 0) d = -d;
    if (d > worst) worst = d;
  }
  const std::int64_t denom = traj.model.honest_gain() - traj.model.gain();
  return Rational{static_cast<std::int64_t>(worst), denom < 0 ? -denom : denom};
}

/// L_t = N_t - G_h t.
inline std::int64_t lead(const StakeModel& model, const StakeState& s) {
  return s.total - model.honest_gain() * s.epoch;
}

/// I_t = (L_t + c (G - G_h)/G) / (t - (G - G_h) c / (G G_h)), with c the
/// conserved constant of the path started at `initial`.
inline double submartingale_value(const StakeModel& model, const StakeState& initial, const StakeState& s) {
  const long double g = static_cast<long double>(model.gain());
  const long double gh = static_cast<long double>(model.honest_gain());
  const long double k0 = static_cast<long double>(scaled_conserved_quantity(model, initial));
  const long double num = g * gh * static_cast<long double>(lead(model, s)) - gh * k0;
  const long double den = g * gh * static_cast<long double>(s.epoch) + k0;
  return static_cast<double>(num / den);
}

/// Epoch at which the denominator of I_t vanishes: -K_0 / (G G_h).
inline double submartingale_pole(const StakeModel& model, const StakeState& initial) {
  const long double k0 = static_cast<long double>(scaled_conserved_quantity(model, initial));
  return static_cast<double>(-k0 / (static_cast<long double>(model.gain()) * model.honest_gain()));
}

struct MartingaleRow {
  std::int64_t epoch = 0;
  double mean_ratio = 0.0;
  double std_error = 0.0;
  double deviation = 0.0;  // |mean_ratio - pi0|
  bool total_deterministic = true;  // every path has N_t = N_0 + G_h t
  bool pass = true;
};

struct MartingaleCheck {
  double initial_share = 0.0;
  std::vector<MartingaleRow> rows;
  bool pass = true;
};

/// Compares the cross-path mean of M_t/N_t with pi0 at every epoch recorded
/// on all paths; a row passes within `sigmas` standard errors.
inline MartingaleCheck honest_martingale_check(std::span<const StakeTrajectory> trajs, const Rational& pi0,
                                               double sigmas = 4.0) {
  MartingaleCheck out;
  out.initial_share = to_double(pi0);
  if (trajs.empty()) return out;
  if (!trajs.front().model.honest()) throw Error(Errc::wrong_mode, "martingale check needs p = p_h");

  std::vector<std::int64_t> common;
  for (const auto& s : trajs.front().states) common.push_back(s.epoch);
  for (const auto& traj : trajs) {
    std::vector<std::int64_t> kept;
    std::size_t j = 0;
    for (auto t : common) {
      while (j < traj.states.size() && traj.states[j].epoch < t) ++j;
      if (j < traj.states.size() && traj.states[j].epoch == t) kept.push_back(t);
    }
    common = std::move(kept);
  }

  const double n = static_cast<double>(trajs.size());
  for (auto t : common) {
    MartingaleRow row;
    row.epoch = t;
    double sum = 0.0;
    std::vector<double> ratios;
    ratios.reserve(trajs.size());
    for (const auto& traj : trajs) {
      const auto& s0 = traj.states.front();
      auto it = std::lower_bound(traj.states.begin(), traj.states.end(), t,
                                 [](const StakeState& s, std::int64_t e) { return s.epoch < e; });
      if (it->total != s0.total + traj.model.honest_gain() * t) row.total_deterministic = false;
      const double r = static_cast<double>(it->miner) / static_cast<double>(it->total);
      ratios.push_back(r);
      sum += r;
    }
    row.mean_ratio = sum / n;
    double ss = 0.0;
    for (double r : ratios) ss += (r - row.mean_ratio) * (r - row.mean_ratio);
    row.std_error = trajs.size() > 1 ? std::sqrt(ss / (n - 1.0) / n) : 0.0;
    row.deviation = std::abs(row.mean_ratio - out.initial_share);
    const double tol = sigmas * row.std_error + 1e-12;
    row.pass = row.total_deterministic && row.deviation <= tol;
    out.pass = out.pass && row.pass;
    out.rows.push_back(row);
  }
  return out;
}

struct SubmartingalePoint {
  std::uint64_t path_id = 0;
  std::int64_t epoch = 0;
  double value = 0.0;
  bool excluded = false;  // at or before the pole
};

struct SubmartingaleSummary {
  std::vector<SubmartingalePoint> series;
  double pole = 0.0;
  std::size_t excluded = 0;
  double mean_increment = 0.0;
  double increment_std_error = 0.0;
  double mean_terminal = 0.0;
  double limit = 0.0;                 // G - G_h, in original units
  std::size_t bound_violations = 0;   // epochs with L_t > (G - G_h)(t - c/G_h)
};

/// Emits I_t along each trajectory and summarizes its drift. Requires p > p_h.
inline SubmartingaleSummary submartingale_diagnostic(std::span<const StakeTrajectory> trajs, std::int64_t scale = 1) {
  SubmartingaleSummary out;
  if (trajs.empty()) return out;
  const StakeModel model = trajs.front().model;
  if (model.payment <= model.honest_payment) throw Error(Errc::wrong_mode, "sub-martingale diagnostic needs p > p_h");
  const __int128 g = model.gain();
  const __int128 gh = model.honest_gain();
  out.limit = static_cast<double>(g - gh) / static_cast<double>(scale);
  out.pole = submartingale_pole(model, trajs.front().states.front());

  std::vector<double> increments;
  double terminal_sum = 0.0;
  for (const auto& traj : trajs) {
    const StakeState& s0 = traj.states.front();
    const __int128 k0 = scaled_conserved_quantity(model, s0);
    std::optional<double> prev;
    for (const auto& s : traj.states) {
      // G_h L_t <= (G - G_h) G_h t + K_0
      if (gh * lead(model, s) > (g - gh) * gh * s.epoch + k0) ++out.bound_violations;
      SubmartingalePoint pt{traj.path_id, s.epoch, submartingale_value(model, s0, s) / static_cast<double>(scale),
                            static_cast<double>(s.epoch) <= out.pole};
      if (pt.excluded) {
        ++out.excluded;
        prev.reset();
      } else {
        if (prev) increments.push_back(pt.value - *prev);
        prev = pt.value;
      }
      out.series.push_back(pt);
    }
    terminal_sum += out.series.back().value;
  }
  out.mean_terminal = terminal_sum / static_cast<double>(trajs.size());
  if (!increments.empty()) {
    double sum = 0.0;
    for (double d : increments) sum += d;
    const double n = static_cast<double>(increments.size());
    out.mean_increment = sum / n;
    double ss = 0.0;
    for (double d : increments) ss += (d - out.mean_increment) * (d - out.mean_increment);
    out.increment_std_error = n > 1 ? std::sqrt(ss / (n - 1.0) / n) : 0.0;
  }
  return out;
}

/// Trajectory CSV, columns path_id,t,M,N,L,I. M, N and L are in base units
/// (see the scale in the header); I is blank on honest paths.
inline void write_trajectories_csv(std::ostream& os, std::span<const StakeTrajectory> trajs,
                                   const std::vector<std::string>& header_comments) {
  os << "# bsplab trajectory csv v1\n";
  for (const auto& line : header_comments) os << "# " << line << "\n";
  os << "path_id,t,M,N,L,I\n";
  char buf[64];
  for (const auto& traj : trajs) {
    const StakeState& s0 = traj.states.front();
    for (const auto& s : traj.states) {
      os << traj.path_id << ',' << s.epoch << ',' << s.miner << ',' << s.total << ',' << lead(traj.model, s) << ',';
      if (!traj.model.honest()) {
        std::snprintf(buf, sizeof buf, "%.12g", submartingale_value(traj.model, s0, s));
        os << buf;
      }
      os << '\n';
    }
  }
}

}  // namespace bsplab
