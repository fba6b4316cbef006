#pragma once

// Bounded-exhaustive incentive-compatibility checks for BSP(theta).
//
// Every strategy space is finite: bids live on the tick grid {0, tick, ...,
// grid_max}, the miner injects at most `max_fakes` fake bids, and a "no
// violation" verdict means no improvement exists inside those bounds. Utility
// comparisons are exact (expected utilities via the confirmation probability
// q, long-run miner utility with its discontinuity at the honest return).

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "bsplab/error.hpp"
#include "bsplab/exact.hpp"
#include "bsplab/mechanism.hpp"
#include "bsplab/parallel.hpp"
#include "bsplab/utility.hpp"

namespace bsplab {

/// A small instance: one real bid per user, user i owns bid id i.
struct Scenario {
  std::vector<Rational> true_values;
  MechanismParams params;
  LongRunParams lr;  // honest_return is recomputed from the baseline profile
  Rational grid_max{0};
};

enum class DeviationKind { user_rebid, miner_delete, miner_fake, collusion };

constexpr std::string_view kind_name(DeviationKind kind) {
  switch (kind) {
    case DeviationKind::user_rebid: return "USER_REBID";
    case DeviationKind::miner_delete: return "MINER_DELETE";
    case DeviationKind::miner_fake: return "MINER_FAKE";
    case DeviationKind::collusion: return "COLLUSION";
  }
  return "?";
}

struct Rebid {
  ParticipantId user = 0;
  Rational amount{0};
  friend bool operator==(const Rebid&, const Rebid&) = default;
};

struct DeviationStrategy {
  DeviationKind kind = DeviationKind::collusion;
  std::vector<ParticipantId> deletions;  // users whose real bids the miner drops
  std::vector<Rational> fakes;           // miner-owned, value 0
  std::vector<Rebid> rebids;
  std::vector<Rational> sybils;          // extra zero-value bids owned by `sybil_owner`
  std::optional<ParticipantId> sybil_owner;

  bool is_identity(std::span<const Rational> baseline) const {
    if (!deletions.empty() || !fakes.empty() || !sybils.empty()) return false;
    return std::all_of(rebids.begin(), rebids.end(), [&](const Rebid& r) { return baseline[r.user] == r.amount; });
  }
};

/// Whose utilities are summed into the "joint" utility being protected.
struct Coalition {
  bool miner = false;
  std::vector<ParticipantId> users;
};

struct DeviationReport {
  DeviationStrategy strategy;
  std::vector<Rational> baseline_bids;  // bids of every user before the deviation
  Coalition coalition;
  Rational honest_joint{0};
  Rational deviated_joint{0};
  Rational delta{0};
  bool violation = false;
};

// ---------------------------------------------------------------------------
// Evaluation

inline BidId fake_id_base(std::size_t users) { return static_cast<BidId>(users); }

/// Mempool after applying `strategy` to `baseline_bids`. Real bids keep ids
/// 0..n-1; fakes and sybils get fresh ids after them.
inline std::vector<Bid> apply_strategy(const Scenario& sc, std::span<const Rational> baseline_bids,
                                       const DeviationStrategy& strategy) {
  const std::size_t n = sc.true_values.size();
  std::vector<Bid> pool;
  pool.reserve(n + strategy.fakes.size() + strategy.sybils.size());
  std::vector<char> deleted(n, 0);
  for (auto u : strategy.deletions) deleted.at(u) = 1;
  for (std::size_t i = 0; i < n; ++i) {
    if (deleted[i]) continue;
    pool.push_back(Bid{i, i, sc.true_values[i], baseline_bids[i], false});
  }
  for (const auto& r : strategy.rebids) {
    if (deleted.at(r.user)) continue;
    for (auto& b : pool) {
      if (b.id == r.user) b.amount = r.amount;
    }
  }
  BidId next = fake_id_base(n);
  for (const auto& f : strategy.fakes) pool.push_back(Bid{next++, kMinerId, Rational{0}, f, true});
  for (const auto& s : strategy.sybils) pool.push_back(Bid{next++, *strategy.sybil_owner, Rational{0}, s, true});
  return pool;
}

inline std::vector<Bid> miner_fakes_of(std::span<const Bid> pool) {
  std::vector<Bid> out;
  for (const auto& b : pool) {
    if (b.owner == kMinerId) out.push_back(b);
  }
  return out;
}

/// Honest-run miner revenue on the baseline bids: the reference return p_h.
inline Rational honest_return(const Scenario& sc, std::span<const Rational> baseline_bids) {
  const auto pool = apply_strategy(sc, baseline_bids, {});
  return run_block(pool, sc.params).miner_revenue;
}

/// Joint utility of `coalition` after the deviation, or nullopt when the
/// resulting mempool cannot fill a valid block (fewer than k+1 bids).
inline std::optional<Rational> evaluate_joint(const Scenario& sc, std::span<const Rational> baseline_bids,
                                              const Coalition& coalition, const DeviationStrategy& strategy,
                                              const Rational& reference_return) {
  const auto pool = apply_strategy(sc, baseline_bids, strategy);
  if (pool.size() <= static_cast<std::size_t>(sc.params.payment_index)) return std::nullopt;
  const BlockOutcome outcome = run_block(pool, sc.params);
  Rational joint{0};
  if (coalition.miner) {
    LongRunParams lr = sc.lr;
    lr.honest_return = reference_return;
    const auto fakes = miner_fakes_of(pool);
    joint += long_run_miner_utility(expected_miner_return(outcome, fakes, sc.params), lr);
  }
  for (auto u : coalition.users) joint += expected_user_utility(u, pool, outcome, sc.params).total;
  return joint;
}

/// Recomputes a report from scratch; used to confirm every reported violation.
inline DeviationReport replay(const Scenario& sc, const DeviationReport& report) {
  DeviationReport out = report;
  const Rational ref = honest_return(sc, report.baseline_bids);
  out.honest_joint = *evaluate_joint(sc, report.baseline_bids, report.coalition, {}, ref);
  const auto dev = evaluate_joint(sc, report.baseline_bids, report.coalition, report.strategy, ref);
  if (!dev) throw Error(Errc::invariant, "replayed strategy yields an invalid block");
  out.deviated_joint = *dev;
  out.delta = out.deviated_joint - out.honest_joint;
  out.violation = out.delta > 0;
  return out;
}

// ---------------------------------------------------------------------------
// Strategy spaces

struct StrategyBounds {
  Rational grid_max{0};
  int max_fakes = 1;
  bool user_sybils = false;             // let a deviating user add one zero-value identity
  std::uint64_t budget = 20'000'000;    // max strategies evaluated exhaustively
  std::optional<std::uint64_t> sample;  // evaluate this many uniformly drawn strategies instead
  std::uint64_t seed = 0;
};

/// {0, tick, 2 tick, ..., grid_max}.
inline std::vector<Rational> bid_grid(const Rational& tick, const Rational& grid_max) {
  std::vector<Rational> grid;
  for (Rational a{0}; a <= grid_max; a += tick) grid.push_back(a);
  return grid;
}

inline std::vector<std::vector<ParticipantId>> all_subsets(std::span<const ParticipantId> items) {
  std::vector<std::vector<ParticipantId>> out;
  const std::size_t m = items.size();
  out.reserve(std::size_t{1} << m);
  for (std::size_t mask = 0; mask < (std::size_t{1} << m); ++mask) {
    std::vector<ParticipantId> subset;
    for (std::size_t j = 0; j < m; ++j) {
      if (mask & (std::size_t{1} << j)) subset.push_back(items[j]);
    }
    out.push_back(std::move(subset));
  }
  return out;
}

/// Multisets of size min_size..max_size drawn from `amounts`, non-increasing within each.
inline std::vector<std::vector<Rational>> multisets(std::span<const Rational> amounts, int min_size, int max_size) {
  std::vector<std::vector<Rational>> out;
  std::vector<Rational> current;
  auto rec = [&](auto&& self, std::size_t from) -> void {
    if (static_cast<int>(current.size()) >= min_size) out.push_back(current);
    if (static_cast<int>(current.size()) == max_size) return;
    for (std::size_t i = from; i < amounts.size(); ++i) {
      current.push_back(amounts[i]);
      self(self, i);
      current.pop_back();
    }
  };
  rec(rec, 0);
  return out;
}

/// A finite strategy space, stored as a Cartesian product of component
/// choices and enumerated in mixed-radix order. Lazy: strategies are built
/// on demand by index.
class StrategyStream {
 public:
  StrategyStream(DeviationKind kind, std::vector<std::vector<ParticipantId>> deletion_sets,
                 std::vector<std::vector<Rational>> fake_sets, std::vector<std::vector<Rational>> sybil_sets,
                 std::optional<ParticipantId> sybil_owner, std::vector<ParticipantId> rebidders,
                 std::vector<Rational> rebid_grid, std::vector<Rational> baseline)
      : kind_(kind),
        deletions_(std::move(deletion_sets)),
        fakes_(std::move(fake_sets)),
        sybils_(std::move(sybil_sets)),
        sybil_owner_(sybil_owner),
        rebidders_(std::move(rebidders)),
        grid_(std::move(rebid_grid)),
        baseline_(std::move(baseline)) {
    radices_ = {deletions_.size(), fakes_.size(), sybils_.size()};
    for (std::size_t i = 0; i < rebidders_.size(); ++i) radices_.push_back(grid_.size());
    raw_size_ = 1;
    for (auto r : radices_) raw_size_ *= r;
    // The identity strategy, if present in the product, is skipped.
    std::vector<std::size_t> digits{0, 0, 0};
    bool present = !deletions_.empty() && deletions_[0].empty() && !fakes_.empty() && fakes_[0].empty() &&
                   !sybils_.empty() && sybils_[0].empty();
    for (auto u : rebidders_) {
      auto it = std::find(grid_.begin(), grid_.end(), baseline_[u]);
      if (it == grid_.end()) present = false;
      digits.push_back(it == grid_.end() ? 0 : static_cast<std::size_t>(it - grid_.begin()));
    }
    if (present && raw_size_ > 0) {
      std::uint64_t idx = 0;
      for (std::size_t d = digits.size(); d-- > 0;) idx = idx * radices_[d] + digits[d];
      identity_ = idx;
    }
  }

  DeviationKind kind() const { return kind_; }
  std::uint64_t size() const { return raw_size_ - (identity_ ? 1 : 0); }

  DeviationStrategy at(std::uint64_t index) const {
    if (index >= size()) throw Error(Errc::invariant, "strategy index out of range");
    std::uint64_t raw = identity_ && index >= *identity_ ? index + 1 : index;
    std::vector<std::size_t> digits(radices_.size());
    for (std::size_t d = 0; d < radices_.size(); ++d) {
      digits[d] = static_cast<std::size_t>(raw % radices_[d]);
      raw /= radices_[d];
    }
    DeviationStrategy s;
    s.kind = kind_;
    s.deletions = deletions_[digits[0]];
    s.fakes = fakes_[digits[1]];
    s.sybils = sybils_[digits[2]];
    if (!s.sybils.empty()) s.sybil_owner = sybil_owner_;
    for (std::size_t i = 0; i < rebidders_.size(); ++i) {
      const auto& amount = grid_[digits[3 + i]];
      if (amount != baseline_[rebidders_[i]]) s.rebids.push_back({rebidders_[i], amount});
    }
    return s;
  }

  /// Sequential cursor.
  std::optional<DeviationStrategy> next() {
    if (cursor_ >= size()) return std::nullopt;
    return at(cursor_++);
  }

 private:
  DeviationKind kind_;
  std::vector<std::vector<ParticipantId>> deletions_;
  std::vector<std::vector<Rational>> fakes_;
  std::vector<std::vector<Rational>> sybils_;
  std::optional<ParticipantId> sybil_owner_;
  std::vector<ParticipantId> rebidders_;
  std::vector<Rational> grid_;
  std::vector<Rational> baseline_;
  std::vector<std::size_t> radices_;
  std::uint64_t raw_size_ = 0;
  std::optional<std::uint64_t> identity_;
  std::uint64_t cursor_ = 0;
};

/// Ids of the real bids the honest mechanism includes for `baseline_bids`.
inline std::vector<ParticipantId> honest_inclusion(const Scenario& sc, std::span<const Rational> baseline_bids) {
  const auto pool = apply_strategy(sc, baseline_bids, {});
  std::vector<ParticipantId> ids;
  for (const auto& b : include(pool, sc.params)) ids.push_back(b.owner);
  return ids;
}

/// Strategy space of one kind.
///  - user_rebid: `actors` holds the single deviating user; every grid bid, plus
///    one optional zero-value identity when bounds.user_sybils.
///  - miner_delete: every non-empty subset of the honest inclusion list.
///  - miner_fake: 1..max_fakes fakes on the grid, combined with any deletion
///    subset of the honest inclusion list (a replacement is delete + inject).
///  - collusion: deletions of non-colluder bids x 0..max_fakes fakes x every
///    grid rebid of each colluder in `actors`.
inline StrategyStream enumerate_strategies(const Scenario& sc, DeviationKind kind, const StrategyBounds& bounds,
                                           std::span<const ParticipantId> actors = {},
                                           std::optional<std::vector<Rational>> baseline = std::nullopt) {
  const std::vector<Rational> base = baseline ? *baseline : sc.true_values;
  const auto grid = bid_grid(sc.params.tick, bounds.grid_max);
  std::vector<Rational> positive(grid.begin() + 1, grid.end());
  const std::vector<std::vector<Rational>> none_r{{}};
  const std::vector<std::vector<ParticipantId>> none_p{{}};

  switch (kind) {
    case DeviationKind::user_rebid: {
      if (actors.size() != 1) throw Error(Errc::invariant, "user_rebid needs exactly one actor");
      auto sybils = bounds.user_sybils ? multisets(positive, 0, 1) : none_r;
      return StrategyStream(kind, none_p, none_r, std::move(sybils), actors[0], {actors[0]}, grid, base);
    }
    case DeviationKind::miner_delete: {
      const auto included = honest_inclusion(sc, base);
      return StrategyStream(kind, all_subsets(included), none_r, none_r, std::nullopt, {}, grid, base);
    }
    case DeviationKind::miner_fake: {
      const auto included = honest_inclusion(sc, base);
      return StrategyStream(kind, all_subsets(included), multisets(positive, 1, bounds.max_fakes), none_r,
                            std::nullopt, {}, grid, base);
    }
    case DeviationKind::collusion: {
      std::vector<ParticipantId> others;
      for (ParticipantId u = 0; u < sc.true_values.size(); ++u) {
        if (std::find(actors.begin(), actors.end(), u) == actors.end()) others.push_back(u);
      }
      return StrategyStream(kind, all_subsets(others), multisets(positive, 0, bounds.max_fakes), none_r,
                            std::nullopt, std::vector<ParticipantId>(actors.begin(), actors.end()), grid, base);
    }
  }
  throw Error(Errc::invariant, "unknown deviation kind");
}

// ---------------------------------------------------------------------------
// Checks

struct VerificationResult {
  std::string property;
  std::vector<DeviationReport> violations;
  std::uint64_t total = 0;      // strategies in the bounded space(s)
  std::uint64_t evaluated = 0;
  std::uint64_t skipped = 0;    // strategies leaving fewer than k+1 bids
  std::optional<Rational> max_delta;
  bool exhaustive = true;
  bool within_hypotheses = true;
  std::vector<std::string> warnings;
  Rational grid_max{0};
  Rational confirm_prob{0};     // exact q used in every expectation
  Rational theta_over_c{0};     // the coarser per-user confirmation bound

  bool ok() const { return violations.empty(); }

  void merge(VerificationResult&& other) {
    for (auto& v : other.violations) violations.push_back(std::move(v));
    total += other.total;
    evaluated += other.evaluated;
    skipped += other.skipped;
    if (other.max_delta && (!max_delta || *other.max_delta > *max_delta)) max_delta = other.max_delta;
    exhaustive = exhaustive && other.exhaustive;
  }
};

namespace detail {

inline VerificationResult start_result(const Scenario& sc, std::string property, const StrategyBounds& bounds) {
  VerificationResult r;
  r.property = std::move(property);
  r.grid_max = bounds.grid_max;
  r.confirm_prob = confirmation_probability(sc.params);
  r.theta_over_c = sc.params.theta / Rational{sc.params.max_collusion};
  if (r.confirm_prob < r.theta_over_c) {
    r.warnings.push_back("exact q=" + to_string(r.confirm_prob) + " is below the theta/c=" +
                         to_string(r.theta_over_c) + " bound; deviations are judged on q");
  }
  return r;
}

/// Evaluates a stream against the honest baseline, exhaustively or on a
/// uniform sample, and folds the verdicts into `out`.
inline void run_stream(const Scenario& sc, const StrategyStream& stream, std::span<const Rational> baseline,
                       const Coalition& coalition, const StrategyBounds& bounds, VerificationResult& out) {
  const Rational ref = honest_return(sc, baseline);
  const Rational honest = *evaluate_joint(sc, baseline, coalition, {}, ref);
  VerificationResult part;
  part.total = stream.size();

  std::vector<std::uint64_t> indices;
  std::uint64_t limit = stream.size();
  if (bounds.sample && *bounds.sample < stream.size()) {
    part.exhaustive = false;
    std::mt19937_64 rng(derive_seed(bounds.seed, stream.size()));
    std::uniform_int_distribution<std::uint64_t> pick(0, stream.size() - 1);
    indices.resize(*bounds.sample);
    for (auto& i : indices) i = pick(rng);
    std::sort(indices.begin(), indices.end());
    limit = indices.size();
  }

  for (std::uint64_t j = 0; j < limit; ++j) {
    if (part.evaluated >= bounds.budget) {
      out.merge(std::move(part));
      throw Error(Errc::budget_exceeded,
                  out.property + ": evaluated " + std::to_string(out.evaluated) + " of " + std::to_string(out.total) +
                      " strategies before reaching the budget; " + std::to_string(out.violations.size()) +
                      " violations so far");
    }
    const auto strategy = stream.at(indices.empty() ? j : indices[j]);
    ++part.evaluated;
    const auto dev = evaluate_joint(sc, baseline, coalition, strategy, ref);
    if (!dev) {
      ++part.skipped;
      continue;
    }
    const Rational delta = *dev - honest;
    if (!part.max_delta || delta > *part.max_delta) part.max_delta = delta;
    if (delta > 0) {
      part.violations.push_back(DeviationReport{strategy, std::vector<Rational>(baseline.begin(), baseline.end()),
                                                coalition, honest, *dev, delta, true});
    }
  }
  out.merge(std::move(part));
}

}  // namespace detail

/// Bid profiles the other users are quantified over in UIC/MIC checks.
struct ProfileOptions {
  bool corner_profiles = true;  // all-equal and max-gap profiles
  std::size_t random_profiles = 0;
  std::uint64_t seed = 0;
};

/// The honest profile, followed by adversarial corners and random draws on the grid.
inline std::vector<std::vector<Rational>> other_bid_profiles(const Scenario& sc, const Rational& grid_max,
                                                             const ProfileOptions& opts) {
  std::vector<std::vector<Rational>> out{sc.true_values};
  const std::size_t n = sc.true_values.size();
  const auto grid = bid_grid(sc.params.tick, grid_max);
  if (opts.corner_profiles) {
    out.emplace_back(n, grid[grid.size() / 2]);
    std::vector<Rational> gap(n);
    for (std::size_t i = 0; i < n; ++i) gap[i] = i % 2 == 0 ? grid.back() : grid.front();
    out.push_back(std::move(gap));
  }
  std::mt19937_64 rng(opts.seed);
  std::uniform_int_distribution<std::size_t> pick(0, grid.size() - 1);
  for (std::size_t p = 0; p < opts.random_profiles; ++p) {
    std::vector<Rational> prof(n);
    for (auto& b : prof) b = grid[pick(rng)];
    out.push_back(std::move(prof));
  }
  return out;
}

inline void require_grid(const Scenario& sc, const Rational& grid_max) {
  if (sc.true_values.size() <= static_cast<std::size_t>(sc.params.payment_index)) {
    throw Error(Errc::too_few_bids, "scenario needs more than k users");
  }
  Rational top{0};
  for (const auto& v : sc.true_values) {
    if (!is_multiple_of(v, sc.params.tick)) {
      throw Error(Errc::bad_bid, "true value " + to_string(v) + " is not on the tick grid");
    }
    top = std::max(top, v);
  }
  if (!is_multiple_of(grid_max, sc.params.tick) || grid_max < top + 2 * sc.params.tick) {
    throw Error(Errc::grid_too_small,
                "grid_max " + to_string(grid_max) + " must be a tick multiple >= max value + 2 ticks");
  }
}

/// Every user, every grid bid (b = 0 withholds), others fixed at each profile.
inline VerificationResult check_uic(const Scenario& sc, const StrategyBounds& bounds,
                                    const ProfileOptions& profiles = {}) {
  require_grid(sc, bounds.grid_max);
  auto result = detail::start_result(sc, "UIC", bounds);
  for (const auto& profile : other_bid_profiles(sc, bounds.grid_max, profiles)) {
    for (ParticipantId u = 0; u < sc.true_values.size(); ++u) {
      std::vector<Rational> baseline = profile;
      baseline[u] = sc.true_values[u];
      const std::vector<ParticipantId> actor{u};
      const auto stream = enumerate_strategies(sc, DeviationKind::user_rebid, bounds, actor, baseline);
      detail::run_stream(sc, stream, baseline, Coalition{false, {u}}, bounds, result);
    }
  }
  return result;
}

/// Miner deletions and fake injections on each profile of user bids.
inline VerificationResult check_mic(const Scenario& sc, const StrategyBounds& bounds,
                                    const ProfileOptions& profiles = {}) {
  require_grid(sc, bounds.grid_max);
  validate_long_run(sc.lr);
  auto result = detail::start_result(sc, "MIC", bounds);
  if (sc.params.theta > sc.params.gamma) {
    result.within_hypotheses = false;
    result.warnings.push_back("PRECONDITION: theta > gamma, outside the MIC guarantee");
  }
  for (const auto& profile : other_bid_profiles(sc, bounds.grid_max, profiles)) {
    for (auto kind : {DeviationKind::miner_delete, DeviationKind::miner_fake}) {
      const auto stream = enumerate_strategies(sc, kind, bounds, {}, profile);
      detail::run_stream(sc, stream, profile, Coalition{true, {}}, bounds, result);
    }
  }
  return result;
}

/// Hypotheses of the joint UIC/MIC/c-SCP guarantee that fail for `sc`.
inline std::vector<std::string> cscp_hypothesis_failures(const Scenario& sc) {
  std::vector<std::string> fails;
  const auto& p = sc.params;
  const auto& lr = sc.lr;
  if (!lr.cartel && (lr.initial_share <= 0 || lr.initial_share >= 1)) fails.push_back("pi0 outside (0,1)");
  const Rational share = lr.cartel ? Rational{1} : lr.initial_share;
  if (!lr.cartel && p.tick * p.gamma <= (1 - share) * lr.reward) {
    fails.push_back("tick <= (1-pi0) R / gamma");
  }
  const auto bar = theta_bar<Rational>(share, lr.reward, p.tick, p.tail_bound, p.gamma, lr.cartel);
  if (!bar || p.theta > *bar) {
    fails.push_back("theta=" + to_string(p.theta) + " exceeds theta_bar=" + (bar ? to_string(*bar) : "INFEASIBLE"));
  }
  std::vector<Rational> sorted = sc.true_values;
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  Rational tail{0};
  for (std::size_t i = static_cast<std::size_t>(p.payment_index);
       i < std::min(sorted.size(), static_cast<std::size_t>(p.block_size)); ++i) {
    tail += sorted[i];
  }
  if (tail > p.tail_bound) {
    fails.push_back("honest tail sum " + to_string(tail) + " exceeds kappa=" + to_string(p.tail_bound));
  }
  return fails;
}

/// Miner plus the `colluders` deviating jointly: deletions, fake
/// injections and colluder rebids. Runs regardless of the hypotheses; when
/// they fail the verdict is labeled out-of-theorem.
inline VerificationResult check_cscp(const Scenario& sc, std::span<const ParticipantId> colluders,
                                     const StrategyBounds& bounds) {
  require_grid(sc, bounds.grid_max);
  validate_long_run(sc.lr);
  if (colluders.size() > static_cast<std::size_t>(sc.params.max_collusion)) {
    throw Error(Errc::precondition, "collusion larger than c");
  }
  auto result = detail::start_result(sc, "c-SCP", bounds);
  for (const auto& f : cscp_hypothesis_failures(sc)) {
    result.within_hypotheses = false;
    result.warnings.push_back("PRECONDITION: " + f);
  }
  const auto stream = enumerate_strategies(sc, DeviationKind::collusion, bounds, colluders);
  detail::run_stream(sc, stream, sc.true_values,
                     Coalition{true, std::vector<ParticipantId>(colluders.begin(), colluders.end())}, bounds, result);
  return result;
}

/// Every coalition of 1..c users.
inline std::vector<std::vector<ParticipantId>> coalitions_up_to(std::size_t users, int max_size) {
  std::vector<std::vector<ParticipantId>> out;
  std::vector<ParticipantId> ids(users);
  std::iota(ids.begin(), ids.end(), ParticipantId{0});
  for (auto& s : all_subsets(ids)) {
    if (!s.empty() && static_cast<int>(s.size()) <= max_size) out.push_back(std::move(s));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Collusion counterexamples

/// Joint change when the user at rank k+1 overbids by epsilon while staying
/// outside the top k: (1-pi0)(theta * tail + R) + (theta - gamma) epsilon.
inline Rational collusive_overbid_gain(const MechanismParams& params, const LongRunParams& lr,
                                       const Rational& honest_tail_sum, const Rational& epsilon) {
  return (1 - lr.initial_share) * (params.theta * honest_tail_sum + lr.reward) + (params.theta - params.gamma) * epsilon;
}

/// The tail-overbid deviation: the user ranked k+1 raises its bid by epsilon.
inline DeviationReport tail_overbid_report(const Scenario& sc, const Rational& epsilon) {
  std::vector<ParticipantId> order(sc.true_values.size());
  std::iota(order.begin(), order.end(), ParticipantId{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](auto a, auto b) { return sc.true_values[a] > sc.true_values[b]; });
  const ParticipantId user = order.at(static_cast<std::size_t>(sc.params.payment_index));
  DeviationReport report;
  report.strategy.kind = DeviationKind::collusion;
  report.strategy.rebids.push_back({user, sc.true_values[user] + epsilon});
  report.baseline_bids = sc.true_values;
  report.coalition = Coalition{true, {user}};
  return replay(sc, report);
}

struct Counterexample {
  Scenario scenario;
  DeviationReport report;
  std::uint64_t evaluated = 0;
};

/// Searches small instances (values on the tick grid, single colluders,
/// rebids only) for a profitable miner-user collusion. Returns the first
/// violation in a deterministic order, or nullopt when the budget runs out.
inline std::optional<Counterexample> find_cscp_counterexample(const MechanismParams& params, const LongRunParams& lr,
                                                              std::uint64_t search_budget, int max_value_ticks = 8) {
  require_usable(params);
  validate_long_run(lr);
  const std::size_t n = static_cast<std::size_t>(params.block_size);
  std::uint64_t evaluated = 0;
  StrategyBounds bounds;
  bounds.max_fakes = 0;

  // Non-increasing value vectors with entries in 0..top ticks, by increasing top.
  for (int top = 1; top <= max_value_ticks; ++top) {
    std::vector<int> ticks(n, 0);
    ticks[0] = top;
    auto visit = [&](auto&& self, std::size_t pos) -> std::optional<Counterexample> {
      if (pos == n) {
        Scenario sc;
        sc.params = params;
        sc.lr = lr;
        for (int t : ticks) sc.true_values.push_back(params.tick * Rational{t});
        sc.grid_max = params.tick * Rational{top + 2};
        bounds.grid_max = sc.grid_max;
        for (ParticipantId u = 0; u < n; ++u) {
          const std::vector<ParticipantId> coalition{u};
          const auto stream = enumerate_strategies(sc, DeviationKind::collusion, bounds, coalition);
          const Rational ref = honest_return(sc, sc.true_values);
          const Coalition who{true, coalition};
          const Rational honest = *evaluate_joint(sc, sc.true_values, who, {}, ref);
          for (std::uint64_t i = 0; i < stream.size(); ++i) {
            if (evaluated >= search_budget) return std::nullopt;
            ++evaluated;
            const auto s = stream.at(i);
            const auto dev = evaluate_joint(sc, sc.true_values, who, s, ref);
            if (dev && *dev > honest) {
              return Counterexample{sc, DeviationReport{s, sc.true_values, who, honest, *dev, *dev - honest, true},
                                    evaluated};
            }
          }
        }
        return std::nullopt;
      }
      for (int t = ticks[pos - 1]; t >= 0; --t) {
        ticks[pos] = t;
        if (auto found = self(self, pos + 1)) return found;
        if (evaluated >= search_budget) return std::nullopt;
      }
      return std::nullopt;
    };
    if (auto found = visit(visit, 1)) return found;
    if (evaluated >= search_budget) break;
  }
  return std::nullopt;
}

}  // namespace bsplab
