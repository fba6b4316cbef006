#pragma once

// Strict gamma-utilities of users and miner, the long-run (stake-compounding)
// miner utility, and the admissible-theta bound.

#include <optional>
#include <span>

#include "bsplab/error.hpp"
#include "bsplab/exact.hpp"
#include "bsplab/mechanism.hpp"

namespace bsplab {

struct LongRunParams {
  Rational initial_share{1, 2};  // pi0
  Rational reward{0};            // R, stake handed out per block
  Rational honest_return{0};     // p_h, miner's gamma-return when everyone is honest
  bool cartel = false;           // pi0 == 1 allowed only here
};

inline void validate_long_run(const LongRunParams& lr) {
  if (lr.cartel) {
    if (lr.initial_share != 1) throw Error(Errc::config, "cartel mode requires pi0 = 1");
  } else if (lr.initial_share <= 0 || lr.initial_share >= 1) {
    throw Error(Errc::config, "pi0=" + to_string(lr.initial_share) + " outside (0, 1)");
  }
  if (lr.reward < 0) throw Error(Errc::config, "reward R must be non-negative");
}

struct UtilityBreakdown {
  Rational confirmed_gain{0};
  Rational overbid_penalty{0};
  Rational total{0};
};

/// Expected strict gamma-utility of `user` over the confirmation draw.
/// A top-k bid is confirmed with probability q; every unconfirmed overbid,
/// including bids that never made it into the block, costs gamma (b - v).
inline UtilityBreakdown expected_user_utility(ParticipantId user, std::span<const Bid> mempool,
                                              const BlockOutcome& outcome, const MechanismParams& params) {
  UtilityBreakdown out;
  const Rational q = outcome.confirm_prob;
  for (const Bid& bid : mempool) {
    if (bid.owner != user) continue;
    const Rational overbid = positive_part(bid.amount - bid.value);
    if (outcome.in_top_k(bid.id)) {
      out.confirmed_gain += q * (bid.value - outcome.payment);
      out.overbid_penalty += (1 - q) * params.gamma * overbid;
    } else {
      out.overbid_penalty += params.gamma * overbid;
    }
  }
  out.total = out.confirmed_gain - out.overbid_penalty;
  return out;
}

/// Expected strict gamma-return of the miner: revenue, minus the payment on
/// each confirmed fake, minus gamma times every unconfirmed fake amount.
inline Rational expected_miner_return(const BlockOutcome& outcome, std::span<const Bid> miner_fakes,
                                      const MechanismParams& params) {
  Rational ret = outcome.miner_revenue;
  const Rational q = outcome.confirm_prob;
  for (const Bid& fake : miner_fakes) {
    if (outcome.in_top_k(fake.id)) {
      ret -= q * outcome.payment;
      ret -= (1 - q) * params.gamma * fake.amount;
    } else {
      ret -= params.gamma * fake.amount;
    }
  }
  return ret;
}

/// Long-run average stake growth of a miner whose per-block return is
/// `actual_return`. Discontinuous at the honest return.
inline Rational long_run_miner_utility(const Rational& actual_return, const LongRunParams& lr) {
  if (lr.cartel) return actual_return + lr.reward;
  if (actual_return == lr.honest_return) return lr.initial_share * (lr.honest_return + lr.reward);
  if (actual_return > lr.honest_return) return actual_return + lr.reward;
  return Rational{0};
}

struct UtilityJumps {
  Rational overshoot{0};
  Rational undershoot{0};
};

inline UtilityJumps utility_jumps(const LongRunParams& lr, const Rational& epsilon) {
  if (epsilon <= 0) throw Error(Errc::precondition, "epsilon must be positive");
  const Rational base = lr.honest_return + lr.reward;
  const Rational share = lr.cartel ? Rational{1} : lr.initial_share;
  return {epsilon + (1 - share) * base, lr.cartel ? Rational{0} : share * base};
}

/// Largest theta for which UIC, MIC and c-SCP hold together:
///   min(pi0 R / ((1 - pi0) kappa), (gamma tick - (1 - pi0) R) / ((1 - pi0) kappa + tick)),
/// or nullopt when tick <= (1 - pi0) R / gamma. In cartel mode the bound is gamma.
template <class T>
std::optional<T> theta_bar(T pi0, T reward, T tick, T kappa, T gamma, bool cartel = false) {
  if (cartel) return gamma;
  const T rest = T(1) - pi0;
  if (tick * gamma <= rest * reward) return std::nullopt;
  const T undershoot_cap = pi0 * reward / (rest * kappa);
  const T overshoot_cap = (gamma * tick - rest * reward) / (rest * kappa + tick);
  return undershoot_cap < overshoot_cap ? undershoot_cap : overshoot_cap;
}

/// Reward at which theta_bar peaks along the R axis.
template <class T>
T theta_bar_peak_reward(T pi0, T tick, T kappa, T gamma) {
  const T rest = T(1) - pi0;
  return rest * kappa * gamma * tick / (rest * kappa + pi0 * tick);
}

inline Rational joint_utility(const Rational& miner_utility, std::span<const Rational> colluder_utilities) {
  Rational sum = miner_utility;
  for (const auto& u : colluder_utilities) sum += u;
  return sum;
}

}  // namespace bsplab
