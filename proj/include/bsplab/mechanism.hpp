#pragma once

// Burning second-price auction BSP(theta): inclusion, confirmation, payment
// and miner revenue rules, plus parameter and block validity checks.

#include <algorithm>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "bsplab/error.hpp"
#include "bsplab/exact.hpp"

namespace bsplab {

using BidId = std::uint64_t;
using ParticipantId = std::uint64_t;

/// Owner id reserved for the miner's own (fake) bids.
inline constexpr ParticipantId kMinerId = std::numeric_limits<ParticipantId>::max();

struct MechanismParams {
  int block_size = 0;      // B
  int payment_index = 0;   // k, confirmed bids pay the (k+1)-th amount
  int max_collusion = 1;   // c
  Rational theta{1};       // confirmation / revenue fraction in (0, 1]
  Rational gamma{1};       // overbid discount in (0, 1]
  Rational tick{1};        // minimum bid increment
  Rational tail_bound{1};  // bound on the honest tail sum b_{k+1} + ... + b_B
};

struct Bid {
  BidId id = 0;
  ParticipantId owner = 0;
  Rational value{0};
  Rational amount{0};
  bool fake = false;
};

enum class ParamsStatus { ok, trivial, invalid };

struct ParamsVerdict {
  ParamsStatus status = ParamsStatus::ok;
  std::optional<Errc> error;
  std::string message;

  bool usable() const { return status != ParamsStatus::invalid; }
};

/// Number of bids confirmed per block: floor(theta * k / c).
inline std::int64_t confirmed_count(const MechanismParams& params) {
  return floor_of(params.theta * Rational{params.payment_index} / Rational{params.max_collusion});
}

/// Smallest k allowed for the given B and c: ceil(2cB / (2c + 1)).
inline int min_payment_index(int block_size, int max_collusion) {
  const long num = 2L * max_collusion * block_size;
  const long den = 2L * max_collusion + 1;
  return static_cast<int>((num + den - 1) / den);
}

inline ParamsVerdict validate_params(const MechanismParams& params) {
  auto invalid = [](Errc code, std::string msg) {
    return ParamsVerdict{ParamsStatus::invalid, code, std::move(msg)};
  };
  if (params.block_size < 2 || params.max_collusion < 1 || params.payment_index < 1) {
    return invalid(Errc::bad_size, "need B >= 2, k >= 1, c >= 1");
  }
  const int k_min = min_payment_index(params.block_size, params.max_collusion);
  if (params.payment_index < k_min || params.payment_index >= params.block_size) {
    return invalid(Errc::k_range, "k=" + std::to_string(params.payment_index) + " outside [" +
                                      std::to_string(k_min) + ", " + std::to_string(params.block_size) + ")");
  }
  if (params.theta <= 0 || params.theta > 1) {
    return invalid(Errc::bad_fraction, "theta=" + to_string(params.theta) + " outside (0, 1]");
  }
  if (params.gamma <= 0 || params.gamma > 1) {
    return invalid(Errc::bad_fraction, "gamma=" + to_string(params.gamma) + " outside (0, 1]");
  }
  if (params.tick <= 0) return invalid(Errc::bad_tick, "tick must be positive");
  if (params.tail_bound <= 0) return invalid(Errc::bad_tick, "tail bound kappa must be positive");
  if (confirmed_count(params) == 0) {
    return {ParamsStatus::trivial, std::nullopt, "floor(theta*k/c) = 0: nothing is confirmed"};
  }
  return {};
}

inline void require_usable(const MechanismParams& params) {
  const auto verdict = validate_params(params);
  if (!verdict.usable()) throw Error(*verdict.error, verdict.message);
}

/// Checks the tick grid and the fake-bid convention for one bid.
inline void validate_bid(const Bid& bid, const Rational& tick) {
  if (!is_multiple_of(bid.amount, tick)) {
    throw Error(Errc::bad_bid, "bid " + std::to_string(bid.id) + " amount " + to_string(bid.amount) +
                                   " is not a non-negative multiple of the tick " + to_string(tick));
  }
  if (bid.value < 0) throw Error(Errc::bad_bid, "bid " + std::to_string(bid.id) + " has negative value");
  if (bid.fake && bid.value != 0) {
    throw Error(Errc::bad_bid, "fake bid " + std::to_string(bid.id) + " must have value 0");
  }
}

/// Canonical block order: amount descending, then id ascending.
inline bool bid_order(const Bid& a, const Bid& b) {
  if (a.amount != b.amount) return a.amount > b.amount;
  return a.id < b.id;
}

/// The min(B, n) highest bids, sorted by `bid_order`.
inline std::vector<Bid> include(std::span<const Bid> mempool, const MechanismParams& params) {
  if (mempool.empty()) throw Error(Errc::empty_mempool, "mempool is empty");
  std::vector<Bid> sorted(mempool.begin(), mempool.end());
  const auto keep = std::min<std::size_t>(sorted.size(), static_cast<std::size_t>(params.block_size));
  std::partial_sort(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(keep), sorted.end(), bid_order);
  sorted.resize(keep);
  return sorted;
}

inline void require_payment_slot(std::span<const Bid> included, const MechanismParams& params) {
  if (included.size() <= static_cast<std::size_t>(params.payment_index)) {
    throw Error(Errc::too_few_bids, std::to_string(included.size()) + " included bids, need at least k+1=" +
                                        std::to_string(params.payment_index + 1));
  }
}

/// b_{k+1}, the price every confirmed bid pays.
inline Rational payment(std::span<const Bid> included, const MechanismParams& params) {
  require_payment_slot(included, params);
  return included[static_cast<std::size_t>(params.payment_index)].amount;
}

/// theta * (b_{k+1} + ... + b_B), or 0 in the trivial regime.
inline Rational miner_revenue(std::span<const Bid> included, const MechanismParams& params) {
  require_payment_slot(included, params);
  if (confirmed_count(params) < 1) return Rational{0};
  Rational tail{0};
  const auto end = std::min<std::size_t>(included.size(), static_cast<std::size_t>(params.block_size));
  for (auto i = static_cast<std::size_t>(params.payment_index); i < end; ++i) tail += included[i].amount;
  return params.theta * tail;
}

/// q = floor(theta k / c) / k: the marginal confirmation probability of each top-k bid.
inline Rational confirmation_probability(const MechanismParams& params) {
  return Rational{confirmed_count(params), params.payment_index};
}

/// Uniform random subset of the top-k of size floor(theta k / c), as sorted ids.
inline std::vector<BidId> sample_confirmed(std::span<const Bid> included, const MechanismParams& params,
                                           std::uint64_t seed) {
  const auto k = static_cast<std::size_t>(params.payment_index);
  if (included.size() < k) {
    throw Error(Errc::too_few_bids, "need at least k=" + std::to_string(k) + " included bids to confirm");
  }
  const auto size = static_cast<std::size_t>(std::max<std::int64_t>(0, confirmed_count(params)));
  std::vector<BidId> top;
  top.reserve(k);
  for (std::size_t i = 0; i < k; ++i) top.push_back(included[i].id);
  std::vector<BidId> chosen;
  chosen.reserve(size);
  std::mt19937_64 rng(seed);
  std::sample(top.begin(), top.end(), std::back_inserter(chosen), size, rng);
  std::sort(chosen.begin(), chosen.end());
  return chosen;
}

/// Total payment collected minus miner revenue; never negative for valid params.
inline Rational burn_check(std::span<const Bid> included, const MechanismParams& params) {
  const Rational collected = Rational{confirmed_count(params)} * payment(included, params);
  const Rational burn = collected - miner_revenue(included, params);
  if (burn < 0) {
    throw Error(Errc::invariant, "negative burn " + to_string(burn) + ": miner revenue exceeds collected payments");
  }
  return burn;
}

struct BlockOutcome {
  std::vector<Bid> included;
  Rational payment{0};
  Rational confirm_prob{0};
  std::int64_t confirm_count = 0;
  Rational miner_revenue{0};
  Rational expected_burn{0};
  bool trivial = false;
  std::optional<std::vector<BidId>> confirmed;

  std::size_t top_k = 0;

  /// Position of `id` in the included list, if present.
  std::optional<std::size_t> rank_of(BidId id) const {
    for (std::size_t i = 0; i < included.size(); ++i) {
      if (included[i].id == id) return i;
    }
    return std::nullopt;
  }

  bool in_top_k(BidId id) const {
    const auto r = rank_of(id);
    return r && *r < top_k;
  }
};

/// One full execution of the mechanism. Confirmation is sampled only when a
/// seed is supplied; expected quantities never depend on it.
inline BlockOutcome run_block(std::span<const Bid> mempool, const MechanismParams& params,
                              std::optional<std::uint64_t> seed = std::nullopt) {
  require_usable(params);
  BlockOutcome out;
  out.included = include(mempool, params);
  out.top_k = static_cast<std::size_t>(params.payment_index);
  out.payment = payment(out.included, params);
  out.confirm_count = confirmed_count(params);
  out.trivial = out.confirm_count < 1;
  out.confirm_prob = confirmation_probability(params);
  out.miner_revenue = miner_revenue(out.included, params);
  out.expected_burn = burn_check(out.included, params);
  if (seed) out.confirmed = sample_confirmed(out.included, params, *seed);
  return out;
}

}  // namespace bsplab
