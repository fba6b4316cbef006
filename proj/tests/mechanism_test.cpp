#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <random>

#include "bsplab/mechanism.hpp"

using namespace bsplab;

namespace {

MechanismParams make_params(int B, int k, int c, Rational theta, Rational gamma = 1) {
  MechanismParams p;
  p.block_size = B;
  p.payment_index = k;
  p.max_collusion = c;
  p.theta = theta;
  p.gamma = gamma;
  p.tick = 1;
  p.tail_bound = 10;
  return p;
}

std::vector<Bid> bids_from(std::initializer_list<int> amounts) {
  std::vector<Bid> out;
  BidId id = 0;
  for (int a : amounts) {
    out.push_back(Bid{id, id, Rational(a), Rational(a), false});
    ++id;
  }
  return out;
}

}  // namespace

TEST(ValidateParams, Examples) {
  EXPECT_EQ(validate_params(make_params(3, 2, 1, Rational(1, 2))).status, ParamsStatus::ok);
  EXPECT_EQ(validate_params(make_params(3, 2, 1, Rational(2, 5))).status, ParamsStatus::trivial);
  const auto bad = validate_params(make_params(5, 3, 1, Rational(1, 2)));
  EXPECT_EQ(bad.status, ParamsStatus::invalid);
  EXPECT_EQ(bad.error, Errc::k_range);
}

TEST(ValidateParams, NamesViolatedConstraint) {
  EXPECT_EQ(validate_params(make_params(3, 3, 1, Rational(1, 2))).error, Errc::k_range);
  EXPECT_EQ(validate_params(make_params(3, 2, 1, Rational(0))).error, Errc::bad_fraction);
  EXPECT_EQ(validate_params(make_params(3, 2, 1, Rational(3, 2))).error, Errc::bad_fraction);
  EXPECT_EQ(validate_params(make_params(3, 2, 1, Rational(1, 2), Rational(0))).error, Errc::bad_fraction);
  auto p = make_params(3, 2, 1, Rational(1, 2));
  p.tick = 0;
  EXPECT_EQ(validate_params(p).error, Errc::bad_tick);
}

TEST(ValidateParams, KRangeMatchesDefinition) {
  for (int B = 2; B <= 30; ++B) {
    for (int c = 1; c <= 4; ++c) {
      for (int k = 1; k <= B; ++k) {
        const bool in_range = 2 * c * B <= k * (2 * c + 1) && k < B;
        const auto v = validate_params(make_params(B, k, c, Rational(1)));
        EXPECT_EQ(v.error == Errc::k_range, !in_range) << "B=" << B << " k=" << k << " c=" << c;
      }
    }
  }
}

TEST(Include, TopBSortedDescending) {
  const auto p = make_params(5, 4, 1, Rational(1, 2));
  const auto inc = include(bids_from({2, 9, 1, 5, 7, 4}), p);
  std::vector<Rational> amounts;
  for (const auto& b : inc) amounts.push_back(b.amount);
  EXPECT_EQ(amounts, (std::vector<Rational>{9, 7, 5, 4, 2}));
}

TEST(Include, TiesBrokenById) {
  const auto p = make_params(2, 1, 1, Rational(1));
  std::vector<Bid> pool{{2, 2, 3, 3}, {0, 0, 3, 3}, {1, 1, 3, 3}};
  const auto inc = include(pool, p);
  ASSERT_EQ(inc.size(), 2u);
  EXPECT_EQ(inc[0].id, 0u);
  EXPECT_EQ(inc[1].id, 1u);
}

TEST(Include, FewerBidsThanSlotsAndEmpty) {
  const auto p = make_params(3, 2, 1, Rational(1, 2));
  EXPECT_EQ(include(bids_from({5}), p).size(), 1u);
  EXPECT_THROW(include(std::vector<Bid>{}, p), Error);
}

TEST(Include, IdempotentAndPermutationInvariant) {
  std::mt19937_64 rng(11);
  const auto p = make_params(5, 4, 1, Rational(1, 2));
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<Bid> pool;
    const int n = 5 + static_cast<int>(rng() % 5);
    for (int i = 0; i < n; ++i) {
      const Rational a(static_cast<int>(rng() % 6));
      pool.push_back(Bid{static_cast<BidId>(i), static_cast<BidId>(i), a, a});
    }
    const auto once = include(pool, p);
    const auto twice = include(once, p);
    ASSERT_EQ(once.size(), twice.size());
    for (std::size_t i = 0; i < once.size(); ++i) EXPECT_EQ(once[i].id, twice[i].id);

    auto shuffled = pool;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    const auto again = include(shuffled, p);
    EXPECT_EQ(payment(once, p), payment(again, p));
    EXPECT_EQ(miner_revenue(once, p), miner_revenue(again, p));
    for (std::size_t i = 0; i < once.size(); ++i) EXPECT_EQ(once[i].id, again[i].id);
  }
}

TEST(Payment, IsAmountAtRankKPlusOne) {
  EXPECT_EQ(payment(bids_from({9, 7, 5, 4, 2}), make_params(5, 4, 1, Rational(1, 2))), Rational(2));
  EXPECT_EQ(payment(bids_from({5, 3, 1}), make_params(3, 2, 1, Rational(1, 2))), Rational(1));
  try {
    payment(bids_from({5, 3}), make_params(3, 2, 1, Rational(1, 2)));
    FAIL() << "expected TOO_FEW_BIDS";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::too_few_bids);
  }
}

TEST(MinerRevenue, ThetaTimesTail) {
  EXPECT_EQ(miner_revenue(bids_from({9, 7, 5, 4, 2}), make_params(5, 4, 1, Rational(1, 2))), Rational(1));
  EXPECT_EQ(miner_revenue(bids_from({5, 3, 1}), make_params(3, 2, 1, Rational(1, 2))), Rational(1, 2));
  EXPECT_EQ(miner_revenue(bids_from({5, 3, 1}), make_params(3, 2, 1, Rational(2, 5))), Rational(0));
  EXPECT_THROW(miner_revenue(bids_from({5, 3}), make_params(3, 2, 1, Rational(1, 2))), Error);
}

TEST(ConfirmationProbability, Examples) {
  EXPECT_EQ(confirmation_probability(make_params(3, 2, 1, Rational(1, 2))), Rational(1, 2));
  EXPECT_EQ(confirmation_probability(make_params(5, 4, 1, Rational(1, 2))), Rational(1, 2));
  EXPECT_EQ(confirmation_probability(make_params(5, 4, 2, Rational(2, 5))), Rational(0));
}

TEST(SampleConfirmed, SizesAndDeterminism) {
  const auto inc = bids_from({9, 7, 5, 4, 2});
  const auto p = make_params(5, 4, 1, Rational(1, 2));
  const auto a = sample_confirmed(inc, p, 42);
  EXPECT_EQ(a, sample_confirmed(inc, p, 42));
  EXPECT_EQ(a.size(), 2u);
  for (auto id : a) EXPECT_LT(id, 4u);

  const auto full = sample_confirmed(bids_from({5, 3, 1}), make_params(3, 2, 1, Rational(1)), 3);
  EXPECT_EQ(full, (std::vector<BidId>{0, 1}));
  EXPECT_TRUE(sample_confirmed(bids_from({5, 3, 1}), make_params(3, 2, 1, Rational(2, 5)), 3).empty());
  EXPECT_THROW(sample_confirmed(bids_from({5}), make_params(3, 2, 1, Rational(1, 2)), 3), Error);
}

// Binomial oracle: each top-k bid is confirmed with probability q, so over N
// seeds its count is within 4 sqrt(N q (1-q)) of N q.
TEST(SampleConfirmed, UniformFrequencies) {
  struct Case {
    std::vector<Bid> included;
    MechanismParams params;
  };
  const std::vector<Case> cases{
      {bids_from({5, 3, 1}), make_params(3, 2, 1, Rational(1, 2))},
      {bids_from({9, 7, 5, 4, 2}), make_params(5, 4, 1, Rational(1, 2))},
      {bids_from({9, 7, 5, 4, 2}), make_params(5, 4, 1, Rational(3, 4))},
  };
  const int N = 10000;
  for (const auto& c : cases) {
    const double q = to_double(confirmation_probability(c.params));
    std::map<BidId, int> counts;
    for (int s = 0; s < N; ++s) {
      for (auto id : sample_confirmed(c.included, c.params, static_cast<std::uint64_t>(s))) ++counts[id];
    }
    const double bound = 4.0 * std::sqrt(N * q * (1 - q));
    for (int i = 0; i < c.params.payment_index; ++i) {
      EXPECT_NEAR(counts[static_cast<BidId>(i)], N * q, bound) << "bid " << i;
    }
    EXPECT_EQ(counts.count(static_cast<BidId>(c.params.payment_index)), 0u);
  }
}

TEST(BurnCheck, Examples) {
  EXPECT_EQ(burn_check(bids_from({9, 7, 5, 4, 2}), make_params(5, 4, 1, Rational(1, 2))), Rational(3));
  EXPECT_EQ(burn_check(bids_from({5, 3, 1}), make_params(3, 2, 1, Rational(1, 2))), Rational(1, 2));
  // All amounts equal with k exactly 2cB/(2c+1): B=3, k=2, c=1.
  EXPECT_GE(burn_check(bids_from({4, 4, 4}), make_params(3, 2, 1, Rational(1))), Rational(0));
  EXPECT_GE(burn_check(bids_from({4, 4, 4, 4, 4}), make_params(5, 4, 2, Rational(1))), Rational(0));
}

TEST(BurnCheck, NonNegativeOnRandomValidInstances) {
  std::mt19937_64 rng(5);
  int checked = 0;
  for (int trial = 0; trial < 3000; ++trial) {
    const int B = 2 + static_cast<int>(rng() % 12);
    const int c = 1 + static_cast<int>(rng() % 3);
    const int k_min = min_payment_index(B, c);
    if (k_min >= B) continue;
    const int k = k_min + static_cast<int>(rng() % static_cast<unsigned>(B - k_min));
    const Rational theta(1 + static_cast<int>(rng() % 20), 20);
    const auto p = make_params(B, k, c, theta);
    if (validate_params(p).status != ParamsStatus::ok) continue;
    std::vector<Bid> pool;
    for (int i = 0; i < B; ++i) {
      const Rational a(static_cast<int>(rng() % 50));
      pool.push_back(Bid{static_cast<BidId>(i), static_cast<BidId>(i), a, a});
    }
    EXPECT_GE(burn_check(include(pool, p), p), Rational(0));
    ++checked;
  }
  EXPECT_GT(checked, 500);
}

TEST(RunBlock, ComposesTheRules) {
  const auto out = run_block(bids_from({9, 7, 5, 4, 2}), make_params(5, 4, 1, Rational(1, 2)), 9);
  EXPECT_EQ(out.payment, Rational(2));
  EXPECT_EQ(out.miner_revenue, Rational(1));
  EXPECT_EQ(out.expected_burn, Rational(3));
  EXPECT_EQ(out.confirm_prob, Rational(1, 2));
  EXPECT_FALSE(out.trivial);
  ASSERT_TRUE(out.confirmed.has_value());
  EXPECT_EQ(out.confirmed->size(), 2u);
  EXPECT_TRUE(out.in_top_k(3));
  EXPECT_FALSE(out.in_top_k(4));

  const auto trivial = run_block(bids_from({5, 3, 1}), make_params(3, 2, 1, Rational(2, 5)), 9);
  EXPECT_TRUE(trivial.trivial);
  EXPECT_TRUE(trivial.confirmed->empty());
  EXPECT_EQ(trivial.miner_revenue, Rational(0));
}

TEST(ValidateBid, TickAndFakeRules) {
  EXPECT_NO_THROW(validate_bid(Bid{0, 0, Rational(1), Rational(11, 10)}, Rational(1, 10)));
  EXPECT_THROW(validate_bid(Bid{0, 0, Rational(1), Rational(11, 10)}, Rational(1, 5)), Error);
  EXPECT_THROW(validate_bid(Bid{0, 0, Rational(1), Rational(1), true}, Rational(1)), Error);
  EXPECT_THROW(validate_bid(Bid{0, 0, Rational(1), Rational(-1)}, Rational(1)), Error);
}
