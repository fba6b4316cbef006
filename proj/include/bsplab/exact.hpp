#pragma once

// Exact arithmetic used for every amount that enters a mechanism rule.
// Bids live on a tick grid and theta/gamma are ratios, so revenue, burn and
// utility comparisons never touch floating point.

#include <boost/rational.hpp>

#include <charconv>
#include <cstdint>
#include <limits>
#include <numeric>
#include <string>
#include <string_view>

#include "bsplab/error.hpp"

// Boost 1.74 mixed rational/integer equality recurses forever under C++20
// rewritten comparisons; exact-match overloads take precedence.
namespace boost {
#define BSPLAB_RATIONAL_EQ(T)                                                              \
  inline bool operator==(const rational<std::int64_t>& a, T b) {                         \
    return a.denominator() == 1 && a.numerator() == static_cast<std::int64_t>(b);        \
  }                                                                                      \
  inline bool operator==(T b, const rational<std::int64_t>& a) { return a == b; }        \
  inline bool operator!=(const rational<std::int64_t>& a, T b) { return !(a == b); }     \
  inline bool operator!=(T b, const rational<std::int64_t>& a) { return !(a == b); }
BSPLAB_RATIONAL_EQ(int)
BSPLAB_RATIONAL_EQ(long)
BSPLAB_RATIONAL_EQ(long long)
BSPLAB_RATIONAL_EQ(unsigned)
BSPLAB_RATIONAL_EQ(unsigned long)
BSPLAB_RATIONAL_EQ(unsigned long long)
#undef BSPLAB_RATIONAL_EQ
}  // namespace boost

namespace bsplab {

using Rational = boost::rational<std::int64_t>;

inline double to_double(const Rational& x) { return boost::rational_cast<double>(x); }

inline std::int64_t floor_of(const Rational& x) {
  const auto n = x.numerator();
  const auto d = x.denominator();
  auto q = n / d;
  if (n % d != 0 && n < 0) --q;
  return q;
}

inline Rational positive_part(const Rational& x) { return x > 0 ? x : Rational{0}; }

inline bool is_integer(const Rational& x) { return x.denominator() == 1; }

/// True when `amount` is a non-negative integer multiple of `unit`.
inline bool is_multiple_of(const Rational& amount, const Rational& unit) {
  return amount >= 0 && unit > 0 && is_integer(amount / unit);
}

/// "3", "7/10" (reduced form).
inline std::string to_string(const Rational& x) {
  if (x.denominator() == 1) return std::to_string(x.numerator());
  return std::to_string(x.numerator()) + "/" + std::to_string(x.denominator());
}

namespace detail {

inline std::int64_t parse_int(std::string_view text, std::string_view whole) {
  std::int64_t out = 0;
  const auto* first = text.data();
  const auto* last = text.data() + text.size();
  if (first != last && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, out);
  if (ec != std::errc{} || ptr != last || first == last) {
    throw Error(Errc::parse, "not an exact number: '" + std::string(whole) + "'");
  }
  return out;
}

}  // namespace detail

/// Parses integers ("3"), terminating decimals ("0.125", "-2.5", "1e-3" is
/// rejected) and ratios ("7/10").
inline Rational parse_exact(std::string_view text) {
  const std::string_view whole = text;
  while (!text.empty() && (text.front() == ' ' || text.front() == '\t')) text.remove_prefix(1);
  while (!text.empty() && (text.back() == ' ' || text.back() == '\t')) text.remove_suffix(1);
  if (text.empty()) throw Error(Errc::parse, "empty number");

  if (auto slash = text.find('/'); slash != std::string_view::npos) {
    const auto num = detail::parse_int(text.substr(0, slash), whole);
    const auto den = detail::parse_int(text.substr(slash + 1), whole);
    if (den == 0) throw Error(Errc::parse, "zero denominator in '" + std::string(whole) + "'");
    return Rational{num, den};
  }

  const auto dot = text.find('.');
  if (dot == std::string_view::npos) return Rational{detail::parse_int(text, whole)};

  bool negative = false;
  std::string_view int_part = text.substr(0, dot);
  if (!int_part.empty() && (int_part.front() == '-' || int_part.front() == '+')) {
    negative = int_part.front() == '-';
    int_part.remove_prefix(1);
  }
  std::string_view frac_part = text.substr(dot + 1);
  while (!frac_part.empty() && frac_part.back() == '0') frac_part.remove_suffix(1);
  if (frac_part.size() > 15) throw Error(Errc::parse, "too many decimals in '" + std::string(whole) + "'");

  const std::int64_t whole_units = int_part.empty() ? 0 : detail::parse_int(int_part, whole);
  std::int64_t scale = 1;
  for (std::size_t i = 0; i < frac_part.size(); ++i) scale *= 10;
  const std::int64_t frac_units = frac_part.empty() ? 0 : detail::parse_int(frac_part, whole);
  if (whole_units < 0 || frac_units < 0) throw Error(Errc::parse, "malformed decimal '" + std::string(whole) + "'");
  if (whole_units > std::numeric_limits<std::int64_t>::max() / scale) {
    throw Error(Errc::parse, "decimal out of range '" + std::string(whole) + "'");
  }
  Rational out{whole_units * scale + frac_units, scale};
  return negative ? -out : out;
}

/// Smallest positive integer that turns every value into an integer.
template <class Range>
std::int64_t common_denominator(const Range& values) {
  std::int64_t lcm = 1;
  for (const Rational& v : values) lcm = std::lcm(lcm, v.denominator());
  return lcm;
}

}  // namespace bsplab
