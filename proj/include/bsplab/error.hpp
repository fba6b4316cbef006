#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace bsplab {

enum class Errc {
  k_range,
  bad_fraction,
  bad_size,
  bad_tick,
  bad_bid,
  empty_mempool,
  too_few_bids,
  invariant,
  degenerate,
  wrong_mode,
  grid_too_small,
  budget_exceeded,
  precondition,
  config,
  parse,
  io,
};

constexpr std::string_view errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::k_range: return "K_RANGE";
    case Errc::bad_fraction: return "BAD_FRACTION";
    case Errc::bad_size: return "BAD_SIZE";
    case Errc::bad_tick: return "BAD_TICK";
    case Errc::bad_bid: return "BAD_BID";
    case Errc::empty_mempool: return "EMPTY_MEMPOOL";
    case Errc::too_few_bids: return "TOO_FEW_BIDS";
    case Errc::invariant: return "INVARIANT";
    case Errc::degenerate: return "DEGENERATE";
    case Errc::wrong_mode: return "WRONG_MODE";
    case Errc::grid_too_small: return "GRID_TOO_SMALL";
    case Errc::budget_exceeded: return "BUDGET_EXCEEDED";
    case Errc::precondition: return "PRECONDITION";
    case Errc::config: return "CONFIG";
    case Errc::parse: return "PARSE";
    case Errc::io: return "IO";
  }
  return "UNKNOWN";
}

/// Error carrying a machine-readable code alongside the message.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace bsplab
