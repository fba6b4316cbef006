#pragma once

// JSON records for outcomes, strategies and violation reports. Exact values
// are written twice: as a double for plotting and as "<name>_exact" ("7/10").

#include <json.hpp>

#include <string>

#include "bsplab/exact.hpp"
#include "bsplab/mechanism.hpp"
#include "bsplab/verifier.hpp"

namespace bsplab {

using Json = nlohmann::json;

inline void put_exact(Json& j, const std::string& key, const Rational& value) {
  j[key] = to_double(value);
  j[key + "_exact"] = to_string(value);
}

inline Json exact_array(std::span<const Rational> values) {
  Json arr = Json::array();
  for (const auto& v : values) arr.push_back(to_string(v));
  return arr;
}

/// Accepts a JSON number or a string such as "1/2" or "0.1".
inline Rational exact_from_json(const Json& j, const std::string& where) {
  try {
    if (j.is_string()) return parse_exact(j.get<std::string>());
    if (j.is_number_integer()) return Rational{j.get<std::int64_t>()};
    if (j.is_number()) return parse_exact(j.dump());
  } catch (const Error& e) {
    throw Error(Errc::config, where + ": " + e.what());
  }
  throw Error(Errc::config, where + ": expected a number or a numeric string");
}

inline Json to_json(const MechanismParams& p) {
  Json j;
  j["B"] = p.block_size;
  j["k"] = p.payment_index;
  j["c"] = p.max_collusion;
  j["theta"] = to_string(p.theta);
  j["gamma"] = to_string(p.gamma);
  j["delta"] = to_string(p.tick);
  j["kappa"] = to_string(p.tail_bound);
  return j;
}

inline Json to_json(const Bid& b) {
  Json j;
  j["id"] = b.id;
  if (b.owner == kMinerId) {
    j["owner"] = "miner";
  } else {
    j["owner"] = b.owner;
  }
  j["value"] = to_string(b.value);
  j["amount"] = to_string(b.amount);
  j["fake"] = b.fake;
  return j;
}

inline Json to_json(const BlockOutcome& o) {
  Json j;
  Json inc = Json::array();
  for (const auto& b : o.included) inc.push_back(to_json(b));
  j["included"] = std::move(inc);
  put_exact(j, "payment", o.payment);
  put_exact(j, "confirm_prob", o.confirm_prob);
  j["confirm_count"] = o.confirm_count;
  put_exact(j, "miner_revenue", o.miner_revenue);
  put_exact(j, "expected_burn", o.expected_burn);
  j["trivial"] = o.trivial;
  if (o.confirmed) {
    j["confirmed"] = *o.confirmed;
  } else {
    j["confirmed"] = nullptr;
  }
  return j;
}

inline Json to_json(const DeviationStrategy& s) {
  Json j;
  j["kind"] = std::string(kind_name(s.kind));
  j["deletions"] = s.deletions;
  j["fakes"] = exact_array(s.fakes);
  Json rebids = Json::array();
  for (const auto& r : s.rebids) rebids.push_back({{"user", r.user}, {"amount", to_string(r.amount)}});
  j["rebids"] = std::move(rebids);
  j["sybils"] = exact_array(s.sybils);
  if (s.sybil_owner) j["sybil_owner"] = *s.sybil_owner;
  return j;
}

inline Json scenario_json(const Scenario& sc) {
  Json j;
  j["values"] = exact_array(sc.true_values);
  j["mechanism"] = to_json(sc.params);
  j["pi0"] = to_string(sc.lr.initial_share);
  j["R"] = to_string(sc.lr.reward);
  j["cartel"] = sc.lr.cartel;
  j["grid_max"] = to_string(sc.grid_max);
  return j;
}

inline Json to_json(const Scenario& sc, const DeviationReport& r) {
  Json j;
  j["scenario"] = scenario_json(sc);
  j["baseline_bids"] = exact_array(r.baseline_bids);
  j["coalition"] = {{"miner", r.coalition.miner}, {"users", r.coalition.users}};
  j["strategy"] = to_json(r.strategy);
  put_exact(j, "honest_joint", r.honest_joint);
  put_exact(j, "deviated_joint", r.deviated_joint);
  put_exact(j, "delta", r.delta);
  j["violation"] = r.violation;
  return j;
}

inline Json to_json(const Scenario& sc, const VerificationResult& r) {
  Json j;
  j["property"] = r.property;
  j["total"] = r.total;
  j["evaluated"] = r.evaluated;
  j["skipped"] = r.skipped;
  j["exhaustive"] = r.exhaustive;
  j["within_hypotheses"] = r.within_hypotheses;
  j["warnings"] = r.warnings;
  j["grid_max"] = to_string(r.grid_max);
  j["confirm_prob"] = to_string(r.confirm_prob);
  j["theta_over_c"] = to_string(r.theta_over_c);
  if (r.max_delta) {
    put_exact(j, "max_delta", *r.max_delta);
  } else {
    j["max_delta"] = nullptr;
  }
  Json vio = Json::array();
  for (const auto& v : r.violations) vio.push_back(to_json(sc, v));
  j["violations"] = std::move(vio);
  j["ok"] = r.ok();
  return j;
}

}  // namespace bsplab
