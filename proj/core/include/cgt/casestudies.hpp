#pragma once

#include <optional>
#include <string>

#include "cgt/compose.hpp"

namespace cgt {

// Hashed-timelock contract between two channel parties: pay v on secret
// reveal before timelock T, refund afterwards.
struct HtlcParams {
  std::optional<Round> t_s = 0;  // secret reveal time; nullopt: never revealed
  Round t_e = 0;                 // horizon
  Round T = 0;                   // timelock
  Rational v_A, v_B, v;          // channel balances and in-flight value
  Rational fee_cap_A, fee_cap_B; // max defence fees for the timeout/claim txs
  Rational delta = 1;            // fee grid step
  // Tie-break bonus for leaving the channel open; nullopt: one grid step.
  std::optional<Rational> epsilon_open;
  std::string name_a = "Alice";
  std::string name_b = "Bob";
  std::string tx_prefix;         // namespaces tx ids for composition

  Rational open_bonus() const { return epsilon_open ? *epsilon_open : delta; }
};

void validate(const HtlcParams& p);  // HorizonViolated, NegativeValue, FeeCapExceedsValue

// Game tree H_0 for one parameter point {t_s (-1: never), t_e}; rounds carry
// the protocol's cooperative closes, off-chain updates and on-chain races.
GameTree htlc_tree(const HtlcParams& p, const Param& point);
Protocol htlc_game(const HtlcParams& p);
SettlementRules htlc_rules(const HtlcParams& p);
ConflictSpec htlc_conflicts(const HtlcParams& p);

// Round from which the intended behaviour is vulnerable to a censoring race
// against the claim transaction: T - ceil(rho_m(fee_cap_B, v)).
// kRoundMinusInf when censoring never pays off ends; T when it always fails.
Round htlc_deviation_onset(const HtlcParams& p, const HashrateDistribution& lambda);

struct HtlcReport {
  Round t_star_m = 0;
  bool reaches_share_update = false;
  std::vector<std::string> trace;  // action names along the intended path
  bool ic_holds = true;
  bool strict_failure = false;
  bool indifference = false;       // equal-utility outcome-changing deviation
};

HtlcReport htlc_analysis(const HtlcParams& p, const HashrateDistribution& lambda);

enum class TwoHtlcMode { Independent, Dependent };

struct TwoHtlcReport {
  bool timelock_condition = true;  // t*_1 + 1 >= t*_2
  Round t_star_1 = 0;
  Round t_star_2 = 0;
  Protocol composed;
  SettlementRules rules;
  ConflictSpec conflicts;
  bool checked = false;            // generic deviation scan ran (small horizons)
  bool deviation_found = false;
  Rational gain;                   // best strict coalition improvement found
  bool additivity_ok = true;       // independent mode: u = u1 + u2 spot-check
};

// Chains channel 2 (Charlie-Dave, secret source) into channel 1 (Alice-Bob);
// dependent mode maps Dave's reveal round to channel 1's share time.
TwoHtlcReport two_htlc(TwoHtlcMode mode, HtlcParams p1, HtlcParams p2,
                       const HashrateDistribution& lambda);

struct WormholeReport {
  Rational gain;               // v2 - v3
  bool deviation = false;      // gain > 0
  Rational honest_coalition;   // Bob+Dave under the intended behaviour
  Rational deviated_coalition; // Bob+Dave withholding the route secret
  bool gain_matches = true;    // pipeline difference equals v2 - v3
  Balances honest, deviated;
};

// Three-hop route Alice-Bob-Charlie-Dave; Bob and Dave collude to capture
// Charlie's routing margin v2 - v3.
WormholeReport wormhole(HtlcParams p1, HtlcParams p2, HtlcParams p3,
                        const HashrateDistribution& lambda);

// Channel with collateral c forfeited to the including miner when an old
// commitment is punished.
struct CrabParams {
  Round T = 0;                   // settlement delay on the old commitment
  Rational v_A_l, v_B_l;         // latest state
  Rational v_A_o, v_B_o;         // old state, must favour Alice
  Rational c;                    // collateral
  Rational v;                    // channel value
  Rational epsilon = 1;          // minimal relay fee
  Rational bribe_step;           // 0: single max-bribe step v_A_o - v_A_l
};

void validate(const CrabParams& p);  // StateOrderViolated, NegativeValue

GameTree crab_tree(const CrabParams& p);
Protocol crab_game(const CrabParams& p);
SettlementRules crab_rules(const CrabParams& p);
ConflictSpec crab_conflicts(const CrabParams& p);

struct CrabSafety {
  bool safe = false;
  std::optional<Round> minimal_safe_T;  // nullopt: no timelock deters
  bool analytic_safe = false;           // strict-threshold schedule route
  bool oracle_safe = false;             // censor-tie value-iteration route
};

// Safe when the punishment is included with certainty against any bribe up
// to v; an exactly indifferent miner counts as a censor.
CrabSafety crab_safety(Round T, const Rational& c, const Rational& v,
                       const HashrateDistribution& lambda);

struct MevParams {
  Rational l;                      // limit price of the user's order
  Rational s;                      // sandwich spread
  Rational f;                      // order fee
  HashrateDistribution lambda;
  std::optional<size_t> trusted;   // miner index 1..m committed to not sandwich
};

void validate(const MevParams& p);  // NegativeSpread, NonPositiveFee, UnknownMiner

struct MevReport {
  std::vector<std::string> miners;                      // ids m1..m<m>
  std::set<std::string> optimal_share;                  // user's best share set
  Rational user_utility;
  Rational formula_utility;                             // closed-form route
  std::map<std::string, std::string> equilibrium_action;  // "H" or "D"
  bool sandwich_strict = false;                         // s > 0
};

MevReport mev_game(const MevParams& p);

}  // namespace cgt
