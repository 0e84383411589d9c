#include <doctest.h>

#include "cgt/casestudies.hpp"

using namespace cgt;

namespace {

std::vector<Rational> rat(std::initializer_list<const char*> xs) {
  std::vector<Rational> out;
  for (auto* s : xs) out.push_back(parse_rational(s));
  return out;
}

HashrateDistribution skewed() { return validate_hashrate(rat({"0.5", "0.2", "0.3"})); }
HashrateDistribution halves() { return validate_hashrate(rat({"0", "0.5", "0.5"})); }

HtlcParams base_htlc() {
  HtlcParams p;
  p.t_s = 0;
  p.t_e = 3;
  p.T = 3;
  p.v_A = 10;
  p.v_B = 10;
  p.v = 10;
  p.fee_cap_A = 1;
  p.fee_cap_B = 1;
  return p;
}

}  // namespace

TEST_CASE("htlc parameter validation") {
  HtlcParams p = base_htlc();
  p.T = 5;
  CHECK_THROWS_WITH_AS(validate(p), doctest::Contains("HorizonViolated"), Error);
  p = base_htlc();
  p.fee_cap_B = 11;
  CHECK_THROWS_WITH_AS(validate(p), doctest::Contains("FeeCapExceedsValue"), Error);
  p = base_htlc();
  p.v = -1;
  CHECK_THROWS_WITH_AS(validate(p), doctest::Contains("NegativeValue"), Error);
  p = base_htlc();
  p.delta = 0;
  CHECK_THROWS_WITH_AS(validate(p), doctest::Contains("NonPositiveStep"), Error);
}

TEST_CASE("htlc tree builds and its parameter space covers reveal times") {
  HtlcParams p = base_htlc();
  Protocol proto = htlc_game(p);
  CHECK(proto.game.param_space.size() == size_t(p.t_e + 2));
  for (const Param& pt : proto.game.param_space) {
    GameTree t = proto.game.builder(pt);
    CHECK(t.players.count("Alice") == 1);
    CHECK(t.players.count("Bob") == 1);
    CHECK(!t.nodes.empty());
  }
}

TEST_CASE("htlc deviation onset matches the censoring race switch time") {
  HtlcParams p = base_htlc();
  // fee 1 against prize 10: the last switch round is 2, so the attack opens
  // at T - 2 = 1.
  CHECK(htlc_deviation_onset(p, skewed()) == 1);
  p.T = 2;
  p.t_e = 2;
  CHECK(htlc_deviation_onset(p, skewed()) == 0);
  p = base_htlc();
  p.fee_cap_B = 10;
  CHECK(htlc_deviation_onset(p, skewed()) == p.T);
  p = base_htlc();
  p.fee_cap_B = 0;
  CHECK(htlc_deviation_onset(p, skewed()) == kRoundMinusInf);
  p = base_htlc();
  CHECK(htlc_deviation_onset(p, validate_hashrate(rat({"0", "1"}))) == kRoundMinusInf);
}

TEST_CASE("htlc intended play settles off-chain via share and update") {
  HtlcParams p = base_htlc();
  HtlcReport r = htlc_analysis(p, skewed());
  CHECK(r.t_star_m == 1);
  CHECK(r.reaches_share_update);
  REQUIRE(r.trace.size() >= 2);
  CHECK(r.trace[0] == "share");
  CHECK(r.trace[1] == "update");
}

TEST_CASE("htlc with zero timelock fails incentive compatibility by indifference") {
  HtlcParams p = base_htlc();
  p.T = 0;
  p.t_e = 0;
  p.fee_cap_A = 0;  // timeout fee may rise to the full contested value
  HtlcReport r = htlc_analysis(p, skewed());
  CHECK_FALSE(r.ic_holds);
  CHECK(r.indifference);
  CHECK_FALSE(r.strict_failure);
}

TEST_CASE("chained htlc timelock condition") {
  HtlcParams p1 = base_htlc();
  HtlcParams p2 = base_htlc();
  p1.T = 5;
  p2.T = 5;
  p1.t_e = p2.t_e = 5;
  TwoHtlcReport ok = two_htlc(TwoHtlcMode::Dependent, p1, p2, skewed());
  CHECK(ok.t_star_1 == 3);
  CHECK(ok.t_star_2 == 3);
  CHECK(ok.timelock_condition);

  p1.T = 3;
  TwoHtlcReport bad = two_htlc(TwoHtlcMode::Dependent, p1, p2, skewed());
  CHECK(bad.t_star_1 == 1);
  CHECK(bad.t_star_2 == 3);
  CHECK_FALSE(bad.timelock_condition);
}

TEST_CASE("chained htlc deviation scan agrees with the timelock condition") {
  auto run = [&](Round T1, Round T2) {
    HtlcParams p1 = base_htlc();
    HtlcParams p2 = base_htlc();
    p1.T = T1;
    p2.T = T2;
    p1.t_e = p2.t_e = std::max(T1, T2);
    return two_htlc(TwoHtlcMode::Dependent, p1, p2, skewed());
  };
  // Both timelocks at least 2, so each channel is sound in isolation and any
  // deviation is attributable to the composition.
  for (Round T1 = 2; T1 <= 4; ++T1) {
    for (Round T2 = 2; T2 <= 4; ++T2) {
      TwoHtlcReport r = run(T1, T2);
      REQUIRE(r.checked);
      CHECK(r.deviation_found == !r.timelock_condition);
      if (r.deviation_found) CHECK(r.gain > 0);
    }
  }
  CHECK_FALSE(run(2, 4).timelock_condition);
}

TEST_CASE("independent chained htlcs settle additively") {
  HtlcParams p1 = base_htlc();
  HtlcParams p2 = base_htlc();
  p1.T = p2.T = 2;
  p1.t_e = p2.t_e = 2;
  TwoHtlcReport r = two_htlc(TwoHtlcMode::Independent, p1, p2, skewed());
  CHECK(r.additivity_ok);
}

TEST_CASE("wormhole collusion captures exactly the routing margin") {
  auto route = [](const char* v1, const char* v2, const char* v3) {
    HtlcParams p1 = base_htlc(), p2 = base_htlc(), p3 = base_htlc();
    p1.T = p1.t_e = 3;
    p2.T = p2.t_e = 2;
    p3.T = p3.t_e = 1;
    p1.v = parse_rational(v1);
    p2.v = parse_rational(v2);
    p3.v = parse_rational(v3);
    return std::array<HtlcParams, 3>{p1, p2, p3};
  };
  auto [a1, a2, a3] = route("10", "9", "8");
  WormholeReport r = wormhole(a1, a2, a3, skewed());
  CHECK(r.deviation);
  CHECK(r.gain == 1);
  CHECK(r.gain_matches);

  auto [b1, b2, b3] = route("10", "8", "9");
  WormholeReport s = wormhole(b1, b2, b3, skewed());
  CHECK_FALSE(s.deviation);
  CHECK(s.gain == -1);
  CHECK(s.gain_matches);

  auto [c1, c2, c3] = route("10", "17/2", "17/2");
  WormholeReport t = wormhole(c1, c2, c3, skewed());
  CHECK_FALSE(t.deviation);
  CHECK(t.gain == 0);
  CHECK(t.gain_matches);
}

TEST_CASE("crab parameter validation") {
  CrabParams p;
  p.T = 2;
  p.v_A_l = 4;
  p.v_B_l = 6;
  p.v_A_o = 3;
  p.v_B_o = 7;
  p.c = 2;
  p.v = 10;
  CHECK_THROWS_WITH_AS(validate(p), doctest::Contains("StateOrderViolated"), Error);
  p.v_A_o = 9;
  p.v_B_o = 1;
  p.c = -1;
  CHECK_THROWS_WITH_AS(validate(p), doctest::Contains("NegativeValue"), Error);
}

TEST_CASE("crab collateral threshold for two equal miners") {
  auto lam = halves();
  for (Round T = 1; T <= 10; ++T) {
    CHECK(crab_safety(T, parse_rational("0.6"), 1, lam).safe);
    CHECK_FALSE(crab_safety(T, parse_rational("0.4"), 1, lam).safe);
    CHECK_FALSE(crab_safety(T, parse_rational("0.5"), 1, lam).safe);
  }
  CHECK(crab_safety(1, parse_rational("0.6"), 1, lam).minimal_safe_T == 1);
  CHECK_FALSE(crab_safety(5, parse_rational("0.4"), 1, lam).minimal_safe_T.has_value());
  CHECK_FALSE(crab_safety(5, parse_rational("0.5"), 1, lam).minimal_safe_T.has_value());
}

TEST_CASE("crab analytic and oracle routes agree") {
  auto lam = skewed();
  CrabSafety s = crab_safety(3, 1, 10, lam);
  CHECK(s.safe);
  CHECK(s.minimal_safe_T == 3);
  CHECK_FALSE(crab_safety(2, 1, 10, lam).safe);
  for (Round T = 0; T <= 6; ++T) {
    for (const char* c : {"0.1", "0.3", "0.5", "0.7", "2"}) {
      CrabSafety v = crab_safety(T, parse_rational(c), 1, lam);
      CHECK(v.analytic_safe == v.oracle_safe);
      CrabSafety w = crab_safety(T, parse_rational(c), 1, halves());
      CHECK(w.analytic_safe == w.oracle_safe);
    }
  }
}

TEST_CASE("crab game tree verdict matches the closed form") {
  CrabParams p;
  p.T = 1;
  p.v_A_l = 0;
  p.v_B_l = 10;
  p.v_A_o = 10;
  p.v_B_o = 0;
  p.v = 10;
  p.epsilon = parse_rational("0.1");
  auto lam = halves();
  auto alice_gain = [&](const Rational& c) {
    p.c = c;
    Protocol proto = crab_game(p);
    const Param& pt = proto.game.param_space.front();
    GameTree tree = proto.game.builder(pt);
    CompletedGame game = complete(tree, lam, crab_rules(p), crab_conflicts(p));
    StrategyProfile ipb = proto.ipb(pt);
    BestResponse br = best_response(game, ipb, {"Alice"}, {"Alice"});
    return Rational(br.value - group_utility(game.utility(ipb), {"Alice"}));
  };
  CHECK(crab_safety(p.T, 6, p.v, lam).safe);
  CHECK(alice_gain(6) == 0);
  CHECK_FALSE(crab_safety(p.T, 2, p.v, lam).safe);
  CHECK(alice_gain(2) > 0);
}

TEST_CASE("mev parameter validation") {
  MevParams p;
  p.l = 100;
  p.s = 5;
  p.f = 1;
  p.lambda = skewed();
  p.trusted = 5;
  CHECK_THROWS_WITH_AS(validate(p), doctest::Contains("UnknownMiner"), Error);
  p.trusted = 1;
  p.s = -1;
  CHECK_THROWS_WITH_AS(validate(p), doctest::Contains("NegativeSpread"), Error);
  p.s = 5;
  p.f = 0;
  CHECK_THROWS_WITH_AS(validate(p), doctest::Contains("NonPositiveFee"), Error);
}

TEST_CASE("mev order flows only to the trusted miner") {
  MevParams p;
  p.l = 100;
  p.s = 5;
  p.f = 1;
  p.lambda = skewed();
  p.trusted = 2;
  MevReport r = mev_game(p);
  CHECK(r.optimal_share == std::set<std::string>{"m2"});
  CHECK(r.user_utility == 5);
  CHECK(r.formula_utility == 5);
  CHECK(r.equilibrium_action.at("m2") == "H");
  CHECK(r.equilibrium_action.at("m1") == "D");
  CHECK(r.sandwich_strict);

  p.trusted.reset();
  MevReport none = mev_game(p);
  CHECK(none.optimal_share.empty());
  CHECK(none.user_utility == 0);
  CHECK(none.formula_utility == 0);
  CHECK(none.equilibrium_action.at("m1") == "D");
  CHECK(none.equilibrium_action.at("m2") == "D");

  p.trusted = 1;
  p.s = 0;
  MevReport flat = mev_game(p);
  CHECK(flat.optimal_share == std::set<std::string>{"m1"});
  CHECK(flat.user_utility == 0);
  CHECK_FALSE(flat.sandwich_strict);
}
