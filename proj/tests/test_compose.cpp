#include <doctest.h>

#include "cgt/compose.hpp"

using namespace cgt;

namespace {

// One decision: "post" emits a fee-1 transaction, "skip" emits nothing.
GameTree poster_tree(std::set<PlayerId> players = {"A"}) {
  GameTree t;
  t.players = std::move(players);
  t.nodes.resize(3);
  t.nodes[0].kind = GameTree::Decision{"A", {"post", "skip"}, {1, 2}};
  t.nodes[1].kind = GameTree::Leaf{};
  t.nodes[1].emit = {{"a", 0, 1}};
  t.nodes[2].kind = GameTree::Leaf{};
  return t;
}

SettlementRules poster_rules() {
  SettlementRules r;
  r.base_balance[{"a"}] = {{"A", 5}};
  r.base_balance[{}] = {{"A", 1}};
  r.payer = {{"a", "A"}};
  return r;
}

StrategyProfile pick(std::initializer_list<std::tuple<NodeId, PlayerId, size_t>> xs) {
  StrategyProfile p;
  for (auto& [n, pl, a] : xs) p.choice[{n, pl}] = a;
  return p;
}

GameTree pd_tree() {
  GameTree t;
  t.players = {"A", "B"};
  t.nodes.resize(5);
  t.nodes[0].kind = GameTree::Simultaneous{
      {"A", "B"}, {{"c", "d"}, {"c", "d"}}, {1, 2, 3, 4}};
  const char* txs[] = {"cc", "cd", "dc", "dd"};
  for (int i = 0; i < 4; ++i) {
    t.nodes[i + 1].kind = GameTree::Leaf{};
    t.nodes[i + 1].emit = {{txs[i], 0, 0}};
  }
  return t;
}

SettlementRules pd_rules() {
  SettlementRules r;
  r.base_balance[{"cc"}] = {{"A", 3}, {"B", 3}};
  r.base_balance[{"cd"}] = {{"A", 0}, {"B", 4}};
  r.base_balance[{"dc"}] = {{"A", 4}, {"B", 0}};
  r.base_balance[{"dd"}] = {{"A", 1}, {"B", 1}};
  return r;
}

HashrateDistribution solo_miner() { return validate_hashrate({0, 1}); }

}  // namespace

TEST_CASE("completed game settles through the race with exact probabilities") {
  auto game = complete(poster_tree(), solo_miner(), poster_rules(), {});
  auto post = game.utility(pick({{0, "A", 0}}));
  CHECK(post.at("A") == 4);
  CHECK(post.at(kMinerPool) == 1);
  auto skip = game.utility(pick({{0, "A", 1}}));
  CHECK(skip.at("A") == 1);
  CHECK(skip.count(kMinerPool) == 0);
}

TEST_CASE("miner split redirects pool fees") {
  auto game = complete(poster_tree(), solo_miner(), poster_rules(), {}, {{"m1", 1}});
  auto post = game.utility(pick({{0, "A", 0}}));
  CHECK(post.at("m1") == 1);
  CHECK(post.count(kMinerPool) == 0);

  auto split = complete(poster_tree(), solo_miner(), poster_rules(), {},
                        {{"m1", 1}, {"m2", 3}});
  auto b = split.utility(pick({{0, "A", 0}}));
  CHECK(b.at("m1") == Rational(1, 4));
  CHECK(b.at("m2") == Rational(3, 4));
}

TEST_CASE("collusion maps enumerate partitions with miner constraints") {
  auto all = enumerate_collusions({"A", "B"}, {"m"}, 3);
  CHECK(all.size() == 5);
  CHECK(all[0].is_identity());

  CHECK(enumerate_collusions({"A"}, {"m1", "m2"}, 2).size() == 3);

  auto singletons = enumerate_collusions({"A", "B"}, {"m"}, 1);
  REQUIRE(singletons.size() == 1);
  CHECK(singletons[0].is_identity());

  for (const auto& eta : all) {
    auto blocks = eta.blocks({"A", "B", "m"});
    for (const auto& [rep, members] : blocks) {
      if (std::find(members.begin(), members.end(), "m") != members.end())
        CHECK(rep == "m");
    }
  }
  CHECK_THROWS_WITH_AS(
      enumerate_collusions({"p0", "p1", "p2", "p3", "p4", "p5", "p6", "p7"},
                           {"m1", "m2", "m3"}, 2),
      doctest::Contains("TooManyPlayers"), Error);
}

TEST_CASE("collusion validation rejects bad maps") {
  CollusionMap chain;
  chain.eta = {{"A", "B"}, {"B", "C"}};
  CHECK_THROWS_WITH_AS(validate_collusion(chain, {"A", "B", "C"}, {}),
                       doctest::Contains("NotIdempotent"), Error);
  CollusionMap two_miners;
  two_miners.eta = {{"m1", "m2"}};
  CHECK_THROWS_WITH_AS(validate_collusion(two_miners, {}, {"m1", "m2"}),
                       doctest::Contains("MinerMerged"), Error);
}

TEST_CASE("collusion reduction aggregates member balances under the representative") {
  SettlementRules rules = poster_rules();
  rules.base_balance[{"a"}]["B"] = 7;
  auto game = complete(poster_tree({"A", "B"}), solo_miner(), rules, {});
  CollusionMap eta;
  eta.eta = {{"B", "A"}};
  auto reduced = collusion_reduce(game, eta, {"A", "B"}, {});
  auto b = reduced.utility(pick({{0, "A", 0}}));
  CHECK(b.at("A") == 11);
  CHECK(b.count("B") == 0);
}

TEST_CASE("merging two seats of a simultaneous stage is rejected by reduction") {
  auto game = complete(pd_tree(), solo_miner(), pd_rules(), {});
  CollusionMap eta;
  eta.eta = {{"B", "A"}};
  CHECK_THROWS_WITH_AS(collusion_reduce(game, eta, {"A", "B"}, {}),
                       doctest::Contains("MergedSimultaneous"), Error);
}

TEST_CASE("weak dominance elimination removes the dominated action") {
  auto game = complete(poster_tree(), solo_miner(), poster_rules(), {});
  auto result = iewds(game);
  REQUIRE(result.surviving.at("A").size() == 1);
  CHECK(result.surviving.at("A")[0] == std::vector<size_t>{0});
  CHECK(profile_survives(result, game.tree(), pick({{0, "A", 0}})));
  CHECK_FALSE(profile_survives(result, game.tree(), pick({{0, "A", 1}})));
}

TEST_CASE("dominance elimination solves the dilemma stage") {
  auto game = complete(pd_tree(), solo_miner(), pd_rules(), {});
  auto result = iewds(game);
  CHECK(result.surviving.at("A") == std::vector<std::vector<size_t>>{{1}});
  CHECK(result.surviving.at("B") == std::vector<std::vector<size_t>>{{1}});
  CHECK(profile_survives(result, game.tree(),
                         pick({{0, "A", 1}, {0, "B", 1}})));
}

TEST_CASE("best response maximizes the coalition value over the tree") {
  auto game = complete(poster_tree(), solo_miner(), poster_rules(), {});
  auto br = best_response(game, pick({{0, "A", 1}}), {"A"});
  CHECK(br.value == 4);
  CHECK(br.profile.at(0, "A") == 0);
  auto at_opt = best_response(game, pick({{0, "A", 0}}), {"A"});
  CHECK(at_opt.value == 4);
  CHECK_FALSE(at_opt.optimum_changes_outcome);
}

TEST_CASE("equilibrium check holds for the strict poster game") {
  auto verdict = check_ic_tree(poster_tree(), pick({{0, "A", 0}}), solo_miner(),
                               poster_rules(), {}, {.miners = {"m"},
                                                    .miner_split = {{"m", 1}}});
  CHECK(verdict.holds);
  CHECK(verdict.iewds_status == ICVerdict::Iewds::Survives);
  CHECK_FALSE(verdict.witness.has_value());
}

TEST_CASE("dominated prescriptions are flagged through elimination") {
  auto verdict = check_ic_tree(poster_tree(), pick({{0, "A", 1}}), solo_miner(),
                               poster_rules(), {}, {});
  CHECK_FALSE(verdict.holds);
  CHECK(verdict.iewds_status == ICVerdict::Iewds::Eliminated);
}

TEST_CASE("coalition deviations are caught across simultaneous seats") {
  auto verdict = check_ic_tree(pd_tree(), pick({{0, "A", 1}, {0, "B", 1}}),
                               solo_miner(), pd_rules(), {}, {});
  CHECK_FALSE(verdict.holds);
  CHECK(verdict.strict_failure);
  REQUIRE(verdict.witness.has_value());
  CHECK_FALSE(verdict.witness->eta.is_identity());
  CHECK(verdict.witness->gain == 4);

  auto singles = check_ic_tree(pd_tree(), pick({{0, "A", 1}, {0, "B", 1}}),
                               solo_miner(), pd_rules(), {}, {.max_block = 1});
  CHECK(singles.holds);
}

TEST_CASE("outcome-changing indifference is reported as a non-strict failure") {
  SettlementRules rules;
  rules.base_balance[{"a"}] = {{"A", 2}, {"B", 5}};
  rules.base_balance[{}] = {{"A", 1}};
  rules.payer = {{"a", "A"}};
  auto verdict = check_ic_tree(poster_tree({"A", "B"}), pick({{0, "A", 0}}),
                               solo_miner(), rules, {}, {});
  CHECK_FALSE(verdict.holds);
  CHECK_FALSE(verdict.strict_failure);
  REQUIRE(verdict.witness.has_value());
  CHECK(verdict.witness->gain == 0);
}

namespace {

ParamGame delayed_poster() {
  ParamGame g;
  g.param_space = {{{"T", 1}}, {{"T", 2}}};
  g.builder = [](const Param& p) {
    GameTree t;
    t.players = {"C"};
    t.nodes.resize(3);
    t.nodes[0].kind = GameTree::Decision{"C", {"in", "out"}, {1, 2}};
    t.nodes[1].kind = GameTree::Leaf{};
    t.nodes[1].emit = {{"c", p.at("T"), 1}};
    t.nodes[2].kind = GameTree::Leaf{};
    return t;
  };
  return g;
}

SettlementRules delayed_rules() {
  SettlementRules r;
  r.base_balance[{"c"}] = {{"C", 5}};
  r.base_balance[{}] = {{"C", 1}};
  r.payer = {{"c", "C"}};
  return r;
}

}  // namespace

TEST_CASE("leaf grafting composes the trees with disjoint alphabets") {
  auto composed = compose_trees(poster_tree(), {}, delayed_poster(),
                                constant_map({{"T", 1}}));
  CHECK(composed.tree.nodes.size() == 7);
  CHECK(composed.tree.players == std::set<PlayerId>{"A", "C"});
  REQUIRE(composed.grafts.size() == 2);
  CHECK(composed.grafts[0].q == Param{{"T", 1}});
  validate_tree(composed.tree);

  StrategyProfile sigma = pick({{0, "A", 0}});
  for (const auto& graft : composed.grafts)
    sigma.choice[{graft.node_map.at(0), "C"}] = 0;
  auto triples = outcome(composed.tree, sigma);
  REQUIRE(triples.size() == 2);
  CHECK(triples[0].tx == "a");
  CHECK(triples[1].tx == "c");
  CHECK(triples[1].post_time == 1);
}

TEST_CASE("path statistics can steer the follow-up parameter") {
  CompositionMap g;
  g.trace_name = "branch";
  g.reducer = [](const Param&, const GameTree&, const std::vector<PathStep>& path) {
    // Deeper parameter when the leading game posted (first branch).
    return Param{{"T", path.front().actions[0] == 0 ? 2 : 1}};
  };
  auto composed = compose_trees(poster_tree(), {}, delayed_poster(), g);
  REQUIRE(composed.grafts.size() == 2);
  CHECK(composed.grafts[0].q == Param{{"T", 2}});
  CHECK(composed.grafts[1].q == Param{{"T", 1}});
}

TEST_CASE("composition guards") {
  CHECK_THROWS_WITH_AS(compose_trees(poster_tree(), {}, delayed_poster(),
                                     constant_map({{"T", 5}})),
                       doctest::Contains("ParameterOutOfRange"), Error);
  ParamGame clash = delayed_poster();
  auto inner = clash.builder;
  clash.builder = [inner](const Param& p) {
    GameTree t = inner(p);
    t.nodes[1].emit[0].tx = "a";
    return t;
  };
  CHECK_THROWS_WITH_AS(compose_trees(poster_tree(), {}, clash, constant_map({{"T", 1}})),
                       doctest::Contains("AlphabetOverlap"), Error);
}

TEST_CASE("settlement union sums componentwise over disjoint alphabets") {
  auto rules = additive_union(poster_rules(), delayed_rules());
  CHECK(rules.base_balance.size() == 4);
  auto both = rules.base_balance.at({"a", "c"});
  CHECK(both.at("A") == 5);
  CHECK(both.at("C") == 5);
  auto neither = rules.base_balance.at({});
  CHECK(neither.at("A") == 1);
  CHECK(neither.at("C") == 1);
  CHECK(rules.payer.size() == 2);
  CHECK_THROWS_WITH_AS(additive_union(poster_rules(), poster_rules()),
                       doctest::Contains("AlphabetOverlap"), Error);
}

TEST_CASE("composing verified components with a constant map stays incentive compatible") {
  Protocol p1;
  p1.players = {"A"};
  p1.game.param_space = {{}};
  p1.game.builder = [](const Param&) { return poster_tree(); };
  p1.ipb = [](const Param&) { return pick({{0, "A", 0}}); };

  Protocol p2;
  p2.players = {"C"};
  p2.game = delayed_poster();
  p2.ipb = [](const Param&) { return pick({{0, "C", 0}}); };

  auto report = composition_harness(p1, poster_rules(), p2, delayed_rules(),
                                 {{"T", 1}}, solo_miner(), {});
  CHECK(report.pass);
  CHECK(report.detail.empty());

  // A component that is not incentive compatible is rejected up front.
  Protocol bad = p1;
  bad.ipb = [](const Param&) { return pick({{0, "A", 1}}); };
  CHECK_THROWS_WITH_AS(composition_harness(bad, poster_rules(), p2, delayed_rules(),
                                        {{"T", 1}}, solo_miner(), {}),
                       doctest::Contains("PreconditionFailed"), Error);
}

TEST_CASE("parameter keys are canonical") {
  CHECK(param_key({}) == "-");
  CHECK(param_key({{"T", 3}, {"s", 1}}) == "T=3,s=1");
}
