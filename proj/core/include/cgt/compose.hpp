#pragma once

#include <functional>
#include <memory>
#include <optional>

#include "cgt/comg.hpp"
#include "cgt/extform.hpp"

namespace cgt {

struct CollusionMap;

// Application game glued to the blockchain layer: leaf emissions resolve
// through the conflict race and settle into exact expected balances.
class CompletedGame {
 public:
  CompletedGame(GameTree tree, HashrateDistribution lambda, SettlementRules rules,
                ConflictSpec conflicts,
                std::vector<std::pair<PlayerId, Rational>> miner_split = {});

  const GameTree& tree() const { return tree_; }
  const HashrateDistribution& lambda() const { return lambda_; }
  const SettlementRules& rules() const { return rules_; }
  const ConflictSpec& conflicts() const { return conflicts_; }

  // Expected balances; probabilities enter as exact dyadic rationals.
  const Balances& utility(const StrategyProfile& profile) const;
  const Balances& utility_of_triples(const TripleSet& triples) const;

 private:
  friend CompletedGame collusion_reduce(const CompletedGame&, const CollusionMap&,
                                        const std::set<PlayerId>&,
                                        const std::set<PlayerId>&);
  GameTree tree_;
  HashrateDistribution lambda_;
  SettlementRules rules_;
  ConflictSpec conflicts_;
  std::vector<std::pair<PlayerId, Rational>> miner_split_;
  std::map<PlayerId, PlayerId> aggregate_;  // member -> representative, post-reduction
  mutable std::map<std::string, Balances> cache_;
};

CompletedGame complete(GameTree tree, const HashrateDistribution& lambda,
                       SettlementRules rules, ConflictSpec conflicts,
                       std::vector<std::pair<PlayerId, Rational>> miner_split = {});

struct CollusionMap {
  std::map<PlayerId, PlayerId> eta;  // identity where absent

  const PlayerId& rep(const PlayerId& id) const {
    auto it = eta.find(id);
    return it == eta.end() ? id : it->second;
  }
  std::map<PlayerId, std::vector<PlayerId>> blocks(const std::set<PlayerId>& ids) const;
  bool is_identity() const;
  std::string describe() const;
};

// Errors: NotIdempotent, MinerMerged.
void validate_collusion(const CollusionMap& eta, const std::set<PlayerId>& players,
                        const std::set<PlayerId>& miners);

// All partitions of players+miners with at most one miner per block and block
// size <= max_block; representative is the miner if present, else the smallest
// id. Errors: TooManyPlayers (population > 10).
std::vector<CollusionMap> enumerate_collusions(const std::set<PlayerId>& players,
                                               const std::set<PlayerId>& miners,
                                               size_t max_block);

// Rewrites node ownership to coalition representatives; utilities of a
// representative sum its members.
CompletedGame collusion_reduce(const CompletedGame& game, const CollusionMap& eta,
                               const std::set<PlayerId>& players,
                               const std::set<PlayerId>& miners);

Rational group_utility(const Balances& b, const std::vector<PlayerId>& members);

struct IewdsResult {
  // Per player: surviving strategies, each an action assignment over the
  // player's slots in slot order.
  std::map<PlayerId, std::vector<std::vector<size_t>>> surviving;
  size_t rounds = 0;
};

// Simultaneous maximal elimination of weakly dominated strategies on the
// normal form. Errors: EnumerationBoundExceeded.
IewdsResult iewds(const CompletedGame& game, size_t profile_bound = 100'000);

bool profile_survives(const IewdsResult& reduced, const GameTree& tree,
                      const StrategyProfile& profile);

struct ICVerdict {
  bool holds = true;
  // True when a failure is a strict best-response improvement; false when it
  // is an outcome-changing indifference or an IEWDS elimination.
  bool strict_failure = false;
  enum class Iewds { Survives, Eliminated, Skipped } iewds_status = Iewds::Skipped;
  struct Witness {
    CollusionMap eta;
    PlayerId deviator;          // coalition representative
    StrategyProfile deviation;
    Rational gain;              // 0 for indifference failures
  };
  std::optional<Witness> witness;
};

struct CheckOptions {
  size_t max_block = 4;
  size_t iewds_profile_bound = 100'000;
  std::set<PlayerId> miners;  // blockchain players eligible for coalitions
  std::vector<std::pair<PlayerId, Rational>> miner_split;
};

struct BestResponse {
  Rational value;
  StrategyProfile profile;        // movers' best reply, others at the base
  bool optimum_changes_outcome;   // an optimal reply reaches a different balance vector
};

// Exact best reply of the mover coalition with everyone else frozen at base;
// linear in the tree, so it scales to games whose normal form does not.
// value_members defaults to movers; pass the full coalition when silent
// members (e.g. miners without nodes) share the objective.
BestResponse best_response(const CompletedGame& game, const StrategyProfile& base,
                           const std::set<PlayerId>& movers,
                           const std::vector<PlayerId>& value_members = {});

// Def-IC check: for every collusion reduction, the IPB must survive IEWDS
// (when the normal form fits the bound) and admit no improving or
// outcome-changing indifferent unilateral coalition deviation.
ICVerdict check_ic_tree(const GameTree& tree, const StrategyProfile& ipb,
                        const HashrateDistribution& lambda, const SettlementRules& rules,
                        const ConflictSpec& conflicts, const CheckOptions& opts);

std::map<std::string, ICVerdict> check_ic(const Protocol& protocol,
                                          const HashrateDistribution& lambda,
                                          const SettlementRules& rules,
                                          const ConflictSpec& conflicts,
                                          const CheckOptions& opts);

std::string param_key(const Param& p);

// Composition map g: either a constant parameter for the follow-up game or a
// statistic of the leading game's play path.
struct CompositionMap {
  bool constant = false;
  Param constant_q;
  std::string trace_name;
  std::function<Param(const Param& p, const GameTree& tree1,
                      const std::vector<PathStep>& path)> reducer;

  Param apply(const Param& p, const GameTree& tree1,
              const std::vector<PathStep>& path) const;
};

CompositionMap constant_map(Param q);

struct Graft {
  NodeId at_leaf = -1;              // leaf of game 1 that was replaced
  Param q;
  std::map<NodeId, NodeId> node_map;  // game-2 node id -> composed id
};

struct ComposedTree {
  GameTree tree;
  std::vector<Graft> grafts;
};

// Replaces every leaf of tree1 with the game-2 tree for parameter
// g(p, path-to-leaf). Errors: AlphabetOverlap, ParameterOutOfRange.
ComposedTree compose_trees(const GameTree& tree1, const Param& p,
                           const ParamGame& game2, const CompositionMap& g);

// Errors as compose_trees; parameter space is game1's.
ParamGame g_compose(const ParamGame& game1, const ParamGame& game2,
                    const CompositionMap& g);

// Composed protocol whose IPB plays both component IPBs.
Protocol compose_protocols(const Protocol& p1, const Protocol& p2,
                           const CompositionMap& g);

// Componentwise sum over disjoint alphabets. Errors: AlphabetOverlap.
SettlementRules additive_union(const SettlementRules& rules1,
                               const SettlementRules& rules2);

struct HarnessReport {
  bool pass = true;
  std::string detail;  // first counterexample, empty on pass
};

// Composes two verified-IC protocols with a constant map and re-checks IC,
// coalition additivity and utility projection. Errors: PreconditionFailed.
HarnessReport composition_harness(const Protocol& p1, const SettlementRules& rules1,
                               const Protocol& p2, const SettlementRules& rules2,
                               const Param& q_constant,
                               const HashrateDistribution& lambda,
                               const CheckOptions& opts);

}  // namespace cgt
