#pragma once

#include <functional>
#include <map>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "cgt/core.hpp"

namespace cgt {

using NodeId = int;
using PlayerId = std::string;

struct FeeGrid {
  Rational min, max, step;
  std::vector<Rational> values() const;  // {min, min+step, ..., <= max}
};

// Finite extensive-form game. Triples attached to a node are emitted whenever
// play passes through it; a fee-choice edge additionally emits (tx, post_time,
// chosen fee).
struct GameTree {
  struct Decision {
    PlayerId owner;
    std::vector<std::string> actions;
    std::vector<NodeId> children;
  };
  struct FeeChoice {
    PlayerId owner;
    std::string tx;
    Round post_time = 0;
    FeeGrid grid;
    NodeId child = -1;
  };
  struct Simultaneous {
    std::vector<PlayerId> owners;
    std::vector<std::vector<std::string>> actions;  // per owner
    std::vector<NodeId> children;  // row-major over owners' action indices
  };
  struct Leaf {};

  struct Node {
    std::variant<Decision, FeeChoice, Simultaneous, Leaf> kind;
    TripleSet emit;
    std::string label;
  };

  std::set<PlayerId> players;
  std::vector<Node> nodes;
  NodeId root = 0;

  const Node& at(NodeId id) const { return nodes.at(static_cast<size_t>(id)); }
};

// One chooser slot: a (node, player) pair with a finite action count.
struct ChoiceSlot {
  NodeId node = -1;
  PlayerId player;
  size_t action_count = 0;
  auto operator<=>(const ChoiceSlot&) const = default;
};

struct StrategyProfile {
  std::map<std::pair<NodeId, PlayerId>, size_t> choice;

  size_t at(NodeId n, const PlayerId& p) const;
  bool operator==(const StrategyProfile&) const = default;
  auto operator<=>(const StrategyProfile&) const = default;
};

struct PathStep {
  NodeId node = -1;
  // Action indices taken at this node, one per chooser (single entry except
  // at simultaneous stages).
  std::vector<size_t> actions;
};

using Param = std::map<std::string, Round>;

struct ParamGame {
  std::vector<Param> param_space;
  std::function<GameTree(const Param&)> builder;
};

struct Protocol {
  std::set<PlayerId> players;
  ParamGame game;
  std::function<StrategyProfile(const Param&)> ipb;
};

// Structural validation: reachability, no duplicate tx ids along any path,
// non-empty grids and action lists, owners within the player set.
void validate_tree(const GameTree& tree);

// JSON: {"players":[...], "root":{ "kind":"decision|fee_choice|simultaneous|leaf",
//   "owner", "actions":[...], "children":[...], "child":{...},
//   "tx", "post_time", "grid":{"min","max","step"},
//   "players":[...], "joint_actions":{player:[...]},
//   "emit":[{"tx","post_time","fee"}], "label" }}
GameTree build_game(const std::string& json_text);
std::string game_to_json(const GameTree& tree);

std::vector<ChoiceSlot> choice_slots(const GameTree& tree);

// Errors: PartialProfile.
TripleSet outcome(const GameTree& tree, const StrategyProfile& profile);
std::vector<PathStep> play_path(const GameTree& tree, const StrategyProfile& profile);
NodeId reached_leaf(const GameTree& tree, const StrategyProfile& profile);

size_t profile_count(const GameTree& tree);

// Errors: EnumerationBoundExceeded.
std::vector<StrategyProfile> enumerate_profiles(const GameTree& tree,
                                                size_t bound = 10'000'000);

}  // namespace cgt
