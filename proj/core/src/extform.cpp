#include "cgt/extform.hpp"

#include <algorithm>

#include <nlohmann/json.hpp>

namespace cgt {

std::vector<Rational> FeeGrid::values() const {
  if (step <= 0 && min != max)
    throw domain_error("FeeGridEmpty", "non-positive step on a non-degenerate grid");
  std::vector<Rational> out;
  if (min > max) throw domain_error("FeeGridEmpty", "min above max");
  Rational v = min;
  while (v <= max) {
    out.push_back(v);
    if (step <= 0) break;
    v += step;
  }
  if (out.empty()) throw domain_error("FeeGridEmpty", "grid has no points");
  return out;
}

size_t StrategyProfile::at(NodeId n, const PlayerId& p) const {
  auto it = choice.find({n, p});
  if (it == choice.end())
    throw domain_error("PartialProfile",
                       "no choice at node " + std::to_string(n) + " for " + p);
  return it->second;
}

namespace {

std::vector<NodeId> children_of(const GameTree::Node& node) {
  if (auto* d = std::get_if<GameTree::Decision>(&node.kind)) return d->children;
  if (auto* f = std::get_if<GameTree::FeeChoice>(&node.kind)) return {f->child};
  if (auto* s = std::get_if<GameTree::Simultaneous>(&node.kind)) return s->children;
  return {};
}

void check_path_ids(const GameTree& tree, NodeId id, std::set<std::string> seen) {
  const auto& node = tree.at(id);
  auto add = [&seen](const std::string& tx) {
    if (!seen.insert(tx).second) throw domain_error("DuplicateTxId", tx);
  };
  for (const auto& t : node.emit) add(t.tx);
  if (auto* f = std::get_if<GameTree::FeeChoice>(&node.kind)) add(f->tx);
  for (NodeId c : children_of(node)) check_path_ids(tree, c, seen);
}

}  // namespace

void validate_tree(const GameTree& tree) {
  if (tree.nodes.empty()) throw domain_error("DanglingChild", "empty tree");
  std::vector<int> indegree(tree.nodes.size(), 0);
  for (size_t i = 0; i < tree.nodes.size(); ++i) {
    const auto& node = tree.nodes[i];
    auto check_owner = [&](const PlayerId& p) {
      if (!tree.players.count(p)) throw domain_error("UnknownOwner", p);
    };
    if (auto* d = std::get_if<GameTree::Decision>(&node.kind)) {
      check_owner(d->owner);
      if (d->actions.empty() || d->actions.size() != d->children.size())
        throw domain_error("DanglingChild", "decision arity mismatch");
    } else if (auto* f = std::get_if<GameTree::FeeChoice>(&node.kind)) {
      check_owner(f->owner);
      f->grid.values();
    } else if (auto* s = std::get_if<GameTree::Simultaneous>(&node.kind)) {
      size_t prod = 1;
      if (s->owners.empty() || s->owners.size() != s->actions.size())
        throw domain_error("DanglingChild", "simultaneous arity mismatch");
      for (size_t k = 0; k < s->owners.size(); ++k) {
        check_owner(s->owners[k]);
        if (s->actions[k].empty())
          throw domain_error("DanglingChild", "empty action set");
        prod *= s->actions[k].size();
      }
      if (s->children.size() != prod)
        throw domain_error("DanglingChild", "joint action arity mismatch");
    }
    for (NodeId c : children_of(node)) {
      if (c < 0 || static_cast<size_t>(c) >= tree.nodes.size())
        throw domain_error("DanglingChild", "child id out of range");
      ++indegree[static_cast<size_t>(c)];
    }
    for (const auto& t : node.emit)
      if (t.fee < 0) throw domain_error("NegativeFee", t.tx);
  }
  for (size_t i = 0; i < tree.nodes.size(); ++i) {
    const int expected = static_cast<NodeId>(i) == tree.root ? 0 : 1;
    if (indegree[i] != expected)
      throw domain_error("DanglingChild", "tree is not singly rooted and acyclic");
  }
  check_path_ids(tree, tree.root, {});
}

namespace {

Rational json_fee(const nlohmann::json& v) {
  if (v.is_string()) return parse_rational(v.get<std::string>());
  if (v.is_number_integer()) return Rational(v.get<long long>());
  if (v.is_number_float()) return rational_from_double(v.get<double>());
  throw domain_error("BadValue", "expected fee as string or number");
}

TripleSet parse_emit(const nlohmann::json& node) {
  TripleSet out;
  for (const auto& e : node.value("emit", nlohmann::json::array()))
    out.push_back({e.at("tx").get<std::string>(), e.value("post_time", Round(0)),
                   json_fee(e.value("fee", nlohmann::json(0)))});
  return out;
}

NodeId parse_node(const nlohmann::json& spec, GameTree& tree) {
  GameTree::Node node;
  node.emit = parse_emit(spec);
  node.label = spec.value("label", std::string());
  const std::string kind = spec.value("kind", "leaf");
  const NodeId id = static_cast<NodeId>(tree.nodes.size());
  tree.nodes.emplace_back();  // reserve slot so parents precede children
  if (kind == "decision") {
    GameTree::Decision d;
    d.owner = spec.at("owner").get<std::string>();
    for (const auto& a : spec.at("actions")) d.actions.push_back(a.get<std::string>());
    for (const auto& c : spec.at("children")) d.children.push_back(parse_node(c, tree));
    node.kind = std::move(d);
  } else if (kind == "fee_choice") {
    GameTree::FeeChoice f;
    f.owner = spec.at("owner").get<std::string>();
    f.tx = spec.at("tx").get<std::string>();
    f.post_time = spec.value("post_time", Round(0));
    const auto& g = spec.at("grid");
    f.grid = {json_fee(g.at("min")), json_fee(g.at("max")),
              json_fee(g.value("step", nlohmann::json(0)))};
    f.child = parse_node(spec.at("child"), tree);
    node.kind = std::move(f);
  } else if (kind == "simultaneous") {
    GameTree::Simultaneous s;
    for (const auto& p : spec.at("players")) s.owners.push_back(p.get<std::string>());
    for (const auto& p : s.owners) {
      std::vector<std::string> acts;
      for (const auto& a : spec.at("joint_actions").at(p))
        acts.push_back(a.get<std::string>());
      s.actions.push_back(std::move(acts));
    }
    for (const auto& c : spec.at("children")) s.children.push_back(parse_node(c, tree));
    node.kind = std::move(s);
  } else if (kind == "leaf") {
    node.kind = GameTree::Leaf{};
  } else {
    throw domain_error("BadValue", "unknown node kind " + kind);
  }
  tree.nodes[static_cast<size_t>(id)] = std::move(node);
  return id;
}

nlohmann::json emit_to_json(const TripleSet& ts) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& t : ts)
    arr.push_back({{"tx", t.tx}, {"post_time", t.post_time},
                   {"fee", rational_to_string(t.fee)}});
  return arr;
}

nlohmann::json node_to_json(const GameTree& tree, NodeId id) {
  const auto& node = tree.at(id);
  nlohmann::json out;
  if (!node.emit.empty()) out["emit"] = emit_to_json(node.emit);
  if (!node.label.empty()) out["label"] = node.label;
  if (auto* d = std::get_if<GameTree::Decision>(&node.kind)) {
    out["kind"] = "decision";
    out["owner"] = d->owner;
    out["actions"] = d->actions;
    nlohmann::json ch = nlohmann::json::array();
    for (NodeId c : d->children) ch.push_back(node_to_json(tree, c));
    out["children"] = std::move(ch);
  } else if (auto* f = std::get_if<GameTree::FeeChoice>(&node.kind)) {
    out["kind"] = "fee_choice";
    out["owner"] = f->owner;
    out["tx"] = f->tx;
    out["post_time"] = f->post_time;
    out["grid"] = {{"min", rational_to_string(f->grid.min)},
                   {"max", rational_to_string(f->grid.max)},
                   {"step", rational_to_string(f->grid.step)}};
    out["child"] = node_to_json(tree, f->child);
  } else if (auto* s = std::get_if<GameTree::Simultaneous>(&node.kind)) {
    out["kind"] = "simultaneous";
    out["players"] = s->owners;
    nlohmann::json ja;
    for (size_t k = 0; k < s->owners.size(); ++k) ja[s->owners[k]] = s->actions[k];
    out["joint_actions"] = std::move(ja);
    nlohmann::json ch = nlohmann::json::array();
    for (NodeId c : s->children) ch.push_back(node_to_json(tree, c));
    out["children"] = std::move(ch);
  } else {
    out["kind"] = "leaf";
  }
  return out;
}

}  // namespace

GameTree build_game(const std::string& json_text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw usage_error("MalformedConfig", e.what());
  }
  GameTree tree;
  for (const auto& p : doc.at("players")) tree.players.insert(p.get<std::string>());
  tree.root = parse_node(doc.at("root"), tree);
  validate_tree(tree);
  return tree;
}

std::string game_to_json(const GameTree& tree) {
  nlohmann::json doc;
  doc["players"] = std::vector<PlayerId>(tree.players.begin(), tree.players.end());
  doc["root"] = node_to_json(tree, tree.root);
  return doc.dump(2);
}

std::vector<ChoiceSlot> choice_slots(const GameTree& tree) {
  std::vector<ChoiceSlot> out;
  for (size_t i = 0; i < tree.nodes.size(); ++i) {
    const NodeId id = static_cast<NodeId>(i);
    const auto& node = tree.nodes[i];
    if (auto* d = std::get_if<GameTree::Decision>(&node.kind)) {
      out.push_back({id, d->owner, d->actions.size()});
    } else if (auto* f = std::get_if<GameTree::FeeChoice>(&node.kind)) {
      out.push_back({id, f->owner, f->grid.values().size()});
    } else if (auto* s = std::get_if<GameTree::Simultaneous>(&node.kind)) {
      for (size_t k = 0; k < s->owners.size(); ++k)
        out.push_back({id, s->owners[k], s->actions[k].size()});
    }
  }
  return out;
}

std::vector<PathStep> play_path(const GameTree& tree, const StrategyProfile& profile) {
  std::vector<PathStep> out;
  NodeId id = tree.root;
  for (;;) {
    const auto& node = tree.at(id);
    if (std::holds_alternative<GameTree::Leaf>(node.kind)) {
      out.push_back({id, {}});
      return out;
    }
    if (auto* d = std::get_if<GameTree::Decision>(&node.kind)) {
      size_t a = profile.at(id, d->owner);
      if (a >= d->children.size()) throw domain_error("BadAction", "action out of range");
      out.push_back({id, {a}});
      id = d->children[a];
    } else if (auto* f = std::get_if<GameTree::FeeChoice>(&node.kind)) {
      size_t a = profile.at(id, f->owner);
      if (a >= f->grid.values().size())
        throw domain_error("BadAction", "fee index out of range");
      out.push_back({id, {a}});
      id = f->child;
    } else {
      auto* s = std::get_if<GameTree::Simultaneous>(&node.kind);
      size_t index = 0;
      std::vector<size_t> taken;
      for (size_t k = 0; k < s->owners.size(); ++k) {
        size_t a = profile.at(id, s->owners[k]);
        if (a >= s->actions[k].size())
          throw domain_error("BadAction", "joint action out of range");
        index = index * s->actions[k].size() + a;
        taken.push_back(a);
      }
      out.push_back({id, std::move(taken)});
      id = s->children[index];
    }
  }
}

TripleSet outcome(const GameTree& tree, const StrategyProfile& profile) {
  TripleSet out;
  for (const auto& step : play_path(tree, profile)) {
    const auto& node = tree.at(step.node);
    out.insert(out.end(), node.emit.begin(), node.emit.end());
    if (auto* f = std::get_if<GameTree::FeeChoice>(&node.kind))
      out.push_back({f->tx, f->post_time, f->grid.values()[step.actions[0]]});
  }
  validate_triples(out);
  return out;
}

NodeId reached_leaf(const GameTree& tree, const StrategyProfile& profile) {
  return play_path(tree, profile).back().node;
}

size_t profile_count(const GameTree& tree) {
  size_t count = 1;
  for (const auto& slot : choice_slots(tree)) {
    if (slot.action_count == 0) return 0;
    if (count > std::numeric_limits<size_t>::max() / slot.action_count)
      return std::numeric_limits<size_t>::max();
    count *= slot.action_count;
  }
  return count;
}

std::vector<StrategyProfile> enumerate_profiles(const GameTree& tree, size_t bound) {
  const auto slots = choice_slots(tree);
  const size_t total = profile_count(tree);
  if (total > bound)
    throw bound_error("EnumerationBoundExceeded",
                      std::to_string(total) + " profiles exceed bound");
  std::vector<StrategyProfile> out;
  out.reserve(total);
  std::vector<size_t> digits(slots.size(), 0);
  for (size_t n = 0; n < total; ++n) {
    StrategyProfile p;
    for (size_t k = 0; k < slots.size(); ++k)
      p.choice[{slots[k].node, slots[k].player}] = digits[k];
    out.push_back(std::move(p));
    for (size_t k = slots.size(); k-- > 0;) {
      if (++digits[k] < slots[k].action_count) break;
      digits[k] = 0;
    }
  }
  return out;
}

}  // namespace cgt
