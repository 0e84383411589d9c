#include "cgt/compose.hpp"

#include <algorithm>
#include <string_view>

namespace cgt {

namespace {

TripleSet canonical(TripleSet ts) {
  std::sort(ts.begin(), ts.end(),
            [](const TransactionTriple& a, const TransactionTriple& b) { return a.tx < b.tx; });
  return ts;
}

std::string cache_key(const TripleSet& ts) {
  std::string out;
  for (const auto& t : ts)
    out += t.tx + "@" + std::to_string(t.post_time) + ":" + rational_to_string(t.fee) + ";";
  return out;
}

Balances strip_zeros(Balances b) {
  for (auto it = b.begin(); it != b.end();)
    it = it->second == 0 ? b.erase(it) : std::next(it);
  return b;
}

bool balances_equal(const Balances& a, const Balances& b) {
  return strip_zeros(a) == strip_zeros(b);
}

std::set<std::string> tree_alphabet(const GameTree& tree) {
  std::set<std::string> out;
  for (const auto& node : tree.nodes) {
    for (const auto& t : node.emit) out.insert(t.tx);
    if (auto* f = std::get_if<GameTree::FeeChoice>(&node.kind)) out.insert(f->tx);
  }
  return out;
}

}  // namespace

CompletedGame::CompletedGame(GameTree tree, HashrateDistribution lambda,
                             SettlementRules rules, ConflictSpec conflicts,
                             std::vector<std::pair<PlayerId, Rational>> miner_split)
    : tree_(std::move(tree)),
      lambda_(std::move(lambda)),
      rules_(std::move(rules)),
      conflicts_(std::move(conflicts)),
      miner_split_(std::move(miner_split)) {
  validate_tree(tree_);
}

const Balances& CompletedGame::utility(const StrategyProfile& profile) const {
  return utility_of_triples(outcome(tree_, profile));
}

const Balances& CompletedGame::utility_of_triples(const TripleSet& triples) const {
  TripleSet sorted = canonical(triples);
  std::string key = cache_key(sorted);
  auto it = cache_.find(key);
  if (it != cache_.end()) return it->second;

  auto dist = resolve_triples(sorted, conflicts_, lambda_);
  Balances total;
  for (const auto& entry : dist.support) {
    Balances b = settle(entry.ordering, sorted, rules_, conflicts_);
    Rational p = rational_from_double(entry.probability);
    for (auto& [who, v] : b) total[who] += p * v;
  }
  if (!miner_split_.empty()) {
    auto pit = total.find(kMinerPool);
    if (pit != total.end()) {
      Rational pool = pit->second;
      total.erase(pit);
      Rational shares = 0;
      for (const auto& [id, w] : miner_split_) shares += w;
      if (shares > 0)
        for (const auto& [id, w] : miner_split_) total[id] += pool * w / shares;
    }
  }
  if (!aggregate_.empty()) {
    Balances grouped;
    for (auto& [who, v] : total) {
      auto ait = aggregate_.find(who);
      grouped[ait == aggregate_.end() ? who : ait->second] += v;
    }
    total = std::move(grouped);
  }
  return cache_.emplace(std::move(key), strip_zeros(std::move(total))).first->second;
}

CompletedGame complete(GameTree tree, const HashrateDistribution& lambda,
                       SettlementRules rules, ConflictSpec conflicts,
                       std::vector<std::pair<PlayerId, Rational>> miner_split) {
  return CompletedGame(std::move(tree), lambda, std::move(rules), std::move(conflicts),
                       std::move(miner_split));
}

std::map<PlayerId, std::vector<PlayerId>> CollusionMap::blocks(
    const std::set<PlayerId>& ids) const {
  std::map<PlayerId, std::vector<PlayerId>> out;
  for (const auto& id : ids) out[rep(id)].push_back(id);
  return out;
}

bool CollusionMap::is_identity() const {
  for (const auto& [from, to] : eta)
    if (from != to) return false;
  return true;
}

std::string CollusionMap::describe() const {
  std::map<PlayerId, std::vector<PlayerId>> groups;
  for (const auto& [from, to] : eta)
    if (from != to) groups[to].push_back(from);
  if (groups.empty()) return "identity";
  std::string out;
  for (auto& [to, members] : groups) {
    out += (out.empty() ? "" : " ") + to + "<-{";
    for (size_t i = 0; i < members.size(); ++i) out += (i ? "," : "") + members[i];
    out += "}";
  }
  return out;
}

void validate_collusion(const CollusionMap& eta, const std::set<PlayerId>& players,
                        const std::set<PlayerId>& miners) {
  for (const auto& [from, to] : eta.eta) {
    if (eta.rep(to) != to)
      throw domain_error("NotIdempotent", from + " -> " + to + " -> " + eta.rep(to));
  }
  for (const auto& m : miners)
    if (eta.rep(m) != m) throw domain_error("MinerMerged", m);
  std::set<PlayerId> all = players;
  all.insert(miners.begin(), miners.end());
  for (const auto& [rep, members] : eta.blocks(all)) {
    size_t miner_count = 0;
    for (const auto& id : members) miner_count += miners.count(id);
    if (miner_count > 1)
      throw domain_error("MinerMerged", "two blockchain players in one coalition");
  }
}

std::vector<CollusionMap> enumerate_collusions(const std::set<PlayerId>& players,
                                               const std::set<PlayerId>& miners,
                                               size_t max_block) {
  std::vector<PlayerId> ids(players.begin(), players.end());
  ids.insert(ids.end(), miners.begin(), miners.end());
  std::sort(ids.begin(), ids.end());
  if (ids.size() > 10)
    throw bound_error("TooManyPlayers", "collusion enumeration capped at 10 participants");

  std::vector<CollusionMap> out;
  std::vector<std::vector<PlayerId>> blocks;
  std::function<void(size_t)> rec = [&](size_t i) {
    if (i == ids.size()) {
      CollusionMap map;
      for (const auto& block : blocks) {
        PlayerId rep;
        for (const auto& id : block)
          if (miners.count(id)) rep = id;
        if (rep.empty()) rep = *std::min_element(block.begin(), block.end());
        for (const auto& id : block) map.eta[id] = rep;
      }
      validate_collusion(map, players, miners);
      out.push_back(std::move(map));
      return;
    }
    const PlayerId& id = ids[i];
    // Recursion appends to blocks, so index rather than iterate.
    for (size_t b = 0, open = blocks.size(); b < open; ++b) {
      if (blocks[b].size() >= max_block) continue;
      if (miners.count(id)) {
        bool has_miner = false;
        for (const auto& other : blocks[b]) has_miner |= miners.count(other) > 0;
        if (has_miner) continue;
      }
      blocks[b].push_back(id);
      rec(i + 1);
      blocks[b].pop_back();
    }
    blocks.push_back({id});
    rec(i + 1);
    blocks.pop_back();
  };
  rec(0);
  // Identity (all singletons) first, then by merge structure.
  std::stable_sort(out.begin(), out.end(),
                   [](const CollusionMap& a, const CollusionMap& b) {
                     return a.describe() < b.describe();
                   });
  auto id_it = std::find_if(out.begin(), out.end(),
                            [](const CollusionMap& m) { return m.is_identity(); });
  if (id_it != out.end()) std::rotate(out.begin(), id_it, id_it + 1);
  return out;
}

CompletedGame collusion_reduce(const CompletedGame& game, const CollusionMap& eta,
                               const std::set<PlayerId>& players,
                               const std::set<PlayerId>& miners) {
  validate_collusion(eta, players, miners);
  CompletedGame out = game;
  out.cache_.clear();
  for (auto& node : out.tree_.nodes) {
    if (auto* d = std::get_if<GameTree::Decision>(&node.kind)) {
      d->owner = eta.rep(d->owner);
    } else if (auto* f = std::get_if<GameTree::FeeChoice>(&node.kind)) {
      f->owner = eta.rep(f->owner);
    } else if (auto* s = std::get_if<GameTree::Simultaneous>(&node.kind)) {
      std::set<PlayerId> reps;
      for (auto& owner : s->owners) {
        owner = eta.rep(owner);
        if (!reps.insert(owner).second)
          throw domain_error("MergedSimultaneous",
                             "coalition controls two seats of one simultaneous stage");
      }
    }
  }
  std::set<PlayerId> new_players;
  for (const auto& p : out.tree_.players) new_players.insert(eta.rep(p));
  out.tree_.players = std::move(new_players);
  std::set<PlayerId> all = players;
  all.insert(miners.begin(), miners.end());
  for (const auto& id : all) out.aggregate_[id] = eta.rep(id);
  return out;
}

Rational group_utility(const Balances& b, const std::vector<PlayerId>& members) {
  Rational out = 0;
  for (const auto& m : members) {
    auto it = b.find(m);
    if (it != b.end()) out += it->second;
  }
  return out;
}

namespace {

struct PlayerSlots {
  PlayerId player;
  std::vector<ChoiceSlot> slots;
  std::vector<std::vector<size_t>> strategies;  // action assignment per slot
};

std::vector<PlayerSlots> slots_by_player(const GameTree& tree) {
  std::map<PlayerId, std::vector<ChoiceSlot>> grouped;
  for (const auto& s : choice_slots(tree)) grouped[s.player].push_back(s);
  std::vector<PlayerSlots> out;
  for (auto& [p, slots] : grouped) {
    PlayerSlots ps;
    ps.player = p;
    ps.slots = slots;
    std::vector<size_t> digits(slots.size(), 0);
    for (;;) {
      ps.strategies.push_back(digits);
      size_t k = slots.size();
      while (k-- > 0) {
        if (++digits[k] < slots[k].action_count) break;
        digits[k] = 0;
      }
      if (k == static_cast<size_t>(-1)) break;
    }
    out.push_back(std::move(ps));
  }
  return out;
}

StrategyProfile assemble(const std::vector<PlayerSlots>& ps,
                         const std::vector<size_t>& strat_index) {
  StrategyProfile out;
  for (size_t i = 0; i < ps.size(); ++i) {
    const auto& strat = ps[i].strategies[strat_index[i]];
    for (size_t k = 0; k < ps[i].slots.size(); ++k)
      out.choice[{ps[i].slots[k].node, ps[i].slots[k].player}] = strat[k];
  }
  return out;
}

}  // namespace

IewdsResult iewds(const CompletedGame& game, size_t profile_bound) {
  const size_t total = profile_count(game.tree());
  if (total > profile_bound)
    throw bound_error("EnumerationBoundExceeded",
                      "normal form too large for elimination");
  auto ps = slots_by_player(game.tree());
  IewdsResult out;
  if (ps.empty()) return out;

  const size_t n = ps.size();
  std::vector<std::vector<bool>> alive(n);
  for (size_t i = 0; i < n; ++i) alive[i].assign(ps[i].strategies.size(), true);

  // Payoff tensor, indexed by joint strategy in row-major order.
  std::vector<size_t> stride(n, 1);
  for (size_t i = n - 1; i-- > 0;) stride[i] = stride[i + 1] * ps[i + 1].strategies.size();
  std::vector<std::vector<Rational>> payoff(n);  // [player][flat index]
  {
    std::vector<size_t> idx(n, 0);
    for (size_t flat = 0; flat < total; ++flat) {
      const Balances& b = game.utility(assemble(ps, idx));
      for (size_t i = 0; i < n; ++i)
        payoff[i].push_back(group_utility(b, {ps[i].player}));
      for (size_t k = n; k-- > 0;) {
        if (++idx[k] < ps[k].strategies.size()) break;
        idx[k] = 0;
      }
    }
  }

  auto opponents_product = [&](size_t i, auto&& fn) {
    // Iterates flat offsets of all alive opponent combinations.
    std::vector<size_t> idx(n, 0);
    std::function<void(size_t, size_t)> rec = [&](size_t k, size_t off) {
      if (k == n) { fn(off); return; }
      if (k == i) { rec(k + 1, off); return; }
      for (size_t s = 0; s < ps[k].strategies.size(); ++s)
        if (alive[k][s]) rec(k + 1, off + s * stride[k]);
    };
    rec(0, 0);
  };

  bool changed = true;
  while (changed) {
    changed = false;
    ++out.rounds;
    std::vector<std::vector<bool>> doomed(n);
    for (size_t i = 0; i < n; ++i) {
      doomed[i].assign(ps[i].strategies.size(), false);
      for (size_t s = 0; s < ps[i].strategies.size(); ++s) {
        if (!alive[i][s]) continue;
        for (size_t d = 0; d < ps[i].strategies.size(); ++d) {
          if (d == s || !alive[i][d]) continue;
          bool weakly_ge = true, somewhere_gt = false;
          opponents_product(i, [&](size_t off) {
            const Rational& ud = payoff[i][off + d * stride[i]];
            const Rational& us = payoff[i][off + s * stride[i]];
            if (ud < us) weakly_ge = false;
            if (ud > us) somewhere_gt = true;
          });
          if (weakly_ge && somewhere_gt) { doomed[i][s] = true; break; }
        }
      }
    }
    for (size_t i = 0; i < n; ++i) {
      for (size_t s = 0; s < ps[i].strategies.size(); ++s) {
        if (doomed[i][s]) { alive[i][s] = false; changed = true; }
      }
    }
  }

  for (size_t i = 0; i < n; ++i) {
    auto& list = out.surviving[ps[i].player];
    for (size_t s = 0; s < ps[i].strategies.size(); ++s)
      if (alive[i][s]) list.push_back(ps[i].strategies[s]);
  }
  return out;
}

bool profile_survives(const IewdsResult& reduced, const GameTree& tree,
                      const StrategyProfile& profile) {
  auto ps = slots_by_player(tree);
  for (const auto& p : ps) {
    std::vector<size_t> assignment;
    for (const auto& slot : p.slots) assignment.push_back(profile.at(slot.node, slot.player));
    auto it = reduced.surviving.find(p.player);
    if (it == reduced.surviving.end()) return false;
    if (std::find(it->second.begin(), it->second.end(), assignment) == it->second.end())
      return false;
  }
  return true;
}

namespace {

struct Eval {
  Rational value;
  bool differs = false;  // an optimal continuation reaches a non-IPB balance vector
  std::map<std::pair<NodeId, PlayerId>, size_t> picks;
};

struct BestResponseSolver {
  const CompletedGame& game;
  const StrategyProfile& base;
  const std::set<PlayerId>& movers;
  const std::vector<PlayerId>& members;
  const Balances& ipb_balances;

  Eval go(NodeId id, TripleSet acc) const {
    const auto& node = game.tree().at(id);
    acc.insert(acc.end(), node.emit.begin(), node.emit.end());
    if (std::holds_alternative<GameTree::Leaf>(node.kind)) {
      const Balances& b = game.utility_of_triples(acc);
      return {group_utility(b, members), !balances_equal(b, ipb_balances), {}};
    }
    if (auto* d = std::get_if<GameTree::Decision>(&node.kind)) {
      if (!movers.count(d->owner)) {
        return go(d->children[base.at(id, d->owner)], std::move(acc));
      }
      return pick_best(id, d->owner, base.at(id, d->owner), d->children.size(),
                       [&](size_t a) { return go(d->children[a], acc); });
    }
    if (auto* f = std::get_if<GameTree::FeeChoice>(&node.kind)) {
      auto fees = f->grid.values();
      auto child = [&](size_t a) {
        TripleSet next = acc;
        next.push_back({f->tx, f->post_time, fees[a]});
        return go(f->child, std::move(next));
      };
      if (!movers.count(f->owner)) return child(base.at(id, f->owner));
      return pick_best(id, f->owner, base.at(id, f->owner), fees.size(), child);
    }
    auto* s = std::get_if<GameTree::Simultaneous>(&node.kind);
    std::vector<size_t> mover_seats;
    std::vector<size_t> actions(s->owners.size());
    for (size_t k = 0; k < s->owners.size(); ++k) {
      actions[k] = base.at(id, s->owners[k]);
      if (movers.count(s->owners[k])) mover_seats.push_back(k);
    }
    auto child_of = [&](const std::vector<size_t>& acts) {
      size_t index = 0;
      for (size_t k = 0; k < s->owners.size(); ++k)
        index = index * s->actions[k].size() + acts[k];
      return s->children[index];
    };
    if (mover_seats.empty()) return go(child_of(actions), std::move(acc));

    std::optional<Eval> best;
    bool best_is_base = false;
    std::vector<size_t> combo = actions;
    std::function<void(size_t)> sweep = [&](size_t mi) {
      if (mi == mover_seats.size()) {
        Eval e = go(child_of(combo), acc);
        bool is_base = true;
        for (size_t k : mover_seats) is_base &= combo[k] == actions[k];
        for (size_t k : mover_seats)
          e.picks[{id, s->owners[k]}] = combo[k];
        if (!best || e.value > best->value) {
          best = std::move(e);
          best_is_base = is_base;
        } else if (e.value == best->value) {
          best->differs |= e.differs;
          if (is_base && !best_is_base) {
            bool differs = best->differs;
            best = std::move(e);
            best->differs = differs;
            best_is_base = true;
          }
        }
        return;
      }
      size_t seat = mover_seats[mi];
      for (size_t a = 0; a < s->actions[seat].size(); ++a) {
        combo[seat] = a;
        sweep(mi + 1);
      }
      combo[seat] = actions[seat];
    };
    sweep(0);
    return std::move(*best);
  }

  template <typename ChildFn>
  Eval pick_best(NodeId id, const PlayerId& owner, size_t base_action, size_t count,
                 ChildFn child) const {
    std::optional<Eval> best;
    bool best_is_base = false;
    for (size_t a = 0; a < count; ++a) {
      Eval e = child(a);
      e.picks[{id, owner}] = a;
      const bool is_base = a == base_action;
      if (!best || e.value > best->value) {
        best = std::move(e);
        best_is_base = is_base;
      } else if (e.value == best->value) {
        best->differs |= e.differs;
        if (is_base && !best_is_base) {
          bool differs = best->differs;
          best = std::move(e);
          best->differs = differs;
          best_is_base = true;
        }
      }
    }
    return std::move(*best);
  }
};

}  // namespace

BestResponse best_response(const CompletedGame& game, const StrategyProfile& base,
                           const std::set<PlayerId>& movers,
                           const std::vector<PlayerId>& value_members) {
  std::vector<PlayerId> members = value_members;
  if (members.empty()) members.assign(movers.begin(), movers.end());
  const Balances& ipb = game.utility(base);
  BestResponseSolver solver{game, base, movers, members, ipb};
  Eval e = solver.go(game.tree().root, {});
  BestResponse out;
  out.value = e.value;
  out.optimum_changes_outcome = e.differs;
  out.profile = base;
  for (const auto& [key, a] : e.picks) out.profile.choice[key] = a;
  return out;
}

std::string param_key(const Param& p) {
  std::string out;
  for (const auto& [k, v] : p) out += (out.empty() ? "" : ",") + k + "=" + std::to_string(v);
  return out.empty() ? "-" : out;
}

namespace {

StrategyProfile map_profile(const StrategyProfile& profile, const CollusionMap& eta) {
  StrategyProfile out;
  for (const auto& [key, a] : profile.choice)
    out.choice[{key.first, eta.rep(key.second)}] = a;
  return out;
}

}  // namespace

ICVerdict check_ic_tree(const GameTree& tree, const StrategyProfile& ipb,
                        const HashrateDistribution& lambda, const SettlementRules& rules,
                        const ConflictSpec& conflicts, const CheckOptions& opts) {
  CompletedGame game = complete(tree, lambda, rules, conflicts, opts.miner_split);
  const std::set<PlayerId>& players = tree.players;
  std::set<PlayerId> everyone = players;
  everyone.insert(opts.miners.begin(), opts.miners.end());
  const Balances& ipb_bal = game.utility(ipb);
  const bool iewds_feasible = profile_count(tree) <= opts.iewds_profile_bound;

  ICVerdict verdict;
  verdict.iewds_status = iewds_feasible ? ICVerdict::Iewds::Survives : ICVerdict::Iewds::Skipped;

  for (const auto& eta : enumerate_collusions(players, opts.miners, opts.max_block)) {
    bool reducible = true;
    if (iewds_feasible) {
      std::optional<CompletedGame> reduced;
      try {
        reduced.emplace(collusion_reduce(game, eta, players, opts.miners));
      } catch (const Error& e) {
        // A coalition spanning two seats of one simultaneous stage has no
        // per-seat reduced form; the joint best response below still covers it.
        if (std::string_view(e.what()).find("MergedSimultaneous") == std::string_view::npos)
          throw;
        reducible = false;
      }
      if (reducible && !profile_survives(iewds(*reduced, opts.iewds_profile_bound),
                                         reduced->tree(), map_profile(ipb, eta))) {
        verdict.holds = false;
        verdict.strict_failure = false;
        verdict.iewds_status = ICVerdict::Iewds::Eliminated;
        verdict.witness = ICVerdict::Witness{eta, "", {}, 0};
        return verdict;
      }
    }
    std::optional<ICVerdict::Witness> indifferent;
    for (const auto& [rep, block_members] : eta.blocks(everyone)) {
      std::set<PlayerId> movers;
      for (const auto& m : block_members)
        if (players.count(m)) movers.insert(m);
      if (movers.empty()) continue;
      Rational u0 = group_utility(ipb_bal, block_members);
      BestResponse br = best_response(game, ipb, movers, block_members);
      if (br.value > u0) {
        verdict.holds = false;
        verdict.strict_failure = true;
        verdict.witness = ICVerdict::Witness{eta, rep, br.profile, br.value - u0};
        return verdict;
      }
      if (br.value == u0 && br.optimum_changes_outcome && !indifferent)
        indifferent = ICVerdict::Witness{eta, rep, br.profile, 0};
    }
    if (indifferent) {
      verdict.holds = false;
      verdict.strict_failure = false;
      verdict.witness = std::move(indifferent);
      return verdict;
    }
  }
  return verdict;
}

std::map<std::string, ICVerdict> check_ic(const Protocol& protocol,
                                          const HashrateDistribution& lambda,
                                          const SettlementRules& rules,
                                          const ConflictSpec& conflicts,
                                          const CheckOptions& opts) {
  std::map<std::string, ICVerdict> out;
  for (const auto& p : protocol.game.param_space) {
    GameTree tree = protocol.game.builder(p);
    out[param_key(p)] = check_ic_tree(tree, protocol.ipb(p), lambda, rules, conflicts, opts);
  }
  return out;
}

Param CompositionMap::apply(const Param& p, const GameTree& tree1,
                            const std::vector<PathStep>& path) const {
  if (constant) return constant_q;
  if (!reducer) throw domain_error("BadCompositionMap", "no reducer configured");
  return reducer(p, tree1, path);
}

CompositionMap constant_map(Param q) {
  CompositionMap g;
  g.constant = true;
  g.constant_q = std::move(q);
  return g;
}

namespace {

void collect_paths(const GameTree& tree, NodeId id, std::vector<PathStep>& stack,
                   const std::function<void(NodeId, const std::vector<PathStep>&)>& fn) {
  const auto& node = tree.at(id);
  if (std::holds_alternative<GameTree::Leaf>(node.kind)) {
    stack.push_back({id, {}});
    fn(id, stack);
    stack.pop_back();
    return;
  }
  if (auto* d = std::get_if<GameTree::Decision>(&node.kind)) {
    for (size_t a = 0; a < d->children.size(); ++a) {
      stack.push_back({id, {a}});
      collect_paths(tree, d->children[a], stack, fn);
      stack.pop_back();
    }
  } else if (auto* f = std::get_if<GameTree::FeeChoice>(&node.kind)) {
    for (size_t a = 0; a < f->grid.values().size(); ++a) {
      stack.push_back({id, {a}});
      collect_paths(tree, f->child, stack, fn);
      stack.pop_back();
    }
  } else if (auto* s = std::get_if<GameTree::Simultaneous>(&node.kind)) {
    std::vector<size_t> combo(s->owners.size(), 0);
    for (size_t index = 0; index < s->children.size(); ++index) {
      size_t rem = index;
      for (size_t k = s->owners.size(); k-- > 0;) {
        combo[k] = rem % s->actions[k].size();
        rem /= s->actions[k].size();
      }
      stack.push_back({id, combo});
      collect_paths(tree, s->children[index], stack, fn);
      stack.pop_back();
    }
  }
}

}  // namespace

ComposedTree compose_trees(const GameTree& tree1, const Param& p,
                           const ParamGame& game2, const CompositionMap& g) {
  ComposedTree out;
  out.tree = tree1;
  auto alphabet1 = tree_alphabet(tree1);

  struct PendingGraft {
    NodeId leaf;
    Param q;
    std::vector<PathStep> path;
  };
  std::vector<PendingGraft> pending;
  std::vector<PathStep> stack;
  std::set<NodeId> seen_leaves;
  collect_paths(tree1, tree1.root, stack,
                [&](NodeId leaf, const std::vector<PathStep>& path) {
                  // Fee-choice branching can reach a leaf along several paths;
                  // the reducer may only depend on the node sequence, so the
                  // first visit pins the parameter.
                  if (!seen_leaves.insert(leaf).second) return;
                  pending.push_back({leaf, g.apply(p, tree1, path), path});
                });

  for (const auto& pg : pending) {
    bool known = false;
    for (const auto& q : game2.param_space) known |= q == pg.q;
    if (!known)
      throw domain_error("ParameterOutOfRange",
                         "composition maps to unknown parameter " + param_key(pg.q));
    GameTree sub = game2.builder(pg.q);
    auto alphabet2 = tree_alphabet(sub);
    for (const auto& tx : alphabet2)
      if (alphabet1.count(tx)) throw domain_error("AlphabetOverlap", tx);
    for (const auto& pl : sub.players) out.tree.players.insert(pl);

    Graft graft;
    graft.at_leaf = pg.leaf;
    graft.q = pg.q;
    const NodeId offset = static_cast<NodeId>(out.tree.nodes.size());
    auto remap = [&](NodeId id) {
      return id == sub.root ? pg.leaf : offset + id - (id > sub.root ? 1 : 0);
    };
    for (NodeId id = 0; id < static_cast<NodeId>(sub.nodes.size()); ++id)
      graft.node_map[id] = remap(id);
    for (NodeId id = 0; id < static_cast<NodeId>(sub.nodes.size()); ++id) {
      GameTree::Node node = sub.nodes[static_cast<size_t>(id)];
      if (auto* d = std::get_if<GameTree::Decision>(&node.kind))
        for (auto& c : d->children) c = remap(c);
      else if (auto* f = std::get_if<GameTree::FeeChoice>(&node.kind))
        f->child = remap(f->child);
      else if (auto* s = std::get_if<GameTree::Simultaneous>(&node.kind))
        for (auto& c : s->children) c = remap(c);
      if (id == sub.root) {
        TripleSet merged = out.tree.nodes[static_cast<size_t>(pg.leaf)].emit;
        merged.insert(merged.end(), node.emit.begin(), node.emit.end());
        node.emit = std::move(merged);
        out.tree.nodes[static_cast<size_t>(pg.leaf)] = std::move(node);
      } else {
        out.tree.nodes.push_back(std::move(node));
      }
    }
    out.grafts.push_back(std::move(graft));
  }
  validate_tree(out.tree);
  return out;
}

ParamGame g_compose(const ParamGame& game1, const ParamGame& game2,
                    const CompositionMap& g) {
  ParamGame out;
  out.param_space = game1.param_space;
  out.builder = [game1, game2, g](const Param& p) {
    return compose_trees(game1.builder(p), p, game2, g).tree;
  };
  return out;
}

Protocol compose_protocols(const Protocol& p1, const Protocol& p2,
                           const CompositionMap& g) {
  Protocol out;
  out.players = p1.players;
  out.players.insert(p2.players.begin(), p2.players.end());
  out.game.param_space = p1.game.param_space;
  auto g1 = p1.game;
  auto g2 = p2.game;
  out.game.builder = [g1, g2, g](const Param& p) {
    return compose_trees(g1.builder(p), p, g2, g).tree;
  };
  auto ipb1 = p1.ipb;
  auto ipb2 = p2.ipb;
  out.ipb = [g1, g2, g, ipb1, ipb2](const Param& p) {
    ComposedTree composed = compose_trees(g1.builder(p), p, g2, g);
    StrategyProfile out_profile = ipb1(p);
    for (const auto& graft : composed.grafts) {
      StrategyProfile sub = ipb2(graft.q);
      for (const auto& [key, a] : sub.choice)
        out_profile.choice[{graft.node_map.at(key.first), key.second}] = a;
    }
    return out_profile;
  };
  return out;
}

SettlementRules additive_union(const SettlementRules& rules1,
                               const SettlementRules& rules2) {
  std::set<std::string> alphabet1;
  for (const auto& [pat, b] : rules1.base_balance) alphabet1.insert(pat.begin(), pat.end());
  for (const auto& [tx, who] : rules1.payer) alphabet1.insert(tx);
  for (const auto& [pat, b] : rules2.base_balance)
    for (const auto& tx : pat)
      if (alphabet1.count(tx)) throw domain_error("AlphabetOverlap", tx);
  for (const auto& [tx, who] : rules2.payer)
    if (alphabet1.count(tx)) throw domain_error("AlphabetOverlap", tx);

  SettlementRules out;
  for (const auto& [pat1, bal1] : rules1.base_balance) {
    for (const auto& [pat2, bal2] : rules2.base_balance) {
      std::set<std::string> pat = pat1;
      pat.insert(pat2.begin(), pat2.end());
      Balances sum = bal1;
      for (const auto& [who, v] : bal2) sum[who] += v;
      out.base_balance[std::move(pat)] = std::move(sum);
    }
  }
  out.payer = rules1.payer;
  out.payer.insert(rules2.payer.begin(), rules2.payer.end());
  return out;
}

HarnessReport composition_harness(const Protocol& p1, const SettlementRules& rules1,
                               const Protocol& p2, const SettlementRules& rules2,
                               const Param& q_constant,
                               const HashrateDistribution& lambda,
                               const CheckOptions& opts) {
  for (const auto& [proto, rules, name] :
       {std::tuple<const Protocol&, const SettlementRules&, const char*>{p1, rules1, "first"},
        {p2, rules2, "second"}}) {
    for (const auto& [key, verdict] : check_ic(proto, lambda, rules, {}, opts)) {
      if (!verdict.holds)
        throw domain_error("PreconditionFailed",
                           std::string(name) + " component protocol is not IC at " + key);
    }
  }

  Protocol composed = compose_protocols(p1, p2, constant_map(q_constant));
  SettlementRules rules = additive_union(rules1, rules2);
  HarnessReport report;

  for (const auto& p : p1.game.param_space) {
    ComposedTree ct = compose_trees(p1.game.builder(p), p, p2.game, constant_map(q_constant));
    StrategyProfile ipb = composed.ipb(p);
    ICVerdict verdict = check_ic_tree(ct.tree, ipb, lambda, rules, {}, opts);
    if (!verdict.holds) {
      report.pass = false;
      report.detail = "composed protocol not IC at " + param_key(p) +
                      (verdict.witness ? " under " + verdict.witness->eta.describe() : "");
      return report;
    }

    // Projection: composed utility decomposes into component utilities.
    CompletedGame composed_game = complete(ct.tree, lambda, rules, {}, opts.miner_split);
    GameTree tree1 = p1.game.builder(p);
    CompletedGame game1 = complete(tree1, lambda, rules1, {}, opts.miner_split);
    std::map<std::string, CompletedGame> game2;
    for (const auto& graft : ct.grafts)
      game2.emplace(param_key(graft.q),
                    complete(p2.game.builder(graft.q), lambda, rules2, {}, opts.miner_split));

    auto slots1 = choice_slots(tree1);
    for (const auto& profile : enumerate_profiles(ct.tree, opts.iewds_profile_bound)) {
      const Balances& u = composed_game.utility(profile);
      StrategyProfile sigma1;
      for (const auto& s : slots1)
        sigma1.choice[{s.node, s.player}] = profile.at(s.node, s.player);
      const Balances& u1 = game1.utility(sigma1);

      auto path = play_path(ct.tree, profile);
      std::set<NodeId> on_path;
      for (const auto& step : path) on_path.insert(step.node);
      const Graft* reached = nullptr;
      for (const auto& graft : ct.grafts)
        if (on_path.count(graft.at_leaf)) reached = &graft;
      if (!reached) {
        report.pass = false;
        report.detail = "no graft on play path at " + param_key(p);
        return report;
      }
      StrategyProfile sigma2;
      for (const auto& [sub_id, comp_id] : reached->node_map) {
        for (const auto& [key, a] : profile.choice)
          if (key.first == comp_id) sigma2.choice[{sub_id, key.second}] = a;
      }
      const Balances& u2 = game2.at(param_key(reached->q)).utility(sigma2);
      Balances sum = u1;
      for (const auto& [who, v] : u2) sum[who] += v;
      if (!balances_equal(u, sum)) {
        report.pass = false;
        report.detail = "projection mismatch at " + param_key(p);
        return report;
      }
    }
  }
  return report;
}

}  // namespace cgt
