#include "cgt/casestudies.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <sstream>

#include "cgt/netgame.hpp"

namespace cgt {

namespace {

// Node labels carry "<prefix>|<key>|<round>" so strategy construction and
// trace statistics survive composition.
std::string lab(const std::string& prefix, const std::string& key, Round t) {
  return prefix + "|" + key + "|" + std::to_string(t);
}

struct LabelInfo {
  bool ok = false;
  std::string prefix, key;
  Round t = 0;
};

LabelInfo parse_label(const std::string& s) {
  LabelInfo li;
  auto p1 = s.find('|');
  if (p1 == std::string::npos) return li;
  auto p2 = s.find('|', p1 + 1);
  if (p2 == std::string::npos) return li;
  li.prefix = s.substr(0, p1);
  li.key = s.substr(p1 + 1, p2 - p1 - 1);
  try {
    li.t = std::stoll(s.substr(p2 + 1));
  } catch (const std::exception&) {
    return li;
  }
  li.ok = true;
  return li;
}

FeeGrid make_grid(const Rational& max, const Rational& step) {
  if (max <= 0) return {0, 0, 0};
  if (step <= 0 || step > max) return {0, max, max};
  return {0, max, step};
}

NodeId add_node(GameTree& g, GameTree::Node n) {
  g.nodes.push_back(std::move(n));
  return static_cast<NodeId>(g.nodes.size() - 1);
}

NodeId add_leaf(GameTree& g, TripleSet emit = {}, std::string label = {}) {
  return add_node(g, {GameTree::Leaf{}, std::move(emit), std::move(label)});
}

NodeId add_decision(GameTree& g, PlayerId owner, std::vector<std::string> actions,
                    std::vector<NodeId> children, std::string label,
                    TripleSet emit = {}) {
  GameTree::Decision d{std::move(owner), std::move(actions), std::move(children)};
  return add_node(g, {std::move(d), std::move(emit), std::move(label)});
}

NodeId add_fee(GameTree& g, PlayerId owner, std::string tx, Round post, FeeGrid grid,
               NodeId child, std::string label, TripleSet emit = {}) {
  GameTree::FeeChoice f{std::move(owner), std::move(tx), post, grid, child};
  return add_node(g, {std::move(f), std::move(emit), std::move(label)});
}

// Per-channel naming shared by the builder, the rules and the strategy walk.
struct Chan {
  HtlcParams p;
  Round t_s = -1;  // -1: never revealed
  Round t_e = 0;
  std::string A, B, HA, HB, R, P;

  Rational cap_a() const { return p.fee_cap_A > 0 ? p.fee_cap_A : p.v; }
  FeeGrid grid_a() const { return make_grid(cap_a(), p.delta); }
  FeeGrid grid_b() const { return make_grid(p.fee_cap_B, p.delta); }
};

Chan make_chan(const HtlcParams& p, const Param& point) {
  Chan c;
  c.p = p;
  c.t_s = point.at("t_s");
  c.t_e = point.at("t_e");
  c.A = p.tx_prefix + "A";
  c.B = p.tx_prefix + "B";
  c.HA = p.tx_prefix + "HA";
  c.HB = p.tx_prefix + "HB";
  c.R = p.tx_prefix + "R";
  c.P = p.tx_prefix + "P";
  return c;
}

// Payee closes: commitment plus his claim, payer may contest with the
// timeout transaction.
NodeId payee_close(GameTree& g, const Chan& c, Round t, const std::string& sfx) {
  const std::string& L = c.p.tx_prefix;
  NodeId raced = add_leaf(g);
  NodeId afee = add_fee(g, c.p.name_a, c.A, t, c.grid_a(), raced, lab(L, "afee_" + sfx, t));
  NodeId ignored = add_leaf(g);
  NodeId arct = add_decision(g, c.p.name_a, {"react", "ignore"}, {afee, ignored},
                             lab(L, "arct_" + sfx, t));
  return add_fee(g, c.p.name_b, c.B, t, c.grid_b(), arct, lab(L, "bfee_" + sfx, t),
                 {{c.HB, t, Rational(0)}});
}

// Payer closes after a rejected refund; the payee can contest once he holds
// the secret.
NodeId payer_close(GameTree& g, const Chan& c, Round t) {
  const std::string& L = c.p.tx_prefix;
  NodeId tail;
  if (c.t_s >= 0) {
    NodeId raced = add_leaf(g);
    NodeId bfee = add_fee(g, c.p.name_b, c.B, std::max(t, c.t_s), c.grid_b(), raced,
                          lab(L, "bfee_r", t));
    NodeId conceded = add_leaf(g);
    tail = add_decision(g, c.p.name_b, {"contest", "concede"}, {bfee, conceded},
                        lab(L, "bcon", t));
  } else {
    tail = add_leaf(g);
  }
  return add_fee(g, c.p.name_a, c.A, t, c.grid_a(), tail, lab(L, "afee_r", t),
                 {{c.HA, t, Rational(0)}});
}

NodeId build_round(GameTree& g, const Chan& c, Round t) {
  const std::string& L = c.p.tx_prefix;
  if (t > c.t_e) return add_leaf(g);

  NodeId next = build_round(g, c, t + 1);
  NodeId rejected = payer_close(g, c, t);
  NodeId accepted = add_leaf(g, {{c.R, t, Rational(0)}});
  // The payee's refund response is keyed by whether he holds the secret here.
  const char* bkey = (c.t_s >= 0 && t >= c.t_s) ? "baccr" : "bacc";
  NodeId bacc = add_decision(g, c.p.name_b, {"accept", "reject"}, {accepted, rejected},
                             lab(L, bkey, t));
  NodeId aref = add_decision(g, c.p.name_a, {"no_refund", "refund"}, {next, bacc},
                             lab(L, "aref", t));
  if (c.t_s < 0 || t < c.t_s) return aref;

  NodeId onchain = payee_close(g, c, t, "o");
  NodeId updated = add_leaf(g, {{c.P, t, Rational(0)}});
  NodeId refused = payee_close(g, c, t, "s");
  NodeId aupd = add_decision(g, c.p.name_a, {"update", "no_update"}, {updated, refused},
                             lab(L, "aupd", t));
  return add_decision(g, c.p.name_b, {"onchain", "share", "noshare"},
                      {onchain, aupd, aref}, lab(L, "b3", t));
}

// Strategy recipe for one channel; onset marks the round from which the
// payer stops honouring updates and races the claim instead.
struct IpbCfg {
  Round T = 0;
  Round onset = kRoundInf;
  std::function<size_t(Round)> attack;  // claim-fee index at rounds >= onset
  bool contest = false;  // reject and contest a late refund once the secret is known
};

bool starts_with(const std::string& s, const char* pre) { return s.rfind(pre, 0) == 0; }

void htlc_ipb_walk(const GameTree& tree, const std::map<std::string, IpbCfg>& cfgs,
                   StrategyProfile& out) {
  for (size_t i = 0; i < tree.nodes.size(); ++i) {
    const auto& node = tree.nodes[i];
    const NodeId id = static_cast<NodeId>(i);
    const GameTree::Decision* d = std::get_if<GameTree::Decision>(&node.kind);
    const GameTree::FeeChoice* f = std::get_if<GameTree::FeeChoice>(&node.kind);
    if (!d && !f) continue;
    LabelInfo li = parse_label(node.label);
    if (!li.ok) continue;
    auto it = cfgs.find(li.prefix);
    if (it == cfgs.end()) continue;
    const IpbCfg& c = it->second;
    const PlayerId& owner = d ? d->owner : f->owner;
    size_t idx = 0;
    if (li.key == "aref") {
      idx = li.t >= c.T ? 1 : 0;
    } else if (li.key == "bacc" || li.key == "baccr") {
      idx = li.t >= c.T ? ((li.key == "baccr" && c.contest) ? 1 : 0) : 1;
    } else if (li.key == "b3") {
      idx = li.t >= c.T ? 2 : 1;
    } else if (li.key == "aupd") {
      idx = (li.t >= c.T || li.t >= c.onset) ? 1 : 0;
    } else if (starts_with(li.key, "arct") || li.key == "bcon") {
      idx = 0;
    } else if (starts_with(li.key, "bfee")) {
      idx = f->grid.values().size() - 1;
    } else if (starts_with(li.key, "afee")) {
      idx = (c.attack && li.t >= c.onset) ? c.attack(li.t) : f->grid.values().size() - 1;
    }
    out.choice[{id, owner}] = idx;
  }
}

// Best claim fee for the payer racing the payee's capped claim over the
// remaining window; ties resolve toward the higher fee.
std::function<size_t(Round)> make_attack(const HtlcParams& p,
                                         const HashrateDistribution& lambda) {
  Chan c;
  c.p = p;
  auto fees = c.grid_a().values();
  const Rational cap_b = p.fee_cap_B;
  const Rational v = p.v;
  const Round T = p.T;
  return [fees, cap_b, v, lambda, T](Round t) {
    const Round w = T - t;
    size_t best = fees.size() - 1;
    double best_val = -1.0;
    for (size_t i = 0; i < fees.size(); ++i) {
      const Rational& f = fees[i];
      double win;
      if (f == 0) {
        win = cap_b > 0 ? 0.0 : 0.5;
      } else if (cap_b <= 0) {
        win = 1.0;
      } else if (w <= 0) {
        win = f > cap_b ? 1.0 : (f == cap_b ? 0.5 : 0.0);
      } else if (cap_b >= f) {
        win = 0.0;
      } else {
        win = 1.0 - inclusion_probability(censor_schedule(lambda, cap_b, f), w);
      }
      const double val = win * to_double(Rational(v - f));
      if (val >= best_val - 1e-12) {
        best = i;
        best_val = std::max(best_val, val);
      }
    }
    return best;
  };
}

Param htlc_point(const HtlcParams& p) {
  return {{"t_s", p.t_s ? *p.t_s : Round(-1)}, {"t_e", p.t_e}};
}

Balances add_balances(const Balances& a, const Balances& b) {
  Balances out = a;
  for (const auto& [k, v] : b) out[k] += v;
  for (auto it = out.begin(); it != out.end();)
    it = it->second == 0 ? out.erase(it) : std::next(it);
  return out;
}

ConflictSpec merge_conflicts(const ConflictSpec& a, const ConflictSpec& b) {
  ConflictSpec out = a;
  out.conflict_sets.insert(out.conflict_sets.end(), b.conflict_sets.begin(),
                           b.conflict_sets.end());
  out.validity.insert(b.validity.begin(), b.validity.end());
  return out;
}

struct DeviationScan {
  bool strict = false;
  bool indifferent = false;
  Rational gain;
};

void scan_coalition(const CompletedGame& game, const StrategyProfile& ipb,
                    const Balances& base, const std::set<PlayerId>& movers,
                    DeviationScan& out) {
  std::vector<PlayerId> members(movers.begin(), movers.end());
  BestResponse br = best_response(game, ipb, movers, members);
  Rational u0 = group_utility(base, members);
  if (br.value > u0) {
    out.strict = true;
    if (Rational(br.value - u0) > out.gain) out.gain = br.value - u0;
  } else if (br.value == u0 && br.optimum_changes_outcome) {
    out.indifferent = true;
  }
}

}  // namespace

void validate(const HtlcParams& p) {
  if (p.t_e < 0 || p.T < 0 || (p.t_s && *p.t_s < 0))
    throw domain_error("NegativeValue", "rounds must be non-negative");
  if (p.T > p.t_e) throw domain_error("HorizonViolated", "timelock beyond horizon");
  if (p.v_A < 0 || p.v_B < 0 || p.v < 0)
    throw domain_error("NegativeValue", "balances must be non-negative");
  if (p.fee_cap_A > p.v || p.fee_cap_B > p.v)
    throw domain_error("FeeCapExceedsValue", "fee caps above the contested value");
  if (p.fee_cap_A < 0 || p.fee_cap_B < 0)
    throw domain_error("NegativeValue", "fee caps must be non-negative");
  if (p.delta <= 0) throw domain_error("NonPositiveStep", "fee grid step");
  if (p.epsilon_open && *p.epsilon_open < 0)
    throw domain_error("NegativeValue", "open-channel bonus");
}

GameTree htlc_tree(const HtlcParams& p, const Param& point) {
  validate(p);
  GameTree g;
  g.players = {p.name_a, p.name_b};
  Chan c = make_chan(p, point);
  g.root = build_round(g, c, 0);
  validate_tree(g);
  return g;
}

SettlementRules htlc_rules(const HtlcParams& p) {
  Chan c = make_chan(p, htlc_point(p));
  const Rational e = p.open_bonus();
  SettlementRules r;
  auto open = [&](const Rational& to_a, const Rational& to_b) {
    return Balances{{p.name_a, Rational(to_a + e)}, {p.name_b, Rational(to_b + e)}};
  };
  r.base_balance[{}] = open(p.v_A, p.v_B);
  r.base_balance[{c.R}] = open(Rational(p.v_A + p.v), p.v_B);
  r.base_balance[{c.P}] = open(p.v_A, Rational(p.v_B + p.v));
  for (const std::string& h : {c.HA, c.HB}) {
    r.base_balance[{h}] = {{p.name_a, p.v_A}, {p.name_b, p.v_B}};
    r.base_balance[{h, c.A}] = {{p.name_a, Rational(p.v_A + p.v)}, {p.name_b, p.v_B}};
    r.base_balance[{h, c.B}] = {{p.name_a, p.v_A}, {p.name_b, Rational(p.v_B + p.v)}};
  }
  r.payer = {{c.A, p.name_a}, {c.HA, p.name_a}, {c.B, p.name_b}, {c.HB, p.name_b}};
  return r;
}

ConflictSpec htlc_conflicts(const HtlcParams& p) {
  Chan c = make_chan(p, htlc_point(p));
  ConflictSpec out;
  out.conflict_sets = {{c.A, c.B}};
  out.validity = {{c.A, p.T}};
  return out;
}

Protocol htlc_game(const HtlcParams& p) {
  validate(p);
  Protocol out;
  out.players = {p.name_a, p.name_b};
  for (Round s = -1; s <= p.t_e; ++s)
    out.game.param_space.push_back({{"t_s", s}, {"t_e", p.t_e}});
  HtlcParams cp = p;
  out.game.builder = [cp](const Param& point) { return htlc_tree(cp, point); };
  out.ipb = [cp](const Param& point) {
    GameTree tree = htlc_tree(cp, point);
    StrategyProfile s;
    htlc_ipb_walk(tree, {{cp.tx_prefix, IpbCfg{cp.T, kRoundInf, nullptr}}}, s);
    return s;
  };
  return out;
}

Round htlc_deviation_onset(const HtlcParams& p, const HashrateDistribution& lambda) {
  validate(p);
  if (p.fee_cap_B <= 0) return kRoundMinusInf;  // the claim is censored for free
  if (p.fee_cap_B >= p.v) return p.T;           // claim fee matches the prize
  CensorSchedule s = censor_schedule(lambda, p.fee_cap_B, p.v);
  if (s.r_star.empty()) return p.T;
  Round r = s.r_star.back();
  return r == kRoundInf ? kRoundMinusInf : p.T - r;
}

HtlcReport htlc_analysis(const HtlcParams& p, const HashrateDistribution& lambda) {
  validate(p);
  HtlcReport rep;
  rep.t_star_m = htlc_deviation_onset(p, lambda);
  rep.reaches_share_update = rep.t_star_m > 0;

  GameTree tree = htlc_tree(p, htlc_point(p));
  StrategyProfile ipb;
  htlc_ipb_walk(tree, {{p.tx_prefix, IpbCfg{p.T, kRoundInf, nullptr}}}, ipb);
  for (const PathStep& st : play_path(tree, ipb)) {
    const auto& node = tree.at(st.node);
    if (auto* d = std::get_if<GameTree::Decision>(&node.kind))
      rep.trace.push_back(d->actions[st.actions[0]]);
  }

  CompletedGame game = complete(tree, lambda, htlc_rules(p), htlc_conflicts(p));
  const Balances& base = game.utility(ipb);
  DeviationScan scan;
  scan_coalition(game, ipb, base, {p.name_a}, scan);
  scan_coalition(game, ipb, base, {p.name_b}, scan);
  scan_coalition(game, ipb, base, {p.name_a, p.name_b}, scan);
  rep.strict_failure = scan.strict;
  rep.indifference = scan.indifferent;
  rep.ic_holds = !scan.strict && !scan.indifferent;
  return rep;
}

namespace {

// Parameter map for the grafted channel: its share time is the leading
// channel's first secret-revealing action.
CompositionMap reveal_map(std::string lead_prefix, Round follow_te) {
  CompositionMap g;
  g.trace_name = "reveal_time";
  g.reducer = [lead_prefix, follow_te](const Param&, const GameTree& tree1,
                                       const std::vector<PathStep>& path) {
    Round when = -1;
    for (const PathStep& st : path) {
      LabelInfo li = parse_label(tree1.at(st.node).label);
      if (li.ok && li.prefix == lead_prefix && li.key == "b3" && !st.actions.empty() &&
          st.actions[0] <= 1) {
        when = li.t;
        break;
      }
    }
    return Param{{"t_s", when}, {"t_e", follow_te}};
  };
  return g;
}

void collect_leaf_triples(const GameTree& t, NodeId id, TripleSet acc, size_t limit,
                          std::vector<TripleSet>& out) {
  if (out.size() >= limit) return;
  const auto& node = t.at(id);
  acc.insert(acc.end(), node.emit.begin(), node.emit.end());
  if (std::holds_alternative<GameTree::Leaf>(node.kind)) {
    out.push_back(std::move(acc));
    return;
  }
  if (auto* d = std::get_if<GameTree::Decision>(&node.kind)) {
    for (NodeId ch : d->children) collect_leaf_triples(t, ch, acc, limit, out);
  } else if (auto* f = std::get_if<GameTree::FeeChoice>(&node.kind)) {
    TripleSet next = acc;
    next.push_back({f->tx, f->post_time, f->grid.values().back()});
    collect_leaf_triples(t, f->child, std::move(next), limit, out);
  }
}

Round saturating_succ(Round t) { return t == kRoundMinusInf ? t : t + 1; }

}  // namespace

TwoHtlcReport two_htlc(TwoHtlcMode mode, HtlcParams p1, HtlcParams p2,
                       const HashrateDistribution& lambda) {
  const Round T = std::max(p1.T, p2.T);
  p1.t_e = p2.t_e = T;
  p1.name_a = "Alice";
  p1.name_b = "Bob";
  p1.tx_prefix = "h1";
  p2.name_a = "Charlie";
  p2.name_b = "Dave";
  p2.tx_prefix = "h2";
  p2.t_s = 0;  // the payee holds the secret from the start
  // The refund side may bid up to the contested value, and keeping a channel
  // open is worth one and a half fee steps: below that the race salvage of a
  // boundary-late reveal would outweigh closing, above it the censoring
  // deviation itself would stop paying.
  p1.fee_cap_A = p2.fee_cap_A = 0;
  p1.epsilon_open = Rational(3 * p1.delta / 2);
  p2.epsilon_open = Rational(3 * p2.delta / 2);
  validate(p1);
  validate(p2);

  TwoHtlcReport rep;
  rep.t_star_1 = htlc_deviation_onset(p1, lambda);
  rep.t_star_2 = htlc_deviation_onset(p2, lambda);
  rep.timelock_condition = saturating_succ(rep.t_star_1) >= rep.t_star_2;

  Protocol proto1 = htlc_game(p1);
  Protocol proto2 = htlc_game(p2);
  CompositionMap g = mode == TwoHtlcMode::Dependent
                         ? reveal_map("h2", T)
                         : constant_map({{"t_s", p1.t_s ? *p1.t_s : Round(-1)},
                                         {"t_e", T}});
  rep.composed = compose_protocols(proto2, proto1, g);
  rep.rules = additive_union(htlc_rules(p1), htlc_rules(p2));
  rep.conflicts = merge_conflicts(htlc_conflicts(p1), htlc_conflicts(p2));

  std::map<std::string, IpbCfg> cfgs;
  cfgs["h1"] = {p1.T, std::max(rep.t_star_1, Round(1)), make_attack(p1, lambda), true};
  cfgs["h2"] = {p2.T, std::max(rep.t_star_2, Round(1)), make_attack(p2, lambda), true};
  auto builder = rep.composed.game.builder;
  rep.composed.ipb = [builder, cfgs](const Param& point) {
    GameTree tree = builder(point);
    StrategyProfile s;
    htlc_ipb_walk(tree, cfgs, s);
    return s;
  };

  const Param point{{"t_s", 0}, {"t_e", T}};
  if (mode == TwoHtlcMode::Dependent && T <= 4) {
    GameTree tree = rep.composed.game.builder(point);
    CompletedGame game = complete(tree, lambda, rep.rules, rep.conflicts);
    StrategyProfile ipb = rep.composed.ipb(point);
    const Balances& base = game.utility(ipb);
    DeviationScan scan;
    scan_coalition(game, ipb, base, {"Alice", "Dave"}, scan);
    scan_coalition(game, ipb, base, {"Bob", "Charlie"}, scan);
    rep.deviation_found = scan.strict;
    rep.gain = scan.gain;
    rep.checked = true;
  }

  if (mode == TwoHtlcMode::Independent) {
    GameTree tree = rep.composed.game.builder(point);
    CompletedGame game = complete(tree, lambda, rep.rules, rep.conflicts);
    GameTree t1 = htlc_tree(p1, htlc_point(p1));
    GameTree t2 = htlc_tree(p2, htlc_point(p2));
    CompletedGame game1 = complete(t1, lambda, htlc_rules(p1), htlc_conflicts(p1));
    CompletedGame game2 = complete(t2, lambda, htlc_rules(p2), htlc_conflicts(p2));
    std::vector<TripleSet> samples;
    collect_leaf_triples(tree, tree.root, {}, 64, samples);
    for (const TripleSet& ts : samples) {
      TripleSet part1, part2;
      for (const auto& t : ts)
        (starts_with(t.tx, "h1") ? part1 : part2).push_back(t);
      Balances whole = game.utility_of_triples(ts);
      Balances split =
          add_balances(game1.utility_of_triples(part1), game2.utility_of_triples(part2));
      // Race probabilities originate from doubles, and the whole and split
      // routes multiply them in different orders, so compare numerically.
      Balances diff = whole;
      for (const auto& [k, v] : split) diff[k] -= v;
      for (const auto& [k, v] : diff)
        if (std::abs(to_double(v)) > 1e-9) {
          rep.additivity_ok = false;
          break;
        }
      if (!rep.additivity_ok) break;
    }
  }
  return rep;
}

WormholeReport wormhole(HtlcParams p1, HtlcParams p2, HtlcParams p3,
                        const HashrateDistribution& lambda) {
  p1.name_a = "Alice";
  p1.name_b = "Bob";
  p1.tx_prefix = "h1";
  p1.t_s = 0;  // Bob colludes with the recipient and knows the secret
  p2.name_a = "Bob";
  p2.name_b = "Charlie";
  p2.tx_prefix = "h2";
  p3.name_a = "Charlie";
  p3.name_b = "Dave";
  p3.tx_prefix = "h3";
  p3.t_s = 0;
  validate(p1);
  validate(p2);
  validate(p3);

  Protocol proto1 = htlc_game(p1);
  Protocol proto2 = htlc_game(p2);
  Protocol proto3 = htlc_game(p3);
  Protocol lead = compose_protocols(proto3, proto2, reveal_map("h3", p2.t_e));
  Protocol full = compose_protocols(
      lead, proto1, constant_map({{"t_s", 0}, {"t_e", p1.t_e}}));

  SettlementRules rules = additive_union(
      additive_union(htlc_rules(p1), htlc_rules(p2)), htlc_rules(p3));
  ConflictSpec conflicts = merge_conflicts(
      merge_conflicts(htlc_conflicts(p1), htlc_conflicts(p2)), htlc_conflicts(p3));

  const Param point{{"t_s", 0}, {"t_e", p3.t_e}};
  GameTree tree = full.game.builder(point);
  std::map<std::string, IpbCfg> cfgs;
  cfgs["h1"] = {p1.T, kRoundInf, nullptr};
  cfgs["h2"] = {p2.T, kRoundInf, nullptr};
  cfgs["h3"] = {p3.T, kRoundInf, nullptr};
  StrategyProfile ipb;
  htlc_ipb_walk(tree, cfgs, ipb);

  // Dave withholds the route secret: the two upstream payments revert while
  // the colluding endpoints settle theirs off-chain.
  StrategyProfile dev = ipb;
  for (size_t i = 0; i < tree.nodes.size(); ++i) {
    const auto* d = std::get_if<GameTree::Decision>(&tree.nodes[i].kind);
    if (!d) continue;
    LabelInfo li = parse_label(tree.nodes[i].label);
    if (li.ok && li.prefix == "h3" && li.key == "b3")
      dev.choice[{static_cast<NodeId>(i), d->owner}] = 2;
  }

  CompletedGame game = complete(tree, lambda, rules, conflicts);
  WormholeReport rep;
  rep.honest = game.utility(ipb);
  rep.deviated = game.utility(dev);
  const std::vector<PlayerId> coalition{"Bob", "Dave"};
  rep.honest_coalition = group_utility(rep.honest, coalition);
  rep.deviated_coalition = group_utility(rep.deviated, coalition);
  rep.gain = p2.v - p3.v;
  rep.deviation = rep.gain > 0;
  rep.gain_matches = Rational(rep.deviated_coalition - rep.honest_coalition) == rep.gain;
  return rep;
}

void validate(const CrabParams& p) {
  if (p.T < 0) throw domain_error("NegativeValue", "delay must be non-negative");
  if (p.v_A_l < 0 || p.v_B_l < 0 || p.v_A_o < 0 || p.v_B_o < 0 || p.c < 0 || p.v < 0 ||
      p.epsilon < 0)
    throw domain_error("NegativeValue", "balances and fees must be non-negative");
  if (p.v_A_o <= p.v_A_l)
    throw domain_error("StateOrderViolated", "old state must favour the broadcaster");
}

namespace {

const char* kACl = "AC_l";
const char* kASl = "AS_l";
const char* kACo = "AC_o";
const char* kASo = "AS_o";
const char* kAPo = "AP_o";

NodeId crab_round(GameTree& g, const CrabParams& p, Round t) {
  if (t > p.T) return add_leaf(g);
  const Rational bmax = p.v_A_o - p.v_A_l;
  FeeGrid bribe = make_grid(bmax, p.bribe_step);
  FeeGrid punish{p.c, p.c, 0};

  NodeId punished1 = add_leaf(g);
  NodeId pf1 = add_fee(g, "Bob", kAPo, t, punish, punished1, lab("crab", "bfee", t));
  NodeId ignored = add_leaf(g);
  NodeId bribed = add_decision(g, "Bob", {"punish", "ignore"}, {pf1, ignored},
                               lab("crab", "b", t));
  NodeId afee = add_fee(g, "Alice", kASo, t, bribe, bribed, lab("crab", "afee", t));

  NodeId punished2 = add_leaf(g);
  NodeId pf2 = add_fee(g, "Bob", kAPo, t, punish, punished2, lab("crab", "bfee2", t));
  NodeId next = crab_round(g, p, t + 1);
  NodeId waited = add_decision(g, "Bob", {"punish", "wait"}, {pf2, next},
                               lab("crab", "bw", t));
  return add_decision(g, "Alice", {"bribe", "wait"}, {afee, waited}, lab("crab", "a", t));
}

}  // namespace

GameTree crab_tree(const CrabParams& p) {
  validate(p);
  GameTree g;
  g.players = {"Alice", "Bob"};
  NodeId settled = add_leaf(g, {{kACl, 0, p.epsilon}, {kASl, 0, p.epsilon}});
  NodeId unsettled = add_leaf(g, {{kACl, 0, p.epsilon}});
  NodeId latest = add_decision(g, "Alice", {"settle", "wait"}, {settled, unsettled},
                               lab("crab", "as", -1));
  NodeId k0 = crab_round(g, p, 0);
  g.nodes[static_cast<size_t>(k0)].emit.push_back({kACo, 0, p.epsilon});
  g.root = add_decision(g, "Alice", {"latest", "old"}, {latest, k0},
                        lab("crab", "root", -1));
  validate_tree(g);
  return g;
}

SettlementRules crab_rules(const CrabParams& p) {
  SettlementRules r;
  r.base_balance[{kACl, kASl}] = {{"Alice", Rational(p.v_A_l + p.c)},
                                  {"Bob", Rational(p.v_B_l + p.c)}};
  r.base_balance[{kACl}] = {{"Bob", Rational(p.v_B_l + p.c)}};
  r.base_balance[{kACo}] = {{"Bob", Rational(p.v_B_o + p.c)}};
  r.base_balance[{kACo, kASo}] = {{"Alice", Rational(p.v_A_o + p.c)},
                                  {"Bob", Rational(p.v_B_o + p.c)}};
  // The punishing transaction burns the collateral as its fee, so the
  // including miner nets c and Bob nets v + c.
  r.base_balance[{kACo, kAPo}] = {{"Bob", Rational(p.v + p.c + p.c)}};
  r.payer = {{kACl, "Alice"}, {kASl, "Alice"}, {kACo, "Alice"}, {kASo, "Alice"},
             {kAPo, "Bob"}};
  return r;
}

ConflictSpec crab_conflicts(const CrabParams& p) {
  ConflictSpec out;
  out.conflict_sets = {{kASo, kAPo}};
  out.validity = {{kASo, p.T}};
  return out;
}

Protocol crab_game(const CrabParams& p) {
  validate(p);
  Protocol out;
  out.players = {"Alice", "Bob"};
  out.game.param_space = {{{"T", p.T}}};
  CrabParams cp = p;
  out.game.builder = [cp](const Param&) { return crab_tree(cp); };
  out.ipb = [cp](const Param&) {
    GameTree tree = crab_tree(cp);
    StrategyProfile s;
    for (size_t i = 0; i < tree.nodes.size(); ++i) {
      const auto& node = tree.nodes[i];
      const auto* d = std::get_if<GameTree::Decision>(&node.kind);
      const auto* f = std::get_if<GameTree::FeeChoice>(&node.kind);
      if (!d && !f) continue;
      LabelInfo li = parse_label(node.label);
      size_t idx = 0;
      if (li.key == "a" || li.key == "bw") idx = li.key == "a" ? 1 : 0;
      if (li.key == "afee" && f) idx = f->grid.values().size() - 1;
      // root: latest; as: settle; b/bw: punish; bfee*: the single value c.
      s.choice[{static_cast<NodeId>(i), d ? d->owner : f->owner}] = idx;
    }
    return s;
  };
  return out;
}

CrabSafety crab_safety(Round T, const Rational& c, const Rational& v,
                       const HashrateDistribution& lambda) {
  if (T < 0) throw domain_error("NegativeValue", "delay must be non-negative");
  if (c < 0 || v <= 0) throw domain_error("NegativeValue", "need c >= 0 and v > 0");
  CrabSafety out;
  if (c >= v) {  // no affordable bribe outbids the punishment
    out.safe = out.analytic_safe = out.oracle_safe = true;
    out.minimal_safe_T = 0;
    return out;
  }
  if (c == 0) {
    out.minimal_safe_T = std::nullopt;
    return out;
  }

  // Analytic route: an exactly indifferent miner counts as a censor. That
  // weak-inequality schedule is the limit of the standard one as the
  // punishment fee shrinks, so evaluate it just below c.
  const Rational c_weak = c * Rational(999999, 1000000);
  CensorSchedule sched = censor_schedule(lambda, c_weak, v);
  Round r_m = sched.r_star.empty() ? 0 : sched.r_star.back();
  out.analytic_safe = r_m != kRoundInf && T > r_m;
  if (r_m != kRoundInf) out.minimal_safe_T = r_m + 1;

  if (T == 0) {
    // No delay: the bribe outbids the punishment in the settlement round.
    out.oracle_safe = false;
  } else {
    OracleResult oracle = best_response_oracle({lambda, c, v, T}, TiePolicy::Censor, T);
    out.oracle_safe = oracle.probability == 1;
  }
  out.safe = out.oracle_safe;
  return out;
}

void validate(const MevParams& p) {
  if (p.l < 0) throw domain_error("NegativeValue", "limit price");
  if (p.s < 0) throw domain_error("NegativeSpread", "spread must be non-negative");
  if (p.f <= 0) throw domain_error("NonPositiveFee", "order fee must be positive");
  if (p.trusted && (*p.trusted < 1 || *p.trusted > p.lambda.m()))
    throw domain_error("UnknownMiner", "trusted miner index out of range");
}

MevReport mev_game(const MevParams& p) {
  validate(p);
  const size_t m = p.lambda.m();
  MevReport rep;
  for (size_t j = 1; j <= m; ++j) rep.miners.push_back("m" + std::to_string(j));
  rep.sandwich_strict = p.s > 0;
  for (size_t j = 1; j <= m; ++j)
    rep.equilibrium_action[rep.miners[j - 1]] =
        (p.trusted && *p.trusted == j) ? "H" : "D";

  // The order stays pending until a miner who has seen it proposes; only the
  // trusted miner includes it unsandwiched.
  auto share_value = [&](uint32_t mask) {
    Rational total = 0;
    for (size_t j = 1; j <= m; ++j)
      if (mask & (1u << (j - 1))) total += p.lambda.lambda(j);
    if (!p.trusted || total == 0 || !(mask & (1u << (*p.trusted - 1)))) return Rational(0);
    return Rational(p.s * p.lambda.lambda(*p.trusted) / total);
  };
  auto preference = [&](uint32_t mask) {
    const bool exactly_trusted = p.trusted && mask == (1u << (*p.trusted - 1));
    return std::tuple<int, int, uint32_t>(exactly_trusted ? 0 : 1,
                                          __builtin_popcount(mask), mask);
  };
  uint32_t best_mask = 0;
  Rational best_u = 0;
  for (uint32_t mask = 0; mask < (1u << m); ++mask) {
    Rational u = share_value(mask);
    if (u > best_u || (u == best_u && preference(mask) < preference(best_mask))) {
      best_mask = mask;
      best_u = u;
    }
  }
  for (size_t j = 1; j <= m; ++j)
    if (best_mask & (1u << (j - 1))) rep.optimal_share.insert(rep.miners[j - 1]);
  rep.user_utility = best_u;
  rep.formula_utility = p.trusted ? p.s : Rational(0);

  // Network layer: the shared-with miners see the order, nobody else does.
  std::set<std::string> miners(rep.miners.begin(), rep.miners.end());
  NetworkViews views = selective_share({{"tx_U", 0, p.f}}, miners, "U", "tx_U",
                                       rep.optimal_share, {{"tx_U", "U"}});
  for (const auto& [who, seen] : views.view) {
    const bool sees = std::any_of(seen.begin(), seen.end(),
                                  [](const TransactionTriple& t) { return t.tx == "tx_U"; });
    if (sees != (rep.optimal_share.count(who) > 0))
      throw domain_error("ViewMismatch", who);
  }
  return rep;
}

}  // namespace cgt
