#include "cgt/comg.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>

namespace cgt {

namespace {

// rho values sit exactly on integers whenever the recursion telescopes
// (e.g. log(1/2)/log(1/2)); nudge before ceiling so 1.0000000000000002
// still rounds to 1.
Round ceil_eps(double x) {
  if (std::isinf(x)) return kRoundInf;
  return static_cast<Round>(std::ceil(x - 1e-9));
}

}  // namespace

CensorSchedule censor_schedule(const HashrateDistribution& lambda,
                               const Rational& f1, const Rational& f2) {
  if (f1 <= 0) throw domain_error("ZeroFee", "f1 must be positive");
  if (f1 >= f2) throw domain_error("FeeOrderViolated", "need f1 < f2");
  CensorSchedule s;
  s.f1 = f1;
  s.f2 = f2;
  s.lambda = lambda;
  const size_t m = lambda.m();
  const Rational ratio = f1 / f2;
  size_t ell = 0;
  for (size_t j = 1; j <= m; ++j)
    if (lambda.lambda(j) <= ratio) ell = j;
  s.ell = ell;
  s.rho.assign(m, 0.0);
  s.r_star.assign(m, 0);

  double corr = 0;  // sum over finished phases of (r*_i - r*_{i-1}) * log(tail_i)
  Round prev_r = 0;
  for (size_t j = ell + 1; j <= m; ++j) {
    const Rational tail = lambda.tail(j);
    if (tail == 1) {
      for (size_t k = j; k <= m; ++k) {
        s.rho[k - 1] = std::numeric_limits<double>::infinity();
        s.r_star[k - 1] = kRoundInf;
      }
      return s;
    }
    const double log_tail = std::log(to_double(tail));
    const double num = std::log(to_double(ratio / lambda.lambda(j))) - corr;
    const double rho_j = static_cast<double>(prev_r) + num / log_tail;
    const Round r_j = std::max(ceil_eps(rho_j), prev_r);
    s.rho[j - 1] = rho_j;
    s.r_star[j - 1] = r_j;
    corr += static_cast<double>(r_j - prev_r) * log_tail;
    prev_r = r_j;
  }
  return s;
}

std::vector<Round> switch_times(const CensorSchedule& schedule, Round T) {
  std::vector<Round> out;
  out.reserve(schedule.r_star.size());
  for (Round r : schedule.r_star)
    out.push_back(r == kRoundInf ? kRoundMinusInf : T - r);
  return out;
}

double inclusion_probability(const CensorSchedule& schedule, Round T) {
  if (T <= 0) return 0.0;
  const size_t m = schedule.lambda.m();
  if (m == 0) return 1.0;
  // First phase j whose censoring depth covers T.
  size_t j = 0;
  for (size_t i = 1; i <= m; ++i) {
    if (schedule.r_star[i - 1] >= T) { j = i; break; }
  }
  if (j == 0) return 1.0;  // T > r*_m: certain inclusion
  Round prev = j >= 2 ? schedule.r_star[j - 2] : 0;
  double p = std::pow(to_double(schedule.lambda.tail(j)), static_cast<double>(T - prev));
  for (size_t i = 1; i + 1 <= j; ++i) {
    Round lo = i >= 2 ? schedule.r_star[i - 2] : 0;
    Round hi = schedule.r_star[i - 1];
    if (hi > lo)
      p *= std::pow(to_double(schedule.lambda.tail(i)), static_cast<double>(hi - lo));
  }
  return 1.0 - p;
}

std::optional<Round> min_certain_timelock(const HashrateDistribution& lambda,
                                          const Rational& f1, const Rational& f2) {
  CensorSchedule s = censor_schedule(lambda, f1, f2);
  if (s.r_star.empty()) return 1;
  Round r = s.r_star.back();
  if (r == kRoundInf) return std::nullopt;
  return r + 1;
}

OracleResult best_response_oracle(const RaceSpec& spec, TiePolicy policy,
                                  Round max_T, size_t max_m) {
  if (spec.f1 <= 0) throw domain_error("ZeroFee", "f1 must be positive");
  if (spec.f1 >= spec.f2) throw domain_error("FeeOrderViolated", "need f1 < f2");
  if (spec.T < 0) throw domain_error("NegativeTimelock", "T must be >= 0");
  if (spec.T > max_T)
    throw bound_error("OracleBoundExceeded", "T exceeds oracle bound");
  if (spec.lambda.m() > max_m)
    throw bound_error("OracleBoundExceeded", "m exceeds oracle bound");

  const size_t m = spec.lambda.m();
  const Round T = spec.T;
  OracleResult out;
  out.censor.assign(static_cast<size_t>(T), std::vector<bool>(m, false));
  out.switch_rounds.assign(m, T);

  // v[j] is miner j+1's continuation value at round t+1 while iterating round t
  // downward; at round T the timelocked transaction wins, worth lambda_j * f2.
  std::vector<Rational> v(m);
  for (size_t j = 0; j < m; ++j) v[j] = spec.lambda.lambda(j + 1) * spec.f2;

  Rational survive = 1;  // product of censoring masses over rounds 0..T-1
  std::vector<Rational> mass(static_cast<size_t>(T), Rational(0));
  for (Round t = T - 1; t >= 0; --t) {
    Rational censor_mass = 0;
    std::vector<bool> censors(m, false);
    for (size_t j = 0; j < m; ++j) {
      bool c = policy == TiePolicy::Include ? v[j] > spec.f1 : v[j] >= spec.f1;
      censors[j] = c;
      if (c) censor_mass += spec.lambda.lambda(j + 1);
    }
    out.censor[static_cast<size_t>(t)] = censors;
    mass[static_cast<size_t>(t)] = censor_mass;
    std::vector<Rational> next(m);
    for (size_t j = 0; j < m; ++j) {
      const Rational& lj = spec.lambda.lambda(j + 1);
      Rational others = censor_mass - (censors[j] ? lj : Rational(0));
      next[j] = censors[j] ? Rational((lj + others) * v[j])
                           : Rational(lj * spec.f1 + others * v[j]);
    }
    v = std::move(next);
  }
  for (Round t = 0; t < T; ++t) survive *= mass[static_cast<size_t>(t)];
  out.probability = 1 - survive;
  for (size_t j = 0; j < m; ++j) {
    for (Round t = 0; t < T; ++t) {
      if (out.censor[static_cast<size_t>(t)][j]) { out.switch_rounds[j] = t; break; }
    }
  }
  return out;
}

SimulationResult simulate_race(const RaceSpec& spec,
                               const std::vector<Round>& switch_rounds,
                               uint64_t trials, uint64_t seed) {
  if (trials < 1) throw domain_error("NoTrials", "trials must be >= 1");
  const size_t m = spec.lambda.m();
  if (switch_rounds.size() != m)
    throw domain_error("BadSwitchVector", "one switch round per miner required");
  std::vector<double> cum;
  cum.reserve(m + 1);
  double acc = to_double(spec.lambda.lambda0());
  cum.push_back(acc);
  for (size_t j = 1; j <= m; ++j) {
    acc += to_double(spec.lambda.lambda(j));
    cum.push_back(acc);
  }
  std::mt19937_64 rng(seed);
  uint64_t hits = 0;
  for (uint64_t n = 0; n < trials; ++n) {
    bool included = false;
    for (Round t = 0; t < spec.T && !included; ++t) {
      const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
      size_t pick = static_cast<size_t>(
          std::lower_bound(cum.begin(), cum.end(), u) - cum.begin());
      if (pick >= cum.size()) pick = cum.size() - 1;
      if (pick == 0) {
        included = true;  // aggregated small miners always include
      } else {
        included = t < switch_rounds[pick - 1];
      }
    }
    if (included) ++hits;
  }
  SimulationResult r;
  r.trials = trials;
  r.p_hat = static_cast<double>(hits) / static_cast<double>(trials);
  r.std_error = std::sqrt(r.p_hat * (1.0 - r.p_hat) / static_cast<double>(trials));
  return r;
}

namespace {

struct Branch {
  std::string winner;
  Round round = 0;
  double probability = 1.0;
};

// Resolves one conflicting pair into winner branches.
std::vector<Branch> resolve_pair(const TransactionTriple& a, const TransactionTriple& b,
                                 const ConflictSpec& conflicts,
                                 const HashrateDistribution& lambda, bool& tie_flag) {
  const Round eff_a = std::max(a.post_time, conflicts.valid_from(a.tx));
  const Round eff_b = std::max(b.post_time, conflicts.valid_from(b.tx));
  // Zero-fee sentinels lose to any fee-paying conflict that is ever posted.
  if (a.fee == 0 && b.fee > 0) return {{b.tx, eff_b, 1.0}};
  if (b.fee == 0 && a.fee > 0) return {{a.tx, eff_a, 1.0}};
  if (a.fee == 0 && b.fee == 0)
    return {{a.tx, std::max(eff_a, eff_b), 0.5}, {b.tx, std::max(eff_a, eff_b), 0.5}};
  // One transaction becomes includable before the other is even visible.
  if (eff_a < b.post_time) return {{a.tx, eff_a, 1.0}};
  if (eff_b < a.post_time) return {{b.tx, eff_b, 1.0}};
  const Round start = std::max({a.post_time, b.post_time, std::min(eff_a, eff_b)});
  const bool a_valid = eff_a <= start;
  const bool b_valid = eff_b <= start;
  if (a_valid && b_valid) {
    const Round at = start;
    if (a.fee > b.fee) return {{a.tx, at, 1.0}};
    if (b.fee > a.fee) return {{b.tx, at, 1.0}};
    return {{a.tx, at, 0.5}, {b.tx, at, 0.5}};
  }
  // Exactly one valid now; the other unlocks at round start + T.
  const TransactionTriple& now = a_valid ? a : b;
  const TransactionTriple& later = a_valid ? b : a;
  const Round unlock = a_valid ? eff_b : eff_a;
  const Round T = unlock - start;
  if (now.fee >= later.fee) {
    if (now.fee == later.fee) tie_flag = true;
    return {{now.tx, start, 1.0}};
  }
  double p;
  if (lambda.m() == 0) {
    p = 1.0;
  } else {
    p = inclusion_probability(censor_schedule(lambda, now.fee, later.fee), T);
  }
  std::vector<Branch> out;
  if (p > 0) out.push_back({now.tx, start, p});
  if (p < 1) out.push_back({later.tx, unlock, 1.0 - p});
  return out;
}

}  // namespace

OutcomeDistribution resolve_triples(const TripleSet& triples,
                                    const ConflictSpec& conflicts,
                                    const HashrateDistribution& lambda) {
  validate_triples(triples);
  std::map<std::string, const TransactionTriple*> by_id;
  for (const auto& t : triples) by_id[t.tx] = &t;

  std::set<std::string> in_conflict;
  std::vector<std::pair<const TransactionTriple*, const TransactionTriple*>> pairs;
  for (const auto& cs : conflicts.conflict_sets) {
    if (cs.size() > 2)
      throw domain_error("UnsupportedConflictArity", "conflict sets are limited to pairs");
    std::vector<const TransactionTriple*> members;
    for (const auto& tx : cs) {
      auto it = by_id.find(tx);
      if (it == by_id.end()) continue;  // conflict declared over absent tx: vacuous
      if (!in_conflict.insert(tx).second)
        throw domain_error("OverlappingConflictSets", tx);
      members.push_back(it->second);
    }
    if (members.size() == 2) pairs.emplace_back(members[0], members[1]);
  }

  // Branch the distribution across conflicting pairs; independent races multiply.
  struct Partial {
    std::map<Round, std::vector<std::string>> rounds;
    double probability = 1.0;
  };
  std::vector<Partial> partials(1);
  for (const auto& t : triples) {
    if (in_conflict.count(t.tx)) continue;
    partials[0].rounds[std::max(t.post_time, conflicts.valid_from(t.tx))].push_back(t.tx);
  }
  bool tie_flag = false;
  for (const auto& [a, b] : pairs) {
    auto branches = resolve_pair(*a, *b, conflicts, lambda, tie_flag);
    std::vector<Partial> next;
    for (const auto& p : partials) {
      for (const auto& br : branches) {
        Partial q = p;
        q.rounds[br.round].push_back(br.winner);
        q.probability *= br.probability;
        next.push_back(std::move(q));
      }
    }
    partials = std::move(next);
  }

  OutcomeDistribution out;
  out.assumed_f1_wins_tie = tie_flag;
  for (auto& p : partials) {
    Ordering o;
    for (auto& [round, txs] : p.rounds) {
      std::sort(txs.begin(), txs.end());
      o.blocks.push_back({round, txs, std::nullopt});
    }
    out.support.push_back({std::move(o), p.probability});
  }
  // Merge identical orderings produced by symmetric branches.
  std::map<Ordering, double> merged;
  for (auto& e : out.support) merged[e.ordering] += e.probability;
  out.support.clear();
  for (auto& [o, pr] : merged) out.support.push_back({o, pr});
  out.validate();
  return out;
}

}  // namespace cgt
