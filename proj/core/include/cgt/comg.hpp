#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include "cgt/core.hpp"

namespace cgt {

// Extended-round sentinels for switch times and censoring depths.
inline constexpr Round kRoundInf = std::numeric_limits<Round>::max();
inline constexpr Round kRoundMinusInf = std::numeric_limits<Round>::min();

// Analytic solution of the censoring race: miner j withholds the cheap
// immediate transaction during the last ceil(rho_j) rounds before the
// timelocked one becomes valid.
struct CensorSchedule {
  size_t ell = 0;                 // largest j with lambda_j <= f1/f2
  std::vector<double> rho;        // rho_1..rho_m, may hold +inf
  std::vector<Round> r_star;      // ceil(rho_j), kRoundInf when rho_j = inf
  Rational f1, f2;
  HashrateDistribution lambda;
};

struct RaceSpec {
  HashrateDistribution lambda;
  Rational f1, f2;
  Round T = 0;
};

enum class TiePolicy {
  Include,  // an exactly indifferent miner includes (weak-inequality ell rule)
  Censor,   // conservative: an indifferent miner censors
};

struct OracleResult {
  // First round in [0, T] at which miner j censors; T means "never before the
  // timelock expires".
  std::vector<Round> switch_rounds;
  Rational probability;                  // exact P(cheap tx included before T)
  std::vector<std::vector<bool>> censor; // [t][j-1], t in 0..T-1
};

struct SimulationResult {
  double p_hat = 0;
  double std_error = 0;
  uint64_t trials = 0;
};

// Errors: FeeOrderViolated (f1 >= f2), ZeroFee (f1 = 0).
CensorSchedule censor_schedule(const HashrateDistribution& lambda,
                               const Rational& f1, const Rational& f2);

// t*_j = T - r*_j; kRoundMinusInf when rho_j = inf.
std::vector<Round> switch_times(const CensorSchedule& schedule, Round T);

double inclusion_probability(const CensorSchedule& schedule, Round T);

// ceil(rho_m) + 1, or nullopt when rho_m = inf.
std::optional<Round> min_certain_timelock(const HashrateDistribution& lambda,
                                          const Rational& f1, const Rational& f2);

// Independent backward value iteration in exact rationals; never touches the
// rho recursion. Errors: OracleBoundExceeded (T or m over the bounds).
OracleResult best_response_oracle(const RaceSpec& spec,
                                  TiePolicy policy = TiePolicy::Include,
                                  Round max_T = 64, size_t max_m = 8);

// switch_rounds follow OracleResult conventions (clamped to [0, T]).
SimulationResult simulate_race(const RaceSpec& spec,
                               const std::vector<Round>& switch_rounds,
                               uint64_t trials, uint64_t seed);

// Resolves a triple set with pairwise conflicts into a distribution over
// orderings. Errors: UnsupportedConflictArity, OverlappingConflictSets.
OutcomeDistribution resolve_triples(const TripleSet& triples,
                                    const ConflictSpec& conflicts,
                                    const HashrateDistribution& lambda);

}  // namespace cgt
