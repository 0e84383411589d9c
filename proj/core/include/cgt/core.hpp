#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "cgt/error.hpp"
#include "cgt/rational.hpp"

namespace cgt {

using Round = long long;

struct TransactionTriple {
  std::string tx;
  Round post_time = 0;
  Rational fee;

  bool operator==(const TransactionTriple&) const = default;
  auto operator<=>(const TransactionTriple&) const = default;
};

using TripleSet = std::vector<TransactionTriple>;

// (lambda_0, lambda_1, ..., lambda_m): lambda_0 is the aggregated mass of
// honest/small miners, the rest sorted ascending with original-index tie-break.
class HashrateDistribution {
 public:
  HashrateDistribution() = default;

  const Rational& lambda0() const { return lambda0_; }
  const std::vector<Rational>& miners() const { return miners_; }  // indices 1..m
  size_t m() const { return miners_.size(); }
  const Rational& lambda(size_t j) const;  // j in 0..m

  // Sum over lambda_j for j in [from, m], from >= 1 (the racing tail).
  Rational tail(size_t from) const;

  std::vector<Rational> as_sequence() const;

 private:
  friend HashrateDistribution validate_hashrate(const std::vector<Rational>& lambda);
  Rational lambda0_;
  std::vector<Rational> miners_;
};

struct ConflictSpec {
  std::vector<std::set<std::string>> conflict_sets;
  std::map<std::string, Round> validity;  // earliest inclusion round, 0 when absent

  Round valid_from(const std::string& tx) const {
    auto it = validity.find(tx);
    return it == validity.end() ? 0 : it->second;
  }
};

struct Block {
  Round round = 0;
  std::vector<std::string> txs;
  std::optional<std::string> miner;  // absent: fees go to the aggregate pool

  bool operator==(const Block&) const = default;
  auto operator<=>(const Block&) const = default;
};

struct Ordering {
  std::vector<Block> blocks;

  std::set<std::string> confirmed() const;
  bool operator==(const Ordering&) const = default;
  auto operator<=>(const Ordering&) const = default;
};

struct OutcomeDistribution {
  struct Entry {
    Ordering ordering;
    double probability = 0;
  };
  std::vector<Entry> support;
  bool assumed_f1_wins_tie = false;  // set when an equal-fee timelock race was resolved by fiat

  void validate() const;  // probabilities sum to 1 within 1e-9, distinct orderings
};

using Balances = std::map<std::string, Rational>;

// Recipient of fees from blocks with no miner attribution.
inline const std::string kMinerPool = "__miners__";

struct SettlementRules {
  // Keyed by the sorted set of confirmed tx ids.
  std::map<std::set<std::string>, Balances> base_balance;
  std::map<std::string, std::string> payer;  // tx id -> player id

  bool operator==(const SettlementRules&) const = default;
};

// Validates, sorts indices 1..m ascending, keeps lambda_0 in place.
// Errors: SumNotOne, NegativeEntry, NonPositiveLargest.
HashrateDistribution validate_hashrate(const std::vector<Rational>& lambda);

// omega_i = base_balance_i - fees paid (payer), omega_miner += fees received.
// Errors: UnknownPattern, UnknownTx, ConflictViolated, NoPayer.
Balances settle(const Ordering& ordering, const TripleSet& triples,
                const SettlementRules& rules, const ConflictSpec& conflicts = {});

void validate_triples(const TripleSet& triples);  // unique ids, fee >= 0, post_time >= 0

// JSON schema: {"triples":[{"tx","post_time","fee"}], "conflicts":[["a","b"]],
//   "validity":{"tx":round}, "balances":{"a,b":{"player":"v"}}, "payer":{"tx":"player"}}
// Fees/balances are strings parsed exactly ("0.5", "1/3") or numbers.
struct ScenarioDoc {
  TripleSet triples;
  ConflictSpec conflicts;
  SettlementRules rules;
};
ScenarioDoc load_scenario(const std::string& json_text);

}  // namespace cgt
