#include "cgt/core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <nlohmann/json.hpp>

namespace cgt {

const Rational& HashrateDistribution::lambda(size_t j) const {
  if (j == 0) return lambda0_;
  if (j > miners_.size()) throw domain_error("IndexOutOfRange", "lambda index " + std::to_string(j));
  return miners_[j - 1];
}

Rational HashrateDistribution::tail(size_t from) const {
  Rational s = 0;
  for (size_t j = from; j <= miners_.size() && j >= 1; ++j) s += miners_[j - 1];
  return s;
}

std::vector<Rational> HashrateDistribution::as_sequence() const {
  std::vector<Rational> out;
  out.push_back(lambda0_);
  out.insert(out.end(), miners_.begin(), miners_.end());
  return out;
}

HashrateDistribution validate_hashrate(const std::vector<Rational>& lambda) {
  if (lambda.empty()) throw domain_error("EmptySequence", "hashrate sequence is empty");
  Rational sum = std::accumulate(lambda.begin(), lambda.end(), Rational(0));
  for (const auto& l : lambda)
    if (l < 0) throw domain_error("NegativeEntry", "negative hashrate " + rational_to_string(l));
  if (sum != 1) throw domain_error("SumNotOne", "hashrates sum to " + rational_to_string(sum));
  HashrateDistribution dist;
  dist.lambda0_ = lambda[0];
  std::vector<std::pair<Rational, size_t>> rest;
  for (size_t i = 1; i < lambda.size(); ++i) rest.emplace_back(lambda[i], i);
  std::stable_sort(rest.begin(), rest.end());
  for (auto& [v, i] : rest) dist.miners_.push_back(v);
  if (!dist.miners_.empty() && dist.miners_.front() <= 0)
    throw domain_error("NonPositiveLargest", "lambda_1 must be positive after sorting");
  if (dist.miners_.empty() && dist.lambda0_ != 1)
    throw domain_error("SumNotOne", "single-entry sequence must be (1)");
  return dist;
}

std::set<std::string> Ordering::confirmed() const {
  std::set<std::string> out;
  for (const auto& b : blocks)
    for (const auto& t : b.txs) out.insert(t);
  return out;
}

void OutcomeDistribution::validate() const {
  double sum = 0;
  std::set<Ordering> seen;
  for (const auto& e : support) {
    if (e.probability < 0 || e.probability > 1 + 1e-9)
      throw domain_error("BadProbability", "probability out of range");
    if (!seen.insert(e.ordering).second)
      throw domain_error("DuplicateOrdering", "outcome support entries must be distinct");
    sum += e.probability;
  }
  if (std::abs(sum - 1.0) > 1e-9)
    throw domain_error("NotNormalized", "probabilities sum to " + std::to_string(sum));
}

void validate_triples(const TripleSet& triples) {
  std::set<std::string> ids;
  for (const auto& t : triples) {
    if (t.fee < 0) throw domain_error("NegativeFee", t.tx);
    if (t.post_time < 0) throw domain_error("NegativePostTime", t.tx);
    if (!ids.insert(t.tx).second) throw domain_error("DuplicateTxId", t.tx);
  }
}

Balances settle(const Ordering& ordering, const TripleSet& triples,
                const SettlementRules& rules, const ConflictSpec& conflicts) {
  std::map<std::string, const TransactionTriple*> by_id;
  for (const auto& t : triples) by_id[t.tx] = &t;

  std::set<std::string> confirmed;
  Round prev = -1;
  for (const auto& b : ordering.blocks) {
    if (b.round <= prev && prev >= 0)
      throw domain_error("NonIncreasingRounds", "block rounds must strictly increase");
    prev = b.round;
    for (const auto& tx : b.txs) {
      if (!by_id.count(tx)) throw domain_error("UnknownTx", tx);
      if (!confirmed.insert(tx).second) throw domain_error("DuplicateTxId", tx);
    }
  }
  for (const auto& cs : conflicts.conflict_sets) {
    int hits = 0;
    for (const auto& tx : cs) hits += confirmed.count(tx);
    if (hits > 1) throw domain_error("ConflictViolated", "two members of one conflict set confirmed");
  }

  auto it = rules.base_balance.find(confirmed);
  if (it == rules.base_balance.end()) {
    std::string pat;
    for (const auto& tx : confirmed) pat += (pat.empty() ? "" : ",") + tx;
    throw domain_error("UnknownPattern", "{" + pat + "}");
  }
  Balances out = it->second;
  for (const auto& b : ordering.blocks) {
    std::string receiver = b.miner.value_or(kMinerPool);
    for (const auto& tx : b.txs) {
      const auto& fee = by_id.at(tx)->fee;
      if (fee == 0) continue;
      auto pit = rules.payer.find(tx);
      if (pit == rules.payer.end()) throw domain_error("NoPayer", tx);
      out[pit->second] -= fee;
      out[receiver] += fee;
    }
  }
  return out;
}

namespace {

Rational json_rational(const nlohmann::json& v) {
  if (v.is_string()) return parse_rational(v.get<std::string>());
  if (v.is_number_integer()) return Rational(v.get<long long>());
  if (v.is_number_float()) return rational_from_double(v.get<double>());
  throw domain_error("BadValue", "expected rational as string or number");
}

}  // namespace

ScenarioDoc load_scenario(const std::string& json_text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw usage_error("MalformedConfig", e.what());
  }
  ScenarioDoc out;
  for (const auto& t : doc.value("triples", nlohmann::json::array())) {
    out.triples.push_back({t.at("tx").get<std::string>(),
                           t.value("post_time", Round(0)),
                           json_rational(t.value("fee", nlohmann::json(0)))});
  }
  validate_triples(out.triples);
  for (const auto& cs : doc.value("conflicts", nlohmann::json::array())) {
    std::set<std::string> s;
    for (const auto& tx : cs) s.insert(tx.get<std::string>());
    out.conflicts.conflict_sets.push_back(std::move(s));
  }
  if (doc.contains("validity"))
    for (auto& [tx, r] : doc["validity"].items())
      out.conflicts.validity[tx] = r.get<Round>();
  if (doc.contains("balances")) {
    for (auto& [pattern, balances] : doc["balances"].items()) {
      std::set<std::string> key;
      std::string cur;
      for (char c : pattern + ",") {
        if (c == ',') {
          if (!cur.empty()) key.insert(cur);
          cur.clear();
        } else {
          cur += c;
        }
      }
      Balances b;
      for (auto& [who, v] : balances.items()) b[who] = json_rational(v);
      out.rules.base_balance[key] = std::move(b);
    }
  }
  if (doc.contains("payer"))
    for (auto& [tx, who] : doc["payer"].items())
      out.rules.payer[tx] = who.get<std::string>();
  return out;
}

}  // namespace cgt
