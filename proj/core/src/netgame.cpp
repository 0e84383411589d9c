#include "cgt/netgame.hpp"

#include <algorithm>

namespace cgt {

NetworkViews broadcast(const TripleSet& triples, const std::set<std::string>& miners) {
  NetworkViews out;
  for (const auto& m : miners) out.view[m] = triples;
  return out;
}

NetworkViews selective_share(const TripleSet& triples,
                             const std::set<std::string>& miners,
                             const std::string& owner, const std::string& restricted,
                             const std::set<std::string>& share_set,
                             const std::map<std::string, std::string>& payer) {
  auto it = std::find_if(triples.begin(), triples.end(),
                         [&](const TransactionTriple& t) { return t.tx == restricted; });
  if (it == triples.end()) throw domain_error("UnknownTx", restricted);
  auto pit = payer.find(restricted);
  if (pit == payer.end() || pit->second != owner)
    throw domain_error("NotPayer", owner + " does not pay for " + restricted);
  TripleSet without;
  for (const auto& t : triples)
    if (t.tx != restricted) without.push_back(t);
  NetworkViews out;
  for (const auto& m : miners)
    out.view[m] = share_set.count(m) ? triples : without;
  return out;
}

}  // namespace cgt
