#pragma once

#include <map>
#include <set>
#include <string>

#include "cgt/core.hpp"

namespace cgt {

// Per-miner mempool view of the application's emitted triples.
struct NetworkViews {
  std::map<std::string, TripleSet> view;  // miner id -> visible triples
};

// Synchronous default: every miner sees everything.
NetworkViews broadcast(const TripleSet& triples, const std::set<std::string>& miners);

// Miners in share_set see the full set; everyone else sees it minus the
// restricted triple. Errors: UnknownTx, NotPayer.
NetworkViews selective_share(const TripleSet& triples,
                             const std::set<std::string>& miners,
                             const std::string& owner, const std::string& restricted,
                             const std::set<std::string>& share_set,
                             const std::map<std::string, std::string>& payer);

}  // namespace cgt
