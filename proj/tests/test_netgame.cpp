#include <doctest.h>

#include "cgt/netgame.hpp"

using namespace cgt;

TEST_CASE("broadcast gives identical full views") {
  TripleSet ts{{"t1", 0, 1}, {"t2", 0, 2}};
  auto views = broadcast(ts, {"m1", "m2", "m3"});
  CHECK(views.view.size() == 3);
  for (auto& [m, v] : views.view) CHECK(v == ts);
  CHECK(broadcast({}, {"m1"}).view.at("m1").empty());
}

TEST_CASE("selective share hides the restricted triple") {
  TripleSet ts{{"tx_U", 0, 1}, {"leg1", 0, 0}};
  std::map<std::string, std::string> payer{{"tx_U", "U"}, {"leg1", "m1"}};
  auto views = selective_share(ts, {"m1", "m2"}, "U", "tx_U", {"m1"}, payer);
  CHECK(views.view.at("m1") == ts);
  REQUIRE(views.view.at("m2").size() == 1);
  CHECK(views.view.at("m2")[0].tx == "leg1");

  auto all = selective_share(ts, {"m1", "m2"}, "U", "tx_U", {"m1", "m2"}, payer);
  for (auto& [m, v] : all.view) CHECK(v == ts);

  auto none = selective_share(ts, {"m1", "m2"}, "U", "tx_U", {}, payer);
  for (auto& [m, v] : none.view) CHECK(v.size() == 1);
}

TEST_CASE("selective share guards") {
  TripleSet ts{{"tx_U", 0, 1}};
  std::map<std::string, std::string> payer{{"tx_U", "U"}};
  CHECK_THROWS_WITH_AS(selective_share(ts, {"m1"}, "U", "nope", {}, payer),
                       doctest::Contains("UnknownTx"), Error);
  CHECK_THROWS_WITH_AS(selective_share(ts, {"m1"}, "V", "tx_U", {}, payer),
                       doctest::Contains("NotPayer"), Error);
}
