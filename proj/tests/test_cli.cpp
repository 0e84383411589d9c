#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <json.hpp>

#include "cli.hpp"

using cgt::cli::RunResult;
using cgt::cli::run;
using Json = nlohmann::ordered_json;

namespace {

Json result_of(const RunResult& r) {
  REQUIRE(r.exit_code == 0);
  Json doc = Json::parse(r.out);
  return doc["result"];
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

std::string cell_text(const Json& v) {
  if (v.is_null()) return "";
  if (v.is_string()) return v.get<std::string>();
  return v.dump();
}

}  // namespace

TEST_CASE("race probability fixture") {
  RunResult r = run({"comg", "prob", "--lambda", "0.5,0.2,0.3", "--f1", "1",
                     "--f2", "10", "--T", "2"});
  Json res = result_of(r);
  CHECK(res["p"] == 0.85);
}

TEST_CASE("collateral safety fixture") {
  RunResult r = run({"crab", "safety", "--lambda", "0,0.5,0.5", "--c", "0.6",
                     "--v", "1", "--T", "1"});
  Json res = result_of(r);
  CHECK(res["safe"] == true);
  CHECK(res["minimal_safe_T"] == 1);
  CHECK(res["analytic_safe"] == res["oracle_safe"]);
}

TEST_CASE("zero-timelock channel reported not incentive compatible") {
  RunResult r = run({"htlc", "analyze", "--T", "0", "--capA", "0"});
  Json res = result_of(r);
  CHECK(res["ic_holds"] == false);
  CHECK(res["indifference"] == true);
  CHECK(res["strict_failure"] == false);
}

TEST_CASE("exit codes follow the error kind") {
  CHECK(run({"comg", "prob", "--lambda", "0.5,0.2,0.3", "--f1", "10", "--f2",
             "1", "--T", "2"})
            .exit_code == 2);
  RunResult missing = run({"comg", "prob", "--lambda", "0.5,0.2,0.3", "--f2", "10",
                           "--T", "2"});
  CHECK(missing.exit_code == 1);
  CHECK(missing.err.find("MissingParameter") != std::string::npos);
  RunResult unknown = run({"frobnicate"});
  CHECK(unknown.exit_code == 1);
  CHECK(run({"comg", "oracle", "--lambda", "0.5,0.2,0.3", "--f1", "1", "--f2",
             "10", "--T", "100"})
            .exit_code == 3);
}

TEST_CASE("seeded commands are byte-identical and json round-trips") {
  std::vector<std::string> cmd = {"comg",  "sweep", "--lambda", "0.5,0.2,0.3",
                                  "--f1",  "1",     "--f2",     "10",
                                  "--Tmax", "4",    "--trials", "2000",
                                  "--seed", "42"};
  RunResult a = run(cmd);
  RunResult b = run(cmd);
  REQUIRE(a.exit_code == 0);
  CHECK(a.out == b.out);
  Json doc = Json::parse(a.out);
  CHECK(doc.dump(2) + "\n" == a.out);
}

TEST_CASE("csv sweep is lossless against the json report") {
  std::vector<std::string> base = {"comg",  "sweep", "--lambda", "0.5,0.2,0.3",
                                   "--f1",  "1",     "--f2",     "10",
                                   "--Tmax", "3",    "--trials", "1000",
                                   "--seed", "7"};
  RunResult js = run(base);
  std::vector<std::string> csv_cmd = base;
  csv_cmd.push_back("--format");
  csv_cmd.push_back("csv");
  RunResult cs = run(csv_cmd);
  REQUIRE(cs.exit_code == 0);
  Json res = result_of(js);
  std::vector<std::string> lines = split(cs.out, '\n');
  REQUIRE(lines.size() >= res["rows"].size() + 2);
  std::vector<std::string> header = split(lines[0], ',');
  REQUIRE(header.size() == res["columns"].size());
  for (size_t i = 0; i < header.size(); ++i)
    CHECK(header[i] == res["columns"][i].get<std::string>());
  for (size_t i = 0; i < res["rows"].size(); ++i) {
    std::vector<std::string> cells = split(lines[i + 1], ',');
    REQUIRE(cells.size() == res["rows"][i].size());
    for (size_t k = 0; k < cells.size(); ++k)
      CHECK(cells[k] == cell_text(res["rows"][i][k]));
  }
}

TEST_CASE("config document provides defaults and flags win") {
  const char* path = "cli_test_config.json";
  {
    std::ofstream out(path);
    out << R"({"lambda":"0,0.5,0.5","c":"0.45","v":"1","T":3})";
  }
  RunResult from_cfg = run({"crab", "safety", "--config", path});
  CHECK(result_of(from_cfg)["safe"] == false);
  RunResult overridden = run({"crab", "safety", "--config", path, "--c", "0.6"});
  CHECK(result_of(overridden)["safe"] == true);
  RunResult bad = run({"crab", "safety", "--config", "no_such_file.json"});
  CHECK(bad.exit_code == 2);
  CHECK(bad.err.find("MalformedConfig") != std::string::npos);
  std::remove(path);
}

TEST_CASE("chained channel check surfaces the composition deviation") {
  RunResult r = run({"two-htlc", "check", "--T1", "2", "--T2", "4"});
  Json res = result_of(r);
  CHECK(res["timelock_condition"] == false);
  CHECK(res["checked"] == true);
  CHECK(res["deviation_found"] == true);
}

TEST_CASE("wormhole and mev subcommands report their closed forms") {
  Json w = result_of(run({"wormhole", "check", "--v1", "10", "--v2", "9",
                          "--v3", "8"}));
  CHECK(w["deviation"] == true);
  CHECK(w["gain"] == "1");
  CHECK(w["gain_matches"] == true);

  Json m = result_of(run({"mev", "solve", "--trusted", "2"}));
  CHECK(m["optimal_share"] == Json::array({"m2"}));
  CHECK(m["user_utility"] == "5");
  Json none = result_of(run({"mev", "solve"}));
  CHECK(none["user_utility"] == "0");
  CHECK(none["equilibrium_action"]["m1"] == "D");
}

TEST_CASE("generic ic check subcommand runs end to end") {
  Json res = result_of(run({"compose", "check-ic", "--case", "crab", "--T", "1",
                            "--c", "2", "--v", "10", "--lambda", "0,0.5,0.5"}));
  CHECK(res["holds"] == false);
  REQUIRE(res["cases"].size() == 1);
}
