#include "cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "cgt/casestudies.hpp"

namespace cgt::cli {
namespace {

using Json = nlohmann::ordered_json;

constexpr const char* kVersion = "0.1.0";

Json round_json(Round r) {
  if (r == kRoundInf) return "inf";
  if (r == kRoundMinusInf) return "-inf";
  return r;
}

HashrateDistribution parse_lambda(const std::string& s) {
  std::vector<Rational> xs;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) xs.push_back(parse_rational(item));
  if (xs.empty())
    throw usage_error("MissingParameter", "--lambda needs at least one entry");
  return validate_hashrate(xs);
}

void merge_config(std::vector<std::string>& args) {
  std::string path;
  for (size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) {
      path = args[i + 1];
      args.erase(args.begin() + i, args.begin() + i + 2);
      break;
    }
    if (args[i].rfind("--config=", 0) == 0) {
      path = args[i].substr(9);
      args.erase(args.begin() + i);
      break;
    }
  }
  if (path.empty()) return;
  std::ifstream in(path);
  if (!in) throw domain_error("MalformedConfig", "cannot read " + path);
  Json doc = Json::parse(in, nullptr, false);
  if (doc.is_discarded() || !doc.is_object())
    throw domain_error("MalformedConfig", path + " is not a JSON object");
  for (const auto& [key, val] : doc.items()) {
    const std::string flag = "--" + key;
    bool present = std::any_of(args.begin(), args.end(), [&](const std::string& a) {
      return a == flag || a.rfind(flag + "=", 0) == 0;
    });
    if (present) continue;
    args.push_back(flag);
    args.push_back(val.is_string() ? val.get<std::string>() : val.dump());
  }
}

void csv_cell(const Json& v, std::string& out) {
  if (v.is_null()) return;
  if (v.is_string())
    out += v.get<std::string>();
  else
    out += v.dump();
}

std::string flat_value(const Json& v) {
  if (v.is_string()) return v.get<std::string>();
  return v.dump();
}

std::string emit(const Json& report, const std::string& format) {
  if (format == "json") return report.dump(2) + "\n";
  const Json& result = report["result"];
  std::string out;
  if (format == "csv") {
    if (result.contains("columns")) {
      const Json& cols = result["columns"];
      for (size_t i = 0; i < cols.size(); ++i)
        out += (i ? "," : "") + cols[i].get<std::string>();
      out += "\n";
      for (const Json& row : result["rows"]) {
        for (size_t i = 0; i < row.size(); ++i) {
          if (i) out += ",";
          csv_cell(row[i], out);
        }
        out += "\n";
      }
      return out;
    }
    out = "key,value\n";
    for (const auto& [k, v] : result.items()) {
      out += k + ",";
      csv_cell(v, out);
      out += "\n";
    }
    return out;
  }
  out = "command: " + report["command"].get<std::string>() + "\n";
  for (const auto& [k, v] : result.items()) out += k + ": " + flat_value(v) + "\n";
  return out;
}

Json rat_json(const Rational& r) { return rational_to_string(r); }

}  // namespace

RunResult run(const std::vector<std::string>& args_in) {
  RunResult res;
  std::ostringstream out, err;
  try {
    std::vector<std::string> args = args_in;
    merge_config(args);

    CLI::App app{"Compositional game-theoretic analysis of blockchain protocols",
                 "chaingt"};
    app.require_subcommand(1);

    std::string format = "json";
    uint64_t seed = 0;
    app.add_option("--format", format, "json, csv or text")
        ->check(CLI::IsMember({"json", "csv", "text"}));
    app.add_option("--seed", seed, "simulation seed");

    std::string lambda_s = "0.5,0.2,0.3";
    std::string f1_s, f2_s;
    long long T = 3, Tmax = 6;
    uint64_t trials = 100000;
    std::string tie = "include";

    long long T1 = 5, T2 = 5, T3 = 1, te = -1, ts = 0;
    std::string vA = "10", vB = "10", v_s = "10", capA = "1", capB = "1";
    std::string delta = "1", eps_open;
    std::string mode = "dep";
    std::string v1 = "10", v2 = "9", v3 = "8";
    std::string vAl = "4", vBl = "6", vAo = "9", vBo = "1", c_s = "1";
    std::string crab_eps = "1";
    std::string l_s = "100", s_s = "5", f_s = "1";
    long long trusted = 0;
    std::string case_name = "crab";

    std::string command;
    Json result;

    auto add_lambda = [&](CLI::App* sub) {
      sub->add_option("--lambda", lambda_s, "comma-separated hashrates, honest first");
    };
    auto add_fees = [&](CLI::App* sub) {
      sub->add_option("--f1", f1_s, "fee of the censored transaction")->required();
      sub->add_option("--f2", f2_s, "fee of the timelocked transaction")->required();
    };
    auto add_htlc = [&](CLI::App* sub) {
      sub->add_option("--ts", ts, "secret reveal round, -1 for never");
      sub->add_option("--te", te, "horizon, defaults to the timelock");
      sub->add_option("--vA", vA, "payer channel balance");
      sub->add_option("--vB", vB, "payee channel balance");
      sub->add_option("--v", v_s, "in-flight value");
      sub->add_option("--capA", capA, "payer fee cap, 0 for uncapped");
      sub->add_option("--capB", capB, "payee fee cap");
      sub->add_option("--delta", delta, "fee grid step");
      sub->add_option("--epsilon-open", eps_open, "open-channel bonus");
    };
    auto htlc_params = [&](long long timelock) {
      HtlcParams p;
      p.T = timelock;
      p.t_e = te < 0 ? timelock : te;
      if (ts < 0)
        p.t_s.reset();
      else
        p.t_s = ts;
      p.v_A = parse_rational(vA);
      p.v_B = parse_rational(vB);
      p.v = parse_rational(v_s);
      p.fee_cap_A = parse_rational(capA);
      p.fee_cap_B = parse_rational(capB);
      p.delta = parse_rational(delta);
      if (!eps_open.empty()) p.epsilon_open = parse_rational(eps_open);
      validate(p);
      return p;
    };

    CLI::App* comg = app.add_subcommand("comg", "censoring race analysis");
    comg->require_subcommand(1);

    CLI::App* schedule = comg->add_subcommand("schedule", "per-miner censoring depths");
    add_lambda(schedule);
    add_fees(schedule);
    schedule->callback([&] {
      auto lam = parse_lambda(lambda_s);
      CensorSchedule sch = censor_schedule(lam, parse_rational(f1_s), parse_rational(f2_s));
      Json rho = Json::array(), rs = Json::array();
      for (double x : sch.rho) rho.push_back(std::isinf(x) ? Json("inf") : Json(x));
      for (Round x : sch.r_star) rs.push_back(round_json(x));
      command = "comg.schedule";
      result = {{"ell", sch.ell}, {"rho", rho}, {"r_star", rs}};
    });

    CLI::App* prob = comg->add_subcommand("prob", "inclusion probability before T");
    add_lambda(prob);
    add_fees(prob);
    prob->add_option("--T", T, "timelock")->required();
    prob->callback([&] {
      auto lam = parse_lambda(lambda_s);
      CensorSchedule sch = censor_schedule(lam, parse_rational(f1_s), parse_rational(f2_s));
      command = "comg.prob";
      result = {{"T", T}, {"p", inclusion_probability(sch, T)}};
    });

    CLI::App* mintl = comg->add_subcommand("min-timelock", "smallest T with certain inclusion");
    add_lambda(mintl);
    add_fees(mintl);
    mintl->callback([&] {
      auto lam = parse_lambda(lambda_s);
      auto mt = min_certain_timelock(lam, parse_rational(f1_s), parse_rational(f2_s));
      command = "comg.min-timelock";
      result = {{"min_certain_timelock", mt ? Json(*mt) : Json("inf")}};
    });

    CLI::App* oracle = comg->add_subcommand("oracle", "exact best-response value iteration");
    add_lambda(oracle);
    add_fees(oracle);
    oracle->add_option("--T", T, "timelock")->required();
    oracle->add_option("--tie", tie, "include or censor on indifference")
        ->check(CLI::IsMember({"include", "censor"}));
    oracle->callback([&] {
      auto lam = parse_lambda(lambda_s);
      RaceSpec spec{lam, parse_rational(f1_s), parse_rational(f2_s), T};
      OracleResult o = best_response_oracle(
          spec, tie == "censor" ? TiePolicy::Censor : TiePolicy::Include);
      Json sw = Json::array();
      for (Round x : o.switch_rounds) sw.push_back(round_json(x));
      command = "comg.oracle";
      result = {{"switch_rounds", sw},
                {"probability", rat_json(o.probability)},
                {"probability_double", to_double(o.probability)}};
    });

    CLI::App* simulate = comg->add_subcommand("simulate", "Monte-Carlo race estimate");
    add_lambda(simulate);
    add_fees(simulate);
    simulate->add_option("--T", T, "timelock")->required();
    simulate->add_option("--trials", trials, "sample count");
    simulate->callback([&] {
      auto lam = parse_lambda(lambda_s);
      CensorSchedule sch = censor_schedule(lam, parse_rational(f1_s), parse_rational(f2_s));
      std::vector<Round> sw = switch_times(sch, T);
      for (Round& t : sw) t = std::clamp<Round>(t, 0, T);
      SimulationResult sim =
          simulate_race({lam, sch.f1, sch.f2, T}, sw, trials, seed);
      command = "comg.simulate";
      result = {{"p_hat", sim.p_hat},
                {"std_error", sim.std_error},
                {"trials", sim.trials},
                {"p_analytic", inclusion_probability(sch, T)}};
    });

    CLI::App* sweep = comg->add_subcommand("sweep", "per-timelock table, analytic vs oracle");
    add_lambda(sweep);
    add_fees(sweep);
    sweep->add_option("--Tmax", Tmax, "largest timelock");
    sweep->add_option("--trials", trials, "Monte-Carlo samples per row, 0 to skip");
    sweep->callback([&] {
      auto lam = parse_lambda(lambda_s);
      CensorSchedule sch = censor_schedule(lam, parse_rational(f1_s), parse_rational(f2_s));
      Json cols = Json::array({"T", "p_analytic", "p_oracle", "p_mc", "se"});
      for (size_t j = 1; j <= lam.m(); ++j) cols.push_back("rho_" + std::to_string(j));
      for (size_t j = 1; j <= lam.m(); ++j) cols.push_back("tstar_" + std::to_string(j));
      Json rows = Json::array();
      for (Round t = 0; t <= Tmax; ++t) {
        Json row = Json::array();
        row.push_back(t);
        row.push_back(inclusion_probability(sch, t));
        OracleResult o = best_response_oracle({lam, sch.f1, sch.f2, t});
        row.push_back(to_double(o.probability));
        if (trials > 0) {
          std::vector<Round> sw = switch_times(sch, t);
          for (Round& x : sw) x = std::clamp<Round>(x, 0, t);
          SimulationResult sim = simulate_race({lam, sch.f1, sch.f2, t}, sw, trials, seed);
          row.push_back(sim.p_hat);
          row.push_back(sim.std_error);
        } else {
          row.push_back(nullptr);
          row.push_back(nullptr);
        }
        for (double x : sch.rho) row.push_back(std::isinf(x) ? Json("inf") : Json(x));
        for (Round r : sch.r_star)
          row.push_back(r == kRoundInf ? Json("-inf") : round_json(t - r));
        rows.push_back(row);
      }
      command = "comg.sweep";
      result = {{"columns", cols}, {"rows", rows}};
    });

    CLI::App* htlc = app.add_subcommand("htlc", "hashed-timelock channel payment");
    htlc->require_subcommand(1);
    CLI::App* analyze = htlc->add_subcommand("analyze", "incentive analysis of one channel");
    add_lambda(analyze);
    analyze->add_option("--T", T, "timelock")->required();
    add_htlc(analyze);
    analyze->callback([&] {
      auto lam = parse_lambda(lambda_s);
      HtlcParams p = htlc_params(T);
      HtlcReport rep = htlc_analysis(p, lam);
      command = "htlc.analyze";
      result = {{"ic_holds", rep.ic_holds},
                {"strict_failure", rep.strict_failure},
                {"indifference", rep.indifference},
                {"t_star", round_json(rep.t_star_m)},
                {"deviation_onset", round_json(htlc_deviation_onset(p, lam))},
                {"reaches_share_update", rep.reaches_share_update},
                {"trace", rep.trace}};
    });

    CLI::App* twoh = app.add_subcommand("two-htlc", "chained payment across two channels");
    twoh->require_subcommand(1);
    CLI::App* twocheck = twoh->add_subcommand("check", "timelock condition and deviation scan");
    add_lambda(twocheck);
    twocheck->add_option("--T1", T1, "upstream timelock")->required();
    twocheck->add_option("--T2", T2, "downstream timelock")->required();
    twocheck->add_option("--mode", mode, "dep or ind")
        ->check(CLI::IsMember({"dep", "ind"}));
    add_htlc(twocheck);
    twocheck->callback([&] {
      auto lam = parse_lambda(lambda_s);
      HtlcParams p1 = htlc_params(T1);
      HtlcParams p2 = htlc_params(T2);
      p1.t_e = p2.t_e = te < 0 ? std::max(T1, T2) : te;
      TwoHtlcReport rep = two_htlc(
          mode == "ind" ? TwoHtlcMode::Independent : TwoHtlcMode::Dependent, p1, p2, lam);
      command = "two-htlc.check";
      result = {{"timelock_condition", rep.timelock_condition},
                {"t_star_1", round_json(rep.t_star_1)},
                {"t_star_2", round_json(rep.t_star_2)},
                {"checked", rep.checked},
                {"deviation_found", rep.deviation_found},
                {"gain", rat_json(rep.gain)},
                {"additivity_ok", rep.additivity_ok}};
    });

    CLI::App* worm = app.add_subcommand("wormhole", "three-hop routing collusion");
    worm->require_subcommand(1);
    CLI::App* wormcheck = worm->add_subcommand("check", "coalition gain vs routing margin");
    add_lambda(wormcheck);
    wormcheck->add_option("--v1", v1, "hop 1 value")->required();
    wormcheck->add_option("--v2", v2, "hop 2 value")->required();
    wormcheck->add_option("--v3", v3, "hop 3 value")->required();
    wormcheck->add_option("--T1", T1, "hop 1 timelock")->default_val(3);
    wormcheck->add_option("--T2", T2, "hop 2 timelock")->default_val(2);
    wormcheck->add_option("--T3", T3, "hop 3 timelock")->default_val(1);
    add_htlc(wormcheck);
    wormcheck->callback([&] {
      auto lam = parse_lambda(lambda_s);
      HtlcParams p1 = htlc_params(T1), p2 = htlc_params(T2), p3 = htlc_params(T3);
      p1.v = parse_rational(v1);
      p2.v = parse_rational(v2);
      p3.v = parse_rational(v3);
      WormholeReport rep = wormhole(p1, p2, p3, lam);
      command = "wormhole.check";
      result = {{"gain", rat_json(rep.gain)},
                {"deviation", rep.deviation},
                {"gain_matches", rep.gain_matches},
                {"honest_coalition", rat_json(rep.honest_coalition)},
                {"deviated_coalition", rat_json(rep.deviated_coalition)}};
    });

    CLI::App* crab = app.add_subcommand("crab", "collateralized channel with punishment");
    crab->require_subcommand(1);

    CLI::App* crabgame = crab->add_subcommand("game", "extensive-form bribe race");
    add_lambda(crabgame);
    crabgame->add_option("--T", T, "settlement delay")->required();
    crabgame->add_option("--vAl", vAl, "latest state, payer side");
    crabgame->add_option("--vBl", vBl, "latest state, payee side");
    crabgame->add_option("--vAo", vAo, "old state, payer side");
    crabgame->add_option("--vBo", vBo, "old state, payee side");
    crabgame->add_option("--c", c_s, "collateral")->required();
    crabgame->add_option("--v", v_s, "channel value");
    crabgame->add_option("--epsilon", crab_eps, "minimal relay fee");
    crabgame->callback([&] {
      auto lam = parse_lambda(lambda_s);
      CrabParams p;
      p.T = T;
      p.v_A_l = parse_rational(vAl);
      p.v_B_l = parse_rational(vBl);
      p.v_A_o = parse_rational(vAo);
      p.v_B_o = parse_rational(vBo);
      p.c = parse_rational(c_s);
      p.v = parse_rational(v_s);
      p.epsilon = parse_rational(crab_eps);
      validate(p);
      Protocol proto = crab_game(p);
      const Param& pt = proto.game.param_space.front();
      GameTree tree = proto.game.builder(pt);
      CompletedGame game = complete(tree, lam, crab_rules(p), crab_conflicts(p));
      StrategyProfile ipb = proto.ipb(pt);
      BestResponse br = best_response(game, ipb, {"Alice"}, {"Alice"});
      Rational gain = br.value - group_utility(game.utility(ipb), {"Alice"});
      command = "crab.game";
      result = {{"players", Json(tree.players)},
                {"nodes", tree.nodes.size()},
                {"alice_gain", rat_json(gain)},
                {"deviates", gain > 0}};
    });

    CLI::App* crabsafe = crab->add_subcommand("safety", "is the collateral a deterrent");
    add_lambda(crabsafe);
    crabsafe->add_option("--T", T, "settlement delay")->required();
    crabsafe->add_option("--c", c_s, "collateral")->required();
    crabsafe->add_option("--v", v_s, "channel value")->required();
    crabsafe->callback([&] {
      auto lam = parse_lambda(lambda_s);
      CrabSafety cs = crab_safety(T, parse_rational(c_s), parse_rational(v_s), lam);
      command = "crab.safety";
      result = {{"safe", cs.safe},
                {"minimal_safe_T", cs.minimal_safe_T ? Json(*cs.minimal_safe_T) : Json()},
                {"analytic_safe", cs.analytic_safe},
                {"oracle_safe", cs.oracle_safe}};
    });

    CLI::App* mev = app.add_subcommand("mev", "selective order-flow sharing");
    mev->require_subcommand(1);
    CLI::App* solve = mev->add_subcommand("solve", "equilibrium of the sandwich game");
    add_lambda(solve);
    solve->add_option("--l", l_s, "order limit price");
    solve->add_option("--s", s_s, "sandwich spread");
    solve->add_option("--f", f_s, "order fee");
    solve->add_option("--trusted", trusted, "trusted miner index, 0 for none");
    solve->callback([&] {
      MevParams p;
      p.l = parse_rational(l_s);
      p.s = parse_rational(s_s);
      p.f = parse_rational(f_s);
      p.lambda = parse_lambda(lambda_s);
      if (trusted > 0) p.trusted = static_cast<size_t>(trusted);
      validate(p);
      MevReport rep = mev_game(p);
      command = "mev.solve";
      result = {{"miners", rep.miners},
                {"optimal_share", Json(rep.optimal_share)},
                {"user_utility", rat_json(rep.user_utility)},
                {"formula_utility", rat_json(rep.formula_utility)},
                {"equilibrium_action", Json(rep.equilibrium_action)},
                {"sandwich_strict", rep.sandwich_strict}};
    });

    CLI::App* compose = app.add_subcommand("compose", "generic incentive checks");
    compose->require_subcommand(1);
    CLI::App* checkic = compose->add_subcommand("check-ic", "run the full IC check on a case");
    add_lambda(checkic);
    checkic->add_option("--case", case_name, "crab or htlc")
        ->check(CLI::IsMember({"crab", "htlc"}));
    checkic->add_option("--T", T, "timelock / delay");
    checkic->add_option("--c", c_s, "crab collateral");
    add_htlc(checkic);
    checkic->callback([&] {
      auto lam = parse_lambda(lambda_s);
      Protocol proto;
      SettlementRules rules;
      ConflictSpec conflicts;
      if (case_name == "crab") {
        CrabParams p;
        p.T = T;
        p.v_A_l = parse_rational(vAl);
        p.v_B_l = parse_rational(vBl);
        p.v_A_o = parse_rational(vAo);
        p.v_B_o = parse_rational(vBo);
        p.c = parse_rational(c_s);
        p.v = parse_rational(v_s);
        validate(p);
        proto = crab_game(p);
        rules = crab_rules(p);
        conflicts = crab_conflicts(p);
      } else {
        HtlcParams p = htlc_params(T);
        proto = htlc_game(p);
        rules = htlc_rules(p);
        conflicts = htlc_conflicts(p);
      }
      CheckOptions opts;
      opts.max_block = 2;
      auto verdicts = check_ic(proto, lam, rules, conflicts, opts);
      bool holds = true;
      Json cases = Json::object();
      for (const auto& [key, v] : verdicts) {
        holds = holds && v.holds;
        const char* iw = v.iewds_status == ICVerdict::Iewds::Survives     ? "survives"
                         : v.iewds_status == ICVerdict::Iewds::Eliminated ? "eliminated"
                                                                          : "skipped";
        cases[key] = {{"holds", v.holds},
                      {"strict_failure", v.strict_failure},
                      {"iewds", iw}};
      }
      command = "compose.check-ic";
      result = {{"holds", holds}, {"cases", cases}};
    });

    // Global flags may trail the subcommand.
    std::function<void(CLI::App*)> enable_fallthrough = [&](CLI::App* a) {
      for (CLI::App* s : a->get_subcommands([](CLI::App*) { return true; })) {
        s->fallthrough();
        enable_fallthrough(s);
      }
    };
    enable_fallthrough(&app);

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
      app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
      out << app.help();
      res.out = out.str();
      return res;
    } catch (const CLI::RequiredError& e) {
      throw usage_error("MissingParameter", e.what());
    } catch (const CLI::ExtrasError& e) {
      throw usage_error("UnknownSubcommand", e.what());
    } catch (const CLI::ParseError& e) {
      throw usage_error("UsageError", e.what());
    }

    Json report;
    report["command"] = command;
    report["provenance"] = {{"tool", "chaingt"},
                            {"version", kVersion},
                            {"seed", seed},
                            {"args", args}};
    report["result"] = result;
    out << emit(report, format);
  } catch (const Error& e) {
    const char* kind = e.kind() == Error::Kind::Usage    ? "usage"
                       : e.kind() == Error::Kind::Domain ? "domain"
                                                         : "bound";
    Json ej;
    ej["error"] = {{"code", e.code()}, {"kind", kind}, {"message", e.what()}};
    err << ej.dump() << "\n";
    res.exit_code = e.kind() == Error::Kind::Usage    ? 1
                    : e.kind() == Error::Kind::Domain ? 2
                                                      : 3;
  } catch (const std::exception& e) {
    err << e.what() << "\n";
    res.exit_code = 1;
  }
  res.out = out.str();
  res.err = err.str();
  return res;
}

int main_entry(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  RunResult r = run(args);
  fputs(r.out.c_str(), stdout);
  fputs(r.err.c_str(), stderr);
  return r.exit_code;
}

}  // namespace cgt::cli
