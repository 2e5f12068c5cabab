// marketeq command-line interface. Machine output goes to stdout, human
// diagnostics to stderr.
//
// Exit codes: 0 success, 1 tolerance not met, 2 usage or mode mismatch,
// 3 I/O failure, 4 numerical failure.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <iterator>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "marketeq/balance.hpp"
#include "marketeq/error.hpp"
#include "marketeq/io.hpp"
#include "marketeq/model.hpp"
#include "marketeq/pricing.hpp"
#include "marketeq/simd.hpp"
#include "marketeq/solvers.hpp"
#include "marketeq/verify.hpp"

namespace {

using marketeq::Error;
using marketeq::ErrorCode;
using nlohmann::json;

enum Exit : int { kOk = 0, kNotMet = 1, kUsage = 2, kIoFailure = 3, kNumeric = 4 };

int ExitFor(ErrorCode code) {
  switch (code) {
    case ErrorCode::kIo:
      return kIoFailure;
    case ErrorCode::kNumericalFailure:
    case ErrorCode::kOracleNotConverged:
    case ErrorCode::kTooLargeForOracle:
      return kNumeric;
    default:
      return kUsage;
  }
}

std::string ReadInput(const std::string& path) {
  if (!path.empty() && path != "-") return marketeq::ReadTextFile(path);
  std::string text((std::istreambuf_iterator<char>(std::cin)), std::istreambuf_iterator<char>());
  if (std::cin.bad()) throw Error(ErrorCode::kIo, "failed reading stdin");
  return text;
}

void WriteOutput(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    std::cout.flush();
    if (!std::cout) throw Error(ErrorCode::kIo, "failed writing stdout");
  } else {
    marketeq::WriteTextFile(path, text);
  }
}

json ParseJson(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kIo, std::string("malformed JSON input: ") + e.what());
  }
}

[[noreturn]] void BadInput(const std::string& what) {
  throw Error(ErrorCode::kInvalidParams, what);
}

std::vector<double> Vec(const json& v, const char* name) {
  if (!v.is_array()) BadInput(std::string(name) + " must be an array of numbers");
  std::vector<double> out;
  for (const auto& e : v) {
    if (!e.is_number()) BadInput(std::string(name) + " must be an array of numbers");
    out.push_back(e.get<double>());
  }
  return out;
}

marketeq::Matrix Mat(const json& v, const char* name) {
  if (!v.is_array() || v.empty()) BadInput(std::string(name) + " must be a nonempty matrix");
  const std::size_t cols = v[0].is_array() ? v[0].size() : 0;
  marketeq::Matrix out(v.size(), cols);
  for (std::size_t i = 0; i < v.size(); ++i) {
    const auto row = Vec(v[i], name);
    if (row.size() != cols) BadInput(std::string(name) + " has ragged rows");
    for (std::size_t j = 0; j < cols; ++j) out(i, j) = row[j];
  }
  return out;
}

const json& Field(const json& obj, const char* key) {
  if (!obj.is_object() || !obj.contains(key)) {
    BadInput(std::string("input needs field \"") + key + "\"");
  }
  return obj.at(key);
}

double Real(const json& obj, const char* key) {
  const json& v = Field(obj, key);
  if (!v.is_number()) BadInput(std::string(key) + " must be a number");
  return v.get<double>();
}

json MatrixJson(const marketeq::Matrix& x) {
  json out = json::array();
  for (std::size_t i = 0; i < x.rows(); ++i) {
    out.push_back(std::vector<double>(x.row(i).begin(), x.row(i).end()));
  }
  return out;
}

json PricesJson(const marketeq::ClearingPrices& prices) {
  json degenerate = json::array();
  for (char d : prices.degenerate) degenerate.push_back(d != 0);
  return {{"lambda", prices.lambda}, {"lambda_degenerate", degenerate}};
}

// ---------------------------------------------------------------------------

struct GenArgs {
  std::uint64_t seed = 0;
  std::size_t agents = 0;
  std::size_t commodities = 0;
  std::string mode = "lp";
  std::string radius = "inf";
  std::string out;
};

int RunGen(const GenArgs& a) {
  marketeq::GeneratorParams params;
  params.mode = a.mode == "lp" ? marketeq::GeneratorMode::kLp
                               : marketeq::GeneratorMode::kRegularized;
  if (a.radius == "inf") {
    params.radius = marketeq::kInf;
  } else {
    try {
      std::size_t used = 0;
      params.radius = std::stod(a.radius, &used);
      if (used != a.radius.size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      BadInput("--radius must be a number or inf");
    }
  }
  const marketeq::Scenario s =
      marketeq::RandomScenario(a.seed, a.agents, a.commodities, params);
  WriteOutput(a.out, marketeq::FormatScenario(s));
  return kOk;
}

struct SolveArgs {
  std::string scenario;
  std::string method = "pcgm";
  std::string trace;
  std::string out;
  std::string x0;
  bool parallel = false;
  std::optional<double> theta0, target_gap, beta, delta0, delta_decay, tau0, tau_decay,
      delta_min;
  std::optional<std::size_t> max_iter, stage_cap, iter_cap;
};

int RunSolve(const SolveArgs& a) {
  const marketeq::Scenario s = marketeq::LoadScenario(a.scenario);
  marketeq::SgpConfig sgp = s.solver.sgp;
  marketeq::PcgmConfig pcgm = s.solver.pcgm;
  if (a.theta0) sgp.theta0 = *a.theta0;
  if (a.target_gap) sgp.target_gap = *a.target_gap;
  if (a.max_iter) sgp.max_iter = *a.max_iter;
  if (a.beta) pcgm.beta = *a.beta;
  if (a.delta0) pcgm.delta0 = *a.delta0;
  if (a.delta_decay) pcgm.delta_decay = *a.delta_decay;
  if (a.tau0) pcgm.tau0 = *a.tau0;
  if (a.tau_decay) pcgm.tau_decay = *a.tau_decay;
  if (a.delta_min) pcgm.delta_min = *a.delta_min;
  if (a.stage_cap) pcgm.stage_cap = *a.stage_cap;
  if (a.iter_cap) pcgm.iter_cap = *a.iter_cap;

  const marketeq::MarketState x0 =
      a.x0.empty() ? marketeq::MarketState(s.m(), s.n()) : marketeq::LoadState(a.x0);
  marketeq::RunOptions options;
  options.parallel = a.parallel;

  marketeq::ConvergenceTrace trace;
  if (a.method == "sgp") {
    trace = marketeq::SolveSgp(s, sgp, x0, options);
  } else if (a.method == "pcgm") {
    trace = marketeq::SolvePcgm(s, pcgm, x0, options);
  } else {
    std::cerr << "warning: fpi is experimental and carries no convergence guarantee\n";
    trace = marketeq::SolveFpi(s, sgp, x0, options);
  }

  if (!a.trace.empty()) {
    std::ostringstream csv;
    marketeq::WriteTraceCsv(csv, trace);
    marketeq::WriteTextFile(a.trace, csv.str());
  }
  WriteOutput(a.out, marketeq::FormatSolution(trace));
  std::cerr << a.method << ": " << marketeq::ToString(trace.status) << " after "
            << trace.records.size() << " records, gap " << trace.final_gap << "\n";
  return trace.converged() ? kOk : kNotMet;
}

struct CheckArgs {
  std::string scenario;
  std::string state;
  double eps = 1e-5;
  bool parallel = false;
};

int RunCheck(const CheckArgs& a) {
  const marketeq::Scenario s = marketeq::LoadScenario(a.scenario);
  const marketeq::MarketState x = marketeq::LoadState(a.state);
  if (x.rows() != s.m() || x.cols() != s.n()) {
    throw Error(ErrorCode::kIo, "state shape does not match the scenario");
  }
  const marketeq::CertificateReport r = marketeq::CheckQviSolution(x, s, a.eps, a.parallel);
  json doc = PricesJson(r.lambda);
  doc["format_version"] = marketeq::kFormatVersion;
  doc["eps"] = r.eps;
  doc["passed"] = r.passed;
  doc["feasibility_violation"] = r.feasibility_violation;
  doc["qvi_gap"] = r.qvi_gap;
  doc["max_partial_violation"] = r.max_partial_violation;
  doc["max_branch_violation"] = r.max_branch_violation;
  doc["partial_violations"] = MatrixJson(r.partial_violations);
  doc["branch_violations"] = MatrixJson(r.branch_violations);
  doc["prices"] = MatrixJson(r.prices);
  WriteOutput("", doc.dump(2) + "\n");
  if (!r.passed) std::cerr << "certificate failed at eps " << a.eps << "\n";
  return r.passed ? kOk : kNotMet;
}

// {"z": [..], "lower": [..], "upper": [..]} for one commodity, or m x n
// matrices for a whole market.
int RunProject(const std::string& in, bool parallel) {
  const json doc = ParseJson(ReadInput(in));
  const json& z = Field(doc, "z");
  json out;
  if (z.is_array() && !z.empty() && z[0].is_array()) {
    const marketeq::Matrix zm = Mat(z, "z");
    const marketeq::Matrix lo = Mat(Field(doc, "lower"), "lower");
    const marketeq::Matrix hi = Mat(Field(doc, "upper"), "upper");
    if (lo.rows() != zm.rows() || lo.cols() != zm.cols() || hi.rows() != zm.rows() ||
        hi.cols() != zm.cols()) {
      BadInput("z, lower and upper must have the same shape");
    }
    const auto boxes = marketeq::CommodityBoxes(lo, hi);
    const auto proj = marketeq::ProjectMarket(zm, boxes, parallel);
    out = PricesJson(proj.multipliers);
    out["y"] = MatrixJson(proj.y);
  } else {
    const auto zv = Vec(z, "z");
    marketeq::CommodityBox box{Vec(Field(doc, "lower"), "lower"),
                               Vec(Field(doc, "upper"), "upper")};
    if (box.lower.size() != zv.size() || box.upper.size() != zv.size()) {
      BadInput("z, lower and upper must have the same length");
    }
    const auto proj = marketeq::ProjectBalanced(zv, box);
    out = {{"y", proj.y}, {"lambda", proj.lambda}, {"lambda_degenerate", proj.degenerate}};
  }
  WriteOutput("", out.dump(2) + "\n");
  return kOk;
}

marketeq::TechnologySpec Technology(const json& doc) {
  marketeq::TechnologySpec t;
  if (!doc.contains("technology")) return t;
  const json& tech = doc.at("technology");
  const auto indices = [&](const char* key) {
    std::vector<std::size_t> out;
    if (!tech.contains(key)) return out;
    for (const auto& v : tech.at(key)) {
      if (!v.is_number_integer() || v.get<long long>() < 0) BadInput("bad technology index");
      out.push_back(v.get<std::size_t>());
    }
    return out;
  };
  t.supply = indices("supply");
  t.demand = indices("demand");
  if (tech.contains("coeff")) {
    for (const auto& c : tech.at("coeff")) {
      if (!c.is_array() || c.size() != 3 || !c[0].is_number_integer() ||
          !c[1].is_number_integer() || !c[2].is_number()) {
        BadInput("coeff entries must be [s, j, a]");
      }
      t.coeff.push_back({c[0].get<std::size_t>(), c[1].get<std::size_t>(), c[2].get<double>()});
    }
  }
  return t;
}

// {"c": [..], "technology": {..}, "pricing": {"mode": ..}} -> price and value.
int RunPrice(const std::string& in) {
  const json doc = ParseJson(ReadInput(in));
  const auto c = Vec(Field(doc, "c"), "c");
  if (c.empty()) BadInput("c must be nonempty");
  marketeq::AgentSpec agent;
  agent.technology = Technology(doc);
  agent.pricing = marketeq::LpPricing{};
  if (doc.contains("pricing")) {
    const json& p = doc.at("pricing");
    const json& mode = Field(p, "mode");
    if (mode == "regularized") {
      marketeq::RegularizedPricing r;
      r.reference = Vec(Field(p, "reference"), "reference");
      r.beta = Real(p, "beta");
      if (r.reference.size() != c.size()) BadInput("reference must match c in length");
      if (!(r.beta > 0.0)) BadInput("beta must be positive");
      agent.pricing = r;
    } else if (mode != "lp") {
      BadInput("pricing mode must be lp or regularized");
    }
  }
  const marketeq::AgentPricer pricer(agent, c.size());
  const marketeq::ValueReport v = pricer.Evaluate(c);
  const json out = {{"mode", pricer.regularized() ? "regularized" : "lp"},
                    {"price", v.gradient},
                    {"value", v.value},
                    {"unique", v.tight}};
  WriteOutput("", out.dump(2) + "\n");
  return kOk;
}

// {"traders": [{"mu","rho","lower","upper"}], "buyers": [{"nu","sigma","lower","upper"}]}
int RunEquilibrium1d(const std::string& in) {
  const json doc = ParseJson(ReadInput(in));
  marketeq::AffinePriceSpec spec;
  for (const auto& t : Field(doc, "traders")) {
    spec.traders.push_back({Real(t, "mu"), Real(t, "rho"), Real(t, "lower"), Real(t, "upper")});
  }
  for (const auto& b : Field(doc, "buyers")) {
    spec.buyers.push_back({Real(b, "nu"), Real(b, "sigma"), Real(b, "lower"), Real(b, "upper")});
  }
  const marketeq::SingleEquilibrium eq = marketeq::SolveSingleCommodity(spec);
  std::vector<double> tp, bp;
  for (std::size_t i = 0; i < spec.traders.size(); ++i) {
    tp.push_back(marketeq::TraderPrice(spec.traders[i], eq.x[i]));
  }
  for (std::size_t j = 0; j < spec.buyers.size(); ++j) {
    bp.push_back(marketeq::BuyerPrice(spec.buyers[j], eq.y[j]));
  }
  const double violation = marketeq::CheckSingleEquilibrium(
      eq.x, eq.y, eq.lambda, tp, bp, marketeq::SegmentsOf(spec), 1e-9);
  const json out = {{"x", eq.x},
                    {"y", eq.y},
                    {"lambda", eq.lambda},
                    {"lambda_low", eq.lambda_low},
                    {"lambda_high", eq.lambda_high},
                    {"price_tie", eq.price_tie},
                    {"volume_tie", eq.volume_tie},
                    {"max_violation", violation}};
  WriteOutput("", out.dump(2) + "\n");
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-commodity market equilibrium solver"};
  app.require_subcommand(1);
  std::string isa = "auto";
  app.add_option("--isa", isa, "Vector kernel set")
      ->check(CLI::IsMember({"auto", "scalar", "avx2"}));

  GenArgs gen;
  auto* gen_cmd = app.add_subcommand("gen", "Generate a random scenario");
  gen_cmd->add_option("--seed", gen.seed)->required();
  gen_cmd->add_option("--agents", gen.agents)->required();
  gen_cmd->add_option("--commodities", gen.commodities)->required();
  gen_cmd->add_option("--mode", gen.mode)->check(CLI::IsMember({"lp", "regularized"}));
  gen_cmd->add_option("--radius", gen.radius, "Window radius, a number or inf");
  gen_cmd->add_option("--out", gen.out, "Output file (default stdout)");

  SolveArgs solve;
  auto* solve_cmd = app.add_subcommand("solve", "Run a dynamic process on a scenario");
  solve_cmd->add_option("--scenario", solve.scenario)->required();
  solve_cmd->add_option("--method", solve.method)
      ->check(CLI::IsMember({"sgp", "pcgm", "fpi"}));
  solve_cmd->add_option("--trace", solve.trace, "Trace CSV file");
  solve_cmd->add_option("--out", solve.out, "Solution JSON file (default stdout)");
  solve_cmd->add_option("--x0", solve.x0, "Initial state JSON");
  solve_cmd->add_flag("--parallel", solve.parallel);
  solve_cmd->add_option("--theta0", solve.theta0);
  solve_cmd->add_option("--max-iter", solve.max_iter);
  solve_cmd->add_option("--target-gap", solve.target_gap);
  solve_cmd->add_option("--beta", solve.beta);
  solve_cmd->add_option("--delta0", solve.delta0);
  solve_cmd->add_option("--delta-decay", solve.delta_decay);
  solve_cmd->add_option("--tau0", solve.tau0);
  solve_cmd->add_option("--tau-decay", solve.tau_decay);
  solve_cmd->add_option("--delta-min", solve.delta_min);
  solve_cmd->add_option("--stage-cap", solve.stage_cap);
  solve_cmd->add_option("--iter-cap", solve.iter_cap);

  CheckArgs check;
  auto* check_cmd = app.add_subcommand("check", "Certify a market state");
  check_cmd->add_option("--scenario", check.scenario)->required();
  check_cmd->add_option("--state", check.state)->required();
  check_cmd->add_option("--eps", check.eps)->check(CLI::PositiveNumber);
  check_cmd->add_flag("--parallel", check.parallel);

  std::string project_in;
  bool project_parallel = false;
  auto* project_cmd = app.add_subcommand("project", "Project onto the balanced set (JSON stdin)");
  project_cmd->add_option("--in", project_in, "Input file (default stdin)");
  project_cmd->add_flag("--parallel", project_parallel);

  std::string price_in;
  auto* price_cmd = app.add_subcommand("price", "Evaluate a price oracle (JSON stdin)");
  price_cmd->add_option("--in", price_in, "Input file (default stdin)");

  std::string eq_in;
  auto* eq_cmd =
      app.add_subcommand("equilibrium1d", "Solve a single-commodity market (JSON stdin)");
  eq_cmd->add_option("--in", eq_in, "Input file (default stdin)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  }

  try {
    if (isa == "scalar") marketeq::simd::SetActive(marketeq::simd::Isa::kScalar);
    if (isa == "avx2" &&
        marketeq::simd::SetActive(marketeq::simd::Isa::kAvx2) != marketeq::simd::Isa::kAvx2) {
      std::cerr << "error: avx2 kernels are not available on this CPU\n";
      return kUsage;
    }
    if (*gen_cmd) return RunGen(gen);
    if (*solve_cmd) return RunSolve(solve);
    if (*check_cmd) return RunCheck(check);
    if (*project_cmd) return RunProject(project_in, project_parallel);
    if (*price_cmd) return RunPrice(price_in);
    if (*eq_cmd) return RunEquilibrium1d(eq_in);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return ExitFor(e.code());
  } catch (const json::exception& e) {
    std::cerr << "error: malformed input: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kNumeric;
  }
  return kUsage;
}
