#include "marketeq/io.hpp"

#include <cmath>
#include <fstream>
#include <initializer_list>
#include <set>
#include <sstream>

#include <json.hpp>

#include "marketeq/error.hpp"

namespace marketeq {

using nlohmann::json;

namespace {

[[noreturn]] void Schema(const std::string& where, const std::string& what) {
  throw Error(ErrorCode::kInvalidScenario, where + ": " + what);
}

void OnlyKeys(const json& obj, const std::string& where,
              std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) Schema(where, "expected an object");
  const std::set<std::string> keys(allowed.begin(), allowed.end());
  for (const auto& [key, value] : obj.items()) {
    if (!keys.contains(key)) Schema(where, "unknown field \"" + key + "\"");
  }
}

const json& Required(const json& obj, const std::string& where, const char* key) {
  const auto it = obj.find(key);
  if (it == obj.end()) Schema(where, std::string("missing field \"") + key + "\"");
  return *it;
}

double Number(const json& v, const std::string& where) {
  if (!v.is_number()) Schema(where, "expected a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) Schema(where, "expected a finite number");
  return d;
}

std::size_t Index(const json& v, const std::string& where) {
  if (!v.is_number_integer() || v.get<long long>() < 0) {
    Schema(where, "expected a nonnegative integer");
  }
  return v.get<std::size_t>();
}

std::vector<double> Numbers(const json& v, const std::string& where, bool allow_inf) {
  if (!v.is_array()) Schema(where, "expected an array");
  std::vector<double> out;
  out.reserve(v.size());
  for (std::size_t k = 0; k < v.size(); ++k) {
    const std::string at = where + "[" + std::to_string(k) + "]";
    if (allow_inf && v[k].is_string()) {
      if (v[k].get<std::string>() != "inf") Schema(at, "only the string \"inf\" is allowed");
      out.push_back(kInf);
    } else {
      out.push_back(Number(v[k], at));
    }
  }
  return out;
}

std::vector<std::size_t> Indices(const json& v, const std::string& where) {
  if (!v.is_array()) Schema(where, "expected an array");
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < v.size(); ++k) {
    out.push_back(Index(v[k], where + "[" + std::to_string(k) + "]"));
  }
  return out;
}

void CheckVersion(const json& doc, ErrorCode code) {
  const auto it = doc.find("format_version");
  if (it == doc.end()) return;
  if (!it->is_number_integer() || it->get<long long>() != kFormatVersion) {
    throw Error(code, "unsupported format_version");
  }
}

json Parse(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kIo, std::string("malformed JSON: ") + e.what());
  }
}

TechnologySpec ParseTechnology(const json& v, const std::string& where) {
  OnlyKeys(v, where, {"supply", "demand", "coeff"});
  TechnologySpec t;
  t.supply = Indices(Required(v, where, "supply"), where + ".supply");
  t.demand = Indices(Required(v, where, "demand"), where + ".demand");
  const json& coeff = Required(v, where, "coeff");
  if (!coeff.is_array()) Schema(where + ".coeff", "expected an array");
  for (std::size_t k = 0; k < coeff.size(); ++k) {
    const std::string at = where + ".coeff[" + std::to_string(k) + "]";
    if (!coeff[k].is_array() || coeff[k].size() != 3) Schema(at, "expected [s, j, a]");
    t.coeff.push_back({Index(coeff[k][0], at), Index(coeff[k][1], at),
                       Number(coeff[k][2], at)});
  }
  return t;
}

PricingMode ParsePricing(const json& v, const std::string& where) {
  if (!v.is_object()) Schema(where, "expected an object");
  const json& mode = Required(v, where, "mode");
  if (mode == "lp") {
    OnlyKeys(v, where, {"mode"});
    return LpPricing{};
  }
  if (mode == "regularized") {
    OnlyKeys(v, where, {"mode", "reference", "beta"});
    RegularizedPricing r;
    r.reference = Numbers(Required(v, where, "reference"), where + ".reference", false);
    r.beta = Number(Required(v, where, "beta"), where + ".beta");
    return r;
  }
  Schema(where + ".mode", "expected \"lp\" or \"regularized\"");
}

AgentSpec ParseAgent(const json& v, const std::string& where) {
  OnlyKeys(v, where, {"lower", "upper", "radius", "technology", "pricing"});
  AgentSpec a;
  a.lower = Numbers(Required(v, where, "lower"), where + ".lower", false);
  a.upper = Numbers(Required(v, where, "upper"), where + ".upper", false);
  a.radius = Numbers(Required(v, where, "radius"), where + ".radius", true);
  a.technology = ParseTechnology(Required(v, where, "technology"), where + ".technology");
  a.pricing = ParsePricing(Required(v, where, "pricing"), where + ".pricing");
  return a;
}

SolverConfig ParseSolver(const json& v) {
  OnlyKeys(v, "solver", {"sgp", "pcgm"});
  SolverConfig c;
  if (const auto it = v.find("sgp"); it != v.end()) {
    OnlyKeys(*it, "solver.sgp", {"theta0", "max_iter", "target_gap"});
    if (it->contains("theta0")) c.sgp.theta0 = Number((*it)["theta0"], "solver.sgp.theta0");
    if (it->contains("max_iter")) c.sgp.max_iter = Index((*it)["max_iter"], "solver.sgp.max_iter");
    if (it->contains("target_gap")) {
      c.sgp.target_gap = Number((*it)["target_gap"], "solver.sgp.target_gap");
    }
  }
  if (const auto it = v.find("pcgm"); it != v.end()) {
    const json& p = *it;
    OnlyKeys(p, "solver.pcgm",
             {"beta", "delta0", "delta_decay", "tau0", "tau_decay", "delta_min", "stage_cap",
              "iter_cap"});
    const auto real = [&](const char* key, double& out) {
      if (p.contains(key)) out = Number(p[key], std::string("solver.pcgm.") + key);
    };
    real("beta", c.pcgm.beta);
    real("delta0", c.pcgm.delta0);
    real("delta_decay", c.pcgm.delta_decay);
    real("tau0", c.pcgm.tau0);
    real("tau_decay", c.pcgm.tau_decay);
    real("delta_min", c.pcgm.delta_min);
    if (p.contains("stage_cap")) c.pcgm.stage_cap = Index(p["stage_cap"], "solver.pcgm.stage_cap");
    if (p.contains("iter_cap")) c.pcgm.iter_cap = Index(p["iter_cap"], "solver.pcgm.iter_cap");
  }
  return c;
}

json NumbersJson(std::span<const double> values, bool inf_as_string) {
  json out = json::array();
  for (double v : values) {
    if (inf_as_string && std::isinf(v) && v > 0) {
      out.push_back("inf");
    } else {
      out.push_back(v);
    }
  }
  return out;
}

json MatrixJson(const Matrix& x) {
  json out = json::array();
  for (std::size_t i = 0; i < x.rows(); ++i) out.push_back(NumbersJson(x.row(i), false));
  return out;
}

void Open(std::ifstream& in, const std::filesystem::path& path) {
  in.open(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
}

}  // namespace

Scenario ParseScenario(const std::string& text) {
  const json doc = Parse(text);
  OnlyKeys(doc, "scenario", {"format_version", "m", "n", "seed", "agents", "solver"});
  CheckVersion(doc, ErrorCode::kInvalidScenario);
  Scenario s;
  s.dims.agents = Index(Required(doc, "scenario", "m"), "m");
  s.dims.commodities = Index(Required(doc, "scenario", "n"), "n");
  s.seed = Required(doc, "scenario", "seed").is_number_unsigned()
               ? doc["seed"].get<std::uint64_t>()
               : Index(doc["seed"], "seed");
  const json& agents = Required(doc, "scenario", "agents");
  if (!agents.is_array()) Schema("agents", "expected an array");
  for (std::size_t i = 0; i < agents.size(); ++i) {
    s.agents.push_back(ParseAgent(agents[i], "agents[" + std::to_string(i) + "]"));
  }
  if (const auto it = doc.find("solver"); it != doc.end()) s.solver = ParseSolver(*it);
  CheckStructure(s);
  return s;
}

std::string FormatScenario(const Scenario& s) {
  json doc;
  doc["format_version"] = kFormatVersion;
  doc["m"] = s.m();
  doc["n"] = s.n();
  doc["seed"] = s.seed;
  json agents = json::array();
  for (const AgentSpec& a : s.agents) {
    json agent;
    agent["lower"] = NumbersJson(a.lower, false);
    agent["upper"] = NumbersJson(a.upper, false);
    agent["radius"] = NumbersJson(a.radius, true);
    json coeff = json::array();
    for (const auto& c : a.technology.coeff) {
      coeff.push_back(json::array({c.demand_commodity, c.supply_commodity, c.amount}));
    }
    agent["technology"] = {{"supply", a.technology.supply},
                           {"demand", a.technology.demand},
                           {"coeff", coeff}};
    if (const auto* r = std::get_if<RegularizedPricing>(&a.pricing)) {
      agent["pricing"] = {{"mode", "regularized"},
                          {"reference", NumbersJson(r->reference, false)},
                          {"beta", r->beta}};
    } else {
      agent["pricing"] = {{"mode", "lp"}};
    }
    agents.push_back(std::move(agent));
  }
  doc["agents"] = std::move(agents);
  const SgpConfig& g = s.solver.sgp;
  const PcgmConfig& p = s.solver.pcgm;
  doc["solver"] = {
      {"sgp", {{"theta0", g.theta0}, {"max_iter", g.max_iter}, {"target_gap", g.target_gap}}},
      {"pcgm",
       {{"beta", p.beta},
        {"delta0", p.delta0},
        {"delta_decay", p.delta_decay},
        {"tau0", p.tau0},
        {"tau_decay", p.tau_decay},
        {"delta_min", p.delta_min},
        {"stage_cap", p.stage_cap},
        {"iter_cap", p.iter_cap}}}};
  return doc.dump(2) + "\n";
}

Scenario LoadScenario(const std::filesystem::path& path) {
  return ParseScenario(ReadTextFile(path));
}

void SaveScenario(const std::filesystem::path& path, const Scenario& scenario) {
  WriteTextFile(path, FormatScenario(scenario));
}

std::string FormatSolution(const ConvergenceTrace& trace) {
  json doc;
  doc["format_version"] = kFormatVersion;
  doc["method"] = std::string(ToString(trace.method));
  doc["experimental"] = trace.experimental;
  doc["status"] = std::string(ToString(trace.status));
  doc["converged"] = trace.converged();
  doc["state"] = MatrixJson(trace.final_state);
  doc["lambda"] = NumbersJson(trace.final_prices.lambda, false);
  json degenerate = json::array();
  for (char d : trace.final_prices.degenerate) degenerate.push_back(d != 0);
  doc["lambda_degenerate"] = std::move(degenerate);
  doc["final_gap"] = trace.final_gap;
  doc["objective"] = trace.final_objective;
  doc["iterations"] = trace.records.size();
  doc["steps"] = trace.steps;
  doc["stages"] = trace.stages;
  return doc.dump(2) + "\n";
}

MarketState ParseState(const std::string& text) {
  const json doc = Parse(text);
  const json* rows = &doc;
  if (doc.is_object()) {
    CheckVersion(doc, ErrorCode::kIo);
    const auto it = doc.find("state");
    if (it == doc.end()) throw Error(ErrorCode::kIo, "state document has no \"state\" field");
    rows = &*it;
  }
  if (!rows->is_array() || rows->empty() || !(*rows)[0].is_array() || (*rows)[0].empty()) {
    throw Error(ErrorCode::kIo, "state must be a nonempty array of rows");
  }
  const std::size_t m = rows->size();
  const std::size_t n = (*rows)[0].size();
  MarketState x(m, n);
  for (std::size_t i = 0; i < m; ++i) {
    const json& row = (*rows)[i];
    if (!row.is_array() || row.size() != n) throw Error(ErrorCode::kIo, "ragged state rows");
    for (std::size_t j = 0; j < n; ++j) {
      if (!row[j].is_number()) throw Error(ErrorCode::kIo, "state entries must be numbers");
      x(i, j) = row[j].get<double>();
      if (!std::isfinite(x(i, j))) throw Error(ErrorCode::kIo, "state entries must be finite");
    }
  }
  return x;
}

MarketState LoadState(const std::filesystem::path& path) {
  return ParseState(ReadTextFile(path));
}

std::string FormatState(const MarketState& x) {
  json doc;
  doc["format_version"] = kFormatVersion;
  doc["state"] = MatrixJson(x);
  return doc.dump(2) + "\n";
}

std::string ReadTextFile(const std::filesystem::path& path) {
  std::ifstream in;
  Open(in, path);
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw Error(ErrorCode::kIo, "failed reading " + path.string());
  return buf.str();
}

void WriteTextFile(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out << text;
  out.flush();
  if (!out) throw Error(ErrorCode::kIo, "failed writing " + path.string());
}

}  // namespace marketeq
