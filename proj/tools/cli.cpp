// Copyright 2026 The Mushy Authors
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "cli.hpp"

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "mushy/experiments.hpp"
#include "mushy/lattice.hpp"
#include "mushy/limit_flow.hpp"
#include "mushy/oracle.hpp"
#include "mushy/params.hpp"
#include "mushy/rational.hpp"
#include "mushy/structured_flow.hpp"

namespace mushy::cli {
namespace {

using nlohmann::json;

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  std::string command;
  std::string alpha, beta, gamma, eps, tau;
  std::string L1, L2;
  int steps = 1000;
  double T = 0;
  double dt = 1e-4;
  std::string eps_list;
  std::string mode = "closed";
  std::string arith = "exact";
  std::string condo = "loose";
  std::string tie_policy = "lex";
  int collar = 1;
  int width = 2;
  int height = 2;
  int box = 5;
  int probes = 3000;
  double exclusion = 5e-4;
  bool cross_check = false;
  bool prune = false;
  std::string input;
  std::string out;
  std::string config;
  int workers = 1;
};

int default_workers() {
  if (const char* env = std::getenv("MUSHY_WORKERS")) {
    try {
      const int w = std::stoi(env);
      if (w >= 1) return w;
    } catch (const std::exception&) {
    }
  }
  return 1;
}

// Config file keys mirror the long flag names.
void apply_config_file(const std::string& path, RunConfig& c) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("config file is not valid JSON: " + std::string(e.what()));
  }
  if (!j.is_object()) throw ConfigError("config file must hold a JSON object");
  auto str = [&](const char* key, std::string& dst) {
    if (!j.contains(key)) return;
    dst = j.at(key).is_string() ? j.at(key).get<std::string>() : j.at(key).dump();
  };
  auto num = [&](const char* key, auto& dst) {
    if (!j.contains(key)) return;
    if (!j.at(key).is_number()) throw ConfigError(std::string("config key '") + key + "' must be a number");
    dst = j.at(key).get<std::remove_reference_t<decltype(dst)>>();
  };
  str("command", c.command);
  str("alpha", c.alpha);
  str("beta", c.beta);
  str("gamma", c.gamma);
  str("eps", c.eps);
  str("tau", c.tau);
  str("L1", c.L1);
  str("L2", c.L2);
  str("eps-list", c.eps_list);
  str("mode", c.mode);
  str("arith", c.arith);
  str("condo", c.condo);
  str("tie-policy", c.tie_policy);
  str("input", c.input);
  str("out", c.out);
  num("steps", c.steps);
  num("T", c.T);
  num("dt", c.dt);
  num("collar", c.collar);
  num("width", c.width);
  num("height", c.height);
  num("box", c.box);
  num("probes", c.probes);
  num("exclusion", c.exclusion);
  num("workers", c.workers);
  if (j.contains("cross-check")) c.cross_check = j.at("cross-check").get<bool>();
  if (j.contains("prune")) c.prune = j.at("prune").get<bool>();
}

Rational need_rational(const std::string& text, const char* name) {
  if (text.empty()) throw ConfigError(std::string("--") + name + " is required");
  try {
    return parse_rational(text);
  } catch (const ParseError& e) {
    throw ConfigError(std::string("--") + name + ": " + e.what());
  }
}

Params make_params(const RunConfig& c, bool need_eps) {
  const Rational a = need_rational(c.alpha, "alpha");
  const Rational b = need_rational(c.beta, "beta");
  std::optional<Rational> g, e, t;
  if (!c.gamma.empty()) g = need_rational(c.gamma, "gamma");
  if (!c.eps.empty()) e = need_rational(c.eps, "eps");
  if (!c.tau.empty()) t = need_rational(c.tau, "tau");
  try {
    if (e && t) {
      Params p = Params::make(a, b, *e, *t);
      if (g && *g != p.gamma) {
        throw ConfigError("inconsistent gamma: tau/eps = " + to_string(p.gamma) + " but --gamma " + to_string(*g));
      }
      return p;
    }
    if (e && g) return Params::with_gamma(a, b, *e, *g);
    if (t && g) return Params::make(a, b, Rational(*t / *g), *t);
    if (g && !need_eps) return Params::with_gamma(a, b, 1, *g);
  } catch (const InvalidParams& ex) {
    throw ConfigError(ex.what());
  }
  throw ConfigError(need_eps ? "give two of --eps, --tau, --gamma" : "give --gamma (or --eps and --tau)");
}

std::string extension(const std::string& path) {
  const auto dot = path.find_last_of('.');
  const auto slash = path.find_last_of('/');
  if (dot == std::string::npos || (slash != std::string::npos && dot < slash)) return "";
  return path.substr(dot);
}

// Replaces every {"num", "den"} object by its decimal value.
json to_float(const json& j) {
  if (j.is_object()) {
    if (j.size() == 2 && j.contains("num") && j.contains("den")) return to_double(rational_from_json(j));
    json o = json::object();
    for (auto it = j.begin(); it != j.end(); ++it) o[it.key()] = to_float(it.value());
    return o;
  }
  if (j.is_array()) {
    json a = json::array();
    for (const auto& e : j) a.push_back(to_float(e));
    return a;
  }
  return j;
}

struct Emitter {
  const RunConfig& cfg;
  std::ostream& out;

  std::string format() const {
    if (cfg.out.empty()) return ".json";
    const std::string ext = extension(cfg.out);
    if (ext != ".json" && ext != ".csv" && ext != ".md") {
      throw ConfigError("output extension must be .json, .csv or .md: " + cfg.out);
    }
    return ext;
  }

  void write(const std::string& text) const {
    if (cfg.out.empty()) {
      out << text;
      return;
    }
    std::ofstream f(cfg.out, std::ios::binary);
    if (!f) throw ConfigError("cannot write " + cfg.out);
    f << text;
  }

  void write_json(const json& j) const { write((cfg.arith == "float" ? to_float(j) : j).dump(2) + "\n"); }
};

void require_format(const std::string& fmt, std::initializer_list<const char*> allowed) {
  for (const char* a : allowed) {
    if (fmt == a) return;
  }
  throw ConfigError("output format " + fmt + " is not available for this command");
}

flow::Mode mode_of(const RunConfig& c) { return c.mode == "direct" ? flow::Mode::Direct : flow::Mode::ClosedForm; }

int cmd_thresholds(const RunConfig& c, const Emitter& em) {
  const Params p = make_params(c, false);
  const std::string fmt = em.format();
  if (fmt == ".md") {
    experiments::ReportInputs in;
    in.threshold_sets.emplace_back("given", p);
    em.write(experiments::markdown_report(in));
    return kOk;
  }
  json j = flow::to_json(flow::thresholds(p));
  j["four_alpha_gamma"] = to_json(p.four_alpha_gamma());
  j["pinning_threshold"] = limit::pinning_threshold(p);
  if (fmt == ".csv") {
    std::ostringstream os;
    os << "key,value\n";
    for (auto it = j.begin(); it != j.end(); ++it) {
      const json v = it.value();
      std::string s;
      if (v.is_object() && v.contains("num")) {
        s = to_string(rational_from_json(v));
      } else if (v.is_string()) {
        s = v.get<std::string>();
      } else {
        s = v.dump();
      }
      os << it.key() << ',' << s << '\n';
    }
    em.write(os.str());
    return kOk;
  }
  em.write_json(j);
  return kOk;
}

int cmd_simulate_discrete(const RunConfig& c, const Emitter& em) {
  const Params p = make_params(c, true);
  const Rational L1 = need_rational(c.L1, "L1");
  const Rational L2 = need_rational(c.L2, "L2");
  if (c.steps < 1) throw ConfigError("--steps must be at least 1");
  flow::EvolveOptions eo;
  eo.step.mode = mode_of(c);
  eo.step.workers = c.workers;
  eo.step.cross_check = c.cross_check;
  eo.condo = c.condo == "strict" ? flow::CondoMode::Strict : flow::CondoMode::Loose;
  flow::Evolution ev;
  try {
    ev = flow::evolve(L1, L2, p, c.steps, eo);
  } catch (const flow::ConfigError& e) {
    throw ConfigError(e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  const std::string fmt = em.format();
  require_format(fmt, {".json", ".csv"});
  if (fmt == ".csv") {
    em.write(flow::trace_csv(ev));
  } else {
    em.write_json(flow::trace_json(ev, p));
  }
  bool violated = !ev.all_localized;
  for (const auto& s : ev.steps) {
    if (s.outcome.modes_agree && !*s.outcome.modes_agree) violated = true;
  }
  return violated ? kHypothesisViolation : kOk;
}

int cmd_simulate_limit(const RunConfig& c, const Emitter& em) {
  const Params p = make_params(c, false);
  const double L1 = to_double(need_rational(c.L1, "L1"));
  const double L2 = to_double(need_rational(c.L2, "L2"));
  if (!(c.T > 0) || !(c.dt > 0)) throw ConfigError("--T and --dt must be positive");
  limit::LimitTrace tr;
  try {
    tr = limit::integrate({L1, L2}, p, c.T, c.dt);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  const std::string fmt = em.format();
  require_format(fmt, {".json", ".csv"});
  if (fmt == ".csv") {
    em.write(limit::trace_csv(tr));
  } else {
    em.write_json(limit::trace_json(tr));
  }
  return kOk;
}

lattice::DiscreteSet load_input_set(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    if (extension(path) == ".json") return lattice::set_from_json(json::parse(ss.str()));
    return lattice::set_from_text(ss.str());
  } catch (const std::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

int cmd_oracle(const RunConfig& c, const Emitter& em) {
  const Params p = make_params(c, true);
  if (c.width < 0 || c.height < 0) throw ConfigError("--width and --height must be nonnegative");
  const lattice::DiscreteSet prev =
      c.input.empty() ? lattice::DiscreteSet::from_rect({0, c.width, 0, c.height}) : load_input_set(c.input);
  oracle::OracleOptions oo;
  oo.collar = c.collar;
  oo.prune = c.prune;
  oo.workers = c.workers;
  oracle::OracleReport r;
  try {
    r = oracle::exhaustive_minimize(prev, p, oo);
  } catch (const oracle::SearchSpaceTooLarge& e) {
    throw ConfigError(e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  const std::string fmt = em.format();
  require_format(fmt, {".json"});
  em.write_json(oracle::to_json(r));
  return r.structure_ok && r.subset_ok && r.matches_structured ? kOk : kHypothesisViolation;
}

int cmd_algebra_check(const RunConfig& c, const Emitter& em) {
  const Params p = make_params(c, true);
  const Rational L1 = need_rational(c.L1, "L1");
  const Rational L2 = need_rational(c.L2, "L2");
  if (L1 <= 0 || L2 <= 0) throw ConfigError("side lengths must be positive");
  experiments::AlgebraOptions ao;
  ao.hmax = ao.kmax = c.box;
  const auto r = experiments::algebra_check(p, L2, L1, ao);
  const std::string fmt = em.format();
  require_format(fmt, {".json", ".md"});
  if (fmt == ".md") {
    experiments::ReportInputs in;
    in.algebra.emplace_back("L1=" + c.L1 + " L2=" + c.L2, r);
    em.write(experiments::markdown_report(in));
  } else {
    em.write_json(experiments::to_json(r));
  }
  return r.max_discrepancy == 0 ? kOk : kHypothesisViolation;
}

int cmd_convergence(const RunConfig& c, const Emitter& em) {
  const Rational a = need_rational(c.alpha, "alpha");
  const Rational b = need_rational(c.beta, "beta");
  const Rational g = need_rational(c.gamma, "gamma");
  const Rational L1 = need_rational(c.L1, "L1");
  const Rational L2 = need_rational(c.L2, "L2");
  if (c.eps_list.empty()) throw ConfigError("--eps-list is required");
  if (!(c.T > 0)) throw ConfigError("--T must be positive");
  std::vector<Rational> eps;
  std::stringstream ss(c.eps_list);
  std::string item;
  while (std::getline(ss, item, ',')) eps.push_back(need_rational(item, "eps-list"));
  experiments::ConvergenceOptions co;
  co.probes = c.probes;
  co.exclusion = c.exclusion;
  co.dt = c.dt;
  co.mode = mode_of(c);
  co.workers = c.workers;
  experiments::ConvergenceTable t;
  try {
    t = experiments::convergence_run(L1, L2, a, b, g, eps, c.T, co);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  const std::string fmt = em.format();
  if (fmt == ".csv") {
    em.write(experiments::convergence_csv(t));
  } else if (fmt == ".md") {
    experiments::ReportInputs in;
    in.convergence = t;
    em.write(experiments::markdown_report(in));
  } else {
    em.write_json(experiments::to_json(t));
  }
  return kOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  RunConfig cfg;
  cfg.workers = default_workers();

  CLI::App app{"Minimizing-movement simulator for lattice sets with weak inclusions"};
  app.add_option("command", cfg.command, "simulate-discrete | simulate-limit | oracle | algebra-check | convergence | thresholds");
  app.add_option("--alpha", cfg.alpha, "weak coupling (p/q or decimal)");
  app.add_option("--beta", cfg.beta, "strong coupling");
  app.add_option("--gamma", cfg.gamma, "tau / eps");
  app.add_option("--eps", cfg.eps, "lattice spacing");
  app.add_option("--tau", cfg.tau, "time step");
  app.add_option("--L1", cfg.L1, "horizontal side length");
  app.add_option("--L2", cfg.L2, "vertical side length");
  app.add_option("--steps", cfg.steps, "maximum number of discrete steps");
  app.add_option("--T", cfg.T, "final time");
  app.add_option("--dt", cfg.dt, "limit integrator window");
  app.add_option("--eps-list", cfg.eps_list, "comma separated decreasing eps values");
  app.add_option("--mode", cfg.mode)->check(CLI::IsMember({"direct", "closed"}));
  app.add_option("--arith", cfg.arith, "exact keeps rationals in the output, float prints decimals")
      ->check(CLI::IsMember({"exact", "float"}));
  app.add_option("--condo", cfg.condo)->check(CLI::IsMember({"strict", "loose"}));
  app.add_option("--tie-policy", cfg.tie_policy)->check(CLI::IsMember({"lex"}));
  app.add_option("--collar", cfg.collar, "oracle ring width");
  app.add_option("--width", cfg.width, "oracle rectangle extent along i1");
  app.add_option("--height", cfg.height, "oracle rectangle extent along i2");
  app.add_option("--input", cfg.input, "oracle previous set (.json or text)");
  app.add_option("--box", cfg.box, "algebra-check index bound");
  app.add_option("--probes", cfg.probes, "convergence probe count");
  app.add_option("--exclusion", cfg.exclusion, "convergence event exclusion radius");
  app.add_flag("--cross-check", cfg.cross_check, "run both step modes and compare");
  app.add_flag("--prune", cfg.prune, "oracle branch and bound");
  app.add_option("--out", cfg.out, "output file; format from extension (.json, .csv, .md)");
  app.add_option("--workers", cfg.workers, "worker threads (default $MUSHY_WORKERS or 1)");
  app.add_option("--config", cfg.config, "JSON file with the same keys as the flags");

  // The config file provides defaults that explicit flags override.
  for (int i = 1; i + 1 < argc; ++i) {
    if (std::string(argv[i]) == "--config") cfg.config = argv[i + 1];
  }
  try {
    if (!cfg.config.empty()) apply_config_file(cfg.config, cfg);
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kInvalidConfig;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kInvalidConfig;
  }

  if (cfg.workers < 1) {
    err << "error: --workers must be at least 1\n";
    return kInvalidConfig;
  }
  const Emitter em{cfg, out};
  try {
    if (cfg.command == "thresholds") return cmd_thresholds(cfg, em);
    if (cfg.command == "simulate-discrete") return cmd_simulate_discrete(cfg, em);
    if (cfg.command == "simulate-limit") return cmd_simulate_limit(cfg, em);
    if (cfg.command == "oracle") return cmd_oracle(cfg, em);
    if (cfg.command == "algebra-check") return cmd_algebra_check(cfg, em);
    if (cfg.command == "convergence") return cmd_convergence(cfg, em);
    err << "error: unknown command '" << cfg.command << "'\n";
    return kInvalidConfig;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kInvalidConfig;
  } catch (const flow::RegimeError& e) {
    err << "error: " << e.what() << "\n";
    return kInvalidConfig;
  }
}

}  // namespace mushy::cli
