#pragma once

#include <algorithm>
#include <chrono>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "relalg/algebroid.hpp"
#include "relalg/dsl.hpp"
#include "relalg/jets.hpp"
#include "relalg/prolong.hpp"

namespace relalg::cli {

inline constexpr int kSchemaVersion = 1;

// Bad invocation or input that cannot be run; maps to exit code 2.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Options {
  std::string command;
  std::string file;
  std::string algebroid;
  std::vector<std::string> adjoin;
  int depth = 1;
  std::string realization;
  std::string then;  // follow-up command for `jets`
  bool json = false;
  bool deterministic = false;
  bool trig = false;
  bool color = false;
};

struct Report {
  nlohmann::json json;
  std::string text;
  int exit_code = 0;
};

using nlohmann::json;

// ---------------------------------------------------------------------------
// JSON encoding

inline json form_json(const Form& f) {
  json out = json::object();
  for (const auto& [t, c] : f.terms()) out[t.empty() ? std::string("0") : tuple_key(t)] = to_string(c);
  return out;
}

inline json labeled_json(const LabeledForm& lf, const Frame& frame) {
  return {{"label", lf.label}, {"text", to_string(lf.form, frame)}, {"coefficients", form_json(lf.form)}};
}

inline json scalars_json(const std::vector<Scalar>& v) {
  json out = json::array();
  for (const auto& s : v) out.push_back(to_string(s));
  return out;
}

inline json structure_json(const RelAlgebroid& alg) {
  json eqs = json::array();
  for (std::size_t i = 0; i < alg.rank(); ++i) {
    eqs.push_back({{"lhs", alg.frame.name(i)},
                   {"text", to_string(alg.dtheta[i], alg.frame)},
                   {"coefficients", form_json(alg.dtheta[i])}});
  }
  for (std::size_t m = 0; m < alg.vars.base.size(); ++m) {
    eqs.push_back({{"lhs", alg.vars.base[m]},
                   {"text", to_string(alg.dbase[m], alg.frame)},
                   {"coefficients", form_json(alg.dbase[m])}});
  }
  json opaque = json::array();
  for (const auto& d : alg.vars.opaque) opaque.push_back({{"name", d.name}, {"arity", d.arity}});
  json side = json::array();
  for (const auto& sc : alg.side_conditions) {
    side.push_back({{"variable", sc.variable}, {"value", to_string(sc.value)}, {"rule", to_string(sc.rule, alg.frame)}});
  }
  json fn_rules = json::array();
  for (const auto& r : alg.rules.function_rules()) {
    Scalar lhs = fn(r.function, {var(r.placeholder)}, {r.order});
    fn_rules.push_back(to_string(lhs) + " = " + to_string(r.rhs));
  }
  return {{"name", alg.name},
          {"frame", alg.frame.names()},
          {"base", alg.vars.base},
          {"fiber", alg.vars.fiber},
          {"opaque", opaque},
          {"trig_rewrite", alg.rules.trig()},
          {"function_rules", fn_rules},
          {"side_conditions", side},
          {"equations", eqs}};
}

inline json step_json(const ProlongationStep& step, const Frame& frame) {
  json eqs = json::array();
  for (const auto& e : step.system.equations) eqs.push_back({{"expr", to_string(e.expr)}, {"provenance", e.provenance}});
  json rules = json::array();
  for (std::size_t y = 0; y < step.rules.size(); ++y) {
    rules.push_back({{"variable", step.fiber[y]},
                     {"text", rule_text(step, y, frame)},
                     {"coefficients", form_json(step.rules[y])}});
  }
  json residuals = json::array();
  for (const auto& r : step.residuals) residuals.push_back(labeled_json(r, frame));
  return {{"verdict", to_string(step.verdict)},
          {"unknowns", step.system.unknowns},
          {"equations", eqs},
          {"parameters", step.parameters},
          {"rules", rules},
          {"obstructions", scalars_json(step.obstructions)},
          {"assumptions", scalars_json(step.assumptions)},
          {"residuals", residuals},
          {"representable", step.representable}};
}

// ---------------------------------------------------------------------------
// Text helpers

struct Style {
  bool color = false;
  std::string good(const std::string& s) const { return color ? "\x1b[32m" + s + "\x1b[0m" : s; }
  std::string bad(const std::string& s) const { return color ? "\x1b[31m" + s + "\x1b[0m" : s; }
};

inline void structure_text(std::ostringstream& os, const RelAlgebroid& alg, const std::string& indent = "  ") {
  for (std::size_t i = 0; i < alg.rank(); ++i)
    os << indent << "D " << alg.frame.name(i) << " = " << to_string(alg.dtheta[i], alg.frame) << "\n";
  for (std::size_t m = 0; m < alg.vars.base.size(); ++m)
    os << indent << "D " << alg.vars.base[m] << " = " << to_string(alg.dbase[m], alg.frame) << "\n";
  for (const auto& r : alg.rules.function_rules()) {
    Scalar rhs = substitute(r.rhs, {{r.placeholder, var("t")}});
    os << indent << "rule " << r.function << std::string(static_cast<std::size_t>(r.order), '\'') << "(t) = "
       << to_string(rhs) << "\n";
  }
  for (const auto& sc : alg.side_conditions)
    os << indent << "rule " << sc.variable << " = " << to_string(sc.value) << "\n";
}

inline void step_text(std::ostringstream& os, const ProlongationStep& step, const Frame& frame, int level,
                      const Style& st) {
  bool clean = step.verdict == Verdict::Determined || step.verdict == Verdict::Underdetermined;
  std::string verdict = to_string(step.verdict);
  if (step.verdict == Verdict::Underdetermined) verdict += "(" + std::to_string(step.parameters.size()) + ")";
  os << "level " << level << ": " << (clean && step.representable ? st.good(verdict) : st.bad(verdict)) << "\n";
  for (std::size_t y = 0; y < step.rules.size(); ++y)
    os << "  D" << level << " " << step.fiber[y] << " = " << rule_text(step, y, frame) << "\n";
  if (!step.representable) os << "  solution is not polynomial in the new parameters; no successor built\n";
  for (const auto& a : step.assumptions) os << "  assuming " << to_string(a) << " != 0\n";
  for (const auto& o : step.obstructions) os << "  obstruction: " << to_string(o) << " = 0\n";
  for (const auto& r : step.residuals) os << "  residual " << r.label << ": " << to_string(r.form, frame) << "\n";
}

// ---------------------------------------------------------------------------
// Commands

inline RelAlgebroid select_algebroid(const Options& opt, const Document& doc) {
  RelAlgebroid alg;
  if (!opt.algebroid.empty()) {
    if (const auto* a = doc.find_algebroid(opt.algebroid)) {
      alg = *a;
    } else if (const auto* j = doc.find_jets(opt.algebroid)) {
      alg = pde_algebroid(j->pde);
      alg.name = j->name;
    } else {
      throw UsageError("no algebroid or jets block named " + opt.algebroid);
    }
  } else if (!doc.algebroids.empty()) {
    alg = doc.algebroids.front();
  } else if (!doc.jets.empty()) {
    alg = pde_algebroid(doc.jets.front().pde);
    alg.name = doc.jets.front().name;
  } else {
    throw UsageError("the document declares no algebroid");
  }
  if (opt.trig || doc.trig_rewrite) alg.rules.set_trig(true);
  for (const auto& text : opt.adjoin) {
    try {
      auto [lhs, rhs] = parse_equation(text, alg);
      alg = adjoin(alg, lhs, rhs);
    } catch (const ParseError& e) {
      throw UsageError("--adjoin '" + text + "': " + e.what());
    } catch (const std::invalid_argument& e) {
      throw UsageError("--adjoin '" + text + "': " + e.what());
    }
  }
  if (auto diags = validate(alg); !diags.empty()) {
    std::string msg = "invalid algebroid " + alg.name + ":";
    for (const auto& d : diags) msg += "\n  " + d.location + ": " + d.message;
    throw UsageError(msg);
  }
  return alg;
}

inline Report run_check(const RelAlgebroid& alg, const Style& st) {
  Report rep;
  std::ostringstream os;
  os << "algebroid " << alg.name << " (rank " << alg.rank() << ")\n";
  structure_text(os, alg);
  rep.json["algebroid"] = structure_json(alg);
  rep.json["diagnostics"] = json::array();
  if (!alg.vars.fiber.empty()) {
    os << "relative algebroid with fiber " << dsl::join(alg.vars.fiber) << "; the Lie test needs an empty fiber\n";
    rep.json["lie"] = nullptr;
    rep.text = os.str();
    return rep;
  }
  auto obstructions = check_lie(alg);
  BracketTables t = derivation_to_bracket(alg);
  bool anchor_zero = true;
  for (const auto& row : t.rho) {
    for (const auto& s : row) anchor_zero = anchor_zero && s.is_zero();
  }
  json obs = json::array();
  for (const auto& o : obstructions) obs.push_back(labeled_json(o, alg.frame));
  rep.json["lie"] = obstructions.empty();
  rep.json["anchor_zero"] = anchor_zero;
  rep.json["obstructions"] = obs;
  os << "Lie algebroid: " << (obstructions.empty() ? st.good("yes") : st.bad("no")) << "\n";
  os << "anchor: " << (anchor_zero ? "zero" : "nonzero") << "\n";
  for (const auto& o : obstructions) os << "  " << o.label << " = " << to_string(o.form, alg.frame) << "\n";
  rep.exit_code = obstructions.empty() ? 0 : 1;
  rep.text = os.str();
  return rep;
}

inline Report run_bracket(const RelAlgebroid& alg) {
  Report rep;
  std::ostringstream os;
  BracketTables t = derivation_to_bracket(alg);
  json c = json::object();
  os << "brackets of " << alg.name << ":\n";
  for (std::size_t j = 0; j < t.rank; ++j) {
    for (std::size_t k = j + 1; k < t.rank; ++k) {
      Form bracket(alg.rank(), 1);
      for (std::size_t i = 0; i < t.rank; ++i) {
        if (t.c[i][j][k].is_zero()) continue;
        bracket.add({static_cast<int>(i)}, t.c[i][j][k]);
        c[std::to_string(i + 1)][std::to_string(j + 1) + "," + std::to_string(k + 1)] = to_string(t.c[i][j][k]);
      }
      if (bracket.is_zero()) continue;
      std::vector<std::string> enames;
      for (std::size_t i = 0; i < t.rank; ++i) enames.push_back("e" + std::to_string(i + 1));
      os << "  [e" << j + 1 << ", e" << k + 1 << "] = " << to_string(bracket, Frame(enames)) << "\n";
    }
  }
  json rho = json::object();
  bool anchor_zero = std::all_of(t.rho.begin(), t.rho.end(), [](const auto& row) {
    return std::all_of(row.begin(), row.end(), [](const Scalar& s) { return s.is_zero(); });
  });
  os << "anchor:" << (anchor_zero ? " 0" : "") << "\n";
  for (std::size_t m = 0; m < alg.vars.base.size(); ++m) {
    for (std::size_t i = 0; i < t.rank; ++i) {
      if (t.rho[m][i].is_zero()) continue;
      rho[alg.vars.base[m]][std::to_string(i + 1)] = to_string(t.rho[m][i]);
      os << "  rho(e" << i + 1 << ") " << alg.vars.base[m] << " = " << to_string(t.rho[m][i]) << "\n";
    }
  }
  rep.json["algebroid"] = structure_json(alg);
  rep.json["c"] = c;
  rep.json["rho"] = rho;
  rep.text = os.str();
  return rep;
}

inline Report run_tower(const RelAlgebroid& alg, int depth, const Style& st) {
  Report rep;
  std::ostringstream os;
  Tower t = tower(alg, depth);
  os << "algebroid " << alg.name << "\n";
  structure_text(os, alg);
  json levels = json::array();
  int k = 0;
  Verdict last = Verdict::Determined;
  bool representable = true;
  for (const auto& level : t.levels) {
    ++k;
    step_text(os, level.step, alg.frame, k, st);
    json lj = step_json(level.step, alg.frame);
    lj["level"] = k;
    lj["algebroid"] = structure_json(level.algebroid);
    bool has_next = k < static_cast<int>(t.levels.size()) || t.top.has_value();
    if (has_next) {
      lj["extension_verified"] = level.extension_ok;
      lj["completion_verified"] = level.completion_ok;
      if (!level.extension_ok || !level.completion_ok) os << "  " << st.bad("verification failed") << "\n";
    } else {
      lj["extension_verified"] = nullptr;
      lj["completion_verified"] = nullptr;
    }
    levels.push_back(lj);
    last = level.step.verdict;
    representable = level.step.representable;
  }
  rep.json["algebroid"] = structure_json(alg);
  rep.json["levels"] = levels;
  rep.json["depth"] = depth;
  if (t.top) {
    rep.json["top"] = structure_json(*t.top);
    if (t.top->vars.fiber.empty()) {
      bool lie = check_lie(*t.top).empty();
      rep.json["top_is_lie"] = lie;
      os << "successor is a Lie algebroid: " << (lie ? st.good("yes") : st.bad("no")) << "\n";
    }
  } else {
    rep.json["top"] = nullptr;
  }
  bool clean = representable && (last == Verdict::Determined || last == Verdict::Underdetermined);
  rep.json["verdict"] = to_string(last);
  rep.exit_code = clean ? 0 : 1;
  rep.text = os.str();
  return rep;
}

inline Report run_realize(const Options& opt, const Document& doc, const Style& st) {
  if (opt.realization.empty()) throw UsageError("realize needs --realization NAME");
  const Realization* r = doc.find_realization(opt.realization);
  if (!r) throw UsageError("no realization named " + opt.realization);
  Options sel = opt;
  sel.algebroid = r->algebroid;
  RelAlgebroid alg = select_algebroid(sel, doc);
  RealizationReport res = realization_check(alg, *r);
  if (!res.problems.empty()) {
    std::string msg = "realization " + r->name + ":";
    for (const auto& p : res.problems) msg += "\n  " + p.message;
    throw UsageError(msg);
  }
  std::vector<std::string> dnames;
  for (const auto& c : r->coords) dnames.push_back("d" + c);
  Frame dframe(dnames);
  Report rep;
  std::ostringstream os;
  json residuals = json::array();
  for (const auto& lf : res.residuals) residuals.push_back(labeled_json(lf, dframe));
  rep.json["realization"] = r->name;
  rep.json["algebroid"] = structure_json(alg);
  rep.json["coords"] = r->coords;
  rep.json["residuals"] = residuals;
  rep.json["rank_minor"] = res.rank_minor ? json(to_string(*res.rank_minor)) : json(nullptr);
  rep.json["realizes"] = res.residuals.empty();
  os << "realization " << r->name << " of " << alg.name << ": "
     << (res.residuals.empty() ? st.good("yes") : st.bad("no")) << "\n";
  if (res.rank_minor && !res.rank_minor->is_constant()) os << "  assuming " << to_string(*res.rank_minor) << " != 0 (frame rank)\n";
  for (const auto& lf : res.residuals) os << "  residual " << lf.label << ": " << to_string(lf.form, dframe) << "\n";
  rep.exit_code = res.residuals.empty() ? 0 : 1;
  rep.text = os.str();
  return rep;
}

inline Report run(const Options& opt, const Document& doc);

inline Report run_jets(const Options& opt, const Document& doc, const Style& st) {
  if (doc.jets.empty()) throw UsageError("the document has no jets block");
  const JetsBlock* block = opt.algebroid.empty() ? &doc.jets.front() : doc.find_jets(opt.algebroid);
  if (!block) throw UsageError("no jets block named " + opt.algebroid);
  Options sel = opt;
  sel.algebroid = block->name;
  RelAlgebroid alg = select_algebroid(sel, doc);
  Report rep;
  std::ostringstream os;
  os << "jets " << block->name << " on J^" << block->pde.chart.order() << "\n";
  structure_text(os, alg);
  os << "fiber: " << (alg.vars.fiber.empty() ? "none" : dsl::join(alg.vars.fiber)) << "\n";
  OracleResult oracle = pde_prolong_oracle(block->pde);
  json orules = json::object();
  os << "prolongation by total differentiation: " << (oracle.consistent ? st.good("consistent") : st.bad("inconsistent"))
     << "\n";
  for (const auto& [k, v] : oracle.prolonged.rules) {
    orules[k] = to_string(v);
    os << "  " << k << " = " << to_string(v) << "\n";
  }
  for (const auto& r : oracle.residuals) os << "  residual " << to_string(r) << "\n";
  rep.json["algebroid"] = structure_json(alg);
  rep.json["oracle"] = {{"consistent", oracle.consistent},
                        {"rules", orules},
                        {"residuals", scalars_json(oracle.residuals)}};
  rep.exit_code = oracle.consistent ? 0 : 1;
  if (!opt.then.empty()) {
    if (opt.then == "jets") throw UsageError("--then jets would recurse");
    Options next = sel;
    next.command = opt.then;
    Report follow = run(next, doc);
    rep.json["then"] = follow.json;
    os << follow.text;
    rep.exit_code = std::max(rep.exit_code, follow.exit_code);
  }
  rep.text = os.str();
  return rep;
}

inline Report run(const Options& opt, const Document& doc) {
  Style st{opt.color};
  auto start = std::chrono::steady_clock::now();
  Report rep;
  if (opt.command == "check") {
    rep = run_check(select_algebroid(opt, doc), st);
  } else if (opt.command == "bracket") {
    rep = run_bracket(select_algebroid(opt, doc));
  } else if (opt.command == "prolong") {
    rep = run_tower(select_algebroid(opt, doc), 1, st);
  } else if (opt.command == "tower") {
    if (opt.depth < 1) throw UsageError("--depth must be a positive integer");
    rep = run_tower(select_algebroid(opt, doc), opt.depth, st);
  } else if (opt.command == "realize") {
    rep = run_realize(opt, doc, st);
  } else if (opt.command == "jets") {
    rep = run_jets(opt, doc, st);
  } else {
    throw UsageError("unknown command " + opt.command);
  }
  json cmd = {{"name", opt.command}, {"file", opt.file}, {"adjoin", opt.adjoin}, {"trig_rewrite", opt.trig}};
  if (opt.command == "tower") cmd["depth"] = opt.depth;
  if (!opt.algebroid.empty()) cmd["algebroid"] = opt.algebroid;
  if (!opt.realization.empty()) cmd["realization"] = opt.realization;
  if (!opt.then.empty()) cmd["then"] = opt.then;
  rep.json["command"] = cmd;
  rep.json["schema_version"] = kSchemaVersion;
  rep.json["exit_code"] = rep.exit_code;
  if (!opt.deterministic) {
    auto ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    rep.json["timing_ms"] = ms;
    std::ostringstream os;
    os.precision(3);
    os << std::fixed << ms;
    rep.text += "time: " + os.str() + " ms\n";
  }
  return rep;
}

inline std::string render(const Report& rep, bool as_json) { return as_json ? rep.json.dump(2) + "\n" : rep.text; }

}  // namespace relalg::cli
