#pragma once

#include <algorithm>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "relalg/exterior.hpp"
#include "relalg/matrix.hpp"
#include "relalg/rules.hpp"

namespace relalg {

// Raised when the relative derivation is applied outside its domain.
class PreconditionError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

struct OpaqueDecl {
  std::string name;
  int arity = 1;
  friend bool operator==(const OpaqueDecl&, const OpaqueDecl&) = default;
};

struct VariableLevels {
  std::vector<std::string> base;
  std::vector<std::string> fiber;
  std::vector<OpaqueDecl> opaque;

  bool is_base(const std::string& v) const { return std::find(base.begin(), base.end(), v) != base.end(); }
  bool is_fiber(const std::string& v) const { return std::find(fiber.begin(), fiber.end(), v) != fiber.end(); }
  bool is_declared(const std::string& v) const { return is_base(v) || is_fiber(v); }
  const OpaqueDecl* find_opaque(const std::string& f) const {
    for (const auto& d : opaque) {
      if (d.name == f) return &d;
    }
    return nullptr;
  }
};

// Generator for fresh parameter names prefix<next>, prefix<next+1>, ...
struct ParamSpec {
  std::string prefix = "c";
  int next = 1;
};

// Left behind when a variable is eliminated through a constraint: D(value)
// must still reproduce the structure equation the variable carried.
struct SideCondition {
  std::string variable;
  Scalar value;
  Form rule;
};

struct RelAlgebroid {
  std::string name;
  Frame frame;
  VariableLevels vars;
  std::vector<Form> dtheta;  // right-hand sides of D theta^i, degree 2
  std::vector<Form> dbase;   // right-hand sides of D x^mu, parallel to vars.base
  Rules rules;
  ParamSpec params;
  std::vector<SideCondition> side_conditions;

  std::size_t rank() const noexcept { return frame.rank(); }
  const Form& d_of_base(const std::string& v) const {
    auto it = std::find(vars.base.begin(), vars.base.end(), v);
    if (it == vars.base.end()) throw std::out_of_range("not a base variable: " + v);
    return dbase.at(static_cast<std::size_t>(it - vars.base.begin()));
  }
};

struct Diagnostic {
  std::string location;
  std::string message;
  friend bool operator==(const Diagnostic&, const Diagnostic&) = default;
};

struct LabeledForm {
  std::string label;
  Form form;
};

inline Form frame_monomial(std::size_t rank, const IndexTuple& t) {
  Form f(rank, static_cast<int>(t.size()));
  f.add(t, Scalar(1));
  return f;
}

// ---------------------------------------------------------------------------
// Validation

namespace detail {

inline void check_functions(const Scalar& s, const VariableLevels& vars, const std::string& where,
                            std::vector<Diagnostic>& out) {
  for (const auto& [m, c] : s.terms()) {
    for (const auto& [atom, e] : m.factors()) {
      if (atom.kind() == AtomKind::Function) {
        const OpaqueDecl* decl = vars.find_opaque(atom.name());
        if (!decl) {
          out.push_back({where, "undeclared function " + atom.name()});
        } else if (decl->arity != static_cast<int>(atom.args().size())) {
          out.push_back({where, "function " + atom.name() + " expects " + std::to_string(decl->arity) + " argument(s)"});
        }
      }
      for (const auto& a : atom.args()) check_functions(a, vars, where, out);
    }
  }
}

inline void check_form(const Form& f, int degree, const RelAlgebroid& alg, const std::string& where,
                       std::vector<Diagnostic>& out) {
  if (f.rank() != alg.rank()) {
    out.push_back({where, "form is over a frame of rank " + std::to_string(f.rank())});
    return;
  }
  if (f.degree() != degree) {
    out.push_back({where, "right-hand side has degree " + std::to_string(f.degree()) + ", expected " +
                              std::to_string(degree)});
  }
  std::set<std::string> seen;
  for (const auto& [t, c] : f.terms()) {
    for (const auto& v : variables(c)) {
      if (!alg.vars.is_declared(v) && seen.insert(v).second) out.push_back({where, "unknown variable " + v});
    }
    check_functions(c, alg.vars, where, out);
  }
}

}  // namespace detail

inline std::vector<Diagnostic> validate(const RelAlgebroid& alg) {
  std::vector<Diagnostic> out;
  std::set<std::string> names;
  for (const auto& v : alg.vars.base) {
    if (!names.insert(v).second) out.push_back({"base", "duplicate variable " + v});
  }
  for (const auto& v : alg.vars.fiber) {
    if (!names.insert(v).second) out.push_back({"fiber", "variable " + v + " declared twice"});
  }
  for (const auto& v : alg.frame.names()) {
    if (names.count(v)) out.push_back({"frame", "covector " + v + " clashes with a variable"});
  }
  if (alg.dtheta.size() != alg.rank()) {
    out.push_back({"frame", "expected " + std::to_string(alg.rank()) + " structure equations for the frame, got " +
                                std::to_string(alg.dtheta.size())});
  }
  if (alg.dbase.size() != alg.vars.base.size()) {
    out.push_back({"base", "every base variable needs exactly one structure equation"});
  }
  for (std::size_t i = 0; i < alg.dtheta.size() && i < alg.rank(); ++i) {
    detail::check_form(alg.dtheta[i], 2, alg, "D " + alg.frame.name(i), out);
  }
  for (std::size_t m = 0; m < alg.dbase.size() && m < alg.vars.base.size(); ++m) {
    detail::check_form(alg.dbase[m], 1, alg, "D " + alg.vars.base[m], out);
  }
  return out;
}

// ---------------------------------------------------------------------------
// The relative derivation

// D applied to the coefficient variables; covers base variables and, for an
// extended derivation, the fiber variables too.
using VariableRules = std::map<std::string, Form>;

inline VariableRules base_rules(const RelAlgebroid& alg) {
  VariableRules r;
  for (std::size_t m = 0; m < alg.vars.base.size(); ++m) r.emplace(alg.vars.base[m], alg.dbase.at(m));
  return r;
}

inline Form apply_D_scalar(const RelAlgebroid& alg, const Scalar& f, const VariableRules& rules) {
  Form out(alg.rank(), 1);
  for (const auto& v : variables(f)) {
    auto it = rules.find(v);
    if (it == rules.end()) {
      if (alg.vars.is_fiber(v))
        throw PreconditionError("fiber variable " + v + " has no derivative; an extension is required");
      throw PreconditionError("no derivative known for variable " + v);
    }
    Scalar partial = diff(f, v);
    if (!partial.is_zero()) out += partial * it->second;
  }
  return reduce(out, alg.rules);
}

inline Form apply_D_frame(const RelAlgebroid& alg, const IndexTuple& t) {
  Form out(alg.rank(), static_cast<int>(t.size()) + 1);
  for (std::size_t p = 0; p < t.size(); ++p) {
    IndexTuple left(t.begin(), t.begin() + static_cast<std::ptrdiff_t>(p));
    IndexTuple right(t.begin() + static_cast<std::ptrdiff_t>(p) + 1, t.end());
    Form piece = wedge(wedge(frame_monomial(alg.rank(), left), alg.dtheta.at(static_cast<std::size_t>(t[p]))),
                       frame_monomial(alg.rank(), right));
    out += (p % 2 == 0) ? piece : -piece;
  }
  return out;
}

// Leibniz extension of D to forms with coefficients in the variables covered
// by `rules`.
inline Form apply_D_with(const RelAlgebroid& alg, const Form& w, const VariableRules& rules) {
  if (w.rank() != alg.rank()) throw std::invalid_argument("form is over a different frame");
  Form out(alg.rank(), w.degree() + 1);
  if (static_cast<std::size_t>(out.degree()) > alg.rank()) return out;
  for (const auto& [t, c] : w.terms()) {
    Form basis = frame_monomial(alg.rank(), t);
    out += wedge(apply_D_scalar(alg, c, rules), basis);
    out += c * apply_D_frame(alg, t);
  }
  return reduce(out, alg.rules);
}

inline Form apply_D(const RelAlgebroid& alg, const Form& w) { return apply_D_with(alg, w, base_rules(alg)); }

inline Form apply_D(const RelAlgebroid& alg, const Scalar& f) {
  return apply_D(alg, Form::scalar(alg.rank(), f));
}

// The forms whose vanishing expresses D o D = 0 on generators.
inline std::vector<LabeledForm> square_forms(const RelAlgebroid& alg, const VariableRules& rules) {
  std::vector<LabeledForm> out;
  for (std::size_t i = 0; i < alg.rank(); ++i) {
    out.push_back({"D(D " + alg.frame.name(i) + ")", apply_D_with(alg, alg.dtheta[i], rules)});
  }
  for (std::size_t m = 0; m < alg.vars.base.size(); ++m) {
    out.push_back({"D(D " + alg.vars.base[m] + ")", apply_D_with(alg, alg.dbase[m], rules)});
  }
  for (const auto& sc : alg.side_conditions) {
    Form expected = reduce(sc.rule, alg.rules);
    out.push_back({"D(" + to_string(sc.value) + ") - D " + sc.variable,
                   apply_D_with(alg, Form::scalar(alg.rank(), sc.value), rules) - expected});
  }
  return out;
}

inline std::vector<LabeledForm> check_lie(const RelAlgebroid& alg) {
  if (!alg.vars.fiber.empty()) throw PreconditionError("check_lie requires an empty fiber level");
  std::vector<LabeledForm> out;
  for (auto& lf : square_forms(alg, base_rules(alg))) {
    if (!lf.form.is_zero()) out.push_back(std::move(lf));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Koszul duality with bracket tables

struct BracketTables {
  std::size_t rank = 0;
  std::vector<std::vector<std::vector<Scalar>>> c;  // c[i][j][k], [e_j, e_k] = c^i_jk e_i
  std::vector<std::vector<Scalar>> rho;             // rho[mu][i], anchor of e_i on x^mu

  BracketTables() = default;
  BracketTables(std::size_t n, std::size_t base)
      : rank(n),
        c(n, std::vector<std::vector<Scalar>>(n, std::vector<Scalar>(n))),
        rho(base, std::vector<Scalar>(n)) {}
};

// D theta^i = -1/2 c^i_jk theta^j ^ theta^k summed over all j, k, so the
// coefficient on theta^j ^ theta^k (j < k) is -c^i_jk.
inline BracketTables derivation_to_bracket(const RelAlgebroid& alg) {
  const std::size_t n = alg.rank();
  BracketTables t(n, alg.vars.base.size());
  for (std::size_t i = 0; i < n; ++i) {
    for (const auto& [tuple, coeff] : alg.dtheta.at(i).terms()) {
      auto j = static_cast<std::size_t>(tuple[0]);
      auto k = static_cast<std::size_t>(tuple[1]);
      t.c[i][j][k] = -coeff;
      t.c[i][k][j] = coeff;
    }
  }
  for (std::size_t m = 0; m < alg.vars.base.size(); ++m) {
    for (const auto& [tuple, coeff] : alg.dbase.at(m).terms()) t.rho[m][static_cast<std::size_t>(tuple[0])] = coeff;
  }
  return t;
}

inline RelAlgebroid bracket_to_derivation(const BracketTables& t, const VariableLevels& levels, const Frame& frame) {
  const std::size_t n = frame.rank();
  if (t.rank != n || t.c.size() != n) throw std::invalid_argument("bracket table rank does not match the frame");
  if (t.rho.size() != levels.base.size()) throw std::invalid_argument("anchor table does not match the base");
  RelAlgebroid alg;
  alg.frame = frame;
  alg.vars = levels;
  for (std::size_t i = 0; i < n; ++i) {
    Form d(n, 2);
    for (std::size_t j = 0; j < n; ++j) {
      if (!t.c[i][j][j].is_zero()) throw std::invalid_argument("bracket table has a nonzero diagonal entry");
      for (std::size_t k = j + 1; k < n; ++k) {
        if (t.c[i][j][k] != -t.c[i][k][j]) throw std::invalid_argument("bracket table is not antisymmetric");
        d.add({static_cast<int>(j), static_cast<int>(k)}, -t.c[i][j][k]);
      }
    }
    alg.dtheta.push_back(std::move(d));
  }
  for (std::size_t m = 0; m < levels.base.size(); ++m) {
    Form d(n, 1);
    for (std::size_t i = 0; i < n; ++i) d.add({static_cast<int>(i)}, t.rho[m].at(i));
    alg.dbase.push_back(std::move(d));
  }
  return alg;
}

// ---------------------------------------------------------------------------
// Realizations

struct Realization {
  std::string name;
  std::string algebroid;
  std::vector<std::string> coords;
  std::vector<Form> theta;                   // theta^i as 1-forms in dt^a
  std::map<std::string, Scalar> components;  // base and fiber variables as functions of t
};

struct RealizationReport {
  std::vector<LabeledForm> residuals;
  std::vector<Diagnostic> problems;
  std::optional<Scalar> rank_minor;  // assumed nonzero
};

// Coordinate exterior derivative on forms over the dt^a frame.
inline Form coordinate_d(const Form& w, const std::vector<std::string>& coords) {
  const std::size_t d = coords.size();
  Form out(d, w.degree() + 1);
  if (static_cast<std::size_t>(out.degree()) > d) return out;
  for (const auto& [t, c] : w.terms()) {
    Form basis = frame_monomial(d, t);
    for (std::size_t a = 0; a < d; ++a) {
      Scalar partial = diff(c, coords[a]);
      if (!partial.is_zero()) out += wedge(Form::covector(d, static_cast<int>(a), partial), basis);
    }
  }
  return out;
}

inline RealizationReport realization_check(const RelAlgebroid& alg, const Realization& r) {
  RealizationReport rep;
  const std::size_t n = alg.rank();
  const std::size_t d = r.coords.size();
  if (r.theta.size() != n) {
    rep.problems.push_back({r.name, "expected " + std::to_string(n) + " covector expressions"});
    return rep;
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (r.theta[i].rank() != d || r.theta[i].degree() != 1)
      rep.problems.push_back({r.name, alg.frame.name(i) + " must be a 1-form in the coordinates"});
  }
  for (const auto& v : alg.vars.base) {
    if (!r.components.count(v)) rep.problems.push_back({r.name, "no component given for " + v});
  }
  for (const auto& v : alg.vars.fiber) {
    if (!r.components.count(v)) rep.problems.push_back({r.name, "no component given for " + v});
  }
  if (!rep.problems.empty()) return rep;

  auto push = [&](const Form& w) {
    Form out(d, w.degree());
    for (const auto& [t, c] : w.terms()) {
      Form piece = Form::scalar(d, substitute(c, r.components));
      for (int i : t) piece = wedge(piece, r.theta[static_cast<std::size_t>(i)]);
      out += piece;
    }
    return out;
  };

  for (std::size_t i = 0; i < n; ++i) {
    Form res = reduce(coordinate_d(r.theta[i], r.coords) - push(alg.dtheta[i]), alg.rules);
    if (!res.is_zero()) rep.residuals.push_back({"d " + alg.frame.name(i), res});
  }
  for (std::size_t m = 0; m < alg.vars.base.size(); ++m) {
    const auto& v = alg.vars.base[m];
    Form res = reduce(coordinate_d(Form::scalar(d, r.components.at(v)), r.coords) - push(alg.dbase[m]), alg.rules);
    if (!res.is_zero()) rep.residuals.push_back({"d " + v, res});
  }

  // First nonvanishing maximal minor of the coefficient matrix (h^i_a).
  if (d < n) {
    rep.problems.push_back({r.name, "fewer coordinates than frame covectors"});
    return rep;
  }
  std::vector<bool> pick(d, false);
  std::fill(pick.begin(), pick.begin() + static_cast<std::ptrdiff_t>(n), true);
  do {
    ScalarMatrix m(n);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t a = 0; a < d; ++a) {
        if (pick[a]) m[i].push_back(r.theta[i].coeff({static_cast<int>(a)}));
      }
    }
    Scalar det = alg.rules.reduce(determinant(m));
    if (!det.is_zero()) {
      rep.rank_minor = det;
      break;
    }
  } while (std::prev_permutation(pick.begin(), pick.end()));
  if (!rep.rank_minor) rep.problems.push_back({r.name, "covector expressions are linearly dependent"});
  return rep;
}

// ---------------------------------------------------------------------------
// Adjoining constraints

namespace detail {

inline bool rational_linear_in(const Scalar& e, const Atom& atom, Rational& coeff, Scalar& rest) {
  auto parts = split_by_atom(e, atom);
  if (parts.size() != 2 || !parts[1].is_constant() || parts[1].is_zero()) return false;
  coeff = parts[1].constant_value();
  rest = parts[0];
  return true;
}

}  // namespace detail

// Imposes lhs = rhs. An opaque f^(d)(v) occurring linearly becomes an ODE
// rule for f (highest derivative order wins); otherwise a variable occurring
// linearly is eliminated, fiber variables first.
inline RelAlgebroid adjoin(const RelAlgebroid& alg, const Scalar& lhs, const Scalar& rhs) {
  Scalar e = alg.rules.reduce(lhs - rhs);
  if (e.is_zero()) return alg;

  std::optional<Atom> best_fn;
  for (const auto& [m, c] : e.terms()) {
    for (const auto& [atom, k] : m.factors()) {
      if (atom.kind() != AtomKind::Function || atom.args().size() != 1) continue;
      const Scalar& arg = atom.args()[0];
      if (arg.terms().size() != 1 || arg.terms()[0].second != 1) continue;
      const auto& fs = arg.terms()[0].first.factors();
      if (fs.size() != 1 || fs[0].second != 1 || !fs[0].first.is_variable()) continue;
      if (!best_fn || atom.derivs()[0] > best_fn->derivs()[0]) best_fn = atom;
    }
  }
  if (best_fn) {
    Rational k;
    Scalar rest;
    const std::string arg_var = best_fn->args()[0].terms()[0].first.factors()[0].first.name();
    auto vs = variables(e);
    if (detail::rational_linear_in(e, *best_fn, k, rest) && vs.size() == 1 && *vs.begin() == arg_var) {
      RelAlgebroid out = alg;
      const std::string placeholder = "#t";
      FunctionRule rule{best_fn->name(), best_fn->derivs()[0], placeholder,
                        substitute(-rest / k, {{arg_var, var(placeholder)}})};
      out.rules.add_function_rule(std::move(rule));
      for (auto& f : out.dtheta) f = reduce(f, out.rules);
      for (auto& f : out.dbase) f = reduce(f, out.rules);
      return out;
    }
  }

  std::vector<std::string> order = alg.vars.fiber;
  order.insert(order.end(), alg.vars.base.rbegin(), alg.vars.base.rend());
  for (const auto& v : order) {
    Rational k;
    Scalar rest;
    if (!detail::rational_linear_in(e, Atom::variable(v), k, rest)) continue;
    Scalar value = -rest / k;
    if (contains_variable(value, v)) continue;
    RelAlgebroid out = alg;
    std::map<std::string, Scalar> bind{{v, value}};
    auto sub = [&](const Form& f) { return f.map_coefficients([&](const Scalar& c) { return substitute(c, bind); }); };
    for (auto& f : out.dtheta) f = reduce(sub(f), out.rules);
    for (auto& sc : out.side_conditions) {
      sc.value = substitute(sc.value, bind);
      sc.rule = sub(sc.rule);
    }
    if (alg.vars.is_base(v)) {
      auto idx = static_cast<std::size_t>(std::find(alg.vars.base.begin(), alg.vars.base.end(), v) - alg.vars.base.begin());
      out.side_conditions.push_back({v, value, sub(alg.dbase[idx])});
      out.vars.base.erase(out.vars.base.begin() + static_cast<std::ptrdiff_t>(idx));
      out.dbase.erase(out.dbase.begin() + static_cast<std::ptrdiff_t>(idx));
    } else {
      out.vars.fiber.erase(std::find(out.vars.fiber.begin(), out.vars.fiber.end(), v));
    }
    for (auto& f : out.dbase) f = reduce(sub(f), out.rules);
    return out;
  }
  throw std::invalid_argument("cannot solve the adjoined equation " + to_string(lhs) + " = " + to_string(rhs) +
                              " for a variable or an opaque derivative");
}

}  // namespace relalg
