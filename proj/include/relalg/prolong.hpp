#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "relalg/algebroid.hpp"
#include "relalg/matrix.hpp"

namespace relalg {

// Hands out parameter names that are not yet used anywhere in an algebroid.
class ParamNamer {
 public:
  explicit ParamNamer(const RelAlgebroid& alg) : spec_(alg.params) {
    taken_.insert(alg.vars.base.begin(), alg.vars.base.end());
    taken_.insert(alg.vars.fiber.begin(), alg.vars.fiber.end());
    taken_.insert(alg.frame.names().begin(), alg.frame.names().end());
    for (const auto& d : alg.vars.opaque) taken_.insert(d.name);
    for (const auto& sc : alg.side_conditions) taken_.insert(sc.variable);
  }

  std::string next() {
    for (;;) {
      std::string name = spec_.prefix + std::to_string(spec_.next++);
      if (taken_.insert(name).second) return name;
    }
  }
  const ParamSpec& spec() const noexcept { return spec_; }

 private:
  ParamSpec spec_;
  std::set<std::string> taken_;
};

// ---------------------------------------------------------------------------
// Ansatz and torsion

struct ExtensionAnsatz {
  RelAlgebroid parent;
  std::vector<std::vector<std::string>> unknowns;  // [fiber variable][frame index]
  VariableRules rules;                             // D on base and fiber variables

  std::vector<std::string> flat_unknowns() const {
    std::vector<std::string> out;
    for (const auto& row : unknowns) out.insert(out.end(), row.begin(), row.end());
    return out;
  }
};

// '.' cannot occur in a parsed identifier, so these names never collide.
inline std::string unknown_name(const std::string& fiber_var, std::size_t i) {
  return fiber_var + "." + std::to_string(i + 1);
}

inline ExtensionAnsatz make_ansatz(const RelAlgebroid& alg) {
  ExtensionAnsatz a;
  a.parent = alg;
  a.rules = base_rules(alg);
  for (const auto& y : alg.vars.fiber) {
    std::vector<std::string> row;
    Form dy(alg.rank(), 1);
    for (std::size_t i = 0; i < alg.rank(); ++i) {
      row.push_back(unknown_name(y, i));
      dy.add({static_cast<int>(i)}, var(row.back()));
    }
    a.unknowns.push_back(std::move(row));
    a.rules.emplace(y, std::move(dy));
  }
  return a;
}

inline std::vector<LabeledForm> torsion(const ExtensionAnsatz& a) { return square_forms(a.parent, a.rules); }

// ---------------------------------------------------------------------------
// Linear systems

struct Equation {
  Scalar expr;  // affine in the unknowns, understood as expr = 0
  std::string provenance;
};

struct LinearSystem {
  std::vector<std::string> unknowns;
  std::vector<Equation> equations;
};

inline int unknown_degree(const Monomial& m, const std::set<std::string>& unknowns) {
  int d = 0;
  for (const auto& [atom, e] : m.factors()) {
    if (atom.is_variable() && unknowns.count(atom.name())) d += e;
  }
  return d;
}

inline LinearSystem extract_system(const std::vector<LabeledForm>& forms, const std::vector<std::string>& unknowns) {
  LinearSystem sys;
  sys.unknowns = unknowns;
  std::set<std::string> u(unknowns.begin(), unknowns.end());
  for (const auto& lf : forms) {
    for (const auto& [t, c] : lf.form.terms()) {
      for (const auto& [m, k] : c.terms()) {
        if (unknown_degree(m, u) > 1) throw std::logic_error("torsion is not affine in the unknowns: " + lf.label);
        for (const auto& [atom, e] : m.factors()) {
          if (!atom.is_variable()) {
            for (const auto& v : variables(Scalar(atom))) {
              if (u.count(v)) throw std::logic_error("unknown inside a function argument: " + lf.label);
            }
          }
        }
      }
      sys.equations.push_back({c, lf.label + " [" + tuple_key(t) + "]"});
    }
  }
  return sys;
}

// ---------------------------------------------------------------------------
// Solving

enum class Verdict { Determined, Underdetermined, Obstructed, Empty };

inline std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::Determined:
      return "determined";
    case Verdict::Underdetermined:
      return "underdetermined";
    case Verdict::Obstructed:
      return "obstructed";
    case Verdict::Empty:
      return "empty";
  }
  return "unknown";
}

struct ProlongationStep {
  Verdict verdict = Verdict::Determined;
  LinearSystem system;
  std::vector<LabeledForm> torsion;
  std::vector<std::string> fiber;       // variables that received rules
  std::vector<std::string> parameters;  // fresh fiber level
  std::map<std::string, Scalar> solution;
  std::vector<Form> rules;                    // D y for each fiber variable
  std::vector<Form> particular;               // parameter-free part of each rule
  std::vector<std::vector<Form>> kernel;      // kernel[y][a]: coefficient form of parameter a
  std::vector<Scalar> obstructions;           // must vanish for a completion to exist
  std::vector<Scalar> assumptions;            // pivots assumed nonzero
  std::vector<LabeledForm> residuals;         // torsion left after substituting the solution
  bool representable = true;                  // solution is polynomial in the parameters
  ParamSpec params_after;

  std::size_t free_count() const noexcept { return parameters.size(); }
};

namespace detail {

struct Row {
  std::vector<Scalar> a;
  Scalar b;
};

struct Fraction {
  Scalar num;
  Scalar den;
};

inline std::pair<std::size_t, int> simplicity(const Scalar& s) {
  int deg = 0;
  for (const auto& [m, c] : s.terms()) deg = std::max(deg, m.degree());
  return {s.terms().size(), deg};
}

inline Rational row_content(const Row& r) {
  mpz_class num_gcd = 0;
  mpz_class den_lcm = 1;
  auto visit = [&](const Scalar& s) {
    for (const auto& [m, c] : s.terms()) {
      mpz_gcd(num_gcd.get_mpz_t(), num_gcd.get_mpz_t(), c.get_num_mpz_t());
      mpz_lcm(den_lcm.get_mpz_t(), den_lcm.get_mpz_t(), c.get_den_mpz_t());
    }
  };
  for (const auto& s : r.a) visit(s);
  visit(r.b);
  if (num_gcd == 0) return Rational(1);
  Rational c(num_gcd, den_lcm);
  c.canonicalize();
  return c;
}

inline bool row_is_zero(const Row& r) {
  if (!r.b.is_zero()) return false;
  return std::all_of(r.a.begin(), r.a.end(), [](const Scalar& s) { return s.is_zero(); });
}

inline void simplify_row(Row& r, const std::vector<Scalar>& factors, const Rules& rules) {
  for (const auto& f : factors) {
    for (int guard = 0; guard < 8 && !row_is_zero(r); ++guard) {
      Row q;
      bool ok = true;
      for (const auto& s : r.a) {
        auto d = divide_exact(s, f, rules);
        if (!d) {
          ok = false;
          break;
        }
        q.a.push_back(std::move(*d));
      }
      if (!ok) break;
      auto d = divide_exact(r.b, f, rules);
      if (!d) break;
      q.b = std::move(*d);
      r = std::move(q);
    }
  }
  Rational c = row_content(r);
  if (c != 1) {
    for (auto& s : r.a) s = s / c;
    r.b = r.b / c;
  }
}

// Positive-leading primitive normalization of a nonzero polynomial.
inline Scalar normalized_factor(const Scalar& s) { return primitive_part(s); }

inline Fraction reduce_fraction(Scalar num, Scalar den, const std::vector<Scalar>& factors, const Rules& rules) {
  if (auto q = divide_exact(num, den, rules)) return {std::move(*q), Scalar(1)};
  for (const auto& f : factors) {
    for (int guard = 0; guard < 8; ++guard) {
      auto qn = divide_exact(num, f, rules);
      auto qd = divide_exact(den, f, rules);
      if (!qn || !qd) break;
      num = std::move(*qn);
      den = std::move(*qd);
    }
  }
  Scalar p = normalized_factor(den);
  // den = k * p with k rational
  Rational k = den.terms().front().second / p.terms().front().second;
  return {num / k, p};
}

inline void push_unique(std::vector<Scalar>& v, const Scalar& s) {
  if (std::find(v.begin(), v.end(), s) == v.end()) v.push_back(s);
}

}  // namespace detail

// Fraction-free Gauss-Jordan elimination over the field of fractions of the
// scalar ring. `namer` supplies names for the free unknowns.
inline ProlongationStep solve(const LinearSystem& system, const Rules& rules, ParamNamer& namer) {
  using detail::Row;
  ProlongationStep step;
  step.system = system;
  const std::size_t nu = system.unknowns.size();

  std::map<std::string, Scalar> zero;
  for (const auto& u : system.unknowns) zero.emplace(u, Scalar());
  std::vector<Row> rows;
  for (const auto& eq : system.equations) {
    Row r;
    for (const auto& u : system.unknowns) r.a.push_back(rules.reduce(diff(eq.expr, u)));
    r.b = rules.reduce(substitute(eq.expr, zero));
    if (!detail::row_is_zero(r)) {
      detail::simplify_row(r, {}, rules);
      rows.push_back(std::move(r));
    }
  }

  std::vector<std::size_t> pivot_row;  // per pivot
  std::vector<std::size_t> pivot_col;
  std::vector<Scalar> factors;  // normalized nonconstant pivots
  std::vector<bool> used(rows.size(), false);
  std::vector<bool> is_pivot_col(nu, false);

  for (;;) {
    std::optional<std::pair<std::size_t, std::size_t>> best;  // (row, col)
    for (std::size_t c = 0; c < nu && !best; ++c) {
      if (is_pivot_col[c]) continue;
      for (std::size_t r = 0; r < rows.size(); ++r) {
        if (!used[r] && rows[r].a[c].is_constant() && !rows[r].a[c].is_zero()) {
          best = {r, c};
          break;
        }
      }
    }
    if (!best) {
      std::pair<std::size_t, int> best_key{0, 0};
      for (std::size_t c = 0; c < nu; ++c) {
        if (is_pivot_col[c]) continue;
        for (std::size_t r = 0; r < rows.size(); ++r) {
          if (used[r] || rows[r].a[c].is_zero()) continue;
          auto key = detail::simplicity(rows[r].a[c]);
          if (!best || key < best_key) {
            best = {r, c};
            best_key = key;
          }
        }
      }
    }
    if (!best) break;
    auto [pr, pc] = *best;
    used[pr] = true;
    is_pivot_col[pc] = true;
    pivot_row.push_back(pr);
    pivot_col.push_back(pc);
    const Scalar p = rows[pr].a[pc];
    if (!p.is_constant()) {
      Scalar f = detail::normalized_factor(p);
      detail::push_unique(step.assumptions, f);
      detail::push_unique(factors, f);
    }
    for (std::size_t s = 0; s < rows.size(); ++s) {
      if (s == pr || rows[s].a[pc].is_zero()) continue;
      const Scalar f = rows[s].a[pc];
      const Row& piv = rows[pr];
      Row updated;
      for (std::size_t c = 0; c < nu; ++c) updated.a.push_back(rules.reduce(p * rows[s].a[c] - f * piv.a[c]));
      updated.b = rules.reduce(p * rows[s].b - f * piv.b);
      detail::simplify_row(updated, factors, rules);
      rows[s] = std::move(updated);
    }
  }

  // Residual equations carry no unknowns any more.
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (used[r] || rows[r].b.is_zero()) continue;
    Scalar res = rows[r].b;
    for (const auto& f : factors) {
      for (int guard = 0; guard < 8; ++guard) {
        auto q = divide_exact(res, f, rules);
        if (!q) break;
        res = std::move(*q);
      }
    }
    res = res.is_constant() ? Scalar(1) : detail::normalized_factor(res);
    detail::push_unique(step.obstructions, res);
  }
  bool empty = std::any_of(step.obstructions.begin(), step.obstructions.end(),
                           [](const Scalar& s) { return s.is_constant(); });
  if (empty) {
    step.obstructions.erase(std::remove_if(step.obstructions.begin(), step.obstructions.end(),
                                           [](const Scalar& s) { return !s.is_constant(); }),
                            step.obstructions.end());
  }

  std::vector<std::size_t> free_cols;
  for (std::size_t c = 0; c < nu; ++c) {
    if (!is_pivot_col[c]) free_cols.push_back(c);
  }

  // Kernel basis, one vector per free unknown, denominators cleared.
  std::vector<std::vector<Scalar>> kernel;
  for (std::size_t f : free_cols) {
    std::vector<detail::Fraction> entries(nu, {Scalar(), Scalar(1)});
    entries[f] = {Scalar(1), Scalar(1)};
    for (std::size_t i = 0; i < pivot_row.size(); ++i) {
      const Row& r = rows[pivot_row[i]];
      if (r.a[f].is_zero()) continue;
      entries[pivot_col[i]] = detail::reduce_fraction(-r.a[f], r.a[pivot_col[i]], factors, rules);
    }
    std::vector<Scalar> dens;
    for (const auto& e : entries) {
      if (!e.den.is_constant()) detail::push_unique(dens, e.den);
    }
    Scalar common(1);
    for (const auto& d : dens) common = common * d;
    std::vector<Scalar> vec;
    for (const auto& e : entries) {
      auto q = divide_exact(common, e.den, rules);
      vec.push_back(rules.reduce(e.num * *q));
    }
    Row tmp{vec, Scalar()};
    Rational c = detail::row_content(tmp);
    for (auto& s : vec) s = s / c;
    kernel.push_back(std::move(vec));
  }

  // Particular solution with the free unknowns set to zero.
  std::vector<Scalar> particular(nu);
  if (!empty) {
    std::vector<detail::Fraction> entries(nu, {Scalar(), Scalar(1)});
    for (std::size_t i = 0; i < pivot_row.size(); ++i) {
      const Row& r = rows[pivot_row[i]];
      if (r.b.is_zero()) continue;
      entries[pivot_col[i]] = detail::reduce_fraction(-r.b, r.a[pivot_col[i]], factors, rules);
    }
    std::vector<Scalar> dens;
    for (const auto& e : entries) {
      if (!e.den.is_constant()) detail::push_unique(dens, e.den);
    }
    if (dens.empty()) {
      for (std::size_t c = 0; c < nu; ++c) particular[c] = entries[c].num / entries[c].den.constant_value();
    } else if (kernel.empty()) {
      step.representable = false;
    } else {
      // Project onto the orthogonal complement of the kernel to look for a
      // polynomial representative.
      Scalar common(1);
      for (const auto& d : dens) common = common * d;
      std::vector<Scalar> num(nu);
      for (std::size_t c = 0; c < nu; ++c) num[c] = rules.reduce(entries[c].num * *divide_exact(common, entries[c].den, rules));
      const std::size_t r = kernel.size();
      ScalarMatrix gram(r, std::vector<Scalar>(r));
      for (std::size_t a = 0; a < r; ++a) {
        for (std::size_t b = 0; b < r; ++b) {
          Scalar s;
          for (std::size_t c = 0; c < nu; ++c) s += kernel[a][c] * kernel[b][c];
          gram[a][b] = rules.reduce(s);
        }
      }
      Scalar delta = rules.reduce(determinant(gram));
      ScalarMatrix adj = adjugate(gram);
      std::vector<Scalar> kn(r);
      for (std::size_t a = 0; a < r; ++a) {
        for (std::size_t c = 0; c < nu; ++c) kn[a] += kernel[a][c] * num[c];
      }
      Scalar denom = rules.reduce(common * delta);
      for (std::size_t c = 0; c < nu && step.representable; ++c) {
        Scalar v = num[c] * delta;
        for (std::size_t a = 0; a < r; ++a) {
          for (std::size_t b = 0; b < r; ++b) v -= kernel[a][c] * adj[a][b] * kn[b];
        }
        auto q = delta.is_zero() ? std::nullopt : divide_exact(v, denom, rules);
        if (!q) {
          step.representable = false;
        } else {
          particular[c] = *q;
        }
      }
    }
  }

  for (std::size_t k = 0; k < free_cols.size(); ++k) step.parameters.push_back(namer.next());
  step.params_after = namer.spec();
  if (step.representable && !empty) {
    for (std::size_t c = 0; c < nu; ++c) {
      Scalar v = particular[c];
      for (std::size_t k = 0; k < kernel.size(); ++k) v += var(step.parameters[k]) * kernel[k][c];
      step.solution.emplace(system.unknowns[c], rules.reduce(v));
    }
  }
  step.kernel.clear();
  // Stash the flat vectors until the caller groups them per fiber variable.
  step.particular.clear();
  step.rules.clear();
  for (std::size_t c = 0; c < nu; ++c) {
    Form pf(1, 0);
    pf.add({}, particular[c]);
    step.particular.push_back(std::move(pf));
  }
  step.kernel.resize(kernel.size());
  for (std::size_t k = 0; k < kernel.size(); ++k) {
    for (std::size_t c = 0; c < nu; ++c) {
      Form kf(1, 0);
      kf.add({}, kernel[k][c]);
      step.kernel[k].push_back(std::move(kf));
    }
  }

  if (empty) {
    step.verdict = Verdict::Empty;
  } else if (!step.obstructions.empty()) {
    step.verdict = Verdict::Obstructed;
  } else {
    step.verdict = step.parameters.empty() ? Verdict::Determined : Verdict::Underdetermined;
  }
  return step;
}

// ---------------------------------------------------------------------------
// Prolongation

struct ProlongResult {
  ProlongationStep step;
  std::optional<RelAlgebroid> next;
};

inline ProlongResult prolong(const RelAlgebroid& alg) {
  if (auto diags = validate(alg); !diags.empty()) {
    throw std::invalid_argument("invalid algebroid: " + diags.front().location + ": " + diags.front().message);
  }
  ExtensionAnsatz ansatz = make_ansatz(alg);
  auto forms = torsion(ansatz);
  LinearSystem sys = extract_system(forms, ansatz.flat_unknowns());
  ParamNamer namer(alg);
  ProlongationStep step = solve(sys, alg.rules, namer);
  step.torsion = forms;
  step.fiber = alg.vars.fiber;

  // Group the flat solution data into forms per fiber variable.
  const std::size_t n = alg.rank();
  std::vector<Form> particular;
  std::vector<std::vector<Form>> kernel(step.kernel.size());
  for (std::size_t y = 0; y < alg.vars.fiber.size(); ++y) {
    Form pf(n, 1);
    for (std::size_t i = 0; i < n; ++i) pf.add({static_cast<int>(i)}, step.particular[y * n + i].coeff({}));
    particular.push_back(std::move(pf));
    for (std::size_t k = 0; k < step.kernel.size(); ++k) {
      Form kf(n, 1);
      for (std::size_t i = 0; i < n; ++i) kf.add({static_cast<int>(i)}, step.kernel[k][y * n + i].coeff({}));
      kernel[k].push_back(std::move(kf));
    }
  }
  step.particular = std::move(particular);
  step.kernel = std::move(kernel);

  ProlongResult out;
  if (step.representable && (step.verdict == Verdict::Determined || step.verdict == Verdict::Underdetermined)) {
    for (std::size_t y = 0; y < alg.vars.fiber.size(); ++y) {
      Form rule(n, 1);
      for (std::size_t i = 0; i < n; ++i) rule.add({static_cast<int>(i)}, step.solution.at(ansatz.unknowns[y][i]));
      step.rules.push_back(std::move(rule));
    }
    RelAlgebroid next = alg;
    for (std::size_t y = 0; y < alg.vars.fiber.size(); ++y) {
      next.vars.base.push_back(alg.vars.fiber[y]);
      next.dbase.push_back(step.rules[y]);
    }
    next.vars.fiber = step.parameters;
    next.params = step.params_after;
    out.next = std::move(next);
  }
  for (const auto& lf : forms) {
    if (step.representable && step.verdict != Verdict::Empty) {
      Form f = reduce(lf.form.map_coefficients([&](const Scalar& c) { return substitute(c, step.solution); }),
                      alg.rules);
      if (!f.is_zero()) step.residuals.push_back({lf.label, std::move(f)});
      continue;
    }
    bool unknown_free = true;
    for (const auto& [t, c] : lf.form.terms()) {
      for (const auto& u : sys.unknowns) unknown_free = unknown_free && !contains_variable(c, u);
    }
    if (unknown_free && !lf.form.is_zero()) step.residuals.push_back(lf);
  }
  out.step = std::move(step);
  return out;
}

// Text of a solved rule, e.g. "theta3 + c1*(-sin(phi)*theta1 + cos(phi)*theta2)".
inline std::string rule_text(const ProlongationStep& step, std::size_t y, const Frame& frame) {
  std::string out;
  if (!step.particular.at(y).is_zero()) out = to_string(step.particular[y], frame);
  for (std::size_t k = 0; k < step.kernel.size(); ++k) {
    const Form& kf = step.kernel[k].at(y);
    if (kf.is_zero()) continue;
    std::string body = to_string(kf, frame);
    bool single = kf.terms().size() == 1 && kf.terms().begin()->second.terms().size() == 1;
    bool negative = single && kf.terms().begin()->second.terms().front().second < 0;
    std::string piece = single && !negative ? step.parameters[k] + "*" + body
                                            : step.parameters[k] + "*(" + body + ")";
    out += out.empty() ? piece : " + " + piece;
  }
  return out.empty() ? "0" : out;
}

// ---------------------------------------------------------------------------
// Towers

struct TowerLevel {
  RelAlgebroid algebroid;
  ProlongationStep step;
  bool extension_ok = false;
  bool completion_ok = false;
  std::vector<LabeledForm> completion_failures;
};

struct Tower {
  std::vector<TowerLevel> levels;
  int depth = 0;
  std::optional<RelAlgebroid> top;  // successor of the last level, if any

  bool stopped_early() const { return static_cast<int>(levels.size()) < depth || !top; }
};

// Checks that `next` extends and completes `cur`.
inline void verify_level(const RelAlgebroid& cur, const RelAlgebroid& next, TowerLevel& level) {
  level.extension_ok = next.rank() == cur.rank();
  for (std::size_t i = 0; level.extension_ok && i < cur.rank(); ++i) {
    level.extension_ok = form_eq(apply_D_frame(next, {static_cast<int>(i)}), cur.dtheta[i], cur.rules);
  }
  for (std::size_t m = 0; level.extension_ok && m < cur.vars.base.size(); ++m) {
    Form lifted = apply_D(next, Scalar(var(cur.vars.base[m])));
    level.extension_ok = form_eq(lifted, cur.dbase[m], cur.rules);
  }
  VariableRules rules = base_rules(next);
  for (auto& lf : square_forms(cur, rules)) {
    if (!lf.form.is_zero()) level.completion_failures.push_back(std::move(lf));
  }
  level.completion_ok = level.completion_failures.empty();
}

inline Tower tower(const RelAlgebroid& alg, int depth) {
  if (depth < 1) throw std::invalid_argument("tower depth must be positive");
  Tower t;
  t.depth = depth;
  RelAlgebroid cur = alg;
  for (int k = 1; k <= depth; ++k) {
    ProlongResult r = prolong(cur);
    TowerLevel level{cur, std::move(r.step), false, false, {}};
    if (r.next) verify_level(cur, *r.next, level);
    t.levels.push_back(std::move(level));
    if (!r.next) return t;
    cur = std::move(*r.next);
  }
  t.top = std::move(cur);
  return t;
}

}  // namespace relalg
