#pragma once

// Side relations applied on top of the polynomial normal form: the opt-in
// Pythagorean rewrite, adjoined ODE-type rules for opaque functions, and
// variable eliminations. Reduction with cos(a)^2 -> 1 - sin(a)^2 is a
// canonical remainder, so is_zero stays decidable with the rule enabled.

#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "relalg/expr.hpp"

namespace relalg {

// f^(order)(t) = rhs(t), with derivatives of higher order obtained by
// differentiating rhs in the placeholder t.
struct FunctionRule {
  std::string function;
  int order = 1;
  std::string placeholder;
  Scalar rhs;
};

class Rules {
 public:
  Rules() = default;
  explicit Rules(bool trig) : trig_(trig) {}

  bool trig() const noexcept { return trig_; }
  void set_trig(bool on) noexcept { trig_ = on; }
  const std::vector<FunctionRule>& function_rules() const noexcept { return functions_; }
  const std::map<std::string, Scalar>& substitutions() const noexcept { return substitutions_; }
  bool empty() const noexcept { return !trig_ && functions_.empty() && substitutions_.empty(); }

  void add_function_rule(FunctionRule rule) { functions_.push_back(std::move(rule)); }
  void add_substitution(const std::string& name, Scalar value) {
    for (auto& [k, v] : substitutions_) v = substitute(v, {{name, value}});
    substitutions_[name] = std::move(value);
  }

  Scalar reduce(const Scalar& s) const {
    if (empty()) return s;
    Scalar current = s;
    for (int pass = 0; pass < 64; ++pass) {
      Scalar next = rewrite_once(current);
      if (next == current) return current;
      current = std::move(next);
    }
    throw std::runtime_error("reduction rules did not reach a fixed point");
  }

  bool is_zero(const Scalar& s) const { return reduce(s).is_zero(); }

  friend bool operator==(const Rules& a, const Rules& b) {
    if (a.trig_ != b.trig_ || a.substitutions_ != b.substitutions_ || a.functions_.size() != b.functions_.size())
      return false;
    for (std::size_t i = 0; i < a.functions_.size(); ++i) {
      const auto& x = a.functions_[i];
      const auto& y = b.functions_[i];
      if (x.function != y.function || x.order != y.order || x.placeholder != y.placeholder || x.rhs != y.rhs)
        return false;
    }
    return true;
  }

 private:
  Scalar rewrite_atom(const Atom& atom) const {
    if (atom.is_variable()) {
      auto it = substitutions_.find(atom.name());
      return it == substitutions_.end() ? Scalar(atom) : it->second;
    }
    std::vector<Scalar> args;
    args.reserve(atom.args().size());
    for (const auto& a : atom.args()) args.push_back(reduce(a));
    if (atom.kind() == AtomKind::Function && args.size() == 1) {
      for (const auto& rule : functions_) {
        if (rule.function != atom.name() || atom.derivs()[0] < rule.order) continue;
        Scalar value = rule.rhs;
        for (int k = rule.order; k < atom.derivs()[0]; ++k) value = diff(value, rule.placeholder);
        return substitute(value, {{rule.placeholder, args[0]}});
      }
    }
    return rebuild_atom(atom, std::move(args));
  }

  Scalar rewrite_once(const Scalar& s) const {
    Scalar out = map_atoms(s, [this](const Atom& a) { return rewrite_atom(a); });
    return trig_ ? reduce_trig(out) : out;
  }

  static Scalar reduce_trig(const Scalar& s) {
    Scalar result;
    for (const auto& [m, c] : s.terms()) {
      Scalar term(c);
      bool changed = false;
      for (const auto& [atom, e] : m.factors()) {
        if (atom.kind() == AtomKind::Cos && e >= 2) {
          changed = true;
          Scalar one_minus_sin2 = Scalar(1) - power(sin(atom.args()[0]), 2);
          term = term * power(one_minus_sin2, e / 2) * power(Scalar(atom), e % 2);
        } else {
          term = term * Scalar::from_terms({{Monomial(atom, e), Rational(1)}});
        }
      }
      result += changed ? term : Scalar::from_terms({{m, c}});
    }
    return result;
  }

  bool trig_ = false;
  std::vector<FunctionRule> functions_;
  std::map<std::string, Scalar> substitutions_;
};

inline Scalar normalize(const Scalar& e, const Rules& rules = {}) { return rules.reduce(e); }
inline bool is_zero(const Scalar& e, const Rules& rules = {}) { return rules.is_zero(e); }

// Exact division in the polynomial ring; nullopt when q does not divide p.
inline std::optional<Scalar> divide_polynomial(const Scalar& p, const Scalar& q) {
  if (q.is_zero()) return std::nullopt;
  if (q.is_constant()) return p / q.constant_value();
  const auto& [lead_m, lead_c] = q.terms().front();
  Scalar remainder = p;
  Scalar quotient;
  for (int guard = 0; !remainder.is_zero(); ++guard) {
    if (guard > 100000) return std::nullopt;
    const auto& [rm, rc] = remainder.terms().front();
    auto m = rm.divide(lead_m);
    if (!m) return std::nullopt;
    Scalar t = Scalar::from_terms({{*m, Rational(rc / lead_c)}});
    quotient += t;
    remainder -= t * q;
  }
  return quotient;
}

// Exact division modulo the active rules. With the trig rewrite enabled the
// divisor is first multiplied by its conjugates cos(a) -> -cos(a) until it is
// cos-free; the reduced normal form is then a free module over the cos-free
// ring, so polynomial division decides divisibility.
inline std::optional<Scalar> divide_exact(const Scalar& p, const Scalar& q, const Rules& rules = {}) {
  Scalar num = rules.reduce(p);
  Scalar den = rules.reduce(q);
  if (den.is_zero()) return std::nullopt;
  if (num.is_zero()) return Scalar();
  if (rules.trig()) {
    for (int guard = 0; guard < 16; ++guard) {
      std::optional<Atom> cos_atom;
      for (const auto& [m, c] : den.terms()) {
        for (const auto& [atom, e] : m.factors()) {
          if (atom.kind() == AtomKind::Cos) {
            cos_atom = atom;
            break;
          }
        }
        if (cos_atom) break;
      }
      if (!cos_atom) break;
      auto parts = split_by_atom(den, *cos_atom);
      if (parts.size() > 2) return std::nullopt;
      Scalar conj = parts[0] - parts[1] * Scalar(*cos_atom);
      num = rules.reduce(num * conj);
      den = rules.reduce(den * conj);
    }
  }
  auto quotient = divide_polynomial(num, den);
  if (!quotient) return std::nullopt;
  return rules.reduce(*quotient);
}

}  // namespace relalg
