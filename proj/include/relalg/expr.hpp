#pragma once

// Exact symbolic scalars: polynomials over Q whose atoms are variables,
// opaque function applications with formal derivative orders, and sin/cos.
// Every Scalar is kept in canonical form (sorted monomials, collected
// coefficients, no zero terms), so structural equality is semantic equality
// in the polynomial ring.

#include <gmpxx.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace relalg {

using Rational = mpq_class;

class Scalar;
struct AtomNode;

enum class AtomKind : std::uint8_t { Variable, Function, Sin, Cos };

class Atom {
 public:
  static Atom variable(std::string name);
  static Atom function(std::string name, std::vector<int> derivs, std::vector<Scalar> args);
  static Atom trig(AtomKind kind, Scalar arg);

  AtomKind kind() const noexcept;
  const std::string& name() const noexcept;
  // Per-argument derivative orders; empty for variables.
  const std::vector<int>& derivs() const noexcept;
  const std::vector<Scalar>& args() const noexcept;
  bool is_variable() const noexcept { return kind() == AtomKind::Variable; }

 private:
  explicit Atom(std::shared_ptr<const AtomNode> node) : node_(std::move(node)) {}
  std::shared_ptr<const AtomNode> node_;
};

inline int compare(const Atom& a, const Atom& b);
inline bool operator==(const Atom& a, const Atom& b) { return compare(a, b) == 0; }
inline bool operator<(const Atom& a, const Atom& b) { return compare(a, b) < 0; }

class Monomial {
 public:
  using Factor = std::pair<Atom, int>;

  Monomial() = default;
  explicit Monomial(Atom atom, int exponent = 1) {
    if (exponent > 0) factors_.emplace_back(std::move(atom), exponent);
  }

  const std::vector<Factor>& factors() const noexcept { return factors_; }
  bool is_one() const noexcept { return factors_.empty(); }
  int degree() const {
    int d = 0;
    for (const auto& f : factors_) d += f.second;
    return d;
  }
  int exponent_of(const Atom& atom) const;
  std::optional<Monomial> divide(const Monomial& divisor) const;

  friend Monomial operator*(const Monomial& a, const Monomial& b);

 private:
  std::vector<Factor> factors_;  // ascending atom order, positive exponents
};

// Lexicographic monomial order; the smallest atom is the most significant.
inline int compare(const Monomial& a, const Monomial& b);
inline bool operator==(const Monomial& a, const Monomial& b) { return compare(a, b) == 0; }

struct MonomialGreater {
  bool operator()(const Monomial& a, const Monomial& b) const { return compare(a, b) > 0; }
};

class Scalar {
 public:
  using Term = std::pair<Monomial, Rational>;

  Scalar() = default;
  Scalar(int value) : Scalar(Rational(value)) {}  // NOLINT(google-explicit-constructor)
  Scalar(Rational value) {                        // NOLINT(google-explicit-constructor)
    value.canonicalize();
    if (value != 0) terms_.emplace_back(Monomial{}, std::move(value));
  }
  explicit Scalar(Atom atom) { terms_.emplace_back(Monomial(std::move(atom)), Rational(1)); }

  static Scalar from_terms(std::vector<Term> terms);

  const std::vector<Term>& terms() const noexcept { return terms_; }
  bool is_zero() const noexcept { return terms_.empty(); }
  bool is_constant() const noexcept {
    return terms_.empty() || (terms_.size() == 1 && terms_.front().first.is_one());
  }
  Rational constant_value() const {
    if (!is_constant()) throw std::logic_error("constant_value on non-constant scalar");
    return terms_.empty() ? Rational(0) : terms_.front().second;
  }
  // Coefficient of the monomial 1.
  Rational constant_term() const {
    if (!terms_.empty() && terms_.back().first.is_one()) return terms_.back().second;
    return Rational(0);
  }

  Scalar& operator+=(const Scalar& o) { return *this = *this + o; }
  Scalar& operator-=(const Scalar& o) { return *this = *this - o; }
  Scalar& operator*=(const Scalar& o) { return *this = *this * o; }

  friend Scalar operator+(const Scalar& a, const Scalar& b) { return merge(a, b, 1); }
  friend Scalar operator-(const Scalar& a, const Scalar& b) { return merge(a, b, -1); }
  friend Scalar operator*(const Scalar& a, const Scalar& b);
  Scalar operator-() const {
    Scalar r = *this;
    for (auto& t : r.terms_) t.second = -t.second;
    return r;
  }
  Scalar operator/(const Rational& d) const {
    if (d == 0) throw std::domain_error("division of a scalar by zero");
    Scalar r = *this;
    for (auto& t : r.terms_) t.second /= d;
    return r;
  }

 private:
  static Scalar merge(const Scalar& a, const Scalar& b, int sign);
  std::vector<Term> terms_;  // descending monomial order, nonzero coefficients
};

inline int compare(const Scalar& a, const Scalar& b);
inline bool operator==(const Scalar& a, const Scalar& b) { return compare(a, b) == 0; }
inline bool operator!=(const Scalar& a, const Scalar& b) { return compare(a, b) != 0; }
inline bool operator<(const Scalar& a, const Scalar& b) { return compare(a, b) < 0; }

struct AtomNode {
  AtomKind kind;
  std::string name;
  std::vector<int> derivs;
  std::vector<Scalar> args;
};

// ---------------------------------------------------------------------------
// Atom

inline Atom Atom::variable(std::string name) {
  return Atom(std::make_shared<const AtomNode>(AtomNode{AtomKind::Variable, std::move(name), {}, {}}));
}

inline Atom Atom::function(std::string name, std::vector<int> derivs, std::vector<Scalar> args) {
  if (derivs.empty()) derivs.assign(args.size(), 0);
  if (derivs.size() != args.size()) throw std::invalid_argument("derivative orders must match arity of " + name);
  return Atom(std::make_shared<const AtomNode>(
      AtomNode{AtomKind::Function, std::move(name), std::move(derivs), std::move(args)}));
}

inline Atom Atom::trig(AtomKind kind, Scalar arg) {
  if (kind != AtomKind::Sin && kind != AtomKind::Cos) throw std::invalid_argument("trig atom must be sin or cos");
  std::string name = kind == AtomKind::Sin ? "sin" : "cos";
  std::vector<Scalar> args;
  args.push_back(std::move(arg));
  return Atom(std::make_shared<const AtomNode>(AtomNode{kind, std::move(name), {}, std::move(args)}));
}

inline AtomKind Atom::kind() const noexcept { return node_->kind; }
inline const std::string& Atom::name() const noexcept { return node_->name; }
inline const std::vector<int>& Atom::derivs() const noexcept { return node_->derivs; }
inline const std::vector<Scalar>& Atom::args() const noexcept { return node_->args; }

inline int compare(const Atom& a, const Atom& b) {
  if (&a.name() == &b.name()) return 0;  // same node
  if (int c = a.name().compare(b.name()); c != 0) return c < 0 ? -1 : 1;
  if (a.kind() != b.kind()) return a.kind() < b.kind() ? -1 : 1;
  if (a.derivs() != b.derivs()) return a.derivs() < b.derivs() ? -1 : 1;
  const auto& x = a.args();
  const auto& y = b.args();
  for (std::size_t i = 0; i < std::min(x.size(), y.size()); ++i) {
    if (int c = compare(x[i], y[i]); c != 0) return c;
  }
  if (x.size() != y.size()) return x.size() < y.size() ? -1 : 1;
  return 0;
}

// ---------------------------------------------------------------------------
// Monomial

inline int Monomial::exponent_of(const Atom& atom) const {
  for (const auto& [a, e] : factors_) {
    if (a == atom) return e;
  }
  return 0;
}

inline Monomial operator*(const Monomial& a, const Monomial& b) {
  Monomial r;
  auto i = a.factors_.begin();
  auto j = b.factors_.begin();
  while (i != a.factors_.end() && j != b.factors_.end()) {
    int c = compare(i->first, j->first);
    if (c < 0) {
      r.factors_.push_back(*i++);
    } else if (c > 0) {
      r.factors_.push_back(*j++);
    } else {
      r.factors_.emplace_back(i->first, i->second + j->second);
      ++i;
      ++j;
    }
  }
  r.factors_.insert(r.factors_.end(), i, a.factors_.end());
  r.factors_.insert(r.factors_.end(), j, b.factors_.end());
  return r;
}

inline std::optional<Monomial> Monomial::divide(const Monomial& divisor) const {
  Monomial r;
  auto i = factors_.begin();
  for (const auto& [atom, e] : divisor.factors_) {
    while (i != factors_.end() && compare(i->first, atom) < 0) r.factors_.push_back(*i++);
    if (i == factors_.end() || !(i->first == atom) || i->second < e) return std::nullopt;
    if (i->second > e) r.factors_.emplace_back(atom, i->second - e);
    ++i;
  }
  r.factors_.insert(r.factors_.end(), i, factors_.end());
  return r;
}

inline int compare(const Monomial& a, const Monomial& b) {
  const auto& x = a.factors();
  const auto& y = b.factors();
  std::size_t n = std::min(x.size(), y.size());
  for (std::size_t i = 0; i < n; ++i) {
    int c = compare(x[i].first, y[i].first);
    if (c != 0) return c < 0 ? 1 : -1;  // a carries an atom b lacks
    if (x[i].second != y[i].second) return x[i].second > y[i].second ? 1 : -1;
  }
  if (x.size() != y.size()) return x.size() > y.size() ? 1 : -1;
  return 0;
}

// ---------------------------------------------------------------------------
// Scalar

inline Scalar Scalar::from_terms(std::vector<Term> terms) {
  std::map<Monomial, Rational, MonomialGreater> acc;
  for (auto& [m, c] : terms) {
    auto [it, inserted] = acc.try_emplace(std::move(m), c);
    if (!inserted) it->second += c;
  }
  Scalar r;
  r.terms_.reserve(acc.size());
  for (auto& [m, c] : acc) {
    if (c != 0) r.terms_.emplace_back(m, c);
  }
  return r;
}

inline Scalar Scalar::merge(const Scalar& a, const Scalar& b, int sign) {
  Scalar r;
  r.terms_.reserve(a.terms_.size() + b.terms_.size());
  auto i = a.terms_.begin();
  auto j = b.terms_.begin();
  while (i != a.terms_.end() || j != b.terms_.end()) {
    int c = 0;
    if (i == a.terms_.end()) {
      c = -1;
    } else if (j == b.terms_.end()) {
      c = 1;
    } else {
      c = compare(i->first, j->first);
    }
    if (c > 0) {
      r.terms_.push_back(*i++);
    } else if (c < 0) {
      r.terms_.emplace_back(j->first, sign > 0 ? Rational(j->second) : Rational(-j->second));
      ++j;
    } else {
      Rational s = sign > 0 ? Rational(i->second + j->second) : Rational(i->second - j->second);
      if (s != 0) r.terms_.emplace_back(i->first, std::move(s));
      ++i;
      ++j;
    }
  }
  return r;
}

inline Scalar operator*(const Scalar& a, const Scalar& b) {
  if (a.is_zero() || b.is_zero()) return {};
  if (a.is_constant()) {
    Scalar r = b;
    const Rational k = a.constant_value();
    for (auto& t : r.terms_) t.second *= k;
    return r;
  }
  if (b.is_constant()) return b * a;
  std::map<Monomial, Rational, MonomialGreater> acc;
  for (const auto& [ma, ca] : a.terms_) {
    for (const auto& [mb, cb] : b.terms_) {
      Rational c = ca * cb;
      auto [it, inserted] = acc.try_emplace(ma * mb, c);
      if (!inserted) it->second += c;
    }
  }
  Scalar r;
  for (auto& [m, c] : acc) {
    if (c != 0) r.terms_.emplace_back(m, c);
  }
  return r;
}

inline int compare(const Scalar& a, const Scalar& b) {
  const auto& x = a.terms();
  const auto& y = b.terms();
  for (std::size_t i = 0; i < std::min(x.size(), y.size()); ++i) {
    if (int c = compare(x[i].first, y[i].first); c != 0) return c;
    if (x[i].second != y[i].second) return x[i].second < y[i].second ? -1 : 1;
  }
  if (x.size() != y.size()) return x.size() < y.size() ? -1 : 1;
  return 0;
}

// ---------------------------------------------------------------------------
// Builders

inline Scalar var(std::string name) { return Scalar(Atom::variable(std::move(name))); }

inline Scalar fn(std::string name, std::vector<Scalar> args, std::vector<int> derivs = {}) {
  return Scalar(Atom::function(std::move(name), std::move(derivs), std::move(args)));
}

inline Scalar sin(Scalar arg) {
  if (arg.is_zero()) return {};
  return Scalar(Atom::trig(AtomKind::Sin, std::move(arg)));
}

inline Scalar cos(Scalar arg) {
  if (arg.is_zero()) return Scalar(1);
  return Scalar(Atom::trig(AtomKind::Cos, std::move(arg)));
}

inline Scalar power(const Scalar& base, int exponent) {
  if (exponent < 0) throw std::domain_error("negative exponents are outside the polynomial ring");
  Scalar result(1);
  Scalar b = base;
  while (exponent > 0) {
    if (exponent & 1) result = result * b;
    exponent >>= 1;
    if (exponent > 0) b = b * b;
  }
  return result;
}

// Rebuilds an atom after its arguments changed; folds sin(0) and cos(0).
inline Scalar rebuild_atom(const Atom& atom, std::vector<Scalar> args) {
  switch (atom.kind()) {
    case AtomKind::Variable:
      return Scalar(atom);
    case AtomKind::Function:
      return fn(atom.name(), std::move(args), atom.derivs());
    case AtomKind::Sin:
      return sin(std::move(args.at(0)));
    case AtomKind::Cos:
      return cos(std::move(args.at(0)));
  }
  return Scalar(atom);
}

// Replaces every atom by f(atom) and re-expands.
template <class F>
Scalar map_atoms(const Scalar& s, F&& f) {
  Scalar result;
  for (const auto& [m, c] : s.terms()) {
    Scalar term(c);
    for (const auto& [atom, e] : m.factors()) term = term * power(f(atom), e);
    result += term;
  }
  return result;
}

// ---------------------------------------------------------------------------
// Queries

inline void collect_variables(const Scalar& s, std::set<std::string>& out) {
  for (const auto& [m, c] : s.terms()) {
    for (const auto& [atom, e] : m.factors()) {
      if (atom.is_variable()) {
        out.insert(atom.name());
      } else {
        for (const auto& a : atom.args()) collect_variables(a, out);
      }
    }
  }
}

inline std::set<std::string> variables(const Scalar& s) {
  std::set<std::string> out;
  collect_variables(s, out);
  return out;
}

inline bool contains_variable(const Scalar& s, const std::string& name) {
  for (const auto& [m, c] : s.terms()) {
    for (const auto& [atom, e] : m.factors()) {
      if (atom.is_variable()) {
        if (atom.name() == name) return true;
      } else {
        for (const auto& a : atom.args()) {
          if (contains_variable(a, name)) return true;
        }
      }
    }
  }
  return false;
}

inline void collect_functions(const Scalar& s, std::set<std::string>& out) {
  for (const auto& [m, c] : s.terms()) {
    for (const auto& [atom, e] : m.factors()) {
      if (atom.kind() == AtomKind::Function) out.insert(atom.name());
      for (const auto& a : atom.args()) collect_functions(a, out);
    }
  }
}

// Largest exponent of `atom` among the top-level monomials of `s`.
inline int max_degree_in(const Scalar& s, const Atom& atom) {
  int d = 0;
  for (const auto& [m, c] : s.terms()) d = std::max(d, m.exponent_of(atom));
  return d;
}

// ---------------------------------------------------------------------------
// Calculus and substitution

inline Scalar diff(const Scalar& e, const std::string& v);

inline Scalar diff_atom(const Atom& atom, const std::string& v) {
  switch (atom.kind()) {
    case AtomKind::Variable:
      return atom.name() == v ? Scalar(1) : Scalar();
    case AtomKind::Function: {
      Scalar result;
      const auto& args = atom.args();
      for (std::size_t k = 0; k < args.size(); ++k) {
        Scalar inner = diff(args[k], v);
        if (inner.is_zero()) continue;
        std::vector<int> d = atom.derivs();
        ++d[k];
        result += fn(atom.name(), args, d) * inner;
      }
      return result;
    }
    case AtomKind::Sin: {
      Scalar inner = diff(atom.args()[0], v);
      return inner.is_zero() ? Scalar() : cos(atom.args()[0]) * inner;
    }
    case AtomKind::Cos: {
      Scalar inner = diff(atom.args()[0], v);
      return inner.is_zero() ? Scalar() : -(sin(atom.args()[0]) * inner);
    }
  }
  return {};
}

inline Scalar diff(const Scalar& e, const std::string& v) {
  Scalar result;
  for (const auto& [m, c] : e.terms()) {
    const auto& fs = m.factors();
    for (std::size_t i = 0; i < fs.size(); ++i) {
      const auto& [atom, exp] = fs[i];
      Scalar d = diff_atom(atom, v);
      if (d.is_zero()) continue;
      Scalar term(Rational(c * exp));
      for (std::size_t j = 0; j < fs.size(); ++j) {
        int power_j = (j == i) ? fs[j].second - 1 : fs[j].second;
        if (power_j > 0) term = term * Scalar::from_terms({{Monomial(fs[j].first, power_j), Rational(1)}});
      }
      result += term * d;
    }
  }
  return result;
}

// Simultaneous substitution of variables, including inside function arguments.
inline Scalar substitute(const Scalar& e, const std::map<std::string, Scalar>& bindings) {
  if (bindings.empty()) return e;
  std::function<Scalar(const Atom&)> sub = [&](const Atom& atom) -> Scalar {
    if (atom.is_variable()) {
      auto it = bindings.find(atom.name());
      return it == bindings.end() ? Scalar(atom) : it->second;
    }
    std::vector<Scalar> args;
    args.reserve(atom.args().size());
    for (const auto& a : atom.args()) args.push_back(map_atoms(a, sub));
    return rebuild_atom(atom, std::move(args));
  };
  return map_atoms(e, sub);
}

// Coefficients of `e` viewed as a polynomial in `atom` (index = exponent).
inline std::vector<Scalar> split_by_atom(const Scalar& e, const Atom& atom) {
  std::vector<std::vector<Scalar::Term>> parts;
  for (const auto& [m, c] : e.terms()) {
    int k = m.exponent_of(atom);
    if (static_cast<int>(parts.size()) <= k) parts.resize(k + 1);
    Monomial rest = k > 0 ? *m.divide(Monomial(atom, k)) : m;
    parts[k].emplace_back(std::move(rest), c);
  }
  std::vector<Scalar> out;
  out.reserve(parts.size());
  for (auto& p : parts) out.push_back(Scalar::from_terms(std::move(p)));
  if (out.empty()) out.emplace_back();
  return out;
}

// ---------------------------------------------------------------------------
// Rational content

// Scales `e` to integer coefficients with gcd 1 and positive leading coefficient.
inline Scalar primitive_part(const Scalar& e) {
  if (e.is_zero()) return e;
  mpz_class num_gcd = 0;
  mpz_class den_lcm = 1;
  for (const auto& [m, c] : e.terms()) {
    mpz_gcd(num_gcd.get_mpz_t(), num_gcd.get_mpz_t(), c.get_num_mpz_t());
    mpz_lcm(den_lcm.get_mpz_t(), den_lcm.get_mpz_t(), c.get_den_mpz_t());
  }
  Rational scale(den_lcm, num_gcd);
  scale.canonicalize();
  if (e.terms().front().second < 0) scale = -scale;
  return e * Scalar(scale);
}

// ---------------------------------------------------------------------------
// Printing

inline std::string to_string(const Scalar& s);

inline std::string to_string(const Atom& atom) {
  std::ostringstream os;
  switch (atom.kind()) {
    case AtomKind::Variable:
      return atom.name();
    case AtomKind::Sin:
    case AtomKind::Cos:
      os << atom.name() << '(' << to_string(atom.args()[0]) << ')';
      return os.str();
    case AtomKind::Function: {
      os << atom.name();
      const auto& d = atom.derivs();
      if (d.size() == 1) {
        os << std::string(static_cast<std::size_t>(d[0]), '\'');
      } else if (std::any_of(d.begin(), d.end(), [](int k) { return k != 0; })) {
        os << '[';
        for (std::size_t i = 0; i < d.size(); ++i) os << (i ? "," : "") << d[i];
        os << ']';
      }
      os << '(';
      for (std::size_t i = 0; i < atom.args().size(); ++i) os << (i ? ", " : "") << to_string(atom.args()[i]);
      os << ')';
      return os.str();
    }
  }
  return atom.name();
}

inline std::string to_string(const Monomial& m) {
  // Variables print before function atoms; the order is cosmetic only.
  std::vector<const Monomial::Factor*> order;
  for (const auto& f : m.factors()) order.push_back(&f);
  std::stable_partition(order.begin(), order.end(), [](const auto* f) { return f->first.is_variable(); });
  std::string out;
  for (const auto* f : order) {
    if (!out.empty()) out += '*';
    out += to_string(f->first);
    if (f->second != 1) out += '^' + std::to_string(f->second);
  }
  return out;
}

inline std::string to_string(const Scalar& s) {
  if (s.is_zero()) return "0";
  std::string out;
  bool first = true;
  for (const auto& [m, c] : s.terms()) {
    Rational mag = abs(c);
    if (first) {
      if (c < 0) out += '-';
    } else {
      out += c < 0 ? " - " : " + ";
    }
    first = false;
    if (m.is_one()) {
      out += mag.get_str();
    } else if (mag == 1) {
      out += to_string(m);
    } else {
      out += mag.get_str() + '*' + to_string(m);
    }
  }
  return out;
}

inline std::ostream& operator<<(std::ostream& os, const Scalar& s) { return os << to_string(s); }

// ---------------------------------------------------------------------------
// Numeric evaluation (test and diagnostics helper)

inline double evaluate(const Scalar& s, const std::map<std::string, double>& point) {
  std::function<double(const Scalar&)> eval = [&](const Scalar& e) {
    double total = 0.0;
    for (const auto& [m, c] : e.terms()) {
      double term = c.get_d();
      for (const auto& [atom, exp] : m.factors()) {
        double v = 0.0;
        switch (atom.kind()) {
          case AtomKind::Variable: {
            auto it = point.find(atom.name());
            if (it == point.end()) throw std::invalid_argument("no value for variable " + atom.name());
            v = it->second;
            break;
          }
          case AtomKind::Sin:
            v = std::sin(eval(atom.args()[0]));
            break;
          case AtomKind::Cos:
            v = std::cos(eval(atom.args()[0]));
            break;
          case AtomKind::Function:
            throw std::invalid_argument("cannot evaluate opaque function " + atom.name());
        }
        term *= std::pow(v, exp);
      }
      total += term;
    }
    return total;
  };
  return eval(s);
}

}  // namespace relalg
