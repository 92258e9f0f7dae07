#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "relalg/expr.hpp"
#include "relalg/rules.hpp"

namespace relalg {

// Ordered covector names theta^1..theta^n. Indices are 0-based in code.
class Frame {
 public:
  Frame() = default;
  explicit Frame(std::vector<std::string> names) : names_(std::move(names)) {
    for (std::size_t i = 0; i < names_.size(); ++i) {
      for (std::size_t j = 0; j < i; ++j) {
        if (names_[i] == names_[j]) throw std::invalid_argument("duplicate frame covector " + names_[i]);
      }
    }
  }

  std::size_t rank() const noexcept { return names_.size(); }
  const std::vector<std::string>& names() const noexcept { return names_; }
  const std::string& name(std::size_t i) const { return names_.at(i); }
  std::optional<std::size_t> index_of(const std::string& name) const {
    auto it = std::find(names_.begin(), names_.end(), name);
    if (it == names_.end()) return std::nullopt;
    return static_cast<std::size_t>(it - names_.begin());
  }

  friend bool operator==(const Frame&, const Frame&) = default;

 private:
  std::vector<std::string> names_;
};

using IndexTuple = std::vector<int>;

// Homogeneous element of the exterior algebra over a rank-n frame.
class Form {
 public:
  Form() = default;
  Form(std::size_t rank, int degree) : rank_(rank), degree_(degree) {
    if (degree < 0) throw std::invalid_argument("negative form degree");
  }

  static Form scalar(std::size_t rank, const Scalar& s) {
    Form f(rank, 0);
    f.add({}, s);
    return f;
  }
  static Form covector(std::size_t rank, int index, const Scalar& coeff = Scalar(1)) {
    if (index < 0 || static_cast<std::size_t>(index) >= rank) throw std::out_of_range("covector index");
    Form f(rank, 1);
    f.add({index}, coeff);
    return f;
  }

  std::size_t rank() const noexcept { return rank_; }
  int degree() const noexcept { return degree_; }
  const std::map<IndexTuple, Scalar>& terms() const noexcept { return terms_; }
  bool is_zero() const noexcept { return terms_.empty(); }

  Scalar coeff(const IndexTuple& tuple) const {
    auto it = terms_.find(tuple);
    return it == terms_.end() ? Scalar() : it->second;
  }

  // Adds c * theta^{tuple}; `tuple` must be strictly increasing.
  Form& add(const IndexTuple& tuple, const Scalar& c) {
    if (static_cast<int>(tuple.size()) != degree_) throw std::invalid_argument("index tuple has wrong degree");
    for (std::size_t i = 0; i < tuple.size(); ++i) {
      if (tuple[i] < 0 || static_cast<std::size_t>(tuple[i]) >= rank_ || (i > 0 && tuple[i] <= tuple[i - 1]))
        throw std::invalid_argument("index tuple must be strictly increasing and in range");
    }
    if (c.is_zero()) return *this;
    auto [it, inserted] = terms_.try_emplace(tuple, c);
    if (!inserted) {
      it->second += c;
      if (it->second.is_zero()) terms_.erase(it);
    }
    return *this;
  }

  template <class F>
  Form map_coefficients(F&& f) const {
    Form out(rank_, degree_);
    for (const auto& [t, c] : terms_) out.add(t, f(c));
    return out;
  }

  Form& operator+=(const Form& o) {
    check_compatible(o);
    for (const auto& [t, c] : o.terms_) add(t, c);
    return *this;
  }
  Form& operator-=(const Form& o) {
    check_compatible(o);
    for (const auto& [t, c] : o.terms_) add(t, -c);
    return *this;
  }
  friend Form operator+(Form a, const Form& b) { return a += b; }
  friend Form operator-(Form a, const Form& b) { return a -= b; }
  Form operator-() const {
    return map_coefficients([](const Scalar& c) { return -c; });
  }
  friend Form operator*(const Scalar& s, const Form& f) {
    return f.map_coefficients([&](const Scalar& c) { return s * c; });
  }

  friend bool operator==(const Form& a, const Form& b) {
    return a.rank_ == b.rank_ && a.degree_ == b.degree_ && a.terms_ == b.terms_;
  }

 private:
  void check_compatible(const Form& o) const {
    if (o.rank_ != rank_) throw std::invalid_argument("forms over different frames");
    if (o.degree_ != degree_) throw std::invalid_argument("adding forms of different degree");
  }

  std::size_t rank_ = 0;
  int degree_ = 0;
  std::map<IndexTuple, Scalar> terms_;
};

inline Form add(const Form& a, const Form& b) { return a + b; }
inline Form scale(const Scalar& s, const Form& a) { return s * a; }
inline Scalar coeff(const Form& a, const IndexTuple& tuple) { return a.coeff(tuple); }

// Sign of the shuffle that sorts a ++ b, or 0 if they share an index.
inline int merge_sign(const IndexTuple& a, const IndexTuple& b, IndexTuple& merged) {
  merged.clear();
  merged.reserve(a.size() + b.size());
  int inversions = 0;
  std::size_t i = 0;
  std::size_t j = 0;
  while (i < a.size() || j < b.size()) {
    if (j == b.size() || (i < a.size() && a[i] < b[j])) {
      merged.push_back(a[i++]);
    } else if (i == a.size() || b[j] < a[i]) {
      inversions += static_cast<int>(a.size() - i);
      merged.push_back(b[j++]);
    } else {
      return 0;
    }
  }
  return (inversions % 2 == 0) ? 1 : -1;
}

inline Form wedge(const Form& a, const Form& b) {
  if (a.rank() != b.rank()) throw std::invalid_argument("wedge of forms over different frames");
  Form out(a.rank(), a.degree() + b.degree());
  if (static_cast<std::size_t>(out.degree()) > a.rank()) return out;
  IndexTuple merged;
  for (const auto& [ta, ca] : a.terms()) {
    for (const auto& [tb, cb] : b.terms()) {
      int sign = merge_sign(ta, tb, merged);
      if (sign == 0) continue;
      out.add(merged, sign > 0 ? ca * cb : -(ca * cb));
    }
  }
  return out;
}

inline Form reduce(const Form& f, const Rules& rules) {
  if (rules.empty()) return f;
  return f.map_coefficients([&](const Scalar& c) { return rules.reduce(c); });
}

inline bool form_eq(const Form& a, const Form& b, const Rules& rules = {}) {
  if (a.rank() != b.rank() || a.degree() != b.degree()) return false;
  return reduce(a - b, rules).is_zero();
}

inline std::string to_string(const IndexTuple& t, const Frame& frame) {
  std::string out;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (i) out += '^';
    out += frame.name(static_cast<std::size_t>(t[i]));
  }
  return out;
}

inline std::string to_string(const Form& f, const Frame& frame) {
  if (f.is_zero()) return "0";
  std::string out;
  bool first = true;
  for (const auto& [t, c] : f.terms()) {
    std::string basis = to_string(t, frame);
    std::string coeff;
    bool negative = false;
    if (c.terms().size() == 1) {
      const auto& [m, k] = c.terms().front();
      negative = k < 0;
      Scalar mag = negative ? -c : c;
      coeff = (mag == Scalar(1)) ? "" : to_string(mag);
    } else {
      coeff = '(' + to_string(c) + ')';
    }
    if (first) {
      if (negative) out += '-';
    } else {
      out += negative ? " - " : " + ";
    }
    first = false;
    if (basis.empty()) {
      out += coeff.empty() ? "1" : coeff;
    } else {
      out += coeff.empty() ? basis : coeff + '*' + basis;
    }
  }
  return out;
}

// 1-based comma-separated key used by the JSON emitters, e.g. "1,2".
inline std::string tuple_key(const IndexTuple& t) {
  std::string out;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(t[i] + 1);
  }
  return out;
}

}  // namespace relalg
