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

namespace relalg {

using MultiIndex = std::vector<int>;  // sorted indices into the independent variables

// Coordinates on J^k(R^n, R^m): x^a and u^b_I with |I| <= k.
class JetChart {
 public:
  JetChart(std::vector<std::string> independent, std::vector<std::string> dependent, int order)
      : independent_(std::move(independent)), dependent_(std::move(dependent)), order_(order) {
    if (independent_.empty() || dependent_.empty()) throw std::invalid_argument("jet chart needs variables");
    if (order_ < 0) throw std::invalid_argument("negative jet order");
    compact_ = std::all_of(independent_.begin(), independent_.end(), [](const std::string& s) { return s.size() == 1; });
  }

  const std::vector<std::string>& independent() const noexcept { return independent_; }
  const std::vector<std::string>& dependent() const noexcept { return dependent_; }
  int order() const noexcept { return order_; }
  JetChart with_order(int k) const { return JetChart(independent_, dependent_, k); }

  // All sorted multi-indices of length `len`, in lexicographic order.
  std::vector<MultiIndex> multi_indices(int len) const {
    std::vector<MultiIndex> out;
    MultiIndex cur;
    const int n = static_cast<int>(independent_.size());
    auto rec = [&](auto&& self, int start) -> void {
      if (static_cast<int>(cur.size()) == len) {
        out.push_back(cur);
        return;
      }
      for (int i = start; i < n; ++i) {
        cur.push_back(i);
        self(self, i);
        cur.pop_back();
      }
    };
    rec(rec, 0);
    return out;
  }

  std::string name(std::size_t dep, const MultiIndex& idx) const {
    std::string out = dependent_.at(dep);
    if (idx.empty()) return out;
    out += '_';
    for (std::size_t i = 0; i < idx.size(); ++i) {
      if (!compact_ && i) out += '_';
      out += independent_.at(static_cast<std::size_t>(idx[i]));
    }
    return out;
  }

  // Dependent-variable coordinates of the given order, dependent-major.
  std::vector<std::string> coordinates_of_order(int k) const {
    std::vector<std::string> out;
    for (std::size_t b = 0; b < dependent_.size(); ++b) {
      for (const auto& idx : multi_indices(k)) out.push_back(name(b, idx));
    }
    return out;
  }

  // Every chart coordinate: independents, then u^b_I by increasing order.
  std::vector<std::string> coordinates() const {
    std::vector<std::string> out = independent_;
    for (int k = 0; k <= order_; ++k) {
      auto c = coordinates_of_order(k);
      out.insert(out.end(), c.begin(), c.end());
    }
    return out;
  }

  std::string frame_name(std::size_t a) const { return "d" + independent_.at(a); }

  // Inverse of name(): dependent index and multi-index of a coordinate.
  std::optional<std::pair<std::size_t, MultiIndex>> parse(const std::string& coord) const {
    for (int k = 0; k <= order_ + 1; ++k) {
      for (std::size_t b = 0; b < dependent_.size(); ++b) {
        for (const auto& idx : multi_indices(k)) {
          if (name(b, idx) == coord) return std::make_pair(b, idx);
        }
      }
    }
    return std::nullopt;
  }

 private:
  std::vector<std::string> independent_;
  std::vector<std::string> dependent_;
  int order_;
  bool compact_ = true;
};

inline MultiIndex extend(MultiIndex idx, int a) {
  idx.insert(std::upper_bound(idx.begin(), idx.end(), a), a);
  return idx;
}

struct SolvedPDE {
  JetChart chart;
  std::vector<std::pair<std::string, Scalar>> rules;  // top-order coordinate = expression
};

inline RelAlgebroid total_derivative_algebroid(const JetChart& chart) {
  if (chart.order() < 1) throw std::invalid_argument("total derivative needs jet order at least 1");
  const std::size_t n = chart.independent().size();
  std::vector<std::string> frame_names;
  for (std::size_t a = 0; a < n; ++a) frame_names.push_back(chart.frame_name(a));
  RelAlgebroid alg;
  alg.name = "jets";
  alg.frame = Frame(frame_names);
  alg.dtheta.assign(n, Form(n, 2));
  for (std::size_t a = 0; a < n; ++a) {
    alg.vars.base.push_back(chart.independent()[a]);
    alg.dbase.push_back(Form::covector(n, static_cast<int>(a)));
  }
  for (int k = 0; k < chart.order(); ++k) {
    for (std::size_t b = 0; b < chart.dependent().size(); ++b) {
      for (const auto& idx : chart.multi_indices(k)) {
        alg.vars.base.push_back(chart.name(b, idx));
        Form d(n, 1);
        for (std::size_t a = 0; a < n; ++a) d.add({static_cast<int>(a)}, var(chart.name(b, extend(idx, static_cast<int>(a)))));
        alg.dbase.push_back(std::move(d));
      }
    }
  }
  alg.vars.fiber = chart.coordinates_of_order(chart.order());
  return alg;
}

// Substitutes rules into each other until no assigned coordinate remains.
inline std::map<std::string, Scalar> resolve_rules(const std::vector<std::pair<std::string, Scalar>>& rules) {
  std::map<std::string, Scalar> raw;
  for (const auto& [k, v] : rules) {
    if (!raw.emplace(k, v).second) throw std::invalid_argument("coordinate " + k + " assigned twice");
  }
  std::map<std::string, Scalar> done;
  std::set<std::string> active;
  auto visit = [&](auto&& self, const std::string& key) -> Scalar {
    if (auto it = done.find(key); it != done.end()) return it->second;
    if (!active.insert(key).second) throw std::invalid_argument("cyclic rules through " + key);
    Scalar value = raw.at(key);
    std::map<std::string, Scalar> bind;
    for (const auto& v : variables(value)) {
      if (raw.count(v)) bind.emplace(v, self(self, v));
    }
    value = substitute(value, bind);
    active.erase(key);
    done.emplace(key, value);
    return value;
  };
  for (const auto& [k, v] : raw) visit(visit, k);
  return done;
}

inline RelAlgebroid pde_algebroid(const SolvedPDE& pde) {
  RelAlgebroid alg = total_derivative_algebroid(pde.chart);
  std::set<std::string> top(alg.vars.fiber.begin(), alg.vars.fiber.end());
  for (const auto& [k, v] : pde.rules) {
    if (!top.count(k)) throw std::invalid_argument(k + " is not a top-order coordinate");
  }
  auto resolved = resolve_rules(pde.rules);
  for (auto& f : alg.dbase) {
    f = f.map_coefficients([&](const Scalar& c) { return substitute(c, resolved); });
  }
  std::vector<std::string> fiber;
  for (const auto& y : alg.vars.fiber) {
    if (!resolved.count(y)) fiber.push_back(y);
  }
  alg.vars.fiber = std::move(fiber);
  return alg;
}

// Total derivative d/dx^a on functions of the order-k chart.
inline Scalar total_derivative(const JetChart& chart, const Scalar& f, std::size_t a) {
  Scalar out = diff(f, chart.independent().at(a));
  for (int k = 0; k <= chart.order(); ++k) {
    for (std::size_t b = 0; b < chart.dependent().size(); ++b) {
      for (const auto& idx : chart.multi_indices(k)) {
        std::string name = chart.name(b, idx);
        Scalar partial = diff(f, name);
        if (!partial.is_zero()) out += partial * var(chart.name(b, extend(idx, static_cast<int>(a))));
      }
    }
  }
  return out;
}

struct OracleResult {
  bool consistent = true;
  SolvedPDE prolonged;  // order k+1 chart, rules for the new top coordinates
  std::vector<Scalar> residuals;
};

// Classical first prolongation by total differentiation of each rule.
inline OracleResult pde_prolong_oracle(const SolvedPDE& pde) {
  const JetChart& chart = pde.chart;
  const JetChart up = chart.with_order(chart.order() + 1);
  auto low = resolve_rules(pde.rules);

  std::vector<std::pair<std::string, Scalar>> derived;
  for (const auto& [coord, rhs] : pde.rules) {
    auto parsed = chart.parse(coord);
    if (!parsed || static_cast<int>(parsed->second.size()) != chart.order())
      throw std::invalid_argument(coord + " is not a top-order coordinate");
    for (std::size_t a = 0; a < chart.independent().size(); ++a) {
      std::string target = chart.name(parsed->first, extend(parsed->second, static_cast<int>(a)));
      derived.emplace_back(target, substitute(total_derivative(chart, low.at(coord), a), low));
    }
  }

  std::vector<std::pair<std::string, Scalar>> first;
  std::vector<std::pair<std::string, Scalar>> extra;
  std::set<std::string> seen;
  for (auto& d : derived) (seen.insert(d.first).second ? first : extra).push_back(std::move(d));

  OracleResult out{true, SolvedPDE{up, {}}, {}};
  std::map<std::string, Scalar> defs = resolve_rules(first);
  for (const auto& [k, v] : first) out.prolonged.rules.emplace_back(k, defs.at(k));
  for (const auto& [k, v] : extra) {
    Scalar r = defs.at(k) - substitute(substitute(v, low), defs);
    if (!r.is_zero()) {
      out.consistent = false;
      out.residuals.push_back(r);
    }
  }
  return out;
}

}  // namespace relalg
