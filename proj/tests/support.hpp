#pragma once

#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "relalg/relalg.hpp"

namespace relalg::testing {

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

inline std::string model_path(const std::string& name) { return std::string(RELALG_MODELS_DIR) + "/" + name; }

inline Document load_model(const std::string& name) { return parse(read_file(model_path(name))); }

// First algebroid of a model file, with the file-level trig option applied.
inline RelAlgebroid model_algebroid(const std::string& name) {
  Document doc = load_model(name);
  RelAlgebroid alg = doc.algebroids.at(0);
  if (doc.trig_rewrite) alg.rules.set_trig(true);
  return alg;
}

// Hand-rolled generators over a fixed seed.
class Gen {
 public:
  explicit Gen(unsigned seed) : rng_(seed) {}

  int uniform(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }
  bool coin(double p = 0.5) { return std::bernoulli_distribution(p)(rng_); }
  std::mt19937& engine() { return rng_; }

  Rational rational() {
    int num = 0;
    while (num == 0) num = uniform(-4, 4);
    return Rational(num, uniform(1, 3));
  }

  Scalar monomial(const std::vector<Scalar>& atoms, int max_degree) {
    Scalar m(rational());
    int deg = uniform(0, max_degree);
    for (int d = 0; d < deg && !atoms.empty(); ++d) m *= atoms[static_cast<std::size_t>(uniform(0, static_cast<int>(atoms.size()) - 1))];
    return m;
  }

  Scalar scalar(const std::vector<Scalar>& atoms, int max_degree = 2, int max_terms = 3) {
    Scalar s;
    int terms = uniform(0, max_terms);
    for (int t = 0; t < terms; ++t) s += monomial(atoms, max_degree);
    return s;
  }

  Scalar scalar(const std::vector<std::string>& vars, int max_degree = 2, int max_terms = 3) {
    return scalar(atoms_of(vars), max_degree, max_terms);
  }

  Form form(std::size_t rank, int degree, const std::vector<Scalar>& atoms, int max_degree = 2, int max_terms = 2) {
    Form f(rank, degree);
    for (const auto& t : tuples(rank, degree)) {
      if (coin(0.6)) f.add(t, scalar(atoms, max_degree, max_terms));
    }
    return f;
  }

  // Empty-fiber algebroid with polynomial structure functions in the base variables.
  RelAlgebroid algebroid(std::size_t rank, std::size_t base, int max_degree = 2) {
    std::vector<std::string> frame;
    for (std::size_t i = 0; i < rank; ++i) frame.push_back("e" + std::to_string(i + 1));
    RelAlgebroid alg;
    alg.name = "random";
    alg.frame = Frame(frame);
    for (std::size_t m = 0; m < base; ++m) alg.vars.base.push_back("x" + std::to_string(m + 1));
    auto atoms = atoms_of(alg.vars.base);
    for (std::size_t i = 0; i < rank; ++i) alg.dtheta.push_back(form(rank, 2, atoms, max_degree));
    for (std::size_t m = 0; m < base; ++m) alg.dbase.push_back(form(rank, 1, atoms, max_degree));
    return alg;
  }

  static std::vector<Scalar> atoms_of(const std::vector<std::string>& vars) {
    std::vector<Scalar> out;
    for (const auto& v : vars) out.push_back(var(v));
    return out;
  }

  static std::vector<IndexTuple> tuples(std::size_t rank, int degree) {
    std::vector<IndexTuple> out;
    IndexTuple cur;
    auto rec = [&](auto&& self, int start) -> void {
      if (static_cast<int>(cur.size()) == degree) {
        out.push_back(cur);
        return;
      }
      for (int i = start; i < static_cast<int>(rank); ++i) {
        cur.push_back(i);
        self(self, i + 1);
        cur.pop_back();
      }
    };
    rec(rec, 0);
    return out;
  }

 private:
  std::mt19937 rng_;
};

}  // namespace relalg::testing
