#pragma once

// Declaration language for algebroids, jet systems and realizations.
//
//   option trig_rewrite;
//   opaque f/1, a/1;
//   algebroid NAME { base: x; fiber: z; frame: theta1, theta2;
//                    params c from 1; D theta1 = theta1 ^ theta2; D x = z*theta1; }
//   jets NAME { independent: x, y; dependent: u; order: 1; rule u_y = u^2 }
//   realization NAME for ALG { coords: t; theta = d(t); x = t; }
//
// '^' is an integer power when its right operand is a number and the wedge
// product otherwise. '#' starts a comment.

#include <cctype>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "relalg/algebroid.hpp"
#include "relalg/jets.hpp"

namespace relalg {

class ParseError : public std::runtime_error {
 public:
  ParseError(int line, int column, const std::string& message, std::vector<std::string> expected = {})
      : std::runtime_error(format(line, column, message, expected)),
        line_(line),
        column_(column),
        expected_(std::move(expected)) {}

  int line() const noexcept { return line_; }
  int column() const noexcept { return column_; }
  const std::vector<std::string>& expected() const noexcept { return expected_; }

 private:
  static std::string format(int line, int column, const std::string& message, const std::vector<std::string>& exp) {
    std::string out = std::to_string(line) + ":" + std::to_string(column) + ": " + message;
    if (!exp.empty()) {
      out += " (expected ";
      for (std::size_t i = 0; i < exp.size(); ++i) out += (i ? ", " : "") + exp[i];
      out += ")";
    }
    return out;
  }

  int line_;
  int column_;
  std::vector<std::string> expected_;
};

struct JetsBlock {
  std::string name;
  SolvedPDE pde;
};

struct Document {
  std::vector<OpaqueDecl> opaque;  // file-level declarations
  bool trig_rewrite = false;
  std::vector<RelAlgebroid> algebroids;
  std::vector<JetsBlock> jets;
  std::vector<Realization> realizations;

  const RelAlgebroid* find_algebroid(const std::string& name) const {
    for (const auto& a : algebroids) {
      if (a.name == name) return &a;
    }
    return nullptr;
  }
  const JetsBlock* find_jets(const std::string& name) const {
    for (const auto& j : jets) {
      if (j.name == name) return &j;
    }
    return nullptr;
  }
  const Realization* find_realization(const std::string& name) const {
    for (const auto& r : realizations) {
      if (r.name == name) return &r;
    }
    return nullptr;
  }
};

namespace dsl {

enum class Tok { Ident, Number, Punct, End };

struct Token {
  Tok kind = Tok::End;
  std::string text;
  int line = 1;
  int column = 1;
};

inline std::string describe(const Token& t) {
  switch (t.kind) {
    case Tok::Ident:
      return "identifier '" + t.text + "'";
    case Tok::Number:
      return "number " + t.text;
    case Tok::Punct:
      return "'" + t.text + "'";
    case Tok::End:
      return "end of input";
  }
  return t.text;
}

inline std::vector<Token> lex(const std::string& src) {
  std::vector<Token> out;
  int line = 1;
  int col = 1;
  std::size_t i = 0;
  auto advance = [&](std::size_t n) {
    for (std::size_t k = 0; k < n; ++k, ++i) {
      if (src[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
  };
  while (i < src.size()) {
    char c = src[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      advance(1);
    } else if (c == '#') {
      while (i < src.size() && src[i] != '\n') advance(1);
    } else if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t j = i;
      while (j < src.size() && (std::isalnum(static_cast<unsigned char>(src[j])) || src[j] == '_')) ++j;
      out.push_back({Tok::Ident, src.substr(i, j - i), line, col});
      advance(j - i);
    } else if (std::isdigit(static_cast<unsigned char>(c))) {
      std::size_t j = i;
      while (j < src.size() && std::isdigit(static_cast<unsigned char>(src[j]))) ++j;
      out.push_back({Tok::Number, src.substr(i, j - i), line, col});
      advance(j - i);
    } else if (std::string("{}()[],;:=+-*/^'").find(c) != std::string::npos) {
      out.push_back({Tok::Punct, std::string(1, c), line, col});
      advance(1);
    } else {
      throw ParseError(line, col, std::string("unexpected character '") + c + "'");
    }
  }
  out.push_back({Tok::End, "", line, col});
  return out;
}

// Names visible inside an expression and the frame forms live on.
struct Scope {
  std::size_t rank = 0;
  std::map<std::string, int> covectors;          // name -> frame index
  std::set<std::string> variables;
  std::map<std::string, int> functions;          // opaque name -> arity
  std::map<std::string, int> differentials;      // coordinate -> index, enables d(t)
};

class Parser {
 public:
  explicit Parser(const std::string& src) : toks_(lex(src)) {}

  Document document() {
    Document doc;
    while (!at_end()) {
      const Token& t = peek();
      if (is_word("option")) {
        next();
        Token name = expect_ident("option name");
        if (name.text != "trig_rewrite") throw ParseError(name.line, name.column, "unknown option " + name.text, {"trig_rewrite"});
        doc.trig_rewrite = true;
        expect(";");
      } else if (is_word("opaque")) {
        next();
        std::set<std::string> names;
        for (const auto& d : doc.opaque) names.insert(d.name);
        opaque_list(doc.opaque, names);
        expect(";");
      } else if (is_word("algebroid")) {
        doc.algebroids.push_back(algebroid(doc));
      } else if (is_word("jets")) {
        doc.jets.push_back(jets(doc));
      } else if (is_word("realization")) {
        doc.realizations.push_back(realization(doc));
      } else {
        throw ParseError(t.line, t.column, "unexpected " + describe(t),
                         {"'option'", "'opaque'", "'algebroid'", "'jets'", "'realization'"});
      }
    }
    for (auto& a : doc.algebroids) a.rules.set_trig(a.rules.trig() || doc.trig_rewrite);
    return doc;
  }

  Form expression_only(const Scope& scope) {
    scope_ = &scope;
    Form f = expr();
    if (!at_end()) unexpected({"operator", "end of input"});
    return f;
  }

  std::pair<Scalar, Scalar> equation_only(const Scope& scope) {
    scope_ = &scope;
    Scalar lhs = scalar(expr(), "left-hand side");
    expect("=");
    Scalar rhs = scalar(expr(), "right-hand side");
    if (!at_end()) unexpected({"operator", "end of input"});
    return {lhs, rhs};
  }

 private:
  // -- token helpers --------------------------------------------------------
  const Token& peek(std::size_t k = 0) const { return toks_[std::min(pos_ + k, toks_.size() - 1)]; }
  bool at_end() const { return peek().kind == Tok::End; }
  Token next() { return toks_[pos_ < toks_.size() - 1 ? pos_++ : pos_]; }
  bool is_punct(const char* p) const { return peek().kind == Tok::Punct && peek().text == p; }
  bool is_word(const char* w) const { return peek().kind == Tok::Ident && peek().text == w; }
  bool accept(const char* p) {
    if (!is_punct(p)) return false;
    next();
    return true;
  }
  [[noreturn]] void unexpected(std::vector<std::string> expected) const {
    const Token& t = peek();
    throw ParseError(t.line, t.column, "unexpected " + describe(t), std::move(expected));
  }
  Token expect(const char* p) {
    if (!is_punct(p)) unexpected({std::string("'") + p + "'"});
    return next();
  }
  Token expect_ident(const std::string& what) {
    if (peek().kind != Tok::Ident) unexpected({what});
    return next();
  }
  void expect_word(const char* w) {
    if (!is_word(w)) unexpected({std::string("'") + w + "'"});
    next();
  }
  int expect_int(const std::string& what) {
    if (peek().kind != Tok::Number) unexpected({what});
    Token t = next();
    try {
      return std::stoi(t.text);
    } catch (const std::out_of_range&) {
      throw ParseError(t.line, t.column, "number too large");
    }
  }
  // Statement separator: ';', optional before '}'.
  void end_statement() {
    if (accept(";")) return;
    if (is_punct("}")) return;
    unexpected({"';'", "'}'"});
  }
  void optional_colon() { accept(":"); }

  std::vector<Token> ident_list(std::set<std::string>& names, const std::string& what) {
    std::vector<Token> out;
    if (peek().kind != Tok::Ident) return out;
    do {
      Token t = expect_ident(what);
      if (reserved(t.text)) throw ParseError(t.line, t.column, "'" + t.text + "' is a reserved word");
      if (!names.insert(t.text).second) throw ParseError(t.line, t.column, "duplicate name " + t.text);
      out.push_back(t);
    } while (accept(","));
    return out;
  }

  static bool reserved(const std::string& s) {
    static const std::set<std::string> words{"sin", "cos", "D", "d"};
    return words.count(s) > 0;
  }

  void opaque_list(std::vector<OpaqueDecl>& out, std::set<std::string>& names) {
    do {
      Token t = expect_ident("function name");
      if (reserved(t.text)) throw ParseError(t.line, t.column, "'" + t.text + "' is a reserved word");
      if (!names.insert(t.text).second) throw ParseError(t.line, t.column, "duplicate name " + t.text);
      expect("/");
      int arity = expect_int("arity");
      if (arity < 1) throw ParseError(t.line, t.column, "arity must be positive");
      out.push_back({t.text, arity});
    } while (accept(","));
  }

  // -- blocks ---------------------------------------------------------------
  RelAlgebroid algebroid(const Document& doc) {
    next();
    Token name = expect_ident("algebroid name");
    if (doc.find_algebroid(name.text) || doc.find_jets(name.text))
      throw ParseError(name.line, name.column, "duplicate name " + name.text);
    expect("{");
    RelAlgebroid alg;
    alg.name = name.text;
    alg.vars.opaque = doc.opaque;
    std::set<std::string> names;
    for (const auto& d : doc.opaque) names.insert(d.name);
    std::map<std::string, Form> dtheta;
    std::map<std::string, Form> dbase;
    bool have_frame = false;
    Scope scope;
    for (const auto& d : doc.opaque) scope.functions[d.name] = d.arity;

    while (!is_punct("}")) {
      if (at_end()) unexpected({"'}'"});
      if (is_word("base") || is_word("fiber") || is_word("frame")) {
        Token kw = next();
        optional_colon();
        auto ids = ident_list(names, "identifier");
        for (const auto& t : ids) {
          if (kw.text == "base") alg.vars.base.push_back(t.text);
          if (kw.text == "fiber") alg.vars.fiber.push_back(t.text);
        }
        if (kw.text == "frame") {
          if (have_frame) throw ParseError(kw.line, kw.column, "frame declared twice");
          std::vector<std::string> fr;
          for (const auto& t : ids) fr.push_back(t.text);
          alg.frame = Frame(fr);
          have_frame = true;
        }
        end_statement();
      } else if (is_word("opaque")) {
        next();
        optional_colon();
        std::size_t before = alg.vars.opaque.size();
        opaque_list(alg.vars.opaque, names);
        for (std::size_t i = before; i < alg.vars.opaque.size(); ++i)
          scope.functions[alg.vars.opaque[i].name] = alg.vars.opaque[i].arity;
        end_statement();
      } else if (is_word("params")) {
        next();
        optional_colon();
        Token prefix = expect_ident("parameter prefix");
        expect_word("from");
        alg.params = {prefix.text, expect_int("first index")};
        end_statement();
      } else if (is_word("D")) {
        Token d = next();
        if (!have_frame) throw ParseError(d.line, d.column, "the frame must be declared before structure equations");
        Token lhs = expect_ident("covector or base variable");
        scope.rank = alg.rank();
        scope.covectors.clear();
        for (std::size_t i = 0; i < alg.rank(); ++i) scope.covectors[alg.frame.name(i)] = static_cast<int>(i);
        scope.variables.clear();
        scope.variables.insert(alg.vars.base.begin(), alg.vars.base.end());
        scope.variables.insert(alg.vars.fiber.begin(), alg.vars.fiber.end());
        int degree = 0;
        std::map<std::string, Form>* target = nullptr;
        if (scope.covectors.count(lhs.text)) {
          degree = 2;
          target = &dtheta;
        } else if (alg.vars.is_base(lhs.text)) {
          degree = 1;
          target = &dbase;
        } else if (alg.vars.is_fiber(lhs.text)) {
          throw ParseError(lhs.line, lhs.column, "fiber variable " + lhs.text + " cannot have a structure equation");
        } else {
          throw ParseError(lhs.line, lhs.column, "undeclared symbol " + lhs.text);
        }
        if (target->count(lhs.text)) throw ParseError(lhs.line, lhs.column, "duplicate structure equation for " + lhs.text);
        expect("=");
        scope_ = &scope;
        Form rhs = expr();
        if (rhs.is_zero()) rhs = Form(alg.rank(), degree);
        target->emplace(lhs.text, std::move(rhs));
        end_statement();
      } else {
        unexpected({"'base'", "'fiber'", "'frame'", "'opaque'", "'params'", "'D'", "'}'"});
      }
    }
    Token close = expect("}");
    if (!have_frame) throw ParseError(close.line, close.column, "algebroid " + alg.name + " has no frame");
    for (std::size_t i = 0; i < alg.rank(); ++i) {
      auto it = dtheta.find(alg.frame.name(i));
      if (it == dtheta.end())
        throw ParseError(close.line, close.column, "missing structure equation for " + alg.frame.name(i));
      alg.dtheta.push_back(it->second);
    }
    for (const auto& v : alg.vars.base) {
      auto it = dbase.find(v);
      if (it == dbase.end()) throw ParseError(close.line, close.column, "missing structure equation for " + v);
      alg.dbase.push_back(it->second);
    }
    return alg;
  }

  JetsBlock jets(const Document& doc) {
    Token kw = next();
    std::string name = "jets";
    if (peek().kind == Tok::Ident) name = next().text;
    if (doc.find_algebroid(name) || doc.find_jets(name))
      throw ParseError(kw.line, kw.column, "duplicate name " + name);
    expect("{");
    std::vector<std::string> indep;
    std::vector<std::string> dep;
    std::optional<int> order;
    std::set<std::string> names;
    std::vector<std::pair<Token, Form>> rules;
    std::optional<JetChart> chart;
    Scope scope;
    for (const auto& d : doc.opaque) scope.functions[d.name] = d.arity;
    auto ensure_chart = [&](const Token& at) {
      if (chart) return;
      if (indep.empty() || dep.empty() || !order)
        throw ParseError(at.line, at.column, "independent, dependent and order must precede rules");
      if (*order < 1) throw ParseError(at.line, at.column, "jet order must be at least 1");
      chart.emplace(indep, dep, *order);
      for (const auto& c : chart->coordinates()) {
        if (!scope.variables.insert(c).second) throw ParseError(at.line, at.column, "coordinate name clash: " + c);
      }
    };
    while (!is_punct("}")) {
      if (at_end()) unexpected({"'}'"});
      if (is_word("independent") || is_word("dependent")) {
        Token k = next();
        if (chart) throw ParseError(k.line, k.column, "variables must be declared before rules");
        optional_colon();
        for (const auto& t : ident_list(names, "identifier")) (k.text == "independent" ? indep : dep).push_back(t.text);
        end_statement();
      } else if (is_word("order")) {
        Token k = next();
        if (chart) throw ParseError(k.line, k.column, "order must be declared before rules");
        optional_colon();
        order = expect_int("jet order");
        end_statement();
      } else if (is_word("rule")) {
        Token k = next();
        ensure_chart(k);
        Token lhs = expect_ident("top-order coordinate");
        auto parsed = chart->parse(lhs.text);
        if (!parsed || static_cast<int>(parsed->second.size()) != chart->order())
          throw ParseError(lhs.line, lhs.column, lhs.text + " is not a top-order coordinate");
        for (const auto& r : rules) {
          if (r.first.text == lhs.text) throw ParseError(lhs.line, lhs.column, "duplicate rule for " + lhs.text);
        }
        expect("=");
        scope_ = &scope;
        Form rhs = expr();
        rules.emplace_back(lhs, std::move(rhs));
        end_statement();
      } else {
        unexpected({"'independent'", "'dependent'", "'order'", "'rule'", "'}'"});
      }
    }
    Token close = expect("}");
    ensure_chart(close);
    JetsBlock block{name, SolvedPDE{*chart, {}}};
    for (auto& [t, f] : rules) block.pde.rules.emplace_back(t.text, f.coeff({}));
    try {
      resolve_rules(block.pde.rules);
    } catch (const std::invalid_argument& e) {
      throw ParseError(close.line, close.column, e.what());
    }
    return block;
  }

  Realization realization(const Document& doc) {
    next();
    Token name = expect_ident("realization name");
    if (doc.find_realization(name.text)) throw ParseError(name.line, name.column, "duplicate name " + name.text);
    expect_word("for");
    Token target = expect_ident("algebroid name");
    const RelAlgebroid* alg = doc.find_algebroid(target.text);
    if (!alg) throw ParseError(target.line, target.column, "undeclared algebroid " + target.text);
    expect("{");
    Realization r;
    r.name = name.text;
    r.algebroid = alg->name;
    std::map<std::string, Form> theta;
    Scope scope;
    for (const auto& d : alg->vars.opaque) scope.functions[d.name] = d.arity;
    std::set<std::string> names;
    while (!is_punct("}")) {
      if (at_end()) unexpected({"'}'"});
      if (is_word("coords")) {
        Token k = next();
        if (!r.coords.empty()) throw ParseError(k.line, k.column, "coordinates declared twice");
        optional_colon();
        for (const auto& t : ident_list(names, "coordinate")) r.coords.push_back(t.text);
        scope.rank = r.coords.size();
        for (std::size_t a = 0; a < r.coords.size(); ++a) {
          scope.variables.insert(r.coords[a]);
          scope.differentials[r.coords[a]] = static_cast<int>(a);
        }
        end_statement();
      } else if (peek().kind == Tok::Ident) {
        Token lhs = next();
        if (r.coords.empty()) throw ParseError(lhs.line, lhs.column, "coordinates must be declared first");
        bool is_cov = alg->frame.index_of(lhs.text).has_value();
        if (!is_cov && !alg->vars.is_declared(lhs.text))
          throw ParseError(lhs.line, lhs.column, "undeclared symbol " + lhs.text);
        if (theta.count(lhs.text) || r.components.count(lhs.text))
          throw ParseError(lhs.line, lhs.column, "duplicate assignment to " + lhs.text);
        expect("=");
        scope_ = &scope;
        Form rhs = expr();
        if (is_cov) {
          if (rhs.is_zero()) rhs = Form(r.coords.size(), 1);
          if (rhs.degree() != 1) throw ParseError(lhs.line, lhs.column, lhs.text + " must be a 1-form");
          theta.emplace(lhs.text, std::move(rhs));
        } else {
          if (rhs.degree() != 0) throw ParseError(lhs.line, lhs.column, lhs.text + " must be a function");
          r.components.emplace(lhs.text, rhs.coeff({}));
        }
        end_statement();
      } else {
        unexpected({"'coords'", "assignment", "'}'"});
      }
    }
    Token close = expect("}");
    for (const auto& c : alg->frame.names()) {
      auto it = theta.find(c);
      if (it == theta.end()) throw ParseError(close.line, close.column, "no expression for " + c);
      r.theta.push_back(it->second);
    }
    return r;
  }

  // -- expressions ----------------------------------------------------------
  Scalar scalar(const Form& f, const std::string& what) const {
    if (f.degree() != 0 && !f.is_zero()) {
      const Token& t = peek();
      throw ParseError(t.line, t.column, what + " must be a function, not a form");
    }
    return f.is_zero() ? Scalar() : f.coeff({});
  }

  Form combine(const Form& a, const Form& b, int sign, const Token& at) const {
    if (a.is_zero() && a.degree() != b.degree()) return sign > 0 ? b : -b;
    if (b.is_zero() && a.degree() != b.degree()) return a;
    if (a.degree() != b.degree()) throw ParseError(at.line, at.column, "adding forms of different degree");
    return sign > 0 ? a + b : a - b;
  }

  Form expr() {
    Form acc;
    bool first = true;
    for (;;) {
      int sign = 1;
      Token op = peek();
      if (is_punct("+") || is_punct("-")) {
        sign = is_punct("-") ? -1 : 1;
        next();
      } else if (!first) {
        break;
      }
      Form t = term();
      acc = first ? (sign > 0 ? t : -t) : combine(acc, t, sign, op);
      first = false;
      if (!is_punct("+") && !is_punct("-")) break;
    }
    return acc;
  }

  Form term() {
    Form acc = factor();
    for (;;) {
      if (is_punct("*")) {
        Token op = next();
        Form rhs = factor();
        if (acc.degree() == 0) {
          acc = acc.coeff({}) * rhs;
        } else if (rhs.degree() == 0) {
          acc = rhs.coeff({}) * acc;
        } else {
          throw ParseError(op.line, op.column, "use '^' to multiply forms");
        }
      } else if (is_punct("/")) {
        Token op = next();
        Form rhs = factor();
        Scalar d = rhs.degree() == 0 ? rhs.coeff({}) : Scalar();
        if (!d.is_constant() || d.is_zero()) throw ParseError(op.line, op.column, "division only by nonzero numbers");
        acc = Scalar(Rational(1) / d.constant_value()) * acc;
      } else {
        return acc;
      }
    }
  }

  Form factor() {
    if (is_punct("-")) {
      next();
      return -factor();
    }
    if (is_punct("+")) {
      next();
      return factor();
    }
    Form base = primary();
    if (!is_punct("^")) return base;
    Token op = next();
    if (peek().kind == Tok::Number) {
      Token n = peek();
      int e = expect_int("exponent");
      if (base.degree() != 0) throw ParseError(n.line, n.column, "integer powers apply to functions only");
      return Form::scalar(scope_->rank, power(base.coeff({}), e));
    }
    if (is_punct(";") || is_punct("}") || is_punct(")") || at_end()) unexpected({"operand of '^'"});
    Form rhs = factor();
    if (base.degree() == 0 && rhs.degree() == 0)
      throw ParseError(op.line, op.column, "'^' between functions needs a nonnegative integer exponent");
    return wedge(base, rhs);
  }

  Form primary() {
    const Token t = peek();
    if (t.kind == Tok::Number) {
      next();
      return Form::scalar(scope_->rank, Scalar(Rational(mpz_class(t.text))));
    }
    if (accept("(")) {
      Form inner = expr();
      expect(")");
      return inner;
    }
    if (t.kind != Tok::Ident) unexpected({"identifier", "number", "'('"});
    next();
    const Scope& s = *scope_;
    if (t.text == "sin" || t.text == "cos") {
      expect("(");
      Scalar arg = scalar(expr(), "argument of " + t.text);
      expect(")");
      return Form::scalar(s.rank, t.text == "sin" ? relalg::sin(arg) : relalg::cos(arg));
    }
    if (t.text == "d" && !s.differentials.empty() && is_punct("(")) {
      next();
      Token c = expect_ident("coordinate");
      auto it = s.differentials.find(c.text);
      if (it == s.differentials.end()) throw ParseError(c.line, c.column, "undeclared coordinate " + c.text);
      expect(")");
      return Form::covector(s.rank, it->second);
    }
    if (auto it = s.functions.find(t.text); it != s.functions.end()) return function_call(t, it->second);
    if (auto it = s.covectors.find(t.text); it != s.covectors.end()) return Form::covector(s.rank, it->second);
    if (s.variables.count(t.text)) return Form::scalar(s.rank, var(t.text));
    throw ParseError(t.line, t.column, "undeclared symbol " + t.text);
  }

  Form function_call(const Token& name, int arity) {
    std::vector<int> derivs;
    int primes = 0;
    while (accept("'")) ++primes;
    if (primes > 0 && arity != 1)
      throw ParseError(name.line, name.column, "primes only apply to functions of one argument");
    if (accept("[")) {
      if (primes) unexpected({"'('"});
      do {
        derivs.push_back(expect_int("derivative order"));
      } while (accept(","));
      expect("]");
      if (static_cast<int>(derivs.size()) != arity)
        throw ParseError(name.line, name.column, "derivative orders must match the arity of " + name.text);
    }
    if (primes) derivs = {primes};
    expect("(");
    std::vector<Scalar> args;
    if (!is_punct(")")) {
      do {
        args.push_back(scalar(expr(), "function argument"));
      } while (accept(","));
    }
    Token close = expect(")");
    if (static_cast<int>(args.size()) != arity)
      throw ParseError(close.line, close.column,
                       name.text + " takes " + std::to_string(arity) + " argument(s), got " + std::to_string(args.size()));
    return Form::scalar(scope_->rank, fn(name.text, std::move(args), std::move(derivs)));
  }

  std::vector<Token> toks_;
  std::size_t pos_ = 0;
  const Scope* scope_ = nullptr;
};

}  // namespace dsl

inline Document parse(const std::string& source) { return dsl::Parser(source).document(); }

// Scope of an algebroid's own symbols, for expressions given on the command line.
inline dsl::Scope scope_of(const RelAlgebroid& alg) {
  dsl::Scope s;
  s.rank = alg.rank();
  for (std::size_t i = 0; i < alg.rank(); ++i) s.covectors[alg.frame.name(i)] = static_cast<int>(i);
  s.variables.insert(alg.vars.base.begin(), alg.vars.base.end());
  s.variables.insert(alg.vars.fiber.begin(), alg.vars.fiber.end());
  for (const auto& d : alg.vars.opaque) s.functions[d.name] = d.arity;
  return s;
}

// Parses "lhs = rhs"; a bare expression means "expr = 0".
inline std::pair<Scalar, Scalar> parse_equation(const std::string& text, const RelAlgebroid& alg) {
  dsl::Scope s = scope_of(alg);
  if (text.find('=') == std::string::npos) {
    Form f = dsl::Parser(text).expression_only(s);
    if (f.degree() != 0 && !f.is_zero()) throw ParseError(1, 1, "constraint must be a function, not a form");
    return {f.is_zero() ? Scalar() : f.coeff({}), Scalar()};
  }
  return dsl::Parser(text).equation_only(s);
}

inline Form parse_form(const std::string& text, const RelAlgebroid& alg) {
  return dsl::Parser(text).expression_only(scope_of(alg));
}

// ---------------------------------------------------------------------------
// Printing; parse(print(doc)) reproduces doc.

namespace dsl {

inline std::string join(const std::vector<std::string>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + v[i];
  return out;
}

inline std::string opaque_text(const std::vector<OpaqueDecl>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + v[i].name + "/" + std::to_string(v[i].arity);
  return out;
}

}  // namespace dsl

inline std::string print(const Document& doc) {
  std::ostringstream os;
  if (doc.trig_rewrite) os << "option trig_rewrite;\n";
  if (!doc.opaque.empty()) os << "opaque " << dsl::opaque_text(doc.opaque) << ";\n";
  for (const auto& alg : doc.algebroids) {
    os << "\nalgebroid " << alg.name << " {\n";
    if (!alg.vars.base.empty()) os << "  base: " << dsl::join(alg.vars.base) << ";\n";
    if (!alg.vars.fiber.empty()) os << "  fiber: " << dsl::join(alg.vars.fiber) << ";\n";
    os << "  frame: " << dsl::join(alg.frame.names()) << ";\n";
    std::vector<OpaqueDecl> local(alg.vars.opaque.begin() + static_cast<std::ptrdiff_t>(doc.opaque.size()),
                                  alg.vars.opaque.end());
    if (!local.empty()) os << "  opaque " << dsl::opaque_text(local) << ";\n";
    if (alg.params.prefix != "c" || alg.params.next != 1)
      os << "  params " << alg.params.prefix << " from " << alg.params.next << ";\n";
    for (std::size_t i = 0; i < alg.rank(); ++i)
      os << "  D " << alg.frame.name(i) << " = " << to_string(alg.dtheta[i], alg.frame) << ";\n";
    for (std::size_t m = 0; m < alg.vars.base.size(); ++m)
      os << "  D " << alg.vars.base[m] << " = " << to_string(alg.dbase[m], alg.frame) << ";\n";
    os << "}\n";
  }
  for (const auto& j : doc.jets) {
    os << "\njets " << j.name << " {\n";
    os << "  independent: " << dsl::join(j.pde.chart.independent()) << ";\n";
    os << "  dependent: " << dsl::join(j.pde.chart.dependent()) << ";\n";
    os << "  order: " << j.pde.chart.order() << ";\n";
    for (const auto& [k, v] : j.pde.rules) os << "  rule " << k << " = " << to_string(v) << ";\n";
    os << "}\n";
  }
  for (const auto& r : doc.realizations) {
    const RelAlgebroid* alg = doc.find_algebroid(r.algebroid);
    std::vector<std::string> dnames;
    for (const auto& c : r.coords) dnames.push_back("d(" + c + ")");
    Frame dframe(dnames);
    os << "\nrealization " << r.name << " for " << r.algebroid << " {\n";
    os << "  coords: " << dsl::join(r.coords) << ";\n";
    for (std::size_t i = 0; i < r.theta.size(); ++i)
      os << "  " << alg->frame.name(i) << " = " << to_string(r.theta[i], dframe) << ";\n";
    for (const auto& [k, v] : r.components) os << "  " << k << " = " << to_string(v) << ";\n";
    os << "}\n";
  }
  return os.str();
}

}  // namespace relalg
