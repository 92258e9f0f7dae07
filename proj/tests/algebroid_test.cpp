#include <gtest/gtest.h>

#include "support.hpp"

namespace relalg {
namespace {

using testing::Gen;
using testing::model_algebroid;

Form th(const RelAlgebroid& alg, int i) { return Form::covector(alg.rank(), i - 1); }

bool has_message(const std::vector<Diagnostic>& diags, const std::string& needle) {
  for (const auto& d : diags) {
    if (d.message.find(needle) != std::string::npos) return true;
  }
  return false;
}

// ---------------------------------------------------------------------------
// validate

TEST(Validate, AcceptsUnitGradient) { EXPECT_TRUE(validate(model_algebroid("grad_curvature_unit.ralg")).empty()); }

TEST(Validate, DegreeError) {
  RelAlgebroid alg = model_algebroid("constant_curvature.ralg");
  alg.dtheta[0] = th(alg, 1);
  auto diags = validate(alg);
  ASSERT_EQ(diags.size(), 1u);
  EXPECT_EQ(diags[0].location, "D theta1");
  EXPECT_TRUE(has_message(diags, "degree 1, expected 2"));
}

TEST(Validate, UnknownVariable) {
  RelAlgebroid alg = model_algebroid("constant_curvature.ralg");
  alg.dbase[0] = var("w") * th(alg, 1);
  auto diags = validate(alg);
  ASSERT_EQ(diags.size(), 1u);
  EXPECT_EQ(diags[0].location, "D K");
  EXPECT_EQ(diags[0].message, "unknown variable w");
}

TEST(Validate, FunctionArity) {
  RelAlgebroid alg = model_algebroid("control_system.ralg");
  alg.dbase[0] = fn("f", {var("x")}) * th(alg, 1);
  EXPECT_TRUE(has_message(validate(alg), "expects 2 argument(s)"));
  alg.dbase[0] = fn("h", {var("x")}) * th(alg, 1);
  EXPECT_TRUE(has_message(validate(alg), "undeclared function h"));
}

TEST(Validate, OverlappingLevels) {
  RelAlgebroid alg = model_algebroid("prolong_determined.ralg");
  alg.vars.fiber.push_back("x");
  EXPECT_TRUE(has_message(validate(alg), "declared twice"));
}

// ---------------------------------------------------------------------------
// apply_D

TEST(ApplyD, OnFunctions) {
  RelAlgebroid alg = model_algebroid("grad_curvature_unit.ralg");
  Scalar phi = var("phi");
  EXPECT_EQ(apply_D(alg, var("K")), cos(phi) * th(alg, 1) + sin(phi) * th(alg, 2));
  EXPECT_TRUE(apply_D(alg, Scalar(1)).is_zero());
}

TEST(ApplyD, LeibnizByHand) {
  RelAlgebroid alg = model_algebroid("grad_curvature_unit.ralg");
  Form expected = -sin(var("phi")) * wedge(th(alg, 1), th(alg, 2)) + var("K") * wedge(th(alg, 2), th(alg, 3));
  EXPECT_EQ(apply_D(alg, var("K") * th(alg, 1)), expected);
}

TEST(ApplyD, RejectsFiberCoefficients) {
  RelAlgebroid alg = model_algebroid("grad_curvature_unit.ralg");
  EXPECT_THROW(apply_D(alg, var("phi")), PreconditionError);
}

TEST(ApplyD, LeibnizProperty) {
  Gen gen(31);
  for (int trial = 0; trial < 150; ++trial) {
    std::size_t rank = static_cast<std::size_t>(gen.uniform(1, 4));
    RelAlgebroid alg = gen.algebroid(rank, static_cast<std::size_t>(gen.uniform(0, 3)));
    auto atoms = Gen::atoms_of(alg.vars.base);
    int p = gen.uniform(0, 2);
    int q = gen.uniform(0, 2);
    Form a = gen.form(rank, p, atoms);
    Form b = gen.form(rank, q, atoms);
    Form lhs = apply_D(alg, wedge(a, b));
    Form rhs = wedge(apply_D(alg, a), b) + Scalar(p % 2 ? -1 : 1) * wedge(a, apply_D(alg, b));
    ASSERT_EQ(lhs, rhs);
  }
}

// ---------------------------------------------------------------------------
// Koszul duality

TEST(Bracket, SignConvention) {
  BracketTables t = derivation_to_bracket(model_algebroid("constant_curvature.ralg"));
  EXPECT_EQ(t.c[0][1][2], Scalar(-1));
  EXPECT_EQ(t.c[0][2][1], Scalar(1));
  EXPECT_EQ(t.c[2][0][1], -var("K"));
}

TEST(Bracket, AnchorReadsOffCoefficient) {
  BracketTables t = derivation_to_bracket(model_algebroid("prolong_determined.ralg"));
  EXPECT_EQ(t.rho[0][0], var("z"));
  EXPECT_TRUE(t.rho[0][1].is_zero());
}

TEST(Bracket, ZeroDerivation) {
  RelAlgebroid alg;
  alg.frame = Frame({"a", "b"});
  alg.vars.base = {"x"};
  alg.dtheta = {Form(2, 2), Form(2, 2)};
  alg.dbase = {Form(2, 1)};
  BracketTables t = derivation_to_bracket(alg);
  for (const auto& plane : t.c)
    for (const auto& row : plane)
      for (const auto& v : row) EXPECT_TRUE(v.is_zero());
  for (const auto& v : t.rho[0]) EXPECT_TRUE(v.is_zero());
  RelAlgebroid back = bracket_to_derivation(t, alg.vars, alg.frame);
  EXPECT_EQ(back.dtheta, alg.dtheta);
  EXPECT_EQ(back.dbase, alg.dbase);
  EXPECT_TRUE(check_lie(back).empty());
}

TEST(Bracket, RoundTripSpaceForms) {
  RelAlgebroid alg = model_algebroid("constant_curvature.ralg");
  RelAlgebroid back = bracket_to_derivation(derivation_to_bracket(alg), alg.vars, alg.frame);
  EXPECT_EQ(to_string(back.dtheta[0], alg.frame), "theta2^theta3");
  EXPECT_EQ(to_string(back.dtheta[1], alg.frame), "-theta1^theta3");
  EXPECT_EQ(to_string(back.dtheta[2], alg.frame), "K*theta1^theta2");
}

TEST(Bracket, RejectsAsymmetricTables) {
  BracketTables t(2, 0);
  t.c[0][0][1] = Scalar(1);
  EXPECT_THROW(bracket_to_derivation(t, {}, Frame({"a", "b"})), std::invalid_argument);
  BracketTables d(2, 0);
  d.c[1][0][0] = Scalar(1);
  EXPECT_THROW(bracket_to_derivation(d, {}, Frame({"a", "b"})), std::invalid_argument);
}

TEST(Bracket, RoundTripProperty) {
  Gen gen(32);
  for (int trial = 0; trial < 200; ++trial) {
    RelAlgebroid alg = gen.algebroid(static_cast<std::size_t>(gen.uniform(1, 4)), static_cast<std::size_t>(gen.uniform(0, 3)));
    BracketTables t = derivation_to_bracket(alg);
    RelAlgebroid back = bracket_to_derivation(t, alg.vars, alg.frame);
    ASSERT_EQ(back.dtheta, alg.dtheta);
    ASSERT_EQ(back.dbase, alg.dbase);
    BracketTables again = derivation_to_bracket(back);
    ASSERT_EQ(again.c, t.c);
    ASSERT_EQ(again.rho, t.rho);
  }
}

// Anchor action of e_a on a function of the base.
Scalar anchor_apply(const BracketTables& t, const VariableLevels& vars, std::size_t a, const Scalar& f) {
  Scalar out;
  for (std::size_t m = 0; m < vars.base.size(); ++m) out += t.rho[m][a] * diff(f, vars.base[m]);
  return out;
}

// D(D theta^i) and D(D x^mu) from the bracket tables via the Koszul formula,
// with no use of apply_D.
std::vector<Form> koszul_squares(const BracketTables& t, const VariableLevels& vars) {
  const std::size_t n = t.rank;
  std::vector<Form> out;
  for (std::size_t i = 0; i < n; ++i) {
    auto eta = [&](std::size_t j, std::size_t k) { return -t.c[i][j][k]; };
    Form f(n, 3);
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t b = a + 1; b < n; ++b)
        for (std::size_t c = b + 1; c < n; ++c) {
          Scalar v;
          std::size_t cyc[3][3] = {{a, b, c}, {b, c, a}, {c, a, b}};
          for (auto& [p, q, r] : cyc) {
            v += anchor_apply(t, vars, p, eta(q, r));
            for (std::size_t m = 0; m < n; ++m) v -= t.c[m][p][q] * eta(m, r);
          }
          f.add({static_cast<int>(a), static_cast<int>(b), static_cast<int>(c)}, v);
        }
    out.push_back(std::move(f));
  }
  for (std::size_t mu = 0; mu < vars.base.size(); ++mu) {
    Form f(n, 2);
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t b = a + 1; b < n; ++b) {
        Scalar v = anchor_apply(t, vars, a, t.rho[mu][b]) - anchor_apply(t, vars, b, t.rho[mu][a]);
        for (std::size_t m = 0; m < n; ++m) v -= t.c[m][a][b] * t.rho[mu][m];
        f.add({static_cast<int>(a), static_cast<int>(b)}, v);
      }
    out.push_back(std::move(f));
  }
  return out;
}

TEST(Bracket, KoszulFormulaMatchesSquare) {
  Gen gen(33);
  for (int trial = 0; trial < 200; ++trial) {
    RelAlgebroid alg = gen.algebroid(static_cast<std::size_t>(gen.uniform(1, 4)), static_cast<std::size_t>(gen.uniform(0, 3)));
    auto expected = koszul_squares(derivation_to_bracket(alg), alg.vars);
    auto actual = square_forms(alg, base_rules(alg));
    ASSERT_EQ(actual.size(), expected.size());
    for (std::size_t k = 0; k < actual.size(); ++k) ASSERT_EQ(actual[k].form, expected[k]) << actual[k].label;
  }
}

TEST(Bracket, SpaceFormsJacobiator) {
  RelAlgebroid alg = model_algebroid("constant_curvature.ralg");
  ASSERT_TRUE(check_lie(alg).empty());
  BracketTables t = derivation_to_bracket(alg);
  // sum over cyclic (a, b, c) of [[e_a, e_b], e_c] with zero anchor.
  for (std::size_t i = 0; i < 3; ++i) {
    Scalar jac;
    std::size_t cyc[3][3] = {{0, 1, 2}, {1, 2, 0}, {2, 0, 1}};
    for (auto& [a, b, c] : cyc)
      for (std::size_t m = 0; m < 3; ++m) jac += t.c[m][a][b] * t.c[i][m][c];
    EXPECT_TRUE(jac.is_zero()) << i;
  }
}

// ---------------------------------------------------------------------------
// check_lie

TEST(CheckLie, SpaceFormsAndAbelian) {
  EXPECT_TRUE(check_lie(model_algebroid("constant_curvature.ralg")).empty());
  EXPECT_TRUE(check_lie(model_algebroid("extremal_kahler.ralg")).empty());
  RelAlgebroid abelian;
  abelian.frame = Frame({"a", "b", "c"});
  abelian.dtheta.assign(3, Form(3, 2));
  EXPECT_TRUE(check_lie(abelian).empty());
}

TEST(CheckLie, ShiftedExampleAfterOneStep) {
  auto r = prolong(model_algebroid("no_second_prolongation.ralg"));
  ASSERT_TRUE(r.next.has_value());
  auto obs = check_lie(*r.next);
  ASSERT_EQ(obs.size(), 1u);
  EXPECT_EQ(obs[0].label, "D(D z)");
  EXPECT_EQ(obs[0].form, Scalar(2) * wedge(th(*r.next, 1), th(*r.next, 2)));
}

TEST(CheckLie, HessianTypeObstruction) {
  RelAlgebroid alg = model_algebroid("hessian_type.ralg");
  auto obs = check_lie(alg);
  ASSERT_EQ(obs.size(), 2u);
  Scalar K = var("K");
  Scalar locus = fn("a", {K}, {1}) - fn("a", {K}) * fn("b", {K}) + K;
  EXPECT_EQ(obs[0].label, "D(D K1)");
  EXPECT_EQ(obs[0].form, -var("K2") * locus * wedge(th(alg, 1), th(alg, 2)));
  EXPECT_EQ(obs[1].form, var("K1") * locus * wedge(th(alg, 1), th(alg, 2)));
}

TEST(CheckLie, RequiresEmptyFiber) {
  EXPECT_THROW(check_lie(model_algebroid("prolong_determined.ralg")), PreconditionError);
}

// ---------------------------------------------------------------------------
// adjoin

TEST(Adjoin, OpaqueDerivativeBecomesRule) {
  RelAlgebroid alg = model_algebroid("hessian_type.ralg");
  Scalar K = var("K");
  RelAlgebroid fixed = adjoin(alg, fn("a", {K}, {1}), fn("a", {K}) * fn("b", {K}) - K);
  ASSERT_EQ(fixed.rules.function_rules().size(), 1u);
  EXPECT_EQ(fixed.rules.function_rules()[0].function, "a");
  EXPECT_EQ(fixed.rules.function_rules()[0].order, 1);
  EXPECT_TRUE(check_lie(fixed).empty());
  EXPECT_EQ(fixed.vars.base, alg.vars.base);
}

TEST(Adjoin, EliminatesVariableWithSideCondition) {
  RelAlgebroid alg = model_algebroid("hessian_type.ralg");
  RelAlgebroid cut = adjoin(alg, var("K2"), Scalar(0));
  EXPECT_EQ(cut.vars.base, (std::vector<std::string>{"K", "K1"}));
  ASSERT_EQ(cut.side_conditions.size(), 1u);
  EXPECT_EQ(cut.side_conditions[0].variable, "K2");
  EXPECT_TRUE(cut.side_conditions[0].value.is_zero());
  EXPECT_TRUE(validate(cut).empty());
  auto obs = check_lie(cut);
  ASSERT_FALSE(obs.empty());
  EXPECT_EQ(obs.back().label, "D(0) - D K2");
}

TEST(Adjoin, TrivialAndUnsolvable) {
  RelAlgebroid alg = model_algebroid("constant_curvature.ralg");
  RelAlgebroid same = adjoin(alg, var("K"), var("K"));
  EXPECT_EQ(same.vars.base, alg.vars.base);
  EXPECT_THROW(adjoin(alg, power(var("K"), 2), Scalar(1)), std::invalid_argument);
}

// ---------------------------------------------------------------------------
// Realizations

Realization line_realization(const Scalar& x_of_t, const Scalar& theta_coeff = Scalar(1)) {
  Realization r;
  r.name = "r";
  r.coords = {"t"};
  r.theta = {Form::covector(1, 0, theta_coeff)};
  r.components = {{"x", x_of_t}};
  return r;
}

TEST(Realize, IdentityAndSquare) {
  RelAlgebroid alg = model_algebroid("line_realizations.ralg");
  Scalar t = var("t");
  auto ok = realization_check(alg, line_realization(t));
  EXPECT_TRUE(ok.residuals.empty());
  EXPECT_TRUE(ok.problems.empty());

  auto bad = realization_check(alg, line_realization(power(t, 2)));
  ASSERT_EQ(bad.residuals.size(), 1u);
  EXPECT_EQ(bad.residuals[0].label, "d x");
  EXPECT_EQ(bad.residuals[0].form, Form::covector(1, 0, Scalar(2) * t - 1));
}

TEST(Realize, RankMinorIsAnAssumption) {
  RelAlgebroid alg = model_algebroid("line_realizations.ralg");
  Scalar t = var("t");
  auto rep = realization_check(alg, line_realization(power(t, 2) / Rational(2), t));
  EXPECT_TRUE(rep.residuals.empty());
  ASSERT_TRUE(rep.rank_minor.has_value());
  EXPECT_EQ(*rep.rank_minor, t);
}

TEST(Realize, DegenerateCoframe) {
  RelAlgebroid alg = model_algebroid("line_realizations.ralg");
  auto rep = realization_check(alg, line_realization(Scalar(3), Scalar(0)));
  EXPECT_TRUE(has_message(rep.problems, "linearly dependent"));
}

TEST(Realize, HolonomicLiftOfProduct) {
  RelAlgebroid alg = total_derivative_algebroid(JetChart({"x", "y"}, {"u"}, 1));
  Scalar t1 = var("t1");
  Scalar t2 = var("t2");
  Realization r;
  r.coords = {"t1", "t2"};
  r.theta = {Form::covector(2, 0), Form::covector(2, 1)};
  r.components = {{"x", t1}, {"y", t2}, {"u", t1 * t2}, {"u_x", t2}, {"u_y", t1}};
  auto rep = realization_check(alg, r);
  EXPECT_TRUE(rep.residuals.empty());
  EXPECT_TRUE(rep.problems.empty());

  r.components["u_y"] = t2;
  auto wrong = realization_check(alg, r);
  ASSERT_EQ(wrong.residuals.size(), 1u);
  EXPECT_EQ(wrong.residuals[0].label, "d u");
}

TEST(Realize, MissingComponent) {
  RelAlgebroid alg = model_algebroid("line_realizations.ralg");
  Realization r = line_realization(var("t"));
  r.components.clear();
  EXPECT_TRUE(has_message(realization_check(alg, r).problems, "no component given for x"));
}

}  // namespace
}  // namespace relalg
