#include <gtest/gtest.h>

#include <random>

#include "chainspec/problem.hpp"
#include "oracles.hpp"

using namespace chainspec;

namespace {

const ProblemCheck* find_check(const std::vector<ProblemCheck>& checks, const std::string& name) {
  for (const auto& c : checks)
    if (c.name == name) return &c;
  return nullptr;
}

bool all_pass(const std::vector<ProblemCheck>& checks) {
  for (const auto& c : checks)
    if (!c.passed) return false;
  return true;
}

}  // namespace

TEST(ParseProblem, MinimalDocumentIsUniformBeam) {
  const auto spec = parse_problem(R"({"p":1,"q":0,"r":1,"interfaces":[],"alpha":0,"beta":1})");
  EXPECT_EQ(spec.p, PiecewiseCoefficient::constant(1.0));
  EXPECT_EQ(spec.q, PiecewiseCoefficient::constant(0.0));
  EXPECT_EQ(spec.r, PiecewiseCoefficient::constant(1.0));
  EXPECT_TRUE(spec.interfaces.empty());
  EXPECT_EQ(spec.alpha, 0.0);
  EXPECT_EQ(spec.beta, 1.0);
  EXPECT_EQ(spec.mode, ProblemMode::theorem);
}

TEST(ParseProblem, OneInterface) {
  const auto spec =
      parse_problem(R"({"p":1,"q":0,"r":1,"interfaces":[{"xi":0.5,"eta":2,"alpha_i":0}],"alpha":0,"beta":1})");
  ASSERT_EQ(spec.interfaces.size(), 1u);
  EXPECT_EQ(spec.interfaces[0].xi, 0.5);
  EXPECT_EQ(spec.interfaces[0].eta, 2.0);
  EXPECT_EQ(spec.interfaces[0].alpha_i, 0.0);
}

TEST(ParseProblem, NegativeEtaNamesTheInequality) {
  try {
    parse_problem(R"({"p":1,"q":0,"r":1,"interfaces":[{"xi":0.5,"eta":-1,"alpha_i":0}],"alpha":0,"beta":1})");
    FAIL() << "expected an invariant violation";
  } catch (const InvariantViolation& e) {
    EXPECT_NE(std::string(e.what()).find("eta > 0"), std::string::npos) << e.what();
  }
}

TEST(ParseProblem, MissingFieldIsNamed) {
  try {
    parse_problem(R"({"p":1,"q":0,"interfaces":[],"alpha":0,"beta":1})");
    FAIL() << "expected a schema error";
  } catch (const SchemaError& e) {
    EXPECT_NE(std::string(e.what()).find("'r'"), std::string::npos) << e.what();
  }
}

TEST(ParseProblem, MalformedInputsAreSchemaErrors) {
  EXPECT_THROW(parse_problem("not json"), SchemaError);
  EXPECT_THROW(parse_problem("[1,2]"), SchemaError);
  EXPECT_THROW(parse_problem(R"({"p":"one","q":0,"r":1,"alpha":0,"beta":1})"), SchemaError);
  EXPECT_THROW(parse_problem(R"({"p":{"breakpoints":[0,1]},"q":0,"r":1,"alpha":0,"beta":1})"), SchemaError);
  EXPECT_THROW(parse_problem(R"({"p":{"breakpoints":[0,0.5,1],"pieces":[[1]]},"q":0,"r":1,"alpha":0,"beta":1})"),
               SchemaError);
  EXPECT_THROW(parse_problem(R"({"p":{"breakpoints":[0,1],"pieces":[[1,2,3,4]]},"q":0,"r":1,"alpha":0,"beta":1})"),
               SchemaError);
  EXPECT_THROW(parse_problem(R"({"p":1,"q":0,"r":1,"alpha":0,"beta":1,"mode":"other"})"), SchemaError);
  EXPECT_THROW(parse_problem(R"({"p":1,"q":0,"r":1,"alpha":0,"beta":1,"interfaces":[{"eta":1}]})"), SchemaError);
}

TEST(EvalCoefficient, Constant) { EXPECT_EQ(eval_coefficient(PiecewiseCoefficient::constant(1.0), 0.3), 1.0); }

TEST(EvalCoefficient, RightContinuousAtBreakpoint) {
  const PiecewiseCoefficient c({0.0, 0.5, 1.0}, {Quadratic{2, 0, 0}, Quadratic{3, 0, 0}});
  EXPECT_EQ(eval_coefficient(c, 0.5), 3.0);
  EXPECT_EQ(eval_coefficient(c, 0.4999), 2.0);
  EXPECT_EQ(eval_coefficient(c, 1.0), 3.0);
}

TEST(EvalCoefficient, LinearPiece) {
  const PiecewiseCoefficient c({0.0, 1.0}, {Quadratic{1, 1, 0}});
  EXPECT_EQ(eval_coefficient(c, 0.25), 1.25);
}

TEST(EvalCoefficient, OutsideUnitIntervalThrows) {
  const auto c = PiecewiseCoefficient::constant(1.0);
  EXPECT_THROW((void)eval_coefficient(c, -0.1), std::out_of_range);
  EXPECT_THROW((void)eval_coefficient(c, 1.5), std::out_of_range);
}

TEST(EvalCoefficient, ExactForQuadraticPieces) {
  // local variable is x - left breakpoint
  const PiecewiseCoefficient c({0.0, 0.25, 1.0}, {Quadratic{1, -2, 4}, Quadratic{0.5, 3, -1.5}});
  for (int i = 0; i <= 1000; ++i) {
    const double x = i / 1000.0;
    const double expect = x < 0.25 ? 1 - 2 * x + 4 * x * x : 0.5 + 3 * (x - 0.25) - 1.5 * (x - 0.25) * (x - 0.25);
    EXPECT_NEAR(eval_coefficient(c, x), expect, 1e-15);
  }
}

TEST(ValidateProblem, UniformBeamPasses) { EXPECT_TRUE(all_pass(validate_problem(oracle::load_fixture("uniform_beam")))); }

TEST(ValidateProblem, ZeroStiffnessPieceFails) {
  auto spec = oracle::load_fixture("uniform_beam");
  spec.p = PiecewiseCoefficient({0.0, 0.5, 1.0}, {Quadratic{1, 0, 0}, Quadratic{0, 0, 0}});
  const auto checks = validate_problem(spec);
  const auto* c = find_check(checks, "p strictly positive");
  ASSERT_NE(c, nullptr);
  EXPECT_FALSE(c->passed);
}

TEST(ValidateProblem, BetaZeroDependsOnMode) {
  auto spec = oracle::load_fixture("uniform_beam");
  spec.beta = 0.0;
  spec.mode = ProblemMode::theorem;
  EXPECT_FALSE(all_pass(validate_problem(spec)));
  spec.mode = ProblemMode::validation;
  EXPECT_TRUE(all_pass(validate_problem(spec)));
}

TEST(ValidateProblem, AlphaIOfEitherSignAccepted) {
  auto spec = oracle::load_fixture("multipoint");
  spec.interfaces[0].alpha_i = -50.0;
  EXPECT_TRUE(all_pass(validate_problem(spec)));
}

TEST(ValidateProblem, AcceptsEveryFixtureAndRejectsCorruptions) {
  for (const std::string name :
       {"uniform_beam", "multipoint", "variable_coefficients", "negative_q", "large_alpha", "cantilever",
        "strongly_negative_q"}) {
    SCOPED_TRACE(name);
    const auto spec = oracle::load_fixture(name);
    EXPECT_TRUE(all_pass(validate_problem(spec)));

    std::vector<ProblemSpec> bad;
    auto one = [&](auto&& mutate) {
      ProblemSpec s = spec;
      mutate(s);
      bad.push_back(s);
    };
    one([](ProblemSpec& s) { s.p = PiecewiseCoefficient::constant(-1.0); });
    one([](ProblemSpec& s) { s.r = PiecewiseCoefficient::constant(0.0); });
    one([](ProblemSpec& s) { s.alpha = -0.5; });
    one([](ProblemSpec& s) { s.beta = -1.0; });
    if (!spec.interfaces.empty()) {
      one([](ProblemSpec& s) { s.interfaces[0].eta = 0.0; });
      one([](ProblemSpec& s) { s.interfaces[0].xi = 1.0; });
      one([](ProblemSpec& s) { s.interfaces[0].xi = 0.0; });
    } else {
      one([](ProblemSpec& s) { s.interfaces = {{0.6, 1.0, 0.0}, {0.4, 1.0, 0.0}}; });
    }
    for (const auto& s : bad) EXPECT_FALSE(all_pass(validate_problem(s)));
  }
}

TEST(ProblemRoundTrip, SerializeThenParseIsIdentity) {
  for (const std::string name : {"uniform_beam", "multipoint", "variable_coefficients", "negative_q", "cantilever"}) {
    SCOPED_TRACE(name);
    const auto spec = oracle::load_fixture(name);
    const auto again = parse_problem(serialize_problem(spec));
    EXPECT_EQ(again.p, spec.p);
    EXPECT_EQ(again.q, spec.q);
    EXPECT_EQ(again.r, spec.r);
    EXPECT_EQ(again.interfaces, spec.interfaces);
    EXPECT_EQ(again.alpha, spec.alpha);
    EXPECT_EQ(again.beta, spec.beta);
    EXPECT_EQ(again.mode, spec.mode);
    EXPECT_EQ(serialize_problem(again), serialize_problem(spec));
  }
}

TEST(ProblemRoundTrip, RandomPiecewiseCoefficients) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.5, 2.0);
  for (int trial = 0; trial < 50; ++trial) {
    ProblemSpec spec;
    spec.p = PiecewiseCoefficient({0.0, 0.3, 1.0}, {Quadratic{u(rng), 0.1, 0.0}, Quadratic{u(rng), 0.0, 0.2}});
    spec.q = PiecewiseCoefficient::constant(u(rng) - 1.0);
    spec.r = PiecewiseCoefficient({0.0, 0.7, 1.0}, {Quadratic{u(rng), 0, 0}, Quadratic{u(rng), 0, 0}});
    spec.interfaces = {{0.2, u(rng), u(rng) - 1.0}, {0.8, u(rng), 0.0}};
    spec.alpha = u(rng);
    spec.beta = u(rng);
    const auto again = parse_problem(serialize_problem(spec));
    EXPECT_EQ(again.p, spec.p);
    EXPECT_EQ(again.r, spec.r);
    EXPECT_EQ(again.interfaces, spec.interfaces);
  }
}

TEST(BoundaryForm, ListsConditions) {
  const auto bf = boundary_form(oracle::load_fixture("multipoint"));
  EXPECT_FALSE(bf.at_zero.empty());
  EXPECT_EQ(bf.at_interfaces.size(), 2u);
  EXPECT_EQ(bf.at_one.size(), 2u);
}
