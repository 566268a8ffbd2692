#include <gtest/gtest.h>

#include <random>

#include "chainspec/k_operator.hpp"
#include "chainspec/sigma.hpp"
#include "oracles.hpp"

using namespace chainspec;

namespace {

PencilForm tilde_form(const std::string& fixture) { return form_of(build_chain(oracle::load_fixture(fixture)).tilde); }

std::shared_ptr<const Mesh> uniform_mesh(std::size_t n) {
  return std::make_shared<const Mesh>(build_mesh(std::vector<double>{}, n));
}

D1Function from_nodes(const std::shared_ptr<const Mesh>& mesh, const std::function<double(double)>& f) {
  std::vector<double> v;
  for (double x : mesh->nodes) v.push_back(f(x));
  v[0] = 0.0;
  return D1Function::piecewise_linear(mesh, v);
}

D1Function random_d1(const std::shared_ptr<const Mesh>& mesh, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  std::vector<double> v(mesh->nodes.size(), 0.0);
  for (std::size_t j = 1; j < v.size(); ++j) v[j] = d(rng);
  return D1Function::piecewise_linear(mesh, v);
}

double relative_distance(const Eigen::VectorXd& a, const Eigen::VectorXd& b) { return (a - b).norm() / b.norm(); }

}  // namespace

// The integration map is checked on functions vanishing at 0; u = x and u = 2x have the
// exactly representable antiderivatives x^2/2 and x^2.
TEST(ApplyQ, LinearFunctions) {
  const auto mesh = uniform_mesh(16);
  const auto u = from_nodes(mesh, [](double x) { return 2.0 * x; });
  const auto v = from_nodes(mesh, [](double x) { return x; });
  for (int i = 0; i <= 50; ++i) {
    const double x = i / 50.0;
    EXPECT_NEAR(u.primitive(x), x * x, 1e-15);
    EXPECT_NEAR(v.primitive(x), x * x / 2.0, 1e-15);
    EXPECT_NEAR(u(x), 2.0 * x, 1e-14);
  }
  const Eigen::VectorXd q = apply_Q(u);
  for (std::size_t j = 1; j < mesh->nodes.size(); ++j) {
    EXPECT_NEAR(q[Mesh::value_dof(j)], mesh->nodes[j] * mesh->nodes[j], 1e-15);
    EXPECT_NEAR(q[Mesh::slope_dof(j)], 2.0 * mesh->nodes[j], 1e-15);
  }
}

TEST(ApplyQ, InverseRoundTrip) {
  std::mt19937_64 rng(99);
  const auto mesh = uniform_mesh(32);
  for (int trial = 0; trial < 50; ++trial) {
    const auto u = random_d1(mesh, rng);
    const auto back = apply_Q_inverse(mesh, apply_Q(u));
    EXPECT_EQ(back.dofs(), u.dofs());
    for (double x : mesh->nodes) EXPECT_EQ(back(x), u(x));
  }
}

TEST(ApplyQ, RejectsNonzeroStart) {
  const auto mesh = uniform_mesh(4);
  EXPECT_THROW(D1Function::piecewise_linear(mesh, {1.0, 1.0, 1.0, 1.0, 1.0}), std::invalid_argument);
}

TEST(WFunctional, ZeroFunction) {
  const auto mesh = uniform_mesh(8);
  const D1Function zero(mesh, Eigen::VectorXd::Zero(static_cast<Eigen::Index>(mesh->dof_count())));
  const auto form = tilde_form("uniform_beam");
  const auto w = w_functional(zero, form);
  for (double t : {0.0, 0.3, 1.0}) EXPECT_EQ(w(t), 0.0);
  EXPECT_EQ(w.atom_weight(), 0.0);
}

TEST(WFunctional, HandIntegratedTail) {
  // R = 1, b = 1, u = 2t so Qu = t^2 and w(t) = (1 - t^3)/3 + 1
  const PencilForm form{PiecewiseCoefficient::constant(1.0), PiecewiseCoefficient::constant(0.0),
                        PiecewiseCoefficient::constant(1.0), {}, 0.0, 0.0, 1.0};
  const auto mesh = uniform_mesh(8);
  const auto u = from_nodes(mesh, [](double x) { return 2.0 * x; });
  const auto w = w_functional(u, form);
  for (int i = 0; i <= 40; ++i) {
    const double t = i / 40.0;
    EXPECT_NEAR(w(t), (1.0 - t * t * t) / 3.0 + 1.0, 1e-14);
  }
  EXPECT_EQ(w.atom_weight(), 0.0);
  const PencilForm with_a{form.stiffness, form.first_order, form.mass, {}, 0.0, 0.5, 1.0};
  EXPECT_NEAR(w_functional(u, with_a).atom_weight(), 1.0, 1e-14);
}

TEST(WFunctional, SignChangesDoNotExceedInput) {
  std::mt19937_64 rng(3);
  const auto form = tilde_form("uniform_beam");
  const KOperator K(form, 32);
  for (int trial = 0; trial < 200; ++trial) {
    const auto u = random_d1(K.mesh(), rng);
    const auto w = w_functional(u, form);
    std::vector<double> ws, us;
    for (double t : sample_points(*K.mesh(), 16)) {
      ws.push_back(w(t));
      us.push_back(u(t));
    }
    const auto sw = count_sign_changes(ws), su = count_sign_changes(us);
    ASSERT_TRUE(sw && su);
    EXPECT_LE(*sw, *su) << trial;
  }
}

// <-Q* T~'(0) Q u, z> from the assembled mass form and from the w functional plus the atom at 1.
TEST(WFunctional, PairingMatchesMassForm) {
  for (const std::string name : {"uniform_beam", "multipoint", "large_alpha"}) {
    SCOPED_TRACE(name);
    const auto form = tilde_form(name);
    const KOperator K(form, 32);
    std::mt19937_64 rng(17);
    const auto u = random_d1(K.mesh(), rng);
    const auto w = w_functional(u, form);
    for (int trial = 0; trial < 20; ++trial) {
      const auto z = random_d1(K.mesh(), rng);
      const double a = apply_Q(z).dot(K.pair().B * apply_Q(u));
      const double b = w.pair_with(z);
      EXPECT_NEAR(b, a, 1e-9 * std::max(1.0, std::abs(a)));
    }
  }
}

TEST(ApplyK, EigenfunctionsScaleByReciprocal) {
  for (const std::string name : {"uniform_beam", "multipoint"}) {
    SCOPED_TRACE(name);
    const auto form = tilde_form(name);
    const KOperator K(form, 64);
    const auto s = solve_pencil(form, 64, 6);
    for (std::size_t n = 0; n < 6; ++n) {
      const D1Function u = apply_Q_inverse(K.mesh(), s.eigenvectors().col(static_cast<Eigen::Index>(n)));
      const auto ku = apply_K(u, K);
      EXPECT_LT(relative_distance(ku.dofs(), u.dofs() / s.eigenvalues()[n]), 1e-6) << n;
    }
  }
}

TEST(ApplyK, ZeroMapsToZero) {
  const KOperator K(tilde_form("uniform_beam"), 16);
  const D1Function zero(K.mesh(), Eigen::VectorXd::Zero(static_cast<Eigen::Index>(K.mesh()->dof_count())));
  EXPECT_EQ(K.apply(zero).dofs().cwiseAbs().maxCoeff(), 0.0);
}

TEST(ApplyK, PowerIterationFindsGroundState) {
  const auto form = tilde_form("multipoint");
  const KOperator K(form, 64);
  const auto s = solve_pencil(form, 64, 2);
  const double ratio = s.eigenvalues()[0] / s.eigenvalues()[1];
  const int m = static_cast<int>(std::ceil(std::log(1e-6) / std::log(ratio)));
  std::vector<double> v(K.mesh()->nodes.size(), 0.0);
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> d(0.1, 1.0);
  for (std::size_t j = 1; j < v.size(); ++j) v[j] = d(rng);
  D1Function u = D1Function::piecewise_linear(K.mesh(), v);
  for (int it = 0; it < m; ++it) {
    u = K.apply(u);
    u = D1Function(K.mesh(), u.dofs() / u.dofs().norm());
  }
  const Eigen::VectorXd x0 = s.eigenvectors().col(0);
  const double cosang = std::abs(u.dofs().dot(x0)) / (u.dofs().norm() * x0.norm());
  EXPECT_LT(std::acos(std::min(1.0, cosang)), 1e-4);
}

TEST(KSpectrum, ReciprocalCorrespondence) {
  for (const auto& name : oracle::theorem_fixtures()) {
    const KOperator K(tilde_form(name), 64);
    const auto r = verify_k_spectrum(K, 6);
    EXPECT_EQ(r.verdict, Verdict::pass) << name << " " << r.observed.dump();
  }
}

TEST(VariationDiminishing, RandomTrialsOnUniformBeam) {
  const KOperator K(tilde_form("uniform_beam"), 64);
  const auto rep = verify_variation_diminishing(K, 200, 12345);
  EXPECT_EQ(rep.trials, 200u);
  EXPECT_TRUE(rep.violations.empty());
  EXPECT_LT(rep.inconclusive.size(), 4u);
  EXPECT_EQ(rep.record().verdict, Verdict::pass);
}

TEST(VariationDiminishing, PositiveInputStaysPositive) {
  const KOperator K(tilde_form("multipoint"), 64);
  const auto u = from_nodes(K.mesh(), [](double x) { return x * (1.5 - x); });
  const auto ku = K.apply(u);
  EXPECT_EQ(count_sign_changes(u.samples(32)), 0);
  EXPECT_EQ(count_sign_changes(ku.samples(32)), 0);
}

TEST(VariationDiminishing, ThirdEigenfunctionDerivative) {
  const auto form = tilde_form("uniform_beam");
  const KOperator K(form, 64);
  const auto s = solve_pencil(form, 64, 4);
  const D1Function u = apply_Q_inverse(K.mesh(), s.eigenvectors().col(3));
  EXPECT_EQ(count_sign_changes(u.samples(32)), 3);
  EXPECT_EQ(count_sign_changes(K.apply(u).samples(32)), 3);
}
