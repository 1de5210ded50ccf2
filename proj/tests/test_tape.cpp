#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "hybridad/errors.hpp"
#include "hybridad/tape.hpp"
#include "support/random_tape.hpp"

using namespace hybridad;

namespace {

// F(x, y) = y * ((x + y) * x + 2)
Tape example_f() {
  Recorder r(2);
  Var x = r.input(0), y = r.input(1);
  r.output(y * ((x + y) * x + 2.0));
  return r.build();
}

// (1 - cos x) / x for x != 0, else 0
Tape removable() {
  Recorder r(1);
  Var x = r.input(0);
  Var q = (1.0 - cos(x)) / x;
  r.output(select(x, Cmp::ne, 0.0, q, r.constant(0.0)));
  return r.build();
}

std::vector<double> central_fd(const Tape& t, std::vector<double> x, int out, double h) {
  std::vector<double> g(x.size());
  for (std::size_t j = 0; j < x.size(); ++j) {
    const double x0 = x[j];
    x[j] = x0 + h;
    const double fp = tape_eval(t, x)[out];
    x[j] = x0 - h;
    const double fm = tape_eval(t, x)[out];
    x[j] = x0;
    g[j] = (fp - fm) / (2 * h);
  }
  return g;
}

}  // namespace

TEST(Tape, EvalExamples) {
  std::vector<double> p{1, 2};
  EXPECT_EQ(tape_eval(example_f(), p)[0], 10.0);

  TapeBuilder b(1);
  b.output(b.input(0));
  std::vector<double> seven{7};
  EXPECT_EQ(tape_eval(b.build(), seven)[0], 7.0);

  std::vector<double> zero{0};
  EXPECT_EQ(tape_eval(removable(), zero)[0], 0.0);
}

TEST(Tape, DomainErrorCarriesNode) {
  TapeBuilder b(1);
  int x = b.input(0);
  int l = b.apply(ElementaryFn::of(ElementaryFn::Kind::log), x);
  b.output(l);
  Tape t = b.build();
  std::vector<double> neg{-1};
  try {
    tape_eval(t, neg);
    FAIL() << "expected EvalDomainError";
  } catch (const EvalDomainError& e) {
    EXPECT_EQ(e.node(), l);
  }
  TapeBuilder d(2);
  int q = d.div(d.input(0), d.input(1));
  d.output(q);
  std::vector<double> p{1, 0};
  try {
    tape_eval(d.build(), p);
    FAIL();
  } catch (const EvalDomainError& e) {
    EXPECT_EQ(e.node(), q);
  }
}

TEST(Tape, UntakenArmIsNotEvaluated) {
  // x >= 0 ? sqrt(x) : log(-x)... at x = -1 the sqrt arm would fail.
  Recorder r(1);
  Var x = r.input(0);
  r.output(select(x, Cmp::ge, 0.0, sqrt(x), log(-x + 1.0)));
  Tape t = r.build();
  std::vector<double> p{-1};
  EXPECT_NEAR(tape_eval(t, p)[0], std::log(2.0), 1e-15);
  EXPECT_NEAR(forward_gradient(t, p)(0, 0), -0.5, 1e-15);
}

TEST(Tape, Validation) {
  std::vector<Node> nodes(1);
  nodes[0].kind = NodeKind::add;
  nodes[0].a = 0;
  nodes[0].b = 0;
  EXPECT_THROW(Tape(nodes, 0, {0}), InvalidTape);
  std::vector<Node> two(2);
  two[0].kind = two[1].kind = NodeKind::input;
  two[0].input = two[1].input = 0;
  EXPECT_THROW(Tape(two, 1, {0}), InvalidTape);
  EXPECT_THROW(Tape({}, 0, {3}), InvalidTape);
}

TEST(Tape, Gradients) {
  std::vector<double> p{1, 2};
  Tape f = example_f();
  Eigen::MatrixXd J = forward_gradient(f, p);
  EXPECT_EQ(J(0, 0), 8.0);
  EXPECT_EQ(J(0, 1), 7.0);
  std::vector<double> g = reverse_gradient(f, p, 0);
  EXPECT_EQ(g[0], 8.0);
  EXPECT_EQ(g[1], 7.0);

  Recorder c(2);
  c.output(c.constant(4.0));
  EXPECT_TRUE(forward_gradient(c.build(), p).isZero());

  Recorder sq(1);
  Var x = sq.input(0);
  sq.output(x * x);
  std::vector<double> three{3};
  EXPECT_EQ(forward_gradient(sq.build(), three)(0, 0), 6.0);

  Recorder es(1);
  es.output(exp(sin(es.input(0))));
  std::vector<double> zero{0};
  EXPECT_EQ(reverse_gradient(es.build(), zero, 0)[0], 1.0);
}

TEST(Tape, AbsAtZeroIsReported) {
  Recorder r(1);
  r.output(abs(r.input(0)));
  Tape t = r.build();
  std::vector<double> zero{0}, one{-2};
  EXPECT_EQ(tape_eval(t, zero)[0], 0.0);
  EXPECT_THROW(forward_gradient(t, zero), NonDifferentiablePoint);
  EXPECT_THROW(reverse_gradient(t, zero, 0), NonDifferentiablePoint);
  EXPECT_EQ(forward_gradient(t, one)(0, 0), -1.0);
}

TEST(Tape, Hessians) {
  std::vector<double> p{1, 2};
  Eigen::MatrixXd H = hessian(example_f(), p, 0);
  Eigen::Matrix2d want;
  want << 4, 6, 6, 2;
  EXPECT_TRUE(H.isApprox(want, 1e-15)) << H;

  Recorder r(2);
  Var x = r.input(0), y = r.input(1);
  r.output(x * x * y);
  std::vector<double> q{2, 3};
  Eigen::MatrixXd H2 = hessian(r.build(), q, 0);
  Eigen::Matrix2d want2;
  want2 << 6, 4, 4, 0;
  EXPECT_TRUE(H2.isApprox(want2, 1e-15)) << H2;

  Recorder l(2);
  l.output(3.0 * l.input(0) - l.input(1));
  EXPECT_TRUE(hessian(l.build(), q, 0).isZero());
}

TEST(Tape, JetEvaluation) {
  Recorder r(1);
  r.output(1.0 / (1.0 + r.input(0)));
  Tape t = r.build();
  std::vector<Jet> x{jet_var(0, 11)};
  Jet y = tape_jet_eval(t, x)[0];
  double fact = 1;
  for (int i = 0; i <= 11; ++i) {
    if (i) fact *= i;
    EXPECT_DOUBLE_EQ(y.derivative(i), (i % 2 ? -1 : 1) * fact);
  }
  std::vector<Jet> zero_order{Jet::constant(0.5, 0)};
  std::vector<double> half{0.5};
  EXPECT_EQ(tape_jet_eval(t, zero_order)[0][0], tape_eval(t, half)[0]);

  Recorder e(1);
  e.output(exp(e.input(0)));
  std::vector<Jet> s{jet_var(0, 3)};
  Jet ey = tape_jet_eval(e.build(), s)[0];
  EXPECT_DOUBLE_EQ(ey[2], 0.5);
  EXPECT_DOUBLE_EQ(ey[3], 1.0 / 6);
}

TEST(Tape, OpCountSmall) {
  EXPECT_EQ(op_count(Tape(), SweepMode::forward), 0);
  EXPECT_EQ(op_count(Tape(), SweepMode::reverse), 0);
  Tape f = example_f();
  EXPECT_LE(op_count(f, SweepMode::forward), 4 * primal_op_count(f));
}

TEST(Tape, DumpFormat) {
  TapeBuilder b(2);
  int x = b.input(0), y = b.input(1);
  int s = b.add(x, y);
  int c = b.constant(2.5);
  int m = b.mul(s, c);
  int f = b.apply(ElementaryFn::of(ElementaryFn::Kind::sin), m);
  int br = b.branch(x, Cmp::ge, 0.0, f, c);
  b.output(br);
  EXPECT_EQ(b.build().dump(),
            "0 input 0\n1 input 1\n2 add 0 1\n3 const 2.5\n4 mul 2 3\n5 apply sin 4\n"
            "6 branch 0 ge 0 5 3\noutputs 6\n");
}

TEST(Tape, BranchDifferentiatesTakenArmOnly) {
  // x >= 1 ? x^3 : 2x
  Recorder r(1);
  Var x = r.input(0);
  r.output(select(x, Cmp::ge, 1.0, x * x * x, 2.0 * x));
  Tape t = r.build();
  std::vector<double> a{2}, b{0.5}, tie{1.0};
  EXPECT_EQ(forward_gradient(t, a)(0, 0), 12.0);
  EXPECT_EQ(forward_gradient(t, b)(0, 0), 2.0);
  EXPECT_EQ(forward_gradient(t, tie)(0, 0), 3.0);  // ties go to the then-arm
}

TEST(Tape, BoundaryAuditAndTaylorPatch) {
  Tape h = removable();
  std::vector<double> zero{0};
  // At the threshold the taken arm gives derivative 0; the true value is 1/2.
  EXPECT_EQ(forward_gradient(h, zero)(0, 0), 0.0);
  auto findings = boundary_audit(h, zero);
  ASSERT_EQ(findings.size(), 1u);
  EXPECT_FALSE(findings[0].then_error.empty());

  std::vector<double> away{0.3};
  EXPECT_TRUE(boundary_audit(h, away).empty());

  int br = h.outputs()[0];
  Tape patched = taylor_patch(h, br, 0, 0.0);
  std::vector<Jet> x{jet_var(0, 5)};
  Jet y = tape_jet_eval(patched, x)[0];
  EXPECT_NEAR(y.derivative(1), 0.5, 1e-14);
  EXPECT_NEAR(y.derivative(2), 0.0, 1e-14);
  // Taylor oracle: x/2 - x^3/24 + ..., so f'''(0) = -1/4.
  EXPECT_NEAR(y.derivative(3), -0.25, 1e-13);
  // Outside the window the original arm is used.
  std::vector<double> p{0.5};
  EXPECT_DOUBLE_EQ(tape_eval(patched, p)[0], (1 - std::cos(0.5)) / 0.5);
  std::vector<double> inside{0.05};
  const double ref = 2 * std::sin(0.025) * std::sin(0.025) / 0.05;  // cancellation-free form
  EXPECT_NEAR(tape_eval(patched, inside)[0], ref, 1e-17);
}

TEST(Tape, DerivativeTape) {
  Tape d = derivative_tape(example_f(), 1);
  std::vector<double> p{1, 2};
  auto v = tape_eval(d, p);
  EXPECT_EQ(v[0], 10.0);
  EXPECT_EQ(v[1], 7.0);
}

TEST(TapeProperty, ForwardEqualsReverse) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 500; ++trial) {
    testsupport::RandomTapeOptions o;
    o.inputs = 1 + static_cast<int>(rng() % 5);
    o.ops = 1 + static_cast<int>(rng() % 250);
    auto rt = testsupport::make_random_tape(rng, o);
    ASSERT_LE(rt.tape.size(), 300);
    Eigen::MatrixXd J = forward_gradient(rt.tape, rt.x);
    for (int k = 0; k < rt.tape.num_outputs(); ++k) {
      auto g = reverse_gradient(rt.tape, rt.x, k);
      for (int j = 0; j < o.inputs; ++j)
        ASSERT_NEAR(J(k, j), g[j], 1e-12 * std::max(1.0, std::fabs(g[j]))) << "trial " << trial;
    }
  }
}

TEST(TapeProperty, GradientsMatchCentralDifferences) {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 100; ++trial) {
    testsupport::RandomTapeOptions o;
    o.ops = 40;
    auto rt = testsupport::make_random_tape(rng, o);
    Eigen::MatrixXd J = forward_gradient(rt.tape, rt.x);
    for (int k = 0; k < rt.tape.num_outputs(); ++k) {
      auto fd = central_fd(rt.tape, rt.x, k, 1e-6);
      for (int j = 0; j < o.inputs; ++j)
        EXPECT_NEAR(J(k, j), fd[j], 1e-6 * std::max(1.0, std::fabs(fd[j]))) << "trial " << trial;
    }
  }
}

TEST(TapeProperty, HessianMatchesGradientDifferences) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    testsupport::RandomTapeOptions o;
    o.ops = 30;
    o.outputs = 1;
    auto rt = testsupport::make_random_tape(rng, o);
    Eigen::MatrixXd H = hessian(rt.tape, rt.x, 0);
    EXPECT_TRUE(H.isApprox(H.transpose(), 0.0) || (H - H.transpose()).norm() == 0.0);
    const double h = 1e-6;
    for (int j = 0; j < o.inputs; ++j) {
      auto xp = rt.x, xm = rt.x;
      xp[j] += h;
      xm[j] -= h;
      auto gp = reverse_gradient(rt.tape, xp, 0), gm = reverse_gradient(rt.tape, xm, 0);
      for (int i = 0; i < o.inputs; ++i) {
        const double fd = (gp[i] - gm[i]) / (2 * h);
        EXPECT_NEAR(H(i, j), fd, 1e-5 * std::max(1.0, std::fabs(fd))) << "trial " << trial;
      }
    }
  }
}

TEST(TapeProperty, FirstOrderJetMatchesForward) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 100; ++trial) {
    testsupport::RandomTapeOptions o;
    o.ops = 60;
    auto rt = testsupport::make_random_tape(rng, o);
    Eigen::MatrixXd J = forward_gradient(rt.tape, rt.x);
    for (int j = 0; j < o.inputs; ++j) {
      std::vector<Jet> seeds;
      for (int i = 0; i < o.inputs; ++i)
        seeds.push_back(i == j ? jet_var(rt.x[i], 1) : jet_const(rt.x[i], 1));
      auto ys = tape_jet_eval(rt.tape, seeds);
      for (int k = 0; k < rt.tape.num_outputs(); ++k)
        EXPECT_NEAR(ys[k][1], J(k, j), 1e-13 * std::max(1.0, std::fabs(J(k, j))));
    }
  }
}

TEST(TapeProperty, OpCountBounds) {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 100; ++trial) {
    testsupport::RandomTapeOptions o;
    o.ops = 1 + static_cast<int>(rng() % 200);
    o.apply = o.branch = false;
    o.div = trial % 2 == 1;
    auto rt = testsupport::make_random_tape(rng, o);
    const long s = primal_op_count(rt.tape);
    EXPECT_EQ(s, rt.ops);
    EXPECT_LE(op_count(rt.tape, SweepMode::forward), (o.div ? 5 : 4) * s);
    EXPECT_LE(op_count(rt.tape, SweepMode::reverse), 5 * s);
  }
}

TEST(TapeProperty, BranchInteriorMatchesArm) {
  // Inside a region the gradient equals the gradient of the arm alone.
  Recorder r(2);
  Var x = r.input(0), y = r.input(1);
  Var arm1 = sin(x) * y, arm2 = x * x - y;
  r.output(select(x - y, Cmp::ge, 0.0, arm1, arm2));
  Tape t = r.build();
  Recorder a(2);
  a.output(sin(a.input(0)) * a.input(1));
  Tape alone = a.build();
  std::vector<double> p{1.0, 0.2};
  EXPECT_TRUE(forward_gradient(t, p).isApprox(forward_gradient(alone, p), 0.0));
}
