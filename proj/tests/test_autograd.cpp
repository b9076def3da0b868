#include <gtest/gtest.h>

#include <functional>

#include "deepsep/autograd.hpp"
#include "deepsep/oracle.hpp"
#include "deepsep/rng.hpp"

using namespace deepsep;
namespace ad = deepsep::ad;

namespace {

Matrix random_matrix(int r, int c, std::uint64_t seed) {
  Rng rng(seed);
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
  return m;
}

// Checks d f / d (leaf) against central differences for one leaf.
void expect_gradient(const std::function<ad::Var(ad::Tape&, const ad::Var&)>& f, const Matrix& at,
                     double tol = 1e-7) {
  ad::Tape tape;
  const ad::Var x = tape.leaf(at);
  const ad::Var root = f(tape, x);
  const Matrix g = tape.backward(root).wrt(x);
  const std::vector<double> point(at.data(), at.data() + at.size());
  const auto fd = oracle::fd_gradient(
      [&](std::span<const double> p) {
        ad::Tape t;
        const ad::Var v = t.leaf(Eigen::Map<const Matrix>(p.data(), at.rows(), at.cols()));
        return f(t, v).scalar();
      },
      point);
  for (std::size_t i = 0; i < fd.size(); ++i)
    EXPECT_NEAR(g.data()[i], fd[i], tol * std::max(1.0, std::abs(fd[i]))) << "entry " << i;
}

}  // namespace

TEST(Autograd, TraceOfIdentity) {
  ad::Tape tape;
  EXPECT_EQ(ad::trace(tape.leaf(Matrix::Identity(3, 3))).scalar(), 3.0);
}

TEST(Autograd, MatmulHandValues) {
  ad::Tape tape;
  Matrix a(2, 2), b(2, 2), expect(2, 2);
  a << 1, 2, 3, 4;
  b << 5, 6, 7, 8;
  expect << 19, 22, 43, 50;
  EXPECT_EQ(ad::matmul(tape.leaf(a), tape.leaf(b)).value(), expect);
}

TEST(Autograd, SquaredNormOfZero) {
  ad::Tape tape;
  const ad::Var v = tape.leaf(Matrix::Zero(3, 1));
  const ad::Var r = ad::squared_norm(v);
  EXPECT_EQ(r.scalar(), 0.0);
  EXPECT_EQ(tape.backward(r).wrt(v), Matrix::Zero(3, 1));
}

TEST(Autograd, ScaledLeaf) {
  ad::Tape tape;
  const ad::Var x = tape.leaf(2.0);
  EXPECT_EQ(tape.backward(ad::scale(x, 3.5)).wrt(x)(0, 0), 3.5);
}

TEST(Autograd, NormOfProductMatchesAnalytic) {
  const Matrix W = random_matrix(3, 2, 1);
  const Matrix y = random_matrix(2, 1, 2);
  ad::Tape tape;
  const ad::Var w = tape.leaf(W);
  const ad::Var r = ad::squared_norm(ad::matmul(w, tape.constant(y)));
  const Matrix g = tape.backward(r).wrt(w);
  EXPECT_LT((g - 2.0 * (W * y) * y.transpose()).norm(), 1e-12);
}

TEST(Autograd, EveryOpMatchesFiniteDifferences) {
  const Matrix A = random_matrix(3, 3, 3);
  const Matrix v = random_matrix(3, 1, 4);
  const Matrix B = random_matrix(3, 3, 5);
  auto sum_of = [](const ad::Var& x) { return ad::sum(x); };
  expect_gradient([&](ad::Tape& t, const ad::Var& x) { return sum_of(x + t.constant(B)); }, A);
  expect_gradient([&](ad::Tape& t, const ad::Var& x) { return ad::squared_norm(t.constant(B) - x); }, A);
  expect_gradient([&](ad::Tape&, const ad::Var& x) { return ad::squared_norm(-x); }, A);
  expect_gradient([&](ad::Tape& t, const ad::Var& x) { return ad::squared_norm(ad::matmul(x, t.constant(B))); }, A);
  expect_gradient([&](ad::Tape& t, const ad::Var& x) { return ad::squared_norm(ad::matmul(t.constant(B), x)); }, A);
  expect_gradient([&](ad::Tape& t, const ad::Var& x) { return ad::dot(ad::transpose(x), t.constant(B)); }, A);
  expect_gradient([&](ad::Tape&, const ad::Var& x) { return sum_of(ad::tanh(x)); }, A);
  expect_gradient([&](ad::Tape&, const ad::Var& x) { return ad::squared_norm(ad::relu(x)); }, A);
  expect_gradient([&](ad::Tape&, const ad::Var& x) { return sum_of(ad::cube(x)); }, A);
  expect_gradient([&](ad::Tape&, const ad::Var& x) { return ad::trace(x); }, A);
  expect_gradient([&](ad::Tape&, const ad::Var& x) { return ad::squared_norm(ad::outer(x, x)); }, v);
  expect_gradient([&](ad::Tape& t, const ad::Var& x) { return ad::dot(x, t.constant(v)); }, v);
  // scalar division and multiplication, in both operands
  expect_gradient(
      [&](ad::Tape& t, const ad::Var& x) {
        return ad::squared_norm(ad::divide(t.constant(B), ad::squared_norm(x) + t.constant(1.0)));
      },
      v);
  expect_gradient(
      [&](ad::Tape& t, const ad::Var& x) { return sum_of(ad::divide(x, t.constant(2.5))); }, A);
  expect_gradient(
      [&](ad::Tape& t, const ad::Var& x) {
        return ad::squared_norm(ad::multiply(ad::dot(x, x), t.constant(B)));
      },
      v);
  expect_gradient(
      [&](ad::Tape& t, const ad::Var& x) { return ad::squared_norm(ad::multiply(t.constant(0.3), x)); }, A);
}

TEST(Autograd, FanOutAccumulates) {
  ad::Tape tape;
  const ad::Var x = tape.leaf(3.0);
  const ad::Var r = ad::dot(x, x) + x;  // x^2 + x
  EXPECT_EQ(tape.backward(r).wrt(x)(0, 0), 7.0);
}

TEST(Autograd, Linearity) {
  const Matrix A = random_matrix(3, 3, 6);
  ad::Tape tape;
  const ad::Var x = tape.leaf(A);
  const ad::Var f = ad::sum(ad::tanh(x));
  const ad::Var g = ad::squared_norm(ad::cube(x));
  const ad::Var h = ad::scale(f, 2.0) + ad::scale(g, -0.5);
  const Matrix gf = tape.backward(f).wrt(x);
  const Matrix gg = tape.backward(g).wrt(x);
  const Matrix gh = tape.backward(h).wrt(x);
  EXPECT_LT((gh - (2.0 * gf - 0.5 * gg)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Autograd, RepeatedBackwardIsIdentical) {
  ad::Tape tape;
  const ad::Var x = tape.leaf(random_matrix(3, 3, 7));
  const ad::Var r = ad::squared_norm(ad::matmul(ad::tanh(x), x));
  EXPECT_EQ(tape.backward(r).wrt(x), tape.backward(r).wrt(x));
}

TEST(Autograd, ReluSubgradientAtZero) {
  ad::Tape tape;
  const ad::Var x = tape.leaf(0.0);
  EXPECT_EQ(tape.backward(ad::relu(x)).wrt(x)(0, 0), 0.0);
}

TEST(Autograd, UnreachedLeafHasZeroGradient) {
  ad::Tape tape;
  const ad::Var x = tape.leaf(Matrix::Ones(2, 2));
  const ad::Var y = tape.leaf(1.0);
  const auto g = tape.backward(ad::scale(y, 2.0));
  EXPECT_FALSE(g.reached(x));
  EXPECT_EQ(g.wrt(x), Matrix::Zero(2, 2));
}

TEST(Autograd, Errors) {
  ad::Tape tape;
  ad::Tape other;
  const ad::Var a = tape.leaf(Matrix::Ones(2, 3));
  const ad::Var b = tape.leaf(Matrix::Ones(2, 2));
  EXPECT_THROW(a + b, DimensionError);
  EXPECT_THROW(ad::matmul(b, ad::transpose(a)), DimensionError);
  EXPECT_THROW(ad::trace(a), DimensionError);
  EXPECT_THROW(a + other.leaf(Matrix::Ones(2, 3)), ad::TapeError);
  EXPECT_THROW(tape.backward(a), ad::TapeError);
  EXPECT_THROW(ad::Var{}.value(), ad::TapeError);
}

TEST(Autograd, NodeCapIsEnforced) {
  ad::Tape tape(3);
  const ad::Var x = tape.leaf(1.0);
  const ad::Var y = x + x;
  (void)y;
  EXPECT_NO_THROW(tape.constant(1.0));
  EXPECT_THROW(tape.constant(1.0), ad::TapeError);
}
