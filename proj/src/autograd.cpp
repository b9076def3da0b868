#include "deepsep/autograd.hpp"

#include <string>

#include "deepsep/kernels.hpp"

namespace deepsep::ad {

namespace {

constexpr std::size_t kNone = static_cast<std::size_t>(-1);

Tape* common_tape(const Var& a, const Var& b) {
  if (!a.valid() || !b.valid()) throw TapeError("operation on an unbound variable");
  if (a.tape() != b.tape()) throw TapeError("operands live on different tapes");
  return a.tape();
}

Tape* tape_of(const Var& a) {
  if (!a.valid()) throw TapeError("operation on an unbound variable");
  return a.tape();
}

void require_scalar(const Var& s, const char* what) {
  if (s.rows() != 1 || s.cols() != 1)
    throw DimensionError(std::string(what) + ": expected a scalar operand");
}

void require_vector(const Var& v, const char* what) {
  if (v.cols() != 1) throw DimensionError(std::string(what) + ": expected a column vector");
}

void require_same_shape(const Var& a, const Var& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw DimensionError(std::string(what) + ": shape mismatch (" + std::to_string(a.rows()) +
                         "x" + std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) +
                         "x" + std::to_string(b.cols()) + ")");
}

Matrix scalar_matrix(double v) {
  Matrix m(1, 1);
  m(0, 0) = v;
  return m;
}

void accumulate(Matrix& slot, const Matrix& delta) {
  if (slot.size() == 0)
    slot = delta;
  else
    slot += delta;
}

}  // namespace

const Matrix& Var::value() const {
  if (!tape_) throw TapeError("value of an unbound variable");
  return tape_->value(id_);
}

double Var::scalar() const {
  if (rows_ != 1 || cols_ != 1) throw DimensionError("variable is not a scalar");
  return value()(0, 0);
}

Matrix Gradients::wrt(const Var& v) const {
  if (v.id() < adjoint_.size() && adjoint_[v.id()].size() != 0) return adjoint_[v.id()];
  return Matrix::Zero(v.rows(), v.cols());
}

bool Gradients::reached(const Var& v) const {
  return v.id() < adjoint_.size() && adjoint_[v.id()].size() != 0;
}

Var Tape::push(Op op, std::size_t a, std::size_t b, double c, Matrix value) {
  if (nodes_.size() >= node_cap_)
    throw TapeError("tape node cap of " + std::to_string(node_cap_) + " exceeded");
  const auto rows = value.rows();
  const auto cols = value.cols();
  nodes_.push_back(Node{op, a, b, c, std::move(value)});
  return Var(this, nodes_.size() - 1, rows, cols);
}

Var Tape::leaf(Matrix value) { return push(Op::Leaf, kNone, kNone, 0.0, std::move(value)); }
Var Tape::leaf(double value) { return leaf(scalar_matrix(value)); }
Var Tape::constant(Matrix value) {
  return push(Op::Constant, kNone, kNone, 0.0, std::move(value));
}
Var Tape::constant(double value) { return constant(scalar_matrix(value)); }

Var Tape::record(Op op, const Var& a, const Var& b, double c, Matrix value) {
  return push(op, a.valid() ? a.id() : kNone, b.valid() ? b.id() : kNone, c, std::move(value));
}

Gradients Tape::backward(const Var& root) const {
  if (root.tape() != this) throw TapeError("root does not belong to this tape");
  if (root.rows() != 1 || root.cols() != 1) throw TapeError("backward needs a scalar root");

  Gradients grads;
  grads.adjoint_.resize(root.id() + 1);
  grads.adjoint_[root.id()] = Matrix::Ones(1, 1);
  auto& adj = grads.adjoint_;

  for (std::size_t k = root.id() + 1; k-- > 0;) {
    if (adj[k].size() == 0) continue;
    const Node& n = nodes_[k];
    const Matrix& g = adj[k];
    switch (n.op) {
      case Op::Leaf:
      case Op::Constant:
        break;
      case Op::Add:
        accumulate(adj[n.a], g);
        accumulate(adj[n.b], g);
        break;
      case Op::Sub:
        accumulate(adj[n.a], g);
        accumulate(adj[n.b], -g);
        break;
      case Op::Neg:
        accumulate(adj[n.a], -g);
        break;
      case Op::MatMul: {
        const Matrix& a = nodes_[n.a].value;
        const Matrix& b = nodes_[n.b].value;
        accumulate(adj[n.a], kernels::matmul(g, b.transpose()));
        accumulate(adj[n.b], kernels::matmul(a.transpose(), g));
        break;
      }
      case Op::Transpose:
        accumulate(adj[n.a], g.transpose());
        break;
      case Op::Tanh:
        accumulate(adj[n.a], g.cwiseProduct((1.0 - n.value.array().square()).matrix()));
        break;
      case Op::Relu: {
        const Matrix& a = nodes_[n.a].value;
        accumulate(adj[n.a], (a.array() > 0.0).select(g, 0.0));
        break;
      }
      case Op::Cube: {
        const Matrix& a = nodes_[n.a].value;
        accumulate(adj[n.a], (3.0 * g.array() * a.array().square()).matrix());
        break;
      }
      case Op::DivScalar: {
        const double s = nodes_[n.b].value(0, 0);
        accumulate(adj[n.a], g / s);
        accumulate(adj[n.b], scalar_matrix(-kernels::dot(g, n.value) / s));
        break;
      }
      case Op::MulScalar: {
        const double s = nodes_[n.a].value(0, 0);
        const Matrix& b = nodes_[n.b].value;
        accumulate(adj[n.a], scalar_matrix(kernels::dot(g, b)));
        accumulate(adj[n.b], s * g);
        break;
      }
      case Op::Scale:
        accumulate(adj[n.a], n.c * g);
        break;
      case Op::Outer: {
        const Matrix& a = nodes_[n.a].value;
        const Matrix& b = nodes_[n.b].value;
        accumulate(adj[n.a], kernels::matmul(g, b));
        accumulate(adj[n.b], kernels::matmul(g.transpose(), a));
        break;
      }
      case Op::Dot: {
        const double s = g(0, 0);
        accumulate(adj[n.a], s * nodes_[n.b].value);
        accumulate(adj[n.b], s * nodes_[n.a].value);
        break;
      }
      case Op::Trace: {
        const Matrix& a = nodes_[n.a].value;
        Matrix d = Matrix::Zero(a.rows(), a.cols());
        for (Eigen::Index i = 0; i < std::min(a.rows(), a.cols()); ++i) d(i, i) = g(0, 0);
        accumulate(adj[n.a], d);
        break;
      }
      case Op::SquaredNorm:
        accumulate(adj[n.a], (2.0 * g(0, 0)) * nodes_[n.a].value);
        break;
      case Op::Sum: {
        const Matrix& a = nodes_[n.a].value;
        accumulate(adj[n.a], Matrix::Constant(a.rows(), a.cols(), g(0, 0)));
        break;
      }
    }
  }
  return grads;
}

Var operator+(const Var& a, const Var& b) {
  Tape* t = common_tape(a, b);
  require_same_shape(a, b, "add");
  return t->record(Op::Add, a, b, 0.0, a.value() + b.value());
}

Var operator-(const Var& a, const Var& b) {
  Tape* t = common_tape(a, b);
  require_same_shape(a, b, "sub");
  return t->record(Op::Sub, a, b, 0.0, a.value() - b.value());
}

Var operator-(const Var& a) {
  return tape_of(a)->record(Op::Neg, a, Var{}, 0.0, -a.value());
}

Var matmul(const Var& a, const Var& b) {
  Tape* t = common_tape(a, b);
  if (a.cols() != b.rows())
    throw DimensionError("matmul: inner dimensions differ (" + std::to_string(a.cols()) +
                         " vs " + std::to_string(b.rows()) + ")");
  return t->record(Op::MatMul, a, b, 0.0, kernels::matmul(a.value(), b.value()));
}

Var transpose(const Var& a) {
  return tape_of(a)->record(Op::Transpose, a, Var{}, 0.0, a.value().transpose());
}

Var tanh(const Var& a) {
  return tape_of(a)->record(Op::Tanh, a, Var{}, 0.0, a.value().array().tanh().matrix());
}

Var relu(const Var& a) {
  return tape_of(a)->record(Op::Relu, a, Var{}, 0.0, a.value().cwiseMax(0.0));
}

Var cube(const Var& a) {
  return tape_of(a)->record(Op::Cube, a, Var{}, 0.0, a.value().array().cube().matrix());
}

Var divide(const Var& a, const Var& s) {
  Tape* t = common_tape(a, s);
  require_scalar(s, "divide");
  return t->record(Op::DivScalar, a, s, 0.0, a.value() / s.value()(0, 0));
}

Var multiply(const Var& s, const Var& a) {
  Tape* t = common_tape(s, a);
  require_scalar(s, "multiply");
  return t->record(Op::MulScalar, s, a, 0.0, s.value()(0, 0) * a.value());
}

Var scale(const Var& a, double c) {
  return tape_of(a)->record(Op::Scale, a, Var{}, c, c * a.value());
}

Var outer(const Var& a, const Var& b) {
  Tape* t = common_tape(a, b);
  require_vector(a, "outer");
  require_vector(b, "outer");
  return t->record(Op::Outer, a, b, 0.0, kernels::outer(a.value(), b.value()));
}

Var dot(const Var& a, const Var& b) {
  Tape* t = common_tape(a, b);
  require_same_shape(a, b, "dot");
  return t->record(Op::Dot, a, b, 0.0, scalar_matrix(kernels::dot(a.value(), b.value())));
}

Var trace(const Var& a) {
  if (a.rows() != a.cols()) throw DimensionError("trace: matrix is not square");
  return tape_of(a)->record(Op::Trace, a, Var{}, 0.0, scalar_matrix(a.value().trace()));
}

Var squared_norm(const Var& a) {
  return tape_of(a)->record(Op::SquaredNorm, a, Var{}, 0.0,
                            scalar_matrix(kernels::dot(a.value(), a.value())));
}

Var sum(const Var& a) {
  return tape_of(a)->record(Op::Sum, a, Var{}, 0.0, scalar_matrix(a.value().sum()));
}

}  // namespace deepsep::ad
