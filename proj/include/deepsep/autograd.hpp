#pragma once

#include <cstddef>
#include <vector>

#include "deepsep/error.hpp"
#include "deepsep/types.hpp"

// Reverse-mode differentiation over dense matrices. Values are computed
// eagerly when an operation is recorded; backward() sweeps the node list in
// reverse, which is a valid topological order because every node is
// appended after its inputs.
namespace deepsep::ad {

class Tape;

class TapeError : public Error {
 public:
  using Error::Error;
};

// Handle to a node on a tape. Scalars are 1x1, vectors are n x 1.
class Var {
 public:
  Var() = default;

  Tape* tape() const { return tape_; }
  std::size_t id() const { return id_; }
  Eigen::Index rows() const { return rows_; }
  Eigen::Index cols() const { return cols_; }
  bool valid() const { return tape_ != nullptr; }

  const Matrix& value() const;
  double scalar() const;

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id, Eigen::Index rows, Eigen::Index cols)
      : tape_(tape), id_(id), rows_(rows), cols_(cols) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
  Eigen::Index rows_ = 0;
  Eigen::Index cols_ = 0;
};

enum class Op {
  Leaf,
  Constant,
  Add,
  Sub,
  Neg,
  MatMul,
  Transpose,
  Tanh,
  Relu,
  Cube,
  DivScalar,  // matrix / scalar node
  MulScalar,  // scalar node * matrix
  Scale,      // matrix * constant
  Outer,
  Dot,
  Trace,
  SquaredNorm,
  Sum,
};

// Adjoints indexed by node id. Nodes the root does not depend on have no
// stored adjoint; wrt() reports them as zeros.
class Gradients {
 public:
  Matrix wrt(const Var& v) const;
  bool reached(const Var& v) const;

 private:
  friend class Tape;
  std::vector<Matrix> adjoint_;
  std::vector<std::pair<Eigen::Index, Eigen::Index>> shape_;
};

class Tape {
 public:
  static constexpr std::size_t kDefaultNodeCap = 10'000'000;

  explicit Tape(std::size_t node_cap = kDefaultNodeCap) : node_cap_(node_cap) {}

  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Differentiable input (parameter or data we want derivatives for).
  Var leaf(Matrix value);
  Var leaf(double value);
  // Input excluded from differentiation bookkeeping.
  Var constant(Matrix value);
  Var constant(double value);

  Var record(Op op, const Var& a, const Var& b, double c, Matrix value);

  std::size_t size() const { return nodes_.size(); }
  std::size_t node_cap() const { return node_cap_; }
  const Matrix& value(std::size_t id) const { return nodes_[id].value; }

  Gradients backward(const Var& root) const;

 private:
  struct Node {
    Op op;
    std::size_t a;
    std::size_t b;
    double c;
    Matrix value;
  };

  Var push(Op op, std::size_t a, std::size_t b, double c, Matrix value);

  std::vector<Node> nodes_;
  std::size_t node_cap_;
};

Var operator+(const Var& a, const Var& b);
Var operator-(const Var& a, const Var& b);
Var operator-(const Var& a);

Var matmul(const Var& a, const Var& b);
Var transpose(const Var& a);
Var tanh(const Var& a);
Var relu(const Var& a);
Var cube(const Var& a);
// a / s for a scalar node s.
Var divide(const Var& a, const Var& s);
// s * a for a scalar node s.
Var multiply(const Var& s, const Var& a);
Var scale(const Var& a, double c);
// a b^T for vectors a, b.
Var outer(const Var& a, const Var& b);
// Sum of elementwise products; a and b share a shape.
Var dot(const Var& a, const Var& b);
Var trace(const Var& a);
Var squared_norm(const Var& a);
Var sum(const Var& a);

}  // namespace deepsep::ad
