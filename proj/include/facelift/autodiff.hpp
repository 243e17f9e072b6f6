#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace facelift::nn {

/// Dense row-major matrix of doubles. Vectors are 1×n.
class Tensor {
 public:
  Tensor() = default;
  Tensor(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Tensor(std::size_t rows, std::size_t cols, std::vector<double> data);

  static Tensor row(std::vector<double> values) {
    const auto n = values.size();
    return Tensor(1, n, std::move(values));
  }
  static Tensor scalar(double v) { return Tensor(1, 1, v); }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  std::vector<std::size_t> shape() const { return {rows_, cols_}; }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  const double& operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  double& operator[](std::size_t i) { return data_[i]; }
  const double& operator[](std::size_t i) const { return data_[i]; }

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }
  const std::vector<double>& vector() const { return data_; }

  double item() const;
  bool all_finite() const;

  bool operator==(const Tensor&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

class NumericError : public std::runtime_error {
 public:
  NumericError(const std::string& what, std::size_t node)
      : std::runtime_error(what), node_(node) {}
  std::size_t node() const { return node_; }

 private:
  std::size_t node_;
};

enum class Op : std::uint8_t {
  Leaf,
  MatMul,
  Add,          // same shape, or right operand 1×n broadcast over rows
  Sub,          // same shape
  Mul,          // elementwise, same shape
  Scale,        // by a constant
  Relu,
  Sigmoid,
  Softmax,      // row-wise
  LogSoftmax,   // row-wise
  Mean,         // all elements -> 1×1
  SumSquares,   // all elements -> 1×1
  L2Norm,       // all elements -> 1×1, subgradient 0 at the origin
  Pick,         // one column per row -> n×1
  Reshape,
  PatchPool,    // per-cell label distributions -> per-patch mean distributions
  ExpandFactors,// row/column/patch logit factors -> per-cell logits
};

std::string_view op_name(Op op);

class Graph;

/// Handle to a node in a Graph.
struct Var {
  Graph* graph = nullptr;
  std::size_t id = 0;
};

/// Cell layout for PatchPool / ExpandFactors: a height×width raster with
/// `channels` values per cell, split into a grid_rows×grid_cols patch grid.
struct PatchGeometry {
  int height = 0;
  int width = 0;
  int channels = 0;
  int grid_rows = 0;
  int grid_cols = 0;

  int patch_count() const { return grid_rows * grid_cols; }
  int patch_of(int r, int c) const {
    return (r * grid_rows / height) * grid_cols + (c * grid_cols / width);
  }
  std::size_t cell_values() const {
    return static_cast<std::size_t>(height) * width * channels;
  }
  std::size_t pooled_values() const {
    return static_cast<std::size_t>(patch_count()) * channels;
  }
  std::size_t factor_values() const {
    return static_cast<std::size_t>(height + width + patch_count()) * channels;
  }
  void validate() const;
};

/// Tape of recorded operations. Nodes are appended in evaluation order, so
/// the tape is its own topological order.
class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  /// Leaf excluded from differentiation; its gradient reads as zeros.
  Var constant(Tensor value);
  /// Leaf whose gradient the caller wants.
  Var variable(Tensor value);

  Var matmul(Var a, Var b);
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var scale(Var a, double k);
  Var relu(Var a);
  Var sigmoid(Var a);
  Var softmax(Var a);
  Var log_softmax(Var a);
  Var mean(Var a);
  Var sum_squares(Var a);
  Var l2_norm(Var a);
  Var pick(Var a, std::vector<std::size_t> columns);
  Var reshape(Var a, std::size_t rows, std::size_t cols);
  Var patch_pool(Var a, const PatchGeometry& geom);
  Var expand_factors(Var a, const PatchGeometry& geom);

  const Tensor& value(Var v) const { return nodes_.at(v.id).value; }
  const Tensor& grad(Var v) const { return nodes_.at(v.id).grad; }
  Op op(Var v) const { return nodes_.at(v.id).op; }
  std::size_t size() const { return nodes_.size(); }

  /// Reverse sweep from a 1×1 loss. Throws std::invalid_argument for a
  /// non-scalar loss and NumericError naming the node whose gradient went
  /// non-finite.
  void backward(Var loss);

 private:
  struct Node {
    Op op = Op::Leaf;
    std::size_t a = 0;
    std::size_t b = 0;
    bool requires_grad = false;
    Tensor value;
    Tensor grad;
    double k = 0.0;
    std::vector<std::size_t> index;
    PatchGeometry geom;
  };

  Var push(Node node);
  void check(const Var& v) const;
  void backprop(std::size_t id);

  std::vector<Node> nodes_;
};

}  // namespace facelift::nn
