#include "facelift/autodiff.hpp"

#include <algorithm>
#include <cmath>

namespace facelift::nn {

Tensor::Tensor(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    throw std::invalid_argument("tensor data length does not match shape");
  }
}

double Tensor::item() const {
  if (data_.size() != 1) throw std::invalid_argument("item() on a non-scalar tensor");
  return data_[0];
}

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double x) { return std::isfinite(x); });
}

std::string_view op_name(Op op) {
  switch (op) {
    case Op::Leaf: return "leaf";
    case Op::MatMul: return "matmul";
    case Op::Add: return "add";
    case Op::Sub: return "sub";
    case Op::Mul: return "mul";
    case Op::Scale: return "scale";
    case Op::Relu: return "relu";
    case Op::Sigmoid: return "sigmoid";
    case Op::Softmax: return "softmax";
    case Op::LogSoftmax: return "logSoftmax";
    case Op::Mean: return "mean";
    case Op::SumSquares: return "sumSquares";
    case Op::L2Norm: return "l2Norm";
    case Op::Pick: return "pick";
    case Op::Reshape: return "reshape";
    case Op::PatchPool: return "embeddingOfLabels";
    case Op::ExpandFactors: return "expandFactors";
  }
  return "?";
}

void PatchGeometry::validate() const {
  if (height <= 0 || width <= 0 || channels <= 0 || grid_rows <= 0 || grid_cols <= 0 ||
      grid_rows > height || grid_cols > width) {
    throw std::invalid_argument("invalid patch geometry");
  }
}

// ---------------------------------------------------------------------------

Var Graph::push(Node node) {
  const std::size_t id = nodes_.size();
  if (!node.value.all_finite()) {
    throw NumericError("non-finite value produced by node " + std::to_string(id) + " (" +
                           std::string(op_name(node.op)) + ")",
                       id);
  }
  if (node.op != Op::Leaf) {
    const bool binary = node.op == Op::MatMul || node.op == Op::Add || node.op == Op::Sub ||
                        node.op == Op::Mul;
    node.requires_grad = nodes_[node.a].requires_grad || (binary && nodes_[node.b].requires_grad);
  }
  nodes_.push_back(std::move(node));
  return Var{this, id};
}

void Graph::check(const Var& v) const {
  if (v.graph != this || v.id >= nodes_.size()) {
    throw std::invalid_argument("variable does not belong to this graph");
  }
}

Var Graph::constant(Tensor value) {
  Node n;
  n.value = std::move(value);
  return push(std::move(n));
}

Var Graph::variable(Tensor value) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = true;
  return push(std::move(n));
}

Var Graph::matmul(Var a, Var b) {
  check(a);
  check(b);
  const Tensor& x = value(a);
  const Tensor& y = value(b);
  if (x.cols() != y.rows()) throw std::invalid_argument("matmul: inner dimensions differ");
  Tensor out(x.rows(), y.cols());
  const std::size_t n = x.rows(), k = x.cols(), m = y.cols();
  for (std::size_t i = 0; i < n; ++i) {
    double* o = &out(i, 0);
    for (std::size_t p = 0; p < k; ++p) {
      const double xv = x(i, p);
      if (xv == 0.0) continue;
      const double* yr = &y(p, 0);
      for (std::size_t j = 0; j < m; ++j) o[j] += xv * yr[j];
    }
  }
  Node node;
  node.op = Op::MatMul;
  node.a = a.id;
  node.b = b.id;
  node.value = std::move(out);
  return push(std::move(node));
}

Var Graph::add(Var a, Var b) {
  check(a);
  check(b);
  const Tensor& x = value(a);
  const Tensor& y = value(b);
  const bool broadcast = y.rows() == 1 && x.rows() != 1 && y.cols() == x.cols();
  if (!broadcast && (x.rows() != y.rows() || x.cols() != y.cols())) {
    throw std::invalid_argument("add: shape mismatch");
  }
  Tensor out = x;
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = 0; j < x.cols(); ++j) out(i, j) += broadcast ? y(0, j) : y(i, j);
  Node node;
  node.op = Op::Add;
  node.a = a.id;
  node.b = b.id;
  node.value = std::move(out);
  return push(std::move(node));
}

Var Graph::sub(Var a, Var b) {
  check(a);
  check(b);
  const Tensor& x = value(a);
  const Tensor& y = value(b);
  if (x.rows() != y.rows() || x.cols() != y.cols()) throw std::invalid_argument("sub: shape mismatch");
  Tensor out = x;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= y[i];
  Node node;
  node.op = Op::Sub;
  node.a = a.id;
  node.b = b.id;
  node.value = std::move(out);
  return push(std::move(node));
}

Var Graph::mul(Var a, Var b) {
  check(a);
  check(b);
  const Tensor& x = value(a);
  const Tensor& y = value(b);
  if (x.rows() != y.rows() || x.cols() != y.cols()) throw std::invalid_argument("mul: shape mismatch");
  Tensor out = x;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= y[i];
  Node node;
  node.op = Op::Mul;
  node.a = a.id;
  node.b = b.id;
  node.value = std::move(out);
  return push(std::move(node));
}

Var Graph::scale(Var a, double k) {
  check(a);
  Tensor out = value(a);
  for (auto& v : out.values()) v *= k;
  Node node;
  node.op = Op::Scale;
  node.a = a.id;
  node.k = k;
  node.value = std::move(out);
  return push(std::move(node));
}

Var Graph::relu(Var a) {
  check(a);
  Tensor out = value(a);
  for (auto& v : out.values()) v = v > 0.0 ? v : 0.0;
  Node node;
  node.op = Op::Relu;
  node.a = a.id;
  node.value = std::move(out);
  return push(std::move(node));
}

Var Graph::sigmoid(Var a) {
  check(a);
  Tensor out = value(a);
  for (auto& v : out.values()) {
    v = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
  }
  Node node;
  node.op = Op::Sigmoid;
  node.a = a.id;
  node.value = std::move(out);
  return push(std::move(node));
}

Var Graph::softmax(Var a) {
  check(a);
  Tensor out = value(a);
  const std::size_t m = out.cols();
  for (std::size_t i = 0; i < out.rows(); ++i) {
    double* r = &out(i, 0);
    const double mx = *std::max_element(r, r + m);
    double z = 0.0;
    for (std::size_t j = 0; j < m; ++j) z += (r[j] = std::exp(r[j] - mx));
    for (std::size_t j = 0; j < m; ++j) r[j] /= z;
  }
  Node node;
  node.op = Op::Softmax;
  node.a = a.id;
  node.value = std::move(out);
  return push(std::move(node));
}

Var Graph::log_softmax(Var a) {
  check(a);
  Tensor out = value(a);
  const std::size_t m = out.cols();
  for (std::size_t i = 0; i < out.rows(); ++i) {
    double* r = &out(i, 0);
    const double mx = *std::max_element(r, r + m);
    double z = 0.0;
    for (std::size_t j = 0; j < m; ++j) z += std::exp(r[j] - mx);
    const double lse = mx + std::log(z);
    for (std::size_t j = 0; j < m; ++j) r[j] -= lse;
  }
  Node node;
  node.op = Op::LogSoftmax;
  node.a = a.id;
  node.value = std::move(out);
  return push(std::move(node));
}

Var Graph::mean(Var a) {
  check(a);
  const Tensor& x = value(a);
  if (x.size() == 0) throw std::invalid_argument("mean of an empty tensor");
  double s = 0.0;
  for (const double v : x.values()) s += v;
  Node node;
  node.op = Op::Mean;
  node.a = a.id;
  node.value = Tensor::scalar(s / static_cast<double>(x.size()));
  return push(std::move(node));
}

Var Graph::sum_squares(Var a) {
  check(a);
  double s = 0.0;
  for (const double v : value(a).values()) s += v * v;
  Node node;
  node.op = Op::SumSquares;
  node.a = a.id;
  node.value = Tensor::scalar(s);
  return push(std::move(node));
}

Var Graph::l2_norm(Var a) {
  check(a);
  double s = 0.0;
  for (const double v : value(a).values()) s += v * v;
  Node node;
  node.op = Op::L2Norm;
  node.a = a.id;
  node.value = Tensor::scalar(std::sqrt(s));
  return push(std::move(node));
}

Var Graph::pick(Var a, std::vector<std::size_t> columns) {
  check(a);
  const Tensor& x = value(a);
  if (columns.size() != x.rows()) throw std::invalid_argument("pick: one column per row required");
  Tensor out(x.rows(), 1);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    if (columns[i] >= x.cols()) throw std::invalid_argument("pick: column out of range");
    out(i, 0) = x(i, columns[i]);
  }
  Node node;
  node.op = Op::Pick;
  node.a = a.id;
  node.index = std::move(columns);
  node.value = std::move(out);
  return push(std::move(node));
}

Var Graph::reshape(Var a, std::size_t rows, std::size_t cols) {
  check(a);
  const Tensor& x = value(a);
  if (rows * cols != x.size()) throw std::invalid_argument("reshape: element count differs");
  Node node;
  node.op = Op::Reshape;
  node.a = a.id;
  node.value = Tensor(rows, cols, x.vector());
  return push(std::move(node));
}

Var Graph::patch_pool(Var a, const PatchGeometry& g) {
  check(a);
  g.validate();
  const Tensor& x = value(a);
  if (x.cols() != g.cell_values()) throw std::invalid_argument("patch_pool: width mismatch");
  const auto ch = static_cast<std::size_t>(g.channels);
  std::vector<std::size_t> counts(static_cast<std::size_t>(g.patch_count()), 0);
  for (int r = 0; r < g.height; ++r)
    for (int c = 0; c < g.width; ++c) ++counts[static_cast<std::size_t>(g.patch_of(r, c))];
  Tensor out(x.rows(), g.pooled_values());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    const double* in = &x(i, 0);
    double* o = &out(i, 0);
    for (int r = 0; r < g.height; ++r) {
      for (int c = 0; c < g.width; ++c) {
        const auto p = static_cast<std::size_t>(g.patch_of(r, c));
        const double* cell = in + (static_cast<std::size_t>(r) * g.width + c) * ch;
        for (std::size_t k = 0; k < ch; ++k) o[p * ch + k] += cell[k];
      }
    }
    for (std::size_t p = 0; p < counts.size(); ++p)
      for (std::size_t k = 0; k < ch; ++k) o[p * ch + k] /= static_cast<double>(counts[p]);
  }
  Node node;
  node.op = Op::PatchPool;
  node.a = a.id;
  node.geom = g;
  node.index = std::move(counts);
  node.value = std::move(out);
  return push(std::move(node));
}

Var Graph::expand_factors(Var a, const PatchGeometry& g) {
  check(a);
  g.validate();
  const Tensor& x = value(a);
  if (x.cols() != g.factor_values()) throw std::invalid_argument("expand_factors: width mismatch");
  const auto ch = static_cast<std::size_t>(g.channels);
  const std::size_t col_off = static_cast<std::size_t>(g.height) * ch;
  const std::size_t patch_off = col_off + static_cast<std::size_t>(g.width) * ch;
  Tensor out(x.rows(), g.cell_values());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    const double* in = &x(i, 0);
    double* o = &out(i, 0);
    for (int r = 0; r < g.height; ++r) {
      const double* rf = in + static_cast<std::size_t>(r) * ch;
      for (int c = 0; c < g.width; ++c) {
        const double* cf = in + col_off + static_cast<std::size_t>(c) * ch;
        const double* pf = in + patch_off + static_cast<std::size_t>(g.patch_of(r, c)) * ch;
        double* cell = o + (static_cast<std::size_t>(r) * g.width + c) * ch;
        for (std::size_t k = 0; k < ch; ++k) cell[k] = rf[k] + cf[k] + pf[k];
      }
    }
  }
  Node node;
  node.op = Op::ExpandFactors;
  node.a = a.id;
  node.geom = g;
  node.value = std::move(out);
  return push(std::move(node));
}

// ---------------------------------------------------------------------------

void Graph::backward(Var loss) {
  check(loss);
  if (value(loss).size() != 1) {
    throw std::invalid_argument("backward: loss must be a 1x1 tensor");
  }
  for (std::size_t i = 0; i <= loss.id; ++i) {
    Node& n = nodes_[i];
    if (n.requires_grad || n.op == Op::Leaf || i == loss.id) {
      n.grad = Tensor(n.value.rows(), n.value.cols());
    } else {
      n.grad = Tensor();
    }
  }
  nodes_[loss.id].grad[0] = 1.0;
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    if (!nodes_[i].requires_grad) continue;
    if (!nodes_[i].grad.all_finite()) {
      throw NumericError("non-finite gradient at node " + std::to_string(i) + " (" +
                             std::string(op_name(nodes_[i].op)) + ")",
                         i);
    }
    backprop(i);
  }
}

void Graph::backprop(std::size_t id) {
  Node& n = nodes_[id];
  const Tensor& g = n.grad;
  switch (n.op) {
    case Op::Leaf:
      return;
    case Op::MatMul: {
      const Tensor& x = nodes_[n.a].value;
      const Tensor& y = nodes_[n.b].value;
      Tensor& gx = nodes_[n.a].grad;
      Tensor& gy = nodes_[n.b].grad;
      const bool need_x = nodes_[n.a].requires_grad, need_y = nodes_[n.b].requires_grad;
      const std::size_t rows = x.rows(), k = x.cols(), m = y.cols();
      for (std::size_t i = 0; i < rows; ++i) {
        const double* gr = &g(i, 0);
        for (std::size_t p = 0; p < k; ++p) {
          if (need_x) {
            const double* yr = &y(p, 0);
            double acc = 0.0;
            for (std::size_t j = 0; j < m; ++j) acc += gr[j] * yr[j];
            gx(i, p) += acc;
          }
          if (!need_y) continue;
          const double xv = x(i, p);
          if (xv == 0.0) continue;
          double* gyr = &gy(p, 0);
          for (std::size_t j = 0; j < m; ++j) gyr[j] += xv * gr[j];
        }
      }
      return;
    }
    case Op::Add: {
      Tensor& ga = nodes_[n.a].grad;
      Tensor& gb = nodes_[n.b].grad;
      if (nodes_[n.a].requires_grad)
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
      if (!nodes_[n.b].requires_grad) return;
      if (gb.size() == g.size()) {
        for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i];
      } else {
        for (std::size_t i = 0; i < g.rows(); ++i)
          for (std::size_t j = 0; j < g.cols(); ++j) gb(0, j) += g(i, j);
      }
      return;
    }
    case Op::Sub: {
      Tensor& ga = nodes_[n.a].grad;
      Tensor& gb = nodes_[n.b].grad;
      if (nodes_[n.a].requires_grad)
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
      if (nodes_[n.b].requires_grad)
        for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
      return;
    }
    case Op::Mul: {
      const Tensor& x = nodes_[n.a].value;
      const Tensor& y = nodes_[n.b].value;
      Tensor& ga = nodes_[n.a].grad;
      Tensor& gb = nodes_[n.b].grad;
      if (nodes_[n.a].requires_grad)
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * y[i];
      if (nodes_[n.b].requires_grad)
        for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * x[i];
      return;
    }
    case Op::Scale: {
      Tensor& ga = nodes_[n.a].grad;
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += n.k * g[i];
      return;
    }
    case Op::Relu: {
      const Tensor& x = nodes_[n.a].value;
      Tensor& ga = nodes_[n.a].grad;
      for (std::size_t i = 0; i < g.size(); ++i)
        if (x[i] > 0.0) ga[i] += g[i];
      return;
    }
    case Op::Sigmoid: {
      Tensor& ga = nodes_[n.a].grad;
      for (std::size_t i = 0; i < g.size(); ++i) {
        const double s = n.value[i];
        ga[i] += g[i] * s * (1.0 - s);
      }
      return;
    }
    case Op::Softmax: {
      Tensor& ga = nodes_[n.a].grad;
      const std::size_t m = g.cols();
      for (std::size_t i = 0; i < g.rows(); ++i) {
        const double* s = &n.value(i, 0);
        const double* gr = &g(i, 0);
        double dot = 0.0;
        for (std::size_t j = 0; j < m; ++j) dot += gr[j] * s[j];
        for (std::size_t j = 0; j < m; ++j) ga(i, j) += s[j] * (gr[j] - dot);
      }
      return;
    }
    case Op::LogSoftmax: {
      Tensor& ga = nodes_[n.a].grad;
      const std::size_t m = g.cols();
      for (std::size_t i = 0; i < g.rows(); ++i) {
        const double* ls = &n.value(i, 0);
        const double* gr = &g(i, 0);
        double total = 0.0;
        for (std::size_t j = 0; j < m; ++j) total += gr[j];
        for (std::size_t j = 0; j < m; ++j) ga(i, j) += gr[j] - std::exp(ls[j]) * total;
      }
      return;
    }
    case Op::Mean: {
      Tensor& ga = nodes_[n.a].grad;
      const double d = g[0] / static_cast<double>(ga.size());
      for (auto& v : ga.values()) v += d;
      return;
    }
    case Op::SumSquares: {
      const Tensor& x = nodes_[n.a].value;
      Tensor& ga = nodes_[n.a].grad;
      for (std::size_t i = 0; i < x.size(); ++i) ga[i] += 2.0 * x[i] * g[0];
      return;
    }
    case Op::L2Norm: {
      const double norm = n.value[0];
      if (norm == 0.0) return;
      const Tensor& x = nodes_[n.a].value;
      Tensor& ga = nodes_[n.a].grad;
      for (std::size_t i = 0; i < x.size(); ++i) ga[i] += x[i] / norm * g[0];
      return;
    }
    case Op::Pick: {
      Tensor& ga = nodes_[n.a].grad;
      for (std::size_t i = 0; i < n.index.size(); ++i) ga(i, n.index[i]) += g(i, 0);
      return;
    }
    case Op::Reshape: {
      Tensor& ga = nodes_[n.a].grad;
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
      return;
    }
    case Op::PatchPool: {
      const PatchGeometry& geo = n.geom;
      const auto ch = static_cast<std::size_t>(geo.channels);
      Tensor& ga = nodes_[n.a].grad;
      for (std::size_t i = 0; i < g.rows(); ++i) {
        const double* gr = &g(i, 0);
        double* out = &ga(i, 0);
        for (int r = 0; r < geo.height; ++r) {
          for (int c = 0; c < geo.width; ++c) {
            const auto p = static_cast<std::size_t>(geo.patch_of(r, c));
            const double inv = 1.0 / static_cast<double>(n.index[p]);
            double* cell = out + (static_cast<std::size_t>(r) * geo.width + c) * ch;
            for (std::size_t k = 0; k < ch; ++k) cell[k] += gr[p * ch + k] * inv;
          }
        }
      }
      return;
    }
    case Op::ExpandFactors: {
      const PatchGeometry& geo = n.geom;
      const auto ch = static_cast<std::size_t>(geo.channels);
      const std::size_t col_off = static_cast<std::size_t>(geo.height) * ch;
      const std::size_t patch_off = col_off + static_cast<std::size_t>(geo.width) * ch;
      Tensor& ga = nodes_[n.a].grad;
      for (std::size_t i = 0; i < g.rows(); ++i) {
        const double* gr = &g(i, 0);
        double* out = &ga(i, 0);
        for (int r = 0; r < geo.height; ++r) {
          double* rf = out + static_cast<std::size_t>(r) * ch;
          for (int c = 0; c < geo.width; ++c) {
            double* cf = out + col_off + static_cast<std::size_t>(c) * ch;
            double* pf = out + patch_off + static_cast<std::size_t>(geo.patch_of(r, c)) * ch;
            const double* cell = gr + (static_cast<std::size_t>(r) * geo.width + c) * ch;
            for (std::size_t k = 0; k < ch; ++k) {
              rf[k] += cell[k];
              cf[k] += cell[k];
              pf[k] += cell[k];
            }
          }
        }
      }
      return;
    }
  }
}

}  // namespace facelift::nn
