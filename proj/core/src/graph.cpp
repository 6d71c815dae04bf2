#include "advrec/graph.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "advrec/errors.hpp"

namespace advrec {

std::string_view op_name(OpKind kind) {
  switch (kind) {
    case OpKind::kLeaf: return "leaf";
    case OpKind::kAdd: return "add";
    case OpKind::kSub: return "sub";
    case OpKind::kMul: return "mul";
    case OpKind::kAffine: return "affine";
    case OpKind::kScale: return "scale_by";
    case OpKind::kMatVec: return "matvec";
    case OpKind::kConcat: return "concat";
    case OpKind::kRelu: return "relu";
    case OpKind::kSigmoid: return "sigmoid";
    case OpKind::kTanh: return "tanh";
    case OpKind::kSoftmax: return "softmax";
    case OpKind::kLog: return "log";
    case OpKind::kClamp: return "clamp";
    case OpKind::kSum: return "sum";
    case OpKind::kPick: return "pick";
    case OpKind::kDropout: return "dropout";
  }
  return "?";
}

namespace {

void require_same_shape(OpKind kind, const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) {
    throw ShapeError(std::string(op_name(kind)) + ": shapes " + shape_str(a.shape()) +
                     " and " + shape_str(b.shape()) + " differ");
  }
}

double sigmoid_scalar(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

NodeId Graph::push(Node node) {
  grads_valid_ = false;
  nodes_.push_back(std::move(node));
  return static_cast<NodeId>(nodes_.size() - 1);
}

const Graph::Node& Graph::at(NodeId id) const {
  if (id >= nodes_.size()) throw StateError("graph: node id " + std::to_string(id) + " out of range");
  return nodes_[id];
}

const Tensor& Graph::value(NodeId id) const { return at(id).out; }

double Graph::scalar(NodeId id) const {
  const Tensor& t = value(id);
  if (t.size() != 1) throw ShapeError("scalar: node has shape " + shape_str(t.shape()));
  return t[0];
}

NodeId Graph::leaf(Tensor value, bool requires_grad) {
  Node n;
  n.kind = OpKind::kLeaf;
  n.out = std::move(value);
  n.requires_grad = requires_grad;
  return push(std::move(n));
}

NodeId Graph::add(NodeId a, NodeId b) {
  const Tensor &va = value(a), &vb = value(b);
  require_same_shape(OpKind::kAdd, va, vb);
  Node n;
  n.kind = OpKind::kAdd;
  n.in = {a, b};
  n.requires_grad = at(a).requires_grad || at(b).requires_grad;
  n.out = va;
  for (std::size_t i = 0; i < vb.size(); ++i) n.out[i] += vb[i];
  return push(std::move(n));
}

NodeId Graph::sub(NodeId a, NodeId b) {
  const Tensor &va = value(a), &vb = value(b);
  require_same_shape(OpKind::kSub, va, vb);
  Node n;
  n.kind = OpKind::kSub;
  n.in = {a, b};
  n.requires_grad = at(a).requires_grad || at(b).requires_grad;
  n.out = va;
  for (std::size_t i = 0; i < vb.size(); ++i) n.out[i] -= vb[i];
  return push(std::move(n));
}

NodeId Graph::mul(NodeId a, NodeId b) {
  const Tensor &va = value(a), &vb = value(b);
  require_same_shape(OpKind::kMul, va, vb);
  Node n;
  n.kind = OpKind::kMul;
  n.in = {a, b};
  n.requires_grad = at(a).requires_grad || at(b).requires_grad;
  n.out = va;
  for (std::size_t i = 0; i < vb.size(); ++i) n.out[i] *= vb[i];
  return push(std::move(n));
}

NodeId Graph::affine(NodeId x, double scale, double shift) {
  Node n;
  n.kind = OpKind::kAffine;
  n.in = {x, kNoNode};
  n.requires_grad = at(x).requires_grad;
  n.a = scale;
  n.b = shift;
  n.out = value(x);
  for (std::size_t i = 0; i < n.out.size(); ++i) n.out[i] = scale * n.out[i] + shift;
  return push(std::move(n));
}

NodeId Graph::scale_by(NodeId x, NodeId s) {
  if (value(s).size() != 1) {
    throw ShapeError("scale_by: scale node has shape " + shape_str(value(s).shape()) +
                     ", expected a scalar");
  }
  Node n;
  n.kind = OpKind::kScale;
  n.in = {x, s};
  n.requires_grad = at(x).requires_grad || at(s).requires_grad;
  double f = value(s)[0];
  n.out = value(x);
  for (std::size_t i = 0; i < n.out.size(); ++i) n.out[i] *= f;
  return push(std::move(n));
}

NodeId Graph::matvec(NodeId w, NodeId x) {
  const Tensor &vw = value(w), &vx = value(x);
  if (vw.rank() != 2 || vx.rank() != 1 || vw.cols() != vx.size()) {
    throw ShapeError("matvec: weight " + shape_str(vw.shape()) + " incompatible with input " +
                     shape_str(vx.shape()));
  }
  Node n;
  n.kind = OpKind::kMatVec;
  n.in = {w, x};
  n.requires_grad = at(w).requires_grad || at(x).requires_grad;
  std::size_t rows = vw.rows(), cols = vw.cols();
  n.out = Tensor({rows});
  for (std::size_t r = 0; r < rows; ++r) {
    double s = 0.0;
    const double* wr = vw.data().data() + r * cols;
    for (std::size_t c = 0; c < cols; ++c) s += wr[c] * vx[c];
    n.out[r] = s;
  }
  return push(std::move(n));
}

NodeId Graph::concat(NodeId a, NodeId b) {
  const Tensor &va = value(a), &vb = value(b);
  if (va.rank() != 1 || vb.rank() != 1) {
    throw ShapeError("concat: expected vectors, got " + shape_str(va.shape()) + " and " +
                     shape_str(vb.shape()));
  }
  Node n;
  n.kind = OpKind::kConcat;
  n.in = {a, b};
  n.requires_grad = at(a).requires_grad || at(b).requires_grad;
  std::vector<double> out;
  out.reserve(va.size() + vb.size());
  out.insert(out.end(), va.data().begin(), va.data().end());
  out.insert(out.end(), vb.data().begin(), vb.data().end());
  n.out = Tensor::vec(std::move(out));
  return push(std::move(n));
}

NodeId Graph::relu(NodeId x) {
  Node n;
  n.kind = OpKind::kRelu;
  n.in = {x, kNoNode};
  n.requires_grad = at(x).requires_grad;
  n.out = value(x);
  for (std::size_t i = 0; i < n.out.size(); ++i) n.out[i] = std::max(0.0, n.out[i]);
  return push(std::move(n));
}

NodeId Graph::sigmoid(NodeId x) {
  Node n;
  n.kind = OpKind::kSigmoid;
  n.in = {x, kNoNode};
  n.requires_grad = at(x).requires_grad;
  n.out = value(x);
  for (std::size_t i = 0; i < n.out.size(); ++i) n.out[i] = sigmoid_scalar(n.out[i]);
  return push(std::move(n));
}

NodeId Graph::tanh(NodeId x) {
  Node n;
  n.kind = OpKind::kTanh;
  n.in = {x, kNoNode};
  n.requires_grad = at(x).requires_grad;
  n.out = value(x);
  for (std::size_t i = 0; i < n.out.size(); ++i) n.out[i] = std::tanh(n.out[i]);
  return push(std::move(n));
}

NodeId Graph::softmax(NodeId x) {
  Node n;
  n.kind = OpKind::kSoftmax;
  n.in = {x, kNoNode};
  n.requires_grad = at(x).requires_grad;
  n.out = advrec::softmax(value(x));
  return push(std::move(n));
}

NodeId Graph::log(NodeId x) {
  Node n;
  n.kind = OpKind::kLog;
  n.in = {x, kNoNode};
  n.requires_grad = at(x).requires_grad;
  n.out = value(x);
  for (std::size_t i = 0; i < n.out.size(); ++i) n.out[i] = std::log(n.out[i]);
  return push(std::move(n));
}

NodeId Graph::clamp(NodeId x, double lo, double hi) {
  Node n;
  n.kind = OpKind::kClamp;
  n.in = {x, kNoNode};
  n.requires_grad = at(x).requires_grad;
  n.a = lo;
  n.b = hi;
  n.out = value(x);
  for (std::size_t i = 0; i < n.out.size(); ++i) n.out[i] = std::clamp(n.out[i], lo, hi);
  return push(std::move(n));
}

NodeId Graph::sum(NodeId x) {
  Node n;
  n.kind = OpKind::kSum;
  n.in = {x, kNoNode};
  n.requires_grad = at(x).requires_grad;
  n.out = Tensor::scalar(value(x).sum());
  return push(std::move(n));
}

NodeId Graph::pick(NodeId x, std::size_t index) {
  const Tensor& vx = value(x);
  if (index >= vx.size()) {
    throw ShapeError("pick: index " + std::to_string(index) + " out of range for " +
                     shape_str(vx.shape()));
  }
  Node n;
  n.kind = OpKind::kPick;
  n.in = {x, kNoNode};
  n.requires_grad = at(x).requires_grad;
  n.index = index;
  n.out = Tensor::scalar(vx[index]);
  return push(std::move(n));
}

NodeId Graph::dropout(NodeId x, double rate, Rng& rng, bool training) {
  if (rate < 0.0 || rate >= 1.0) {
    throw ConfigError("dropout: rate " + std::to_string(rate) + " outside [0, 1)");
  }
  if (!training || rate == 0.0) return x;
  Node n;
  n.kind = OpKind::kDropout;
  n.in = {x, kNoNode};
  n.requires_grad = at(x).requires_grad;
  const Tensor& vx = value(x);
  double keep = 1.0 - rate;
  n.mask.resize(vx.size());
  n.out = vx;
  for (std::size_t i = 0; i < vx.size(); ++i) {
    n.mask[i] = rng.uniform() < rate ? 0.0 : 1.0 / keep;
    n.out[i] *= n.mask[i];
  }
  return push(std::move(n));
}

Tensor& Graph::grad_buffer(NodeId id) {
  Tensor& g = grads_[id];
  if (g.empty()) g = Tensor(nodes_[id].out.shape());
  return g;
}

void Graph::backward(NodeId root) { backward(root, Tensor::scalar(1.0)); }

void Graph::backward(NodeId root, const Tensor& seed) {
  const Node& r = at(root);
  if (!seed.same_shape(r.out)) {
    throw ShapeError("backward: seed shape " + shape_str(seed.shape()) +
                     " does not match root shape " + shape_str(r.out.shape()));
  }
  grads_.assign(nodes_.size(), Tensor{});
  grads_valid_ = true;
  if (!r.requires_grad) return;  // nothing reachable requires gradients
  grads_[root] = seed;
  for (NodeId id = root + 1; id-- > 0;) backprop_node(id);
}

void Graph::backprop_node(NodeId id) {
  const Node& n = nodes_[id];
  if (!n.requires_grad || grads_[id].empty()) return;
  const Tensor& g = grads_[id];  // inputs have lower ids; no reallocation below
  auto wants = [&](NodeId in) { return in != kNoNode && nodes_[in].requires_grad; };

  switch (n.kind) {
    case OpKind::kLeaf:
      break;
    case OpKind::kAdd: {
      if (wants(n.in[0])) {
        Tensor& ga = grad_buffer(n.in[0]);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
      }
      if (wants(n.in[1])) {
        Tensor& gb = grad_buffer(n.in[1]);
        for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i];
      }
      break;
    }
    case OpKind::kSub: {
      if (wants(n.in[0])) {
        Tensor& ga = grad_buffer(n.in[0]);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
      }
      if (wants(n.in[1])) {
        Tensor& gb = grad_buffer(n.in[1]);
        for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
      }
      break;
    }
    case OpKind::kMul: {
      const Tensor &va = nodes_[n.in[0]].out, &vb = nodes_[n.in[1]].out;
      if (wants(n.in[0])) {
        Tensor& ga = grad_buffer(n.in[0]);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * vb[i];
      }
      if (wants(n.in[1])) {
        Tensor& gb = grad_buffer(n.in[1]);
        for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * va[i];
      }
      break;
    }
    case OpKind::kAffine: {
      if (wants(n.in[0])) {
        Tensor& gx = grad_buffer(n.in[0]);
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] += n.a * g[i];
      }
      break;
    }
    case OpKind::kScale: {
      const Tensor& vx = nodes_[n.in[0]].out;
      double f = nodes_[n.in[1]].out[0];
      if (wants(n.in[0])) {
        Tensor& gx = grad_buffer(n.in[0]);
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] += f * g[i];
      }
      if (wants(n.in[1])) {
        Tensor& gs = grad_buffer(n.in[1]);
        double s = 0.0;
        for (std::size_t i = 0; i < g.size(); ++i) s += g[i] * vx[i];
        gs[0] += s;
      }
      break;
    }
    case OpKind::kMatVec: {
      const Tensor &vw = nodes_[n.in[0]].out, &vx = nodes_[n.in[1]].out;
      std::size_t rows = vw.rows(), cols = vw.cols();
      if (wants(n.in[0])) {
        Tensor& gw = grad_buffer(n.in[0]);
        for (std::size_t r = 0; r < rows; ++r) {
          double gr = g[r];
          if (gr == 0.0) continue;
          double* row = gw.data().data() + r * cols;
          for (std::size_t c = 0; c < cols; ++c) row[c] += gr * vx[c];
        }
      }
      if (wants(n.in[1])) {
        Tensor& gx = grad_buffer(n.in[1]);
        for (std::size_t r = 0; r < rows; ++r) {
          double gr = g[r];
          if (gr == 0.0) continue;
          const double* row = vw.data().data() + r * cols;
          for (std::size_t c = 0; c < cols; ++c) gx[c] += gr * row[c];
        }
      }
      break;
    }
    case OpKind::kConcat: {
      std::size_t na = nodes_[n.in[0]].out.size();
      if (wants(n.in[0])) {
        Tensor& ga = grad_buffer(n.in[0]);
        for (std::size_t i = 0; i < na; ++i) ga[i] += g[i];
      }
      if (wants(n.in[1])) {
        Tensor& gb = grad_buffer(n.in[1]);
        for (std::size_t i = na; i < g.size(); ++i) gb[i - na] += g[i];
      }
      break;
    }
    case OpKind::kRelu: {
      const Tensor& vx = nodes_[n.in[0]].out;
      if (wants(n.in[0])) {
        Tensor& gx = grad_buffer(n.in[0]);
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] += vx[i] > 0.0 ? g[i] : 0.0;
      }
      break;
    }
    case OpKind::kSigmoid: {
      if (wants(n.in[0])) {
        Tensor& gx = grad_buffer(n.in[0]);
        for (std::size_t i = 0; i < g.size(); ++i) {
          double y = n.out[i];
          gx[i] += g[i] * y * (1.0 - y);
        }
      }
      break;
    }
    case OpKind::kTanh: {
      if (wants(n.in[0])) {
        Tensor& gx = grad_buffer(n.in[0]);
        for (std::size_t i = 0; i < g.size(); ++i) {
          double y = n.out[i];
          gx[i] += g[i] * (1.0 - y * y);
        }
      }
      break;
    }
    case OpKind::kSoftmax: {
      if (wants(n.in[0])) {
        Tensor& gx = grad_buffer(n.in[0]);
        double s = 0.0;
        for (std::size_t i = 0; i < g.size(); ++i) s += g[i] * n.out[i];
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] += n.out[i] * (g[i] - s);
      }
      break;
    }
    case OpKind::kLog: {
      const Tensor& vx = nodes_[n.in[0]].out;
      if (wants(n.in[0])) {
        Tensor& gx = grad_buffer(n.in[0]);
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] / vx[i];
      }
      break;
    }
    case OpKind::kClamp: {
      const Tensor& vx = nodes_[n.in[0]].out;
      if (wants(n.in[0])) {
        Tensor& gx = grad_buffer(n.in[0]);
        for (std::size_t i = 0; i < g.size(); ++i) {
          if (vx[i] >= n.a && vx[i] <= n.b) gx[i] += g[i];
        }
      }
      break;
    }
    case OpKind::kSum: {
      if (wants(n.in[0])) {
        Tensor& gx = grad_buffer(n.in[0]);
        for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g[0];
      }
      break;
    }
    case OpKind::kPick: {
      if (wants(n.in[0])) grad_buffer(n.in[0])[n.index] += g[0];
      break;
    }
    case OpKind::kDropout: {
      if (wants(n.in[0])) {
        Tensor& gx = grad_buffer(n.in[0]);
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * n.mask[i];
      }
      break;
    }
  }
}

const Tensor& Graph::grad(NodeId id) const {
  if (!grads_valid_) throw StateError("grad: backward has not run on this graph");
  const Node& n = at(id);
  if (!n.requires_grad) {
    throw StateError("grad: node " + std::to_string(id) + " (" + std::string(op_name(n.kind)) +
                     ") does not require gradients");
  }
  Tensor& g = grads_[id];
  if (g.empty()) g = Tensor(n.out.shape());  // not touched by this backward root
  return g;
}

}  // namespace advrec
