#include "vrpc/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>

#include "vrpc/bytes.hpp"
#include "vrpc/error.hpp"
#include "vrpc/random.hpp"

namespace vrpc::ad {

namespace {

std::size_t product(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

[[noreturn]] void shape_error(std::string_view op, const Shape& a, const Shape& b) {
  throw Error(ErrorCode::kShape, std::string(op) + ": incompatible shapes " + shape_string(a) +
                                     " and " + shape_string(b));
}

[[noreturn]] void shape_error(std::string_view op, const Shape& a, const std::string& why) {
  throw Error(ErrorCode::kShape, std::string(op) + ": shape " + shape_string(a) + " " + why);
}

Tape& tape_of(Var v, std::string_view op) {
  if (!v.valid()) throw Error(ErrorCode::kState, std::string(op) + ": invalid variable");
  return *v.tape();
}

// Elementwise unary op helper: f computes the value, df the derivative given
// (input, output).
template <class F, class DF>
Var unary(Var x, F f, DF df) {
  Tape& tape = tape_of(x, "unary");
  const Tensor& in = x.value();
  Tensor out(in.shape());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = f(in[i]);
  return tape.record(std::move(out), {x}, [df](const BackwardPass& bp) {
    Tensor* g = bp.grad(0);
    const Tensor& in = bp.input(0);
    const Tensor& out = bp.output();
    const Tensor& og = bp.out_grad();
    for (std::size_t i = 0; i < og.size(); ++i) (*g)[i] += og[i] * df(in[i], out[i]);
  });
}

double stable_softplus(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

std::string shape_string(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

// ---- Tensor ------------------------------------------------------------

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)), data_(product(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
  if (data_.size() != product(shape_)) {
    throw Error(ErrorCode::kShape, "Tensor: " + std::to_string(data_.size()) +
                                       " values for shape " + shape_string(shape_));
  }
}

std::size_t Tensor::rows() const {
  if (shape_.empty()) return 1;
  return data_.size() / std::max<std::size_t>(shape_.back(), 1);
}

std::size_t Tensor::cols() const { return shape_.empty() ? 1 : shape_.back(); }

double Tensor::item() const {
  if (data_.size() != 1) throw Error(ErrorCode::kShape, "item() on tensor of shape " + shape_string(shape_));
  return data_[0];
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

void Tensor::reshape(Shape shape) {
  if (product(shape) != data_.size()) shape_error("reshape", shape_, shape);
  shape_ = std::move(shape);
}

const Tensor& Var::value() const { return tape_->value(*this); }

// ---- ParamStore --------------------------------------------------------

std::size_t ParamStore::add(std::string name, Tensor init) {
  if (lookup_.count(name)) throw Error(ErrorCode::kConfig, "duplicate parameter '" + name + "'");
  Parameter p;
  p.name = name;
  p.grad = Tensor::zeros_like(init);
  p.m = Tensor::zeros_like(init);
  p.v = Tensor::zeros_like(init);
  p.value = std::move(init);
  lookup_.emplace(std::move(name), params_.size());
  params_.push_back(std::move(p));
  return params_.size() - 1;
}

bool ParamStore::contains(std::string_view name) const { return lookup_.count(std::string(name)) > 0; }

std::size_t ParamStore::index(std::string_view name) const {
  const auto it = lookup_.find(std::string(name));
  if (it == lookup_.end()) throw Error(ErrorCode::kConfig, "unknown parameter '" + std::string(name) + "'");
  return it->second;
}

void ParamStore::zero_grad() {
  for (auto& p : params_) p.grad.fill(0.0);
}

void ParamStore::accumulate(const Gradients& g, double scale) {
  if (g.grads.size() > params_.size()) throw Error(ErrorCode::kShape, "gradient set larger than store");
  for (std::size_t i = 0; i < g.grads.size(); ++i) {
    const Tensor& src = g.grads[i];
    if (src.empty()) continue;
    Tensor& dst = params_[i].grad;
    if (src.size() != dst.size()) shape_error("accumulate", dst.shape(), src.shape());
    for (std::size_t j = 0; j < src.size(); ++j) dst[j] += scale * src[j];
  }
}

double ParamStore::grad_norm() const {
  double sq = 0.0;
  for (const auto& p : params_) {
    for (const double g : p.grad.values()) sq += g * g;
  }
  return std::sqrt(sq);
}

void ParamStore::clip_grad_norm(double max_norm) {
  const double norm = grad_norm();
  if (norm <= max_norm || norm == 0.0) return;
  const double factor = max_norm / norm;
  for (auto& p : params_) {
    for (double& g : p.grad.values()) g *= factor;
  }
}

void ParamStore::adam_step(const AdamConfig& cfg) {
  ++step_;
  const double t = static_cast<double>(step_);
  const double bc1 = 1.0 - std::pow(cfg.beta1, t);
  const double bc2 = 1.0 - std::pow(cfg.beta2, t);
  for (auto& p : params_) {
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double g = p.grad[i];
      p.m[i] = cfg.beta1 * p.m[i] + (1.0 - cfg.beta1) * g;
      p.v[i] = cfg.beta2 * p.v[i] + (1.0 - cfg.beta2) * g * g;
      const double m_hat = p.m[i] / bc1;
      const double v_hat = p.v[i] / bc2;
      p.value[i] -= cfg.lr * m_hat / (std::sqrt(v_hat) + cfg.eps);
    }
    p.grad.fill(0.0);
  }
}

std::vector<std::uint8_t> ParamStore::serialize() const {
  ByteWriter w;
  w.raw(std::string_view("VRPT"));
  w.u32(kTensorFormatVersion);
  w.u32(static_cast<std::uint32_t>(params_.size()));
  for (const auto& p : params_) {
    w.u16(static_cast<std::uint16_t>(p.name.size()));
    w.raw(std::string_view(p.name));
    w.u8(static_cast<std::uint8_t>(p.value.shape().size()));
    for (const auto d : p.value.shape()) w.u64(d);
    for (const double v : p.value.values()) w.f64(v);
  }
  return w.take();
}

ParamStore ParamStore::deserialize(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  if (r.str(4) != "VRPT") throw Error(ErrorCode::kCorrupt, "tensor container: bad magic");
  const std::uint32_t version = r.u32();
  if (version != kTensorFormatVersion) {
    throw Error(ErrorCode::kCorrupt, "tensor container: unsupported version " + std::to_string(version));
  }
  const std::uint32_t count = r.u32();
  ParamStore store;
  for (std::uint32_t t = 0; t < count; ++t) {
    const std::string name = r.str(r.u16());
    const std::uint8_t rank = r.u8();
    Shape shape(rank);
    std::size_t total = 1;
    for (auto& d : shape) {
      d = r.u64();
      if (d > (std::size_t{1} << 32)) throw Error(ErrorCode::kCorrupt, "tensor container: absurd dimension");
      total *= d;
    }
    if (total * 8 > r.remaining()) throw Error(ErrorCode::kCorrupt, "tensor container: truncated values");
    std::vector<double> values(total);
    for (auto& v : values) v = r.f64();
    store.add(name, Tensor(std::move(shape), std::move(values)));
  }
  if (r.remaining() != 0) throw Error(ErrorCode::kCorrupt, "tensor container: trailing bytes");
  return store;
}

bool ParamStore::same_values(const ParamStore& other) const {
  if (params_.size() != other.params_.size()) return false;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (params_[i].name != other.params_[i].name || params_[i].value != other.params_[i].value) return false;
  }
  return true;
}

// ---- Tape --------------------------------------------------------------

const Tensor& BackwardPass::input(std::size_t i) const { return tape_->nodes_[inputs_[i]].value; }

Tensor* BackwardPass::grad(std::size_t i) const { return grads_[i]; }

Var Tape::constant(Tensor value) {
  Node node;
  node.value = std::move(value);
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Tape::parameter(const ParamStore& store, std::size_t index) {
  if (mode_ == Mode::kInference) return constant(store[index].value);
  if (store_ && store_ != &store) throw Error(ErrorCode::kState, "tape mixes parameter stores");
  store_ = &store;
  Node node;
  node.value = store[index].value;
  node.param = static_cast<std::int64_t>(index);
  node.requires_grad = true;
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Tape::parameter(const ParamStore& store, std::string_view name) {
  return parameter(store, store.index(name));
}

void Tape::check_owner(Var v, std::string_view op) const {
  if (v.tape() != this || v.id() >= nodes_.size()) {
    throw Error(ErrorCode::kState, std::string(op) + ": variable belongs to another tape");
  }
}

Var Tape::record(Tensor value, std::vector<Var> inputs, BackwardFn backward) {
  if (consumed_) throw Error(ErrorCode::kState, "tape already differentiated; record a new forward pass");
  Node node;
  node.value = std::move(value);
  node.inputs.reserve(inputs.size());
  for (const Var& v : inputs) {
    check_owner(v, "record");
    node.inputs.push_back(v.id());
    node.requires_grad = node.requires_grad || nodes_[v.id()].requires_grad;
  }
  if (node.requires_grad) node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Gradients Tape::backward(Var loss) {
  check_owner(loss, "backward");
  if (consumed_) throw Error(ErrorCode::kState, "backward called twice on the same tape");
  const Tensor& lv = nodes_[loss.id()].value;
  if (lv.size() != 1) throw Error(ErrorCode::kShape, "backward: loss must be scalar, got " + shape_string(lv.shape()));
  consumed_ = true;

  Gradients out;
  if (store_) out.grads.resize(store_->size());
  if (!nodes_[loss.id()].requires_grad) return out;

  nodes_[loss.id()].grad = Tensor(lv.shape(), 1.0);
  BackwardPass bp;
  bp.tape_ = this;
  for (std::size_t id = loss.id() + 1; id-- > 0;) {
    Node& node = nodes_[id];
    if (node.grad.empty()) continue;
    if (node.param >= 0) {
      Tensor& dst = out.grads[static_cast<std::size_t>(node.param)];
      if (dst.empty()) {
        dst = std::move(node.grad);
      } else {
        for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += node.grad[i];
      }
      continue;
    }
    if (!node.backward) continue;
    bp.inputs_ = node.inputs;
    bp.out_grad_ = &node.grad;
    bp.output_ = &node.value;
    bp.grads_.assign(node.inputs.size(), nullptr);
    for (std::size_t i = 0; i < node.inputs.size(); ++i) {
      Node& in = nodes_[node.inputs[i]];
      if (!in.requires_grad) continue;
      if (in.grad.empty()) in.grad = Tensor::zeros_like(in.value);
      bp.grads_[i] = &in.grad;
    }
    node.backward(bp);
    node.grad = Tensor();
  }
  return out;
}

void Tape::backward(Var loss, ParamStore& store) {
  if (store_ && store_ != &store) throw Error(ErrorCode::kState, "backward: tape parameters come from another store");
  store.accumulate(backward(loss));
}

// ---- ops ---------------------------------------------------------------

Var matmul(Var a, Var b) {
  Tape& tape = tape_of(a, "matmul");
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  if (A.cols() != B.rows() || B.shape().size() != 2) shape_error("matmul", A.shape(), B.shape());
  const std::size_t R = A.rows(), K = A.cols(), C = B.cols();
  Tensor out({R, C});
  for (std::size_t i = 0; i < R; ++i) {
    double* orow = out.data() + i * C;
    for (std::size_t p = 0; p < K; ++p) {
      const double av = A[i * K + p];
      if (av == 0.0) continue;
      const double* brow = B.data() + p * C;
      for (std::size_t j = 0; j < C; ++j) orow[j] += av * brow[j];
    }
  }
  return tape.record(std::move(out), {a, b}, [R, K, C](const BackwardPass& bp) {
    const Tensor& A = bp.input(0);
    const Tensor& B = bp.input(1);
    const Tensor& G = bp.out_grad();
    if (Tensor* gA = bp.grad(0)) {
      for (std::size_t i = 0; i < R; ++i) {
        const double* grow = G.data() + i * C;
        for (std::size_t p = 0; p < K; ++p) {
          const double* brow = B.data() + p * C;
          double acc = 0.0;
          for (std::size_t j = 0; j < C; ++j) acc += grow[j] * brow[j];
          (*gA)[i * K + p] += acc;
        }
      }
    }
    if (Tensor* gB = bp.grad(1)) {
      for (std::size_t i = 0; i < R; ++i) {
        const double* grow = G.data() + i * C;
        for (std::size_t p = 0; p < K; ++p) {
          const double av = A[i * K + p];
          if (av == 0.0) continue;
          double* gbrow = gB->data() + p * C;
          for (std::size_t j = 0; j < C; ++j) gbrow[j] += av * grow[j];
        }
      }
    }
  });
}

Var add_bias(Var x, Var bias) {
  Tape& tape = tape_of(x, "add_bias");
  const Tensor& X = x.value();
  const Tensor& B = bias.value();
  if (B.size() != X.cols()) shape_error("add_bias", X.shape(), B.shape());
  Tensor out = X;
  const std::size_t C = X.cols();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += B[i % C];
  return tape.record(std::move(out), {x, bias}, [C](const BackwardPass& bp) {
    const Tensor& G = bp.out_grad();
    if (Tensor* gx = bp.grad(0)) {
      for (std::size_t i = 0; i < G.size(); ++i) (*gx)[i] += G[i];
    }
    if (Tensor* gb = bp.grad(1)) {
      for (std::size_t i = 0; i < G.size(); ++i) (*gb)[i % C] += G[i];
    }
  });
}

namespace {

enum class BinaryKind { kAdd, kSub, kMul };

Var binary_same_shape(std::string_view op, BinaryKind kind, Var a, Var b) {
  Tape& tape = tape_of(a, op);
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  if (A.shape() != B.shape()) shape_error(op, A.shape(), B.shape());
  Tensor out(A.shape());
  for (std::size_t i = 0; i < A.size(); ++i) {
    out[i] = kind == BinaryKind::kAdd ? A[i] + B[i] : kind == BinaryKind::kSub ? A[i] - B[i] : A[i] * B[i];
  }
  return tape.record(std::move(out), {a, b}, [kind](const BackwardPass& bp) {
    const Tensor& G = bp.out_grad();
    Tensor* ga = bp.grad(0);
    Tensor* gb = bp.grad(1);
    if (kind == BinaryKind::kMul) {
      const Tensor& A = bp.input(0);
      const Tensor& B = bp.input(1);
      if (ga) for (std::size_t i = 0; i < G.size(); ++i) (*ga)[i] += G[i] * B[i];
      if (gb) for (std::size_t i = 0; i < G.size(); ++i) (*gb)[i] += G[i] * A[i];
      return;
    }
    const double sign = kind == BinaryKind::kSub ? -1.0 : 1.0;
    if (ga) for (std::size_t i = 0; i < G.size(); ++i) (*ga)[i] += G[i];
    if (gb) for (std::size_t i = 0; i < G.size(); ++i) (*gb)[i] += sign * G[i];
  });
}

}  // namespace

Var add(Var a, Var b) { return binary_same_shape("add", BinaryKind::kAdd, a, b); }
Var sub(Var a, Var b) { return binary_same_shape("sub", BinaryKind::kSub, a, b); }
Var mul(Var a, Var b) { return binary_same_shape("mul", BinaryKind::kMul, a, b); }

Var scale(Var x, double c) {
  return unary(x, [c](double v) { return c * v; }, [c](double, double) { return c; });
}

Var add_scalar(Var x, double c) {
  return unary(x, [c](double v) { return v + c; }, [](double, double) { return 1.0; });
}

Var relu(Var x) {
  return unary(x, [](double v) { return v > 0.0 ? v : 0.0; },
               [](double in, double) { return in > 0.0 ? 1.0 : 0.0; });
}

Var softplus(Var x) {
  return unary(x, stable_softplus, [](double in, double) { return stable_sigmoid(in); });
}

Var sigmoid(Var x) {
  return unary(x, stable_sigmoid, [](double, double out) { return out * (1.0 - out); });
}

Var log(Var x) {
  return unary(x, [](double v) { return std::log(v); }, [](double in, double) { return 1.0 / in; });
}

Var exp(Var x) {
  return unary(x, [](double v) { return std::exp(v); }, [](double, double out) { return out; });
}

Var square(Var x) {
  return unary(x, [](double v) { return v * v; }, [](double in, double) { return 2.0 * in; });
}

Var sqrt(Var x) {
  return unary(x, [](double v) { return std::sqrt(v); },
               [](double, double out) { return out > 0.0 ? 0.5 / out : 0.0; });
}

Var max_pool_groups(Var x, std::size_t group_size) {
  Tape& tape = tape_of(x, "max_pool");
  const Tensor& X = x.value();
  const std::size_t R = X.rows(), C = X.cols();
  if (group_size == 0 || R == 0 || R % group_size != 0) {
    shape_error("max_pool", X.shape(), "cannot be split into groups of " + std::to_string(group_size));
  }
  const std::size_t G = R / group_size;
  Tensor out({G, C});
  std::vector<std::uint32_t> argmax(G * C);
  for (std::size_t g = 0; g < G; ++g) {
    const std::size_t base = g * group_size;
    for (std::size_t c = 0; c < C; ++c) {
      std::size_t best = base;
      double best_v = X[base * C + c];
      for (std::size_t r = base + 1; r < base + group_size; ++r) {
        const double v = X[r * C + c];
        if (v > best_v) {
          best_v = v;
          best = r;
        }
      }
      out[g * C + c] = best_v;
      argmax[g * C + c] = static_cast<std::uint32_t>(best);
    }
  }
  return tape.record(std::move(out), {x}, [argmax = std::move(argmax), C](const BackwardPass& bp) {
    Tensor* gx = bp.grad(0);
    const Tensor& G = bp.out_grad();
    for (std::size_t i = 0; i < G.size(); ++i) (*gx)[argmax[i] * C + i % C] += G[i];
  });
}

Var max_pool_rows(Var x) { return max_pool_groups(x, x.value().rows()); }

Var concat_cols(Var a, Var b) {
  Tape& tape = tape_of(a, "concat_cols");
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  if (A.rows() != B.rows()) shape_error("concat_cols", A.shape(), B.shape());
  const std::size_t R = A.rows(), CA = A.cols(), CB = B.cols();
  Tensor out({R, CA + CB});
  for (std::size_t i = 0; i < R; ++i) {
    std::copy_n(A.data() + i * CA, CA, out.data() + i * (CA + CB));
    std::copy_n(B.data() + i * CB, CB, out.data() + i * (CA + CB) + CA);
  }
  return tape.record(std::move(out), {a, b}, [R, CA, CB](const BackwardPass& bp) {
    const Tensor& G = bp.out_grad();
    Tensor* ga = bp.grad(0);
    Tensor* gb = bp.grad(1);
    for (std::size_t i = 0; i < R; ++i) {
      const double* grow = G.data() + i * (CA + CB);
      if (ga) for (std::size_t j = 0; j < CA; ++j) (*ga)[i * CA + j] += grow[j];
      if (gb) for (std::size_t j = 0; j < CB; ++j) (*gb)[i * CB + j] += grow[CA + j];
    }
  });
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw Error(ErrorCode::kShape, "concat_rows: no inputs");
  Tape& tape = tape_of(parts[0], "concat_rows");
  const std::size_t C = parts[0].value().cols();
  std::size_t R = 0;
  for (const Var& p : parts) {
    if (p.value().cols() != C) shape_error("concat_rows", parts[0].shape(), p.shape());
    R += p.value().rows();
  }
  Tensor out({R, C});
  std::vector<std::size_t> offsets;
  std::size_t pos = 0;
  for (const Var& p : parts) {
    offsets.push_back(pos);
    std::copy_n(p.value().data(), p.value().size(), out.data() + pos);
    pos += p.value().size();
  }
  return tape.record(std::move(out), std::vector<Var>(parts.begin(), parts.end()),
                     [offsets = std::move(offsets)](const BackwardPass& bp) {
                       const Tensor& G = bp.out_grad();
                       for (std::size_t k = 0; k < offsets.size(); ++k) {
                         Tensor* g = bp.grad(k);
                         if (!g) continue;
                         for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += G[offsets[k] + i];
                       }
                     });
}

Var slice_cols(Var x, std::size_t begin, std::size_t end) {
  Tape& tape = tape_of(x, "slice_cols");
  const Tensor& X = x.value();
  if (begin > end || end > X.cols()) {
    shape_error("slice_cols", X.shape(), "has no column range [" + std::to_string(begin) + ", " +
                                             std::to_string(end) + ")");
  }
  const std::size_t R = X.rows(), C = X.cols(), W = end - begin;
  Tensor out({R, W});
  for (std::size_t i = 0; i < R; ++i) std::copy_n(X.data() + i * C + begin, W, out.data() + i * W);
  return tape.record(std::move(out), {x}, [R, C, W, begin](const BackwardPass& bp) {
    Tensor* g = bp.grad(0);
    const Tensor& G = bp.out_grad();
    for (std::size_t i = 0; i < R; ++i) {
      for (std::size_t j = 0; j < W; ++j) (*g)[i * C + begin + j] += G[i * W + j];
    }
  });
}

Var slice_rows(Var x, std::size_t begin, std::size_t end) {
  Tape& tape = tape_of(x, "slice_rows");
  const Tensor& X = x.value();
  if (begin > end || end > X.rows()) {
    shape_error("slice_rows", X.shape(), "has no row range [" + std::to_string(begin) + ", " +
                                             std::to_string(end) + ")");
  }
  const std::size_t C = X.cols();
  Tensor out({end - begin, C});
  std::copy_n(X.data() + begin * C, (end - begin) * C, out.data());
  return tape.record(std::move(out), {x}, [C, begin](const BackwardPass& bp) {
    Tensor* g = bp.grad(0);
    const Tensor& G = bp.out_grad();
    for (std::size_t i = 0; i < G.size(); ++i) (*g)[begin * C + i] += G[i];
  });
}

Var gather_rows(Var x, std::span<const std::size_t> rows) {
  Tape& tape = tape_of(x, "gather_rows");
  const Tensor& X = x.value();
  const std::size_t C = X.cols();
  Tensor out({rows.size(), C});
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= X.rows()) {
      shape_error("gather_rows", X.shape(), "has no row " + std::to_string(rows[i]));
    }
    std::copy_n(X.data() + rows[i] * C, C, out.data() + i * C);
  }
  return tape.record(std::move(out), {x},
                     [idx = std::vector<std::size_t>(rows.begin(), rows.end()), C](const BackwardPass& bp) {
                       Tensor* g = bp.grad(0);
                       const Tensor& G = bp.out_grad();
                       for (std::size_t i = 0; i < idx.size(); ++i) {
                         for (std::size_t j = 0; j < C; ++j) (*g)[idx[i] * C + j] += G[i * C + j];
                       }
                     });
}

Var reshape(Var x, Shape shape) {
  Tape& tape = tape_of(x, "reshape");
  Tensor out = x.value();
  out.reshape(std::move(shape));
  return tape.record(std::move(out), {x}, [](const BackwardPass& bp) {
    Tensor* g = bp.grad(0);
    const Tensor& G = bp.out_grad();
    for (std::size_t i = 0; i < G.size(); ++i) (*g)[i] += G[i];
  });
}

Var reduce_sum(Var x) {
  Tape& tape = tape_of(x, "reduce_sum");
  double s = 0.0;
  for (const double v : x.value().values()) s += v;
  return tape.record(Tensor::scalar(s), {x}, [](const BackwardPass& bp) {
    Tensor* g = bp.grad(0);
    const double og = bp.out_grad()[0];
    for (double& v : g->values()) v += og;
  });
}

Var reduce_mean(Var x) {
  const std::size_t n = x.value().size();
  if (n == 0) throw Error(ErrorCode::kShape, "reduce_mean: empty tensor");
  return scale(reduce_sum(x), 1.0 / static_cast<double>(n));
}

Tensor glorot_uniform(std::size_t fan_in, std::size_t fan_out, std::uint64_t seed) {
  Rng rng(seed);
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Tensor w({fan_in, fan_out});
  for (double& v : w.values()) v = rng.uniform(-limit, limit);
  return w;
}

}  // namespace vrpc::ad
