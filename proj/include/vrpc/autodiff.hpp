#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace vrpc::ad {

using Shape = std::vector<std::size_t>;

std::string shape_string(const Shape& shape);

// Dense row-major tensor. Ops view any tensor as a matrix whose columns are
// the last dimension and whose rows are everything before it.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  static Tensor scalar(double v) { return Tensor({1, 1}, {v}); }
  static Tensor row(std::vector<double> v) {
    const std::size_t n = v.size();
    return Tensor({1, n}, std::move(v));
  }
  static Tensor zeros_like(const Tensor& t) { return Tensor(t.shape_); }

  const Shape& shape() const { return shape_; }
  std::size_t size() const { return data_.size(); }
  std::size_t rows() const;
  std::size_t cols() const;
  bool empty() const { return data_.empty(); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }
  const std::vector<double>& vector() const { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }
  double& at(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
  double at(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }
  double item() const;

  void fill(double v);
  void reshape(Shape shape);

  bool operator==(const Tensor&) const = default;

 private:
  Shape shape_;
  std::vector<double> data_;
};

class Tape;

// Handle to a recorded node; cheap to copy, valid while its tape lives.
class Var {
 public:
  Var() = default;

  std::size_t id() const { return id_; }
  Tape* tape() const { return tape_; }
  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;
  Tensor m;  // Adam first moment
  Tensor v;  // Adam second moment
};

// Per-parameter gradients produced by one backward pass, aligned with the
// store's parameter order. An empty tensor means "not reached" (zero).
struct Gradients {
  std::vector<Tensor> grads;
};

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Named parameters in insertion order, with gradient accumulators and
// zero-initialized Adam buffers.
class ParamStore {
 public:
  std::size_t add(std::string name, Tensor init);
  std::size_t size() const { return params_.size(); }
  bool contains(std::string_view name) const;
  std::size_t index(std::string_view name) const;

  Parameter& operator[](std::size_t i) { return params_[i]; }
  const Parameter& operator[](std::size_t i) const { return params_[i]; }
  Parameter& at(std::string_view name) { return params_[index(name)]; }
  const Parameter& at(std::string_view name) const { return params_[index(name)]; }

  std::uint64_t step() const { return step_; }

  void zero_grad();
  void accumulate(const Gradients& g, double scale = 1.0);
  double grad_norm() const;
  // Rescales gradients so their global L2 norm is at most max_norm.
  void clip_grad_norm(double max_norm);
  // Bias-corrected Adam update; clears gradients afterwards.
  void adam_step(const AdamConfig& cfg);

  // Checkpoint container: magic "VRPT", u32 version, u32 tensor count, then
  // per tensor: u16 name length, name, u8 rank, u64 dims, f64 values.
  std::vector<std::uint8_t> serialize() const;
  static ParamStore deserialize(std::span<const std::uint8_t> bytes);

  bool same_values(const ParamStore& other) const;

 private:
  std::vector<Parameter> params_;
  std::unordered_map<std::string, std::size_t> lookup_;
  std::uint64_t step_ = 0;
};

inline constexpr std::uint32_t kTensorFormatVersion = 1;

// Read access for backward closures.
class BackwardPass {
 public:
  const Tensor& out_grad() const { return *out_grad_; }
  const Tensor& output() const { return *output_; }
  const Tensor& input(std::size_t i) const;
  // Accumulator for input i, or nullptr when that input needs no gradient.
  Tensor* grad(std::size_t i) const;

 private:
  friend class Tape;
  const Tape* tape_ = nullptr;
  std::span<const std::size_t> inputs_;
  const Tensor* out_grad_ = nullptr;
  const Tensor* output_ = nullptr;
  std::vector<Tensor*> grads_;
};

using BackwardFn = std::function<void(const BackwardPass&)>;

// Define-by-run reverse-mode tape. Nodes are appended in evaluation order,
// so reverse insertion order is a reverse topological order.
class Tape {
 public:
  enum class Mode { kTrain, kInference };

  explicit Tape(Mode mode = Mode::kTrain) : mode_(mode) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  // Parameters are constants in inference mode. All parameters of one tape
  // must come from the same store.
  Var parameter(const ParamStore& store, std::size_t index);
  Var parameter(const ParamStore& store, std::string_view name);

  // Records a custom op. The output needs a gradient if any input does.
  Var record(Tensor value, std::vector<Var> inputs, BackwardFn backward);

  const Tensor& value(Var v) const { return nodes_[v.id()].value; }
  bool requires_grad(Var v) const { return nodes_[v.id()].requires_grad; }
  std::size_t size() const { return nodes_.size(); }
  Mode mode() const { return mode_; }

  // Runs the backward pass from a scalar loss. A tape can be differentiated
  // only once; a second call raises kState.
  Gradients backward(Var loss);
  void backward(Var loss, ParamStore& store);

 private:
  friend class BackwardPass;
  struct Node {
    Tensor value;
    Tensor grad;
    std::vector<std::size_t> inputs;
    BackwardFn backward;
    std::int64_t param = -1;
    bool requires_grad = false;
  };

  void check_owner(Var v, std::string_view op) const;

  Mode mode_;
  std::vector<Node> nodes_;
  const ParamStore* store_ = nullptr;
  bool consumed_ = false;
};

// ---- forward ops -------------------------------------------------------
// Shape mismatches raise kShape naming the op and both shapes.

Var matmul(Var a, Var b);
Var add_bias(Var x, Var bias);           // bias is 1 x cols
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);                   // elementwise
Var scale(Var x, double c);
Var add_scalar(Var x, double c);
Var relu(Var x);
Var softplus(Var x);
Var sigmoid(Var x);
Var log(Var x);
Var exp(Var x);
Var square(Var x);
Var sqrt(Var x);
// Column-wise max over all rows -> 1 x cols; ties go to the lowest row.
Var max_pool_rows(Var x);
// Column-wise max over consecutive blocks of group_size rows.
Var max_pool_groups(Var x, std::size_t group_size);
Var concat_cols(Var a, Var b);
Var concat_rows(std::span<const Var> parts);
Var slice_cols(Var x, std::size_t begin, std::size_t end);
Var slice_rows(Var x, std::size_t begin, std::size_t end);
Var gather_rows(Var x, std::span<const std::size_t> rows);
Var reshape(Var x, Shape shape);
Var reduce_sum(Var x);
Var reduce_mean(Var x);

// Glorot-uniform weights in +-sqrt(6 / (fan_in + fan_out)).
Tensor glorot_uniform(std::size_t fan_in, std::size_t fan_out, std::uint64_t seed);

}  // namespace vrpc::ad
