#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace tpdr {

using Shape = std::vector<int64_t>;

int64_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

class Tensor;

// Backward hook of a recorded op. Receives the op's output (forward values and
// accumulated gradient) and is responsible for accumulating into the inputs it
// captured at construction time.
using BackwardFn = std::function<void(const Tensor& out)>;

struct TensorImpl {
  Shape shape;
  std::vector<double> data;
  bool requires_grad = false;
  std::vector<double> grad;  // empty until first accumulation
  BackwardFn backward;       // set only on recorded op outputs
  std::string op = "leaf";
  bool in_sweep = false;  // touched by the backward sweep currently running
};

// Dense f64 tensor with shared-handle semantics: copying a Tensor aliases the
// same storage, like the framework tensors this engine stands in for.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape);
  static Tensor full(Shape shape, double value);
  static Tensor from_data(Shape shape, std::vector<double> data);
  static Tensor scalar(double value);
  // Leaf with requires_grad set, i.e. a learnable parameter.
  static Tensor param(Shape shape, std::vector<double> data);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const;
  int ndim() const;
  int64_t dim(int i) const;
  int64_t numel() const;

  double* data();
  const double* data() const;
  double item() const;

  bool requires_grad() const;
  Tensor& set_requires_grad(bool value);

  bool has_grad() const;
  const std::vector<double>& grad() const;  // throws if absent
  // Gradient accumulator: allocates a zero-filled buffer on first use.
  // Handle-const: mutates the shared impl, mirroring data()/grad sharing.
  std::vector<double>& grad_accum() const;
  void zero_grad() const;

  const std::string& op_name() const;

  bool same_impl(const Tensor& other) const { return impl_ == other.impl_; }

 private:
  std::shared_ptr<TensorImpl> impl_;

  // Shared-handle semantics: a const Tensor is a const handle to shared
  // mutable storage, so impl access is const-qualified.
  TensorImpl& impl() const;

  friend Tensor make_op(const char* name, const std::vector<Tensor>& inputs, Shape out_shape,
                        std::vector<double> out_data, BackwardFn fn);
  friend void backward(const Tensor& loss);
};

// --- autograd mode -------------------------------------------------------

bool grad_enabled();

class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_;
};

// --- graph (define-by-run tape) ------------------------------------------

// Records `out` on the tape when grad mode is on and any input requires grad;
// otherwise returns a plain value tensor. All ops, including module-defined
// ones (plane sampling, volume compositing), go through here.
Tensor make_op(const char* name, const std::vector<Tensor>& inputs, Shape out_shape,
               std::vector<double> out_data, BackwardFn fn);

// Reverse sweep in exact reverse execution order, then clears the tape.
// The loss must be a scalar and the tape nonempty.
void backward(const Tensor& loss);

size_t graph_size();
void clear_graph();

// --- finite differences --------------------------------------------------

struct FdReport {
  double max_rel_err = 0.0;
  int64_t entries_checked = 0;
  std::string worst_param;
  int64_t worst_index = -1;
};

// Central-difference check of d f / d params against the analytic gradients
// from one backward pass. `f` must be deterministic and rebuild its graph on
// every call. Relative error is |analytic - fd| / max(1, |fd|).
FdReport finite_difference_check(const std::function<Tensor()>& f,
                                 const std::vector<std::pair<std::string, Tensor>>& params,
                                 double h);

}  // namespace tpdr
