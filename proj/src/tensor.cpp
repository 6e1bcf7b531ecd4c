#include "tensor.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace tpdr {

namespace {
thread_local bool g_grad_enabled = true;
thread_local std::vector<Tensor> g_tape;

// While a backward sweep runs, each tensor's pre-existing gradient is parked
// here and the live buffer restarts from zero. The sweep total is added back
// onto the parked values at the end. This keeps accumulation exact: a repeat
// of the same pass contributes a bit-identical total, and x + x is exact, so
// two unzeroed passes double the gradient precisely.
struct SweepState {
  bool active = false;
  std::vector<std::pair<TensorImpl*, std::vector<double>>> parked;
};
thread_local SweepState g_sweep;
}  // namespace

int64_t shape_numel(const Shape& shape) {
  int64_t n = 1;
  for (int64_t d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

TensorImpl& Tensor::impl() const {
  if (!impl_) throw std::runtime_error("tensor: use of undefined tensor");
  return *impl_;
}

Tensor Tensor::zeros(Shape shape) {
  return from_data(shape, std::vector<double>(static_cast<size_t>(shape_numel(shape)), 0.0));
}

Tensor Tensor::full(Shape shape, double value) {
  return from_data(shape, std::vector<double>(static_cast<size_t>(shape_numel(shape)), value));
}

Tensor Tensor::from_data(Shape shape, std::vector<double> data) {
  for (int64_t d : shape) {
    if (d <= 0) throw std::invalid_argument("tensor: nonpositive dimension in " + shape_str(shape));
  }
  if (shape_numel(shape) != static_cast<int64_t>(data.size())) {
    throw std::invalid_argument("tensor: shape " + shape_str(shape) + " does not match data length " +
                                std::to_string(data.size()));
  }
  Tensor t;
  t.impl_ = std::make_shared<TensorImpl>();
  t.impl_->shape = std::move(shape);
  t.impl_->data = std::move(data);
  return t;
}

Tensor Tensor::scalar(double value) { return from_data({1}, {value}); }

Tensor Tensor::param(Shape shape, std::vector<double> data) {
  Tensor t = from_data(std::move(shape), std::move(data));
  t.set_requires_grad(true);
  return t;
}

const Shape& Tensor::shape() const { return impl().shape; }
int Tensor::ndim() const { return static_cast<int>(impl().shape.size()); }

int64_t Tensor::dim(int i) const {
  const Shape& s = impl().shape;
  if (i < 0 || i >= static_cast<int>(s.size())) throw std::out_of_range("tensor: dim index out of range");
  return s[static_cast<size_t>(i)];
}

int64_t Tensor::numel() const { return static_cast<int64_t>(impl().data.size()); }

double* Tensor::data() { return impl().data.data(); }
const double* Tensor::data() const { return impl().data.data(); }

double Tensor::item() const {
  if (numel() != 1) throw std::runtime_error("tensor: item() on non-scalar of shape " + shape_str(shape()));
  return impl().data[0];
}

bool Tensor::requires_grad() const { return impl().requires_grad; }

Tensor& Tensor::set_requires_grad(bool value) {
  impl().requires_grad = value;
  return *this;
}

bool Tensor::has_grad() const { return !impl().grad.empty(); }

const std::vector<double>& Tensor::grad() const {
  if (!has_grad()) throw std::runtime_error("tensor: gradient absent (op=" + impl().op + ")");
  return impl().grad;
}

std::vector<double>& Tensor::grad_accum() const {
  TensorImpl& im = impl();
  if (g_sweep.active && !im.in_sweep) {
    im.in_sweep = true;
    g_sweep.parked.emplace_back(&im, std::move(im.grad));
    im.grad.clear();
  }
  if (im.grad.empty()) im.grad.assign(im.data.size(), 0.0);
  return im.grad;
}

void Tensor::zero_grad() const { impl().grad.clear(); }

const std::string& Tensor::op_name() const { return impl().op; }

// --- autograd mode -------------------------------------------------------

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : prev_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = prev_; }

Tensor make_op(const char* name, const std::vector<Tensor>& inputs, Shape out_shape,
               std::vector<double> out_data, BackwardFn fn) {
  Tensor out = Tensor::from_data(std::move(out_shape), std::move(out_data));
  out.impl_->op = name;
  if (!g_grad_enabled) return out;
  bool needs_grad = false;
  for (const Tensor& in : inputs) {
    if (in.defined() && in.requires_grad()) {
      needs_grad = true;
      break;
    }
  }
  if (!needs_grad) return out;
  out.impl_->requires_grad = true;
  out.impl_->backward = std::move(fn);
  g_tape.push_back(out);
  return out;
}

void backward(const Tensor& loss) {
  if (!loss.defined()) throw std::invalid_argument("backward: undefined loss");
  if (loss.numel() != 1) {
    throw std::invalid_argument("backward: loss must be scalar, got shape " + shape_str(loss.shape()));
  }
  if (g_tape.empty()) throw std::runtime_error("backward: graph is empty");

  g_sweep.active = true;
  g_sweep.parked.clear();
  try {
    loss.grad_accum()[0] += 1.0;
    for (auto it = g_tape.rbegin(); it != g_tape.rend(); ++it) {
      Tensor& node = *it;
      if (!node.has_grad()) continue;  // not reachable from the loss
      if (node.impl_->backward) node.impl_->backward(node);
    }
  } catch (...) {
    for (auto& [im, old] : g_sweep.parked) im->in_sweep = false;
    g_sweep.parked.clear();
    g_sweep.active = false;
    clear_graph();
    throw;
  }
  for (auto& [im, old] : g_sweep.parked) {
    im->in_sweep = false;
    for (size_t i = 0; i < old.size(); ++i) im->grad[i] += old[i];
  }
  g_sweep.parked.clear();
  g_sweep.active = false;
  clear_graph();
}

size_t graph_size() { return g_tape.size(); }
void clear_graph() { g_tape.clear(); }

// --- finite differences --------------------------------------------------

FdReport finite_difference_check(const std::function<Tensor()>& f,
                                 const std::vector<std::pair<std::string, Tensor>>& params,
                                 double h) {
  if (h <= 0.0) throw std::invalid_argument("finite_difference_check: h must be positive");

  for (const auto& [name, p] : params) {
    p.zero_grad();
  }
  clear_graph();
  Tensor loss = f();
  if (!std::isfinite(loss.item())) throw std::runtime_error("finite_difference_check: non-finite loss");
  backward(loss);

  std::vector<std::vector<double>> analytic;
  analytic.reserve(params.size());
  for (const auto& [name, p] : params) {
    if (!p.has_grad()) {
      analytic.emplace_back(static_cast<size_t>(p.numel()), 0.0);
    } else {
      analytic.push_back(p.grad());
    }
  }

  FdReport report;
  NoGradGuard no_grad;
  for (size_t pi = 0; pi < params.size(); ++pi) {
    const std::string& pname = params[pi].first;
    Tensor p = params[pi].second;
    double* values = p.data();
    for (int64_t i = 0; i < p.numel(); ++i) {
      const double saved = values[i];
      values[i] = saved + h;
      const double f_plus = f().item();
      values[i] = saved - h;
      const double f_minus = f().item();
      values[i] = saved;
      if (!std::isfinite(f_plus) || !std::isfinite(f_minus)) {
        throw std::runtime_error("finite_difference_check: non-finite output at parameter " + pname +
                                 "[" + std::to_string(i) + "]");
      }
      const double fd = (f_plus - f_minus) / (2.0 * h);
      const double rel = std::abs(analytic[pi][static_cast<size_t>(i)] - fd) / std::max(1.0, std::abs(fd));
      ++report.entries_checked;
      if (rel > report.max_rel_err) {
        report.max_rel_err = rel;
        report.worst_param = pname;
        report.worst_index = i;
      }
    }
  }
  return report;
}

}  // namespace tpdr
