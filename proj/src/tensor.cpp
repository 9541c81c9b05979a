#include "motionguide/tensor.hpp"

#include <sstream>
#include <stdexcept>
#include <unordered_set>

namespace mg {

long numel(const Shape& s) {
  long n = 1;
  for (long d : s) n *= d;
  return n;
}

std::string shape_str(const Shape& s) {
  std::ostringstream out;
  out << "(";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out << ",";
    out << s[i];
  }
  out << ")";
  return out.str();
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  auto data = std::make_shared<TensorData>();
  data->values = Eigen::ArrayXd::Zero(numel(shape));
  data->shape = std::move(shape);
  data->requires_grad = requires_grad;
  return Tensor(std::move(data));
}

Tensor Tensor::constant(Shape shape, double value) {
  auto data = std::make_shared<TensorData>();
  data->values = Eigen::ArrayXd::Constant(numel(shape), value);
  data->shape = std::move(shape);
  return Tensor(std::move(data));
}

Tensor Tensor::scalar(double value) { return constant({1}, value); }

Tensor Tensor::from(Shape shape, Eigen::ArrayXd values) {
  if (values.size() != numel(shape))
    throw std::invalid_argument("Tensor::from: " + std::to_string(values.size()) +
                                " values for shape " + shape_str(shape));
  auto data = std::make_shared<TensorData>();
  data->shape = std::move(shape);
  data->values = std::move(values);
  return Tensor(std::move(data));
}

Tensor Tensor::from(Shape shape, std::initializer_list<double> values) {
  Eigen::ArrayXd v(static_cast<long>(values.size()));
  long i = 0;
  for (double x : values) v[i++] = x;
  return from(std::move(shape), std::move(v));
}

Tensor Tensor::from(Shape shape, const std::vector<double>& values) {
  Eigen::ArrayXd v(static_cast<long>(values.size()));
  for (std::size_t i = 0; i < values.size(); ++i) v[static_cast<long>(i)] = values[i];
  return from(std::move(shape), std::move(v));
}

Tensor Tensor::randn(Shape shape, Rng& rng, double stddev) {
  Tensor t = zeros(std::move(shape));
  for (long i = 0; i < t.size(); ++i) t.array()[i] = stddev * rng.normal();
  return t;
}

double Tensor::value() const {
  if (size() != 1)
    throw std::invalid_argument("Tensor::value: tensor " + shape_str(shape()) + " is not scalar");
  return impl_->values[0];
}

const Eigen::ArrayXd& Tensor::grad_array() const {
  if (!impl_->grad) throw std::logic_error("Tensor::grad_array: no gradient present");
  return *impl_->grad;
}

void Tensor::accumulate_grad(const Eigen::ArrayXd& g) {
  if (!impl_->grad)
    impl_->grad = g;
  else
    *impl_->grad += g;
}

void Tensor::zero_grad() {
  if (impl_->grad) impl_->grad->setZero();
}

void Tensor::clear_grad() { impl_->grad.reset(); }

Tensor Tensor::detached() const {
  auto data = std::make_shared<TensorData>();
  data->shape = impl_->shape;
  data->values = impl_->values;
  return Tensor(std::move(data));
}

namespace {
thread_local Tape* g_active_tape = nullptr;
}  // namespace

Tape* active_tape() { return g_active_tape; }

TapeScope::TapeScope(Tape& tape) : previous_(g_active_tape) { g_active_tape = &tape; }
TapeScope::~TapeScope() { g_active_tape = previous_; }

std::unordered_map<const TensorData*, Eigen::ArrayXd> Tape::run(const TensorData* out) {
  std::unordered_set<const TensorData*> produced;
  produced.reserve(nodes_.size());
  for (const Node& n : nodes_) produced.insert(n.output.get());

  std::unordered_map<const TensorData*, Eigen::ArrayXd> adjoint;
  adjoint.emplace(out, Eigen::ArrayXd::Ones(out->values.size()));

  std::vector<Eigen::ArrayXd*> in_adj;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    auto found = adjoint.find(it->output.get());
    if (found == adjoint.end()) continue;  // not on the path to `out`
    const Eigen::ArrayXd& out_adj = found->second;

    in_adj.clear();
    for (const auto& input : it->inputs) {
      TensorData* d = input.get();
      // Adjoints are only materialized where they can flow further:
      // requires_grad leaves and tape-produced intermediates.
      if (d->requires_grad || produced.count(d)) {
        auto [slot, fresh] = adjoint.try_emplace(d);
        if (fresh) slot->second = Eigen::ArrayXd::Zero(d->values.size());
        in_adj.push_back(&slot->second);
      } else {
        in_adj.push_back(nullptr);
      }
    }
    it->pull(out_adj, in_adj);
  }
  return adjoint;
}

void Tape::backward(const Tensor& output) {
  if (output.size() != 1)
    throw std::invalid_argument("Tape::backward: output " + shape_str(output.shape()) +
                                " is not scalar");
  const TensorData* out = output.raw();
  bool on_tape = false;
  for (const Node& n : nodes_)
    if (n.output.get() == out) {
      on_tape = true;
      break;
    }
  if (!on_tape) throw std::invalid_argument("Tape::backward: output was not produced on this tape");

  auto adjoint = run(out);

  std::unordered_set<const TensorData*> produced;
  for (const Node& n : nodes_) produced.insert(n.output.get());
  for (const Node& n : nodes_) {
    for (const auto& input : n.inputs) {
      TensorData* d = input.get();
      if (!d->requires_grad || produced.count(d)) continue;
      auto found = adjoint.find(d);
      if (found == adjoint.end()) continue;
      if (!d->grad)
        d->grad = found->second;
      else
        *d->grad += found->second;
      adjoint.erase(found);  // leaves shared by several nodes accumulate once
    }
  }
}

Eigen::ArrayXd Tape::input_gradient(const Tensor& output, const Tensor& wrt) {
  if (output.size() != 1)
    throw std::invalid_argument("Tape::input_gradient: output " + shape_str(output.shape()) +
                                " is not scalar");
  const TensorData* out = output.raw();
  bool on_tape = false;
  for (const Node& n : nodes_)
    if (n.output.get() == out) {
      on_tape = true;
      break;
    }
  if (!on_tape) return Eigen::ArrayXd::Zero(wrt.size());  // constant w.r.t. everything recorded

  auto adjoint = run(out);
  auto found = adjoint.find(wrt.raw());
  if (found == adjoint.end()) return Eigen::ArrayXd::Zero(wrt.size());
  return found->second;
}

Tensor grad_wrt_input(const std::function<Tensor(const Tensor&)>& f, const Tensor& x) {
  Tensor xi = x.detached();
  xi.set_requires_grad(true);
  Tape tape;
  Tensor y;
  {
    TapeScope scope(tape);
    y = f(xi);
  }
  if (!y.defined() || y.size() != 1)
    throw std::invalid_argument("grad_wrt_input: function did not produce a scalar");
  return Tensor::from(x.shape(), tape.input_gradient(y, xi));
}

}  // namespace mg
