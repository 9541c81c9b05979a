#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "motionguide/rng.hpp"

namespace mg {

using Shape = std::vector<long>;

long numel(const Shape& s);
std::string shape_str(const Shape& s);

struct TensorData {
  Shape shape;
  Eigen::ArrayXd values;  // flat, row-major
  bool requires_grad = false;
  std::optional<Eigen::ArrayXd> grad;
};

// Value-semantic handle over shared storage. Copies alias; detached() deep-copies.
// Values recorded on a live tape must not be mutated until the tape is dropped:
// backward rules read the saved inputs by reference.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor constant(Shape shape, double value);
  static Tensor scalar(double value);
  static Tensor from(Shape shape, Eigen::ArrayXd values);
  static Tensor from(Shape shape, std::initializer_list<double> values);
  static Tensor from(Shape shape, const std::vector<double>& values);
  static Tensor randn(Shape shape, Rng& rng, double stddev = 1.0);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const { return impl_->shape; }
  int rank() const { return static_cast<int>(impl_->shape.size()); }
  long dim(int i) const { return impl_->shape[static_cast<std::size_t>(i)]; }
  long size() const { return impl_->values.size(); }

  double value() const;            // scalar tensors only
  double operator[](long i) const { return impl_->values[i]; }

  Eigen::ArrayXd& array() { return impl_->values; }
  const Eigen::ArrayXd& array() const { return impl_->values; }

  bool requires_grad() const { return impl_->requires_grad; }
  Tensor& set_requires_grad(bool v) {
    impl_->requires_grad = v;
    return *this;
  }

  bool has_grad() const { return impl_->grad.has_value(); }
  const Eigen::ArrayXd& grad_array() const;
  void accumulate_grad(const Eigen::ArrayXd& g);
  void zero_grad();   // resets a present gradient to zero
  void clear_grad();  // drops the gradient entirely

  Tensor detached() const;  // deep copy, requires_grad off, no grad

  const std::shared_ptr<TensorData>& impl() const { return impl_; }
  TensorData* raw() const { return impl_.get(); }

 private:
  explicit Tensor(std::shared_ptr<TensorData> impl) : impl_(std::move(impl)) {}
  std::shared_ptr<TensorData> impl_;
};

// Dynamic tape: operations append nodes during the forward pass; backward
// replays them in reverse, accumulating adjoints. Gradients land on the
// .grad of requires_grad leaves (tensors not produced by any node on the tape).
class Tape {
 public:
  using PullFn =
      std::function<void(const Eigen::ArrayXd& out_adj, const std::vector<Eigen::ArrayXd*>& in_adj)>;

  struct Node {
    std::vector<std::shared_ptr<TensorData>> inputs;
    std::shared_ptr<TensorData> output;
    PullFn pull;
    const char* op;
  };

  void record(Node node) { nodes_.push_back(std::move(node)); }
  std::size_t size() const { return nodes_.size(); }
  bool empty() const { return nodes_.empty(); }
  void clear() { nodes_.clear(); }

  // Seeds d(output)/d(output) = 1 and accumulates into leaf .grad (+=).
  // Throws if output is not a scalar produced on this tape.
  void backward(const Tensor& output);

  // Adjoint of `wrt` for the same seed, without touching any .grad.
  // A scalar output the tape never produced yields zeros (constant function).
  Eigen::ArrayXd input_gradient(const Tensor& output, const Tensor& wrt);

 private:
  std::unordered_map<const TensorData*, Eigen::ArrayXd> run(const TensorData* out);
  std::vector<Node> nodes_;
};

// RAII activation; nests by saving the previously active tape.
class TapeScope {
 public:
  explicit TapeScope(Tape& tape);
  ~TapeScope();
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape* previous_;
};

Tape* active_tape();

// Convenience: gradient of a scalar-valued function at x, on a private tape.
// f(x) constant w.r.t. x gives zeros. Parameter gradients are never touched.
Tensor grad_wrt_input(const std::function<Tensor(const Tensor&)>& f, const Tensor& x);

}  // namespace mg
