#include <stdexcept>

#include "doctest.h"
#include "motionguide/ops.hpp"
#include "motionguide/rng.hpp"
#include "motionguide/tensor.hpp"

using namespace mg;

TEST_CASE("tensor factories and shape accessors") {
  Tensor z = Tensor::zeros({2, 3});
  CHECK(z.rank() == 2);
  CHECK(z.dim(0) == 2);
  CHECK(z.dim(1) == 3);
  CHECK(z.size() == 6);
  CHECK(z.array().abs().maxCoeff() == 0.0);

  Tensor c = Tensor::constant({4}, 2.5);
  CHECK(c.array().minCoeff() == 2.5);
  CHECK(c.array().maxCoeff() == 2.5);

  Tensor s = Tensor::scalar(-1.25);
  CHECK(s.value() == -1.25);
  CHECK(s.size() == 1);

  Tensor f = Tensor::from({2, 2}, {1.0, 2.0, 3.0, 4.0});
  CHECK(f[0] == 1.0);
  CHECK(f[3] == 4.0);
  CHECK_THROWS_AS(Tensor::from({2, 2}, {1.0}), std::invalid_argument);
}

TEST_CASE("copies alias storage, detached() does not") {
  Tensor a = Tensor::from({3}, {1.0, 2.0, 3.0});
  Tensor b = a;
  b.array()[0] = 9.0;
  CHECK(a[0] == 9.0);

  Tensor d = a.detached();
  d.array()[1] = -5.0;
  CHECK(a[1] == 2.0);
  CHECK_FALSE(d.requires_grad());
}

TEST_CASE("randn is deterministic per rng state") {
  Rng r1 = Rng::seeded(42);
  Rng r2 = Rng::seeded(42);
  Tensor a = Tensor::randn({16}, r1);
  Tensor b = Tensor::randn({16}, r2);
  CHECK((a.array() == b.array()).all());
  Tensor c = Tensor::randn({16}, r1);  // stream advanced, must differ
  CHECK((a.array() != c.array()).any());
}

TEST_CASE("gradient accumulation adds, zero and clear behave") {
  Tensor x = Tensor::zeros({2});
  x.set_requires_grad(true);
  CHECK_FALSE(x.has_grad());
  Eigen::ArrayXd g(2);
  g << 1.0, 2.0;
  x.accumulate_grad(g);
  x.accumulate_grad(g);
  CHECK(x.grad_array()[0] == 2.0);
  CHECK(x.grad_array()[1] == 4.0);
  x.zero_grad();
  CHECK(x.has_grad());
  CHECK(x.grad_array().abs().maxCoeff() == 0.0);
  x.clear_grad();
  CHECK_FALSE(x.has_grad());
}

TEST_CASE("backward accumulates when a leaf feeds multiple nodes") {
  Tensor x = Tensor::from({2}, {3.0, -1.0});
  x.set_requires_grad(true);
  Tape tape;
  {
    TapeScope scope(tape);
    // loss = sum(x*x) + sum(2x): d/dx = 2x + 2
    Tensor loss = add(sum(mul(x, x)), sum(scale(x, 2.0)));
    tape.backward(loss);
  }
  CHECK(x.grad_array()[0] == doctest::Approx(8.0));
  CHECK(x.grad_array()[1] == doctest::Approx(0.0));
}

TEST_CASE("no tape means no recording") {
  Tensor x = Tensor::from({2}, {1.0, 2.0});
  x.set_requires_grad(true);
  Tensor y = mul(x, x);  // no active tape
  CHECK(y[1] == 4.0);
  CHECK_FALSE(x.has_grad());
  CHECK(active_tape() == nullptr);
}

TEST_CASE("tape scopes nest and restore") {
  Tape outer, inner;
  CHECK(active_tape() == nullptr);
  {
    TapeScope a(outer);
    CHECK(active_tape() == &outer);
    {
      TapeScope b(inner);
      CHECK(active_tape() == &inner);
    }
    CHECK(active_tape() == &outer);
  }
  CHECK(active_tape() == nullptr);
}

TEST_CASE("backward rejects non-scalar and foreign outputs") {
  Tensor x = Tensor::from({2}, {1.0, 2.0});
  x.set_requires_grad(true);
  Tape tape;
  TapeScope scope(tape);
  Tensor y = mul(x, x);
  CHECK_THROWS(tape.backward(y));  // not scalar
  CHECK_THROWS(tape.backward(Tensor::scalar(1.0)));  // not on tape
}

TEST_CASE("grad_wrt_input leaves parameter grads untouched") {
  Tensor w = Tensor::from({2}, {2.0, 3.0});
  w.set_requires_grad(true);
  Tensor x = Tensor::from({2}, {1.0, -1.0});
  Tensor g = grad_wrt_input([&](const Tensor& in) { return sum(mul(in, w)); }, x);
  CHECK(g[0] == doctest::Approx(2.0));
  CHECK(g[1] == doctest::Approx(3.0));
  CHECK_FALSE(w.has_grad());
}

TEST_CASE("grad_wrt_input of a constant function is zero") {
  Tensor x = Tensor::from({3}, {1.0, 2.0, 3.0});
  Tensor g = grad_wrt_input([](const Tensor&) { return Tensor::scalar(7.0); }, x);
  CHECK(g.size() == 3);
  CHECK(g.array().abs().maxCoeff() == 0.0);
}

TEST_CASE("ops reject non-finite inputs") {
  Tensor bad = Tensor::from({2}, {1.0, std::numeric_limits<double>::quiet_NaN()});
  Tensor ok = Tensor::from({2}, {1.0, 2.0});
  CHECK_THROWS(add(bad, ok));
  CHECK_THROWS(silu(bad));
}

TEST_CASE("numel and shape_str") {
  CHECK(numel({2, 3, 4}) == 24);
  CHECK(numel({}) == 1);
  CHECK(shape_str({2, 3}) == "(2,3)");
}
