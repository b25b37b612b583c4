#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <set>

#include "doctest.h"
#include "helpers.hpp"
#include "mir/ops.hpp"
#include "mir/tensor.hpp"

using namespace mir;
using mir::testing::max_abs_diff;
using mir::testing::random_tensor;

TEST_CASE("constructors produce the documented shapes and values") {
  TensorF z = TensorF::zeros({2, 3});
  CHECK(z.ndim() == 2);
  CHECK(z.dim(0) == 2);
  CHECK(z.dim(1) == 3);
  CHECK(z.size() == 6);
  for (i64 i = 0; i < z.size(); ++i) CHECK(z.data()[i] == 0.0f);

  TensorF f = TensorF::full({4}, 2.5f);
  for (i64 i = 0; i < 4; ++i) CHECK(f.data()[i] == 2.5f);

  TensorF v = TensorF::from({2, 2}, {1.0f, 2.0f, 3.0f, 4.0f});
  CHECK(v.data()[3] == 4.0f);

  TensorF s = TensorF::scalar(7.0f);
  CHECK(s.item() == 7.0f);
  CHECK_THROWS_AS((void)v.item(), ShapeError);
}

TEST_CASE("default-constructed handles report undefined") {
  TensorF t;
  CHECK_FALSE(t.defined());
  CHECK(TensorF::zeros({1}).defined());
}

TEST_CASE("copies alias storage while clone_data detaches it") {
  TensorF a = TensorF::from({2}, {1.0f, 2.0f});
  TensorF alias = a;
  alias.data()[0] = 9.0f;
  CHECK(a.data()[0] == 9.0f);

  TensorF deep = a.clone_data();
  deep.data()[0] = -1.0f;
  CHECK(a.data()[0] == 9.0f);
  CHECK_FALSE(deep.requires_grad());
}

TEST_CASE("gradient buffers are lazy, accumulate, and reset on zero_grad") {
  TensorF a = TensorF::zeros({3});
  CHECK(a.grad_if() == nullptr);
  float g[3] = {1.0f, 2.0f, 3.0f};
  a.add_grad(g, 3);
  a.add_grad(g, 3);
  REQUIRE(a.grad_if() != nullptr);
  CHECK((*a.grad_if())[2] == 6.0f);
  a.zero_grad();
  CHECK((*a.grad_if())[2] == 0.0f);
}

TEST_CASE("ops record only while a tape scope is active") {
  TensorD x = TensorD::from({2}, {1.0, 2.0}, true);
  TensorD untaped = ops::mul(x, x);
  CHECK(untaped.data()[0] == 1.0);
  CHECK(untaped.data()[1] == 4.0);

  Tape<double> tape;
  {
    TapeScope<double> scope(tape);
    (void)ops::mul(x, x);
  }
  CHECK(tape.size() > 0);
  std::size_t recorded = tape.size();
  (void)ops::mul(x, x);  // scope ended; nothing new records
  CHECK(tape.size() == recorded);
}

TEST_CASE("backward of sum of squares gives 2x") {
  TensorD x = TensorD::from({2}, {1.0, 2.0}, true);
  Tape<double> tape;
  TapeScope<double> scope(tape);
  TensorD y = ops::sum(ops::mul(x, x));
  tape.backward(y);
  CHECK(x.grad()[0] == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(x.grad()[1] == doctest::Approx(4.0).epsilon(1e-12));
}

TEST_CASE("backward of sum(a*b) exchanges the operands") {
  TensorD a = TensorD::from({3}, {1.0, -2.0, 0.5}, true);
  TensorD b = TensorD::from({3}, {4.0, 0.25, -3.0}, true);
  Tape<double> tape;
  TapeScope<double> scope(tape);
  tape.backward(ops::sum(ops::mul(a, b)));
  for (i64 i = 0; i < 3; ++i) {
    CHECK(a.grad()[i] == b.data()[i]);
    CHECK(b.grad()[i] == a.data()[i]);
  }
}

TEST_CASE("leaf gradients accumulate across backward passes") {
  TensorD x = TensorD::from({1}, {3.0}, true);
  Tape<double> tape;
  TapeScope<double> scope(tape);
  TensorD y = ops::mul(x, x);
  tape.backward(y);
  double once = x.grad()[0];
  tape.backward(y);
  CHECK(x.grad()[0] == doctest::Approx(2.0 * once).epsilon(1e-15));
}

TEST_CASE("backward distributes over sums of scalars") {
  TensorD x = random_tensor<double>({5}, 11);
  x.set_requires_grad(true);

  Tape<double> t1;
  std::vector<double> separate(5, 0.0);
  {
    TapeScope<double> scope(t1);
    t1.backward(ops::sum(ops::mul(x, x)));
    for (int i = 0; i < 5; ++i) separate[i] = x.grad()[i];
    x.zero_grad();
    t1.clear();
    TensorD r2 = ops::sum(ops::exp(x));
    t1.backward(r2);
    for (int i = 0; i < 5; ++i) separate[i] += x.grad()[i];
    x.zero_grad();
  }

  Tape<double> t2;
  {
    TapeScope<double> scope(t2);
    TensorD joint = ops::add(ops::sum(ops::mul(x, x)), ops::sum(ops::exp(x)));
    t2.backward(joint);
  }
  for (int i = 0; i < 5; ++i) {
    CHECK(x.grad()[i] == doctest::Approx(separate[i]).epsilon(1e-12));
  }
}

TEST_CASE("backward rejects non-scalar roots") {
  TensorD x = TensorD::from({2}, {1.0, 2.0}, true);
  Tape<double> tape;
  TapeScope<double> scope(tape);
  TensorD y = ops::mul(x, x);
  CHECK_THROWS_AS(tape.backward(y), ShapeError);
}

TEST_CASE("counter rng replays identically per key and diverges across keys") {
  CounterRng a(StreamKey{1, 2, 3, 4});
  CounterRng b(StreamKey{1, 2, 3, 4});
  for (int i = 0; i < 16; ++i) CHECK(a.next_u64() == b.next_u64());

  CounterRng c(StreamKey{1, 2, 3, 5});
  CounterRng d(StreamKey{1, 2, 3, 4});
  bool differs = false;
  for (int i = 0; i < 4; ++i) differs = differs || (c.next_u64() != d.next_u64());
  CHECK(differs);
}

TEST_CASE("uniform and below stay inside their ranges") {
  CounterRng rng(StreamKey{42, 0, 0, 0});
  for (int i = 0; i < 1000; ++i) {
    double u = rng.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    double v = rng.uniform(-2.0, 3.0);
    CHECK(v >= -2.0);
    CHECK(v < 3.0);
    i64 k = rng.below(7);
    CHECK(k >= 0);
    CHECK(k < 7);
  }
}

TEST_CASE("below covers every residue") {
  CounterRng rng(StreamKey{9, 9, 9, 9});
  std::set<i64> seen;
  for (int i = 0; i < 200; ++i) seen.insert(rng.below(4));
  CHECK(seen.size() == 4);
}

TEST_CASE("normal draws have unit-ish moments") {
  CounterRng rng(StreamKey{7, 0, 0, 0});
  const int n = 20000;
  double sum = 0.0, sum_sq = 0.0;
  for (int i = 0; i < n; ++i) {
    double x = rng.normal();
    sum += x;
    sum_sq += x * x;
  }
  double mean = sum / n;
  double var = sum_sq / n - mean * mean;
  CHECK(std::abs(mean) < 0.05);
  CHECK(std::abs(var - 1.0) < 0.1);

  CHECK(rng.normal(10.0, 0.0) == 10.0);
}

TEST_CASE("fnv1a matches the published test vectors") {
  CHECK(fnv1a("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(fnv1a("foobar") == 0x85944171f73967e8ULL);
}

TEST_CASE("mix_key separates the key fields") {
  CHECK(mix_key(StreamKey{1, 2, 0, 0}) != mix_key(StreamKey{2, 1, 0, 0}));
  CHECK(mix_key(StreamKey{0, 0, 1, 0}) != mix_key(StreamKey{0, 0, 0, 1}));
}
