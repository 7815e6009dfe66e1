#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <numbers>

#include "abfr/checkpoint.hpp"
#include "abfr/errors.hpp"
#include "abfr/optim.hpp"
#include "abfr/tensor.hpp"
#include "gradcheck.hpp"

using namespace abfr;
using abfr::testing::gradcheck;
using abfr::testing::random_tensor;

namespace {

constexpr double kGradTol = 1e-4;

bool all_finite(const Tensor& t) {
  for (double v : t.data())
    if (!std::isfinite(v)) return false;
  return true;
}

}  // namespace

TEST_CASE("matmul examples") {
  const auto a = Tensor::matrix({{1, 2}, {3, 4}});
  const auto ones = Tensor::matrix({{1}, {1}});
  const auto y = matmul(a, ones);
  CHECK(y.shape() == Shape{2, 1});
  CHECK(y.at(0, 0) == 3.0);
  CHECK(y.at(1, 0) == 7.0);

  const auto id = Tensor::matrix({{1, 0}, {0, 1}});
  const auto same = matmul(id, a);
  for (std::size_t i = 0; i < 4; ++i) CHECK(same.at(i) == a.at(i));

  const auto z = matmul(Tensor::zeros({3, 2}), a);
  for (double v : z.data()) CHECK(v == 0.0);
}

TEST_CASE("matmul shape mismatch names both shapes") {
  const auto a = Tensor::zeros({2, 3});
  const auto b = Tensor::zeros({2, 3});
  try {
    matmul(a, b);
    FAIL("expected DimensionError");
  } catch (const DimensionError& e) {
    const std::string msg = e.what();
    CHECK(msg.find(shape_string({2, 3})) != std::string::npos);
  }
}

TEST_CASE("softmax examples and row sums") {
  const auto s0 = softmax(Tensor::matrix({{0, 0}}), 1);
  CHECK(s0.at(0) == doctest::Approx(0.5));
  CHECK(s0.at(1) == doctest::Approx(0.5));

  const auto big = softmax(Tensor::matrix({{1000, 0}}), 1);
  CHECK(all_finite(big));
  CHECK(big.at(0) == doctest::Approx(1.0));
  CHECK(big.at(1) < 1e-300);

  const auto q = softmax(Tensor::matrix({{0.0, std::log(3.0)}}), 1);
  CHECK(std::abs(q.at(0) - 0.25) < 1e-15);
  CHECK(std::abs(q.at(1) - 0.75) < 1e-15);

  Rng rng(5);
  const auto x = random_tensor({6, 7}, rng, 30.0, false);
  const auto rows = softmax(x, 1);
  for (std::size_t r = 0; r < 6; ++r) {
    double s = 0;
    for (std::size_t c = 0; c < 7; ++c) s += rows.at(r, c);
    CHECK(std::abs(s - 1.0) <= 1e-12);
  }
  const auto cols = softmax(x, 0);
  for (std::size_t c = 0; c < 7; ++c) {
    double s = 0;
    for (std::size_t r = 0; r < 6; ++r) s += cols.at(r, c);
    CHECK(std::abs(s - 1.0) <= 1e-12);
  }
  CHECK_THROWS_AS(softmax(x, 2), ValidationError);
}

TEST_CASE("layer_norm examples") {
  const auto g = Tensor::full({4}, 1.0), b = Tensor::zeros({4});
  const auto flat = layer_norm(Tensor::matrix({{3, 3, 3, 3}}), g, b);
  for (double v : flat.data()) CHECK(v == 0.0);

  const auto two = layer_norm(Tensor::matrix({{1, 3}}), Tensor::full({2}, 1.0), Tensor::zeros({2}));
  // (x - 2) / sqrt(1 + eps)
  CHECK(std::abs(two.at(0) + 1.0) < 1e-5);
  CHECK(std::abs(two.at(1) - 1.0) < 1e-5);

  const auto biased = layer_norm(Tensor::matrix({{1, 5, -2, 7}}), Tensor::zeros({4}), Tensor::full({4}, 0.25));
  for (double v : biased.data()) CHECK(v == 0.25);
}

TEST_CASE("layer_norm standardizes every row") {
  Rng rng(11);
  const auto x = random_tensor({5, 8}, rng, 4.0, false);
  // eps = 0 isolates the standardization; the default eps shifts the
  // variance by about eps / var, far above 1e-10.
  const auto y = layer_norm(x, Tensor::full({8}, 1.0), Tensor::zeros({8}), 0.0);
  for (std::size_t r = 0; r < 5; ++r) {
    double m = 0, v = 0;
    for (std::size_t c = 0; c < 8; ++c) m += y.at(r, c);
    m /= 8;
    for (std::size_t c = 0; c < 8; ++c) v += (y.at(r, c) - m) * (y.at(r, c) - m);
    v /= 8;
    CHECK(std::abs(m) < 1e-10);
    CHECK(std::abs(v - 1.0) < 1e-10);
  }
}

TEST_CASE("activations") {
  const auto zero = Tensor::matrix({{0.0}}, true);
  CHECK(silu(zero).item() == 0.0);
  const auto t = tanh(zero);
  CHECK(t.item() == 0.0);
  backward(sum(t));
  CHECK(zero.grad()[0] == doctest::Approx(1.0));

  const double expected = 0.5 * (1.0 + std::erf(1.0 / std::numbers::sqrt2));
  CHECK(std::abs(gelu(Tensor::matrix({{1.0}})).item() - expected) < 1e-15);
  const auto one = Tensor::matrix({{1.0}}, true);
  CHECK(gradcheck([&] { return gelu(one); }, {one}) < kGradTol);
}

TEST_CASE("cross_entropy examples") {
  const int zero[] = {0}, one[] = {1};
  CHECK(std::abs(cross_entropy(Tensor::matrix({{0, 0}}), zero).item() - std::log(2.0)) < 1e-15);
  CHECK(std::abs(cross_entropy(Tensor::matrix({{0, 0}}), one).item() - std::log(2.0)) < 1e-15);
  CHECK(cross_entropy(Tensor::matrix({{20, -20}}), zero).item() < 1e-15);
  const double lse = std::log(std::exp(1.0) + std::exp(2.0));
  CHECK(std::abs(cross_entropy(Tensor::matrix({{1, 2}}), zero).item() - (lse - 1.0)) < 1e-14);

  const int bad[] = {2};
  CHECK_THROWS_AS(cross_entropy(Tensor::matrix({{1, 2}}), bad), ValidationError);
  const int negative[] = {-1};
  CHECK_THROWS_AS(cross_entropy(Tensor::matrix({{1, 2}}), negative), ValidationError);

  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const auto logits = random_tensor({4, 2}, rng, 10.0, false);
    const int labels[] = {0, 1, 1, 0};
    CHECK(cross_entropy(logits, labels).item() >= 0.0);
  }
}

TEST_CASE("backward semantics") {
  Rng rng(1);
  const auto x = random_tensor({3, 4}, rng);
  backward(sum(x));
  for (double g : x.grad()) CHECK(g == 1.0);

  const auto v = Tensor::matrix({{1, 2}}, true);
  backward(sum(mul(v, v)));
  CHECK(v.grad()[0] == 4.0 / 2.0);
  CHECK(v.grad()[1] == 4.0);

  SUBCASE("disconnected parameter keeps a zero gradient") {
    const auto used = Tensor::matrix({{1, 2}}, true);
    const auto unused = Tensor::matrix({{5, 6}}, true);
    backward(sum(used));
    for (double g : unused.grad()) CHECK(g == 0.0);
  }
  SUBCASE("repeated calls accumulate") {
    const auto w = Tensor::matrix({{1, 2}}, true);
    const auto loss = sum(mul(w, w));
    backward(loss);
    backward(loss);
    CHECK(w.grad()[0] == 4.0);
    CHECK(w.grad()[1] == 8.0);
  }
  SUBCASE("zeroing between runs gives identical gradients") {
    const auto a = random_tensor({3, 3}, rng);
    const auto b = random_tensor({3, 2}, rng);
    auto f = [&] { return sum(tanh(matmul(a, b))); };
    backward(f());
    const std::vector<double> first(a.grad().begin(), a.grad().end());
    a.zero_grad();
    b.zero_grad();
    backward(f());
    const std::vector<double> second(a.grad().begin(), a.grad().end());
    CHECK(first == second);
  }
  CHECK_THROWS_AS(backward(x), ValidationError);
}

TEST_CASE("gradient checks for every differentiable operation") {
  Rng rng(2024);
  const auto a = random_tensor({3, 4}, rng);
  const auto b = random_tensor({3, 4}, rng);
  const auto m = random_tensor({4, 5}, rng);
  const auto bias = random_tensor({1, 4}, rng);
  const auto gain = random_tensor({4}, rng);
  const auto shift = random_tensor({4}, rng);
  const auto logits = random_tensor({5, 2}, rng, 3.0);
  const int labels[] = {0, 1, 1, 0, 1};

  CHECK(gradcheck([&] { return add(a, b); }, {a, b}) < kGradTol);
  CHECK(gradcheck([&] { return sub(a, b); }, {a, b}) < kGradTol);
  CHECK(gradcheck([&] { return mul(a, b); }, {a, b}) < kGradTol);
  CHECK(gradcheck([&] { return scale(a, -1.7); }, {a}) < kGradTol);
  CHECK(gradcheck([&] { return add_bias(a, bias); }, {a, bias}) < kGradTol);
  CHECK(gradcheck([&] { return matmul(a, m); }, {a, m}) < kGradTol);
  CHECK(gradcheck([&] { return transpose(a); }, {a}) < kGradTol);
  CHECK(gradcheck([&] { return sum(a); }, {a}) < kGradTol);
  CHECK(gradcheck([&] { return mean(a); }, {a}) < kGradTol);
  CHECK(gradcheck([&] { return silu(a); }, {a}) < kGradTol);
  CHECK(gradcheck([&] { return tanh(a); }, {a}) < kGradTol);
  CHECK(gradcheck([&] { return gelu(a); }, {a}) < kGradTol);
  CHECK(gradcheck([&] { return softmax(a, 1); }, {a}) < kGradTol);
  CHECK(gradcheck([&] { return softmax(a, 0); }, {a}) < kGradTol);
  CHECK(gradcheck([&] { return layer_norm(a, gain, shift); }, {a, gain, shift}) < kGradTol);
  CHECK(gradcheck([&] { return slice_rows(a, 1, 2); }, {a}) < kGradTol);
  CHECK(gradcheck([&] { return slice_cols(a, 1, 2); }, {a}) < kGradTol);
  CHECK(gradcheck([&] {
          const Tensor parts[] = {a, b};
          return concat_rows(parts);
        },
                  {a, b}) < kGradTol);
  CHECK(gradcheck([&] {
          const Tensor parts[] = {a};
          return concat_cols(parts);
        },
                  {a}) < kGradTol);
  CHECK(gradcheck([&] {
          const Tensor parts[] = {a, b};
          return concat_cols(parts);
        },
                  {a, b}) < kGradTol);
  CHECK(gradcheck([&] { return cross_entropy(logits, labels); }, {logits}) < kGradTol);
  // a composite that reuses a tensor along several paths
  CHECK(gradcheck([&] { return mul(tanh(matmul(a, m)), silu(matmul(b, m))); }, {a, b, m}) < kGradTol);
}

TEST_CASE("forward and backward stay finite on finite inputs") {
  Rng rng(8);
  const auto x = random_tensor({4, 6}, rng, 50.0);
  const auto g = random_tensor({6}, rng);
  const auto b = random_tensor({6}, rng);
  const auto y = softmax(layer_norm(gelu(x), g, b), 1);
  CHECK(all_finite(y));
  backward(sum(y));
  for (double v : x.grad()) CHECK(std::isfinite(v));
}

TEST_CASE("adam_step") {
  SUBCASE("zero gradient leaves parameters unchanged") {
    const auto p = Tensor::matrix({{0.5, -1.0}}, true);
    const Tensor params[] = {p};
    auto state = AdamState::for_params(params);
    adam_step(params, state);
    CHECK(p.at(0) == 0.5);
    CHECK(p.at(1) == -1.0);
    CHECK(state.step_count == 1);
  }
  SUBCASE("first step moves by lr against the gradient sign") {
    const auto p = Tensor::matrix({{0.0, 0.0}}, true);
    const Tensor params[] = {p};
    auto state = AdamState::for_params(params, 0.01);
    p.mutable_grad()[0] = 3.0;
    p.mutable_grad()[1] = -0.2;
    adam_step(params, state);
    CHECK(std::abs(p.at(0) + 0.01) < 1e-8);
    CHECK(std::abs(p.at(1) - 0.01) < 1e-8);
  }
  SUBCASE("two steps follow the scalar recurrence") {
    const double lr = 0.0009, b1 = 0.9, b2 = 0.999, eps = 1e-8;
    const double grads[] = {0.3, -0.7};
    double theta = 1.0, m = 0.0, v = 0.0;
    for (int t = 1; t <= 2; ++t) {
      const double g = grads[t - 1];
      m = b1 * m + (1 - b1) * g;
      v = b2 * v + (1 - b2) * g * g;
      const double mh = m / (1 - std::pow(b1, t)), vh = v / (1 - std::pow(b2, t));
      theta -= lr * mh / (std::sqrt(vh) + eps);
    }
    const auto p = Tensor::matrix({{1.0}}, true);
    const Tensor params[] = {p};
    auto state = AdamState::for_params(params);
    for (double g : grads) {
      p.zero_grad();
      p.mutable_grad()[0] = g;
      adam_step(params, state);
    }
    CHECK(std::abs(p.item() - theta) < 1e-15);
    CHECK(state.step_count == 2);
  }
  SUBCASE("mismatched state is rejected") {
    const auto p = Tensor::matrix({{1.0, 2.0}}, true);
    const auto q = Tensor::matrix({{1.0}}, true);
    const Tensor one[] = {p};
    const Tensor other[] = {q};
    auto state = AdamState::for_params(one);
    CHECK_THROWS_AS(adam_step(other, state), ValidationError);
    const Tensor two[] = {p, q};
    CHECK_THROWS_AS(adam_step(two, state), ValidationError);
  }
}

TEST_CASE("checkpoint round trip is bit exact") {
  Rng rng(4);
  const std::vector<NamedTensor> params{{"w", random_tensor({3, 2}, rng)}, {"b", random_tensor({1, 2}, rng)}};
  const auto dir = std::filesystem::temp_directory_path() / "abfr_test_ckpt";
  std::filesystem::create_directories(dir);
  const auto path = dir / "model.json";
  save_checkpoint(path, params, {{"note", "x"}});

  const std::vector<NamedTensor> fresh{{"w", Tensor::zeros({3, 2}, true)}, {"b", Tensor::zeros({1, 2}, true)}};
  load_checkpoint(path, fresh);
  for (std::size_t i = 0; i < params.size(); ++i)
    for (std::size_t j = 0; j < params[i].tensor.numel(); ++j) CHECK(fresh[i].tensor.at(j) == params[i].tensor.at(j));

  nlohmann::json meta;
  const auto read = read_checkpoint(path, &meta);
  CHECK(meta.at("note") == "x");
  CHECK(read.size() == 2);

  const std::vector<NamedTensor> wrong{{"w", Tensor::zeros({2, 3}, true)}, {"b", Tensor::zeros({1, 2}, true)}};
  CHECK_THROWS(load_checkpoint(path, wrong));
  std::filesystem::remove_all(dir);
}
