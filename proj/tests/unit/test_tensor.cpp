#include <doctest.h>

#include <cmath>

#include "checks.hpp"
#include "graphdiff/checkpoint.hpp"
#include "graphdiff/error.hpp"

using namespace graphdiff;

TEST_CASE("every op matches finite differences") {
  for (auto seed : {1u, 2u}) {
    for (const auto &[name, err] : testing::op_grad_errors(seed)) {
      CAPTURE(name);
      CHECK(err < 1e-6);
    }
  }
}

TEST_CASE("composed training loss matches finite differences") {
  CHECK(testing::training_loss_grad_error(CondMode::kAdaLN, 3) < 1e-4);
}

TEST_CASE("forward values") {
  Tape t;
  auto a = t.leaf(Tensor({2, 2}, {1, 2, 3, 4}));
  auto b = t.leaf(Tensor({2, 2}, {5, 6, 7, 8}));
  CHECK(matmul(a, b).value().data == std::vector<double>{19, 22, 43, 50});
  CHECK(transpose(a).value().data == std::vector<double>{1, 3, 2, 4});
  CHECK(sum(a).value().data[0] == 10);
  auto p = softmax_rows(a, {true, false});
  CHECK(p.value().data == std::vector<double>{1, 0, 1, 0});
  auto s = softmax(std::vector<double>{0.0, std::log(3.0)});
  CHECK(s[0] == doctest::Approx(0.25));
  auto ls = log_softmax(std::vector<double>{1000.0, 1000.0});
  CHECK(ls[0] == doctest::Approx(std::log(0.5)));
  auto ce = cross_entropy(a, {1, 0}, {1.0, 1.0});
  double expect = 0.5 * (std::log(std::exp(1) + std::exp(2)) - 2 + std::log(std::exp(3) + std::exp(4)) - 3);
  CHECK(ce.value().data[0] == doctest::Approx(expect));
  auto pp = pair_products(t.leaf(Tensor({2, 1}, {2, 3})));
  CHECK(pp.value().data == std::vector<double>{4, 6, 6, 9});
}

TEST_CASE("errors") {
  Tape t;
  auto a = t.leaf(Tensor({2, 3}, 1.0));
  CHECK_THROWS_AS(matmul(a, a), ShapeError);
  CHECK_THROWS_AS(add(a, t.leaf(Tensor({3, 2}, 1.0))), ShapeError);
  CHECK_THROWS_AS(t.backward(a), NonScalarLoss);
  CHECK_THROWS_AS(scale(a, 1e308 * 10), NumericError);
  CHECK_THROWS_AS(cross_entropy(a, {0, 1}, {0.0, 0.0}), ShapeError);
}

TEST_CASE("order independent sums") {
  Rng rng(4);
  std::vector<double> v;
  for (int k = 0; k < 100; ++k) v.push_back((rng.uniform() - 0.5) * std::pow(10.0, k % 7));
  double base = sorted_sum(v);
  for (int r = 0; r < 20; ++r) {
    rng.shuffle(v.begin(), v.end());
    CHECK(sorted_sum(v) == base);
    auto [mu, sd] = layer_stats(v);
    auto [mu0, sd0] = layer_stats(v);
    CHECK(mu == mu0);
    CHECK(sd == sd0);
  }
}

TEST_CASE("adamw step by hand") {
  ParamStore s;
  s.add("w", Tensor({2}, {1.0, -2.0}));
  OptConfig cfg;
  cfg.lr = 0.1;
  std::map<std::string, Tensor> g = {{"w", Tensor({2}, {0.5, -0.25})}};
  opt_step(s, g, cfg);
  // first step: mhat = g, vhat = g^2 -> update g/(|g| + eps)
  for (int k = 0; k < 2; ++k) {
    double w0 = k == 0 ? 1.0 : -2.0, gk = g["w"].data[k];
    double expect = w0 - 0.1 * (gk / (std::abs(gk) + 1e-8) + 0.01 * w0);
    CHECK(s.get("w").data[k] == doctest::Approx(expect).epsilon(1e-12));
  }
  CHECK(s.step == 1);
  std::vector<double> w1 = s.get("w").data;
  opt_step(s, {}, cfg);
  // zero gradient: momentum still moves, decay shrinks
  CHECK(s.get("w").data != w1);
  CHECK_THROWS_AS(opt_step(s, {{"nope", Tensor({1}, 0.0)}}, cfg), ShapeError);
  CHECK_THROWS_AS(opt_step(s, {{"w", Tensor({3}, 0.0)}}, cfg), ShapeError);
}

TEST_CASE("adamw reduces a quadratic") {
  ParamStore s;
  s.add("x", Tensor({3}, {3.0, -1.0, 2.0}));
  OptConfig cfg;
  cfg.lr = 0.05;
  cfg.weight_decay = 0.0;
  for (int k = 0; k < 400; ++k) {
    Tape t;
    Var x = t.param(s, "x");
    t.backward(sum(mul(x, x)));
    opt_step(s, t.param_grads(), cfg);
  }
  for (double v : s.get("x").data) CHECK(std::abs(v) < 0.05);
}

TEST_CASE("checkpoint round trip") {
  ParamStore s;
  Rng rng(2);
  s.add("a", uniform_tensor({3, 4}, 1.0, rng));
  s.add("b", uniform_tensor({5}, 1.0, rng));
  OptConfig cfg;
  Tape t;
  t.backward(sum(mul(t.param(s, "a"), t.param(s, "a"))));
  opt_step(s, t.param_grads(), cfg);
  auto dir = std::filesystem::temp_directory_path() / "graphdiff_ckpt_test";
  std::filesystem::create_directories(dir);
  save_checkpoint(dir / "c.json", s, {{"k", 1}});
  auto back = load_checkpoint(dir / "c.json");
  CHECK(back.params == s);
  CHECK(back.meta["k"] == 1);
  save_checkpoint(dir / "f.json", s, {}, DType::kF32);
  auto f32 = load_checkpoint(dir / "f.json");
  CHECK(f32.params.get("a").data[0] == doctest::Approx(s.get("a").data[0]).epsilon(1e-6));
  CHECK_THROWS_AS(load_checkpoint(dir / "missing.json"), IoError);
  std::filesystem::remove_all(dir);
}
