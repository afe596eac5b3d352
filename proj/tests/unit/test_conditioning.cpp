#include <doctest.h>

#include <cmath>

#include "graphdiff/conditioning.hpp"
#include "graphdiff/error.hpp"

using namespace graphdiff;

namespace {

std::vector<ConditionSpec> specs_for(NumericEncoder enc) {
  ConditionSpec num;
  num.name = "x";
  num.lo = 0.0;
  num.hi = 4.0;
  num.encoder = enc;
  num.n_interval = 4;
  ConditionSpec cat;
  cat.name = "k";
  cat.kind = ConditionKind::kCategorical;
  cat.cardinality = 3;
  cat.labels = {"a", "b", "c"};
  return {num, cat};
}

std::vector<double> row(const ParamStore &s, const std::string &name, int r) {
  const Tensor &t = s.get(name);
  std::vector<double> out;
  for (int c = 0; c < t.cols(); ++c) out.push_back(t.at(r, c));
  return out;
}

}  // namespace

TEST_CASE("timestep encoding") {
  auto e = encode_timestep(7, 8);
  for (int k = 0; k < 4; ++k) {
    double f = std::pow(10000.0, -2.0 * k / 8);
    CHECK(e[k] == doctest::Approx(std::sin(7 * f)));
    CHECK(e[4 + k] == doctest::Approx(std::cos(7 * f)));
  }
  CHECK(encode_timestep(3, 8) != encode_timestep(4, 8));
  CHECK_THROWS_AS(encode_timestep(1, 7), RangeError);
}

TEST_CASE("interval buckets") {
  CHECK(interval_index(0.0, 4) == 0);
  CHECK(interval_index(0.249, 4) == 0);
  CHECK(interval_index(0.25, 4) == 1);
  CHECK(interval_index(1.0, 4) == 3);
  CHECK(interval_index(-3.0, 4) == 0);
  CHECK(interval_index(7.0, 4) == 3);
}

TEST_CASE("condition embeddings") {
  for (auto enc : {NumericEncoder::kCluster, NumericEncoder::kDirect, NumericEncoder::kInterval}) {
    CAPTURE(to_string(enc));
    auto specs = specs_for(enc);
    ParamStore store;
    Rng rng(1);
    init_condition_params(store, specs, 6, 5, rng);
    Tape t;
    auto null_num = encode_condition(t, store, specs[0], std::nullopt);
    CHECK(null_num.rows() == 1);
    CHECK(null_num.cols() == 6);
    auto a = encode_condition(t, store, specs[0], 1.0).value();
    auto b = encode_condition(t, store, specs[0], 3.0).value();
    CHECK(a != b);
    CHECK(a != null_num.value());
    if (enc == NumericEncoder::kInterval) {
      CHECK(a.data == row(store, "cond/x/table", 1));
      CHECK(null_num.value().data == row(store, "cond/x/table", 4));
    }
    if (enc == NumericEncoder::kDirect) {
      // w * 0.25 + b
      for (int c = 0; c < 6; ++c)
        CHECK(a.data[c] == doctest::Approx(0.25 * store.get("cond/x/w").data[c] + store.get("cond/x/b").data[c]));
    }
    auto cat = encode_condition(t, store, specs[1], 2.0).value();
    CHECK(cat.data == row(store, "cond/k/table", 2));
    CHECK(encode_condition(t, store, specs[1], std::nullopt).value().data == row(store, "cond/k/table", 3));
    CHECK_THROWS_AS(encode_condition(t, store, specs[1], 3.0), RangeError);
    CHECK_THROWS_AS(encode_condition(t, store, specs[0], NAN), RangeError);

    ConditionSet cs{{1.0, 2.0}};
    auto c = combine(t, store, specs, cs, 5, 6).value();
    auto ts = encode_timestep(5, 6);
    for (int k = 0; k < 6; ++k) CHECK(c.data[k] == doctest::Approx(ts[k] + a.data[k] + cat.data[k]));
  }
}

TEST_CASE("cluster encoder is a softmax mixture of centers") {
  auto specs = specs_for(NumericEncoder::kCluster);
  ParamStore store;
  Rng rng(2);
  init_condition_params(store, specs, 4, 3, rng);
  Tape t;
  auto v = encode_condition(t, store, specs[0], 2.0).value();
  std::vector<double> logits(3);
  for (int k = 0; k < 3; ++k) logits[k] = 0.5 * store.get("cond/x/w1").data[k] + store.get("cond/x/b1").data[k];
  auto p = softmax(logits);
  for (int d = 0; d < 4; ++d) {
    double e = store.get("cond/x/b2").data[d];
    for (int k = 0; k < 3; ++k) e += p[k] * store.get("cond/x/w2").at(k, d);
    CHECK(v.data[d] == doctest::Approx(e));
  }
}

TEST_CASE("no conditions gives the bare timestep") {
  ParamStore store;
  Tape t;
  auto c = combine(t, store, {}, ConditionSet{}, 9, 4).value();
  CHECK(c.data == encode_timestep(9, 4));
}

TEST_CASE("condition dropout rates") {
  Rng rng(3);
  ConditionSet c{{1.0, 0.0}};
  int whole = 0, first = 0;
  const int n = 20000;
  for (int k = 0; k < n; ++k) {
    auto d = drop_conditions(c, 0.1, rng);
    CHECK((d.all_null() || d == c));
    whole += d.all_null();
    auto p = drop_conditions(c, 0.1, rng, true);
    first += !p.values[0].has_value();
  }
  CHECK(whole / double(n) == doctest::Approx(0.1).epsilon(0.1));
  CHECK(first / double(n) == doctest::Approx(0.1).epsilon(0.1));
  CHECK(drop_conditions(c, 0.0, rng) == c);
  CHECK(drop_conditions(c, 1.0, rng).all_null());
  CHECK_THROWS_AS(drop_conditions(c, 1.5, rng), RangeError);
}

TEST_CASE("condition json") {
  auto specs = specs_for(NumericEncoder::kCluster);
  ConditionSet c{{1.5, 1.0}};
  auto j = conditions_to_json(c, specs);
  CHECK(j["k"] == "b");
  CHECK(conditions_from_json(j, specs) == c);
  CHECK(conditions_from_json(nlohmann::json::object(), specs).all_null());
  CHECK_THROWS_AS(conditions_from_json({{"zz", 1}}, specs), SchemaError);
  CHECK_THROWS_AS(validate_conditions(ConditionSet{{INFINITY, 0.0}}, specs), RangeError);
}
