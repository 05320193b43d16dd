#include <string>

#include "doctest.h"

#include "cnnlab/arch_io.hpp"
#include "cnnlab/model.hpp"
#include "fixtures.hpp"

using namespace cnnlab;

namespace {

// Footnote-style freedom count: r (m1 + m2 + 1) per rank-constrained matrix,
// with the matrix shapes read off an instantiated Weights object rather than
// from the closed-form formula.
long long freedom_count_oracle(const Architecture& arch, const Weights& w) {
  long long theta = 0;
  for (std::size_t i = 0; i < w.kernels.size(); ++i) {
    const long long m1 = w.kernels[i].front().size();          // entries per kernel
    const long long m2 = static_cast<long long>(w.kernels[i].size());  // kernels
    theta += arch.layers[i].rank * (m1 + m2 + 1);
  }
  theta += arch.output_rank * (w.fc.rows() + w.fc.cols() + 1);
  return theta;
}

// Supplement-formula freedom degree at full rank of the supplement's own
// matrix shapes (k^2 d_i x d_{i-1} per layer, d_out x flattened for the fc).
long long supplement_full_rank(const Architecture& arch, const DerivedDims& dims) {
  long long theta = 0;
  int d_prev = arch.input_channels;
  for (const LayerSpec& L : arch.layers) {
    const long long m1 = 1LL * L.kernel * L.kernel * L.out_channels;
    const long long m2 = d_prev;
    const long long a = std::min(m1, m2);
    theta += a * (m1 + m2 - 2 * a + 1);
    d_prev = L.out_channels;
  }
  const long long fc_cols = 1LL * dims.pooled_rows.back() * dims.pooled_cols.back() * d_prev;
  const long long a = std::min<long long>(arch.output_dim, fc_cols);
  theta += a * (arch.output_dim + fc_cols - 2 * a + 1);
  return theta;
}

}  // namespace

TEST_CASE("validate derives the documented sizes") {
  DerivedDims d1 = validate(arch_a1());
  CHECK(d1.rows == std::vector<int>{6});
  CHECK(d1.cols == std::vector<int>{6});
  CHECK(d1.pooled_rows == std::vector<int>{3});
  CHECK(d1.pooled_cols == std::vector<int>{3});

  DerivedDims d2 = validate(arch_a2());
  CHECK(d2.rows == std::vector<int>{20, 4});
  CHECK(d2.pooled_rows == std::vector<int>{10, 2});
  CHECK(d2.pooled_cols == std::vector<int>{10, 2});
}

TEST_CASE("validate reports the first violated relation with its numbers") {
  Architecture bad = arch_a1();
  bad.layers[0].kernel = 4;  // (8-4)/1+1 = 5, not divisible by pool 2
  try {
    validate(bad);
    FAIL("expected DimensionError");
  } catch (const DimensionError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("layer 1") != std::string::npos);
    CHECK(msg.find("5") != std::string::npos);
    CHECK(msg.find("pool_size 2") != std::string::npos);
  }

  Architecture bad_stride = arch_a1();
  bad_stride.layers[0].stride = 2;  // (8-3) % 2 != 0
  CHECK_THROWS_AS(validate(bad_stride), DimensionError);

  Architecture bad_rank = arch_a1();
  bad_rank.layers[0].rank = 3;  // min(9, 2) = 2
  CHECK_THROWS_AS(validate(bad_rank), DimensionError);

  Architecture bad_b = arch_a1();
  bad_b.output_b = 0.0;
  CHECK_THROWS_AS(validate(bad_b), DimensionError);

  Architecture empty;
  CHECK_THROWS_AS(validate(empty), DimensionError);
}

TEST_CASE("param_count golden values and instantiation oracle") {
  CHECK(param_count(arch_a1()) == 90);

  Architecture tiny;  // single 1x1 conv, all dims 1
  tiny.input_rows = tiny.input_cols = 1;
  tiny.input_channels = 1;
  tiny.pool = 1;
  tiny.layers.push_back({1, 1, 1, 1.0, 1});
  tiny.output_dim = 1;
  tiny.output_rank = 1;
  CHECK(param_count(tiny) == 2);

  Rng rng(101);
  for (int t = 0; t < 50; ++t) {
    Architecture a = random_architecture(rng);
    Weights w = init_weights(a, rng(), 1.0);
    CHECK(param_count(a) == weight_count(w));
    CHECK(param_count(a) == weights_to_vec(w).size());
  }
}

TEST_CASE("freedom degree golden values and the factorization-count oracle") {
  CHECK(freedom_degree(arch_a1(), ThetaVariant::Main) == 116);
  CHECK(freedom_degree(arch_a1(), ThetaVariant::Supplement) == 92);

  Rng rng(103);
  for (int t = 0; t < 50; ++t) {
    Architecture a = random_architecture(rng);
    Weights w = init_weights(a, rng(), 1.0);
    CHECK(freedom_degree(a, ThetaVariant::Main) == freedom_count_oracle(a, w));
  }
}

TEST_CASE("theta(main) is monotone nondecreasing in each rank") {
  Architecture a = arch_a1();
  long long prev = 0;
  for (int r = 1; r <= 2; ++r) {
    a.layers[0].rank = r;
    const long long th = freedom_degree(a, ThetaVariant::Main);
    CHECK(th >= prev);
    prev = th;
  }
  a = arch_a1();
  prev = 0;
  for (int r = 1; r <= 4; ++r) {
    a.output_rank = r;
    const long long th = freedom_degree(a, ThetaVariant::Main);
    CHECK(th >= prev);
    prev = th;
  }
}

TEST_CASE("the two theta formulas differ by the closed-form correction") {
  // main - supplement = 2 a_out^2 + sum_i a_i [(k_i^2 - 1)(d_{i-1} - d_i) + 2 a_i],
  // an algebraic identity linking the two implementations.
  Rng rng(107);
  for (int t = 0; t < 100; ++t) {
    Architecture a = random_architecture(rng);
    long long expected = 2LL * a.output_rank * a.output_rank;
    int d_prev = a.input_channels;
    for (const LayerSpec& L : a.layers) {
      expected += L.rank * ((1LL * L.kernel * L.kernel - 1) * (d_prev - L.out_channels) +
                            2LL * L.rank);
      d_prev = L.out_channels;
    }
    CHECK(freedom_degree(a, ThetaVariant::Main) -
              freedom_degree(a, ThetaVariant::Supplement) ==
          expected);
  }
  // On the reference architectures the main variant is the larger one.
  CHECK(freedom_degree(arch_a1(), ThetaVariant::Main) >
        freedom_degree(arch_a1(), ThetaVariant::Supplement));
  CHECK(freedom_degree(arch_a2(), ThetaVariant::Main) >
        freedom_degree(arch_a2(), ThetaVariant::Supplement));
}

TEST_CASE("supplement theta at full rank never exceeds the parameter count") {
  Rng rng(109);
  for (int t = 0; t < 100; ++t) {
    Architecture a = random_architecture(rng);
    DerivedDims dims = validate(a);
    CHECK(supplement_full_rank(a, dims) <= dims.total_params);
  }
}

TEST_CASE("size identity holds for random valid architectures") {
  Rng rng(113);
  for (int t = 0; t < 100; ++t) {
    Architecture a = random_architecture(rng);
    DerivedDims dims = validate(a);
    int prev_r = a.input_rows;
    for (std::size_t i = 0; i < a.layers.size(); ++i) {
      const LayerSpec& L = a.layers[i];
      const int r = dims.rows[i];
      // Interior dilated extent matches the valid-correlation span, and the
      // border-padded extent matches what the backward convolution consumes.
      CHECK(L.stride * (r - 1) + 1 == prev_r - L.kernel + 1);
      CHECK(L.stride * (r - 1) + 2 * L.kernel - 1 == prev_r + L.kernel - 1);
      prev_r = dims.pooled_rows[i];
    }
  }
}

TEST_CASE("parse and serialize round trip") {
  const Architecture a1 = arch_a1();
  const std::string text = serialize_arch(a1);
  const Architecture back = parse_arch(text);
  CHECK(serialize_arch(back) == text);
  CHECK(back.input_rows == 8);
  CHECK(back.layers.size() == 1);
  CHECK(back.layers[0].kernel == 3);
  CHECK(back.output_dim == 4);
  CHECK(arch_hash(back) == arch_hash(a1));

  Rng rng(127);
  for (int t = 0; t < 25; ++t) {
    Architecture a = random_architecture(rng);
    CHECK(serialize_arch(parse_arch(serialize_arch(a))) == serialize_arch(a));
  }
}

TEST_CASE("parse errors name the offending field") {
  const std::string no_pool = R"({
    "input": {"rows": 8, "cols": 8, "channels": 1},
    "layers": [{"kernel": 3, "stride": 1, "out_channels": 2, "b": 1.0, "rank": 2}],
    "output": {"dim": 4, "b": 1.0, "rank": 4}
  })";
  try {
    parse_arch(no_pool);
    FAIL("expected SchemaError");
  } catch (const SchemaError& e) {
    CHECK(std::string(e.what()).find("pool_size") != std::string::npos);
  }

  const std::string bad_b = R"({
    "input": {"rows": 8, "cols": 8, "channels": 1},
    "pool_size": 2,
    "layers": [{"kernel": 3, "stride": 1, "out_channels": 2, "b": -1.0, "rank": 2}],
    "output": {"dim": 4, "b": 1.0, "rank": 4}
  })";
  try {
    parse_arch(bad_b);
    FAIL("expected SchemaError");
  } catch (const SchemaError& e) {
    CHECK(std::string(e.what()).find("layers[0].b") != std::string::npos);
  }

  CHECK_THROWS_AS(parse_arch("not json"), SchemaError);
  CHECK_THROWS_AS(parse_arch("[1,2,3]"), SchemaError);
}
