#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "strata/driver.hpp"
#include "strata/kernels.hpp"
#include "strata/lower.hpp"
#include "strata/printer.hpp"
#include "testutil.hpp"

using namespace strata;
using namespace strata::testing;

namespace {

CooMatrix example_m() {
  CooMatrix m;
  m.rows = m.cols = 4;
  m.triplets = {{0, 0, 1}, {0, 2, 2}, {1, 3, 3}, {2, 0, 4}, {2, 1, 5}, {2, 2, 6}, {2, 3, 7}};
  return m;
}

DenseMatrix run_spmm(const CooMatrix& m, const DenseMatrix& x, DType dt) {
  PipelineOptions opts;
  Pipeline pl = build_matrix_pipeline(KernelOp::SpMM, m, x.cols, dt, FormatRequest{}, opts);
  pl.bindings.buffers["X"] = dense_to_data(x, dt);
  return pl.run_dense();
}

}  // namespace

TEST_CASE("SpMM with all-ones dense operand yields replicated row sums") {
  CooMatrix m = example_m();
  DenseMatrix ones(4, 2);
  for (auto& v : ones.v) v = 1;
  DenseMatrix y = run_spmm(m, ones, DType::I32);
  double sums[4] = {3, 3, 22, 0};
  for (int i = 0; i < 4; ++i)
    for (int k = 0; k < 2; ++k) CHECK(y.at(i, k) == sums[i]);
}

TEST_CASE("SpMM identity operand reproduces the matrix") {
  CooMatrix m = example_m();
  DenseMatrix eye(4, 4);
  for (int i = 0; i < 4; ++i) eye.at(i, i) = 1;
  DenseMatrix y = run_spmm(m, eye, DType::I32);
  CHECK(y.v == dense_from_coo(m).v);
}

TEST_CASE("printed SpMM program marks the j iterator as reduction") {
  KernelSpec spec;
  spec.op = KernelOp::SpMM;
  spec.m = spec.n = 4;
  spec.d = 2;
  std::string text = print_program(build_spmm(spec, build_csr(example_m())));
  CHECK(text.find("j: R") != std::string::npos);
}

TEST_CASE("SDDMM: all-ones mask with identity factors picks the diagonal pattern") {
  CooMatrix a;
  a.rows = a.cols = 2;
  a.triplets = {{0, 0, 1}, {0, 1, 1}, {1, 0, 1}, {1, 1, 1}};
  PipelineOptions opts;
  Pipeline pl = build_matrix_pipeline(KernelOp::SDDMM, a, 2, DType::I32, FormatRequest{}, opts);
  DenseMatrix eye(2, 2);
  eye.at(0, 0) = eye.at(1, 1) = 1;
  pl.bindings.buffers["X"] = dense_to_data(eye, DType::I32);
  pl.bindings.buffers["Y"] = dense_to_data(eye, DType::I32);
  DenseMatrix b = pl.run_dense();
  // X Y^T-free form: B = A .* (X * Y) = identity values on the stored pattern.
  CHECK(b.at(0, 0) == 1);
  CHECK(b.at(0, 1) == 0);
  CHECK(b.at(1, 0) == 0);
  CHECK(b.at(1, 1) == 1);
}

TEST_CASE("SDDMM random instances equal the dense oracle") {
  std::mt19937 rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    CooMatrix a = random_coo(rng, 8, 8, 0.3, DType::I32);
    PipelineOptions opts;
    Pipeline pl =
        build_matrix_pipeline(KernelOp::SDDMM, a, 4, DType::I32, FormatRequest{}, opts);
    DenseMatrix x = random_dense(rng, 8, 4), y = random_dense(rng, 4, 8);
    pl.bindings.buffers["X"] = dense_to_data(x, DType::I32);
    pl.bindings.buffers["Y"] = dense_to_data(y, DType::I32);
    DenseMatrix got = pl.run_dense();
    DenseMatrix want = oracle_sddmm(dense_from_coo(a), x, y);
    REQUIRE(got.v == want.v);
  }
}

TEST_CASE("SDDMM of a zero mask is zero") {
  CooMatrix a;
  a.rows = a.cols = 4;
  PipelineOptions opts;
  Pipeline pl = build_matrix_pipeline(KernelOp::SDDMM, a, 2, DType::I32, FormatRequest{}, opts);
  pl.bindings.buffers["X"] = dense_to_data(DenseMatrix(4, 2), DType::I32);
  pl.bindings.buffers["Y"] = dense_to_data(DenseMatrix(2, 4), DType::I32);
  DenseMatrix b = pl.run_dense();
  for (double v : b.v) CHECK(v == 0.0);
}

TEST_CASE("RGMS with one relation degenerates to SpMM of X*W") {
  std::mt19937 rng(12);
  CooMatrix a = random_coo(rng, 8, 8, 0.3, DType::I32);
  PipelineOptions opts;
  Pipeline pl = build_rgms_pipeline({a}, 4, 3, DType::I32, FormatRequest{}, opts);
  DenseMatrix got = pl.run_dense();

  DenseMatrix x(8, 4), w(4, 3);
  for (size_t i = 0; i < x.v.size(); ++i) x.v[i] = pl.bindings.buffers.at("X").get(i);
  for (size_t i = 0; i < w.v.size(); ++i) w.v[i] = pl.bindings.buffers.at("W").get(i);
  DenseMatrix xw = oracle_spmm(x, w);
  DenseMatrix want = oracle_spmm(dense_from_coo(a), xw);
  CHECK(got.v == want.v);
}

TEST_CASE("RGMS random instances match the two-stage oracle") {
  std::mt19937 rng(21);
  std::uniform_real_distribution<double> u(0, 1);
  std::uniform_int_distribution<int> val(-3, 3);
  for (int trial = 0; trial < 25; ++trial) {
    int R = 1 + trial % 3;
    std::vector<CooMatrix> rels(R);
    for (auto& r : rels) {
      r.rows = r.cols = 16;
      r.value_dtype = DType::I32;
      for (int i = 0; i < 16; ++i)
        for (int j = 0; j < 16; ++j)
          if (u(rng) < 0.15) {
            int v = val(rng);
            r.triplets.push_back({i, j, double(v ? v : 1)});
          }
    }
    PipelineOptions opts;
    Pipeline pl =
        build_rgms_pipeline(rels, 4, 4, DType::I32, FormatRequest{}, opts, nullptr, nullptr,
                            100 + trial);
    DenseMatrix got = pl.run_dense();

    std::vector<DenseMatrix> a_rel, w_rel;
    for (int r = 0; r < R; ++r) {
      a_rel.push_back(dense_from_coo(rels[r]));
      DenseMatrix w(4, 4);
      for (int k = 0; k < 4; ++k)
        for (int l = 0; l < 4; ++l)
          w.at(k, l) = pl.bindings.buffers.at("W").get((r * 4 + k) * 4 + l);
      w_rel.push_back(w);
    }
    DenseMatrix x(16, 4);
    for (size_t i = 0; i < x.v.size(); ++i) x.v[i] = pl.bindings.buffers.at("X").get(i);
    REQUIRE(got.v == two_stage_rgms_oracle(a_rel, x, w_rel).v);
  }
}

TEST_CASE("RGMS with binary adjacency and identity weights sums neighbor rows") {
  std::mt19937 rng(33);
  int R = 2;
  std::vector<CooMatrix> rels(R);
  std::uniform_real_distribution<double> u(0, 1);
  for (auto& r : rels) {
    r.rows = r.cols = 8;
    for (int i = 0; i < 8; ++i)
      for (int j = 0; j < 8; ++j)
        if (u(rng) < 0.25) r.triplets.push_back({i, j, 1.0});
  }
  DenseMatrix eye(4, 4);
  for (int k = 0; k < 4; ++k) eye.at(k, k) = 1;
  std::vector<DenseMatrix> ws(R, eye);
  PipelineOptions opts;
  Pipeline pl = build_rgms_pipeline(rels, 4, 4, DType::I32, FormatRequest{}, opts, &ws);
  DenseMatrix got = pl.run_dense();
  // Y = sum_r A_r X with W_r = I.
  DenseMatrix x(8, 4);
  for (size_t i = 0; i < x.v.size(); ++i) x.v[i] = pl.bindings.buffers.at("X").get(i);
  DenseMatrix want(8, 4);
  for (int r = 0; r < R; ++r) {
    DenseMatrix part = oracle_spmm(dense_from_coo(rels[r]), x);
    for (size_t i = 0; i < want.v.size(); ++i) want.v[i] += part.v[i];
  }
  CHECK(got.v == want.v);
}

TEST_CASE("two-stage oracle basics") {
  // R=1, A=I: Y = X * W0.
  DenseMatrix a(3, 3);
  for (int i = 0; i < 3; ++i) a.at(i, i) = 1;
  std::mt19937 rng(2);
  DenseMatrix x = random_dense(rng, 3, 2), w = random_dense(rng, 2, 2);
  CHECK(two_stage_rgms_oracle({a}, x, {w}).v == oracle_spmm(x, w).v);
  // Zero A gives zero Y.
  DenseMatrix z(3, 3);
  auto y = two_stage_rgms_oracle({z}, x, {w});
  for (double v : y.v) CHECK(v == 0.0);
}

// --- sparse convolution as RGMS ----------------------------------------------

namespace {

/*! \brief Direct sparse convolution oracle: Y[o] = sum_r X[out+off_r] W_r. */
DenseMatrix direct_conv(const ConvPattern& pat, const std::vector<std::vector<int>>& in_coords,
                        const std::vector<std::vector<int>>& out_coords, const DenseMatrix& x,
                        const std::vector<DenseMatrix>& w) {
  auto key = [](const std::vector<int>& c) {
    std::string k;
    for (int v : c) k += std::to_string(v) + ",";
    return k;
  };
  std::map<std::string, int64_t> in_index;
  for (size_t i = 0; i < in_coords.size(); ++i) in_index[key(in_coords[i])] = i;
  DenseMatrix y(static_cast<int64_t>(out_coords.size()), w[0].cols);
  for (size_t o = 0; o < out_coords.size(); ++o) {
    for (size_t r = 0; r < pat.offsets.size(); ++r) {
      std::vector<int> q = out_coords[o];
      for (size_t d2 = 0; d2 < q.size() && d2 < pat.offsets[r].size(); ++d2)
        q[d2] += pat.offsets[r][d2];
      auto it = in_index.find(key(q));
      if (it == in_index.end()) continue;
      for (int64_t k = 0; k < x.cols; ++k)
        for (int64_t l = 0; l < y.cols; ++l)
          y.at(o, l) += x.at(it->second, k) * w[r].at(k, l);
    }
  }
  return y;
}

}  // namespace

TEST_CASE("1D conv with kernel size 3 over a dense line equals direct convolution") {
  ConvPattern pat;
  pat.offsets = {{-1}, {0}, {1}};
  std::vector<std::vector<int>> coords;
  for (int i = 0; i < 5; ++i) coords.push_back({i});
  ConvAsRgms conv = conv_to_rgms(pat, coords, coords, 3, 2, DType::I32);
  CHECK(conv.a.relations == 3);

  // Each relation's rows carry at most one non-zero.
  const IntArray& jp = conv.a.aux.at("J_indptr");
  for (size_t q = 0; q + 1 < jp.size(); ++q) CHECK(jp[q + 1] - jp[q] <= 1);

  std::mt19937 rng(4);
  DenseMatrix x = random_dense(rng, 5, 3);
  std::vector<DenseMatrix> ws;
  for (int r = 0; r < 3; ++r) ws.push_back(random_dense(rng, 3, 2));
  PipelineOptions opts;
  std::vector<CooMatrix> rels;
  for (int64_t r = 0; r < conv.a.relations; ++r) {
    CooMatrix rim;
    rim.rows = conv.a.rows;
    rim.cols = conv.a.cols;
    DenseMatrix rd = relation_dense(conv.a, r);
    for (int64_t i = 0; i < rd.rows; ++i)
      for (int64_t j = 0; j < rd.cols; ++j)
        if (rd.at(i, j) != 0) rim.triplets.push_back({i, j, rd.at(i, j)});
    rels.push_back(rim);
  }
  Pipeline pl = build_rgms_pipeline(rels, 3, 2, DType::I32, FormatRequest{}, opts, &ws, &x);
  DenseMatrix got = pl.run_dense();
  DenseMatrix want = direct_conv(pat, coords, coords, x, ws);
  CHECK(got.v == want.v);
}

TEST_CASE("kernel size 1 conv is a pointwise X*W") {
  ConvPattern pat;
  pat.offsets = {{0, 0}};
  std::vector<std::vector<int>> coords = {{0, 0}, {2, 1}, {5, 5}};
  ConvAsRgms conv = conv_to_rgms(pat, coords, coords, 2, 2, DType::I32);
  std::mt19937 rng(6);
  DenseMatrix x = random_dense(rng, 3, 2);
  std::vector<DenseMatrix> ws = {random_dense(rng, 2, 2)};
  DenseMatrix want = oracle_spmm(x, ws[0]);
  DenseMatrix got = direct_conv(pat, coords, coords, x, ws);
  CHECK(got.v == want.v);
  CHECK(conv.a.nnz == 3);
}

TEST_CASE("isolated point with a 3-wide kernel touches only the center relation") {
  ConvPattern pat;
  pat.offsets = {{-1}, {0}, {1}};
  std::vector<std::vector<int>> coords = {{10}};
  ConvAsRgms conv = conv_to_rgms(pat, coords, coords, 2, 2, DType::I32);
  CHECK(relation_dense(conv.a, 0).at(0, 0) == 0);
  CHECK(relation_dense(conv.a, 1).at(0, 0) == 1);
  CHECK(relation_dense(conv.a, 2).at(0, 0) == 0);
}

TEST_CASE("conv_to_rgms rejects duplicate coordinates") {
  ConvPattern pat;
  pat.offsets = {{0}};
  std::vector<std::vector<int>> dup = {{1}, {1}};
  CHECK_THROWS_AS(conv_to_rgms(pat, dup, {{0}}, 2, 2, DType::I32), Error);
}

TEST_CASE("3D conv neighborhoods map correctly on synthetic point clouds") {
  // 27-offset 3x3x3 kernel over a small random cloud; per-row nnz <= 1 holds.
  ConvPattern pat;
  for (int a = -1; a <= 1; ++a)
    for (int b = -1; b <= 1; ++b)
      for (int c = -1; c <= 1; ++c) pat.offsets.push_back({a, b, c});
  std::mt19937 rng(19);
  std::set<std::array<int, 3>> pts;
  std::uniform_int_distribution<int> coord(0, 5);
  while (pts.size() < 20) pts.insert({coord(rng), coord(rng), coord(rng)});
  std::vector<std::vector<int>> coords;
  for (const auto& p : pts) coords.push_back({p[0], p[1], p[2]});
  ConvAsRgms conv = conv_to_rgms(pat, coords, coords, 2, 2, DType::I32);
  const IntArray& jp = conv.a.aux.at("J_indptr");
  for (size_t q = 0; q + 1 < jp.size(); ++q) CHECK(jp[q + 1] - jp[q] <= 1);

  std::vector<CooMatrix> rels;
  for (int64_t r = 0; r < conv.a.relations; ++r) {
    CooMatrix rim;
    rim.rows = conv.a.rows;
    rim.cols = conv.a.cols;
    DenseMatrix rd = relation_dense(conv.a, r);
    for (int64_t i = 0; i < rd.rows; ++i)
      for (int64_t j = 0; j < rd.cols; ++j)
        if (rd.at(i, j) != 0) rim.triplets.push_back({i, j, rd.at(i, j)});
    rels.push_back(rim);
  }
  DenseMatrix x = random_dense(rng, static_cast<int64_t>(coords.size()), 2);
  std::vector<DenseMatrix> ws;
  for (size_t r = 0; r < pat.offsets.size(); ++r) ws.push_back(random_dense(rng, 2, 2));
  PipelineOptions opts;
  Pipeline pl = build_rgms_pipeline(rels, 2, 2, DType::I32, FormatRequest{}, opts, &ws, &x);
  CHECK(pl.run_dense().v == direct_conv(pat, coords, coords, x, ws).v);
}
