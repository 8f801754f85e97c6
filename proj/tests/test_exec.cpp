#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstring>
#include <functional>
#include <random>

#include "strata/driver.hpp"
#include "strata/emit_c.hpp"
#include "strata/kernels.hpp"
#include "strata/lower.hpp"
#include "strata/schedule.hpp"
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

Program spmm3(const TensorStorage& csr, int64_t d, DType dt) {
  KernelSpec spec;
  spec.op = KernelOp::SpMM;
  spec.m = csr.rows;
  spec.n = csr.cols;
  spec.d = d;
  spec.dtype = dt;
  return lower_sparse_buffers(lower_sparse_iteration(build_spmm(spec, csr)));
}

/*! \brief Tiny hand-built stage-III program running one binary search. */
Program search_program(SearchMode mode, bool guarded) {
  Program p;
  p.name = "probe";
  p.stage = Stage::III;
  p.buffers.push_back({"arr", {}, DType::I32, BufferRole::Input, 4, {}, false});
  p.buffers.push_back({"out", {}, DType::I32, BufferRole::Output, 2, {}, false});
  p.params.push_back({"key", DType::I32});
  auto search = std::make_shared<StmtNode>();
  search->kind = StmtKind::BinarySearchBlock;
  search->result_var = "r";
  search->search_buffer = "arr";
  search->seg_lo = ic(0);
  search->seg_hi = ic(4);
  search->key = var("key");
  search->search_mode = mode;
  search->guarded = guarded;
  if (guarded) search->found_var = "ok";
  std::vector<Stmt> body{search, store("out", {ic(0)}, var("r"), false)};
  if (guarded) body.push_back(store("out", {ic(1)}, var("ok"), false));
  p.body = seq(body);
  return p;
}

Bindings search_bindings(int32_t key) {
  Bindings b;
  TensorData arr;
  arr.dtype = DType::I32;
  arr.i32 = {1, 3, 9, 10};  // the worked sorted-row example
  b.buffers["arr"] = arr;
  b.scalars["key"] = key;
  return b;
}

}  // namespace

TEST_CASE("SpMM with the identity operand reproduces the dense matrix") {
  TensorStorage csr = build_csr(example_m());
  Program p3 = spmm3(csr, 4, DType::I32);
  Bindings b;
  bind_storage(b, "A", csr);
  DenseMatrix eye(4, 4);
  for (int i = 0; i < 4; ++i) eye.at(i, i) = 1;
  b.buffers["X"] = dense_to_data(eye, DType::I32);
  ExecReport r = interpret(p3, b, {});
  DenseMatrix want = dense_from_coo(example_m());
  for (int64_t i = 0; i < 16; ++i) CHECK(r.outputs.buffers.at("Y").get(i) == want.v[i]);
}

TEST_CASE("SpMM on random operands equals the dense oracle exactly") {
  std::mt19937 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    CooMatrix m = random_coo(rng, 3 + rng() % 20, 3 + rng() % 20, 0.35, DType::I32);
    TensorStorage csr = build_csr(m);
    int64_t d = 1 + rng() % 6;
    Program p3 = spmm3(csr, d, DType::I32);
    Bindings b;
    bind_storage(b, "A", csr);
    DenseMatrix x = random_dense(rng, m.cols, d);
    b.buffers["X"] = dense_to_data(x, DType::I32);
    ExecReport r = interpret(p3, b, {});
    DenseMatrix want = oracle_spmm(dense_from_coo(m), x);
    for (size_t i = 0; i < want.v.size(); ++i)
      REQUIRE(r.outputs.buffers.at("Y").get(i) == want.v[i]);
  }
}

TEST_CASE("binary search block: position of 9 in {1,3,9,10} is 2") {
  Program p = search_program(SearchMode::LowerBound, false);
  ExecReport r = interpret(p, search_bindings(9), {});
  CHECK(r.outputs.buffers.at("out").get(0) == 2);
}

TEST_CASE("guarded search reports absence instead of trapping") {
  Program p = search_program(SearchMode::LowerBound, true);
  ExecReport hit = interpret(p, search_bindings(10), {});
  CHECK(hit.outputs.buffers.at("out").get(0) == 3);
  CHECK(hit.outputs.buffers.at("out").get(1) == 1);
  ExecReport miss = interpret(p, search_bindings(4), {});
  CHECK(miss.outputs.buffers.at("out").get(1) == 0);
}

TEST_CASE("strict search on an absent key is a checked-mode violation") {
  Program p = search_program(SearchMode::LowerBound, false);
  ExecOptions opts;
  opts.mode = ExecMode::Checked;
  ExecReport r = interpret(p, search_bindings(4), opts);
  REQUIRE(!r.violations.empty());
  CHECK(r.violations[0].find("absent") != std::string::npos);
}

TEST_CASE("segment locate finds the row of a position") {
  Program p = search_program(SearchMode::LocateSegment, false);
  // arr acts as an indptr: {1,3,9,10}; key 5 lies in segment 1 ([3,9)).
  ExecReport r = interpret(p, search_bindings(5), {});
  CHECK(r.outputs.buffers.at("out").get(0) == 1);
}

TEST_CASE("interpretation is deterministic byte for byte") {
  std::mt19937 rng(9);
  CooMatrix m = random_coo(rng, 24, 24, 0.3, DType::F32);
  TensorStorage csr = build_csr(m);
  Program p3 = spmm3(csr, 8, DType::F32);
  Bindings b;
  bind_storage(b, "A", csr);
  b.buffers["X"] = dense_to_data(random_dense(rng, 24, 8, true), DType::F32);
  ExecReport r1 = interpret(p3, b, {});
  ExecReport r2 = interpret(p3, b, {});
  const auto& y1 = r1.outputs.buffers.at("Y").f32;
  const auto& y2 = r2.outputs.buffers.at("Y").f32;
  REQUIRE(y1.size() == y2.size());
  for (size_t i = 0; i < y1.size(); ++i) {
    uint32_t a, c;
    static_assert(sizeof(float) == 4);
    std::memcpy(&a, &y1[i], 4);
    std::memcpy(&c, &y2[i], 4);
    REQUIRE(a == c);
  }
  CHECK(r1.stats.loads == r2.stats.loads);
  CHECK(r1.stats.flops == r2.stats.flops);
}

TEST_CASE("parallel loops produce the same bytes as sequential execution") {
  std::mt19937 rng(31);
  CooMatrix m = random_coo(rng, 40, 40, 0.25, DType::F32);
  TensorStorage csr = build_csr(m);
  KernelSpec spec;
  spec.op = KernelOp::SpMM;
  spec.m = spec.n = 40;
  spec.d = 4;
  spec.dtype = DType::F32;
  Program p2 = lower_sparse_iteration(build_spmm(spec, csr));
  // Annotate the row loop parallel through the schedule layer.
  Program p2p = annotate(p2, {"spmm", "i"}, LoopAnno::Parallel);
  Program p3 = lower_sparse_buffers(p2p);
  Bindings b;
  bind_storage(b, "A", csr);
  b.buffers["X"] = dense_to_data(random_dense(rng, 40, 4, true), DType::F32);
  ExecOptions seq_opts;
  ExecOptions par_opts;
  par_opts.threads = 4;
  ExecReport rs = interpret(p3, b, seq_opts);
  ExecReport rp = interpret(p3, b, par_opts);
  CHECK(rs.outputs.buffers.at("Y").f32 == rp.outputs.buffers.at("Y").f32);
}

TEST_CASE("checked mode catches injected out-of-bounds accesses") {
  TensorStorage csr = build_csr(example_m());
  Program p3 = spmm3(csr, 2, DType::I32);
  Bindings b;
  bind_storage(b, "A", csr);
  b.buffers["X"] = dense_to_data(DenseMatrix(4, 2), DType::I32);

  // Inject off-by-N faults into stores and loads; each must be caught.
  int caught = 0, injected = 0;
  std::function<Stmt(const Stmt&, int&, int)> mutate = [&](const Stmt& s, int& counter,
                                                           int target) -> Stmt {
    if (!s) return s;
    auto n = std::make_shared<StmtNode>(*s);
    if (s->kind == StmtKind::BufferStore) {
      if (counter++ == target)
        n->indices = {add(s->indices[0], ic(1000))};
      return n;
    }
    if (s->init) n->init = mutate(s->init, counter, target);
    if (s->body) n->body = mutate(s->body, counter, target);
    if (s->kind == StmtKind::SeqStmts)
      for (auto& c : n->seq) c = mutate(c, counter, target);
    return n;
  };
  for (int target = 0; target < 2; ++target) {
    int counter = 0;
    Program bad = p3;
    bad.body = mutate(p3.body, counter, target);
    if (counter <= target) break;
    ++injected;
    ExecOptions opts;
    opts.mode = ExecMode::Checked;
    ExecReport r = interpret(bad, b, opts);
    if (!r.violations.empty()) ++caught;
  }
  CHECK(injected >= 1);
  CHECK(caught == injected);
}

TEST_CASE("checked mode catches region violations from shrunken declarations") {
  TensorStorage csr = build_csr(example_m());
  Program p3 = spmm3(csr, 2, DType::I32);
  // Shrink the Y write region of the innermost block to a single slot.
  std::function<Stmt(const Stmt&)> shrink = [&](const Stmt& s) -> Stmt {
    if (!s) return s;
    auto n = std::make_shared<StmtNode>(*s);
    if (s->kind == StmtKind::Block && s->name == "spmm") {
      for (auto& w : n->writes)
        if (w.buffer == "Y") w.dims = {{ic(0), ic(1)}};
    }
    if (s->init) n->init = shrink(s->init);
    if (s->body) n->body = shrink(s->body);
    if (s->kind == StmtKind::SeqStmts)
      for (auto& c : n->seq) c = shrink(c);
    return n;
  };
  Program bad = p3;
  bad.body = shrink(p3.body);
  Bindings b;
  bind_storage(b, "A", csr);
  b.buffers["X"] = dense_to_data(DenseMatrix(4, 2), DType::I32);
  ExecOptions opts;
  opts.mode = ExecMode::Checked;
  ExecReport r = interpret(bad, b, opts);
  REQUIRE(!r.violations.empty());
  CHECK(r.violations[0].find("region") != std::string::npos);
}

TEST_CASE("missing bindings are execution errors") {
  TensorStorage csr = build_csr(example_m());
  Program p3 = spmm3(csr, 2, DType::I32);
  Bindings b;
  bind_storage(b, "A", csr);  // X missing
  CHECK_THROWS_WITH_AS(interpret(p3, b, {}), doctest::Contains("missing binding"), Error);
}

// --- emitted C --------------------------------------------------------------

TEST_CASE("emitted C: SpMM is bit-identical to the interpreter (i32 and f32)") {
  std::mt19937 rng(41);
  for (DType dt : {DType::I32, DType::F32}) {
    CooMatrix m = random_coo(rng, 12, 10, 0.3, dt);
    TensorStorage csr = build_csr(m);
    Program p3 = spmm3(csr, 3, dt);
    Bindings b;
    bind_storage(b, "A", csr);
    b.buffers["X"] = dense_to_data(random_dense(rng, 10, 3, dt != DType::I32), dt);
    ExecReport ir = interpret(p3, b, {});
    CRunResult cr = emit_compile_run(p3, b);
    REQUIRE_MESSAGE(cr.ok, cr.log);
    const TensorData& want = ir.outputs.buffers.at("Y");
    const TensorData& got = cr.outputs.at("Y");
    REQUIRE(got.size() == want.size());
    if (dt == DType::I32) {
      CHECK(got.i32 == want.i32);
    } else {
      for (size_t i = 0; i < got.size(); ++i) {
        uint32_t a, c;
        std::memcpy(&a, &got.f32[i], 4);
        std::memcpy(&c, &want.f32[i], 4);
        REQUIRE(a == c);
      }
    }
  }
}

TEST_CASE("emitted C: empty program produces an empty function body") {
  Program p;
  p.name = "nothing";
  p.stage = Stage::III;
  p.body = seq({});
  std::string c = emit_c(p);
  CHECK(c.find("void nothing(") != std::string::npos);
}

TEST_CASE("emitted C: decomposed hyb runs sub-kernels sequentially") {
  TensorStorage csr = build_csr(example_m());
  KernelSpec spec;
  spec.op = KernelOp::SpMM;
  spec.m = spec.n = 4;
  spec.d = 2;
  spec.dtype = DType::I32;
  Program base = build_spmm(spec, csr);
  auto rules = hyb_rules(csr, 1, 2);
  auto [dec, req] = decompose_format(base, rules);
  Program p3 = lower_sparse_buffers(lower_sparse_iteration(dec));
  std::string c = emit_c(p3);
  // One function; the bucket compute loops appear one after another.
  size_t first = c.find("block spmm_hyb_p0_b0");
  size_t second = c.find("block spmm_hyb_p0_b1");
  size_t third = c.find("block spmm_hyb_p0_b2");
  CHECK(first != std::string::npos);
  CHECK(second != std::string::npos);
  CHECK(third != std::string::npos);
  CHECK(first < second);
  CHECK(second < third);

  // Copies execute inside the single translation unit: run with only the aux
  // arrays bound and original A; the converted buffers are temps.
  Bindings b;
  bind_storage(b, "A", csr);
  for (const auto& rule : rules)
    for (const auto& [name, arr] : rule.storage.aux) {
      TensorData d;
      d.dtype = DType::I32;
      d.i32 = arr;
      b.buffers[name] = d;
    }
  DenseMatrix eye(4, 4);
  for (int i = 0; i < 4; ++i) eye.at(i, i) = 1;
  b.buffers["X"] = dense_to_data(eye, DType::I32);
  ExecReport ir = interpret(p3, b, {});
  CRunResult cr = emit_compile_run(p3, b);
  REQUIRE_MESSAGE(cr.ok, cr.log);
  CHECK(cr.outputs.at("Y").i32 == ir.outputs.buffers.at("Y").i32);
  DenseMatrix want = dense_from_coo(example_m());
  for (int64_t i = 0; i < 16; ++i) CHECK(ir.outputs.buffers.at("Y").get(i) == want.v[i]);
}
