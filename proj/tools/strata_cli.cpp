/*
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *   http://www.apache.org/licenses/LICENSE-2.0
 */

/*!
 * \file strata_cli.cpp
 * \brief Command-line front door: ingest matrices, build/transform/lower
 * programs, execute or emit C, benchmark, verify.
 *
 * Exit codes: 0 success, 1 verification failure, 2 usage error,
 * 3 internal pass error.
 */

#include <array>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <random>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "strata/driver.hpp"
#include "strata/emit_c.hpp"
#include "strata/lower.hpp"
#include "strata/mmio.hpp"
#include "strata/printer.hpp"
#include "strata/schedule.hpp"
#include "strata/tune.hpp"

namespace {

using namespace strata;

int thread_count() {
  const char* env = std::getenv("STRATA_NUM_THREADS");
  if (!env) return 1;
  int n = std::atoi(env);
  return n > 0 ? n : 1;
}

std::string read_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) fail(ErrKind::Usage, "cannot open " + path);
  std::ostringstream os;
  os << f.rdbuf();
  return os.str();
}

KernelOp parse_op(const std::string& op) {
  if (op == "spmm") return KernelOp::SpMM;
  if (op == "sddmm") return KernelOp::SDDMM;
  if (op == "rgms") return KernelOp::RGMS;
  fail(ErrKind::Usage, "unknown op: " + op + " (expected spmm|sddmm|rgms)");
}

DType parse_dtype(const std::string& t) {
  if (t == "i32") return DType::I32;
  if (t == "f32") return DType::F32;
  if (t == "f64") return DType::F64;
  fail(ErrKind::Usage, "unknown dtype: " + t);
}

std::vector<CooMatrix> split_relations(const CooMatrix& m, int64_t relations, uint64_t seed) {
  // Deterministic round-robin-by-hash split of one matrix into relations.
  std::vector<CooMatrix> rels(relations);
  for (auto& r : rels) {
    r.rows = m.rows;
    r.cols = m.cols;
    r.value_dtype = m.value_dtype;
  }
  std::mt19937 rng(static_cast<uint32_t>(seed));
  for (const auto& t : m.triplets)
    rels[rng() % relations].triplets.push_back(t);
  return rels;
}

int cmd_info(const std::string& matrix) {
  CooMatrix m = read_matrix_market_file(matrix);
  TensorStorage csr = build_csr(m);
  const IntArray& ip = csr.arr(csr.axes.at(csr.buffer_axes[1]).indptr_name);
  int64_t max_row = 0, empty = 0;
  for (size_t i = 0; i + 1 < ip.size(); ++i) {
    int64_t l = ip[i + 1] - ip[i];
    max_row = std::max(max_row, l);
    if (l == 0) ++empty;
  }
  std::cout << "rows: " << m.rows << "\ncols: " << m.cols << "\nnnz: " << m.triplets.size()
            << "\navg_row: " << (m.rows ? double(m.triplets.size()) / double(m.rows) : 0)
            << "\nmax_row: " << max_row << "\nempty_rows: " << empty
            << "\nhyb_auto_k: " << hyb_auto_k(csr) << "\n";
  for (int c : {1, 2, 4}) {
    HybDecomposition h = decompose_hyb(csr, c, hyb_auto_k(csr));
    std::cout << "padding_ratio(hyb:c=" << c << "): " << h.padding_ratio << "\n";
  }
  return 0;
}

int cmd_gen(const std::string& kind, const std::string& out_path, int64_t n, int64_t m,
            double density, int64_t band, int64_t block, double avg_degree, int64_t points,
            uint64_t seed) {
  if (kind == "pointcloud") {
    // Integer 3D coordinates, unique, one per line.
    std::mt19937 rng(static_cast<uint32_t>(seed));
    std::uniform_int_distribution<int> c(0, static_cast<int>(n - 1));
    std::set<std::array<int, 3>> pts;
    while (static_cast<int64_t>(pts.size()) < points) pts.insert({c(rng), c(rng), c(rng)});
    std::ofstream f(out_path);
    if (!f) fail(ErrKind::Usage, "cannot open " + out_path);
    for (const auto& p : pts) f << p[0] << " " << p[1] << " " << p[2] << "\n";
    std::cout << "wrote " << pts.size() << " points to " << out_path << "\n";
    return 0;
  }
  CooMatrix mat = generate_matrix(kind, n, m, density, band, block, avg_degree, seed);
  write_matrix_market_file(out_path, mat);
  std::cout << "wrote " << mat.rows << "x" << mat.cols << " matrix, nnz " << mat.triplets.size()
            << " to " << out_path << "\n";
  return 0;
}

Pipeline build_from_args(const std::string& op, const CooMatrix& m, int64_t d,
                         const std::string& format, const std::string& dtype,
                         const std::string& schedule_path, int64_t relations, uint64_t seed,
                         bool run_copies) {
  PipelineOptions opts;
  if (!schedule_path.empty()) opts.schedule_script = read_file(schedule_path);
  opts.preconverted = !run_copies;
  opts.threads = thread_count();
  FormatRequest fmt = FormatRequest::parse(format);
  KernelOp kop = parse_op(op);
  DType dt = parse_dtype(dtype);
  if (kop == KernelOp::RGMS)
    return build_rgms_pipeline(split_relations(m, relations, seed), d, d, dt, fmt, opts, nullptr,
                               nullptr, seed);
  return build_matrix_pipeline(kop, m, d, dt, fmt, opts);
}

int cmd_compile(const std::string& op, const std::string& matrix, int64_t d,
                const std::string& format, const std::string& dtype, const std::string& schedule,
                const std::string& emit, int64_t relations, uint64_t seed,
                const std::string& out_path) {
  CooMatrix m = read_matrix_market_file(matrix);
  Pipeline pl = build_from_args(op, m, d, format, dtype, schedule, relations, seed, false);
  std::string text;
  if (emit == "ir1")
    text = print_program(pl.stage1);
  else if (emit == "ir2")
    text = print_program(pl.stage2);
  else if (emit == "ir3")
    text = print_program(pl.stage3);
  else if (emit == "c")
    text = emit_c(pl.stage3);
  else
    fail(ErrKind::Usage, "unknown emit target: " + emit + " (expected ir1|ir2|ir3|c)");
  if (out_path.empty()) {
    std::cout << text;
  } else {
    std::ofstream f(out_path);
    f << text;
    std::cout << "wrote " << out_path << "\n";
  }
  return 0;
}

int cmd_run(const std::string& op, const std::string& matrix, int64_t d,
            const std::string& format, const std::string& dtype, const std::string& schedule,
            int64_t relations, uint64_t seed, bool checked, bool run_copies) {
  CooMatrix m = read_matrix_market_file(matrix);
  Pipeline pl = build_from_args(op, m, d, format, dtype, schedule, relations, seed, run_copies);
  pl.exec_opts.mode = checked ? ExecMode::Checked : ExecMode::Release;
  if (parse_op(op) != KernelOp::RGMS) {
    // Seeded dense operands.
    std::mt19937 rng(static_cast<uint32_t>(seed));
    std::uniform_int_distribution<int> val(-3, 3);
    DType dt = parse_dtype(dtype);
    if (parse_op(op) == KernelOp::SpMM) {
      TensorData xd = TensorData::zeros(dt, pl.spec.n * d);
      for (size_t i = 0; i < xd.size(); ++i) xd.set(i, val(rng));
      pl.bindings.buffers["X"] = xd;
    } else {
      TensorData xd = TensorData::zeros(dt, pl.spec.m * d);
      TensorData yd = TensorData::zeros(dt, d * pl.spec.n);
      for (size_t i = 0; i < xd.size(); ++i) xd.set(i, val(rng));
      for (size_t i = 0; i < yd.size(); ++i) yd.set(i, val(rng));
      pl.bindings.buffers["X"] = xd;
      pl.bindings.buffers["Y"] = yd;
    }
  }
  ExecReport report = interpret(pl.stage3, pl.bindings, pl.exec_opts);
  if (!report.ok()) {
    std::cerr << "checked-mode violations:\n";
    for (const auto& v : report.violations) std::cerr << "  " << v << "\n";
    return 1;
  }
  std::cout << "loads: " << report.stats.loads << "\nstores: " << report.stats.stores
            << "\nops: " << report.stats.flops << "\n";
  DenseMatrix y = pl.run_dense();
  double checksum = 0;
  for (double v : y.v) checksum += v;
  std::cout << "output " << y.rows << "x" << y.cols << " checksum " << checksum << "\n";
  return 0;
}

int cmd_verify(const std::string& op, const std::string& matrix, int64_t d,
               const std::string& format, const std::string& dtype,
               const std::string& schedule, int trials, int64_t relations, uint64_t seed) {
  CooMatrix m = read_matrix_market_file(matrix);
  KernelOp kop = parse_op(op);
  DType dt = parse_dtype(dtype);
  FormatRequest fmt = FormatRequest::parse(format);
  PipelineOptions opts;
  if (!schedule.empty()) opts.schedule_script = read_file(schedule);
  opts.threads = thread_count();

  auto close = [&](const DenseMatrix& got, const DenseMatrix& want, std::string* why) {
    double tol = dt == DType::I32 ? 0.0 : 1e-5;
    if (got.rows != want.rows || got.cols != want.cols) {
      *why = "shape mismatch";
      return false;
    }
    for (int64_t i = 0; i < got.rows; ++i)
      for (int64_t j = 0; j < got.cols; ++j) {
        double x = got.at(i, j), y = want.at(i, j);
        double denom = std::max({std::fabs(x), std::fabs(y), 1.0});
        if (std::fabs(x - y) > tol * denom) {
          std::ostringstream os;
          os << "first divergence at (" << i << ", " << j << "): got " << x << ", expected "
             << y;
          *why = os.str();
          return false;
        }
      }
    return true;
  };

  for (int t = 0; t < trials; ++t) {
    uint64_t s = seed + static_cast<uint64_t>(t) * 101;
    if (kop == KernelOp::RGMS) {
      Pipeline pl = build_rgms_pipeline(split_relations(m, relations, s), d, d, dt, fmt, opts,
                                        nullptr, nullptr, s);
      DenseMatrix got = pl.run_dense();
      std::vector<DenseMatrix> a_rel, w_rel;
      const IntArray& iptr = pl.bindings.buffers.at("I_indptr").i32;
      (void)iptr;
      std::vector<CooMatrix> rels = split_relations(m, relations, s);
      for (int64_t r = 0; r < pl.spec.relations; ++r) {
        CooMatrix padded = rels[r];
        padded.rows = pl.spec.m;
        padded.cols = pl.spec.n;
        a_rel.push_back(dense_from_coo(padded));
        DenseMatrix w(d, d);
        for (int64_t k = 0; k < d; ++k)
          for (int64_t l = 0; l < d; ++l)
            w.at(k, l) = pl.bindings.buffers.at("W").get((r * d + k) * d + l);
        w_rel.push_back(w);
      }
      DenseMatrix x(pl.spec.n, d);
      for (size_t i = 0; i < x.v.size(); ++i) x.v[i] = pl.bindings.buffers.at("X").get(i);
      DenseMatrix want = two_stage_rgms_oracle(a_rel, x, w_rel);
      std::string why;
      if (!close(got, want, &why)) {
        std::cerr << "FAIL (trial " << t << "): " << why << "\n";
        return 1;
      }
    } else {
      VerifyResult v = verify_pipeline(kop, m, d, dt, fmt, opts, s);
      if (!v.pass) {
        std::cerr << "FAIL (trial " << t << "): " << v.detail << "\n";
        return 1;
      }
    }
  }
  std::cout << "PASS: " << op << "/" << format << " matches the dense oracle on " << trials
            << " trials\n";
  return 0;
}

int cmd_bench(const std::string& op, const std::string& matrix, int64_t d,
              const std::string& formats_csv, const std::string& dtype, bool tune, int repeats,
              int warmup, const std::string& flush, uint64_t seed, const std::string& json_out) {
  CooMatrix m = read_matrix_market_file(matrix);
  KernelOp kop = parse_op(op);
  DType dt = parse_dtype(dtype);
  SearchSpace space;
  if (tune) {
    TensorStorage csr = build_csr(m);
    space = SearchSpace::hyb_c_grid(hyb_auto_k(csr), /*scan_k=*/false, /*include_csr=*/true);
  } else {
    std::istringstream in(formats_csv);
    std::string f;
    while (std::getline(in, f, ',')) space.formats.push_back(f);
  }
  bool flush_on = flush == "on";
  TuneReport report = run_trials(kop, m, d, dt, space, repeats, warmup, flush_on, seed);
  std::string json = report_json(report);
  if (json_out.empty()) {
    std::cout << json << "\n";
  } else {
    std::ofstream f(json_out);
    f << json << "\n";
    std::cout << "wrote " << json_out << "\n";
  }
  return 0;
}

int cmd_decompose(const std::string& op, const std::string& matrix, int64_t d,
                  const std::string& rules, const std::string& dtype, uint64_t seed) {
  CooMatrix m = read_matrix_market_file(matrix);
  Pipeline pl = build_from_args(op, m, d, rules, dtype, "", 1, seed, false);
  std::cout << print_program(pl.stage1);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"strata: a sparse tensor compiler kit (composable formats + staged lowering)"};
  app.require_subcommand(1);

  std::string matrix, format = "csr", dtype = "f32", schedule, emit = "ir3", out_path;
  std::string op = "spmm", kind = "random", formats_csv = "csr", flush = "off", json_out;
  int64_t d = 8, n = 16, mcols = 0, band = 2, block = 4, points = 64, relations = 1;
  double density = 0.2, avg_degree = 8;
  int trials = 3, repeats = 100, warmup = 10;
  bool tune = false, checked = false, run_copies = false;
  uint64_t seed = 1;

  auto* info = app.add_subcommand("info", "matrix statistics and format padding ratios");
  info->add_option("--matrix", matrix)->required();

  auto* gen = app.add_subcommand("gen", "generate matrices / point clouds");
  gen->add_option("--kind", kind, "powerlaw|banded|blocksparse|random|pointcloud");
  gen->add_option("--out", out_path)->required();
  gen->add_option("--n", n);
  gen->add_option("--m", mcols);
  gen->add_option("--density", density);
  gen->add_option("--band", band);
  gen->add_option("--block", block);
  gen->add_option("--avg-degree", avg_degree);
  gen->add_option("--points", points);
  gen->add_option("--seed", seed);

  auto* compile = app.add_subcommand("compile", "build -> decompose -> lower -> emit");
  compile->add_option("--op", op);
  compile->add_option("--matrix", matrix)->required();
  compile->add_option("--d", d);
  compile->add_option("--format", format);
  compile->add_option("--dtype", dtype);
  compile->add_option("--schedule", schedule);
  compile->add_option("--emit", emit, "ir1|ir2|ir3|c");
  compile->add_option("--relations", relations);
  compile->add_option("--seed", seed);
  compile->add_option("--out", out_path);

  auto* dec = app.add_subcommand("decompose", "dump the decomposed stage-I program");
  dec->add_option("--op", op);
  dec->add_option("--matrix", matrix)->required();
  dec->add_option("--d", d);
  dec->add_option("--rules", format, "format rules, e.g. hyb:c=2,k=3");
  dec->add_option("--dtype", dtype);
  dec->add_option("--seed", seed);

  auto* run = app.add_subcommand("run", "execute a kernel on a matrix");
  run->add_option("--op", op);
  run->add_option("--matrix", matrix)->required();
  run->add_option("--d", d);
  run->add_option("--format", format);
  run->add_option("--dtype", dtype);
  run->add_option("--schedule", schedule);
  run->add_option("--relations", relations);
  run->add_option("--seed", seed);
  run->add_flag("--checked", checked, "validate bounds and block regions");
  run->add_flag("--run-copies", run_copies, "execute format copy iterations");

  auto* verify = app.add_subcommand("verify", "compare against the dense oracle");
  verify->add_option("--op", op);
  verify->add_option("--matrix", matrix)->required();
  verify->add_option("--d", d);
  verify->add_option("--format", format);
  verify->add_option("--dtype", dtype);
  verify->add_option("--schedule", schedule);
  verify->add_option("--trials", trials);
  verify->add_option("--relations", relations);
  verify->add_option("--seed", seed);

  auto* bench = app.add_subcommand("bench", "time kernels; JSON report");
  bench->add_option("--op", op);
  bench->add_option("--matrix", matrix)->required();
  bench->add_option("--d", d);
  bench->add_option("--formats", formats_csv, "comma-separated format list");
  bench->add_option("--dtype", dtype);
  bench->add_flag("--tune", tune, "search the hyb c-grid");
  bench->add_option("--repeats", repeats);
  bench->add_option("--warmup", warmup);
  bench->add_option("--flush-cache", flush, "on|off");
  bench->add_option("--seed", seed);
  bench->add_option("--json", json_out);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    if (*info) return cmd_info(matrix);
    if (*gen)
      return cmd_gen(kind, out_path, n, mcols > 0 ? mcols : n, density, band, block, avg_degree,
                     points, seed);
    if (*compile)
      return cmd_compile(op, matrix, d, format, dtype, schedule, emit, relations, seed, out_path);
    if (*dec) return cmd_decompose(op, matrix, d, format, dtype, seed);
    if (*run) return cmd_run(op, matrix, d, format, dtype, schedule, relations, seed, checked, run_copies);
    if (*verify) return cmd_verify(op, matrix, d, format, dtype, schedule, trials, relations, seed);
    if (*bench)
      return cmd_bench(op, matrix, d, formats_csv, dtype, tune, repeats, warmup, flush, seed,
                       json_out);
  } catch (const strata::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    switch (e.kind) {
      case strata::ErrKind::Usage: return 2;
      case strata::ErrKind::Exec: return 1;
      default: return 3;
    }
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 3;
  }
  return 2;
}
