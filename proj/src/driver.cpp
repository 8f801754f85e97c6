/*
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *   http://www.apache.org/licenses/LICENSE-2.0
 */

#include "strata/driver.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <sstream>

#include "strata/lower.hpp"
#include "strata/schedule.hpp"

namespace strata {

FormatRequest FormatRequest::parse(const std::string& text) {
  FormatRequest r;
  auto colon = text.find(':');
  r.kind = text.substr(0, colon);
  if (r.kind != "csr" && r.kind != "bsr" && r.kind != "ell" && r.kind != "dbsr" &&
      r.kind != "srbcrs" && r.kind != "hyb")
    fail(ErrKind::Usage, "unknown format: " + r.kind);
  if (colon == std::string::npos) return r;
  std::string rest = text.substr(colon + 1);
  std::istringstream in(rest);
  std::string kv;
  while (std::getline(in, kv, ',')) {
    auto eq = kv.find('=');
    if (eq == std::string::npos) fail(ErrKind::Usage, "bad format parameter: " + kv);
    std::string key = kv.substr(0, eq);
    int64_t value = std::stoll(kv.substr(eq + 1));
    if (key == "b")
      r.b = value;
    else if (key == "w")
      r.w = value;
    else if (key == "t")
      r.t = value;
    else if (key == "g")
      r.g = value;
    else if (key == "c")
      r.c = static_cast<int>(value);
    else if (key == "k")
      r.k = static_cast<int>(value);
    else
      fail(ErrKind::Usage, "unknown format parameter: " + key);
  }
  return r;
}

std::string FormatRequest::str() const {
  std::ostringstream os;
  os << kind;
  if (kind == "bsr" || kind == "dbsr") os << ":b=" << b;
  if (kind == "ell" && w > 0) os << ":w=" << w;
  if (kind == "srbcrs") os << ":t=" << t << ",g=" << g;
  if (kind == "hyb") os << ":c=" << c << ",k=" << k;
  return os.str();
}

namespace {

/*! \brief Pad matrix dims with zero rows/cols so the format's tiling divides. */
CooMatrix pad_for_format(const CooMatrix& m, const FormatRequest& fmt) {
  CooMatrix out = m;
  if (fmt.kind == "bsr" || fmt.kind == "dbsr") {
    out.rows = ceil_div(m.rows, fmt.b) * fmt.b;
    out.cols = ceil_div(m.cols, fmt.b) * fmt.b;
  } else if (fmt.kind == "srbcrs") {
    out.rows = ceil_div(m.rows, fmt.t) * fmt.t;
  }
  return out;
}

std::vector<FormatRewriteRule> rules_for(const TensorStorage& csr, const FormatRequest& fmt,
                                         const std::string& prefix) {
  std::vector<FormatRewriteRule> rules;
  if (fmt.kind == "bsr") {
    rules.push_back(bsr_rule(csr, fmt.b, prefix + "bsr"));
  } else if (fmt.kind == "ell") {
    int64_t w = fmt.w;
    if (w <= 0) {
      // Default: max row length (capacity-exact).
      const IntArray& ip = csr.arr(csr.axes.at(csr.buffer_axes[1]).indptr_name);
      for (size_t i = 0; i + 1 < ip.size(); ++i)
        w = std::max<int64_t>(w, ip[i + 1] - ip[i]);
      w = std::max<int64_t>(w, 1);
    }
    rules.push_back(ell_rule(csr, w, prefix + "ell"));
  } else if (fmt.kind == "dbsr") {
    rules.push_back(dbsr_rule(csr, fmt.b, prefix + "dbsr"));
  } else if (fmt.kind == "srbcrs") {
    rules.push_back(srbcrs_rule(csr, fmt.t, fmt.g, prefix + "srbcrs"));
  } else if (fmt.kind == "hyb") {
    int k = fmt.k >= 0 ? fmt.k : hyb_auto_k(csr);
    rules = hyb_rules(csr, fmt.c, k, prefix + "hyb");
  } else {
    fail(ErrKind::Usage, "no rules for format " + fmt.kind);
  }
  return rules;
}

void bind_rule_storages(Bindings& b, Program& p, const std::vector<FormatRewriteRule>& rules,
                        bool preconverted) {
  for (const auto& rule : rules) {
    for (const auto& [name, arr] : rule.storage.aux) {
      TensorData d;
      d.dtype = DType::I32;
      d.i32 = arr;
      b.buffers[name] = std::move(d);
    }
    if (preconverted) {
      mark_preconverted(p, rule.new_buffer, true);
      b.buffers[rule.new_buffer] = rule.storage.values;
    }
  }
}

VerifyResult compare(const DenseMatrix& got, const DenseMatrix& want, double rel_tol) {
  VerifyResult out;
  if (got.rows != want.rows || got.cols != want.cols) {
    out.pass = false;
    out.detail = "shape mismatch";
    return out;
  }
  for (int64_t i = 0; i < got.rows; ++i)
    for (int64_t j = 0; j < got.cols; ++j) {
      double x = got.at(i, j), y = want.at(i, j);
      double denom = std::max({std::fabs(x), std::fabs(y), 1.0});
      if (std::fabs(x - y) > rel_tol * denom) {
        out.pass = false;
        std::ostringstream os;
        os << "first divergence at (" << i << ", " << j << "): got " << x << ", expected " << y;
        out.detail = os.str();
        return out;
      }
    }
  return out;
}

DenseMatrix output_dense_from_report(const Pipeline& pl, const ExecReport& report) {
  auto it = report.outputs.buffers.find(pl.output_buffer);
  if (it == report.outputs.buffers.end())
    fail(ErrKind::Exec, "pipeline output " + pl.output_buffer + " missing from report");
  const TensorData& data = it->second;
  if (pl.output_pattern) {
    TensorStorage view = *pl.output_pattern;
    view.values = data;
    return reconstruct_dense(view);
  }
  DenseMatrix d(pl.out_rows, pl.out_cols);
  for (int64_t i = 0; i < pl.out_rows * pl.out_cols; ++i) d.v[i] = data.get(i);
  return d;
}

}  // namespace

DenseMatrix Pipeline::run_dense() {
  ExecReport report = interpret(stage3, bindings, exec_opts);
  if (!report.ok()) {
    std::string msg = "execution violations:";
    for (const auto& v : report.violations) msg += "\n  " + v;
    fail(ErrKind::Exec, msg);
  }
  return output_dense_from_report(*this, report);
}

Pipeline build_matrix_pipeline(KernelOp op, const CooMatrix& m_in, int64_t d, DType dtype,
                               const FormatRequest& fmt, const PipelineOptions& opts) {
  Pipeline pl;
  CooMatrix m = pad_for_format(m_in, fmt);
  m.value_dtype = dtype;
  TensorStorage csr = build_csr(m);

  pl.spec.op = op;
  pl.spec.m = m.rows;
  pl.spec.n = m.cols;
  pl.spec.d = d;
  pl.spec.dtype = dtype;

  Program base = op == KernelOp::SpMM ? build_spmm(pl.spec, csr) : build_sddmm(pl.spec, csr);
  bind_storage(pl.bindings, "A", csr);

  if (op == KernelOp::SpMM) {
    pl.output_buffer = "Y";
    pl.out_rows = m.rows;
    pl.out_cols = d;
  } else {
    pl.output_buffer = "B";
    pl.output_pattern = csr;
    pl.out_rows = m.rows;
    pl.out_cols = m.cols;
  }

  if (fmt.kind == "csr") {
    pl.stage1 = base;
  } else {
    pl.rules = rules_for(csr, fmt, "");
    auto [decomposed, req] = decompose_format(base, pl.rules);
    pl.stage1 = decomposed;
    bind_rule_storages(pl.bindings, pl.stage1, pl.rules, opts.preconverted);
  }

  pl.stage2 = lower_sparse_iteration(pl.stage1);
  if (!opts.schedule_script.empty()) pl.stage2 = apply_schedule(pl.stage2, opts.schedule_script);
  pl.stage3 = lower_sparse_buffers(pl.stage2);

  pl.exec_opts.mode = opts.mode;
  pl.exec_opts.skip_copy_blocks = opts.preconverted;
  pl.exec_opts.threads = opts.threads;
  return pl;
}

namespace {

/*! \brief Lift a 2D rule built on one relation's slice to the 3D target. */
FormatRewriteRule lift_relation_rule(FormatRewriteRule rule, int64_t rel) {
  rule.orig_vars = {"r", "i", "j"};
  // f ignores the relation (the claim pins it); f_inv reproduces it.
  std::vector<Expr> inv = {ic(rel)};
  inv.insert(inv.end(), rule.inv_idx_map.begin(), rule.inv_idx_map.end());
  rule.inv_idx_map = std::move(inv);
  // 2D generators key the map on the slice's own axis names ("s<r>_I" before
  // "s<r>_J"); rebind to the 3D iteration axes R, I, J.
  if (rule.axis_map.size() != 2) fail(ErrKind::Internal, "relation rule expects a 2D mapping");
  std::map<std::string, std::vector<std::string>> fixed;
  fixed["R"] = {};
  fixed["I"] = rule.axis_map.begin()->second;
  fixed["J"] = std::next(rule.axis_map.begin())->second;
  rule.axis_map = fixed;
  return rule;
}

}  // namespace

Pipeline build_rgms_pipeline(const std::vector<CooMatrix>& relations, int64_t d_in,
                             int64_t d_out, DType dtype, const FormatRequest& fmt,
                             const PipelineOptions& opts,
                             const std::vector<DenseMatrix>* w_override,
                             const DenseMatrix* x_override, uint64_t seed) {
  Pipeline pl;
  std::vector<CooMatrix> rels;
  for (const auto& r : relations) {
    CooMatrix p = pad_for_format(r, fmt);
    p.value_dtype = dtype;
    rels.push_back(p);
  }
  RelSparse a = build_rel_sparse(rels, dtype);

  pl.spec.op = KernelOp::RGMS;
  pl.spec.m = a.rows;
  pl.spec.n = a.cols;
  pl.spec.d_in = d_in;
  pl.spec.d_out = d_out;
  pl.spec.relations = a.relations;
  pl.spec.dtype = dtype;

  Program base = build_rgms(pl.spec, a);
  bind_rel_sparse(pl.bindings, "A", a);
  pl.output_buffer = "Y";
  pl.out_rows = a.rows;
  pl.out_cols = d_out;

  // Dense operands (deterministic from the seed unless supplied).
  std::mt19937 rng(static_cast<uint32_t>(seed));
  std::uniform_int_distribution<int> val(-3, 3);
  DenseMatrix x(a.cols, d_in);
  if (x_override) {
    x = *x_override;
  } else {
    for (auto& v : x.v) v = val(rng);
  }
  TensorData xd = TensorData::zeros(dtype, x.v.size());
  for (size_t i = 0; i < x.v.size(); ++i) xd.set(i, x.v[i]);
  pl.bindings.buffers["X"] = xd;
  TensorData wd = TensorData::zeros(dtype, a.relations * d_in * d_out);
  for (int64_t r = 0; r < a.relations; ++r)
    for (int64_t k = 0; k < d_in; ++k)
      for (int64_t l = 0; l < d_out; ++l) {
        double v = w_override ? (*w_override)[r].at(k, l) : val(rng);
        wd.set((r * d_in + k) * d_out + l, v);
      }
  pl.bindings.buffers["W"] = wd;

  if (fmt.kind == "csr") {
    pl.stage1 = base;
  } else {
    for (int64_t r = 0; r < a.relations; ++r) {
      TensorStorage slice_csr = build_csr(rels[r], "s" + std::to_string(r) + "_");
      FormatRequest per = fmt;
      if (fmt.kind == "hyb" && fmt.k < 0) per.k = hyb_auto_k(slice_csr);
      std::vector<FormatRewriteRule> rr =
          rules_for(slice_csr, per, "r" + std::to_string(r) + "_");
      for (auto& rule : rr) pl.rules.push_back(lift_relation_rule(std::move(rule), r));
    }
    auto [decomposed, req] = decompose_format(base, pl.rules);
    pl.stage1 = decomposed;
    bind_rule_storages(pl.bindings, pl.stage1, pl.rules, opts.preconverted);
  }

  pl.stage2 = lower_sparse_iteration(pl.stage1);
  if (!opts.schedule_script.empty()) pl.stage2 = apply_schedule(pl.stage2, opts.schedule_script);
  pl.stage3 = lower_sparse_buffers(pl.stage2);

  pl.exec_opts.mode = opts.mode;
  pl.exec_opts.skip_copy_blocks = opts.preconverted;
  pl.exec_opts.threads = opts.threads;
  return pl;
}

VerifyResult verify_pipeline(KernelOp op, const CooMatrix& m, int64_t d, DType dtype,
                             const FormatRequest& fmt, const PipelineOptions& opts,
                             uint64_t seed) {
  VerifyResult out;
  std::mt19937 rng(static_cast<uint32_t>(seed));
  std::uniform_int_distribution<int> val(-3, 3);

  Pipeline pl = build_matrix_pipeline(op, m, d, dtype, fmt, opts);
  CooMatrix padded = pad_for_format(m, fmt);
  DenseMatrix a = dense_from_coo(padded);

  double tol = dtype == DType::I32 ? 0.0 : 1e-5;
  if (op == KernelOp::SpMM) {
    DenseMatrix x(pl.spec.n, d);
    for (auto& v : x.v) v = val(rng);
    TensorData xd = TensorData::zeros(dtype, x.v.size());
    for (size_t i = 0; i < x.v.size(); ++i) xd.set(i, x.v[i]);
    pl.bindings.buffers["X"] = xd;
    DenseMatrix got = pl.run_dense();
    // Oracle: dense matmul.
    DenseMatrix want(a.rows, d);
    for (int64_t i = 0; i < a.rows; ++i)
      for (int64_t j = 0; j < a.cols; ++j) {
        if (a.at(i, j) == 0.0) continue;
        for (int64_t k = 0; k < d; ++k) want.at(i, k) += a.at(i, j) * x.at(j, k);
      }
    return compare(got, want, tol);
  }
  // SDDMM
  DenseMatrix x(pl.spec.m, d), y(d, pl.spec.n);
  for (auto& v : x.v) v = val(rng);
  for (auto& v : y.v) v = val(rng);
  TensorData xd = TensorData::zeros(dtype, x.v.size()), yd = TensorData::zeros(dtype, y.v.size());
  for (size_t i = 0; i < x.v.size(); ++i) xd.set(i, x.v[i]);
  for (size_t i = 0; i < y.v.size(); ++i) yd.set(i, y.v[i]);
  pl.bindings.buffers["X"] = xd;
  pl.bindings.buffers["Y"] = yd;
  DenseMatrix got = pl.run_dense();
  DenseMatrix want(a.rows, a.cols);
  for (int64_t i = 0; i < a.rows; ++i)
    for (int64_t j = 0; j < a.cols; ++j) {
      if (a.at(i, j) == 0.0) continue;
      double acc = 0;
      for (int64_t k = 0; k < d; ++k) acc += x.at(i, k) * y.at(k, j);
      want.at(i, j) = a.at(i, j) * acc;
    }
  return compare(got, want, tol);
}

CooMatrix generate_matrix(const std::string& kind, int64_t n, int64_t m, double density,
                          int64_t band, int64_t block, double avg_degree, uint64_t seed) {
  std::mt19937 rng(static_cast<uint32_t>(seed));
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> val(1, 9);
  CooMatrix out;
  out.rows = n;
  out.cols = m;
  if (kind == "random") {
    for (int64_t i = 0; i < n; ++i)
      for (int64_t j = 0; j < m; ++j)
        if (u(rng) < density) out.triplets.push_back({i, j, double(val(rng))});
  } else if (kind == "banded") {
    if (band >= m) fail(ErrKind::Usage, "band width must be smaller than the matrix");
    for (int64_t i = 0; i < n; ++i)
      for (int64_t j = std::max<int64_t>(0, i - band); j <= std::min<int64_t>(m - 1, i + band);
           ++j)
        out.triplets.push_back({i, j, double(val(rng))});
  } else if (kind == "blocksparse") {
    int64_t nb = ceil_div(n, block), mb = ceil_div(m, block);
    for (int64_t bi = 0; bi < nb; ++bi)
      for (int64_t bj = 0; bj < mb; ++bj) {
        if (u(rng) >= density) continue;
        for (int64_t i = bi * block; i < std::min(n, (bi + 1) * block); ++i)
          for (int64_t j = bj * block; j < std::min(m, (bj + 1) * block); ++j)
            out.triplets.push_back({i, j, double(val(rng))});
      }
  } else if (kind == "powerlaw") {
    // Degree sequence ~ zipf over shuffled rows; columns uniform distinct.
    std::vector<double> weight(n);
    double sum = 0;
    for (int64_t i = 0; i < n; ++i) {
      weight[i] = 1.0 / std::pow(double(i + 1), 0.9);
      sum += weight[i];
    }
    std::vector<int64_t> rows(n);
    for (int64_t i = 0; i < n; ++i) rows[i] = i;
    std::shuffle(rows.begin(), rows.end(), rng);
    double total_edges = avg_degree * double(n);
    for (int64_t i = 0; i < n; ++i) {
      int64_t deg = std::min<int64_t>(
          m, std::max<int64_t>(0, llround(total_edges * weight[i] / sum)));
      std::set<int64_t> cols;
      std::uniform_int_distribution<int64_t> cd(0, m - 1);
      while (static_cast<int64_t>(cols.size()) < deg) cols.insert(cd(rng));
      for (int64_t j : cols) out.triplets.push_back({rows[i], j, double(val(rng))});
    }
  } else {
    fail(ErrKind::Usage, "unknown generator kind: " + kind);
  }
  return out;
}

}  // namespace strata
