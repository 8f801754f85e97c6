/*
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *   http://www.apache.org/licenses/LICENSE-2.0
 */

#include "strata/kernels.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "strata/transform.hpp"

namespace strata {

RelSparse build_rel_sparse(const std::vector<CooMatrix>& per_relation, DType dtype) {
  if (per_relation.empty()) fail(ErrKind::Usage, "need at least one relation");
  RelSparse r;
  r.relations = static_cast<int64_t>(per_relation.size());
  r.rows = per_relation[0].rows;
  r.cols = per_relation[0].cols;

  IntArray i_indptr = {0}, i_indices, j_indptr = {0}, j_indices;
  std::vector<double> vals;
  for (const auto& m : per_relation) {
    if (m.rows != r.rows || m.cols != r.cols)
      fail(ErrKind::Usage, "all relations must share dims");
    std::vector<Triplet> t = m.triplets;
    std::sort(t.begin(), t.end(), [](const Triplet& a, const Triplet& b) {
      return a.row != b.row ? a.row < b.row : a.col < b.col;
    });
    // Rows with at least one entry become positions of the I axis.
    size_t q = 0;
    while (q < t.size()) {
      int64_t row = t[q].row;
      i_indices.push_back(static_cast<int32_t>(row));
      while (q < t.size() && t[q].row == row) {
        j_indices.push_back(static_cast<int32_t>(t[q].col));
        vals.push_back(t[q].value);
        ++q;
      }
      j_indptr.push_back(static_cast<int32_t>(j_indices.size()));
    }
    i_indptr.push_back(static_cast<int32_t>(i_indices.size()));
  }
  r.nnz = static_cast<int64_t>(vals.size());

  r.axes.add(dense_fixed("R", r.relations));
  r.axes.add(sparse_variable("I", "R", r.rows, static_cast<int64_t>(i_indices.size()),
                             "I_indptr", "I_indices"));
  r.axes.add(sparse_variable("J", "I", r.cols, r.nnz, "J_indptr", "J_indices"));
  r.aux["I_indptr"] = std::move(i_indptr);
  r.aux["I_indices"] = std::move(i_indices);
  r.aux["J_indptr"] = std::move(j_indptr);
  r.aux["J_indices"] = std::move(j_indices);
  r.values = TensorData::zeros(dtype, vals.size());
  for (size_t i = 0; i < vals.size(); ++i) r.values.set(i, vals[i]);
  return r;
}

void bind_rel_sparse(Bindings& b, const std::string& buffer_name, const RelSparse& r) {
  for (const auto& [name, arr] : r.aux) {
    TensorData d;
    d.dtype = DType::I32;
    d.i32 = arr;
    b.buffers[name] = std::move(d);
  }
  b.buffers[buffer_name] = r.values;
}

DenseMatrix relation_dense(const RelSparse& r, int64_t rel) {
  DenseMatrix d(r.rows, r.cols);
  const IntArray& ip = r.aux.at("I_indptr");
  const IntArray& ii = r.aux.at("I_indices");
  const IntArray& jp = r.aux.at("J_indptr");
  const IntArray& ji = r.aux.at("J_indices");
  for (int32_t q = ip[rel]; q < ip[rel + 1]; ++q)
    for (int32_t e = jp[q]; e < jp[q + 1]; ++e) d.at(ii[q], ji[e]) += r.values.get(e);
  return d;
}

Program build_spmm(const KernelSpec& spec, const TensorStorage& a_csr) {
  Program p;
  p.name = "spmm";
  p.stage = Stage::I;
  for (const Axis& a : a_csr.axes.all()) p.axes.add(a);
  p.axes.add(dense_fixed("Jd", a_csr.cols));
  p.axes.add(dense_fixed("K", spec.d));

  const std::string& ax_i = a_csr.buffer_axes[0];
  const std::string& ax_j = a_csr.buffer_axes[1];
  p.buffers.push_back({"A", {ax_i, ax_j}, spec.dtype, BufferRole::Input, -1, {}, false});
  p.buffers.push_back({"X", {"Jd", "K"}, spec.dtype, BufferRole::Input, -1, {}, false});
  p.buffers.push_back({"Y", {ax_i, "K"}, spec.dtype, BufferRole::Output, -1, {}, false});

  Stmt body = store("Y", {var("i"), var("k")},
                    mul(load("A", {var("i"), var("j")}), load("X", {var("j"), var("k")})),
                    /*reduce=*/true);
  p.body = sparse_iteration("spmm",
                            {{"i", ax_i, IterKind::Spatial},
                             {"j", ax_j, IterKind::Reduction},
                             {"k", "K", IterKind::Spatial}},
                            body);
  return p;
}

Program build_sddmm(const KernelSpec& spec, const TensorStorage& a_csr) {
  Program p;
  p.name = "sddmm";
  p.stage = Stage::I;
  for (const Axis& a : a_csr.axes.all()) p.axes.add(a);
  p.axes.add(dense_fixed("K", spec.d));
  p.axes.add(dense_fixed("Jd", a_csr.cols));

  const std::string& ax_i = a_csr.buffer_axes[0];
  const std::string& ax_j = a_csr.buffer_axes[1];
  p.buffers.push_back({"A", {ax_i, ax_j}, spec.dtype, BufferRole::Input, -1, {}, false});
  p.buffers.push_back({"X", {ax_i, "K"}, spec.dtype, BufferRole::Input, -1, {}, false});
  p.buffers.push_back({"Y", {"K", "Jd"}, spec.dtype, BufferRole::Input, -1, {}, false});
  p.buffers.push_back({"B", {ax_i, ax_j}, spec.dtype, BufferRole::Output, -1, {}, false});

  Stmt body = store("B", {var("i"), var("j")},
                    mul(mul(load("A", {var("i"), var("j")}), load("X", {var("i"), var("k")})),
                        load("Y", {var("k"), var("j")})),
                    /*reduce=*/true);
  p.body = sparse_iteration("sddmm",
                            {{"i", ax_i, IterKind::Spatial},
                             {"j", ax_j, IterKind::Spatial},
                             {"k", "K", IterKind::Reduction}},
                            body);
  // The computation per (i, j) is independent; iterate the non-zeros directly.
  return sparse_fuse(p, "sddmm", {ax_i, ax_j});
}

Program build_rgms(const KernelSpec& spec, const RelSparse& a) {
  if (spec.relations < 1) fail(ErrKind::Usage, "RGMS requires at least one relation");
  Program p;
  p.name = "rgms";
  p.stage = Stage::I;
  for (const Axis& ax : a.axes.all()) p.axes.add(ax);
  p.axes.add(dense_fixed("Jd", a.cols));
  p.axes.add(dense_fixed("K", spec.d_in));
  p.axes.add(dense_fixed("L", spec.d_out));
  p.axes.add(dense_fixed("Id", a.rows));

  p.buffers.push_back({"A", {"R", "I", "J"}, spec.dtype, BufferRole::Input, -1, {}, false});
  p.buffers.push_back({"X", {"Jd", "K"}, spec.dtype, BufferRole::Input, -1, {}, false});
  p.buffers.push_back({"W", {"R", "K", "L"}, spec.dtype, BufferRole::Input, -1, {}, false});
  p.buffers.push_back({"Y", {"Id", "L"}, spec.dtype, BufferRole::Output, -1, {}, false});

  Stmt body = store("Y", {var("i"), var("l")},
                    mul(mul(load("A", {var("r"), var("i"), var("j")}),
                            load("X", {var("j"), var("k")})),
                        load("W", {var("r"), var("k"), var("l")})),
                    /*reduce=*/true);
  p.body = sparse_iteration("rgms",
                            {{"r", "R", IterKind::Spatial},
                             {"i", "I", IterKind::Spatial},
                             {"j", "J", IterKind::Reduction},
                             {"k", "K", IterKind::Reduction},
                             {"l", "L", IterKind::Spatial}},
                            body);
  return p;
}

DenseMatrix two_stage_rgms_oracle(const std::vector<DenseMatrix>& a_rel, const DenseMatrix& x,
                                  const std::vector<DenseMatrix>& w_rel) {
  if (a_rel.empty() || a_rel.size() != w_rel.size())
    fail(ErrKind::Usage, "oracle: need matching relation counts");
  int64_t m = a_rel[0].rows, d_out = w_rel[0].cols;
  DenseMatrix y(m, d_out);
  for (size_t r = 0; r < a_rel.size(); ++r) {
    // Stage 1: T_r = X * W_r.
    DenseMatrix t(x.rows, d_out);
    for (int64_t j = 0; j < x.rows; ++j)
      for (int64_t k = 0; k < x.cols; ++k) {
        double xv = x.at(j, k);
        if (xv == 0.0) continue;
        for (int64_t l = 0; l < d_out; ++l) t.at(j, l) += xv * w_rel[r].at(k, l);
      }
    // Stage 2: Y += A_r * T_r.
    for (int64_t i = 0; i < m; ++i)
      for (int64_t j = 0; j < a_rel[r].cols; ++j) {
        double av = a_rel[r].at(i, j);
        if (av == 0.0) continue;
        for (int64_t l = 0; l < d_out; ++l) y.at(i, l) += av * t.at(j, l);
      }
  }
  return y;
}

ConvAsRgms conv_to_rgms(const ConvPattern& pattern,
                        const std::vector<std::vector<int>>& in_coords,
                        const std::vector<std::vector<int>>& out_coords, int64_t d_in,
                        int64_t d_out, DType dtype) {
  auto key = [](const std::vector<int>& c) {
    std::string k;
    for (int v : c) k += std::to_string(v) + ",";
    return k;
  };
  std::map<std::string, int64_t> in_index;
  for (size_t i = 0; i < in_coords.size(); ++i) {
    auto [it, fresh] = in_index.emplace(key(in_coords[i]), static_cast<int64_t>(i));
    if (!fresh) fail(ErrKind::Validation, "duplicate input coordinate");
  }
  std::set<std::string> out_seen;
  for (const auto& c : out_coords)
    if (!out_seen.insert(key(c)).second) fail(ErrKind::Validation, "duplicate output coordinate");

  std::vector<CooMatrix> rels;
  for (const auto& off : pattern.offsets) {
    CooMatrix m;
    m.rows = static_cast<int64_t>(out_coords.size());
    m.cols = static_cast<int64_t>(in_coords.size());
    m.value_dtype = dtype;
    for (size_t o = 0; o < out_coords.size(); ++o) {
      std::vector<int> q = out_coords[o];
      for (size_t d = 0; d < q.size() && d < off.size(); ++d) q[d] += off[d];
      auto it = in_index.find(key(q));
      if (it != in_index.end())
        m.triplets.push_back({static_cast<int64_t>(o), it->second, 1.0});
    }
    rels.push_back(std::move(m));
  }

  ConvAsRgms out;
  out.a = build_rel_sparse(rels, dtype);
  out.spec.op = KernelOp::RGMS;
  out.spec.m = out.a.rows;
  out.spec.n = out.a.cols;
  out.spec.d_in = d_in;
  out.spec.d_out = d_out;
  out.spec.relations = static_cast<int64_t>(pattern.offsets.size());
  out.spec.dtype = dtype;
  out.in_coords = in_coords;
  out.out_coords = out_coords;
  return out;
}

}  // namespace strata
