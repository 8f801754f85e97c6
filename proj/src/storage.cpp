/*
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *   http://www.apache.org/licenses/LICENSE-2.0
 */

#include "strata/storage.hpp"

#include <algorithm>
#include <cmath>

namespace strata {

const char* format_kind_name(FormatKind k) {
  switch (k) {
    case FormatKind::Csr: return "csr";
    case FormatKind::Bsr: return "bsr";
    case FormatKind::Ell: return "ell";
    case FormatKind::Dbsr: return "dbsr";
    case FormatKind::SrBcrs: return "srbcrs";
    case FormatKind::EllBucket: return "ell_bucket";
  }
  return "?";
}

TensorData TensorData::zeros(DType t, size_t n) {
  TensorData d;
  d.dtype = t;
  switch (t) {
    case DType::I32: d.i32.assign(n, 0); break;
    case DType::F32: d.f32.assign(n, 0.f); break;
    case DType::F64: d.f64.assign(n, 0.0); break;
  }
  return d;
}

size_t TensorData::size() const {
  switch (dtype) {
    case DType::I32: return i32.size();
    case DType::F32: return f32.size();
    case DType::F64: return f64.size();
  }
  return 0;
}

double TensorData::get(size_t i) const {
  switch (dtype) {
    case DType::I32: return static_cast<double>(i32[i]);
    case DType::F32: return static_cast<double>(f32[i]);
    case DType::F64: return f64[i];
  }
  return 0.0;
}

void TensorData::set(size_t i, double v) {
  switch (dtype) {
    case DType::I32: i32[i] = static_cast<int32_t>(v); break;
    case DType::F32: f32[i] = static_cast<float>(v); break;
    case DType::F64: f64[i] = v; break;
  }
}

const IntArray& TensorStorage::arr(const std::string& name) const {
  auto it = aux.find(name);
  if (it == aux.end()) fail(ErrKind::Lookup, "storage has no aux array: " + name);
  return it->second;
}

namespace {

struct CsrView {
  int64_t rows, cols;
  const IntArray* indptr;
  const IntArray* indices;
  const TensorData* values;
};

CsrView as_csr(const TensorStorage& s) {
  if (s.kind != FormatKind::Csr) fail(ErrKind::Usage, "expected CSR storage");
  const std::string& jp = s.axes.at(s.buffer_axes[1]).indptr_name;
  const std::string& ji = s.axes.at(s.buffer_axes[1]).indices_name;
  return {s.rows, s.cols, &s.arr(jp), &s.arr(ji), &s.values};
}

}  // namespace

TensorStorage build_csr(const CooMatrix& m, const std::string& prefix) {
  std::vector<Triplet> t = m.triplets;
  for (const auto& e : t) {
    if (e.row < 0 || e.row >= m.rows || e.col < 0 || e.col >= m.cols)
      fail(ErrKind::Validation, "coordinate out of range");
  }
  std::sort(t.begin(), t.end(), [](const Triplet& a, const Triplet& b) {
    return a.row != b.row ? a.row < b.row : a.col < b.col;
  });
  for (size_t i = 1; i < t.size(); ++i)
    if (t[i].row == t[i - 1].row && t[i].col == t[i - 1].col)
      fail(ErrKind::Validation, "duplicate coordinate (" + std::to_string(t[i].row) + ", " +
                                    std::to_string(t[i].col) + ")");

  TensorStorage s;
  s.kind = FormatKind::Csr;
  s.rows = s.orig_rows = m.rows;
  s.cols = s.orig_cols = m.cols;
  s.nnz = static_cast<int64_t>(t.size());
  std::string I = prefix + "I", J = prefix + "J";
  s.axes.add(dense_fixed(I, m.rows));
  s.axes.add(sparse_variable(J, I, m.cols, s.nnz, J + "_indptr", J + "_indices"));
  s.buffer_axes = {I, J};

  IntArray indptr(m.rows + 1, 0), indices(t.size());
  s.values = TensorData::zeros(m.value_dtype, t.size());
  for (size_t i = 0; i < t.size(); ++i) {
    indptr[t[i].row + 1]++;
    indices[i] = static_cast<int32_t>(t[i].col);
    s.values.set(i, t[i].value);
  }
  for (int64_t r = 0; r < m.rows; ++r) indptr[r + 1] += indptr[r];
  s.aux[J + "_indptr"] = std::move(indptr);
  s.aux[J + "_indices"] = std::move(indices);
  return s;
}

CooMatrix csr_to_coo(const TensorStorage& s) {
  CsrView c = as_csr(s);
  CooMatrix m;
  m.rows = c.rows;
  m.cols = c.cols;
  m.value_dtype = s.values.dtype;
  for (int64_t i = 0; i < c.rows; ++i)
    for (int32_t p = (*c.indptr)[i]; p < (*c.indptr)[i + 1]; ++p)
      m.triplets.push_back({i, (*c.indices)[p], c.values->get(p)});
  return m;
}

TensorStorage csr_to_bsr(const TensorStorage& src, int64_t b, const std::string& prefix) {
  if (b < 1) fail(ErrKind::Usage, "block size must be >= 1");
  CsrView c = as_csr(src);
  int64_t mb = ceil_div(c.rows, b), nb = ceil_div(c.cols, b);

  // Block pattern per block row.
  std::vector<std::vector<int32_t>> brow(mb);
  for (int64_t i = 0; i < c.rows; ++i)
    for (int32_t p = (*c.indptr)[i]; p < (*c.indptr)[i + 1]; ++p)
      brow[i / b].push_back(static_cast<int32_t>((*c.indices)[p] / b));
  int64_t nblocks = 0;
  IntArray indptr(mb + 1, 0), indices;
  for (int64_t r = 0; r < mb; ++r) {
    auto& v = brow[r];
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
    nblocks += static_cast<int64_t>(v.size());
    indptr[r + 1] = static_cast<int32_t>(nblocks);
    indices.insert(indices.end(), v.begin(), v.end());
  }

  TensorStorage s;
  s.kind = FormatKind::Bsr;
  s.rows = mb * b;
  s.cols = nb * b;
  s.orig_rows = c.rows;
  s.orig_cols = c.cols;
  s.nnz = src.nnz;
  s.block = b;
  std::string IO = prefix + "IO", JO = prefix + "JO", II = prefix + "II", JI = prefix + "JI";
  s.axes.add(dense_fixed(IO, mb));
  s.axes.add(sparse_variable(JO, IO, nb, nblocks, JO + "_indptr", JO + "_indices"));
  s.axes.add(dense_fixed(II, b));
  s.axes.add(dense_fixed(JI, b));
  s.buffer_axes = {IO, JO, II, JI};

  s.values = TensorData::zeros(src.values.dtype, nblocks * b * b);
  for (int64_t i = 0; i < c.rows; ++i) {
    for (int32_t p = (*c.indptr)[i]; p < (*c.indptr)[i + 1]; ++p) {
      int64_t j = (*c.indices)[p];
      int64_t br = i / b, bc = j / b;
      auto lo = indices.begin() + indptr[br], hi = indices.begin() + indptr[br + 1];
      int64_t pos = std::lower_bound(lo, hi, static_cast<int32_t>(bc)) - indices.begin();
      s.values.set(pos * b * b + (i % b) * b + (j % b), c.values->get(p));
    }
  }
  s.aux[JO + "_indptr"] = std::move(indptr);
  s.aux[JO + "_indices"] = std::move(indices);
  s.pad_slots = nblocks * b * b - src.nnz;
  return s;
}

TensorStorage csr_to_ell(const TensorStorage& src, int64_t w, const std::string& prefix) {
  if (w < 1) fail(ErrKind::Usage, "ELL width must be >= 1");
  CsrView c = as_csr(src);
  if (w > c.cols) fail(ErrKind::Usage, "ELL width exceeds column count");
  for (int64_t i = 0; i < c.rows; ++i) {
    int64_t l = (*c.indptr)[i + 1] - (*c.indptr)[i];
    if (l > w)
      fail(ErrKind::Capacity, "row " + std::to_string(i) + " has " + std::to_string(l) +
                                  " non-zeros, exceeds ELL width " + std::to_string(w));
  }

  TensorStorage s;
  s.kind = FormatKind::Ell;
  s.rows = s.orig_rows = c.rows;
  s.cols = s.orig_cols = c.cols;
  s.nnz = src.nnz;
  std::string I = prefix + "I", J = prefix + "J";
  s.axes.add(dense_fixed(I, c.rows));
  s.axes.add(sparse_fixed(J, I, c.cols, w, J + "_indices"));
  s.buffer_axes = {I, J};

  IntArray indices(c.rows * w, 0);
  s.values = TensorData::zeros(src.values.dtype, c.rows * w);
  for (int64_t i = 0; i < c.rows; ++i) {
    int64_t l = (*c.indptr)[i + 1] - (*c.indptr)[i];
    int32_t pad_col = 0;  // empty rows pad with column 0
    for (int64_t k = 0; k < l; ++k) {
      int32_t col = (*c.indices)[(*c.indptr)[i] + k];
      indices[i * w + k] = col;
      s.values.set(i * w + k, c.values->get((*c.indptr)[i] + k));
      pad_col = col;
    }
    for (int64_t k = l; k < w; ++k) indices[i * w + k] = pad_col;
  }
  s.aux[J + "_indices"] = std::move(indices);
  s.pad_slots = c.rows * w - src.nnz;
  return s;
}

TensorStorage build_ell_bucket(int64_t rows, int64_t cols, int64_t width,
                               const std::vector<std::pair<int32_t, std::vector<int32_t>>>& segs,
                               DType dtype, const std::vector<double>& seg_values,
                               const std::string& prefix) {
  TensorStorage s;
  s.kind = FormatKind::EllBucket;
  s.rows = s.orig_rows = rows;
  s.cols = s.orig_cols = cols;
  int64_t n = static_cast<int64_t>(segs.size());
  std::string O = prefix + "O", I = prefix + "I", J = prefix + "J";
  s.axes.add(dense_fixed(O, 1));
  s.axes.add(sparse_variable(I, O, rows, n, I + "_indptr", I + "_indices"));
  s.axes.add(sparse_fixed(J, I, cols, width, J + "_indices"));
  s.buffer_axes = {O, I, J};
  s.dup_ok_axes.insert(I);

  IntArray iptr = {0, static_cast<int32_t>(n)};
  IntArray remap(n), jind(n * width, 0);
  s.values = TensorData::zeros(dtype, n * width);
  int64_t nnz = 0;
  size_t vi = 0;
  for (int64_t r = 0; r < n; ++r) {
    remap[r] = segs[r].first;
    const auto& colv = segs[r].second;
    int32_t pad_col = 0;
    for (size_t k = 0; k < colv.size(); ++k) {
      jind[r * width + k] = colv[k];
      s.values.set(r * width + k, seg_values[vi++]);
      pad_col = colv[k];
    }
    for (int64_t k = static_cast<int64_t>(colv.size()); k < width; ++k)
      jind[r * width + k] = pad_col;
    nnz += static_cast<int64_t>(colv.size());
  }
  s.nnz = nnz;
  s.pad_slots = n * width - nnz;
  s.aux[I + "_indptr"] = std::move(iptr);
  s.aux[I + "_indices"] = std::move(remap);
  s.aux[J + "_indices"] = std::move(jind);
  return s;
}

HybDecomposition decompose_hyb(const TensorStorage& src, int c, int k,
                               const std::string& prefix) {
  if (c < 1 || k < 0) fail(ErrKind::Usage, "hyb requires c >= 1 and k >= 0");
  CsrView v = as_csr(src);
  HybDecomposition h;
  h.rows = v.rows;
  h.cols = v.cols;
  h.c = c;
  h.k = k;
  int64_t part_w = ceil_div(v.cols, c);
  int64_t pads = 0, slots = 0;

  for (int p = 0; p < c; ++p) {
    int64_t lo = p * part_w, hi = std::min<int64_t>(v.cols, (p + 1) * part_w);
    // Per bucket: segments of (row, cols-in-partition) with their values.
    std::vector<std::vector<std::pair<int32_t, std::vector<int32_t>>>> segs(k + 1);
    std::vector<std::vector<double>> vals(k + 1);
    for (int64_t i = 0; i < v.rows; ++i) {
      std::vector<int32_t> cols_here;
      std::vector<double> vals_here;
      for (int32_t q = (*v.indptr)[i]; q < (*v.indptr)[i + 1]; ++q) {
        int64_t j = (*v.indices)[q];
        if (j >= lo && j < hi) {
          cols_here.push_back(static_cast<int32_t>(j));
          vals_here.push_back(v.values->get(q));
        }
      }
      int64_t l = static_cast<int64_t>(cols_here.size());
      if (l == 0) continue;
      int64_t cap = int64_t{1} << k;
      if (l > cap) {
        // Oversized rows: split into ceil(l / 2^k) segments in bucket k.
        for (int64_t off = 0; off < l; off += cap) {
          int64_t end = std::min(l, off + cap);
          segs[k].emplace_back(static_cast<int32_t>(i),
                               std::vector<int32_t>(cols_here.begin() + off,
                                                    cols_here.begin() + end));
          vals[k].insert(vals[k].end(), vals_here.begin() + off, vals_here.begin() + end);
        }
      } else {
        int bucket = l <= 1 ? 0 : ceil_log2(l);
        segs[bucket].emplace_back(static_cast<int32_t>(i), std::move(cols_here));
        vals[bucket].insert(vals[bucket].end(), vals_here.begin(), vals_here.end());
      }
    }
    for (int b = 0; b <= k; ++b) {
      if (segs[b].empty()) continue;
      EllBucketPart part;
      part.partition = p;
      part.bucket = b;
      part.width = int64_t{1} << b;
      part.col_lo = lo;
      part.col_hi = hi;
      std::string pre = prefix + "hyb_p" + std::to_string(p) + "_b" + std::to_string(b) + "_";
      part.ell = build_ell_bucket(v.rows, v.cols, part.width, segs[b],
                                  src.values.dtype, vals[b], pre);
      pads += part.ell.pad_slots;
      slots += static_cast<int64_t>(part.ell.values.size());
      h.parts.push_back(std::move(part));
    }
  }
  h.padding_ratio = slots == 0 ? 0.0 : static_cast<double>(pads) / static_cast<double>(slots);
  return h;
}

TensorStorage csr_to_dbsr(const TensorStorage& src, int64_t b, const std::string& prefix) {
  TensorStorage bsr = csr_to_bsr(src, b, prefix + "tmp_");
  const IntArray& bp = bsr.arr(prefix + "tmp_JO_indptr");
  const IntArray& bi = bsr.arr(prefix + "tmp_JO_indices");
  int64_t mb = bsr.rows / b, nb = bsr.cols / b;

  IntArray stored_rows;
  for (int64_t r = 0; r < mb; ++r)
    if (bp[r + 1] > bp[r]) stored_rows.push_back(static_cast<int32_t>(r));
  int64_t nstored = static_cast<int64_t>(stored_rows.size());
  int64_t nblocks = bp[mb];

  TensorStorage s;
  s.kind = FormatKind::Dbsr;
  s.rows = bsr.rows;
  s.cols = bsr.cols;
  s.orig_rows = src.rows;
  s.orig_cols = src.cols;
  s.nnz = src.nnz;
  s.block = b;
  std::string O = prefix + "O", IO = prefix + "IO", JO = prefix + "JO", II = prefix + "II",
              JI = prefix + "JI";
  s.axes.add(dense_fixed(O, 1));
  s.axes.add(sparse_variable(IO, O, mb, nstored, IO + "_indptr", IO + "_indices"));
  s.axes.add(sparse_variable(JO, IO, nb, nblocks, JO + "_indptr", JO + "_indices"));
  s.axes.add(dense_fixed(II, b));
  s.axes.add(dense_fixed(JI, b));
  s.buffer_axes = {O, IO, JO, II, JI};

  IntArray jptr(nstored + 1, 0);
  for (int64_t r = 0; r < nstored; ++r) jptr[r + 1] = bp[stored_rows[r] + 1];
  s.aux[IO + "_indptr"] = {0, static_cast<int32_t>(nstored)};
  s.aux[IO + "_indices"] = std::move(stored_rows);
  s.aux[JO + "_indptr"] = std::move(jptr);
  s.aux[JO + "_indices"] = bi;
  s.values = bsr.values;  // same block order: empty rows hold no blocks
  s.pad_slots = bsr.pad_slots;
  return s;
}

TensorStorage csr_to_srbcrs(const TensorStorage& src, int64_t t, int64_t g,
                            const std::string& prefix) {
  if (t < 1 || g < 1) fail(ErrKind::Usage, "SR-BCRS requires t >= 1 and g >= 1");
  CsrView c = as_csr(src);
  int64_t mb = ceil_div(c.rows, t);

  // Distinct non-zero tile columns per tile row, sorted.
  std::vector<std::vector<int32_t>> tiles(mb);
  for (int64_t i = 0; i < c.rows; ++i)
    for (int32_t p = (*c.indptr)[i]; p < (*c.indptr)[i + 1]; ++p)
      tiles[i / t].push_back((*c.indices)[p]);
  int64_t total_groups = 0;
  int64_t max_groups = 0;
  IntArray gptr(mb + 1, 0);
  for (int64_t r = 0; r < mb; ++r) {
    auto& v = tiles[r];
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
    int64_t ng = v.empty() ? 0 : ceil_div(static_cast<int64_t>(v.size()), g);
    total_groups += ng;
    max_groups = std::max(max_groups, ng);
    gptr[r + 1] = static_cast<int32_t>(total_groups);
  }

  TensorStorage s;
  s.kind = FormatKind::SrBcrs;
  s.rows = mb * t;
  s.cols = c.cols;
  s.orig_rows = c.rows;
  s.orig_cols = c.cols;
  s.nnz = src.nnz;
  s.block = t;
  s.group = g;
  std::string IO = prefix + "IO", G = prefix + "G", JT = prefix + "JT", E = prefix + "E";
  s.axes.add(dense_fixed(IO, mb));
  s.axes.add(dense_variable(G, IO, max_groups, total_groups, G + "_indptr"));
  s.axes.add(sparse_fixed(JT, G, c.cols, g, JT + "_indices"));
  s.axes.add(dense_fixed(E, t));
  s.buffer_axes = {IO, G, JT, E};

  IntArray jind(total_groups * g, 0);
  s.values = TensorData::zeros(src.values.dtype, total_groups * g * t);
  for (int64_t r = 0; r < mb; ++r) {
    const auto& v = tiles[r];
    int32_t pad_col = 0;
    for (size_t k = 0; k < v.size(); ++k) {
      jind[gptr[r] * g + static_cast<int64_t>(k)] = v[k];
      pad_col = v[k];
    }
    for (int64_t k = static_cast<int64_t>(v.size()); k < (gptr[r + 1] - gptr[r]) * g; ++k)
      jind[gptr[r] * g + k] = pad_col;
  }
  // Scatter element values: tile (r, col) slot found by binary search.
  for (int64_t i = 0; i < c.rows; ++i) {
    int64_t r = i / t;
    for (int32_t p = (*c.indptr)[i]; p < (*c.indptr)[i + 1]; ++p) {
      int32_t col = (*c.indices)[p];
      const auto& v = tiles[r];
      int64_t slot = std::lower_bound(v.begin(), v.end(), col) - v.begin();
      int64_t flat = ((gptr[r] * g) + slot) * t + (i % t);
      s.values.set(flat, c.values->get(p));
    }
  }
  s.aux[G + "_indptr"] = std::move(gptr);
  s.aux[JT + "_indices"] = std::move(jind);
  s.pad_slots = total_groups * g * t - src.nnz;
  return s;
}

// ---------------------------------------------------------------------------
// Reconstruction oracles
// ---------------------------------------------------------------------------

DenseMatrix dense_from_coo(const CooMatrix& m) {
  DenseMatrix d(m.rows, m.cols);
  for (const auto& t : m.triplets) d.at(t.row, t.col) += t.value;
  return d;
}

void for_each_stored_cell(const TensorStorage& s,
                          const std::function<void(int64_t, int64_t, double)>& fn) {
  switch (s.kind) {
    case FormatKind::Csr: {
      CsrView c = as_csr(s);
      for (int64_t i = 0; i < c.rows; ++i)
        for (int32_t p = (*c.indptr)[i]; p < (*c.indptr)[i + 1]; ++p)
          fn(i, (*c.indices)[p], c.values->get(p));
      break;
    }
    case FormatKind::Bsr: {
      int64_t b = s.block;
      const Axis& jo = s.axes.at(s.buffer_axes[1]);
      const IntArray& ip = s.arr(jo.indptr_name);
      const IntArray& ix = s.arr(jo.indices_name);
      int64_t mb = s.rows / b;
      for (int64_t br = 0; br < mb; ++br)
        for (int32_t p = ip[br]; p < ip[br + 1]; ++p)
          for (int64_t ii = 0; ii < b; ++ii)
            for (int64_t ji = 0; ji < b; ++ji)
              fn(br * b + ii, ix[p] * b + ji, s.values.get(p * b * b + ii * b + ji));
      break;
    }
    case FormatKind::Ell: {
      const Axis& j = s.axes.at(s.buffer_axes[1]);
      const IntArray& ix = s.arr(j.indices_name);
      int64_t w = j.nnz_cols;
      for (int64_t i = 0; i < s.rows; ++i)
        for (int64_t k = 0; k < w; ++k) {
          if (k > 0 && ix[i * w + k] == ix[i * w + k - 1]) continue;  // padding
          fn(i, ix[i * w + k], s.values.get(i * w + k));
        }
      break;
    }
    case FormatKind::Dbsr: {
      int64_t b = s.block;
      const Axis& io = s.axes.at(s.buffer_axes[1]);
      const Axis& jo = s.axes.at(s.buffer_axes[2]);
      const IntArray& rmap = s.arr(io.indices_name);
      const IntArray& jp = s.arr(jo.indptr_name);
      const IntArray& jx = s.arr(jo.indices_name);
      for (size_t r = 0; r < rmap.size(); ++r)
        for (int32_t p = jp[r]; p < jp[r + 1]; ++p)
          for (int64_t ii = 0; ii < b; ++ii)
            for (int64_t ji = 0; ji < b; ++ji)
              fn(rmap[r] * b + ii, jx[p] * b + ji, s.values.get(p * b * b + ii * b + ji));
      break;
    }
    case FormatKind::SrBcrs: {
      int64_t t = s.block, g = s.group;
      const Axis& ga = s.axes.at(s.buffer_axes[1]);
      const Axis& jt = s.axes.at(s.buffer_axes[2]);
      const IntArray& gp = s.arr(ga.indptr_name);
      const IntArray& jx = s.arr(jt.indices_name);
      int64_t mb = s.rows / t;
      for (int64_t r = 0; r < mb; ++r)
        for (int32_t q = gp[r]; q < gp[r + 1]; ++q)
          for (int64_t sl = 0; sl < g; ++sl) {
            int64_t tile = q * g + sl;
            int64_t row_first = static_cast<int64_t>(gp[r]) * g;
            if (tile > row_first && jx[tile] == jx[tile - 1]) continue;  // padding tile
            for (int64_t e = 0; e < t; ++e) fn(r * t + e, jx[tile], s.values.get(tile * t + e));
          }
      break;
    }
    case FormatKind::EllBucket: {
      const Axis& ia = s.axes.at(s.buffer_axes[1]);
      const Axis& ja = s.axes.at(s.buffer_axes[2]);
      const IntArray& rmap = s.arr(ia.indices_name);
      const IntArray& jx = s.arr(ja.indices_name);
      int64_t w = ja.nnz_cols;
      for (size_t r = 0; r < rmap.size(); ++r)
        for (int64_t k = 0; k < w; ++k) {
          if (k > 0 && jx[r * w + k] == jx[r * w + k - 1]) continue;  // padding
          fn(rmap[r], jx[r * w + k], s.values.get(r * w + k));
        }
      break;
    }
  }
}

DenseMatrix reconstruct_dense(const TensorStorage& s) {
  DenseMatrix d(s.rows, s.cols);
  for_each_stored_cell(s, [&](int64_t i, int64_t j, double v) { d.at(i, j) += v; });
  return d;
}

DenseMatrix reconstruct_dense(const HybDecomposition& h) {
  DenseMatrix d(h.rows, h.cols);
  for (const auto& part : h.parts) {
    DenseMatrix pd = reconstruct_dense(part.ell);
    for (int64_t i = 0; i < d.rows; ++i)
      for (int64_t j = 0; j < d.cols; ++j) d.at(i, j) += pd.at(i, j);
  }
  return d;
}

double padding_ratio(const TensorStorage& s) {
  if (s.kind == FormatKind::Csr)
    fail(ErrKind::Usage, "padding ratio not applicable to CSR storage");
  size_t total = s.values.size();
  return total == 0 ? 0.0 : static_cast<double>(s.pad_slots) / static_cast<double>(total);
}

double padding_ratio(const HybDecomposition& h) { return h.padding_ratio; }

int hyb_auto_k(const TensorStorage& csr) {
  if (csr.rows == 0 || csr.nnz == 0) return 0;
  int64_t avg = ceil_div(csr.nnz, csr.rows);
  return ceil_log2(std::max<int64_t>(1, avg));
}

std::vector<std::string> validate_storage(const TensorStorage& s) {
  std::vector<std::string> out = validate_axes(s.axes.all());
  for (const Axis& a : s.axes.all()) {
    if (a.is_variable()) {
      auto it = s.aux.find(a.indptr_name);
      if (it == s.aux.end()) {
        out.push_back(a.name + ": indptr array missing");
        continue;
      }
      const IntArray& p = it->second;
      if (p.empty() || p.front() != 0) out.push_back(a.name + ": indptr must start at 0");
      for (size_t i = 1; i < p.size(); ++i)
        if (p[i] < p[i - 1]) {
          out.push_back(a.name + ": indptr not non-decreasing");
          break;
        }
      if (!p.empty() && a.nnz >= 0 && p.back() != a.nnz)
        out.push_back(a.name + ": indptr tail != nnz");
    }
    if (a.is_sparse()) {
      auto it = s.aux.find(a.indices_name);
      if (it == s.aux.end()) {
        out.push_back(a.name + ": indices array missing");
        continue;
      }
      const IntArray& ix = it->second;
      bool dup_ok = s.dup_ok_axes.count(a.name) > 0;
      // Determine segment boundaries.
      std::vector<std::pair<size_t, size_t>> segments;
      if (a.kind == AxisKind::SparseVariable) {
        auto pit = s.aux.find(a.indptr_name);
        if (pit != s.aux.end()) {
          const IntArray& p = pit->second;
          for (size_t i = 0; i + 1 < p.size(); ++i)
            segments.emplace_back(p[i], p[i + 1]);
        }
      } else {
        for (size_t lo = 0; lo + a.nnz_cols <= ix.size(); lo += a.nnz_cols)
          segments.emplace_back(lo, lo + a.nnz_cols);
      }
      for (auto [lo, hi] : segments) {
        bool in_pad_run = false;
        for (size_t i = lo; i < hi; ++i) {
          if (ix[i] < 0 || ix[i] >= a.length) {
            out.push_back(a.name + ": index out of range");
            break;
          }
          if (i == lo) continue;
          if (ix[i] < ix[i - 1]) {
            out.push_back(a.name + ": indices not sorted within segment");
            break;
          }
          if (ix[i] == ix[i - 1]) {
            if (!dup_ok) in_pad_run = true;  // only a trailing pad run may repeat
          } else if (in_pad_run) {
            out.push_back(a.name + ": duplicate index inside segment");
            break;
          }
        }
      }
    }
  }
  return out;
}

}  // namespace strata
