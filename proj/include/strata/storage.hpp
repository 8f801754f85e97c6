/*
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *   http://www.apache.org/licenses/LICENSE-2.0
 */

/*!
 * \file storage.hpp
 * \brief Concrete sparse tensor storage and format builders/converters.
 *
 * A TensorStorage holds the auxiliary integer arrays (indptr/indices, keyed
 * by the names carried on its axes) and a flat value array. Builders are pure
 * functions; storage is immutable after construction.
 */
#pragma once

#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "strata/axis.hpp"
#include "strata/common.hpp"

namespace strata {

using IntArray = std::vector<int32_t>;

/*! \brief Flat value array tagged with its element type. */
struct TensorData {
  DType dtype = DType::F64;
  std::vector<int32_t> i32;
  std::vector<float> f32;
  std::vector<double> f64;

  static TensorData zeros(DType t, size_t n);
  size_t size() const;
  double get(size_t i) const;
  void set(size_t i, double v);
};

struct Triplet {
  int64_t row = 0, col = 0;
  double value = 0.0;
};

struct CooMatrix {
  int64_t rows = 0, cols = 0;
  std::vector<Triplet> triplets;
  DType value_dtype = DType::F64;
};

struct DenseMatrix {
  int64_t rows = 0, cols = 0;
  std::vector<double> v;

  DenseMatrix() = default;
  DenseMatrix(int64_t r, int64_t c) : rows(r), cols(c), v(r * c, 0.0) {}
  double& at(int64_t i, int64_t j) { return v[i * cols + j]; }
  double at(int64_t i, int64_t j) const { return v[i * cols + j]; }
};

enum class FormatKind { Csr, Bsr, Ell, Dbsr, SrBcrs, EllBucket };

const char* format_kind_name(FormatKind k);

struct TensorStorage {
  FormatKind kind = FormatKind::Csr;
  AxisTable axes;                        // format spec: all axes, dependency order
  std::vector<std::string> buffer_axes;  // axes composing the value buffer
  std::map<std::string, IntArray> aux;   // keyed by indptr_name / indices_name
  TensorData values;

  int64_t rows = 0, cols = 0;            // matrix view dims (after padding)
  int64_t orig_rows = 0, orig_cols = 0;  // before padding
  int64_t nnz = 0;                       // original stored non-zeros
  int64_t pad_slots = 0;                 // structurally zero slots
  int64_t block = 1;                     // b (BSR/DBSR) or t (SR-BCRS)
  int64_t group = 1;                     // g (SR-BCRS)

  // Sparse axes whose index arrays may repeat a coordinate inside a segment
  // (row remaps under bucket splitting). Everything else must be strictly
  // increasing up to the trailing pad run, as binary search requires.
  std::set<std::string> dup_ok_axes;

  const IntArray& arr(const std::string& name) const;
};

/*! \brief One (partition, bucket) ELL sub-matrix of a hyb decomposition. */
struct EllBucketPart {
  int partition = 0;
  int bucket = 0;
  int64_t width = 1;  // 2^bucket
  int64_t col_lo = 0, col_hi = 0;
  TensorStorage ell;  // axes O (dense 1), I (sparse-var row remap), J (sparse-fixed)
};

struct HybDecomposition {
  int64_t rows = 0, cols = 0;
  int c = 1, k = 0;
  std::vector<EllBucketPart> parts;  // partition-major, bucket ascending
  double padding_ratio = 0.0;
};

// --- builders --------------------------------------------------------------

/*! \brief CSR with sorted column indices per row. Rejects duplicates. */
TensorStorage build_csr(const CooMatrix& m, const std::string& prefix = "");

/*! \brief Triplets of a CSR storage (stored zeros preserved). */
CooMatrix csr_to_coo(const TensorStorage& s);

/*! \brief BSR with block size b; dims padded up to multiples of b. */
TensorStorage csr_to_bsr(const TensorStorage& s, int64_t b, const std::string& prefix = "");

/*!
 * \brief ELL with exactly w slots per row; short rows padded with the row's
 * last real column index (0 for empty rows) and value 0. Errors if any row
 * holds more than w non-zeros.
 */
TensorStorage csr_to_ell(const TensorStorage& s, int64_t w, const std::string& prefix = "");

/*!
 * \brief hyb(c, k): c column partitions; within each, rows of length l go to
 * bucket i with 2^(i-1) < l <= 2^i (l = 1 goes to bucket 0), padded to 2^i.
 * Rows longer than 2^k split into ceil(l / 2^k) segments in bucket k.
 */
HybDecomposition decompose_hyb(const TensorStorage& s, int c, int k,
                               const std::string& prefix = "");

/*! \brief BSR with the block-row dimension itself compressed (zero rows skipped). */
TensorStorage csr_to_dbsr(const TensorStorage& s, int64_t b, const std::string& prefix = "");

/*!
 * \brief SR-BCRS(t, g): t x 1 tiles, all-zero tiles omitted, non-zero tiles of
 * a tile row grouped by g with trailing groups padded by zero tiles.
 */
TensorStorage csr_to_srbcrs(const TensorStorage& s, int64_t t, int64_t g,
                            const std::string& prefix = "");

/*! \brief Assemble one ELL bucket sub-matrix from (row id, columns) segments. */
TensorStorage build_ell_bucket(int64_t rows, int64_t cols, int64_t width,
                               const std::vector<std::pair<int32_t, std::vector<int32_t>>>& segs,
                               DType dtype, const std::vector<double>& seg_values,
                               const std::string& prefix);

// --- oracles and accounting ------------------------------------------------

/*!
 * \brief Visit every stored matrix cell (i, j, value) of the storage,
 * skipping padding slots. Block formats visit whole block interiors.
 */
void for_each_stored_cell(const TensorStorage& s,
                          const std::function<void(int64_t, int64_t, double)>& fn);

/*! \brief Dense matrix at the storage's (padded) dims; padding contributes 0. */
DenseMatrix reconstruct_dense(const TensorStorage& s);
DenseMatrix reconstruct_dense(const HybDecomposition& h);

DenseMatrix dense_from_coo(const CooMatrix& m);

/*! \brief padded zero slots / total stored slots. Errors for CSR (no padding). */
double padding_ratio(const TensorStorage& s);
double padding_ratio(const HybDecomposition& h);

/*! \brief Check storage invariants (monotone indptr, sorted indices, sizes). */
std::vector<std::string> validate_storage(const TensorStorage& s);

/*! \brief Heuristic bucket cap: k = ceil(log2(nnz / rows)), at least 0. */
int hyb_auto_k(const TensorStorage& csr);

}  // namespace strata
