/*
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *   http://www.apache.org/licenses/LICENSE-2.0
 */

/*!
 * \file kernels.hpp
 * \brief Built-in stage-I kernel builders (SpMM, SDDMM, RGMS) with dense
 * reference oracles, plus the sparse-convolution-to-RGMS adapter.
 */
#pragma once

#include "strata/ir.hpp"
#include "strata/interp.hpp"
#include "strata/storage.hpp"

namespace strata {

enum class KernelOp { SpMM, SDDMM, RGMS };

struct KernelSpec {
  KernelOp op = KernelOp::SpMM;
  int64_t m = 0, n = 0;        // sparse operand dims
  int64_t d = 0;               // feature size (SpMM/SDDMM)
  int64_t d_in = 0, d_out = 0; // RGMS feature sizes
  int64_t relations = 1;       // RGMS
  DType dtype = DType::F32;
};

/*! \brief 3D sparse operand: per-relation 2D patterns under a relation axis. */
struct RelSparse {
  int64_t relations = 0, rows = 0, cols = 0, nnz = 0;
  AxisTable axes;  // R, I (rows active per relation), J (neighbors)
  std::map<std::string, IntArray> aux;
  TensorData values;
};

RelSparse build_rel_sparse(const std::vector<CooMatrix>& per_relation, DType dtype);
void bind_rel_sparse(Bindings& b, const std::string& buffer_name, const RelSparse& r);
DenseMatrix relation_dense(const RelSparse& r, int64_t rel);

/*!
 * \brief SpMM: Y[i,k] += A[i,j] * X[j,k], A sparse (CSR axes taken from the
 * storage so aux array names line up), X/Y dense.
 */
Program build_spmm(const KernelSpec& spec, const TensorStorage& a_csr);

/*! \brief SDDMM: B[i,j] += A[i,j] * X[i,k] * Y[k,j], (i,j) fused by default. */
Program build_sddmm(const KernelSpec& spec, const TensorStorage& a_csr);

/*! \brief RGMS: Y[i,l] += A[r,i,j] * X[j,k] * W[r,k,l], relation axis outermost. */
Program build_rgms(const KernelSpec& spec, const RelSparse& a);

/*!
 * \brief Dense two-stage reference: T[r] = X W[r], then Y += A_r T[r].
 * Used purely as an oracle.
 */
DenseMatrix two_stage_rgms_oracle(const std::vector<DenseMatrix>& a_rel, const DenseMatrix& x,
                                  const std::vector<DenseMatrix>& w_rel);

/*! \brief Sparse convolution pattern: kernel offsets over integer point coords. */
struct ConvPattern {
  std::vector<std::vector<int>> offsets;  // relative coordinates, one per relation
};

struct ConvAsRgms {
  RelSparse a;       // one relation per offset; each row has at most one non-zero
  KernelSpec spec;   // RGMS spec (relations = #offsets)
  std::vector<std::vector<int>> in_coords, out_coords;
};

/*!
 * \brief Build the RGMS operand equivalent to a sparse convolution: relation r
 * connects output point y to input point y + offset_r when that point exists.
 */
ConvAsRgms conv_to_rgms(const ConvPattern& pattern,
                        const std::vector<std::vector<int>>& in_coords,
                        const std::vector<std::vector<int>>& out_coords, int64_t d_in,
                        int64_t d_out, DType dtype);

}  // namespace strata
