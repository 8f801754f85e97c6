/*
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *   http://www.apache.org/licenses/LICENSE-2.0
 */

/*!
 * \file driver.hpp
 * \brief Pipeline assembly: matrix -> program -> decompose -> lower ->
 * schedule -> stage III, with bindings and oracle verification.
 */
#pragma once

#include <optional>
#include <string>

#include "strata/kernels.hpp"
#include "strata/transform.hpp"

namespace strata {

/*! \brief Parsed format request, e.g. "hyb:c=2,k=3" or "bsr:b=2". */
struct FormatRequest {
  std::string kind = "csr";  // csr | bsr | ell | dbsr | srbcrs | hyb
  int64_t b = 2;             // bsr/dbsr block
  int64_t w = 0;             // ell width (0 = max row length)
  int64_t t = 2, g = 2;      // srbcrs
  int c = 1;                 // hyb partitions
  int k = -1;                // hyb max bucket exponent (-1 = auto)

  static FormatRequest parse(const std::string& text);
  std::string str() const;
};

struct PipelineOptions {
  std::string schedule_script;  // applied at stage II
  bool preconverted = true;     // bind converted storage, skip copy blocks
  ExecMode mode = ExecMode::Release;
  int threads = 1;
};

struct Pipeline {
  KernelSpec spec;
  Program stage1;  // after decomposition (if any)
  Program stage2;
  Program stage3;
  Bindings bindings;
  ExecOptions exec_opts;
  std::vector<FormatRewriteRule> rules;

  // How to read the result: dense output buffer, or positional values that
  // reconstruct through a storage pattern.
  std::string output_buffer;
  int64_t out_rows = 0, out_cols = 0;
  std::optional<TensorStorage> output_pattern;  // SDDMM: B shares A's structure

  DenseMatrix run_dense();  // interpret stage3 and return the dense output
};

/*! \brief SpMM or SDDMM pipeline over a matrix in the requested format. */
Pipeline build_matrix_pipeline(KernelOp op, const CooMatrix& m, int64_t d, DType dtype,
                               const FormatRequest& fmt, const PipelineOptions& opts);

/*! \brief RGMS pipeline; per-relation decomposition in the requested format. */
Pipeline build_rgms_pipeline(const std::vector<CooMatrix>& relations, int64_t d_in,
                             int64_t d_out, DType dtype, const FormatRequest& fmt,
                             const PipelineOptions& opts,
                             const std::vector<DenseMatrix>* w_override = nullptr,
                             const DenseMatrix* x_override = nullptr, uint64_t seed = 7);

struct VerifyResult {
  bool pass = true;
  std::string detail;  // first divergence, when failing
};

/*! \brief Run the pipeline and compare against the dense oracle. */
VerifyResult verify_pipeline(KernelOp op, const CooMatrix& m, int64_t d, DType dtype,
                             const FormatRequest& fmt, const PipelineOptions& opts,
                             uint64_t seed);

/*! \brief Deterministic matrix generators for the CLI and the tuner. */
CooMatrix generate_matrix(const std::string& kind, int64_t n, int64_t m, double density,
                          int64_t band, int64_t block, double avg_degree, uint64_t seed);

}  // namespace strata
