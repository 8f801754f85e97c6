/*
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *   http://www.apache.org/licenses/LICENSE-2.0
 */

/*!
 * \file transform.hpp
 * \brief Composable stage-I transformations: sparse_reorder, sparse_fuse and
 * format decomposition driven by rewrite rules.
 */
#pragma once

#include <map>
#include <string>
#include <vector>

#include "strata/ir.hpp"
#include "strata/storage.hpp"

namespace strata {

/*!
 * \brief A named format rewrite: a new-format description for a target
 * buffer, the axis mapping, and an affine index map with its inverse
 * (A[I] = A'[f(I)], A[f_inv(I')] = A'[I']).
 *
 * Built-in generators also carry the converted storage, so copy iterations
 * can be skipped when data is pre-converted.
 */
struct FormatRewriteRule {
  std::string name;
  std::string target_buffer;
  AxisTable new_axes;                        // dependency-ordered
  std::vector<std::string> new_buffer_axes;  // the new sub-buffer's dims
  std::string new_buffer;

  std::map<std::string, std::vector<std::string>> axis_map;  // orig axis -> new axes

  std::vector<std::string> orig_vars;  // f's domain variables (orig coordinates)
  std::vector<Expr> idx_map;           // f: orig coords -> new coords
  std::vector<std::string> new_vars;   // f_inv's domain variables (new coordinates)
  std::vector<Expr> inv_idx_map;       // f_inv: new coords -> orig coords

  TensorStorage storage;  // converted data (aux arrays + values)
};

/*! \brief Arrays the caller must supply at run time for the new formats. */
struct AuxDataRequest {
  struct Entry {
    std::string array;
    std::string rule;
    int64_t size = 0;
  };
  std::vector<Entry> entries;
};

/*! \brief Reorder the axes of one sparse iteration (ancestors stay first). */
Program sparse_reorder(const Program& p, const std::string& iter_name,
                       const std::vector<std::string>& new_order);

/*! \brief Fuse contiguous chained spatial iterators into one loop over non-zeros. */
Program sparse_fuse(const Program& p, const std::string& iter_name,
                    const std::vector<std::string>& axes);

/*!
 * \brief Rewrite the program's single compute iteration into per-rule copy
 * iterations followed by per-rule compute iterations on the new buffers.
 */
std::pair<Program, AuxDataRequest> decompose_format(const Program& p,
                                                    const std::vector<FormatRewriteRule>& rules);

/*!
 * \brief Mark a decomposed buffer pre-converted: storage already holds its
 * data, so the executor may skip its copy blocks (the copies stay in the IR).
 */
void mark_preconverted(Program& p, const std::string& buffer, bool preconverted);

/*! \brief f_inv(f(I)) == I on sampled in-range points of the rule's claim. */
std::vector<std::string> check_rule_roundtrip(const FormatRewriteRule& rule);

/*!
 * \brief D6 coverage: each original non-zero claimed by exactly one rule and
 * the rule storages reconstruct the original exactly.
 */
std::vector<std::string> verify_coverage(const TensorStorage& original,
                                         const std::vector<FormatRewriteRule>& rules);

// --- built-in rule generators (convert immediately, desk scale) ------------

FormatRewriteRule identity_rule(const TensorStorage& csr, const std::string& name = "csr");
FormatRewriteRule ell_rule(const TensorStorage& csr, int64_t w, const std::string& name = "ell");
FormatRewriteRule bsr_rule(const TensorStorage& csr, int64_t b, const std::string& name = "bsr");
FormatRewriteRule dbsr_rule(const TensorStorage& csr, int64_t b,
                            const std::string& name = "dbsr");
FormatRewriteRule srbcrs_rule(const TensorStorage& csr, int64_t t, int64_t g,
                              const std::string& name = "srbcrs");

/*! \brief c * (k + 1) rules, one per (partition, bucket) ELL sub-matrix. */
std::vector<FormatRewriteRule> hyb_rules(const TensorStorage& csr, int c, int k,
                                         const std::string& name = "hyb");

}  // namespace strata
