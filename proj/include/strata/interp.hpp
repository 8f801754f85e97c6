/*
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *   http://www.apache.org/licenses/LICENSE-2.0
 */

/*!
 * \file interp.hpp
 * \brief Reference executor: a tree-walking interpreter for stage-III
 * programs with deterministic results and an optional checked mode.
 */
#pragma once

#include <map>
#include <string>

#include "strata/ir.hpp"
#include "strata/storage.hpp"

namespace strata {

/*! \brief Buffer name -> flat array; scalar param -> value. */
struct Bindings {
  std::map<std::string, TensorData> buffers;
  std::map<std::string, int64_t> scalars;
};

enum class ExecMode { Checked, Release };

struct ExecStats {
  int64_t loads = 0;
  int64_t stores = 0;
  int64_t flops = 0;
};

struct ExecReport {
  Bindings outputs;  // Output-role buffers after execution
  ExecStats stats;
  std::vector<std::string> violations;  // non-empty only in checked mode

  bool ok() const { return violations.empty(); }
};

struct ExecOptions {
  ExecMode mode = ExecMode::Release;
  bool skip_copy_blocks = false;  // storage pre-converted (D7)
  int threads = 1;                // >1 parallelizes annotated disjoint loops
};

/*!
 * \brief Execute a stage-III program. Output and temp buffers are
 * zero-initialized; parallel loops produce the same bytes as the sequential
 * ascending order.
 */
ExecReport interpret(const Program& p, const Bindings& b, const ExecOptions& opts = {});

/*! \brief True if every store in the loop body is index-disjoint in the loop var. */
bool loop_parallel_safe(const Stmt& loop_stmt);

/*! \brief Copy a storage's aux arrays and values into bindings under `buffer_name`. */
void bind_storage(Bindings& b, const std::string& buffer_name, const TensorStorage& s);

}  // namespace strata
