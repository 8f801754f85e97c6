/*
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *   http://www.apache.org/licenses/LICENSE-2.0
 */

/*!
 * \file tune.hpp
 * \brief Grid search over the joint format/schedule space with a timing
 * harness (warmup runs discarded, median over repeats).
 */
#pragma once

#include <string>
#include <vector>

#include "strata/driver.hpp"

namespace strata {

struct SearchSpace {
  std::vector<std::string> formats;    // e.g. {"csr", "hyb:c=1", "hyb:c=2", ...}
  std::vector<std::string> schedules;  // schedule scripts ("" = unscheduled)

  /*! \brief The paper-shaped default: c over {1,2,4,8,16} with k fixed by
   * ceil(log2(nnz/n)) (k0 < 0 = resolve per matrix), optionally scanning
   * k0 +/- 1, plus the untuned CSR baseline. */
  static SearchSpace hyb_c_grid(int k0 = -1, bool scan_k = false, bool include_csr = true);
};

struct SearchPoint {
  int id = 0;
  std::string format;
  std::string schedule;
};

struct TrialResult {
  SearchPoint point;
  double median_ns = 0.0;
  int64_t flops = 0;
  int64_t loads = 0;
  bool valid = false;    // built, lowered and passed the oracle gate
  bool correct = false;  // oracle equivalence before timing
  double padding = 0.0;  // padding ratio of the converted storage (0 for csr)
  double balance = 1.0;  // max/mean real row work across buckets (hyb only)
  std::string error;
};

struct TuneReport {
  std::vector<TrialResult> trials;
  int best = -1;  // index into trials; min median among correct points
};

std::vector<SearchPoint> enumerate(const SearchSpace& space);

/*!
 * \brief Run every point: verify against the dense oracle once, then time
 * `repeats` runs after `warmup` discarded runs; the per-point metric is the
 * median wall time. Points that fail the gate are never selected.
 */
TuneReport run_trials(KernelOp op, const CooMatrix& m, int64_t d, DType dtype,
                      const SearchSpace& space, int repeats = 100, int warmup = 10,
                      bool flush_cache = false, uint64_t seed = 1);

std::string report_json(const TuneReport& report);

}  // namespace strata
