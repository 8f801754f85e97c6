/*
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *   http://www.apache.org/licenses/LICENSE-2.0
 */

/*!
 * \file schedule.hpp
 * \brief Composable loop-level schedules for stage-II programs: split,
 * reorder, fuse, annotations, staging (cache_read/cache_write) and rfactor.
 *
 * Loops are addressed as `block.var`: among the loops enclosing `block`,
 * the one whose variable (or bound block variable) is `var`.
 */
#pragma once

#include <string>
#include <vector>

#include "strata/ir.hpp"

namespace strata {

struct LoopRef {
  std::string block;
  std::string var;
};

Program split(const Program& p, const LoopRef& loop, int64_t factor);
Program reorder(const Program& p, const std::vector<LoopRef>& loops);
Program fuse(const Program& p, const std::vector<LoopRef>& loops);
Program annotate(const Program& p, const LoopRef& loop, LoopAnno anno, int factor = 0);
Program cache_read(const Program& p, const std::string& buffer, const std::string& block);
Program cache_write(const Program& p, const std::string& buffer, const std::string& block);
Program rfactor(const Program& p, const LoopRef& loop, int64_t factor);

/*!
 * \brief Apply a line-oriented schedule script:
 *   split blk.j 4
 *   reorder blk.k blk.j
 *   fuse blk.i blk.j
 *   parallel blk.i
 *   unroll blk.k 4
 *   vectorize blk.k 8
 *   cache_read X blk
 *   cache_write Y blk
 *   rfactor blk.k 8
 * Lines starting with '#' are comments.
 */
Program apply_schedule(const Program& p, const std::string& script);

}  // namespace strata
