/*
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *   http://www.apache.org/licenses/LICENSE-2.0
 */

/*!
 * \file lower.hpp
 * \brief The two compiler passes: sparse iteration lowering (stage I -> II)
 * and sparse buffer lowering (stage II -> III).
 *
 * Sparse iteration lowering proceeds in four steps: auxiliary buffer
 * materialization, nested loop generation, coordinate translation, and
 * read/write region analysis. Sparse buffer lowering flattens every
 * multi-dimensional access to a one-dimensional offset and erases axes.
 */
#pragma once

#include "strata/ir.hpp"

namespace strata {

/*! \brief Declare indptr/indices arrays as flat integer buffers with domain hints. */
Program materialize_aux_buffers(const Program& p);

/*! \brief Restructure sparse iterations as nested loops separated by blocks. */
Program generate_nested_loops(const Program& p);

/*! \brief Rewrite buffer access indices from coordinate space to position space. */
Program translate_coordinates(const Program& p);

/*! \brief Attach read/write buffer regions to every block. */
Program analyze_regions(const Program& p);

/*! \brief All four steps in order; advances the stage marker to II. */
Program lower_sparse_iteration(const Program& p);

/*! \brief Flatten buffers to one dimension and erase axes; stage marker III. */
Program lower_sparse_buffers(const Program& p);

/*!
 * \brief Build the flat offset expression for an access to `buf` with
 * per-dimension position indices `xs` (the Eq. 6 sum of offset * stride over
 * leaf axes). Exposed for tests.
 */
Expr flatten_access(const Program& p, const BufferDecl& buf, const std::vector<Expr>& xs);

}  // namespace strata
