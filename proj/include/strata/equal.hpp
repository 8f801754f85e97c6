/*
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *   http://www.apache.org/licenses/LICENSE-2.0
 */

/*!
 * \file equal.hpp
 * \brief Structural program equality, alpha-equivalent over bound variables.
 */
#pragma once

#include "strata/ir.hpp"

namespace strata {

bool structural_equal(const Expr& a, const Expr& b);
bool structural_equal(const Stmt& a, const Stmt& b);
bool structural_equal(const Program& a, const Program& b);

}  // namespace strata
