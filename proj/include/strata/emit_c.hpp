/*
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *   http://www.apache.org/licenses/LICENSE-2.0
 */

/*!
 * \file emit_c.hpp
 * \brief C source emission for stage-III programs.
 *
 * One translation unit per program: a function taking flat arrays and scalar
 * parameters in declaration order. Integer kernels compiled from the emitted
 * source produce bit-identical results to the interpreter.
 */
#pragma once

#include <string>

#include "strata/ir.hpp"

namespace strata {

std::string emit_c(const Program& p);

}  // namespace strata
