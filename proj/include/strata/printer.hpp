/*
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *   http://www.apache.org/licenses/LICENSE-2.0
 */

/*!
 * \file printer.hpp
 * \brief Deterministic textual rendering of programs; inverse of parse().
 */
#pragma once

#include <string>

#include "strata/ir.hpp"

namespace strata {

std::string print_expr(const Expr& e);
std::string print_stmt(const Stmt& s, int indent = 0);
std::string print_program(const Program& p);

}  // namespace strata
