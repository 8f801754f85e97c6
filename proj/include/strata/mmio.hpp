/*
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *   http://www.apache.org/licenses/LICENSE-2.0
 */

/*!
 * \file mmio.hpp
 * \brief Matrix Market coordinate format reader/writer (1-based indices).
 */
#pragma once

#include <iosfwd>
#include <string>

#include "strata/storage.hpp"

namespace strata {

CooMatrix read_matrix_market(std::istream& in);
CooMatrix read_matrix_market_file(const std::string& path);

void write_matrix_market(std::ostream& out, const CooMatrix& m);
void write_matrix_market_file(const std::string& path, const CooMatrix& m);

}  // namespace strata
