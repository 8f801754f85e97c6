/*
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *   http://www.apache.org/licenses/LICENSE-2.0
 */

/*!
 * \file parser.hpp
 * \brief Parser for the textual IR; round-trips with print_program.
 */
#pragma once

#include <optional>
#include <string>
#include <vector>

#include "strata/ir.hpp"

namespace strata {

struct Diagnostic {
  int line = 0;
  int col = 0;
  std::string message;

  std::string str() const {
    return std::to_string(line) + ":" + std::to_string(col) + ": " + message;
  }
};

struct ParseResult {
  std::optional<Program> program;
  std::vector<Diagnostic> diagnostics;

  bool ok() const { return program.has_value() && diagnostics.empty(); }
};

ParseResult parse_program(const std::string& text);

}  // namespace strata
