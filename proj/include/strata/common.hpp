/*
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *   http://www.apache.org/licenses/LICENSE-2.0
 */

/*!
 * \file common.hpp
 * \brief Shared scalar types and the error hierarchy.
 */
#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace strata {

/*! \brief Value/element data types supported by buffers and storage. */
enum class DType { I32, F32, F64 };

inline const char* dtype_name(DType t) {
  switch (t) {
    case DType::I32: return "i32";
    case DType::F32: return "f32";
    case DType::F64: return "f64";
  }
  return "?";
}

inline bool dtype_is_float(DType t) { return t != DType::I32; }

/*! \brief Error categories, mapped to CLI exit codes by the front end. */
enum class ErrKind {
  Validation,  // malformed program/axes/storage
  Schedule,    // illegal schedule request
  Lowering,    // pass cannot lower the construct
  Capacity,    // format cannot hold the data (e.g. ELL row overflow)
  Lookup,      // name resolution failure
  Usage,       // bad user arguments
  Exec,        // runtime failure during interpretation
  Internal,
};

class Error : public std::runtime_error {
 public:
  Error(ErrKind k, const std::string& msg) : std::runtime_error(msg), kind(k) {}
  ErrKind kind;
};

[[noreturn]] inline void fail(ErrKind k, const std::string& msg) { throw Error(k, msg); }

inline int64_t ceil_div(int64_t a, int64_t b) { return (a + b - 1) / b; }

/*! \brief ceil(log2(x)) for x >= 1. */
inline int ceil_log2(int64_t x) {
  int i = 0;
  int64_t v = 1;
  while (v < x) {
    v <<= 1;
    ++i;
  }
  return i;
}

}  // namespace strata
