/*
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *   http://www.apache.org/licenses/LICENSE-2.0
 */

/*!
 * \file axis.hpp
 * \brief Axes: the metadata layer that defines sparse iteration spaces.
 *
 * An axis is one dimension of a sparse iteration space. It carries two
 * orthogonal attributes (dense/sparse, fixed/variable), an optional parent
 * link, and the names of the auxiliary arrays (indptr/indices) that realize
 * it in storage. Formats and iteration spaces are composed from axes.
 */
#pragma once

#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "strata/common.hpp"

namespace strata {

enum class AxisKind { DenseFixed, DenseVariable, SparseFixed, SparseVariable };

inline bool axis_is_dense(AxisKind k) {
  return k == AxisKind::DenseFixed || k == AxisKind::DenseVariable;
}
inline bool axis_is_sparse(AxisKind k) { return !axis_is_dense(k); }
inline bool axis_is_variable(AxisKind k) {
  return k == AxisKind::DenseVariable || k == AxisKind::SparseVariable;
}
inline bool axis_is_fixed(AxisKind k) { return !axis_is_variable(k); }

const char* axis_kind_name(AxisKind k);

struct Axis {
  std::string name;
  AxisKind kind = AxisKind::DenseFixed;
  std::string parent;        // empty = root
  int64_t length = 0;        // maximum coordinate-space extent
  int64_t nnz = -1;          // total positions across this dimension (variable axes)
  int64_t nnz_cols = -1;     // positions per segment (sparse-fixed axes)
  std::string indptr_name;   // required when variable
  std::string indices_name;  // required when sparse
  DType index_dtype = DType::I32;

  bool is_dense() const { return axis_is_dense(kind); }
  bool is_sparse() const { return axis_is_sparse(kind); }
  bool is_variable() const { return axis_is_variable(kind); }
  bool is_fixed() const { return axis_is_fixed(kind); }
  bool is_root() const { return parent.empty(); }
};

Axis dense_fixed(std::string name, int64_t length);
Axis dense_variable(std::string name, std::string parent, int64_t length, int64_t nnz,
                    std::string indptr_name);
Axis sparse_fixed(std::string name, std::string parent, int64_t length, int64_t nnz_cols,
                  std::string indices_name);
Axis sparse_variable(std::string name, std::string parent, int64_t length, int64_t nnz,
                     std::string indptr_name, std::string indices_name);

/*!
 * \brief Ordered axis list with name lookup. Duplicate names are rejected.
 *
 * Immutable by convention once a program is built; all transformations copy.
 */
class AxisTable {
 public:
  AxisTable() = default;

  int add(const Axis& a);
  bool contains(const std::string& name) const { return index_.count(name) > 0; }
  int index_of(const std::string& name) const;
  const Axis& at(const std::string& name) const { return axes_[index_of(name)]; }
  const Axis& at(int i) const { return axes_[i]; }
  size_t size() const { return axes_.size(); }
  const std::vector<Axis>& all() const { return axes_; }

 private:
  std::vector<Axis> axes_;
  std::unordered_map<std::string, int> index_;
};

/*!
 * \brief Collect indices of ancestor axes (including self) on the path from
 * the root to axes[i]. The last element is always i.
 *
 * Throws a dependency error if a parent is not present in the list.
 */
std::vector<int> anc(const std::vector<Axis>& axes, int i);

/*! \brief Check every axis invariant; returns all violations, never throws. */
std::vector<std::string> validate_axes(const std::vector<Axis>& axes);

/*!
 * \brief Total number of absolute positions in the space rooted at the axis
 * chain ending at `a` (e.g. nnz for a variable axis, parent-space * width for
 * a fixed one). Parents are resolved through `table`.
 */
int64_t axis_space(const AxisTable& table, const Axis& a);

/*! \brief A buffer's format: the ordered axes composing its dimensions. */
struct FormatSpec {
  std::vector<std::string> axes;
};

}  // namespace strata
