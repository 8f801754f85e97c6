/*
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *   http://www.apache.org/licenses/LICENSE-2.0
 */

#include "strata/axis.hpp"

#include <algorithm>
#include <unordered_set>

namespace strata {

const char* axis_kind_name(AxisKind k) {
  switch (k) {
    case AxisKind::DenseFixed: return "dense_fixed";
    case AxisKind::DenseVariable: return "dense_variable";
    case AxisKind::SparseFixed: return "sparse_fixed";
    case AxisKind::SparseVariable: return "sparse_variable";
  }
  return "?";
}

Axis dense_fixed(std::string name, int64_t length) {
  Axis a;
  a.name = std::move(name);
  a.kind = AxisKind::DenseFixed;
  a.length = length;
  return a;
}

Axis dense_variable(std::string name, std::string parent, int64_t length, int64_t nnz,
                    std::string indptr_name) {
  Axis a;
  a.name = std::move(name);
  a.kind = AxisKind::DenseVariable;
  a.parent = std::move(parent);
  a.length = length;
  a.nnz = nnz;
  a.indptr_name = std::move(indptr_name);
  return a;
}

Axis sparse_fixed(std::string name, std::string parent, int64_t length, int64_t nnz_cols,
                  std::string indices_name) {
  Axis a;
  a.name = std::move(name);
  a.kind = AxisKind::SparseFixed;
  a.parent = std::move(parent);
  a.length = length;
  a.nnz_cols = nnz_cols;
  a.indices_name = std::move(indices_name);
  return a;
}

Axis sparse_variable(std::string name, std::string parent, int64_t length, int64_t nnz,
                     std::string indptr_name, std::string indices_name) {
  Axis a;
  a.name = std::move(name);
  a.kind = AxisKind::SparseVariable;
  a.parent = std::move(parent);
  a.length = length;
  a.nnz = nnz;
  a.indptr_name = std::move(indptr_name);
  a.indices_name = std::move(indices_name);
  return a;
}

int AxisTable::add(const Axis& a) {
  if (index_.count(a.name)) fail(ErrKind::Validation, "duplicate axis name: " + a.name);
  int id = static_cast<int>(axes_.size());
  axes_.push_back(a);
  index_[a.name] = id;
  return id;
}

int AxisTable::index_of(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) fail(ErrKind::Lookup, "unknown axis: " + name);
  return it->second;
}

std::vector<int> anc(const std::vector<Axis>& axes, int i) {
  if (i < 0 || i >= static_cast<int>(axes.size()))
    fail(ErrKind::Lookup, "anc: axis index out of range");
  std::vector<int> path;
  int cur = i;
  // Walk parent links to the root, then reverse.
  for (;;) {
    path.push_back(cur);
    const Axis& a = axes[cur];
    if (a.is_root()) break;
    int next = -1;
    for (int j = 0; j < static_cast<int>(axes.size()); ++j) {
      if (axes[j].name == a.parent) {
        next = j;
        break;
      }
    }
    if (next < 0)
      fail(ErrKind::Validation, "anc: parent '" + a.parent + "' of axis '" + a.name +
                                    "' not found in list");
    if (static_cast<int>(path.size()) > static_cast<int>(axes.size()))
      fail(ErrKind::Validation, "anc: cycle through axis '" + a.name + "'");
    cur = next;
  }
  std::reverse(path.begin(), path.end());
  return path;
}

std::vector<std::string> validate_axes(const std::vector<Axis>& axes) {
  std::vector<std::string> out;
  std::unordered_map<std::string, int> pos;
  for (int i = 0; i < static_cast<int>(axes.size()); ++i) {
    const Axis& a = axes[i];
    if (pos.count(a.name)) out.push_back(a.name + ": duplicate axis name");
    pos[a.name] = i;
  }
  for (int i = 0; i < static_cast<int>(axes.size()); ++i) {
    const Axis& a = axes[i];
    if (a.kind == AxisKind::DenseFixed && !a.parent.empty())
      out.push_back(a.name + ": dense-fixed axis must have no parent");
    if (a.is_variable() && a.indptr_name.empty())
      out.push_back(a.name + ": missing indptr (variable axis)");
    if (a.is_sparse() && a.indices_name.empty())
      out.push_back(a.name + ": missing indices (sparse axis)");
    if (a.is_dense() && !a.indices_name.empty())
      out.push_back(a.name + ": dense axis must not carry indices");
    if (a.is_variable() && a.nnz < 0) out.push_back(a.name + ": missing nnz (variable axis)");
    if (a.kind == AxisKind::SparseFixed) {
      if (a.nnz_cols < 0)
        out.push_back(a.name + ": missing nnz_cols (sparse-fixed axis)");
      else if (a.nnz_cols > a.length)
        out.push_back(a.name + ": nnz_cols exceeds length");
    }
    if (a.length < 0) out.push_back(a.name + ": negative length");
    if (!a.parent.empty()) {
      auto it = pos.find(a.parent);
      if (it == pos.end()) {
        out.push_back(a.name + ": parent '" + a.parent + "' not declared");
      } else if (it->second >= i) {
        out.push_back(a.name + ": parent '" + a.parent + "' declared after child");
      }
    }
  }
  // Cycle check over the parent forest (declaration order already forbids
  // forward references, so cycles can only appear through duplicate names;
  // still, walk defensively with a visited cap).
  for (int i = 0; i < static_cast<int>(axes.size()); ++i) {
    int steps = 0;
    const Axis* cur = &axes[i];
    while (!cur->is_root()) {
      auto it = pos.find(cur->parent);
      if (it == pos.end()) break;
      cur = &axes[it->second];
      if (++steps > static_cast<int>(axes.size())) {
        out.push_back(axes[i].name + ": cycle in parent links");
        break;
      }
    }
  }
  return out;
}

int64_t axis_space(const AxisTable& table, const Axis& a) {
  switch (a.kind) {
    case AxisKind::DenseFixed:
      return a.length;
    case AxisKind::DenseVariable:
    case AxisKind::SparseVariable:
      if (a.nnz < 0) fail(ErrKind::Validation, a.name + ": nnz required to compute space");
      return a.nnz;
    case AxisKind::SparseFixed: {
      if (a.parent.empty()) return a.nnz_cols;
      const Axis& p = table.at(a.parent);
      return axis_space(table, p) * a.nnz_cols;
    }
  }
  return 0;
}

}  // namespace strata
