/*
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *   http://www.apache.org/licenses/LICENSE-2.0
 */

#include "strata/equal.hpp"

#include <unordered_map>

namespace strata {

namespace {

/*! \brief Bijective renaming between bound variables of the two sides. */
struct VarMap {
  std::unordered_map<std::string, std::string> a2b, b2a;

  bool bind(const std::string& a, const std::string& b) {
    auto ia = a2b.find(a);
    auto ib = b2a.find(b);
    if (ia == a2b.end() && ib == b2a.end()) {
      a2b[a] = b;
      b2a[b] = a;
      return true;
    }
    return ia != a2b.end() && ib != b2a.end() && ia->second == b && ib->second == a;
  }

  bool same(const std::string& a, const std::string& b) const {
    auto it = a2b.find(a);
    if (it != a2b.end()) return it->second == b;
    // Free variables (parameters) compare literally.
    return b2a.find(b) == b2a.end() && a == b;
  }
};

bool eq_expr(const Expr& a, const Expr& b, const VarMap& m) {
  if (!a || !b) return a == b;
  if (a->kind != b->kind) return false;
  switch (a->kind) {
    case ExprKind::IntConst: return a->ival == b->ival;
    case ExprKind::FloatConst: return a->fval == b->fval;
    case ExprKind::Var: return m.same(a->name, b->name);
    case ExprKind::BufferLoad:
      if (a->name != b->name) return false;
      break;
    case ExprKind::Compare:
      if (a->cmp != b->cmp) return false;
      break;
    default: break;
  }
  if (a->args.size() != b->args.size()) return false;
  for (size_t i = 0; i < a->args.size(); ++i)
    if (!eq_expr(a->args[i], b->args[i], m)) return false;
  return true;
}

bool eq_region(const std::vector<BufferRegion>& a, const std::vector<BufferRegion>& b,
               const VarMap& m) {
  if (a.size() != b.size()) return false;
  for (size_t i = 0; i < a.size(); ++i) {
    if (a[i].buffer != b[i].buffer || a[i].dims.size() != b[i].dims.size()) return false;
    for (size_t d = 0; d < a[i].dims.size(); ++d)
      if (!eq_expr(a[i].dims[d].min, b[i].dims[d].min, m) ||
          !eq_expr(a[i].dims[d].extent, b[i].dims[d].extent, m))
        return false;
  }
  return true;
}

bool eq_stmt(const Stmt& a, const Stmt& b, VarMap m);

bool eq_body(const Stmt& a, const Stmt& b, VarMap& m) {
  // Sequences must match element-wise, threading search-result bindings.
  auto items = [](const Stmt& s) {
    return s && s->kind == StmtKind::SeqStmts ? s->seq : std::vector<Stmt>{s};
  };
  std::vector<Stmt> xs = items(a), ys = items(b);
  if (xs.size() != ys.size()) return false;
  for (size_t i = 0; i < xs.size(); ++i) {
    if (!eq_stmt(xs[i], ys[i], m)) return false;
    if (xs[i] && xs[i]->kind == StmtKind::BinarySearchBlock) {
      if (!m.bind(xs[i]->result_var, ys[i]->result_var)) return false;
      if (xs[i]->guarded && !m.bind(xs[i]->found_var, ys[i]->found_var)) return false;
    }
  }
  return true;
}

bool eq_stmt(const Stmt& a, const Stmt& b, VarMap m) {
  if (!a || !b) return a == b;
  if (a->kind != b->kind) return false;
  switch (a->kind) {
    case StmtKind::BufferStore: {
      if (a->buffer != b->buffer || a->reduce != b->reduce ||
          a->indices.size() != b->indices.size())
        return false;
      for (size_t i = 0; i < a->indices.size(); ++i)
        if (!eq_expr(a->indices[i], b->indices[i], m)) return false;
      return eq_expr(a->value, b->value, m);
    }
    case StmtKind::SeqStmts:
      return eq_body(a, b, m);
    case StmtKind::SparseIteration: {
      if (a->name != b->name || a->is_format_copy != b->is_format_copy ||
          a->iters.size() != b->iters.size() || a->fuse_groups != b->fuse_groups)
        return false;
      for (size_t i = 0; i < a->iters.size(); ++i) {
        if (a->iters[i].axis != b->iters[i].axis || a->iters[i].kind != b->iters[i].kind)
          return false;
        if (!m.bind(a->iters[i].var, b->iters[i].var)) return false;
      }
      return eq_body(a->body, b->body, m);
    }
    case StmtKind::Loop: {
      if (a->anno != b->anno || a->anno_factor != b->anno_factor) return false;
      if (!eq_expr(a->extent, b->extent, m)) return false;
      if (!m.bind(a->loop_var, b->loop_var)) return false;
      return eq_body(a->body, b->body, m);
    }
    case StmtKind::Block: {
      if (a->name != b->name || a->is_copy_block != b->is_copy_block ||
          a->bindings.size() != b->bindings.size())
        return false;
      for (size_t i = 0; i < a->bindings.size(); ++i) {
        if (a->bindings[i].kind != b->bindings[i].kind ||
            a->bindings[i].axis != b->bindings[i].axis)
          return false;
        if (!eq_expr(a->bindings[i].bind, b->bindings[i].bind, m)) return false;
        if (!m.bind(a->bindings[i].var, b->bindings[i].var)) return false;
      }
      if (!eq_region(a->reads, b->reads, m) || !eq_region(a->writes, b->writes, m)) return false;
      if ((a->init == nullptr) != (b->init == nullptr)) return false;
      if (a->init && !eq_stmt(a->init, b->init, m)) return false;
      return eq_body(a->body, b->body, m);
    }
    case StmtKind::BinarySearchBlock: {
      if (a->search_buffer != b->search_buffer || a->search_mode != b->search_mode ||
          a->guarded != b->guarded)
        return false;
      return eq_expr(a->key, b->key, m) && eq_expr(a->seg_lo, b->seg_lo, m) &&
             eq_expr(a->seg_hi, b->seg_hi, m);
    }
  }
  return false;
}

bool eq_axis(const Axis& a, const Axis& b) {
  return a.name == b.name && a.kind == b.kind && a.parent == b.parent && a.length == b.length &&
         a.nnz == b.nnz && a.nnz_cols == b.nnz_cols && a.indptr_name == b.indptr_name &&
         a.indices_name == b.indices_name && a.index_dtype == b.index_dtype;
}

}  // namespace

bool structural_equal(const Expr& a, const Expr& b) { return eq_expr(a, b, VarMap{}); }

bool structural_equal(const Stmt& a, const Stmt& b) {
  VarMap m;
  return eq_body(a, b, m);
}

bool structural_equal(const Program& a, const Program& b) {
  if (a.name != b.name || a.stage != b.stage) return false;
  if (a.axes.size() != b.axes.size() || a.buffers.size() != b.buffers.size() ||
      a.params.size() != b.params.size())
    return false;
  for (size_t i = 0; i < a.axes.size(); ++i)
    if (!eq_axis(a.axes.at(static_cast<int>(i)), b.axes.at(static_cast<int>(i)))) return false;
  for (size_t i = 0; i < a.buffers.size(); ++i) {
    const BufferDecl& x = a.buffers[i];
    const BufferDecl& y = b.buffers[i];
    if (x.name != y.name || x.axes != y.axes || x.dtype != y.dtype || x.role != y.role ||
        x.flat_size != y.flat_size || x.preconverted != y.preconverted ||
        x.hint.has_range != y.hint.has_range || x.hint.nondecreasing != y.hint.nondecreasing)
      return false;
    if (x.hint.has_range && (x.hint.lo != y.hint.lo || x.hint.hi != y.hint.hi)) return false;
  }
  for (size_t i = 0; i < a.params.size(); ++i)
    if (a.params[i].name != b.params[i].name || a.params[i].dtype != b.params[i].dtype)
      return false;
  VarMap m;
  return eq_body(a.body, b.body, m);
}

}  // namespace strata
