/*
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *   http://www.apache.org/licenses/LICENSE-2.0
 */

#include "strata/ir.hpp"

#include <functional>
#include <unordered_set>

namespace strata {

Expr ic(int64_t v) {
  auto n = std::make_shared<ExprNode>();
  n->kind = ExprKind::IntConst;
  n->ival = v;
  return n;
}

Expr fc(double v) {
  auto n = std::make_shared<ExprNode>();
  n->kind = ExprKind::FloatConst;
  n->fval = v;
  return n;
}

Expr var(std::string name) {
  auto n = std::make_shared<ExprNode>();
  n->kind = ExprKind::Var;
  n->name = std::move(name);
  return n;
}

Expr binary(ExprKind k, Expr a, Expr b) {
  auto n = std::make_shared<ExprNode>();
  n->kind = k;
  n->args = {std::move(a), std::move(b)};
  return n;
}

Expr add(Expr a, Expr b) { return binary(ExprKind::Add, std::move(a), std::move(b)); }
Expr sub(Expr a, Expr b) { return binary(ExprKind::Sub, std::move(a), std::move(b)); }
Expr mul(Expr a, Expr b) { return binary(ExprKind::Mul, std::move(a), std::move(b)); }
Expr floordiv(Expr a, Expr b) { return binary(ExprKind::FloorDiv, std::move(a), std::move(b)); }
Expr mod(Expr a, Expr b) { return binary(ExprKind::Mod, std::move(a), std::move(b)); }
Expr min_e(Expr a, Expr b) { return binary(ExprKind::Min, std::move(a), std::move(b)); }
Expr max_e(Expr a, Expr b) { return binary(ExprKind::Max, std::move(a), std::move(b)); }

Expr load(std::string buffer, std::vector<Expr> indices) {
  auto n = std::make_shared<ExprNode>();
  n->kind = ExprKind::BufferLoad;
  n->name = std::move(buffer);
  n->args = std::move(indices);
  return n;
}

Expr select(Expr cond, Expr then_v, Expr else_v) {
  auto n = std::make_shared<ExprNode>();
  n->kind = ExprKind::Select;
  n->args = {std::move(cond), std::move(then_v), std::move(else_v)};
  return n;
}

Expr compare(CmpOp op, Expr a, Expr b) {
  auto n = std::make_shared<ExprNode>();
  n->kind = ExprKind::Compare;
  n->cmp = op;
  n->args = {std::move(a), std::move(b)};
  return n;
}

static bool is_int_const(const Expr& e, int64_t* out = nullptr) {
  if (e->kind != ExprKind::IntConst) return false;
  if (out) *out = e->ival;
  return true;
}

static int64_t floor_div_i(int64_t a, int64_t b) {
  int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}
static int64_t floor_mod_i(int64_t a, int64_t b) { return a - floor_div_i(a, b) * b; }

// Literal structural identity (no alpha renaming); used by simplify only.
static bool expr_identical(const Expr& a, const Expr& b) {
  if (a == b) return true;
  if (!a || !b || a->kind != b->kind) return false;
  switch (a->kind) {
    case ExprKind::IntConst:
      if (a->ival != b->ival) return false;
      break;
    case ExprKind::FloatConst:
      if (a->fval != b->fval) return false;
      break;
    case ExprKind::Var:
    case ExprKind::BufferLoad:
      if (a->name != b->name) return false;
      break;
    case ExprKind::Compare:
      if (a->cmp != b->cmp) return false;
      break;
    default:
      break;
  }
  if (a->args.size() != b->args.size()) return false;
  for (size_t i = 0; i < a->args.size(); ++i)
    if (!expr_identical(a->args[i], b->args[i])) return false;
  return true;
}

Expr simplify(const Expr& e) {
  if (!e) return e;
  switch (e->kind) {
    case ExprKind::IntConst:
    case ExprKind::FloatConst:
    case ExprKind::Var:
      return e;
    default:
      break;
  }
  std::vector<Expr> sargs;
  sargs.reserve(e->args.size());
  for (const auto& a : e->args) sargs.push_back(simplify(a));

  auto rebuild = [&]() {
    auto n = std::make_shared<ExprNode>(*e);
    n->args = sargs;
    return Expr(n);
  };

  int64_t la, lb;
  switch (e->kind) {
    case ExprKind::Add:
      if (is_int_const(sargs[0], &la) && is_int_const(sargs[1], &lb)) return ic(la + lb);
      if (is_int_const(sargs[0], &la) && la == 0) return sargs[1];
      if (is_int_const(sargs[1], &lb) && lb == 0) return sargs[0];
      // a + (x - a) -> x  (positions recombined after fused-loop splitting)
      if (sargs[1]->kind == ExprKind::Sub && expr_identical(sargs[1]->args[1], sargs[0]))
        return sargs[1]->args[0];
      if (sargs[0]->kind == ExprKind::Sub && expr_identical(sargs[0]->args[1], sargs[1]))
        return sargs[0]->args[0];
      // (x + c1) + c2 -> x + (c1 + c2)
      if (is_int_const(sargs[1], &lb) && sargs[0]->kind == ExprKind::Add &&
          is_int_const(sargs[0]->args[1], &la))
        return simplify(add(sargs[0]->args[0], ic(la + lb)));
      break;
    case ExprKind::Sub:
      if (is_int_const(sargs[0], &la) && is_int_const(sargs[1], &lb)) return ic(la - lb);
      if (is_int_const(sargs[1], &lb) && lb == 0) return sargs[0];
      if (expr_identical(sargs[0], sargs[1])) return ic(0);
      // (x + c1) - c2 -> x + (c1 - c2)
      if (is_int_const(sargs[1], &lb) && sargs[0]->kind == ExprKind::Add &&
          is_int_const(sargs[0]->args[1], &la))
        return simplify(add(sargs[0]->args[0], ic(la - lb)));
      break;
    case ExprKind::Mul:
      if (is_int_const(sargs[0], &la) && is_int_const(sargs[1], &lb)) return ic(la * lb);
      if ((is_int_const(sargs[0], &la) && la == 0) || (is_int_const(sargs[1], &lb) && lb == 0))
        return ic(0);
      if (is_int_const(sargs[0], &la) && la == 1) return sargs[1];
      if (is_int_const(sargs[1], &lb) && lb == 1) return sargs[0];
      break;
    case ExprKind::FloorDiv:
      if (is_int_const(sargs[0], &la) && is_int_const(sargs[1], &lb) && lb != 0)
        return ic(floor_div_i(la, lb));
      if (is_int_const(sargs[1], &lb) && lb == 1) return sargs[0];
      break;
    case ExprKind::Mod:
      if (is_int_const(sargs[0], &la) && is_int_const(sargs[1], &lb) && lb != 0)
        return ic(floor_mod_i(la, lb));
      if (is_int_const(sargs[1], &lb) && lb == 1) return ic(0);
      break;
    case ExprKind::Min:
      if (is_int_const(sargs[0], &la) && is_int_const(sargs[1], &lb))
        return ic(la < lb ? la : lb);
      break;
    case ExprKind::Max:
      if (is_int_const(sargs[0], &la) && is_int_const(sargs[1], &lb))
        return ic(la > lb ? la : lb);
      break;
    case ExprKind::Select:
      if (is_int_const(sargs[0], &la)) return la != 0 ? sargs[1] : sargs[2];
      break;
    case ExprKind::Compare:
      if (is_int_const(sargs[0], &la) && is_int_const(sargs[1], &lb)) {
        bool r = false;
        switch (e->cmp) {
          case CmpOp::Eq: r = la == lb; break;
          case CmpOp::Ne: r = la != lb; break;
          case CmpOp::Lt: r = la < lb; break;
          case CmpOp::Le: r = la <= lb; break;
          case CmpOp::Gt: r = la > lb; break;
          case CmpOp::Ge: r = la >= lb; break;
        }
        return ic(r ? 1 : 0);
      }
      break;
    default:
      break;
  }
  return rebuild();
}

Expr substitute(const Expr& e, const std::unordered_map<std::string, Expr>& map) {
  if (!e) return e;
  if (e->kind == ExprKind::Var) {
    auto it = map.find(e->name);
    return it == map.end() ? e : it->second;
  }
  if (e->args.empty()) return e;
  auto n = std::make_shared<ExprNode>(*e);
  for (auto& a : n->args) a = substitute(a, map);
  return n;
}

bool expr_uses_var(const Expr& e, const std::string& name) {
  if (!e) return false;
  if (e->kind == ExprKind::Var) return e->name == name;
  for (const auto& a : e->args)
    if (expr_uses_var(a, name)) return true;
  return false;
}

bool expr_has_load(const Expr& e) {
  if (!e) return false;
  if (e->kind == ExprKind::BufferLoad) return true;
  for (const auto& a : e->args)
    if (expr_has_load(a)) return true;
  return false;
}

bool expr_is_affine_like(const Expr& e) {
  if (!e) return false;
  switch (e->kind) {
    case ExprKind::IntConst:
    case ExprKind::Var:
      return true;
    case ExprKind::Add:
    case ExprKind::Sub:
    case ExprKind::Mul:
    case ExprKind::FloorDiv:
    case ExprKind::Mod:
      return expr_is_affine_like(e->args[0]) && expr_is_affine_like(e->args[1]);
    default:
      return false;
  }
}

Stmt store(std::string buffer, std::vector<Expr> indices, Expr value, bool reduce) {
  auto n = std::make_shared<StmtNode>();
  n->kind = StmtKind::BufferStore;
  n->buffer = std::move(buffer);
  n->indices = std::move(indices);
  n->value = std::move(value);
  n->reduce = reduce;
  return n;
}

Stmt seq(std::vector<Stmt> stmts) {
  // Canonical form: sequences are flat and non-singleton.
  std::vector<Stmt> flat;
  for (auto& s : stmts) {
    if (!s) continue;
    if (s->kind == StmtKind::SeqStmts)
      flat.insert(flat.end(), s->seq.begin(), s->seq.end());
    else
      flat.push_back(std::move(s));
  }
  if (flat.size() == 1) return flat[0];
  auto n = std::make_shared<StmtNode>();
  n->kind = StmtKind::SeqStmts;
  n->seq = std::move(flat);
  return n;
}

Stmt sparse_iteration(std::string name, std::vector<IterSpec> iters, Stmt body) {
  auto n = std::make_shared<StmtNode>();
  n->kind = StmtKind::SparseIteration;
  n->name = std::move(name);
  n->iters = std::move(iters);
  n->body = std::move(body);
  return n;
}

Stmt loop(std::string var, Expr extent, Stmt body) {
  auto n = std::make_shared<StmtNode>();
  n->kind = StmtKind::Loop;
  n->loop_var = std::move(var);
  n->extent = std::move(extent);
  n->body = std::move(body);
  return n;
}

Stmt make_block(std::string name, std::vector<BlockBinding> bindings, Stmt body) {
  auto n = std::make_shared<StmtNode>();
  n->kind = StmtKind::Block;
  n->name = std::move(name);
  n->bindings = std::move(bindings);
  n->body = std::move(body);
  return n;
}

const char* stage_name(Stage s) {
  switch (s) {
    case Stage::I: return "I";
    case Stage::II: return "II";
    case Stage::III: return "III";
  }
  return "?";
}

const BufferDecl* Program::find_buffer(const std::string& n) const {
  for (const auto& b : buffers)
    if (b.name == n) return &b;
  return nullptr;
}

const BufferDecl& Program::buffer(const std::string& n) const {
  const BufferDecl* b = find_buffer(n);
  if (!b) fail(ErrKind::Lookup, "unknown buffer: " + n);
  return *b;
}

BufferDecl& Program::buffer_mut(const std::string& n) {
  for (auto& b : buffers)
    if (b.name == n) return b;
  fail(ErrKind::Lookup, "unknown buffer: " + n);
}

size_t buffer_ndim(const Program& p, const BufferDecl& b) {
  if (p.stage == Stage::III || b.axes.empty()) return 1;
  return b.axes.size();
}

int64_t buffer_flat_size(const Program& p, const BufferDecl& b) {
  if (b.flat_size >= 0) return b.flat_size;
  // Product over independent subtrees in the axis list: each list root
  // contributes the space of its deepest chain; non-root axes are absorbed
  // by the subtree that contains them.
  int64_t total = 1;
  std::unordered_set<std::string> in_list(b.axes.begin(), b.axes.end());
  for (const auto& an : b.axes) {
    const Axis& a = p.axes.at(an);
    // Count this axis only if no later axis in the buffer depends on it.
    bool has_child_in_list = false;
    for (const auto& bn : b.axes) {
      const Axis& c = p.axes.at(bn);
      if (!c.parent.empty() && c.parent == a.name) has_child_in_list = true;
    }
    if (has_child_in_list) continue;
    // Leaf of its in-buffer chain: the chain's total position count is the
    // leaf's absolute space (parents are absorbed through indptr/width).
    (void)in_list;
    total *= axis_space(p.axes, a);
  }
  return total;
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

namespace {

struct Validator {
  const Program& p;
  std::vector<std::string> out;

  void err(const std::string& m) { out.push_back(m); }

  void check_expr(const Expr& e, const std::unordered_set<std::string>& vars) {
    if (!e) {
      err("null expression");
      return;
    }
    if (e->kind == ExprKind::Var) {
      if (!vars.count(e->name)) err("unbound variable: " + e->name);
      return;
    }
    if (e->kind == ExprKind::BufferLoad) {
      const BufferDecl* b = p.find_buffer(e->name);
      if (!b) {
        err("load from unknown buffer: " + e->name);
      } else {
        size_t want = buffer_ndim(p, *b);
        if (e->args.size() != want)
          err("load " + e->name + ": expected " + std::to_string(want) + " indices, got " +
              std::to_string(e->args.size()));
      }
    }
    for (const auto& a : e->args) check_expr(a, vars);
  }

  void check_stmt(const Stmt& s, std::unordered_set<std::string> vars) {
    if (!s) {
      err("null statement");
      return;
    }
    switch (s->kind) {
      case StmtKind::BufferStore: {
        const BufferDecl* b = p.find_buffer(s->buffer);
        if (!b) {
          err("store to unknown buffer: " + s->buffer);
        } else {
          size_t want = buffer_ndim(p, *b);
          if (s->indices.size() != want)
            err("store " + s->buffer + ": expected " + std::to_string(want) + " indices");
        }
        for (const auto& i : s->indices) check_expr(i, vars);
        check_expr(s->value, vars);
        break;
      }
      case StmtKind::SeqStmts:
        for (const auto& c : s->seq) {
          check_stmt(c, vars);
          // Search results are visible to later statements in the sequence.
          if (c && c->kind == StmtKind::BinarySearchBlock) {
            vars.insert(c->result_var);
            if (!c->found_var.empty()) vars.insert(c->found_var);
          }
        }
        break;
      case StmtKind::SparseIteration: {
        if (p.stage != Stage::I) err("sparse iteration outside stage I");
        for (const auto& it : s->iters) {
          if (!p.axes.contains(it.axis)) err("unknown axis: " + it.axis);
          vars.insert(it.var);
        }
        for (const auto& g : s->fuse_groups) {
          for (int idx : g)
            if (idx < 0 || idx >= static_cast<int>(s->iters.size()))
              err("fuse group index out of range in " + s->name);
        }
        check_stmt(s->body, vars);
        break;
      }
      case StmtKind::Loop: {
        if (p.stage == Stage::I) err("loop node in stage I program");
        check_expr(s->extent, vars);
        vars.insert(s->loop_var);
        check_stmt(s->body, vars);
        break;
      }
      case StmtKind::Block: {
        if (p.stage == Stage::I) err("block node in stage I program");
        for (const auto& b : s->bindings) {
          check_expr(b.bind, vars);
          vars.insert(b.var);
        }
        for (const auto& r : s->reads)
          for (const auto& d : r.dims) {
            check_expr(d.min, vars);
            check_expr(d.extent, vars);
          }
        for (const auto& r : s->writes)
          for (const auto& d : r.dims) {
            check_expr(d.min, vars);
            check_expr(d.extent, vars);
          }
        if (s->init) check_stmt(s->init, vars);
        check_stmt(s->body, vars);
        break;
      }
      case StmtKind::BinarySearchBlock: {
        if (p.stage == Stage::I) err("binary search block in stage I program");
        check_expr(s->key, vars);
        check_expr(s->seg_lo, vars);
        check_expr(s->seg_hi, vars);
        if (!p.find_buffer(s->search_buffer)) err("search in unknown buffer: " + s->search_buffer);
        break;
      }
    }
  }
};

}  // namespace

std::vector<std::string> validate_program(const Program& p) {
  Validator v{p, {}};
  auto axis_violations = validate_axes(p.axes.all());
  v.out.insert(v.out.end(), axis_violations.begin(), axis_violations.end());
  std::unordered_set<std::string> names;
  for (const auto& b : p.buffers) {
    if (!names.insert(b.name).second) v.err("duplicate buffer name: " + b.name);
    for (const auto& a : b.axes)
      if (!p.axes.contains(a)) v.err("buffer " + b.name + ": unknown axis " + a);
  }
  std::unordered_set<std::string> vars;
  for (const auto& pr : p.params) vars.insert(pr.name);
  if (p.body) v.check_stmt(p.body, vars);
  return v.out;
}

}  // namespace strata
