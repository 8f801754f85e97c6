/*
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *   http://www.apache.org/licenses/LICENSE-2.0
 */

#include "strata/schedule.hpp"

#include <algorithm>
#include <functional>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "strata/lower.hpp"

namespace strata {

namespace {

/*! \brief Rebuild the tree with `target` replaced by replacement(target). */
Stmt rewrite_node(const Stmt& s, const StmtNode* target,
                  const std::function<Stmt(const StmtNode&)>& replacement) {
  if (!s) return s;
  if (s.get() == target) return replacement(*s);
  auto n = std::make_shared<StmtNode>(*s);
  bool changed = false;
  auto rec = [&](const Stmt& c) {
    Stmt r = rewrite_node(c, target, replacement);
    if (r != c) changed = true;
    return r;
  };
  switch (s->kind) {
    case StmtKind::SeqStmts:
      for (auto& c : n->seq) c = rec(c);
      break;
    case StmtKind::Loop:
    case StmtKind::Block:
    case StmtKind::SparseIteration:
      if (n->init) n->init = rec(n->init);
      if (n->body) n->body = rec(n->body);
      break;
    default:
      break;
  }
  return changed ? Stmt(n) : s;
}

struct LoopLookup {
  const StmtNode* loop = nullptr;
  const StmtNode* block = nullptr;          // the named block
  std::vector<const StmtNode*> loop_chain;  // enclosing loops, outer first
  int blocks_below_loop = 0;                // block boundaries between loop and block
};

/*! \brief Find block `ref.block` and the enclosing loop aliased `ref.var`. */
LoopLookup resolve_loop(const Program& p, const LoopRef& ref) {
  LoopLookup out;
  std::vector<const StmtNode*> loops;
  std::function<bool(const Stmt&)> walk = [&](const Stmt& s) -> bool {
    if (!s) return false;
    switch (s->kind) {
      case StmtKind::SeqStmts:
        for (const auto& c : s->seq)
          if (walk(c)) return true;
        return false;
      case StmtKind::Loop: {
        loops.push_back(s.get());
        bool hit = walk(s->body);
        if (!hit) loops.pop_back();
        return hit;
      }
      case StmtKind::Block: {
        if (s->name == ref.block) {
          out.block = s.get();
          out.loop_chain = loops;
          return true;
        }
        return walk(s->body);
      }
      default:
        return false;
    }
  };
  if (!walk(p.body)) fail(ErrKind::Lookup, "unknown block: " + ref.block);

  // Match the loop var directly or through a block binding to that loop var.
  std::unordered_map<std::string, const StmtNode*> alias;
  for (const StmtNode* lp : out.loop_chain) alias[lp->loop_var] = lp;
  std::function<void(const Stmt&)> collect_bindings = [&](const Stmt& s) {
    if (!s) return;
    switch (s->kind) {
      case StmtKind::SeqStmts:
        for (const auto& c : s->seq) collect_bindings(c);
        break;
      case StmtKind::Loop:
        collect_bindings(s->body);
        break;
      case StmtKind::Block:
        for (const auto& b : s->bindings)
          if (b.bind && b.bind->kind == ExprKind::Var && alias.count(b.bind->name) &&
              !alias.count(b.var))
            alias[b.var] = alias[b.bind->name];
        collect_bindings(s->body);
        break;
      default:
        break;
    }
  };
  collect_bindings(p.body);
  auto it = alias.find(ref.var);
  if (it == alias.end())
    fail(ErrKind::Lookup, "no loop named '" + ref.var + "' encloses block " + ref.block);
  bool in_chain = false;
  for (const StmtNode* lp : out.loop_chain)
    if (lp == it->second) in_chain = true;
  if (!in_chain)
    fail(ErrKind::Lookup, "loop '" + ref.var + "' does not enclose block " + ref.block);
  out.loop = it->second;
  return out;
}

Expr const_or(const Expr& e, int64_t* out) {
  Expr s = simplify(e);
  if (s->kind == ExprKind::IntConst && out) *out = s->ival;
  return s;
}

Stmt subst_stmt(const Stmt& s, const std::unordered_map<std::string, Expr>& map);

Expr subst_expr(const Expr& e, const std::unordered_map<std::string, Expr>& map) {
  return substitute(e, map);
}

Stmt subst_stmt(const Stmt& s, const std::unordered_map<std::string, Expr>& map) {
  if (!s) return s;
  auto n = std::make_shared<StmtNode>(*s);
  switch (s->kind) {
    case StmtKind::BufferStore:
      for (auto& i : n->indices) i = simplify(subst_expr(i, map));
      n->value = simplify(subst_expr(s->value, map));
      break;
    case StmtKind::SeqStmts:
      for (auto& c : n->seq) c = subst_stmt(c, map);
      break;
    case StmtKind::Loop:
      n->extent = simplify(subst_expr(s->extent, map));
      n->body = subst_stmt(s->body, map);
      break;
    case StmtKind::Block:
      for (auto& b : n->bindings) b.bind = simplify(subst_expr(b.bind, map));
      for (auto& r : n->reads)
        for (auto& d : r.dims) {
          d.min = simplify(subst_expr(d.min, map));
          d.extent = simplify(subst_expr(d.extent, map));
        }
      for (auto& r : n->writes)
        for (auto& d : r.dims) {
          d.min = simplify(subst_expr(d.min, map));
          d.extent = simplify(subst_expr(d.extent, map));
        }
      if (n->init) n->init = subst_stmt(s->init, map);
      n->body = subst_stmt(s->body, map);
      break;
    case StmtKind::BinarySearchBlock:
      n->key = simplify(subst_expr(s->key, map));
      n->seg_lo = simplify(subst_expr(s->seg_lo, map));
      n->seg_hi = simplify(subst_expr(s->seg_hi, map));
      break;
    default:
      break;
  }
  return n;
}

void collect_stores(const Stmt& s, std::vector<const StmtNode*>& out) {
  if (!s) return;
  switch (s->kind) {
    case StmtKind::BufferStore:
      out.push_back(s.get());
      break;
    case StmtKind::SeqStmts:
      for (const auto& c : s->seq) collect_stores(c, out);
      break;
    case StmtKind::Loop:
    case StmtKind::Block:
      if (s->init) collect_stores(s->init, out);
      collect_stores(s->body, out);
      break;
    default:
      break;
  }
}

}  // namespace

Program split(const Program& p, const LoopRef& ref, int64_t factor) {
  if (factor < 1) fail(ErrKind::Schedule, "split factor must be >= 1");
  LoopLookup lk = resolve_loop(p, ref);
  const StmtNode* lp = lk.loop;

  Program out = p;
  out.body = rewrite_node(p.body, lp, [&](const StmtNode& l) -> Stmt {
    std::string vo = l.loop_var + "_o", vi = l.loop_var + "_i";
    int64_t e = -1;
    Expr extent = const_or(l.extent, &e);
    Expr outer_extent = simplify(floordiv(add(extent, ic(factor - 1)), ic(factor)));
    Expr inner_extent;
    if (e >= 0 && e % factor == 0) {
      inner_extent = ic(factor);  // exact split, no bound guard
    } else {
      // Bound guard: the last outer iteration shrinks to the remainder.
      inner_extent = min_e(ic(factor), simplify(sub(extent, mul(var(vo), ic(factor)))));
    }
    std::unordered_map<std::string, Expr> map{
        {l.loop_var, add(mul(var(vo), ic(factor)), var(vi))}};
    Stmt inner = loop(vi, inner_extent, subst_stmt(l.body, map));
    return loop(vo, outer_extent, inner);
  });
  return out;
}

Program reorder(const Program& p, const std::vector<LoopRef>& refs) {
  if (refs.size() < 2) fail(ErrKind::Schedule, "reorder needs at least two loops");
  std::vector<const StmtNode*> loops;
  for (const auto& r : refs) loops.push_back(resolve_loop(p, r).loop);

  // The requested loops must form one perfect nest (no block boundaries):
  // sort by nesting depth, then each loop's body must be the next loop.
  LoopLookup lk = resolve_loop(p, refs[0]);
  std::vector<const StmtNode*> chain = lk.loop_chain;
  auto depth_of = [&](const StmtNode* l) {
    for (size_t i = 0; i < chain.size(); ++i)
      if (chain[i] == l) return static_cast<int>(i);
    return -1;
  };
  std::vector<const StmtNode*> sorted = loops;
  std::sort(sorted.begin(), sorted.end(),
            [&](const StmtNode* a, const StmtNode* b) { return depth_of(a) < depth_of(b); });
  for (const StmtNode* l : sorted)
    if (depth_of(l) < 0) fail(ErrKind::Schedule, "reorder: loops come from different nests");
  for (size_t i = 0; i + 1 < sorted.size(); ++i) {
    if (!sorted[i]->body || sorted[i]->body.get() != sorted[i + 1])
      fail(ErrKind::Schedule,
           "reorder: loops are separated by a block boundary or are not perfectly nested");
  }
  // Permuted extents may only use variables still in scope.
  std::vector<const StmtNode*> permuted;
  for (size_t i = 0; i < refs.size(); ++i) permuted.push_back(loops[i]);
  {
    std::unordered_set<std::string> in_scope;
    for (const StmtNode* l : chain) {
      bool is_reordered = false;
      for (const StmtNode* q : sorted)
        if (q == l) is_reordered = true;
      if (!is_reordered) in_scope.insert(l->loop_var);
    }
    for (const StmtNode* l : permuted) {
      std::function<bool(const Expr&)> ok = [&](const Expr& e) -> bool {
        if (!e) return true;
        if (e->kind == ExprKind::Var && !in_scope.count(e->name)) return false;
        for (const auto& a : e->args)
          if (!ok(a)) return false;
        return true;
      };
      if (!ok(l->extent))
        fail(ErrKind::Schedule, "reorder: extent of loop '" + l->loop_var +
                                    "' depends on a loop moved inside it");
      in_scope.insert(l->loop_var);
    }
  }

  Stmt innermost_body = sorted.back()->body;
  Program out = p;
  out.body = rewrite_node(p.body, sorted.front(), [&](const StmtNode&) -> Stmt {
    Stmt cur = innermost_body;
    for (size_t i = permuted.size(); i-- > 0;) {
      auto n = std::make_shared<StmtNode>(*permuted[i]);
      n->body = cur;
      cur = n;
    }
    return cur;
  });
  return out;
}

Program fuse(const Program& p, const std::vector<LoopRef>& refs) {
  if (refs.size() != 2) fail(ErrKind::Schedule, "fuse expects exactly two loops");
  const StmtNode* a = resolve_loop(p, refs[0]).loop;
  const StmtNode* b = resolve_loop(p, refs[1]).loop;
  if (!a->body || a->body.get() != b)
    fail(ErrKind::Schedule, "fuse: loops must be perfectly nested (no block in between)");
  int64_t ea = -1, eb = -1;
  const_or(a->extent, &ea);
  const_or(b->extent, &eb);
  if (ea < 0 || eb < 0)
    fail(ErrKind::Schedule, "fuse: both extents must be constant");

  Program out = p;
  out.body = rewrite_node(p.body, a, [&](const StmtNode&) -> Stmt {
    std::string f = a->loop_var + "_" + b->loop_var + "_f";
    std::unordered_map<std::string, Expr> map{
        {a->loop_var, floordiv(var(f), ic(eb))},
        {b->loop_var, mod(var(f), ic(eb))},
    };
    return loop(f, ic(ea * eb), subst_stmt(b->body, map));
  });
  return out;
}

Program annotate(const Program& p, const LoopRef& ref, LoopAnno anno, int factor) {
  LoopLookup lk = resolve_loop(p, ref);
  const StmtNode* lp = lk.loop;
  if (anno == LoopAnno::Parallel) {
    // Every store under the loop must be either index-disjoint in the loop
    // variable (affine index containing it) or a reduce store.
    std::vector<const StmtNode*> stores;
    collect_stores(lp->body, stores);
    for (const StmtNode* st : stores) {
      bool disjoint = false;
      for (const auto& i : st->indices)
        if (expr_uses_var(i, lp->loop_var) && expr_is_affine_like(i)) disjoint = true;
      if (!disjoint && !st->reduce)
        fail(ErrKind::Schedule, "parallel: store to " + st->buffer +
                                    " is not disjoint in '" + lp->loop_var +
                                    "' and is not a reduction");
    }
  }
  Program out = p;
  out.body = rewrite_node(p.body, lp, [&](const StmtNode& l) -> Stmt {
    auto n = std::make_shared<StmtNode>(l);
    n->anno = anno;
    n->anno_factor = factor;
    return n;
  });
  return out;
}

namespace {

struct StagingPlan {
  std::vector<Expr> mins;
  std::vector<int64_t> extents;
  int64_t total = 1;
};

StagingPlan region_plan(const Program& p, const StmtNode* block, const std::string& buffer,
                        bool write) {
  const auto& regions = write ? block->writes : block->reads;
  for (const auto& r : regions) {
    if (r.buffer != buffer) continue;
    StagingPlan plan;
    for (const auto& d : r.dims) {
      int64_t e = -1;
      const_or(d.extent, &e);
      if (e < 0)
        fail(ErrKind::Schedule, "cache staging: region of " + buffer +
                                    " has a non-constant extent (unbounded)");
      plan.mins.push_back(simplify(d.min));
      plan.extents.push_back(e);
      plan.total *= e;
    }
    return plan;
  }
  fail(ErrKind::Schedule, "block " + block->name + " has no " +
                              (write ? std::string("write") : std::string("read")) +
                              " region for buffer " + buffer);
}

Expr staging_index(const StagingPlan& plan, const std::vector<Expr>& idx) {
  Expr flat = ic(0);
  for (size_t d = 0; d < idx.size(); ++d) {
    Expr rel = simplify(sub(idx[d], plan.mins[d]));
    flat = add(mul(flat, ic(plan.extents[d])), rel);
  }
  return simplify(flat);
}

Stmt rewrite_buffer_access(const Stmt& s, const std::string& buffer,
                           const std::string& staging, const StagingPlan& plan, bool loads,
                           bool stores_too) {
  std::function<Expr(const Expr&)> rx = [&](const Expr& e) -> Expr {
    if (!e) return e;
    auto n = std::make_shared<ExprNode>(*e);
    for (auto& a : n->args) a = rx(a);
    if (e->kind == ExprKind::BufferLoad && e->name == buffer && loads)
      return load(staging, {staging_index(plan, n->args)});
    return n;
  };
  std::function<Stmt(const Stmt&)> rs = [&](const Stmt& st) -> Stmt {
    if (!st) return st;
    auto n = std::make_shared<StmtNode>(*st);
    switch (st->kind) {
      case StmtKind::BufferStore: {
        for (auto& i : n->indices) i = rx(i);
        n->value = rx(st->value);
        if (st->buffer == buffer && stores_too) {
          n->buffer = staging;
          n->indices = {staging_index(plan, n->indices)};
        }
        return n;
      }
      case StmtKind::SeqStmts:
        for (auto& c : n->seq) c = rs(c);
        return n;
      case StmtKind::Loop:
        n->extent = rx(st->extent);
        n->body = rs(st->body);
        return n;
      case StmtKind::Block:
        for (auto& b : n->bindings) b.bind = rx(b.bind);
        if (n->init) n->init = rs(st->init);
        n->body = rs(st->body);
        return n;
      case StmtKind::BinarySearchBlock:
        n->key = rx(st->key);
        n->seg_lo = rx(st->seg_lo);
        n->seg_hi = rx(st->seg_hi);
        return n;
      default:
        return n;
    }
  };
  return rs(s);
}

/*! \brief Nested loops over the staging extents running `make_body(ivars)`. */
Stmt staging_loops(const StagingPlan& plan, const std::string& var_prefix,
                   const std::function<Stmt(const std::vector<Expr>&)>& make_body) {
  std::vector<Expr> ivars;
  for (size_t d = 0; d < plan.extents.size(); ++d)
    ivars.push_back(var(var_prefix + std::to_string(d)));
  Stmt body = make_body(ivars);
  for (size_t d = plan.extents.size(); d-- > 0;)
    body = loop(var_prefix + std::to_string(d), ic(plan.extents[d]), body);
  return body;
}

}  // namespace

Program cache_read(const Program& p, const std::string& buffer, const std::string& block) {
  Program analyzed = analyze_regions(p);
  const StmtNode* blk = nullptr;
  std::function<void(const Stmt&)> find = [&](const Stmt& s) {
    if (!s || blk) return;
    if (s->kind == StmtKind::Block && s->name == block) {
      blk = s.get();
      return;
    }
    if (s->kind == StmtKind::SeqStmts)
      for (const auto& c : s->seq) find(c);
    else if (s->kind == StmtKind::Loop || s->kind == StmtKind::Block) {
      if (s->init) find(s->init);
      find(s->body);
    }
  };
  find(analyzed.body);
  if (!blk) fail(ErrKind::Lookup, "unknown block: " + block);

  StagingPlan plan = region_plan(analyzed, blk, buffer, /*write=*/false);
  const BufferDecl& src = analyzed.buffer(buffer);
  std::string staging = buffer + "_" + block + "_local";

  Program out = analyzed;
  BufferDecl sb;
  sb.name = staging;
  sb.dtype = src.dtype;
  sb.role = BufferRole::Temp;
  sb.flat_size = plan.total;
  out.buffers.push_back(sb);

  out.body = rewrite_node(analyzed.body, blk, [&](const StmtNode& b) -> Stmt {
    Stmt copy_in = staging_loops(plan, "cr", [&](const std::vector<Expr>& iv) {
      std::vector<Expr> src_idx;
      for (size_t d = 0; d < iv.size(); ++d)
        src_idx.push_back(simplify(add(plan.mins[d], iv[d])));
      Expr flat = ic(0);
      for (size_t d = 0; d < iv.size(); ++d)
        flat = add(mul(flat, ic(plan.extents[d])), iv[d]);
      return store(staging, {simplify(flat)}, load(buffer, src_idx), false);
    });
    auto n = std::make_shared<StmtNode>(b);
    n->body = seq({copy_in, rewrite_buffer_access(b.body, buffer, staging, plan,
                                                  /*loads=*/true, /*stores_too=*/false)});
    return n;
  });
  return analyze_regions(out);
}

Program cache_write(const Program& p, const std::string& buffer, const std::string& block) {
  Program analyzed = analyze_regions(p);
  const StmtNode* blk = nullptr;
  std::function<void(const Stmt&)> find = [&](const Stmt& s) {
    if (!s || blk) return;
    if (s->kind == StmtKind::Block && s->name == block) {
      blk = s.get();
      return;
    }
    if (s->kind == StmtKind::SeqStmts)
      for (const auto& c : s->seq) find(c);
    else if (s->kind == StmtKind::Loop || s->kind == StmtKind::Block) {
      if (s->init) find(s->init);
      find(s->body);
    }
  };
  find(analyzed.body);
  if (!blk) fail(ErrKind::Lookup, "unknown block: " + block);

  StagingPlan plan = region_plan(analyzed, blk, buffer, /*write=*/true);
  const BufferDecl& dst = analyzed.buffer(buffer);
  std::string staging = buffer + "_" + block + "_local";

  // Whether the block's stores to the buffer accumulate.
  std::vector<const StmtNode*> stores;
  collect_stores(blk->body, stores);
  bool reduce = false;
  for (const StmtNode* st : stores)
    if (st->buffer == buffer && st->reduce) reduce = true;

  Program out = analyzed;
  BufferDecl sb;
  sb.name = staging;
  sb.dtype = dst.dtype;
  sb.role = BufferRole::Temp;
  sb.flat_size = plan.total;
  out.buffers.push_back(sb);

  out.body = rewrite_node(analyzed.body, blk, [&](const StmtNode& b) -> Stmt {
    Expr zero = dst.dtype == DType::I32 ? ic(0) : fc(0.0);
    Stmt zero_fill = staging_loops(plan, "cz", [&](const std::vector<Expr>& iv) {
      Expr flat = ic(0);
      for (size_t d = 0; d < iv.size(); ++d)
        flat = add(mul(flat, ic(plan.extents[d])), iv[d]);
      return store(staging, {simplify(flat)}, zero, false);
    });
    Stmt copy_out = staging_loops(plan, "cw", [&](const std::vector<Expr>& iv) {
      std::vector<Expr> dst_idx;
      for (size_t d = 0; d < iv.size(); ++d)
        dst_idx.push_back(simplify(add(plan.mins[d], iv[d])));
      Expr flat = ic(0);
      for (size_t d = 0; d < iv.size(); ++d)
        flat = add(mul(flat, ic(plan.extents[d])), iv[d]);
      return store(buffer, dst_idx, load(staging, {simplify(flat)}), reduce);
    });
    auto n = std::make_shared<StmtNode>(b);
    n->body = seq({zero_fill,
                   rewrite_buffer_access(b.body, buffer, staging, plan,
                                         /*loads=*/false, /*stores_too=*/true),
                   copy_out});
    return n;
  });
  return analyze_regions(out);
}

Program rfactor(const Program& p, const LoopRef& ref, int64_t factor) {
  if (factor < 1) fail(ErrKind::Schedule, "rfactor factor must be >= 1");
  LoopLookup lk = resolve_loop(p, ref);
  const StmtNode* lp = lk.loop;
  int64_t extent = -1;
  const_or(lp->extent, &extent);
  if (extent < 0)
    fail(ErrKind::Schedule, "rfactor requires a fixed-extent reduction loop");

  // The loop body must be a block whose statements end in one reduce store.
  if (!lp->body || lp->body->kind != StmtKind::Block)
    fail(ErrKind::Schedule, "rfactor: loop body must be a single block");
  const StmtNode* blk = lp->body.get();
  std::vector<const StmtNode*> stores;
  collect_stores(blk->body, stores);
  if (stores.size() != 1 || !stores.back()->reduce)
    fail(ErrKind::Schedule, "rfactor supports a single sum-reduction store");
  const StmtNode* st = stores.back();
  const BufferDecl& outb = p.buffer(st->buffer);

  int64_t groups = ceil_div(extent, factor);
  std::string pname = st->buffer + "_" + blk->name + "_rf";
  Program out = p;
  BufferDecl pb;
  pb.name = pname;
  pb.dtype = outb.dtype == DType::I32 ? DType::I32 : DType::F64;  // double partials for floats
  pb.role = BufferRole::Temp;
  pb.flat_size = groups;
  out.buffers.push_back(pb);

  std::string g = lp->loop_var + "_g", vi = lp->loop_var + "_i", g2 = lp->loop_var + "_g2";
  Expr zero = pb.dtype == DType::I32 ? ic(0) : fc(0.0);

  out.body = rewrite_node(p.body, lp, [&](const StmtNode& l) -> Stmt {
    // Stage 0: clear the partial buffer for this instance.
    Stmt zero_loop = loop(g + "_z", ic(groups),
                          store(pname, {var(g + "_z")}, zero, false));
    // Stage 1: intra-group partial sums.
    std::unordered_map<std::string, Expr> map{
        {l.loop_var, add(mul(var(g), ic(factor)), var(vi))}};
    auto inner_blk = std::make_shared<StmtNode>(*blk);
    // Redirect the reduce store to the partial buffer.
    std::function<Stmt(const Stmt&)> redirect = [&](const Stmt& s) -> Stmt {
      if (!s) return s;
      auto n = std::make_shared<StmtNode>(*s);
      switch (s->kind) {
        case StmtKind::BufferStore:
          if (s.get() == st) {
            n->buffer = pname;
            n->indices = {var(g)};
          }
          return n;
        case StmtKind::SeqStmts:
          for (auto& c : n->seq) c = redirect(c);
          return n;
        case StmtKind::Loop:
        case StmtKind::Block:
          if (n->init) n->init = redirect(s->init);
          n->body = redirect(s->body);
          return n;
        default:
          return n;
      }
    };
    Stmt stage1_body = subst_stmt(redirect(lp->body), map);
    Expr tail = extent % factor == 0
                    ? ic(factor)
                    : min_e(ic(factor), simplify(sub(ic(extent), mul(var(g), ic(factor)))));
    Stmt stage1 = loop(g, ic(groups), loop(vi, tail, stage1_body));
    // Stage 2: inter-group reduction into the original destination.
    std::vector<Expr> out_idx = st->indices;
    auto final_blk = std::make_shared<StmtNode>();
    final_blk->kind = StmtKind::Block;
    final_blk->name = blk->name + "_rf_final";
    final_blk->bindings.push_back({g2 + "_b", IterKind::Reduction, var(g2), ""});
    final_blk->body = store(st->buffer, out_idx, load(pname, {var(g2)}), true);
    Stmt stage2 = loop(g2, ic(groups), final_blk);
    return seq({zero_loop, stage1, stage2});
  });
  return analyze_regions(out);
}

Program apply_schedule(const Program& p, const std::string& script) {
  Program cur = p;
  std::istringstream in(script);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ls(line);
    std::string cmd;
    if (!(ls >> cmd) || cmd[0] == '#') continue;
    auto parse_ref = [&](const std::string& tok) -> LoopRef {
      auto dot = tok.find('.');
      if (dot == std::string::npos)
        fail(ErrKind::Usage, "schedule line " + std::to_string(lineno) +
                                 ": expected block.var, got " + tok);
      return {tok.substr(0, dot), tok.substr(dot + 1)};
    };
    try {
      if (cmd == "split" || cmd == "rfactor") {
        std::string tok;
        int64_t f = 0;
        if (!(ls >> tok >> f))
          fail(ErrKind::Usage, "schedule line " + std::to_string(lineno) + ": " + cmd +
                                   " block.var factor");
        cur = cmd == "split" ? split(cur, parse_ref(tok), f) : rfactor(cur, parse_ref(tok), f);
      } else if (cmd == "reorder" || cmd == "fuse") {
        std::vector<LoopRef> refs;
        std::string tok;
        while (ls >> tok) refs.push_back(parse_ref(tok));
        cur = cmd == "reorder" ? reorder(cur, refs) : fuse(cur, refs);
      } else if (cmd == "parallel") {
        std::string tok;
        ls >> tok;
        cur = annotate(cur, parse_ref(tok), LoopAnno::Parallel);
      } else if (cmd == "unroll" || cmd == "vectorize") {
        std::string tok;
        int f = 0;
        ls >> tok >> f;
        cur = annotate(cur, parse_ref(tok),
                       cmd == "unroll" ? LoopAnno::Unroll : LoopAnno::Vectorize, f);
      } else if (cmd == "cache_read" || cmd == "cache_write") {
        std::string buffer, block;
        if (!(ls >> buffer >> block))
          fail(ErrKind::Usage, "schedule line " + std::to_string(lineno) + ": " + cmd +
                                   " buffer block");
        cur = cmd == "cache_read" ? cache_read(cur, buffer, block)
                                  : cache_write(cur, buffer, block);
      } else {
        fail(ErrKind::Usage,
             "schedule line " + std::to_string(lineno) + ": unknown primitive " + cmd);
      }
    } catch (const Error& e) {
      if (e.kind == ErrKind::Usage) throw;
      throw Error(e.kind, "schedule line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return cur;
}

}  // namespace strata
