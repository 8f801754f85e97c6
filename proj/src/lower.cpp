/*
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *   http://www.apache.org/licenses/LICENSE-2.0
 */

#include "strata/lower.hpp"

#include <algorithm>
#include <functional>
#include <unordered_map>
#include <unordered_set>

#include "strata/equal.hpp"

namespace strata {

namespace {

std::string indptr_buf(const Axis& a) { return a.indptr_name; }
std::string indices_buf(const Axis& a) { return a.indices_name; }

/*! \brief Space of the segment index domain of a variable axis (its parents). */
int64_t parent_space(const AxisTable& axes, const Axis& a) {
  if (a.parent.empty()) return 1;
  return axis_space(axes, axes.at(a.parent));
}

}  // namespace

// ---------------------------------------------------------------------------
// Step 1: auxiliary buffer materialization
// ---------------------------------------------------------------------------

Program materialize_aux_buffers(const Program& p) {
  if (p.stage != Stage::I) fail(ErrKind::Lowering, "wrong stage: expected stage I program");
  Program out = p;
  for (const Axis& a : p.axes.all()) {
    if (a.is_variable()) {
      if (a.nnz < 0)
        fail(ErrKind::Lowering, "axis " + a.name + ": nnz metadata required for lowering");
      if (!out.find_buffer(indptr_buf(a))) {
        BufferDecl b;
        b.name = indptr_buf(a);
        b.dtype = a.index_dtype;
        b.role = BufferRole::Aux;
        b.flat_size = parent_space(p.axes, a) + 1;
        b.hint.has_range = true;
        b.hint.lo = 0;
        b.hint.hi = a.nnz + 1;  // indptr values lie in [0, nnz]
        b.hint.nondecreasing = true;
        out.buffers.push_back(b);
      }
    }
    if (a.is_sparse()) {
      if (!out.find_buffer(indices_buf(a))) {
        BufferDecl b;
        b.name = indices_buf(a);
        b.dtype = a.index_dtype;
        b.role = BufferRole::Aux;
        b.flat_size = axis_space(p.axes, a);
        b.hint.has_range = true;
        b.hint.lo = 0;
        b.hint.hi = a.length;  // coordinates are < axis length
        out.buffers.push_back(b);
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Steps 2+3: nested loop generation and coordinate translation
//
// The two steps share the translation context (Eq. 2's dependence order:
// the coordinate of axis i is built from positions of axes 1..i), so the
// implementation carries the context while emitting loops; each step can
// still run standalone because untranslated bodies keep iterator variables
// and blocks record each binding's axis.
// ---------------------------------------------------------------------------

namespace {

struct IterInfo {
  std::string axis;
  IterKind kind = IterKind::Spatial;
  Expr rel;    // position within the parent segment
  Expr abs;    // absolute position in the axis space
  Expr coord;  // coordinate value
};

/*! \brief Per-iteration translation state: v^(p), c_i and absolute positions. */
struct CoordTranslationContext {
  const Program* prog = nullptr;
  std::unordered_map<std::string, IterInfo> iter;   // iterator var -> info
  std::vector<std::string> order;                   // iteration order of vars
  int fresh = 0;
  bool copy_semantics = false;  // format-copy iteration: guarded reads, pad masks

  std::string fresh_name(const std::string& base) {
    return base + "_" + std::to_string(fresh++);
  }
};

Expr axis_abs_expr(const AxisTable& axes, const Axis& a, const Expr& parent_abs,
                   const Expr& rel) {
  if (a.parent.empty()) return rel;
  if (a.is_variable()) return add(load(a.indptr_name, {parent_abs}), rel);
  int64_t width = a.kind == AxisKind::SparseFixed ? a.nnz_cols : a.length;
  return add(mul(parent_abs, ic(width)), rel);
}

Expr axis_coord_expr(const Axis& a, const Expr& abs, const Expr& rel) {
  // Eq. 3: dense axes expose the position itself; sparse axes read indices.
  if (a.is_dense()) return rel;
  return load(a.indices_name, {abs});
}

/*! \brief Loop extent for one axis, given the parent's absolute position. */
Expr axis_extent_expr(const Axis& a, const Expr& parent_abs) {
  switch (a.kind) {
    case AxisKind::DenseFixed: return ic(a.length);
    case AxisKind::SparseFixed: return ic(a.nnz_cols);
    case AxisKind::DenseVariable:
    case AxisKind::SparseVariable:
      return sub(load(a.indptr_name, {add(parent_abs, ic(1))}),
                 load(a.indptr_name, {parent_abs}));
  }
  return ic(0);
}

struct BufferAccessPlan {
  std::vector<Expr> positions;
  std::vector<Stmt> searches;      // emitted before the access's statement
  std::vector<std::string> found;  // guard flags of guarded searches
  std::vector<Expr> pad_flags;     // pad-slot predicates (copy writes)
};

class IterationLowerer {
 public:
  IterationLowerer(const Program& p, CoordTranslationContext& ctx) : p_(p), ctx_(ctx) {}

  /*! \brief Translate one index list of an access to buffer `b`. */
  BufferAccessPlan translate_access(const BufferDecl& b, const std::vector<Expr>& idx,
                                    bool for_write) {
    BufferAccessPlan plan;
    std::unordered_map<std::string, Expr> coord_sub;
    for (const auto& [v, info] : ctx_.iter) coord_sub[v] = info.coord;

    std::vector<Expr> buf_abs(idx.size());  // absolute positions per buffer dim
    for (size_t j = 0; j < idx.size(); ++j) {
      const Axis& axis = p_.axes.at(b.axes[j]);
      Expr pos;
      bool matched = false;
      // D10 zero-cost match: the index is syntactically the iteration variable
      // of this very axis, and its ancestor dims line up with the iteration.
      if (axis.is_sparse() || axis.is_variable()) {
        if (idx[j]->kind == ExprKind::Var) {
          auto it = ctx_.iter.find(idx[j]->name);
          if (it != ctx_.iter.end() && it->second.axis == axis.name &&
              ancestors_match(b, j, idx)) {
            pos = it->second.rel;
            matched = true;
          }
        }
      }
      if (!matched) {
        if (axis.is_dense()) {
          // Dense dimension: the position equals the coordinate value.
          pos = simplify(substitute(idx[j], coord_sub));
        } else {
          // Sparse dimension: emit a binary search over the indices segment
          // (Eq. 4); the result is the position relative to the segment.
          Expr parent_abs = parent_abs_for(b, j, buf_abs);
          Expr lo, hi;
          if (axis.is_variable()) {
            lo = load(axis.indptr_name, {parent_abs});
            hi = load(axis.indptr_name, {add(parent_abs, ic(1))});
          } else {
            lo = simplify(mul(parent_abs, ic(axis.nnz_cols)));
            hi = simplify(add(lo, ic(axis.nnz_cols)));
          }
          auto search = std::make_shared<StmtNode>();
          search->kind = StmtKind::BinarySearchBlock;
          search->result_var = ctx_.fresh_name(b.name + "_d" + std::to_string(j) + "_f");
          search->search_buffer = axis.indices_name;
          search->seg_lo = lo;
          search->seg_hi = hi;
          search->key = simplify(substitute(idx[j], coord_sub));
          search->search_mode = SearchMode::LowerBound;
          bool guard = ctx_.copy_semantics || for_write;
          if (guard) {
            search->guarded = true;
            search->found_var = search->result_var + "_ok";
            plan.found.push_back(search->found_var);
          }
          plan.searches.push_back(search);
          pos = var(search->result_var);
          if (guard) pos = select(var(search->found_var), pos, ic(0));
        }
      }
      plan.positions.push_back(pos);
      buf_abs[j] = simplify(axis_abs_buffer(b, j, buf_abs, plan.positions[j]));
      // Pad-slot predicate for positional writes through sparse-fixed dims:
      // a slot is padding iff it repeats its predecessor's coordinate.
      if (for_write && ctx_.copy_semantics && matched &&
          axis.kind == AxisKind::SparseFixed) {
        Expr relp = plan.positions[j];
        Expr is_dup = compare(CmpOp::Eq, load(axis.indices_name, {buf_abs[j]}),
                              load(axis.indices_name, {simplify(sub(buf_abs[j], ic(1)))}));
        plan.pad_flags.push_back(select(compare(CmpOp::Gt, relp, ic(0)), is_dup, ic(0)));
      }
    }
    return plan;
  }

  /*! \brief Rewrite an expression: loads become positional, vars become coords. */
  Expr translate_expr(const Expr& e, std::vector<Stmt>& searches) {
    if (e->kind == ExprKind::Var) {
      auto it = ctx_.iter.find(e->name);
      if (it != ctx_.iter.end()) return it->second.coord;
      return e;
    }
    if (e->kind == ExprKind::BufferLoad) {
      const BufferDecl& b = p_.buffer(e->name);
      if (b.axes.empty()) {
        // Flat (aux) buffer: translate index expressions only.
        auto n = std::make_shared<ExprNode>(*e);
        for (auto& a : n->args) a = translate_expr(a, searches);
        return n;
      }
      BufferAccessPlan plan = translate_access(b, e->args, /*for_write=*/false);
      for (auto& s : plan.searches) searches.push_back(s);
      Expr r = load(e->name, plan.positions);
      // Guarded read: absent coordinates read as zero.
      for (const auto& f : plan.found) r = select(var(f), r, b.dtype == DType::I32
                                                                 ? ic(0)
                                                                 : fc(0.0));
      return r;
    }
    if (e->args.empty()) return e;
    auto n = std::make_shared<ExprNode>(*e);
    for (auto& a : n->args) a = translate_expr(a, searches);
    return simplify(Expr(n));
  }

  Stmt translate_store(const StmtNode& st) {
    const BufferDecl& b = p_.buffer(st.buffer);
    std::vector<Stmt> searches;
    Expr value = translate_expr(st.value, searches);
    std::vector<Expr> positions;
    if (b.axes.empty()) {
      for (const auto& i : st.indices) positions.push_back(translate_expr(i, searches));
    } else {
      BufferAccessPlan plan = translate_access(b, st.indices, /*for_write=*/true);
      for (auto& s : plan.searches) searches.push_back(s);
      positions = plan.positions;
      if (!plan.found.empty() && !st.reduce && !ctx_.copy_semantics)
        fail(ErrKind::Lowering,
             "store to " + st.buffer + " through a searched sparse dimension requires a "
             "reduce store or copy semantics");
      Expr zero = b.dtype == DType::I32 ? ic(0) : fc(0.0);
      for (const auto& f : plan.found) value = select(var(f), value, zero);
      for (const auto& pad : plan.pad_flags) value = select(pad, zero, value);
    }
    std::vector<Stmt> out = std::move(searches);
    out.push_back(store(st.buffer, positions, simplify(value), st.reduce));
    return seq(std::move(out));
  }

 private:
  bool ancestors_match(const BufferDecl& b, size_t j, const std::vector<Expr>& idx) {
    // Every buffer dim that is an ancestor axis of dim j must be indexed by
    // the iteration variable of that same axis.
    const Axis* cur = &p_.axes.at(b.axes[j]);
    while (!cur->parent.empty()) {
      const std::string& parent = cur->parent;
      bool found_dim = false;
      for (size_t q = 0; q < j; ++q) {
        if (b.axes[q] == parent) {
          found_dim = true;
          if (idx[q]->kind != ExprKind::Var) return false;
          auto it = ctx_.iter.find(idx[q]->name);
          if (it == ctx_.iter.end() || it->second.axis != parent) return false;
        }
      }
      if (!found_dim) return false;  // compressed ancestor absent from buffer
      cur = &p_.axes.at(parent);
    }
    return true;
  }

  Expr parent_abs_for(const BufferDecl& b, size_t j, const std::vector<Expr>& buf_abs) {
    const Axis& axis = p_.axes.at(b.axes[j]);
    if (axis.parent.empty()) return ic(0);
    for (size_t q = 0; q < j; ++q)
      if (b.axes[q] == axis.parent) return buf_abs[q];
    fail(ErrKind::Lowering, "buffer " + b.name + ": parent axis " + axis.parent +
                                " of dim " + std::to_string(j) + " not among earlier dims");
  }

  Expr axis_abs_buffer(const BufferDecl& b, size_t j, const std::vector<Expr>& buf_abs,
                       const Expr& rel) {
    const Axis& axis = p_.axes.at(b.axes[j]);
    if (axis.parent.empty()) return rel;
    Expr pa = parent_abs_for(b, j, buf_abs);
    return axis_abs_expr(p_.axes, axis, pa, rel);
  }

  const Program& p_;
  CoordTranslationContext& ctx_;
};

/*! \brief Lower one sparse iteration to its loop/block nest. */
Stmt lower_iteration(const Program& p, const StmtNode& it) {
  CoordTranslationContext ctx;
  ctx.prog = &p;
  ctx.copy_semantics = it.is_format_copy;
  IterationLowerer lowerer(p, ctx);

  std::vector<std::vector<int>> groups = it.fuse_groups;
  if (groups.empty())
    for (int i = 0; i < static_cast<int>(it.iters.size()); ++i) groups.push_back({i});

  struct Level {
    Stmt loop_skeleton;          // loop var/extent (body filled later)
    std::string block_name;
    std::vector<BlockBinding> bindings;
    std::vector<Stmt> prelude;   // searches hoisted to this block's body
    bool copy = false;
  };
  std::vector<Level> levels;

  for (size_t g = 0; g < groups.size(); ++g) {
    const auto& group = groups[g];
    Level lv;
    lv.copy = it.is_format_copy;
    lv.block_name = g + 1 == groups.size() ? it.name : it.name + "_" + std::to_string(g);

    if (group.size() == 1) {
      const IterSpec& is = it.iters[group[0]];
      const Axis& axis = p.axes.at(is.axis);
      std::string lvar = is.var + "_p";
      Expr parent_abs = ic(0);
      if (!axis.parent.empty()) {
        bool found = false;
        for (const auto& [v, info] : ctx.iter)
          if (info.axis == axis.parent) {
            parent_abs = info.abs;
            found = true;
          }
        if (!found)
          fail(ErrKind::Lowering, "iteration " + it.name + ": axis " + axis.name +
                                      " requires its parent " + axis.parent +
                                      " among preceding iterators");
      }
      Expr extent = simplify(axis_extent_expr(axis, parent_abs));
      lv.loop_skeleton = loop(lvar, extent, nullptr);
      IterInfo info;
      info.axis = is.axis;
      info.kind = is.kind;
      info.rel = var(lvar);
      info.abs = simplify(axis_abs_expr(p.axes, axis, parent_abs, var(lvar)));
      info.coord = simplify(axis_coord_expr(axis, info.abs, info.rel));
      ctx.iter[is.var] = info;
      ctx.order.push_back(is.var);
      BlockBinding bb;
      bb.var = is.var;
      bb.kind = is.kind;
      bb.axis = is.axis;
      bb.bind = var(lvar);
      lv.bindings.push_back(bb);
    } else {
      // Fused group: one loop over all positions of the chain's deepest axis.
      std::string fused_name;
      for (int m : group) fused_name += it.iters[m].var;
      std::string lvar = fused_name + "_p";
      const Axis& last = p.axes.at(it.iters[group.back()].axis);
      lv.loop_skeleton = loop(lvar, ic(axis_space(p.axes, last)), nullptr);

      // Absolute positions, deepest first: ancestors recovered by locating
      // the enclosing segment in the child's indptr array.
      std::vector<Expr> abs(group.size());
      abs[group.size() - 1] = var(lvar);
      for (int m = static_cast<int>(group.size()) - 2; m >= 0; --m) {
        const Axis& child = p.axes.at(it.iters[group[m + 1]].axis);
        if (!child.is_variable())
          fail(ErrKind::Lowering, "fused iterator over fixed axis " + child.name +
                                      " cannot recover ancestor positions");
        auto search = std::make_shared<StmtNode>();
        search->kind = StmtKind::BinarySearchBlock;
        search->result_var = ctx.fresh_name(it.iters[group[m]].var + "_q");
        search->search_buffer = child.indptr_name;
        search->seg_lo = ic(0);
        search->seg_hi = ic(parent_space(p.axes, child) + 1);
        search->key = abs[m + 1];
        search->search_mode = SearchMode::LocateSegment;
        lv.prelude.push_back(search);
        abs[m] = var(search->result_var);
      }
      for (size_t m = 0; m < group.size(); ++m) {
        const IterSpec& is = it.iters[group[m]];
        const Axis& axis = p.axes.at(is.axis);
        IterInfo info;
        info.axis = is.axis;
        info.kind = is.kind;
        info.abs = abs[m];
        if (m == 0) {
          info.rel = abs[m];
        } else {
          const Axis& self = axis;
          Expr pa = abs[m - 1];
          if (self.is_variable())
            info.rel = simplify(sub(abs[m], load(self.indptr_name, {pa})));
          else
            info.rel = simplify(sub(abs[m], mul(pa, ic(self.kind == AxisKind::SparseFixed
                                                           ? self.nnz_cols
                                                           : self.length))));
        }
        info.coord = simplify(axis_coord_expr(axis, info.abs, info.rel));
        ctx.iter[is.var] = info;
        ctx.order.push_back(is.var);
        BlockBinding bb;
        bb.var = is.var;
        bb.kind = is.kind;
        bb.axis = is.axis;
        bb.bind = var(lvar);
        lv.bindings.push_back(bb);
      }
    }
    levels.push_back(std::move(lv));
  }

  // Translate the body (coordinate space -> position space).
  std::function<Stmt(const Stmt&)> tr_body = [&](const Stmt& s) -> Stmt {
    switch (s->kind) {
      case StmtKind::BufferStore:
        return lowerer.translate_store(*s);
      case StmtKind::SeqStmts: {
        std::vector<Stmt> out;
        for (const auto& c : s->seq) out.push_back(tr_body(c));
        return seq(std::move(out));
      }
      default:
        fail(ErrKind::Lowering, "unsupported statement inside sparse iteration");
    }
  };
  Stmt body = it.body ? tr_body(it.body) : seq({});

  // Assemble from the inside out: block(bindings) { prelude; inner }.
  Stmt cur = body;
  for (int g = static_cast<int>(levels.size()) - 1; g >= 0; --g) {
    Level& lv = levels[g];
    std::vector<Stmt> blk_body = lv.prelude;
    blk_body.push_back(cur);
    auto blk = std::make_shared<StmtNode>();
    blk->kind = StmtKind::Block;
    blk->name = lv.block_name;
    blk->bindings = lv.bindings;
    blk->is_copy_block = lv.copy;
    blk->body = seq(std::move(blk_body));
    auto lp = std::make_shared<StmtNode>(*lv.loop_skeleton);
    lp->body = blk;
    cur = lp;
  }
  if (levels.empty()) {
    auto blk = std::make_shared<StmtNode>();
    blk->kind = StmtKind::Block;
    blk->name = it.name;
    blk->is_copy_block = it.is_format_copy;
    blk->body = body;
    cur = blk;
  }
  return cur;
}

}  // namespace

Program generate_nested_loops(const Program& p) {
  Program out = p;
  std::function<Stmt(const Stmt&)> walk = [&](const Stmt& s) -> Stmt {
    if (!s) return s;
    if (s->kind == StmtKind::SparseIteration) return lower_iteration(out, *s);
    if (s->kind == StmtKind::SeqStmts) {
      std::vector<Stmt> seqs;
      for (const auto& c : s->seq) seqs.push_back(walk(c));
      return seq(std::move(seqs));
    }
    return s;
  };
  out.body = walk(p.body);
  out.stage = Stage::II;
  return out;
}

Program translate_coordinates(const Program& p) {
  // Loop generation already runs the translation context (the steps share
  // Eq. 2's dependence order); a program lowered by generate_nested_loops is
  // fully translated. Kept as a separate pass entry for pipeline symmetry.
  if (p.stage != Stage::II) fail(ErrKind::Lowering, "wrong stage: expected stage II program");
  return p;
}

// ---------------------------------------------------------------------------
// Step 4: region analysis
// ---------------------------------------------------------------------------

namespace {

struct VarDomain {
  Expr min;
  Expr extent;
};

class RegionAnalyzer {
 public:
  explicit RegionAnalyzer(const Program& p) : p_(p) {}

  Program run() {
    Program out = p_;
    std::unordered_map<std::string, VarDomain> doms;
    out.body = walk(p_.body, doms);
    return out;
  }

 private:
  struct Access {
    std::string buffer;
    std::vector<Expr> idx;
    bool write;
  };

  void collect(const Stmt& s, std::vector<Access>& acc) {
    if (!s) return;
    std::function<void(const Expr&)> ce = [&](const Expr& e) {
      if (!e) return;
      if (e->kind == ExprKind::BufferLoad) acc.push_back({e->name, e->args, false});
      for (const auto& a : e->args) ce(a);
    };
    switch (s->kind) {
      case StmtKind::BufferStore:
        acc.push_back({s->buffer, s->indices, true});
        for (const auto& i : s->indices) ce(i);
        ce(s->value);
        break;
      case StmtKind::SeqStmts:
        for (const auto& c : s->seq) collect(c, acc);
        break;
      case StmtKind::Loop:
        ce(s->extent);
        collect(s->body, acc);
        break;
      case StmtKind::Block:
        for (const auto& b : s->bindings) ce(b.bind);
        if (s->init) collect(s->init, acc);
        collect(s->body, acc);
        break;
      case StmtKind::BinarySearchBlock: {
        // Reads the whole segment [lo, hi).
        acc.push_back({s->search_buffer, {}, false});
        acc.back().idx.push_back(s->seg_lo);  // marker handled in region_for
        acc.back().idx.push_back(s->seg_hi);
        acc.back().write = false;
        ce(s->key);
        ce(s->seg_lo);
        ce(s->seg_hi);
        break;
      }
      default:
        break;
    }
  }

  bool expr_known(const Expr& e, const std::unordered_map<std::string, VarDomain>& doms) {
    if (!e) return false;
    if (e->kind == ExprKind::BufferLoad) return false;
    if (e->kind == ExprKind::Var) return doms.count(e->name) > 0;
    for (const auto& a : e->args)
      if (!expr_known(a, doms)) return false;
    return true;
  }

  /*! \brief Positional domain of one dimension of a buffer. */
  RegionDim dim_domain(const BufferDecl& b, size_t j) {
    if (b.axes.empty()) {
      int64_t n = b.flat_size >= 0 ? b.flat_size : 0;
      return {ic(0), ic(n)};
    }
    const Axis& a = p_.axes.at(b.axes[j]);
    switch (a.kind) {
      case AxisKind::DenseFixed: return {ic(0), ic(a.length)};
      case AxisKind::SparseFixed: return {ic(0), ic(a.nnz_cols)};
      default: return {ic(0), ic(axis_space(p_.axes, a))};  // any segment fits
    }
  }

  std::vector<BufferRegion> regions_for(const std::vector<Access>& acc, bool writes,
                                        const std::unordered_map<std::string, VarDomain>& doms) {
    // Union per buffer, dimension-wise: a point interval when the index is a
    // known expression of in-scope vars, the whole dimension otherwise.
    std::vector<BufferRegion> out;
    auto find = [&](const std::string& name) -> BufferRegion* {
      for (auto& r : out)
        if (r.buffer == name) return &r;
      return nullptr;
    };
    for (const auto& a : acc) {
      if (a.write != writes) continue;
      const BufferDecl* b = p_.find_buffer(a.buffer);
      if (!b) continue;
      size_t ndim = buffer_ndim(p_, *b);
      std::vector<RegionDim> dims;
      bool segment_marker = a.idx.size() == 2 && ndim == 1 && !a.write &&
                            p_.find_buffer(a.buffer)->role == BufferRole::Aux &&
                            a.idx.size() != ndim;
      if (segment_marker) {
        // Binary search operand: [lo, hi) of the flat array.
        if (expr_known(a.idx[0], doms) && expr_known(a.idx[1], doms))
          dims.push_back({a.idx[0], simplify(sub(a.idx[1], a.idx[0]))});
        else
          dims.push_back(dim_domain(*b, 0));
      } else {
        for (size_t j = 0; j < a.idx.size(); ++j) {
          if (expr_known(a.idx[j], doms))
            dims.push_back({a.idx[j], ic(1)});
          else
            dims.push_back(dim_domain(*b, j));
        }
      }
      BufferRegion* r = find(a.buffer);
      if (!r) {
        out.push_back({a.buffer, dims});
      } else {
        // Dimension-wise union; distinct intervals widen to the whole domain
        // unless structurally identical.
        for (size_t j = 0; j < dims.size() && j < r->dims.size(); ++j) {
          if (!structural_equal(r->dims[j].min, dims[j].min) ||
              !structural_equal(r->dims[j].extent, dims[j].extent))
            r->dims[j] = dim_domain(*b, j);
        }
      }
    }
    return out;
  }

  Stmt walk(const Stmt& s, std::unordered_map<std::string, VarDomain> doms) {
    if (!s) return s;
    auto n = std::make_shared<StmtNode>(*s);
    switch (s->kind) {
      case StmtKind::SeqStmts: {
        for (auto& c : n->seq) {
          c = walk(c, doms);
          if (c->kind == StmtKind::BinarySearchBlock) {
            doms[c->result_var] = {ic(0), simplify(sub(c->seg_hi, c->seg_lo))};
            if (!c->found_var.empty()) doms[c->found_var] = {ic(0), ic(2)};
          }
        }
        return n;
      }
      case StmtKind::Loop: {
        doms[s->loop_var] = {ic(0), s->extent};
        n->body = walk(s->body, doms);
        return n;
      }
      case StmtKind::Block: {
        for (const auto& b : s->bindings)
          if (b.bind && b.bind->kind == ExprKind::Var && doms.count(b.bind->name))
            doms[b.var] = doms[b.bind->name];
          else
            doms[b.var] = {ic(0), ic(0)};
        std::vector<Access> acc;
        if (s->init) collect(s->init, acc);
        collect(s->body, acc);
        n->reads = regions_for(acc, false, doms);
        n->writes = regions_for(acc, true, doms);
        if (s->init) n->init = walk(s->init, doms);
        n->body = walk(s->body, doms);
        return n;
      }
      default:
        return n;
    }
  }

  const Program& p_;
};

}  // namespace

Program analyze_regions(const Program& p) {
  RegionAnalyzer a(p);
  return a.run();
}

Program lower_sparse_iteration(const Program& p) {
  if (p.stage != Stage::I) fail(ErrKind::Lowering, "wrong stage: expected stage I program");
  Program s1 = materialize_aux_buffers(p);
  Program s2 = generate_nested_loops(s1);
  Program s3 = translate_coordinates(s2);
  return analyze_regions(s3);
}

// ---------------------------------------------------------------------------
// Sparse buffer lowering (stage II -> III)
// ---------------------------------------------------------------------------

namespace {

bool descends_from(const AxisTable& axes, const Axis& child, const std::string& anc) {
  const Axis* cur = &child;
  while (!cur->parent.empty()) {
    if (cur->parent == anc) return true;
    cur = &axes.at(cur->parent);
  }
  return false;
}

}  // namespace

Expr flatten_access(const Program& p, const BufferDecl& buf, const std::vector<Expr>& xs) {
  const auto& names = buf.axes;
  size_t n = names.size();
  if (n == 0) return xs.empty() ? ic(0) : xs[0];
  std::vector<const Axis*> ax(n);
  for (size_t i = 0; i < n; ++i) ax[i] = &p.axes.at(names[i]);

  auto parent_pos = [&](size_t i) -> int {
    for (size_t q = 0; q < i; ++q)
      if (names[q] == ax[i]->parent) return static_cast<int>(q);
    return -1;
  };

  // offset(i): absolute position along axis i's chain.
  std::vector<Expr> offset(n);
  for (size_t i = 0; i < n; ++i) {
    int pp = parent_pos(i);
    if (ax[i]->parent.empty() || pp < 0) {
      offset[i] = xs[i];
    } else if (ax[i]->is_variable()) {
      offset[i] = add(load(ax[i]->indptr_name, {offset[pp]}), xs[i]);
    } else {
      int64_t w = ax[i]->kind == AxisKind::SparseFixed ? ax[i]->nnz_cols : ax[i]->length;
      offset[i] = add(mul(offset[pp], ic(w)), xs[i]);
    }
  }

  // nnz(Tree(A_i)): positions in the subtree rooted at i within this buffer.
  auto tree_nnz = [&](size_t i) -> int64_t {
    size_t deepest = i;
    for (size_t q = i + 1; q < n; ++q)
      if (descends_from(p.axes, *ax[q], names[i]) ||
          (deepest != i && descends_from(p.axes, *ax[q], names[deepest])))
        deepest = q;
    return axis_space(p.axes, *ax[deepest]);
  };

  // stride(i) with the paper's recursion, evaluated right to left.
  std::vector<int64_t> stride(n + 1);
  stride[n] = 1;
  for (int i = static_cast<int>(n) - 1; i >= 0; --i) {
    bool root = ax[i]->parent.empty() || parent_pos(i) < 0;
    stride[i] = root ? tree_nnz(i) * stride[i + 1] : stride[i + 1];
  }

  auto is_leaf = [&](size_t i) {
    for (size_t q = i + 1; q < n; ++q)
      if (descends_from(p.axes, *ax[q], names[i])) return false;
    return true;
  };

  Expr flat = ic(0);
  for (size_t i = 0; i < n; ++i)
    if (is_leaf(i)) flat = add(flat, mul(offset[i], ic(stride[i + 1])));
  return simplify(flat);
}

namespace {

class BufferFlattener {
 public:
  explicit BufferFlattener(const Program& p) : p_(p) {}

  Expr expr(const Expr& e) {
    if (!e) return e;
    if (e->kind == ExprKind::BufferLoad) {
      const BufferDecl& b = p_.buffer(e->name);
      std::vector<Expr> idx;
      for (const auto& a : e->args) idx.push_back(expr(a));
      if (b.axes.empty()) return load(e->name, std::move(idx));
      return load(e->name, {flatten_access(p_, b, idx)});
    }
    if (e->args.empty()) return e;
    auto n = std::make_shared<ExprNode>(*e);
    for (auto& a : n->args) a = expr(a);
    return n;
  }

  std::vector<BufferRegion> regions(const std::vector<BufferRegion>& rs) {
    std::vector<BufferRegion> out;
    for (const auto& r : rs) {
      const BufferDecl& b = p_.buffer(r.buffer);
      if (b.axes.empty()) {
        BufferRegion fr;
        fr.buffer = r.buffer;
        for (const auto& d : r.dims) fr.dims.push_back({expr(d.min), expr(d.extent)});
        out.push_back(std::move(fr));
        continue;
      }
      // Conservative box -> flat interval: [flat(min), flat(min+extent-1)].
      std::vector<Expr> lo, hi;
      for (const auto& d : r.dims) {
        lo.push_back(expr(d.min));
        hi.push_back(simplify(sub(add(expr(d.min), expr(d.extent)), ic(1))));
      }
      Expr flo = flatten_access(p_, b, lo);
      Expr fhi = flatten_access(p_, b, hi);
      BufferRegion fr;
      fr.buffer = r.buffer;
      fr.dims.push_back({flo, simplify(add(sub(fhi, flo), ic(1)))});
      out.push_back(std::move(fr));
    }
    return out;
  }

  Stmt stmt(const Stmt& s) {
    if (!s) return s;
    auto n = std::make_shared<StmtNode>(*s);
    switch (s->kind) {
      case StmtKind::BufferStore: {
        const BufferDecl& b = p_.buffer(s->buffer);
        std::vector<Expr> idx;
        for (const auto& i : s->indices) idx.push_back(expr(i));
        if (!b.axes.empty()) idx = {flatten_access(p_, b, idx)};
        n->indices = std::move(idx);
        n->value = expr(s->value);
        return n;
      }
      case StmtKind::SeqStmts:
        for (auto& c : n->seq) c = stmt(c);
        return n;
      case StmtKind::Loop:
        n->extent = expr(s->extent);
        n->body = stmt(s->body);
        return n;
      case StmtKind::Block:
        for (auto& bnd : n->bindings) bnd.bind = expr(bnd.bind);
        n->reads = regions(s->reads);
        n->writes = regions(s->writes);
        if (n->init) n->init = stmt(s->init);
        n->body = stmt(s->body);
        return n;
      case StmtKind::BinarySearchBlock:
        n->key = expr(s->key);
        n->seg_lo = expr(s->seg_lo);
        n->seg_hi = expr(s->seg_hi);
        return n;
      default:
        return n;
    }
  }

 private:
  const Program& p_;
};

}  // namespace

Program lower_sparse_buffers(const Program& p) {
  if (p.stage != Stage::II) fail(ErrKind::Lowering, "wrong stage: expected stage II program");
  for (const Axis& a : p.axes.all()) {
    if (a.is_variable() && a.nnz < 0)
      fail(ErrKind::Lowering, "axis " + a.name + ": unknown nnz, cannot compute strides");
  }
  BufferFlattener f(p);
  Program out = p;
  out.body = f.stmt(p.body);
  for (auto& b : out.buffers) {
    if (!b.axes.empty()) {
      b.flat_size = buffer_flat_size(p, b);
      b.axes.clear();
    }
  }
  out.axes = AxisTable();
  out.stage = Stage::III;
  return out;
}

}  // namespace strata
