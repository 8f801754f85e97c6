/*
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *   http://www.apache.org/licenses/LICENSE-2.0
 */

#include "strata/transform.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <unordered_map>
#include <unordered_set>

namespace strata {

namespace {

StmtNode* find_iteration(Program& p, const std::string& name) {
  StmtNode* found = nullptr;
  std::function<void(Stmt&)> walk = [&](Stmt& s) {
    if (!s) return;
    if (s->kind == StmtKind::SparseIteration && s->name == name) {
      // Clone so the program owns a mutable copy.
      auto n = std::make_shared<StmtNode>(*s);
      s = n;
      found = const_cast<StmtNode*>(s.get());
      return;
    }
    if (s->kind == StmtKind::SeqStmts) {
      auto n = std::make_shared<StmtNode>(*s);
      s = n;
      for (auto& c : const_cast<StmtNode*>(s.get())->seq) walk(c);
    }
  };
  walk(p.body);
  return found;
}

}  // namespace

Program sparse_reorder(const Program& p, const std::string& iter_name,
                       const std::vector<std::string>& new_order) {
  Program out = p;
  StmtNode* it = find_iteration(out, iter_name);
  if (!it) fail(ErrKind::Lookup, "unknown sparse iteration: " + iter_name);
  if (!it->fuse_groups.empty())
    fail(ErrKind::Schedule, "sparse_reorder must run before sparse_fuse");
  if (new_order.size() != it->iters.size())
    fail(ErrKind::Schedule, "sparse_reorder: order must mention every axis exactly once");

  std::vector<IterSpec> reordered;
  std::vector<bool> used(it->iters.size(), false);
  for (const auto& ax : new_order) {
    bool hit = false;
    for (size_t i = 0; i < it->iters.size(); ++i) {
      if (!used[i] && it->iters[i].axis == ax) {
        reordered.push_back(it->iters[i]);
        used[i] = true;
        hit = true;
        break;
      }
    }
    if (!hit) fail(ErrKind::Schedule, "sparse_reorder: axis " + ax + " not in iteration");
  }
  // Dependency check: every axis comes after all of its ancestors.
  std::unordered_map<std::string, size_t> pos;
  for (size_t i = 0; i < reordered.size(); ++i) pos[reordered[i].axis] = i;
  for (size_t i = 0; i < reordered.size(); ++i) {
    const Axis* a = &p.axes.at(reordered[i].axis);
    while (!a->parent.empty()) {
      auto dep = pos.find(a->parent);
      if (dep != pos.end() && dep->second > i)
        fail(ErrKind::Schedule, "sparse_reorder: axis " + reordered[i].axis +
                                    " placed before its ancestor " + a->parent);
      a = &p.axes.at(a->parent);
    }
  }
  it->iters = std::move(reordered);
  return out;
}

Program sparse_fuse(const Program& p, const std::string& iter_name,
                    const std::vector<std::string>& axes) {
  if (axes.size() <= 1) return p;  // fusing a single axis is a no-op
  Program out = p;
  StmtNode* it = find_iteration(out, iter_name);
  if (!it) fail(ErrKind::Lookup, "unknown sparse iteration: " + iter_name);
  if (!it->fuse_groups.empty())
    fail(ErrKind::Schedule, "sparse_fuse: iteration already carries a fused group");

  // The fused axes must be contiguous in iteration order.
  size_t start = it->iters.size();
  for (size_t i = 0; i < it->iters.size(); ++i)
    if (it->iters[i].axis == axes[0]) start = i;
  if (start == it->iters.size())
    fail(ErrKind::Schedule, "sparse_fuse: axis " + axes[0] + " not in iteration");
  if (start + axes.size() > it->iters.size())
    fail(ErrKind::Schedule, "sparse_fuse: axes not contiguous in iteration order");
  for (size_t k = 0; k < axes.size(); ++k) {
    const IterSpec& is = it->iters[start + k];
    if (is.axis != axes[k])
      fail(ErrKind::Schedule, "sparse_fuse: axes not contiguous in iteration order");
    if (is.kind != IterKind::Spatial)
      fail(ErrKind::Schedule, "sparse_fuse: only spatial iterators can be fused");
    const Axis& a = p.axes.at(is.axis);
    if (k == 0) {
      if (!a.parent.empty())
        fail(ErrKind::Schedule, "sparse_fuse: fused group must start at a root axis");
    } else if (a.parent != axes[k - 1]) {
      fail(ErrKind::Schedule, "sparse_fuse: axis " + is.axis + " is not a child of " +
                                  axes[k - 1]);
    }
  }
  std::vector<std::vector<int>> groups;
  for (size_t i = 0; i < it->iters.size(); ++i) {
    if (i == start) {
      std::vector<int> g;
      for (size_t k = 0; k < axes.size(); ++k) g.push_back(static_cast<int>(start + k));
      groups.push_back(std::move(g));
    } else if (i < start || i >= start + axes.size()) {
      groups.push_back({static_cast<int>(i)});
    }
  }
  it->fuse_groups = std::move(groups);
  return out;
}

// ---------------------------------------------------------------------------
// Format decomposition
// ---------------------------------------------------------------------------

namespace {

int64_t eval_affine(const Expr& e, const std::unordered_map<std::string, int64_t>& env) {
  switch (e->kind) {
    case ExprKind::IntConst: return e->ival;
    case ExprKind::Var: {
      auto it = env.find(e->name);
      if (it == env.end()) fail(ErrKind::Validation, "index map: unbound var " + e->name);
      return it->second;
    }
    case ExprKind::Add: return eval_affine(e->args[0], env) + eval_affine(e->args[1], env);
    case ExprKind::Sub: return eval_affine(e->args[0], env) - eval_affine(e->args[1], env);
    case ExprKind::Mul: return eval_affine(e->args[0], env) * eval_affine(e->args[1], env);
    case ExprKind::FloorDiv: {
      int64_t a = eval_affine(e->args[0], env), b = eval_affine(e->args[1], env);
      int64_t q = a / b;
      if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
      return q;
    }
    case ExprKind::Mod: {
      int64_t a = eval_affine(e->args[0], env), b = eval_affine(e->args[1], env);
      int64_t q = a / b;
      if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
      return a - q * b;
    }
    default:
      fail(ErrKind::Validation, "index map must be affine (+, -, *, /, %)");
  }
}

const StmtNode* sole_compute_iteration(const Program& p) {
  const StmtNode* found = nullptr;
  std::function<void(const Stmt&)> walk = [&](const Stmt& s) {
    if (!s) return;
    if (s->kind == StmtKind::SparseIteration && !s->is_format_copy) {
      if (found) fail(ErrKind::Validation, "decompose_format expects a single compute iteration");
      found = s.get();
    } else if (s->kind == StmtKind::SeqStmts) {
      for (const auto& c : s->seq) walk(c);
    }
  };
  walk(p.body);
  if (!found) fail(ErrKind::Validation, "decompose_format: no compute iteration found");
  return found;
}

}  // namespace

std::vector<std::string> check_rule_roundtrip(const FormatRewriteRule& rule) {
  std::vector<std::string> out;
  for (const Expr& e : rule.idx_map)
    if (!expr_is_affine_like(e)) out.push_back(rule.name + ": idx map not affine");
  for (const Expr& e : rule.inv_idx_map)
    if (!expr_is_affine_like(e)) out.push_back(rule.name + ": inverse idx map not affine");
  if (!out.empty()) return out;

  // Sample the claimed set: stored cells of the rule's storage.
  int64_t checked = 0;
  for_each_stored_cell(rule.storage, [&](int64_t i, int64_t j, double) {
    if (checked > 512 || !out.empty()) return;
    ++checked;
    std::unordered_map<std::string, int64_t> env;
    // Convention: the last two original variables are the matrix (row, col);
    // leading variables (e.g. a relation index) stay fixed at zero samples.
    size_t nv = rule.orig_vars.size();
    for (size_t q = 0; q + 2 < nv; ++q) env[rule.orig_vars[q]] = 0;
    env[rule.orig_vars[nv - 2]] = i;
    env[rule.orig_vars[nv - 1]] = j;
    std::unordered_map<std::string, int64_t> env2;
    for (size_t q = 0; q < rule.idx_map.size(); ++q)
      env2[rule.new_vars[q]] = eval_affine(rule.idx_map[q], env);
    std::vector<int64_t> back;
    for (const Expr& e : rule.inv_idx_map) back.push_back(eval_affine(e, env2));
    if (back.size() < 2 || back[back.size() - 2] != i || back[back.size() - 1] != j)
      out.push_back(rule.name + ": f_inv(f(I)) != I at (" + std::to_string(i) + ", " +
                    std::to_string(j) + ")");
  });
  return out;
}

std::pair<Program, AuxDataRequest> decompose_format(const Program& p,
                                                    const std::vector<FormatRewriteRule>& rules) {
  if (p.stage != Stage::I) fail(ErrKind::Validation, "decompose_format expects stage I");
  if (rules.empty())
    fail(ErrKind::Validation, "decompose_format: empty rule set leaves outputs unwritten");
  const StmtNode* comp = sole_compute_iteration(p);

  for (const auto& r : rules) {
    if (!p.find_buffer(r.target_buffer))
      fail(ErrKind::Lookup, "decompose_format: unknown target buffer " + r.target_buffer);
    for (const Expr& e : r.idx_map)
      if (!expr_is_affine_like(e))
        fail(ErrKind::Validation, r.name + ": index map must be affine");
    for (const Expr& e : r.inv_idx_map)
      if (!expr_is_affine_like(e))
        fail(ErrKind::Validation, r.name + ": inverse index map must be affine");
  }

  Program out = p;
  AuxDataRequest req;

  // Map from original iterator var (over a mapped axis) to its buffer-dim slot
  // in the target access, fixed by the compute body's target accesses.
  const BufferDecl& target = p.buffer(rules[0].target_buffer);

  std::vector<Stmt> copies, computes;
  for (const auto& rule : rules) {
    if (rule.target_buffer != rules[0].target_buffer)
      fail(ErrKind::Validation, "decompose_format: all rules must share one target buffer");
    // Declare new axes and the new buffer.
    for (const Axis& a : rule.new_axes.all()) out.axes.add(a);
    BufferDecl nb;
    nb.name = rule.new_buffer;
    nb.axes = rule.new_buffer_axes;
    nb.dtype = target.dtype;
    nb.role = BufferRole::Temp;  // copies fill it; mark_preconverted flips to input
    out.buffers.push_back(nb);

    // Aux arrays the caller must provide (indptr/indices of every new axis).
    for (const Axis& a : rule.new_axes.all()) {
      if (a.is_variable()) {
        auto it = rule.storage.aux.find(a.indptr_name);
        req.entries.push_back({a.indptr_name, rule.name,
                               it == rule.storage.aux.end()
                                   ? 0
                                   : static_cast<int64_t>(it->second.size())});
      }
      if (a.is_sparse()) {
        auto it = rule.storage.aux.find(a.indices_name);
        req.entries.push_back({a.indices_name, rule.name,
                               it == rule.storage.aux.end()
                                   ? 0
                                   : static_cast<int64_t>(it->second.size())});
      }
    }

    // (a) copy iteration: iterate the new buffer, gather from the original
    // through the inverse map. Reads of absent coordinates produce zero and
    // padding slots are masked, so executing the copies reproduces exactly
    // the converted storage.
    std::vector<IterSpec> copy_iters;
    std::unordered_map<std::string, Expr> inv_sub;
    for (size_t d = 0; d < rule.new_buffer_axes.size(); ++d) {
      std::string v = "c" + std::to_string(d);
      copy_iters.push_back({v, rule.new_buffer_axes[d], IterKind::Spatial});
      inv_sub[rule.new_vars[d]] = var(v);
    }
    std::vector<Expr> copy_dst;
    for (const auto& is : copy_iters) copy_dst.push_back(var(is.var));
    std::vector<Expr> src_idx;
    for (const Expr& e : rule.inv_idx_map) src_idx.push_back(substitute(e, inv_sub));
    Stmt copy_body = store(rule.new_buffer, copy_dst,
                           load(rule.target_buffer, src_idx), /*reduce=*/false);
    auto copy_it = std::make_shared<StmtNode>();
    copy_it->kind = StmtKind::SparseIteration;
    copy_it->name = rule.name + "_copy";
    copy_it->iters = copy_iters;
    copy_it->body = copy_body;
    copy_it->is_format_copy = true;
    copies.push_back(copy_it);

    // (b) compute iteration mirroring the original computation.
    std::unordered_set<std::string> mapped_axes;
    for (const auto& [oa, nas] : rule.axis_map) mapped_axes.insert(oa);
    // Iterator kind of each new axis comes from the original axis it refines.
    std::unordered_map<std::string, IterKind> new_axis_kind;
    std::unordered_map<std::string, std::string> orig_var_of_axis;
    for (const auto& is : comp->iters) orig_var_of_axis[is.axis] = is.var;
    for (const auto& [oa, nas] : rule.axis_map) {
      IterKind k = IterKind::Spatial;
      for (const auto& is : comp->iters)
        if (is.axis == oa) k = is.kind;
      for (const auto& na : nas) new_axis_kind[na] = k;
    }

    std::vector<IterSpec> comp_iters;
    std::unordered_map<std::string, Expr> var_sub;  // orig iter var -> expr over new vars
    std::unordered_map<std::string, Expr> new_var_vals;
    for (size_t d = 0; d < rule.new_buffer_axes.size(); ++d) {
      std::string v = rule.name + "_v" + std::to_string(d);
      auto kind_it = new_axis_kind.find(rule.new_buffer_axes[d]);
      comp_iters.push_back({v, rule.new_buffer_axes[d],
                            kind_it == new_axis_kind.end() ? IterKind::Spatial
                                                           : kind_it->second});
      new_var_vals[rule.new_vars[d]] = var(v);
    }
    // Original iterators over unmapped axes are retained after the new ones.
    for (const auto& is : comp->iters)
      if (!mapped_axes.count(is.axis)) comp_iters.push_back(is);

    // Substitution for original iterator variables over mapped axes: the
    // target access A[i, j, ...] pairs dim q with f_inv component q.
    for (size_t q = 0; q < target.axes.size(); ++q) {
      auto vit = orig_var_of_axis.find(target.axes[q]);
      if (vit == orig_var_of_axis.end()) continue;
      if (!mapped_axes.count(target.axes[q])) continue;
      var_sub[vit->second] = simplify(substitute(rule.inv_idx_map[q], new_var_vals));
    }

    std::vector<Expr> new_pos_vars;
    for (size_t d = 0; d < rule.new_buffer_axes.size(); ++d)
      new_pos_vars.push_back(var(comp_iters[d].var));

    std::function<Expr(const Expr&)> rw_expr = [&](const Expr& e) -> Expr {
      if (e->kind == ExprKind::BufferLoad && e->name == rule.target_buffer) {
        for (const Expr& ix : e->args)
          if (ix->kind != ExprKind::Var)
            fail(ErrKind::Validation,
                 "decompose_format: target accesses must use plain iterator indices");
        return load(rule.new_buffer, new_pos_vars);
      }
      if (e->kind == ExprKind::Var) {
        auto it = var_sub.find(e->name);
        return it == var_sub.end() ? e : it->second;
      }
      if (e->args.empty()) return e;
      auto n = std::make_shared<ExprNode>(*e);
      for (auto& a : n->args) a = rw_expr(a);
      return n;
    };
    std::function<Stmt(const Stmt&)> rw_stmt = [&](const Stmt& s) -> Stmt {
      switch (s->kind) {
        case StmtKind::BufferStore: {
          if (s->buffer == rule.target_buffer)
            fail(ErrKind::Validation, "decompose_format: target buffer is read-only");
          std::vector<Expr> idx;
          for (const auto& i : s->indices) idx.push_back(simplify(rw_expr(i)));
          return store(s->buffer, idx, simplify(rw_expr(s->value)), s->reduce);
        }
        case StmtKind::SeqStmts: {
          std::vector<Stmt> out_seq;
          for (const auto& c : s->seq) out_seq.push_back(rw_stmt(c));
          return seq(std::move(out_seq));
        }
        default:
          fail(ErrKind::Validation, "decompose_format: unsupported statement in body");
      }
    };

    auto comp_it = std::make_shared<StmtNode>();
    comp_it->kind = StmtKind::SparseIteration;
    comp_it->name = comp->name + "_" + rule.name;
    comp_it->iters = comp_iters;
    comp_it->body = rw_stmt(comp->body);
    computes.push_back(comp_it);
  }

  // Copies first, then computes: every read of a new buffer is dominated by
  // its copy iteration.
  std::vector<Stmt> body = copies;
  body.insert(body.end(), computes.begin(), computes.end());
  out.body = seq(std::move(body));
  return {out, req};
}

void mark_preconverted(Program& p, const std::string& buffer, bool preconverted) {
  BufferDecl& b = p.buffer_mut(buffer);
  b.preconverted = preconverted;
  b.role = preconverted ? BufferRole::Input : BufferRole::Temp;
}

std::vector<std::string> verify_coverage(const TensorStorage& original,
                                         const std::vector<FormatRewriteRule>& rules) {
  std::vector<std::string> out;
  DenseMatrix orig = reconstruct_dense(original);
  DenseMatrix sum(orig.rows, orig.cols);
  std::vector<int> claims(orig.rows * orig.cols, 0);
  for (const auto& rule : rules) {
    for_each_stored_cell(rule.storage, [&](int64_t i, int64_t j, double v) {
      if (i < orig.rows && j < orig.cols) {
        sum.at(i, j) += v;
        claims[i * orig.cols + j] += 1;
      } else if (v != 0.0) {
        out.push_back(rule.name + ": non-zero value in padding region");
      }
    });
  }
  for (int64_t i = 0; i < orig.rows; ++i)
    for (int64_t j = 0; j < orig.cols; ++j) {
      if (sum.at(i, j) != orig.at(i, j)) {
        out.push_back("value mismatch at (" + std::to_string(i) + ", " + std::to_string(j) +
                      ")");
        return out;
      }
      if (orig.at(i, j) != 0.0 && claims[i * orig.cols + j] != 1) {
        out.push_back("non-zero (" + std::to_string(i) + ", " + std::to_string(j) +
                      ") claimed by " + std::to_string(claims[i * orig.cols + j]) + " rules");
        return out;
      }
    }
  return out;
}

// ---------------------------------------------------------------------------
// Built-in rule generators
// ---------------------------------------------------------------------------

FormatRewriteRule identity_rule(const TensorStorage& csr, const std::string& name) {
  FormatRewriteRule r;
  r.name = name;
  r.target_buffer = "A";
  r.storage = build_csr(csr_to_coo(csr), name + "_");
  for (const Axis& a : r.storage.axes.all()) r.new_axes.add(a);
  r.new_buffer_axes = r.storage.buffer_axes;
  r.new_buffer = "A_" + name;
  r.axis_map = {{csr.buffer_axes[0], {r.storage.buffer_axes[0]}},
                {csr.buffer_axes[1], {r.storage.buffer_axes[1]}}};
  r.orig_vars = {"i", "j"};
  r.idx_map = {var("i"), var("j")};
  r.new_vars = {"ni", "nj"};
  r.inv_idx_map = {var("ni"), var("nj")};
  return r;
}

FormatRewriteRule ell_rule(const TensorStorage& csr, int64_t w, const std::string& name) {
  FormatRewriteRule r;
  r.name = name;
  r.target_buffer = "A";
  r.storage = csr_to_ell(csr, w, name + "_");
  for (const Axis& a : r.storage.axes.all()) r.new_axes.add(a);
  r.new_buffer_axes = r.storage.buffer_axes;
  r.new_buffer = "A_" + name;
  r.axis_map = {{csr.buffer_axes[0], {r.storage.buffer_axes[0]}},
                {csr.buffer_axes[1], {r.storage.buffer_axes[1]}}};
  r.orig_vars = {"i", "j"};
  r.idx_map = {var("i"), var("j")};
  r.new_vars = {"ni", "nj"};
  r.inv_idx_map = {var("ni"), var("nj")};
  return r;
}

FormatRewriteRule bsr_rule(const TensorStorage& csr, int64_t b, const std::string& name) {
  FormatRewriteRule r;
  r.name = name;
  r.target_buffer = "A";
  r.storage = csr_to_bsr(csr, b, name + "_");
  for (const Axis& a : r.storage.axes.all()) r.new_axes.add(a);
  r.new_buffer_axes = r.storage.buffer_axes;  // [IO, JO, II, JI]
  r.new_buffer = "A_" + name;
  r.axis_map = {{csr.buffer_axes[0], {r.new_buffer_axes[0], r.new_buffer_axes[2]}},
                {csr.buffer_axes[1], {r.new_buffer_axes[1], r.new_buffer_axes[3]}}};
  r.orig_vars = {"i", "j"};
  r.idx_map = {floordiv(var("i"), ic(b)), floordiv(var("j"), ic(b)), mod(var("i"), ic(b)),
               mod(var("j"), ic(b))};
  r.new_vars = {"io", "jo", "ii", "ji"};
  r.inv_idx_map = {add(mul(var("io"), ic(b)), var("ii")),
                   add(mul(var("jo"), ic(b)), var("ji"))};
  return r;
}

FormatRewriteRule dbsr_rule(const TensorStorage& csr, int64_t b, const std::string& name) {
  FormatRewriteRule r;
  r.name = name;
  r.target_buffer = "A";
  r.storage = csr_to_dbsr(csr, b, name + "_");
  for (const Axis& a : r.storage.axes.all()) r.new_axes.add(a);
  r.new_buffer_axes = r.storage.buffer_axes;  // [O, IO, JO, II, JI]
  r.new_buffer = "A_" + name;
  r.axis_map = {{csr.buffer_axes[0],
                 {r.new_buffer_axes[0], r.new_buffer_axes[1], r.new_buffer_axes[3]}},
                {csr.buffer_axes[1], {r.new_buffer_axes[2], r.new_buffer_axes[4]}}};
  r.orig_vars = {"i", "j"};
  r.idx_map = {ic(0), floordiv(var("i"), ic(b)), floordiv(var("j"), ic(b)),
               mod(var("i"), ic(b)), mod(var("j"), ic(b))};
  r.new_vars = {"o", "io", "jo", "ii", "ji"};
  r.inv_idx_map = {add(mul(var("io"), ic(b)), var("ii")),
                   add(mul(var("jo"), ic(b)), var("ji"))};
  return r;
}

FormatRewriteRule srbcrs_rule(const TensorStorage& csr, int64_t t, int64_t g,
                              const std::string& name) {
  FormatRewriteRule r;
  r.name = name;
  r.target_buffer = "A";
  r.storage = csr_to_srbcrs(csr, t, g, name + "_");
  for (const Axis& a : r.storage.axes.all()) r.new_axes.add(a);
  r.new_buffer_axes = r.storage.buffer_axes;  // [IO, G, JT, E]
  r.new_buffer = "A_" + name;
  r.axis_map = {{csr.buffer_axes[0], {r.new_buffer_axes[0], r.new_buffer_axes[3]}},
                {csr.buffer_axes[1], {r.new_buffer_axes[1], r.new_buffer_axes[2]}}};
  r.orig_vars = {"i", "j"};
  // The group ordinal is position-dependent; its coordinate slot is a
  // placeholder that the inverse ignores, so f_inv(f(I)) == I still holds.
  r.idx_map = {floordiv(var("i"), ic(t)), ic(0), var("j"), mod(var("i"), ic(t))};
  r.new_vars = {"io", "gg", "jt", "e"};
  r.inv_idx_map = {add(mul(var("io"), ic(t)), var("e")), var("jt")};
  return r;
}

std::vector<FormatRewriteRule> hyb_rules(const TensorStorage& csr, int c, int k,
                                         const std::string& name) {
  HybDecomposition h = decompose_hyb(csr, c, k, name + "_");
  std::vector<FormatRewriteRule> rules;
  for (int p = 0; p < c; ++p) {
    for (int b = 0; b <= k; ++b) {
      std::string pre = name + "_hyb_p" + std::to_string(p) + "_b" + std::to_string(b) + "_";
      const EllBucketPart* part = nullptr;
      for (const auto& q : h.parts)
        if (q.partition == p && q.bucket == b) part = &q;
      FormatRewriteRule r;
      r.name = name + "_p" + std::to_string(p) + "_b" + std::to_string(b);
      r.target_buffer = "A";
      if (part) {
        r.storage = part->ell;
      } else {
        r.storage = build_ell_bucket(csr.rows, csr.cols, int64_t{1} << b, {},
                                     csr.values.dtype, {}, pre);
      }
      for (const Axis& a : r.storage.axes.all()) r.new_axes.add(a);
      r.new_buffer_axes = r.storage.buffer_axes;  // [O, I, J]
      r.new_buffer = "A_" + r.name;
      r.axis_map = {{csr.buffer_axes[0], {r.new_buffer_axes[0], r.new_buffer_axes[1]}},
                    {csr.buffer_axes[1], {r.new_buffer_axes[2]}}};
      r.orig_vars = {"i", "j"};
      r.idx_map = {ic(0), var("i"), var("j")};
      r.new_vars = {"o", "ni", "nj"};
      r.inv_idx_map = {var("ni"), var("nj")};
      rules.push_back(std::move(r));
    }
  }
  return rules;
}

}  // namespace strata
