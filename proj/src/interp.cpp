/*
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *   http://www.apache.org/licenses/LICENSE-2.0
 */

#include "strata/interp.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <memory>
#include <thread>
#include <unordered_map>

namespace strata {

bool loop_parallel_safe(const Stmt& loop_stmt) {
  if (!loop_stmt || loop_stmt->kind != StmtKind::Loop) return false;
  const std::string& v = loop_stmt->loop_var;
  bool safe = true;
  std::function<void(const Stmt&)> walk = [&](const Stmt& s) {
    if (!s || !safe) return;
    switch (s->kind) {
      case StmtKind::BufferStore: {
        bool disjoint = false;
        for (const auto& i : s->indices)
          if (expr_uses_var(i, v) && expr_is_affine_like(i)) disjoint = true;
        if (!disjoint) safe = false;
        break;
      }
      case StmtKind::SeqStmts:
        for (const auto& c : s->seq) walk(c);
        break;
      case StmtKind::Loop:
      case StmtKind::Block:
        if (s->init) walk(s->init);
        walk(s->body);
        break;
      default:
        break;
    }
  };
  walk(loop_stmt->body);
  return safe;
}

namespace {

struct Value {
  bool is_f = false;
  int64_t i = 0;
  double f = 0.0;

  static Value I(int64_t v) { return {false, v, 0.0}; }
  static Value F(double v) { return {true, 0, v}; }
  double as_f() const { return is_f ? f : static_cast<double>(i); }
  int64_t as_i() const { return is_f ? static_cast<int64_t>(f) : i; }
};

struct Buf {
  DType dtype = DType::F64;
  int32_t* pi = nullptr;
  float* pf = nullptr;
  double* pd = nullptr;
  int64_t n = 0;
  bool is_output = false;
  std::string name;

  Value get(int64_t k) const {
    switch (dtype) {
      case DType::I32: return Value::I(pi[k]);
      case DType::F32: return Value::F(pf[k]);
      case DType::F64: return Value::F(pd[k]);
    }
    return Value::I(0);
  }
  void set(int64_t k, const Value& v) {
    switch (dtype) {
      case DType::I32: pi[k] = static_cast<int32_t>(v.as_i()); break;
      case DType::F32: pf[k] = static_cast<float>(v.as_f()); break;
      case DType::F64: pd[k] = v.as_f(); break;
    }
  }
  void acc(int64_t k, const Value& v) {
    switch (dtype) {
      case DType::I32: pi[k] = static_cast<int32_t>(pi[k] + v.as_i()); break;
      case DType::F32: pf[k] = static_cast<float>(pf[k] + v.as_f()); break;
      case DType::F64: pd[k] = pd[k] + v.as_f(); break;
    }
  }
};

struct CExpr {
  ExprKind kind = ExprKind::IntConst;
  CmpOp cmp = CmpOp::Eq;
  int slot = -1;
  int buf = -1;
  int64_t ival = 0;
  double fval = 0.0;
  std::vector<CExpr> args;
};

struct CRegion {
  int buf = -1;
  CExpr lo, extent;
  bool write = false;
};

struct CStmt {
  StmtKind kind = StmtKind::SeqStmts;
  // store
  int buf = -1;
  std::vector<CExpr> idx;
  CExpr value;
  bool reduce = false;
  // seq / bodies
  std::vector<CStmt> seq;
  std::unique_ptr<CStmt> body;
  std::unique_ptr<CStmt> init;
  // loop
  int var_slot = -1;
  CExpr extent;
  LoopAnno anno = LoopAnno::None;
  bool par_safe = false;
  // block
  std::vector<std::pair<int, CExpr>> binds;
  std::vector<int> reduction_slots;
  std::vector<CRegion> regions;
  bool is_copy = false;
  std::string name;
  // search
  int res_slot = -1, found_slot = -1;
  int sbuf = -1;
  CExpr key, lo, hi;
  SearchMode smode = SearchMode::LowerBound;
  bool guarded = false;
};

class Machine;

struct ExecAbort {};  // checked-mode violation unwinds

class Compiler {
 public:
  Compiler(const Program& p, std::vector<Buf>& bufs) : p_(p), bufs_(bufs) {
    for (size_t i = 0; i < bufs.size(); ++i) buf_index_[bufs[i].name] = static_cast<int>(i);
  }

  int slot_of(const std::string& name) {
    auto it = slots_.find(name);
    if (it != slots_.end()) return it->second;
    int s = static_cast<int>(slots_.size());
    slots_[name] = s;
    return s;
  }
  size_t num_slots() const { return slots_.size(); }

  int buf_of(const std::string& name) {
    auto it = buf_index_.find(name);
    if (it == buf_index_.end()) fail(ErrKind::Exec, "missing binding for buffer: " + name);
    return it->second;
  }

  CExpr expr(const Expr& e) {
    CExpr c;
    c.kind = e->kind;
    c.cmp = e->cmp;
    c.ival = e->ival;
    c.fval = e->fval;
    switch (e->kind) {
      case ExprKind::Var: c.slot = slot_of(e->name); break;
      case ExprKind::BufferLoad: c.buf = buf_of(e->name); break;
      default: break;
    }
    for (const auto& a : e->args) c.args.push_back(expr(a));
    return c;
  }

  CStmt stmt(const Stmt& s) {
    CStmt c;
    c.kind = s->kind;
    switch (s->kind) {
      case StmtKind::BufferStore:
        c.buf = buf_of(s->buffer);
        for (const auto& i : s->indices) c.idx.push_back(expr(i));
        c.value = expr(s->value);
        c.reduce = s->reduce;
        break;
      case StmtKind::SeqStmts:
        for (const auto& x : s->seq) c.seq.push_back(stmt(x));
        break;
      case StmtKind::Loop:
        c.var_slot = slot_of(s->loop_var);
        c.extent = expr(s->extent);
        c.anno = s->anno;
        c.par_safe = s->anno == LoopAnno::Parallel && loop_parallel_safe(s);
        c.body = std::make_unique<CStmt>(stmt(s->body));
        break;
      case StmtKind::Block: {
        c.name = s->name;
        c.is_copy = s->is_copy_block;
        for (const auto& b : s->bindings) {
          int sl = slot_of(b.var);
          c.binds.emplace_back(sl, expr(b.bind));
          if (b.kind == IterKind::Reduction) c.reduction_slots.push_back(sl);
        }
        for (const auto& r : s->reads) add_region(c, r, false);
        for (const auto& r : s->writes) add_region(c, r, true);
        if (s->init) c.init = std::make_unique<CStmt>(stmt(s->init));
        c.body = std::make_unique<CStmt>(stmt(s->body));
        break;
      }
      case StmtKind::BinarySearchBlock:
        c.res_slot = slot_of(s->result_var);
        if (s->guarded) c.found_slot = slot_of(s->found_var);
        c.sbuf = buf_of(s->search_buffer);
        c.key = expr(s->key);
        c.lo = expr(s->seg_lo);
        c.hi = expr(s->seg_hi);
        c.smode = s->search_mode;
        c.guarded = s->guarded;
        break;
      case StmtKind::SparseIteration:
        fail(ErrKind::Exec, "cannot interpret a stage-I sparse iteration directly");
    }
    return c;
  }

 private:
  void add_region(CStmt& c, const BufferRegion& r, bool write) {
    if (r.dims.size() != 1) return;  // only flat (stage III) regions are enforced
    CRegion cr;
    cr.buf = buf_of(r.buffer);
    cr.lo = expr(r.dims[0].min);
    cr.extent = expr(r.dims[0].extent);
    cr.write = write;
    c.regions.push_back(cr);
  }

  const Program& p_;
  std::vector<Buf>& bufs_;
  std::unordered_map<std::string, int> slots_;
  std::unordered_map<std::string, int> buf_index_;
};

struct RegionFrame {
  int buf;
  int64_t lo, hi;
  bool write;
};

class Machine {
 public:
  Machine(std::vector<Buf>& bufs, size_t slots, const ExecOptions& opts, ExecReport& report)
      : bufs_(bufs), env_(slots, 0), opts_(opts), report_(report) {}

  void set_slot(int slot, int64_t v) { env_[slot] = v; }

  Machine(const Machine& o)
      : bufs_(o.bufs_), env_(o.env_), opts_(o.opts_), report_(o.report_),
        regions_(o.regions_) {}

  ExecStats stats;

  void run(const CStmt& s) {
    switch (s.kind) {
      case StmtKind::BufferStore: {
        Value v = eval(s.value);
        int64_t k = index_of(s);
        Buf& b = bufs_[s.buf];
        check_access(s.buf, k, true);
        if (s.reduce)
          b.acc(k, v);
        else
          b.set(k, v);
        ++stats.stores;
        if (opts_.mode == ExecMode::Checked && b.dtype != DType::I32) {
          double w = b.get(k).as_f();
          if (!std::isfinite(w)) violation("non-finite value stored to " + b.name);
        }
        break;
      }
      case StmtKind::SeqStmts:
        for (const auto& c : s.seq) run(c);
        break;
      case StmtKind::Loop:
        run_loop(s);
        break;
      case StmtKind::Block:
        run_block(s);
        break;
      case StmtKind::BinarySearchBlock:
        run_search(s);
        break;
      default:
        break;
    }
  }

  Value eval(const CExpr& e) {
    switch (e.kind) {
      case ExprKind::IntConst: return Value::I(e.ival);
      case ExprKind::FloatConst: return Value::F(e.fval);
      case ExprKind::Var: return Value::I(env_[e.slot]);
      case ExprKind::BufferLoad: {
        int64_t k = 0;
        if (!e.args.empty()) k = eval(e.args[0]).as_i();
        check_access(e.buf, k, false);
        ++stats.loads;
        return bufs_[e.buf].get(k);
      }
      case ExprKind::Select: {
        Value c = eval(e.args[0]);
        return c.as_i() != 0 ? eval(e.args[1]) : eval(e.args[2]);
      }
      case ExprKind::Compare: {
        Value a = eval(e.args[0]), b = eval(e.args[1]);
        bool r = false;
        if (a.is_f || b.is_f) {
          double x = a.as_f(), y = b.as_f();
          switch (e.cmp) {
            case CmpOp::Eq: r = x == y; break;
            case CmpOp::Ne: r = x != y; break;
            case CmpOp::Lt: r = x < y; break;
            case CmpOp::Le: r = x <= y; break;
            case CmpOp::Gt: r = x > y; break;
            case CmpOp::Ge: r = x >= y; break;
          }
        } else {
          switch (e.cmp) {
            case CmpOp::Eq: r = a.i == b.i; break;
            case CmpOp::Ne: r = a.i != b.i; break;
            case CmpOp::Lt: r = a.i < b.i; break;
            case CmpOp::Le: r = a.i <= b.i; break;
            case CmpOp::Gt: r = a.i > b.i; break;
            case CmpOp::Ge: r = a.i >= b.i; break;
          }
        }
        return Value::I(r ? 1 : 0);
      }
      default: {
        Value a = eval(e.args[0]), b = eval(e.args[1]);
        ++stats.flops;
        if (a.is_f || b.is_f) {
          double x = a.as_f(), y = b.as_f();
          switch (e.kind) {
            case ExprKind::Add: return Value::F(x + y);
            case ExprKind::Sub: return Value::F(x - y);
            case ExprKind::Mul: return Value::F(x * y);
            case ExprKind::FloorDiv: return Value::F(x / y);
            case ExprKind::Mod: return Value::F(std::fmod(x, y));
            case ExprKind::Min: return Value::F(std::min(x, y));
            case ExprKind::Max: return Value::F(std::max(x, y));
            default: break;
          }
        } else {
          int64_t x = a.i, y = b.i;
          switch (e.kind) {
            case ExprKind::Add: return Value::I(x + y);
            case ExprKind::Sub: return Value::I(x - y);
            case ExprKind::Mul: return Value::I(x * y);
            case ExprKind::FloorDiv: {
              if (y == 0) {
                violation("division by zero");
                return Value::I(0);
              }
              int64_t q = x / y;
              if ((x % y != 0) && ((x < 0) != (y < 0))) --q;
              return Value::I(q);
            }
            case ExprKind::Mod: {
              if (y == 0) {
                violation("modulo by zero");
                return Value::I(0);
              }
              int64_t q = x / y;
              if ((x % y != 0) && ((x < 0) != (y < 0))) --q;
              return Value::I(x - q * y);
            }
            case ExprKind::Min: return Value::I(std::min(x, y));
            case ExprKind::Max: return Value::I(std::max(x, y));
            default: break;
          }
        }
        return Value::I(0);
      }
    }
  }

 private:
  int64_t index_of(const CStmt& s) {
    // Stage-III stores carry exactly one index.
    return s.idx.empty() ? 0 : eval(s.idx[0]).as_i();
  }

  void violation(const std::string& msg) {
    if (opts_.mode == ExecMode::Checked) {
      report_.violations.push_back(msg);
      throw ExecAbort{};
    }
  }

  void check_access(int buf, int64_t k, bool write) {
    if (opts_.mode != ExecMode::Checked) return;
    const Buf& b = bufs_[buf];
    if (k < 0 || k >= b.n) {
      violation("out-of-bounds " + std::string(write ? "store" : "load") + " on " + b.name +
                ": index " + std::to_string(k) + " not in [0, " + std::to_string(b.n) + ")");
      return;
    }
    // Region soundness: the access must fall inside every enclosing block's
    // declared region for this buffer (blocks without regions are exempt).
    for (const auto& fr : regions_) {
      if (fr.buf != buf || fr.write != write) continue;
      if (k < fr.lo || k >= fr.hi)
        violation("access to " + b.name + "[" + std::to_string(k) +
                  "] outside declared block region [" + std::to_string(fr.lo) + ", " +
                  std::to_string(fr.hi) + ")");
    }
  }

  void run_loop(const CStmt& s) {
    int64_t n = eval(s.extent).as_i();
    bool parallel = s.par_safe && opts_.threads > 1 && n >= 2 * opts_.threads &&
                    opts_.mode != ExecMode::Checked;
    if (!parallel) {
      for (int64_t i = 0; i < n; ++i) {
        env_[s.var_slot] = i;
        run(*s.body);
      }
      return;
    }
    // Disjoint-write loop: contiguous chunks, deterministic by construction.
    int t = opts_.threads;
    std::vector<std::unique_ptr<Machine>> machines;
    std::vector<std::thread> threads;
    std::vector<ExecStats> stats_parts(t);
    int64_t chunk = (n + t - 1) / t;
    for (int w = 0; w < t; ++w) {
      machines.emplace_back(std::make_unique<Machine>(*this));
    }
    std::atomic<bool> aborted{false};
    for (int w = 0; w < t; ++w) {
      threads.emplace_back([&, w]() {
        int64_t lo = w * chunk, hi = std::min<int64_t>(n, lo + chunk);
        try {
          for (int64_t i = lo; i < hi; ++i) {
            machines[w]->env_[s.var_slot] = i;
            machines[w]->run(*s.body);
          }
        } catch (const ExecAbort&) {
          aborted = true;
        }
        stats_parts[w] = machines[w]->stats;
      });
    }
    for (auto& th : threads) th.join();
    for (const auto& sp : stats_parts) {
      stats.loads += sp.loads;
      stats.stores += sp.stores;
      stats.flops += sp.flops;
    }
    if (aborted) throw ExecAbort{};
  }

  void run_block(const CStmt& s) {
    if (s.is_copy && opts_.skip_copy_blocks) return;
    bool all_red_zero = true;
    for (const auto& [slot, e] : s.binds) {
      env_[slot] = eval(e).as_i();
    }
    for (int slot : s.reduction_slots)
      if (env_[slot] != 0) all_red_zero = false;
    size_t mark = regions_.size();
    if (opts_.mode == ExecMode::Checked) {
      for (const auto& r : s.regions) {
        int64_t lo = eval(r.lo).as_i();
        int64_t ext = eval(r.extent).as_i();
        regions_.push_back({r.buf, lo, lo + ext, r.write});
      }
    }
    if (s.init && all_red_zero && !s.reduction_slots.empty()) run(*s.init);
    run(*s.body);
    regions_.resize(mark);
  }

  void run_search(const CStmt& s) {
    const Buf& b = bufs_[s.sbuf];
    int64_t lo = eval(s.lo).as_i();
    int64_t hi = eval(s.hi).as_i();
    int64_t key = eval(s.key).as_i();
    lo = std::max<int64_t>(0, lo);
    hi = std::min<int64_t>(hi, b.n);
    if (s.smode == SearchMode::LowerBound) {
      // First position in [lo, hi) with value >= key; result is relative.
      int64_t l = lo, r = hi;
      while (l < r) {
        int64_t m = l + (r - l) / 2;
        ++stats.loads;
        if (b.get(m).as_i() < key)
          l = m + 1;
        else
          r = m;
      }
      bool found = l < hi && b.get(l).as_i() == key;
      if (s.guarded) {
        env_[s.found_slot] = found ? 1 : 0;
        env_[s.res_slot] = found ? l - lo : 0;
      } else {
        if (!found) violation("binary search: key " + std::to_string(key) + " absent in " +
                              b.name + " segment");
        env_[s.res_slot] = l - lo;
      }
    } else {
      // Greatest q in [lo, hi) with value <= key; result is absolute.
      int64_t l = lo, r = hi;
      while (l < r) {
        int64_t m = l + (r - l) / 2;
        ++stats.loads;
        if (b.get(m).as_i() <= key)
          l = m + 1;
        else
          r = m;
      }
      int64_t q = l - 1;
      if (q < lo) {
        if (s.guarded) {
          env_[s.found_slot] = 0;
          q = lo;
        } else {
          violation("segment locate: key below first segment");
          q = lo;
        }
      } else if (s.guarded) {
        env_[s.found_slot] = 1;
      }
      env_[s.res_slot] = q;
    }
  }

  std::vector<Buf>& bufs_;
  std::vector<int64_t> env_;
  const ExecOptions& opts_;
  ExecReport& report_;
  std::vector<RegionFrame> regions_;
};

}  // namespace

void bind_storage(Bindings& b, const std::string& buffer_name, const TensorStorage& s) {
  for (const auto& [name, arr] : s.aux) {
    TensorData d;
    d.dtype = DType::I32;
    d.i32 = arr;
    b.buffers[name] = std::move(d);
  }
  b.buffers[buffer_name] = s.values;
}

ExecReport interpret(const Program& p, const Bindings& b, const ExecOptions& opts) {
  if (p.stage != Stage::III)
    fail(ErrKind::Exec, "interpret expects a stage-III program (got stage " +
                            std::string(stage_name(p.stage)) + ")");
  ExecReport report;

  // Materialize working arrays: inputs/aux from bindings, outputs/temps zeroed.
  std::vector<TensorData> working;
  std::vector<Buf> bufs;
  working.reserve(p.buffers.size());
  for (const auto& decl : p.buffers) {
    auto it = b.buffers.find(decl.name);
    int64_t size = decl.flat_size >= 0 ? decl.flat_size : 0;
    if (decl.role == BufferRole::Input || decl.role == BufferRole::Aux) {
      if (it == b.buffers.end()) fail(ErrKind::Exec, "missing binding for buffer " + decl.name);
      if (static_cast<int64_t>(it->second.size()) != size)
        fail(ErrKind::Exec, "binding size mismatch for " + decl.name + ": got " +
                                std::to_string(it->second.size()) + ", declared " +
                                std::to_string(size));
      working.push_back(it->second);
    } else {
      // Outputs and temps start from zero; reductions accumulate into them.
      working.push_back(TensorData::zeros(decl.dtype, size));
    }
  }
  for (size_t i = 0; i < p.buffers.size(); ++i) {
    Buf bf;
    bf.dtype = working[i].dtype;
    bf.pi = working[i].i32.data();
    bf.pf = working[i].f32.data();
    bf.pd = working[i].f64.data();
    bf.n = static_cast<int64_t>(working[i].size());
    bf.name = p.buffers[i].name;
    bf.is_output = p.buffers[i].role == BufferRole::Output;
    bufs.push_back(bf);
  }

  Compiler compiler(p, bufs);
  CStmt croot = p.body ? compiler.stmt(p.body) : CStmt{};
  std::vector<std::pair<int, int64_t>> param_values;
  for (const auto& pr : p.params) {
    auto it = b.scalars.find(pr.name);
    if (it == b.scalars.end()) fail(ErrKind::Exec, "missing binding for param " + pr.name);
    param_values.emplace_back(compiler.slot_of(pr.name), it->second);
  }

  Machine m(bufs, compiler.num_slots(), opts, report);
  for (const auto& [slot, value] : param_values) m.set_slot(slot, value);
  try {
    m.run(croot);
  } catch (const ExecAbort&) {
    // Checked-mode violation: report carries the details.
  }
  report.stats = m.stats;
  for (size_t i = 0; i < p.buffers.size(); ++i)
    if (p.buffers[i].role == BufferRole::Output)
      report.outputs.buffers[p.buffers[i].name] = working[i];
  return report;
}

}  // namespace strata
