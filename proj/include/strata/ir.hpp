/*
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *   http://www.apache.org/licenses/LICENSE-2.0
 */

/*!
 * \file ir.hpp
 * \brief One node family for all three IR stages, with stage markers.
 *
 * Stage I:   sparse iterations over axes, buffer accesses in coordinate space.
 * Stage II:  nested loops and blocks, accesses in position space, multi-dim.
 * Stage III: loops over flat one-dimensional buffers; axes erased.
 *
 * Programs are immutable values: transformations build new programs.
 */
#pragma once

#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "strata/axis.hpp"
#include "strata/common.hpp"

namespace strata {

// ---------------------------------------------------------------------------
// Expressions
// ---------------------------------------------------------------------------

enum class ExprKind {
  IntConst,
  FloatConst,
  Var,
  Add,
  Sub,
  Mul,
  FloorDiv,
  Mod,
  Min,
  Max,
  BufferLoad,
  Select,   // Select(cond, then, else)
  Compare,  // Compare(op, a, b) -> 0/1
};

enum class CmpOp { Eq, Ne, Lt, Le, Gt, Ge };

struct ExprNode;
using Expr = std::shared_ptr<const ExprNode>;

struct ExprNode {
  ExprKind kind;
  int64_t ival = 0;       // IntConst
  double fval = 0.0;      // FloatConst
  std::string name;       // Var name or BufferLoad buffer name
  std::vector<Expr> args; // operands; BufferLoad indices; Select(cond,then,else)
  CmpOp cmp = CmpOp::Eq;
};

Expr ic(int64_t v);
Expr fc(double v);
Expr var(std::string name);
Expr binary(ExprKind k, Expr a, Expr b);
Expr add(Expr a, Expr b);
Expr sub(Expr a, Expr b);
Expr mul(Expr a, Expr b);
Expr floordiv(Expr a, Expr b);
Expr mod(Expr a, Expr b);
Expr min_e(Expr a, Expr b);
Expr max_e(Expr a, Expr b);
Expr load(std::string buffer, std::vector<Expr> indices);
Expr select(Expr cond, Expr then_v, Expr else_v);
Expr compare(CmpOp op, Expr a, Expr b);

/*! \brief Constant folding plus the usual algebraic identities (x+0, x*1, x*0). */
Expr simplify(const Expr& e);

/*! \brief Substitute variables by expressions (by name). */
Expr substitute(const Expr& e, const std::unordered_map<std::string, Expr>& map);

bool expr_uses_var(const Expr& e, const std::string& name);
bool expr_has_load(const Expr& e);
/*! \brief True if e is an integer expression over vars/consts with +,-,*,/,% only. */
bool expr_is_affine_like(const Expr& e);

// ---------------------------------------------------------------------------
// Statements
// ---------------------------------------------------------------------------

enum class StmtKind {
  BufferStore,
  SeqStmts,
  SparseIteration,  // stage I only
  Loop,             // stage II/III
  Block,            // stage II/III
  BinarySearchBlock // stage II/III
};

enum class IterKind { Spatial, Reduction };

enum class LoopAnno { None, Parallel, Unroll, Vectorize };

/*! \brief One iterator of a sparse iteration: a variable ranging over an axis. */
struct IterSpec {
  std::string var;
  std::string axis;
  IterKind kind = IterKind::Spatial;
};

/*! \brief A block-local variable bound to an outer loop variable. */
struct BlockBinding {
  std::string var;
  IterKind kind = IterKind::Spatial;
  Expr bind;
  std::string axis;  // axis the variable iterates, when lowered from stage I
};

/*! \brief Per-dimension [min, extent) interval of a buffer region. */
struct RegionDim {
  Expr min;
  Expr extent;
};

struct BufferRegion {
  std::string buffer;
  std::vector<RegionDim> dims;
};

enum class SearchMode {
  LowerBound,    // position of key in a sorted, strictly increasing segment
  LocateSegment  // greatest i with arr[i] <= key (row of a position in indptr)
};

struct StmtNode;
using Stmt = std::shared_ptr<const StmtNode>;

struct StmtNode {
  StmtKind kind;

  // BufferStore
  std::string buffer;
  std::vector<Expr> indices;
  Expr value;
  bool reduce = false;  // true: sum-accumulate

  // SeqStmts
  std::vector<Stmt> seq;

  // SparseIteration / Loop / Block share `name` and `body`
  std::string name;
  Stmt body;

  // SparseIteration
  std::vector<IterSpec> iters;
  std::vector<std::vector<int>> fuse_groups;  // indices into iters; empty = singletons
  bool is_format_copy = false;

  // Loop
  std::string loop_var;
  Expr extent;
  LoopAnno anno = LoopAnno::None;
  int anno_factor = 0;

  // Block
  std::vector<BlockBinding> bindings;
  std::vector<BufferRegion> reads;
  std::vector<BufferRegion> writes;
  Stmt init;
  bool is_copy_block = false;

  // BinarySearchBlock: result_var = search(search_buffer[lo..hi), key)
  std::string result_var;
  Expr key;
  std::string search_buffer;
  Expr seg_lo;
  Expr seg_hi;
  SearchMode search_mode = SearchMode::LowerBound;
  bool guarded = false;          // guarded: emit found flag instead of trapping
  std::string found_var;         // set when guarded
};

Stmt store(std::string buffer, std::vector<Expr> indices, Expr value, bool reduce);
Stmt seq(std::vector<Stmt> stmts);
Stmt sparse_iteration(std::string name, std::vector<IterSpec> iters, Stmt body);
Stmt loop(std::string var, Expr extent, Stmt body);
Stmt make_block(std::string name, std::vector<BlockBinding> bindings, Stmt body);

// ---------------------------------------------------------------------------
// Program
// ---------------------------------------------------------------------------

enum class Stage { I, II, III };

enum class BufferRole {
  Input,   // provided by bindings
  Output,  // zero-initialized by the executor, returned in results
  Temp,    // zero-initialized scratch
  Aux      // integer structure arrays (indptr/indices), provided by bindings
};

/*! \brief Value-domain hint for integer buffers, used by region analysis. */
struct DomainHint {
  bool has_range = false;
  int64_t lo = 0, hi = 0;  // values in [lo, hi)
  bool nondecreasing = false;
};

struct BufferDecl {
  std::string name;
  std::vector<std::string> axes;  // dimensions at stages I/II
  DType dtype = DType::F32;
  BufferRole role = BufferRole::Input;
  int64_t flat_size = -1;  // set at stage III (and for Aux buffers at stage II)
  DomainHint hint;
  bool preconverted = false;  // D7: storage already holds converted data
};

struct ParamDecl {
  std::string name;
  DType dtype = DType::I32;
};

struct Program {
  std::string name = "prog";
  Stage stage = Stage::I;
  AxisTable axes;
  std::vector<BufferDecl> buffers;
  std::vector<ParamDecl> params;
  Stmt body;

  const BufferDecl* find_buffer(const std::string& n) const;
  const BufferDecl& buffer(const std::string& n) const;
  BufferDecl& buffer_mut(const std::string& n);
};

const char* stage_name(Stage s);

/*!
 * \brief Validate name resolution, stage/node consistency and axis invariants.
 * Returns all violations (empty = valid).
 */
std::vector<std::string> validate_program(const Program& p);

/*! \brief Number of logical dimensions of a buffer at the given stage. */
size_t buffer_ndim(const Program& p, const BufferDecl& b);

/*! \brief Compute the flat element count of a buffer from its axes. */
int64_t buffer_flat_size(const Program& p, const BufferDecl& b);

}  // namespace strata
