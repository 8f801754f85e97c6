/*
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *   http://www.apache.org/licenses/LICENSE-2.0
 */

#include "strata/printer.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

namespace strata {

namespace {

// Higher binds tighter.
int prec(ExprKind k) {
  switch (k) {
    case ExprKind::Compare: return 1;
    case ExprKind::Add:
    case ExprKind::Sub: return 2;
    case ExprKind::Mul:
    case ExprKind::FloorDiv:
    case ExprKind::Mod: return 3;
    default: return 4;  // atoms and call-syntax forms
  }
}

const char* op_token(ExprKind k) {
  switch (k) {
    case ExprKind::Add: return " + ";
    case ExprKind::Sub: return " - ";
    case ExprKind::Mul: return " * ";
    case ExprKind::FloorDiv: return " / ";
    case ExprKind::Mod: return " % ";
    default: return "?";
  }
}

const char* cmp_token(CmpOp c) {
  switch (c) {
    case CmpOp::Eq: return " == ";
    case CmpOp::Ne: return " != ";
    case CmpOp::Lt: return " < ";
    case CmpOp::Le: return " <= ";
    case CmpOp::Gt: return " > ";
    case CmpOp::Ge: return " >= ";
  }
  return "?";
}

std::string float_text(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  std::string s(buf);
  if (s.find('.') == std::string::npos && s.find('e') == std::string::npos &&
      s.find("inf") == std::string::npos && s.find("nan") == std::string::npos)
    s += ".0";
  return s;
}

void emit(const Expr& e, int parent_prec, std::string& out) {
  int p = prec(e->kind);
  switch (e->kind) {
    case ExprKind::IntConst:
      out += std::to_string(e->ival);
      return;
    case ExprKind::FloatConst:
      out += float_text(e->fval);
      return;
    case ExprKind::Var:
      out += e->name;
      return;
    case ExprKind::BufferLoad: {
      out += e->name;
      out += '[';
      for (size_t i = 0; i < e->args.size(); ++i) {
        if (i) out += ", ";
        emit(e->args[i], 0, out);
      }
      out += ']';
      return;
    }
    case ExprKind::Min:
    case ExprKind::Max: {
      out += e->kind == ExprKind::Min ? "min(" : "max(";
      emit(e->args[0], 0, out);
      out += ", ";
      emit(e->args[1], 0, out);
      out += ')';
      return;
    }
    case ExprKind::Select: {
      out += "select(";
      emit(e->args[0], 0, out);
      out += ", ";
      emit(e->args[1], 0, out);
      out += ", ";
      emit(e->args[2], 0, out);
      out += ')';
      return;
    }
    case ExprKind::Compare: {
      if (p < parent_prec) out += '(';
      emit(e->args[0], p + 1, out);
      out += cmp_token(e->cmp);
      emit(e->args[1], p + 1, out);
      if (p < parent_prec) out += ')';
      return;
    }
    default: {
      if (p < parent_prec) out += '(';
      emit(e->args[0], p, out);
      out += op_token(e->kind);
      emit(e->args[1], p + 1, out);
      if (p < parent_prec) out += ')';
      return;
    }
  }
}

std::string ind(int n) { return std::string(n * 2, ' '); }

void emit_region_list(const std::vector<BufferRegion>& rs, const char* tag, int indent,
                      std::string& out) {
  if (rs.empty()) return;
  out += ind(indent) + tag + "{ ";
  for (size_t i = 0; i < rs.size(); ++i) {
    if (i) out += ", ";
    out += rs[i].buffer;
    out += '[';
    for (size_t d = 0; d < rs[i].dims.size(); ++d) {
      if (d) out += "; ";
      emit(rs[i].dims[d].min, 0, out);
      out += ", ";
      emit(rs[i].dims[d].extent, 0, out);
    }
    out += ']';
  }
  out += " }\n";
}

void emit_stmt(const Stmt& s, int indent, std::string& out) {
  switch (s->kind) {
    case StmtKind::BufferStore: {
      out += ind(indent) + s->buffer + "[";
      for (size_t i = 0; i < s->indices.size(); ++i) {
        if (i) out += ", ";
        emit(s->indices[i], 0, out);
      }
      out += s->reduce ? "] += " : "] = ";
      emit(s->value, 0, out);
      out += ";\n";
      return;
    }
    case StmtKind::SeqStmts: {
      for (const auto& c : s->seq) emit_stmt(c, indent, out);
      return;
    }
    case StmtKind::SparseIteration: {
      out += ind(indent) + "sp_iter ";
      if (s->is_format_copy) out += "copy ";
      out += s->name + "(";
      // Iterators are printed group-by-group; fused groups are wrapped.
      std::vector<std::vector<int>> groups = s->fuse_groups;
      if (groups.empty())
        for (int i = 0; i < static_cast<int>(s->iters.size()); ++i) groups.push_back({i});
      bool first = true;
      for (const auto& g : groups) {
        if (!first) out += ", ";
        first = false;
        if (g.size() > 1) out += "fused(";
        for (size_t k = 0; k < g.size(); ++k) {
          if (k) out += ", ";
          const IterSpec& it = s->iters[g[k]];
          out += it.var;
          out += it.kind == IterKind::Spatial ? ": S @ " : ": R @ ";
          out += it.axis;
        }
        if (g.size() > 1) out += ")";
      }
      out += ") {\n";
      emit_stmt(s->body, indent + 1, out);
      out += ind(indent) + "}\n";
      return;
    }
    case StmtKind::Loop: {
      out += ind(indent) + "loop ";
      switch (s->anno) {
        case LoopAnno::None: break;
        case LoopAnno::Parallel: out += "parallel "; break;
        case LoopAnno::Unroll: out += "unroll(" + std::to_string(s->anno_factor) + ") "; break;
        case LoopAnno::Vectorize:
          out += "vectorize(" + std::to_string(s->anno_factor) + ") ";
          break;
      }
      out += s->loop_var + " in ";
      emit(s->extent, 0, out);
      out += " {\n";
      emit_stmt(s->body, indent + 1, out);
      out += ind(indent) + "}\n";
      return;
    }
    case StmtKind::Block: {
      out += ind(indent) + "block ";
      if (s->is_copy_block) out += "copy ";
      out += s->name + "(";
      for (size_t i = 0; i < s->bindings.size(); ++i) {
        if (i) out += ", ";
        const auto& b = s->bindings[i];
        out += b.var;
        out += b.kind == IterKind::Spatial ? ": S" : ": R";
        if (!b.axis.empty()) out += " @ " + b.axis;
        out += " = ";
        emit(b.bind, 0, out);
      }
      out += ") {\n";
      emit_region_list(s->reads, "reads", indent + 1, out);
      emit_region_list(s->writes, "writes", indent + 1, out);
      if (s->init) {
        out += ind(indent + 1) + "init {\n";
        emit_stmt(s->init, indent + 2, out);
        out += ind(indent + 1) + "}\n";
      }
      emit_stmt(s->body, indent + 1, out);
      out += ind(indent) + "}\n";
      return;
    }
    case StmtKind::BinarySearchBlock: {
      out += ind(indent) + s->result_var;
      if (s->guarded) out += ", " + s->found_var;
      out += " = ";
      out += s->search_mode == SearchMode::LowerBound ? "find(" : "locate(";
      out += s->search_buffer + ", ";
      emit(s->seg_lo, 0, out);
      out += ", ";
      emit(s->seg_hi, 0, out);
      out += ", ";
      emit(s->key, 0, out);
      out += ");\n";
      return;
    }
  }
}

}  // namespace

std::string print_expr(const Expr& e) {
  std::string out;
  emit(e, 0, out);
  return out;
}

std::string print_stmt(const Stmt& s, int indent) {
  std::string out;
  emit_stmt(s, indent, out);
  return out;
}

std::string print_program(const Program& p) {
  std::string out;
  out += "program " + p.name + " stage " + stage_name(p.stage) + ";\n\n";
  for (const Axis& a : p.axes.all()) {
    out += "axis " + a.name + " = " + axis_kind_name(a.kind) + "(";
    bool first = true;
    auto field = [&](const std::string& k, const std::string& v) {
      if (!first) out += ", ";
      first = false;
      out += k + "=" + v;
    };
    if (!a.parent.empty()) field("parent", a.parent);
    field("length", std::to_string(a.length));
    if (a.nnz >= 0) field("nnz", std::to_string(a.nnz));
    if (a.nnz_cols >= 0) field("nnz_cols", std::to_string(a.nnz_cols));
    if (!a.indptr_name.empty()) field("indptr", a.indptr_name);
    if (!a.indices_name.empty()) field("indices", a.indices_name);
    out += ");\n";
  }
  if (!p.axes.all().empty()) out += "\n";
  for (const BufferDecl& b : p.buffers) {
    out += "buffer " + b.name + " = " + dtype_name(b.dtype) + "[";
    if (b.axes.empty()) {
      out += "#" + std::to_string(b.flat_size);
    } else {
      for (size_t i = 0; i < b.axes.size(); ++i) {
        if (i) out += ", ";
        out += b.axes[i];
      }
    }
    out += "] ";
    switch (b.role) {
      case BufferRole::Input: out += "input"; break;
      case BufferRole::Output: out += "output"; break;
      case BufferRole::Temp: out += "temp"; break;
      case BufferRole::Aux: out += "aux"; break;
    }
    std::vector<std::string> attrs;
    if (b.hint.has_range)
      attrs.push_back("hint=" + std::to_string(b.hint.lo) + ".." + std::to_string(b.hint.hi));
    if (b.hint.nondecreasing) attrs.push_back("nondec");
    if (b.preconverted) attrs.push_back("preconverted");
    if (!attrs.empty()) {
      out += " {";
      for (size_t i = 0; i < attrs.size(); ++i) {
        if (i) out += ", ";
        out += attrs[i];
      }
      out += "}";
    }
    out += ";\n";
  }
  if (!p.buffers.empty()) out += "\n";
  for (const ParamDecl& pr : p.params)
    out += "param " + pr.name + ": " + dtype_name(pr.dtype) + ";\n";
  if (!p.params.empty()) out += "\n";
  out += "body {\n";
  if (p.body) emit_stmt(p.body, 1, out);
  out += "}\n";
  return out;
}

}  // namespace strata
