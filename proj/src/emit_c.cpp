/*
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *   http://www.apache.org/licenses/LICENSE-2.0
 */

#include "strata/emit_c.hpp"

#include <cstdio>
#include <unordered_map>

namespace strata {

namespace {

const char* c_type(DType t) {
  switch (t) {
    case DType::I32: return "int32_t";
    case DType::F32: return "float";
    case DType::F64: return "double";
  }
  return "?";
}

class CEmitter {
 public:
  explicit CEmitter(const Program& p) : p_(p) {}

  std::string run() {
    out_ +=
        "/*\n"
        " * Generated kernel: " + p_.name + "\n"
        " * Calling convention: buffers in declaration order (flat arrays),\n"
        " * then scalar parameters as int64_t, in declaration order. Output\n"
        " * buffers are zeroed by the function before accumulation. Arithmetic\n"
        " * runs in int64_t/double and is narrowed on store, matching the\n"
        " * reference interpreter bit for bit on integer data.\n"
        " */\n"
        "#include <stdint.h>\n\n";
    out_ += "static inline int64_t s_floordiv(int64_t a, int64_t b) {\n"
            "  int64_t q = a / b;\n"
            "  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;\n"
            "  return q;\n"
            "}\n"
            "static inline int64_t s_floormod(int64_t a, int64_t b) {\n"
            "  return a - s_floordiv(a, b) * b;\n"
            "}\n"
            "static inline int64_t s_min_i(int64_t a, int64_t b) { return a < b ? a : b; }\n"
            "static inline int64_t s_max_i(int64_t a, int64_t b) { return a > b ? a : b; }\n"
            "static inline double s_min_f(double a, double b) { return a < b ? a : b; }\n"
            "static inline double s_max_f(double a, double b) { return a > b ? a : b; }\n\n";

    out_ += "void " + p_.name + "(";
    bool first = true;
    for (const auto& b : p_.buffers) {
      if (b.role == BufferRole::Temp) continue;  // temps are function-local
      if (!first) out_ += ", ";
      first = false;
      bool is_const = b.role == BufferRole::Input || b.role == BufferRole::Aux;
      out_ += std::string(is_const ? "const " : "") + c_type(b.dtype) + "* " + b.name;
    }
    for (const auto& pr : p_.params) {
      if (!first) out_ += ", ";
      first = false;
      out_ += "int64_t " + pr.name;
    }
    out_ += ") {\n";
    indent_ = 1;

    for (const auto& b : p_.buffers) {
      if (b.role == BufferRole::Temp) {
        line(std::string(c_type(b.dtype)) + " " + b.name + "[" +
             std::to_string(b.flat_size > 0 ? b.flat_size : 1) + "];");
        line("for (int64_t z_ = 0; z_ < " + std::to_string(b.flat_size) + "; ++z_) " + b.name +
             "[z_] = 0;");
      } else if (b.role == BufferRole::Output) {
        line("for (int64_t z_ = 0; z_ < " + std::to_string(b.flat_size) + "; ++z_) " + b.name +
             "[z_] = 0;");
      }
    }
    if (p_.body) stmt(p_.body);
    out_ += "}\n";
    return out_;
  }

 private:
  bool is_float_expr(const Expr& e) {
    switch (e->kind) {
      case ExprKind::FloatConst: return true;
      case ExprKind::IntConst:
      case ExprKind::Var: return false;
      case ExprKind::BufferLoad: return p_.buffer(e->name).dtype != DType::I32;
      case ExprKind::Compare: return false;
      case ExprKind::Select: return is_float_expr(e->args[1]) || is_float_expr(e->args[2]);
      default:
        return is_float_expr(e->args[0]) || is_float_expr(e->args[1]);
    }
  }

  std::string expr(const Expr& e) {
    switch (e->kind) {
      case ExprKind::IntConst: return "INT64_C(" + std::to_string(e->ival) + ")";
      case ExprKind::FloatConst: {
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%.17g", e->fval);
        std::string s(buf);
        if (s.find('.') == std::string::npos && s.find('e') == std::string::npos) s += ".0";
        return s;
      }
      case ExprKind::Var: return e->name;
      case ExprKind::BufferLoad: {
        // Widen on load so arithmetic happens in int64/double.
        const BufferDecl& b = p_.buffer(e->name);
        std::string cast = b.dtype == DType::I32 ? "(int64_t)" : "(double)";
        return cast + e->name + "[" + expr(e->args[0]) + "]";
      }
      case ExprKind::Select:
        return "(" + expr(e->args[0]) + " ? " + expr(e->args[1]) + " : " + expr(e->args[2]) +
               ")";
      case ExprKind::Compare: {
        const char* op = "==";
        switch (e->cmp) {
          case CmpOp::Eq: op = "=="; break;
          case CmpOp::Ne: op = "!="; break;
          case CmpOp::Lt: op = "<"; break;
          case CmpOp::Le: op = "<="; break;
          case CmpOp::Gt: op = ">"; break;
          case CmpOp::Ge: op = ">="; break;
        }
        return "(" + expr(e->args[0]) + " " + op + " " + expr(e->args[1]) + " ? INT64_C(1) : INT64_C(0))";
      }
      case ExprKind::FloorDiv:
        if (is_float_expr(e)) return "(" + expr(e->args[0]) + " / " + expr(e->args[1]) + ")";
        return "s_floordiv(" + expr(e->args[0]) + ", " + expr(e->args[1]) + ")";
      case ExprKind::Mod:
        return "s_floormod(" + expr(e->args[0]) + ", " + expr(e->args[1]) + ")";
      case ExprKind::Min:
        return (is_float_expr(e) ? "s_min_f(" : "s_min_i(") + expr(e->args[0]) + ", " +
               expr(e->args[1]) + ")";
      case ExprKind::Max:
        return (is_float_expr(e) ? "s_max_f(" : "s_max_i(") + expr(e->args[0]) + ", " +
               expr(e->args[1]) + ")";
      default: {
        const char* op = "+";
        switch (e->kind) {
          case ExprKind::Add: op = "+"; break;
          case ExprKind::Sub: op = "-"; break;
          case ExprKind::Mul: op = "*"; break;
          default: break;
        }
        return "(" + expr(e->args[0]) + " " + op + " " + expr(e->args[1]) + ")";
      }
    }
  }

  void line(const std::string& s) { out_ += std::string(indent_ * 2, ' ') + s + "\n"; }

  void stmt(const Stmt& s) {
    switch (s->kind) {
      case StmtKind::BufferStore: {
        const BufferDecl& b = p_.buffer(s->buffer);
        std::string idx = expr(s->indices[0]);
        std::string narrowed = b.dtype == DType::I32 ? "(int32_t)" : b.dtype == DType::F32
                                                                         ? "(float)"
                                                                         : "";
        if (s->reduce) {
          std::string cur = std::string(b.dtype == DType::I32 ? "(int64_t)" : "(double)") +
                            s->buffer + "[" + idx + "]";
          line(s->buffer + "[" + idx + "] = " + narrowed + "(" + cur + " + (" + expr(s->value) +
               "));");
        } else {
          line(s->buffer + "[" + idx + "] = " + narrowed + "(" + expr(s->value) + ");");
        }
        break;
      }
      case StmtKind::SeqStmts:
        for (const auto& c : s->seq) stmt(c);
        break;
      case StmtKind::Loop: {
        switch (s->anno) {
          case LoopAnno::Parallel:
            line("/* #pragma omp parallel for  (iterations write disjoint slices) */");
            break;
          case LoopAnno::Unroll:
            line("/* unroll(" + std::to_string(s->anno_factor) + ") */");
            break;
          case LoopAnno::Vectorize:
            line("/* vectorize(" + std::to_string(s->anno_factor) + ") */");
            break;
          default:
            break;
        }
        line("for (int64_t " + s->loop_var + " = 0; " + s->loop_var + " < " + expr(s->extent) +
             "; ++" + s->loop_var + ") {");
        ++indent_;
        stmt(s->body);
        --indent_;
        line("}");
        break;
      }
      case StmtKind::Block: {
        line("{ /* block " + s->name + " */");
        ++indent_;
        for (const auto& b : s->bindings)
          line("int64_t " + b.var + " = " + expr(b.bind) + ";");
        for (const auto& b : s->bindings) line("(void)" + b.var + ";");
        if (s->init) stmt(s->init);
        stmt(s->body);
        --indent_;
        line("}");
        break;
      }
      case StmtKind::BinarySearchBlock: {
        std::string r = s->result_var;
        line("int64_t " + r + " = 0;");
        if (s->guarded) line("int64_t " + s->found_var + " = 0;");
        line("{");
        ++indent_;
        line("int64_t lo_ = " + expr(s->seg_lo) + ", hi_ = " + expr(s->seg_hi) + ";");
        line("int64_t key_ = " + expr(s->key) + ";");
        line("int64_t l_ = lo_, r_ = hi_;");
        if (s->search_mode == SearchMode::LowerBound) {
          line("while (l_ < r_) {");
          ++indent_;
          line("int64_t m_ = l_ + (r_ - l_) / 2;");
          line("if ((int64_t)" + s->search_buffer + "[m_] < key_) l_ = m_ + 1; else r_ = m_;");
          --indent_;
          line("}");
          if (s->guarded) {
            line(s->found_var + " = (l_ < hi_ && (int64_t)" + s->search_buffer +
                 "[l_] == key_) ? 1 : 0;");
            line(r + " = " + s->found_var + " ? (l_ - lo_) : 0;");
          } else {
            line(r + " = l_ - lo_;");
          }
        } else {
          line("while (l_ < r_) {");
          ++indent_;
          line("int64_t m_ = l_ + (r_ - l_) / 2;");
          line("if ((int64_t)" + s->search_buffer + "[m_] <= key_) l_ = m_ + 1; else r_ = m_;");
          --indent_;
          line("}");
          if (s->guarded) {
            line(s->found_var + " = (l_ - 1 >= lo_) ? 1 : 0;");
            line(r + " = " + s->found_var + " ? (l_ - 1) : lo_;");
          } else {
            line(r + " = l_ - 1;");
          }
        }
        --indent_;
        line("}");
        break;
      }
      default:
        fail(ErrKind::Lowering, "emit_c: stage-III nodes only");
    }
  }

  const Program& p_;
  std::string out_;
  int indent_ = 0;
};

}  // namespace

std::string emit_c(const Program& p) {
  if (p.stage != Stage::III) fail(ErrKind::Usage, "emit_c expects a stage-III program");
  CEmitter e(p);
  return e.run();
}

}  // namespace strata
