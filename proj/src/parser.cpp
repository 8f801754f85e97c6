/*
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *   http://www.apache.org/licenses/LICENSE-2.0
 */

#include "strata/parser.hpp"

#include <cctype>
#include <cstdlib>
#include <unordered_set>

namespace strata {

namespace {

enum class Tok { Ident, Int, Float, Punct, End };

struct Token {
  Tok kind = Tok::End;
  std::string text;
  int64_t ival = 0;
  double fval = 0;
  int line = 1, col = 1;
};

class Lexer {
 public:
  explicit Lexer(const std::string& src) : src_(src) { next(); }

  const Token& peek() const { return cur_; }

  Token take() {
    Token t = cur_;
    next();
    return t;
  }

  std::vector<Diagnostic>& diags() { return diags_; }

 private:
  void next() {
    for (;;) {
      while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) advance();
      if (pos_ < src_.size() && src_[pos_] == '#') {
        while (pos_ < src_.size() && src_[pos_] != '\n') advance();
        continue;
      }
      break;
    }
    cur_ = Token();
    cur_.line = line_;
    cur_.col = col_;
    if (pos_ >= src_.size()) {
      cur_.kind = Tok::End;
      return;
    }
    char c = src_[pos_];
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::string w;
      while (pos_ < src_.size() &&
             (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_')) {
        w += src_[pos_];
        advance();
      }
      cur_.kind = Tok::Ident;
      cur_.text = std::move(w);
      return;
    }
    if (std::isdigit(static_cast<unsigned char>(c))) {
      std::string w;
      bool is_float = false;
      while (pos_ < src_.size()) {
        char d = src_[pos_];
        if (std::isdigit(static_cast<unsigned char>(d))) {
          w += d;
          advance();
        } else if (d == '.' && pos_ + 1 < src_.size() && src_[pos_ + 1] == '.') {
          break;  // range token '..'
        } else if (d == '.' || d == 'e' || d == 'E') {
          is_float = true;
          w += d;
          advance();
          if ((d == 'e' || d == 'E') && pos_ < src_.size() &&
              (src_[pos_] == '+' || src_[pos_] == '-')) {
            w += src_[pos_];
            advance();
          }
        } else {
          break;
        }
      }
      if (is_float) {
        cur_.kind = Tok::Float;
        cur_.fval = std::strtod(w.c_str(), nullptr);
      } else {
        cur_.kind = Tok::Int;
        cur_.ival = std::strtoll(w.c_str(), nullptr, 10);
      }
      cur_.text = std::move(w);
      return;
    }
    // Punctuation, including two-char operators.
    static const char* two[] = {"+=", "==", "!=", "<=", ">=", ".."};
    for (const char* t : two) {
      if (src_.compare(pos_, 2, t) == 0) {
        cur_.kind = Tok::Punct;
        cur_.text = t;
        advance();
        advance();
        return;
      }
    }
    cur_.kind = Tok::Punct;
    cur_.text = std::string(1, c);
    advance();
  }

  void advance() {
    if (pos_ < src_.size()) {
      if (src_[pos_] == '\n') {
        ++line_;
        col_ = 1;
      } else {
        ++col_;
      }
      ++pos_;
    }
  }

  const std::string& src_;
  size_t pos_ = 0;
  int line_ = 1, col_ = 1;
  Token cur_;
  std::vector<Diagnostic> diags_;
};

struct ParseError {};  // unwinds to parse_program

class Parser {
 public:
  explicit Parser(const std::string& text) : lex_(text) {}

  ParseResult run() {
    ParseResult r;
    try {
      r.program = program();
    } catch (const ParseError&) {
      r.program.reset();
    }
    r.diagnostics = diags_;
    // Post-parse validation: stage/node and name-resolution diagnostics.
    if (r.program && diags_.empty()) {
      for (const auto& v : validate_program(*r.program)) {
        Diagnostic d;
        d.message = v;
        r.diagnostics.push_back(d);
      }
    }
    return r;
  }

 private:
  [[noreturn]] void error_at(const Token& t, const std::string& msg) {
    diags_.push_back({t.line, t.col, msg});
    throw ParseError{};
  }

  bool is_punct(const std::string& s) {
    return lex_.peek().kind == Tok::Punct && lex_.peek().text == s;
  }
  bool is_word(const std::string& s) {
    return lex_.peek().kind == Tok::Ident && lex_.peek().text == s;
  }
  void expect_punct(const std::string& s) {
    if (!is_punct(s)) error_at(lex_.peek(), "expected '" + s + "'");
    lex_.take();
  }
  void expect_word(const std::string& s) {
    if (!is_word(s)) error_at(lex_.peek(), "expected '" + s + "'");
    lex_.take();
  }
  std::string ident() {
    if (lex_.peek().kind != Tok::Ident) error_at(lex_.peek(), "expected identifier");
    return lex_.take().text;
  }
  int64_t integer() {
    if (lex_.peek().kind != Tok::Int) error_at(lex_.peek(), "expected integer");
    return lex_.take().ival;
  }

  DType dtype() {
    std::string w = ident();
    if (w == "i32") return DType::I32;
    if (w == "f32") return DType::F32;
    if (w == "f64") return DType::F64;
    error_at(lex_.peek(), "unknown dtype: " + w);
  }

  Program program() {
    Program p;
    expect_word("program");
    p.name = ident();
    expect_word("stage");
    std::string st = ident();
    if (st == "I")
      p.stage = Stage::I;
    else if (st == "II")
      p.stage = Stage::II;
    else if (st == "III")
      p.stage = Stage::III;
    else
      error_at(lex_.peek(), "bad stage marker: " + st);
    expect_punct(";");

    while (lex_.peek().kind != Tok::End) {
      if (is_word("axis"))
        axis_decl(p);
      else if (is_word("buffer"))
        buffer_decl(p);
      else if (is_word("param"))
        param_decl(p);
      else if (is_word("body"))
        break;
      else
        error_at(lex_.peek(), "expected axis/buffer/param/body");
    }
    expect_word("body");
    expect_punct("{");
    std::vector<Stmt> stmts;
    while (!is_punct("}")) stmts.push_back(stmt());
    expect_punct("}");
    p.body = stmts.empty() ? seq({}) : seq(std::move(stmts));
    if (lex_.peek().kind != Tok::End) error_at(lex_.peek(), "trailing input after body");
    return p;
  }

  void axis_decl(Program& p) {
    expect_word("axis");
    Axis a;
    a.name = ident();
    expect_punct("=");
    std::string kind = ident();
    if (kind == "dense_fixed")
      a.kind = AxisKind::DenseFixed;
    else if (kind == "dense_variable")
      a.kind = AxisKind::DenseVariable;
    else if (kind == "sparse_fixed")
      a.kind = AxisKind::SparseFixed;
    else if (kind == "sparse_variable")
      a.kind = AxisKind::SparseVariable;
    else
      error_at(lex_.peek(), "unknown axis kind: " + kind);
    expect_punct("(");
    while (!is_punct(")")) {
      std::string key = ident();
      expect_punct("=");
      if (key == "parent")
        a.parent = ident();
      else if (key == "length")
        a.length = integer();
      else if (key == "nnz")
        a.nnz = integer();
      else if (key == "nnz_cols")
        a.nnz_cols = integer();
      else if (key == "indptr")
        a.indptr_name = ident();
      else if (key == "indices")
        a.indices_name = ident();
      else
        error_at(lex_.peek(), "unknown axis field: " + key);
      if (is_punct(",")) lex_.take();
    }
    expect_punct(")");
    expect_punct(";");
    if (p.axes.contains(a.name)) {
      diags_.push_back({lex_.peek().line, lex_.peek().col, "duplicate axis: " + a.name});
      throw ParseError{};
    }
    p.axes.add(a);
  }

  void buffer_decl(Program& p) {
    expect_word("buffer");
    BufferDecl b;
    b.name = ident();
    expect_punct("=");
    b.dtype = dtype();
    expect_punct("[");
    if (is_punct("#")) {
      lex_.take();
      b.flat_size = integer();
    } else {
      while (!is_punct("]")) {
        b.axes.push_back(ident());
        if (is_punct(",")) lex_.take();
      }
    }
    expect_punct("]");
    std::string role = ident();
    if (role == "input")
      b.role = BufferRole::Input;
    else if (role == "output")
      b.role = BufferRole::Output;
    else if (role == "temp")
      b.role = BufferRole::Temp;
    else if (role == "aux")
      b.role = BufferRole::Aux;
    else
      error_at(lex_.peek(), "unknown buffer role: " + role);
    if (is_punct("{")) {
      lex_.take();
      while (!is_punct("}")) {
        std::string attr = ident();
        if (attr == "hint") {
          expect_punct("=");
          b.hint.has_range = true;
          b.hint.lo = integer();
          expect_punct("..");
          b.hint.hi = integer();
        } else if (attr == "nondec") {
          b.hint.nondecreasing = true;
        } else if (attr == "preconverted") {
          b.preconverted = true;
        } else {
          error_at(lex_.peek(), "unknown buffer attribute: " + attr);
        }
        if (is_punct(",")) lex_.take();
      }
      expect_punct("}");
    }
    expect_punct(";");
    p.buffers.push_back(std::move(b));
  }

  void param_decl(Program& p) {
    expect_word("param");
    ParamDecl d;
    d.name = ident();
    expect_punct(":");
    d.dtype = dtype();
    expect_punct(";");
    p.params.push_back(d);
  }

  IterKind iter_kind() {
    std::string k = ident();
    if (k == "S") return IterKind::Spatial;
    if (k == "R") return IterKind::Reduction;
    error_at(lex_.peek(), "iterator kind must be S or R");
  }

  Stmt stmt() {
    const Token& t = lex_.peek();
    if (t.kind != Tok::Ident) error_at(t, "expected statement");
    if (t.text == "sp_iter") return sparse_iteration_stmt();
    if (t.text == "loop") return loop_stmt();
    if (t.text == "block") return block_stmt();
    // Either a store `name[...] (=|+=) expr;` or a search `name[, ok] = find(...)`.
    Token name_tok = lex_.take();
    if (is_punct("[")) return store_stmt(name_tok.text);
    return search_stmt(name_tok);
  }

  Stmt sparse_iteration_stmt() {
    expect_word("sp_iter");
    auto n = std::make_shared<StmtNode>();
    n->kind = StmtKind::SparseIteration;
    if (is_word("copy")) {
      lex_.take();
      n->is_format_copy = true;
    }
    n->name = ident();
    expect_punct("(");
    bool any_fused = false;
    while (!is_punct(")")) {
      if (is_word("fused")) {
        lex_.take();
        any_fused = true;
        expect_punct("(");
        std::vector<int> group;
        while (!is_punct(")")) {
          group.push_back(static_cast<int>(n->iters.size()));
          iter_spec(*n);
          if (is_punct(",")) lex_.take();
        }
        expect_punct(")");
        n->fuse_groups.push_back(std::move(group));
      } else {
        n->fuse_groups.push_back({static_cast<int>(n->iters.size())});
        iter_spec(*n);
      }
      if (is_punct(",")) lex_.take();
    }
    expect_punct(")");
    if (!any_fused) n->fuse_groups.clear();
    expect_punct("{");
    std::vector<Stmt> body;
    while (!is_punct("}")) body.push_back(stmt());
    expect_punct("}");
    n->body = seq(std::move(body));
    return n;
  }

  void iter_spec(StmtNode& n) {
    IterSpec it;
    it.var = ident();
    expect_punct(":");
    it.kind = iter_kind();
    expect_punct("@");
    it.axis = ident();
    n.iters.push_back(std::move(it));
  }

  Stmt loop_stmt() {
    expect_word("loop");
    auto n = std::make_shared<StmtNode>();
    n->kind = StmtKind::Loop;
    if (is_word("parallel")) {
      lex_.take();
      n->anno = LoopAnno::Parallel;
    } else if (is_word("unroll") || is_word("vectorize")) {
      bool unroll = lex_.take().text == "unroll";
      n->anno = unroll ? LoopAnno::Unroll : LoopAnno::Vectorize;
      expect_punct("(");
      n->anno_factor = static_cast<int>(integer());
      expect_punct(")");
    }
    n->loop_var = ident();
    expect_word("in");
    n->extent = expr();
    expect_punct("{");
    std::vector<Stmt> body;
    while (!is_punct("}")) body.push_back(stmt());
    expect_punct("}");
    n->body = seq(std::move(body));
    return n;
  }

  Stmt block_stmt() {
    expect_word("block");
    auto n = std::make_shared<StmtNode>();
    n->kind = StmtKind::Block;
    if (is_word("copy")) {
      lex_.take();
      n->is_copy_block = true;
    }
    n->name = ident();
    expect_punct("(");
    while (!is_punct(")")) {
      BlockBinding b;
      b.var = ident();
      expect_punct(":");
      b.kind = iter_kind();
      if (is_punct("@")) {
        lex_.take();
        b.axis = ident();
      }
      expect_punct("=");
      b.bind = expr();
      n->bindings.push_back(std::move(b));
      if (is_punct(",")) lex_.take();
    }
    expect_punct(")");
    expect_punct("{");
    if (is_word("reads")) {
      lex_.take();
      n->reads = region_list();
    }
    if (is_word("writes")) {
      lex_.take();
      n->writes = region_list();
    }
    if (is_word("init")) {
      lex_.take();
      expect_punct("{");
      std::vector<Stmt> body;
      while (!is_punct("}")) body.push_back(stmt());
      expect_punct("}");
      n->init = seq(std::move(body));
    }
    std::vector<Stmt> body;
    while (!is_punct("}")) body.push_back(stmt());
    expect_punct("}");
    n->body = seq(std::move(body));
    return n;
  }

  std::vector<BufferRegion> region_list() {
    std::vector<BufferRegion> out;
    expect_punct("{");
    while (!is_punct("}")) {
      BufferRegion r;
      r.buffer = ident();
      expect_punct("[");
      while (!is_punct("]")) {
        RegionDim d;
        d.min = expr();
        expect_punct(",");
        d.extent = expr();
        r.dims.push_back(std::move(d));
        if (is_punct(";")) lex_.take();
      }
      expect_punct("]");
      out.push_back(std::move(r));
      if (is_punct(",")) lex_.take();
    }
    expect_punct("}");
    return out;
  }

  Stmt store_stmt(const std::string& buffer) {
    auto n = std::make_shared<StmtNode>();
    n->kind = StmtKind::BufferStore;
    n->buffer = buffer;
    expect_punct("[");
    while (!is_punct("]")) {
      n->indices.push_back(expr());
      if (is_punct(",")) lex_.take();
    }
    expect_punct("]");
    if (is_punct("+=")) {
      lex_.take();
      n->reduce = true;
    } else {
      expect_punct("=");
    }
    n->value = expr();
    expect_punct(";");
    return n;
  }

  Stmt search_stmt(const Token& first) {
    auto n = std::make_shared<StmtNode>();
    n->kind = StmtKind::BinarySearchBlock;
    n->result_var = first.text;
    if (is_punct(",")) {
      lex_.take();
      n->guarded = true;
      n->found_var = ident();
    }
    expect_punct("=");
    if (is_word("find")) {
      lex_.take();
      n->search_mode = SearchMode::LowerBound;
    } else if (is_word("locate")) {
      lex_.take();
      n->search_mode = SearchMode::LocateSegment;
    } else {
      error_at(lex_.peek(), "expected find(...) or locate(...)");
    }
    expect_punct("(");
    n->search_buffer = ident();
    expect_punct(",");
    n->seg_lo = expr();
    expect_punct(",");
    n->seg_hi = expr();
    expect_punct(",");
    n->key = expr();
    expect_punct(")");
    expect_punct(";");
    return n;
  }

  // --- expressions (precedence climbing) ---

  Expr expr() { return cmp_expr(); }

  Expr cmp_expr() {
    Expr a = add_expr();
    if (lex_.peek().kind == Tok::Punct) {
      const std::string& t = lex_.peek().text;
      CmpOp op;
      bool is_cmp = true;
      if (t == "==")
        op = CmpOp::Eq;
      else if (t == "!=")
        op = CmpOp::Ne;
      else if (t == "<")
        op = CmpOp::Lt;
      else if (t == "<=")
        op = CmpOp::Le;
      else if (t == ">")
        op = CmpOp::Gt;
      else if (t == ">=")
        op = CmpOp::Ge;
      else
        is_cmp = false;
      if (is_cmp) {
        lex_.take();
        Expr b = add_expr();
        return compare(op, a, b);
      }
    }
    return a;
  }

  Expr add_expr() {
    Expr a = mul_expr();
    for (;;) {
      if (is_punct("+")) {
        lex_.take();
        a = add(a, mul_expr());
      } else if (is_punct("-")) {
        lex_.take();
        a = sub(a, mul_expr());
      } else {
        return a;
      }
    }
  }

  Expr mul_expr() {
    Expr a = atom();
    for (;;) {
      if (is_punct("*")) {
        lex_.take();
        a = mul(a, atom());
      } else if (is_punct("/")) {
        lex_.take();
        a = floordiv(a, atom());
      } else if (is_punct("%")) {
        lex_.take();
        a = mod(a, atom());
      } else {
        return a;
      }
    }
  }

  Expr atom() {
    const Token& t = lex_.peek();
    if (t.kind == Tok::Int) return ic(lex_.take().ival);
    if (t.kind == Tok::Float) return fc(lex_.take().fval);
    if (is_punct("(")) {
      lex_.take();
      Expr e = expr();
      expect_punct(")");
      return e;
    }
    if (t.kind == Tok::Ident) {
      std::string name = lex_.take().text;
      if (name == "min" || name == "max") {
        expect_punct("(");
        Expr a = expr();
        expect_punct(",");
        Expr b = expr();
        expect_punct(")");
        return name == "min" ? min_e(a, b) : max_e(a, b);
      }
      if (name == "select") {
        expect_punct("(");
        Expr c = expr();
        expect_punct(",");
        Expr a = expr();
        expect_punct(",");
        Expr b = expr();
        expect_punct(")");
        return select(c, a, b);
      }
      if (is_punct("[")) {
        lex_.take();
        std::vector<Expr> idx;
        while (!is_punct("]")) {
          idx.push_back(expr());
          if (is_punct(",")) lex_.take();
        }
        expect_punct("]");
        return load(name, std::move(idx));
      }
      return var(name);
    }
    error_at(t, "expected expression");
  }

  Lexer lex_;
  std::vector<Diagnostic> diags_;
};

}  // namespace

ParseResult parse_program(const std::string& text) {
  Parser p(text);
  return p.run();
}

}  // namespace strata
