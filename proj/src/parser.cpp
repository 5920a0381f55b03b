#include "datoc/parser.hpp"

#include <map>
#include <set>

#include "lexer.hpp"

namespace datoc {

using detail::Tok;
using detail::Token;

namespace {

const std::set<std::string> kKeywords = {
    "let", "stream", "task", "for", "in", "range", "local", "depth", "pack",
    "put", "get", "matmul", "allreduce", "reduce", "await", "tid", "max", "min"};

struct ParseFail {
  ParseError err;
};

class Parser {
 public:
  Parser(std::vector<Token> toks, std::string filename)
      : toks_(std::move(toks)), file_(std::move(filename)) {}

  Program parse() {
    Program p;
    p.source_file = file_;
    while (!at(Tok::Eof)) {
      if (at_kw("let")) {
        parse_let();
      } else if (at_kw("stream")) {
        p.streams.push_back(parse_stream());
      } else if (at_kw("task")) {
        p.tasks.push_back(parse_task());
      } else {
        fail("'let', 'stream' or 'task'");
      }
    }
    return p;
  }

 private:
  std::vector<Token> toks_;
  std::string file_;
  size_t pos_ = 0;
  std::map<std::string, std::int64_t> consts_;
  int next_site_id_ = 0;

  // Scope while parsing a task body.
  std::set<std::string> params_;
  std::set<std::string> locals_;

  const Token& cur() const { return toks_[pos_]; }
  const Token& peek(size_t n = 1) const {
    size_t k = pos_ + n;
    return toks_[k < toks_.size() ? k : toks_.size() - 1];
  }
  bool at(Tok k) const { return cur().kind == k; }
  bool at_kw(const char* kw) const { return cur().kind == Tok::Ident && cur().text == kw; }

  [[noreturn]] void fail(const std::string& expected) const {
    ParseError e;
    e.span = cur().span;
    e.expected = expected;
    e.found = cur().kind == Tok::Ident || cur().kind == Tok::Int || cur().kind == Tok::Float
                  ? "'" + cur().text + "'"
                  : detail::tok_name(cur().kind);
    if (cur().kind == Tok::Error) e.found = cur().text;
    throw ParseFail{std::move(e)};
  }

  Token expect(Tok k, const char* what = nullptr) {
    if (!at(k)) fail(what ? what : detail::tok_name(k));
    return toks_[pos_++];
  }

  void expect_kw(const char* kw) {
    if (!at_kw(kw)) fail(std::string("'") + kw + "'");
    ++pos_;
  }

  Token expect_ident() {
    if (!at(Tok::Ident)) fail("identifier");
    if (kKeywords.count(cur().text)) fail("identifier (not a keyword)");
    return toks_[pos_++];
  }

  // -- constant integer expressions (folded at parse time) -----------------

  std::int64_t parse_intexpr() { return parse_int_additive(); }

  std::int64_t parse_int_additive() {
    std::int64_t v = parse_int_mul();
    while (at(Tok::Plus) || at(Tok::Minus)) {
      bool add = at(Tok::Plus);
      ++pos_;
      std::int64_t rhs = parse_int_mul();
      v = add ? v + rhs : v - rhs;
    }
    return v;
  }

  std::int64_t parse_int_mul() {
    std::int64_t v = parse_int_unary();
    while (at(Tok::Star) || at(Tok::Slash)) {
      bool mul = at(Tok::Star);
      const Token& op = cur();
      ++pos_;
      std::int64_t rhs = parse_int_unary();
      if (mul) {
        v *= rhs;
      } else {
        if (rhs == 0) {
          ParseError e;
          e.span = op.span;
          e.expected = "nonzero divisor";
          e.found = "0";
          throw ParseFail{std::move(e)};
        }
        v /= rhs;
      }
    }
    return v;
  }

  std::int64_t parse_int_unary() {
    if (at(Tok::Minus)) {
      ++pos_;
      return -parse_int_unary();
    }
    if (at(Tok::Int)) return toks_[pos_++].ival;
    if (at(Tok::LParen)) {
      ++pos_;
      std::int64_t v = parse_intexpr();
      expect(Tok::RParen);
      return v;
    }
    if (at(Tok::Ident)) {
      auto it = consts_.find(cur().text);
      if (it == consts_.end()) fail("constant (let-bound name or integer)");
      ++pos_;
      return it->second;
    }
    fail("integer expression");
  }

  // -- declarations ---------------------------------------------------------

  void parse_let() {
    expect_kw("let");
    Token name = expect_ident();
    expect(Tok::Assign);
    std::int64_t v = parse_intexpr();
    expect(Tok::Semi);
    consts_[name.text] = v;
  }

  TensorType parse_tensortype() {
    Token elem = expect(Tok::Ident, "element type");
    auto et = elem_from_name(elem.text);
    if (!et) {
      --pos_;
      fail("element type (i4, i8, i16, i32, bf16, f32)");
    }
    TensorType t;
    t.elem = *et;
    if (at(Tok::LBracket)) {
      ++pos_;
      t.shape.push_back(parse_intexpr());
      while (at(Tok::Comma)) {
        ++pos_;
        t.shape.push_back(parse_intexpr());
      }
      expect(Tok::RBracket);
    }
    return t;
  }

  StreamDecl parse_stream() {
    StreamDecl d;
    d.span = cur().span;
    expect_kw("stream");
    d.name = expect_ident().text;
    expect(Tok::Colon);
    expect_kw("stream");
    expect(Tok::Lt);
    d.type.elem = parse_tensortype();
    expect(Tok::Gt);
    if (at(Tok::LBracket)) {
      ++pos_;
      d.grid.push_back(parse_intexpr());
      while (at(Tok::Comma)) {
        ++pos_;
        d.grid.push_back(parse_intexpr());
      }
      expect(Tok::RBracket);
    }
    if (at_kw("depth")) {
      ++pos_;
      d.type.depth = static_cast<int>(parse_intexpr());
    }
    if (at_kw("pack")) {
      ++pos_;
      d.type.pack = static_cast<int>(parse_intexpr());
    }
    expect(Tok::Semi);
    return d;
  }

  TaskDef parse_task() {
    TaskDef t;
    t.span = cur().span;
    expect_kw("task");
    t.name = expect_ident().text;
    expect(Tok::LBracket);
    t.mapping.push_back(parse_intexpr());
    while (at(Tok::Comma)) {
      ++pos_;
      t.mapping.push_back(parse_intexpr());
    }
    expect(Tok::RBracket);
    expect(Tok::LParen);
    params_.clear();
    locals_.clear();
    if (!at(Tok::RParen)) {
      t.params.push_back(parse_param());
      while (at(Tok::Comma)) {
        ++pos_;
        t.params.push_back(parse_param());
      }
    }
    expect(Tok::RParen);
    for (const auto& p : t.params) params_.insert(p.name);
    t.body = parse_block();
    return t;
  }

  Param parse_param() {
    Param p;
    Token name = expect_ident();
    p.name = name.text;
    p.span = name.span;
    expect(Tok::Colon);
    p.type = parse_tensortype();
    if (at(Tok::At)) {
      ++pos_;
      Token s = expect(Tok::String, "layout string");
      auto l = layout_from_string(s.text);
      if (!l) {
        --pos_;
        fail("layout string of R and S<digit> labels");
      }
      p.layout = *l;
      p.layout_explicit = true;
    } else {
      p.layout = LayoutType::all_replicated(p.type.rank());
    }
    return p;
  }

  std::vector<StmtPtr> parse_block() {
    expect(Tok::LBrace);
    std::vector<StmtPtr> body;
    while (!at(Tok::RBrace)) body.push_back(parse_stmt());
    expect(Tok::RBrace);
    return body;
  }

  // -- statements -----------------------------------------------------------

  StmtPtr parse_stmt() {
    if (at_kw("for")) return parse_for();
    if (at_kw("local")) return parse_local();
    if (!at(Tok::Ident)) fail("statement");
    return parse_put_or_assign();
  }

  StmtPtr parse_for() {
    SourceSpan sp = cur().span;
    expect_kw("for");
    Token iv = expect_ident();
    expect_kw("in");
    expect_kw("range");
    expect(Tok::LParen);
    std::int64_t bound = parse_intexpr();
    expect(Tok::RParen);
    bool fresh = locals_.insert(iv.text).second;
    auto body = parse_block();
    if (fresh) locals_.erase(iv.text);
    return Stmt::make_for(iv.text, bound, std::move(body), sp);
  }

  StmtPtr parse_local() {
    SourceSpan sp = cur().span;
    expect_kw("local");
    Token name = expect_ident();
    std::optional<TensorType> type;
    ExprPtr init;
    if (at(Tok::Colon)) {
      ++pos_;
      type = parse_tensortype();
    }
    if (at(Tok::Assign)) {
      ++pos_;
      init = parse_expr();
    }
    if (!type && !init) fail("':' type or '=' initializer on local");
    expect(Tok::Semi);
    locals_.insert(name.text);
    return Stmt::make_local(name.text, std::move(type), std::move(init), sp);
  }

  // An element inside brackets: either a slice range or a plain expression.
  struct BracketElem {
    bool is_range = false;
    SliceRange range;
    ExprPtr expr;
  };

  BracketElem parse_bracket_elem() {
    BracketElem e;
    if (at(Tok::Colon)) {
      ++pos_;
      e.is_range = true;
      e.range.full = true;
      return e;
    }
    ExprPtr first = parse_expr();
    if (at(Tok::Colon)) {
      ++pos_;
      e.is_range = true;
      e.range.full = false;
      e.range.lo = std::move(first);
      e.range.hi = parse_expr();
      return e;
    }
    e.expr = std::move(first);
    return e;
  }

  std::vector<BracketElem> parse_bracket_list() {
    expect(Tok::LBracket);
    std::vector<BracketElem> items;
    items.push_back(parse_bracket_elem());
    while (at(Tok::Comma)) {
      ++pos_;
      items.push_back(parse_bracket_elem());
    }
    expect(Tok::RBracket);
    return items;
  }

  static std::vector<SliceRange> to_ranges(std::vector<BracketElem> items, Parser* self) {
    std::vector<SliceRange> ranges;
    for (auto& it : items) {
      if (!it.is_range) self->fail("slice range (':' or 'lo:hi')");
      ranges.push_back(std::move(it.range));
    }
    return ranges;
  }

  static std::vector<ExprPtr> to_indices(std::vector<BracketElem> items, Parser* self) {
    std::vector<ExprPtr> out;
    for (auto& it : items) {
      if (it.is_range) self->fail("stream index expression");
      out.push_back(std::move(it.expr));
    }
    return out;
  }

  StmtPtr parse_put_or_assign() {
    Token name = expect_ident();
    SourceSpan sp = name.span;
    std::vector<BracketElem> items;
    bool had_brackets = false;
    if (at(Tok::LBracket)) {
      had_brackets = true;
      items = parse_bracket_list();
    }
    if (at(Tok::Dot)) {
      ++pos_;
      expect_kw("put");
      StreamRef ref;
      ref.name = name.text;
      ref.span = sp;
      if (had_brackets) ref.indices = to_indices(std::move(items), this);
      expect(Tok::LParen);
      ExprPtr payload = parse_expr();
      expect(Tok::RParen);
      expect(Tok::Semi);
      return Stmt::make_put(std::move(ref), std::move(payload), sp);
    }
    LValue lv;
    lv.name = name.text;
    lv.span = sp;
    if (had_brackets) {
      lv.has_ranges = true;
      lv.ranges = to_ranges(std::move(items), this);
    }
    expect(Tok::Assign);
    ExprPtr rhs = parse_expr();
    expect(Tok::Semi);
    return Stmt::make_assign(std::move(lv), std::move(rhs), sp);
  }

  // -- expressions ----------------------------------------------------------

  ExprPtr parse_expr() { return parse_additive(); }

  ExprPtr parse_additive() {
    ExprPtr lhs = parse_multiplicative();
    while (at(Tok::Plus) || at(Tok::Minus)) {
      EltOp op = at(Tok::Plus) ? EltOp::Add : EltOp::Sub;
      SourceSpan sp = cur().span;
      ++pos_;
      ExprPtr rhs = parse_multiplicative();
      lhs = Expr::make_eltwise(op, std::move(lhs), std::move(rhs), sp);
    }
    return lhs;
  }

  ExprPtr parse_multiplicative() {
    ExprPtr lhs = parse_unary();
    while (at(Tok::Star)) {
      SourceSpan sp = cur().span;
      ++pos_;
      ExprPtr rhs = parse_unary();
      lhs = Expr::make_eltwise(EltOp::Mul, std::move(lhs), std::move(rhs), sp);
    }
    return lhs;
  }

  ExprPtr parse_unary() {
    if (at(Tok::Minus)) {
      SourceSpan sp = cur().span;
      ++pos_;
      ExprPtr inner = parse_unary();
      if (inner->kind == ExprKind::Const && !inner->is_float_const) {
        inner->ival = -inner->ival;
        return inner;
      }
      if (inner->kind == ExprKind::Const && inner->is_float_const) {
        inner->fval = -inner->fval;
        return inner;
      }
      return Expr::make_eltwise(EltOp::Sub, Expr::make_int(0, sp), std::move(inner), sp);
    }
    return parse_primary();
  }

  ExprPtr parse_call_2(EltOp op, SourceSpan sp) {
    expect(Tok::LParen);
    ExprPtr a = parse_expr();
    expect(Tok::Comma);
    ExprPtr b = parse_expr();
    expect(Tok::RParen);
    return Expr::make_eltwise(op, std::move(a), std::move(b), sp);
  }

  ExprPtr parse_primary() {
    if (at(Tok::Int)) {
      Token t = toks_[pos_++];
      return Expr::make_int(t.ival, t.span);
    }
    if (at(Tok::Float)) {
      Token t = toks_[pos_++];
      return Expr::make_float(t.fval, t.span);
    }
    if (at(Tok::LParen)) {
      ++pos_;
      ExprPtr e = parse_expr();
      expect(Tok::RParen);
      return e;
    }
    if (!at(Tok::Ident)) fail("expression");
    SourceSpan sp = cur().span;

    if (at_kw("matmul")) {
      ++pos_;
      expect(Tok::LParen);
      ExprPtr a = parse_expr();
      expect(Tok::Comma);
      ExprPtr b = parse_expr();
      expect(Tok::RParen);
      return Expr::make_matmul(std::move(a), std::move(b), sp);
    }
    if (at_kw("allreduce")) {
      ++pos_;
      expect(Tok::LParen);
      ExprPtr a = parse_expr();
      expect(Tok::Comma);
      Token op = expect(Tok::String, "reduction operator string");
      expect(Tok::RParen);
      auto r = reduce_op_from_name(op.text);
      if (!r) {
        --pos_;
        fail("reduction operator (\"+\", \"max\", \"min\", \"*\")");
      }
      return Expr::make_allreduce(*r, std::move(a), next_site_id_++, sp);
    }
    if (at_kw("reduce")) {
      ++pos_;
      expect(Tok::LParen);
      Token op = expect(Tok::String, "reduction operator string");
      auto r = reduce_op_from_name(op.text);
      if (!r) {
        --pos_;
        fail("reduction operator (\"+\", \"max\", \"min\", \"*\")");
      }
      expect(Tok::Comma);
      std::int64_t axis = parse_intexpr();
      expect(Tok::Comma);
      ExprPtr a = parse_expr();
      expect(Tok::RParen);
      return Expr::make_reduce(*r, static_cast<int>(axis), std::move(a), sp);
    }
    if (at_kw("await")) {
      ++pos_;
      expect(Tok::LParen);
      ExprPtr a = parse_expr();
      expect(Tok::RParen);
      return Expr::make_await(std::move(a), sp);
    }
    if (at_kw("tid")) {
      ++pos_;
      expect(Tok::LParen);
      std::int64_t axis = parse_intexpr();
      expect(Tok::RParen);
      return Expr::make_tid(static_cast<int>(axis), sp);
    }
    if (at_kw("max")) {
      ++pos_;
      return parse_call_2(EltOp::Max, sp);
    }
    if (at_kw("min")) {
      ++pos_;
      return parse_call_2(EltOp::Min, sp);
    }
    if (kKeywords.count(cur().text)) fail("expression");

    Token name = toks_[pos_++];
    // Kernel call.
    if (at(Tok::LParen)) {
      ++pos_;
      std::vector<ExprPtr> args;
      if (!at(Tok::RParen)) {
        args.push_back(parse_expr());
        while (at(Tok::Comma)) {
          ++pos_;
          args.push_back(parse_expr());
        }
      }
      expect(Tok::RParen);
      return Expr::make_kernel_call(name.text, std::move(args), sp);
    }
    // Stream get or slice.
    if (at(Tok::LBracket)) {
      auto items = parse_bracket_list();
      if (at(Tok::Dot)) {
        ++pos_;
        expect_kw("get");
        expect(Tok::LParen);
        expect(Tok::RParen);
        StreamRef ref;
        ref.name = name.text;
        ref.span = sp;
        ref.indices = to_indices(std::move(items), this);
        return Expr::make_get(std::move(ref), sp);
      }
      ExprPtr base = make_name_ref(name);
      return Expr::make_slice(std::move(base), to_ranges(std::move(items), this), sp);
    }
    // Bare stream get: s.get().
    if (at(Tok::Dot)) {
      ++pos_;
      expect_kw("get");
      expect(Tok::LParen);
      expect(Tok::RParen);
      StreamRef ref;
      ref.name = name.text;
      ref.span = sp;
      return Expr::make_get(std::move(ref), sp);
    }
    return make_name_ref(name);
  }

  ExprPtr make_name_ref(const Token& name) {
    if (locals_.count(name.text)) return Expr::make_local(name.text, name.span);
    if (params_.count(name.text)) return Expr::make_param(name.text, name.span);
    auto it = consts_.find(name.text);
    if (it != consts_.end()) return Expr::make_int(it->second, name.span);
    ParseError e;
    e.span = name.span;
    e.expected = "declared parameter, local or constant";
    e.found = "'" + name.text + "'";
    throw ParseFail{std::move(e)};
  }
};

}  // namespace

ParseResult parse_program(const std::string& text, const std::string& filename) {
  auto toks = detail::lex(text, filename);
  if (!toks.empty() && toks.back().kind == Tok::Error) {
    ParseResult r;
    ParseError e;
    e.span = toks.back().span;
    e.expected = "valid token";
    e.found = toks.back().text;
    r.error = std::move(e);
    return r;
  }
  Parser p(std::move(toks), filename);
  ParseResult r;
  try {
    r.program = p.parse();
  } catch (ParseFail& f) {
    r.error = std::move(f.err);
  }
  return r;
}

}  // namespace datoc
