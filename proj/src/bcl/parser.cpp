#include <cctype>
#include <string>
#include <vector>

#include "beamassist/bcl/ast.hpp"
#include "beamassist/bcl/signatures.hpp"

namespace beamassist::bcl {

std::string_view node_kind_name(NodeKind kind) {
  switch (kind) {
    case NodeKind::Module: return "module";
    case NodeKind::Block: return "block";
    case NodeKind::ExpressionStatement: return "expression_statement";
    case NodeKind::Assignment: return "assignment";
    case NodeKind::AugmentedAssignment: return "augmented_assignment";
    case NodeKind::ForStatement: return "for_statement";
    case NodeKind::WhileStatement: return "while_statement";
    case NodeKind::IfStatement: return "if_statement";
    case NodeKind::ElifClause: return "elif_clause";
    case NodeKind::ElseClause: return "else_clause";
    case NodeKind::ImportStatement: return "import_statement";
    case NodeKind::AliasedImport: return "aliased_import";
    case NodeKind::DottedName: return "dotted_name";
    case NodeKind::PassStatement: return "pass_statement";
    case NodeKind::BreakStatement: return "break_statement";
    case NodeKind::ContinueStatement: return "continue_statement";
    case NodeKind::Call: return "call";
    case NodeKind::ArgumentList: return "argument_list";
    case NodeKind::KeywordArgument: return "keyword_argument";
    case NodeKind::Attribute: return "attribute";
    case NodeKind::BinaryOperator: return "binary_operator";
    case NodeKind::ComparisonOperator: return "comparison_operator";
    case NodeKind::BooleanOperator: return "boolean_operator";
    case NodeKind::NotOperator: return "not_operator";
    case NodeKind::UnaryOperator: return "unary_operator";
    case NodeKind::List: return "list";
    case NodeKind::ParenthesizedExpression: return "parenthesized_expression";
    case NodeKind::Identifier: return "identifier";
    case NodeKind::Integer: return "integer";
    case NodeKind::Float: return "float";
    case NodeKind::String: return "string";
    case NodeKind::True: return "true";
    case NodeKind::False: return "false";
    case NodeKind::None: return "none";
  }
  return "?";
}

bool is_leaf_kind(NodeKind kind) {
  switch (kind) {
    case NodeKind::Identifier:
    case NodeKind::Integer:
    case NodeKind::Float:
    case NodeKind::String:
    case NodeKind::True:
    case NodeKind::False:
    case NodeKind::None:
      return true;
    default:
      return false;
  }
}

std::string sexp(const Node& node) {
  std::string out = "(";
  out += node_kind_name(node.kind);
  for (const auto& c : node.children) {
    out += ' ';
    out += sexp(c);
  }
  out += ')';
  return out;
}

std::string call_target(const Node& call) {
  if (call.kind != NodeKind::Call || call.children.empty()) return {};
  const Node& fn = call.children[0];
  if (fn.kind == NodeKind::Identifier) return fn.text;
  if (fn.kind == NodeKind::Attribute && fn.children.size() == 2 &&
      fn.children[0].kind == NodeKind::Identifier && fn.children[1].kind == NodeKind::Identifier)
    return fn.children[0].text + "." + fn.children[1].text;
  return {};
}

namespace {

enum class Tok { Name, Number, String, Op, Newline, Indent, Dedent, End };

struct Token {
  Tok kind;
  std::string text;
  int line;
  int col;
  bool is_float = false;
};

[[noreturn]] void syntax_error(const std::string& msg, int line, int col) {
  throw ParseError("SyntaxError", msg, line, col);
}

class Lexer {
 public:
  explicit Lexer(std::string_view src) : src_(src) {}

  std::vector<Token> run() {
    while (pos_ < src_.size()) {
      if (at_line_start_ && depth_ == 0) {
        if (!handle_indentation()) continue;
      }
      const char c = src_[pos_];
      if (c == ' ' || c == '\t' || c == '\r') {
        advance();
      } else if (c == '#') {
        while (pos_ < src_.size() && src_[pos_] != '\n') advance();
      } else if (c == '\\' && pos_ + 1 < src_.size() && src_[pos_ + 1] == '\n') {
        advance();
        advance();
      } else if (c == '\n') {
        if (depth_ == 0) push(Tok::Newline, "\n", line_, col_);
        advance();
        at_line_start_ = true;
      } else if (std::isdigit(static_cast<unsigned char>(c)) ||
                 (c == '.' && pos_ + 1 < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_ + 1])))) {
        lex_number();
      } else if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
        const int l = line_, cl = col_;
        std::size_t start = pos_;
        while (pos_ < src_.size() &&
               (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_'))
          advance();
        push(Tok::Name, std::string(src_.substr(start, pos_ - start)), l, cl);
      } else if (c == '\'' || c == '"') {
        lex_string();
      } else {
        lex_operator();
      }
    }
    if (!tokens_.empty() && tokens_.back().kind != Tok::Newline) push(Tok::Newline, "\n", line_, col_);
    while (indents_.size() > 1) {
      indents_.pop_back();
      push(Tok::Dedent, "", line_, col_);
    }
    push(Tok::End, "", line_, col_);
    return std::move(tokens_);
  }

 private:
  void advance() {
    if (src_[pos_] == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    ++pos_;
  }

  void push(Tok k, std::string text, int line, int col, bool is_float = false) {
    tokens_.push_back(Token{k, std::move(text), line, col, is_float});
  }

  // Returns false when the line was blank and has been consumed.
  bool handle_indentation() {
    int width = 0;
    while (pos_ < src_.size() && (src_[pos_] == ' ' || src_[pos_] == '\t')) {
      if (src_[pos_] == '\t') syntax_error("tab in indentation", line_, col_);
      ++width;
      advance();
    }
    if (pos_ >= src_.size()) return false;
    const char c = src_[pos_];
    if (c == '\n' || c == '\r' || c == '#') {
      while (pos_ < src_.size() && src_[pos_] != '\n') advance();
      if (pos_ < src_.size()) advance();
      return false;
    }
    at_line_start_ = false;
    if (width % 4 != 0) syntax_error("indentation must be a multiple of 4 spaces", line_, col_);
    if (width > indents_.back()) {
      indents_.push_back(width);
      push(Tok::Indent, "", line_, col_);
    } else {
      while (width < indents_.back()) {
        indents_.pop_back();
        push(Tok::Dedent, "", line_, col_);
      }
      if (width != indents_.back()) syntax_error("unindent does not match any outer level", line_, col_);
    }
    return true;
  }

  void lex_number() {
    const int l = line_, cl = col_;
    std::size_t start = pos_;
    bool is_float = false;
    while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) advance();
    if (pos_ < src_.size() && src_[pos_] == '.') {
      is_float = true;
      advance();
      while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) advance();
    }
    if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
      std::size_t save = pos_;
      int save_col = col_;
      advance();
      if (pos_ < src_.size() && (src_[pos_] == '+' || src_[pos_] == '-')) advance();
      if (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) {
        is_float = true;
        while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) advance();
      } else {
        pos_ = save;
        col_ = save_col;
      }
    }
    if (pos_ < src_.size() && (std::isalpha(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_'))
      syntax_error("invalid numeric literal", l, cl);
    push(Tok::Number, std::string(src_.substr(start, pos_ - start)), l, cl, is_float);
  }

  void lex_string() {
    const int l = line_, cl = col_;
    const char q = src_[pos_];
    const bool triple = src_.substr(pos_, 3) == std::string(3, q);
    for (int i = 0; i < (triple ? 3 : 1); ++i) advance();
    std::string value;
    while (true) {
      if (pos_ >= src_.size()) syntax_error("unterminated string literal", l, cl);
      const char c = src_[pos_];
      if (!triple && c == '\n') syntax_error("unterminated string literal", l, cl);
      if (c == q && (!triple || src_.substr(pos_, 3) == std::string(3, q))) {
        for (int i = 0; i < (triple ? 3 : 1); ++i) advance();
        break;
      }
      if (c == '\\' && pos_ + 1 < src_.size()) {
        advance();
        const char e = src_[pos_];
        switch (e) {
          case 'n': value += '\n'; break;
          case 't': value += '\t'; break;
          case '\\': value += '\\'; break;
          case '\'': value += '\''; break;
          case '"': value += '"'; break;
          case '\n': break;
          default:
            value += '\\';
            value += e;
        }
        advance();
        continue;
      }
      value += c;
      advance();
    }
    push(Tok::String, std::move(value), l, cl);
  }

  void lex_operator() {
    const int l = line_, cl = col_;
    static const char* two[] = {"**", "//", "==", "!=", "<=", ">=", "+=", "-=", "*=", "/=", "->"};
    for (const char* t : two) {
      if (src_.substr(pos_, 2) == t) {
        advance();
        advance();
        push(Tok::Op, t, l, cl);
        return;
      }
    }
    const char c = src_[pos_];
    static const std::string singles = "()[]{},:.;=+-*/%<>@";
    if (singles.find(c) == std::string::npos) syntax_error(std::string("unexpected character '") + c + "'", l, cl);
    if (c == '(' || c == '[' || c == '{') ++depth_;
    if (c == ')' || c == ']' || c == '}') {
      if (depth_ == 0) syntax_error(std::string("unmatched '") + c + "'", l, cl);
      --depth_;
    }
    advance();
    if (c == ';' && depth_ == 0) {
      push(Tok::Newline, "\n", l, cl);
      return;
    }
    push(Tok::Op, std::string(1, c), l, cl);
  }

  std::string_view src_;
  std::size_t pos_ = 0;
  int line_ = 1;
  int col_ = 1;
  int depth_ = 0;
  bool at_line_start_ = true;
  std::vector<int> indents_{0};
  std::vector<Token> tokens_;
};

bool is_unsupported_keyword(const std::string& s) {
  static const char* kws[] = {"def",   "class", "with",     "try",   "lambda", "return", "yield", "global",
                              "nonlocal", "del", "assert", "raise", "from", "async",  "await", "except",
                              "finally"};
  for (const char* k : kws)
    if (s == k) return true;
  return false;
}

bool is_reserved(const std::string& s) {
  static const char* kws[] = {"for", "in", "while", "if", "elif", "else", "import", "as", "pass",
                              "break", "continue", "and", "or", "not", "is", "True", "False", "None"};
  for (const char* k : kws)
    if (s == k) return true;
  return is_unsupported_keyword(s);
}

class Parser {
 public:
  Parser(std::vector<Token> tokens, const ParseOptions& options, std::vector<std::string>& imports)
      : toks_(std::move(tokens)), opts_(options), imports_(imports) {}

  Node module() {
    Node mod{NodeKind::Module, {}, {}, {}, 1, 1};
    while (peek().kind != Tok::End) {
      if (peek().kind == Tok::Newline) {
        ++i_;
        continue;
      }
      mod.children.push_back(statement());
    }
    return mod;
  }

 private:
  const Token& peek(std::size_t ahead = 0) const {
    const std::size_t k = std::min(i_ + ahead, toks_.size() - 1);
    return toks_[k];
  }
  const Token& next() { return toks_[std::min(i_++, toks_.size() - 1)]; }
  bool is_op(const char* s, std::size_t ahead = 0) const {
    return peek(ahead).kind == Tok::Op && peek(ahead).text == s;
  }
  bool is_name(const char* s) const { return peek().kind == Tok::Name && peek().text == s; }

  const Token& expect_op(const char* s) {
    if (!is_op(s)) fail_expected(std::string("'") + s + "'");
    return next();
  }

  [[noreturn]] void fail_expected(const std::string& what) const {
    const Token& t = peek();
    std::string got = t.kind == Tok::Newline  ? "end of line"
                      : t.kind == Tok::End    ? "end of input"
                      : t.kind == Tok::Indent ? "indent"
                      : t.kind == Tok::Dedent ? "dedent"
                                              : "'" + t.text + "'";
    syntax_error("expected " + what + ", got " + got, t.line, t.col);
  }

  [[noreturn]] void unsupported(const std::string& what, const Token& t) const {
    throw ParseError("UnsupportedConstruct", what + " is not supported", t.line, t.col, what);
  }

  static Node make(NodeKind k, const Token& at, std::string text = {}) {
    return Node{k, std::move(text), {}, {}, at.line, at.col};
  }

  Node statement() {
    const Token& t = peek();
    if (t.kind == Tok::Indent) syntax_error("unexpected indent", t.line, t.col);
    if (t.kind == Tok::Name) {
      if (t.text == "for") return for_statement();
      if (t.text == "while") return while_statement();
      if (t.text == "if") return if_statement();
      if (t.text == "elif" || t.text == "else") syntax_error("'" + t.text + "' without matching 'if'", t.line, t.col);
      if (is_unsupported_keyword(t.text)) unsupported("'" + t.text + "' statement", t);
    }
    Node s = simple_statement();
    end_of_statement();
    return s;
  }

  void end_of_statement() {
    if (peek().kind == Tok::Newline) {
      ++i_;
      return;
    }
    if (peek().kind == Tok::End || peek().kind == Tok::Dedent) return;
    fail_expected("end of line");
  }

  Node simple_statement() {
    const Token& t = peek();
    if (t.kind == Tok::Name) {
      if (t.text == "pass") return make(NodeKind::PassStatement, next());
      if (t.text == "break") return make(NodeKind::BreakStatement, next());
      if (t.text == "continue") return make(NodeKind::ContinueStatement, next());
      if (t.text == "import") return import_statement();
    }
    Node lhs = expression();
    if (is_op("=")) {
      const Token& eq = next();
      if (lhs.kind != NodeKind::Identifier && lhs.kind != NodeKind::Attribute)
        syntax_error("cannot assign to expression", eq.line, eq.col);
      Node rhs = expression();
      if (is_op("=")) unsupported("chained assignment", peek());
      Node a = Node{NodeKind::Assignment, "=", {}, {}, lhs.line, lhs.col};
      a.children.push_back(std::move(lhs));
      a.children.push_back(std::move(rhs));
      return a;
    }
    for (const char* op : {"+=", "-=", "*=", "/="}) {
      if (is_op(op)) {
        const Token& tok = next();
        if (lhs.kind != NodeKind::Identifier) syntax_error("augmented assignment target must be a name", tok.line, tok.col);
        Node a = Node{NodeKind::AugmentedAssignment, op, {}, {}, lhs.line, lhs.col};
        a.children.push_back(std::move(lhs));
        a.children.push_back(expression());
        return a;
      }
    }
    if (is_op(",")) unsupported("tuple expression", peek());
    Node s = Node{NodeKind::ExpressionStatement, {}, {}, {}, lhs.line, lhs.col};
    s.children.push_back(std::move(lhs));
    return s;
  }

  Node dotted_name() {
    if (peek().kind != Tok::Name) fail_expected("module name");
    Node d = make(NodeKind::DottedName, peek());
    std::string full;
    while (true) {
      const Token& n = next();
      if (n.kind != Tok::Name) syntax_error("expected name", n.line, n.col);
      d.children.push_back(make(NodeKind::Identifier, n, n.text));
      full += n.text;
      if (!is_op(".")) break;
      ++i_;
      full += '.';
    }
    d.text = full;
    return d;
  }

  Node import_statement() {
    Node imp = make(NodeKind::ImportStatement, next());
    while (true) {
      Node d = dotted_name();
      imports_.push_back(d.text);
      if (is_name("as")) {
        ++i_;
        if (peek().kind != Tok::Name) fail_expected("alias name");
        Node al = Node{NodeKind::AliasedImport, {}, {}, {}, d.line, d.col};
        al.children.push_back(std::move(d));
        al.children.push_back(make(NodeKind::Identifier, peek(), peek().text));
        ++i_;
        imp.children.push_back(std::move(al));
      } else {
        imp.children.push_back(std::move(d));
      }
      if (!is_op(",")) break;
      ++i_;
    }
    return imp;
  }

  Node block() {
    expect_op(":");
    Node b = make(NodeKind::Block, peek());
    if (peek().kind != Tok::Newline) {
      b.children.push_back(simple_statement());
      end_of_statement();
      return b;
    }
    ++i_;
    if (peek().kind != Tok::Indent) fail_expected("an indented block");
    ++i_;
    b.line = peek().line;
    b.col = peek().col;
    while (peek().kind != Tok::Dedent && peek().kind != Tok::End) {
      if (peek().kind == Tok::Newline) {
        ++i_;
        continue;
      }
      b.children.push_back(statement());
    }
    if (peek().kind == Tok::Dedent) ++i_;
    return b;
  }

  Node for_statement() {
    Node f = make(NodeKind::ForStatement, next());
    if (peek().kind != Tok::Name || is_reserved(peek().text)) fail_expected("loop variable");
    f.children.push_back(make(NodeKind::Identifier, peek(), peek().text));
    ++i_;
    if (is_op(",")) unsupported("tuple unpacking in for loop", peek());
    if (!is_name("in")) fail_expected("'in'");
    ++i_;
    f.children.push_back(expression());
    f.children.push_back(block());
    if (is_name("else")) unsupported("for-else", peek());
    return f;
  }

  Node while_statement() {
    Node w = make(NodeKind::WhileStatement, next());
    w.children.push_back(expression());
    w.children.push_back(block());
    if (is_name("else")) unsupported("while-else", peek());
    return w;
  }

  Node if_statement() {
    Node s = make(NodeKind::IfStatement, next());
    s.children.push_back(expression());
    s.children.push_back(block());
    while (is_name("elif")) {
      Node e = make(NodeKind::ElifClause, next());
      e.children.push_back(expression());
      e.children.push_back(block());
      s.children.push_back(std::move(e));
    }
    if (is_name("else")) {
      Node e = make(NodeKind::ElseClause, next());
      e.children.push_back(block());
      s.children.push_back(std::move(e));
    }
    return s;
  }

  // ---- expressions ----

  Node expression() { return or_expr(); }

  Node binary(NodeKind kind, std::string op, Node lhs, Node rhs) {
    Node b{kind, std::move(op), {}, {}, lhs.line, lhs.col};
    b.children.push_back(std::move(lhs));
    b.children.push_back(std::move(rhs));
    return b;
  }

  Node or_expr() {
    Node lhs = and_expr();
    while (is_name("or")) {
      ++i_;
      lhs = binary(NodeKind::BooleanOperator, "or", std::move(lhs), and_expr());
    }
    return lhs;
  }

  Node and_expr() {
    Node lhs = not_expr();
    while (is_name("and")) {
      ++i_;
      lhs = binary(NodeKind::BooleanOperator, "and", std::move(lhs), not_expr());
    }
    return lhs;
  }

  Node not_expr() {
    if (is_name("not")) {
      Node n = make(NodeKind::NotOperator, next(), "not");
      n.children.push_back(not_expr());
      return n;
    }
    return comparison();
  }

  Node comparison() {
    Node first = arith();
    std::vector<std::string> ops;
    std::vector<Node> operands;
    while (true) {
      std::string op;
      for (const char* c : {"<", "<=", ">", ">=", "==", "!="})
        if (is_op(c)) op = c;
      if (op.empty()) {
        if (is_name("in") || is_name("is") || (is_name("not") && peek(1).kind == Tok::Name && peek(1).text == "in"))
          unsupported("'" + peek().text + "' comparison", peek());
        break;
      }
      ++i_;
      ops.push_back(op);
      operands.push_back(arith());
    }
    if (ops.empty()) return first;
    Node c{NodeKind::ComparisonOperator, {}, std::move(ops), {}, first.line, first.col};
    c.children.push_back(std::move(first));
    for (auto& o : operands) c.children.push_back(std::move(o));
    return c;
  }

  Node arith() {
    Node lhs = term();
    while (is_op("+") || is_op("-")) {
      std::string op = next().text;
      lhs = binary(NodeKind::BinaryOperator, op, std::move(lhs), term());
    }
    return lhs;
  }

  Node term() {
    Node lhs = factor();
    while (is_op("*") || is_op("/") || is_op("//") || is_op("%")) {
      std::string op = next().text;
      lhs = binary(NodeKind::BinaryOperator, op, std::move(lhs), factor());
    }
    return lhs;
  }

  Node factor() {
    if (is_op("-") || is_op("+")) {
      Node u = make(NodeKind::UnaryOperator, peek(), peek().text);
      ++i_;
      u.children.push_back(factor());
      return u;
    }
    return power();
  }

  Node power() {
    Node base = primary();
    if (is_op("**")) {
      ++i_;
      return binary(NodeKind::BinaryOperator, "**", std::move(base), factor());
    }
    return base;
  }

  Node primary() {
    Node node = atom();
    while (true) {
      if (is_op(".")) {
        const Token& dot = next();
        if (peek().kind != Tok::Name) syntax_error("expected attribute name", dot.line, dot.col);
        Node attr{NodeKind::Attribute, {}, {}, {}, node.line, node.col};
        attr.children.push_back(std::move(node));
        attr.children.push_back(make(NodeKind::Identifier, peek(), peek().text));
        ++i_;
        if (!is_op("(")) check_attribute_read(attr);
        node = std::move(attr);
      } else if (is_op("(")) {
        node = call(std::move(node));
      } else if (is_op("[")) {
        unsupported("subscript", peek());
      } else {
        break;
      }
    }
    return node;
  }

  void check_attribute_read(const Node& attr) {
    const Node& obj = attr.children[0];
    const std::string dotted =
        obj.kind == NodeKind::Identifier ? obj.text + "." + attr.children[1].text : attr.children[1].text;
    if (is_known_attribute(dotted)) return;
    if (obj.kind == NodeKind::Identifier && whitelisted_receivers().count(obj.text)) {
      throw ParseError("UnknownFunction", "UNKNOWN FUNCTION: " + dotted, attr.line, attr.col, dotted);
    }
    throw ParseError("UnsupportedConstruct", "attribute access '" + dotted + "' is not supported", attr.line,
                     attr.col, dotted);
  }

  Node call(Node fn) {
    const Token& open = next();
    Node c{NodeKind::Call, {}, {}, {}, fn.line, fn.col};
    c.children.push_back(std::move(fn));
    Node args = make(NodeKind::ArgumentList, open);
    bool seen_keyword = false;
    while (!is_op(")")) {
      if (is_op("*") || is_op("**")) unsupported("star arguments", peek());
      if (peek().kind == Tok::Name && is_op("=", 1)) {
        Node kw = make(NodeKind::KeywordArgument, peek());
        kw.children.push_back(make(NodeKind::Identifier, peek(), peek().text));
        i_ += 2;
        kw.children.push_back(expression());
        args.children.push_back(std::move(kw));
        seen_keyword = true;
      } else {
        if (seen_keyword) syntax_error("positional argument follows keyword argument", peek().line, peek().col);
        args.children.push_back(expression());
      }
      if (is_op(",")) {
        ++i_;
        continue;
      }
      if (!is_op(")")) fail_expected("',' or ')'");
    }
    ++i_;
    c.children.push_back(std::move(args));
    check_call_target(c);
    return c;
  }

  void check_call_target(const Node& c) {
    const std::string target = call_target(c);
    if (target.empty()) {
      throw ParseError("UnknownFunction", "UNKNOWN FUNCTION: <expression>", c.line, c.col, "<expression>");
    }
    if (opts_.extra_functions.count(target)) return;
    const auto dot = target.find('.');
    if (dot == std::string::npos) {
      if (find_signature(target)) return;
    } else if (whitelisted_receivers().count(target.substr(0, dot)) && find_signature(target)) {
      return;
    }
    throw ParseError("UnknownFunction", "UNKNOWN FUNCTION: " + target, c.line, c.col, target);
  }

  Node atom() {
    const Token& t = peek();
    switch (t.kind) {
      case Tok::Name: {
        if (t.text == "True") return make(NodeKind::True, next(), "True");
        if (t.text == "False") return make(NodeKind::False, next(), "False");
        if (t.text == "None") return make(NodeKind::None, next(), "None");
        if (t.text == "lambda" || t.text == "yield" || t.text == "await") unsupported("'" + t.text + "'", t);
        if (is_reserved(t.text)) syntax_error("unexpected keyword '" + t.text + "'", t.line, t.col);
        return make(NodeKind::Identifier, next(), t.text);
      }
      case Tok::Number: {
        const Token& n = next();
        return make(n.is_float ? NodeKind::Float : NodeKind::Integer, n, n.text);
      }
      case Tok::String: {
        Node s = make(NodeKind::String, next(), t.text);
        while (peek().kind == Tok::String) s.text += next().text;
        return s;
      }
      case Tok::Op: {
        if (t.text == "(") {
          Node p = make(NodeKind::ParenthesizedExpression, next());
          if (is_op(")")) unsupported("empty tuple", t);
          p.children.push_back(expression());
          if (is_op(",")) unsupported("tuple", peek());
          expect_op(")");
          return p;
        }
        if (t.text == "[") {
          Node l = make(NodeKind::List, next());
          while (!is_op("]")) {
            l.children.push_back(expression());
            if (is_op(",")) {
              ++i_;
              continue;
            }
            if (!is_op("]")) fail_expected("',' or ']'");
          }
          ++i_;
          return l;
        }
        if (t.text == "{") unsupported("dict/set literal", t);
        syntax_error("unexpected '" + t.text + "'", t.line, t.col);
      }
      default:
        fail_expected("an expression");
    }
  }

  std::vector<Token> toks_;
  std::size_t i_ = 0;
  const ParseOptions& opts_;
  std::vector<std::string>& imports_;
};

}  // namespace

Program parse_program(std::string_view source, const ParseOptions& options) {
  Program p;
  p.source = std::string(source);
  Lexer lexer(source);
  Parser parser(lexer.run(), options, p.imports);
  p.root = parser.module();
  return p;
}

}  // namespace beamassist::bcl
