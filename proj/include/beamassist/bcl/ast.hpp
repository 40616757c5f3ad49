#pragma once

#include <memory>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "beamassist/error.hpp"

// Beamline command language (BCL): the Python subset that the Operator cog
// emits. Node kinds follow the tree-sitter-python grammar names so that the
// AST-based similarity metrics see the same tree shape as the reference
// CodeBLEU implementation.
namespace beamassist::bcl {

enum class NodeKind {
  Module,
  Block,
  ExpressionStatement,
  Assignment,
  AugmentedAssignment,
  ForStatement,
  WhileStatement,
  IfStatement,
  ElifClause,
  ElseClause,
  ImportStatement,
  AliasedImport,
  DottedName,
  PassStatement,
  BreakStatement,
  ContinueStatement,
  Call,
  ArgumentList,
  KeywordArgument,
  Attribute,
  BinaryOperator,
  ComparisonOperator,
  BooleanOperator,
  NotOperator,
  UnaryOperator,
  List,
  ParenthesizedExpression,
  Identifier,
  Integer,
  Float,
  String,
  True,
  False,
  None,
};

std::string_view node_kind_name(NodeKind kind);
bool is_leaf_kind(NodeKind kind);

struct Node {
  NodeKind kind;
  // Identifier name, literal source text, or operator symbol(s). Comparison
  // chains store one operator per adjacent operand pair in `ops`.
  std::string text;
  std::vector<std::string> ops;
  std::vector<Node> children;
  int line = 0;
  int col = 0;

  const Node& child(std::size_t i) const { return children.at(i); }
};

struct Program {
  Node root;           // NodeKind::Module
  std::string source;
  std::vector<std::string> imports;
};

// Parse failures. `kind()` is one of SyntaxError, UnknownFunction,
// UnsupportedConstruct.
class ParseError : public Error {
 public:
  ParseError(std::string kind, const std::string& message, int line, int col, std::string subject = {})
      : Error(std::move(kind), message + " (line " + std::to_string(line) + ", col " + std::to_string(col) + ")"),
        line_(line), col_(col), subject_(std::move(subject)) {}
  int line() const noexcept { return line_; }
  int col() const noexcept { return col_; }
  // For UnknownFunction: the offending call target, e.g. "sam.levitate".
  const std::string& subject() const noexcept { return subject_; }

 private:
  int line_;
  int col_;
  std::string subject_;
};

struct ParseOptions {
  // Registry-added call targets, either bare ("wbs") or dotted ("sam.foo").
  std::set<std::string> extra_functions;
};

Program parse_program(std::string_view source, const ParseOptions& options = {});

// S-expression of node kinds only (leaf text omitted), e.g.
// "(call (attribute (identifier) (identifier)) (argument_list (float)))".
std::string sexp(const Node& node);

// Dotted call target of a Call node ("sam.measure", "wsam"), or empty.
std::string call_target(const Node& call);

}  // namespace beamassist::bcl
