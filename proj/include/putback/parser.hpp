#pragma once

#include <string>
#include <string_view>

#include "putback/ast.hpp"

namespace putback {

/// Parses an update-strategy program:
///
///   stmt  := "CHECK VIEW" id "EQUALS" query ";"
///          | "UPDATE" attrs "IN SOURCE" id "WITH" attrs "IN VIEW" id
///          | "VSPLIT VIEW" id "WITH" (attrs "{" stmt "}")+
///          | "HSPLIT VIEW" id "ON" id (lit "{" stmt "}")+ ["OTHERWISE" "{" stmt "}"]
///   attrs := id ("," id)*
///   lit   := "null" | integer | 'text'
///
/// Keywords are upper-case; `--` starts a line comment. Throws SyntaxError,
/// Error(DuplicateBranchLiteral) or Error(ArityMismatch).
Program parse_program(std::string_view text);

/// Parses the SELECT subset used by CHECK:
///   SELECT (* | item ("," item)*) FROM table ("," table)* [WHERE cond ("AND" cond)*]
/// where an item is [table "."] attr ["AS" alias] and a condition compares an
/// attribute with another attribute or a literal (=, <, <=, >, >=) or tests
/// IS NULL. Cross-table attr = attr conditions become join conditions and must
/// name their tables (unless `schemas` resolves them). A trailing ";" is allowed.
Query parse_check_query(std::string_view text, const SchemaMap* schemas = nullptr);

/// Renders a program in the concrete syntax above; parse_program inverts it.
std::string pretty_print(const Program& p);

/// Renders a query produced by parse_check_query back to SELECT text.
/// Throws Error(ValidationFailed) for trees outside the SELECT subset.
std::string render_select(const Query& q, int indent = 0);

}  // namespace putback
