#pragma once

// Internal: decomposition of a query in the SELECT subset into clauses, shared
// by the program pretty-printer and the SQL renderer.

#include <optional>
#include <string>
#include <vector>

#include "putback/ast.hpp"

namespace putback::detail {

struct SelectParts {
    std::vector<std::string> items;  // empty means "*"
    std::vector<std::string> from;
    std::vector<std::string> where;
};

/// Succeeds for [ProjectRename] [Select-over-join] left-deep joins of Base or
/// Select(Base), i.e. exactly the shapes parse_check_query produces.
std::optional<SelectParts> decompose_select(const Query& q);

/// SELECT / [INTO] / FROM / WHERE block; continuation lines are prefixed with
/// `indent` spaces and the result has no trailing newline or semicolon.
std::string format_select(const SelectParts& parts, const std::string& into, int indent);

}  // namespace putback::detail
