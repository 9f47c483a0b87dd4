#pragma once

#include <string>

#include "putback/ast.hpp"

namespace putback {

/// The unique view query of an update program, derived syntactically:
///   CHECK v EQUALS q      -> q
///   UPDATE s IN t WITH w  -> pi[s->w](t)
///   VSPLIT                -> join of branch queries on shared view attrs,
///                            projected to the union of branch attrs
///   HSPLIT                -> union of branch queries; valued branches get
///                            the split attribute back as a constant column
Query derive_query(const Program& p);
Query derive_query(const Statement& s);

/// Output schema of the derived query, named after the program's view.
Schema view_schema(const Program& p, const SchemaMap& sources);

/// SQL text in the SELECT ... INTO style. Single-block branches are inlined;
/// anything else is materialized into tmp1, tmp2, ... in pre-order. With
/// `schemas`, an identity projection over a whole base table prints as `*`.
std::string render_sql(const Query& q, const std::string& view_name, const SchemaMap* schemas = nullptr);

}  // namespace putback
