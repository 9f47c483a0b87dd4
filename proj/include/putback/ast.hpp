#pragma once

#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "putback/relation.hpp"

namespace putback {

// ---------------------------------------------------------------------------
// Relational-algebra queries (the "get" side)

struct QueryExpr;
using Query = std::shared_ptr<const QueryExpr>;

struct QueryExpr {
    struct Base {
        std::string table;
    };
    struct ProjectRename {
        Query input;
        RenamePairs pairs;
    };
    struct Select {
        Query input;
        Predicate pred;
    };
    struct Join {
        Query left;
        Query right;
        JoinConds conds;
    };
    struct Union {
        Query left;
        Query right;
    };
    struct ConstExtend {
        Query input;
        std::string attr;
        Value literal;
    };

    std::variant<Base, ProjectRename, Select, Join, Union, ConstExtend> node;
};

Query base(std::string table);
Query project(Query input, RenamePairs pairs);
Query select(Query input, Predicate pred);
Query join(Query left, Query right, JoinConds conds);
Query union_query(Query left, Query right);
Query const_extend(Query input, std::string attr, Value literal);

/// Structural (deep) equality.
bool equal(const Query& a, const Query& b);

/// Compact one-line algebra form, e.g. pi[vid->vehicle_id](join[loc=loc](vehicles, area_map)).
std::string to_algebra(const Query& q);

/// Base tables referenced anywhere in q, sorted.
std::vector<std::string> referenced_tables(const Query& q);

// ---------------------------------------------------------------------------
// Update-strategy programs (the "put" side)

struct Statement;
using StatementPtr = std::shared_ptr<const Statement>;

struct Statement {
    struct Check {
        std::string view;
        Query query;
    };
    struct Update {
        std::vector<std::string> src_attrs;
        std::string src_table;
        std::vector<std::string> view_attrs;
        std::string view;
    };
    struct VSplitBranch {
        std::vector<std::string> attrs;
        StatementPtr body;
    };
    struct VSplit {
        std::string view;
        std::vector<VSplitBranch> branches;
    };
    struct HSplitBranch {
        Value literal;
        StatementPtr body;
    };
    struct HSplit {
        std::string view;
        std::string split_attr;
        std::vector<HSplitBranch> branches;
        StatementPtr otherwise;  // may be null
    };

    std::variant<Check, Update, VSplit, HSplit> node;
};

/// A whole update strategy: exactly one top-level statement.
struct Program {
    StatementPtr root;

    const std::string& view_name() const;
};

bool equal(const Statement& a, const Statement& b);
inline bool operator==(const Program& a, const Program& b) {
    return a.root && b.root ? equal(*a.root, *b.root) : a.root == b.root;
}

/// View name a statement binds.
const std::string& view_of(const Statement& s);

StatementPtr make_statement(Statement::Check s);
StatementPtr make_statement(Statement::Update s);
StatementPtr make_statement(Statement::VSplit s);
StatementPtr make_statement(Statement::HSplit s);

}  // namespace putback
