#include "putback/ast.hpp"

#include <set>

namespace putback {

Query base(std::string table) { return std::make_shared<QueryExpr>(QueryExpr{QueryExpr::Base{std::move(table)}}); }

Query project(Query input, RenamePairs pairs) {
    return std::make_shared<QueryExpr>(QueryExpr{QueryExpr::ProjectRename{std::move(input), std::move(pairs)}});
}

Query select(Query input, Predicate pred) {
    return std::make_shared<QueryExpr>(QueryExpr{QueryExpr::Select{std::move(input), std::move(pred)}});
}

Query join(Query left, Query right, JoinConds conds) {
    return std::make_shared<QueryExpr>(
        QueryExpr{QueryExpr::Join{std::move(left), std::move(right), std::move(conds)}});
}

Query union_query(Query left, Query right) {
    return std::make_shared<QueryExpr>(QueryExpr{QueryExpr::Union{std::move(left), std::move(right)}});
}

Query const_extend(Query input, std::string attr, Value literal) {
    return std::make_shared<QueryExpr>(
        QueryExpr{QueryExpr::ConstExtend{std::move(input), std::move(attr), std::move(literal)}});
}

bool equal(const Query& a, const Query& b) {
    if (!a || !b) return a == b;
    if (a->node.index() != b->node.index()) return false;
    return std::visit(
        [&](const auto& x) -> bool {
            using T = std::decay_t<decltype(x)>;
            const auto& y = std::get<T>(b->node);
            if constexpr (std::is_same_v<T, QueryExpr::Base>) {
                return x.table == y.table;
            } else if constexpr (std::is_same_v<T, QueryExpr::ProjectRename>) {
                return x.pairs == y.pairs && equal(x.input, y.input);
            } else if constexpr (std::is_same_v<T, QueryExpr::Select>) {
                return x.pred == y.pred && equal(x.input, y.input);
            } else if constexpr (std::is_same_v<T, QueryExpr::Join>) {
                return x.conds == y.conds && equal(x.left, y.left) && equal(x.right, y.right);
            } else if constexpr (std::is_same_v<T, QueryExpr::Union>) {
                return equal(x.left, y.left) && equal(x.right, y.right);
            } else {
                return x.attr == y.attr && x.literal == y.literal && equal(x.input, y.input);
            }
        },
        a->node);
}

namespace {

std::string predicate_text(const Predicate& p) {
    std::string out;
    for (const auto& atom : p.conjuncts) {
        if (!out.empty()) out += " and ";
        if (const auto* c = std::get_if<Predicate::Compare>(&atom)) {
            out += c->attr + std::string(to_string(c->op)) + to_literal(c->literal);
        } else if (const auto* n = std::get_if<Predicate::IsNull>(&atom)) {
            out += n->attr + " is null";
        } else {
            const auto& e = std::get<Predicate::AttrEq>(atom);
            out += e.left + "=" + e.right;
        }
    }
    return out.empty() ? "true" : out;
}

void collect_tables(const Query& q, std::set<std::string>& out) {
    std::visit(
        [&](const auto& x) {
            using T = std::decay_t<decltype(x)>;
            if constexpr (std::is_same_v<T, QueryExpr::Base>) {
                out.insert(x.table);
            } else if constexpr (std::is_same_v<T, QueryExpr::Join> || std::is_same_v<T, QueryExpr::Union>) {
                collect_tables(x.left, out);
                collect_tables(x.right, out);
            } else {
                collect_tables(x.input, out);
            }
        },
        q->node);
}

}  // namespace

std::string to_algebra(const Query& q) {
    return std::visit(
        [](const auto& x) -> std::string {
            using T = std::decay_t<decltype(x)>;
            if constexpr (std::is_same_v<T, QueryExpr::Base>) {
                return x.table;
            } else if constexpr (std::is_same_v<T, QueryExpr::ProjectRename>) {
                std::string s = "pi[";
                for (std::size_t i = 0; i < x.pairs.size(); ++i) {
                    if (i) s += ",";
                    s += x.pairs[i].first == x.pairs[i].second ? x.pairs[i].first
                                                               : x.pairs[i].first + "->" + x.pairs[i].second;
                }
                return s + "](" + to_algebra(x.input) + ")";
            } else if constexpr (std::is_same_v<T, QueryExpr::Select>) {
                return "sigma[" + predicate_text(x.pred) + "](" + to_algebra(x.input) + ")";
            } else if constexpr (std::is_same_v<T, QueryExpr::Join>) {
                std::string s = "join[";
                for (std::size_t i = 0; i < x.conds.size(); ++i) {
                    if (i) s += ",";
                    s += x.conds[i].first + "=" + x.conds[i].second;
                }
                return s + "](" + to_algebra(x.left) + ", " + to_algebra(x.right) + ")";
            } else if constexpr (std::is_same_v<T, QueryExpr::Union>) {
                return "union(" + to_algebra(x.left) + ", " + to_algebra(x.right) + ")";
            } else {
                return "ext[" + x.attr + ":=" + to_literal(x.literal) + "](" + to_algebra(x.input) + ")";
            }
        },
        q->node);
}

std::vector<std::string> referenced_tables(const Query& q) {
    std::set<std::string> out;
    collect_tables(q, out);
    return {out.begin(), out.end()};
}

// ---------------------------------------------------------------------------

const std::string& view_of(const Statement& s) {
    return std::visit([](const auto& x) -> const std::string& { return x.view; }, s.node);
}

const std::string& Program::view_name() const { return view_of(*root); }

bool equal(const Statement& a, const Statement& b) {
    if (a.node.index() != b.node.index()) return false;
    return std::visit(
        [&](const auto& x) -> bool {
            using T = std::decay_t<decltype(x)>;
            const auto& y = std::get<T>(b.node);
            if constexpr (std::is_same_v<T, Statement::Check>) {
                return x.view == y.view && equal(x.query, y.query);
            } else if constexpr (std::is_same_v<T, Statement::Update>) {
                return x.src_attrs == y.src_attrs && x.src_table == y.src_table && x.view_attrs == y.view_attrs &&
                       x.view == y.view;
            } else if constexpr (std::is_same_v<T, Statement::VSplit>) {
                if (x.view != y.view || x.branches.size() != y.branches.size()) return false;
                for (std::size_t i = 0; i < x.branches.size(); ++i) {
                    if (x.branches[i].attrs != y.branches[i].attrs) return false;
                    if (!equal(*x.branches[i].body, *y.branches[i].body)) return false;
                }
                return true;
            } else {
                if (x.view != y.view || x.split_attr != y.split_attr || x.branches.size() != y.branches.size())
                    return false;
                for (std::size_t i = 0; i < x.branches.size(); ++i) {
                    if (x.branches[i].literal != y.branches[i].literal) return false;
                    if (!equal(*x.branches[i].body, *y.branches[i].body)) return false;
                }
                if (!x.otherwise || !y.otherwise) return !x.otherwise && !y.otherwise;
                return equal(*x.otherwise, *y.otherwise);
            }
        },
        a.node);
}

StatementPtr make_statement(Statement::Check s) { return std::make_shared<Statement>(Statement{std::move(s)}); }
StatementPtr make_statement(Statement::Update s) { return std::make_shared<Statement>(Statement{std::move(s)}); }
StatementPtr make_statement(Statement::VSplit s) { return std::make_shared<Statement>(Statement{std::move(s)}); }
StatementPtr make_statement(Statement::HSplit s) { return std::make_shared<Statement>(Statement{std::move(s)}); }

}  // namespace putback
