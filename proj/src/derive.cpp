#include "putback/derive.hpp"

#include <algorithm>
#include <set>

#include "putback/query.hpp"
#include "select_parts.hpp"

namespace putback {

Query derive_query(const Statement& s) {
    return std::visit(
        [](const auto& x) -> Query {
            using T = std::decay_t<decltype(x)>;
            if constexpr (std::is_same_v<T, Statement::Check>) {
                return x.query;
            } else if constexpr (std::is_same_v<T, Statement::Update>) {
                RenamePairs pairs;
                for (std::size_t i = 0; i < x.src_attrs.size(); ++i)
                    pairs.emplace_back(x.src_attrs[i], x.view_attrs[i]);
                return project(base(x.src_table), std::move(pairs));
            } else if constexpr (std::is_same_v<T, Statement::VSplit>) {
                Query acc = derive_query(*x.branches.front().body);
                std::vector<std::string> covered = x.branches.front().attrs;
                for (std::size_t i = 1; i < x.branches.size(); ++i) {
                    const auto& b = x.branches[i];
                    JoinConds conds;
                    for (const auto& a : b.attrs) {
                        bool shared = std::find(covered.begin(), covered.end(), a) != covered.end();
                        bool dup = std::any_of(conds.begin(), conds.end(), [&](const auto& c) { return c.first == a; });
                        if (shared && !dup) conds.emplace_back(a, a);
                    }
                    acc = join(acc, derive_query(*b.body), std::move(conds));
                    for (const auto& a : b.attrs)
                        if (std::find(covered.begin(), covered.end(), a) == covered.end()) covered.push_back(a);
                }
                RenamePairs pairs;
                for (const auto& a : covered) pairs.emplace_back(a, a);
                return project(acc, std::move(pairs));
            } else {
                Query acc;
                auto add = [&](Query q) { acc = acc ? union_query(acc, std::move(q)) : std::move(q); };
                for (const auto& b : x.branches) add(const_extend(derive_query(*b.body), x.split_attr, b.literal));
                if (x.otherwise) add(derive_query(*x.otherwise));
                return acc;
            }
        },
        s.node);
}

Query derive_query(const Program& p) { return derive_query(*p.root); }

Schema view_schema(const Program& p, const SchemaMap& sources) {
    return infer_schema(derive_query(p), sources).renamed(p.view_name());
}

// ---------------------------------------------------------------------------
// SQL rendering

namespace {

using detail::SelectParts;

/// Output attribute names, when they can be told without evaluating.
std::optional<std::vector<std::string>> output_names(const Query& q, const SchemaMap* schemas) {
    return std::visit(
        [&](const auto& x) -> std::optional<std::vector<std::string>> {
            using T = std::decay_t<decltype(x)>;
            if constexpr (std::is_same_v<T, QueryExpr::Base>) {
                if (!schemas) return std::nullopt;
                auto it = schemas->find(x.table);
                if (it == schemas->end()) return std::nullopt;
                return it->second.attr_names();
            } else if constexpr (std::is_same_v<T, QueryExpr::ProjectRename>) {
                std::vector<std::string> out;
                for (const auto& p : x.pairs) out.push_back(p.second);
                return out;
            } else if constexpr (std::is_same_v<T, QueryExpr::Select>) {
                return output_names(x.input, schemas);
            } else if constexpr (std::is_same_v<T, QueryExpr::Join>) {
                auto l = output_names(x.left, schemas);
                auto r = output_names(x.right, schemas);
                if (!l || !r) return std::nullopt;
                for (const auto& a : *r) {
                    bool merged = std::any_of(x.conds.begin(), x.conds.end(),
                                              [&](const auto& c) { return c.first == a && c.second == a; });
                    if (!merged) l->push_back(a);
                }
                return l;
            } else if constexpr (std::is_same_v<T, QueryExpr::Union>) {
                return output_names(x.left, schemas);
            } else {
                auto in = output_names(x.input, schemas);
                if (in) in->push_back(x.attr);
                return in;
            }
        },
        q->node);
}

class SqlRenderer {
public:
    explicit SqlRenderer(const SchemaMap* schemas) : schemas_(schemas) {}

    std::string render(const Query& q, const std::string& view) {
        emit(q, view);
        std::string out;
        for (const auto& s : stmts_) out += s + "\n";
        return out;
    }

private:
    std::string fresh() { return "tmp" + std::to_string(++counter_); }

    bool whole_table(const Query& q, const RenamePairs& pairs) const {
        const auto* b = std::get_if<QueryExpr::Base>(&q->node);
        if (!b || !schemas_) return false;
        auto it = schemas_->find(b->table);
        if (it == schemas_->end()) return false;
        auto names = it->second.attr_names();
        if (names.size() != pairs.size()) return false;
        for (std::size_t i = 0; i < names.size(); ++i)
            if (pairs[i].first != names[i] || pairs[i].second != names[i]) return false;
        return true;
    }

    std::optional<SelectParts> simple(const Query& q) const {
        if (auto parts = detail::decompose_select(q)) {
            if (const auto* p = std::get_if<QueryExpr::ProjectRename>(&q->node))
                if (whole_table(p->input, p->pairs)) parts->items.clear();
            return parts;
        }
        if (const auto* c = std::get_if<QueryExpr::ConstExtend>(&q->node)) {
            auto inner = simple(c->input);
            if (!inner) return std::nullopt;
            if (inner->items.empty()) inner->items.push_back("*");
            inner->items.push_back(to_literal(c->literal) + " AS " + c->attr);
            return inner;
        }
        return std::nullopt;
    }

    /// A SELECT block standing for q, materializing q into a temp table first
    /// when it has no single-block form.
    SelectParts block_for(const Query& q) {
        if (auto s = simple(q)) return *s;
        if (const auto* c = std::get_if<QueryExpr::ConstExtend>(&q->node)) {
            std::string t = fresh();
            emit(c->input, t);
            return SelectParts{{"*", to_literal(c->literal) + " AS " + c->attr}, {t}, {}};
        }
        std::string t = fresh();
        emit(q, t);
        return SelectParts{{}, {t}, {}};
    }

    void emit(const Query& q, const std::string& target) {
        if (auto s = simple(q)) {
            stmts_.push_back(detail::format_select(*s, target, 0) + ";");
            return;
        }
        if (std::holds_alternative<QueryExpr::Union>(q->node)) {
            std::vector<Query> branches;
            flatten_union(q, branches);
            std::vector<SelectParts> blocks;
            for (const auto& b : branches) blocks.push_back(block_for(b));
            std::string out = "SELECT *\nINTO   " + target + "\nFROM   ";
            for (std::size_t i = 0; i < blocks.size(); ++i) {
                if (i) out += "\n       UNION\n       ";
                out += detail::format_select(blocks[i], "", 7);
            }
            stmts_.push_back(out + ";");
            return;
        }
        const RenamePairs* items = nullptr;
        Query body = q;
        if (const auto* p = std::get_if<QueryExpr::ProjectRename>(&q->node)) {
            items = &p->pairs;
            body = p->input;
        }
        if (std::holds_alternative<QueryExpr::Join>(body->node)) {
            emit_join(body, items, target);
            return;
        }
        // Select / ConstExtend / projection over a non-join: materialize the input.
        SelectParts parts;
        if (const auto* s = std::get_if<QueryExpr::Select>(&body->node)) {
            std::string t = fresh();
            emit(s->input, t);
            parts.from.push_back(t);
            for (const auto& atom : s->pred.conjuncts) {
                Query probe = select(base(t), Predicate{{atom}});
                parts.where.push_back(detail::decompose_select(probe)->where.front());
            }
        } else if (!items) {
            parts = block_for(body);
        } else {
            std::string t = fresh();
            emit(body, t);
            parts.from.push_back(t);
        }
        if (items) {
            parts.items.clear();
            for (const auto& [src, dst] : *items) parts.items.push_back(src == dst ? src : src + " AS " + dst);
        }
        stmts_.push_back(detail::format_select(parts, target, 0) + ";");
    }

    void emit_join(const Query& body, const RenamePairs* items, const std::string& target) {
        std::vector<Query> chain;
        std::vector<const JoinConds*> conds;
        Query cur = body;
        while (const auto* j = std::get_if<QueryExpr::Join>(&cur->node)) {
            chain.push_back(j->right);
            conds.push_back(&j->conds);
            cur = j->left;
        }
        chain.push_back(cur);
        std::reverse(chain.begin(), chain.end());
        std::reverse(conds.begin(), conds.end());

        std::vector<std::string> names;
        std::vector<std::optional<std::vector<std::string>>> attrs;
        for (const auto& leaf : chain) {
            if (const auto* b = std::get_if<QueryExpr::Base>(&leaf->node)) {
                names.push_back(b->table);
            } else {
                names.push_back(fresh());
                emit(leaf, names.back());
            }
            attrs.push_back(output_names(leaf, schemas_));
        }
        auto owner = [&](const std::string& attr, std::size_t before) -> std::string {
            for (std::size_t i = 0; i < before; ++i) {
                if (attrs[i] && std::find(attrs[i]->begin(), attrs[i]->end(), attr) != attrs[i]->end())
                    return names[i];
            }
            return names[before - 1];
        };
        SelectParts parts;
        parts.from = names;
        for (std::size_t i = 0; i < conds.size(); ++i) {
            for (const auto& [a, b] : *conds[i])
                parts.where.push_back(owner(a, i + 1) + "." + a + " = " + names[i + 1] + "." + b);
        }
        if (items) {
            std::set<std::string> shared;
            for (const auto* jc : conds)
                for (const auto& [a, b] : *jc)
                    if (a == b) shared.insert(a);
            for (const auto& [src, dst] : *items) {
                std::string col = shared.count(src) ? owner(src, chain.size()) + "." + src : src;
                parts.items.push_back(col == dst ? col : col + " AS " + dst);
            }
        }
        stmts_.push_back(detail::format_select(parts, target, 0) + ";");
    }

    static void flatten_union(const Query& q, std::vector<Query>& out) {
        if (const auto* u = std::get_if<QueryExpr::Union>(&q->node)) {
            flatten_union(u->left, out);
            flatten_union(u->right, out);
        } else {
            out.push_back(q);
        }
    }

    const SchemaMap* schemas_;
    int counter_ = 0;
    std::vector<std::string> stmts_;
};

}  // namespace

std::string render_sql(const Query& q, const std::string& view_name, const SchemaMap* schemas) {
    return SqlRenderer(schemas).render(q, view_name);
}

}  // namespace putback
