#include "select_parts.hpp"

namespace putback::detail {

namespace {

struct Leaf {
    std::string table;
    const Predicate* pred = nullptr;
};

std::optional<Leaf> as_leaf(const Query& q) {
    if (const auto* b = std::get_if<QueryExpr::Base>(&q->node)) return Leaf{b->table, nullptr};
    if (const auto* s = std::get_if<QueryExpr::Select>(&q->node)) {
        if (const auto* b = std::get_if<QueryExpr::Base>(&s->input->node)) return Leaf{b->table, &s->pred};
    }
    return std::nullopt;
}

std::string atom_text(const Predicate::Atom& atom, const std::string& qualifier) {
    auto q = [&](const std::string& a) { return qualifier.empty() ? a : qualifier + "." + a; };
    if (const auto* c = std::get_if<Predicate::Compare>(&atom))
        return q(c->attr) + " " + std::string(to_string(c->op)) + " " + to_literal(c->literal);
    if (const auto* n = std::get_if<Predicate::IsNull>(&atom)) return q(n->attr) + " IS NULL";
    const auto& e = std::get<Predicate::AttrEq>(atom);
    return q(e.left) + " = " + q(e.right);
}

}  // namespace

std::optional<SelectParts> decompose_select(const Query& q) {
    Query cur = q;
    const RenamePairs* items = nullptr;
    if (const auto* p = std::get_if<QueryExpr::ProjectRename>(&cur->node)) {
        items = &p->pairs;
        cur = p->input;
    }
    const Predicate* top = nullptr;
    if (const auto* s = std::get_if<QueryExpr::Select>(&cur->node)) {
        if (std::holds_alternative<QueryExpr::Join>(s->input->node)) {
            top = &s->pred;
            cur = s->input;
        }
    }
    std::vector<Query> stack;
    while (const auto* j = std::get_if<QueryExpr::Join>(&cur->node)) {
        stack.push_back(cur);
        cur = j->left;
    }
    std::vector<Leaf> leaves;
    std::vector<std::pair<std::size_t, const JoinConds*>> joins;
    auto first = as_leaf(cur);
    if (!first) return std::nullopt;
    leaves.push_back(*first);
    for (auto it = stack.rbegin(); it != stack.rend(); ++it) {
        const auto& j = std::get<QueryExpr::Join>((*it)->node);
        auto leaf = as_leaf(j.right);
        if (!leaf) return std::nullopt;
        leaves.push_back(*leaf);
        joins.emplace_back(leaves.size() - 1, &j.conds);
    }
    const bool single = leaves.size() == 1;

    SelectParts parts;
    if (items) {
        for (const auto& [src, dst] : *items) parts.items.push_back(src == dst ? src : src + " AS " + dst);
    }
    for (const auto& l : leaves) parts.from.push_back(l.table);
    for (const auto& [right, jc] : joins) {
        // Qualify the left side with the most recently joined table; any table
        // already joined re-parses to the same tree.
        const std::string& lq = leaves[right - 1].table;
        for (const auto& [a, b] : *jc) parts.where.push_back(lq + "." + a + " = " + leaves[right].table + "." + b);
    }
    for (const auto& l : leaves) {
        if (!l.pred) continue;
        for (const auto& atom : l.pred->conjuncts) parts.where.push_back(atom_text(atom, single ? "" : l.table));
    }
    if (top) {
        for (const auto& atom : top->conjuncts) {
            if (std::holds_alternative<Predicate::AttrEq>(atom)) return std::nullopt;
            parts.where.push_back(atom_text(atom, ""));
        }
    }
    return parts;
}

std::string format_select(const SelectParts& parts, const std::string& into, int indent) {
    const std::string pad(indent, ' ');
    std::string out = "SELECT ";
    if (parts.items.empty()) {
        out += "*";
    } else {
        for (std::size_t i = 0; i < parts.items.size(); ++i) {
            if (i) out += ",\n" + pad + "       ";
            out += parts.items[i];
        }
    }
    if (!into.empty()) out += "\n" + pad + "INTO   " + into;
    out += "\n" + pad + "FROM   ";
    for (std::size_t i = 0; i < parts.from.size(); ++i) {
        if (i) out += ", ";
        out += parts.from[i];
    }
    for (std::size_t i = 0; i < parts.where.size(); ++i)
        out += (i == 0 ? "\n" + pad + "WHERE  " : "\n" + pad + "  AND  ") + parts.where[i];
    return out;
}

}  // namespace putback::detail
