#include "putback/query.hpp"

#include <algorithm>
#include <numeric>

namespace putback {

namespace {

bool disjoint(const std::set<Value>& a, const std::set<Value>& b) {
    return std::none_of(a.begin(), a.end(), [&](const Value& v) { return b.count(v) != 0; });
}

/// Key of a union. Branches sharing a key keep it; if some attribute has
/// statically disjoint value sets on the two sides it is added, which is how
/// tagged HSPLIT branches get keys such as (vehicle_id, company_id).
std::vector<std::string> union_key(const Query& left, const Query& right, const Schema& ls, const Schema& rs) {
    const auto ka = ls.key();
    const auto kb = rs.key();
    std::optional<std::string> tag;
    for (const auto& a : ls.attrs()) {
        auto va = known_values(left, a.name);
        auto vb = known_values(right, a.name);
        if (va && vb && disjoint(*va, *vb)) {
            tag = a.name;
            break;
        }
    }
    std::set<std::string> sa(ka.begin(), ka.end()), sb(kb.begin(), kb.end());
    if (tag) {
        sa.insert(*tag);
        sb.insert(*tag);
    }
    if (sa != sb) return ls.attr_names();
    std::vector<std::string> key;
    for (const auto& a : ls.attrs())
        if (sa.count(a.name)) key.push_back(a.name);
    return key;
}

}  // namespace

Schema infer_schema(const Query& q, const SchemaMap& schemas) {
    return std::visit(
        [&](const auto& x) -> Schema {
            using T = std::decay_t<decltype(x)>;
            if constexpr (std::is_same_v<T, QueryExpr::Base>) {
                auto it = schemas.find(x.table);
                if (it == schemas.end()) throw Error(ErrorCode::UnknownTable, "no table '" + x.table + "'");
                return it->second.renamed("");
            } else if constexpr (std::is_same_v<T, QueryExpr::ProjectRename>) {
                return project_rename_schema(infer_schema(x.input, schemas), x.pairs);
            } else if constexpr (std::is_same_v<T, QueryExpr::Select>) {
                Schema s = infer_schema(x.input, schemas);
                check_predicate(x.pred, s);
                return s;
            } else if constexpr (std::is_same_v<T, QueryExpr::Join>) {
                return equi_join_schema(infer_schema(x.left, schemas), infer_schema(x.right, schemas), x.conds);
            } else if constexpr (std::is_same_v<T, QueryExpr::Union>) {
                Schema ls = infer_schema(x.left, schemas);
                Schema rs = infer_schema(x.right, schemas);
                return union_schema(ls, rs, union_key(x.left, x.right, ls, rs));
            } else {
                return const_extend_schema(infer_schema(x.input, schemas), x.attr, x.literal);
            }
        },
        q->node);
}

std::optional<std::set<Value>> known_values(const Query& q, const std::string& attr) {
    return std::visit(
        [&](const auto& x) -> std::optional<std::set<Value>> {
            using T = std::decay_t<decltype(x)>;
            if constexpr (std::is_same_v<T, QueryExpr::Base>) {
                return std::nullopt;
            } else if constexpr (std::is_same_v<T, QueryExpr::ProjectRename>) {
                for (const auto& [src, dst] : x.pairs)
                    if (dst == attr) return known_values(x.input, src);
                return std::nullopt;
            } else if constexpr (std::is_same_v<T, QueryExpr::Select>) {
                return known_values(x.input, attr);
            } else if constexpr (std::is_same_v<T, QueryExpr::Join>) {
                auto l = known_values(x.left, attr);
                return l ? l : known_values(x.right, attr);
            } else if constexpr (std::is_same_v<T, QueryExpr::Union>) {
                auto l = known_values(x.left, attr);
                auto r = known_values(x.right, attr);
                if (!l || !r) return std::nullopt;
                l->insert(r->begin(), r->end());
                return l;
            } else {
                if (x.attr == attr) return std::set<Value>{x.literal};
                return known_values(x.input, attr);
            }
        },
        q->node);
}

Relation eval(const Query& q, const Database& db) {
    return std::visit(
        [&](const auto& x) -> Relation {
            using T = std::decay_t<decltype(x)>;
            if constexpr (std::is_same_v<T, QueryExpr::Base>) {
                return db.at(x.table).renamed("");
            } else if constexpr (std::is_same_v<T, QueryExpr::ProjectRename>) {
                return project_rename(eval(x.input, db), x.pairs);
            } else if constexpr (std::is_same_v<T, QueryExpr::Select>) {
                return select_rows(eval(x.input, db), x.pred);
            } else if constexpr (std::is_same_v<T, QueryExpr::Join>) {
                return equi_join(eval(x.left, db), eval(x.right, db), x.conds);
            } else if constexpr (std::is_same_v<T, QueryExpr::Union>) {
                Relation l = eval(x.left, db);
                Relation r = eval(x.right, db);
                auto key = union_key(x.left, x.right, l.schema(), r.schema());
                return union_of(l, r, std::move(key));
            } else {
                return const_extend(eval(x.input, db), x.attr, x.literal);
            }
        },
        q->node);
}

// ---------------------------------------------------------------------------
// Lineage

std::string to_string(const Tid& tid) {
    std::string out = tid.table + ":";
    for (std::size_t i = 0; i < tid.key.size(); ++i) {
        if (i) out += ",";
        const auto& v = tid.key[i];
        out += v.is_null() ? "null" : v.is_int() ? std::to_string(v.as_int()) : v.as_text();
    }
    return out;
}

Relation LineageRelation::relation() const {
    std::set<Tuple> tuples;
    for (const auto& [t, _] : rows) tuples.insert(t);
    return Relation(schema, std::move(tuples));
}

LineageRelation eval_with_lineage(const Query& q, const Database& db) {
    return std::visit(
        [&](const auto& x) -> LineageRelation {
            using T = std::decay_t<decltype(x)>;
            LineageRelation out;
            if constexpr (std::is_same_v<T, QueryExpr::Base>) {
                const Relation& r = db.at(x.table);
                out.schema = r.schema().renamed("");
                for (const auto& row : r.rows()) out.rows[row].insert(Tid{x.table, r.key_of(row)});
            } else if constexpr (std::is_same_v<T, QueryExpr::ProjectRename>) {
                LineageRelation in = eval_with_lineage(x.input, db);
                out.schema = project_rename_schema(in.schema, x.pairs);
                std::vector<std::size_t> idx;
                for (const auto& p : x.pairs) idx.push_back(in.schema.require(p.first));
                for (const auto& [row, tids] : in.rows) {
                    Tuple t;
                    for (auto i : idx) t.push_back(row[i]);
                    out.rows[t].insert(tids.begin(), tids.end());
                }
            } else if constexpr (std::is_same_v<T, QueryExpr::Select>) {
                LineageRelation in = eval_with_lineage(x.input, db);
                check_predicate(x.pred, in.schema);
                out.schema = in.schema;
                for (auto& [row, tids] : in.rows)
                    if (satisfies(x.pred, in.schema, row)) out.rows.emplace(row, std::move(tids));
            } else if constexpr (std::is_same_v<T, QueryExpr::Join>) {
                LineageRelation l = eval_with_lineage(x.left, db);
                LineageRelation r = eval_with_lineage(x.right, db);
                out.schema = equi_join_schema(l.schema, r.schema, x.conds);
                std::vector<std::pair<std::size_t, std::size_t>> conds;
                std::set<std::size_t> merged;
                for (const auto& [a, b] : x.conds) {
                    conds.emplace_back(l.schema.require(a), r.schema.require(b));
                    if (a == b) merged.insert(r.schema.require(b));
                }
                for (const auto& [lrow, ltids] : l.rows) {
                    for (const auto& [rrow, rtids] : r.rows) {
                        bool ok = true;
                        for (const auto& [li, ri] : conds) ok = ok && compare_values(lrow[li], CmpOp::Eq, rrow[ri]);
                        if (!ok) continue;
                        Tuple t = lrow;
                        for (std::size_t i = 0; i < rrow.size(); ++i)
                            if (!merged.count(i)) t.push_back(rrow[i]);
                        auto& dst = out.rows[t];
                        dst.insert(ltids.begin(), ltids.end());
                        dst.insert(rtids.begin(), rtids.end());
                    }
                }
            } else if constexpr (std::is_same_v<T, QueryExpr::Union>) {
                LineageRelation l = eval_with_lineage(x.left, db);
                LineageRelation r = eval_with_lineage(x.right, db);
                out.schema = union_schema(l.schema, r.schema, union_key(x.left, x.right, l.schema, r.schema));
                out.rows = std::move(l.rows);
                std::vector<std::size_t> idx;
                for (const auto& a : out.schema.attrs()) idx.push_back(r.schema.require(a.name));
                for (const auto& [row, tids] : r.rows) {
                    Tuple t;
                    for (auto i : idx) t.push_back(row[i]);
                    out.rows[t].insert(tids.begin(), tids.end());
                }
            } else {
                LineageRelation in = eval_with_lineage(x.input, db);
                out.schema = const_extend_schema(in.schema, x.attr, x.literal);
                for (auto& [row, tids] : in.rows) {
                    Tuple t = row;
                    t.push_back(x.literal);
                    out.rows.emplace(std::move(t), std::move(tids));
                }
            }
            return out;
        },
        q->node);
}

// ---------------------------------------------------------------------------
// Payments

std::map<std::string, std::int64_t> distribute_payment(const LineageRelation& lr, std::int64_t total_cents,
                                                       PaymentPolicy policy,
                                                       const std::map<std::string, std::string>& owner_of) {
    if (total_cents < 0) throw Error(ErrorCode::ValidationFailed, "total must be non-negative");
    if (lr.rows.empty()) throw Error(ErrorCode::EmptyAnswer, "answer has no rows to pay for");

    auto owner = [&](const Tid& tid) -> const std::string& {
        auto it = owner_of.find(to_string(tid));
        if (it == owner_of.end()) throw Error(ErrorCode::ValidationFailed, "tid " + to_string(tid) + " has no owner");
        return it->second;
    };

    // Exact share of each owner as numerator / denominator.
    using Wide = __int128;
    std::map<std::string, Wide> numer;
    Wide denom = 1;
    if (policy == PaymentPolicy::PerTuple) {
        std::vector<std::set<std::string>> row_owners;
        Wide lcm = 1;
        for (const auto& [_, tids] : lr.rows) {
            std::set<std::string> owners;
            for (const auto& t : tids) owners.insert(owner(t));
            lcm = std::lcm(static_cast<std::int64_t>(lcm), static_cast<std::int64_t>(owners.size()));
            row_owners.push_back(std::move(owners));
        }
        denom = static_cast<Wide>(lr.rows.size()) * lcm;
        for (const auto& owners : row_owners)
            for (const auto& o : owners) numer[o] += static_cast<Wide>(total_cents) * (lcm / owners.size());
    } else {
        std::int64_t occurrences = 0;
        for (const auto& [_, tids] : lr.rows) {
            for (const auto& t : tids) {
                numer[owner(t)] += total_cents;
                ++occurrences;
            }
        }
        if (occurrences == 0) throw Error(ErrorCode::EmptyAnswer, "answer has no lineage tids");
        denom = occurrences;
    }

    std::map<std::string, std::int64_t> out;
    std::int64_t paid = 0;
    for (const auto& [o, n] : numer) {
        out[o] = static_cast<std::int64_t>(n / denom);
        paid += out[o];
    }
    std::int64_t remainder = total_cents - paid;
    for (auto it = out.begin(); remainder > 0; ++it, --remainder) {
        if (it == out.end()) it = out.begin();
        ++it->second;
    }
    return out;
}

}  // namespace putback
