#pragma once

// Shared helpers for the test binaries. The oracle evaluator below is a
// deliberately naive nested-loop interpreter over plain row sets; it shares
// only the Value type with the library.

#include <algorithm>
#include <filesystem>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "putback/ast.hpp"
#include "putback/io.hpp"
#include "putback/relation.hpp"

namespace testing {

using namespace putback;

inline std::filesystem::path data_dir() { return PUTBACK_DATA_DIR; }
inline std::filesystem::path data(const std::string& rel) { return data_dir() / rel; }

inline Program program(const std::string& name) { return load_program(data("programs/" + name + ".ust")); }
inline Database fixture(const std::string& prog, const std::string& variant) {
    return load_database(data("db/" + prog + "/" + variant));
}

inline Attr text(std::string n, bool nullable = false) { return Attr{std::move(n), AttrType::Text, nullable}; }
inline Attr integer(std::string n, bool nullable = false) { return Attr{std::move(n), AttrType::Int, nullable}; }

const Value N = Value::null();

// ---------------------------------------------------------------------------
// Oracle

struct Table {
    std::vector<std::string> cols;
    std::set<Tuple> rows;
};

inline std::size_t col(const Table& t, const std::string& name) {
    auto it = std::find(t.cols.begin(), t.cols.end(), name);
    if (it == t.cols.end()) throw std::runtime_error("oracle: no column " + name);
    return static_cast<std::size_t>(it - t.cols.begin());
}

inline Table from(const Relation& r) { return Table{r.schema().attr_names(), r.rows()}; }

inline std::map<std::string, Table> from(const Database& db) {
    std::map<std::string, Table> out;
    for (const auto& [n, r] : db) out[n] = from(r);
    return out;
}

/// Rows of t with columns permuted into `order`.
inline std::set<Tuple> aligned(const Table& t, const std::vector<std::string>& order) {
    std::set<Tuple> out;
    for (const auto& row : t.rows) {
        Tuple r;
        for (const auto& c : order) r.push_back(row[col(t, c)]);
        out.insert(r);
    }
    return out;
}

inline bool same(const Relation& r, const Table& t) {
    auto names = r.schema().attr_names();
    if (std::set<std::string>(names.begin(), names.end()) != std::set<std::string>(t.cols.begin(), t.cols.end()))
        return false;
    return r.rows() == aligned(t, names);
}

inline bool oracle_cmp(const Value& a, CmpOp op, const Value& b) {
    if (a.is_null() || b.is_null()) return false;
    if (a.is_int() != b.is_int()) return false;
    int c = a.is_int() ? (a.as_int() < b.as_int() ? -1 : a.as_int() > b.as_int())
                       : a.as_text().compare(b.as_text());
    switch (op) {
        case CmpOp::Eq: return c == 0;
        case CmpOp::Lt: return c < 0;
        case CmpOp::Le: return c <= 0;
        case CmpOp::Gt: return c > 0;
        case CmpOp::Ge: return c >= 0;
    }
    return false;
}

inline Table oracle_eval(const Query& q, const std::map<std::string, Table>& db) {
    return std::visit(
        [&](const auto& n) -> Table {
            using T = std::decay_t<decltype(n)>;
            if constexpr (std::is_same_v<T, QueryExpr::Base>) {
                return db.at(n.table);
            } else if constexpr (std::is_same_v<T, QueryExpr::ProjectRename>) {
                Table in = oracle_eval(n.input, db), out;
                for (const auto& [s, d] : n.pairs) out.cols.push_back(d);
                for (const auto& row : in.rows) {
                    Tuple r;
                    for (const auto& [s, d] : n.pairs) r.push_back(row[col(in, s)]);
                    out.rows.insert(r);
                }
                return out;
            } else if constexpr (std::is_same_v<T, QueryExpr::Select>) {
                Table in = oracle_eval(n.input, db), out{in.cols, {}};
                for (const auto& row : in.rows) {
                    bool ok = true;
                    for (const auto& atom : n.pred.conjuncts) {
                        if (const auto* c = std::get_if<Predicate::Compare>(&atom))
                            ok = ok && oracle_cmp(row[col(in, c->attr)], c->op, c->literal);
                        else if (const auto* z = std::get_if<Predicate::IsNull>(&atom))
                            ok = ok && row[col(in, z->attr)].is_null();
                        else {
                            const auto& e = std::get<Predicate::AttrEq>(atom);
                            ok = ok && oracle_cmp(row[col(in, e.left)], CmpOp::Eq, row[col(in, e.right)]);
                        }
                    }
                    if (ok) out.rows.insert(row);
                }
                return out;
            } else if constexpr (std::is_same_v<T, QueryExpr::Join>) {
                Table l = oracle_eval(n.left, db), r = oracle_eval(n.right, db), out;
                std::vector<std::size_t> keep;  // right columns that survive
                out.cols = l.cols;
                for (std::size_t i = 0; i < r.cols.size(); ++i) {
                    bool merged = false;
                    for (const auto& [a, b] : n.conds) merged = merged || (b == r.cols[i] && a == r.cols[i]);
                    if (!merged) {
                        keep.push_back(i);
                        out.cols.push_back(r.cols[i]);
                    }
                }
                for (const auto& x : l.rows)
                    for (const auto& y : r.rows) {
                        bool ok = true;
                        for (const auto& [a, b] : n.conds) ok = ok && oracle_cmp(x[col(l, a)], CmpOp::Eq, y[col(r, b)]);
                        if (!ok) continue;
                        Tuple t = x;
                        for (auto i : keep) t.push_back(y[i]);
                        out.rows.insert(t);
                    }
                return out;
            } else if constexpr (std::is_same_v<T, QueryExpr::Union>) {
                Table l = oracle_eval(n.left, db), r = oracle_eval(n.right, db);
                for (const auto& row : aligned(r, l.cols)) l.rows.insert(row);
                return l;
            } else {
                Table in = oracle_eval(n.input, db);
                in.cols.push_back(n.attr);
                std::set<Tuple> rows;
                for (auto row : in.rows) {
                    row.push_back(n.literal);
                    rows.insert(row);
                }
                in.rows = std::move(rows);
                return in;
            }
        },
        q->node);
}

// ---------------------------------------------------------------------------
// Random source deltas

/// Draws values for a column from the values present in it plus a couple of
/// fresh ones, so inserts both collide with and miss existing rows.
inline Value random_value(const Relation& r, std::size_t c, const Database& db, std::mt19937_64& rng) {
    const Attr& a = r.schema().attrs()[c];
    std::vector<Value> pool;
    for (const auto& [_, t] : db)
        if (auto i = t.schema().index_of(a.name))
            for (const auto& row : t.rows())
                if (!row[*i].is_null() && (row[*i].is_int() == (a.type == AttrType::Int))) pool.push_back(row[*i]);
    if (a.type == AttrType::Int) {
        pool.push_back(Value(static_cast<std::int64_t>(rng() % 5)));
    } else {
        pool.push_back(Value("x" + std::to_string(rng() % 4)));
        pool.push_back(Value("y" + std::to_string(rng() % 4)));
    }
    if (a.nullable) pool.push_back(N);
    return pool[rng() % pool.size()];
}

/// A random, applicable, key-respecting delta on one or two tables of db.
inline DeltaMap random_source_delta(const Database& db, std::mt19937_64& rng,
                                    const std::vector<std::string>& tables) {
    DeltaMap out;
    std::map<std::string, std::set<Tuple>> new_keys;
    const std::size_t touched = 1 + rng() % 2;
    for (std::size_t k = 0; k < touched; ++k) {
        const std::string& name = tables[rng() % tables.size()];
        const Relation& r = db.at(name);
        Delta& d = out[name];
        std::set<Tuple>& keys_new = new_keys[name];
        const std::size_t ops = 1 + rng() % 3;
        for (std::size_t o = 0; o < ops; ++o) {
            const bool del = !r.empty() && rng() % 2 == 0;
            if (del) {
                auto it = r.rows().begin();
                std::advance(it, rng() % r.size());
                if (keys_new.count(r.key_of(*it))) continue;
                d.deletes.insert(*it);
            } else {
                Tuple t;
                for (std::size_t c = 0; c < r.schema().arity(); ++c) t.push_back(random_value(r, c, db, rng));
                Tuple key = r.key_of(t);
                if (keys_new.count(key) || r.contains(t) || d.deletes.count(t)) continue;
                if (const Tuple* old = r.find_by_key(key)) {
                    // Replace the row with this key.
                    d.deletes.insert(*old);
                }
                d.inserts.insert(t);
                keys_new.insert(key);
            }
        }
        for (const auto& t : d.inserts) d.deletes.erase(t);
    }
    return out;
}

}  // namespace testing
