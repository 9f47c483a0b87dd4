#include "putback/incremental.hpp"

#include <memory>

#include "put_internal.hpp"
#include "putback/derive.hpp"
#include "putback/query.hpp"

namespace putback {

namespace {

using Counts = std::map<Tuple, std::int64_t>;
/// Output column -> required value (Null matches Null here: it filters
/// output tuples, not join conditions).
using Filter = std::map<std::size_t, Value>;

void bump(Counts& c, Tuple t, std::int64_t n) {
    if (n == 0) return;
    auto [it, inserted] = c.emplace(std::move(t), n);
    if (!inserted && (it->second += n) == 0) c.erase(it);
}

bool matches(const Tuple& t, const Filter& f) {
    for (const auto& [i, v] : f)
        if (t[i] != v) return false;
    return true;
}

struct Node {
    enum class Kind { Base, Project, Select, Join, Union, Extend } kind;
    Schema schema;
    std::vector<std::unique_ptr<Node>> kids;
    std::string table;
    std::vector<std::size_t> src;                             // Project: output col -> input col
    Predicate pred;                                           // Select
    std::vector<std::pair<std::size_t, std::size_t>> conds;  // Join: left col, right col
    std::vector<std::size_t> right_kept;                      // Join: right cols appended
    std::map<std::size_t, std::size_t> merged;                // Join: left col -> right col of same-name cond
    Value literal;                                            // Extend
};

std::unique_ptr<Node> compile(const Query& q, const SchemaMap& schemas) {
    auto n = std::make_unique<Node>();
    n->schema = infer_schema(q, schemas);
    std::visit(
        [&](const auto& x) {
            using T = std::decay_t<decltype(x)>;
            if constexpr (std::is_same_v<T, QueryExpr::Base>) {
                n->kind = Node::Kind::Base;
                n->table = x.table;
            } else if constexpr (std::is_same_v<T, QueryExpr::ProjectRename>) {
                n->kind = Node::Kind::Project;
                n->kids.push_back(compile(x.input, schemas));
                for (const auto& [s, d] : x.pairs) n->src.push_back(n->kids[0]->schema.require(s));
            } else if constexpr (std::is_same_v<T, QueryExpr::Select>) {
                n->kind = Node::Kind::Select;
                n->kids.push_back(compile(x.input, schemas));
                n->pred = x.pred;
            } else if constexpr (std::is_same_v<T, QueryExpr::Join>) {
                n->kind = Node::Kind::Join;
                n->kids.push_back(compile(x.left, schemas));
                n->kids.push_back(compile(x.right, schemas));
                const Schema& ls = n->kids[0]->schema;
                const Schema& rs = n->kids[1]->schema;
                std::set<std::size_t> dropped;
                for (const auto& [a, b] : x.conds) {
                    std::size_t li = ls.require(a), ri = rs.require(b);
                    n->conds.emplace_back(li, ri);
                    if (a == b) {
                        dropped.insert(ri);
                        n->merged.emplace(li, ri);
                    }
                }
                for (std::size_t i = 0; i < rs.arity(); ++i)
                    if (!dropped.count(i)) n->right_kept.push_back(i);
            } else if constexpr (std::is_same_v<T, QueryExpr::Union>) {
                n->kind = Node::Kind::Union;
                n->kids.push_back(compile(x.left, schemas));
                n->kids.push_back(compile(x.right, schemas));
                // Right tuples are realigned to the output (= left) column order.
                for (const auto& a : n->schema.attrs()) n->src.push_back(n->kids[1]->schema.require(a.name));
            } else {
                n->kind = Node::Kind::Extend;
                n->kids.push_back(compile(x.input, schemas));
                n->literal = x.literal;
            }
        },
        q->node);
    return n;
}

class CountedEval {
public:
    CountedEval(const Database& db, std::size_t* reads) : db_(db), reads_(reads) {}

    /// Derivation counts of the node's output tuples that satisfy `f`.
    Counts eval(const Node& n, const Filter& f) {
        switch (n.kind) {
            case Node::Kind::Base: return base(n, f);
            case Node::Kind::Select: {
                Counts out = eval(*n.kids[0], f);
                for (auto it = out.begin(); it != out.end();)
                    it = satisfies(n.pred, n.kids[0]->schema, it->first) ? std::next(it) : out.erase(it);
                return out;
            }
            case Node::Kind::Project: {
                Filter in;
                for (const auto& [j, v] : f) {
                    auto [it, ok] = in.emplace(n.src[j], v);
                    if (!ok && it->second != v) return {};
                }
                Counts out;
                for (const auto& [t, c] : eval(*n.kids[0], in)) bump(out, project(t, n.src), c);
                return out;
            }
            case Node::Kind::Extend: {
                const std::size_t last = n.schema.arity() - 1;
                Filter in;
                for (const auto& [j, v] : f) {
                    if (j == last) {
                        if (v != n.literal) return {};
                    } else {
                        in.emplace(j, v);
                    }
                }
                Counts out;
                for (const auto& [t, c] : eval(*n.kids[0], in)) {
                    Tuple e = t;
                    e.push_back(n.literal);
                    out.emplace(std::move(e), c);
                }
                return out;
            }
            case Node::Kind::Union: {
                Counts out = eval(*n.kids[0], f);
                Filter rf;
                for (const auto& [j, v] : f) rf.emplace(n.src[j], v);
                for (const auto& [t, c] : eval(*n.kids[1], rf)) bump(out, project(t, n.src), c);
                return out;
            }
            case Node::Kind::Join: return join(n, f);
        }
        return {};
    }

    /// Signed change of derivation counts caused by `w` (which has not been
    /// applied to the database this evaluator reads).
    Counts delta(const Node& n, const DeltaMap& w) {
        switch (n.kind) {
            case Node::Kind::Base: {
                Counts out;
                auto it = w.find(n.table);
                if (it == w.end()) return out;
                for (const auto& t : it->second.inserts) bump(out, t, 1);
                for (const auto& t : it->second.deletes) bump(out, t, -1);
                return out;
            }
            case Node::Kind::Select: {
                Counts out = delta(*n.kids[0], w);
                for (auto it = out.begin(); it != out.end();)
                    it = satisfies(n.pred, n.kids[0]->schema, it->first) ? std::next(it) : out.erase(it);
                return out;
            }
            case Node::Kind::Project: {
                Counts out;
                for (const auto& [t, c] : delta(*n.kids[0], w)) bump(out, project(t, n.src), c);
                return out;
            }
            case Node::Kind::Extend: {
                Counts out;
                for (const auto& [t, c] : delta(*n.kids[0], w)) {
                    Tuple e = t;
                    e.push_back(n.literal);
                    out.emplace(std::move(e), c);
                }
                return out;
            }
            case Node::Kind::Union: {
                Counts out = delta(*n.kids[0], w);
                for (const auto& [t, c] : delta(*n.kids[1], w)) bump(out, project(t, n.src), c);
                return out;
            }
            case Node::Kind::Join: {
                const Node& l = *n.kids[0];
                const Node& r = *n.kids[1];
                Counts dl = delta(l, w);
                Counts dr = delta(r, w);
                Counts out;
                // dL x R_old + L_old x dR + dL x dR
                for (const auto& [lt, lc] : dl) {
                    auto rf = right_filter(n, lt, {});
                    if (!rf) continue;
                    for (const auto& [rt, rc] : eval(r, *rf)) bump(out, combine(n, lt, rt), lc * rc);
                    for (const auto& [rt, rc] : dr)
                        if (joinable(n, lt, rt)) bump(out, combine(n, lt, rt), lc * rc);
                }
                for (const auto& [rt, rc] : dr) {
                    Filter lf;
                    bool ok = true;
                    for (const auto& [li, ri] : n.conds) {
                        if (rt[ri].is_null()) ok = false;
                        auto [it, fresh] = lf.emplace(li, rt[ri]);
                        if (!fresh && it->second != rt[ri]) ok = false;
                    }
                    if (!ok) continue;
                    for (const auto& [lt, lc] : eval(l, lf)) bump(out, combine(n, lt, rt), lc * rc);
                }
                return out;
            }
        }
        return {};
    }

private:
    static Tuple project(const Tuple& t, const std::vector<std::size_t>& idx) {
        Tuple out;
        out.reserve(idx.size());
        for (auto i : idx) out.push_back(t[i]);
        return out;
    }

    Counts base(const Node& n, const Filter& f) {
        const Relation& r = db_.at(n.table);
        const auto& key = r.schema().key_indices();
        bool by_key = !key.empty();
        Tuple k;
        for (auto i : key) {
            auto it = f.find(i);
            if (it == f.end()) {
                by_key = false;
                break;
            }
            k.push_back(it->second);
        }
        Counts out;
        if (by_key) {
            if (reads_) ++*reads_;
            if (const Tuple* row = r.find_by_key(k); row && matches(*row, f)) out.emplace(*row, 1);
            return out;
        }
        if (reads_) *reads_ += r.size();
        for (const auto& row : r.rows())
            if (matches(row, f)) out.emplace(row, 1);
        return out;
    }

    static bool joinable(const Node& n, const Tuple& lt, const Tuple& rt) {
        for (const auto& [li, ri] : n.conds)
            if (!compare_values(lt[li], CmpOp::Eq, rt[ri])) return false;
        return true;
    }

    static Tuple combine(const Node& n, const Tuple& lt, const Tuple& rt) {
        Tuple out = lt;
        for (auto i : n.right_kept) out.push_back(rt[i]);
        return out;
    }

    /// Filter on the right input for partners of `lt`, merged with `base`;
    /// nullopt when no right tuple can match.
    static std::optional<Filter> right_filter(const Node& n, const Tuple& lt, Filter base) {
        for (const auto& [li, ri] : n.conds) {
            if (lt[li].is_null()) return std::nullopt;
            auto [it, fresh] = base.emplace(ri, lt[li]);
            if (!fresh && it->second != lt[li]) return std::nullopt;
        }
        return base;
    }

    Counts join(const Node& n, const Filter& f) {
        const Node& l = *n.kids[0];
        const std::size_t nl = l.schema.arity();
        Filter lf, rf;
        for (const auto& [j, v] : f) {
            if (j < nl) {
                lf.emplace(j, v);
                if (auto m = n.merged.find(j); m != n.merged.end()) rf.emplace(m->second, v);
            } else {
                rf.emplace(n.right_kept[j - nl], v);
            }
        }
        Counts out;
        std::map<Filter, Counts> cache;
        for (const auto& [lt, lc] : eval(l, lf)) {
            auto pf = right_filter(n, lt, rf);
            if (!pf) continue;
            auto it = cache.find(*pf);
            if (it == cache.end()) it = cache.emplace(*pf, eval(*n.kids[1], *pf)).first;
            for (const auto& [rt, rc] : it->second) bump(out, combine(n, lt, rt), lc * rc);
        }
        return out;
    }

    const Database& db_;
    std::size_t* reads_;
};

Delta set_delta(const Node& root, CountedEval& ev, const Counts& dc) {
    Delta out;
    for (const auto& [t, c] : dc) {
        Filter whole;
        for (std::size_t i = 0; i < t.size(); ++i) whole.emplace(i, t[i]);
        std::int64_t before = 0;
        for (const auto& [_, n] : ev.eval(root, whole)) before += n;
        const std::int64_t after = before + c;
        if (after < 0) throw Error(ErrorCode::MalformedDelta, "delta removes more derivations than exist");
        if (before == 0 && after > 0) out.inserts.insert(t);
        if (before > 0 && after == 0) out.deletes.insert(t);
    }
    return out;
}

}  // namespace

Delta inc_get(const Query& q, const Database& sources, const DeltaMap& w, std::size_t* reads) {
    for (const auto& [name, d] : w) {
        const Relation& r = sources.at(name);
        for (const auto& t : d.deletes)
            if (!r.contains(t)) throw Error(ErrorCode::MissingDeleteTarget, "'" + name + "' has no row " + to_literal(t));
        for (const auto& t : d.inserts)
            if (d.deletes.count(t)) throw Error(ErrorCode::MalformedDelta, "row both inserted and deleted");
    }
    auto root = compile(q, sources.schemas());
    CountedEval ev(sources, reads);
    return set_delta(*root, ev, ev.delta(*root, w));
}

IncPutOutcome inc_put(const Program& p, const Database& sources, const Relation& view, const Delta& u) {
    auto issues = validate(p, sources.schemas(), view.schema());
    if (!issues.empty()) throw Error(ErrorCode::ValidationFailed, issues.front().code + ": " + issues.front().message);
    const Relation next = apply_delta(view, u);

    IncPutOutcome outcome;
    detail::ExecContext ctx{sources};
    ctx.incremental = true;
    try {
        detail::WriteSet ws;
        if (!u.empty()) detail::exec(*p.root, &view, next, {}, ctx, ws);
        DeltaMap deltas = detail::apply_writes(sources, ws, &ctx.reads);
        for (const auto& check : ws.checks) {
            Delta got;
            try {
                got = inc_get(check.query, sources, deltas, &ctx.reads);
            } catch (const Error& e) {
                if (e.code() != ErrorCode::KeyViolation) throw;
                detail::reject(RejectReason::KeyViolation, check.path, e.detail());
            }
            auto names = infer_schema(check.query, sources.schemas()).attr_names();
            Delta want = diff(reorder(*check.old_piece, names), reorder(check.new_piece, names));
            if (got != want)
                detail::reject(RejectReason::CheckFailed, check.path, "view piece differs from the CHECK query result");
        }
        outcome.result = std::move(deltas);
    } catch (detail::RejectSignal& r) {
        outcome.result = std::move(r.rejection);
    }
    outcome.source_rows_read = ctx.reads;
    return outcome;
}

}  // namespace putback
