#include "putback/put.hpp"

#include <algorithm>
#include <set>

#include "put_internal.hpp"
#include "putback/derive.hpp"
#include "putback/query.hpp"

namespace putback {

std::string_view to_string(RejectReason r) {
    switch (r) {
        case RejectReason::CheckFailed: return "CheckFailed";
        case RejectReason::ViewNotJoinConsistent: return "ViewNotJoinConsistent";
        case RejectReason::RowNotCovered: return "RowNotCovered";
        case RejectReason::NotNullViolation: return "NotNullViolation";
        case RejectReason::ConflictingWrites: return "ConflictingWrites";
        case RejectReason::KeyViolation: return "KeyViolation";
    }
    return "Unknown";
}

std::string to_string(const Rejection& r) {
    std::string out(to_string(r.reason));
    if (!r.path.empty()) {
        out += " at ";
        for (std::size_t i = 0; i < r.path.size(); ++i) out += (i ? " / " : "") + r.path[i];
    }
    if (!r.detail.empty()) out += ": " + r.detail;
    return out;
}

namespace detail {

void reject(RejectReason reason, std::vector<std::string> path, std::string detail) {
    throw RejectSignal{Rejection{reason, std::move(path), std::move(detail)}};
}

namespace {

std::string join_names(const std::vector<std::string>& names) {
    std::string out;
    for (std::size_t i = 0; i < names.size(); ++i) out += (i ? ", " : "") + names[i];
    return out;
}

RenamePairs identity(const std::vector<std::string>& names) {
    RenamePairs pairs;
    for (const auto& n : names) pairs.emplace_back(n, n);
    return pairs;
}

std::vector<std::string> with_path(std::vector<std::string> path, std::string step) {
    path.push_back(std::move(step));
    return path;
}

void merge_into(WriteSet& out, const std::string& table, TableWrites local, const std::vector<std::string>& path) {
    auto& dst = out.tables[table];
    for (auto& [key, rw] : local) {
        auto it = dst.find(key);
        if (it == dst.end()) {
            dst.emplace(key, std::move(rw));
            continue;
        }
        RowWrite& prev = it->second;
        if (prev.remove && rw.remove) continue;
        if (prev.remove || rw.remove)
            reject(RejectReason::ConflictingWrites, path,
                   "row " + to_literal(key) + " of '" + table + "' both deleted and written");
        for (auto& [col, v] : rw.cells) {
            auto [c, inserted] = prev.cells.emplace(col, v);
            if (!inserted && c->second != v)
                reject(RejectReason::ConflictingWrites, path,
                       "row " + to_literal(key) + " of '" + table + "' gets " + to_literal(c->second) + " and " +
                           to_literal(v));
        }
    }
}

void exec_update(const Statement::Update& u, const Relation* old_piece, const Relation& piece,
                 const std::vector<std::string>& path, ExecContext& ctx, WriteSet& out) {
    const Relation& table = ctx.sources.at(u.src_table);
    const Schema& ss = table.schema();
    std::vector<std::size_t> src_idx, view_idx;
    for (std::size_t i = 0; i < u.src_attrs.size(); ++i) {
        src_idx.push_back(ss.require(u.src_attrs[i]));
        view_idx.push_back(piece.schema().require(u.view_attrs[i]));
    }
    // Position (in src_attrs) of every source key attr.
    std::vector<std::size_t> key_pos;
    bool key_covered = true;
    for (const auto& k : ss.key()) {
        auto it = std::find(u.src_attrs.begin(), u.src_attrs.end(), k);
        if (it == u.src_attrs.end()) {
            key_covered = false;
            break;
        }
        key_pos.push_back(static_cast<std::size_t>(it - u.src_attrs.begin()));
    }
    auto key_of = [&](const Tuple& row) {
        Tuple k;
        for (auto p : key_pos) k.push_back(row[view_idx[p]]);
        return k;
    };
    auto write_of = [&](const Tuple& row) {
        RowWrite rw;
        for (std::size_t i = 0; i < src_idx.size(); ++i) rw.cells.emplace(src_idx[i], row[view_idx[i]]);
        return rw;
    };

    TableWrites local;
    if (!key_covered) {
        if (ctx.incremental)
            throw Error(ErrorCode::ValidationFailed, "UPDATE on '" + u.src_table + "' does not cover its key");
        // Rows can only be kept or dropped: keep sources whose image is in the
        // view, delete the rest, and ignore view rows with no source.
        std::set<Tuple> images;
        for (const auto& row : piece.rows()) {
            Tuple t;
            for (auto i : view_idx) t.push_back(row[i]);
            images.insert(std::move(t));
        }
        ctx.reads += table.size();
        for (const auto& row : table.rows()) {
            Tuple t;
            for (auto i : src_idx) t.push_back(row[i]);
            if (!images.count(t)) local[table.key_of(row)].remove = true;
        }
        merge_into(out, u.src_table, std::move(local), path);
        return;
    }

    auto add_row = [&](const Tuple& row) {
        Tuple k = key_of(row);
        RowWrite rw = write_of(row);
        auto [it, inserted] = local.emplace(k, rw);
        if (!inserted && it->second.cells != rw.cells)
            reject(RejectReason::KeyViolation, path,
                   "view rows disagree on '" + u.src_table + "' key " + to_literal(k));
    };

    if (!ctx.incremental) {
        for (const auto& row : piece.rows()) add_row(row);
        ctx.reads += table.size();
        for (const auto& row : table.rows()) {
            Tuple k = table.key_of(row);
            if (!local.count(k)) local[k].remove = true;
        }
    } else {
        Delta d = diff(*old_piece, piece);
        std::set<Tuple> touched;
        for (const auto& row : d.inserts) touched.insert(key_of(row));
        for (const auto& row : d.deletes) touched.insert(key_of(row));
        if (touched.empty()) return;
        for (const auto& row : piece.rows())
            if (touched.count(key_of(row))) add_row(row);
        for (const auto& k : touched)
            if (!local.count(k)) local[k].remove = true;
    }
    merge_into(out, u.src_table, std::move(local), path);
}

/// Equi-join of the pieces on shared attrs, in view column order.
bool join_consistent(const std::vector<Relation>& pieces, const std::vector<Statement::VSplitBranch>& branches,
                     const Relation& view) {
    try {
        Relation acc = pieces.front();
        std::vector<std::string> covered = branches.front().attrs;
        for (std::size_t i = 1; i < pieces.size(); ++i) {
            JoinConds conds;
            for (const auto& a : branches[i].attrs)
                if (std::find(covered.begin(), covered.end(), a) != covered.end()) conds.emplace_back(a, a);
            acc = equi_join(acc, pieces[i], conds);
            for (const auto& a : branches[i].attrs)
                if (std::find(covered.begin(), covered.end(), a) == covered.end()) covered.push_back(a);
        }
        return reorder(acc, view.schema().attr_names()).rows() == view.rows();
    } catch (const Error& e) {
        if (e.code() == ErrorCode::KeyViolation) return false;
        throw;
    }
}

/// Rows of `r` whose `idx` column is in (or, with `negate`, outside) `values`.
Relation filter_split(const Relation& r, std::size_t idx, const std::set<Value>& values, bool negate) {
    std::set<Tuple> rows;
    for (const auto& row : r.rows())
        if (values.count(row[idx]) != 0 ? !negate : negate) rows.insert(row);
    return Relation(r.schema(), std::move(rows));
}

}  // namespace

void exec(const Statement& s, const Relation* old_piece, const Relation& new_piece, std::vector<std::string> path,
          ExecContext& ctx, WriteSet& out) {
    if (const auto* c = std::get_if<Statement::Check>(&s.node)) {
        out.checks.push_back(PendingCheck{c->query, old_piece, new_piece, with_path(path, "CHECK " + c->view)});
    } else if (const auto* u = std::get_if<Statement::Update>(&s.node)) {
        exec_update(*u, old_piece, new_piece, with_path(path, "UPDATE " + u->src_table), ctx, out);
    } else if (const auto* v = std::get_if<Statement::VSplit>(&s.node)) {
        path.push_back("VSPLIT " + v->view);
        std::vector<Relation> pieces;
        for (const auto& b : v->branches) pieces.push_back(project_rename(new_piece, identity(b.attrs)));
        if (!join_consistent(pieces, v->branches, new_piece))
            reject(RejectReason::ViewNotJoinConsistent, path, "pieces do not join back to the view");
        for (std::size_t i = 0; i < v->branches.size(); ++i) {
            const auto& b = v->branches[i];
            const Relation* old_sub = nullptr;
            if (old_piece) {
                out.keep_alive.push_back(std::make_unique<Relation>(project_rename(*old_piece, identity(b.attrs))));
                old_sub = out.keep_alive.back().get();
            }
            exec(*b.body, old_sub, pieces[i],
                 with_path(path, "branch " + std::to_string(i + 1) + " (" + join_names(b.attrs) + ")"), ctx, out);
        }
    } else {
        const auto& h = std::get<Statement::HSplit>(s.node);
        path.push_back("HSPLIT " + h.view + " ON " + h.split_attr);
        const Schema& vs = new_piece.schema();
        const std::size_t idx = vs.require(h.split_attr);
        RenamePairs rest;
        for (const auto& a : vs.attrs())
            if (a.name != h.split_attr) rest.emplace_back(a.name, a.name);
        std::set<Value> literals;
        for (const auto& b : h.branches) literals.insert(b.literal);

        auto run = [&](const StatementPtr& body, const std::set<Value>& sel, bool negate, bool drop,
                       const std::string& label) {
            auto cut = [&](const Relation& r) {
                Relation part = filter_split(r, idx, sel, negate);
                return drop ? project_rename(part, rest) : part;
            };
            const Relation* old_sub = nullptr;
            if (old_piece) {
                out.keep_alive.push_back(std::make_unique<Relation>(cut(*old_piece)));
                old_sub = out.keep_alive.back().get();
            }
            exec(*body, old_sub, cut(new_piece), with_path(path, label), ctx, out);
        };
        for (const auto& b : h.branches) run(b.body, {b.literal}, false, true, "branch " + to_literal(b.literal));
        if (h.otherwise) {
            run(h.otherwise, literals, true, false, "OTHERWISE");
        } else {
            for (const auto& row : new_piece.rows())
                if (!literals.count(row[idx]))
                    reject(RejectReason::RowNotCovered, path, "no branch for row " + to_literal(row));
        }
    }
}

DeltaMap apply_writes(const Database& sources, const WriteSet& ws, std::size_t* reads) {
    DeltaMap out;
    for (const auto& [name, writes] : ws.tables) {
        const Relation& table = sources.at(name);
        const Schema& ss = table.schema();
        Delta d;
        for (const auto& [key, rw] : writes) {
            if (reads) ++*reads;
            const Tuple* old = table.find_by_key(key);
            if (rw.remove) {
                if (old) d.deletes.insert(*old);
                continue;
            }
            Tuple row = old ? *old : Tuple(ss.arity());
            for (const auto& [col, v] : rw.cells) row[col] = v;
            for (std::size_t i = 0; i < ss.arity(); ++i) {
                const Attr& a = ss.attrs()[i];
                if (!a.nullable && row[i].is_null())
                    reject(RejectReason::NotNullViolation, {},
                           "'" + name + "." + a.name + "' would be null for key " + to_literal(key));
            }
            if (old && *old == row) continue;
            if (old) d.deletes.insert(*old);
            d.inserts.insert(std::move(row));
        }
        if (!d.empty()) out.emplace(name, std::move(d));
    }
    return out;
}

}  // namespace detail

namespace {

std::set<std::string> name_set(const std::vector<std::string>& v) { return {v.begin(), v.end()}; }

}  // namespace

PutOutcome put(const Program& p, const Database& sources, const Relation& view, PutOptions opts) {
    if (!opts.skip_validation) {
        auto issues = validate(p, sources.schemas(), view.schema());
        if (!issues.empty()) {
            std::string msg;
            for (const auto& i : issues) msg += (msg.empty() ? "" : "; ") + i.code + ": " + i.message;
            throw Error(ErrorCode::ValidationFailed, msg);
        }
    } else {
        auto expected = view_schema(p, sources.schemas()).attr_names();
        if (name_set(expected) != name_set(view.schema().attr_names()))
            throw Error(ErrorCode::SchemaMismatch, "view attributes do not match the program's view");
    }

    PutOutcome outcome;
    detail::ExecContext ctx{sources};
    ctx.bypass = opts.skip_validation;
    try {
        detail::WriteSet ws;
        detail::exec(*p.root, nullptr, view, {}, ctx, ws);
        DeltaMap deltas = detail::apply_writes(sources, ws, nullptr);
        Database updated = apply_deltas(sources, deltas);
        for (const auto& check : ws.checks) {
            for (const auto& t : referenced_tables(check.query)) ctx.reads += updated.at(t).size();
            Relation got;
            try {
                got = eval(check.query, updated);
            } catch (const Error& e) {
                if (e.code() != ErrorCode::KeyViolation) throw;
                detail::reject(RejectReason::KeyViolation, check.path, e.detail());
            }
            Relation want = reorder(check.new_piece, got.schema().attr_names());
            if (want.rows() != got.rows())
                detail::reject(RejectReason::CheckFailed, check.path, "view piece differs from the CHECK query result");
        }
        outcome.result = std::move(updated);
    } catch (detail::RejectSignal& r) {
        outcome.result = std::move(r.rejection);
    }
    outcome.source_rows_read = ctx.reads;
    return outcome;
}

// ---------------------------------------------------------------------------
// Validation

namespace {

struct Validator {
    const SchemaMap& schemas;
    std::map<std::string, Attr> types;  // view attrs by name, when known
    std::vector<ValidationIssue> issues;

    void add(std::string code, std::string msg) { issues.push_back({std::move(code), std::move(msg)}); }

    /// Attribute names a statement's view has, as far as they can be told.
    std::optional<std::vector<std::string>> attrs_of(const Statement& s) {
        return std::visit(
            [&](const auto& x) -> std::optional<std::vector<std::string>> {
                using T = std::decay_t<decltype(x)>;
                if constexpr (std::is_same_v<T, Statement::Check>) {
                    try {
                        return infer_schema(x.query, schemas).attr_names();
                    } catch (const Error&) {
                        return std::nullopt;
                    }
                } else if constexpr (std::is_same_v<T, Statement::Update>) {
                    return x.view_attrs;
                } else if constexpr (std::is_same_v<T, Statement::VSplit>) {
                    std::vector<std::string> out;
                    for (const auto& b : x.branches)
                        for (const auto& a : b.attrs)
                            if (std::find(out.begin(), out.end(), a) == out.end()) out.push_back(a);
                    return out;
                } else {
                    if (x.otherwise) return attrs_of(*x.otherwise);
                    if (x.branches.empty()) return std::nullopt;
                    auto in = attrs_of(*x.branches.front().body);
                    if (in) in->push_back(x.split_attr);
                    return in;
                }
            },
            s.node);
    }

    void mismatch(const std::string& what, const std::vector<std::string>& got, const std::vector<std::string>& want) {
        add("BranchAttrMismatch", what + " has (" + join(got) + ") but its view piece has (" + join(want) + ")");
    }

    static std::string join(const std::vector<std::string>& v) {
        std::string out;
        for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + v[i];
        return out;
    }

    void check_name(const std::string& got, const std::string& want) {
        if (got != want) add("ViewNameMismatch", "statement refers to view '" + got + "' inside '" + want + "'");
    }

    void walk(const Statement& s, const std::string& view, const std::vector<std::string>& expected) {
        check_name(view_of(s), view);
        const auto want = name_set(expected);
        if (const auto* c = std::get_if<Statement::Check>(&s.node)) {
            try {
                auto names = infer_schema(c->query, schemas).attr_names();
                if (name_set(names) != want) mismatch("CHECK query for '" + c->view + "'", names, expected);
            } catch (const Error& e) {
                add(std::string(to_string(e.code())), e.detail());
            }
        } else if (const auto* u = std::get_if<Statement::Update>(&s.node)) {
            walk_update(*u, want, expected);
        } else if (const auto* v = std::get_if<Statement::VSplit>(&s.node)) {
            if (v->branches.size() < 2) add("TooFewBranches", "VSPLIT of '" + v->view + "' needs at least two branches");
            std::set<std::string> covered;
            for (const auto& b : v->branches) {
                std::set<std::string> seen;
                for (const auto& a : b.attrs) {
                    if (!seen.insert(a).second) add("DuplicateAttribute", "'" + a + "' repeated in a VSPLIT branch");
                    if (!want.count(a)) add("UnknownAttribute", "'" + a + "' is not an attribute of '" + v->view + "'");
                    covered.insert(a);
                }
                walk(*b.body, v->view, b.attrs);
            }
            for (const auto& a : expected)
                if (!covered.count(a)) add("AttrNotCovered", "no VSPLIT branch of '" + v->view + "' covers '" + a + "'");
        } else {
            const auto& h = std::get<Statement::HSplit>(s.node);
            if (!want.count(h.split_attr)) {
                add("UnknownAttribute", "split attribute '" + h.split_attr + "' is not in '" + h.view + "'");
                return;
            }
            std::vector<std::string> rest;
            for (const auto& a : expected)
                if (a != h.split_attr) rest.push_back(a);
            std::set<Value> literals;
            std::optional<AttrType> lit_type;
            for (const auto& b : h.branches) {
                if (!literals.insert(b.literal).second)
                    add("DuplicateBranchLiteral", "literal " + to_literal(b.literal) + " used twice");
                check_literal(h, b.literal, lit_type);
                walk(*b.body, h.view, rest);
            }
            if (h.otherwise) walk(*h.otherwise, h.view, expected);
        }
    }

    void check_literal(const Statement::HSplit& h, const Value& lit, std::optional<AttrType>& seen) {
        const AttrType t = type_of(lit);
        if (t != AttrType::Null) {
            if (seen && *seen != t)
                add("LiteralTypeMismatch", "HSPLIT on '" + h.split_attr + "' mixes literal types");
            seen = t;
        }
        auto it = types.find(h.split_attr);
        if (it == types.end()) return;
        const Attr& a = it->second;
        if (t == AttrType::Null ? !a.nullable : (a.type != AttrType::Null && a.type != t))
            add("LiteralTypeMismatch", "literal " + to_literal(lit) + " does not fit '" + h.split_attr + "' (" +
                                           std::string(to_string(a.type)) + (a.nullable ? ", nullable" : "") + ")");
    }

    void walk_update(const Statement::Update& u, const std::set<std::string>& want,
                     const std::vector<std::string>& expected) {
        if (name_set(u.view_attrs) != want) mismatch("UPDATE of '" + u.src_table + "'", u.view_attrs, expected);
        std::set<std::string> seen_src, seen_view;
        for (const auto& a : u.src_attrs)
            if (!seen_src.insert(a).second) add("DuplicateAttribute", "'" + a + "' repeated in UPDATE source attrs");
        for (const auto& a : u.view_attrs)
            if (!seen_view.insert(a).second) add("DuplicateAttribute", "'" + a + "' repeated in UPDATE view attrs");
        auto it = schemas.find(u.src_table);
        if (it == schemas.end()) {
            add("UnknownTable", "no table '" + u.src_table + "'");
            return;
        }
        const Schema& ss = it->second;
        for (std::size_t i = 0; i < u.src_attrs.size(); ++i) {
            const auto& a = u.src_attrs[i];
            if (!ss.has(a)) {
                add("UnknownAttribute", "'" + u.src_table + "' has no attribute '" + a + "'");
                continue;
            }
            if (i >= u.view_attrs.size()) continue;
            auto t = types.find(u.view_attrs[i]);
            if (t != types.end() && t->second.type != AttrType::Null && t->second.type != ss.attr(a).type)
                add("TypeMismatch", "'" + u.src_table + "." + a + "' and view attribute '" + u.view_attrs[i] +
                                        "' have different types");
        }
        for (const auto& k : ss.key())
            if (!seen_src.count(k))
                add("KeyNotCovered", "UPDATE of '" + u.src_table + "' does not include key attribute '" + k + "'");
    }
};

}  // namespace

std::vector<ValidationIssue> validate(const Program& p, const SchemaMap& schemas, const std::optional<Schema>& view) {
    Validator v{schemas, {}, {}};
    if (!p.root) return {{"InvalidProgram", "empty program"}};
    std::optional<Schema> derived;
    try {
        derived = infer_schema(derive_query(p), schemas);
    } catch (const Error& e) {
        v.add(std::string(to_string(e.code())), e.detail());
    }
    std::optional<std::vector<std::string>> expected;
    if (derived) {
        expected = derived->attr_names();
        for (const auto& a : derived->attrs()) v.types[a.name] = a;
    } else {
        expected = v.attrs_of(*p.root);
    }
    if (view) {
        if (derived) {
            if (name_set(derived->attr_names()) != name_set(view->attr_names())) {
                v.add("SchemaMismatch", "view has (" + Validator::join(view->attr_names()) + ") but the program derives (" +
                                            Validator::join(derived->attr_names()) + ")");
            } else {
                for (const auto& a : derived->attrs()) {
                    const Attr& va = view->attr(a.name);
                    if (a.type != AttrType::Null && va.type != AttrType::Null && a.type != va.type)
                        v.add("TypeMismatch", "view attribute '" + a.name + "' is " + std::string(to_string(va.type)) +
                                                  " but the program derives " + std::string(to_string(a.type)));
                }
            }
        }
        v.types.clear();
        for (const auto& a : view->attrs()) v.types[a.name] = a;
    }
    if (expected) v.walk(*p.root, p.view_name(), *expected);
    return v.issues;
}

}  // namespace putback
