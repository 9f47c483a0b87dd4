#include "putback/checker.hpp"

#include <algorithm>
#include <functional>

#include "json.hpp"
#include "putback/derive.hpp"
#include "putback/query.hpp"

namespace putback {

std::size_t pick(std::mt19937_64& rng, std::size_t n) { return n == 0 ? 0 : static_cast<std::size_t>(rng() % n); }

std::mt19937_64 trial_rng(std::uint64_t seed, std::uint64_t trial) {
    // splitmix64 of (seed, trial) so neighbouring trials get unrelated streams
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (trial + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return std::mt19937_64(z ^ (z >> 31));
}

std::string describe(const Relation& r) {
    std::string out = "{";
    bool first = true;
    for (const auto& t : r.rows()) {
        out += (first ? "" : ", ") + to_literal(t);
        first = false;
    }
    return out + "}";
}

std::string describe(const Database& db) {
    std::string out;
    for (const auto& [name, r] : db) out += (out.empty() ? "" : "; ") + name + "=" + describe(r);
    return out;
}

// ---------------------------------------------------------------------------
// Random view edits

ViewEditor::ViewEditor(const Relation& seed_view, const Database& sources) {
    (void)sources;
    const Schema& s = seed_view.schema();
    pool_.resize(s.arity());
    for (std::size_t i = 0; i < s.arity(); ++i) {
        std::set<Value> vals;
        std::int64_t max_int = 0;
        for (const auto& row : seed_view.rows()) {
            if (row[i].is_int()) max_int = std::max(max_int, row[i].as_int());
            if (!row[i].is_null()) vals.insert(row[i]);
        }
        const Attr& a = s.attrs()[i];
        if (a.type == AttrType::Int) {
            vals.insert(Value(max_int + 1));
            vals.insert(Value(max_int + 2));
        } else {
            vals.insert(Value("new_" + a.name + "_1"));
            vals.insert(Value("new_" + a.name + "_2"));
        }
        if (a.nullable || a.type == AttrType::Null) vals.insert(Value::null());
        pool_[i].assign(vals.begin(), vals.end());
    }
}

Relation ViewEditor::edit(const Relation& view, std::mt19937_64& rng) const {
    const std::size_t arity = view.schema().arity();
    for (int attempt = 0; attempt < 8; ++attempt) {
        std::set<Tuple> rows = view.rows();
        std::size_t kind = view.empty() ? 6 : pick(rng, 10);
        if (kind < 6) {
            auto it = std::next(rows.begin(), static_cast<std::ptrdiff_t>(pick(rng, rows.size())));
            Tuple t = *it;
            std::size_t c = pick(rng, arity);
            t[c] = pool_[c][pick(rng, pool_[c].size())];
            rows.erase(it);
            rows.insert(std::move(t));
        } else if (kind < 8) {
            Tuple t(arity);
            for (std::size_t c = 0; c < arity; ++c) t[c] = pool_[c][pick(rng, pool_[c].size())];
            rows.insert(std::move(t));
        } else {
            rows.erase(std::next(rows.begin(), static_cast<std::ptrdiff_t>(pick(rng, rows.size()))));
        }
        try {
            return Relation(view.schema(), std::move(rows));
        } catch (const Error&) {
            // key clash or null in a non-null position: draw again
        }
    }
    return view;
}

Delta ViewEditor::edit_delta(const Relation& view, std::mt19937_64& rng) const { return diff(view, edit(view, rng)); }

// ---------------------------------------------------------------------------
// Round-trip laws

namespace {

struct Laws {
    const Program& p;
    Query q;

    Relation get(const Database& s) const { return eval(q, s); }

    PutOutcome put(const Database& s, const Relation& v) const {
        PutOptions o;
        o.skip_validation = true;
        return putback::put(p, s, v, o);
    }

    /// Failure message, empty when the law holds.
    std::string get_put(const Database& s) const {
        Relation v;
        try {
            v = get(s);
        } catch (const Error& e) {
            return std::string("get undefined: ") + e.what();
        }
        PutOutcome o = put(s, v);
        if (!o.accepted()) return "put(s, get(s)) rejected: " + to_string(o.rejection());
        if (!(o.sources() == s)) return "put(s, get(s)) = " + describe(o.sources());
        return {};
    }

    std::string put_get(const Database& s, const Relation& v) const {
        PutOutcome o;
        try {
            o = put(s, v);
        } catch (const Error& e) {
            return {};  // view outside the program's domain, not a law question
        }
        if (!o.accepted()) return {};
        try {
            Relation back = get(o.sources());
            if (reorder(back, v.schema().attr_names()).rows() != v.rows()) return "get(put(s, v)) = " + describe(back);
        } catch (const Error& e) {
            return std::string("get(put(s, v)) undefined: ") + e.what();
        }
        return {};
    }
};

struct TrialResult {
    std::size_t attempts = 0;
    bool accepted = false;
    std::optional<RejectReason> reason;
    std::optional<LawFailure> failure;
};

TrialResult run_trial(const Laws& laws, const ViewEditor& editor, const Database& db, std::uint64_t seed,
                      std::uint64_t trial) {
    TrialResult res;
    auto rng = trial_rng(seed, trial);
    Database s = db;
    const std::size_t warm = pick(rng, 3);
    for (std::size_t w = 0; w < warm; ++w) {
        for (int attempt = 0; attempt < 10; ++attempt) {
            PutOutcome o = laws.put(s, editor.edit(laws.get(s), rng));
            if (o.accepted()) {
                s = o.sources();
                break;
            }
        }
    }
    if (auto msg = laws.get_put(s); !msg.empty()) {
        res.failure = LawFailure{"GetPut", trial, s, std::nullopt, msg};
        return res;
    }
    Relation v = editor.edit(laws.get(s), rng);
    res.attempts = 1;
    PutOutcome o = laws.put(s, v);
    if (!o.accepted()) {
        res.reason = o.rejection().reason;
        return res;
    }
    res.accepted = true;
    if (auto msg = laws.put_get(s, v); !msg.empty()) res.failure = LawFailure{"PutGet", trial, s, v, msg};
    return res;
}

bool still_fails(const Laws& laws, const LawFailure& f) {
    try {
        return f.law == "GetPut" ? !laws.get_put(f.sources).empty() : !laws.put_get(f.sources, *f.view).empty();
    } catch (const Error&) {
        return false;
    }
}

/// Greedy row removal, then value substitution toward each column's minimum.
LawFailure minimize(const Laws& laws, LawFailure f) {
    bool changed = true;
    while (changed) {
        changed = false;
        for (const auto& [name, r] : Database(f.sources)) {
            for (const auto& row : r.rows()) {
                std::set<Tuple> rows = r.rows();
                rows.erase(row);
                LawFailure g = f;
                g.sources.put(Relation(r.schema(), std::move(rows)));
                if (still_fails(laws, g)) {
                    f = std::move(g);
                    changed = true;
                    break;
                }
            }
            if (changed) break;
        }
        if (!changed && f.view) {
            for (const auto& row : f.view->rows()) {
                std::set<Tuple> rows = f.view->rows();
                rows.erase(row);
                LawFailure g = f;
                g.view = Relation(f.view->schema(), std::move(rows));
                if (still_fails(laws, g)) {
                    f = std::move(g);
                    changed = true;
                    break;
                }
            }
        }
    }
    for (const auto& [name, r0] : Database(f.sources)) {
        (void)r0;
        const std::size_t arity = f.sources.at(name).schema().arity();
        for (std::size_t c = 0; c < arity; ++c) {
            std::set<Value> column;
            for (const auto& row : f.sources.at(name).rows()) column.insert(row[c]);
            for (const auto& row : std::set<Tuple>(f.sources.at(name).rows())) {
                for (const auto& candidate : column) {
                    if (!(candidate < row[c])) break;
                    const Relation& r = f.sources.at(name);
                    std::set<Tuple> rows = r.rows();
                    rows.erase(row);
                    Tuple t = row;
                    t[c] = candidate;
                    rows.insert(t);
                    try {
                        LawFailure g = f;
                        g.sources.put(Relation(r.schema(), std::move(rows)));
                        if (still_fails(laws, g)) {
                            f = std::move(g);
                            break;
                        }
                    } catch (const Error&) {
                    }
                }
            }
        }
    }
    return f;
}

void require_valid(const Program& p, const SchemaMap& schemas) {
    auto issues = validate(p, schemas);
    if (issues.empty()) return;
    std::string msg;
    for (const auto& i : issues) msg += (msg.empty() ? "" : "; ") + i.code + ": " + i.message;
    throw Error(ErrorCode::ValidationFailed, msg);
}

}  // namespace

RoundtripReport check_roundtrip(const Program& p, const Database& db, std::size_t trials, std::uint64_t seed,
                                bool skip_validation) {
    if (!skip_validation) require_valid(p, db.schemas());
    Laws laws{p, derive_query(p)};
    ViewEditor editor(laws.get(db), db);
    RoundtripReport report;
    report.seed = seed;
    for (std::uint64_t trial = 0; report.accepted < trials && report.attempts < trials * 20; ++trial) {
        TrialResult r = run_trial(laws, editor, db, seed, trial);
        report.attempts += r.attempts;
        if (r.accepted) ++report.accepted;
        if (r.reason) {
            ++report.rejected;
            ++report.rejections[std::string(to_string(*r.reason))];
        }
        if (r.failure) report.failures.push_back(minimize(laws, std::move(*r.failure)));
        if (r.attempts == 0 && !r.failure) ++report.attempts;  // keeps the loop finite
    }
    return report;
}

std::optional<LawFailure> replay_trial(const Program& p, const Database& db, std::uint64_t seed, std::uint64_t trial) {
    Laws laws{p, derive_query(p)};
    ViewEditor editor(laws.get(db), db);
    return run_trial(laws, editor, db, seed, trial).failure;
}

// ---------------------------------------------------------------------------
// Exhaustive validity

const std::vector<Value>* Domain::lookup(const std::string& table, const std::string& attr) const {
    if (auto it = values.find(table + "." + attr); it != values.end()) return &it->second;
    if (auto it = values.find(attr); it != values.end()) return &it->second;
    return nullptr;
}

Domain parse_domain_json(std::string_view text) {
    using nlohmann::json;
    auto value_of = [](const json& j) -> Value {
        if (j.is_null()) return Value::null();
        if (j.is_number_integer()) return Value(j.get<std::int64_t>());
        if (j.is_string()) return Value(j.get<std::string>());
        throw Error(ErrorCode::InvalidSchema, "domain values must be null, integers or strings");
    };
    Domain d;
    try {
        json doc = json::parse(text);
        for (const auto& [k, v] : doc.items()) {
            if (k == "@fixed") {
                for (const auto& [table, rows] : v.items()) {
                    auto& out = d.fixed[table];
                    for (const auto& row : rows) {
                        Tuple t;
                        for (const auto& x : row) t.push_back(value_of(x));
                        out.push_back(std::move(t));
                    }
                }
                continue;
            }
            auto& out = d.values[k];
            for (const auto& x : v) out.push_back(value_of(x));
        }
    } catch (const json::exception& e) {
        throw Error(ErrorCode::InvalidSchema, std::string("domain file: ") + e.what());
    }
    return d;
}

namespace {

/// Every key-unique relation over `schema` with at most max_rows rows drawn
/// from the domain.
std::vector<Relation> all_relations(const Schema& schema, const std::string& domain_name, const Domain& d,
                                    std::size_t max_rows, std::size_t bound) {
    if (auto it = d.fixed.find(schema.name()); it != d.fixed.end())
        return {Relation(schema, it->second)};
    std::vector<std::vector<Value>> cols;
    for (const auto& a : schema.attrs()) {
        const auto* vals = d.lookup(domain_name, a.name);
        if (!vals) throw Error(ErrorCode::InvalidSchema, "no domain for '" + domain_name + "." + a.name + "'");
        std::vector<Value> ok;
        for (const auto& v : *vals)
            if (value_fits(a, v)) ok.push_back(v);
        cols.push_back(std::move(ok));
    }
    std::vector<Tuple> tuples{Tuple{}};
    for (const auto& col : cols) {
        std::vector<Tuple> next;
        for (const auto& t : tuples)
            for (const auto& v : col) {
                Tuple u = t;
                u.push_back(v);
                next.push_back(std::move(u));
            }
        tuples = std::move(next);
        if (tuples.size() > bound) throw Error(ErrorCode::DomainTooLarge, "too many tuples for '" + schema.name() + "'");
    }
    std::vector<Relation> out;
    std::vector<Tuple> chosen;
    std::set<Tuple> keys;
    std::vector<std::size_t> key_idx = schema.key_indices();
    std::function<void(std::size_t)> rec = [&](std::size_t from) {
        out.emplace_back(schema, chosen);
        if (out.size() > bound) throw Error(ErrorCode::DomainTooLarge, "too many relations for '" + schema.name() + "'");
        if (chosen.size() == max_rows) return;
        for (std::size_t i = from; i < tuples.size(); ++i) {
            Tuple k;
            for (auto j : key_idx) k.push_back(tuples[i][j]);
            if (keys.count(k)) continue;
            keys.insert(k);
            chosen.push_back(tuples[i]);
            rec(i + 1);
            chosen.pop_back();
            keys.erase(k);
        }
    };
    rec(0);
    return out;
}

std::string canonical(const Relation& r) { return describe(r); }

}  // namespace

ValidityReport check_validity_exhaustive(const Program& p, const SchemaMap& schemas, const Domain& domain,
                                         ValidityOptions opts) {
    if (!opts.skip_validation) require_valid(p, schemas);
    const Query q = derive_query(p);
    std::vector<std::string> tables = referenced_tables(q);
    std::vector<std::vector<Relation>> per_table;
    double db_count = 1;
    for (const auto& t : tables) {
        auto it = schemas.find(t);
        if (it == schemas.end()) throw Error(ErrorCode::UnknownTable, "no table '" + t + "'");
        per_table.push_back(all_relations(it->second, t, domain, opts.max_rows, opts.bound));
        db_count *= static_cast<double>(per_table.back().size());
    }
    const Schema vs = view_schema(p, schemas);
    std::vector<Relation> views = all_relations(vs, p.view_name(), domain, opts.max_rows, opts.bound);
    if (db_count * static_cast<double>(views.size()) > static_cast<double>(opts.bound))
        throw Error(ErrorCode::DomainTooLarge, std::to_string(static_cast<long long>(db_count)) + " databases x " +
                                                   std::to_string(views.size()) + " views exceeds the bound of " +
                                                   std::to_string(opts.bound));

    ValidityReport report;
    report.views = views.size();
    PutOptions po;
    po.skip_validation = true;
    std::map<std::string, std::pair<std::string, std::string>> seen;  // result -> (view, source)
    std::vector<std::size_t> idx(tables.size(), 0);
    auto fail = [&](bool& flag, std::string msg) {
        if (report.counterexample.empty()) report.counterexample = std::move(msg);
        flag = false;
    };
    while (true) {
        Database s;
        for (std::size_t i = 0; i < tables.size(); ++i) s.put(per_table[i][idx[i]]);
        std::optional<Relation> got;
        try {
            got = eval(q, s);
        } catch (const Error&) {
        }
        if (got) {
            ++report.databases;
            PutOutcome o = put(p, s, *got, po);
            if (!o.accepted() || !(o.sources() == s))
                fail(report.source_stability, "SourceStability: s = " + describe(s) + ", put(s, get(s)) " +
                                                  (o.accepted() ? "= " + describe(o.sources())
                                                                : "rejected: " + to_string(o.rejection())));
            for (const auto& v : views) {
                ++report.pairs;
                PutOutcome r = put(p, s, v, po);
                if (!r.accepted()) continue;
                ++report.accepted;
                std::string key = describe(r.sources());
                std::string vk = canonical(v);
                auto [it, fresh] = seen.emplace(key, std::make_pair(vk, describe(s)));
                if (!fresh && it->second.first != vk)
                    fail(report.view_determination, "ViewDetermination: put(" + it->second.second + ", " +
                                                        it->second.first + ") = put(" + describe(s) + ", " + vk +
                                                        ") = " + key);
            }
        }
        std::size_t i = 0;
        while (i < idx.size() && ++idx[i] == per_table[i].size()) idx[i++] = 0;
        if (i == idx.size()) break;
    }
    return report;
}

}  // namespace putback
