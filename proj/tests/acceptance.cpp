// Acceptance run: one line per criterion, non-zero exit if any fails.

#include <chrono>
#include <cstdio>
#include <functional>

#include "json.hpp"
#include "putback/checker.hpp"
#include "putback/derive.hpp"
#include "putback/federation.hpp"
#include "putback/incremental.hpp"
#include "putback/put.hpp"
#include "putback/query.hpp"
#include "support.hpp"

using namespace testing;
using nlohmann::json;

namespace {

struct Failed {
    std::string why;
};

void expect(bool ok, const std::string& why) {
    if (!ok) throw Failed{why};
}

std::string show(const Relation& r) { return to_csv(r); }

bool same_rows(const Relation& a, const Relation& b) {
    const auto names = a.schema().attr_names();
    return aligned(from(a), names) == aligned(from(b), names);
}

// The derived queries as one would write them by hand.
Query golden(const std::string& p) {
    if (p == "peer1")
        return project(join(base("vehicles"), base("area_map"), {{"loc", "loc"}}),
                       {{"vid", "vehicle_id"}, {"area", "current_area"}, {"rid", "request_id"}});
    if (p == "peer2")
        return union_query(
            const_extend(project(base("unoccupied_vehicles"), {{"vid", "vehicle_id"}, {"area", "current_area"}}),
                         "request_id", Value::null()),
            project(base("occupied_vehicles"), {{"vid", "vehicle_id"}, {"area", "current_area"}, {"rid", "request_id"}}));
    return union_query(const_extend(base("peer1_public"), "company_id", Value(1)),
                       const_extend(base("peer2_public"), "company_id", Value(2)));
}

Relation peer_view(const Program& p, const Database& db, std::vector<std::array<Value, 3>> rows) {
    Schema s = view_schema(p, db.schemas());
    std::vector<Tuple> out;
    for (const auto& r : rows) {
        Tuple t(3);
        t[s.require("vehicle_id")] = r[0];
        t[s.require("current_area")] = r[1];
        t[s.require("request_id")] = r[2];
        out.push_back(t);
    }
    return Relation(s, out);
}

const std::vector<std::string> kFixtures = {"peer1",      "peer2",       "integrator", "peer3",
                                            "integrator3", "peer1_empty", "peer2_empty"};

std::string criterion_derivation() {
    std::size_t dbs = 0;
    for (const char* p : {"peer1", "peer2", "integrator"}) {
        Query d = derive_query(program(p)), g = golden(p);
        for (const char* v : {"a", "b", "c"}) {
            Database db = fixture(p, v);
            Relation got = eval(d, db), want = eval(g, db);
            expect(same_rows(got, want), std::string(p) + "/" + v + ": derived " + show(got) + " vs " + show(want));
            ++dbs;
        }
    }
    return std::to_string(dbs) + " databases";
}

std::string criterion_putback() {
    Program p = program("peer1");
    Database db = fixture("peer1", "b");
    PutOutcome ok = put(p, db, peer_view(p, db, {{"v1", "Tokyo", "r9"}}));
    expect(ok.accepted(), "booking rejected: " + (ok.accepted() ? "" : to_string(ok.rejection())));
    expect(ok.sources().at("vehicles").rows() == std::set<Tuple>{{"v1", "Kanda", "r9"}},
           "vehicles after booking: " + show(ok.sources().at("vehicles")));
    expect(ok.sources().at("area_map") == db.at("area_map"), "area_map changed");
    PutOutcome no = put(p, db, peer_view(p, db, {{"v1", "Kyoto", "r0"}}));
    expect(!no.accepted(), "tampered view accepted");
    expect(no.rejection().reason == RejectReason::CheckFailed, "rejected with " + to_string(no.rejection()));
    return "rid overwritten, loc kept, tamper CheckFailed";
}

std::string criterion_inc_get() {
    Database db = fixture("peer1", "a");
    Query q = derive_query(program("peer1"));
    Delta out = inc_get(q, db, {{"vehicles", Delta{{{"v9", "Gion", "r7"}}, {}}}});
    Schema s = eval(q, db).schema();
    Tuple want(3);
    want[s.require("vehicle_id")] = "v9";
    want[s.require("current_area")] = "Kyoto";
    want[s.require("request_id")] = "r7";
    expect(out.inserts == std::set<Tuple>{want} && out.deletes.empty(), "unexpected view delta");
    return "one insert, area Kyoto";
}

std::string criterion_roundtrip() {
    std::size_t total = 0;
    for (const auto& p : kFixtures) {
        RoundtripReport r = check_roundtrip(program(p), fixture(p, "a"), 200, 20261016);
        if (!r.ok()) throw Failed{p + ": " + r.failures.front().law + " " + r.failures.front().detail};
        expect(r.accepted >= 200, p + ": only " + std::to_string(r.accepted) + " accepted edits");
        total += r.accepted;
    }
    return std::to_string(total) + " accepted edits, 0 violations";
}

std::string criterion_validity() {
    std::size_t pairs = 0;
    for (const auto& p : kFixtures) {
        Domain d = parse_domain_json(read_file(data("domains/" + p + ".json")));
        ValidityReport r = check_validity_exhaustive(program(p), fixture(p, "a").schemas(), d);
        expect(r.ok(), p + ": " + r.counterexample);
        pairs += r.pairs;
    }
    Domain d = parse_domain_json(read_file(data("domains/keyfree.json")));
    ValidityOptions opts;
    opts.skip_validation = true;
    ValidityReport bad = check_validity_exhaustive(program("keyfree"), fixture("keyfree", "a").schemas(), d, opts);
    expect(!bad.view_determination, "key-free update passed ViewDetermination");
    expect(bad.counterexample.find("ViewDetermination") != std::string::npos, "no counterexample reported");
    return std::to_string(pairs) + " pairs checked, key-free counterexample found";
}

std::optional<Relation> try_eval(const Query& q, const Database& db) {
    try {
        return eval(q, db);
    } catch (const Error& e) {
        if (e.code() == ErrorCode::KeyViolation) return std::nullopt;
        throw;
    }
}

std::string criterion_incremental() {
    std::size_t gets = 0, puts = 0;
    for (const auto& p : kFixtures) {
        Program prog = program(p);
        Query q = derive_query(prog);
        std::mt19937_64 rng(std::hash<std::string>{}(p));
        std::size_t checked = 0;
        for (const char* variant : {"a", "c"}) {
            Database db = fixture(p, variant);
            std::vector<std::string> tables;
            for (const auto& [n, _] : db) tables.push_back(n);
            for (int i = 0; checked < (variant[0] == 'a' ? 250u : 500u) && i < 4000; ++i) {
                DeltaMap w = random_source_delta(db, rng, tables);
                Database next = apply_deltas(db, w);
                auto before = try_eval(q, db), after = try_eval(q, next);
                if (!before || !after) continue;
                expect(inc_get(q, db, w) == diff(*before, *after), p + ": inc_get differs");
                db = std::move(next);
                ++checked;
            }
        }
        expect(checked >= 500, p + ": only " + std::to_string(checked) + " source deltas");
        gets += checked;

        std::size_t compared = 0;
        for (const char* variant : {"a", "c"}) {
            Database db = fixture(p, variant);
            Relation view = eval(q, db).renamed(prog.view_name());
            ViewEditor editor(view, db);
            for (int i = 0; i < 250; ++i, ++compared) {
                Delta u = editor.edit_delta(view, rng);
                Relation next_view = apply_delta(view, u);
                PutOutcome full = put(prog, db, next_view);
                IncPutOutcome inc = inc_put(prog, db, view, u);
                expect(full.accepted() == inc.accepted(), p + ": inc_put and put disagree on acceptance");
                if (!full.accepted()) {
                    expect(full.rejection().reason == inc.rejection().reason, p + ": different rejection");
                    continue;
                }
                Database via_inc = apply_deltas(db, inc.deltas());
                expect(via_inc == full.sources(), p + ": inc_put sources differ");
                db = std::move(via_inc);
                view = next_view;
            }
        }
        puts += compared;
    }

    // One-row edit on a 2000-vehicle source.
    Database small = fixture("peer1", "a");
    const Relation& areas = small.at("area_map");
    std::vector<Value> locs;
    for (const auto& r : areas.rows()) locs.push_back(r[0]);
    std::vector<Tuple> rows;
    for (int i = 0; i < 2000; ++i)
        rows.push_back({"car" + std::to_string(i), locs[i % locs.size()], i % 3 ? N : Value("r" + std::to_string(i))});
    Database db({Relation(small.at("vehicles").schema(), rows), areas});
    Program p = program("peer1");
    Relation view = eval(derive_query(p), db).renamed(p.view_name());
    const Schema& vs = view.schema();
    Tuple old;
    for (const auto& r : view.rows())
        if (r[vs.require("vehicle_id")] == Value("car7")) old = r;
    Tuple booked = old;
    booked[vs.require("request_id")] = "r-new";
    Delta u{{booked}, {old}};
    IncPutOutcome inc = inc_put(p, db, view, u);
    PutOutcome full = put(p, db, apply_delta(view, u));
    expect(inc.accepted() && full.accepted(), "benchmark edit rejected");
    expect(apply_deltas(db, inc.deltas()) == full.sources(), "benchmark results differ");
    expect(inc.source_rows_read < full.source_rows_read, "incremental put read as many rows as full put");
    return std::to_string(gets) + " source deltas, " + std::to_string(puts) + " view edits; rows read " +
           std::to_string(inc.source_rows_read) + " vs " + std::to_string(full.source_rows_read);
}

std::string criterion_payments() {
    Database db = load_database(data("lineage/db"));
    SchemaMap s = db.schemas();
    LineageRelation lr = eval_with_lineage(parse_query_json(read_file(data("lineage/query.json")), &s), db);
    std::map<std::string, std::string> owners = json::parse(read_file(data("lineage/owners.json")));
    auto tuple = distribute_payment(lr, 3000, PaymentPolicy::PerTuple, owners);
    auto lineage = distribute_payment(lr, 3000, PaymentPolicy::PerLineage, owners);
    expect(tuple == std::map<std::string, std::int64_t>{{"u1", 2100}, {"u2", 900}}, "per-tuple split wrong");
    expect(lineage == std::map<std::string, std::int64_t>{{"u1", 2000}, {"u2", 1000}}, "per-lineage split wrong");
    return "per tuple u1 $21.00 u2 $9.00; per lineage u1 $20.00 u2 $10.00";
}

std::set<std::string> vehicles_of(const Relation& integrated, std::int64_t company) {
    std::set<std::string> out;
    const Schema& s = integrated.schema();
    for (const auto& r : integrated.rows())
        if (r[s.require("company_id")] == Value(company)) out.insert(r[s.require("vehicle_id")].as_text());
    return out;
}

std::string criterion_federation() {
    // run_scenario enforces quiescence, atomicity and privacy after every step.
    ScenarioResult r = run_scenario(data("scenarios/advanced.json"));
    std::vector<json> lines, updates, r9;
    for (const auto& l : r.trace.lines) lines.push_back(json::parse(l));
    for (const auto& x : lines) {
        if (x["event"] == "source_update") updates.push_back(x);
        if (x["event"] == "booking_attempt" && x["rid"] == "r9") r9.push_back(x);
    }
    expect(r9.size() == 2 && r9[0]["outcome"] == "FAIL" && r9[1]["outcome"] == "SUCCESS" &&
               r9[0]["company_id"] != r9[1]["company_id"],
           "first booking did not retry with another company");
    expect(updates.size() >= 5, "missing source updates");
    expect(updates[0]["integrated_delta"]["deletes"].size() == 1 && updates[0]["integrated_delta"]["inserts"].empty(),
           "booked car did not vanish on dispatch");
    expect(updates[2]["integrated_delta"] == json::parse(R"({"inserts":[],"deletes":[]})"),
           "occupied car move reached the mediator");
    expect(updates[4]["integrated_delta"]["inserts"] == json::parse(R"([["v1","Kanagawa",null,1]])"),
           "freed car did not appear");
    expect(!vehicles_of(r.final_state.mediator.integrated, 1).count("v2"), "dispatched car still shared");

    // Privacy, checked once more from the outside.
    const std::string text = r.trace.text();
    for (const auto& [id, peer] : r.final_state.peers)
        for (const auto& [name, rel] : peer.sources) {
            auto c = rel.schema().index_of("loc");
            if (!c) continue;
            for (const auto& row : rel.rows())
                if (!row[*c].is_null())
                    expect(text.find("\"" + row[*c].as_text() + "\"") == std::string::npos,
                           "location " + row[*c].as_text() + " leaked");
        }
    return std::to_string(r.events) + " events, " + std::to_string(r.rejections) + " rejections, " +
           std::to_string(r.retried_bookings) + " retried bookings";
}

}  // namespace

int main() {
    struct Criterion {
        const char* name;
        double limit_s;  // 0 = no time limit
        std::function<std::string()> run;
    };
    const std::vector<Criterion> all = {
        {"query derivation fidelity", 1.0, criterion_derivation},
        {"putback examples", 0, criterion_putback},
        {"incremental get example", 0, criterion_inc_get},
        {"round-trip laws", 0, criterion_roundtrip},
        {"validity check", 60.0, criterion_validity},
        {"incremental/full equivalence", 0, criterion_incremental},
        {"lineage payments", 0, criterion_payments},
        {"federation scenarios", 5.0, criterion_federation},
    };
    int failed = 0, n = 0;
    for (const auto& c : all) {
        ++n;
        std::string detail;
        bool ok = true;
        const auto t0 = std::chrono::steady_clock::now();
        try {
            detail = c.run();
        } catch (const Failed& f) {
            ok = false;
            detail = f.why;
        } catch (const std::exception& e) {
            ok = false;
            detail = std::string("exception: ") + e.what();
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (ok && c.limit_s > 0 && secs >= c.limit_s) {
            ok = false;
            detail += " (over the time limit)";
        }
        if (!ok) ++failed;
        std::printf("[%s] %d %s (%.3f s): %s\n", ok ? "PASS" : "FAIL", n, c.name, secs, detail.c_str());
    }
    std::printf("%d/%d criteria passed\n", n - failed, n);
    return failed == 0 ? 0 : 1;
}
