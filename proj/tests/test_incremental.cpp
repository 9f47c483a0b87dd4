#include "doctest.h"
#include "putback/checker.hpp"
#include "putback/derive.hpp"
#include "putback/incremental.hpp"
#include "putback/query.hpp"
#include "support.hpp"

using namespace testing;

namespace {

const std::vector<std::string> kFixtures = {"peer1", "peer2", "integrator", "peer3", "integrator3", "peer1_empty", "peer2_empty"};

std::vector<std::string> tables_of(const Database& db) {
    std::vector<std::string> out;
    for (const auto& [n, _] : db) out.push_back(n);
    return out;
}

/// eval that reports an undefined view (key clash in a union) as nullopt.
std::optional<Relation> try_eval(const Query& q, const Database& db) {
    try {
        return eval(q, db);
    } catch (const Error& e) {
        if (e.code() == ErrorCode::KeyViolation) return std::nullopt;
        throw;
    }
}

}  // namespace

TEST_CASE("inserting a vehicle adds one joined view row") {
    Database db = fixture("peer1", "a");
    Query q = derive_query(program("peer1"));
    DeltaMap w{{"vehicles", Delta{{{"v9", "Gion", "r7"}}, {}}}};
    Delta out = inc_get(q, db, w);
    Schema s = eval(q, db).schema();
    Tuple want(3);
    want[s.require("vehicle_id")] = "v9";
    want[s.require("current_area")] = "Kyoto";
    want[s.require("request_id")] = "r7";
    CHECK(out.inserts == std::set<Tuple>{want});
    CHECK(out.deletes.empty());
}

TEST_CASE("inserting a vehicle whose loc has no area changes nothing") {
    Database db = fixture("peer1", "a");
    DeltaMap w{{"vehicles", Delta{{{"v9", "Atlantis", N}}, {}}}};
    CHECK(inc_get(derive_query(program("peer1")), db, w).empty());
}

TEST_CASE("inc_get agrees with recomputation on random source deltas") {
    for (const auto& p : kFixtures) {
        CAPTURE(p);
        std::mt19937_64 rng(std::hash<std::string>{}(p));
        Query q = derive_query(program(p));
        for (const char* variant : {"a", "c"}) {
            Database db = fixture(p, variant);
            std::size_t checked = 0;
            for (int i = 0; checked < 250 && i < 2000; ++i) {
                DeltaMap w = random_source_delta(db, rng, tables_of(db));
                Database next = apply_deltas(db, w);
                auto before = try_eval(q, db);
                auto after = try_eval(q, next);
                if (!before || !after) continue;
                Delta d = inc_get(q, db, w);
                CHECK(apply_delta(*before, d) == *after);
                CHECK(d == diff(*before, *after));
                CHECK(same(*after, oracle_eval(q, from(next))));
                db = std::move(next);
                ++checked;
            }
            CHECK(checked == 250);
        }
    }
}

TEST_CASE("inc_put agrees with put on random view edits") {
    for (const auto& p : kFixtures) {
        CAPTURE(p);
        Program prog = program(p);
        Query q = derive_query(prog);
        std::mt19937_64 rng(std::hash<std::string>{}(p) ^ 0x5eed);
        std::size_t compared = 0, accepted = 0;
        for (const char* variant : {"a", "c"}) {
            Database db = fixture(p, variant);
            Relation view = eval(q, db).renamed(prog.view_name());
            ViewEditor editor(view, db);
            for (int i = 0; i < 260; ++i) {
                Delta u = editor.edit_delta(view, rng);
                Relation next_view = apply_delta(view, u);
                PutOutcome full = put(prog, db, next_view);
                IncPutOutcome inc = inc_put(prog, db, view, u);
                ++compared;
                CHECK_FALSE(inc.full_recheck);
                REQUIRE(full.accepted() == inc.accepted());
                if (!full.accepted()) {
                    CHECK(full.rejection().reason == inc.rejection().reason);
                    continue;
                }
                ++accepted;
                Database via_inc = apply_deltas(db, inc.deltas());
                CHECK(via_inc == full.sources());
                db = std::move(via_inc);
                view = next_view;
            }
        }
        CHECK(compared >= 500);
        CHECK(accepted > 0);
    }
}

TEST_CASE("inc_put reads fewer source rows than full put for a one-row edit") {
    // 2000 vehicles spread over the area map.
    Database small = fixture("peer1", "a");
    const Relation& areas = small.at("area_map");
    std::vector<Tuple> rows;
    std::vector<Value> locs;
    for (const auto& r : areas.rows()) locs.push_back(r[0]);
    for (int i = 0; i < 2000; ++i)
        rows.push_back({"car" + std::to_string(i), locs[i % locs.size()], i % 3 ? N : Value("r" + std::to_string(i))});
    Database db({Relation(small.at("vehicles").schema(), rows), areas});
    Program p = program("peer1");
    Relation view = eval(derive_query(p), db).renamed(p.view_name());
    const Schema& vs = view.schema();
    const Tuple* old = nullptr;
    for (const auto& r : view.rows())
        if (r[vs.require("vehicle_id")] == Value("car7")) old = &r;
    REQUIRE(old != nullptr);
    Tuple booked = *old;
    booked[vs.require("request_id")] = "r-new";
    Delta u{{booked}, {*old}};

    IncPutOutcome inc = inc_put(p, db, view, u);
    PutOutcome full = put(p, db, apply_delta(view, u));
    REQUIRE(inc.accepted());
    REQUIRE(full.accepted());
    CHECK(apply_deltas(db, inc.deltas()) == full.sources());
    CHECK(inc.source_rows_read < full.source_rows_read);
    CHECK(inc.source_rows_read < 50);
    MESSAGE("rows read: incremental " << inc.source_rows_read << ", full " << full.source_rows_read);
}

TEST_CASE("inc_get rejects malformed deltas") {
    Database db = fixture("peer1", "a");
    Query q = derive_query(program("peer1"));
    auto code = [&](const DeltaMap& w) {
        try {
            inc_get(q, db, w);
        } catch (const Error& e) {
            return e.code();
        }
        return ErrorCode::IoError;
    };
    CHECK(code({{"vehicles", Delta{{}, {{"v9", "Kanda", N}}}}}) == ErrorCode::MissingDeleteTarget);
    CHECK(code({{"vehicles", Delta{{{"v1", "Kanda", "r1"}}, {{"v1", "Kanda", "r1"}}}}}) == ErrorCode::MalformedDelta);
}

TEST_CASE("empty deltas are no-ops") {
    Database db = fixture("integrator", "a");
    Program p = program("integrator");
    Relation view = eval(derive_query(p), db).renamed(p.view_name());
    CHECK(inc_get(derive_query(p), db, {}).empty());
    IncPutOutcome o = inc_put(p, db, view, Delta{});
    REQUIRE(o.accepted());
    for (const auto& [_, d] : o.deltas()) CHECK(d.empty());
}
