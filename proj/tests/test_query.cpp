#include "doctest.h"
#include "putback/derive.hpp"
#include "putback/query.hpp"
#include "support.hpp"

using namespace testing;

TEST_CASE("peer1 derived query on one vehicle") {
    Database db({Relation(fixture("peer1", "a").at("vehicles").schema(), std::vector<Tuple>{{"v1", "Kanda", "r1"}}),
                 Relation(fixture("peer1", "a").at("area_map").schema(), std::vector<Tuple>{{"Kanda", "Tokyo"}})});
    Relation v = eval(derive_query(program("peer1")), db);
    CHECK(v.rows().size() == 1);
    CHECK(same(v, Table{{"vehicle_id", "current_area", "request_id"}, {{"v1", "Tokyo", "r1"}}}));
}

TEST_CASE("base query is the table") {
    Database db = fixture("peer1", "a");
    CHECK(eval(base("vehicles"), db) == db.at("vehicles"));
}

TEST_CASE("integrator tags each peer's rows") {
    Database db = fixture("integrator", "b");
    Relation p2(db.at("peer2_public").schema(), std::vector<Tuple>{{"v7", "Kyoto", N}});
    db.put(p2);
    Relation v = eval(derive_query(program("integrator")), db);
    CHECK(same(v, Table{{"vehicle_id", "current_area", "request_id", "company_id"},
                        {{"v1", "Tokyo", "r0", 1}, {"v7", "Kyoto", N, 2}}}));
}

TEST_CASE("eval matches the oracle on every fixture") {
    for (const char* p : {"peer1", "peer2", "integrator", "peer3", "integrator3", "peer1_empty", "peer2_empty"})
        for (const char* v : {"a", "b", "c"}) {
            CAPTURE(p);
            CAPTURE(v);
            Database db = fixture(p, v);
            Query q = derive_query(program(p));
            CHECK(same(eval(q, db), oracle_eval(q, from(db))));
        }
}

TEST_CASE("infer_schema reports problems") {
    SchemaMap s = fixture("peer1", "a").schemas();
    auto code = [&](const Query& q) {
        try {
            infer_schema(q, s);
        } catch (const Error& e) {
            return e.code();
        }
        return ErrorCode::IoError;
    };
    CHECK(code(base("nope")) == ErrorCode::UnknownTable);
    CHECK(code(project(base("vehicles"), {{"zzz", "a"}})) == ErrorCode::UnknownAttribute);
    CHECK(code(project(base("vehicles"), {{"vid", "a"}, {"loc", "a"}})) == ErrorCode::DuplicateAttribute);
    CHECK(code(union_query(base("vehicles"), base("area_map"))) == ErrorCode::SchemaMismatch);
    Schema out = infer_schema(derive_query(program("peer1")), s);
    CHECK(out.attr_names() == std::vector<std::string>{"vehicle_id", "request_id", "current_area"});
    CHECK(out.key() == std::vector<std::string>{"vehicle_id"});
}

// ---------------------------------------------------------------------------
// Lineage and payments

namespace {

LineageRelation answer() {
    Database db = load_database(data("lineage/db"));
    SchemaMap s = db.schemas();
    return eval_with_lineage(parse_query_json(read_file(data("lineage/query.json")), &s), db);
}

std::map<std::string, std::string> owners() {
    std::map<std::string, std::string> o;
    for (const char* t : {"R1:t1", "R1:t2", "R1:t3", "R1:t4"}) o[t] = "u1";
    for (const char* t : {"R2:t6", "R2:t7"}) o[t] = "u2";
    return o;
}

std::set<std::string> tids(const std::set<Tid>& s) {
    std::set<std::string> out;
    for (const auto& t : s) out.insert(to_string(t));
    return out;
}

}  // namespace

TEST_CASE("lineage of the trajectory answer") {
    LineageRelation lr = answer();
    REQUIRE(lr.rows.size() == 5);
    std::map<Tuple, std::set<std::string>> got;
    for (const auto& [row, l] : lr.rows) got[row] = tids(l);
    CHECK(got.at({"10:00", "Oike"}) == std::set<std::string>{"R1:t1", "R2:t6"});
    CHECK(got.at({"10:30", "Chionin"}) == std::set<std::string>{"R1:t2"});
    CHECK(got.at({"11:00", "Oike"}) == std::set<std::string>{"R2:t7"});
    CHECK(got.at({"11:00", "Yasaka"}) == std::set<std::string>{"R1:t3"});
    CHECK(got.at({"11:30", "Gion"}) == std::set<std::string>{"R1:t4"});
}

TEST_CASE("lineage rows equal eval rows") {
    Database db = load_database(data("lineage/db"));
    SchemaMap s = db.schemas();
    Query q = parse_query_json(read_file(data("lineage/query.json")), &s);
    CHECK(eval_with_lineage(q, db).relation().rows() == eval(q, db).rows());
    for (const char* p : {"peer1", "peer2", "integrator"}) {
        Database f = fixture(p, "c");
        Query d = derive_query(program(p));
        CHECK(eval_with_lineage(d, f).relation().rows() == eval(d, f).rows());
    }
}

TEST_CASE("single table lineage is singleton and self-union is idempotent") {
    Database db = load_database(data("lineage/db"));
    Query r1 = project(base("R1"), {{"time", "time"}, {"location", "location"}});
    LineageRelation a = eval_with_lineage(r1, db);
    for (const auto& [_, l] : a.rows) CHECK(l.size() == 1);
    LineageRelation b = eval_with_lineage(union_query(r1, r1), db);
    CHECK(a.rows == b.rows);
}

TEST_CASE("payment distribution") {
    LineageRelation lr = answer();
    auto o = owners();
    CHECK(distribute_payment(lr, 3000, PaymentPolicy::PerTuple, o) == std::map<std::string, std::int64_t>{{"u1", 2100}, {"u2", 900}});
    CHECK(distribute_payment(lr, 3000, PaymentPolicy::PerLineage, o) ==
          std::map<std::string, std::int64_t>{{"u1", 2000}, {"u2", 1000}});
    CHECK(distribute_payment(lr, 0, PaymentPolicy::PerTuple, o) == std::map<std::string, std::int64_t>{{"u1", 0}, {"u2", 0}});
    // Uneven totals still sum exactly.
    for (std::int64_t total : {1, 7, 2999, 3001, 12345}) {
        for (auto pol : {PaymentPolicy::PerTuple, PaymentPolicy::PerLineage}) {
            auto pay = distribute_payment(lr, total, pol, o);
            CHECK(pay.at("u1") + pay.at("u2") == total);
        }
    }
    auto one = distribute_payment(lr, 1, PaymentPolicy::PerTuple, o);
    CHECK(one.at("u1") == 1);  // the leftover cent goes to the first owner by name

    CHECK_THROWS_AS(distribute_payment(LineageRelation{}, 100, PaymentPolicy::PerTuple, o), Error);
    auto partial = o;
    partial.erase("R2:t7");
    CHECK_THROWS_AS(distribute_payment(lr, 100, PaymentPolicy::PerTuple, partial), Error);
}
