#include "doctest.h"
#include "support.hpp"

using namespace testing;

namespace {

Schema vehicles_schema() { return Schema("vehicles", {text("vid"), text("loc"), text("rid", true)}, {"vid"}); }
Schema area_schema() { return Schema("area_map", {text("loc"), text("area")}, {"loc"}); }

}  // namespace

TEST_CASE("null fails every comparison") {
    for (auto op : {CmpOp::Eq, CmpOp::Lt, CmpOp::Le, CmpOp::Gt, CmpOp::Ge}) {
        CHECK_FALSE(compare_values(N, op, N));
        CHECK_FALSE(compare_values(N, op, Value("a")));
        CHECK_FALSE(compare_values(Value(1), op, N));
    }
    CHECK(compare_values(Value(1), CmpOp::Lt, Value(2)));
    CHECK(compare_values(Value("b"), CmpOp::Ge, Value("a")));
    CHECK(N == N);  // membership equality
}

TEST_CASE("schema construction errors") {
    CHECK_THROWS_AS(Schema("t", {text("a"), text("a")}, {"a"}), Error);
    try {
        Schema("t", {text("a")}, {"b"});
        FAIL("expected throw");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::InvalidSchema);
    }
    Schema s("t", {text("a"), integer("b", true)}, {"a"});
    CHECK(s.index_of("b") == 1u);
    CHECK_FALSE(s.index_of("c"));
    CHECK_THROWS_AS(s.require("c"), Error);
}

TEST_CASE("relation rejects bad rows") {
    auto code = [](auto&& f) {
        try {
            f();
        } catch (const Error& e) {
            return e.code();
        }
        return ErrorCode::IoError;
    };
    CHECK(code([] { Relation(vehicles_schema(), std::vector<Tuple>{{"v1", "Kanda", N}, {"v1", "Ueno", N}}); }) ==
          ErrorCode::KeyViolation);
    CHECK(code([] { Relation(vehicles_schema(), std::vector<Tuple>{{"v1", N, N}}); }) == ErrorCode::NotNullViolation);
    CHECK(code([] { Relation(vehicles_schema(), std::vector<Tuple>{{"v1", 3, N}}); }) == ErrorCode::TypeMismatch);
    CHECK(code([] { Relation(vehicles_schema(), std::vector<Tuple>{{"v1"}}); }) == ErrorCode::SchemaMismatch);
    // Exact duplicates collapse.
    Relation r(vehicles_schema(), std::vector<Tuple>{{"v1", "Kanda", N}, {"v1", "Kanda", N}});
    CHECK(r.size() == 1);
}

TEST_CASE("operators agree with hand results") {
    Relation v(vehicles_schema(), std::vector<Tuple>{{"v1", "Kanda", "r1"}, {"v2", "Gion", N}, {"v3", "Nowhere", N}});
    Relation a(area_schema(), std::vector<Tuple>{{"Kanda", "Tokyo"}, {"Gion", "Kyoto"}});

    Relation j = equi_join(v, a, {{"loc", "loc"}});
    CHECK(j.schema().attr_names() == std::vector<std::string>{"vid", "loc", "rid", "area"});
    CHECK(j.rows() == std::set<Tuple>{{"v1", "Kanda", "r1", "Tokyo"}, {"v2", "Gion", N, "Kyoto"}});

    Relation p = project_rename(j, {{"vid", "vehicle_id"}, {"area", "current_area"}});
    CHECK(p.schema().key() == std::vector<std::string>{"vehicle_id"});
    CHECK(p.rows() == std::set<Tuple>{{"v1", "Tokyo"}, {"v2", "Kyoto"}});

    // Dropping the key falls back to an all-attribute key.
    Relation areas = project_rename(j, {{"area", "area"}});
    CHECK(areas.schema().key_is_all_attrs());

    Predicate has_rid;
    has_rid.conjuncts.push_back(Predicate::IsNull{"rid"});
    CHECK(select_rows(v, has_rid).size() == 2);

    Relation e = const_extend(p, "company_id", Value(1));
    CHECK(e.rows().count(Tuple{"v1", "Tokyo", 1}) == 1);

    Relation u = union_of(project_rename(v, {{"vid", "x"}}), project_rename(a, {{"loc", "x"}}));
    CHECK(u.size() == 5);
}

TEST_CASE("null never matches in a join") {
    Schema l("l", {text("k"), text("x", true)}, {"k"});
    Schema r("r", {text("x", true), text("y")}, {"y"});
    Relation left(l, std::vector<Tuple>{{"a", N}, {"b", "1"}});
    Relation right(r, std::vector<Tuple>{{N, "p"}, {"1", "q"}});
    CHECK(equi_join(left, right, {{"x", "x"}}).rows() == std::set<Tuple>{{"b", "1", "q"}});
}

TEST_CASE("apply_delta and diff invert each other") {
    std::mt19937_64 rng(42);
    Database db = fixture("peer1", "c");
    for (int i = 0; i < 300; ++i) {
        DeltaMap d = random_source_delta(db, rng, {"vehicles", "area_map"});
        Database next = apply_deltas(db, d);
        DeltaMap back = diff(db, next);
        CHECK(apply_deltas(db, back) == next);
        for (const auto& [t, delta] : back) {
            Delta want = d.count(t) ? d.at(t) : Delta{};
            want.normalize();
            CHECK(delta == want);
        }
        db = next;
    }
}

TEST_CASE("apply_delta errors") {
    Relation v(vehicles_schema(), std::vector<Tuple>{{"v1", "Kanda", N}});
    auto code_of = [&](const Delta& d) {
        try {
            apply_delta(v, d);
        } catch (const Error& e) {
            return e.code();
        }
        return ErrorCode::IoError;
    };
    CHECK(code_of(Delta{{}, {{"v9", "x", N}}}) == ErrorCode::MissingDeleteTarget);
    CHECK(code_of(Delta{{{"v1", "Ueno", N}}, {}}) == ErrorCode::KeyViolation);
    CHECK(code_of(Delta{{{"v1", "Kanda", N}}, {{"v1", "Kanda", N}}}) == ErrorCode::MalformedDelta);
    // Replacing a row is delete + insert.
    Relation r2 = apply_delta(v, Delta{{{"v1", "Ueno", "r1"}}, {{"v1", "Kanda", N}}});
    CHECK(r2.rows() == std::set<Tuple>{{"v1", "Ueno", "r1"}});
}

TEST_CASE("csv round trip keeps null and empty text apart") {
    Schema s("t", {text("a"), text("b", true), integer("c", true)}, {"a"});
    Relation r = parse_csv("c,a,b\n1,x,\n,y,\"\"\n\n3,\"z,1\",\"q\"\"\"\n", s);
    CHECK(r.rows() == std::set<Tuple>{{"x", N, 1}, {"y", "", N}, {"z,1", "q\"", 3}});
    CHECK(parse_csv(to_csv(r), s) == r);
    CHECK(to_csv(r).rfind("a,b,c\n", 0) == 0);
    CHECK_THROWS_AS(parse_csv("a,b\nx,y\n", s), Error);  // missing column c
    CHECK_THROWS_AS(parse_csv("a,b,c\nx,y,notint\n", s), Error);
}

TEST_CASE("schema json round trip and database loading") {
    Database db = fixture("peer1", "a");
    SchemaMap schemas = db.schemas();
    CHECK(parse_schema_json(schema_to_json(schemas)) == schemas);
    CHECK(db.at("vehicles").size() == 3);
    CHECK(db.at("vehicles").contains(Tuple{"v2", "Ueno", N}));
    CHECK_THROWS_AS(parse_schema_json(R"({"tables":[{"name":"t","attrs":[{"name":"a","type":"float"}],"key":["a"]}]})"),
                    Error);
    CHECK_THROWS_AS(load_database(data("no/such/dir")), Error);
}

TEST_CASE("query json round trip") {
    SchemaMap schemas = load_database(data("lineage/db")).schemas();
    Query q = parse_query_json(read_file(data("lineage/query.json")), &schemas);
    Query q2 = parse_query_json(query_to_json(q), &schemas);
    CHECK(equal(q, q2));
    CHECK_THROWS_AS(parse_query_json(R"({"op":"nope"})"), Error);
}
