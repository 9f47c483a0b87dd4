#include "doctest.h"
#include "putback/derive.hpp"
#include "putback/parser.hpp"
#include "putback/query.hpp"
#include "support.hpp"

using namespace testing;

namespace {

std::string squash(const std::string& s) {
    std::string out;
    bool space = false;
    for (char c : s) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            space = true;
            continue;
        }
        if (space && !out.empty()) out += ' ';
        space = false;
        out += c;
    }
    return out;
}

}  // namespace

TEST_CASE("update derives a projection with renaming") {
    Program p = parse_program("UPDATE vid, area IN SOURCE t WITH vehicle_id, current_area IN VIEW v");
    CHECK(equal(derive_query(p), project(base("t"), {{"vid", "vehicle_id"}, {"area", "current_area"}})));
}

TEST_CASE("check derives its own query") {
    Program p = parse_program("CHECK VIEW v EQUALS SELECT a AS x FROM t;");
    CHECK(equal(derive_query(p), project(base("t"), {{"a", "x"}})));
}

TEST_CASE("vsplit derives a join on shared attributes") {
    Query q = derive_query(program("peer1"));
    const auto* pr = std::get_if<QueryExpr::ProjectRename>(&q->node);
    REQUIRE(pr != nullptr);
    for (const auto& [s, d] : pr->pairs) CHECK(s == d);
    const auto* j = std::get_if<QueryExpr::Join>(&pr->input->node);
    REQUIRE(j != nullptr);
    CHECK(j->conds == JoinConds{{"vehicle_id", "vehicle_id"}});
}

TEST_CASE("hsplit derives a union with constant columns") {
    Query q = derive_query(program("integrator"));
    const auto* u = std::get_if<QueryExpr::Union>(&q->node);
    REQUIRE(u != nullptr);
    const auto* left = std::get_if<QueryExpr::ConstExtend>(&u->left->node);
    REQUIRE(left != nullptr);
    CHECK(left->attr == "company_id");
    CHECK(left->literal == Value(1));

    Schema s = view_schema(program("peer2"), fixture("peer2", "a").schemas());
    CHECK(s.name() == "peer2_public");
    CHECK(s.attr("request_id").nullable);
}

TEST_CASE("sql text matches the golden files") {
    for (const char* p : {"peer1", "peer2", "integrator"}) {
        CAPTURE(p);
        Program prog = program(p);
        SchemaMap s = fixture(p, "a").schemas();
        CHECK(render_sql(derive_query(prog), prog.view_name(), &s) == read_file(data(std::string("golden/") + p + ".sql")));
    }
}

TEST_CASE("peer2 and integrator sql read like the hand-written queries") {
    SchemaMap s2 = fixture("peer2", "a").schemas();
    CHECK(squash(render_sql(derive_query(program("peer2")), "peer2_public", &s2)) ==
          "SELECT * INTO peer2_public FROM SELECT vid AS vehicle_id, area AS current_area, null AS request_id "
          "FROM unoccupied_vehicles UNION SELECT vid AS vehicle_id, area AS current_area, rid AS request_id "
          "FROM occupied_vehicles;");
    SchemaMap si = fixture("integrator", "a").schemas();
    CHECK(squash(render_sql(derive_query(program("integrator")), "all_vehicles", &si)) ==
          "SELECT * INTO all_vehicles FROM SELECT *, 1 AS company_id FROM peer1_public UNION "
          "SELECT *, 2 AS company_id FROM peer2_public;");
}
