#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "json.hpp"
#include "putback/checker.hpp"
#include "putback/derive.hpp"
#include "putback/error.hpp"
#include "putback/federation.hpp"
#include "putback/io.hpp"
#include "putback/put.hpp"
#include "putback/query.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace putback;

namespace {

bool g_json = false;

/// Exit status 1 with the reason on stderr.
int fail(const std::string& code, const std::string& message, json extra = json::object()) {
    if (g_json) {
        extra["error"] = code;
        extra["message"] = message;
        std::cerr << extra.dump() << "\n";
    } else {
        std::cerr << code << ": " << message << "\n";
    }
    return 1;
}

int reject(const Rejection& r) {
    if (!g_json) {
        std::cerr << to_string(r) << "\n";
        return 1;
    }
    return fail(std::string(to_string(r.reason)), r.detail, {{"path", r.path}});
}

int cmd_derive(const std::string& program, const std::string& db) {
    Program p = load_program(program);
    Query q = derive_query(p);
    std::optional<SchemaMap> schemas;
    if (!db.empty()) {
        schemas = load_database(db).schemas();
        (void)view_schema(p, *schemas);  // type-checks the program
    }
    std::cout << render_sql(q, p.view_name(), schemas ? &*schemas : nullptr);
    return 0;
}

int cmd_get(const std::string& db_dir, const std::string& program) {
    Program p = load_program(program);
    Database db = load_database(db_dir);
    auto issues = validate(p, db.schemas(), std::nullopt);
    if (!issues.empty()) return fail(issues.front().code, issues.front().message);
    std::cout << to_csv(eval(derive_query(p), db).renamed(p.view_name()));
    return 0;
}

int cmd_put(const std::string& db_dir, const std::string& program, const std::string& view_file, const std::string& out) {
    Program p = load_program(program);
    Database db = load_database(db_dir);
    std::error_code ec;
    if (fs::exists(out) && fs::equivalent(out, db_dir, ec))
        return fail("UsageError", "--out must differ from --db; puts are never written in place") + 1;
    Schema vs = view_schema(p, db.schemas());
    Relation view = parse_csv(read_file(view_file), vs);
    auto issues = validate(p, db.schemas(), vs);
    if (!issues.empty()) return fail(issues.front().code, issues.front().message);
    PutOutcome o = put(p, db, view);
    if (!o.accepted()) return reject(o.rejection());
    save_database(o.sources(), out);
    if (g_json) {
        json changed = json::object();
        for (const auto& [name, d] : diff(db, o.sources()))
            if (!d.empty()) changed[name] = {{"inserts", d.inserts.size()}, {"deletes", d.deletes.size()}};
        std::cout << json{{"status", "accepted"}, {"out", out}, {"changed", changed}}.dump() << "\n";
    } else {
        std::cout << "accepted; wrote " << out << "\n";
    }
    return 0;
}

int cmd_roundtrip(const std::string& program, const std::string& db_dir, std::size_t trials, std::uint64_t seed,
                  bool skip_validation) {
    Program p = load_program(program);
    Database db = load_database(db_dir);
    RoundtripReport r = check_roundtrip(p, db, trials, seed, skip_validation);
    if (g_json) {
        json fails = json::array();
        for (const auto& f : r.failures)
            fails.push_back({{"law", f.law}, {"trial", f.trial}, {"sources", describe(f.sources)},
                             {"view", f.view ? describe(*f.view) : ""}, {"detail", f.detail}});
        std::cout << json{{"seed", r.seed},         {"attempts", r.attempts}, {"accepted", r.accepted},
                          {"rejected", r.rejected}, {"rejections", r.rejections}, {"failures", fails},
                          {"ok", r.ok()}}
                         .dump()
                  << "\n";
    } else {
        std::cout << "seed " << r.seed << ": " << r.accepted << " accepted of " << r.attempts << " edits, "
                  << r.rejected << " rejected\n";
        for (const auto& [reason, n] : r.rejections) std::cout << "  " << reason << ": " << n << "\n";
        for (const auto& f : r.failures) {
            std::cout << f.law << " fails (trial " << f.trial << "): " << f.detail << "\n  sources: " << describe(f.sources)
                      << "\n";
            if (f.view) std::cout << "  view: " << describe(*f.view) << "\n";
        }
        std::cout << (r.ok() ? "GetPut and PutGet hold\n" : "law violated\n");
    }
    return r.ok() ? 0 : 1;
}

int cmd_validity(const std::string& program, const std::string& db_dir, const std::string& domain_file,
                 std::size_t max_rows, bool skip_validation) {
    Program p = load_program(program);
    SchemaMap schemas = parse_schema_json(read_file(fs::path(db_dir) / "schema.json"));
    Domain domain = parse_domain_json(read_file(domain_file));
    ValidityOptions opts;
    opts.max_rows = max_rows;
    opts.skip_validation = skip_validation;
    ValidityReport r = check_validity_exhaustive(p, schemas, domain, opts);
    if (g_json) {
        std::cout << json{{"databases", r.databases},
                          {"views", r.views},
                          {"pairs", r.pairs},
                          {"accepted", r.accepted},
                          {"source_stability", r.source_stability},
                          {"view_determination", r.view_determination},
                          {"counterexample", r.counterexample},
                          {"ok", r.ok()}}
                         .dump()
                  << "\n";
    } else {
        std::cout << r.databases << " source states, " << r.views << " views, " << r.pairs << " pairs, " << r.accepted
                  << " accepted\n"
                  << "SourceStability: " << (r.source_stability ? "holds" : "fails") << "\n"
                  << "ViewDetermination: " << (r.view_determination ? "holds" : "fails") << "\n";
        if (!r.counterexample.empty()) std::cout << "counterexample: " << r.counterexample << "\n";
    }
    return r.ok() ? 0 : 1;
}

int cmd_lineage(const std::string& query_file, const std::string& db_dir, std::int64_t total, const std::string& policy,
                const std::string& owners_file) {
    Database db = load_database(db_dir);
    SchemaMap schemas = db.schemas();
    Query q = parse_query_json(read_file(query_file), &schemas);
    json oj;
    try {
        oj = json::parse(read_file(owners_file));
    } catch (const json::exception& e) {
        return fail("SyntaxError", std::string("owners file: ") + e.what());
    }
    auto owners = oj.get<std::map<std::string, std::string>>();
    auto pay = distribute_payment(eval_with_lineage(q, db), total,
                                  policy == "tuple" ? PaymentPolicy::PerTuple : PaymentPolicy::PerLineage, owners);
    std::cout << json(pay).dump() << "\n";
    return 0;
}

int cmd_sim(const std::string& scenario, const std::string& trace_file, bool full_recompute) {
    ScenarioOptions opts;
    opts.full_recompute = full_recompute;
    ScenarioResult r = run_scenario(scenario, opts);
    if (!trace_file.empty()) write_file(trace_file, r.trace.text());
    json summary{{"events", r.events},
                 {"rejections", r.rejections},
                 {"bookings_ok", r.bookings_ok},
                 {"bookings_failed", r.bookings_failed},
                 {"retried_bookings", r.retried_bookings},
                 {"digest", digest(r.final_state)}};
    if (g_json) {
        std::cout << summary.dump() << "\n";
    } else {
        if (trace_file.empty()) std::cout << r.trace.text();
        std::cout << "events " << r.events << ", rejections " << r.rejections << ", bookings " << r.bookings_ok
                  << " ok / " << r.bookings_failed << " failed (" << r.retried_bookings << " after a retry), digest "
                  << summary["digest"].get<std::string>() << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Putback-based bidirectional views over relational data"};
    app.require_subcommand(1);
    app.fallthrough();
    app.add_flag("--json", g_json, "Machine-readable output and errors");

    std::string program, db, view, out, domain, query, owners, policy = "tuple", scenario, trace;
    std::size_t trials = 200, max_rows = 2;
    std::uint64_t seed = 1;
    std::int64_t total = 0;
    bool skip_validation = false, full_recompute = false;

    auto* derive = app.add_subcommand("derive", "Print the derived view query as SQL");
    derive->add_option("program", program, "Update program (.ust)")->required();
    derive->add_option("--db", db, "Database directory; enables SELECT * for whole tables");

    auto* get = app.add_subcommand("get", "Evaluate the derived view");
    get->add_option("--db", db)->required();
    get->add_option("--program", program)->required();

    auto* putc = app.add_subcommand("put", "Reflect an updated view into the sources");
    putc->add_option("--db", db)->required();
    putc->add_option("--program", program)->required();
    putc->add_option("--view", view, "Updated view as CSV")->required();
    putc->add_option("--out", out, "Output database directory (never the input)")->required();

    auto* check = app.add_subcommand("check", "Check round-trip laws or validity");
    check->require_subcommand(1);
    check->fallthrough();
    auto* roundtrip = check->add_subcommand("roundtrip", "Seeded random GetPut/PutGet trials");
    auto* validity = check->add_subcommand("validity", "Exhaustive ViewDetermination/SourceStability");
    for (auto* c : {roundtrip, validity}) {
        c->add_option("--program", program)->required();
        c->add_option("--db", db)->required();
        c->add_option("--seed", seed);
    }
    roundtrip->add_option("--trials", trials)->check(CLI::PositiveNumber);
    roundtrip->add_option("--domain", domain, "Ignored; accepted for symmetry");
    validity->add_option("--domain", domain)->required();
    validity->add_option("--trials", trials, "Ignored; accepted for symmetry");
    validity->add_option("--max-rows", max_rows)->check(CLI::Range(0, 6));
    for (auto* c : {roundtrip, validity})
        c->add_flag("--skip-validation", skip_validation, "Run programs the validator would refuse");

    auto* lineage = app.add_subcommand("lineage", "Distribute a payment by answer lineage");
    lineage->add_option("--query", query)->required();
    lineage->add_option("--db", db)->required();
    lineage->add_option("--total", total, "Amount in cents")->required()->check(CLI::NonNegativeNumber);
    lineage->add_option("--policy", policy)->check(CLI::IsMember({"tuple", "lineage"}));
    lineage->add_option("--owners", owners)->required();

    auto* sim = app.add_subcommand("sim", "Run a federation scenario");
    sim->add_option("--scenario", scenario)->required();
    sim->add_option("--trace", trace, "Write the JSON-lines trace here");
    sim->add_flag("--full-recompute", full_recompute);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (*derive) return cmd_derive(program, db);
        if (*get) return cmd_get(db, program);
        if (*putc) return cmd_put(db, program, view, out);
        if (*roundtrip) return cmd_roundtrip(program, db, trials, seed, skip_validation);
        if (*validity) return cmd_validity(program, db, domain, max_rows, skip_validation);
        if (*lineage) return cmd_lineage(query, db, total, policy, owners);
        if (*sim) return cmd_sim(scenario, trace, full_recompute);
    } catch (const Error& e) {
        return fail(std::string(to_string(e.code())), e.detail());
    } catch (const std::exception& e) {
        return fail("Error", e.what());
    }
    return 2;
}
