#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "putback/checker.hpp"
#include "putback/derive.hpp"
#include "putback/federation.hpp"
#include "putback/io.hpp"
#include "putback/parser.hpp"
#include "putback/put.hpp"
#include "putback/query.hpp"

namespace py = pybind11;
using namespace putback;

namespace {

py::object to_py(const Value& v) {
    if (v.is_null()) return py::none();
    if (v.is_int()) return py::int_(v.as_int());
    return py::str(v.as_text());
}

Value from_py(const py::handle& h) {
    if (h.is_none()) return Value::null();
    if (py::isinstance<py::bool_>(h)) throw py::type_error("booleans are not relation values");
    if (py::isinstance<py::int_>(h)) return Value(h.cast<std::int64_t>());
    if (py::isinstance<py::str>(h)) return Value(h.cast<std::string>());
    throw py::type_error("relation values are None, int or str");
}

py::list rows_of(const Relation& r) {
    py::list out;
    for (const auto& row : r.rows()) {
        py::tuple t(row.size());
        for (std::size_t i = 0; i < row.size(); ++i) t[i] = to_py(row[i]);
        out.append(t);
    }
    return out;
}

// Rows are sequences in schema order or dicts keyed by attribute name.
Relation relation_from(const Schema& s, const py::iterable& rows) {
    std::vector<Tuple> out;
    for (const auto& row : rows) {
        Tuple t;
        if (py::isinstance<py::dict>(row)) {
            auto d = row.cast<py::dict>();
            if (d.size() != s.arity()) throw Error(ErrorCode::SchemaMismatch, "row has the wrong attributes for " + s.name());
            for (const auto& name : s.attr_names()) {
                if (!d.contains(name)) throw Error(ErrorCode::SchemaMismatch, "row lacks attribute " + name);
                t.push_back(from_py(d[py::str(name)]));
            }
        } else {
            for (const auto& v : row) t.push_back(from_py(v));
        }
        out.push_back(std::move(t));
    }
    return Relation(s, std::move(out));
}

py::dict summary(const RoundtripReport& r) {
    py::dict d;
    d["seed"] = r.seed;
    d["attempts"] = r.attempts;
    d["accepted"] = r.accepted;
    d["rejected"] = r.rejected;
    d["rejections"] = r.rejections;
    py::list failures;
    for (const auto& f : r.failures) {
        py::dict x;
        x["law"] = f.law;
        x["trial"] = f.trial;
        x["detail"] = f.detail;
        failures.append(x);
    }
    d["failures"] = failures;
    d["ok"] = r.ok();
    return d;
}

py::dict summary(const ValidityReport& r) {
    py::dict d;
    d["databases"] = r.databases;
    d["views"] = r.views;
    d["pairs"] = r.pairs;
    d["accepted"] = r.accepted;
    d["source_stability"] = r.source_stability;
    d["view_determination"] = r.view_determination;
    d["counterexample"] = r.counterexample;
    d["ok"] = r.ok();
    return d;
}

struct PyPutResult {
    bool accepted = false;
    std::optional<Database> sources;
    std::string reason, detail;
    std::vector<std::string> path;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Putback-based bidirectional transformations over in-memory relations.";

    PYBIND11_CONSTINIT static py::gil_safe_call_once_and_store<py::object> error;
    error.call_once_and_store_result([&]() { return py::object(py::exception<Error>(m, "PutbackError")); });
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const Error& e) {
            py::object exc = error.get_stored()(e.what());
            exc.attr("code") = std::string(to_string(e.code()));
            PyErr_SetObject(error.get_stored().ptr(), exc.ptr());
        }
    });

    py::class_<Database>(m, "Database")
        .def_static("load", [](const std::filesystem::path& dir) { return load_database(dir); }, py::arg("path"))
        .def("save", [](const Database& db, const std::filesystem::path& dir) { save_database(db, dir); }, py::arg("path"))
        .def("tables", [](const Database& db) {
            std::vector<std::string> out;
            for (const auto& [n, _] : db) out.push_back(n);
            return out;
        })
        .def("columns", [](const Database& db, const std::string& t) { return db.at(t).schema().attr_names(); })
        .def("key", [](const Database& db, const std::string& t) { return db.at(t).schema().key(); })
        .def("rows", [](const Database& db, const std::string& t) { return rows_of(db.at(t)); })
        .def("with_rows", [](const Database& db, const std::string& t, const py::iterable& rows) {
            std::vector<Relation> tables;
            for (const auto& [n, r] : db) tables.push_back(n == t ? relation_from(r.schema(), rows) : r);
            return Database(std::move(tables));
        }, py::arg("table"), py::arg("rows"), "Copy with one table's rows replaced.")
        .def("__eq__", [](const Database& a, const Database& b) { return a == b; });

    py::class_<Program>(m, "Program")
        .def_static("parse", [](const std::string& text) { return parse_program(text); }, py::arg("text"))
        .def_static("load", [](const std::filesystem::path& path) { return load_program(path); }, py::arg("path"))
        .def_property_readonly("view_name", &Program::view_name)
        .def("pretty", [](const Program& p) { return pretty_print(p); })
        .def("derive_sql", [](const Program& p, const Database* db) {
            if (!db) return render_sql(derive_query(p), p.view_name());
            SchemaMap s = db->schemas();
            return render_sql(derive_query(p), p.view_name(), &s);
        }, py::arg("db") = nullptr)
        .def("view_columns", [](const Program& p, const Database& db) {
            return view_schema(p, db.schemas()).attr_names();
        }, py::arg("db"))
        .def("validate", [](const Program& p, const Database& db) {
            std::vector<std::pair<std::string, std::string>> out;
            for (const auto& i : validate(p, db.schemas())) out.emplace_back(i.code, i.message);
            return out;
        }, py::arg("db"), "Static issues as (code, message) pairs; empty when the program is accepted.");

    py::class_<PyPutResult>(m, "PutResult")
        .def_readonly("accepted", &PyPutResult::accepted)
        .def_readonly("sources", &PyPutResult::sources)
        .def_readonly("reason", &PyPutResult::reason)
        .def_readonly("path", &PyPutResult::path)
        .def_readonly("detail", &PyPutResult::detail)
        .def("__bool__", [](const PyPutResult& r) { return r.accepted; });

    m.def("get", [](const Program& p, const Database& db) {
        Relation v = eval(derive_query(p), db);
        return py::make_tuple(v.schema().attr_names(), rows_of(v));
    }, py::arg("program"), py::arg("db"), "Derived view as (columns, rows).");

    m.def("put", [](const Program& p, const Database& db, const py::iterable& rows) {
        Relation view = relation_from(view_schema(p, db.schemas()), rows);
        PutOutcome o = put(p, db, view);
        PyPutResult r;
        r.accepted = o.accepted();
        if (o.accepted()) {
            r.sources = o.sources();
        } else {
            r.reason = std::string(to_string(o.rejection().reason));
            r.path = o.rejection().path;
            r.detail = o.rejection().detail;
        }
        return r;
    }, py::arg("program"), py::arg("db"), py::arg("view"),
          "Reflect a whole view back into the sources. Rows follow view_columns() order or are dicts.");

    m.def("check_roundtrip", [](const Program& p, const Database& db, std::size_t trials, std::uint64_t seed,
                                bool skip_validation) {
        return summary(check_roundtrip(p, db, trials, seed, skip_validation));
    }, py::arg("program"), py::arg("db"), py::arg("trials") = 200, py::arg("seed") = 0,
          py::arg("skip_validation") = false);

    m.def("check_validity", [](const Program& p, const Database& db, const std::filesystem::path& domain,
                               std::size_t max_rows, bool skip_validation) {
        ValidityOptions o;
        o.max_rows = max_rows;
        o.skip_validation = skip_validation;
        return summary(check_validity_exhaustive(p, db.schemas(), parse_domain_json(read_file(domain)), o));
    }, py::arg("program"), py::arg("db"), py::arg("domain"), py::arg("max_rows") = 2,
          py::arg("skip_validation") = false);

    m.def("distribute_payment", [](const std::filesystem::path& query, const Database& db, std::int64_t total_cents,
                                   const std::string& policy, const std::map<std::string, std::string>& owners) {
        PaymentPolicy pol;
        if (policy == "tuple") pol = PaymentPolicy::PerTuple;
        else if (policy == "lineage") pol = PaymentPolicy::PerLineage;
        else throw py::value_error("policy must be 'tuple' or 'lineage'");
        SchemaMap s = db.schemas();
        return distribute_payment(eval_with_lineage(parse_query_json(read_file(query), &s), db), total_cents, pol, owners);
    }, py::arg("query"), py::arg("db"), py::arg("total_cents"), py::arg("policy"), py::arg("owners"),
          "Cents per owner for a query answer, split by lineage.");

    m.def("run_scenario", [](const std::filesystem::path& path, bool full_recompute) {
        ScenarioOptions o;
        o.full_recompute = full_recompute;
        ScenarioResult r = run_scenario(path, o);
        py::dict d;
        d["trace"] = r.trace.lines;
        d["events"] = r.events;
        d["rejections"] = r.rejections;
        d["bookings_ok"] = r.bookings_ok;
        d["bookings_failed"] = r.bookings_failed;
        d["retried_bookings"] = r.retried_bookings;
        d["digest"] = digest(r.final_state);
        return d;
    }, py::arg("path"), py::arg("full_recompute") = false, "Runs a federation scenario; the trace is JSON lines.");
}
