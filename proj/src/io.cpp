#include "putback/io.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "putback/parser.hpp"

namespace putback {

using nlohmann::json;

namespace {

[[noreturn]] void bad_schema(const std::string& msg) { throw Error(ErrorCode::InvalidSchema, msg); }

AttrType parse_type(const std::string& s) {
    if (s == "int") return AttrType::Int;
    if (s == "text") return AttrType::Text;
    bad_schema("unknown attribute type '" + s + "'");
}

}  // namespace

SchemaMap parse_schema_json(std::string_view text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& e) {
        bad_schema(e.what());
    }
    if (!doc.is_object() || !doc.contains("tables") || !doc["tables"].is_array()) bad_schema("expected {\"tables\":[...]}");
    SchemaMap out;
    try {
        for (const auto& t : doc["tables"]) {
            std::vector<Attr> attrs;
            for (const auto& a : t.at("attrs"))
                attrs.push_back(Attr{a.at("name").get<std::string>(), parse_type(a.at("type").get<std::string>()),
                                     a.value("nullable", false)});
            auto name = t.at("name").get<std::string>();
            Schema s(name, std::move(attrs), t.at("key").get<std::vector<std::string>>());
            s.validate_declared();
            if (!out.emplace(name, std::move(s)).second) bad_schema("table '" + name + "' declared twice");
        }
    } catch (const json::exception& e) {
        bad_schema(e.what());
    }
    return out;
}

std::string schema_to_json(const SchemaMap& schemas) {
    json tables = json::array();
    for (const auto& [name, s] : schemas) {
        json attrs = json::array();
        for (const auto& a : s.attrs())
            attrs.push_back({{"name", a.name}, {"type", a.type == AttrType::Int ? "int" : "text"}, {"nullable", a.nullable}});
        tables.push_back({{"name", name}, {"attrs", attrs}, {"key", s.key()}});
    }
    return json{{"tables", tables}}.dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// CSV

namespace {

struct Field {
    std::string text;
    bool quoted = false;
};

std::vector<std::vector<Field>> split_csv(std::string_view in) {
    std::vector<std::vector<Field>> records;
    std::vector<Field> rec;
    Field f;
    bool at_field_start = true;
    std::size_t i = 0;
    auto end_field = [&] {
        rec.push_back(std::move(f));
        f = Field{};
        at_field_start = true;
    };
    auto end_record = [&] {
        end_field();
        records.push_back(std::move(rec));
        rec.clear();
    };
    while (i < in.size()) {
        char c = in[i];
        if (at_field_start && c == '"') {
            f.quoted = true;
            at_field_start = false;
            ++i;
            while (true) {
                if (i >= in.size()) throw Error(ErrorCode::SyntaxError, "unterminated quoted CSV field");
                if (in[i] == '"') {
                    if (i + 1 < in.size() && in[i + 1] == '"') {
                        f.text += '"';
                        i += 2;
                        continue;
                    }
                    ++i;
                    break;
                }
                f.text += in[i++];
            }
            if (i < in.size() && in[i] != ',' && in[i] != '\n' && in[i] != '\r')
                throw Error(ErrorCode::SyntaxError, "text after closing quote in CSV");
            continue;
        }
        at_field_start = false;
        if (c == ',') {
            end_field();
            ++i;
        } else if (c == '\r' || c == '\n') {
            end_record();
            i += (c == '\r' && i + 1 < in.size() && in[i + 1] == '\n') ? 2 : 1;
        } else {
            f.text += c;
            ++i;
        }
    }
    if (!at_field_start || !rec.empty()) end_record();
    return records;
}

Value parse_value(const Field& f, const Attr& a) {
    if (!f.quoted && f.text.empty()) return Value::null();
    if (a.type == AttrType::Int) {
        std::int64_t v = 0;
        const char* b = f.text.data();
        const char* e = b + f.text.size();
        auto [p, ec] = std::from_chars(b, e, v);
        if (ec != std::errc() || p != e)
            throw Error(ErrorCode::TypeMismatch, "'" + f.text + "' is not an integer for '" + a.name + "'");
        return Value(v);
    }
    return Value(f.text);
}

std::string csv_field(const Value& v) {
    if (v.is_null()) return "";
    if (v.is_int()) return std::to_string(v.as_int());
    const std::string& s = v.as_text();
    if (!s.empty() && s.find_first_of(",\"\r\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

}  // namespace

Relation parse_csv(std::string_view text, const Schema& schema) {
    auto records = split_csv(text);
    if (records.empty()) throw Error(ErrorCode::SyntaxError, "CSV for '" + schema.name() + "' has no header");
    const auto& header = records.front();
    std::vector<std::size_t> pos;
    std::set<std::string> seen;
    for (const auto& h : header) {
        if (!seen.insert(h.text).second) throw Error(ErrorCode::DuplicateAttribute, "CSV header repeats '" + h.text + "'");
        pos.push_back(schema.require(h.text));
    }
    if (pos.size() != schema.arity())
        throw Error(ErrorCode::SchemaMismatch, "CSV header for '" + schema.name() + "' does not list every attribute");
    std::vector<Tuple> rows;
    for (std::size_t r = 1; r < records.size(); ++r) {
        const auto& rec = records[r];
        if (rec.size() == 1 && !rec[0].quoted && rec[0].text.empty()) continue;  // blank line
        if (rec.size() != pos.size())
            throw Error(ErrorCode::SyntaxError, "CSV record " + std::to_string(r + 1) + " of '" + schema.name() +
                                                    "' has " + std::to_string(rec.size()) + " fields");
        Tuple t(schema.arity());
        for (std::size_t i = 0; i < rec.size(); ++i) t[pos[i]] = parse_value(rec[i], schema.attrs()[pos[i]]);
        rows.push_back(std::move(t));
    }
    return Relation(schema, std::move(rows));
}

std::string to_csv(const Relation& r) {
    const Schema& s = r.schema();
    std::string out;
    for (std::size_t i = 0; i < s.arity(); ++i) out += (i ? "," : "") + s.attrs()[i].name;
    out += "\n";
    std::vector<const Tuple*> rows;
    for (const auto& t : r.rows()) rows.push_back(&t);
    std::stable_sort(rows.begin(), rows.end(), [&](const Tuple* a, const Tuple* b) { return r.key_of(*a) < r.key_of(*b); });
    for (const Tuple* t : rows) {
        for (std::size_t i = 0; i < t->size(); ++i) out += (i ? "," : "") + csv_field((*t)[i]);
        out += "\n";
    }
    return out;
}

// ---------------------------------------------------------------------------
// Files

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoError, "cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
    out << text;
    if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

Database load_database(const std::filesystem::path& dir) {
    SchemaMap schemas = parse_schema_json(read_file(dir / "schema.json"));
    Database db;
    for (const auto& [name, s] : schemas) {
        auto csv = dir / (name + ".csv");
        db.put(std::filesystem::exists(csv) ? parse_csv(read_file(csv), s) : Relation(s));
    }
    return db;
}

void save_database(const Database& db, const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw Error(ErrorCode::IoError, "cannot create " + dir.string());
    write_file(dir / "schema.json", schema_to_json(db.schemas()));
    for (const auto& [name, r] : db) write_file(dir / (name + ".csv"), to_csv(r));
}

Program load_program(const std::filesystem::path& path) { return parse_program(read_file(path)); }

// ---------------------------------------------------------------------------
// Query JSON

namespace {

[[noreturn]] void bad_query(const std::string& msg) { throw Error(ErrorCode::SyntaxError, "query JSON: " + msg); }

Value value_from(const json& j) {
    if (j.is_null()) return Value::null();
    if (j.is_number_integer()) return Value(j.get<std::int64_t>());
    if (j.is_string()) return Value(j.get<std::string>());
    bad_query("literal must be null, an integer or a string");
}

json value_to(const Value& v) {
    if (v.is_null()) return nullptr;
    if (v.is_int()) return v.as_int();
    return v.as_text();
}

CmpOp cmp_from(const std::string& s) {
    if (s == "=") return CmpOp::Eq;
    if (s == "<") return CmpOp::Lt;
    if (s == "<=") return CmpOp::Le;
    if (s == ">") return CmpOp::Gt;
    if (s == ">=") return CmpOp::Ge;
    bad_query("unknown comparison '" + s + "'");
}

std::vector<std::pair<std::string, std::string>> pairs_from(const json& j) {
    std::vector<std::pair<std::string, std::string>> out;
    for (const auto& p : j) {
        if (!p.is_array() || p.size() != 2) bad_query("expected [a, b] pairs");
        out.emplace_back(p[0].get<std::string>(), p[1].get<std::string>());
    }
    return out;
}

Query from_json(const json& j, const SchemaMap* schemas) {
    if (!j.is_object() || !j.contains("op")) bad_query("node without \"op\"");
    const auto op = j.at("op").get<std::string>();
    if (op == "base") return base(j.at("table").get<std::string>());
    if (op == "project") return project(from_json(j.at("input"), schemas), pairs_from(j.at("pairs")));
    if (op == "select") {
        Predicate pred;
        for (const auto& c : j.at("where")) {
            if (c.contains("left")) {
                pred.conjuncts.emplace_back(Predicate::AttrEq{c.at("left").get<std::string>(), c.at("right").get<std::string>()});
            } else if (c.value("is_null", false)) {
                pred.conjuncts.emplace_back(Predicate::IsNull{c.at("attr").get<std::string>()});
            } else {
                pred.conjuncts.emplace_back(Predicate::Compare{c.at("attr").get<std::string>(),
                                                               cmp_from(c.value("cmp", "=")), value_from(c.at("value"))});
            }
        }
        return select(from_json(j.at("input"), schemas), std::move(pred));
    }
    if (op == "join")
        return join(from_json(j.at("left"), schemas), from_json(j.at("right"), schemas), pairs_from(j.at("on")));
    if (op == "union") return union_query(from_json(j.at("left"), schemas), from_json(j.at("right"), schemas));
    if (op == "extend")
        return const_extend(from_json(j.at("input"), schemas), j.at("attr").get<std::string>(), value_from(j.at("value")));
    if (op == "sql") return parse_check_query(j.at("text").get<std::string>(), schemas);
    bad_query("unknown op '" + op + "'");
}

json to_json(const Query& q) {
    return std::visit(
        [](const auto& x) -> json {
            using T = std::decay_t<decltype(x)>;
            if constexpr (std::is_same_v<T, QueryExpr::Base>) {
                return {{"op", "base"}, {"table", x.table}};
            } else if constexpr (std::is_same_v<T, QueryExpr::ProjectRename>) {
                return {{"op", "project"}, {"input", to_json(x.input)}, {"pairs", x.pairs}};
            } else if constexpr (std::is_same_v<T, QueryExpr::Select>) {
                json where = json::array();
                for (const auto& atom : x.pred.conjuncts) {
                    if (const auto* c = std::get_if<Predicate::Compare>(&atom))
                        where.push_back({{"attr", c->attr}, {"cmp", std::string(to_string(c->op))}, {"value", value_to(c->literal)}});
                    else if (const auto* n = std::get_if<Predicate::IsNull>(&atom))
                        where.push_back({{"attr", n->attr}, {"is_null", true}});
                    else {
                        const auto& e = std::get<Predicate::AttrEq>(atom);
                        where.push_back({{"left", e.left}, {"right", e.right}});
                    }
                }
                return {{"op", "select"}, {"input", to_json(x.input)}, {"where", where}};
            } else if constexpr (std::is_same_v<T, QueryExpr::Join>) {
                return {{"op", "join"}, {"left", to_json(x.left)}, {"right", to_json(x.right)}, {"on", x.conds}};
            } else if constexpr (std::is_same_v<T, QueryExpr::Union>) {
                return {{"op", "union"}, {"left", to_json(x.left)}, {"right", to_json(x.right)}};
            } else {
                return {{"op", "extend"}, {"input", to_json(x.input)}, {"attr", x.attr}, {"value", value_to(x.literal)}};
            }
        },
        q->node);
}

}  // namespace

Query parse_query_json(std::string_view text, const SchemaMap* schemas) {
    try {
        return from_json(json::parse(text), schemas);
    } catch (const json::exception& e) {
        bad_query(e.what());
    }
}

std::string query_to_json(const Query& q) { return to_json(q).dump(); }

}  // namespace putback
