#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "putback/ast.hpp"

namespace putback {

/// {"tables":[{"name":..., "attrs":[{"name":..., "type":"int"|"text", "nullable":bool}], "key":[...]}]}
/// Every table is checked with Schema::validate_declared. Throws
/// Error(InvalidSchema) on malformed input.
SchemaMap parse_schema_json(std::string_view text);
std::string schema_to_json(const SchemaMap& schemas);

/// RFC 4180 CSV with a header row naming the attributes (any order). An
/// unquoted empty field is Null; a quoted empty field ("") is empty text.
Relation parse_csv(std::string_view text, const Schema& schema);
/// Header in schema order; rows sorted by key, then by the remaining columns.
std::string to_csv(const Relation& r);

/// A database directory holds schema.json plus one <table>.csv per table
/// (a missing CSV means an empty table).
Database load_database(const std::filesystem::path& dir);
void save_database(const Database& db, const std::filesystem::path& dir);

/// Reads a whole file; throws Error(IoError).
std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view text);

Program load_program(const std::filesystem::path& path);

/// JSON-encoded query tree:
///   {"op":"base","table":t}
///   {"op":"project","input":q,"pairs":[[src,dst],...]}
///   {"op":"select","input":q,"where":[{"attr":a,"cmp":"<","value":v} | {"attr":a,"is_null":true} | {"left":a,"right":b}]}
///   {"op":"join","left":q,"right":q,"on":[[a,b],...]}
///   {"op":"union","left":q,"right":q}
///   {"op":"extend","input":q,"attr":a,"value":v}
///   {"op":"sql","text":"SELECT ..."}
/// Throws Error(SyntaxError) on malformed input.
Query parse_query_json(std::string_view text, const SchemaMap* schemas = nullptr);
std::string query_to_json(const Query& q);

}  // namespace putback
