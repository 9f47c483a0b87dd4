#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "putback/error.hpp"

namespace putback {

/// A single attribute value: Null, a 64-bit integer, or UTF-8 text.
///
/// The total order (Null < Integer < Text) exists only to make output
/// deterministic. Predicates never use it for Null: see satisfies().
class Value {
public:
    Value() = default;
    Value(std::int64_t v) : data_(v) {}
    Value(int v) : data_(static_cast<std::int64_t>(v)) {}
    Value(std::string v) : data_(std::move(v)) {}
    Value(const char* v) : data_(std::string(v)) {}

    static Value null() { return Value(); }

    bool is_null() const { return std::holds_alternative<std::monostate>(data_); }
    bool is_int() const { return std::holds_alternative<std::int64_t>(data_); }
    bool is_text() const { return std::holds_alternative<std::string>(data_); }

    std::int64_t as_int() const { return std::get<std::int64_t>(data_); }
    const std::string& as_text() const { return std::get<std::string>(data_); }

    friend bool operator==(const Value&, const Value&) = default;
    friend std::strong_ordering operator<=>(const Value& a, const Value& b) { return a.data_ <=> b.data_; }

private:
    std::variant<std::monostate, std::int64_t, std::string> data_;
};

/// Display form used in messages and reports: null, 42, 'text'.
std::string to_literal(const Value& v);

using Tuple = std::vector<Value>;

std::string to_literal(const Tuple& t);

/// Null is only produced by a constant `null` column and unifies with
/// either real type when such a column meets another in a union.
enum class AttrType { Int, Text, Null };

std::string_view to_string(AttrType t);

struct Attr {
    std::string name;
    AttrType type = AttrType::Text;
    bool nullable = false;

    friend bool operator==(const Attr&, const Attr&) = default;
};

class Schema {
public:
    Schema() = default;
    /// Throws DuplicateAttribute / InvalidSchema on a malformed attr list or key.
    Schema(std::string name, std::vector<Attr> attrs, std::vector<std::string> key);

    /// Schema whose key is every attribute.
    static Schema all_key(std::string name, std::vector<Attr> attrs);

    const std::string& name() const { return name_; }
    const std::vector<Attr>& attrs() const { return attrs_; }
    const std::vector<std::string>& key() const { return key_; }
    std::size_t arity() const { return attrs_.size(); }

    std::optional<std::size_t> index_of(const std::string& attr) const;
    /// Throws UnknownAttribute.
    std::size_t require(const std::string& attr) const;
    const Attr& attr(const std::string& name) const { return attrs_[require(name)]; }
    bool has(const std::string& attr) const { return index_of(attr).has_value(); }
    std::vector<std::string> attr_names() const;
    const std::vector<std::size_t>& key_indices() const { return key_idx_; }
    bool key_is_all_attrs() const { return key_.size() == attrs_.size(); }

    Schema renamed(std::string name) const;
    Schema with_key(std::vector<std::string> key) const;

    /// Extra rules for tables declared in a schema file: key attrs must be
    /// non-nullable and no attribute may have the Null type.
    void validate_declared() const;

    /// Same attribute names, order and types (nullability and key ignored).
    bool same_shape(const Schema& other) const;

    friend bool operator==(const Schema&, const Schema&) = default;

private:
    std::string name_;
    std::vector<Attr> attrs_;
    std::vector<std::string> key_;
    std::vector<std::size_t> key_idx_;
};

/// Schema-conforming, key-unique set of tuples. Immutable once built.
class Relation {
public:
    Relation() = default;
    explicit Relation(Schema schema);
    /// Validates arity, types and nullability of every row, dedups, and
    /// throws KeyViolation if two distinct rows share a key.
    Relation(Schema schema, std::vector<Tuple> rows);
    Relation(Schema schema, std::set<Tuple> rows);

    const Schema& schema() const { return schema_; }
    const std::string& name() const { return schema_.name(); }
    const std::set<Tuple>& rows() const { return rows_; }
    std::size_t size() const { return rows_.size(); }
    bool empty() const { return rows_.empty(); }
    bool contains(const Tuple& row) const { return rows_.count(row) != 0; }

    Tuple key_of(const Tuple& row) const;
    const Tuple* find_by_key(const Tuple& key) const;

    Relation renamed(std::string name) const;
    Relation with_key(std::vector<std::string> key) const;

    /// Shape (see Schema::same_shape) and rows equal.
    friend bool operator==(const Relation& a, const Relation& b) {
        return a.schema_.same_shape(b.schema_) && a.rows_ == b.rows_;
    }

private:
    void index_rows();

    Schema schema_;
    std::set<Tuple> rows_;
    std::map<Tuple, Tuple> by_key_;
};

/// Table name -> relation; each relation's schema name equals its map key.
class Database {
public:
    Database() = default;
    explicit Database(std::vector<Relation> tables);

    void put(Relation r);
    /// Throws UnknownTable.
    const Relation& at(const std::string& name) const;
    const Relation* find(const std::string& name) const;
    bool contains(const std::string& name) const { return tables_.count(name) != 0; }
    std::size_t size() const { return tables_.size(); }

    std::map<std::string, Schema> schemas() const;

    auto begin() const { return tables_.begin(); }
    auto end() const { return tables_.end(); }

    friend bool operator==(const Database&, const Database&) = default;

private:
    std::map<std::string, Relation> tables_;
};

using SchemaMap = std::map<std::string, Schema>;

/// Insert/delete sets against one relation. An update of a row is a delete of
/// the old tuple plus an insert of the new one.
struct Delta {
    std::set<Tuple> inserts;
    std::set<Tuple> deletes;

    bool empty() const { return inserts.empty() && deletes.empty(); }
    /// Drops tuples present in both sets (a delete-then-reinsert is a no-op).
    void normalize();

    friend bool operator==(const Delta&, const Delta&) = default;
};

using DeltaMap = std::map<std::string, Delta>;

// ---------------------------------------------------------------------------
// Predicates

enum class CmpOp { Eq, Lt, Le, Gt, Ge };

std::string_view to_string(CmpOp op);

struct Predicate {
    struct Compare {
        std::string attr;
        CmpOp op = CmpOp::Eq;
        Value literal;
        friend bool operator==(const Compare&, const Compare&) = default;
    };
    struct IsNull {
        std::string attr;
        friend bool operator==(const IsNull&, const IsNull&) = default;
    };
    struct AttrEq {
        std::string left;
        std::string right;
        friend bool operator==(const AttrEq&, const AttrEq&) = default;
    };
    using Atom = std::variant<Compare, IsNull, AttrEq>;

    /// Conjunction; empty means true.
    std::vector<Atom> conjuncts;

    friend bool operator==(const Predicate&, const Predicate&) = default;
};

/// Null fails every comparison (including Null = Null); it only satisfies IS NULL.
bool compare_values(const Value& lhs, CmpOp op, const Value& rhs);

/// Throws UnknownAttribute / TypeMismatch.
void check_predicate(const Predicate& pred, const Schema& schema);
bool satisfies(const Predicate& pred, const Schema& schema, const Tuple& row);

// ---------------------------------------------------------------------------
// Operators. All are pure; results are fresh relations named "".

using RenamePairs = std::vector<std::pair<std::string, std::string>>;
using JoinConds = std::vector<std::pair<std::string, std::string>>;

/// Result key: image of the input key if every key attr is kept, otherwise
/// all result attrs.
Relation project_rename(const Relation& r, const RenamePairs& pairs);
Schema project_rename_schema(const Schema& s, const RenamePairs& pairs);

/// Right attrs equated to a same-named left attr appear once. Null never
/// matches in a join condition.
Relation equi_join(const Relation& left, const Relation& right, const JoinConds& conds);
Schema equi_join_schema(const Schema& left, const Schema& right, const JoinConds& conds);

/// Columns are aligned by name. Key is the full attr set unless `key` is given.
Relation union_of(const Relation& a, const Relation& b, std::optional<std::vector<std::string>> key = std::nullopt);
Schema union_schema(const Schema& a, const Schema& b, std::optional<std::vector<std::string>> key = std::nullopt);

Relation select_rows(const Relation& r, const Predicate& pred);

/// Appends a constant column named `attr`.
Relation const_extend(const Relation& r, const std::string& attr, const Value& literal);
Schema const_extend_schema(const Schema& s, const std::string& attr, const Value& literal);

/// Throws MissingDeleteTarget, KeyViolation, MalformedDelta (overlapping sets).
Relation apply_delta(const Relation& r, const Delta& d);
/// Throws SchemaMismatch.
Delta diff(const Relation& before, const Relation& after);

Database apply_deltas(const Database& db, const DeltaMap& deltas);
DeltaMap diff(const Database& before, const Database& after);

/// Projects onto the given attribute order (identity renaming).
Relation reorder(const Relation& r, const std::vector<std::string>& names);

/// Type of a literal, Null for a null literal.
AttrType type_of(const Value& v);
bool value_fits(const Attr& attr, const Value& v);

}  // namespace putback
