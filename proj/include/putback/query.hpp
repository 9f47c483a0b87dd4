#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>

#include "putback/ast.hpp"

namespace putback {

/// Type-checks q against the base schemas and returns its output schema
/// (named ""). Throws UnknownTable, UnknownAttribute, AmbiguousAttribute,
/// TypeMismatch, SchemaMismatch, DuplicateAttribute.
Schema infer_schema(const Query& q, const SchemaMap& schemas);

/// Values an attribute can take in q's output when that is statically
/// known (constant columns and unions of them), otherwise nullopt.
std::optional<std::set<Value>> known_values(const Query& q, const std::string& attr);

/// Set-semantics evaluation built from the relational-core operators.
Relation eval(const Query& q, const Database& db);

/// Source tuple identifier: table name plus key values.
struct Tid {
    std::string table;
    Tuple key;

    friend auto operator<=>(const Tid&, const Tid&) = default;
    friend bool operator==(const Tid&, const Tid&) = default;
};

/// "table:k1,k2" with raw (unquoted) key values.
std::string to_string(const Tid& tid);

struct LineageRelation {
    Schema schema;
    std::map<Tuple, std::set<Tid>> rows;

    Relation relation() const;
};

/// Which-provenance: each answer row carries every source tuple that
/// contributes to some derivation of it.
LineageRelation eval_with_lineage(const Query& q, const Database& db);

enum class PaymentPolicy { PerTuple, PerLineage };

/// Splits `total_cents` among data owners. PerTuple pays every answer row the
/// same and splits a row's share over the distinct owners in its lineage;
/// PerLineage pays every (row, tid) occurrence the same. Each owner gets the
/// floor of their exact share; leftover cents go one each to owners in
/// ascending name order. Throws EmptyAnswer, ValidationFailed (tid without owner).
std::map<std::string, std::int64_t> distribute_payment(const LineageRelation& lr, std::int64_t total_cents,
                                                       PaymentPolicy policy,
                                                       const std::map<std::string, std::string>& owner_of);

}  // namespace putback
