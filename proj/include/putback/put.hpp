#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "putback/ast.hpp"

namespace putback {

enum class RejectReason {
    CheckFailed,
    ViewNotJoinConsistent,
    RowNotCovered,
    NotNullViolation,
    ConflictingWrites,
    KeyViolation,
};

std::string_view to_string(RejectReason r);

struct Rejection {
    RejectReason reason = RejectReason::CheckFailed;
    /// Statements from the root down to the one that rejected, e.g.
    /// {"VSPLIT peer1_public", "branch 2 (vehicle_id, current_area)", "CHECK peer1_public"}.
    std::vector<std::string> path;
    std::string detail;

    friend bool operator==(const Rejection&, const Rejection&) = default;
};

std::string to_string(const Rejection& r);

struct PutOutcome {
    std::variant<Database, Rejection> result;
    /// Source rows scanned or looked up while computing the outcome.
    std::size_t source_rows_read = 0;

    bool accepted() const { return std::holds_alternative<Database>(result); }
    const Database& sources() const { return std::get<Database>(result); }
    const Rejection& rejection() const { return std::get<Rejection>(result); }
};

struct PutOptions {
    /// Run without the validate() gate. Only meant for exercising broken
    /// programs (e.g. an UPDATE that does not cover the source key).
    bool skip_validation = false;
};

/// Executes the update strategy. The view's columns are matched by name.
/// Throws Error(ValidationFailed) when validate() reports problems (unless
/// skipped) and Error(SchemaMismatch) when the view does not have the
/// program's view attributes.
PutOutcome put(const Program& p, const Database& sources, const Relation& view, PutOptions opts = {});

struct ValidationIssue {
    std::string code;
    std::string message;

    friend bool operator==(const ValidationIssue&, const ValidationIssue&) = default;
};

/// Static checks; an empty result means the program is accepted. With
/// `view` given, the derived view schema must also agree with it (names and
/// types) and HSPLIT literals are typed against it.
///
/// Codes: UnknownTable, UnknownAttribute, DuplicateAttribute, TypeMismatch,
/// SchemaMismatch, AmbiguousAttribute, ViewNameMismatch, KeyNotCovered,
/// AttrNotCovered, BranchAttrMismatch, TooFewBranches, LiteralTypeMismatch.
std::vector<ValidationIssue> validate(const Program& p, const SchemaMap& schemas,
                                      const std::optional<Schema>& view = std::nullopt);

}  // namespace putback
