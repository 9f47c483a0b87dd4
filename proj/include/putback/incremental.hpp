#pragma once

#include <cstddef>
#include <variant>

#include "putback/put.hpp"

namespace putback {

/// View delta w' with eval(q, apply(sources, w)) = apply_delta(eval(q, sources), w').
/// Tuples are in q's output column order. Derivations are counted per
/// operator and a view tuple is inserted or deleted only when its support
/// count crosses zero. `reads` (optional) accumulates source rows touched.
Delta inc_get(const Query& q, const Database& sources, const DeltaMap& w, std::size_t* reads = nullptr);

struct IncPutOutcome {
    std::variant<DeltaMap, Rejection> result;
    std::size_t source_rows_read = 0;
    /// True when some CHECK had to be re-evaluated in full. The delta rules
    /// cover every statement form, so this stays false; it is reported so
    /// callers can tell.
    bool full_recheck = false;

    bool accepted() const { return std::holds_alternative<DeltaMap>(result); }
    const DeltaMap& deltas() const { return std::get<DeltaMap>(result); }
    const Rejection& rejection() const { return std::get<Rejection>(result); }
};

/// Source delta u' with apply(sources, u') = put(p, sources, apply_delta(view, u)),
/// computed by routing u through the statement tree. Requires view =
/// eval(derive_query(p), sources). Rejections match those of put.
/// Throws Error(ValidationFailed), and MalformedDelta / MissingDeleteTarget /
/// KeyViolation when u does not apply to view.
IncPutOutcome inc_put(const Program& p, const Database& sources, const Relation& view, const Delta& u);

}  // namespace putback
