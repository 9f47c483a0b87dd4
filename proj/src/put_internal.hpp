#pragma once

// Internal machinery shared by put and inc_put: statement execution collects
// cell-level source writes plus deferred CHECKs, which are then merged,
// applied and verified.

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "putback/put.hpp"

namespace putback::detail {

struct RowWrite {
    bool remove = false;
    std::map<std::size_t, Value> cells;  // source column -> new value
};

/// Writes against one source table, by source key.
using TableWrites = std::map<Tuple, RowWrite>;

struct PendingCheck {
    Query query;
    const Relation* old_piece = nullptr;  // set only when executing a delta
    Relation new_piece;
    std::vector<std::string> path;
};

struct WriteSet {
    std::map<std::string, TableWrites> tables;
    std::vector<PendingCheck> checks;
    /// Pieces whose lifetime must cover the checks (old pieces of splits).
    std::vector<std::unique_ptr<Relation>> keep_alive;
};

struct RejectSignal {
    Rejection rejection;
};

[[noreturn]] void reject(RejectReason reason, std::vector<std::string> path, std::string detail);

struct ExecContext {
    const Database& sources;
    bool incremental = false;
    bool bypass = false;
    std::size_t reads = 0;
};

/// Runs `s` with `new_piece` bound to its view. In incremental mode
/// `old_piece` is the view before the edit and only touched keys are written.
/// Throws RejectSignal.
void exec(const Statement& s, const Relation* old_piece, const Relation& new_piece, std::vector<std::string> path,
          ExecContext& ctx, WriteSet& out);

/// Turns merged writes into per-table deltas. With `reads`, counts one read
/// per key lookup. Throws RejectSignal(NotNullViolation).
DeltaMap apply_writes(const Database& sources, const WriteSet& ws, std::size_t* reads);

}  // namespace putback::detail
