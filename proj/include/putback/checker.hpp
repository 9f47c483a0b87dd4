#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "putback/put.hpp"

namespace putback {

/// Random edits of a view: overwrite one cell, insert a row, or delete a row.
/// Candidate values for an attribute come from the values already seen in
/// it, two fresh ones, and Null when nullable. Uses only raw engine output so
/// a seed produces the same edits on every platform.
class ViewEditor {
public:
    ViewEditor(const Relation& seed_view, const Database& sources);

    Relation edit(const Relation& view, std::mt19937_64& rng) const;
    /// Same edit as a delta against `view` (empty when the edit is a no-op).
    Delta edit_delta(const Relation& view, std::mt19937_64& rng) const;

private:
    std::vector<std::vector<Value>> pool_;  // per view column
};

/// Uniform index in [0, n) from one draw.
std::size_t pick(std::mt19937_64& rng, std::size_t n);

/// Generator for trial `trial` of a run seeded with `seed`.
std::mt19937_64 trial_rng(std::uint64_t seed, std::uint64_t trial);

struct LawFailure {
    std::string law;  // "GetPut" or "PutGet"
    std::uint64_t trial = 0;
    Database sources;
    std::optional<Relation> view;
    std::string detail;
};

struct RoundtripReport {
    std::uint64_t seed = 0;
    std::size_t attempts = 0;  // edits tried
    std::size_t accepted = 0;  // edits put accepted (laws checked on these)
    std::size_t rejected = 0;
    std::map<std::string, std::size_t> rejections;  // by reason
    std::vector<LawFailure> failures;                // minimized

    bool ok() const { return failures.empty(); }
};

/// Runs trials until `trials` edits have been accepted (or 20x as many were
/// tried). Trial i starts from `db`, applies up to two accepted warm-up edits,
/// then checks GetPut on the reached state and PutGet on one more edit, all
/// drawn from trial_rng(seed, i). Throws Error(ValidationFailed) unless
/// `skip_validation` is set.
RoundtripReport check_roundtrip(const Program& p, const Database& db, std::size_t trials, std::uint64_t seed,
                                bool skip_validation = false);

/// Replays one trial; returns its failure, if any (unminimized).
std::optional<LawFailure> replay_trial(const Program& p, const Database& db, std::uint64_t seed, std::uint64_t trial);

/// Finite value sets for exhaustive enumeration.
///   {"attr": [values...], "table.attr": [values...], "@fixed": {"table": [[row]...]}}
/// A "table.attr" entry wins over a bare "attr" one; the view's attributes are
/// looked up under the view name. Null must be listed explicitly.
struct Domain {
    std::map<std::string, std::vector<Value>> values;
    std::map<std::string, std::vector<Tuple>> fixed;

    const std::vector<Value>* lookup(const std::string& table, const std::string& attr) const;
};

Domain parse_domain_json(std::string_view text);

struct ValidityReport {
    std::size_t databases = 0;  // source states on which the view is defined
    std::size_t views = 0;
    std::size_t pairs = 0;
    std::size_t accepted = 0;
    bool source_stability = true;
    bool view_determination = true;
    std::string counterexample;  // human-readable, first failure found

    bool ok() const { return source_stability && view_determination; }
};

struct ValidityOptions {
    std::size_t max_rows = 2;
    std::size_t bound = 1'000'000;  // max (source, view) pairs
    bool skip_validation = false;
};

/// Enumerates every source database and view over the domain (relations of
/// at most max_rows rows) and checks SourceStability and ViewDetermination.
/// Throws Error(DomainTooLarge) above the bound, Error(InvalidSchema) when an
/// attribute has no domain.
ValidityReport check_validity_exhaustive(const Program& p, const SchemaMap& schemas, const Domain& domain,
                                         ValidityOptions opts = {});

/// Compact text of a database for reports.
std::string describe(const Database& db);
std::string describe(const Relation& r);

}  // namespace putback
