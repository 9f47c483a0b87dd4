#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include "putback/ast.hpp"

namespace putback {

/// A peer's answer to a proposed update of its sources.
class Policy {
public:
    enum class Kind { AlwaysAccept, RejectNonNullOverwrite, ProbabilisticReject };

    static Policy always_accept() { return Policy(Kind::AlwaysAccept, 0, 0); }
    /// Refuses to replace a non-null request_id (re-booking a taken car).
    static Policy reject_non_null_overwrite() { return Policy(Kind::RejectNonNullOverwrite, 0, 0); }
    /// Rejects each proposal with probability p, from a seeded generator.
    static Policy probabilistic_reject(std::uint64_t seed, double p) {
        return Policy(Kind::ProbabilisticReject, seed, p);
    }

    Kind kind() const { return kind_; }
    std::string name() const;

    /// `view_delta` is the change asked of the peer's view.
    bool accept(const Database& before, const Database& after, const Delta& view_delta, const Schema& view_schema);

private:
    Policy(Kind k, std::uint64_t seed, double p) : kind_(k), p_(p), rng_(seed) {}

    Kind kind_;
    double p_;
    std::mt19937_64 rng_;
};

struct Peer {
    int id = 0;
    Database sources;
    Program controller;
    Query query;  // derived from controller
    Policy policy = Policy::always_accept();
};

struct Mediator {
    std::map<int, Relation> peer_views;  // by peer id; named after each controller's view
    Program integrator;
    Query query;
    Relation integrated;

    /// Peer views as the integrator's source database.
    Database sources() const;
};

struct Federation {
    std::map<int, Peer> peers;
    Mediator mediator;
    std::map<std::string, std::vector<std::string>> area_adjacency;
    bool full_recompute = false;
    std::size_t steps = 0;
    std::size_t source_rows_read = 0;  // by incremental puts and view maintenance

    /// Builds peer views and the integrated view from the peers' sources.
    /// Throws Error(UnknownPeer) when the integrator reads a table no peer exports.
    static Federation assemble(std::vector<Peer> peers, Program integrator,
                               std::map<std::string, std::vector<std::string>> adjacency);

    const Peer& peer(int id) const;
    Peer& peer(int id);
};

struct SourceUpdate {
    int peer = 0;
    std::string table;
    Delta delta;
};

struct ViewUpdate {
    Delta delta;  // on the integrated view
};

struct BookingRequest {
    std::string rid;
    std::string pickup_area;
    std::size_t k = 1;
};

using Event = std::variant<SourceUpdate, ViewUpdate, BookingRequest>;

/// One JSON object per line. Lines carry view-level rows and source-level
/// counts only, never source tuples.
struct Trace {
    std::vector<std::string> lines;
    std::size_t rejections = 0;  // rejected view-update attempts
    std::size_t bookings_ok = 0;
    std::size_t bookings_failed = 0;
    std::size_t retried_bookings = 0;

    std::string text() const;
};

struct Candidate {
    std::int64_t company_id = 0;
    std::string vehicle_id;
    int score = 0;

    friend bool operator==(const Candidate&, const Candidate&) = default;
};

/// Unoccupied cars ranked by 10 - (hops from the pickup area), nearest
/// first, ties by (company_id, vehicle_id); unreachable areas are left out.
/// Throws Error(UnknownArea) when the pickup area is not in the adjacency map.
std::vector<Candidate> candidate_taxis(const Federation& fed, const std::string& pickup_area, std::size_t k);

/// Processes one event and appends its trace lines. A rejected view update
/// leaves every tier unchanged. Throws UnknownPeer, UnknownTable,
/// MalformedDelta, MissingDeleteTarget.
Trace step(Federation& fed, const Event& e);

/// Recomputes every view from scratch; throws Error(InvariantViolation) on drift.
void check_quiescence(const Federation& fed);

/// FNV-1a 64 over the canonical CSV form of every tier.
std::string digest(const Federation& fed);

struct ScenarioResult {
    Trace trace;
    std::size_t events = 0;
    std::size_t rejections = 0;       // rejected view-update attempts
    std::size_t bookings_ok = 0;
    std::size_t bookings_failed = 0;
    std::size_t retried_bookings = 0;  // succeeded after at least one rejection
    std::size_t source_rows_read = 0;
    Federation final_state;
};

struct ScenarioOptions {
    bool full_recompute = false;
    /// Re-derive every view after each event and compare (InvariantViolation).
    bool check_invariants = true;
};

/// Loads and runs a scenario file (paths inside are relative to it). Besides
/// quiescence, checks after every event that rejected updates left the state
/// untouched and that no trace line carries a `loc` value of any peer.
/// Throws Error(ScenarioParseError) and Error(InvariantViolation).
ScenarioResult run_scenario(const std::filesystem::path& file, ScenarioOptions opts = {});

}  // namespace putback
