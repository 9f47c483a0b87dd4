#include "putback/federation.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <set>

#include "json.hpp"
#include "putback/derive.hpp"
#include "putback/incremental.hpp"
#include "putback/io.hpp"
#include "putback/query.hpp"

namespace putback {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Policies

std::string Policy::name() const {
    switch (kind_) {
        case Kind::AlwaysAccept: return "always_accept";
        case Kind::RejectNonNullOverwrite: return "reject_non_null_overwrite";
        case Kind::ProbabilisticReject: return "probabilistic_reject";
    }
    return "unknown";
}

bool Policy::accept(const Database&, const Database&, const Delta& view_delta, const Schema& view_schema) {
    switch (kind_) {
        case Kind::AlwaysAccept: return true;
        case Kind::RejectNonNullOverwrite: {
            auto rid = view_schema.index_of("request_id");
            if (!rid) return true;
            std::map<Tuple, Value> old_rid;
            for (const auto& row : view_delta.deletes) {
                Tuple k;
                for (auto i : view_schema.key_indices()) k.push_back(row[i]);
                old_rid[k] = row[*rid];
            }
            for (const auto& row : view_delta.inserts) {
                Tuple k;
                for (auto i : view_schema.key_indices()) k.push_back(row[i]);
                auto it = old_rid.find(k);
                if (it != old_rid.end() && !it->second.is_null() && it->second != row[*rid]) return false;
            }
            return true;
        }
        case Kind::ProbabilisticReject: {
            // 53 high bits as a double in [0, 1); std distributions differ
            // across standard libraries.
            const double u = static_cast<double>(rng_() >> 11) * 0x1.0p-53;
            return !(u < p_);
        }
    }
    return true;
}

// ---------------------------------------------------------------------------
// Federation state

Database Mediator::sources() const {
    Database db;
    for (const auto& [_, v] : peer_views) db.put(v);
    return db;
}

const Peer& Federation::peer(int id) const {
    auto it = peers.find(id);
    if (it == peers.end()) throw Error(ErrorCode::UnknownPeer, "no peer " + std::to_string(id));
    return it->second;
}

Peer& Federation::peer(int id) {
    auto it = peers.find(id);
    if (it == peers.end()) throw Error(ErrorCode::UnknownPeer, "no peer " + std::to_string(id));
    return it->second;
}

Federation Federation::assemble(std::vector<Peer> peers, Program integrator,
                                std::map<std::string, std::vector<std::string>> adjacency) {
    Federation fed;
    fed.area_adjacency = std::move(adjacency);
    for (auto& p : peers) {
        p.query = derive_query(p.controller);
        const int id = p.id;
        fed.mediator.peer_views[id] = eval(p.query, p.sources).renamed(p.controller.view_name());
        if (!fed.peers.emplace(id, std::move(p)).second)
            throw Error(ErrorCode::ScenarioParseError, "peer " + std::to_string(id) + " declared twice");
    }
    fed.mediator.integrator = std::move(integrator);
    fed.mediator.query = derive_query(fed.mediator.integrator);
    Database med = fed.mediator.sources();
    for (const auto& t : referenced_tables(fed.mediator.query))
        if (!med.contains(t)) throw Error(ErrorCode::UnknownPeer, "no peer exports '" + t + "'");
    fed.mediator.integrated = eval(fed.mediator.query, med).renamed(fed.mediator.integrator.view_name());
    return fed;
}

namespace {

int peer_of_view(const Federation& fed, const std::string& view) {
    for (const auto& [id, p] : fed.peers)
        if (p.controller.view_name() == view) return id;
    throw Error(ErrorCode::UnknownPeer, "no peer exports '" + view + "'");
}

json value_json(const Value& v) {
    if (v.is_null()) return nullptr;
    if (v.is_int()) return v.as_int();
    return v.as_text();
}

json rows_json(const std::set<Tuple>& rows) {
    json out = json::array();
    for (const auto& t : rows) {
        json r = json::array();
        for (const auto& v : t) r.push_back(value_json(v));
        out.push_back(std::move(r));
    }
    return out;
}

json delta_json(const Delta& d) { return {{"inserts", rows_json(d.inserts)}, {"deletes", rows_json(d.deletes)}}; }

/// Source deltas are reported as per-table counts only.
json counts_json(const DeltaMap& dm) {
    json out = json::object();
    for (const auto& [t, d] : dm) out[t] = {{"inserts", d.inserts.size()}, {"deletes", d.deletes.size()}};
    return out;
}

void emit(Trace& tr, Federation& fed, json line) {
    line["step"] = fed.steps;
    tr.lines.push_back(line.dump());
}

Delta minimal(Delta d) {
    d.normalize();
    return d;
}

/// Effect of a source delta on one peer's view.
Delta peer_view_delta(Federation& fed, Peer& peer, const DeltaMap& w) {
    if (fed.full_recompute) {
        Database next = apply_deltas(peer.sources, w);
        return diff(fed.mediator.peer_views.at(peer.id), eval(peer.query, next).renamed(peer.controller.view_name()));
    }
    return inc_get(peer.query, peer.sources, w, &fed.source_rows_read);
}

Delta integrated_delta(Federation& fed, const DeltaMap& w) {
    Database med = fed.mediator.sources();
    if (fed.full_recompute) {
        Database next = apply_deltas(med, w);
        return diff(fed.mediator.integrated, eval(fed.mediator.query, next).renamed(fed.mediator.integrated.name()));
    }
    return inc_get(fed.mediator.query, med, w);
}

struct Attempt {
    bool committed = false;
    std::string by;      // "mediator" or "peer N"
    std::string reason;  // RejectReason or "PolicyReject"
};

struct PeerProposal {
    int peer;
    Delta view_delta;
    DeltaMap source_deltas;
};

/// Two-phase view update: every tier computes its part without touching the
/// state; only if all accept is anything applied.
Attempt try_view_update(Federation& fed, const Delta& raw, json& line) {
    const Delta delta = minimal(raw);
    Attempt a;
    Database med = fed.mediator.sources();
    const Relation& integrated = fed.mediator.integrated;
    const Relation next_integrated = apply_delta(integrated, delta);

    DeltaMap per_view;
    if (fed.full_recompute) {
        PutOutcome o = put(fed.mediator.integrator, med, next_integrated);
        if (!o.accepted()) {
            a.by = "mediator";
            a.reason = std::string(to_string(o.rejection().reason));
            return a;
        }
        per_view = diff(med, o.sources());
    } else {
        IncPutOutcome o = inc_put(fed.mediator.integrator, med, integrated, delta);
        if (!o.accepted()) {
            a.by = "mediator";
            a.reason = std::string(to_string(o.rejection().reason));
            return a;
        }
        per_view = o.deltas();
    }

    std::vector<PeerProposal> proposals;
    for (const auto& [view, d] : per_view) {
        if (d.empty()) continue;
        Peer& peer = fed.peer(peer_of_view(fed, view));
        const Relation& old_view = fed.mediator.peer_views.at(peer.id);
        PeerProposal prop{peer.id, d, {}};
        std::optional<Rejection> rej;
        if (fed.full_recompute) {
            PutOutcome o = put(peer.controller, peer.sources, apply_delta(old_view, d));
            if (o.accepted()) prop.source_deltas = diff(peer.sources, o.sources());
            else rej = o.rejection();
        } else {
            IncPutOutcome o = inc_put(peer.controller, peer.sources, old_view, d);
            fed.source_rows_read += o.source_rows_read;
            if (o.accepted()) prop.source_deltas = o.deltas();
            else rej = o.rejection();
        }
        if (rej) {
            a.by = "peer " + std::to_string(peer.id);
            a.reason = std::string(to_string(rej->reason));
            return a;
        }
        Database after = apply_deltas(peer.sources, prop.source_deltas);
        if (!peer.policy.accept(peer.sources, after, d, old_view.schema())) {
            a.by = "peer " + std::to_string(peer.id);
            a.reason = "PolicyReject";
            return a;
        }
        proposals.push_back(std::move(prop));
    }

    // Commit.
    json peers = json::object();
    for (auto& prop : proposals) {
        Peer& peer = fed.peer(prop.peer);
        peer.sources = apply_deltas(peer.sources, prop.source_deltas);
        Relation& pv = fed.mediator.peer_views.at(prop.peer);
        pv = apply_delta(pv, prop.view_delta);
        peers[std::to_string(prop.peer)] = {{"view_delta", delta_json(prop.view_delta)},
                                            {"source_changes", counts_json(prop.source_deltas)}};
    }
    fed.mediator.integrated = next_integrated;
    line["peers"] = peers;
    a.committed = true;
    return a;
}

std::optional<std::size_t> column(const Schema& s, const std::string& name) { return s.index_of(name); }

}  // namespace

std::string Trace::text() const {
    std::string out;
    for (const auto& l : lines) out += l + "\n";
    return out;
}

std::vector<Candidate> candidate_taxis(const Federation& fed, const std::string& pickup_area, std::size_t k) {
    if (k == 0) throw Error(ErrorCode::ValidationFailed, "K must be at least 1");
    // Undirected hop distances from the pickup area.
    std::map<std::string, std::set<std::string>> adj;
    for (const auto& [a, ns] : fed.area_adjacency) {
        adj[a];
        for (const auto& b : ns) {
            adj[a].insert(b);
            adj[b].insert(a);
        }
    }
    if (!adj.count(pickup_area)) throw Error(ErrorCode::UnknownArea, "unknown area '" + pickup_area + "'");
    std::map<std::string, int> hops{{pickup_area, 0}};
    std::deque<std::string> queue{pickup_area};
    while (!queue.empty()) {
        std::string a = queue.front();
        queue.pop_front();
        for (const auto& b : adj[a])
            if (hops.emplace(b, hops[a] + 1).second) queue.push_back(b);
    }

    const Relation& iv = fed.mediator.integrated;
    const Schema& s = iv.schema();
    auto ci = column(s, "company_id"), vi = column(s, "vehicle_id"), ai = column(s, "current_area"),
         ri = column(s, "request_id");
    if (!ci || !vi || !ai || !ri)
        throw Error(ErrorCode::SchemaMismatch, "integrated view lacks company_id/vehicle_id/current_area/request_id");
    std::vector<Candidate> out;
    for (const auto& row : iv.rows()) {
        if (!row[*ri].is_null() || !row[*ai].is_text() || !row[*ci].is_int() || !row[*vi].is_text()) continue;
        auto h = hops.find(row[*ai].as_text());
        if (h == hops.end()) continue;
        out.push_back(Candidate{row[*ci].as_int(), row[*vi].as_text(), 10 - h->second});
    }
    std::sort(out.begin(), out.end(), [](const Candidate& a, const Candidate& b) {
        if (a.score != b.score) return a.score > b.score;
        if (a.company_id != b.company_id) return a.company_id < b.company_id;
        return a.vehicle_id < b.vehicle_id;
    });
    if (out.size() > k) out.resize(k);
    return out;
}

Trace step(Federation& fed, const Event& e) {
    Trace tr;
    ++fed.steps;
    if (const auto* su = std::get_if<SourceUpdate>(&e)) {
        Peer& peer = fed.peer(su->peer);
        if (!peer.sources.contains(su->table))
            throw Error(ErrorCode::UnknownTable, "peer " + std::to_string(su->peer) + " has no table '" + su->table + "'");
        Delta d = su->delta;
        for (const auto& t : d.inserts)
            if (d.deletes.count(t)) throw Error(ErrorCode::MalformedDelta, "row both inserted and deleted");
        DeltaMap w{{su->table, d}};
        Database next = apply_deltas(peer.sources, w);  // validates the delta
        Delta pv = peer_view_delta(fed, peer, w);
        const std::string view = peer.controller.view_name();
        Delta iv = integrated_delta(fed, DeltaMap{{view, pv}});
        peer.sources = std::move(next);
        Relation& copy = fed.mediator.peer_views.at(peer.id);
        copy = apply_delta(copy, pv);
        fed.mediator.integrated = apply_delta(fed.mediator.integrated, iv);
        emit(tr, fed,
             {{"event", "source_update"},
              {"peer", su->peer},
              {"source_changes", counts_json(w)},
              {"peer_view_delta", delta_json(pv)},
              {"integrated_delta", delta_json(iv)}});
    } else if (const auto* vu = std::get_if<ViewUpdate>(&e)) {
        json line{{"event", "view_update"}, {"delta", delta_json(vu->delta)}};
        Attempt a = try_view_update(fed, vu->delta, line);
        line["outcome"] = a.committed ? "committed" : "rejected";
        if (!a.committed) {
            line["rejected_by"] = a.by;
            line["reason"] = a.reason;
            ++tr.rejections;
        }
        emit(tr, fed, std::move(line));
    } else {
        const auto& b = std::get<BookingRequest>(e);
        auto cands = candidate_taxis(fed, b.pickup_area, b.k);
        json list = json::array();
        for (const auto& c : cands) list.push_back({{"company_id", c.company_id}, {"vehicle_id", c.vehicle_id}, {"score", c.score}});
        emit(tr, fed, {{"event", "booking_request"}, {"rid", b.rid}, {"pickup_area", b.pickup_area}, {"K", b.k}, {"candidates", list}});

        const Relation& iv = fed.mediator.integrated;
        const Schema& s = iv.schema();
        const std::size_t ci = s.require("company_id"), vi = s.require("vehicle_id"), ri = s.require("request_id");
        std::size_t failures = 0;
        bool booked = false;
        for (const auto& c : cands) {
            const Tuple* row = nullptr;
            for (const auto& t : fed.mediator.integrated.rows())
                if (t[ci] == Value(c.company_id) && t[vi] == Value(c.vehicle_id)) row = &t;
            if (!row) continue;
            Tuple updated = *row;
            updated[ri] = Value(b.rid);
            Delta d;
            d.deletes.insert(*row);
            d.inserts.insert(updated);
            json line{{"event", "booking_attempt"}, {"rid", b.rid}, {"company_id", c.company_id}, {"vehicle_id", c.vehicle_id}};
            Attempt a = try_view_update(fed, d, line);
            line["outcome"] = a.committed ? "SUCCESS" : "FAIL";
            if (!a.committed) {
                line["rejected_by"] = a.by;
                line["reason"] = a.reason;
                ++tr.rejections;
                ++failures;
            }
            emit(tr, fed, std::move(line));
            if (a.committed) {
                booked = true;
                break;
            }
        }
        if (booked) {
            ++tr.bookings_ok;
            if (failures) ++tr.retried_bookings;
        } else {
            ++tr.bookings_failed;
            emit(tr, fed, {{"event", "booking_result"}, {"rid", b.rid}, {"outcome", "BookingFailed"}});
        }
    }
    return tr;
}

void check_quiescence(const Federation& fed) {
    for (const auto& [id, p] : fed.peers) {
        Relation want = eval(p.query, p.sources);
        if (want.rows() != fed.mediator.peer_views.at(id).rows())
            throw Error(ErrorCode::InvariantViolation, "peer " + std::to_string(id) + "'s view copy drifted");
    }
    Relation want = eval(fed.mediator.query, fed.mediator.sources());
    if (want.rows() != fed.mediator.integrated.rows())
        throw Error(ErrorCode::InvariantViolation, "integrated view drifted");
}

std::string digest(const Federation& fed) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto feed = [&](const std::string& s) {
        for (unsigned char c : s) {
            h ^= c;
            h *= 0x100000001b3ULL;
        }
    };
    for (const auto& [id, p] : fed.peers) {
        feed("peer " + std::to_string(id) + "\n");
        for (const auto& [name, r] : p.sources) feed(name + "\n" + to_csv(r));
        feed(to_csv(fed.mediator.peer_views.at(id)));
    }
    feed("integrated\n" + to_csv(fed.mediator.integrated));
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

// ---------------------------------------------------------------------------
// Scenario files

namespace {

[[noreturn]] void bad_scenario(const std::string& msg) { throw Error(ErrorCode::ScenarioParseError, msg); }

Value scalar(const json& j) {
    if (j.is_null()) return Value::null();
    if (j.is_number_integer()) return Value(j.get<std::int64_t>());
    if (j.is_string()) return Value(j.get<std::string>());
    bad_scenario("row values must be null, integers or strings");
}

/// A row given as an array (schema order) or an object (by attribute name).
Tuple row_of(const json& j, const Schema& s) {
    Tuple t(s.arity());
    if (j.is_array()) {
        if (j.size() != s.arity()) bad_scenario("row arity does not match '" + s.name() + "'");
        for (std::size_t i = 0; i < j.size(); ++i) t[i] = scalar(j[i]);
    } else if (j.is_object()) {
        if (j.size() != s.arity()) bad_scenario("row does not name every attribute of '" + s.name() + "'");
        for (const auto& [k, v] : j.items()) {
            auto i = s.index_of(k);
            if (!i) bad_scenario("'" + s.name() + "' has no attribute '" + k + "'");
            t[*i] = scalar(v);
        }
    } else {
        bad_scenario("row must be an array or an object");
    }
    return t;
}

Delta delta_of(const json& ev, const Schema& s) {
    Delta d;
    for (const auto& r : ev.value("inserts", json::array())) d.inserts.insert(row_of(r, s));
    for (const auto& r : ev.value("deletes", json::array())) d.deletes.insert(row_of(r, s));
    return d;
}

Policy policy_of(const json& j) {
    std::string kind = j.is_string() ? j.get<std::string>() : j.value("type", "");
    if (kind == "always_accept") return Policy::always_accept();
    if (kind == "reject_non_null_overwrite") return Policy::reject_non_null_overwrite();
    if (kind == "probabilistic_reject") {
        if (!j.is_object()) bad_scenario("probabilistic_reject needs seed and p");
        return Policy::probabilistic_reject(j.value("seed", std::uint64_t{0}), j.value("p", 0.5));
    }
    bad_scenario("unknown policy '" + kind + "'");
}

/// Every `loc` value held by any peer right now.
std::set<std::string> secret_locs(const Federation& fed) {
    std::set<std::string> out;
    for (const auto& [_, p] : fed.peers)
        for (const auto& [name, r] : p.sources)
            if (auto i = r.schema().index_of("loc"))
                for (const auto& row : r.rows())
                    if (row[*i].is_text()) out.insert(row[*i].as_text());
    return out;
}

}  // namespace

ScenarioResult run_scenario(const std::filesystem::path& file, ScenarioOptions opts) {
    const auto dir = file.parent_path();
    json doc;
    try {
        doc = json::parse(read_file(file));
    } catch (const json::exception& e) {
        bad_scenario(e.what());
    }
    std::vector<Peer> peers;
    std::map<std::string, std::vector<std::string>> adjacency;
    Program integrator;
    std::vector<json> events;
    try {
        for (const auto& pj : doc.at("peers")) {
            Peer p;
            p.id = pj.at("id").get<int>();
            auto data = dir / pj.at("data_dir").get<std::string>();
            if (pj.contains("schema")) {
                SchemaMap schemas = parse_schema_json(read_file(dir / pj.at("schema").get<std::string>()));
                for (const auto& [name, s] : schemas) {
                    auto csv = data / (name + ".csv");
                    p.sources.put(std::filesystem::exists(csv) ? parse_csv(read_file(csv), s) : Relation(s));
                }
            } else {
                p.sources = load_database(data);
            }
            p.controller = load_program(dir / pj.at("program").get<std::string>());
            p.policy = policy_of(pj.value("policy", json("always_accept")));
            peers.push_back(std::move(p));
        }
        integrator = load_program(dir / doc.at("integrator").get<std::string>());
        if (doc.contains("area_adjacency"))
            adjacency = doc.at("area_adjacency").get<std::map<std::string, std::vector<std::string>>>();
        events = doc.value("events", json::array()).get<std::vector<json>>();
    } catch (const json::exception& e) {
        bad_scenario(e.what());
    }

    ScenarioResult res;
    res.final_state = Federation::assemble(std::move(peers), std::move(integrator), std::move(adjacency));
    Federation& fed = res.final_state;
    fed.full_recompute = opts.full_recompute;
    auto check_privacy = [&](const Trace& tr, std::size_t idx) {
        for (const auto& loc : secret_locs(fed)) {
            const std::string needle = json(loc).dump();
            for (const auto& line : tr.lines)
                if (line.find(needle) != std::string::npos)
                    throw Error(ErrorCode::InvariantViolation,
                                "event " + std::to_string(idx) + " leaked a loc value into the trace");
        }
    };
    if (opts.check_invariants) check_quiescence(fed);
    {
        Trace tr;
        tr.lines.push_back(json{{"event", "initial"}, {"digest", digest(fed)}, {"step", 0}}.dump());
        res.trace.lines.insert(res.trace.lines.end(), tr.lines.begin(), tr.lines.end());
    }

    for (std::size_t idx = 0; idx < events.size(); ++idx) {
        const json& ej = events[idx];
        Event ev;
        try {
            const std::string type = ej.at("type").get<std::string>();
            if (type == "source_update") {
                const int id = ej.at("peer").get<int>();
                const std::string table = ej.at("table").get<std::string>();
                const Relation& r = fed.peer(id).sources.at(table);
                ev = SourceUpdate{id, table, delta_of(ej, r.schema())};
            } else if (type == "view_update") {
                ev = ViewUpdate{delta_of(ej, fed.mediator.integrated.schema())};
            } else if (type == "booking") {
                ev = BookingRequest{ej.at("rid").get<std::string>(), ej.at("pickup_area").get<std::string>(),
                                    ej.value("K", std::size_t{3})};
            } else {
                bad_scenario("unknown event type '" + type + "'");
            }
        } catch (const json::exception& e) {
            bad_scenario("event " + std::to_string(idx) + ": " + e.what());
        }

        // Snapshot of every tier, to verify that rejections change nothing.
        const std::string before = digest(fed);
        Trace tr = step(fed, ev);
        if (opts.check_invariants) {
            try {
                check_quiescence(fed);
            } catch (const Error& e) {
                throw Error(ErrorCode::InvariantViolation, "after event " + std::to_string(idx) + ": " + e.detail());
            }
            if (std::holds_alternative<ViewUpdate>(ev) && tr.rejections && before != digest(fed))
                throw Error(ErrorCode::InvariantViolation, "rejected event " + std::to_string(idx) + " changed the state");
            check_privacy(tr, idx);
        }
        res.rejections += tr.rejections;
        res.bookings_ok += tr.bookings_ok;
        res.bookings_failed += tr.bookings_failed;
        res.retried_bookings += tr.retried_bookings;
        res.trace.lines.insert(res.trace.lines.end(), tr.lines.begin(), tr.lines.end());
        ++res.events;
    }
    res.trace.lines.push_back(json{{"event", "final"}, {"digest", digest(fed)}, {"step", fed.steps}}.dump());
    res.source_rows_read = fed.source_rows_read;
    return res;
}

}  // namespace putback
