#include "dagcast/local_dag.hpp"

#include <deque>

namespace dagcast {

const Vertex* LocalDag::find(const VertexRef& ref) const {
    auto it = vertices_.find(ref);
    return it == vertices_.end() ? nullptr : &it->second;
}

void LocalDag::validate(const Vertex& v) const {
    if (v.ref.round == 0 && !v.parents.empty())
        throw ProtocolError("round-0 vertex must have no parents: " + v.ref.to_string());
    for (const auto& p : v.parents) {
        if (p.round >= v.ref.round)
            throw ProtocolError("parent round must precede child round: " +
                                p.to_string() + " -> " + v.ref.to_string());
    }
    if (v.auth && !v.authenticated())
        throw ForgedMessageError("authenticator failure on " + v.ref.to_string());
    if (v.payload) {
        if (payload_digest(v.ref.origin, v.ref.round, *v.payload) != v.ref.digest)
            throw ForgedMessageError("payload does not match digest on " + v.ref.to_string());
    }
}

bool LocalDag::insert(const Vertex& v) {
    validate(v);
    bool changed = false;
    auto [it, fresh] = vertices_.try_emplace(v.ref, Vertex{v.ref, {}, {}, {}});
    Vertex& stored = it->second;
    if (fresh) changed = true;

    if (v.payload && !stored.payload) {
        stored.payload = v.payload;
        changed = true;
        if (v.ref.round == 0 && !byzantine_.count(v.ref.origin))
            full_original_origins_.insert(v.ref.origin);
    }
    if (v.auth && !stored.auth) {
        stored.auth = v.auth;
        auth_index_[{v.ref.origin, v.ref.round}].insert(v.ref);
        changed = true;
    }
    for (const auto& p : v.parents) {
        if (stored.parents.insert(p).second) {
            changed = true;
            // Placeholder for a parent we have not received yet.
            vertices_.try_emplace(p, Vertex{p, {}, {}, {}});
        }
    }
    if (byzantine_.count(v.ref.origin)) invalidated_.insert(v.ref);
    return changed;
}

void LocalDag::mark_byzantine(ParticipantId p) {
    byzantine_.insert(p);
    full_original_origins_.erase(p);
    for (const auto& [ref, v] : vertices_) {
        if (ref.origin == p) invalidated_.insert(ref);
    }
}

std::vector<std::pair<VertexRef, VertexRef>> LocalDag::edges() const {
    std::vector<std::pair<VertexRef, VertexRef>> out;
    for (const auto& [ref, v] : vertices_)
        for (const auto& p : v.parents) out.emplace_back(p, ref);
    return out;
}

std::vector<VertexRef> LocalDag::variants(ParticipantId origin, Round round) const {
    auto it = auth_index_.find({origin, round});
    if (it == auth_index_.end()) return {};
    return {it->second.begin(), it->second.end()};
}

bool LocalDag::has_authenticated(ParticipantId origin, Round round) const {
    auto it = auth_index_.find({origin, round});
    return it != auth_index_.end() && !it->second.empty();
}

std::uint32_t LocalDag::distinct_original_origins() const {
    return static_cast<std::uint32_t>(full_original_origins_.size());
}

bool LocalDag::has_full_original(ParticipantId origin) const {
    return full_original_origins_.count(origin) > 0;
}

bool operator==(const LocalDag& a, const LocalDag& b) {
    if (a.byzantine_ != b.byzantine_ || a.invalidated_ != b.invalidated_) return false;
    if (a.vertices_.size() != b.vertices_.size()) return false;
    for (auto ita = a.vertices_.begin(), itb = b.vertices_.begin(); ita != a.vertices_.end();
         ++ita, ++itb) {
        if (ita->first != itb->first) return false;
        const Vertex &va = ita->second, &vb = itb->second;
        if (va.payload != vb.payload || va.parents != vb.parents || va.auth != vb.auth)
            return false;
    }
    return true;
}

LocalDag merge(const LocalDag& a, const LocalDag& b) {
    LocalDag out = a;
    merge_into(out, b);
    return out;
}

void merge_into(LocalDag& dst, const LocalDag& src) {
    for (ParticipantId p : src.byzantine()) dst.mark_byzantine(p);
    for (const auto& [ref, v] : src.vertices()) dst.insert(v);
}

std::set<VertexRef> ancestry(const LocalDag& dag, const std::vector<VertexRef>& roots) {
    std::set<VertexRef> seen;
    std::deque<VertexRef> work;
    for (const auto& r : roots) {
        if (dag.contains(r) && seen.insert(r).second) work.push_back(r);
    }
    while (!work.empty()) {
        VertexRef cur = work.front();
        work.pop_front();
        const Vertex* v = dag.find(cur);
        if (!v) continue;
        for (const auto& p : v->parents) {
            if (seen.insert(p).second) work.push_back(p);
        }
    }
    return seen;
}

bool reachable(const LocalDag& dag, const VertexRef& from, const VertexRef& to) {
    if (!dag.contains(from))
        throw QueryError("reachable: unknown ref " + from.to_string());
    if (from == to) return true;
    // Parents strictly decrease in round, so prune once below to.round.
    std::set<VertexRef> seen{from};
    std::deque<VertexRef> work{from};
    while (!work.empty()) {
        VertexRef cur = work.front();
        work.pop_front();
        const Vertex* v = dag.find(cur);
        if (!v) continue;
        for (const auto& p : v->parents) {
            if (p == to) return true;
            if (p.round > to.round && seen.insert(p).second) work.push_back(p);
        }
    }
    return false;
}

CompletenessReport completeness_from(const LocalDag& dag, const std::vector<VertexRef>& roots,
                                     const ProtocolParams& params) {
    std::set<VertexRef> anc = ancestry(dag, roots);
    CompletenessReport report;
    for (ParticipantId j = 0; j < params.n; ++j) {
        for (Round r = 0; r <= params.history_depth; ++r) {
            bool covered = false;
            for (const auto& ref : dag.variants(j, r)) {
                if (anc.count(ref)) {
                    covered = true;
                    break;
                }
            }
            if (!covered) report.missing.emplace_back(j, r);
        }
    }
    report.complete = report.missing.empty();
    return report;
}

CompletenessReport completeness(const LocalDag& dag, const VertexRef& own,
                                const ProtocolParams& params) {
    if (!dag.contains(own))
        throw QueryError("completeness: unknown ref " + own.to_string());
    if (own.round < 2)
        throw QueryError("completeness: own round must be at least 2");
    return completeness_from(dag, {own}, params);
}

std::vector<Vertex> extract_originals(const LocalDag& dag, const VertexRef& own) {
    if (!dag.contains(own))
        throw QueryError("extract_originals: unknown ref " + own.to_string());
    std::vector<Vertex> out;
    for (const auto& ref : ancestry(dag, {own})) {
        if (ref.round != 0) continue;
        if (dag.invalidated().count(ref)) continue;
        const Vertex* v = dag.find(ref);
        if (v && v->full()) out.push_back(*v);
    }
    return out;  // ancestry iterates a std::set, so canonical order holds
}

std::uint32_t count_original_origins(const std::vector<Vertex>& originals) {
    std::set<ParticipantId> origins;
    for (const auto& v : originals) origins.insert(v.ref.origin);
    return static_cast<std::uint32_t>(origins.size());
}

}  // namespace dagcast
