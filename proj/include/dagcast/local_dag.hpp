#pragma once

#include <map>
#include <utility>

#include "dagcast/types.hpp"

namespace dagcast {

struct CompletenessReport {
    bool complete = false;
    /// Slots (participant, round) not covered by an authenticated, reachable
    /// vertex, sorted by (participant, round).
    std::vector<std::pair<ParticipantId, Round>> missing;
};

/// A participant's grow-only view of the communication history. Vertices are
/// keyed by (round, origin, digest); parent links always point to strictly
/// earlier rounds, so the graph is acyclic by construction. Unknown parents
/// are kept as digest-only placeholders until a transmitted copy arrives.
class LocalDag {
public:
    using VertexMap = std::map<VertexRef, Vertex>;

    /// Validates and joins a vertex into the DAG. Placeholders are created
    /// for unknown parents; a full copy upgrades an existing placeholder.
    /// Returns true if anything changed.
    bool insert(const Vertex& v);

    /// Flags a participant and invalidates all of its vertices, past and
    /// future. Idempotent.
    void mark_byzantine(ParticipantId p);

    const VertexMap& vertices() const { return vertices_; }
    const std::set<ParticipantId>& byzantine() const { return byzantine_; }
    const std::set<VertexRef>& invalidated() const { return invalidated_; }

    bool contains(const VertexRef& ref) const { return vertices_.count(ref) > 0; }
    const Vertex* find(const VertexRef& ref) const;
    std::size_t size() const { return vertices_.size(); }

    /// (parent, child) pairs in canonical order.
    std::vector<std::pair<VertexRef, VertexRef>> edges() const;

    /// Authenticated variants recorded for (origin, round), canonical order.
    std::vector<VertexRef> variants(ParticipantId origin, Round round) const;
    bool has_authenticated(ParticipantId origin, Round round) const;
    /// Origins with at least one full, non-invalidated round-0 vertex.
    std::uint32_t distinct_original_origins() const;
    bool has_full_original(ParticipantId origin) const;

    friend bool operator==(const LocalDag& a, const LocalDag& b);

private:
    void validate(const Vertex& v) const;

    VertexMap vertices_;
    std::set<ParticipantId> byzantine_;
    std::set<VertexRef> invalidated_;
    std::map<std::pair<ParticipantId, Round>, std::set<VertexRef>> auth_index_;
    std::set<ParticipantId> full_original_origins_;
};

/// Join of two histories: set union on vertices (componentwise join of
/// payload/auth/parents per ref), byzantine and invalidated sets.
LocalDag merge(const LocalDag& a, const LocalDag& b);
void merge_into(LocalDag& dst, const LocalDag& src);

/// True iff `from` transitively references `to` along parent links
/// (reflexively). Throws QueryError when `from` is not in the DAG.
bool reachable(const LocalDag& dag, const VertexRef& from, const VertexRef& to);

/// All refs reachable from the given roots (inclusive).
std::set<VertexRef> ancestry(const LocalDag& dag, const std::vector<VertexRef>& roots);

/// History completeness at `own`: every participant's rounds
/// 0..history_depth must be covered by an authenticated vertex reachable
/// from `own`. Byzantine rows count via any authenticated variant.
CompletenessReport completeness(const LocalDag& dag, const VertexRef& own,
                                const ProtocolParams& params);
CompletenessReport completeness_from(const LocalDag& dag, const std::vector<VertexRef>& roots,
                                     const ProtocolParams& params);

/// Full-payload round-0 vertices reachable from `own`, excluding invalidated
/// ones, in canonical order. Callers compare the count of distinct origins
/// against 2f+1.
std::vector<Vertex> extract_originals(const LocalDag& dag, const VertexRef& own);
std::uint32_t count_original_origins(const std::vector<Vertex>& originals);

}  // namespace dagcast
