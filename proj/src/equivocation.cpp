#include "dagcast/equivocation.hpp"

#include <map>

namespace dagcast {

bool evidence_valid(const EquivocationEvidence& ev) {
    const Vertex& a = ev.variant_a;
    const Vertex& b = ev.variant_b;
    if (a.ref.origin != ev.offender || b.ref.origin != ev.offender) return false;
    if (a.ref.round != ev.round || b.ref.round != ev.round) return false;
    if (a.ref.digest == b.ref.digest) return false;
    return a.authenticated() && b.authenticated();
}

std::vector<EquivocationEvidence> detect(const LocalDag& dag) {
    // Group authenticated vertices by (round, origin) so output order is
    // canonical.
    std::map<std::pair<Round, ParticipantId>, std::vector<const Vertex*>> groups;
    for (const auto& [ref, v] : dag.vertices()) {
        if (v.authenticated()) groups[{ref.round, ref.origin}].push_back(&v);
    }
    std::vector<EquivocationEvidence> out;
    for (const auto& [key, vs] : groups) {
        if (vs.size() < 2) continue;
        // Map iteration already sorts variants by digest within the group.
        out.push_back(EquivocationEvidence{key.second, key.first, *vs[0], *vs[1]});
    }
    return out;
}

void invalidate_in_place(LocalDag& dag, const EquivocationEvidence& ev) {
    if (!evidence_valid(ev))
        throw ProtocolError("invalidate: evidence does not verify");
    dag.insert(ev.variant_a);
    dag.insert(ev.variant_b);
    dag.mark_byzantine(ev.offender);
}

LocalDag invalidate(const LocalDag& dag, const EquivocationEvidence& ev) {
    LocalDag out = dag;
    invalidate_in_place(out, ev);
    return out;
}

}  // namespace dagcast
