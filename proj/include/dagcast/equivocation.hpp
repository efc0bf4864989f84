#pragma once

#include "dagcast/local_dag.hpp"

namespace dagcast {

/// Transferable proof that `offender` produced two authenticated,
/// digest-distinct vertices for the same round.
struct EquivocationEvidence {
    ParticipantId offender = 0;
    Round round = 0;
    Vertex variant_a;
    Vertex variant_b;
};

/// True iff the evidence is self-certifying: same offender and round,
/// distinct digests, both authenticators valid.
bool evidence_valid(const EquivocationEvidence& ev);

/// Every (origin, round) pair with two or more authenticated digest-distinct
/// vertices, ordered by (round, origin); variants inside each record are the
/// two canonically smallest digests.
std::vector<EquivocationEvidence> detect(const LocalDag& dag);

/// Flags the offender and invalidates all of its vertices. The vertices
/// themselves are retained: the history is the evidence. Rejects invalid
/// evidence. Idempotent.
LocalDag invalidate(const LocalDag& dag, const EquivocationEvidence& ev);
void invalidate_in_place(LocalDag& dag, const EquivocationEvidence& ev);

}  // namespace dagcast
