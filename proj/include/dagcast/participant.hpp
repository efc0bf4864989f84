#pragma once

#include "dagcast/equivocation.hpp"
#include "dagcast/local_dag.hpp"

namespace dagcast {

enum class MessageKind { round_broadcast, enquiry_request, enquiry_response };
enum class ParticipantStatus { active, complete, degraded, halted };

const char* to_string(ParticipantStatus s);

struct MissingSlot {
    ParticipantId origin = 0;
    Round round = 0;
    friend auto operator<=>(const MissingSlot&, const MissingSlot&) = default;
};

struct BroadcastMessage {
    MessageKind kind = MessageKind::round_broadcast;
    ParticipantId sender = 0;
    /// Sender's round at send time.
    Round round = 0;
    /// Head vertex of a round broadcast (new vertex, or frontier on re-broadcast).
    std::optional<Vertex> new_vertex;
    /// Vertices learned since the sender's previous broadcast; for an
    /// enquiry response, the requested sub-DAG.
    std::vector<Vertex> delta;
    std::uint64_t enquiry_id = 0;
    std::vector<MissingSlot> missing;
};

struct AdvanceDecision {
    enum class Kind { advance, wait, halt };
    Kind kind = Kind::wait;
    std::optional<BroadcastMessage> broadcast;
    std::uint32_t originals_held = 0;
    std::uint32_t originals_needed = 0;
};

struct RecoveryPlan {
    enum class Kind { none, passive_wait, enquire };
    Kind kind = Kind::none;
    std::vector<MissingSlot> missing;
};

struct ReceiveEffects {
    bool merged_new = false;
    bool became_complete = false;
    /// Holder should be scheduled to answer this enquiry.
    bool respond_to_enquiry = false;
    std::vector<EquivocationEvidence> new_evidence;
};

/// One participant's protocol state machine: round-based broadcast with
/// delta gossip, the 2f+1 advancement rule, equivocation handling and the
/// three history-recovery methods (late arrivals, shared DAGs, enquiry).
///
/// The class is simulator-agnostic and single-owner; all timing decisions
/// (slot boundaries, backoff) belong to the driver.
class Participant {
public:
    Participant(ParticipantId id, ProtocolParams params, std::uint32_t e_max = 2);

    BroadcastMessage start_round0(Bytes payload);
    ReceiveEffects on_receive(const BroadcastMessage& msg);
    AdvanceDecision try_advance();
    /// Frontier re-announcement used in slots where advancement is blocked.
    BroadcastMessage rebroadcast();

    RecoveryPlan plan_recovery() const;
    /// Consumes an enquire plan: builds the request and counts the attempt.
    std::optional<BroadcastMessage> make_enquiry();
    /// Answer for a peer's enquiry; nullopt when nothing is held or another
    /// response to the same enquiry was already observed.
    std::optional<BroadcastMessage> build_enquiry_response(const BroadcastMessage& request);

    /// Slot-boundary bookkeeping for recovery pacing; call once per boundary
    /// after try_advance.
    void note_boundary();
    /// End-of-run status resolution (complete / degraded / halted).
    void finalize_status();
    void set_halted() { status_ = ParticipantStatus::halted; }

    /// Pre-load knowledge that a participant is Byzantine (carried across
    /// dissemination instances by the ordering layer).
    void seed_byzantine(ParticipantId p) { dag_.mark_byzantine(p); }

    ParticipantId id() const { return id_; }
    const ProtocolParams& params() const { return params_; }
    const LocalDag& dag() const { return dag_; }
    Round current_round() const { return current_round_; }
    ParticipantStatus status() const { return status_; }
    bool started() const { return started_; }
    const VertexRef& frontier() const { return frontier_; }
    std::optional<Round> completed_round() const { return completed_round_; }
    std::uint32_t enquiries_sent() const { return enquiries_sent_; }

    /// History completeness of the frontier vertex: every slot covered by an
    /// authenticated vertex linked under the own chain. Flips only when a
    /// new own vertex links freshly merged data.
    bool frontier_complete() const;
    /// Membership form over everything held, linked or not; this is what
    /// recovery asks peers for.
    bool view_complete() const;
    std::vector<MissingSlot> view_missing() const;
    /// Round-0 slots with no full original yet; these block advancement.
    std::vector<MissingSlot> advancement_missing() const;

private:
    void absorb(const Vertex& v, ReceiveEffects& fx);
    void refresh_completion(ReceiveEffects* fx);
    std::vector<Vertex> drain_delta();
    std::set<VertexRef> link_candidates() const;
    void link_subtree(const VertexRef& root);
    void cover_if_linked(const VertexRef& ref);

    ParticipantId id_;
    ProtocolParams params_;
    std::uint32_t e_max_;

    LocalDag dag_;
    bool started_ = false;
    Round current_round_ = 0;
    VertexRef frontier_;
    ParticipantStatus status_ = ParticipantStatus::active;
    std::optional<Round> completed_round_;

    std::vector<VertexRef> delta_buffer_;
    std::set<VertexRef> delta_seen_;
    std::set<VertexRef> unlinked_;
    /// Frontier ancestry (grows monotonically along the own chain).
    std::set<VertexRef> linked_;
    /// Completeness slots covered by linked authenticated vertices.
    std::set<std::pair<ParticipantId, Round>> covered_;

    std::uint32_t incomplete_boundaries_ = 0;
    std::uint32_t waiting_boundaries_ = 0;
    bool advance_blocked_ = false;
    std::uint32_t enquiries_sent_ = 0;
    std::uint32_t slots_since_enquiry_ = 0;
    std::uint64_t enquiry_seq_ = 0;
    /// Per observed enquiry id: slots already covered by someone's response.
    std::map<std::uint64_t, std::set<MissingSlot>> response_coverage_;
};

}  // namespace dagcast
