#pragma once

#include <map>

#include "dagcast/netsim.hpp"

namespace dagcast {

/// Reference to one participant's step batch in the horizontal process.
struct HRef {
    ParticipantId owner = 0;
    std::uint32_t step = 0;
    Digest digest{};

    friend std::strong_ordering operator<=>(const HRef& a, const HRef& b) {
        if (auto c = a.step <=> b.step; c != 0) return c;
        if (auto c = a.owner <=> b.owner; c != 0) return c;
        return a.digest <=> b.digest;
    }
    friend bool operator==(const HRef& a, const HRef& b) {
        return a.step == b.step && a.owner == b.owner && a.digest == b.digest;
    }
    std::string to_string() const;
};

/// One node of the horizontal DAG: the owner's step batch, the transactions
/// it proposes and the previous-step authentications it carries.
struct HVertexRecord {
    ParticipantId owner = 0;
    std::uint32_t step = 0;
    std::vector<Bytes> txs;
    std::vector<HRef> back_edges;
    /// P_h knowledge gossip: records learned since the owner's previous
    /// batch, so lagging views converge.
    std::vector<HVertexRecord> h_delta;

    HRef href() const;
    Bytes encode() const;
};

bool operator==(const HVertexRecord& a, const HVertexRecord& b);

/// Batch wire form; nullopt when the payload is not a well-formed batch.
std::optional<HVertexRecord> decode_batch(const Bytes& payload);

struct AuthCertificate {
    ParticipantId owner = 0;
    std::uint32_t step = 0;
    Digest digest{};
    std::set<ParticipantId> signers;
};

struct Anchor {
    std::uint32_t step = 0;
    ParticipantId owner = 0;
    std::uint32_t support = 0;
    bool committed = false;
};

struct CommittedBlock {
    std::uint32_t step = 0;
    ParticipantId owner = 0;
    Digest block_digest{};
    std::vector<HRef> bundle;  // causal interval, canonical order
    std::vector<HRef> order;   // deterministic topological order
};

struct CommitRecord {
    std::vector<CommittedBlock> blocks;
    /// One JSON object per committed block; byte-identical across honest
    /// participants with identical committed prefixes.
    std::string to_jsonl() const;
};

/// A participant's view of the horizontal DAG, merged from dissemination
/// extractions and gossiped records.
class PhView {
public:
    /// Returns true when new information was added; newly learned records
    /// (including gossiped ones) are appended to `fresh` when given. Two
    /// digest-distinct batches for one (owner, step) flag the owner.
    bool insert(const HVertexRecord& rec, std::vector<HVertexRecord>* fresh = nullptr);
    void mark_byzantine(ParticipantId p) { byzantine_.insert(p); }

    bool has(const HRef& ref) const;
    const HVertexRecord* find(const HRef& ref) const;
    /// The batch (owner, step) when exactly one variant is known.
    const HVertexRecord* sole(ParticipantId owner, std::uint32_t step) const;
    std::vector<HRef> at_step(std::uint32_t step) const;
    const std::set<ParticipantId>& byzantine() const { return byzantine_; }
    std::size_t size() const;

    /// Count of step+1 vertices holding a back edge to `anchor`.
    std::uint32_t support(const HRef& anchor) const;
    /// Certificate once n-f distinct owners authenticated the batch.
    std::optional<AuthCertificate> certificate(const HRef& ref, const ProtocolParams& p) const;
    /// Causal reachability along back edges (reflexive).
    bool reachable(const HRef& from, const HRef& to) const;
    /// Causal ancestry (reflexive), restricted to known records.
    std::set<HRef> ancestry(const HRef& from) const;

    friend bool operator==(const PhView& a, const PhView& b);

private:
    std::map<std::pair<ParticipantId, std::uint32_t>, std::map<Digest, HVertexRecord>> records_;
    std::set<ParticipantId> byzantine_;
};

/// Deterministic common-coin anchor election: identical at every honest
/// participant given the shared seed.
ParticipantId elect_anchor(std::uint64_t seed, std::uint32_t step, std::uint32_t n);

/// Direct commit rule: at least f+1 next-step vertices reference the anchor.
bool anchor_supported(const PhView& view, const HRef& anchor, const ProtocolParams& params);

/// Commit state machine: direct commits plus chained commitment of earlier
/// skipped anchors reachable from a newly committed one.
class CommitEngine {
public:
    CommitEngine(std::uint64_t coin_seed, ProtocolParams params)
        : coin_seed_(coin_seed), params_(params) {}

    /// Evaluates anchors whose decision step (+2) is settled; appends any
    /// newly committed blocks. Returns how many blocks were appended.
    std::size_t evaluate(const PhView& view, std::uint32_t settled_step);

    const CommitRecord& record() const { return record_; }
    const std::vector<Anchor>& anchors_seen() const { return anchors_; }

private:
    void commit(const PhView& view, const HRef& anchor);

    std::uint64_t coin_seed_;
    ProtocolParams params_;
    std::int64_t next_anchor_step_ = 0;
    std::int64_t last_committed_ = -2;
    std::set<HRef> bundled_;
    std::vector<Anchor> anchors_;
    CommitRecord record_;
};

/// Blockchain view: committed blocks in anchor order.
std::vector<CommittedBlock> partial_order(const CommitRecord& commits);
/// SMR view: blocks flattened into one deterministic sequence.
std::vector<HRef> total_order(const CommitRecord& commits);

// ---------------------------------------------------------------------------
// Step-by-step driver: one dissemination instance per step feeds the
// horizontal process of every participant.

struct OrderingConfig {
    std::uint64_t seed = 1;
    /// Separate network randomness; 0 means derive from `seed`. Keeping the
    /// coin fixed while varying this replays the run under permuted
    /// deliveries.
    std::uint64_t net_seed = 0;
    ProtocolParams params;
    std::uint32_t steps = 7;
    std::uint32_t txs_per_batch = 2;
    double t_slot_ms = 25.0;
    LossModel loss;
    DelayModel delay;
    std::map<ParticipantId, AdversarySpec> adversaries;
    /// Step at which a configured equivocator/wrong_value adversary acts.
    std::uint32_t adversary_step = 0;
    std::uint32_t e_max = 2;
};

struct OrderingParticipantResult {
    ParticipantId id = 0;
    bool honest = true;
    std::uint32_t steps_produced = 0;
    CommitRecord commits;
    std::string commit_log;
    PhView view;
};

struct OrderingRunResult {
    std::vector<OrderingParticipantResult> participants;
    /// Honest participants emitted byte-identical commit logs.
    bool agreement = false;
    /// Honest views converged on all settled steps.
    bool views_converged = false;
    double total_ms = 0;
};

OrderingRunResult run_ordering(const OrderingConfig& config);

}  // namespace dagcast
