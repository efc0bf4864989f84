#pragma once

#include <map>
#include <memory>

#include "dagcast/participant.hpp"
#include "dagcast/trace.hpp"

namespace dagcast {

enum class AdversaryKind { honest, crash, wrong_value, equivocator };

struct AdversarySpec {
    AdversaryKind kind = AdversaryKind::honest;
    /// crash: goes silent from this slot on.
    Round crash_at = 0;
    /// equivocator: receivers of variant A; everyone else gets variant B.
    std::set<ParticipantId> partition;
    /// equivocator: explicit variant-A payload (defaults to a tagged copy).
    std::optional<Bytes> variant_payload;
};

struct LossModel {
    enum class Mode { bernoulli, budget };
    Mode mode = Mode::bernoulli;
    /// bernoulli: independent per-transmission loss probability.
    double p = 0.0;
    /// budget: exactly floor(rho * M) of the M round-broadcast transmissions
    /// are dropped, chosen uniformly by the seeded generator. Recovery
    /// traffic faces bernoulli(rho) loss.
    double rho = 0.0;

    static LossModel lossless() { return LossModel{}; }
    static LossModel bernoulli(double p) { return LossModel{Mode::bernoulli, p, 0.0}; }
    static LossModel budget(double rho) { return LossModel{Mode::budget, 0.0, rho}; }
};

struct DelayModel {
    double base_ms = 2.0;
    double jitter_ms = 3.0;
    double straggler_prob = 0.0;
    double straggler_extra_ms = 0.0;
};

/// Scripted fate of one round-broadcast transmission, matched by
/// (sender, sender round, receiver). Overrides the stochastic models.
struct LinkFate {
    ParticipantId sender = 0;
    Round round = 0;
    ParticipantId receiver = 0;
    bool drop = false;
    double extra_delay_ms = 0.0;
};

struct SimConfig {
    std::uint64_t seed = 1;
    ProtocolParams params;
    double t_slot_ms = 25.0;
    LossModel loss;
    DelayModel delay;
    std::map<ParticipantId, AdversarySpec> adversaries;
    std::uint32_t e_max = 2;
    std::vector<LinkFate> script;
    bool record_trace = true;
    /// Byzantine knowledge carried in from earlier dissemination instances,
    /// per carrying participant.
    std::map<ParticipantId, std::set<ParticipantId>> known_byzantine;
    /// Receive-only members: they never broadcast but still merge everything
    /// they hear (a catching-up participant between ordering steps).
    std::set<ParticipantId> listeners;

    void validate() const;
    bool is_honest(ParticipantId id) const;
};

struct ParticipantResult {
    ParticipantId id = 0;
    bool honest = true;
    bool listener = false;
    ParticipantStatus status = ParticipantStatus::active;
    Round round_reached = 0;
    std::set<ParticipantId> byzantine;
    std::optional<double> complete_at_ms;
    std::optional<Round> completed_round;
};

struct RunResult {
    std::vector<ParticipantResult> participants;
    std::vector<LocalDag> final_dags;
    bool all_honest_complete = false;
    std::optional<double> latency_last_ms;
    std::optional<double> latency_mean_ms;
    std::uint64_t transmissions = 0;  // round broadcasts
    std::uint64_t drops = 0;
    std::uint64_t aux_transmissions = 0;  // enquiry traffic
    std::uint64_t aux_drops = 0;
    double sim_end_ms = 0;
    Trace trace;

    const ParticipantResult& by_id(ParticipantId id) const { return participants.at(id); }
};

/// Executes one dissemination instance to terminal status for every
/// participant. Deterministic: (config, payloads) fully determines the trace.
RunResult run(const SimConfig& config, const std::map<ParticipantId, Bytes>& payloads);

/// Convenience payloads "origin-<i>" for all n participants.
std::map<ParticipantId, Bytes> default_payloads(std::uint32_t n);

}  // namespace dagcast
