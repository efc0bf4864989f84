#include "dagcast/participant.hpp"

#include <algorithm>

namespace dagcast {

const char* to_string(ParticipantStatus s) {
    switch (s) {
        case ParticipantStatus::active: return "active";
        case ParticipantStatus::complete: return "complete";
        case ParticipantStatus::degraded: return "degraded";
        case ParticipantStatus::halted: return "halted";
    }
    return "?";
}

Participant::Participant(ParticipantId id, ProtocolParams params, std::uint32_t e_max)
    : id_(id), params_(params), e_max_(e_max) {
    params_.validate();
    if (id_ >= params_.n) throw ProtocolError("participant id out of range");
}

BroadcastMessage Participant::start_round0(Bytes payload) {
    if (started_) throw ProtocolError("start_round0 called twice");
    if (payload.empty()) throw ProtocolError("start_round0: payload must be non-empty");
    Vertex v = make_vertex(id_, 0, std::move(payload), {});
    dag_.insert(v);
    frontier_ = v.ref;
    started_ = true;
    current_round_ = 0;
    linked_.insert(v.ref);
    cover_if_linked(v.ref);
    return BroadcastMessage{MessageKind::round_broadcast, id_, 0, v, {}, 0, {}};
}

void Participant::cover_if_linked(const VertexRef& ref) {
    if (ref.round > params_.history_depth) return;
    if (!linked_.count(ref)) return;
    const Vertex* v = dag_.find(ref);
    if (v && v->authenticated()) covered_.insert({ref.origin, ref.round});
}

void Participant::link_subtree(const VertexRef& root) {
    if (linked_.count(root)) return;
    std::vector<VertexRef> work{root};
    linked_.insert(root);
    while (!work.empty()) {
        VertexRef cur = work.back();
        work.pop_back();
        cover_if_linked(cur);
        const Vertex* v = dag_.find(cur);
        if (!v) continue;
        for (const auto& p : v->parents)
            if (linked_.insert(p).second) work.push_back(p);
    }
}

bool Participant::frontier_complete() const {
    if (!started_ || current_round_ < 2) return false;
    return covered_.size() ==
           std::size_t(params_.n) * (std::size_t(params_.history_depth) + 1);
}

bool Participant::view_complete() const {
    if (!started_ || current_round_ < 2) return false;
    for (ParticipantId j = 0; j < params_.n; ++j)
        for (Round r = 0; r <= params_.history_depth; ++r)
            if (!dag_.has_authenticated(j, r)) return false;
    return true;
}

std::vector<MissingSlot> Participant::view_missing() const {
    std::vector<MissingSlot> out;
    for (ParticipantId j = 0; j < params_.n; ++j)
        for (Round r = 0; r <= params_.history_depth; ++r)
            if (!dag_.has_authenticated(j, r)) out.push_back({j, r});
    return out;
}

std::vector<MissingSlot> Participant::advancement_missing() const {
    std::vector<MissingSlot> out;
    for (ParticipantId j = 0; j < params_.n; ++j) {
        if (dag_.byzantine().count(j)) continue;
        if (!dag_.has_full_original(j)) out.push_back({j, 0});
    }
    return out;
}

void Participant::refresh_completion(ReceiveEffects* fx) {
    if (completed_round_) return;
    if (frontier_complete()) {
        completed_round_ = current_round_;
        status_ = ParticipantStatus::complete;
        incomplete_boundaries_ = 0;
        if (fx) fx->became_complete = true;
    }
}

void Participant::absorb(const Vertex& v, ReceiveEffects& fx) {
    if (!dag_.insert(v)) return;
    fx.merged_new = true;
    if (delta_seen_.insert(v.ref).second) delta_buffer_.push_back(v.ref);
    unlinked_.insert(v.ref);
    cover_if_linked(v.ref);  // an already-linked placeholder may upgrade
    // Two authenticated digests for one (origin, round) is equivocation.
    auto vars = dag_.variants(v.ref.origin, v.ref.round);
    if (vars.size() >= 2 && !dag_.byzantine().count(v.ref.origin)) {
        EquivocationEvidence ev{v.ref.origin, v.ref.round, *dag_.find(vars[0]),
                                *dag_.find(vars[1])};
        invalidate_in_place(dag_, ev);
        fx.new_evidence.push_back(std::move(ev));
    }
}

ReceiveEffects Participant::on_receive(const BroadcastMessage& msg) {
    ReceiveEffects fx;
    switch (msg.kind) {
        case MessageKind::round_broadcast:
            if (msg.new_vertex) absorb(*msg.new_vertex, fx);
            for (const auto& v : msg.delta) absorb(v, fx);
            break;
        case MessageKind::enquiry_response: {
            auto& covered = response_coverage_[msg.enquiry_id];
            for (const auto& v : msg.delta) {
                absorb(v, fx);
                if (v.auth) covered.insert({v.ref.origin, v.ref.round});
            }
            break;
        }
        case MessageKind::enquiry_request: {
            if (msg.sender == id_) break;
            for (const auto& slot : msg.missing) {
                if (dag_.has_authenticated(slot.origin, slot.round)) {
                    fx.respond_to_enquiry = true;
                    break;
                }
            }
            break;
        }
    }
    refresh_completion(&fx);
    return fx;
}

std::vector<Vertex> Participant::drain_delta() {
    std::vector<Vertex> out;
    out.reserve(delta_buffer_.size());
    for (const auto& ref : delta_buffer_) {
        const Vertex* v = dag_.find(ref);
        if (v) out.push_back(*v);
    }
    delta_buffer_.clear();
    delta_seen_.clear();
    return out;
}

std::set<VertexRef> Participant::link_candidates() const {
    std::set<VertexRef> c;
    c.insert(frontier_);
    for (const auto& u : unlinked_)
        if (u.round <= current_round_) c.insert(u);
    return c;
}

AdvanceDecision Participant::try_advance() {
    if (!started_) throw ProtocolError("try_advance before start_round0");
    AdvanceDecision d;
    d.originals_needed = params_.advance_quorum();
    d.originals_held = dag_.distinct_original_origins();
    if (current_round_ >= params_.r_max) {
        d.kind = AdvanceDecision::Kind::halt;
        advance_blocked_ = false;
        return d;
    }
    if (d.originals_held < d.originals_needed) {
        d.kind = AdvanceDecision::Kind::wait;
        advance_blocked_ = true;
        return d;
    }
    advance_blocked_ = false;

    // New vertex links every known vertex not yet under the frontier:
    // candidates minus anything another candidate already covers.
    std::set<VertexRef> candidates = link_candidates();
    std::vector<VertexRef> parent_roots;
    std::set<VertexRef> strict_anc;
    for (const auto& c : candidates) {
        const Vertex* v = dag_.find(c);
        if (!v) continue;
        std::vector<VertexRef> ps(v->parents.begin(), v->parents.end());
        auto anc = ancestry(dag_, ps);
        strict_anc.insert(anc.begin(), anc.end());
    }
    std::set<VertexRef> parents;
    for (const auto& c : candidates)
        if (!strict_anc.count(c)) parents.insert(c);

    Round next = current_round_ + 1;
    Vertex v = make_vertex(id_, next, Bytes{}, std::move(parents));
    dag_.insert(v);
    frontier_ = v.ref;
    current_round_ = next;
    linked_.insert(v.ref);
    cover_if_linked(v.ref);
    for (const auto& p : v.parents) link_subtree(p);
    for (const auto& c : candidates) unlinked_.erase(c);

    d.kind = AdvanceDecision::Kind::advance;
    d.broadcast = BroadcastMessage{MessageKind::round_broadcast, id_, next, v, drain_delta(), 0, {}};
    refresh_completion(nullptr);
    return d;
}

BroadcastMessage Participant::rebroadcast() {
    if (!started_) throw ProtocolError("rebroadcast before start_round0");
    const Vertex* head = dag_.find(frontier_);
    return BroadcastMessage{MessageKind::round_broadcast, id_,    current_round_,
                            head ? std::optional<Vertex>(*head) : std::nullopt,
                            drain_delta(),                       0,
                            {}};
}

void Participant::note_boundary() {
    if (!started_) return;
    ++slots_since_enquiry_;
    if (current_round_ >= 2 && !completed_round_)
        ++incomplete_boundaries_;
    if (advance_blocked_)
        ++waiting_boundaries_;
    else
        waiting_boundaries_ = 0;
}

RecoveryPlan Participant::plan_recovery() const {
    RecoveryPlan plan;
    if (!started_ || completed_round_) return plan;
    std::set<MissingSlot> missing;
    if (current_round_ >= 2)
        for (const auto& s : view_missing()) missing.insert(s);
    if (advance_blocked_)
        for (const auto& s : advancement_missing()) missing.insert(s);
    if (missing.empty()) return plan;
    plan.missing.assign(missing.begin(), missing.end());
    // Completeness gaps get the discovery boundary plus one full passive
    // round before an enquiry; a blocked advancement enquires after two
    // fruitless boundaries. Attempts are a response round apart.
    bool completeness_due = current_round_ >= 2 && incomplete_boundaries_ >= 3;
    bool advancement_due = waiting_boundaries_ >= 2;
    bool due = (completeness_due || advancement_due) && enquiries_sent_ < e_max_ &&
               (enquiries_sent_ == 0 || slots_since_enquiry_ >= 2);
    plan.kind = due ? RecoveryPlan::Kind::enquire : RecoveryPlan::Kind::passive_wait;
    return plan;
}

std::optional<BroadcastMessage> Participant::make_enquiry() {
    RecoveryPlan plan = plan_recovery();
    if (plan.kind != RecoveryPlan::Kind::enquire) return std::nullopt;
    ++enquiries_sent_;
    slots_since_enquiry_ = 0;
    BroadcastMessage msg;
    msg.kind = MessageKind::enquiry_request;
    msg.sender = id_;
    msg.round = current_round_;
    msg.enquiry_id = (std::uint64_t(id_) << 32) | enquiry_seq_++;
    msg.missing = std::move(plan.missing);
    return msg;
}

std::optional<BroadcastMessage> Participant::build_enquiry_response(
    const BroadcastMessage& request) {
    if (request.kind != MessageKind::enquiry_request)
        throw ProtocolError("build_enquiry_response: not an enquiry");
    auto covered_it = response_coverage_.find(request.enquiry_id);

    std::vector<VertexRef> roots;
    for (const auto& slot : request.missing) {
        if (covered_it != response_coverage_.end() && covered_it->second.count(slot)) continue;
        for (const auto& ref : dag_.variants(slot.origin, slot.round)) roots.push_back(ref);
    }
    if (roots.empty()) return std::nullopt;

    BroadcastMessage msg;
    msg.kind = MessageKind::enquiry_response;
    msg.sender = id_;
    msg.round = current_round_;
    msg.enquiry_id = request.enquiry_id;
    for (const auto& ref : ancestry(dag_, roots)) {
        const Vertex* v = dag_.find(ref);
        if (v) msg.delta.push_back(*v);
    }
    return msg;
}

void Participant::finalize_status() {
    if (status_ == ParticipantStatus::complete || status_ == ParticipantStatus::halted) return;
    refresh_completion(nullptr);
    if (status_ == ParticipantStatus::complete) return;
    if (!started_ || current_round_ < 2) {
        status_ = ParticipantStatus::halted;
        return;
    }
    // A missing slot is excusable when the row shows nothing at that round
    // or later: from here the messages look completely lost (crash or total
    // loss), which degrades the run rather than failing it. A missing slot
    // for a row that demonstrably kept going is a real failure.
    bool excusable = true;
    for (const auto& slot : view_missing()) {
        for (Round r = slot.round; r <= params_.r_max && excusable; ++r)
            if (dag_.has_authenticated(slot.origin, r)) excusable = false;
        if (!excusable) break;
    }
    status_ = excusable ? ParticipantStatus::degraded : ParticipantStatus::halted;
}

}  // namespace dagcast
