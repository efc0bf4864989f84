#include "dagcast/netsim.hpp"

#include <cmath>
#include <queue>

#include "dagcast/rng.hpp"

namespace dagcast {

bool SimConfig::is_honest(ParticipantId id) const {
    auto it = adversaries.find(id);
    return it == adversaries.end() || it->second.kind == AdversaryKind::honest;
}

void SimConfig::validate() const {
    params.validate();
    std::uint32_t corrupt = 0;
    for (const auto& [id, spec] : adversaries) {
        if (id >= params.n) throw ProtocolError("adversary id out of range");
        if (spec.kind == AdversaryKind::honest) continue;
        ++corrupt;
        if (spec.kind == AdversaryKind::equivocator) {
            std::uint32_t in = 0, out = 0;
            for (ParticipantId j = 0; j < params.n; ++j) {
                if (j == id || !is_honest(j)) continue;
                (spec.partition.count(j) ? in : out)++;
            }
            if (in == 0 || out == 0)
                throw ProtocolError("equivocator partition must split honest receivers");
        }
    }
    if (corrupt > params.f) throw ProtocolError("more than f adversaries configured");
    if (loss.p < 0 || loss.p > 1 || loss.rho < 0 || loss.rho > 1)
        throw ProtocolError("loss parameters out of range");
    if (t_slot_ms <= 0 || delay.base_ms < 0 || delay.jitter_ms < 0 ||
        delay.straggler_prob < 0 || delay.straggler_prob > 1 || delay.straggler_extra_ms < 0)
        throw ProtocolError("timing parameters out of range");
}

std::map<ParticipantId, Bytes> default_payloads(std::uint32_t n) {
    std::map<ParticipantId, Bytes> out;
    for (ParticipantId i = 0; i < n; ++i) out[i] = to_bytes("origin-" + std::to_string(i));
    return out;
}

namespace {

constexpr double kUsPerMs = 1000.0;

struct Event {
    enum class Kind { deliver, slot, response };
    std::int64_t t_us = 0;
    int phase = 0;  // deliver=0, slot=1, response=2
    std::uint64_t seq = 0;
    Kind kind = Kind::slot;
    std::shared_ptr<const BroadcastMessage> msg;
    ParticipantId who = 0;  // receiver / responder
    std::uint32_t slot = 0;
};

struct EventAfter {
    bool operator()(const Event& a, const Event& b) const {
        if (a.t_us != b.t_us) return a.t_us > b.t_us;
        if (a.phase != b.phase) return a.phase > b.phase;
        return a.seq > b.seq;
    }
};

class Sim {
public:
    Sim(const SimConfig& cfg, const std::map<ParticipantId, Bytes>& payloads)
        : cfg_(cfg),
          payloads_(payloads),
          rng_(DetRng::derive(cfg.seed, 1)),
          drop_rng_(DetRng::derive(cfg.seed, 2)) {}

    RunResult run();

private:
    const AdversarySpec* adversary(ParticipantId id) const {
        auto it = cfg_.adversaries.find(id);
        return it == cfg_.adversaries.end() ? nullptr : &it->second;
    }
    std::uint32_t crash_slot(ParticipantId id) const {
        const AdversarySpec* a = adversary(id);
        if (a && a->kind == AdversaryKind::crash) return a->crash_at;
        return UINT32_MAX;
    }
    std::int64_t slot_start_us(std::uint32_t s) const {
        return static_cast<std::int64_t>(std::llround(s * cfg_.t_slot_ms * kUsPerMs));
    }

    void push(Event e) {
        e.seq = seq_++;
        queue_.push(std::move(e));
    }
    void transmit(const std::shared_ptr<const BroadcastMessage>& msg, ParticipantId from,
                  double now_ms);
    void transmit_single(const std::shared_ptr<const BroadcastMessage>& msg, ParticipantId from,
                         ParticipantId to, double now_ms);
    void handle_slot(std::uint32_t s, double now_ms);
    void handle_deliver(const Event& e, double now_ms);
    void handle_response(const Event& e, double now_ms);
    void after_protocol_action(ParticipantId id, double now_ms);
    void emit_evidence(ParticipantId id, const std::vector<EquivocationEvidence>& evs,
                       double now_ms);

    SimConfig cfg_;
    std::map<ParticipantId, Bytes> payloads_;
    DetRng rng_;
    DetRng drop_rng_;

    std::vector<std::unique_ptr<Participant>> nodes_;
    std::vector<bool> crashed_;
    std::vector<bool> complete_seen_;
    std::vector<std::optional<double>> complete_at_;

    std::priority_queue<Event, std::vector<Event>, EventAfter> queue_;
    std::uint64_t seq_ = 0;

    std::vector<bool> budget_drop_;
    std::uint64_t tx_index_ = 0;
    RunResult result_;
};

void Sim::emit_evidence(ParticipantId id, const std::vector<EquivocationEvidence>& evs,
                        double now_ms) {
    for (const auto& ev : evs) {
        result_.trace.add(now_ms, "detect", id, ev.offender, ev.round, "",
                          "{\"offender\":" + std::to_string(ev.offender) +
                              ",\"round\":" + std::to_string(ev.round) + ",\"a\":\"" +
                              hex_prefix(ev.variant_a.ref.digest) + "\",\"b\":\"" +
                              hex_prefix(ev.variant_b.ref.digest) + "\"}");
    }
}

void Sim::after_protocol_action(ParticipantId id, double now_ms) {
    Participant& p = *nodes_[id];
    if (!complete_seen_[id] && p.completed_round()) {
        complete_seen_[id] = true;
        complete_at_[id] = now_ms;
        result_.trace.add(now_ms, "complete", id, -1, *p.completed_round());
    }
}

void Sim::transmit_single(const std::shared_ptr<const BroadcastMessage>& msg,
                          ParticipantId from, ParticipantId to, double now_ms) {
    bool is_round = msg->kind == MessageKind::round_broadcast;
    bool drop = false;
    double extra_ms = 0.0;
    bool scripted = false;
    if (is_round) {
        for (const auto& fate : cfg_.script) {
            if (fate.sender == from && fate.round == msg->round && fate.receiver == to) {
                scripted = true;
                drop = fate.drop;
                extra_ms = fate.extra_delay_ms;
                break;
            }
        }
    }
    if (is_round) {
        ++result_.transmissions;
        std::uint64_t idx = tx_index_++;
        if (!scripted) {
            if (cfg_.loss.mode == LossModel::Mode::budget)
                drop = idx < budget_drop_.size() && budget_drop_[idx];
            else
                drop = rng_.chance(cfg_.loss.p);
        }
    } else {
        ++result_.aux_transmissions;
        double p = cfg_.loss.mode == LossModel::Mode::bernoulli ? cfg_.loss.p : cfg_.loss.rho;
        if (!scripted) drop = rng_.chance(p);
    }

    if (drop) {
        if (is_round)
            ++result_.drops;
        else
            ++result_.aux_drops;
        result_.trace.add(now_ms, "drop", to, from, msg->round,
                          msg->new_vertex ? msg->new_vertex->ref.to_string() : "",
                          is_round ? "" : "aux");
        return;
    }
    double delay = cfg_.delay.base_ms + rng_.uniform(0.0, cfg_.delay.jitter_ms);
    if (cfg_.delay.straggler_prob > 0 && rng_.chance(cfg_.delay.straggler_prob))
        delay += cfg_.delay.straggler_extra_ms;
    delay += extra_ms;
    Event e;
    e.kind = Event::Kind::deliver;
    e.t_us = static_cast<std::int64_t>(std::llround((now_ms + delay) * kUsPerMs));
    e.phase = 0;
    e.msg = msg;
    e.who = to;
    push(std::move(e));
}

void Sim::transmit(const std::shared_ptr<const BroadcastMessage>& msg, ParticipantId from,
                   double now_ms) {
    for (ParticipantId to = 0; to < cfg_.params.n; ++to) {
        if (to == from) continue;
        transmit_single(msg, from, to, now_ms);
    }
}

void Sim::handle_deliver(const Event& e, double now_ms) {
    const BroadcastMessage& msg = *e.msg;
    ParticipantId to = e.who;
    if (crashed_[to]) {
        result_.trace.add(now_ms, "deliver", to, msg.sender, msg.round, "", "dead");
        return;
    }
    Participant& p = *nodes_[to];
    ReceiveEffects fx = p.on_receive(msg);
    result_.trace.add(now_ms, "deliver", to, msg.sender, msg.round,
                      msg.new_vertex ? msg.new_vertex->ref.to_string() : "",
                      msg.kind == MessageKind::round_broadcast ? ""
                      : msg.kind == MessageKind::enquiry_request ? "enquiry"
                                                                  : "response");
    emit_evidence(to, fx.new_evidence, now_ms);
    after_protocol_action(to, now_ms);

    if (fx.respond_to_enquiry) {
        // Backoff 0-1 slots; holders whose turn comes later suppress
        // themselves if they have already seen an answer.
        std::uint32_t backoff = static_cast<std::uint32_t>(rng_.below(2));
        std::uint32_t next_slot =
            static_cast<std::uint32_t>(now_ms / cfg_.t_slot_ms) + 1 + backoff;
        if (next_slot < cfg_.params.r_max) {
            Event r;
            r.kind = Event::Kind::response;
            r.t_us = slot_start_us(next_slot);
            r.phase = 2;
            r.msg = e.msg;
            r.who = to;
            push(std::move(r));
        }
    }
}

void Sim::handle_response(const Event& e, double now_ms) {
    ParticipantId responder = e.who;
    if (crashed_[responder]) return;
    auto resp = nodes_[responder]->build_enquiry_response(*e.msg);
    if (!resp) return;
    auto shared = std::make_shared<const BroadcastMessage>(std::move(*resp));
    result_.trace.add(now_ms, "response", responder, e.msg->sender, shared->round, "",
                      std::to_string(shared->delta.size()) + " vertices");
    transmit(shared, responder, now_ms);
}

void Sim::handle_slot(std::uint32_t s, double now_ms) {
    bool final_boundary = s >= cfg_.params.r_max;
    for (ParticipantId id = 0; id < cfg_.params.n; ++id) {
        if (crashed_[id]) continue;
        if (cfg_.listeners.count(id)) continue;
        if (crash_slot(id) <= s) {
            crashed_[id] = true;
            nodes_[id]->set_halted();
            result_.trace.add(now_ms, "crash", id, -1, nodes_[id]->current_round());
            continue;
        }
        Participant& p = *nodes_[id];

        if (s == 0) {
            Bytes payload = payloads_.at(id);
            const AdversarySpec* adv = adversary(id);
            if (adv && adv->kind == AdversaryKind::wrong_value)
                payload = to_bytes("bogus-" + std::to_string(id));
            BroadcastMessage msg = p.start_round0(payload);
            result_.trace.add(now_ms, "broadcast", id, -1, 0, msg.new_vertex->ref.to_string());
            if (adv && adv->kind == AdversaryKind::equivocator) {
                Bytes alt;
                if (adv->variant_payload) {
                    alt = *adv->variant_payload;
                } else {
                    alt = payload;
                    Bytes tag = to_bytes("/equivocal");
                    alt.insert(alt.end(), tag.begin(), tag.end());
                }
                Vertex variant_a = make_vertex(id, 0, alt, {});
                auto msg_a = std::make_shared<const BroadcastMessage>(BroadcastMessage{
                    MessageKind::round_broadcast, id, 0, variant_a, {}, 0, {}});
                auto msg_b = std::make_shared<const BroadcastMessage>(std::move(msg));
                result_.trace.add(now_ms, "broadcast", id, -1, 0, variant_a.ref.to_string(),
                                  "equivocal");
                // Per-receiver variant choice counts as one transmission each.
                for (ParticipantId to = 0; to < cfg_.params.n; ++to) {
                    if (to == id) continue;
                    bool in_partition = adv->partition.count(to) > 0;
                    auto one = std::make_shared<const BroadcastMessage>(
                        in_partition ? *msg_a : *msg_b);
                    // Reuse transmit's loss/delay path for a single receiver
                    // by scripting the loop here.
                    transmit_single(one, id, to, now_ms);
                }
            } else {
                transmit(std::make_shared<const BroadcastMessage>(std::move(msg)), id, now_ms);
            }
            continue;
        }

        AdvanceDecision d = p.try_advance();
        BroadcastMessage msg;
        if (d.kind == AdvanceDecision::Kind::advance) {
            msg = std::move(*d.broadcast);
            result_.trace.add(now_ms, "advance", id, -1, p.current_round(),
                              msg.new_vertex->ref.to_string());
        } else {
            msg = p.rebroadcast();
            result_.trace.add(now_ms, "broadcast", id, -1, p.current_round(),
                              msg.new_vertex ? msg.new_vertex->ref.to_string() : "",
                              d.kind == AdvanceDecision::Kind::halt ? "halted" : "waiting");
        }
        after_protocol_action(id, now_ms);
        p.note_boundary();
        if (!final_boundary) {
            transmit(std::make_shared<const BroadcastMessage>(std::move(msg)), id, now_ms);
            if (auto enq = p.make_enquiry()) {
                result_.trace.add(now_ms, "enquiry", id, -1, p.current_round(), "",
                                  std::to_string(enq->missing.size()) + " slots");
                transmit(std::make_shared<const BroadcastMessage>(std::move(*enq)), id, now_ms);
            }
        }
    }
}

RunResult Sim::run() {
    cfg_.validate();
    const std::uint32_t n = cfg_.params.n;
    result_.trace.enabled = cfg_.record_trace;
    result_.sim_end_ms = cfg_.params.r_max * cfg_.t_slot_ms;

    for (ParticipantId id = 0; id < n; ++id) {
        nodes_.push_back(std::make_unique<Participant>(id, cfg_.params, cfg_.e_max));
        auto known = cfg_.known_byzantine.find(id);
        if (known != cfg_.known_byzantine.end())
            for (ParticipantId b : known->second) nodes_.back()->seed_byzantine(b);
        if (payloads_.find(id) == payloads_.end())
            throw ProtocolError("missing payload for participant " + std::to_string(id));
    }
    crashed_.assign(n, false);
    complete_seen_.assign(n, false);
    complete_at_.assign(n, std::nullopt);

    if (cfg_.loss.mode == LossModel::Mode::budget) {
        std::uint64_t m = 0;
        for (std::uint32_t s = 0; s < cfg_.params.r_max; ++s) {
            std::uint32_t alive = 0;
            for (ParticipantId id = 0; id < n; ++id)
                if (crash_slot(id) > s && !cfg_.listeners.count(id)) ++alive;
            m += std::uint64_t(alive) * (n - 1);
        }
        auto k = static_cast<std::uint64_t>(std::floor(cfg_.loss.rho * double(m)));
        budget_drop_.assign(m, false);
        for (std::uint64_t idx : drop_rng_.sample(m, k)) budget_drop_[idx] = true;
    }

    for (std::uint32_t s = 0; s <= cfg_.params.r_max; ++s) {
        Event e;
        e.kind = Event::Kind::slot;
        e.t_us = slot_start_us(s);
        e.phase = 1;
        e.slot = s;
        push(std::move(e));
    }

    while (!queue_.empty()) {
        Event e = queue_.top();
        queue_.pop();
        double now_ms = double(e.t_us) / kUsPerMs;
        switch (e.kind) {
            case Event::Kind::slot: handle_slot(e.slot, now_ms); break;
            case Event::Kind::deliver: handle_deliver(e, now_ms); break;
            case Event::Kind::response: handle_response(e, now_ms); break;
        }
    }

    bool all_complete = true;
    double last = 0, sum = 0;
    std::uint32_t honest_count = 0;
    for (ParticipantId id = 0; id < n; ++id) {
        Participant& p = *nodes_[id];
        p.finalize_status();
        ParticipantResult r;
        r.id = id;
        r.honest = cfg_.is_honest(id);
        r.listener = cfg_.listeners.count(id) > 0;
        r.status = p.status();
        r.round_reached = p.current_round();
        r.byzantine = p.dag().byzantine();
        r.complete_at_ms = complete_at_[id];
        r.completed_round = p.completed_round();
        if (r.honest && !r.listener) {
            ++honest_count;
            if (r.status == ParticipantStatus::complete && r.complete_at_ms) {
                last = std::max(last, *r.complete_at_ms);
                sum += *r.complete_at_ms;
            } else {
                all_complete = false;
            }
        }
        result_.participants.push_back(std::move(r));
        result_.final_dags.push_back(p.dag());
    }
    result_.all_honest_complete = all_complete && honest_count > 0;
    if (result_.all_honest_complete) {
        result_.latency_last_ms = last;
        result_.latency_mean_ms = sum / honest_count;
    }
    return std::move(result_);
}

}  // namespace

RunResult run(const SimConfig& config, const std::map<ParticipantId, Bytes>& payloads) {
    return Sim(config, payloads).run();
}

}  // namespace dagcast
