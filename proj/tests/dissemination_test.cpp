#include <doctest.h>

#include "dagcast/participant.hpp"
#include "dagcast/rng.hpp"

using namespace dagcast;

namespace {

const ProtocolParams kParams{4, 1, 8, 1};

Bytes payload_of(ParticipantId origin, int salt = 0) {
    return to_bytes("data-" + std::to_string(origin) + "-" + std::to_string(salt));
}

/// Lossless in-memory swarm used to drive participants by hand.
struct Swarm {
    std::vector<Participant> nodes;
    explicit Swarm(const ProtocolParams& params = kParams, std::uint32_t e_max = 2) {
        for (ParticipantId i = 0; i < params.n; ++i) nodes.emplace_back(i, params, e_max);
    }
    void deliver_all(const BroadcastMessage& msg) {
        for (auto& p : nodes)
            if (p.id() != msg.sender) p.on_receive(msg);
    }
    void start_all() {
        std::vector<BroadcastMessage> msgs;
        for (auto& p : nodes) msgs.push_back(p.start_round0(payload_of(p.id())));
        for (const auto& m : msgs) deliver_all(m);
    }
    void boundary() {
        std::vector<BroadcastMessage> msgs;
        for (auto& p : nodes) {
            auto d = p.try_advance();
            msgs.push_back(d.kind == AdvanceDecision::Kind::advance ? std::move(*d.broadcast)
                                                                    : p.rebroadcast());
            p.note_boundary();
        }
        for (const auto& m : msgs) deliver_all(m);
    }
};

}  // namespace

TEST_CASE("start_round0 creates the round-0 vertex and rejects reuse") {
    Participant p(0, kParams);
    BroadcastMessage msg = p.start_round0(to_bytes("v0"));
    REQUIRE(msg.new_vertex.has_value());
    CHECK(msg.new_vertex->ref.origin == 0);
    CHECK(msg.new_vertex->ref.round == 0);
    CHECK(msg.new_vertex->ref.digest == payload_digest(0, 0, to_bytes("v0")));
    CHECK(msg.new_vertex->parents.empty());
    CHECK(msg.kind == MessageKind::round_broadcast);
    CHECK(p.current_round() == 0);

    CHECK_THROWS_AS(p.start_round0(to_bytes("again")), ProtocolError);
    Participant q(1, kParams);
    CHECK_THROWS_AS(q.start_round0(Bytes{}), ProtocolError);
}

TEST_CASE("all participants start with distinct round-0 vertices") {
    Swarm swarm;
    std::set<VertexRef> refs;
    for (auto& p : swarm.nodes) {
        auto msg = p.start_round0(payload_of(p.id()));
        refs.insert(msg.new_vertex->ref);
    }
    CHECK(refs.size() == 4);
}

TEST_CASE("duplicate delivery leaves the DAG unchanged") {
    Swarm swarm;
    swarm.start_all();
    auto& p0 = swarm.nodes[0];
    LocalDag before = p0.dag();
    // Replay participant 1's round-0 broadcast.
    auto msg = BroadcastMessage{MessageKind::round_broadcast, 1, 0,
                                *p0.dag().find(swarm.nodes[1].frontier()), {}, 0, {}};
    auto fx = p0.on_receive(msg);
    CHECK_FALSE(fx.merged_new);
    CHECK(p0.dag() == before);
}

TEST_CASE("try_advance: 2f+1 originals gate") {
    Participant p(0, kParams);
    p.start_round0(payload_of(0));

    // Own original only: wait, 2 more needed.
    auto d = p.try_advance();
    CHECK(d.kind == AdvanceDecision::Kind::wait);
    CHECK(d.originals_held == 1);
    CHECK(d.originals_needed == 3);

    // Two originals: still short.
    Participant peer1(1, kParams);
    auto m1 = peer1.start_round0(payload_of(1));
    p.on_receive(m1);
    d = p.try_advance();
    CHECK(d.kind == AdvanceDecision::Kind::wait);
    CHECK(d.originals_held == 2);

    // Third original arrives: advance, new vertex links both receipts.
    Participant peer2(2, kParams);
    auto m2 = peer2.start_round0(payload_of(2));
    p.on_receive(m2);
    d = p.try_advance();
    REQUIRE(d.kind == AdvanceDecision::Kind::advance);
    CHECK(p.current_round() == 1);
    const Vertex& head = *d.broadcast->new_vertex;
    CHECK(head.ref.round == 1);
    CHECK(head.parents.count(m1.new_vertex->ref) == 1);
    CHECK(head.parents.count(m2.new_vertex->ref) == 1);

    // Advancement soundness: the created vertex reaches >= 2f+1 originals.
    auto originals = extract_originals(p.dag(), head.ref);
    CHECK(count_original_origins(originals) >= kParams.advance_quorum());
}

TEST_CASE("try_advance: invalidated equivocator does not count, n=5") {
    ProtocolParams params{5, 1, 8, 1};
    Participant p(0, params);
    p.start_round0(payload_of(0));
    // Receive an equivocating pair from participant 4: both variants merge,
    // evidence fires, row is invalidated.
    Vertex va = make_vertex(4, 0, payload_of(4, 0), {});
    Vertex vb = make_vertex(4, 0, payload_of(4, 1), {});
    auto fx = p.on_receive(BroadcastMessage{MessageKind::round_broadcast, 4, 0, va, {}, 0, {}});
    CHECK(fx.new_evidence.empty());
    fx = p.on_receive(BroadcastMessage{MessageKind::round_broadcast, 4, 0, vb, {}, 0, {}});
    REQUIRE(fx.new_evidence.size() == 1);
    CHECK(fx.new_evidence[0].offender == 4);
    CHECK(p.dag().byzantine().count(4) == 1);

    // Originals: own + equivocator(excluded) = 1; add two honest rows.
    auto d = p.try_advance();
    CHECK(d.kind == AdvanceDecision::Kind::wait);
    CHECK(d.originals_held == 1);
    for (ParticipantId j : {1u, 2u}) {
        Vertex v = make_vertex(j, 0, payload_of(j), {});
        p.on_receive(BroadcastMessage{MessageKind::round_broadcast, j, 0, v, {}, 0, {}});
    }
    d = p.try_advance();
    REQUIRE(d.kind == AdvanceDecision::Kind::advance);
    // 2f+1 originals all from non-flagged rows.
    auto originals = extract_originals(p.dag(), p.frontier());
    CHECK(count_original_origins(originals) == 3);
    for (const auto& v : originals) CHECK(v.ref.origin != 4);
}

TEST_CASE("try_advance halts at the round budget") {
    Swarm swarm;
    swarm.start_all();
    for (Round r = 0; r < kParams.r_max; ++r) swarm.boundary();
    auto& p = swarm.nodes[0];
    CHECK(p.current_round() == kParams.r_max);
    auto d = p.try_advance();
    CHECK(d.kind == AdvanceDecision::Kind::halt);
    CHECK(p.current_round() == kParams.r_max);
}

TEST_CASE("lossless swarm: everyone complete at round 2 exactly, no recovery") {
    Swarm swarm;
    swarm.start_all();
    swarm.boundary();  // into round 1
    for (auto& p : swarm.nodes) CHECK_FALSE(p.completed_round().has_value());
    swarm.boundary();  // into round 2
    for (auto& p : swarm.nodes) {
        CHECK(p.status() == ParticipantStatus::complete);
        REQUIRE(p.completed_round().has_value());
        CHECK(*p.completed_round() == 2);
        CHECK(p.enquiries_sent() == 0);
        CHECK(p.plan_recovery().kind == RecoveryPlan::Kind::none);
        // Membership view agrees with the frontier-based completeness check.
        CHECK(completeness(p.dag(), p.frontier(), kParams).complete);
    }
}

TEST_CASE("retrospection: delayed old-round messages are merged and linked") {
    Swarm swarm;
    // Participant 2's round-0 and round-1 broadcasts are delayed: they reach
    // nobody on time and land at p0 only during slot 2.
    std::vector<BroadcastMessage> round0;
    for (auto& p : swarm.nodes) round0.push_back(p.start_round0(payload_of(p.id())));
    BroadcastMessage delayed_p2_round0 = round0[2];
    for (const auto& m : round0)
        for (auto& p : swarm.nodes)
            if (p.id() != m.sender && m.sender != 2) p.on_receive(m);
    // p2 itself still hears everyone and keeps advancing.

    BroadcastMessage delayed_p2_round1;
    for (int r = 1; r <= 2; ++r) {
        std::vector<BroadcastMessage> msgs;
        for (auto& p : swarm.nodes) {
            auto d = p.try_advance();
            msgs.push_back(d.kind == AdvanceDecision::Kind::advance ? std::move(*d.broadcast)
                                                                    : p.rebroadcast());
            p.note_boundary();
        }
        for (const auto& m : msgs) {
            if (m.sender == 2 && m.round == 1) delayed_p2_round1 = m;
            for (auto& p : swarm.nodes) {
                if (p.id() == m.sender) continue;
                if (m.sender == 2) continue;  // row 2 stays dark everywhere
                p.on_receive(m);
            }
        }
    }
    auto& p0 = swarm.nodes[0];
    CHECK(p0.current_round() == 2);
    CHECK_FALSE(p0.view_complete());
    CHECK_FALSE(reachable(p0.dag(), p0.frontier(), delayed_p2_round0.new_vertex->ref));

    // Slot 2: both delayed messages finally land (retrospection).
    REQUIRE(delayed_p2_round1.new_vertex.has_value());
    CHECK(p0.on_receive(delayed_p2_round0).merged_new);
    CHECK(p0.on_receive(delayed_p2_round1).merged_new);
    auto d = p0.try_advance();
    REQUIRE(d.kind == AdvanceDecision::Kind::advance);
    CHECK(p0.current_round() == 3);
    // The late vertices are now linked under the new frontier.
    CHECK(reachable(p0.dag(), p0.frontier(), delayed_p2_round1.new_vertex->ref));
    CHECK(reachable(p0.dag(), p0.frontier(), delayed_p2_round0.new_vertex->ref));
    CHECK(p0.view_complete());
    CHECK(completeness(p0.dag(), p0.frontier(), kParams).complete);
}

TEST_CASE("plan_recovery: passive wait first, enquiry after two boundaries, bounded by e_max") {
    Swarm swarm(kParams, 2);
    // Row 3 is lost to everyone except participant 3 itself: rounds proceed
    // (3 originals suffice) but completeness stays false.
    std::vector<BroadcastMessage> msgs;
    for (auto& p : swarm.nodes) msgs.push_back(p.start_round0(payload_of(p.id())));
    for (const auto& m : msgs)
        for (auto& p : swarm.nodes)
            if (p.id() != m.sender && m.sender != 3 && p.id() != 3) p.on_receive(m);

    auto& p0 = swarm.nodes[0];
    CHECK(p0.plan_recovery().kind == RecoveryPlan::Kind::none);  // round < 2

    auto step = [&] {
        for (ParticipantId i : {0u, 1u, 2u}) {
            auto& p = swarm.nodes[i];
            auto d = p.try_advance();
            auto m = d.kind == AdvanceDecision::Kind::advance ? std::move(*d.broadcast)
                                                              : p.rebroadcast();
            for (ParticipantId j : {0u, 1u, 2u})
                if (i != j) swarm.nodes[j].on_receive(m);
            p.note_boundary();
        }
    };
    step();  // round 1
    CHECK(p0.plan_recovery().kind == RecoveryPlan::Kind::none);
    step();  // round 2: incompleteness discovered, boundary count 1
    auto plan = p0.plan_recovery();
    CHECK(plan.kind == RecoveryPlan::Kind::passive_wait);
    CHECK(plan.missing == std::vector<MissingSlot>{{3, 0}, {3, 1}});
    CHECK_FALSE(p0.make_enquiry().has_value());
    step();  // boundary count 2: still passive
    CHECK(p0.plan_recovery().kind == RecoveryPlan::Kind::passive_wait);
    step();  // boundary count 3: enquiry due
    CHECK(p0.plan_recovery().kind == RecoveryPlan::Kind::enquire);
    auto enq = p0.make_enquiry();
    REQUIRE(enq.has_value());
    CHECK(enq->kind == MessageKind::enquiry_request);
    CHECK(enq->missing.size() == 2);
    CHECK(p0.enquiries_sent() == 1);
    // Immediately after sending: wait for answers.
    CHECK(p0.plan_recovery().kind == RecoveryPlan::Kind::passive_wait);
    step();
    step();  // second and last enquiry
    auto enq2 = p0.make_enquiry();
    REQUIRE(enq2.has_value());
    CHECK(p0.enquiries_sent() == 2);
    step();
    step();
    CHECK(p0.plan_recovery().kind == RecoveryPlan::Kind::passive_wait);  // e_max spent
    CHECK_FALSE(p0.make_enquiry().has_value());
}

TEST_CASE("enquiry responses carry the requested sub-DAG and repair completeness") {
    Swarm swarm;
    // Row 3 is visible only to participant 3 itself, so only an enquiry
    // answered by 3 can repair anyone.
    std::vector<BroadcastMessage> msgs;
    for (auto& p : swarm.nodes) msgs.push_back(p.start_round0(payload_of(p.id())));
    for (const auto& m : msgs)
        for (auto& p : swarm.nodes)
            if (p.id() != m.sender && !(m.sender == 3 && p.id() != 3)) p.on_receive(m);

    auto step = [&] {
        std::vector<BroadcastMessage> out;
        for (auto& p : swarm.nodes) {
            auto d = p.try_advance();
            out.push_back(d.kind == AdvanceDecision::Kind::advance ? std::move(*d.broadcast)
                                                                   : p.rebroadcast());
            p.note_boundary();
        }
        for (const auto& m : out)
            for (auto& p : swarm.nodes) {
                if (p.id() == m.sender) continue;
                if (m.sender == 3 && p.id() != 3) continue;  // row 3 stays dark
                p.on_receive(m);
            }
    };
    step();
    step();
    step();
    step();
    auto& p0 = swarm.nodes[0];
    REQUIRE(p0.plan_recovery().kind == RecoveryPlan::Kind::enquire);
    auto request = *p0.make_enquiry();
    CHECK(request.missing == std::vector<MissingSlot>{{3, 0}, {3, 1}});

    // A peer without the row declines; the holder answers.
    auto fx1 = swarm.nodes[1].on_receive(request);
    CHECK_FALSE(fx1.respond_to_enquiry);
    CHECK_FALSE(swarm.nodes[1].build_enquiry_response(request).has_value());
    auto fx3 = swarm.nodes[3].on_receive(request);
    CHECK(fx3.respond_to_enquiry);
    auto response = swarm.nodes[3].build_enquiry_response(request);
    REQUIRE(response.has_value());
    CHECK(response->kind == MessageKind::enquiry_response);
    CHECK(response->enquiry_id == request.enquiry_id);
    CHECK_FALSE(response->delta.empty());

    // Suppression: a holder that saw the answer stays quiet.
    swarm.nodes[2].on_receive(request);
    swarm.nodes[2].on_receive(*response);
    CHECK_FALSE(swarm.nodes[2].build_enquiry_response(request).has_value());

    // The response repairs the requester after the next linking step.
    auto fx0 = p0.on_receive(*response);
    CHECK(fx0.merged_new);
    auto d = p0.try_advance();
    REQUIRE(d.kind == AdvanceDecision::Kind::advance);
    CHECK(p0.view_complete());
    CHECK(completeness(p0.dag(), p0.frontier(), kParams).complete);
    CHECK(p0.status() == ParticipantStatus::complete);
}

TEST_CASE("honest participants never equivocate across rebroadcasts") {
    Swarm swarm;
    swarm.start_all();
    for (int r = 0; r < 3; ++r) swarm.boundary();
    for (auto& p : swarm.nodes) {
        for (ParticipantId j = 0; j < kParams.n; ++j)
            for (Round r = 0; r <= p.current_round(); ++r)
                CHECK(p.dag().variants(j, r).size() <= 1);
        CHECK(p.dag().byzantine().empty());
    }
}

TEST_CASE("deltas alone heal any round-0 loss pattern with a surviving copy per row") {
    // Enquiries are simulator machinery; without them, completeness is still
    // guaranteed whenever every row's original reached at least one peer.
    // The simulator suite sweeps the full 2^12 space including total losses.
    for (int pattern = 0; pattern < 4096; ++pattern) {
        bool each_row_survives = true;
        for (int s = 0; s < 4 && each_row_survives; ++s) {
            int alive = 0;
            for (int l = 0; l < 3; ++l)
                if (!(pattern & (1 << (s * 3 + l)))) ++alive;
            if (alive == 0) each_row_survives = false;
        }
        if (!each_row_survives) continue;

        Swarm swarm;
        std::vector<BroadcastMessage> msgs;
        for (auto& p : swarm.nodes) msgs.push_back(p.start_round0(payload_of(p.id())));
        int link = 0;
        for (const auto& m : msgs) {
            for (auto& p : swarm.nodes) {
                if (p.id() == m.sender) continue;
                if (!(pattern & (1 << link))) p.on_receive(m);
                ++link;
            }
        }
        for (Round r = 0; r < kParams.r_max; ++r) swarm.boundary();
        for (auto& p : swarm.nodes) {
            p.finalize_status();
            CHECK(p.status() == ParticipantStatus::complete);
        }
    }
}

TEST_CASE("finalize_status: degraded only when missing rows went silent") {
    ProtocolParams params{4, 1, 4, 1};
    Participant p(0, params);
    p.start_round0(payload_of(0));
    for (ParticipantId j : {1u, 2u}) {
        Vertex v = make_vertex(j, 0, payload_of(j), {});
        p.on_receive(BroadcastMessage{MessageKind::round_broadcast, j, 0, v, {}, 0, {}});
    }
    while (p.current_round() < params.r_max) p.try_advance();
    // Row 3 never appeared at all: excusable, degraded.
    p.finalize_status();
    CHECK(p.status() == ParticipantStatus::degraded);

    // Contrast: a row whose later vertex is known but whose round-1 slot is
    // missing is not excusable.
    Participant q(0, params);
    q.start_round0(payload_of(0));
    for (ParticipantId j : {1u, 2u}) {
        Vertex v = make_vertex(j, 0, payload_of(j), {});
        q.on_receive(BroadcastMessage{MessageKind::round_broadcast, j, 0, v, {}, 0, {}});
    }
    Vertex v30 = make_vertex(3, 0, payload_of(3), {});
    Vertex v32 = make_vertex(3, 2, Bytes{}, {v30.ref});
    q.on_receive(BroadcastMessage{MessageKind::round_broadcast, 3, 0, v30, {}, 0, {}});
    q.on_receive(BroadcastMessage{MessageKind::round_broadcast, 3, 2, v32, {}, 0, {}});
    while (q.current_round() < params.r_max) q.try_advance();
    q.finalize_status();
    CHECK(q.status() == ParticipantStatus::halted);
}
