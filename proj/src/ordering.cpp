#include "dagcast/ordering.hpp"

#include <algorithm>
#include <deque>

#include "dagcast/rng.hpp"

namespace dagcast {

namespace {

void put_u32(Bytes& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_blob(Bytes& out, const Bytes& b) {
    put_u32(out, static_cast<std::uint32_t>(b.size()));
    out.insert(out.end(), b.begin(), b.end());
}

void put_href(Bytes& out, const HRef& r) {
    put_u32(out, r.owner);
    put_u32(out, r.step);
    out.insert(out.end(), r.digest.begin(), r.digest.end());
}

struct BatchReader {
    const Bytes& in;
    std::size_t pos = 0;
    bool ok = true;

    std::uint32_t u32() {
        if (pos + 4 > in.size()) {
            ok = false;
            return 0;
        }
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= std::uint32_t(in[pos++]) << (8 * i);
        return v;
    }
    Bytes blob() {
        std::uint32_t n = u32();
        if (!ok || pos + n > in.size()) {
            ok = false;
            return {};
        }
        Bytes b(in.begin() + static_cast<std::ptrdiff_t>(pos),
                in.begin() + static_cast<std::ptrdiff_t>(pos + n));
        pos += n;
        return b;
    }
    HRef href() {
        HRef r;
        r.owner = u32();
        r.step = u32();
        if (pos + 32 > in.size()) {
            ok = false;
            return r;
        }
        std::copy_n(in.begin() + static_cast<std::ptrdiff_t>(pos), 32, r.digest.begin());
        pos += 32;
        return r;
    }
};

constexpr std::uint32_t kBatchMagic = 0x48544142;  // "BATH"
constexpr std::uint32_t kLimit = 1 << 16;          // sanity bound on counts

std::string ref_token(const HRef& r) {
    return std::to_string(r.owner) + ":" + std::to_string(r.step) + ":" +
           hex_prefix(r.digest, 8);
}

}  // namespace

std::string HRef::to_string() const { return ref_token(*this); }

HRef HVertexRecord::href() const {
    HVertexRecord core;  // identity covers the batch itself, not the gossip
    core.owner = owner;
    core.step = step;
    core.txs = txs;
    core.back_edges = back_edges;
    return HRef{owner, step, sha256(core.encode())};
}

Bytes HVertexRecord::encode() const {
    Bytes out;
    put_u32(out, kBatchMagic);
    put_u32(out, owner);
    put_u32(out, step);
    put_u32(out, static_cast<std::uint32_t>(txs.size()));
    for (const auto& tx : txs) put_blob(out, tx);
    put_u32(out, static_cast<std::uint32_t>(back_edges.size()));
    for (const auto& be : back_edges) put_href(out, be);
    put_u32(out, static_cast<std::uint32_t>(h_delta.size()));
    for (const auto& sub : h_delta) {
        HVertexRecord flat = sub;
        flat.h_delta.clear();
        put_blob(out, flat.encode());
    }
    return out;
}

bool operator==(const HVertexRecord& a, const HVertexRecord& b) {
    return a.encode() == b.encode();
}

std::optional<HVertexRecord> decode_batch(const Bytes& payload) {
    BatchReader r{payload};
    if (r.u32() != kBatchMagic) return std::nullopt;
    HVertexRecord rec;
    rec.owner = r.u32();
    rec.step = r.u32();
    std::uint32_t ntx = r.u32();
    if (!r.ok || ntx > kLimit) return std::nullopt;
    for (std::uint32_t i = 0; i < ntx && r.ok; ++i) rec.txs.push_back(r.blob());
    std::uint32_t nbe = r.u32();
    if (!r.ok || nbe > kLimit) return std::nullopt;
    for (std::uint32_t i = 0; i < nbe && r.ok; ++i) rec.back_edges.push_back(r.href());
    std::uint32_t nd = r.u32();
    if (!r.ok || nd > kLimit) return std::nullopt;
    for (std::uint32_t i = 0; i < nd && r.ok; ++i) {
        Bytes sub = r.blob();
        if (!r.ok) break;
        auto subrec = decode_batch(sub);
        if (!subrec || !subrec->h_delta.empty()) return std::nullopt;
        rec.h_delta.push_back(std::move(*subrec));
    }
    if (!r.ok || r.pos != payload.size()) return std::nullopt;
    return rec;
}

// --------------------------------------------------------------------------
// PhView

bool PhView::insert(const HVertexRecord& rec, std::vector<HVertexRecord>* fresh) {
    bool changed = false;
    HVertexRecord core = rec;
    std::vector<HVertexRecord> extras;
    extras.swap(core.h_delta);
    Digest d = core.href().digest;
    auto& variants = records_[{core.owner, core.step}];
    auto [it, added] = variants.emplace(d, std::move(core));
    if (added) {
        changed = true;
        if (fresh) fresh->push_back(it->second);
        if (variants.size() >= 2) mark_byzantine(rec.owner);
    }
    for (auto& sub : extras) {
        sub.h_delta.clear();
        if (insert(sub, fresh)) changed = true;
    }
    return changed;
}

bool PhView::has(const HRef& ref) const { return find(ref) != nullptr; }

const HVertexRecord* PhView::find(const HRef& ref) const {
    auto it = records_.find({ref.owner, ref.step});
    if (it == records_.end()) return nullptr;
    auto vit = it->second.find(ref.digest);
    return vit == it->second.end() ? nullptr : &vit->second;
}

const HVertexRecord* PhView::sole(ParticipantId owner, std::uint32_t step) const {
    auto it = records_.find({owner, step});
    if (it == records_.end() || it->second.size() != 1) return nullptr;
    return &it->second.begin()->second;
}

std::vector<HRef> PhView::at_step(std::uint32_t step) const {
    std::vector<HRef> out;
    for (const auto& [key, variants] : records_) {
        if (key.second != step) continue;
        for (const auto& [d, rec] : variants) out.push_back(rec.href());
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::size_t PhView::size() const {
    std::size_t n = 0;
    for (const auto& [key, variants] : records_) n += variants.size();
    return n;
}

std::uint32_t PhView::support(const HRef& anchor) const {
    std::set<ParticipantId> supporters;
    for (const auto& [key, variants] : records_) {
        if (key.second != anchor.step + 1) continue;
        for (const auto& [d, rec] : variants) {
            if (std::find(rec.back_edges.begin(), rec.back_edges.end(), anchor) !=
                rec.back_edges.end()) {
                supporters.insert(key.first);
                break;
            }
        }
    }
    return static_cast<std::uint32_t>(supporters.size());
}

std::optional<AuthCertificate> PhView::certificate(const HRef& ref,
                                                   const ProtocolParams& params) const {
    AuthCertificate cert{ref.owner, ref.step, ref.digest, {}};
    for (const auto& [key, variants] : records_) {
        if (key.second != ref.step + 1) continue;
        for (const auto& [d, rec] : variants) {
            if (std::find(rec.back_edges.begin(), rec.back_edges.end(), ref) !=
                rec.back_edges.end()) {
                cert.signers.insert(key.first);
                break;
            }
        }
    }
    if (cert.signers.size() < params.auth_quorum()) return std::nullopt;
    return cert;
}

bool PhView::reachable(const HRef& from, const HRef& to) const {
    if (from == to) return true;
    std::set<HRef> seen{from};
    std::deque<HRef> work{from};
    while (!work.empty()) {
        HRef cur = work.front();
        work.pop_front();
        const HVertexRecord* rec = find(cur);
        if (!rec) continue;
        for (const auto& be : rec->back_edges) {
            if (be == to) return true;
            if (be.step > to.step && seen.insert(be).second) work.push_back(be);
        }
    }
    return false;
}

std::set<HRef> PhView::ancestry(const HRef& from) const {
    std::set<HRef> seen;
    std::deque<HRef> work;
    if (has(from)) {
        seen.insert(from);
        work.push_back(from);
    }
    while (!work.empty()) {
        HRef cur = work.front();
        work.pop_front();
        const HVertexRecord* rec = find(cur);
        if (!rec) continue;
        for (const auto& be : rec->back_edges) {
            if (has(be) && seen.insert(be).second) work.push_back(be);
        }
    }
    return seen;
}

bool operator==(const PhView& a, const PhView& b) {
    if (a.byzantine_ != b.byzantine_) return false;
    if (a.records_.size() != b.records_.size()) return false;
    auto ita = a.records_.begin();
    auto itb = b.records_.begin();
    for (; ita != a.records_.end(); ++ita, ++itb) {
        if (ita->first != itb->first) return false;
        if (ita->second.size() != itb->second.size()) return false;
        auto va = ita->second.begin();
        auto vb = itb->second.begin();
        for (; va != ita->second.end(); ++va, ++vb) {
            if (va->first != vb->first || !(va->second == vb->second)) return false;
        }
    }
    return true;
}

// --------------------------------------------------------------------------
// Anchors and commits

ParticipantId elect_anchor(std::uint64_t seed, std::uint32_t step, std::uint32_t n) {
    Bytes enc = to_bytes("anchor-coin");
    for (int i = 0; i < 8; ++i) enc.push_back(static_cast<std::uint8_t>(seed >> (8 * i)));
    put_u32(enc, step);
    Digest d = sha256(enc);
    std::uint64_t x = 0;
    for (int i = 0; i < 8; ++i) x |= std::uint64_t(d[i]) << (8 * i);
    return static_cast<ParticipantId>(x % n);
}

bool anchor_supported(const PhView& view, const HRef& anchor, const ProtocolParams& params) {
    return view.support(anchor) >= params.commit_quorum();
}

namespace {

std::vector<HRef> topo_order(const PhView& view, const std::vector<HRef>& bundle) {
    std::set<HRef> members(bundle.begin(), bundle.end());
    std::map<HRef, std::uint32_t> indegree;
    std::map<HRef, std::vector<HRef>> dependents;
    for (const auto& r : bundle) {
        indegree[r];
        const HVertexRecord* rec = view.find(r);
        if (!rec) continue;
        for (const auto& be : rec->back_edges) {
            if (members.count(be)) {
                ++indegree[r];
                dependents[be].push_back(r);
            }
        }
    }
    std::set<HRef> ready;
    for (const auto& [r, deg] : indegree)
        if (deg == 0) ready.insert(r);
    std::vector<HRef> out;
    out.reserve(bundle.size());
    while (!ready.empty()) {
        HRef next = *ready.begin();  // smallest (step, owner, digest)
        ready.erase(ready.begin());
        out.push_back(next);
        for (const auto& dep : dependents[next])
            if (--indegree[dep] == 0) ready.insert(dep);
    }
    return out;
}

}  // namespace

void CommitEngine::commit(const PhView& view, const HRef& anchor) {
    std::set<HRef> closure = view.ancestry(anchor);
    std::vector<HRef> bundle;
    for (const auto& r : closure) {
        if (bundled_.count(r)) continue;
        bundled_.insert(r);
        if (view.byzantine().count(r.owner)) continue;  // invalidated rows stay out
        bundle.push_back(r);
    }
    CommittedBlock block;
    block.step = anchor.step;
    block.owner = anchor.owner;
    block.bundle = bundle;  // closure iterates sorted
    block.order = topo_order(view, bundle);
    Bytes enc;
    put_href(enc, anchor);
    for (const auto& r : block.order) put_href(enc, r);
    block.block_digest = sha256(enc);
    record_.blocks.push_back(std::move(block));
    for (auto& a : anchors_)
        if (a.step == anchor.step) a.committed = true;
}

std::size_t CommitEngine::evaluate(const PhView& view, std::uint32_t settled_step) {
    std::size_t added = 0;
    while (next_anchor_step_ + 2 <= static_cast<std::int64_t>(settled_step)) {
        auto a = static_cast<std::uint32_t>(next_anchor_step_);
        next_anchor_step_ += 2;
        ParticipantId owner = elect_anchor(coin_seed_, a, params_.n);
        Anchor info{a, owner, 0, false};
        const HVertexRecord* rec =
            view.byzantine().count(owner) ? nullptr : view.sole(owner, a);
        if (rec) {
            HRef ref = rec->href();
            info.support = view.support(ref);
            if (info.support >= params_.commit_quorum()) {
                // Chained commitment: earlier skipped anchors reachable from
                // this one commit first, in step order.
                std::vector<HRef> chain;
                HRef cur = ref;
                for (std::int64_t b = static_cast<std::int64_t>(a) - 2;
                     b >= last_committed_ + 2; b -= 2) {
                    auto bs = static_cast<std::uint32_t>(b);
                    ParticipantId ob = elect_anchor(coin_seed_, bs, params_.n);
                    if (view.byzantine().count(ob)) continue;
                    const HVertexRecord* rb = view.sole(ob, bs);
                    if (!rb) continue;
                    if (view.reachable(cur, rb->href())) {
                        chain.push_back(rb->href());
                        cur = rb->href();
                    }
                }
                anchors_.push_back(info);
                for (auto it = chain.rbegin(); it != chain.rend(); ++it) {
                    commit(view, *it);
                    ++added;
                }
                commit(view, ref);
                ++added;
                last_committed_ = a;
                anchors_.back().committed = true;
                continue;
            }
        }
        anchors_.push_back(info);
    }
    return added;
}

std::string CommitRecord::to_jsonl() const {
    std::string out;
    for (const auto& b : blocks) {
        out += "{\"step\":" + std::to_string(b.step) + ",\"owner\":" + std::to_string(b.owner) +
               ",\"block\":\"" + hex_prefix(b.block_digest, 16) + "\",\"bundle\":[";
        for (std::size_t i = 0; i < b.bundle.size(); ++i) {
            if (i) out += ',';
            out += '"' + ref_token(b.bundle[i]) + '"';
        }
        out += "],\"order\":[";
        for (std::size_t i = 0; i < b.order.size(); ++i) {
            if (i) out += ',';
            out += '"' + ref_token(b.order[i]) + '"';
        }
        out += "]}\n";
    }
    return out;
}

std::vector<CommittedBlock> partial_order(const CommitRecord& commits) {
    return commits.blocks;
}

std::vector<HRef> total_order(const CommitRecord& commits) {
    std::vector<HRef> out;
    for (const auto& b : commits.blocks) out.insert(out.end(), b.order.begin(), b.order.end());
    return out;
}

// --------------------------------------------------------------------------
// Driver

namespace {

struct Tracker {
    ParticipantId id = 0;
    bool honest = true;
    bool crashed = false;
    PhView view;
    std::vector<HVertexRecord> delta_buffer;
    std::map<std::uint32_t, std::vector<HRef>> auths;  // step -> authenticated refs
    std::uint32_t steps_produced = 0;
};

Bytes make_tx(ParticipantId owner, std::uint32_t step, std::uint32_t i, bool bogus = false) {
    return to_bytes((bogus ? "bogus-tx-" : "tx-") + std::to_string(owner) + "-" +
                    std::to_string(step) + "-" + std::to_string(i));
}

}  // namespace

OrderingRunResult run_ordering(const OrderingConfig& cfg) {
    cfg.params.validate();
    const std::uint32_t n = cfg.params.n;
    std::vector<Tracker> trackers(n);
    for (ParticipantId i = 0; i < n; ++i) {
        trackers[i].id = i;
        auto it = cfg.adversaries.find(i);
        trackers[i].honest = it == cfg.adversaries.end() || it->second.kind == AdversaryKind::honest;
    }
    std::vector<CommitEngine> engines;
    engines.reserve(n);
    for (ParticipantId i = 0; i < n; ++i) engines.emplace_back(cfg.seed, cfg.params);

    OrderingRunResult result;

    for (std::uint32_t t = 0; t < cfg.steps; ++t) {
        SimConfig sim;
        sim.seed = DetRng::derive(cfg.net_seed ? cfg.net_seed : cfg.seed, 7000 + t);
        sim.params = cfg.params;
        sim.t_slot_ms = cfg.t_slot_ms;
        sim.loss = cfg.loss;
        sim.delay = cfg.delay;
        sim.e_max = cfg.e_max;
        sim.record_trace = false;

        std::map<ParticipantId, Bytes> payloads;
        for (ParticipantId i = 0; i < n; ++i) {
            Tracker& tr = trackers[i];
            auto adv = cfg.adversaries.find(i);
            bool is_crash = adv != cfg.adversaries.end() &&
                            adv->second.kind == AdversaryKind::crash;
            if (is_crash && t >= adv->second.crash_at) tr.crashed = true;
            if (tr.crashed) {
                sim.adversaries[i] = AdversarySpec{AdversaryKind::crash, 0, {}, {}};
                payloads[i] = to_bytes("crashed");
                continue;
            }

            // Step gate: 2f+1 previous-step authentications, minus any that
            // point at rows since flagged.
            bool can_produce = t == 0;
            std::vector<HRef> back_edges;
            if (t > 0) {
                auto ait = tr.auths.find(t - 1);
                if (ait != tr.auths.end()) {
                    for (const auto& ref : ait->second)
                        if (!tr.view.byzantine().count(ref.owner)) back_edges.push_back(ref);
                    can_produce = back_edges.size() >= cfg.params.advance_quorum();
                }
            }
            if (!can_produce) {
                sim.listeners.insert(i);
                payloads[i] = to_bytes("idle");
                continue;
            }

            HVertexRecord rec;
            rec.owner = i;
            rec.step = t;
            bool bogus = adv != cfg.adversaries.end() &&
                         adv->second.kind == AdversaryKind::wrong_value &&
                         t == cfg.adversary_step;
            for (std::uint32_t k = 0; k < cfg.txs_per_batch; ++k)
                rec.txs.push_back(make_tx(i, t, k, bogus));
            rec.back_edges = back_edges;
            rec.h_delta.swap(tr.delta_buffer);
            payloads[i] = rec.encode();
            tr.steps_produced++;

            if (adv != cfg.adversaries.end() &&
                adv->second.kind == AdversaryKind::equivocator && t == cfg.adversary_step) {
                HVertexRecord alt = rec;
                alt.txs.clear();
                for (std::uint32_t k = 0; k < cfg.txs_per_batch; ++k)
                    alt.txs.push_back(make_tx(i, t, 1000 + k));
                AdversarySpec spec = adv->second;
                spec.variant_payload = alt.encode();
                sim.adversaries[i] = spec;
            }
            if (!tr.view.byzantine().empty())
                sim.known_byzantine[i] = tr.view.byzantine();
        }

        RunResult inst = run(sim, payloads);
        result.total_ms += inst.sim_end_ms;

        for (ParticipantId i = 0; i < n; ++i) {
            Tracker& tr = trackers[i];
            if (tr.crashed) continue;
            const LocalDag& dag = inst.final_dags[i];
            for (ParticipantId b : dag.byzantine()) tr.view.mark_byzantine(b);

            // Step-t batches: full, non-invalidated round-0 vertices.
            std::vector<const Vertex*> batches;
            for (const auto& [ref, v] : dag.vertices()) {
                if (ref.round != 0 || !v.full() || dag.invalidated().count(ref)) continue;
                batches.push_back(&v);
            }
            std::vector<HVertexRecord> fresh;
            for (const Vertex* v : batches) {
                auto rec = decode_batch(*v->payload);
                if (!rec || rec->step != t || rec->owner != v->ref.origin) continue;
                tr.view.insert(*rec, &fresh);
            }
            for (auto& r : fresh) tr.delta_buffer.push_back(std::move(r));

            // Authentication: each valid step-t batch, once n-f are at hand.
            std::vector<HRef> valid;
            for (ParticipantId o = 0; o < n; ++o) {
                if (tr.view.byzantine().count(o)) continue;
                const HVertexRecord* rec = tr.view.sole(o, t);
                if (rec) valid.push_back(rec->href());
            }
            if (valid.size() >= cfg.params.auth_quorum()) tr.auths[t] = valid;

            engines[i].evaluate(tr.view, t);
        }
    }

    bool agreement = true;
    bool converged = true;
    std::string reference_log;
    const PhView* reference_view = nullptr;
    bool have_ref = false;
    for (ParticipantId i = 0; i < n; ++i) {
        Tracker& tr = trackers[i];
        OrderingParticipantResult pr;
        pr.id = i;
        pr.honest = tr.honest && !tr.crashed;
        pr.steps_produced = tr.steps_produced;
        pr.commits = engines[i].record();
        pr.commit_log = pr.commits.to_jsonl();
        pr.view = tr.view;
        if (pr.honest) {
            if (!have_ref) {
                reference_log = pr.commit_log;
                reference_view = &tr.view;
                have_ref = true;
            } else {
                if (pr.commit_log != reference_log) agreement = false;
                if (!(tr.view == *reference_view)) converged = false;
            }
        }
        result.participants.push_back(std::move(pr));
    }
    result.agreement = have_ref && agreement;
    result.views_converged = have_ref && converged;
    return result;
}

}  // namespace dagcast
