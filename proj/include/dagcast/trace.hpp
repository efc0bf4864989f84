#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dagcast/types.hpp"

namespace dagcast {

/// One simulator event. Shared CSV schema:
///   time_ms,participant,event,peer,round,ref,detail
/// `peer` is the counterparty (sender, receiver or offender), -1 when not
/// applicable.
struct TraceEvent {
    double t_ms = 0;
    std::string kind;
    ParticipantId actor = 0;
    std::int64_t peer = -1;
    Round round = 0;
    std::string ref;
    std::string detail;
};

struct Trace {
    std::vector<TraceEvent> events;
    bool enabled = true;

    void add(double t_ms, std::string kind, ParticipantId actor, std::int64_t peer,
             Round round, std::string ref = "", std::string detail = "") {
        if (!enabled) return;
        events.push_back(TraceEvent{t_ms, std::move(kind), actor, peer, round,
                                    std::move(ref), std::move(detail)});
    }

    std::string to_csv() const;
    Digest hash() const;

    std::size_t count(const std::string& kind) const;
};

}  // namespace dagcast
