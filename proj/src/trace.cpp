#include "dagcast/trace.hpp"

#include <cinttypes>
#include <cstdio>

namespace dagcast {

std::string Trace::to_csv() const {
    std::string out = "time_ms,participant,event,peer,round,ref,detail\n";
    char buf[64];
    for (const auto& e : events) {
        std::snprintf(buf, sizeof buf, "%.3f", e.t_ms);
        out += buf;
        out += ',';
        out += std::to_string(e.actor);
        out += ',';
        out += e.kind;
        out += ',';
        out += std::to_string(e.peer);
        out += ',';
        out += std::to_string(e.round);
        out += ',';
        out += e.ref;
        out += ',';
        out += e.detail;
        out += '\n';
    }
    return out;
}

Digest Trace::hash() const {
    std::string csv = to_csv();
    return sha256(reinterpret_cast<const std::uint8_t*>(csv.data()), csv.size());
}

std::size_t Trace::count(const std::string& kind) const {
    std::size_t n = 0;
    for (const auto& e : events)
        if (e.kind == kind) ++n;
    return n;
}

}  // namespace dagcast
