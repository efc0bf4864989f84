#pragma once

#include <algorithm>
#include <array>
#include <compare>
#include <cstdint>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace dagcast {

using ParticipantId = std::uint32_t;
using Round = std::uint32_t;
using Bytes = std::vector<std::uint8_t>;

inline Bytes to_bytes(const std::string& s) {
    return Bytes(s.begin(), s.end());
}

/// 32-byte content digest.
using Digest = std::array<std::uint8_t, 32>;

std::string hex(const Digest& d);
std::string hex_prefix(const Digest& d, std::size_t bytes = 4);

struct ProtocolError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Raised when a message carries an authenticator that does not verify.
/// The threat model forbids forgery, so seeing one means the harness itself
/// is broken, not the protocol.
struct ForgedMessageError : ProtocolError {
    using ProtocolError::ProtocolError;
};

struct QueryError : ProtocolError {
    using ProtocolError::ProtocolError;
};

struct ProtocolParams {
    std::uint32_t n = 4;
    std::uint32_t f = 1;
    Round r_max = 8;
    /// Completeness covers rounds 0..history_depth of every participant.
    Round history_depth = 1;

    void validate() const {
        if (n < 3 * f + 1)
            throw ProtocolError("ProtocolParams: n must be at least 3f+1");
        if (r_max < 2)
            throw ProtocolError("ProtocolParams: r_max must be at least 2");
        if (history_depth < 1)
            throw ProtocolError("ProtocolParams: history_depth must be at least 1");
    }

    /// Originals needed to advance a round.
    std::uint32_t advance_quorum() const { return 2 * f + 1; }
    /// Receipts needed before a step batch is authenticated.
    std::uint32_t auth_quorum() const { return n - f; }
    /// Support needed to commit an anchor.
    std::uint32_t commit_quorum() const { return f + 1; }

    friend bool operator==(const ProtocolParams&, const ProtocolParams&) = default;
};

/// Identity of one participant's vertex at one round. Two refs that agree on
/// (origin, round) but not on digest are the raw material of equivocation
/// evidence.
struct VertexRef {
    ParticipantId origin = 0;
    Round round = 0;
    Digest digest{};

    /// Canonical order is (round, origin, digest); serialization and all
    /// deterministic iteration rely on it.
    friend std::strong_ordering operator<=>(const VertexRef& a, const VertexRef& b) {
        if (auto c = a.round <=> b.round; c != 0) return c;
        if (auto c = a.origin <=> b.origin; c != 0) return c;
        return a.digest <=> b.digest;
    }
    friend bool operator==(const VertexRef& a, const VertexRef& b) {
        return a.round == b.round && a.origin == b.origin && a.digest == b.digest;
    }

    std::string to_string() const;
};

/// Unforgeable token binding (origin, round, digest). Stands in for a real
/// signature: only the origin's own protocol logic mints tags, and the
/// simulator enforces that nobody else ever fabricates one.
struct Authenticator {
    Digest tag{};
    friend bool operator==(const Authenticator&, const Authenticator&) = default;
    friend std::strong_ordering operator<=>(const Authenticator&, const Authenticator&) = default;
};

Digest sha256(const std::uint8_t* data, std::size_t len);
Digest sha256(const Bytes& data);

/// digest = H(canonical encoding of (origin, round, payload)).
Digest payload_digest(ParticipantId origin, Round round, const Bytes& payload);

Authenticator mint_authenticator(ParticipantId origin, Round round, const Digest& digest);
bool verify_authenticator(const Authenticator& auth, ParticipantId origin, Round round,
                          const Digest& digest);

struct Vertex {
    VertexRef ref;
    /// Present = full vertex; absent = digest-only placeholder.
    std::optional<Bytes> payload;
    std::set<VertexRef> parents;
    std::optional<Authenticator> auth;

    bool full() const { return payload.has_value(); }
    bool authenticated() const {
        return auth && verify_authenticator(*auth, ref.origin, ref.round, ref.digest);
    }
};

/// Origin-side constructor: computes the digest and mints the tag.
Vertex make_vertex(ParticipantId origin, Round round, Bytes payload,
                   std::set<VertexRef> parents);

}  // namespace dagcast
