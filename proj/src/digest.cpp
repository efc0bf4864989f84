#include "dagcast/types.hpp"

#include <openssl/sha.h>

#include <cstring>

namespace dagcast {

Digest sha256(const std::uint8_t* data, std::size_t len) {
    Digest out{};
    SHA256(data, len, out.data());
    return out;
}

Digest sha256(const Bytes& data) {
    return sha256(data.data(), data.size());
}

std::string hex(const Digest& d) {
    static const char* k = "0123456789abcdef";
    std::string s;
    s.reserve(64);
    for (auto b : d) {
        s.push_back(k[b >> 4]);
        s.push_back(k[b & 0xf]);
    }
    return s;
}

std::string hex_prefix(const Digest& d, std::size_t bytes) {
    return hex(d).substr(0, 2 * bytes);
}

namespace {

void put_u32(Bytes& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u64(Bytes& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

}  // namespace

Digest payload_digest(ParticipantId origin, Round round, const Bytes& payload) {
    Bytes enc;
    enc.reserve(16 + payload.size());
    put_u32(enc, origin);
    put_u32(enc, round);
    put_u64(enc, payload.size());
    enc.insert(enc.end(), payload.begin(), payload.end());
    return sha256(enc);
}

namespace {

// Per-origin key known to the simulation framework. Real deployments would
// use signatures; the threat model only needs tags that verify
// deterministically and that honest code never mints for foreign origins.
Digest origin_key(ParticipantId origin) {
    Bytes enc = to_bytes("dagcast-key");
    put_u32(enc, origin);
    return sha256(enc);
}

Digest auth_tag(ParticipantId origin, Round round, const Digest& digest) {
    Bytes enc = to_bytes("dagcast-auth");
    Digest key = origin_key(origin);
    enc.insert(enc.end(), key.begin(), key.end());
    put_u32(enc, origin);
    put_u32(enc, round);
    enc.insert(enc.end(), digest.begin(), digest.end());
    return sha256(enc);
}

}  // namespace

Authenticator mint_authenticator(ParticipantId origin, Round round, const Digest& digest) {
    return Authenticator{auth_tag(origin, round, digest)};
}

bool verify_authenticator(const Authenticator& auth, ParticipantId origin, Round round,
                          const Digest& digest) {
    return auth.tag == auth_tag(origin, round, digest);
}

Vertex make_vertex(ParticipantId origin, Round round, Bytes payload,
                   std::set<VertexRef> parents) {
    VertexRef ref{origin, round, payload_digest(origin, round, payload)};
    Authenticator auth = mint_authenticator(origin, round, ref.digest);
    return Vertex{ref, std::move(payload), std::move(parents), auth};
}

std::string VertexRef::to_string() const {
    return "p" + std::to_string(origin) + "[" + std::to_string(round) + "]@" +
           hex_prefix(digest);
}

}  // namespace dagcast
