#include "dagcast/serialize.hpp"

#include <json.hpp>

namespace dagcast {

namespace {

constexpr std::uint32_t kMagic = 0x43474144;  // "DAGC"
constexpr std::uint32_t kVersion = 1;

struct Writer {
    Bytes out;
    void u8(std::uint8_t v) { out.push_back(v); }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void bytes(const std::uint8_t* p, std::size_t n) { out.insert(out.end(), p, p + n); }
    void digest(const Digest& d) { bytes(d.data(), d.size()); }
    void ref(const VertexRef& r) {
        u32(r.origin);
        u32(r.round);
        digest(r.digest);
    }
};

struct Reader {
    const Bytes& in;
    std::size_t pos = 0;
    void need(std::size_t n) const {
        if (pos + n > in.size()) throw ProtocolError("decode_dag: truncated input");
    }
    std::uint8_t u8() {
        need(1);
        return in[pos++];
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= std::uint32_t(in[pos++]) << (8 * i);
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= std::uint64_t(in[pos++]) << (8 * i);
        return v;
    }
    Digest digest() {
        need(32);
        Digest d;
        std::copy_n(in.begin() + static_cast<std::ptrdiff_t>(pos), 32, d.begin());
        pos += 32;
        return d;
    }
    VertexRef ref() {
        VertexRef r;
        r.origin = u32();
        r.round = u32();
        r.digest = digest();
        return r;
    }
    Bytes blob() {
        std::uint64_t n = u64();
        need(n);
        Bytes b(in.begin() + static_cast<std::ptrdiff_t>(pos),
                in.begin() + static_cast<std::ptrdiff_t>(pos + n));
        pos += n;
        return b;
    }
};

Digest digest_from_hex(const std::string& s) {
    if (s.size() != 64) throw ProtocolError("bad digest hex length");
    auto nibble = [](char c) -> std::uint8_t {
        if (c >= '0' && c <= '9') return static_cast<std::uint8_t>(c - '0');
        if (c >= 'a' && c <= 'f') return static_cast<std::uint8_t>(c - 'a' + 10);
        if (c >= 'A' && c <= 'F') return static_cast<std::uint8_t>(c - 'A' + 10);
        throw ProtocolError("bad digest hex digit");
    };
    Digest d{};
    for (std::size_t i = 0; i < 32; ++i)
        d[i] = static_cast<std::uint8_t>((nibble(s[2 * i]) << 4) | nibble(s[2 * i + 1]));
    return d;
}

std::string bytes_to_hex(const Bytes& b) {
    static const char* k = "0123456789abcdef";
    std::string s;
    s.reserve(b.size() * 2);
    for (auto c : b) {
        s.push_back(k[c >> 4]);
        s.push_back(k[c & 0xf]);
    }
    return s;
}

Bytes bytes_from_hex(const std::string& s) {
    if (s.size() % 2 != 0) throw ProtocolError("bad payload hex length");
    Bytes b;
    b.reserve(s.size() / 2);
    auto nibble = [](char c) -> std::uint8_t {
        if (c >= '0' && c <= '9') return static_cast<std::uint8_t>(c - '0');
        if (c >= 'a' && c <= 'f') return static_cast<std::uint8_t>(c - 'a' + 10);
        throw ProtocolError("bad payload hex digit");
    };
    for (std::size_t i = 0; i < s.size(); i += 2)
        b.push_back(static_cast<std::uint8_t>((nibble(s[i]) << 4) | nibble(s[i + 1])));
    return b;
}

LocalDag rebuild(const std::vector<Vertex>& vertices, const std::vector<ParticipantId>& byz,
                 const std::set<VertexRef>& invalidated) {
    LocalDag dag;
    for (ParticipantId p : byz) dag.mark_byzantine(p);
    for (const auto& v : vertices) dag.insert(v);
    if (dag.invalidated() != invalidated)
        throw ProtocolError("decode_dag: invalidated set does not match byzantine history");
    return dag;
}

}  // namespace

Bytes encode_dag(const LocalDag& dag) {
    Writer w;
    w.u32(kMagic);
    w.u32(kVersion);
    w.u64(dag.vertices().size());
    for (const auto& [ref, v] : dag.vertices()) {
        w.ref(ref);
        w.u8(v.payload ? 1 : 0);
        if (v.payload) {
            w.u64(v.payload->size());
            w.bytes(v.payload->data(), v.payload->size());
        }
        w.u8(v.auth ? 1 : 0);
        if (v.auth) w.digest(v.auth->tag);
        w.u64(v.parents.size());
        for (const auto& p : v.parents) w.ref(p);
    }
    w.u64(dag.byzantine().size());
    for (ParticipantId p : dag.byzantine()) w.u32(p);
    w.u64(dag.invalidated().size());
    for (const auto& r : dag.invalidated()) w.ref(r);
    return std::move(w.out);
}

LocalDag decode_dag(const Bytes& data) {
    Reader r{data};
    if (r.u32() != kMagic) throw ProtocolError("decode_dag: bad magic");
    if (r.u32() != kVersion) throw ProtocolError("decode_dag: unsupported version");
    std::uint64_t nv = r.u64();
    std::vector<Vertex> vertices;
    vertices.reserve(nv);
    for (std::uint64_t i = 0; i < nv; ++i) {
        Vertex v;
        v.ref = r.ref();
        if (r.u8()) v.payload = r.blob();
        if (r.u8()) v.auth = Authenticator{r.digest()};
        std::uint64_t np = r.u64();
        for (std::uint64_t j = 0; j < np; ++j) v.parents.insert(r.ref());
        vertices.push_back(std::move(v));
    }
    std::vector<ParticipantId> byz(r.u64());
    for (auto& p : byz) p = r.u32();
    std::set<VertexRef> invalidated;
    std::uint64_t ni = r.u64();
    for (std::uint64_t i = 0; i < ni; ++i) invalidated.insert(r.ref());
    if (r.pos != data.size()) throw ProtocolError("decode_dag: trailing bytes");
    return rebuild(vertices, byz, invalidated);
}

std::string dag_to_json(const LocalDag& dag, int indent) {
    nlohmann::json j;
    j["version"] = kVersion;
    auto ref_json = [](const VertexRef& r) {
        return nlohmann::json{{"origin", r.origin}, {"round", r.round}, {"digest", hex(r.digest)}};
    };
    j["vertices"] = nlohmann::json::array();
    for (const auto& [ref, v] : dag.vertices()) {
        nlohmann::json vj = ref_json(ref);
        vj["payload"] = v.payload ? nlohmann::json(bytes_to_hex(*v.payload)) : nlohmann::json();
        vj["auth"] = v.auth ? nlohmann::json(hex(v.auth->tag)) : nlohmann::json();
        vj["parents"] = nlohmann::json::array();
        for (const auto& p : v.parents) vj["parents"].push_back(ref_json(p));
        j["vertices"].push_back(std::move(vj));
    }
    j["byzantine"] = dag.byzantine();
    j["invalidated"] = nlohmann::json::array();
    for (const auto& r : dag.invalidated()) j["invalidated"].push_back(ref_json(r));
    return j.dump(indent);
}

LocalDag dag_from_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    auto ref_from = [](const nlohmann::json& rj) {
        VertexRef r;
        r.origin = rj.at("origin").get<ParticipantId>();
        r.round = rj.at("round").get<Round>();
        r.digest = digest_from_hex(rj.at("digest").get<std::string>());
        return r;
    };
    std::vector<Vertex> vertices;
    for (const auto& vj : j.at("vertices")) {
        Vertex v;
        v.ref = ref_from(vj);
        if (!vj.at("payload").is_null()) v.payload = bytes_from_hex(vj.at("payload"));
        if (!vj.at("auth").is_null())
            v.auth = Authenticator{digest_from_hex(vj.at("auth").get<std::string>())};
        for (const auto& pj : vj.at("parents")) v.parents.insert(ref_from(pj));
        vertices.push_back(std::move(v));
    }
    std::vector<ParticipantId> byz = j.at("byzantine").get<std::vector<ParticipantId>>();
    std::set<VertexRef> invalidated;
    for (const auto& rj : j.at("invalidated")) invalidated.insert(ref_from(rj));
    return rebuild(vertices, byz, invalidated);
}

}  // namespace dagcast
