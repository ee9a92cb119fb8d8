#pragma once

#include <array>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "thg/io.hpp"
#include "thg/network.hpp"
#include "thg/ppo.hpp"

namespace thg {

/// Versioned little-endian binary checkpoint. Layout:
///   magic "THGCKPT\0", u32 version,
///   actor tag block, critic tag block (arch, family strings + widths),
///   actor tensors, critic tensors (count, then name/rows/cols/f64 payload),
///   actor optimizer, critic optimizer (t, then m and v payloads in order),
///   named RNG states (count, then name + 4 x u64).
/// Save -> load -> save is byte-identical.
struct Checkpoint {
    std::string actor_arch, critic_arch;    // parse_arch tags
    std::string actor_family, critic_family;
    int actor_in = 0, actor_out = 0, critic_in = 0, critic_out = 0;
    Model actor, critic;
    AdamState actor_opt, critic_opt;
    std::vector<std::pair<std::string, std::array<uint64_t, 4>>> rng_states;
};

namespace detail {

constexpr char kCkptMagic[8] = {'T', 'H', 'G', 'C', 'K', 'P', 'T', '\0'};
constexpr uint32_t kCkptVersion = 1;

inline void require_little_endian() {
    const uint32_t probe = 1;
    unsigned char b;
    std::memcpy(&b, &probe, 1);
    if (b != 1) throw std::runtime_error("checkpoint: big-endian hosts are not supported");
}

inline void put_u32(std::string& out, uint32_t v) { out.append(reinterpret_cast<const char*>(&v), 4); }
inline void put_i32(std::string& out, int32_t v) { out.append(reinterpret_cast<const char*>(&v), 4); }
inline void put_u64(std::string& out, uint64_t v) { out.append(reinterpret_cast<const char*>(&v), 8); }
inline void put_str(std::string& out, const std::string& s) {
    put_u32(out, static_cast<uint32_t>(s.size()));
    out.append(s);
}
inline void put_tensor_payload(std::string& out, const Tensor2& t) {
    put_i32(out, t.rows);
    put_i32(out, t.cols);
    out.append(reinterpret_cast<const char*>(t.data.data()), t.data.size() * sizeof(double));
}

struct Reader {
    const std::string* buf;
    size_t pos = 0;

    void need(size_t n) const {
        if (pos + n > buf->size()) throw std::runtime_error("checkpoint: truncated file");
    }
    uint32_t u32() {
        need(4);
        uint32_t v;
        std::memcpy(&v, buf->data() + pos, 4);
        pos += 4;
        return v;
    }
    int32_t i32() { return static_cast<int32_t>(u32()); }
    uint64_t u64() {
        need(8);
        uint64_t v;
        std::memcpy(&v, buf->data() + pos, 8);
        pos += 8;
        return v;
    }
    std::string str() {
        uint32_t n = u32();
        need(n);
        std::string s(buf->data() + pos, n);
        pos += n;
        return s;
    }
    Tensor2 tensor_payload() {
        int32_t r = i32();
        int32_t c = i32();
        if (r < 0 || c < 0) throw std::runtime_error("checkpoint: negative tensor shape");
        Tensor2 t(r, c);
        size_t bytes = t.data.size() * sizeof(double);
        need(bytes);
        std::memcpy(t.data.data(), buf->data() + pos, bytes);
        pos += bytes;
        return t;
    }
};

inline void put_params(std::string& out, const ParamSet& ps) {
    put_u32(out, static_cast<uint32_t>(ps.size()));
    for (const auto& e : ps) {
        put_str(out, e.name);
        put_tensor_payload(out, e.value);
    }
}

inline ParamSet read_params(Reader& r) {
    uint32_t n = r.u32();
    ParamSet ps;
    for (uint32_t i = 0; i < n; ++i) {
        std::string name = r.str();
        ps.add(name, r.tensor_payload());
    }
    return ps;
}

inline void put_opt(std::string& out, const AdamState& st) {
    put_i32(out, st.t);
    put_u32(out, static_cast<uint32_t>(st.m.size()));
    for (const Tensor2& t : st.m) put_tensor_payload(out, t);
    for (const Tensor2& t : st.v) put_tensor_payload(out, t);
}

inline AdamState read_opt(Reader& r) {
    AdamState st;
    st.t = r.i32();
    uint32_t n = r.u32();
    for (uint32_t i = 0; i < n; ++i) st.m.push_back(r.tensor_payload());
    for (uint32_t i = 0; i < n; ++i) st.v.push_back(r.tensor_payload());
    return st;
}

}  // namespace detail

inline std::string serialize_checkpoint(const Checkpoint& ck) {
    detail::require_little_endian();
    std::string out;
    out.append(detail::kCkptMagic, 8);
    detail::put_u32(out, detail::kCkptVersion);
    detail::put_str(out, ck.actor_arch);
    detail::put_str(out, ck.actor_family);
    detail::put_i32(out, ck.actor_in);
    detail::put_i32(out, ck.actor_out);
    detail::put_str(out, ck.critic_arch);
    detail::put_str(out, ck.critic_family);
    detail::put_i32(out, ck.critic_in);
    detail::put_i32(out, ck.critic_out);
    detail::put_params(out, ck.actor.params);
    detail::put_params(out, ck.critic.params);
    detail::put_opt(out, ck.actor_opt);
    detail::put_opt(out, ck.critic_opt);
    detail::put_u32(out, static_cast<uint32_t>(ck.rng_states.size()));
    for (auto& [name, s] : ck.rng_states) {
        detail::put_str(out, name);
        for (uint64_t w : s) detail::put_u64(out, w);
    }
    return out;
}

inline Checkpoint deserialize_checkpoint(const std::string& bytes) {
    detail::require_little_endian();
    detail::Reader r{&bytes};
    r.need(8);
    if (std::memcmp(bytes.data(), detail::kCkptMagic, 8) != 0)
        throw std::runtime_error("checkpoint: bad magic");
    r.pos = 8;
    uint32_t version = r.u32();
    if (version != detail::kCkptVersion)
        throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));
    Checkpoint ck;
    ck.actor_arch = r.str();
    ck.actor_family = r.str();
    ck.actor_in = r.i32();
    ck.actor_out = r.i32();
    ck.critic_arch = r.str();
    ck.critic_family = r.str();
    ck.critic_in = r.i32();
    ck.critic_out = r.i32();
    auto rebuild = [](const std::string& arch, const std::string& family, int in, int out_w,
                      ParamSet loaded) {
        Model m;
        m.spec = build_architecture(parse_arch(arch), parse_family(family), in, out_w);
        m.params = std::move(loaded);
        // Validate against a fresh layout: same names, same shapes.
        Rng probe(0);
        Model fresh = init_params(m.spec, probe);
        if (fresh.params.size() != m.params.size())
            throw std::runtime_error("checkpoint: tensor count does not match architecture " + arch);
        for (size_t i = 0; i < fresh.params.size(); ++i) {
            if (fresh.params[i].name != m.params[i].name ||
                !fresh.params[i].value.same_shape(m.params[i].value))
                throw std::runtime_error("checkpoint: tensor " + m.params[i].name +
                                         " does not match architecture " + arch);
        }
        return m;
    };
    ck.actor = rebuild(ck.actor_arch, ck.actor_family, ck.actor_in, ck.actor_out, detail::read_params(r));
    ck.critic = rebuild(ck.critic_arch, ck.critic_family, ck.critic_in, ck.critic_out, detail::read_params(r));
    ck.actor_opt = detail::read_opt(r);
    ck.critic_opt = detail::read_opt(r);
    uint32_t nr = r.u32();
    for (uint32_t i = 0; i < nr; ++i) {
        std::string name = r.str();
        std::array<uint64_t, 4> s{};
        for (uint64_t& w : s) w = r.u64();
        ck.rng_states.emplace_back(std::move(name), s);
    }
    if (r.pos != bytes.size()) throw std::runtime_error("checkpoint: trailing bytes");
    return ck;
}

/// Writes the binary checkpoint plus a plain-text sidecar (<path>.txt) with
/// the content hash and shape summary.
inline void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck) {
    std::string bytes = serialize_checkpoint(ck);
    std::filesystem::create_directories(path.parent_path().empty() ? "." : path.parent_path());
    {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw std::runtime_error("checkpoint: cannot open " + path.string());
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    }
    std::ofstream side(path.string() + ".txt");
    side << "format=thg-checkpoint-v" << detail::kCkptVersion << '\n';
    side << "hash=" << std::to_string(fnv1a(bytes)) << '\n';
    side << "actor=" << ck.actor_arch << '/' << ck.actor_family << " in=" << ck.actor_in
         << " out=" << ck.actor_out << " tensors=" << ck.actor.params.size() << '\n';
    side << "critic=" << ck.critic_arch << '/' << ck.critic_family << " in=" << ck.critic_in
         << " out=" << ck.critic_out << " tensors=" << ck.critic.params.size() << '\n';
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
    return deserialize_checkpoint(read_file_bytes(path));
}

}  // namespace thg
