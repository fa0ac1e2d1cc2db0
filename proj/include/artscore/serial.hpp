#pragma once

#include <array>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "artscore/core.hpp"

namespace artscore {

// ---------------------------------------------------------------------------
// Deterministic number formatting (shortest round-trip form), so every text
// artifact is byte-for-byte reproducible.
// ---------------------------------------------------------------------------

inline std::string format_double(double v) {
    std::array<char, 64> buf{};
    const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return std::string(buf.data(), res.ptr);
}

inline double parse_double(const std::string& s) {
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size())
        throw config_error("not a number: '" + s + "'");
    return v;
}

inline std::uint64_t parse_u64(const std::string& s) {
    std::uint64_t v = 0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size())
        throw config_error("not an unsigned integer: '" + s + "'");
    return v;
}

inline std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : s) {
        if (ch == sep) {
            out.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(ch);
        }
    }
    out.push_back(cur);
    return out;
}

// ---------------------------------------------------------------------------
// CRC-32 (IEEE), used as the checkpoint payload checksum.
// ---------------------------------------------------------------------------

inline std::uint32_t crc32(const unsigned char* data, std::size_t n,
                           std::uint32_t crc = 0) {
    static const auto table = [] {
        std::array<std::uint32_t, 256> t{};
        for (std::uint32_t i = 0; i < 256; ++i) {
            std::uint32_t c = i;
            for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
            t[i] = c;
        }
        return t;
    }();
    crc = ~crc;
    for (std::size_t i = 0; i < n; ++i) crc = table[(crc ^ data[i]) & 0xFFu] ^ (crc >> 8);
    return ~crc;
}

inline std::uint32_t crc32(const std::vector<unsigned char>& data) {
    return crc32(data.data(), data.size());
}

// ---------------------------------------------------------------------------
// Little-endian primitives, assembled bytewise for portability.
// ---------------------------------------------------------------------------

namespace le {

inline void put_u16(std::vector<unsigned char>& out, std::uint16_t v) {
    out.push_back(static_cast<unsigned char>(v & 0xFF));
    out.push_back(static_cast<unsigned char>((v >> 8) & 0xFF));
}

inline void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xFF));
}

inline void put_f32(std::vector<unsigned char>& out, float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    put_u32(out, bits);
}

struct Reader {
    const unsigned char* p;
    const unsigned char* end;

    std::size_t remaining() const { return static_cast<std::size_t>(end - p); }

    std::uint16_t u16() {
        if (remaining() < 2) throw io_error("checkpoint truncated");
        std::uint16_t v = static_cast<std::uint16_t>(p[0] | (p[1] << 8));
        p += 2;
        return v;
    }
    std::uint32_t u32() {
        if (remaining() < 4) throw io_error("checkpoint truncated");
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
        p += 4;
        return v;
    }
    float f32() {
        const std::uint32_t bits = u32();
        float v;
        std::memcpy(&v, &bits, 4);
        return v;
    }
};

}  // namespace le

// ---------------------------------------------------------------------------
// The "ARSC" parameter container: magic bytes, u16 format version, then
// length-prefixed blocks of little-endian IEEE-754 32-bit values, and a
// trailing CRC-32 of the payload. Block 0 is a descriptor block; shapes and
// tags are encoded as exactly representable small floats.
// ---------------------------------------------------------------------------

inline constexpr char kArscMagic[4] = {'A', 'R', 'S', 'C'};
inline constexpr std::uint16_t kArscVersion = 1;

struct ArscBlocks {
    std::vector<std::vector<float>> blocks;
};

inline std::vector<unsigned char> arsc_encode(const ArscBlocks& file) {
    std::vector<unsigned char> payload;
    le::put_u32(payload, static_cast<std::uint32_t>(file.blocks.size()));
    for (const auto& block : file.blocks) {
        le::put_u32(payload, static_cast<std::uint32_t>(block.size()));
        for (float v : block) le::put_f32(payload, v);
    }
    std::vector<unsigned char> out;
    out.reserve(payload.size() + 10);
    out.insert(out.end(), kArscMagic, kArscMagic + 4);
    le::put_u16(out, kArscVersion);
    out.insert(out.end(), payload.begin(), payload.end());
    le::put_u32(out, crc32(payload));
    return out;
}

inline ArscBlocks arsc_decode(const std::vector<unsigned char>& bytes) {
    if (bytes.size() < 10 || std::memcmp(bytes.data(), kArscMagic, 4) != 0)
        throw io_error("not an ARSC container");
    le::Reader header{bytes.data() + 4, bytes.data() + bytes.size()};
    const std::uint16_t version = header.u16();
    if (version != kArscVersion)
        throw io_error("unsupported ARSC version " + std::to_string(version));
    const std::size_t payload_len = bytes.size() - 10;
    const unsigned char* payload = bytes.data() + 6;
    le::Reader trailer{payload + payload_len, bytes.data() + bytes.size()};
    const std::uint32_t stored = trailer.u32();
    if (crc32(payload, payload_len) != stored)
        throw io_error("ARSC checksum mismatch");

    le::Reader r{payload, payload + payload_len};
    ArscBlocks file;
    const std::uint32_t count = r.u32();
    file.blocks.resize(count);
    for (auto& block : file.blocks) {
        const std::uint32_t n = r.u32();
        block.resize(n);
        for (auto& v : block) v = r.f32();
    }
    if (r.remaining() != 0) throw io_error("ARSC trailing bytes in payload");
    return file;
}

inline void write_file_bytes(const std::filesystem::path& path,
                             const std::vector<unsigned char>& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw io_error("cannot open for writing: " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw io_error("write failed: " + path.string());
}

inline std::vector<unsigned char> read_file_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot open for reading: " + path.string());
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                     std::istreambuf_iterator<char>());
    return bytes;
}

inline void write_file_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw io_error("cannot open for writing: " + path.string());
    out << text;
    if (!out) throw io_error("write failed: " + path.string());
}

inline std::string read_file_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot open for reading: " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Seeds are 64-bit; a float block carries them as four exact 16-bit chunks.
inline void push_seed_chunks(std::vector<float>& block, std::uint64_t seed) {
    for (int i = 0; i < 4; ++i)
        block.push_back(static_cast<float>((seed >> (16 * i)) & 0xFFFFu));
}

inline std::uint64_t pop_seed_chunks(const std::vector<float>& block, std::size_t& pos) {
    std::uint64_t seed = 0;
    for (int i = 0; i < 4; ++i) {
        if (pos >= block.size()) throw io_error("ARSC descriptor truncated");
        seed |= static_cast<std::uint64_t>(static_cast<std::uint32_t>(block[pos++]))
                << (16 * i);
    }
    return seed;
}

// ---------------------------------------------------------------------------
// Flat key=value configuration / report files. '#' starts a comment; keys
// keep insertion order so emitted files are deterministic.
// ---------------------------------------------------------------------------

class KvFile {
  public:
    KvFile() = default;

    static KvFile parse(const std::string& text) {
        KvFile kv;
        std::istringstream in(text);
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            const std::size_t hash = line.find('#');
            if (hash != std::string::npos) line = line.substr(0, hash);
            line = trim(line);
            if (line.empty()) continue;
            const std::size_t eq = line.find('=');
            if (eq == std::string::npos)
                throw config_error("config line " + std::to_string(lineno) +
                                   ": expected key=value");
            kv.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
        }
        return kv;
    }

    static KvFile load(const std::filesystem::path& path) {
        return parse(read_file_text(path));
    }

    void set(const std::string& key, const std::string& value) {
        auto it = index_.find(key);
        if (it == index_.end()) {
            index_[key] = entries_.size();
            entries_.emplace_back(key, value);
        } else {
            entries_[it->second].second = value;
        }
    }

    bool has(const std::string& key) const { return index_.count(key) > 0; }

    std::optional<std::string> get(const std::string& key) const {
        auto it = index_.find(key);
        if (it == index_.end()) return std::nullopt;
        return entries_[it->second].second;
    }

    std::string require(const std::string& key) const {
        auto v = get(key);
        if (!v) throw config_error("missing required config key: " + key);
        return *v;
    }

    std::string get_or(const std::string& key, const std::string& fallback) const {
        auto v = get(key);
        return v ? *v : fallback;
    }

    double get_double(const std::string& key, double fallback) const {
        auto v = get(key);
        return v ? parse_double(*v) : fallback;
    }

    std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const {
        auto v = get(key);
        return v ? parse_u64(*v) : fallback;
    }

    std::size_t get_size(const std::string& key, std::size_t fallback) const {
        return static_cast<std::size_t>(get_u64(key, fallback));
    }

    bool get_bool(const std::string& key, bool fallback) const {
        auto v = get(key);
        if (!v) return fallback;
        if (*v == "true" || *v == "1" || *v == "on") return true;
        if (*v == "false" || *v == "0" || *v == "off") return false;
        throw config_error("key " + key + ": expected a boolean, got '" + *v + "'");
    }

    std::vector<double> get_doubles(const std::string& key) const {
        std::vector<double> out;
        for (const auto& item : split(require(key), ','))
            out.push_back(parse_double(trim(item)));
        return out;
    }

    std::vector<std::string> get_strings(const std::string& key) const {
        std::vector<std::string> out;
        for (const auto& item : split(require(key), ',')) out.push_back(trim(item));
        return out;
    }

    const std::vector<std::pair<std::string, std::string>>& entries() const {
        return entries_;
    }

    std::string to_string() const {
        std::string out;
        for (const auto& [k, v] : entries_) {
            out += k;
            out += '=';
            out += v;
            out += '\n';
        }
        return out;
    }

    void save(const std::filesystem::path& path) const { write_file_text(path, to_string()); }

  private:
    std::vector<std::pair<std::string, std::string>> entries_;
    std::unordered_map<std::string, std::size_t> index_;
};

}  // namespace artscore
