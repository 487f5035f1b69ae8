#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "cxrssl/config.hpp"
#include "cxrssl/parameter_set.hpp"

// File layout (all integers little-endian):
//   "CXRSSLCK"                      8-byte magic
//   u32 format_version
//   u32 stage
//   u64 epoch
//   u64 n + n bytes                 config snapshot, `key = value` text
//   u64 n + n bytes                 log text (JSON lines), may be empty
//   u64 blob_count
//   per blob: u64 name length, name, u64 rank, u64 dims[rank]
//   per blob, same order: element_count float32 values
//   u64 FNV-1a hash of every preceding byte

namespace cxrssl::checkpoint {

inline constexpr char kMagic[8] = {'C', 'X', 'R', 'S', 'S', 'L', 'C', 'K'};
inline constexpr std::uint32_t kFormatVersion = 1;

enum class Stage : std::uint32_t { external_backbone = 0, ssl_pretrained = 1, finetuned = 2 };

inline std::string to_string(Stage s) {
    switch (s) {
    case Stage::external_backbone: return "external_backbone";
    case Stage::ssl_pretrained: return "ssl_pretrained";
    case Stage::finetuned: return "finetuned";
    }
    return "?";
}

/// Blob name prefixes inside an envelope.
inline constexpr std::string_view kTargetPrefix = "target.";
inline constexpr std::string_view kVelocityPrefix = "optimizer.velocity.";

struct CheckpointEnvelope {
    std::uint32_t format_version = kFormatVersion;
    Stage stage = Stage::external_backbone;
    std::uint64_t epoch = 0;
    config::TrainConfig config;
    std::string log; ///< per-epoch records accumulated so far
    ParameterSet<float> blobs;

    bool operator==(const CheckpointEnvelope&) const = default;
};

namespace detail {

class Writer {
public:
    void bytes(const void* p, std::size_t n) {
        const auto* c = static_cast<const unsigned char*>(p);
        out_.insert(out_.end(), c, c + n);
    }
    template <typename U>
    void integer(U v) {
        for (std::size_t i = 0; i < sizeof(U); ++i) {
            out_.push_back(static_cast<unsigned char>((static_cast<std::uint64_t>(v) >> (8 * i)) & 0xFFu));
        }
    }
    void text(const std::string& s) {
        integer<std::uint64_t>(s.size());
        bytes(s.data(), s.size());
    }
    std::vector<unsigned char>& buffer() { return out_; }

private:
    std::vector<unsigned char> out_;
};

class Reader {
public:
    Reader(const std::vector<unsigned char>& in, std::size_t end, std::string source)
        : in_(in), end_(end), source_(std::move(source)) {}

    const unsigned char* take(std::size_t n) {
        if (n > end_ - pos_) {
            fail("truncated");
        }
        const unsigned char* p = in_.data() + pos_;
        pos_ += n;
        return p;
    }
    template <typename U>
    U integer() {
        const unsigned char* p = take(sizeof(U));
        std::uint64_t v = 0;
        for (std::size_t i = 0; i < sizeof(U); ++i) {
            v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
        }
        return static_cast<U>(v);
    }
    std::string text(std::size_t limit) {
        const auto n = integer<std::uint64_t>();
        if (n > limit) {
            fail("implausible string length");
        }
        const unsigned char* p = take(static_cast<std::size_t>(n));
        return std::string(reinterpret_cast<const char*>(p), static_cast<std::size_t>(n));
    }
    bool at_end() const { return pos_ == end_; }
    [[noreturn]] void fail(const std::string& why) const {
        throw DataError("corrupt checkpoint " + source_ + ": " + why);
    }

private:
    const std::vector<unsigned char>& in_;
    std::size_t end_;
    std::size_t pos_ = 0;
    std::string source_;
};

inline std::uint64_t hash_bytes(const unsigned char* p, std::size_t n) {
    std::uint64_t h = 1469598103934665603ull;
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 1099511628211ull;
    }
    return h;
}

} // namespace detail

inline std::vector<unsigned char> serialize(const CheckpointEnvelope& env) {
    detail::Writer w;
    w.bytes(kMagic, sizeof kMagic);
    w.integer<std::uint32_t>(env.format_version);
    w.integer<std::uint32_t>(static_cast<std::uint32_t>(env.stage));
    w.integer<std::uint64_t>(env.epoch);
    w.text(config::to_text(env.config));
    w.text(env.log);
    w.integer<std::uint64_t>(env.blobs.size());
    for (const auto& [name, blob] : env.blobs) {
        w.text(name);
        w.integer<std::uint64_t>(blob.rank());
        for (std::size_t d : blob.shape()) {
            w.integer<std::uint64_t>(d);
        }
    }
    for (const auto& [name, blob] : env.blobs) {
        for (float v : blob.values()) {
            w.integer<std::uint32_t>(std::bit_cast<std::uint32_t>(v));
        }
    }
    auto& buf = w.buffer();
    const std::uint64_t h = detail::hash_bytes(buf.data(), buf.size());
    w.integer<std::uint64_t>(h);
    return std::move(buf);
}

inline CheckpointEnvelope deserialize(const std::vector<unsigned char>& bytes, const std::string& source = "<memory>") {
    if (bytes.size() < sizeof kMagic + 8 || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) {
        throw DataError(source + " is not a checkpoint file (bad magic)");
    }
    const std::size_t body = bytes.size() - 8;
    detail::Reader tail(bytes, bytes.size(), source);
    tail.take(body);
    if (tail.integer<std::uint64_t>() != detail::hash_bytes(bytes.data(), body)) {
        tail.fail("checksum mismatch");
    }

    detail::Reader r(bytes, body, source);
    r.take(sizeof kMagic);
    CheckpointEnvelope env;
    env.format_version = r.integer<std::uint32_t>();
    if (env.format_version != kFormatVersion) {
        throw DataError("checkpoint " + source + " has unsupported format version " +
                        std::to_string(env.format_version));
    }
    const auto stage = r.integer<std::uint32_t>();
    if (stage > static_cast<std::uint32_t>(Stage::finetuned)) {
        r.fail("unknown stage tag " + std::to_string(stage));
    }
    env.stage = static_cast<Stage>(stage);
    env.epoch = r.integer<std::uint64_t>();
    try {
        env.config = config::parse_config(r.text(body)).config;
    } catch (const UsageError& e) {
        r.fail(std::string("config snapshot: ") + e.what());
    }
    env.log = r.text(body);
    const auto count = r.integer<std::uint64_t>();
    if (count > body) {
        r.fail("implausible blob count");
    }
    std::vector<std::pair<std::string, Shape>> directory;
    for (std::uint64_t i = 0; i < count; ++i) {
        std::string name = r.text(body);
        const auto rank = r.integer<std::uint64_t>();
        if (rank > 8) {
            r.fail("blob '" + name + "' has rank " + std::to_string(rank));
        }
        Shape shape;
        std::uint64_t elements = 1;
        for (std::uint64_t d = 0; d < rank; ++d) {
            shape.push_back(static_cast<std::size_t>(r.integer<std::uint64_t>()));
            if (shape.back() != 0 && elements > body / shape.back()) {
                r.fail("blob '" + name + "' is larger than the file");
            }
            elements *= shape.back();
        }
        directory.emplace_back(std::move(name), std::move(shape));
    }
    for (auto& [name, shape] : directory) {
        Tensor<float> t(shape);
        for (float& v : t.values()) {
            v = std::bit_cast<float>(r.integer<std::uint32_t>());
        }
        try {
            env.blobs.add(name, std::move(t));
        } catch (const Error&) {
            r.fail("duplicate blob '" + name + "'");
        }
    }
    if (!r.at_end()) {
        r.fail("trailing bytes");
    }
    return env;
}

/// Writes to `<path>.tmp`, then renames over `path`.
inline void save(const std::filesystem::path& path, const CheckpointEnvelope& env) {
    const auto bytes = serialize(env);
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw DataError("cannot write checkpoint " + tmp.string());
        }
        out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
        if (!out) {
            throw DataError("failed writing checkpoint " + tmp.string());
        }
    }
    std::filesystem::rename(tmp, path);
}

inline std::vector<unsigned char> read_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw DataError("cannot open checkpoint " + path.string());
    }
    return std::vector<unsigned char>(std::istreambuf_iterator<char>(in), {});
}

inline CheckpointEnvelope load(const std::filesystem::path& path) { return deserialize(read_bytes(path), path.string()); }

/// Throws unless the envelope's stage is one of `allowed`.
inline void require_stage(const CheckpointEnvelope& env, std::initializer_list<Stage> allowed, const std::string& what) {
    for (Stage s : allowed) {
        if (env.stage == s) {
            return;
        }
    }
    throw UsageError(what + " cannot use a checkpoint of stage " + to_string(env.stage));
}

} // namespace cxrssl::checkpoint
