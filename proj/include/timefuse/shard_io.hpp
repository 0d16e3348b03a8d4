#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <string_view>
#include <vector>

#include <boost/crc.hpp>
#include <json.hpp>

#include "timefuse/error.hpp"
#include "timefuse/meta_dataset.hpp"

namespace timefuse {

inline constexpr std::string_view kShardMagic = "TFSHARD1";
inline constexpr int kShardFormatVersion = 1;

using Crc32c = boost::crc_optimal<32, 0x1EDC6F41, 0xFFFFFFFF, 0xFFFFFFFF, true, true>;

[[nodiscard]] inline std::uint32_t crc32c(const void* data, std::size_t size) {
    Crc32c crc;
    crc.process_bytes(data, size);
    return crc.checksum();
}

[[nodiscard]] inline std::string hex32(std::uint32_t value) {
    char buf[9];
    std::snprintf(buf, sizeof buf, "%08x", value);
    return buf;
}

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
}

[[nodiscard]] inline std::uint32_t get_u32(const unsigned char* p) noexcept {
    return std::uint32_t{p[0]} | std::uint32_t{p[1]} << 8 | std::uint32_t{p[2]} << 16 | std::uint32_t{p[3]} << 24;
}

inline void put_f32(std::string& out, float f) { put_u32(out, std::bit_cast<std::uint32_t>(f)); }

/// Writes via a sibling temp file and rename so readers never see a partial file.
inline void write_atomically(const std::filesystem::path& path, std::string_view bytes) {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) fail(ErrorKind::IoError, "cannot open " + tmp.string() + " for writing");
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out) fail(ErrorKind::IoError, "write to " + tmp.string() + " failed");
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp, ec);
        fail(ErrorKind::IoError, "cannot move shard into place at " + path.string());
    }
}

[[nodiscard]] inline std::string read_all(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::IoError, "cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace detail

[[nodiscard]] inline std::string encode_shard_payload(const MetaShard& shard) {
    std::string payload;
    const std::size_t n = shard.size();
    payload.reserve(4 * n * (kNumMetaFeatures + (shard.schema.k() + 1) * shard.schema.horizon_size()));
    for (const auto& s : shard.samples)
        for (float f : s.features) detail::put_f32(payload, f);
    for (const auto& s : shard.samples)
        for (float f : s.predictions) detail::put_f32(payload, f);
    for (const auto& s : shard.samples)
        for (float f : s.truth) detail::put_f32(payload, f);
    return payload;
}

[[nodiscard]] inline std::string encode_shard(const MetaShard& shard) {
    shard.validate();
    const std::string payload = encode_shard_payload(shard);

    nlohmann::ordered_json manifest;
    manifest["format_version"] = kShardFormatVersion;
    manifest["task_id"] = shard.task_id;
    manifest["split"] = to_string(shard.split);
    manifest["n_samples"] = shard.size();
    manifest["k"] = shard.schema.k();
    manifest["d_meta"] = kNumMetaFeatures;
    manifest["t_out"] = shard.schema.t_out;
    manifest["d"] = shard.schema.d;
    manifest["roster"] = shard.schema.roster;
    manifest["feature_order"] = kMetaFeatureNames;
    manifest["checksum"] = hex32(crc32c(payload.data(), payload.size()));
    const std::string text = manifest.dump();

    std::string out(kShardMagic);
    detail::put_u32(out, static_cast<std::uint32_t>(text.size()));
    out += text;
    out += payload;
    return out;
}

inline void write_shard(const std::filesystem::path& path, const MetaShard& shard) {
    detail::write_atomically(path, encode_shard(shard));
}

[[nodiscard]] inline MetaShard decode_shard(std::string_view bytes) {
    const auto* raw = reinterpret_cast<const unsigned char*>(bytes.data());
    if (bytes.size() < kShardMagic.size()) fail(ErrorKind::TruncatedFile, "file ends inside the magic");
    if (bytes.substr(0, kShardMagic.size()) != kShardMagic) fail(ErrorKind::FormatError, "bad magic; not a shard");
    std::size_t pos = kShardMagic.size();
    if (bytes.size() < pos + 4) fail(ErrorKind::TruncatedFile, "file ends inside the manifest length");
    const std::size_t manifest_len = detail::get_u32(raw + pos);
    pos += 4;
    if (bytes.size() < pos + manifest_len) fail(ErrorKind::TruncatedFile, "file ends inside the manifest");

    nlohmann::json manifest;
    try {
        manifest = nlohmann::json::parse(bytes.substr(pos, manifest_len));
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::FormatError, std::string("manifest is not valid JSON: ") + e.what());
    }
    pos += manifest_len;

    MetaShard shard;
    std::size_t n = 0;
    std::string checksum;
    try {
        if (manifest.at("format_version").get<int>() != kShardFormatVersion) {
            fail(ErrorKind::FormatError, "unsupported shard format_version " + manifest.at("format_version").dump());
        }
        if (manifest.at("d_meta").get<std::size_t>() != kNumMetaFeatures) {
            fail(ErrorKind::FormatError, "shard d_meta must be 24");
        }
        const auto order = manifest.at("feature_order").get<std::vector<std::string>>();
        if (!std::equal(order.begin(), order.end(), kMetaFeatureNames.begin(), kMetaFeatureNames.end())) {
            fail(ErrorKind::FormatError, "shard feature_order differs from the canonical order");
        }
        shard.task_id = manifest.at("task_id").get<std::string>();
        shard.split = parse_split(manifest.at("split").get<std::string>());
        n = manifest.at("n_samples").get<std::size_t>();
        shard.schema.roster = manifest.at("roster").get<std::vector<std::string>>();
        shard.schema.t_out = manifest.at("t_out").get<std::size_t>();
        shard.schema.d = manifest.at("d").get<std::size_t>();
        if (manifest.at("k").get<std::size_t>() != shard.schema.k()) {
            fail(ErrorKind::FormatError, "manifest k disagrees with roster length");
        }
        checksum = manifest.at("checksum").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::FormatError, std::string("malformed manifest: ") + e.what());
    }
    if (shard.schema.k() < 2 || shard.schema.t_out == 0 || shard.schema.d == 0) {
        fail(ErrorKind::FormatError, "manifest declares an empty or single-model shard");
    }
    try {
        require_unique_roster(shard.schema.roster);
    } catch (const Error& e) {
        fail(ErrorKind::FormatError, e.what());
    }

    const std::size_t h = shard.schema.horizon_size();
    const std::size_t k = shard.schema.k();
    const std::size_t floats = n * (kNumMetaFeatures + k * h + h);
    const std::size_t available = bytes.size() - pos;
    if (available < 4 * floats) {
        fail(ErrorKind::TruncatedFile, "payload has " + std::to_string(available) + " bytes, expected " +
                                           std::to_string(4 * floats));
    }
    if (available > 4 * floats) fail(ErrorKind::FormatError, "trailing bytes after the payload");
    if (hex32(crc32c(raw + pos, 4 * floats)) != checksum) {
        fail(ErrorKind::ChecksumMismatch, "payload CRC32C does not match manifest checksum " + checksum);
    }

    auto next = [&]() {
        const float f = std::bit_cast<float>(detail::get_u32(raw + pos));
        pos += 4;
        if (!std::isfinite(f)) fail(ErrorKind::FormatError, "payload contains NaN or Inf");
        return f;
    };
    shard.samples.resize(n);
    for (auto& s : shard.samples)
        for (auto& f : s.features) f = next();
    for (auto& s : shard.samples) {
        s.predictions.resize(k * h);
        for (auto& f : s.predictions) f = next();
    }
    for (auto& s : shard.samples) {
        s.truth.resize(h);
        for (auto& f : s.truth) f = next();
    }
    return shard;
}

[[nodiscard]] inline MetaShard read_shard(const std::filesystem::path& path) {
    return decode_shard(detail::read_all(path));
}

}  // namespace timefuse
