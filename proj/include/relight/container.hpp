// Copyright (c) 2026 the relight authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "relight/errors.hpp"
#include "relight/image.hpp"
#include "relight/io.hpp"
#include "relight/tensor.hpp"

namespace relight {

// LXPF tensor container. Binary layout:
//   magic "LXPF", u32 version, then per tensor:
//   u32 dtype (f32=0, f16=1), u32 rank, rank x u64 dims, payload.
// All integers and payload little-endian. A JSON manifest alongside holds
// names, shapes and byte offsets; readers are driven by the manifest and
// verify it against the binary headers.

enum class lxpf_dtype : uint32_t { f32 = 0, f16 = 1 };

struct lxpf_entry {
    std::string name;
    lxpf_dtype dtype = lxpf_dtype::f32;
    tensor t;  // always f32 in memory; f16 applies to storage only
};

struct lxpf_file {
    std::vector<lxpf_entry> entries;
    nlohmann::json manifest;

    const lxpf_entry& at(const std::string& name) const {
        for (const auto& e : entries)
            if (e.name == name) return e;
        throw data_error("lxpf: no tensor named '" + name + "'");
    }
    bool has(const std::string& name) const {
        for (const auto& e : entries)
            if (e.name == name) return true;
        return false;
    }
};

namespace lxpf_detail {

constexpr uint32_t kVersion = 1;
constexpr char kMagic[4] = {'L', 'X', 'P', 'F'};

inline void put_u32(std::vector<uint8_t>& out, uint32_t v) {
    out.push_back(uint8_t(v & 0xff));
    out.push_back(uint8_t((v >> 8) & 0xff));
    out.push_back(uint8_t((v >> 16) & 0xff));
    out.push_back(uint8_t((v >> 24) & 0xff));
}

inline void put_u64(std::vector<uint8_t>& out, uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(uint8_t((v >> (8 * i)) & 0xff));
}

struct reader {
    const std::vector<uint8_t>& buf;
    size_t pos = 0;

    void need(size_t n) const {
        if (pos + n > buf.size())
            throw data_error("lxpf: truncated payload at byte offset " + std::to_string(pos));
    }
    uint32_t u32() {
        need(4);
        uint32_t v = uint32_t(buf[pos]) | uint32_t(buf[pos + 1]) << 8 |
                     uint32_t(buf[pos + 2]) << 16 | uint32_t(buf[pos + 3]) << 24;
        pos += 4;
        return v;
    }
    uint64_t u64() {
        need(8);
        uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= uint64_t(buf[pos + i]) << (8 * i);
        pos += 8;
        return v;
    }
};

inline void append_payload(std::vector<uint8_t>& out, const lxpf_entry& e) {
    if (e.dtype == lxpf_dtype::f16) {
        for (float v : e.t.data) {
            uint16_t h = float_to_half(v);
            out.push_back(uint8_t(h & 0xff));
            out.push_back(uint8_t(h >> 8));
        }
        return;
    }
    size_t base = out.size();
    out.resize(base + e.t.data.size() * 4);
    if constexpr (std::endian::native == std::endian::little) {
        std::memcpy(out.data() + base, e.t.data.data(), e.t.data.size() * 4);
    } else {
        for (size_t i = 0; i < e.t.data.size(); ++i) {
            uint32_t u;
            std::memcpy(&u, &e.t.data[i], 4);
            out[base + 4 * i + 0] = uint8_t(u & 0xff);
            out[base + 4 * i + 1] = uint8_t((u >> 8) & 0xff);
            out[base + 4 * i + 2] = uint8_t((u >> 16) & 0xff);
            out[base + 4 * i + 3] = uint8_t((u >> 24) & 0xff);
        }
    }
}

}  // namespace lxpf_detail

inline const char* to_string(lxpf_dtype d) { return d == lxpf_dtype::f32 ? "f32" : "f16"; }

inline lxpf_dtype lxpf_dtype_from_string(const std::string& s) {
    if (s == "f32") return lxpf_dtype::f32;
    if (s == "f16") return lxpf_dtype::f16;
    throw data_error("lxpf: unknown dtype '" + s + "'");
}

// Serializes entries; returns the binary blob and fills the manifest.
inline std::vector<uint8_t> encode_lxpf(const std::vector<lxpf_entry>& entries,
                                        nlohmann::json& manifest,
                                        const nlohmann::json& meta = nlohmann::json::object()) {
    using namespace lxpf_detail;
    std::vector<uint8_t> out;
    out.insert(out.end(), kMagic, kMagic + 4);
    put_u32(out, kVersion);

    nlohmann::json tensors = nlohmann::json::array();
    for (const auto& e : entries) {
        if (int64_t(e.t.data.size()) != tensor::numel_of(e.t.dims))
            throw usage_error("lxpf: tensor '" + e.name + "' data size disagrees with dims");
        uint64_t offset = out.size();
        put_u32(out, uint32_t(e.dtype));
        put_u32(out, uint32_t(e.t.dims.size()));
        for (int64_t d : e.t.dims) put_u64(out, uint64_t(d));
        size_t payload_start = out.size();
        append_payload(out, e);
        tensors.push_back({{"name", e.name},
                           {"dtype", to_string(e.dtype)},
                           {"dims", e.t.dims},
                           {"offset", offset},
                           {"payload_bytes", out.size() - payload_start}});
    }
    manifest = {{"format", "LXPF"}, {"version", kVersion}, {"tensors", tensors}, {"meta", meta}};
    return out;
}

inline lxpf_file decode_lxpf(const std::vector<uint8_t>& bin, const nlohmann::json& manifest) {
    using namespace lxpf_detail;
    reader rd{bin};
    rd.need(8);
    if (std::memcmp(bin.data(), kMagic, 4) != 0) throw data_error("lxpf: bad magic");
    rd.pos = 4;
    uint32_t version = rd.u32();
    if (version != kVersion)
        throw data_error("lxpf: unsupported version " + std::to_string(version));

    if (!manifest.is_object() || manifest.value("format", "") != "LXPF" ||
        !manifest.contains("tensors") || !manifest["tensors"].is_array())
        throw data_error("lxpf: malformed manifest");
    if (manifest.value("version", 0u) != version)
        throw data_error("lxpf: manifest/payload disagreement: version");

    lxpf_file out;
    out.manifest = manifest;
    uint64_t prev_end = 8;
    for (const auto& jt : manifest["tensors"]) {
        lxpf_entry e;
        e.name = jt.at("name").get<std::string>();
        e.dtype = lxpf_dtype_from_string(jt.at("dtype").get<std::string>());
        e.t.dims = jt.at("dims").get<std::vector<int64_t>>();
        uint64_t offset = jt.at("offset").get<uint64_t>();
        if (offset < prev_end)
            throw data_error("lxpf: manifest/payload disagreement: overlapping offsets at tensor '" +
                             e.name + "'");

        rd.pos = size_t(offset);
        uint32_t dtype = rd.u32();
        uint32_t rank = rd.u32();
        if (dtype != uint32_t(e.dtype) || rank != e.t.dims.size())
            throw data_error("lxpf: manifest/payload disagreement at tensor '" + e.name + "'");
        for (int64_t d : e.t.dims)
            if (rd.u64() != uint64_t(d))
                throw data_error("lxpf: manifest/payload disagreement at tensor '" + e.name + "'");

        int64_t n = tensor::numel_of(e.t.dims);
        e.t.data.resize(size_t(n));
        if (e.dtype == lxpf_dtype::f16) {
            rd.need(size_t(n) * 2);
            for (int64_t i = 0; i < n; ++i) {
                uint16_t h = uint16_t(bin[rd.pos + 2 * size_t(i)]) |
                             uint16_t(bin[rd.pos + 2 * size_t(i) + 1]) << 8;
                e.t.data[size_t(i)] = half_to_float(h);
            }
            rd.pos += size_t(n) * 2;
        } else {
            rd.need(size_t(n) * 4);
            for (int64_t i = 0; i < n; ++i) {
                uint32_t u = uint32_t(bin[rd.pos + 4 * size_t(i)]) |
                             uint32_t(bin[rd.pos + 4 * size_t(i) + 1]) << 8 |
                             uint32_t(bin[rd.pos + 4 * size_t(i) + 2]) << 16 |
                             uint32_t(bin[rd.pos + 4 * size_t(i) + 3]) << 24;
                std::memcpy(&e.t.data[size_t(i)], &u, 4);
            }
            rd.pos += size_t(n) * 4;
        }
        uint64_t declared = jt.at("payload_bytes").get<uint64_t>();
        if (declared != rd.pos - offset - 8 - 8 * e.t.dims.size())
            throw data_error("lxpf: manifest/payload disagreement at tensor '" + e.name + "'");
        prev_end = rd.pos;
        out.entries.push_back(std::move(e));
    }
    return out;
}

inline void write_lxpf(const std::string& bin_path, const std::string& manifest_path,
                       const std::vector<lxpf_entry>& entries,
                       const nlohmann::json& meta = nlohmann::json::object()) {
    nlohmann::json manifest;
    std::vector<uint8_t> bin = encode_lxpf(entries, manifest, meta);
    write_file_atomic(bin_path, bin);
    write_file_atomic(manifest_path, manifest.dump(2) + "\n");
}

inline lxpf_file read_lxpf(const std::string& bin_path, const std::string& manifest_path) {
    std::vector<uint8_t> bin = read_file(bin_path);
    nlohmann::json manifest;
    try {
        manifest = nlohmann::json::parse(read_file(manifest_path));
    } catch (const nlohmann::json::exception& e) {
        throw data_error(std::string("lxpf: manifest parse failure: ") + e.what());
    }
    return decode_lxpf(bin, manifest);
}

// image3f <-> [H, W, 3] tensor bridges.
inline tensor tensor_from_image(const image3f& img) {
    tensor t({img.height, img.width, 3});
    t.data = img.pixels;
    return t;
}

inline image3f image_from_tensor(const tensor& t) {
    if (t.rank() != 3 || t.dims[2] != 3) throw data_error("lxpf: tensor is not an H x W x 3 image");
    image3f img(int(t.dims[1]), int(t.dims[0]));
    img.pixels = t.data;
    return img;
}

}  // namespace relight
