// Copyright (c) 2026 the relight authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "relight/errors.hpp"

namespace relight {

inline std::vector<uint8_t> read_file(const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "rb");
    if (!f) throw data_error("cannot open '" + path + "' for reading");
    std::fseek(f, 0, SEEK_END);
    long sz = std::ftell(f);
    std::fseek(f, 0, SEEK_SET);
    std::vector<uint8_t> out(sz > 0 ? size_t(sz) : 0);
    size_t got = out.empty() ? 0 : std::fread(out.data(), 1, out.size(), f);
    std::fclose(f);
    if (got != out.size()) throw data_error("short read from '" + path + "'");
    return out;
}

// Writes to a sibling temp file, then renames into place so readers never
// observe a partial file.
inline void write_file_atomic(const std::string& path, const void* data, size_t size) {
    std::string tmp = path + ".tmp";
    std::FILE* f = std::fopen(tmp.c_str(), "wb");
    if (!f) throw data_error("cannot open '" + tmp + "' for writing");
    size_t put = size ? std::fwrite(data, 1, size, f) : 0;
    bool flushed = std::fflush(f) == 0;
    std::fclose(f);
    if (put != size || !flushed) {
        std::remove(tmp.c_str());
        throw data_error("short write to '" + tmp + "'");
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::remove(tmp.c_str());
        throw data_error("rename '" + tmp + "' -> '" + path + "' failed: " + ec.message());
    }
}

inline void write_file_atomic(const std::string& path, const std::vector<uint8_t>& bytes) {
    write_file_atomic(path, bytes.data(), bytes.size());
}

inline void write_file_atomic(const std::string& path, const std::string& text) {
    write_file_atomic(path, text.data(), text.size());
}

}  // namespace relight
