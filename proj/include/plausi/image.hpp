// Copyright 2026 The plausi Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
#pragma once

#include "plausi/error.hpp"
#include "plausi/geometry.hpp"

#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace plausi {

/// Full-resolution binary instance mask.
struct BinaryMask
{
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> data; // row-major, 0 or 1

    BinaryMask() = default;
    BinaryMask(int w, int h) : width(w), height(h), data(static_cast<std::size_t>(w) * h, 0) {}

    bool at(int u, int v) const { return data[static_cast<std::size_t>(v) * width + u] != 0; }
    void set(int u, int v, bool on) { data[static_cast<std::size_t>(v) * width + u] = on ? 1 : 0; }

    long long area() const
    {
        long long a = 0;
        for (auto p : data) a += p != 0;
        return a;
    }

    /// Tight bounds of the set pixels; empty rectangle for an empty mask.
    PixelRect bounds() const
    {
        int u0 = width, v0 = height, u1 = 0, v1 = 0;
        for (int v = 0; v < height; ++v) {
            for (int u = 0; u < width; ++u) {
                if (at(u, v)) {
                    u0 = std::min(u0, u);
                    v0 = std::min(v0, v);
                    u1 = std::max(u1, u + 1);
                    v1 = std::max(v1, v + 1);
                }
            }
        }
        if (u1 == 0) {
            return {};
        }
        return {u0, v0, u1, v1};
    }

    friend bool operator==(const BinaryMask&, const BinaryMask&) = default;
};

/// Writes a mask as binary PGM (P5, maxval 255, set pixels 255).
inline void write_mask_pgm(const std::string& path, const BinaryMask& mask)
{
    std::ofstream os(path, std::ios::binary);
    if (!os) {
        throw DataError("cannot open " + path + " for writing");
    }
    os << "P5\n" << mask.width << ' ' << mask.height << "\n255\n";
    for (auto p : mask.data) {
        os.put(static_cast<char>(p ? 255 : 0));
    }
}

/// Reads a P5 PGM; pixels above half of maxval are set.
inline BinaryMask read_mask_pgm(const std::string& path)
{
    std::ifstream is(path, std::ios::binary);
    if (!is) {
        throw DataError("cannot open mask " + path);
    }
    const auto token = [&is, &path]() {
        std::string t;
        while (is >> std::ws && is.peek() == '#') {
            std::string comment;
            std::getline(is, comment);
        }
        if (!(is >> t)) {
            throw DataError("truncated PGM header in " + path);
        }
        return t;
    };
    if (token() != "P5") {
        throw DataError(path + " is not a binary PGM");
    }
    int w = 0, h = 0, maxval = 0;
    try {
        w = std::stoi(token());
        h = std::stoi(token());
        maxval = std::stoi(token());
    } catch (const std::exception&) {
        throw DataError("malformed PGM header in " + path);
    }
    if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 255) {
        throw DataError("unsupported PGM geometry in " + path);
    }
    is.get(); // single whitespace after maxval
    BinaryMask mask(w, h);
    std::vector<char> buf(static_cast<std::size_t>(w) * h);
    if (!is.read(buf.data(), static_cast<std::streamsize>(buf.size()))) {
        throw DataError("truncated PGM pixel data in " + path);
    }
    for (std::size_t i = 0; i < buf.size(); ++i) {
        mask.data[i] = static_cast<unsigned char>(buf[i]) * 2 > maxval ? 1 : 0;
    }
    return mask;
}

} // namespace plausi
