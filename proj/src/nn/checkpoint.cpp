// Copyright 2026 The sbmatch Authors
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

#include "sbmatch/nn/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <vector>

#include "sbmatch/nn/network.hpp"

namespace sbm::nn {
namespace {

class Writer {
public:
    explicit Writer(std::ofstream& out) : out_(out) {}
    void bytes(const void* p, std::size_t n) { out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n)); }
    template <class U>
    void le(U v) {
        unsigned char buf[sizeof(U)];
        for (std::size_t i = 0; i < sizeof(U); ++i) buf[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xFF);
        bytes(buf, sizeof(U));
    }
    void f32s(const std::vector<float>& xs) {
        for (float x : xs) le(std::bit_cast<std::uint32_t>(x));
    }

private:
    std::ofstream& out_;
};

class Reader {
public:
    Reader(std::ifstream& in, std::string path) : in_(in), path_(std::move(path)) {}
    void bytes(void* p, std::size_t n) {
        in_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
        if (in_.gcount() != static_cast<std::streamsize>(n)) throw FormatError(path_ + ": truncated checkpoint");
    }
    template <class U>
    U le() {
        unsigned char buf[sizeof(U)];
        bytes(buf, sizeof(U));
        U v = 0;
        for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(buf[i]) << (8 * i);
        return v;
    }
    void f32s(std::vector<float>& xs) {
        for (float& x : xs) x = std::bit_cast<float>(le<std::uint32_t>());
    }

private:
    std::ifstream& in_;
    std::string path_;
};

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const std::string& manifest, std::uint64_t parent_digest,
                     const ParamStore<float>& params, bool include_moments) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError(path.string(), "cannot open checkpoint for writing");
    Writer w(out);
    w.bytes(kCheckpointMagic, sizeof(kCheckpointMagic));
    w.le<std::uint32_t>(kCheckpointVersion);
    w.le<std::uint64_t>(manifest_digest(manifest));
    w.le<std::uint32_t>(static_cast<std::uint32_t>(manifest.size()));
    w.bytes(manifest.data(), manifest.size());
    w.le<std::uint64_t>(parent_digest);
    w.le<std::uint32_t>(static_cast<std::uint32_t>(params.entries().size()));
    w.le<std::uint8_t>(include_moments ? 1 : 0);
    for (const auto& e : params.entries()) {
        w.le<std::uint32_t>(static_cast<std::uint32_t>(e.name.size()));
        w.bytes(e.name.data(), e.name.size());
        w.le<std::uint32_t>(static_cast<std::uint32_t>(e.shape.size()));
        for (int d : e.shape) w.le<std::uint32_t>(static_cast<std::uint32_t>(d));
        w.f32s(e.value);
        if (include_moments) {
            w.f32s(e.moment1);
            w.f32s(e.moment2);
            w.le<std::uint64_t>(static_cast<std::uint64_t>(e.step));
        }
    }
    if (!out) throw IoError(path.string(), "checkpoint write failed");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw IoError(path.string(), "checkpoint file does not exist");
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(path.string(), "cannot open checkpoint");
    const std::string where = path.string();
    Reader r(in, where);
    char magic[8];
    r.bytes(magic, sizeof(magic));
    if (std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0) throw FormatError(where + ": not a checkpoint file");
    const auto version = r.le<std::uint32_t>();
    if (version != kCheckpointVersion)
        throw FormatError(where + ": unsupported checkpoint version " + std::to_string(version));
    Checkpoint ck;
    ck.manifest_digest = r.le<std::uint64_t>();
    const auto mlen = r.le<std::uint32_t>();
    if (mlen > (1u << 24)) throw FormatError(where + ": implausible manifest length");
    ck.manifest.resize(mlen);
    r.bytes(ck.manifest.data(), mlen);
    if (manifest_digest(ck.manifest) != ck.manifest_digest)
        throw FormatError(where + ": architecture manifest digest mismatch");
    ck.parent_digest = r.le<std::uint64_t>();
    const auto count = r.le<std::uint32_t>();
    ck.has_moments = (r.le<std::uint8_t>() & 1u) != 0;
    for (std::uint32_t i = 0; i < count; ++i) {
        const auto nlen = r.le<std::uint32_t>();
        if (nlen > 4096) throw FormatError(where + ": implausible entry name length");
        std::string name(nlen, '\0');
        r.bytes(name.data(), nlen);
        const auto rank = r.le<std::uint32_t>();
        if (rank == 0 || rank > 8) throw FormatError(where + ": bad rank for '" + name + "'");
        std::vector<int> shape(rank);
        std::uint64_t total = 1;
        for (auto& d : shape) {
            d = static_cast<int>(r.le<std::uint32_t>());
            if (d <= 0) throw FormatError(where + ": bad dimension for '" + name + "'");
            total *= static_cast<std::uint64_t>(d);
        }
        if (total > (1ull << 28)) throw FormatError(where + ": entry '" + name + "' too large");
        auto& e = ck.params.add(name, shape);
        r.f32s(e.value);
        if (ck.has_moments) {
            r.f32s(e.moment1);
            r.f32s(e.moment2);
            e.step = static_cast<std::int64_t>(r.le<std::uint64_t>());
        }
    }
    return ck;
}

std::uint64_t params_digest(const ParamStore<float>& params) {
    std::uint64_t h = fnv1a64("");
    for (const auto& e : params.entries()) {
        h = fnv1a64(e.name, h);
        for (int d : e.shape) h = fnv1a64(std::string_view(reinterpret_cast<const char*>(&d), sizeof(d)), h);
        h = fnv1a64(std::string_view(reinterpret_cast<const char*>(e.value.data()), e.value.size() * sizeof(float)), h);
    }
    return h;
}

}  // namespace sbm::nn
