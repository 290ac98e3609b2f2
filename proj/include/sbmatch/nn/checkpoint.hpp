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

#pragma once

// Checkpoint file format (all integers little-endian):
//
//   magic      8 bytes   "SBMCKPT\0"
//   version    u32       1
//   digest     u64       FNV-1a 64 of the manifest text
//   mlen       u32       manifest length in bytes
//   manifest   mlen bytes
//   parent     u64       parameter digest of the checkpoint this one was built
//                        on (refiner -> matcher), 0 if none
//   count      u32       number of entries
//   flags      u8        bit 0: Adam moments and step counters present
//   entries, each:
//     u32 name length, name bytes, u32 rank, rank x u32 dims,
//     prod(dims) x f32 values
//     [flags & 1]: prod(dims) x f32 first moment, prod(dims) x f32 second
//                  moment, u64 step
//
// Loading verifies the magic, version, and that the stored digest matches the
// stored manifest text.

#include <cstdint>
#include <filesystem>
#include <string>

#include "sbmatch/nn/param_store.hpp"

namespace sbm::nn {

inline constexpr char kCheckpointMagic[8] = {'S', 'B', 'M', 'C', 'K', 'P', 'T', '\0'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
    std::string manifest;
    std::uint64_t manifest_digest = 0;
    std::uint64_t parent_digest = 0;
    bool has_moments = false;
    ParamStore<float> params;
};

void save_checkpoint(const std::filesystem::path& path, const std::string& manifest, std::uint64_t parent_digest,
                     const ParamStore<float>& params, bool include_moments);

Checkpoint load_checkpoint(const std::filesystem::path& path);

// Digest of names, shapes and values; identifies a trained parameter set.
std::uint64_t params_digest(const ParamStore<float>& params);

}  // namespace sbm::nn
