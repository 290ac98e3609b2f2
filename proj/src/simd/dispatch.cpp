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

#include <cstdlib>
#include <stdexcept>
#include <string>

#include "sbmatch/simd/kernels.hpp"

namespace sbm::simd {

std::string_view isa_name(Isa isa) {
    switch (isa) {
        case Isa::scalar: return "scalar";
        case Isa::avx2: return "avx2";
        case Isa::neon: return "neon";
    }
    return "unknown";
}

bool isa_available(Isa isa) {
    switch (isa) {
        case Isa::scalar: return true;
        case Isa::avx2:
#if (defined(__x86_64__) || defined(_M_X64)) && (defined(__GNUC__) || defined(__clang__))
            return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
            return false;
#endif
        case Isa::neon:
#if defined(__aarch64__)
            return true;
#else
            return false;
#endif
    }
    return false;
}

const KernelTable& kernels_for(Isa isa) {
    if (!isa_available(isa))
        throw std::invalid_argument("SIMD back end not available: " + std::string(isa_name(isa)));
    switch (isa) {
#if defined(__x86_64__) || defined(_M_X64)
        case Isa::avx2: return detail::avx2_table;
#endif
#if defined(__aarch64__)
        case Isa::neon: return detail::neon_table;
#endif
        default: return detail::scalar_table;
    }
}

namespace {

const KernelTable& select_best() {
    if (const char* force = std::getenv("SBMATCH_SIMD"); force && std::string(force) == "scalar")
        return detail::scalar_table;
    if (isa_available(Isa::avx2)) return kernels_for(Isa::avx2);
    if (isa_available(Isa::neon)) return kernels_for(Isa::neon);
    return detail::scalar_table;
}

}  // namespace

const KernelTable& kernels() {
    static const KernelTable& table = select_best();
    return table;
}

}  // namespace sbm::simd
