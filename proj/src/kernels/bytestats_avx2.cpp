/*
 * Copyright (C) 2026 The Holmes Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 *
 * SPDX-License-Identifier: Apache-2.0
 */

// Built with -mavx2; keep everything here guarded so non-x86 targets
// simply drop the translation unit.

#include "holmes/bytestats.hpp"

#if defined(__x86_64__) || defined(__i386__)

#include <immintrin.h>

namespace holmes::bytestats {

ByteStats accumulate_avx2(std::span<const std::uint8_t> data) {
    ByteStats stats;
    stats.total = data.size();

    // Printable count: 32 bytes per iteration. x in [lo, hi] is tested as
    // (max_epu8(x, lo) == x) & (min_epu8(x, hi) == x), then movemask+popcnt.
    const __m256i lo = _mm256_set1_epi8(static_cast<char>(kPrintableLo));
    const __m256i hi = _mm256_set1_epi8(static_cast<char>(kPrintableHi));

    const std::uint8_t* p = data.data();
    std::size_t i = 0;
    const std::size_t n32 = data.size() & ~std::size_t{31};
    std::uint64_t printable = 0;
    for (; i < n32; i += 32) {
        const __m256i x = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(p + i));
        const __m256i ge = _mm256_cmpeq_epi8(_mm256_max_epu8(x, lo), x);
        const __m256i le = _mm256_cmpeq_epi8(_mm256_min_epu8(x, hi), x);
        const int mask = _mm256_movemask_epi8(_mm256_and_si256(ge, le));
        printable += static_cast<unsigned>(__builtin_popcount(static_cast<unsigned>(mask)));
    }
    for (std::size_t j = i; j < data.size(); ++j) {
        printable += is_printable(p[j]) ? 1 : 0;
    }
    stats.printable = printable;

    // Histogram stays a gather-free table update; AVX2 has no scatter, so
    // the win is limited to breaking dependency chains across four tables.
    std::array<std::array<std::uint32_t, 256>, 4> sub{};
    std::size_t k = 0;
    const std::size_t n4 = data.size() & ~std::size_t{3};
    for (; k < n4; k += 4) {
        sub[0][p[k + 0]]++;
        sub[1][p[k + 1]]++;
        sub[2][p[k + 2]]++;
        sub[3][p[k + 3]]++;
    }
    for (; k < data.size(); ++k) {
        sub[0][p[k]]++;
    }
    for (int v = 0; v < 256; ++v) {
        stats.histogram[static_cast<std::size_t>(v)] =
            static_cast<std::uint64_t>(sub[0][v]) + sub[1][v] + sub[2][v] + sub[3][v];
    }
    return stats;
}

}  // namespace holmes::bytestats

#endif  // x86
