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

#include "holmes/bytestats.hpp"

namespace holmes::bytestats {

ByteStats accumulate_scalar(std::span<const std::uint8_t> data) {
    ByteStats stats;
    stats.total = data.size();

    // Four sub-histograms break the store-to-load dependency on repeated
    // byte values; merged at the end.
    std::array<std::array<std::uint32_t, 256>, 4> sub{};
    std::size_t i = 0;
    const std::size_t n4 = data.size() & ~std::size_t{3};
    for (; i < n4; i += 4) {
        sub[0][data[i + 0]]++;
        sub[1][data[i + 1]]++;
        sub[2][data[i + 2]]++;
        sub[3][data[i + 3]]++;
    }
    for (; i < data.size(); ++i) {
        sub[0][data[i]]++;
    }

    for (int v = 0; v < 256; ++v) {
        std::uint64_t c = 0;
        for (const auto& s : sub) {
            c += s[v];
        }
        stats.histogram[static_cast<std::size_t>(v)] = c;
    }
    for (int v = kPrintableLo; v <= kPrintableHi; ++v) {
        stats.printable += stats.histogram[static_cast<std::size_t>(v)];
    }
    return stats;
}

}  // namespace holmes::bytestats
