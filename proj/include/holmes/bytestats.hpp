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

#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string_view>

namespace holmes::bytestats {

// Printable ASCII range used for fingerprints and anchor extraction.
inline constexpr std::uint8_t kPrintableLo = 0x20;
inline constexpr std::uint8_t kPrintableHi = 0x7e;

inline bool is_printable(std::uint8_t b) {
    return b >= kPrintableLo && b <= kPrintableHi;
}

/// Per-payload byte statistics: full 256-bin histogram plus the count of
/// printable bytes. Everything downstream (entropy, printable ratio) is
/// derived from this one pass over the payload.
struct ByteStats {
    std::array<std::uint64_t, 256> histogram{};
    std::uint64_t printable = 0;
    std::uint64_t total = 0;
};

enum class Kernel {
    Scalar,
    Avx2,
};

/// Accumulates stats with the fastest kernel the host CPU supports.
ByteStats accumulate(std::span<const std::uint8_t> data);

/// Explicit-kernel entry point for equivalence tests and benchmarks.
/// Calling an unavailable kernel falls back to scalar.
ByteStats accumulate_with(Kernel kernel, std::span<const std::uint8_t> data);

bool kernel_available(Kernel kernel);
Kernel active_kernel();
std::string_view kernel_name(Kernel kernel);

// Reference implementation; the baseline every variant must match.
ByteStats accumulate_scalar(std::span<const std::uint8_t> data);

#if defined(__x86_64__) || defined(__i386__)
// Compiled with -mavx2 in its own translation unit; call only when
// kernel_available(Kernel::Avx2) is true.
ByteStats accumulate_avx2(std::span<const std::uint8_t> data);
#endif

}  // namespace holmes::bytestats
