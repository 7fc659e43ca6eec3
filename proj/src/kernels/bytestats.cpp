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

namespace {

bool detect_avx2() {
#if (defined(__x86_64__) || defined(__i386__)) && (defined(__GNUC__) || defined(__clang__))
    return __builtin_cpu_supports("avx2") != 0;
#else
    return false;
#endif
}

Kernel pick_kernel() {
    return detect_avx2() ? Kernel::Avx2 : Kernel::Scalar;
}

}  // namespace

bool kernel_available(Kernel kernel) {
    switch (kernel) {
    case Kernel::Scalar:
        return true;
    case Kernel::Avx2:
        return detect_avx2();
    }
    return false;
}

Kernel active_kernel() {
    static const Kernel k = pick_kernel();
    return k;
}

std::string_view kernel_name(Kernel kernel) {
    switch (kernel) {
    case Kernel::Scalar:
        return "scalar";
    case Kernel::Avx2:
        return "avx2";
    }
    return "unknown";
}

ByteStats accumulate_with(Kernel kernel, std::span<const std::uint8_t> data) {
#if defined(__x86_64__) || defined(__i386__)
    if (kernel == Kernel::Avx2 && kernel_available(Kernel::Avx2)) {
        return accumulate_avx2(data);
    }
#endif
    return accumulate_scalar(data);
}

ByteStats accumulate(std::span<const std::uint8_t> data) {
    return accumulate_with(active_kernel(), data);
}

}  // namespace holmes::bytestats
