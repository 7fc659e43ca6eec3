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

#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string_view>
#include <utility>
#include <vector>

#include "holmes/pcap.hpp"

namespace holmes::triage {

enum class DominantL4 {
    Udp,
    Tcp,
    Mixed,
};

std::string_view to_string(DominantL4 value);
std::optional<DominantL4> parse_dominant_l4(std::string_view text);

inline constexpr double kDefaultMixedThreshold = 0.7;

/// L2 routing decision: where the evidence collector should look and which
/// branch (UDP/TCP/MIXED) it should take.
struct TriageResult {
    DominantL4 dominant_l4 = DominantL4::Mixed;
    double dominance_score = 0.0;
    pcap::Ipv4Addr victim_ip;
    double top_dst_share = 0.0;
    std::size_t sample_count = 0;
};

/// The incident window held no packets; there is nothing to route.
struct EmptyInput : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Deterministic systematic 1-in-n sampling (indices 0, n, 2n, ...). The
/// sampled view stands in for an sFlow export of the same window.
std::vector<pcap::DissectedPacket> sample_packets(std::span<const pcap::DissectedPacket> packets,
                                                  std::size_t rate_n);

/// Majority L4 protocol and its share of the samples; MIXED below the
/// threshold.
std::pair<DominantL4, double> compute_dominance(std::span<const pcap::DissectedPacket> samples,
                                                double mixed_threshold = kDefaultMixedThreshold);

/// Destination IP with the most samples, ties to the numerically smallest
/// address; second element is that destination's share.
std::pair<pcap::Ipv4Addr, double> guess_victim(std::span<const pcap::DissectedPacket> samples);

TriageResult run_triage(std::span<const pcap::DissectedPacket> window,
                        std::size_t rate_n,
                        double mixed_threshold = kDefaultMixedThreshold);

/// Pre-sampled packets from a JSONL export (ts_s, src_ip, dst_ip, l4,
/// src_port, dst_port), for deployments that already have an sFlow feed.
std::vector<pcap::DissectedPacket> load_presampled_jsonl(const std::filesystem::path& path);

}  // namespace holmes::triage
