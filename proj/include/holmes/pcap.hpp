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

#include <compare>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace holmes::pcap {

// ---------------------------------------------------------------------------
// Addresses and transport basics
// ---------------------------------------------------------------------------

/// IPv4 address in host byte order. Ordering is numeric, which is also the
/// tie-break rule wherever two addresses compete (victim guess etc).
struct Ipv4Addr {
    std::uint32_t value = 0;

    auto operator<=>(const Ipv4Addr&) const = default;
};

std::string to_string(Ipv4Addr addr);
std::optional<Ipv4Addr> parse_ipv4(std::string_view text);

enum class L4Proto : std::uint8_t {
    Udp,
    Tcp,
};

std::string_view to_string(L4Proto proto);

/// TCP flag byte straight off the wire (low six bits used).
struct TcpFlags {
    static constexpr std::uint8_t kFin = 0x01;
    static constexpr std::uint8_t kSyn = 0x02;
    static constexpr std::uint8_t kRst = 0x04;
    static constexpr std::uint8_t kPsh = 0x08;
    static constexpr std::uint8_t kAck = 0x10;
    static constexpr std::uint8_t kUrg = 0x20;

    std::uint8_t bits = 0;

    bool fin() const { return bits & kFin; }
    bool syn() const { return bits & kSyn; }
    bool rst() const { return bits & kRst; }
    bool psh() const { return bits & kPsh; }
    bool ack() const { return bits & kAck; }
    bool urg() const { return bits & kUrg; }

    bool operator==(const TcpFlags&) const = default;
};

std::string to_string(TcpFlags flags);

// ---------------------------------------------------------------------------
// Capture records
// ---------------------------------------------------------------------------

/// One raw capture record. Timestamps are normalized to microseconds no
/// matter which magic variant the file used.
struct PacketRecord {
    std::int64_t ts_micros = 0;
    std::uint32_t captured_len = 0;
    std::uint32_t original_len = 0;
    std::vector<std::uint8_t> link_bytes;
};

/// Normalized L2-L4 view of a packet. Exactly one of tcp_flags/udp_length
/// is set, matching l4. payload holds the L4 payload bytes only.
struct DissectedPacket {
    std::int64_t ts_micros = 0;
    Ipv4Addr src_ip;
    Ipv4Addr dst_ip;
    L4Proto l4 = L4Proto::Udp;
    std::uint16_t src_port = 0;
    std::uint16_t dst_port = 0;
    std::optional<TcpFlags> tcp_flags;
    std::optional<std::uint16_t> udp_length;
    std::vector<std::uint8_t> payload;
};

enum class SkipReason {
    NonEthernet,
    NonIPv4,
    NonTcpUdp,
    Truncated,
};

std::string_view to_string(SkipReason reason);

/// First four bytes are not one of the classic capture magics.
struct BadMagic : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// The global header itself is cut short; nothing can be read.
struct TruncatedRecord : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ReadResult {
    std::vector<PacketRecord> records;
    /// True when the byte stream ended inside a record; the records read up
    /// to that point are still returned.
    bool truncated_tail = false;
    std::uint32_t link_type = 1;
};

/// Reads a classic capture stream. Accepts both endiannesses and both the
/// microsecond and nanosecond magics; record timestamps come back in
/// microseconds. Throws BadMagic/TruncatedRecord only when the global
/// header is unusable; a cut-off final record just sets truncated_tail.
ReadResult read_pcap(std::span<const std::uint8_t> bytes);
ReadResult read_pcap_file(const std::filesystem::path& path);

using DissectOutcome = std::variant<DissectedPacket, SkipReason>;

/// Dissects Ethernet/IPv4/{TCP,UDP}. Unsupported or mangled frames come
/// back as a SkipReason; this function never throws on frame content.
/// Single-tag 802.1Q is unwrapped, QinQ is skipped, IPv4 options are
/// honored via IHL, and Ethernet trailer padding is trimmed using the IPv4
/// total length.
DissectOutcome dissect(const PacketRecord& record);

/// Convenience pass over a whole read: dissects every record and drops the
/// skips.
std::vector<DissectedPacket> dissect_all(std::span<const PacketRecord> records);

/// Packets with start_s <= t < end_s, where t is the packet timestamp
/// relative to origin_micros (the replay origin; callers use the first
/// packet of the run). Order preserved.
std::vector<DissectedPacket> slice_window(std::span<const DissectedPacket> packets,
                                          double start_s,
                                          double end_s,
                                          std::int64_t origin_micros = 0);

}  // namespace holmes::pcap
