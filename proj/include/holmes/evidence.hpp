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

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "holmes/pcap.hpp"
#include "holmes/triage.hpp"

namespace holmes::evidence {

// ---------------------------------------------------------------------------
// Payload statistics
// ---------------------------------------------------------------------------

/// Fraction of bytes in [0x20, 0x7e]. Empty payload yields 0.
double printable_ratio(std::span<const std::uint8_t> payload);

/// Shannon entropy of the byte histogram in bits per byte, range [0, 8].
/// Empty payload yields 0.
double shannon_entropy(std::span<const std::uint8_t> payload);

/// Printable bytes kept as-is, everything else dropped. Always one line.
std::string ascii_render(std::span<const std::uint8_t> payload);

// ---------------------------------------------------------------------------
// Anchors: short printable substrings a report may later quote verbatim
// ---------------------------------------------------------------------------

enum class AnchorClass : int {
    DottedOid = 1,     // digits and dots, >= 3 dots, not an IPv4 literal
    HttpHeader = 2,    // "Name:" token or an "HTTP/" prefix
    KeySemicolon = 3,  // key/value fragment terminated by ';'
    DomainLike = 4,    // dotted labels with an alphabetic TLD
    Plain = 5,
};

std::string_view to_string(AnchorClass cls);

AnchorClass classify_anchor(std::string_view text);

/// True for dotted-quad IPv4 literals. Keeps addresses embedded in URLs out
/// of the DottedOid class, which would otherwise misroute them.
bool is_ipv4_literal(std::string_view text);

/// Up to `max_anchors` candidate strings from one payload. Candidates are
/// the maximal printable runs of length >= 4 plus sub-candidates carved out
/// of each run (';'-terminated fragments, "Name:" tokens, embedded dotted
/// numeric identifiers). Ranked by class ascending, then length descending,
/// then first occurrence; exact duplicates collapse.
std::vector<std::string> extract_anchors(std::span<const std::uint8_t> payload,
                                         std::size_t max_anchors);

// ---------------------------------------------------------------------------
// Hexdump
// ---------------------------------------------------------------------------

/// Classic 16-bytes-per-line dump: 8-digit hex offset, two 8-byte groups,
/// ASCII gutter. Payloads needing more than `max_lines` lines are cut at
/// `max_lines` data lines plus one truncation marker line; the marker does
/// not count against the cap.
std::string hexdump_excerpt(std::span<const std::uint8_t> payload,
                            std::size_t max_lines);

// ---------------------------------------------------------------------------
// Aggregates
// ---------------------------------------------------------------------------

struct UdpLengthMode {
    std::uint16_t length = 0;
    std::size_t count = 0;
    double share = 0.0;  // count / UDP datagrams considered
};

/// The selection handed to udp_length_modes held no UDP datagrams.
struct NoUdpPackets : std::runtime_error {
    NoUdpPackets() : std::runtime_error("no UDP packets in selection") {}
};

/// Top-k most frequent udp.length values, ties toward the smaller length.
std::vector<UdpLengthMode> udp_length_modes(std::span<const pcap::DissectedPacket> packets,
                                            std::size_t top_k);

struct TcpFlagStats {
    std::size_t total = 0;
    double syn_only_ratio = 0.0;
    double ack_only_ratio = 0.0;
    double synack_ratio = 0.0;
    double rst_ratio = 0.0;
    double other_ratio = 0.0;
};

/// Flag-combination ratios over the TCP packets in the selection. The
/// buckets form a disjoint partition (synack, then syn_only, then ack_only,
/// then rst, then other), so the ratios sum to 1 whenever total > 0.
TcpFlagStats compute_tcp_flag_stats(std::span<const pcap::DissectedPacket> packets);

// ---------------------------------------------------------------------------
// Evidence pack
// ---------------------------------------------------------------------------

struct EvidenceBudget {
    std::size_t max_scan_packets = 5000;
    std::size_t max_samples = 8;
    std::size_t max_hexdump_lines_per_sample = 8;
    std::size_t max_ascii_excerpt_chars = 160;
    std::size_t max_anchors_per_sample = 6;
    std::size_t top_k_udp_modes = 3;
};

enum class SampleSource {
    Primary,    // dst == victim and L4 matches the dominant branch
    Secondary,  // fallback when no packet matched the PRIMARY filter
};

std::string_view to_string(SampleSource source);

struct PayloadFingerprint {
    double printable = 0.0;
    double entropy = 0.0;
    std::string ascii_excerpt;
    std::vector<std::string> anchors;
    std::string hexdump;
};

struct PacketSample {
    std::size_t index = 0;  // 1-based position within the pack
    SampleSource source = SampleSource::Primary;
    pcap::L4Proto l4 = pcap::L4Proto::Udp;
    pcap::Ipv4Addr src_ip;
    pcap::Ipv4Addr dst_ip;
    std::uint16_t src_port = 0;
    std::uint16_t dst_port = 0;
    std::optional<std::uint16_t> udp_length;
    std::optional<pcap::TcpFlags> tcp_flags;
    std::size_t payload_len = 0;
    PayloadFingerprint fingerprint;
};

struct EvidencePack {
    std::string incident_id;
    double window_start_s = 0.0;
    double window_end_s = 0.0;
    std::size_t scan_packets = 0;  // packets actually scanned (budget cap)
    double top_src_share = 0.0;
    bool no_primary_cluster = false;
    triage::TriageResult triage;
    std::vector<UdpLengthMode> udp_modes;
    std::optional<TcpFlagStats> tcp_stats;
    std::vector<PacketSample> samples;
    /// Byte-exact text handed to the detective. Audit replay depends on
    /// this surviving the JSON round trip unchanged.
    std::string canonical_text;
};

/// The incident window held no packets at all.
struct EmptyWindow : std::runtime_error {
    EmptyWindow() : std::runtime_error("evidence window has no packets") {}
};

EvidencePack build_evidence_pack(std::span<const pcap::DissectedPacket> window,
                                 const triage::TriageResult& triage,
                                 const std::string& incident_id,
                                 double window_start_s,
                                 double window_end_s,
                                 const EvidenceBudget& budget = {});

/// Deterministic sectioned text (HEADER / TRIAGE / UDP_LENGTH_MODES /
/// TCP_FLAG_STATS / SAMPLES). Equal packs serialize byte-identically.
std::string serialize_pack(const EvidencePack& pack);

/// Machine form. pack_from_json(pack_to_json(p)) preserves canonical_text
/// byte-for-byte.
nlohmann::ordered_json pack_to_json(const EvidencePack& pack);
EvidencePack pack_from_json(const nlohmann::json& j);

nlohmann::ordered_json triage_to_json(const triage::TriageResult& result);
triage::TriageResult triage_from_json(const nlohmann::json& j);

/// Fixed three decimals. Every ratio in the serialized pack goes through
/// this, so reports can quote those numbers verbatim.
std::string fmt3(double value);

/// Seconds with trailing zeros trimmed ("577" or "12.5").
std::string fmt_seconds(double value);

}  // namespace holmes::evidence
