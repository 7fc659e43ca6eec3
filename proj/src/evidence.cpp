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

#include "holmes/evidence.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <map>

#include "holmes/bytestats.hpp"

namespace holmes::evidence {

namespace {

bool ascii_alpha(char c) {
    return std::isalpha(static_cast<unsigned char>(c)) != 0;
}

bool ascii_alnum(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) != 0;
}

bool ascii_digit(char c) {
    return std::isdigit(static_cast<unsigned char>(c)) != 0;
}

}  // namespace

// ---------------------------------------------------------------------------
// Payload statistics
// ---------------------------------------------------------------------------

double printable_ratio(std::span<const std::uint8_t> payload) {
    if (payload.empty()) {
        return 0.0;
    }
    const auto stats = bytestats::accumulate(payload);
    return static_cast<double>(stats.printable) / static_cast<double>(stats.total);
}

double shannon_entropy(std::span<const std::uint8_t> payload) {
    if (payload.empty()) {
        return 0.0;
    }
    const auto stats = bytestats::accumulate(payload);
    const double n = static_cast<double>(stats.total);
    double entropy = 0.0;
    for (const std::uint64_t bin : stats.histogram) {
        if (bin == 0) {
            continue;
        }
        const double p = static_cast<double>(bin) / n;
        entropy -= p * std::log2(p);
    }
    return entropy;
}

std::string ascii_render(std::span<const std::uint8_t> payload) {
    std::string out;
    out.reserve(payload.size());
    for (const std::uint8_t b : payload) {
        if (bytestats::is_printable(b)) {
            out += static_cast<char>(b);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Anchors
// ---------------------------------------------------------------------------

std::string_view to_string(AnchorClass cls) {
    switch (cls) {
        case AnchorClass::DottedOid: return "dotted_oid";
        case AnchorClass::HttpHeader: return "http_header";
        case AnchorClass::KeySemicolon: return "key_semicolon";
        case AnchorClass::DomainLike: return "domain_like";
        case AnchorClass::Plain: return "plain";
    }
    return "plain";
}

bool is_ipv4_literal(std::string_view text) {
    std::size_t segment = 0;
    std::size_t pos = 0;
    while (segment < 4) {
        std::size_t digits = 0;
        unsigned value = 0;
        while (pos < text.size() && ascii_digit(text[pos])) {
            value = value * 10 + static_cast<unsigned>(text[pos] - '0');
            ++digits;
            ++pos;
        }
        if (digits == 0 || digits > 3 || value > 255) {
            return false;
        }
        ++segment;
        if (segment == 4) {
            break;
        }
        if (pos >= text.size() || text[pos] != '.') {
            return false;
        }
        ++pos;
    }
    return pos == text.size();
}

namespace {

// Digits and dots, at least three dots somewhere, no empty segments, and
// not a plain IPv4 address.
bool is_dotted_numeric_id(std::string_view text) {
    if (text.size() < 4 || text.front() == '.' || text.back() == '.') {
        return false;
    }
    std::size_t dots = 0;
    bool digit = false;
    char prev = '\0';
    for (const char c : text) {
        if (c == '.') {
            if (prev == '.') {
                return false;
            }
            ++dots;
        } else if (ascii_digit(c)) {
            digit = true;
        } else {
            return false;
        }
        prev = c;
    }
    if (dots < 3 || !digit) {
        return false;
    }
    return !is_ipv4_literal(text);
}

// "Name:" with a token of letters, digits, '-' or '_', or a raw "HTTP/"
// status/request line.
bool is_header_like(std::string_view text) {
    if (text.starts_with("HTTP/")) {
        return true;
    }
    const std::size_t colon = text.find(':');
    if (colon == std::string_view::npos || colon == 0 || !ascii_alpha(text[0])) {
        return false;
    }
    for (std::size_t i = 1; i < colon; ++i) {
        const char c = text[i];
        if (!ascii_alnum(c) && c != '-' && c != '_') {
            return false;
        }
    }
    return true;
}

// Dotted labels with an alphabetic final label of length >= 2.
bool is_domain_like(std::string_view text) {
    if (text.find('.') == std::string_view::npos) {
        return false;
    }
    std::size_t start = 0;
    std::string_view last;
    while (true) {
        const std::size_t dot = text.find('.', start);
        const std::string_view label =
            text.substr(start, dot == std::string_view::npos ? dot : dot - start);
        if (label.empty() || label.front() == '-' || label.back() == '-') {
            return false;
        }
        for (const char c : label) {
            if (!ascii_alnum(c) && c != '-') {
                return false;
            }
        }
        last = label;
        if (dot == std::string_view::npos) {
            break;
        }
        start = dot + 1;
    }
    if (last.size() < 2) {
        return false;
    }
    return std::all_of(last.begin(), last.end(), ascii_alpha);
}

}  // namespace

AnchorClass classify_anchor(std::string_view text) {
    if (text.empty()) {
        return AnchorClass::Plain;
    }
    if (is_dotted_numeric_id(text)) {
        return AnchorClass::DottedOid;
    }
    if (is_header_like(text)) {
        return AnchorClass::HttpHeader;
    }
    if (text.size() >= 2 && text.back() == ';') {
        return AnchorClass::KeySemicolon;
    }
    if (is_domain_like(text)) {
        return AnchorClass::DomainLike;
    }
    return AnchorClass::Plain;
}

namespace {

constexpr std::size_t kMinAnchorLen = 4;

struct AnchorCandidate {
    std::string text;
    std::size_t pos = 0;  // payload offset of the first occurrence
    AnchorClass cls = AnchorClass::Plain;
};

void collect_candidates(std::string_view run, std::size_t run_pos,
                        std::vector<AnchorCandidate>& out) {
    const auto add = [&](std::string_view text, std::size_t pos) {
        if (text.size() >= kMinAnchorLen) {
            out.push_back({std::string(text), pos, classify_anchor(text)});
        }
    };

    add(run, run_pos);

    // Fragments ending in ';' ("ServerName;", "WIN-DB01;", ...).
    std::size_t frag_start = 0;
    for (std::size_t i = 0; i < run.size(); ++i) {
        if (run[i] == ';') {
            add(run.substr(frag_start, i - frag_start + 1), run_pos + frag_start);
            frag_start = i + 1;
        }
    }

    // Leading "Name:" token of a header-looking run.
    if (!run.starts_with("HTTP/")) {
        const std::size_t colon = run.find(':');
        if (colon != std::string_view::npos && colon >= 1 && ascii_alpha(run[0])) {
            bool token = true;
            for (std::size_t i = 1; i < colon; ++i) {
                const char c = run[i];
                if (!ascii_alnum(c) && c != '-' && c != '_') {
                    token = false;
                    break;
                }
            }
            if (token) {
                add(run.substr(0, colon + 1), run_pos);
            }
        }
    }

    // Embedded dotted numeric identifiers ("1.2.840.113556" inside text).
    std::size_t i = 0;
    while (i < run.size()) {
        if (!ascii_digit(run[i]) && run[i] != '.') {
            ++i;
            continue;
        }
        std::size_t end = i;
        while (end < run.size() && (ascii_digit(run[end]) || run[end] == '.')) {
            ++end;
        }
        std::size_t a = i;
        std::size_t b = end;
        while (a < b && run[a] == '.') {
            ++a;
        }
        while (b > a && run[b - 1] == '.') {
            --b;
        }
        if (b - a >= kMinAnchorLen) {
            const std::string_view tok = run.substr(a, b - a);
            if (is_dotted_numeric_id(tok)) {
                add(tok, run_pos + a);
            }
        }
        i = end;
    }
}

}  // namespace

std::vector<std::string> extract_anchors(std::span<const std::uint8_t> payload,
                                         std::size_t max_anchors) {
    if (max_anchors == 0 || payload.empty()) {
        return {};
    }

    std::vector<AnchorCandidate> candidates;
    std::size_t i = 0;
    const std::size_t n = payload.size();
    while (i < n) {
        if (!bytestats::is_printable(payload[i])) {
            ++i;
            continue;
        }
        std::size_t j = i;
        while (j < n && bytestats::is_printable(payload[j])) {
            ++j;
        }
        if (j - i >= kMinAnchorLen) {
            const std::string_view run(reinterpret_cast<const char*>(payload.data()) + i,
                                       j - i);
            collect_candidates(run, i, candidates);
        }
        i = j;
    }

    // Collapse exact duplicates onto their earliest occurrence.
    std::map<std::string, AnchorCandidate> dedup;
    for (auto& cand : candidates) {
        auto [it, inserted] = dedup.emplace(cand.text, cand);
        if (!inserted && cand.pos < it->second.pos) {
            it->second.pos = cand.pos;
        }
    }

    std::vector<AnchorCandidate> ranked;
    ranked.reserve(dedup.size());
    for (auto& [text, cand] : dedup) {
        ranked.push_back(cand);
    }
    std::sort(ranked.begin(), ranked.end(),
              [](const AnchorCandidate& a, const AnchorCandidate& b) {
                  if (a.cls != b.cls) {
                      return static_cast<int>(a.cls) < static_cast<int>(b.cls);
                  }
                  if (a.text.size() != b.text.size()) {
                      return a.text.size() > b.text.size();
                  }
                  if (a.pos != b.pos) {
                      return a.pos < b.pos;
                  }
                  return a.text < b.text;
              });

    if (ranked.size() > max_anchors) {
        ranked.resize(max_anchors);
    }
    std::vector<std::string> out;
    out.reserve(ranked.size());
    for (auto& cand : ranked) {
        out.push_back(std::move(cand.text));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Hexdump
// ---------------------------------------------------------------------------

std::string hexdump_excerpt(std::span<const std::uint8_t> payload,
                            std::size_t max_lines) {
    const std::size_t total_lines = (payload.size() + 15) / 16;
    const std::size_t lines = std::min(total_lines, max_lines);
    std::string out;
    char buf[16];
    for (std::size_t line = 0; line < lines; ++line) {
        const std::size_t off = line * 16;
        const std::size_t have = std::min<std::size_t>(16, payload.size() - off);
        std::snprintf(buf, sizeof(buf), "%08zx", off);
        out += buf;
        out += "  ";
        for (std::size_t k = 0; k < 16; ++k) {
            if (k == 8) {
                out += ' ';
            }
            if (k < have) {
                std::snprintf(buf, sizeof(buf), "%02x ", payload[off + k]);
                out += buf;
            } else {
                out += "   ";
            }
        }
        out += " |";
        for (std::size_t k = 0; k < have; ++k) {
            const std::uint8_t b = payload[off + k];
            out += bytestats::is_printable(b) ? static_cast<char>(b) : '.';
        }
        out += "|\n";
    }
    if (total_lines > lines) {
        out += "... truncated (" + std::to_string(payload.size() - lines * 16) +
               " more bytes)\n";
    }
    return out;
}

// ---------------------------------------------------------------------------
// Aggregates
// ---------------------------------------------------------------------------

namespace {

std::vector<UdpLengthMode> modes_over(
    const std::vector<const pcap::DissectedPacket*>& selection, std::size_t top_k) {
    std::map<std::uint16_t, std::size_t> counts;  // key order breaks count ties
    std::size_t total = 0;
    for (const auto* p : selection) {
        if (p->l4 != pcap::L4Proto::Udp) {
            continue;
        }
        counts[p->udp_length.value_or(8)]++;
        ++total;
    }
    if (total == 0) {
        return {};
    }
    std::vector<std::pair<std::uint16_t, std::size_t>> ordered(counts.begin(),
                                                               counts.end());
    std::stable_sort(ordered.begin(), ordered.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });
    if (ordered.size() > top_k) {
        ordered.resize(top_k);
    }
    std::vector<UdpLengthMode> modes;
    modes.reserve(ordered.size());
    for (const auto& [length, count] : ordered) {
        modes.push_back({length, count,
                         static_cast<double>(count) / static_cast<double>(total)});
    }
    return modes;
}

TcpFlagStats stats_over(const std::vector<const pcap::DissectedPacket*>& selection) {
    TcpFlagStats stats;
    std::size_t syn_only = 0;
    std::size_t ack_only = 0;
    std::size_t synack = 0;
    std::size_t rst = 0;
    std::size_t other = 0;
    for (const auto* p : selection) {
        if (p->l4 != pcap::L4Proto::Tcp) {
            continue;
        }
        const pcap::TcpFlags f = p->tcp_flags.value_or(pcap::TcpFlags{});
        // Disjoint partition; first match wins.
        if (f.syn() && f.ack()) {
            ++synack;
        } else if (f.syn() && !f.ack() && !f.fin() && !f.rst()) {
            ++syn_only;
        } else if (f.ack() && !f.syn() && !f.fin() && !f.rst()) {
            ++ack_only;
        } else if (f.rst()) {
            ++rst;
        } else {
            ++other;
        }
        ++stats.total;
    }
    if (stats.total == 0) {
        return stats;
    }
    const double n = static_cast<double>(stats.total);
    stats.syn_only_ratio = static_cast<double>(syn_only) / n;
    stats.ack_only_ratio = static_cast<double>(ack_only) / n;
    stats.synack_ratio = static_cast<double>(synack) / n;
    stats.rst_ratio = static_cast<double>(rst) / n;
    stats.other_ratio = static_cast<double>(other) / n;
    return stats;
}

std::vector<const pcap::DissectedPacket*> pointers_to(
    std::span<const pcap::DissectedPacket> packets) {
    std::vector<const pcap::DissectedPacket*> out;
    out.reserve(packets.size());
    for (const auto& p : packets) {
        out.push_back(&p);
    }
    return out;
}

}  // namespace

std::vector<UdpLengthMode> udp_length_modes(std::span<const pcap::DissectedPacket> packets,
                                            std::size_t top_k) {
    auto modes = modes_over(pointers_to(packets), top_k);
    if (modes.empty()) {
        throw NoUdpPackets{};
    }
    return modes;
}

TcpFlagStats compute_tcp_flag_stats(std::span<const pcap::DissectedPacket> packets) {
    return stats_over(pointers_to(packets));
}

// ---------------------------------------------------------------------------
// Evidence pack
// ---------------------------------------------------------------------------

std::string_view to_string(SampleSource source) {
    return source == SampleSource::Primary ? "PRIMARY" : "SECONDARY";
}

namespace {

PayloadFingerprint fingerprint_payload(std::span<const std::uint8_t> payload,
                                       const EvidenceBudget& budget) {
    PayloadFingerprint fp;
    fp.printable = printable_ratio(payload);
    fp.entropy = shannon_entropy(payload);
    fp.ascii_excerpt = ascii_render(payload);
    if (fp.ascii_excerpt.size() > budget.max_ascii_excerpt_chars) {
        fp.ascii_excerpt.resize(budget.max_ascii_excerpt_chars);
    }
    fp.anchors = extract_anchors(payload, budget.max_anchors_per_sample);
    fp.hexdump = hexdump_excerpt(payload, budget.max_hexdump_lines_per_sample);
    return fp;
}

PacketSample make_sample(const pcap::DissectedPacket& p, std::size_t index,
                         SampleSource source, const EvidenceBudget& budget) {
    PacketSample s;
    s.index = index;
    s.source = source;
    s.l4 = p.l4;
    s.src_ip = p.src_ip;
    s.dst_ip = p.dst_ip;
    s.src_port = p.src_port;
    s.dst_port = p.dst_port;
    s.udp_length = p.udp_length;
    s.tcp_flags = p.tcp_flags;
    s.payload_len = p.payload.size();
    s.fingerprint = fingerprint_payload(p.payload, budget);
    return s;
}

}  // namespace

EvidencePack build_evidence_pack(std::span<const pcap::DissectedPacket> window,
                                 const triage::TriageResult& triage,
                                 const std::string& incident_id,
                                 double window_start_s,
                                 double window_end_s,
                                 const EvidenceBudget& budget) {
    if (window.empty()) {
        throw EmptyWindow{};
    }
    const std::size_t scan_n = std::min(window.size(), budget.max_scan_packets);
    const auto scan = window.first(scan_n);

    const auto in_branch = [&](const pcap::DissectedPacket& p) {
        switch (triage.dominant_l4) {
            case triage::DominantL4::Udp: return p.l4 == pcap::L4Proto::Udp;
            case triage::DominantL4::Tcp: return p.l4 == pcap::L4Proto::Tcp;
            case triage::DominantL4::Mixed: return true;
        }
        return true;
    };

    std::vector<const pcap::DissectedPacket*> cluster;
    for (const auto& p : scan) {
        if (p.dst_ip == triage.victim_ip && in_branch(p)) {
            cluster.push_back(&p);
        }
    }
    const bool no_primary = cluster.empty();
    if (no_primary) {
        // Keep the investigation alive on whatever the window holds; the
        // samples are tagged SECONDARY and the header carries a warning.
        cluster = pointers_to(scan);
    }
    const SampleSource tag = no_primary ? SampleSource::Secondary : SampleSource::Primary;

    EvidencePack pack;
    pack.incident_id = incident_id;
    pack.window_start_s = window_start_s;
    pack.window_end_s = window_end_s;
    pack.scan_packets = scan_n;
    pack.no_primary_cluster = no_primary;
    pack.triage = triage;

    std::map<pcap::Ipv4Addr, std::size_t> src_counts;
    std::size_t top_src = 0;
    for (const auto& p : scan) {
        top_src = std::max(top_src, ++src_counts[p.src_ip]);
    }
    pack.top_src_share = static_cast<double>(top_src) / static_cast<double>(scan_n);

    const bool want_udp = triage.dominant_l4 != triage::DominantL4::Tcp;
    const bool want_tcp = triage.dominant_l4 != triage::DominantL4::Udp;
    if (want_udp) {
        pack.udp_modes = modes_over(cluster, budget.top_k_udp_modes);
    }
    if (want_tcp) {
        const TcpFlagStats stats = stats_over(cluster);
        if (stats.total > 0) {
            pack.tcp_stats = stats;
        }
    }

    // Sample selection. UDP branch walks the length modes round-robin
    // (first-seen of each mode, then second-seen, ...); TCP branch prefers
    // payload-bearing segments. MIXED does both, UDP first.
    std::vector<const pcap::DissectedPacket*> picked;
    if (want_udp && !pack.udp_modes.empty()) {
        std::vector<std::vector<const pcap::DissectedPacket*>> by_mode(
            pack.udp_modes.size());
        for (const auto* p : cluster) {
            if (p->l4 != pcap::L4Proto::Udp) {
                continue;
            }
            const std::uint16_t len = p->udp_length.value_or(8);
            for (std::size_t m = 0; m < pack.udp_modes.size(); ++m) {
                if (pack.udp_modes[m].length == len) {
                    by_mode[m].push_back(p);
                    break;
                }
            }
        }
        for (std::size_t round = 0; picked.size() < budget.max_samples; ++round) {
            bool any = false;
            for (const auto& list : by_mode) {
                if (round < list.size() && picked.size() < budget.max_samples) {
                    picked.push_back(list[round]);
                    any = true;
                }
            }
            if (!any) {
                break;
            }
        }
    }
    if (want_tcp) {
        for (const auto* p : cluster) {
            if (picked.size() >= budget.max_samples) {
                break;
            }
            if (p->l4 == pcap::L4Proto::Tcp && !p->payload.empty()) {
                picked.push_back(p);
            }
        }
        if (picked.empty()) {
            // Handshake-only floods carry no payload; sample them anyway.
            for (const auto* p : cluster) {
                if (picked.size() >= budget.max_samples) {
                    break;
                }
                if (p->l4 == pcap::L4Proto::Tcp) {
                    picked.push_back(p);
                }
            }
        }
    }
    if (picked.empty()) {
        for (const auto* p : cluster) {
            if (picked.size() >= budget.max_samples) {
                break;
            }
            if (!p->payload.empty()) {
                picked.push_back(p);
            }
        }
        if (picked.empty()) {
            for (const auto* p : cluster) {
                if (picked.size() >= budget.max_samples) {
                    break;
                }
                picked.push_back(p);
            }
        }
    }

    pack.samples.reserve(picked.size());
    for (std::size_t k = 0; k < picked.size(); ++k) {
        pack.samples.push_back(make_sample(*picked[k], k + 1, tag, budget));
    }

    pack.canonical_text = serialize_pack(pack);
    return pack;
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

std::string fmt3(double value) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.3f", value);
    return buf;
}

std::string fmt_seconds(double value) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.3f", value);
    std::string out = buf;
    while (!out.empty() && out.back() == '0') {
        out.pop_back();
    }
    if (!out.empty() && out.back() == '.') {
        out.pop_back();
    }
    return out;
}

std::string serialize_pack(const EvidencePack& pack) {
    std::string out;
    out.reserve(4096);
    out += "EVIDENCE PACK v1\n";

    out += "HEADER\n";
    out += "  incident_id: " + pack.incident_id + "\n";
    out += "  window: " + fmt_seconds(pack.window_start_s) + "s--" +
           fmt_seconds(pack.window_end_s) + "s\n";
    out += "  scan_packets: " + std::to_string(pack.scan_packets) + "\n";
    out += "  top_src_share: " + fmt3(pack.top_src_share) + "\n";
    if (pack.no_primary_cluster) {
        out += "  warning: no_primary_cluster\n";
    }

    out += "TRIAGE\n";
    out += "  dominant_l4: " + std::string(triage::to_string(pack.triage.dominant_l4)) +
           "\n";
    out += "  dominance_score: " + fmt3(pack.triage.dominance_score) + "\n";
    out += "  victim_ip: " + pcap::to_string(pack.triage.victim_ip) + "\n";
    out += "  top_dst_share: " + fmt3(pack.triage.top_dst_share) + "\n";
    out += "  sample_count: " + std::to_string(pack.triage.sample_count) + "\n";

    out += "UDP_LENGTH_MODES\n";
    if (pack.udp_modes.empty()) {
        out += "  none\n";
    } else {
        for (const auto& mode : pack.udp_modes) {
            out += "  length=" + std::to_string(mode.length) +
                   " count=" + std::to_string(mode.count) + " share=" + fmt3(mode.share) +
                   "\n";
        }
    }

    out += "TCP_FLAG_STATS\n";
    if (!pack.tcp_stats) {
        out += "  none\n";
    } else {
        const auto& s = *pack.tcp_stats;
        out += "  total=" + std::to_string(s.total) +
               " syn_only=" + fmt3(s.syn_only_ratio) +
               " ack_only=" + fmt3(s.ack_only_ratio) + " synack=" + fmt3(s.synack_ratio) +
               " rst=" + fmt3(s.rst_ratio) + " other=" + fmt3(s.other_ratio) + "\n";
    }

    out += "SAMPLES\n";
    out += "  count: " + std::to_string(pack.samples.size()) + "\n";
    for (const auto& sample : pack.samples) {
        out += "\n";
        out += "  sample: " + std::to_string(sample.index) + "\n";
        out += "  tag: " + std::string(to_string(sample.source)) + "\n";
        out += "  flow: " + std::string(pcap::to_string(sample.l4)) + " " +
               pcap::to_string(sample.src_ip) + ":" + std::to_string(sample.src_port) +
               " -> " + pcap::to_string(sample.dst_ip) + ":" +
               std::to_string(sample.dst_port) + "\n";
        if (sample.udp_length) {
            out += "  udp_length: " + std::to_string(*sample.udp_length) + "\n";
        }
        if (sample.tcp_flags) {
            out += "  tcp_flags: " + pcap::to_string(*sample.tcp_flags) + "\n";
        }
        out += "  payload_len: " + std::to_string(sample.payload_len) + "\n";
        out += "  printable: " + fmt3(sample.fingerprint.printable) + "\n";
        out += "  entropy: " + fmt3(sample.fingerprint.entropy) + "\n";
        out += "  anchors:";
        if (sample.fingerprint.anchors.empty()) {
            out += " none";
        } else {
            for (const auto& anchor : sample.fingerprint.anchors) {
                out += " `" + anchor + "`";
            }
        }
        out += "\n";
        out += "  ascii: " + sample.fingerprint.ascii_excerpt + "\n";
        if (sample.fingerprint.hexdump.empty()) {
            out += "  hexdump: none\n";
        } else {
            out += "  hexdump:\n";
            std::size_t start = 0;
            const std::string& dump = sample.fingerprint.hexdump;
            while (start < dump.size()) {
                std::size_t eol = dump.find('\n', start);
                if (eol == std::string::npos) {
                    eol = dump.size();
                }
                out += "  " + dump.substr(start, eol - start) + "\n";
                start = eol + 1;
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// JSON forms
// ---------------------------------------------------------------------------

nlohmann::ordered_json triage_to_json(const triage::TriageResult& result) {
    return nlohmann::ordered_json{
        {"dominant_l4", triage::to_string(result.dominant_l4)},
        {"dominance_score", result.dominance_score},
        {"victim_ip", pcap::to_string(result.victim_ip)},
        {"top_dst_share", result.top_dst_share},
        {"sample_count", result.sample_count},
    };
}

triage::TriageResult triage_from_json(const nlohmann::json& j) {
    triage::TriageResult result;
    const auto l4 = triage::parse_dominant_l4(j.at("dominant_l4").get<std::string>());
    if (!l4) {
        throw std::runtime_error("unknown dominant_l4 value");
    }
    result.dominant_l4 = *l4;
    result.dominance_score = j.at("dominance_score").get<double>();
    const auto victim = pcap::parse_ipv4(j.at("victim_ip").get<std::string>());
    if (!victim) {
        throw std::runtime_error("bad victim_ip value");
    }
    result.victim_ip = *victim;
    result.top_dst_share = j.at("top_dst_share").get<double>();
    result.sample_count = j.at("sample_count").get<std::size_t>();
    return result;
}

nlohmann::ordered_json pack_to_json(const EvidencePack& pack) {
    nlohmann::ordered_json j;
    j["incident_id"] = pack.incident_id;
    j["window_start_s"] = pack.window_start_s;
    j["window_end_s"] = pack.window_end_s;
    j["scan_packets"] = pack.scan_packets;
    j["top_src_share"] = pack.top_src_share;
    j["no_primary_cluster"] = pack.no_primary_cluster;
    j["triage"] = triage_to_json(pack.triage);

    auto modes = nlohmann::ordered_json::array();
    for (const auto& mode : pack.udp_modes) {
        modes.push_back({{"length", mode.length},
                         {"count", mode.count},
                         {"share", mode.share}});
    }
    j["udp_length_modes"] = std::move(modes);

    if (pack.tcp_stats) {
        const auto& s = *pack.tcp_stats;
        j["tcp_flag_stats"] = {
            {"total", s.total},           {"syn_only", s.syn_only_ratio},
            {"ack_only", s.ack_only_ratio}, {"synack", s.synack_ratio},
            {"rst", s.rst_ratio},         {"other", s.other_ratio},
        };
    } else {
        j["tcp_flag_stats"] = nullptr;
    }

    auto samples = nlohmann::ordered_json::array();
    for (const auto& sample : pack.samples) {
        nlohmann::ordered_json s;
        s["index"] = sample.index;
        s["tag"] = to_string(sample.source);
        s["l4"] = pcap::to_string(sample.l4);
        s["src_ip"] = pcap::to_string(sample.src_ip);
        s["src_port"] = sample.src_port;
        s["dst_ip"] = pcap::to_string(sample.dst_ip);
        s["dst_port"] = sample.dst_port;
        if (sample.udp_length) {
            s["udp_length"] = *sample.udp_length;
        } else {
            s["udp_length"] = nullptr;
        }
        if (sample.tcp_flags) {
            s["tcp_flags"] = sample.tcp_flags->bits;
        } else {
            s["tcp_flags"] = nullptr;
        }
        s["payload_len"] = sample.payload_len;
        s["printable"] = sample.fingerprint.printable;
        s["entropy"] = sample.fingerprint.entropy;
        s["ascii_excerpt"] = sample.fingerprint.ascii_excerpt;
        s["anchors"] = sample.fingerprint.anchors;
        s["hexdump"] = sample.fingerprint.hexdump;
        samples.push_back(std::move(s));
    }
    j["samples"] = std::move(samples);
    j["canonical_text"] = pack.canonical_text;
    return j;
}

EvidencePack pack_from_json(const nlohmann::json& j) {
    EvidencePack pack;
    pack.incident_id = j.at("incident_id").get<std::string>();
    pack.window_start_s = j.at("window_start_s").get<double>();
    pack.window_end_s = j.at("window_end_s").get<double>();
    pack.scan_packets = j.at("scan_packets").get<std::size_t>();
    pack.top_src_share = j.at("top_src_share").get<double>();
    pack.no_primary_cluster = j.at("no_primary_cluster").get<bool>();
    pack.triage = triage_from_json(j.at("triage"));

    for (const auto& m : j.at("udp_length_modes")) {
        UdpLengthMode mode;
        mode.length = m.at("length").get<std::uint16_t>();
        mode.count = m.at("count").get<std::size_t>();
        mode.share = m.at("share").get<double>();
        pack.udp_modes.push_back(mode);
    }

    if (!j.at("tcp_flag_stats").is_null()) {
        const auto& s = j.at("tcp_flag_stats");
        TcpFlagStats stats;
        stats.total = s.at("total").get<std::size_t>();
        stats.syn_only_ratio = s.at("syn_only").get<double>();
        stats.ack_only_ratio = s.at("ack_only").get<double>();
        stats.synack_ratio = s.at("synack").get<double>();
        stats.rst_ratio = s.at("rst").get<double>();
        stats.other_ratio = s.at("other").get<double>();
        pack.tcp_stats = stats;
    }

    for (const auto& sj : j.at("samples")) {
        PacketSample s;
        s.index = sj.at("index").get<std::size_t>();
        s.source = sj.at("tag").get<std::string>() == "SECONDARY"
                       ? SampleSource::Secondary
                       : SampleSource::Primary;
        s.l4 = sj.at("l4").get<std::string>() == "tcp" ? pcap::L4Proto::Tcp
                                                       : pcap::L4Proto::Udp;
        const auto src = pcap::parse_ipv4(sj.at("src_ip").get<std::string>());
        const auto dst = pcap::parse_ipv4(sj.at("dst_ip").get<std::string>());
        if (!src || !dst) {
            throw std::runtime_error("bad sample address");
        }
        s.src_ip = *src;
        s.dst_ip = *dst;
        s.src_port = sj.at("src_port").get<std::uint16_t>();
        s.dst_port = sj.at("dst_port").get<std::uint16_t>();
        if (!sj.at("udp_length").is_null()) {
            s.udp_length = sj.at("udp_length").get<std::uint16_t>();
        }
        if (!sj.at("tcp_flags").is_null()) {
            s.tcp_flags = pcap::TcpFlags{sj.at("tcp_flags").get<std::uint8_t>()};
        }
        s.payload_len = sj.at("payload_len").get<std::size_t>();
        s.fingerprint.printable = sj.at("printable").get<double>();
        s.fingerprint.entropy = sj.at("entropy").get<double>();
        s.fingerprint.ascii_excerpt = sj.at("ascii_excerpt").get<std::string>();
        s.fingerprint.anchors = sj.at("anchors").get<std::vector<std::string>>();
        s.fingerprint.hexdump = sj.at("hexdump").get<std::string>();
        pack.samples.push_back(std::move(s));
    }

    pack.canonical_text = j.at("canonical_text").get<std::string>();
    return pack;
}

}  // namespace holmes::evidence
