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

#include "holmes/pcap.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>

namespace holmes::pcap {

namespace {

constexpr std::uint32_t kMagicMicro = 0xa1b2c3d4u;
constexpr std::uint32_t kMagicMicroSwapped = 0xd4c3b2a1u;
constexpr std::uint32_t kMagicNano = 0xa1b23c4du;
constexpr std::uint32_t kMagicNanoSwapped = 0x4d3cb2a1u;

constexpr std::uint16_t kEtherTypeIpv4 = 0x0800;
constexpr std::uint16_t kEtherTypeVlan = 0x8100;
constexpr std::uint16_t kEtherTypeQinQ = 0x88a8;

constexpr std::uint8_t kIpProtoTcp = 6;
constexpr std::uint8_t kIpProtoUdp = 17;

constexpr std::size_t kGlobalHeaderLen = 24;
constexpr std::size_t kRecordHeaderLen = 16;
constexpr std::size_t kEthernetHeaderLen = 14;

std::uint32_t load_u32(const std::uint8_t* p, bool swap) {
    std::uint32_t v;
    std::memcpy(&v, p, 4);
    return swap ? __builtin_bswap32(v) : v;
}

std::uint16_t load_be16(const std::uint8_t* p) {
    return static_cast<std::uint16_t>((p[0] << 8) | p[1]);
}

std::uint32_t load_be32(const std::uint8_t* p) {
    return (static_cast<std::uint32_t>(p[0]) << 24) | (static_cast<std::uint32_t>(p[1]) << 16) |
           (static_cast<std::uint32_t>(p[2]) << 8) | p[3];
}

}  // namespace

std::string to_string(Ipv4Addr addr) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%u.%u.%u.%u", (addr.value >> 24) & 0xff,
                  (addr.value >> 16) & 0xff, (addr.value >> 8) & 0xff, addr.value & 0xff);
    return buf;
}

std::optional<Ipv4Addr> parse_ipv4(std::string_view text) {
    std::uint32_t value = 0;
    int octets = 0;
    std::size_t i = 0;
    while (octets < 4) {
        if (i >= text.size() || text[i] < '0' || text[i] > '9') {
            return std::nullopt;
        }
        std::uint32_t octet = 0;
        std::size_t digits = 0;
        while (i < text.size() && text[i] >= '0' && text[i] <= '9' && digits < 4) {
            octet = octet * 10 + static_cast<std::uint32_t>(text[i] - '0');
            ++i;
            ++digits;
        }
        if (digits == 0 || digits > 3 || octet > 255) {
            return std::nullopt;
        }
        value = (value << 8) | octet;
        ++octets;
        if (octets < 4) {
            if (i >= text.size() || text[i] != '.') {
                return std::nullopt;
            }
            ++i;
        }
    }
    if (i != text.size()) {
        return std::nullopt;
    }
    return Ipv4Addr{value};
}

std::string_view to_string(L4Proto proto) {
    return proto == L4Proto::Udp ? "udp" : "tcp";
}

std::string to_string(TcpFlags flags) {
    std::string out;
    const auto add = [&](bool set, const char* name) {
        if (set) {
            if (!out.empty()) {
                out += '|';
            }
            out += name;
        }
    };
    add(flags.syn(), "SYN");
    add(flags.ack(), "ACK");
    add(flags.fin(), "FIN");
    add(flags.rst(), "RST");
    add(flags.psh(), "PSH");
    add(flags.urg(), "URG");
    if (out.empty()) {
        out = "none";
    }
    return out;
}

std::string_view to_string(SkipReason reason) {
    switch (reason) {
    case SkipReason::NonEthernet:
        return "NonEthernet";
    case SkipReason::NonIPv4:
        return "NonIPv4";
    case SkipReason::NonTcpUdp:
        return "NonTcpUdp";
    case SkipReason::Truncated:
        return "Truncated";
    }
    return "Unknown";
}

ReadResult read_pcap(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 4) {
        throw BadMagic("capture stream shorter than a magic number");
    }

    std::uint32_t magic;
    std::memcpy(&magic, bytes.data(), 4);

    bool swap = false;
    bool nanos = false;
    switch (magic) {
    case kMagicMicro:
        break;
    case kMagicMicroSwapped:
        swap = true;
        break;
    case kMagicNano:
        nanos = true;
        break;
    case kMagicNanoSwapped:
        swap = true;
        nanos = true;
        break;
    default: {
        char msg[64];
        std::snprintf(msg, sizeof(msg), "unrecognized capture magic 0x%08x", magic);
        throw BadMagic(msg);
    }
    }

    if (bytes.size() < kGlobalHeaderLen) {
        throw TruncatedRecord("global header cut short");
    }

    ReadResult result;
    result.link_type = load_u32(bytes.data() + 20, swap);

    std::size_t off = kGlobalHeaderLen;
    while (off < bytes.size()) {
        if (bytes.size() - off < kRecordHeaderLen) {
            result.truncated_tail = true;
            break;
        }
        const std::uint8_t* hdr = bytes.data() + off;
        const std::uint32_t ts_sec = load_u32(hdr, swap);
        const std::uint32_t ts_sub = load_u32(hdr + 4, swap);
        const std::uint32_t incl_len = load_u32(hdr + 8, swap);
        const std::uint32_t orig_len = load_u32(hdr + 12, swap);
        off += kRecordHeaderLen;

        if (incl_len > bytes.size() - off) {
            // Header promises more bytes than remain: keep what we have.
            result.truncated_tail = true;
            break;
        }

        PacketRecord record;
        record.ts_micros = static_cast<std::int64_t>(ts_sec) * 1'000'000 +
                           (nanos ? static_cast<std::int64_t>(ts_sub) / 1000
                                  : static_cast<std::int64_t>(ts_sub));
        record.captured_len = incl_len;
        record.original_len = std::max(orig_len, incl_len);
        record.link_bytes.assign(bytes.data() + off, bytes.data() + off + incl_len);
        off += incl_len;
        result.records.push_back(std::move(record));
    }
    return result;
}

ReadResult read_pcap_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot open capture file: " + path.string());
    }
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    return read_pcap(bytes);
}

DissectOutcome dissect(const PacketRecord& record) {
    const std::uint8_t* p = record.link_bytes.data();
    std::size_t len = record.link_bytes.size();

    if (len < kEthernetHeaderLen) {
        return SkipReason::Truncated;
    }

    std::uint16_t ether_type = load_be16(p + 12);
    std::size_t l3_off = kEthernetHeaderLen;

    if (ether_type == kEtherTypeVlan) {
        // One 802.1Q tag is unwrapped; a second tag (or 802.1ad) is not.
        if (len < l3_off + 4) {
            return SkipReason::Truncated;
        }
        ether_type = load_be16(p + l3_off + 2);
        l3_off += 4;
        if (ether_type == kEtherTypeVlan || ether_type == kEtherTypeQinQ) {
            return SkipReason::NonEthernet;
        }
    } else if (ether_type == kEtherTypeQinQ) {
        return SkipReason::NonEthernet;
    }

    if (ether_type != kEtherTypeIpv4) {
        return SkipReason::NonIPv4;
    }
    if (len < l3_off + 20) {
        return SkipReason::Truncated;
    }

    const std::uint8_t* ip = p + l3_off;
    const std::uint8_t version = ip[0] >> 4;
    const std::size_t ihl = static_cast<std::size_t>(ip[0] & 0x0f) * 4;
    if (version != 4) {
        return SkipReason::NonIPv4;
    }
    if (ihl < 20 || len < l3_off + ihl) {
        return SkipReason::Truncated;
    }

    const std::uint16_t total_len = load_be16(ip + 2);
    if (total_len < ihl) {
        return SkipReason::Truncated;
    }
    // Ethernet minimum-frame padding can trail the datagram; cap at what
    // the IPv4 header claims, and at what was actually captured.
    const std::size_t ip_payload_avail =
        std::min<std::size_t>(len - l3_off, total_len) - ihl;

    const std::uint8_t proto = ip[9];
    DissectedPacket pkt;
    pkt.ts_micros = record.ts_micros;
    pkt.src_ip = Ipv4Addr{load_be32(ip + 12)};
    pkt.dst_ip = Ipv4Addr{load_be32(ip + 16)};

    const std::uint8_t* l4 = ip + ihl;

    if (proto == kIpProtoUdp) {
        if (ip_payload_avail < 8) {
            return SkipReason::Truncated;
        }
        pkt.l4 = L4Proto::Udp;
        pkt.src_port = load_be16(l4);
        pkt.dst_port = load_be16(l4 + 2);
        const std::uint16_t udp_len = load_be16(l4 + 4);
        if (udp_len < 8) {
            return SkipReason::Truncated;
        }
        pkt.udp_length = udp_len;
        const std::size_t payload_len =
            std::min<std::size_t>(ip_payload_avail - 8, static_cast<std::size_t>(udp_len) - 8);
        pkt.payload.assign(l4 + 8, l4 + 8 + payload_len);
        return pkt;
    }

    if (proto == kIpProtoTcp) {
        if (ip_payload_avail < 20) {
            return SkipReason::Truncated;
        }
        pkt.l4 = L4Proto::Tcp;
        pkt.src_port = load_be16(l4);
        pkt.dst_port = load_be16(l4 + 2);
        const std::size_t data_off = static_cast<std::size_t>(l4[12] >> 4) * 4;
        if (data_off < 20 || data_off > ip_payload_avail) {
            return SkipReason::Truncated;
        }
        pkt.tcp_flags = TcpFlags{static_cast<std::uint8_t>(l4[13] & 0x3f)};
        pkt.payload.assign(l4 + data_off, l4 + ip_payload_avail);
        return pkt;
    }

    return SkipReason::NonTcpUdp;
}

std::vector<DissectedPacket> dissect_all(std::span<const PacketRecord> records) {
    std::vector<DissectedPacket> out;
    out.reserve(records.size());
    for (const auto& record : records) {
        auto outcome = dissect(record);
        if (auto* pkt = std::get_if<DissectedPacket>(&outcome)) {
            out.push_back(std::move(*pkt));
        }
    }
    return out;
}

std::vector<DissectedPacket> slice_window(std::span<const DissectedPacket> packets,
                                          double start_s,
                                          double end_s,
                                          std::int64_t origin_micros) {
    std::vector<DissectedPacket> out;
    const double start_us = start_s * 1e6;
    const double end_us = end_s * 1e6;
    for (const auto& pkt : packets) {
        const double rel = static_cast<double>(pkt.ts_micros - origin_micros);
        if (rel >= start_us && rel < end_us) {
            out.push_back(pkt);
        }
    }
    return out;
}

}  // namespace holmes::pcap
