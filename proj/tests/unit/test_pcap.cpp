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

#include <doctest.h>

#include <random>
#include <string_view>
#include <vector>

#include "holmes/pcap.hpp"
#include "support/corpus.hpp"

using namespace holmes;
using testsupport::TimedFrame;

namespace {

std::vector<std::uint8_t> payload_of(std::string_view text) {
    return {text.begin(), text.end()};
}

pcap::Ipv4Addr ip(std::uint32_t value) { return pcap::Ipv4Addr{value}; }

}  // namespace

TEST_SUITE("pcap") {

TEST_CASE("ipv4 address parsing and printing round-trip") {
    CHECK(pcap::to_string(ip(0x0a000007)) == "10.0.0.7");
    CHECK(pcap::parse_ipv4("10.0.0.7") == ip(0x0a000007));
    CHECK(pcap::parse_ipv4("255.255.255.255") == ip(0xffffffff));
    CHECK(!pcap::parse_ipv4("10.0.0.256").has_value());
    CHECK(!pcap::parse_ipv4("10.0.0").has_value());
    CHECK(!pcap::parse_ipv4("example.com").has_value());
}

TEST_CASE("reads back the exact frames a capture was built from") {
    std::vector<TimedFrame> frames;
    frames.push_back({1'500'000, testsupport::udp_frame(ip(0xc0000201), ip(0x0a000007),
                                                        53, 40000,
                                                        payload_of("hello world"))});
    frames.push_back({2'250'000, testsupport::tcp_frame(ip(0xc0000202), ip(0x0a000007),
                                                        1234, 443, testsupport::kTcpSyn,
                                                        {})});
    const auto bytes = testsupport::pcap_bytes(frames);
    const auto read = pcap::read_pcap(bytes);

    REQUIRE(read.records.size() == 2);
    CHECK(!read.truncated_tail);
    CHECK(read.link_type == 1);
    CHECK(read.records[0].ts_micros == 1'500'000);
    CHECK(read.records[1].ts_micros == 2'250'000);
    CHECK(read.records[0].link_bytes == frames[0].bytes);
    CHECK(read.records[0].captured_len == frames[0].bytes.size());
}

TEST_CASE("dissects a hand-assembled UDP frame field by field") {
    const auto payload = payload_of("FINGERPRINT");
    pcap::PacketRecord record;
    record.ts_micros = 99;
    record.link_bytes = testsupport::udp_frame(ip(0xc6336401), ip(0x0a00000a),
                                               1900, 51515, payload);
    record.captured_len = static_cast<std::uint32_t>(record.link_bytes.size());
    record.original_len = record.captured_len;

    const auto outcome = pcap::dissect(record);
    REQUIRE(std::holds_alternative<pcap::DissectedPacket>(outcome));
    const auto& pkt = std::get<pcap::DissectedPacket>(outcome);
    CHECK(pkt.ts_micros == 99);
    CHECK(pkt.src_ip == ip(0xc6336401));
    CHECK(pkt.dst_ip == ip(0x0a00000a));
    CHECK(pkt.l4 == pcap::L4Proto::Udp);
    CHECK(pkt.src_port == 1900);
    CHECK(pkt.dst_port == 51515);
    REQUIRE(pkt.udp_length.has_value());
    CHECK(*pkt.udp_length == 8 + payload.size());
    CHECK(!pkt.tcp_flags.has_value());
    CHECK(pkt.payload == payload);
}

TEST_CASE("dissects TCP flags and exposes the flag names") {
    pcap::PacketRecord record;
    record.link_bytes = testsupport::tcp_frame(
        ip(0x01020304), ip(0x05060708), 80, 8080,
        testsupport::kTcpSyn | testsupport::kTcpAck, payload_of("x"));
    record.captured_len = static_cast<std::uint32_t>(record.link_bytes.size());
    record.original_len = record.captured_len;

    const auto outcome = pcap::dissect(record);
    REQUIRE(std::holds_alternative<pcap::DissectedPacket>(outcome));
    const auto& pkt = std::get<pcap::DissectedPacket>(outcome);
    REQUIRE(pkt.tcp_flags.has_value());
    CHECK(pkt.tcp_flags->syn());
    CHECK(pkt.tcp_flags->ack());
    CHECK(!pkt.tcp_flags->fin());
    CHECK(pcap::to_string(*pkt.tcp_flags) == "SYN|ACK");
    CHECK(pkt.payload == payload_of("x"));
}

TEST_CASE("skips frames the pipeline cannot use, with a typed reason") {
    pcap::PacketRecord record;

    SUBCASE("non-IPv4 ethertype") {
        record.link_bytes = testsupport::udp_frame(ip(1), ip(2), 1, 2, {});
        record.link_bytes[12] = 0x86;  // 0x86dd: IPv6
        record.link_bytes[13] = 0xdd;
    }
    SUBCASE("non TCP/UDP transport") {
        record.link_bytes = testsupport::udp_frame(ip(1), ip(2), 1, 2, {});
        record.link_bytes[14 + 9] = 1;  // ICMP
    }
    SUBCASE("frame cut inside the IPv4 header") {
        record.link_bytes = testsupport::udp_frame(ip(1), ip(2), 1, 2, {});
        record.link_bytes.resize(20);
    }

    record.captured_len = static_cast<std::uint32_t>(record.link_bytes.size());
    record.original_len = record.captured_len;
    CHECK(std::holds_alternative<pcap::SkipReason>(pcap::dissect(record)));
}

TEST_CASE("rejects a stream whose magic is not a capture magic") {
    const std::vector<std::uint8_t> junk = {0xde, 0xad, 0xbe, 0xef, 0, 0, 0, 0,
                                            0,    0,    0,    0,    0, 0, 0, 0,
                                            0,    0,    0,    0,    0, 0, 0, 0};
    CHECK_THROWS_AS((void)pcap::read_pcap(junk), pcap::BadMagic);
}

TEST_CASE("global header cut short is a typed error") {
    const std::vector<std::uint8_t> cut = {0xd4, 0xc3, 0xb2, 0xa1, 2, 0};
    CHECK_THROWS_AS((void)pcap::read_pcap(cut), pcap::TruncatedRecord);
}

TEST_CASE("a final record cut mid-way is reported, earlier records kept") {
    std::vector<TimedFrame> frames;
    frames.push_back({0, testsupport::udp_frame(ip(1), ip(2), 1, 2, payload_of("aa"))});
    frames.push_back({1, testsupport::udp_frame(ip(3), ip(4), 3, 4, payload_of("bb"))});
    auto bytes = testsupport::pcap_bytes(frames);
    bytes.resize(bytes.size() - 7);

    const auto read = pcap::read_pcap(bytes);
    CHECK(read.truncated_tail);
    CHECK(read.records.size() == 1);
}

TEST_CASE("slice_window keeps [start, end) relative to the origin") {
    std::vector<TimedFrame> frames;
    for (int i = 0; i < 10; ++i) {
        frames.push_back({1'000'000'000 + i * 1'000'000,
                          testsupport::udp_frame(ip(1), ip(2), 1, 2, {})});
    }
    const auto read = pcap::read_pcap(testsupport::pcap_bytes(frames));
    const auto packets = pcap::dissect_all(read.records);
    REQUIRE(packets.size() == 10);

    const auto window = pcap::slice_window(packets, 2.0, 5.0, 1'000'000'000);
    REQUIRE(window.size() == 3);
    CHECK(window.front().ts_micros == 1'002'000'000);
    CHECK(window.back().ts_micros == 1'004'000'000);
}

TEST_CASE("random byte blobs never crash the reader") {
    std::mt19937 rng(23);
    for (int round = 0; round < 500; ++round) {
        std::vector<std::uint8_t> blob(rng() % 400);
        for (auto& b : blob) {
            b = static_cast<std::uint8_t>(rng());
        }
        try {
            const auto read = pcap::read_pcap(blob);
            (void)pcap::dissect_all(read.records);
        } catch (const pcap::BadMagic&) {
        } catch (const pcap::TruncatedRecord&) {
        }
    }
}

TEST_CASE("dissect_all drops skips and keeps order") {
    std::vector<TimedFrame> frames;
    frames.push_back({0, testsupport::udp_frame(ip(1), ip(9), 1, 2, {})});
    auto bad = testsupport::udp_frame(ip(2), ip(9), 1, 2, {});
    bad[14 + 9] = 47;  // GRE
    frames.push_back({1, bad});
    frames.push_back({2, testsupport::tcp_frame(ip(3), ip(9), 1, 2, testsupport::kTcpAck, {})});

    const auto read = pcap::read_pcap(testsupport::pcap_bytes(frames));
    const auto packets = pcap::dissect_all(read.records);
    REQUIRE(packets.size() == 2);
    CHECK(packets[0].src_ip == ip(1));
    CHECK(packets[1].src_ip == ip(3));
}

}  // TEST_SUITE
