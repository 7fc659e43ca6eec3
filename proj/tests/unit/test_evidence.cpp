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

#include <cmath>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "holmes/evidence.hpp"
#include "support/corpus.hpp"

using namespace holmes;

namespace {

std::vector<std::uint8_t> bytes_of(std::string_view text) {
    return {text.begin(), text.end()};
}

/// Independent histogram-based entropy, kept deliberately different from
/// the library's single-pass kernel.
double entropy_reference(const std::vector<std::uint8_t>& payload) {
    if (payload.empty()) {
        return 0.0;
    }
    std::map<std::uint8_t, std::size_t> hist;
    for (const auto b : payload) {
        hist[b]++;
    }
    double h = 0.0;
    for (const auto& [byte, count] : hist) {
        const double p = static_cast<double>(count) / static_cast<double>(payload.size());
        h -= p * std::log2(p);
    }
    return h;
}

pcap::DissectedPacket udp_to(std::uint32_t dst, std::uint16_t dgram_len,
                             std::vector<std::uint8_t> payload = {},
                             std::uint32_t src = 0xc0000201) {
    pcap::DissectedPacket p;
    p.src_ip = {src};
    p.dst_ip = {dst};
    p.l4 = pcap::L4Proto::Udp;
    p.src_port = 161;
    p.dst_port = 40000;
    p.udp_length = dgram_len;
    p.payload = std::move(payload);
    return p;
}

pcap::DissectedPacket tcp_to(std::uint32_t dst, std::uint8_t flags,
                             std::vector<std::uint8_t> payload = {}) {
    pcap::DissectedPacket p;
    p.src_ip = {0xc6336401};
    p.dst_ip = {dst};
    p.l4 = pcap::L4Proto::Tcp;
    p.src_port = 40001;
    p.dst_port = 443;
    p.tcp_flags = pcap::TcpFlags{flags};
    p.payload = std::move(payload);
    return p;
}

std::size_t hexdump_data_lines(const std::string& dump) {
    std::size_t lines = 0;
    std::size_t pos = 0;
    while (pos < dump.size()) {
        const std::size_t eol = dump.find('\n', pos);
        const auto line = dump.substr(pos, eol - pos);
        if (line.size() > 8 && line.find_first_not_of("0123456789abcdef") == 8) {
            ++lines;
        }
        pos = (eol == std::string::npos) ? dump.size() : eol + 1;
    }
    return lines;
}

}  // namespace

TEST_SUITE("evidence") {

TEST_CASE("printable ratio counts exactly the 0x20..0x7e band") {
    CHECK(evidence::printable_ratio({}) == doctest::Approx(0.0));
    const std::vector<std::uint8_t> edges = {0x1f, 0x20, 0x7e, 0x7f};
    CHECK(evidence::printable_ratio(edges) == doctest::Approx(0.5));
    const auto text = bytes_of("all printable text");
    CHECK(evidence::printable_ratio(text) == doctest::Approx(1.0));
}

TEST_CASE("entropy hits its closed-form values") {
    const std::vector<std::uint8_t> constant(500, 0x41);
    CHECK(evidence::shannon_entropy(constant) == doctest::Approx(0.0).epsilon(1e-12));

    std::vector<std::uint8_t> uniform(256);
    for (int i = 0; i < 256; ++i) uniform[i] = static_cast<std::uint8_t>(i);
    CHECK(evidence::shannon_entropy(uniform) == doctest::Approx(8.0).epsilon(1e-12));

    // 3/4, 1/4 split: 0.75*log2(4/3) + 0.25*log2(4)
    const auto aaab = bytes_of("AAAB");
    CHECK(evidence::shannon_entropy(aaab) ==
          doctest::Approx(0.8112781244591328).epsilon(1e-12));

    CHECK(evidence::shannon_entropy({}) == doctest::Approx(0.0));
}

TEST_CASE("entropy matches an independent reference on random payloads") {
    std::mt19937 rng(41);
    for (int round = 0; round < 300; ++round) {
        std::vector<std::uint8_t> payload(rng() % 1500);
        for (auto& b : payload) b = static_cast<std::uint8_t>(rng());
        const double got = evidence::shannon_entropy(payload);
        CHECK(std::abs(got - entropy_reference(payload)) < 1e-9);
        CHECK(got >= 0.0);
        CHECK(got <= 8.0);
    }
}

TEST_CASE("ascii render keeps printables and drops the rest") {
    const std::vector<std::uint8_t> mixed = {0x00, 'H', 'i', 0x01, 0xff, '!', 0x0a};
    CHECK(evidence::ascii_render(mixed) == "Hi!");
    CHECK(evidence::ascii_render({}) == "");
}

TEST_CASE("anchor classes follow the documented precedence") {
    using evidence::AnchorClass;
    CHECK(evidence::classify_anchor("1.3.6.1.4.1.1466") == AnchorClass::DottedOid);
    CHECK(evidence::classify_anchor("1.2.840.113556.1.4.800") == AnchorClass::DottedOid);
    // Four octet-sized segments read as an address, not an identifier.
    CHECK(evidence::classify_anchor("10.0.0.1") == AnchorClass::Plain);
    CHECK(evidence::classify_anchor("256.1.1.1") == AnchorClass::DottedOid);
    CHECK(evidence::classify_anchor("HTTP/1.1 200 OK") == AnchorClass::HttpHeader);
    CHECK(evidence::classify_anchor("LOCATION: http://192.168.1.254:49152/gatedesc.xml") ==
          AnchorClass::HttpHeader);
    CHECK(evidence::classify_anchor("CACHE-CONTROL: max-age=120") == AnchorClass::HttpHeader);
    CHECK(evidence::classify_anchor("ServerName;") == AnchorClass::KeySemicolon);
    CHECK(evidence::classify_anchor("cdn.assets.example-edge.net") == AnchorClass::DomainLike);
    CHECK(evidence::classify_anchor("gatedesc.xml") == AnchorClass::DomainLike);
    CHECK(evidence::classify_anchor("__MSBROWSE__") == AnchorClass::Plain);
    CHECK(evidence::classify_anchor("public") == AnchorClass::Plain);
    CHECK(evidence::classify_anchor("") == AnchorClass::Plain);
}

TEST_CASE("ipv4 literal detector is strict about shape") {
    CHECK(evidence::is_ipv4_literal("192.168.1.254"));
    CHECK(evidence::is_ipv4_literal("0.0.0.0"));
    CHECK(!evidence::is_ipv4_literal("1.2.3.4.5"));
    CHECK(!evidence::is_ipv4_literal("256.1.1.1"));
    CHECK(!evidence::is_ipv4_literal("1.2.3"));
    CHECK(!evidence::is_ipv4_literal("1.2.3.a"));
}

TEST_CASE("anchor extraction carves fragments and ranks by class") {
    const auto payload = testsupport::scenario_payload(7, 0);  // key/value banner
    const auto anchors = evidence::extract_anchors(payload, 6);
    REQUIRE(!anchors.empty());
    CHECK(anchors.size() <= 6);

    const auto has = [&](std::string_view text) {
        for (const auto& a : anchors) {
            if (a == text) return true;
        }
        return false;
    };
    CHECK(has("ServerName;"));
    CHECK(has("InstanceName;"));

    for (std::size_t i = 1; i < anchors.size(); ++i) {
        CHECK(static_cast<int>(evidence::classify_anchor(anchors[i - 1])) <=
              static_cast<int>(evidence::classify_anchor(anchors[i])));
    }
    for (const auto& a : anchors) {
        CHECK(a.size() >= 4);
    }
}

TEST_CASE("embedded identifiers and isolated domains become anchors") {
    std::vector<std::uint8_t> payload = bytes_of("oid=1.2.840.113556.1.4.800 end");
    auto anchors = evidence::extract_anchors(payload, 4);
    REQUIRE(!anchors.empty());
    CHECK(anchors[0] == "1.2.840.113556.1.4.800");
    CHECK(evidence::classify_anchor(anchors[0]) == evidence::AnchorClass::DottedOid);

    payload = bytes_of("answer ");
    payload.push_back(0x01);
    const auto domain = bytes_of("cdn.assets.example-edge.net");
    payload.insert(payload.end(), domain.begin(), domain.end());
    payload.push_back(0x01);
    anchors = evidence::extract_anchors(payload, 4);
    bool found = false;
    for (const auto& a : anchors) {
        if (a == "cdn.assets.example-edge.net") found = true;
    }
    CHECK(found);
}

TEST_CASE("duplicate candidates collapse to one anchor") {
    std::vector<std::uint8_t> payload = bytes_of("TOKEN");
    payload.push_back(0x00);
    const auto again = bytes_of("TOKEN");
    payload.insert(payload.end(), again.begin(), again.end());
    const auto anchors = evidence::extract_anchors(payload, 8);
    std::size_t hits = 0;
    for (const auto& a : anchors) {
        if (a == "TOKEN") ++hits;
    }
    CHECK(hits == 1);
}

TEST_CASE("noise payloads yield no anchors") {
    std::mt19937 rng(5);
    for (int round = 0; round < 20; ++round) {
        const auto payload = testsupport::noise_payload(rng, 400);
        CHECK(evidence::extract_anchors(payload, 6).empty());
    }
}

TEST_CASE("hexdump lines follow the classic layout") {
    const auto sixteen = bytes_of("ABCDEFGHIJKLMNOP");
    CHECK(evidence::hexdump_excerpt(sixteen, 8) ==
          "00000000  41 42 43 44 45 46 47 48  49 4a 4b 4c 4d 4e 4f 50  "
          "|ABCDEFGHIJKLMNOP|\n");

    const std::vector<std::uint8_t> four = {0xde, 0xad, 0xbe, 0xef};
    CHECK(evidence::hexdump_excerpt(four, 8) ==
          "00000000  de ad be ef                                       |....|\n");

    CHECK(evidence::hexdump_excerpt({}, 8) == "");
}

TEST_CASE("hexdump truncation reports the bytes left out") {
    std::vector<std::uint8_t> payload(40, 0x41);
    const auto dump = evidence::hexdump_excerpt(payload, 2);
    CHECK(hexdump_data_lines(dump) == 2);
    CHECK(dump.find("... truncated (8 more bytes)\n") != std::string::npos);

    const auto exact = evidence::hexdump_excerpt(std::vector<std::uint8_t>(32, 0x41), 2);
    CHECK(exact.find("truncated") == std::string::npos);
}

TEST_CASE("udp length modes rank by count, ties to the smaller length") {
    std::vector<pcap::DissectedPacket> packets;
    for (int i = 0; i < 5; ++i) packets.push_back(udp_to(1, 120));
    for (int i = 0; i < 3; ++i) packets.push_back(udp_to(1, 80));
    for (int i = 0; i < 3; ++i) packets.push_back(udp_to(1, 60));
    packets.push_back(udp_to(1, 200));
    packets.push_back(tcp_to(1, testsupport::kTcpSyn));  // ignored

    const auto modes = evidence::udp_length_modes(packets, 3);
    REQUIRE(modes.size() == 3);
    CHECK(modes[0].length == 120);
    CHECK(modes[0].count == 5);
    CHECK(modes[0].share == doctest::Approx(5.0 / 12.0).epsilon(1e-12));
    CHECK(modes[1].length == 60);
    CHECK(modes[2].length == 80);

    const std::vector<pcap::DissectedPacket> tcp_only(4, tcp_to(1, testsupport::kTcpSyn));
    CHECK_THROWS_AS((void)evidence::udp_length_modes(tcp_only, 3), evidence::NoUdpPackets);
}

TEST_CASE("tcp flag buckets partition the selection") {
    std::vector<pcap::DissectedPacket> packets;
    for (int i = 0; i < 995; ++i) packets.push_back(tcp_to(1, testsupport::kTcpSyn));
    for (int i = 0; i < 5; ++i) {
        packets.push_back(tcp_to(1, testsupport::kTcpSyn | testsupport::kTcpAck));
    }
    const auto stats = evidence::compute_tcp_flag_stats(packets);
    CHECK(stats.total == 1000);
    CHECK(std::abs(stats.syn_only_ratio - 0.995) < 1e-9);
    CHECK(std::abs(stats.synack_ratio - 0.005) < 1e-9);

    std::vector<pcap::DissectedPacket> zoo;
    zoo.push_back(tcp_to(1, testsupport::kTcpSyn));
    zoo.push_back(tcp_to(1, testsupport::kTcpAck | testsupport::kTcpPsh));  // ack bucket
    zoo.push_back(tcp_to(1, testsupport::kTcpRst | testsupport::kTcpAck));  // rst bucket
    zoo.push_back(tcp_to(1, testsupport::kTcpFin | testsupport::kTcpAck));  // other
    zoo.push_back(tcp_to(1, testsupport::kTcpSyn | testsupport::kTcpAck));
    const auto z = evidence::compute_tcp_flag_stats(zoo);
    CHECK(z.total == 5);
    CHECK(z.syn_only_ratio == doctest::Approx(0.2));
    CHECK(z.ack_only_ratio == doctest::Approx(0.2));
    CHECK(z.rst_ratio == doctest::Approx(0.2));
    CHECK(z.other_ratio == doctest::Approx(0.2));
    CHECK(z.synack_ratio == doctest::Approx(0.2));
    CHECK(z.syn_only_ratio + z.ack_only_ratio + z.synack_ratio + z.rst_ratio +
              z.other_ratio ==
          doctest::Approx(1.0).epsilon(1e-12));

    std::mt19937 rng(59);
    for (int round = 0; round < 50; ++round) {
        std::vector<pcap::DissectedPacket> random_tcp;
        const std::size_t n = 1 + rng() % 300;
        for (std::size_t i = 0; i < n; ++i) {
            random_tcp.push_back(tcp_to(1, static_cast<std::uint8_t>(rng() % 64)));
        }
        const auto r = evidence::compute_tcp_flag_stats(random_tcp);
        CHECK(r.syn_only_ratio + r.ack_only_ratio + r.synack_ratio + r.rst_ratio +
                  r.other_ratio ==
              doctest::Approx(1.0).epsilon(1e-9));
    }
}

TEST_CASE("evidence pack respects every budget cap") {
    std::vector<pcap::DissectedPacket> window;
    std::mt19937 rng(71);
    for (int i = 0; i < 3000; ++i) {
        auto payload = testsupport::scenario_payload(6, i % 3);
        window.push_back(udp_to(0x0a00000a, static_cast<std::uint16_t>(payload.size() + 8),
                                std::move(payload), 0xc0000201 + i % 24));
    }

    const auto triage = triage::run_triage(window, 8);
    evidence::EvidenceBudget budget;
    budget.max_scan_packets = 500;
    budget.max_samples = 4;
    budget.max_hexdump_lines_per_sample = 3;
    budget.max_ascii_excerpt_chars = 40;
    budget.max_anchors_per_sample = 2;
    budget.top_k_udp_modes = 2;

    const auto pack =
        evidence::build_evidence_pack(window, triage, "t100s", 100.0, 105.0, budget);
    CHECK(pack.scan_packets == 500);
    CHECK(pack.samples.size() <= 4);
    CHECK(pack.udp_modes.size() <= 2);
    CHECK(!pack.no_primary_cluster);
    REQUIRE(!pack.samples.empty());
    for (const auto& s : pack.samples) {
        CHECK(s.source == evidence::SampleSource::Primary);
        CHECK(s.dst_ip.value == 0x0a00000a);
        CHECK(s.l4 == pcap::L4Proto::Udp);
        CHECK(s.fingerprint.ascii_excerpt.size() <= 40);
        CHECK(s.fingerprint.anchors.size() <= 2);
        CHECK(hexdump_data_lines(s.fingerprint.hexdump) <= 3);
    }
}

TEST_CASE("tcp-dominant packs carry flag stats instead of UDP modes") {
    std::vector<pcap::DissectedPacket> window;
    for (int i = 0; i < 200; ++i) window.push_back(tcp_to(0x0a000005, testsupport::kTcpSyn));
    const auto triage = triage::run_triage(window, 1);
    const auto pack = evidence::build_evidence_pack(window, triage, "t1s", 0.0, 5.0);
    CHECK(pack.udp_modes.empty());
    REQUIRE(pack.tcp_stats.has_value());
    CHECK(pack.tcp_stats->syn_only_ratio == doctest::Approx(1.0));
    CHECK(!pack.samples.empty());
}

TEST_CASE("missing primary cluster falls back to tagged secondary samples") {
    std::vector<pcap::DissectedPacket> window;
    for (int i = 0; i < 50; ++i) {
        window.push_back(udp_to(0x0a000001, 60, bytes_of("fallback payload")));
    }
    auto triage = triage::run_triage(window, 1);
    triage.victim_ip = {0x0a0000ff};  // nothing in the window matches

    const auto pack = evidence::build_evidence_pack(window, triage, "t2s", 0.0, 5.0);
    CHECK(pack.no_primary_cluster);
    REQUIRE(!pack.samples.empty());
    for (const auto& s : pack.samples) {
        CHECK(s.source == evidence::SampleSource::Secondary);
    }
    CHECK(pack.canonical_text.find("warning: no_primary_cluster") != std::string::npos);
}

TEST_CASE("empty windows are rejected") {
    triage::TriageResult t;
    CHECK_THROWS_AS((void)evidence::build_evidence_pack({}, t, "t0s", 0.0, 1.0),
                    evidence::EmptyWindow);
}

TEST_CASE("pack text is canonical and the build is deterministic") {
    std::vector<pcap::DissectedPacket> window;
    for (int i = 0; i < 120; ++i) {
        auto payload = testsupport::scenario_payload(3, i % 3);
        window.push_back(udp_to(0x0a00000d, static_cast<std::uint16_t>(payload.size() + 8),
                                std::move(payload)));
    }
    const auto triage = triage::run_triage(window, 4);
    const auto a = evidence::build_evidence_pack(window, triage, "t9s", 9.0, 14.0);
    const auto b = evidence::build_evidence_pack(window, triage, "t9s", 9.0, 14.0);
    CHECK(a.canonical_text == b.canonical_text);
    CHECK(a.canonical_text == evidence::serialize_pack(a));
    CHECK(a.canonical_text.find("EVIDENCE PACK v1\n") == 0);
    for (const char* section :
         {"HEADER\n", "TRIAGE\n", "UDP_LENGTH_MODES\n", "TCP_FLAG_STATS\n", "SAMPLES\n"}) {
        CHECK(a.canonical_text.find(section) != std::string::npos);
    }
}

TEST_CASE("packs survive the JSON round trip byte-for-byte") {
    std::vector<pcap::DissectedPacket> window;
    for (int i = 0; i < 90; ++i) {
        auto payload = testsupport::scenario_payload(5, i % 3);
        window.push_back(udp_to(0x0a00000c, static_cast<std::uint16_t>(payload.size() + 8),
                                std::move(payload)));
    }
    const auto triage = triage::run_triage(window, 2);
    const auto pack = evidence::build_evidence_pack(window, triage, "t44s", 44.0, 49.0);

    const auto j = evidence::pack_to_json(pack);
    const auto restored = evidence::pack_from_json(j);
    CHECK(restored.canonical_text == pack.canonical_text);
    CHECK(restored.incident_id == pack.incident_id);
    CHECK(restored.samples.size() == pack.samples.size());
    CHECK(evidence::pack_to_json(restored).dump() == j.dump());

    const auto t2 = evidence::triage_from_json(evidence::triage_to_json(triage));
    CHECK(t2.dominant_l4 == triage.dominant_l4);
    CHECK(t2.dominance_score == triage.dominance_score);
    CHECK(t2.victim_ip == triage.victim_ip);
}

TEST_CASE("fixed-width formatters behave as documented") {
    CHECK(evidence::fmt3(0.5) == "0.500");
    CHECK(evidence::fmt3(1.0) == "1.000");
    CHECK(evidence::fmt3(0.0) == "0.000");
    CHECK(evidence::fmt_seconds(577.0) == "577");
    CHECK(evidence::fmt_seconds(12.5) == "12.5");
    CHECK(evidence::fmt_seconds(1.125) == "1.125");
    CHECK(evidence::fmt_seconds(0.0) == "0");
}

}  // TEST_SUITE
