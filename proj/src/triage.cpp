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

#include "holmes/triage.hpp"

#include <fstream>
#include <map>

#include <nlohmann/json.hpp>

namespace holmes::triage {

std::string_view to_string(DominantL4 value) {
    switch (value) {
    case DominantL4::Udp:
        return "UDP";
    case DominantL4::Tcp:
        return "TCP";
    case DominantL4::Mixed:
        return "MIXED";
    }
    return "MIXED";
}

std::optional<DominantL4> parse_dominant_l4(std::string_view text) {
    if (text == "UDP" || text == "udp") {
        return DominantL4::Udp;
    }
    if (text == "TCP" || text == "tcp") {
        return DominantL4::Tcp;
    }
    if (text == "MIXED" || text == "mixed") {
        return DominantL4::Mixed;
    }
    return std::nullopt;
}

std::vector<pcap::DissectedPacket> sample_packets(std::span<const pcap::DissectedPacket> packets,
                                                  std::size_t rate_n) {
    if (packets.empty()) {
        throw EmptyInput("no packets in incident window");
    }
    if (rate_n < 1) {
        rate_n = 1;
    }
    std::vector<pcap::DissectedPacket> samples;
    samples.reserve(packets.size() / rate_n + 1);
    for (std::size_t i = 0; i < packets.size(); i += rate_n) {
        samples.push_back(packets[i]);
    }
    return samples;
}

std::pair<DominantL4, double> compute_dominance(std::span<const pcap::DissectedPacket> samples,
                                                double mixed_threshold) {
    if (samples.empty()) {
        throw EmptyInput("no samples to compute dominance over");
    }
    std::size_t udp = 0;
    std::size_t tcp = 0;
    for (const auto& pkt : samples) {
        (pkt.l4 == pcap::L4Proto::Udp ? udp : tcp)++;
    }
    const std::size_t total = udp + tcp;
    const double score = static_cast<double>(std::max(udp, tcp)) / static_cast<double>(total);
    if (score < mixed_threshold) {
        return {DominantL4::Mixed, score};
    }
    return {udp >= tcp ? DominantL4::Udp : DominantL4::Tcp, score};
}

std::pair<pcap::Ipv4Addr, double> guess_victim(std::span<const pcap::DissectedPacket> samples) {
    if (samples.empty()) {
        throw EmptyInput("no samples to guess a victim from");
    }
    // std::map keeps keys sorted, so equal counts resolve to the smallest
    // address for free.
    std::map<pcap::Ipv4Addr, std::size_t> by_dst;
    for (const auto& pkt : samples) {
        by_dst[pkt.dst_ip]++;
    }
    pcap::Ipv4Addr best = by_dst.begin()->first;
    std::size_t best_count = by_dst.begin()->second;
    for (const auto& [addr, count] : by_dst) {
        if (count > best_count) {
            best = addr;
            best_count = count;
        }
    }
    return {best, static_cast<double>(best_count) / static_cast<double>(samples.size())};
}

TriageResult run_triage(std::span<const pcap::DissectedPacket> window,
                        std::size_t rate_n,
                        double mixed_threshold) {
    const auto samples = sample_packets(window, rate_n);
    TriageResult result;
    std::tie(result.dominant_l4, result.dominance_score) =
        compute_dominance(samples, mixed_threshold);
    std::tie(result.victim_ip, result.top_dst_share) = guess_victim(samples);
    result.sample_count = samples.size();
    return result;
}

std::vector<pcap::DissectedPacket> load_presampled_jsonl(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open pre-sampled input: " + path.string());
    }
    std::vector<pcap::DissectedPacket> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) {
            continue;
        }
        nlohmann::json obj;
        try {
            obj = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error&) {
            throw std::runtime_error("bad JSONL at " + path.string() + ":" +
                                     std::to_string(line_no));
        }
        pcap::DissectedPacket pkt;
        pkt.ts_micros = static_cast<std::int64_t>(obj.value("ts_s", 0.0) * 1e6);
        const auto src = pcap::parse_ipv4(obj.value("src_ip", std::string{}));
        const auto dst = pcap::parse_ipv4(obj.value("dst_ip", std::string{}));
        if (!src || !dst) {
            throw std::runtime_error("bad IP address at " + path.string() + ":" +
                                     std::to_string(line_no));
        }
        pkt.src_ip = *src;
        pkt.dst_ip = *dst;
        const std::string l4 = obj.value("l4", std::string{"udp"});
        if (l4 == "tcp" || l4 == "TCP") {
            pkt.l4 = pcap::L4Proto::Tcp;
            pkt.tcp_flags = pcap::TcpFlags{};
        } else {
            pkt.l4 = pcap::L4Proto::Udp;
            pkt.udp_length = 8;
        }
        pkt.src_port = obj.value("src_port", 0);
        pkt.dst_port = obj.value("dst_port", 0);
        out.push_back(std::move(pkt));
    }
    return out;
}

}  // namespace holmes::triage
