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

#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "holmes/detective.hpp"
#include "holmes/evidence.hpp"
#include "holmes/orchestrator.hpp"
#include "holmes/pcap.hpp"
#include "holmes/telemetry.hpp"
#include "holmes/triage.hpp"

namespace {

using namespace holmes;

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot open " + path.string());
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

std::vector<pcap::DissectedPacket> load_slice(const std::filesystem::path& path) {
    const auto read = pcap::read_pcap_file(path);
    auto packets = pcap::dissect_all(read.records);
    if (packets.empty()) {
        throw std::runtime_error("no dissectable IPv4 TCP/UDP packets in " +
                                 path.string());
    }
    return packets;
}

std::unique_ptr<detective::DetectiveBackend> make_backend(
    const orchestrator::BackendSelection& selection) {
    if (selection.kind == "remote") {
        return std::make_unique<detective::RemoteChatBackend>(selection.remote);
    }
    if (selection.kind == "local") {
        return std::make_unique<detective::LocalRulesBackend>();
    }
    throw std::runtime_error("unknown backend '" + selection.kind + "'");
}

/// Slice-relative window bounds: prefer the <start>s--<end>s filename
/// convention, fall back to the capture's own first/last timestamps.
std::pair<double, double> window_bounds(const std::filesystem::path& slice,
                                        std::span<const pcap::DissectedPacket> packets) {
    if (const auto ref = telemetry::parse_slice_name(slice)) {
        return {ref->start_s, ref->end_s};
    }
    return {static_cast<double>(packets.front().ts_micros) / 1e6,
            static_cast<double>(packets.back().ts_micros) / 1e6};
}

int cmd_run(const orchestrator::PipelineConfig& config) {
    const auto summary = orchestrator::run_replay(config);
    std::cout << orchestrator::format_summary_table(summary);
    std::cout << "triggers=" << summary.triggers << " suppressed=" << summary.suppressed
              << " investigations=" << summary.investigations
              << " failures=" << summary.failures << "\n";
    return 0;
}

int cmd_triage(const orchestrator::PipelineConfig& config,
               const std::filesystem::path& slice) {
    const auto packets = load_slice(slice);
    const auto result =
        triage::run_triage(packets, config.rate_n, config.mixed_threshold);
    std::cout << evidence::triage_to_json(result).dump(2) << "\n";
    return 0;
}

int cmd_evidence(const orchestrator::PipelineConfig& config,
                 const std::filesystem::path& slice,
                 const std::string& victim,
                 const std::string& l4,
                 bool as_json) {
    const auto packets = load_slice(slice);
    auto result = triage::run_triage(packets, config.rate_n, config.mixed_threshold);
    if (!victim.empty()) {
        const auto parsed = pcap::parse_ipv4(victim);
        if (!parsed) {
            throw std::runtime_error("bad --victim address: " + victim);
        }
        result.victim_ip = *parsed;
    }
    if (!l4.empty()) {
        if (l4 == "udp") {
            result.dominant_l4 = triage::DominantL4::Udp;
        } else if (l4 == "tcp") {
            result.dominant_l4 = triage::DominantL4::Tcp;
        } else if (l4 == "mixed") {
            result.dominant_l4 = triage::DominantL4::Mixed;
        } else {
            throw std::runtime_error("bad --l4 value: " + l4 +
                                     " (expected udp, tcp or mixed)");
        }
    }
    const auto [start_s, end_s] = window_bounds(slice, packets);
    const auto pack = evidence::build_evidence_pack(
        packets, result, slice.stem().string(), start_s, end_s, config.budget);
    if (as_json) {
        std::cout << evidence::pack_to_json(pack).dump(2) << "\n";
    } else {
        std::cout << pack.canonical_text;
    }
    return 0;
}

int cmd_investigate(const orchestrator::PipelineConfig& config,
                    const std::filesystem::path& pack_file) {
    const auto pack =
        evidence::pack_from_json(nlohmann::json::parse(read_text_file(pack_file)));
    const auto backend = make_backend(config.backend);
    const auto outcome =
        detective::investigate(pack, pack.triage, *backend, config.max_retries);
    if (outcome.report) {
        std::cout << detective::report_to_json(*outcome.report).dump(2) << "\n";
        return 0;
    }
    std::cerr << "no valid report after " << outcome.attempts_used << " attempts\n";
    if (!outcome.attempts.empty()) {
        std::cerr << detective::errors_to_json(outcome.attempts.back().errors).dump(2)
                  << "\n";
    }
    return 1;
}

int cmd_validate(const std::filesystem::path& report_file,
                 const std::filesystem::path& pack_file) {
    const auto pack =
        evidence::pack_from_json(nlohmann::json::parse(read_text_file(pack_file)));
    const auto raw = read_text_file(report_file);
    const auto result = detective::parse_and_validate(raw, pack, pack.triage);
    if (const auto* report = std::get_if<detective::IncidentReport>(&result)) {
        std::cout << "valid: " << report->attack_type << "\n";
        return 0;
    }
    const auto& errors = std::get<std::vector<detective::ValidationError>>(result);
    std::cout << detective::errors_to_json(errors).dump(2) << "\n";
    return 2;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Hierarchical DDoS investigation pipeline"};
    app.require_subcommand(1);

    std::string config_path;
    orchestrator::PipelineConfig config;

    // Shared overrides; each takes effect only when passed on the command line.
    std::string pcap_dir, counters_file, manifest_file, output_dir;
    std::string backend_kind, base_url, model, api_key_env;
    std::size_t rate_n = 0, max_retries = 0, parallelism = 0;
    double k_sigma = 0, pps_floor = 0, alpha = 0, mixed_threshold = 0, cooldown_s = 0;
    int warmup = 0, timeout_s = 0, transport_retries = 0;
    std::size_t max_scan = 0, max_samples = 0, max_hex = 0, max_ascii = 0,
                max_anchors = 0, top_k = 0;

    const auto add_backend_flags = [&](CLI::App* sub) {
        sub->add_option("--backend", backend_kind, "local or remote");
        sub->add_option("--base-url", base_url, "remote chat endpoint");
        sub->add_option("--model", model, "remote model name");
        sub->add_option("--timeout", timeout_s, "remote timeout (s)");
        sub->add_option("--transport-retries", transport_retries,
                        "remote transport retries");
        sub->add_option("--api-key-env", api_key_env,
                        "environment variable holding the API key");
        sub->add_option("--max-retries", max_retries, "validation retry budget");
    };
    const auto add_triage_flags = [&](CLI::App* sub) {
        sub->add_option("--rate-n", rate_n, "systematic sampling rate (1-in-N)");
        sub->add_option("--mixed-threshold", mixed_threshold,
                        "dominance share below which the window is MIXED");
    };
    const auto add_budget_flags = [&](CLI::App* sub) {
        sub->add_option("--max-scan-packets", max_scan, "packets scanned per window");
        sub->add_option("--max-samples", max_samples, "samples quoted in the pack");
        sub->add_option("--max-hexdump-lines", max_hex, "hexdump lines per sample");
        sub->add_option("--max-ascii-chars", max_ascii, "ASCII excerpt length");
        sub->add_option("--max-anchors", max_anchors, "anchors kept per sample");
        sub->add_option("--top-k-modes", top_k, "UDP length modes reported");
    };

    auto* run = app.add_subcommand("run", "replay counters + slices end to end");
    run->add_option("--pcap-dir", pcap_dir, "directory of <start>s--<end>s.pcap slices");
    run->add_option("--counters", counters_file, "counters JSONL file");
    run->add_option("--manifest", manifest_file, "ground-truth manifest JSONL");
    run->add_option("--output", output_dir, "audit output directory");
    run->add_option("--k-sigma", k_sigma, "anomaly threshold in sigmas");
    run->add_option("--pps-floor", pps_floor, "minimum pps for a trigger");
    run->add_option("--alpha", alpha, "EWMA smoothing factor");
    run->add_option("--warmup", warmup, "baseline warmup samples");
    run->add_option("--cooldown", cooldown_s, "per victim+L4 cooldown (s)");
    run->add_option("--parallelism", parallelism, "concurrent investigations");
    add_triage_flags(run);
    add_budget_flags(run);
    add_backend_flags(run);

    std::string slice, victim, l4;
    bool pack_json = false;
    auto* triage_cmd = app.add_subcommand("triage", "triage one pcap slice");
    triage_cmd->add_option("--slice", slice, "pcap slice file")
        ->required()
        ->check(CLI::ExistingFile);
    add_triage_flags(triage_cmd);

    auto* evidence_cmd =
        app.add_subcommand("evidence", "build and print an evidence pack");
    evidence_cmd->add_option("--slice", slice, "pcap slice file")
        ->required()
        ->check(CLI::ExistingFile);
    evidence_cmd->add_option("--victim", victim, "override the triaged victim IP");
    evidence_cmd->add_option("--l4", l4, "override the triaged branch (udp|tcp|mixed)");
    evidence_cmd->add_flag("--json", pack_json, "print the machine form, not the text");
    add_triage_flags(evidence_cmd);
    add_budget_flags(evidence_cmd);

    std::string pack_file, report_file;
    auto* investigate_cmd =
        app.add_subcommand("investigate", "run the detective on a pack file");
    investigate_cmd->add_option("--pack", pack_file, "evidence pack JSON file")
        ->required()
        ->check(CLI::ExistingFile);
    add_backend_flags(investigate_cmd);

    auto* validate_cmd =
        app.add_subcommand("validate", "validate a report against a pack");
    validate_cmd->add_option("--report", report_file, "incident report JSON file")
        ->required()
        ->check(CLI::ExistingFile);
    validate_cmd->add_option("--pack", pack_file, "evidence pack JSON file")
        ->required()
        ->check(CLI::ExistingFile);

    for (auto* sub : {run, triage_cmd, evidence_cmd, investigate_cmd, validate_cmd}) {
        sub->add_option("--config", config_path, "key=value config file")
            ->check(CLI::ExistingFile);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        if (!config_path.empty()) {
            config = orchestrator::load_config_file(config_path);
        }
        const auto passed = [&](const char* name) {
            const auto* opt = app.get_subcommands().front()->get_option_no_throw(name);
            return opt != nullptr && opt->count() > 0;
        };
        if (passed("--pcap-dir")) config.pcap_dir = pcap_dir;
        if (passed("--counters")) config.counters_file = counters_file;
        if (passed("--manifest")) config.manifest_file = manifest_file;
        if (passed("--output")) config.output_dir = output_dir;
        if (passed("--k-sigma")) config.k_sigma = k_sigma;
        if (passed("--pps-floor")) config.pps_floor = pps_floor;
        if (passed("--alpha")) config.alpha = alpha;
        if (passed("--warmup")) config.warmup = warmup;
        if (passed("--cooldown")) config.cooldown_s = cooldown_s;
        if (passed("--parallelism")) config.parallelism = parallelism;
        if (passed("--rate-n")) config.rate_n = rate_n;
        if (passed("--mixed-threshold")) config.mixed_threshold = mixed_threshold;
        if (passed("--backend")) config.backend.kind = backend_kind;
        if (passed("--base-url")) config.backend.remote.base_url = base_url;
        if (passed("--model")) config.backend.remote.model = model;
        if (passed("--timeout")) config.backend.remote.timeout_s = timeout_s;
        if (passed("--transport-retries")) {
            config.backend.remote.transport_retries = transport_retries;
        }
        if (passed("--api-key-env")) config.backend.remote.api_key_env = api_key_env;
        if (passed("--max-retries")) config.max_retries = max_retries;
        if (passed("--max-scan-packets")) config.budget.max_scan_packets = max_scan;
        if (passed("--max-samples")) config.budget.max_samples = max_samples;
        if (passed("--max-hexdump-lines")) {
            config.budget.max_hexdump_lines_per_sample = max_hex;
        }
        if (passed("--max-ascii-chars")) {
            config.budget.max_ascii_excerpt_chars = max_ascii;
        }
        if (passed("--max-anchors")) config.budget.max_anchors_per_sample = max_anchors;
        if (passed("--top-k-modes")) config.budget.top_k_udp_modes = top_k;

        if (app.got_subcommand(run)) {
            return cmd_run(config);
        }
        if (app.got_subcommand(triage_cmd)) {
            return cmd_triage(config, slice);
        }
        if (app.got_subcommand(evidence_cmd)) {
            return cmd_evidence(config, slice, victim, l4, pack_json);
        }
        if (app.got_subcommand(investigate_cmd)) {
            return cmd_investigate(config, pack_file);
        }
        if (app.got_subcommand(validate_cmd)) {
            return cmd_validate(report_file, pack_file);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
