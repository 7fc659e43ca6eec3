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

#include "holmes/orchestrator.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <map>
#include <memory>
#include <set>
#include <sstream>
#include <thread>

#include "holmes/pcap.hpp"

namespace holmes::orchestrator {

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) {
        s.remove_prefix(1);
    }
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) {
        s.remove_suffix(1);
    }
    return s;
}

double parse_number(std::string_view key, std::string_view value) {
    try {
        std::size_t used = 0;
        const std::string text(value);
        const double parsed = std::stod(text, &used);
        if (used != text.size()) {
            throw std::invalid_argument("trailing characters");
        }
        return parsed;
    } catch (const std::exception&) {
        throw ConfigError("config key '" + std::string(key) + "' needs a number, got '" +
                          std::string(value) + "'");
    }
}

std::size_t parse_count(std::string_view key, std::string_view value) {
    const double parsed = parse_number(key, value);
    if (parsed < 0 || parsed != static_cast<double>(static_cast<std::size_t>(parsed))) {
        throw ConfigError("config key '" + std::string(key) +
                          "' needs a non-negative integer");
    }
    return static_cast<std::size_t>(parsed);
}

}  // namespace

PipelineConfig parse_config_text(std::string_view text) {
    PipelineConfig config;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const std::size_t eol = std::min(text.find('\n', pos), text.size());
        std::string_view line = trim(text.substr(pos, eol - pos));
        pos = eol + 1;
        ++line_no;
        if (line.empty() || line.front() == '#') {
            continue;
        }
        const std::size_t eq = line.find('=');
        if (eq == std::string_view::npos) {
            throw ConfigError("config line " + std::to_string(line_no) +
                              ": expected key=value");
        }
        const std::string_view key = trim(line.substr(0, eq));
        const std::string_view value = trim(line.substr(eq + 1));

        if (key == "pcap_dir") {
            config.pcap_dir = std::string(value);
        } else if (key == "counters_file") {
            config.counters_file = std::string(value);
        } else if (key == "manifest_file") {
            config.manifest_file = std::string(value);
        } else if (key == "output_dir") {
            config.output_dir = std::string(value);
        } else if (key == "rate_n") {
            config.rate_n = parse_count(key, value);
        } else if (key == "k_sigma") {
            config.k_sigma = parse_number(key, value);
        } else if (key == "pps_floor") {
            config.pps_floor = parse_number(key, value);
        } else if (key == "alpha") {
            config.alpha = parse_number(key, value);
        } else if (key == "warmup") {
            config.warmup = static_cast<int>(parse_count(key, value));
        } else if (key == "mixed_threshold") {
            config.mixed_threshold = parse_number(key, value);
        } else if (key == "cooldown_s") {
            config.cooldown_s = parse_number(key, value);
        } else if (key == "max_retries") {
            config.max_retries = parse_count(key, value);
        } else if (key == "parallelism") {
            config.parallelism = parse_count(key, value);
        } else if (key == "backend") {
            config.backend.kind = std::string(value);
        } else if (key == "remote_base_url") {
            config.backend.remote.base_url = std::string(value);
        } else if (key == "remote_model") {
            config.backend.remote.model = std::string(value);
        } else if (key == "remote_timeout_s") {
            config.backend.remote.timeout_s = static_cast<int>(parse_count(key, value));
        } else if (key == "remote_transport_retries") {
            config.backend.remote.transport_retries =
                static_cast<int>(parse_count(key, value));
        } else if (key == "api_key_env") {
            config.backend.remote.api_key_env = std::string(value);
        } else if (key == "budget_max_scan_packets") {
            config.budget.max_scan_packets = parse_count(key, value);
        } else if (key == "budget_max_samples") {
            config.budget.max_samples = parse_count(key, value);
        } else if (key == "budget_max_hexdump_lines") {
            config.budget.max_hexdump_lines_per_sample = parse_count(key, value);
        } else if (key == "budget_max_ascii_chars") {
            config.budget.max_ascii_excerpt_chars = parse_count(key, value);
        } else if (key == "budget_max_anchors") {
            config.budget.max_anchors_per_sample = parse_count(key, value);
        } else if (key == "budget_top_k_modes") {
            config.budget.top_k_udp_modes = parse_count(key, value);
        } else {
            throw ConfigError("config line " + std::to_string(line_no) +
                              ": unknown key '" + std::string(key) + "'");
        }
    }
    return config;
}

PipelineConfig load_config_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ConfigError("cannot open config file: " + path.string());
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_config_text(buffer.str());
}

void validate_config(const PipelineConfig& config) {
    const auto fail = [](const std::string& msg) { throw ConfigError(msg); };
    if (config.rate_n < 1) fail("rate_n must be >= 1");
    if (config.k_sigma <= 0) fail("k_sigma must be > 0");
    if (config.pps_floor < 0) fail("pps_floor must be >= 0");
    if (config.alpha <= 0 || config.alpha > 1) fail("alpha must lie in (0, 1]");
    if (config.warmup < 0) fail("warmup must be >= 0");
    if (config.mixed_threshold < 0.5 || config.mixed_threshold > 1.0) {
        fail("mixed_threshold must lie in [0.5, 1]");
    }
    if (config.cooldown_s < 0) fail("cooldown_s must be >= 0");
    if (config.parallelism < 1) fail("parallelism must be >= 1");
    if (config.budget.max_scan_packets < 1 || config.budget.max_samples < 1 ||
        config.budget.max_hexdump_lines_per_sample < 1 ||
        config.budget.max_ascii_excerpt_chars < 1 ||
        config.budget.max_anchors_per_sample < 1 ||
        config.budget.top_k_udp_modes < 1) {
        fail("evidence budgets must all be >= 1");
    }
    if (config.backend.kind != "local" && config.backend.kind != "remote") {
        fail("backend must be 'local' or 'remote'");
    }
    if (config.backend.kind == "remote" && config.backend.remote.timeout_s < 1) {
        fail("remote_timeout_s must be >= 1");
    }
}

// ---------------------------------------------------------------------------
// Manifest
// ---------------------------------------------------------------------------

std::vector<ManifestEntry> load_manifest_jsonl(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoFailure("cannot open manifest file: " + path.string());
    }
    std::vector<ManifestEntry> entries;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) {
            continue;
        }
        try {
            const auto j = nlohmann::json::parse(line);
            entries.push_back({j.at("start_s").get<double>(),
                               j.at("end_s").get<double>(),
                               j.at("label").get<std::string>()});
        } catch (const nlohmann::json::exception& e) {
            throw IoFailure("manifest line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return entries;
}

// ---------------------------------------------------------------------------
// Audit
// ---------------------------------------------------------------------------

namespace {

void write_file(const std::filesystem::path& path, std::string_view content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoFailure("cannot open for writing: " + path.string());
    }
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) {
        throw IoFailure("short write: " + path.string());
    }
}

nlohmann::ordered_json audit_events(const AuditRecord& record) {
    auto events = nlohmann::ordered_json::array();

    events.push_back({
        {"event", "trigger"},
        {"incident_id", record.incident_id},
        {"sample",
         {{"ts_s", record.trigger_sample.ts_s},
          {"bytes_per_s", record.trigger_sample.bytes_per_s},
          {"pkts_per_s", record.trigger_sample.pkts_per_s},
          {"queue_drops", record.trigger_sample.queue_drops}}},
        {"baseline",
         {{"mean_pps", record.baseline.mean_pps},
          {"var_pps", record.baseline.var_pps},
          {"alpha", record.baseline.alpha},
          {"warmup_remaining", record.baseline.warmup_remaining}}},
    });

    if (record.window) {
        events.push_back({
            {"event", "window"},
            {"start_s", record.window->window_start_s},
            {"end_s", record.window->window_end_s},
            {"slice", record.window->pcap_slice_path.filename().string()},
            {"packets", record.window_packets},
        });
    }
    if (record.triage) {
        events.push_back({{"event", "triage"},
                          {"result", evidence::triage_to_json(*record.triage)}});
    }
    if (record.suppressed) {
        events.push_back({{"event", "suppression"},
                          {"cooldown_s", record.cooldown_s}});
    }
    if (record.pack) {
        events.push_back(
            {{"event", "evidence"}, {"pack", evidence::pack_to_json(*record.pack)}});
    }
    for (std::size_t i = 0; i < record.http_exchanges.size(); ++i) {
        events.push_back({{"event", "http_exchange"},
                          {"index", i + 1},
                          {"request_body", record.http_exchanges[i].first},
                          {"response_body", record.http_exchanges[i].second}});
    }
    for (std::size_t i = 0; i < record.attempts.size(); ++i) {
        const auto& attempt = record.attempts[i];
        events.push_back({{"event", "attempt"},
                          {"index", i + 1},
                          {"request", attempt.request},
                          {"raw_response", attempt.raw_response},
                          {"errors", detective::errors_to_json(attempt.errors)}});
    }

    nlohmann::ordered_json final_event = {
        {"event", "final"},
        {"state", telemetry::to_string(record.final_state)},
        {"ok", record.report.has_value()},
        {"attempts_used", record.attempts.size()},
    };
    if (record.report) {
        final_event["report"] = detective::report_to_json(*record.report);
    }
    if (!record.failure.empty()) {
        final_event["failure"] = record.failure;
    }
    events.push_back(std::move(final_event));

    events.push_back({{"event", "timing"},
                      {"triage_ms", record.triage_ms},
                      {"evidence_ms", record.evidence_ms},
                      {"investigate_ms", record.investigate_ms},
                      {"total_ms", record.total_ms}});
    return events;
}

}  // namespace

std::vector<std::filesystem::path> emit_audit(const AuditRecord& record,
                                              const std::filesystem::path& out_dir) {
    const auto dir = out_dir / record.incident_id;
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) {
        throw IoFailure("cannot create " + dir.string() + ": " + ec.message());
    }

    std::vector<std::filesystem::path> written;
    std::string audit_text;
    for (const auto& event : audit_events(record)) {
        audit_text += event.dump();
        audit_text += '\n';
    }
    const auto audit_path = dir / "audit.jsonl";
    write_file(audit_path, audit_text);
    written.push_back(audit_path);

    if (record.pack) {
        const auto txt_path = dir / "evidence.txt";
        write_file(txt_path, record.pack->canonical_text);
        written.push_back(txt_path);
        const auto json_path = dir / "evidence.json";
        write_file(json_path, evidence::pack_to_json(*record.pack).dump(2) + "\n");
        written.push_back(json_path);
    }
    if (record.report) {
        const auto report_path = dir / "report.json";
        write_file(report_path, detective::report_to_json(*record.report).dump(2) + "\n");
        written.push_back(report_path);
    }
    return written;
}

// ---------------------------------------------------------------------------
// Summary
// ---------------------------------------------------------------------------

nlohmann::ordered_json summary_to_json(const RunSummary& summary) {
    nlohmann::ordered_json j;
    j["triggers"] = summary.triggers;
    j["suppressed"] = summary.suppressed;
    j["investigations"] = summary.investigations;
    j["failures"] = summary.failures;
    auto rows = nlohmann::ordered_json::array();
    for (const auto& row : summary.rows) {
        nlohmann::ordered_json r;
        r["incident_id"] = row.incident_id;
        r["trigger_ts_s"] = row.trigger_ts_s;
        r["slice"] = row.slice;
        r["victim_ip"] = row.victim_ip;
        r["dominant_l4"] = row.dominant_l4;
        r["dominance_score"] = row.dominance_score;
        r["top_anchors"] = row.top_anchors;
        r["attack_type"] = row.attack_type;
        r["confidence"] = row.confidence;
        r["ground_truth"] = row.ground_truth;
        if (row.gt_match.has_value()) {
            r["gt_match"] = *row.gt_match;
        } else {
            r["gt_match"] = nullptr;
        }
        r["investigation_failed"] = row.investigation_failed;
        rows.push_back(std::move(r));
    }
    j["rows"] = std::move(rows);
    return j;
}

std::string format_summary_table(const RunSummary& summary) {
    std::vector<std::vector<std::string>> cells;
    cells.push_back({"incident", "trigger", "slice", "victim", "l4", "score", "pred",
                     "conf", "gt", "ok", "anchors"});
    for (const auto& row : summary.rows) {
        std::string anchors;
        for (std::size_t i = 0; i < row.top_anchors.size() && i < 3; ++i) {
            if (!anchors.empty()) {
                anchors += ", ";
            }
            anchors += row.top_anchors[i];
        }
        char conf[16];
        std::snprintf(conf, sizeof(conf), "%.2f", row.confidence);
        cells.push_back({
            row.incident_id,
            evidence::fmt_seconds(row.trigger_ts_s) + "s",
            row.slice,
            row.victim_ip,
            row.dominant_l4,
            evidence::fmt3(row.dominance_score),
            row.attack_type,
            conf,
            row.ground_truth.empty() ? "-" : row.ground_truth,
            row.gt_match.has_value() ? (*row.gt_match ? "yes" : "NO") : "-",
            anchors,
        });
    }

    std::vector<std::size_t> widths(cells.front().size(), 0);
    for (const auto& row : cells) {
        for (std::size_t c = 0; c < row.size(); ++c) {
            widths[c] = std::max(widths[c], row[c].size());
        }
    }
    std::string out;
    for (const auto& row : cells) {
        for (std::size_t c = 0; c < row.size(); ++c) {
            out += row[c];
            if (c + 1 < row.size()) {
                out.append(widths[c] - row[c].size() + 2, ' ');
            }
        }
        while (!out.empty() && out.back() == ' ') {
            out.pop_back();
        }
        out += '\n';
    }
    return out;
}

// ---------------------------------------------------------------------------
// Replay
// ---------------------------------------------------------------------------

namespace {

std::unique_ptr<detective::DetectiveBackend> make_backend(const PipelineConfig& config,
                                                          AuditRecord& record) {
    if (config.backend.kind == "remote") {
        auto backend = std::make_unique<detective::RemoteChatBackend>(config.backend.remote);
        backend->wire_log = [&record](std::string_view request, std::string_view response) {
            record.http_exchanges.emplace_back(std::string(request),
                                               std::string(response));
        };
        return backend;
    }
    return std::make_unique<detective::LocalRulesBackend>();
}

double elapsed_ms(std::chrono::steady_clock::time_point since) {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                     since)
        .count();
}

std::vector<std::string> pack_top_anchors(const evidence::EvidencePack& pack,
                                          std::size_t limit) {
    std::vector<std::string> anchors;
    for (const auto& sample : pack.samples) {
        for (const auto& anchor : sample.fingerprint.anchors) {
            if (std::find(anchors.begin(), anchors.end(), anchor) == anchors.end()) {
                anchors.push_back(anchor);
                if (anchors.size() >= limit) {
                    return anchors;
                }
            }
        }
    }
    return anchors;
}

}  // namespace

RunSummary run_replay(const PipelineConfig& config) {
    validate_config(config);
    const auto slices = telemetry::scan_slice_directory(config.pcap_dir);
    const auto counters = telemetry::load_counters_jsonl(config.counters_file);
    std::vector<ManifestEntry> manifest;
    if (!config.manifest_file.empty()) {
        manifest = load_manifest_jsonl(config.manifest_file);
    }

    telemetry::AnomalyBaseline baseline;
    baseline.alpha = config.alpha;
    baseline.warmup_remaining = config.warmup;
    telemetry::CooldownState cooldown;
    cooldown.cooldown_s = config.cooldown_s;

    std::map<std::string, std::vector<pcap::DissectedPacket>> slice_cache;
    const auto load_slice =
        [&](const std::filesystem::path& path) -> const std::vector<pcap::DissectedPacket>& {
        auto it = slice_cache.find(path.string());
        if (it == slice_cache.end()) {
            const auto read = pcap::read_pcap_file(path);
            it = slice_cache.emplace(path.string(), pcap::dissect_all(read.records)).first;
        }
        return it->second;
    };

    RunSummary summary;
    std::vector<AuditRecord> records;
    std::set<std::string> used_ids;

    for (const auto& sample : counters) {
        if (!telemetry::check_anomaly(baseline, sample, config.k_sigma,
                                      config.pps_floor)) {
            baseline = telemetry::update_baseline(baseline, sample);
            continue;
        }
        // Anomalous samples do not feed the baseline; a sustained spike
        // must not normalize itself away.
        ++summary.triggers;

        AuditRecord rec;
        rec.trigger_sample = sample;
        rec.baseline = baseline;
        rec.cooldown_s = config.cooldown_s;
        std::string id = "t" + evidence::fmt_seconds(sample.ts_s) + "s";
        for (int suffix = 2; !used_ids.insert(id).second; ++suffix) {
            id = "t" + evidence::fmt_seconds(sample.ts_s) + "s-" + std::to_string(suffix);
        }
        rec.incident_id = std::move(id);

        const auto started = std::chrono::steady_clock::now();
        try {
            rec.window = telemetry::open_incident(sample.ts_s, slices);
        } catch (const telemetry::NoSliceAvailable& e) {
            rec.failure = e.what();
            records.push_back(std::move(rec));
            continue;
        }

        const std::vector<pcap::DissectedPacket>* packets = nullptr;
        try {
            packets = &load_slice(rec.window->pcap_slice_path);
        } catch (const std::exception& e) {
            rec.failure = std::string("slice unreadable: ") + e.what();
            records.push_back(std::move(rec));
            continue;
        }
        rec.window_packets = packets->size();
        if (packets->empty()) {
            rec.failure = "window slice holds no dissectable packets";
            records.push_back(std::move(rec));
            continue;
        }

        rec.triage = triage::run_triage(*packets, config.rate_n, config.mixed_threshold);
        rec.triage_ms = elapsed_ms(started);

        const telemetry::DedupKey key{rec.triage->victim_ip, rec.triage->dominant_l4};
        if (telemetry::should_suppress(cooldown, key, sample.ts_s)) {
            rec.suppressed = true;
            rec.final_state = telemetry::WindowState::Suppressed;
            ++summary.suppressed;
            records.push_back(std::move(rec));
            continue;
        }

        const auto evidence_started = std::chrono::steady_clock::now();
        rec.pack = evidence::build_evidence_pack(*packets, *rec.triage, rec.incident_id,
                                                 rec.window->window_start_s,
                                                 rec.window->window_end_s, config.budget);
        rec.evidence_ms = elapsed_ms(evidence_started);
        records.push_back(std::move(rec));
    }

    // Backend calls, bounded by config.parallelism. Everything before this
    // point (trigger order, suppression decisions) is already fixed.
    std::vector<std::size_t> jobs;
    for (std::size_t i = 0; i < records.size(); ++i) {
        if (records[i].pack && !records[i].suppressed && records[i].failure.empty()) {
            jobs.push_back(i);
        }
    }
    summary.investigations = jobs.size();

    const auto run_job = [&](std::size_t index) {
        AuditRecord& rec = records[index];
        const auto backend = make_backend(config, rec);
        const auto started = std::chrono::steady_clock::now();
        try {
            auto outcome = detective::investigate(*rec.pack, *rec.triage, *backend,
                                                  config.max_retries);
            rec.attempts = std::move(outcome.attempts);
            if (outcome.report) {
                rec.report = std::move(outcome.report);
            } else {
                rec.failure = "validation retries exhausted";
            }
        } catch (const detective::BackendUnreachable& e) {
            rec.failure = std::string("backend unreachable: ") + e.what();
        }
        rec.investigate_ms = elapsed_ms(started);
    };

    if (config.parallelism <= 1 || jobs.size() <= 1) {
        for (const std::size_t index : jobs) {
            run_job(index);
        }
    } else {
        std::atomic<std::size_t> next{0};
        const std::size_t workers = std::min(config.parallelism, jobs.size());
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                while (true) {
                    const std::size_t slot = next.fetch_add(1);
                    if (slot >= jobs.size()) {
                        return;
                    }
                    run_job(jobs[slot]);
                }
            });
        }
        for (auto& worker : pool) {
            worker.join();
        }
    }

    for (auto& rec : records) {
        rec.total_ms = rec.triage_ms + rec.evidence_ms + rec.investigate_ms;
        emit_audit(rec, config.output_dir);
        if (rec.suppressed) {
            continue;
        }

        SummaryRow row;
        row.incident_id = rec.incident_id;
        row.trigger_ts_s = rec.trigger_sample.ts_s;
        row.slice = rec.window ? rec.window->pcap_slice_path.filename().string() : "-";
        if (rec.triage) {
            row.victim_ip = pcap::to_string(rec.triage->victim_ip);
            row.dominant_l4 = std::string(triage::to_string(rec.triage->dominant_l4));
            row.dominance_score = rec.triage->dominance_score;
        } else {
            row.victim_ip = "-";
            row.dominant_l4 = "-";
        }
        if (rec.pack) {
            row.top_anchors = pack_top_anchors(*rec.pack, 3);
        }
        if (rec.report) {
            row.attack_type = rec.report->attack_type;
            row.confidence = rec.report->confidence;
        } else {
            row.attack_type = rec.pack ? "(failed)" : "(no evidence)";
            row.investigation_failed = true;
            ++summary.failures;
        }
        for (const auto& entry : manifest) {
            if (rec.trigger_sample.ts_s >= entry.start_s &&
                rec.trigger_sample.ts_s < entry.end_s) {
                row.ground_truth = entry.label;
                row.gt_match = rec.report && entry.label == rec.report->attack_type;
                break;
            }
        }
        summary.rows.push_back(std::move(row));
    }

    write_file(config.output_dir / "summary.json", summary_to_json(summary).dump(2) + "\n");
    return summary;
}

}  // namespace holmes::orchestrator
