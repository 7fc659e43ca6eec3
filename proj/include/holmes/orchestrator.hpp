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
#include <string>
#include <utility>
#include <vector>

#include "holmes/detective.hpp"
#include "holmes/evidence.hpp"
#include "holmes/telemetry.hpp"
#include "holmes/triage.hpp"

namespace holmes::orchestrator {

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

struct BackendSelection {
    std::string kind = "local";  // "local" or "remote"
    detective::RemoteChatConfig remote;
};

struct PipelineConfig {
    std::filesystem::path pcap_dir;
    std::filesystem::path counters_file;
    std::filesystem::path manifest_file;  // optional ground-truth sidecar
    std::filesystem::path output_dir = "out";
    std::size_t rate_n = 8;
    double k_sigma = 3.0;
    double pps_floor = 1000.0;
    double alpha = 0.1;
    int warmup = 10;
    double mixed_threshold = triage::kDefaultMixedThreshold;
    evidence::EvidenceBudget budget;
    double cooldown_s = 60.0;
    BackendSelection backend;
    std::size_t max_retries = detective::kDefaultMaxRetries;
    std::size_t parallelism = 1;
};

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Flat key=value document, '#' comments, unknown keys rejected. Numeric
/// values are range-checked against the limits of their home modules.
PipelineConfig parse_config_text(std::string_view text);
PipelineConfig load_config_file(const std::filesystem::path& path);
void validate_config(const PipelineConfig& config);

// ---------------------------------------------------------------------------
// Ground truth
// ---------------------------------------------------------------------------

/// Scenario manifest row: the label expected for triggers inside
/// [start_s, end_s).
struct ManifestEntry {
    double start_s = 0.0;
    double end_s = 0.0;
    std::string label;
};

std::vector<ManifestEntry> load_manifest_jsonl(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Audit
// ---------------------------------------------------------------------------

/// Everything one trigger produced, sufficient to replay the validation
/// decision offline.
struct AuditRecord {
    std::string incident_id;
    telemetry::CounterSample trigger_sample;
    telemetry::AnomalyBaseline baseline;  // snapshot at trigger time
    std::optional<telemetry::IncidentWindow> window;
    std::size_t window_packets = 0;
    std::optional<triage::TriageResult> triage;
    bool suppressed = false;
    double cooldown_s = 0.0;
    std::optional<evidence::EvidencePack> pack;
    std::vector<detective::Attempt> attempts;
    /// Raw HTTP request/response bodies from the remote backend, in order.
    std::vector<std::pair<std::string, std::string>> http_exchanges;
    std::optional<detective::IncidentReport> report;
    std::string failure;  // non-empty when the incident did not complete
    telemetry::WindowState final_state = telemetry::WindowState::Closed;
    double triage_ms = 0.0;
    double evidence_ms = 0.0;
    double investigate_ms = 0.0;
    double total_ms = 0.0;
};

struct IoFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Writes `<out>/<incident>/audit.jsonl` plus, when present, evidence.txt,
/// evidence.json and report.json. Byte-deterministic for a given record.
std::vector<std::filesystem::path> emit_audit(const AuditRecord& record,
                                              const std::filesystem::path& out_dir);

// ---------------------------------------------------------------------------
// Replay
// ---------------------------------------------------------------------------

struct SummaryRow {
    std::string incident_id;
    double trigger_ts_s = 0.0;
    std::string slice;
    std::string victim_ip;
    std::string dominant_l4;
    double dominance_score = 0.0;
    std::vector<std::string> top_anchors;
    std::string attack_type;  // "(failed)" / "(empty window)" when unresolved
    double confidence = 0.0;
    std::string ground_truth;       // empty without a manifest entry
    std::optional<bool> gt_match;   // unset without a manifest entry
    bool investigation_failed = false;
};

struct RunSummary {
    std::vector<SummaryRow> rows;  // trigger order, one per non-suppressed trigger
    std::size_t triggers = 0;
    std::size_t suppressed = 0;
    std::size_t investigations = 0;
    std::size_t failures = 0;
};

std::string format_summary_table(const RunSummary& summary);
nlohmann::ordered_json summary_to_json(const RunSummary& summary);

/// Full replay: stream counters, trigger on anomalies, triage, suppress
/// duplicates, build evidence, investigate, and audit every step. Fatal
/// only on unreadable inputs; per-incident failures become failure rows.
RunSummary run_replay(const PipelineConfig& config);

}  // namespace holmes::orchestrator
