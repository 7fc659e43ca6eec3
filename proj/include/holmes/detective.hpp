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

#include <array>
#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "holmes/evidence.hpp"
#include "holmes/triage.hpp"

namespace holmes::detective {

// ---------------------------------------------------------------------------
// Report vocabulary
// ---------------------------------------------------------------------------

enum class Verdict {
    Attack,
    Benign,
    Uncertain,
};

enum class AttackFamily {
    ReflectionAmplification,
    DirectFlood,
    Mixed,
    Unknown,
};

enum class PayloadStyle {
    RandomNoise,
    HttpLike,
    Asn1OidLike,
    KvSemicolonList,
    TextBannerLike,
    MixedOrUnclear,
};

std::string_view to_string(Verdict v);
std::string_view to_string(AttackFamily f);
std::string_view to_string(PayloadStyle s);
std::optional<Verdict> parse_verdict(std::string_view text);
std::optional<AttackFamily> parse_attack_family(std::string_view text);
std::optional<PayloadStyle> parse_payload_style(std::string_view text);

/// Closed label set; anything else is a BadEnum at validation time.
inline constexpr std::array<std::string_view, 13> kAttackTypes = {
    "UDP Flood",
    "SYN Flood",
    "ACK Flood",
    "HTTP/2 Rapid Reset",
    "DNS Reflection",
    "NetBIOS Reflection",
    "LDAP/CLDAP Reflection",
    "SNMP Reflection",
    "MSSQL Reflection",
    "SSDP/UPnP Reflection",
    "NTP Reflection",
    "Other Reflection",
    "Unknown",
};

bool is_known_attack_type(std::string_view label);
bool is_reflection_label(std::string_view label);

struct AnalysisTrace {
    PayloadStyle payload_style = PayloadStyle::MixedOrUnclear;
    std::size_t primary_samples_checked = 0;
    std::string decision;
};

/// The one struct the whole pipeline exists to produce. Field set is closed:
/// validation rejects anything beyond it.
struct IncidentReport {
    Verdict verdict = Verdict::Uncertain;
    AttackFamily attack_family = AttackFamily::Unknown;
    std::string attack_type = "Unknown";
    AnalysisTrace analysis_trace;
    std::vector<std::string> key_evidence;   // 2..6 items, each with a quote
    std::string reasoning;                   // short text with >= 1 quote
    std::vector<std::string> recommended_actions;  // 3..6 items
    double confidence = 0.0;                 // [0, 1]
};

nlohmann::ordered_json report_to_json(const IncidentReport& report);

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

enum class ValidationKind {
    ParseFailure,
    MissingField,
    ExtraField,
    BadEnum,
    BadCardinality,
    BadRange,
    QuoteMissing,
    QuoteNotInPack,
    GateViolation,
};

std::string_view to_string(ValidationKind kind);

struct ValidationError {
    ValidationKind kind = ValidationKind::ParseFailure;
    std::string path;     // e.g. "key_evidence[1]"
    std::string message;  // safe to feed back to the backend verbatim

    bool operator==(const ValidationError&) const = default;
};

nlohmann::ordered_json errors_to_json(std::span<const ValidationError> errors);

/// Reasoning text ceiling; the contract asks for 1-3 sentences and sentence
/// counting is not well defined, so only the length is enforced.
inline constexpr std::size_t kMaxReasoningChars = 600;

using ValidationResult = std::variant<IncidentReport, std::vector<ValidationError>>;

/// Parses a raw backend response into a validated report. A markdown code
/// fence around the JSON is stripped first; everything after that is strict.
/// On failure the complete list of violations comes back, not just the
/// first, so the correction loop can feed all of it to the backend at once.
ValidationResult parse_and_validate(std::string_view raw,
                                    const evidence::EvidencePack& pack,
                                    const triage::TriageResult& triage);

/// Backtick-wrapped spans of `text`, in order. Unterminated trailing
/// backticks and empty spans are ignored.
std::vector<std::string> extract_quote_spans(std::string_view text);

/// Every key_evidence item and the reasoning must carry at least one
/// backticked span that occurs verbatim in pack.canonical_text.
std::vector<ValidationError> verify_quote_rule(const IncidentReport& report,
                                               const evidence::EvidencePack& pack);

/// Hard label constraints tied to the dominant transport:
///   TCP-dominant: attack_type must be SYN Flood, ACK Flood,
///     HTTP/2 Rapid Reset, or Unknown.
///   UDP-dominant: SYN Flood / ACK Flood are forbidden, and a reflection
///     label needs a key_evidence quote matching a PRIMARY sample anchor.
///   payload_style mixed_or_unclear (non-TCP dominance): only Unknown, or
///     UDP Flood backed by a quoted entropy observation.
/// The pack parameter supplies the anchors the reflection check runs over.
std::vector<ValidationError> enforce_route1_gates(const IncidentReport& report,
                                                  const triage::TriageResult& triage,
                                                  const evidence::EvidencePack& pack);

/// Majority style across PRIMARY samples; ties and empty input come back as
/// mixed_or_unclear.
PayloadStyle classify_payload_style(std::span<const evidence::PacketSample> samples);

/// Per-sample style, exposed for tests.
PayloadStyle classify_sample_style(const evidence::PacketSample& sample);

// ---------------------------------------------------------------------------
// Prompt contract
// ---------------------------------------------------------------------------

/// Full instruction text: invariants, the gate protocol, the JSON schema,
/// then the pack's canonical_text verbatim. Byte-stable for equal packs.
std::string render_prompt(const evidence::EvidencePack& pack);

/// Correction message for the self-correction loop: lists every validation
/// error and re-states the strict-JSON requirement.
std::string render_feedback(std::span<const ValidationError> errors);

// ---------------------------------------------------------------------------
// Backends
// ---------------------------------------------------------------------------

struct ChatMessage {
    std::string role;  // "user" or "assistant"
    std::string content;
};

/// Structured context alongside the conversation. The remote backend must
/// ignore it (single-source rule: the model sees only the prompt); the local
/// rules backend reads it instead of re-parsing the pack text.
struct BackendContext {
    const evidence::EvidencePack& pack;
    const triage::TriageResult& triage;
};

/// Transport-level failure, distinct from validation failure: the backend
/// could not be reached or answered garbage at the protocol level.
struct BackendUnreachable : std::runtime_error {
    using std::runtime_error::runtime_error;
};

class DetectiveBackend {
public:
    virtual ~DetectiveBackend() = default;
    virtual std::string_view name() const = 0;
    /// Returns the raw response text for the given conversation.
    virtual std::string complete(const std::vector<ChatMessage>& conversation,
                                 const BackendContext& ctx) = 0;
};

/// Deterministic rule table over the evidence pack. Stands in for the
/// remote model in tests and offline runs; its output always passes the
/// validators it will be checked against.
IncidentReport local_backend_decide(const evidence::EvidencePack& pack,
                                    const triage::TriageResult& triage);

class LocalRulesBackend final : public DetectiveBackend {
public:
    std::string_view name() const override { return "local"; }
    std::string complete(const std::vector<ChatMessage>& conversation,
                         const BackendContext& ctx) override;
};

struct RemoteChatConfig {
    std::string base_url = "http://127.0.0.1:8080";  // origin, optional path
    std::string model = "router-default";
    double temperature = 0.0;
    int timeout_s = 120;
    int transport_retries = 2;              // extra attempts on dead transport
    std::string api_key_env = "HOLMES_API_KEY";
};

/// Chat-completions client. Sends the whole conversation each call with
/// temperature 0; throws BackendUnreachable on transport or envelope
/// failures after the configured retries.
class RemoteChatBackend final : public DetectiveBackend {
public:
    explicit RemoteChatBackend(RemoteChatConfig config);

    std::string_view name() const override { return "remote"; }
    std::string complete(const std::vector<ChatMessage>& conversation,
                         const BackendContext& ctx) override;

    /// Observer for raw request/response bodies, wired to the audit log.
    std::function<void(std::string_view request_body, std::string_view response_body)>
        wire_log;

private:
    RemoteChatConfig config_;
    std::string origin_;  // scheme://host[:port]
    std::string path_;    // request path, defaults to /v1/chat/completions
};

// ---------------------------------------------------------------------------
// Investigation loop
// ---------------------------------------------------------------------------

struct Attempt {
    std::string request;       // rendered prompt (first) or feedback message
    std::string raw_response;  // backend output, unmodified
    std::vector<ValidationError> errors;  // empty means the attempt validated
};

/// Result of the self-correction loop. `report` is set iff some attempt
/// validated; either way `attempts` holds the full transcript for audit.
struct InvestigationOutcome {
    std::optional<IncidentReport> report;
    std::size_t attempts_used = 0;
    std::vector<Attempt> attempts;

    bool succeeded() const { return report.has_value(); }
};

inline constexpr std::size_t kDefaultMaxRetries = 2;

/// Renders the prompt, asks the backend, validates; on errors, feeds the
/// full error list back and re-asks up to max_retries times. Transport
/// failures (BackendUnreachable) propagate out unchanged.
InvestigationOutcome investigate(const evidence::EvidencePack& pack,
                                 const triage::TriageResult& triage,
                                 DetectiveBackend& backend,
                                 std::size_t max_retries = kDefaultMaxRetries);

}  // namespace holmes::detective
