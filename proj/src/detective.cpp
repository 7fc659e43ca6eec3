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

#include "holmes/detective.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cstdint>
#include <iterator>
#include <map>
#include <set>

namespace holmes::detective {

// ---------------------------------------------------------------------------
// Vocabulary
// ---------------------------------------------------------------------------

std::string_view to_string(Verdict v) {
    switch (v) {
        case Verdict::Attack: return "attack";
        case Verdict::Benign: return "benign";
        case Verdict::Uncertain: return "uncertain";
    }
    return "uncertain";
}

std::string_view to_string(AttackFamily f) {
    switch (f) {
        case AttackFamily::ReflectionAmplification: return "ReflectionAmplification";
        case AttackFamily::DirectFlood: return "DirectFlood";
        case AttackFamily::Mixed: return "Mixed";
        case AttackFamily::Unknown: return "Unknown";
    }
    return "Unknown";
}

std::string_view to_string(PayloadStyle s) {
    switch (s) {
        case PayloadStyle::RandomNoise: return "random_noise";
        case PayloadStyle::HttpLike: return "http_like";
        case PayloadStyle::Asn1OidLike: return "asn1_oid_like";
        case PayloadStyle::KvSemicolonList: return "kv_semicolon_list";
        case PayloadStyle::TextBannerLike: return "text_banner_like";
        case PayloadStyle::MixedOrUnclear: return "mixed_or_unclear";
    }
    return "mixed_or_unclear";
}

std::optional<Verdict> parse_verdict(std::string_view text) {
    if (text == "attack") return Verdict::Attack;
    if (text == "benign") return Verdict::Benign;
    if (text == "uncertain") return Verdict::Uncertain;
    return std::nullopt;
}

std::optional<AttackFamily> parse_attack_family(std::string_view text) {
    if (text == "ReflectionAmplification") return AttackFamily::ReflectionAmplification;
    if (text == "DirectFlood") return AttackFamily::DirectFlood;
    if (text == "Mixed") return AttackFamily::Mixed;
    if (text == "Unknown") return AttackFamily::Unknown;
    return std::nullopt;
}

std::optional<PayloadStyle> parse_payload_style(std::string_view text) {
    if (text == "random_noise") return PayloadStyle::RandomNoise;
    if (text == "http_like") return PayloadStyle::HttpLike;
    if (text == "asn1_oid_like") return PayloadStyle::Asn1OidLike;
    if (text == "kv_semicolon_list") return PayloadStyle::KvSemicolonList;
    if (text == "text_banner_like") return PayloadStyle::TextBannerLike;
    if (text == "mixed_or_unclear") return PayloadStyle::MixedOrUnclear;
    return std::nullopt;
}

bool is_known_attack_type(std::string_view label) {
    return std::find(kAttackTypes.begin(), kAttackTypes.end(), label) !=
           kAttackTypes.end();
}

bool is_reflection_label(std::string_view label) {
    return is_known_attack_type(label) && label.ends_with("Reflection");
}

std::string_view to_string(ValidationKind kind) {
    switch (kind) {
        case ValidationKind::ParseFailure: return "ParseFailure";
        case ValidationKind::MissingField: return "MissingField";
        case ValidationKind::ExtraField: return "ExtraField";
        case ValidationKind::BadEnum: return "BadEnum";
        case ValidationKind::BadCardinality: return "BadCardinality";
        case ValidationKind::BadRange: return "BadRange";
        case ValidationKind::QuoteMissing: return "QuoteMissing";
        case ValidationKind::QuoteNotInPack: return "QuoteNotInPack";
        case ValidationKind::GateViolation: return "GateViolation";
    }
    return "ParseFailure";
}

// ---------------------------------------------------------------------------
// JSON forms
// ---------------------------------------------------------------------------

nlohmann::ordered_json report_to_json(const IncidentReport& report) {
    nlohmann::ordered_json j;
    j["verdict"] = to_string(report.verdict);
    j["attack_family"] = to_string(report.attack_family);
    j["attack_type"] = report.attack_type;
    j["analysis_trace"] = {
        {"payload_style", to_string(report.analysis_trace.payload_style)},
        {"primary_samples_checked", report.analysis_trace.primary_samples_checked},
        {"decision", report.analysis_trace.decision},
    };
    j["key_evidence"] = report.key_evidence;
    j["reasoning"] = report.reasoning;
    j["recommended_actions"] = report.recommended_actions;
    j["confidence"] = report.confidence;
    return j;
}

nlohmann::ordered_json errors_to_json(std::span<const ValidationError> errors) {
    auto arr = nlohmann::ordered_json::array();
    for (const auto& e : errors) {
        arr.push_back({{"kind", to_string(e.kind)},
                       {"path", e.path},
                       {"message", e.message}});
    }
    return arr;
}

// ---------------------------------------------------------------------------
// Quote spans
// ---------------------------------------------------------------------------

std::vector<std::string> extract_quote_spans(std::string_view text) {
    std::vector<std::string> spans;
    std::size_t pos = 0;
    while (true) {
        const std::size_t open = text.find('`', pos);
        if (open == std::string_view::npos) {
            break;
        }
        const std::size_t close = text.find('`', open + 1);
        if (close == std::string_view::npos) {
            break;
        }
        if (close > open + 1) {
            spans.emplace_back(text.substr(open + 1, close - open - 1));
        }
        pos = close + 1;
    }
    return spans;
}

std::vector<ValidationError> verify_quote_rule(const IncidentReport& report,
                                               const evidence::EvidencePack& pack) {
    std::vector<ValidationError> out;
    const auto check = [&](const std::string& text, std::string path) {
        const auto spans = extract_quote_spans(text);
        if (spans.empty()) {
            out.push_back({ValidationKind::QuoteMissing, std::move(path),
                           "no backtick-wrapped quote present"});
            return;
        }
        for (const auto& span : spans) {
            if (pack.canonical_text.find(span) != std::string::npos) {
                return;
            }
        }
        out.push_back({ValidationKind::QuoteNotInPack, std::move(path),
                       "quoted span \"" + spans.front() +
                           "\" does not occur verbatim in the evidence pack"});
    };
    for (std::size_t i = 0; i < report.key_evidence.size(); ++i) {
        check(report.key_evidence[i], "key_evidence[" + std::to_string(i) + "]");
    }
    check(report.reasoning, "reasoning");
    return out;
}

// ---------------------------------------------------------------------------
// Route-1 gates
// ---------------------------------------------------------------------------

namespace {

bool span_matches_anchor(const std::string& span, const std::string& anchor) {
    if (span == anchor) {
        return true;
    }
    if (span.size() < 4) {
        return false;
    }
    return anchor.find(span) != std::string::npos ||
           span.find(anchor) != std::string::npos;
}

std::vector<std::string> accepted_spans(const std::vector<std::string>& items,
                                        const std::string& canonical_text) {
    std::vector<std::string> out;
    for (const auto& item : items) {
        for (auto& span : extract_quote_spans(item)) {
            if (canonical_text.find(span) != std::string::npos) {
                out.push_back(std::move(span));
            }
        }
    }
    return out;
}

}  // namespace

std::vector<ValidationError> enforce_route1_gates(const IncidentReport& report,
                                                  const triage::TriageResult& triage,
                                                  const evidence::EvidencePack& pack) {
    std::vector<ValidationError> out;
    const std::string& label = report.attack_type;
    const bool tcp_dom = triage.dominant_l4 == triage::DominantL4::Tcp;
    const bool udp_dom = triage.dominant_l4 == triage::DominantL4::Udp;

    if (tcp_dom) {
        static constexpr std::array<std::string_view, 4> kTcpAllowed = {
            "SYN Flood", "ACK Flood", "HTTP/2 Rapid Reset", "Unknown"};
        if (std::find(kTcpAllowed.begin(), kTcpAllowed.end(), label) ==
            kTcpAllowed.end()) {
            out.push_back({ValidationKind::GateViolation, "attack_type",
                           "dominant_l4 is TCP: choose only SYN Flood, ACK Flood, "
                           "HTTP/2 Rapid Reset, or Unknown"});
        }
    }

    if (udp_dom && (label == "SYN Flood" || label == "ACK Flood")) {
        out.push_back({ValidationKind::GateViolation, "attack_type",
                       "dominant_l4 is UDP: SYN Flood and ACK Flood are not "
                       "available labels"});
    }

    if (udp_dom && is_reflection_label(label)) {
        const auto spans = accepted_spans(report.key_evidence, pack.canonical_text);
        bool anchored = false;
        for (const auto& sample : pack.samples) {
            if (sample.source != evidence::SampleSource::Primary) {
                continue;
            }
            for (const auto& anchor : sample.fingerprint.anchors) {
                for (const auto& span : spans) {
                    if (span_matches_anchor(span, anchor)) {
                        anchored = true;
                        break;
                    }
                }
                if (anchored) {
                    break;
                }
            }
            if (anchored) {
                break;
            }
        }
        if (!anchored) {
            out.push_back({ValidationKind::GateViolation, "attack_type",
                           "a specific reflection label requires a key_evidence "
                           "quote matching a PRIMARY sample anchor"});
        }
    }

    // Style gate. TCP floods legitimately carry no payload, so the unclear
    // style restriction applies only when TCP is not the dominant branch.
    if (!tcp_dom &&
        report.analysis_trace.payload_style == PayloadStyle::MixedOrUnclear &&
        label != "Unknown") {
        bool ok = false;
        if (label == "UDP Flood") {
            auto spans = accepted_spans(report.key_evidence, pack.canonical_text);
            for (auto& span : extract_quote_spans(report.reasoning)) {
                if (pack.canonical_text.find(span) != std::string::npos) {
                    spans.push_back(std::move(span));
                }
            }
            ok = std::any_of(spans.begin(), spans.end(), [](const std::string& s) {
                return s.find("entropy") != std::string::npos;
            });
        }
        if (!ok) {
            out.push_back({ValidationKind::GateViolation,
                           "analysis_trace.payload_style",
                           "payload_style mixed_or_unclear allows only Unknown, "
                           "or UDP Flood backed by a quoted entropy reading"});
        }
    }

    return out;
}

// ---------------------------------------------------------------------------
// Payload style
// ---------------------------------------------------------------------------

PayloadStyle classify_sample_style(const evidence::PacketSample& sample) {
    std::size_t oid = 0;
    std::size_t header = 0;
    std::size_t kv = 0;
    std::size_t plain = 0;
    bool http_prefix = false;
    for (const auto& anchor : sample.fingerprint.anchors) {
        switch (evidence::classify_anchor(anchor)) {
            case evidence::AnchorClass::DottedOid: ++oid; break;
            case evidence::AnchorClass::HttpHeader: ++header; break;
            case evidence::AnchorClass::KeySemicolon: ++kv; break;
            case evidence::AnchorClass::Plain: ++plain; break;
            case evidence::AnchorClass::DomainLike: break;
        }
        if (std::string_view(anchor).starts_with("HTTP/")) {
            http_prefix = true;
        }
    }
    if (oid >= 1) {
        return PayloadStyle::Asn1OidLike;
    }
    if (http_prefix || header >= 2) {
        return PayloadStyle::HttpLike;
    }
    if (kv >= 2) {
        return PayloadStyle::KvSemicolonList;
    }
    if (sample.fingerprint.printable >= 0.8 && plain >= 1) {
        return PayloadStyle::TextBannerLike;
    }
    if (sample.fingerprint.printable < 0.6 && sample.fingerprint.entropy > 6.5 &&
        sample.fingerprint.anchors.empty()) {
        return PayloadStyle::RandomNoise;
    }
    return PayloadStyle::MixedOrUnclear;
}

PayloadStyle classify_payload_style(std::span<const evidence::PacketSample> samples) {
    std::map<PayloadStyle, std::size_t> votes;
    for (const auto& sample : samples) {
        if (sample.source != evidence::SampleSource::Primary) {
            continue;
        }
        votes[classify_sample_style(sample)]++;
    }
    if (votes.empty()) {
        return PayloadStyle::MixedOrUnclear;
    }
    std::size_t best = 0;
    for (const auto& [style, count] : votes) {
        best = std::max(best, count);
    }
    PayloadStyle winner = PayloadStyle::MixedOrUnclear;
    std::size_t winners = 0;
    for (const auto& [style, count] : votes) {
        if (count == best) {
            winner = style;
            ++winners;
        }
    }
    return winners == 1 ? winner : PayloadStyle::MixedOrUnclear;
}

// ---------------------------------------------------------------------------
// Prompt contract
// ---------------------------------------------------------------------------

std::string render_prompt(const evidence::EvidencePack& pack) {
    std::string p;
    p.reserve(4096 + pack.canonical_text.size());
    p +=
        "You are the investigation stage of a network incident pipeline. "
        "Analyze the evidence pack below and answer with a single JSON "
        "report.\n"
        "\n"
        "INVARIANTS\n"
        "- Single-source: use only the Evidence Pack in this message. No "
        "outside knowledge about hosts, services, or prior incidents.\n"
        "- Ports are not identity: a port number alone never proves a "
        "protocol; base every protocol claim on payload structure.\n"
        "- Quote Rule: every key_evidence item and the reasoning must "
        "include at least one verbatim substring of the Evidence Pack "
        "wrapped in backticks.\n"
        "- Output strict JSON only: one object, no extra keys, no markdown, "
        "no commentary.\n"
        "\n"
        "PROTOCOL (apply in order)\n"
        "1. Decide payload_style from PRIMARY samples: random_noise | "
        "http_like | asn1_oid_like | kv_semicolon_list | text_banner_like | "
        "mixed_or_unclear.\n"
        "2. Decide attack_family: ReflectionAmplification | DirectFlood | "
        "Mixed | Unknown.\n"
        "3. Gate attack_type on the dominant transport.\n"
        "   If dominant_l4_used=TCP: choose only SYN Flood, ACK Flood, "
        "HTTP/2 Rapid Reset, or Unknown.\n"
        "   If dominant_l4_used=UDP: do not output SYN Flood/ACK Flood; a "
        "specific reflection label requires a backticked quote of a PRIMARY "
        "sample anchor; prefer Unknown rather than forcing a protocol.\n"
        "   If payload_style is mixed_or_unclear and the dominant transport "
        "is not TCP: answer Unknown, or UDP Flood only when quoting an "
        "entropy reading.\n"
        "\n"
        "SCHEMA (all fields required, nothing else permitted)\n"
        "{\n"
        "  \"verdict\": \"attack\" | \"benign\" | \"uncertain\",\n"
        "  \"attack_family\": \"ReflectionAmplification\" | \"DirectFlood\" "
        "| \"Mixed\" | \"Unknown\",\n"
        "  \"attack_type\": one of [\"UDP Flood\", \"SYN Flood\", \"ACK "
        "Flood\", \"HTTP/2 Rapid Reset\", \"DNS Reflection\", \"NetBIOS "
        "Reflection\", \"LDAP/CLDAP Reflection\", \"SNMP Reflection\", "
        "\"MSSQL Reflection\", \"SSDP/UPnP Reflection\", \"NTP Reflection\", "
        "\"Other Reflection\", \"Unknown\"],\n"
        "  \"analysis_trace\": {\n"
        "    \"payload_style\": as decided in step 1,\n"
        "    \"primary_samples_checked\": non-negative integer,\n"
        "    \"decision\": short text\n"
        "  },\n"
        "  \"key_evidence\": [2 to 6 strings, each containing at least one "
        "backticked verbatim quote],\n"
        "  \"reasoning\": \"1-3 sentences (at most 600 characters) with at "
        "least one backticked quote\",\n"
        "  \"recommended_actions\": [3 to 6 strings],\n"
        "  \"confidence\": number in [0, 1]\n"
        "}\n"
        "\n"
        "EVIDENCE PACK\n";
    p += pack.canonical_text;
    return p;
}

std::string render_feedback(std::span<const ValidationError> errors) {
    std::string msg =
        "Your previous response failed validation against the report "
        "contract. Errors:\n";
    for (const auto& e : errors) {
        msg += "- ";
        msg += to_string(e.kind);
        msg += " at ";
        msg += e.path;
        msg += ": ";
        msg += e.message;
        msg += "\n";
    }
    msg +=
        "Respond again with exactly one strict JSON object fixing every "
        "error above. The Evidence Pack from the first message remains the "
        "single source; do not restate it.";
    return msg;
}

// ---------------------------------------------------------------------------
// parse_and_validate
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

// Leniency pass: models habitually wrap JSON in a markdown fence. Strip one
// outer fence pair; everything that remains is parsed strictly.
std::string_view strip_code_fence(std::string_view raw) {
    const std::string_view t = trim(raw);
    if (!t.starts_with("```")) {
        return t;
    }
    const std::size_t nl = t.find('\n');
    if (nl == std::string_view::npos) {
        return t;
    }
    const std::string_view body = trim(t.substr(nl + 1));
    if (!body.ends_with("```")) {
        return t;
    }
    return trim(body.substr(0, body.size() - 3));
}

}  // namespace

ValidationResult parse_and_validate(std::string_view raw,
                                    const evidence::EvidencePack& pack,
                                    const triage::TriageResult& triage) {
    std::vector<ValidationError> errors;
    const std::string_view body = strip_code_fence(raw);

    nlohmann::json j;
    try {
        j = nlohmann::json::parse(body);
    } catch (const nlohmann::json::exception& e) {
        errors.push_back(
            {ValidationKind::ParseFailure, "$", std::string("not valid JSON: ") + e.what()});
        return errors;
    }
    if (!j.is_object()) {
        errors.push_back({ValidationKind::ParseFailure, "$",
                          "top-level value must be a JSON object"});
        return errors;
    }

    static const std::set<std::string, std::less<>> kTopFields = {
        "verdict",      "attack_family", "attack_type",         "analysis_trace",
        "key_evidence", "reasoning",     "recommended_actions", "confidence"};
    for (const auto& [key, value] : j.items()) {
        if (!kTopFields.contains(key)) {
            errors.push_back(
                {ValidationKind::ExtraField, key, "field is not part of the schema"});
        }
    }

    IncidentReport report;
    bool constructible = true;
    const auto missing = [&](const std::string& path) {
        errors.push_back({ValidationKind::MissingField, path, "required field is missing"});
        constructible = false;
    };
    const auto wrong_type = [&](const std::string& path, const char* want) {
        errors.push_back(
            {ValidationKind::ParseFailure, path, std::string("expected ") + want});
        constructible = false;
    };

    if (!j.contains("verdict")) {
        missing("verdict");
    } else if (!j["verdict"].is_string()) {
        wrong_type("verdict", "a string");
    } else if (const auto v = parse_verdict(j["verdict"].get<std::string>())) {
        report.verdict = *v;
    } else {
        errors.push_back({ValidationKind::BadEnum, "verdict",
                          "must be one of: attack, benign, uncertain"});
        constructible = false;
    }

    if (!j.contains("attack_family")) {
        missing("attack_family");
    } else if (!j["attack_family"].is_string()) {
        wrong_type("attack_family", "a string");
    } else if (const auto f =
                   parse_attack_family(j["attack_family"].get<std::string>())) {
        report.attack_family = *f;
    } else {
        errors.push_back({ValidationKind::BadEnum, "attack_family",
                          "must be one of: ReflectionAmplification, DirectFlood, "
                          "Mixed, Unknown"});
        constructible = false;
    }

    if (!j.contains("attack_type")) {
        missing("attack_type");
    } else if (!j["attack_type"].is_string()) {
        wrong_type("attack_type", "a string");
    } else {
        report.attack_type = j["attack_type"].get<std::string>();
        if (!is_known_attack_type(report.attack_type)) {
            errors.push_back({ValidationKind::BadEnum, "attack_type",
                              "label is outside the closed attack_type vocabulary"});
            constructible = false;
        }
    }

    if (!j.contains("analysis_trace")) {
        missing("analysis_trace");
    } else if (!j["analysis_trace"].is_object()) {
        wrong_type("analysis_trace", "an object");
    } else {
        const auto& t = j["analysis_trace"];
        static const std::set<std::string, std::less<>> kTraceFields = {
            "payload_style", "primary_samples_checked", "decision"};
        for (const auto& [key, value] : t.items()) {
            if (!kTraceFields.contains(key)) {
                errors.push_back({ValidationKind::ExtraField, "analysis_trace." + key,
                                  "field is not part of the schema"});
            }
        }
        if (!t.contains("payload_style")) {
            missing("analysis_trace.payload_style");
        } else if (!t["payload_style"].is_string()) {
            wrong_type("analysis_trace.payload_style", "a string");
        } else if (const auto s =
                       parse_payload_style(t["payload_style"].get<std::string>())) {
            report.analysis_trace.payload_style = *s;
        } else {
            errors.push_back({ValidationKind::BadEnum, "analysis_trace.payload_style",
                              "must be one of: random_noise, http_like, "
                              "asn1_oid_like, kv_semicolon_list, text_banner_like, "
                              "mixed_or_unclear"});
            constructible = false;
        }
        if (!t.contains("primary_samples_checked")) {
            missing("analysis_trace.primary_samples_checked");
        } else if (!t["primary_samples_checked"].is_number_integer()) {
            wrong_type("analysis_trace.primary_samples_checked", "an integer");
        } else if (t["primary_samples_checked"].get<std::int64_t>() < 0) {
            errors.push_back({ValidationKind::BadRange,
                              "analysis_trace.primary_samples_checked",
                              "must be a non-negative integer"});
        } else {
            report.analysis_trace.primary_samples_checked =
                t["primary_samples_checked"].get<std::size_t>();
        }
        if (!t.contains("decision")) {
            missing("analysis_trace.decision");
        } else if (!t["decision"].is_string()) {
            wrong_type("analysis_trace.decision", "a string");
        } else {
            report.analysis_trace.decision = t["decision"].get<std::string>();
        }
    }

    if (!j.contains("key_evidence")) {
        missing("key_evidence");
    } else if (!j["key_evidence"].is_array()) {
        wrong_type("key_evidence", "an array of strings");
    } else {
        const auto& arr = j["key_evidence"];
        for (std::size_t i = 0; i < arr.size(); ++i) {
            if (!arr[i].is_string()) {
                wrong_type("key_evidence[" + std::to_string(i) + "]", "a string");
            } else {
                report.key_evidence.push_back(arr[i].get<std::string>());
            }
        }
        if (arr.size() < 2 || arr.size() > 6) {
            errors.push_back({ValidationKind::BadCardinality, "key_evidence",
                              "must contain between 2 and 6 items"});
        }
    }

    if (!j.contains("reasoning")) {
        missing("reasoning");
    } else if (!j["reasoning"].is_string()) {
        wrong_type("reasoning", "a string");
    } else {
        report.reasoning = j["reasoning"].get<std::string>();
        if (report.reasoning.size() > kMaxReasoningChars) {
            errors.push_back({ValidationKind::BadRange, "reasoning",
                              "must not exceed 600 characters"});
        }
    }

    if (!j.contains("recommended_actions")) {
        missing("recommended_actions");
    } else if (!j["recommended_actions"].is_array()) {
        wrong_type("recommended_actions", "an array of strings");
    } else {
        const auto& arr = j["recommended_actions"];
        for (std::size_t i = 0; i < arr.size(); ++i) {
            if (!arr[i].is_string()) {
                wrong_type("recommended_actions[" + std::to_string(i) + "]",
                           "a string");
            } else {
                report.recommended_actions.push_back(arr[i].get<std::string>());
            }
        }
        if (arr.size() < 3 || arr.size() > 6) {
            errors.push_back({ValidationKind::BadCardinality, "recommended_actions",
                              "must contain between 3 and 6 items"});
        }
    }

    if (!j.contains("confidence")) {
        missing("confidence");
    } else if (!j["confidence"].is_number()) {
        wrong_type("confidence", "a number");
    } else {
        report.confidence = j["confidence"].get<double>();
        if (report.confidence < 0.0 || report.confidence > 1.0) {
            errors.push_back({ValidationKind::BadRange, "confidence",
                              "must lie in [0, 1]"});
        }
    }

    if (!constructible) {
        return errors;
    }

    auto quote_errors = verify_quote_rule(report, pack);
    errors.insert(errors.end(), std::make_move_iterator(quote_errors.begin()),
                  std::make_move_iterator(quote_errors.end()));
    auto gate_errors = enforce_route1_gates(report, triage, pack);
    errors.insert(errors.end(), std::make_move_iterator(gate_errors.begin()),
                  std::make_move_iterator(gate_errors.end()));

    if (!errors.empty()) {
        return errors;
    }
    return report;
}

// ---------------------------------------------------------------------------
// Local rules backend
// ---------------------------------------------------------------------------

namespace {

struct RuleMatch {
    std::string label = "Unknown";
    std::string anchor;    // exact anchor backing the label, when any
    std::string decision = "no structural rule matched";
};

std::vector<std::string> primary_anchors(const evidence::EvidencePack& pack) {
    std::vector<std::string> anchors;
    for (const auto& sample : pack.samples) {
        if (sample.source != evidence::SampleSource::Primary) {
            continue;
        }
        for (const auto& anchor : sample.fingerprint.anchors) {
            if (std::find(anchors.begin(), anchors.end(), anchor) == anchors.end()) {
                anchors.push_back(anchor);
            }
        }
    }
    return anchors;
}

RuleMatch match_rules(const evidence::EvidencePack& pack,
                      const triage::TriageResult& triage, PayloadStyle style) {
    const bool tcp_dom = triage.dominant_l4 == triage::DominantL4::Tcp;
    const bool udp_dom = triage.dominant_l4 == triage::DominantL4::Udp;
    const auto anchors = primary_anchors(pack);
    const auto find_anchor = [&](auto&& pred) -> const std::string* {
        for (const auto& a : anchors) {
            if (pred(a)) {
                return &a;
            }
        }
        return nullptr;
    };
    const auto contains = [](const std::string& a, std::string_view needle) {
        return a.find(needle) != std::string::npos;
    };

    if (!tcp_dom && !pack.no_primary_cluster) {
        if (style == PayloadStyle::Asn1OidLike) {
            if (const auto* a = find_anchor([](const std::string& s) {
                    return evidence::classify_anchor(s) ==
                           evidence::AnchorClass::DottedOid;
                })) {
                return {"LDAP/CLDAP Reflection", *a,
                        "dotted OID anchor over non-TCP transport"};
            }
        }
        if (const auto* a = find_anchor([&](const std::string& s) {
                return s == "public" || contains(s, "SNMP");
            })) {
            return {"SNMP Reflection", *a, "SNMP community/banner anchor"};
        }
        if (style == PayloadStyle::KvSemicolonList) {
            if (find_anchor([&](const std::string& s) {
                    return contains(s, "ServerName;");
                }) != nullptr) {
                return {"MSSQL Reflection", "ServerName;",
                        "key-semicolon browse response fields"};
            }
        }
        if (style == PayloadStyle::HttpLike) {
            if (const auto* a = find_anchor([&](const std::string& s) {
                    return contains(s, "LOCATION:") || contains(s, "gatedesc.xml");
                })) {
                return {"SSDP/UPnP Reflection", *a,
                        "HTTP-style discovery headers over UDP"};
            }
        }
        if (const auto* a = find_anchor([](const std::string& s) {
                return evidence::classify_anchor(s) ==
                       evidence::AnchorClass::DomainLike;
            })) {
            return {"DNS Reflection", *a, "domain-like name in UDP payloads"};
        }
        if (const auto* a = find_anchor([&](const std::string& s) {
                return contains(s, "__MSBROWSE__") || contains(s, "WORKGROUP");
            })) {
            return {"NetBIOS Reflection", *a, "NetBIOS browse-service names"};
        }
        if (udp_dom && style == PayloadStyle::RandomNoise) {
            return {"UDP Flood", "", "high-entropy unstructured UDP payloads"};
        }
    }
    if (tcp_dom && pack.tcp_stats) {
        if (pack.tcp_stats->syn_only_ratio >= 0.9) {
            return {"SYN Flood", "", "syn_only ratio at or above 0.9"};
        }
        if (pack.tcp_stats->ack_only_ratio >= 0.9) {
            return {"ACK Flood", "", "ack_only ratio at or above 0.9"};
        }
    }
    return {"Unknown", "", "no structural rule matched"};
}

}  // namespace

IncidentReport local_backend_decide(const evidence::EvidencePack& pack,
                                    const triage::TriageResult& triage) {
    const PayloadStyle style = classify_payload_style(pack.samples);
    const RuleMatch match = match_rules(pack, triage, style);
    const bool reflection = is_reflection_label(match.label);
    const bool flood = match.label == "UDP Flood" || match.label == "SYN Flood" ||
                       match.label == "ACK Flood";

    IncidentReport report;
    report.attack_type = match.label;
    if (reflection) {
        report.attack_family = AttackFamily::ReflectionAmplification;
        report.verdict = Verdict::Attack;
        report.confidence = 0.9;
    } else if (flood) {
        report.attack_family = AttackFamily::DirectFlood;
        report.verdict = Verdict::Attack;
        report.confidence = 0.8;
    } else {
        report.attack_family = AttackFamily::Unknown;
        report.verdict = Verdict::Uncertain;
        report.confidence = 0.4;
    }

    report.analysis_trace.payload_style = style;
    std::size_t primaries = 0;
    for (const auto& sample : pack.samples) {
        if (sample.source == evidence::SampleSource::Primary) {
            ++primaries;
        }
    }
    report.analysis_trace.primary_samples_checked = primaries;
    report.analysis_trace.decision = match.decision + " -> " + match.label;

    // Every quote below reproduces a line fragment of the canonical pack
    // text exactly, so the Quote Rule holds by construction.
    const std::string dom_span =
        "dominant_l4: " + std::string(triage::to_string(pack.triage.dominant_l4));
    const std::string score_span =
        "dominance_score: " + evidence::fmt3(pack.triage.dominance_score);
    const std::string victim_span = "victim_ip: " + pcap::to_string(pack.triage.victim_ip);
    const std::string dst_share_span =
        "top_dst_share: " + evidence::fmt3(pack.triage.top_dst_share);

    std::string lead_span;  // rule-specific decisive quote
    if (!match.anchor.empty()) {
        lead_span = match.anchor;
        report.key_evidence.push_back("PRIMARY sample anchor `" + match.anchor +
                                      "` matches the " + match.label + " signature");
    } else if (match.label == "SYN Flood" || match.label == "ACK Flood") {
        const auto& s = *pack.tcp_stats;
        lead_span = match.label == "SYN Flood"
                        ? "syn_only=" + evidence::fmt3(s.syn_only_ratio)
                        : "ack_only=" + evidence::fmt3(s.ack_only_ratio);
        report.key_evidence.push_back("TCP flag mix shows `" + lead_span + "` over `total=" +
                                      std::to_string(s.total) + "` packets");
    } else if (match.label == "UDP Flood" && !pack.samples.empty()) {
        lead_span = "entropy: " + evidence::fmt3(pack.samples.front().fingerprint.entropy);
        std::string item = "unstructured payloads: `" + lead_span + "` with `printable: " +
                           evidence::fmt3(pack.samples.front().fingerprint.printable) + "`";
        if (!pack.udp_modes.empty()) {
            const auto& m = pack.udp_modes.front();
            item += ", modal datagram `length=" + std::to_string(m.length) +
                    " count=" + std::to_string(m.count) +
                    " share=" + evidence::fmt3(m.share) + "`";
        }
        report.key_evidence.push_back(std::move(item));
    } else {
        lead_span = dom_span;
        report.key_evidence.push_back(
            "no decisive structure; sample set `count: " +
            std::to_string(pack.samples.size()) + "` stays inconclusive");
    }
    report.key_evidence.push_back("dominant transport `" + dom_span + "` at `" +
                                  score_span + "`");
    report.key_evidence.push_back("victim concentration `" + dst_share_span +
                                  "` on `" + victim_span + "`");

    report.reasoning = "Structure-first review of the PRIMARY samples selects " +
                       match.label + ". Decisive span: `" + lead_span + "`.";

    if (reflection) {
        report.recommended_actions = {
            "Rate-limit the reflected service's source port at the edge",
            "Apply ACLs dropping reflector-to-victim flows",
            "Request upstream scrubbing for the victim prefix",
            "Notify abuse contacts for the top reflector sources",
        };
    } else if (match.label == "SYN Flood") {
        report.recommended_actions = {
            "Enable SYN cookies on the victim frontends",
            "Shorten half-open connection timeouts",
            "Rate-limit inbound SYN segments per source at the border",
        };
    } else if (match.label == "ACK Flood") {
        report.recommended_actions = {
            "Drop unsolicited ACK segments with a stateful filter",
            "Rate-limit ACK-only segments toward the victim",
            "Engage upstream scrubbing for the victim prefix",
        };
    } else if (match.label == "UDP Flood") {
        report.recommended_actions = {
            "Deploy volumetric rate limits for the victim prefix",
            "Enable upstream blackhole or scrubbing for the victim",
            "Tighten per-source packet budgets at the border",
        };
    } else {
        report.recommended_actions = {
            "Keep the window under observation and re-sample",
            "Escalate to a human analyst with the full evidence pack",
            "Stage generic rate limits pending classification",
        };
    }
    return report;
}

std::string LocalRulesBackend::complete(const std::vector<ChatMessage>& conversation,
                                        const BackendContext& ctx) {
    (void)conversation;  // deterministic: the structured pack is authoritative
    return report_to_json(local_backend_decide(ctx.pack, ctx.triage)).dump(2);
}

// ---------------------------------------------------------------------------
// Investigation loop
// ---------------------------------------------------------------------------

InvestigationOutcome investigate(const evidence::EvidencePack& pack,
                                 const triage::TriageResult& triage,
                                 DetectiveBackend& backend,
                                 std::size_t max_retries) {
    InvestigationOutcome outcome;
    const BackendContext ctx{pack, triage};
    std::vector<ChatMessage> conversation;
    conversation.push_back({"user", render_prompt(pack)});

    for (std::size_t attempt = 0; attempt <= max_retries; ++attempt) {
        const std::string raw = backend.complete(conversation, ctx);
        ValidationResult result = parse_and_validate(raw, pack, triage);

        Attempt record;
        record.request = conversation.back().content;
        record.raw_response = raw;
        if (auto* report = std::get_if<IncidentReport>(&result)) {
            outcome.attempts.push_back(std::move(record));
            outcome.attempts_used = outcome.attempts.size();
            outcome.report = std::move(*report);
            return outcome;
        }
        record.errors = std::get<std::vector<ValidationError>>(std::move(result));
        conversation.push_back({"assistant", raw});
        conversation.push_back({"user", render_feedback(record.errors)});
        outcome.attempts.push_back(std::move(record));
    }
    outcome.attempts_used = outcome.attempts.size();
    return outcome;
}

}  // namespace holmes::detective
