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
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string_view>
#include <vector>

#include "holmes/pcap.hpp"
#include "holmes/triage.hpp"

namespace holmes::telemetry {

/// One interface counter reading. ts_s counts seconds since the replay
/// origin; rates are per second over the sampling interval.
struct CounterSample {
    double ts_s = 0.0;
    double bytes_per_s = 0.0;
    double pkts_per_s = 0.0;
    double queue_drops = 0.0;
};

/// Exponentially weighted mean/variance of the packet rate. The first
/// sample primes the mean; warmup_remaining must reach zero before the
/// detector may fire.
struct AnomalyBaseline {
    double mean_pps = 0.0;
    double var_pps = 0.0;
    double alpha = 0.1;
    int warmup_remaining = 10;
    bool primed = false;
};

AnomalyBaseline update_baseline(AnomalyBaseline baseline, const CounterSample& sample);

/// True when the sample breaches mean + k*sigma while above the absolute
/// floor, or when queue drops appear above the floor. Always false during
/// warmup.
bool check_anomaly(const AnomalyBaseline& baseline,
                   const CounterSample& sample,
                   double k_sigma,
                   double pps_floor);

enum class WindowState {
    Open,
    Investigating,
    Closed,
    Suppressed,
};

std::string_view to_string(WindowState state);

/// A time-sliced capture file on disk, named `<start>s--<end>s.pcap`.
struct SliceRef {
    double start_s = 0.0;
    double end_s = 0.0;
    std::filesystem::path path;
};

/// A counter-triggered investigation unit mapped onto a capture slice.
struct IncidentWindow {
    double trigger_ts_s = 0.0;
    double window_start_s = 0.0;
    double window_end_s = 0.0;
    std::filesystem::path pcap_slice_path;
    WindowState state = WindowState::Open;
};

/// The trigger precedes every known slice; there is no capture to open.
struct NoSliceAvailable : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Picks the slice whose [start, end) contains the trigger, falling back
/// to the nearest slice starting at or before it. slice_index must be
/// sorted by start time.
IncidentWindow open_incident(double trigger_ts_s, std::span<const SliceRef> slice_index);

/// Parses a `<start>s--<end>s.pcap` filename into a SliceRef.
std::optional<SliceRef> parse_slice_name(const std::filesystem::path& path);

/// Scans a directory for `<start>s--<end>s.pcap` files, sorted by start.
std::vector<SliceRef> scan_slice_directory(const std::filesystem::path& dir);

struct DedupKey {
    pcap::Ipv4Addr victim;
    triage::DominantL4 dominant_l4 = triage::DominantL4::Mixed;

    auto operator<=>(const DedupKey&) const = default;
};

/// Per-key last-fire ledger. A key that fired within the last cooldown_s
/// seconds is suppressed; a key that is allowed through records its new
/// firing time as a side effect.
struct CooldownState {
    std::map<DedupKey, double> last_fire;
    double cooldown_s = 60.0;
};

bool should_suppress(CooldownState& state, const DedupKey& key, double now_s);

/// Counter stream loader: JSONL, one object per line with keys ts_s,
/// bytes_per_s, pkts_per_s, queue_drops.
std::vector<CounterSample> load_counters_jsonl(const std::filesystem::path& path);

}  // namespace holmes::telemetry
