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

#include "holmes/telemetry.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include <nlohmann/json.hpp>

namespace holmes::telemetry {

AnomalyBaseline update_baseline(AnomalyBaseline baseline, const CounterSample& sample) {
    if (!baseline.primed) {
        baseline.mean_pps = sample.pkts_per_s;
        baseline.var_pps = 0.0;
        baseline.primed = true;
    } else {
        // West's incremental EW update; alpha=1 degenerates to "latest
        // sample is the mean".
        const double diff = sample.pkts_per_s - baseline.mean_pps;
        const double incr = baseline.alpha * diff;
        baseline.mean_pps += incr;
        baseline.var_pps = (1.0 - baseline.alpha) * (baseline.var_pps + diff * incr);
    }
    if (baseline.warmup_remaining > 0) {
        baseline.warmup_remaining--;
    }
    return baseline;
}

bool check_anomaly(const AnomalyBaseline& baseline,
                   const CounterSample& sample,
                   double k_sigma,
                   double pps_floor) {
    if (baseline.warmup_remaining > 0 || !baseline.primed) {
        return false;
    }
    if (sample.pkts_per_s <= pps_floor) {
        return false;
    }
    if (sample.queue_drops > 0) {
        return true;
    }
    const double threshold = baseline.mean_pps + k_sigma * std::sqrt(std::max(0.0, baseline.var_pps));
    return sample.pkts_per_s > threshold;
}

std::string_view to_string(WindowState state) {
    switch (state) {
    case WindowState::Open:
        return "Open";
    case WindowState::Investigating:
        return "Investigating";
    case WindowState::Closed:
        return "Closed";
    case WindowState::Suppressed:
        return "Suppressed";
    }
    return "Closed";
}

IncidentWindow open_incident(double trigger_ts_s, std::span<const SliceRef> slice_index) {
    if (slice_index.empty()) {
        throw NoSliceAvailable("slice index is empty");
    }

    const SliceRef* chosen = nullptr;
    for (const auto& slice : slice_index) {
        if (trigger_ts_s >= slice.start_s && trigger_ts_s < slice.end_s) {
            chosen = &slice;
            break;
        }
    }
    if (!chosen) {
        // Nearest slice starting at or before the trigger.
        for (const auto& slice : slice_index) {
            if (slice.start_s <= trigger_ts_s) {
                chosen = &slice;
            }
        }
    }
    if (!chosen) {
        char msg[96];
        std::snprintf(msg, sizeof(msg), "trigger at %.3fs precedes all capture slices",
                      trigger_ts_s);
        throw NoSliceAvailable(msg);
    }

    IncidentWindow window;
    window.trigger_ts_s = trigger_ts_s;
    window.window_start_s = chosen->start_s;
    window.window_end_s = chosen->end_s;
    window.pcap_slice_path = chosen->path;
    window.state = WindowState::Open;
    return window;
}

std::optional<SliceRef> parse_slice_name(const std::filesystem::path& path) {
    const std::string name = path.filename().string();
    // Expected form: <start>s--<end>s.pcap
    double start = 0;
    double end = 0;
    char trailer[8] = {0};
    if (std::sscanf(name.c_str(), "%lfs--%lfs.pca%1s", &start, &end, trailer) == 3 &&
        trailer[0] == 'p' && name.ends_with(".pcap")) {
        return SliceRef{start, end, path};
    }
    return std::nullopt;
}

std::vector<SliceRef> scan_slice_directory(const std::filesystem::path& dir) {
    std::vector<SliceRef> slices;
    if (!std::filesystem::is_directory(dir)) {
        return slices;
    }
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (!entry.is_regular_file()) {
            continue;
        }
        if (auto slice = parse_slice_name(entry.path())) {
            slices.push_back(std::move(*slice));
        }
    }
    std::sort(slices.begin(), slices.end(),
              [](const SliceRef& a, const SliceRef& b) { return a.start_s < b.start_s; });
    return slices;
}

bool should_suppress(CooldownState& state, const DedupKey& key, double now_s) {
    const auto it = state.last_fire.find(key);
    if (it != state.last_fire.end() && now_s - it->second < state.cooldown_s) {
        return true;
    }
    state.last_fire[key] = now_s;
    return false;
}

std::vector<CounterSample> load_counters_jsonl(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open counters file: " + path.string());
    }
    std::vector<CounterSample> samples;
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
            throw std::runtime_error("bad counters JSONL at " + path.string() + ":" +
                                     std::to_string(line_no));
        }
        CounterSample sample;
        sample.ts_s = obj.value("ts_s", 0.0);
        sample.bytes_per_s = obj.value("bytes_per_s", 0.0);
        sample.pkts_per_s = obj.value("pkts_per_s", 0.0);
        sample.queue_drops = obj.value("queue_drops", 0.0);
        samples.push_back(sample);
    }
    return samples;
}

}  // namespace holmes::telemetry
