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
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>

#include "holmes/telemetry.hpp"

using namespace holmes;

namespace {

telemetry::CounterSample sample_at(double ts, double pps, double drops = 0.0) {
    return {ts, pps * 100.0, pps, drops};
}

telemetry::AnomalyBaseline primed_baseline(double mean, double var, double alpha = 0.1) {
    telemetry::AnomalyBaseline b;
    b.mean_pps = mean;
    b.var_pps = var;
    b.alpha = alpha;
    b.warmup_remaining = 0;
    b.primed = true;
    return b;
}

std::filesystem::path fresh_dir(const char* tag) {
    const auto dir = std::filesystem::temp_directory_path() /
                     (std::string("holmes_telemetry_") + tag);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace

TEST_SUITE("telemetry") {

TEST_CASE("first sample primes the mean, constant stream pins it") {
    telemetry::AnomalyBaseline b;
    b.alpha = 0.1;
    for (int i = 0; i < 50; ++i) {
        b = telemetry::update_baseline(b, sample_at(i, 100.0));
    }
    CHECK(b.mean_pps == doctest::Approx(100.0).epsilon(1e-12));
    CHECK(b.var_pps == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(b.warmup_remaining == 0);
}

TEST_CASE("alpha one degenerates to the latest sample") {
    auto b = primed_baseline(100.0, 50.0, 1.0);
    b = telemetry::update_baseline(b, sample_at(1, 777.0));
    CHECK(b.mean_pps == doctest::Approx(777.0));
}

TEST_CASE("hand-rolled recurrence for 100, 100, 200 at alpha 0.1") {
    telemetry::AnomalyBaseline b;
    b.alpha = 0.1;
    b.warmup_remaining = 0;
    b = telemetry::update_baseline(b, sample_at(0, 100.0));  // primes mean=100
    b = telemetry::update_baseline(b, sample_at(1, 100.0));
    b = telemetry::update_baseline(b, sample_at(2, 200.0));
    // mean: 0.1 * 200 + 0.9 * 100 = 110
    CHECK(b.mean_pps == doctest::Approx(110.0).epsilon(1e-12));
    // var: (1 - a) * (var + diff * a * diff) with diff = 100
    CHECK(b.var_pps == doctest::Approx(0.9 * (0.0 + 100.0 * 10.0)).epsilon(1e-12));
}

TEST_CASE("baseline converges onto a constant stream") {
    telemetry::AnomalyBaseline b;
    b.alpha = 0.1;
    b = telemetry::update_baseline(b, sample_at(0, 123456.0));  // bad prime
    for (int i = 1; i <= 300; ++i) {
        b = telemetry::update_baseline(b, sample_at(i, 5000.0));
    }
    // Residual error decays as (1 - alpha)^n from the priming sample.
    CHECK(std::abs(b.mean_pps - 5000.0) < 1e-6);
}

TEST_CASE("anomaly check combines the sigma band and the absolute floor") {
    CHECK(!telemetry::check_anomaly(primed_baseline(100, 0), sample_at(0, 100), 3, 1000));
    CHECK(telemetry::check_anomaly(primed_baseline(100, 25), sample_at(0, 200), 3, 50));
    CHECK(!telemetry::check_anomaly(primed_baseline(100, 25), sample_at(0, 114), 3, 50));
    // 100 + 3 * 5 = 115: strictly-above rule
    CHECK(!telemetry::check_anomaly(primed_baseline(100, 25), sample_at(0, 115), 3, 50));
    CHECK(telemetry::check_anomaly(primed_baseline(100, 25), sample_at(0, 116), 3, 50));
}

TEST_CASE("warmup suppresses triggers regardless of the sample") {
    auto b = primed_baseline(100, 0);
    b.warmup_remaining = 5;
    CHECK(!telemetry::check_anomaly(b, sample_at(0, 1e9), 3, 0));
}

TEST_CASE("queue drops trigger only above the floor") {
    CHECK(telemetry::check_anomaly(primed_baseline(100, 0), sample_at(0, 2000, 5), 3, 1000));
    CHECK(!telemetry::check_anomaly(primed_baseline(100, 0), sample_at(0, 500, 5), 3, 1000));
}

TEST_CASE("anomaly verdict is monotone in the packet rate") {
    std::mt19937 rng(3);
    for (int round = 0; round < 200; ++round) {
        const auto b = primed_baseline(rng() % 10000, rng() % 500);
        const double floor = rng() % 2000;
        const double pps = rng() % 20000;
        if (telemetry::check_anomaly(b, sample_at(0, pps), 3, floor)) {
            CHECK(telemetry::check_anomaly(b, sample_at(0, pps + 1 + rng() % 1000), 3,
                                           floor));
        }
    }
}

TEST_CASE("slice file names parse to their window bounds") {
    const auto ref = telemetry::parse_slice_name("27s--44s.pcap");
    REQUIRE(ref.has_value());
    CHECK(ref->start_s == doctest::Approx(27.0));
    CHECK(ref->end_s == doctest::Approx(44.0));

    const auto frac = telemetry::parse_slice_name("1.5s--2.25s.pcap");
    REQUIRE(frac.has_value());
    CHECK(frac->start_s == doctest::Approx(1.5));
    CHECK(frac->end_s == doctest::Approx(2.25));

    CHECK(!telemetry::parse_slice_name("notes.txt").has_value());
    CHECK(!telemetry::parse_slice_name("capture.pcap").has_value());
}

TEST_CASE("incident opens on the slice containing the trigger") {
    const std::vector<telemetry::SliceRef> slices = {
        {27.0, 44.0, "27s--44s.pcap"},
        {44.0, 60.0, "44s--60s.pcap"},
    };

    const auto w1 = telemetry::open_incident(29.0, slices);
    CHECK(w1.pcap_slice_path == "27s--44s.pcap");
    CHECK(w1.window_start_s == doctest::Approx(27.0));
    CHECK(w1.window_end_s == doctest::Approx(44.0));
    CHECK(w1.state == telemetry::WindowState::Open);

    // Half-open intervals: a trigger on the boundary belongs to the later slice.
    CHECK(telemetry::open_incident(44.0, slices).pcap_slice_path == "44s--60s.pcap");

    // Past the last slice: nearest one starting at or before the trigger.
    CHECK(telemetry::open_incident(75.0, slices).pcap_slice_path == "44s--60s.pcap");

    CHECK_THROWS_AS((void)telemetry::open_incident(10.0, slices),
                    telemetry::NoSliceAvailable);
}

TEST_CASE("slice directory scan returns sorted window references") {
    const auto dir = fresh_dir("scan");
    for (const char* name : {"44s--60s.pcap", "27s--44s.pcap", "README.md", "x.pcap"}) {
        std::ofstream(dir / name) << "stub";
    }
    const auto slices = telemetry::scan_slice_directory(dir);
    REQUIRE(slices.size() == 2);
    CHECK(slices[0].start_s == doctest::Approx(27.0));
    CHECK(slices[1].start_s == doctest::Approx(44.0));
    std::filesystem::remove_all(dir);
}

TEST_CASE("cooldown suppresses repeats and refreshes after expiry") {
    telemetry::CooldownState state;
    state.cooldown_s = 60.0;
    const telemetry::DedupKey key{pcap::Ipv4Addr{7}, triage::DominantL4::Udp};

    CHECK(!telemetry::should_suppress(state, key, 100.0));  // first firing
    CHECK(telemetry::should_suppress(state, key, 110.0));   // 10s later
    CHECK(!telemetry::should_suppress(state, key, 161.0));  // 61s after the firing
    CHECK(telemetry::should_suppress(state, key, 170.0));   // refreshed clock

    const telemetry::DedupKey other{pcap::Ipv4Addr{8}, triage::DominantL4::Udp};
    CHECK(!telemetry::should_suppress(state, other, 110.0));  // distinct key
}

TEST_CASE("at most one investigation per key inside any cooldown span") {
    std::mt19937 rng(17);
    telemetry::CooldownState state;
    state.cooldown_s = 60.0;
    const telemetry::DedupKey key{pcap::Ipv4Addr{42}, triage::DominantL4::Tcp};

    std::vector<double> fired;
    double now = 0.0;
    for (int i = 0; i < 500; ++i) {
        now += static_cast<double>(rng() % 30);
        if (!telemetry::should_suppress(state, key, now)) {
            fired.push_back(now);
        }
    }
    // Suppression covers [fire, fire + cooldown): a repeat exactly
    // cooldown_s later is allowed again.
    for (std::size_t i = 1; i < fired.size(); ++i) {
        CHECK(fired[i] - fired[i - 1] >= 60.0);
    }
}

TEST_CASE("counters JSONL loads in order and rejects bad lines") {
    const auto dir = fresh_dir("counters");
    const auto path = dir / "counters.jsonl";
    {
        std::ofstream out(path);
        out << R"({"ts_s": 1.0, "bytes_per_s": 800.0, "pkts_per_s": 10.0, "queue_drops": 0.0})" << "\n";
        out << "\n";
        out << R"({"ts_s": 2.0, "bytes_per_s": 1600.0, "pkts_per_s": 20.0, "queue_drops": 3.0})" << "\n";
    }
    const auto samples = telemetry::load_counters_jsonl(path);
    REQUIRE(samples.size() == 2);
    CHECK(samples[0].ts_s == doctest::Approx(1.0));
    CHECK(samples[1].pkts_per_s == doctest::Approx(20.0));
    CHECK(samples[1].queue_drops == doctest::Approx(3.0));

    std::ofstream(path, std::ios::app) << "not json\n";
    CHECK_THROWS((void)telemetry::load_counters_jsonl(path));
    std::filesystem::remove_all(dir);
}

}  // TEST_SUITE
