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

#include <chrono>
#include <cstdlib>
#include <thread>

#include <httplib.h>

#include "holmes/detective.hpp"

namespace holmes::detective {

namespace {

// Splits "scheme://host[:port][/prefix]" into origin and request path.
// A base URL without a path gets the conventional /v1/chat/completions;
// a prefix that does not already end in /chat/completions gets it appended.
std::pair<std::string, std::string> split_base_url(const std::string& base_url) {
    const std::size_t scheme = base_url.find("://");
    const std::size_t host_start = scheme == std::string::npos ? 0 : scheme + 3;
    const std::size_t slash = base_url.find('/', host_start);
    std::string origin = base_url.substr(0, slash);
    std::string path = slash == std::string::npos ? "" : base_url.substr(slash);
    while (!path.empty() && path.back() == '/') {
        path.pop_back();
    }
    if (path.empty()) {
        path = "/v1/chat/completions";
    } else if (!path.ends_with("/chat/completions")) {
        path += "/chat/completions";
    }
    return {std::move(origin), std::move(path)};
}

}  // namespace

RemoteChatBackend::RemoteChatBackend(RemoteChatConfig config)
    : config_(std::move(config)) {
    auto [origin, path] = split_base_url(config_.base_url);
    origin_ = std::move(origin);
    path_ = std::move(path);
}

std::string RemoteChatBackend::complete(const std::vector<ChatMessage>& conversation,
                                        const BackendContext& ctx) {
    (void)ctx;  // single-source rule: the model sees only the conversation

    nlohmann::ordered_json body;
    body["model"] = config_.model;
    body["temperature"] = config_.temperature;
    auto messages = nlohmann::ordered_json::array();
    for (const auto& msg : conversation) {
        messages.push_back({{"role", msg.role}, {"content", msg.content}});
    }
    body["messages"] = std::move(messages);
    const std::string request_body = body.dump();

    httplib::Headers headers;
    if (const char* key = std::getenv(config_.api_key_env.c_str());
        key != nullptr && key[0] != '\0') {
        headers.emplace("Authorization", std::string("Bearer ") + key);
    }

    std::string last_error;
    const int attempts = 1 + std::max(0, config_.transport_retries);
    for (int attempt = 0; attempt < attempts; ++attempt) {
        if (attempt > 0) {
            std::this_thread::sleep_for(std::chrono::milliseconds(200 * attempt));
        }
        httplib::Client client(origin_);
        client.set_connection_timeout(config_.timeout_s, 0);
        client.set_read_timeout(config_.timeout_s, 0);
        client.set_write_timeout(config_.timeout_s, 0);

        auto res = client.Post(path_, headers, request_body, "application/json");
        if (!res) {
            last_error = "transport error: " + httplib::to_string(res.error());
            continue;
        }
        if (wire_log) {
            wire_log(request_body, res->body);
        }
        if (res->status >= 500) {
            last_error = "server error: HTTP " + std::to_string(res->status);
            continue;
        }
        if (res->status != 200) {
            throw BackendUnreachable("backend rejected request: HTTP " +
                                     std::to_string(res->status) + " " +
                                     res->body.substr(0, 200));
        }
        try {
            const auto envelope = nlohmann::json::parse(res->body);
            return envelope.at("choices").at(0).at("message").at("content")
                .get<std::string>();
        } catch (const nlohmann::json::exception& e) {
            throw BackendUnreachable(std::string("malformed completion envelope: ") +
                                     e.what());
        }
    }
    throw BackendUnreachable(last_error.empty() ? "backend unreachable" : last_error);
}

}  // namespace holmes::detective
