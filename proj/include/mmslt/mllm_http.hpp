#pragma once

// Chat-completions style HTTP client: one image plus the prompt text per
// request, base64 data URL for the frame, 3 attempts with exponential
// backoff. The endpoint and model are opaque; credentials come from the
// environment.

#include <chrono>
#include <cstdlib>
#include <sstream>
#include <string>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "mmslt/mllm.hpp"

namespace mmslt {

inline std::string base64_encode(const std::string& in) {
    static const char* tbl = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
    std::string out;
    out.reserve((in.size() + 2) / 3 * 4);
    for (std::size_t i = 0; i < in.size(); i += 3) {
        std::uint32_t v = static_cast<unsigned char>(in[i]) << 16;
        if (i + 1 < in.size()) v |= static_cast<unsigned char>(in[i + 1]) << 8;
        if (i + 2 < in.size()) v |= static_cast<unsigned char>(in[i + 2]);
        out += tbl[(v >> 18) & 63];
        out += tbl[(v >> 12) & 63];
        out += i + 1 < in.size() ? tbl[(v >> 6) & 63] : '=';
        out += i + 2 < in.size() ? tbl[v & 63] : '=';
    }
    return out;
}

inline std::string pgm_bytes(const Image& im) {
    std::ostringstream out;
    out << "P5\n" << im.width << " " << im.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(im.pixels.data()),
              static_cast<std::streamsize>(im.pixels.size()));
    return out.str();
}

struct HttpClientConfig {
    std::string endpoint{"http://127.0.0.1:8080"};  // scheme://host[:port]
    std::string path{"/v1/chat/completions"};
    std::string api_key_env{"MMSLT_API_KEY"};
    int retries{3};
    int backoff_ms{250};  // doubles per attempt
    int timeout_s{120};
};

class HttpMllmClient : public MllmClient {
public:
    explicit HttpMllmClient(HttpClientConfig cfg) : cfg_(std::move(cfg)) {}

    std::string describe(const MllmRequest& req) override {
        calls_.fetch_add(1, std::memory_order_relaxed);
        nlohmann::json body;
        body["model"] = req.model_id;
        body["max_tokens"] = req.max_tokens;
        body["temperature"] = 0;
        body["messages"] = nlohmann::json::array({nlohmann::json{
            {"role", "user"},
            {"content",
             nlohmann::json::array(
                 {nlohmann::json{{"type", "text"}, {"text", req.prompt}},
                  nlohmann::json{
                      {"type", "image_url"},
                      {"image_url",
                       nlohmann::json{{"url", "data:image/x-portable-graymap;base64," +
                                                  base64_encode(pgm_bytes(req.frame))}}}}})}}});
        const std::string payload = body.dump();

        std::string last_error;
        for (int attempt = 0; attempt < cfg_.retries; ++attempt) {
            if (attempt > 0) {
                std::this_thread::sleep_for(
                    std::chrono::milliseconds(cfg_.backoff_ms << (attempt - 1)));
            }
            try {
                return attempt_once(payload);
            } catch (const std::exception& e) {
                last_error = e.what();
            }
        }
        throw std::runtime_error("request failed after " + std::to_string(cfg_.retries) +
                                 " attempts: " + last_error);
    }

    std::size_t call_count() const override { return calls_.load(std::memory_order_relaxed); }

private:
    std::string attempt_once(const std::string& payload) {
        httplib::Client cli(cfg_.endpoint);
        cli.set_connection_timeout(cfg_.timeout_s, 0);
        cli.set_read_timeout(cfg_.timeout_s, 0);
        httplib::Headers headers;
        if (const char* key = std::getenv(cfg_.api_key_env.c_str()); key != nullptr && *key != 0) {
            headers.emplace("Authorization", std::string("Bearer ") + key);
        }
        auto res = cli.Post(cfg_.path, headers, payload, "application/json");
        if (!res) {
            throw std::runtime_error("transport error: " + httplib::to_string(res.error()));
        }
        if (res->status != 200) {
            throw std::runtime_error("endpoint returned HTTP " + std::to_string(res->status));
        }
        const auto j = nlohmann::json::parse(res->body);
        return j.at("choices").at(0).at("message").at("content").get<std::string>();
    }

    HttpClientConfig cfg_;
    std::atomic<std::size_t> calls_{0};
};

}  // namespace mmslt
