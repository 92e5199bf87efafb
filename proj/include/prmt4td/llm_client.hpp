#pragma once

#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
#define CPPHTTPLIB_OPENSSL_SUPPORT
#endif

#include <openssl/evp.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <regex>
#include <sstream>
#include <string>
#include <string_view>
#include <thread>
#include <utility>
#include <vector>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "prmt4td/error.hpp"
#include "prmt4td/labels.hpp"
#include "prmt4td/promptkit.hpp"

namespace prmt4td {

struct ChatMessage {
    std::string role;
    std::string content;
};

/// Chat-completions request body.
struct CompletionRequest {
    std::string model_name;
    std::vector<ChatMessage> messages;
    double temperature = 0.0;
    int max_tokens = 1024;
};

inline CompletionRequest make_request(std::string prompt, std::string model_name, double temperature = 0.0,
                                      int max_tokens = 1024) {
    return CompletionRequest{std::move(model_name), {ChatMessage{"user", std::move(prompt)}}, temperature, max_tokens};
}

inline nlohmann::json to_json(const CompletionRequest& r) {
    nlohmann::json messages = nlohmann::json::array();
    for (const auto& m : r.messages) messages.push_back({{"role", m.role}, {"content", m.content}});
    return {{"model", r.model_name}, {"messages", messages}, {"temperature", r.temperature}, {"max_tokens", r.max_tokens}};
}

/// Key-sorted compact JSON; identical requests give identical bytes in
/// every process.
inline std::string canonical_json(const CompletionRequest& r) { return to_json(r).dump(); }

inline std::string sha256_hex(std::string_view data) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
        throw std::runtime_error("SHA-256 digest failed");
    }
    std::string hex;
    hex.reserve(len * 2);
    char buf[3];
    for (unsigned int i = 0; i < len; ++i) {
        std::snprintf(buf, sizeof buf, "%02x", digest[i]);
        hex += buf;
    }
    return hex;
}

inline std::string request_hash(const CompletionRequest& r) { return sha256_hex(canonical_json(r)); }

// ---- backends --------------------------------------------------------------

class CompletionBackend {
public:
    virtual ~CompletionBackend() = default;
    /// Assistant message content for `request`. Must be safe to call from
    /// several threads at once.
    virtual std::string complete(const CompletionRequest& request) = 0;
};

struct HttpResponse {
    int status = 0;  ///< 0 means the transport failed before a response arrived
    std::string body;
};

using HttpTransport = std::function<HttpResponse(const std::string& url, const std::string& body,
                                                 const std::map<std::string, std::string>& headers)>;

namespace detail {

/// Splits "https://host:port/path" into ("https://host:port", "/path").
inline std::pair<std::string, std::string> split_url(const std::string& url) {
    const auto scheme_end = url.find("://");
    const auto path_start = url.find('/', scheme_end == std::string::npos ? 0 : scheme_end + 3);
    if (path_start == std::string::npos) return {url, "/"};
    return {url.substr(0, path_start), url.substr(path_start)};
}

inline HttpResponse httplib_post(const std::string& url, const std::string& body,
                                 const std::map<std::string, std::string>& headers, int timeout_s) {
    const auto [origin, path] = split_url(url);
    httplib::Client client(origin);
    client.set_connection_timeout(timeout_s, 0);
    client.set_read_timeout(timeout_s, 0);
    client.set_write_timeout(timeout_s, 0);
    httplib::Headers h;
    for (const auto& [k, v] : headers) h.emplace(k, v);
    auto res = client.Post(path, h, body, "application/json");
    if (!res) return {0, httplib::to_string(res.error())};
    return {res->status, res->body};
}

}  // namespace detail

inline HttpTransport default_transport(int timeout_s = 120) {
    return [timeout_s](const std::string& url, const std::string& body,
                       const std::map<std::string, std::string>& headers) {
        return detail::httplib_post(url, body, headers, timeout_s);
    };
}

struct RetryPolicy {
    int max_retries = 3;
    std::chrono::milliseconds base_delay{500};
};

/// Live chat-completions endpoint. Retries 429, 5xx and transport failures
/// with exponential backoff; 401/403 fail immediately.
class ChatCompletionBackend : public CompletionBackend {
public:
    ChatCompletionBackend(std::string endpoint, std::string api_key, RetryPolicy retry = {},
                          HttpTransport transport = default_transport())
        : endpoint_(std::move(endpoint)), api_key_(std::move(api_key)), retry_(retry),
          transport_(std::move(transport)) {}

    std::string complete(const CompletionRequest& request) override {
        const std::string body = canonical_json(request);
        std::map<std::string, std::string> headers{{"Content-Type", "application/json"}};
        if (!api_key_.empty()) headers["Authorization"] = "Bearer " + api_key_;
        std::string last_error;
        for (int attempt = 0; attempt <= retry_.max_retries; ++attempt) {
            if (attempt > 0) std::this_thread::sleep_for(retry_.base_delay * (1 << (attempt - 1)));
            attempts_.fetch_add(1, std::memory_order_relaxed);
            const HttpResponse res = transport_(endpoint_, body, headers);
            if (res.status == 200) return extract_content(res.body);
            if (res.status == 401 || res.status == 403) {
                throw AuthenticationError("authentication failed (HTTP " + std::to_string(res.status) + ")");
            }
            last_error = res.status == 0 ? "transport error: " + res.body : "HTTP " + std::to_string(res.status);
            const bool transient = res.status == 0 || res.status == 408 || res.status == 429 || res.status >= 500;
            if (!transient) throw BackendError("completion request rejected: " + last_error);
        }
        throw RetriesExhaustedError("completion failed after " + std::to_string(retry_.max_retries) +
                                    " retries: " + last_error);
    }

    /// Total HTTP attempts made so far (including retries).
    int attempts() const noexcept { return attempts_.load(); }

    static std::string extract_content(const std::string& body) {
        try {
            const auto j = nlohmann::json::parse(body);
            return j.at("choices").at(0).at("message").at("content").get<std::string>();
        } catch (const nlohmann::json::exception& e) {
            throw BackendError(std::string("malformed completion response: ") + e.what());
        }
    }

private:
    std::string endpoint_;
    std::string api_key_;
    RetryPolicy retry_;
    HttpTransport transport_;
    std::atomic<int> attempts_{0};
};

/// Stored responses keyed by request hash: `<dir>/<hash>.json` holding
/// {"request": ..., "response": "..."}.
class ReplayBackend : public CompletionBackend {
public:
    explicit ReplayBackend(std::filesystem::path dir) : dir_(std::move(dir)) {
        if (!std::filesystem::is_directory(dir_)) {
            throw BackendError("replay store '" + dir_.string() + "' is not a directory");
        }
    }

    std::string complete(const CompletionRequest& request) override {
        const std::string hash = request_hash(request);
        std::ifstream in(dir_ / (hash + ".json"), std::ios::binary);
        if (!in) throw ReplayMissError(hash);
        try {
            return nlohmann::json::parse(in).at("response").get<std::string>();
        } catch (const nlohmann::json::exception& e) {
            throw BackendError("corrupt replay fixture " + hash + ": " + e.what());
        }
    }

private:
    std::filesystem::path dir_;
};

/// Writes a replay fixture for every response produced by `inner`.
class RecordingBackend : public CompletionBackend {
public:
    RecordingBackend(std::shared_ptr<CompletionBackend> inner, std::filesystem::path dir)
        : inner_(std::move(inner)), dir_(std::move(dir)) {
        std::filesystem::create_directories(dir_);
    }

    std::string complete(const CompletionRequest& request) override {
        std::string response = inner_->complete(request);
        const nlohmann::json fixture{{"request", to_json(request)}, {"response", response}};
        std::ofstream out(dir_ / (request_hash(request) + ".json"), std::ios::binary);
        out << fixture.dump(2) << '\n';
        return response;
    }

private:
    std::shared_ptr<CompletionBackend> inner_;
    std::filesystem::path dir_;
};

/// Mock backend that answers with the small model's label for the input
/// snippet, i.e. the last "Small model prediction:" line of the prompt.
class EchoBackend : public CompletionBackend {
public:
    std::string complete(const CompletionRequest& request) override {
        const std::string& prompt = request.messages.empty() ? std::string() : request.messages.back().content;
        const auto at = prompt.rfind(sentinel::kModelPrediction);
        if (at == std::string::npos) {
            return "No small-model hint was available for this snippet, so no label is given.";
        }
        std::istringstream rest(prompt.substr(at + sentinel::kModelPrediction.size()));
        std::string label;
        rest >> label;
        return std::string(sentinel::kFinalLabel) + " " + label +
               "\n\nThe answer repeats the small model's prediction for the input snippet.";
    }
};

/// Enforces a minimum interval between requests to `inner`.
class RateLimitedBackend : public CompletionBackend {
public:
    RateLimitedBackend(std::shared_ptr<CompletionBackend> inner, double requests_per_second)
        : inner_(std::move(inner)),
          interval_(requests_per_second > 0.0
                        ? std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                              std::chrono::duration<double>(1.0 / requests_per_second))
                        : std::chrono::steady_clock::duration::zero()) {}

    std::string complete(const CompletionRequest& request) override {
        if (interval_ > std::chrono::steady_clock::duration::zero()) {
            std::chrono::steady_clock::time_point slot;
            {
                std::lock_guard lock(mutex_);
                const auto now = std::chrono::steady_clock::now();
                slot = std::max(now, next_slot_);
                next_slot_ = slot + interval_;
            }
            std::this_thread::sleep_until(slot);
        }
        return inner_->complete(request);
    }

private:
    std::shared_ptr<CompletionBackend> inner_;
    std::chrono::steady_clock::duration interval_;
    std::mutex mutex_;
    std::chrono::steady_clock::time_point next_slot_{};
};

// ---- concurrent dispatch ---------------------------------------------------

struct CompletionOutcome {
    std::string response;
    std::exception_ptr error;
    double latency_ms = 0.0;
};

/// Sends every request with at most `concurrency` in flight. Outcomes are
/// returned in input order regardless of completion order.
inline std::vector<CompletionOutcome> complete_all(CompletionBackend& backend,
                                                   const std::vector<CompletionRequest>& requests,
                                                   std::size_t concurrency = 4) {
    std::vector<CompletionOutcome> outcomes(requests.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next.fetch_add(1); i < requests.size(); i = next.fetch_add(1)) {
            const auto start = std::chrono::steady_clock::now();
            try {
                outcomes[i].response = backend.complete(requests[i]);
            } catch (...) {
                outcomes[i].error = std::current_exception();
            }
            outcomes[i].latency_ms =
                std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
        }
    };
    const std::size_t workers = std::max<std::size_t>(1, std::min(concurrency, requests.size()));
    std::vector<std::jthread> pool;
    for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(worker);
    worker();
    return outcomes;
}

// ---- response parsing --------------------------------------------------------

struct ParsedLabel {
    std::optional<TacticLabel> label;  ///< nullopt means unparsed
    std::string rationale;
    bool from_final_line = false;
};

namespace detail {

inline bool is_word_char(char c) {
    const auto u = static_cast<unsigned char>(c);
    return std::isalnum(u) || c == '_';
}

/// Whole-word, case-insensitive occurrence of `word` in `text`.
inline bool contains_word(std::string_view text, std::string_view word) {
    const std::string hay = ascii_lower(text);
    for (auto pos = hay.find(word); pos != std::string::npos; pos = hay.find(word, pos + 1)) {
        const bool left = pos == 0 || !is_word_char(hay[pos - 1]);
        const bool right = pos + word.size() >= hay.size() || !is_word_char(hay[pos + word.size()]);
        if (left && right) return true;
    }
    return false;
}

inline std::vector<std::string> split_lines(std::string_view text) {
    std::vector<std::string> lines;
    std::size_t start = 0;
    while (start <= text.size()) {
        const auto end = text.find('\n', start);
        std::string line(text.substr(start, end == std::string_view::npos ? std::string_view::npos : end - start));
        if (!line.empty() && line.back() == '\r') line.pop_back();
        lines.push_back(std::move(line));
        if (end == std::string_view::npos) break;
        start = end + 1;
    }
    return lines;
}

}  // namespace detail

/// Extracts the label from a model response. Primary rule: the last line of
/// the form "Final label: <x>" (markdown emphasis tolerated) with x in the
/// universe. Fallback: exactly one universe label named as a whole word in
/// the final paragraph. Anything else is unparsed. Never throws.
inline ParsedLabel parse_label(std::string_view response,
                               std::span<const TacticLabel> universe = std::span<const TacticLabel>(kAllLabels)) {
    static const std::regex final_line(R"(^[\s*_#>`-]*final\s+label[\s*_`]*:[\s*_`"']*([A-Za-z]+)[\s*_`"'.]*$)",
                                       std::regex::icase);
    const auto lines = detail::split_lines(response);
    ParsedLabel out;
    std::optional<std::size_t> chosen_line;
    for (std::size_t i = lines.size(); i-- > 0;) {
        std::smatch m;
        if (!std::regex_match(lines[i], m, final_line)) continue;
        const auto label = try_parse_label(m[1].str());
        if (label && std::find(universe.begin(), universe.end(), *label) != universe.end()) {
            out.label = label;
            out.from_final_line = true;
            chosen_line = i;
            break;
        }
    }

    if (!out.label) {
        // Final paragraph: last run of non-blank lines.
        std::size_t end = lines.size();
        while (end > 0 && detail::trim(lines[end - 1]).empty()) --end;
        std::size_t begin = end;
        while (begin > 0 && !detail::trim(lines[begin - 1]).empty()) --begin;
        std::string paragraph;
        for (std::size_t i = begin; i < end; ++i) paragraph += lines[i] + "\n";
        std::optional<TacticLabel> found;
        bool ambiguous = false;
        for (auto label : universe) {
            if (detail::contains_word(paragraph, to_string(label))) {
                if (found) ambiguous = true;
                found = label;
            }
        }
        if (found && !ambiguous) out.label = found;
    }

    std::string rationale;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (chosen_line && i == *chosen_line) continue;
        rationale += lines[i];
        if (i + 1 < lines.size()) rationale += '\n';
    }
    out.rationale = std::string(detail::trim(rationale));
    return out;
}

/// One detection: the parsed answer plus provenance of the prompt behind it.
struct DetectionResult {
    std::string input_id;
    std::optional<TacticLabel> parsed_label;
    std::string rationale;
    std::string raw_response;
    PromptVariant prompt_variant = PromptVariant::full;
    bool fallback_used = false;  ///< conformal set was empty and replaced by {argmax}
    std::string prompt_hash;
    double latency_ms = 0.0;
};

/// Report form; latency is excluded so replayed runs serialize identically.
inline nlohmann::json to_json(const DetectionResult& r) {
    return {
        {"input_id", r.input_id},
        {"parsed_label", r.parsed_label ? nlohmann::json(std::string(to_string(*r.parsed_label))) : nlohmann::json()},
        {"rationale", r.rationale},
        {"raw_response", r.raw_response},
        {"prompt_variant", std::string(to_string(r.prompt_variant))},
        {"fallback_used", r.fallback_used},
        {"prompt_hash", r.prompt_hash},
    };
}

inline DetectionResult detection_result_from_json(const nlohmann::json& j) {
    DetectionResult r;
    try {
        r.input_id = j.at("input_id").get<std::string>();
        if (j.contains("parsed_label") && !j.at("parsed_label").is_null()) {
            r.parsed_label = parse_label_or_throw(j.at("parsed_label").get<std::string>());
        }
        r.rationale = j.value("rationale", "");
        r.raw_response = j.value("raw_response", "");
        const auto variant = try_parse_variant(j.value("prompt_variant", "full"));
        if (!variant) throw DataError("unknown prompt variant");
        r.prompt_variant = *variant;
        r.fallback_used = j.value("fallback_used", false);
        r.prompt_hash = j.value("prompt_hash", "");
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed detection result: ") + e.what());
    }
    return r;
}

}  // namespace prmt4td
