#include <gtest/gtest.h>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <random>
#include <thread>

#include "prmt4td/llm_client.hpp"

using namespace prmt4td;
namespace fs = std::filesystem;

namespace {

std::string ok_body(const std::string& content) {
    return nlohmann::json{{"choices", {{{"message", {{"role", "assistant"}, {"content", content}}}}}}}.dump();
}

struct ScriptedTransport {
    std::vector<HttpResponse> script;
    std::shared_ptr<std::size_t> calls = std::make_shared<std::size_t>(0);

    HttpResponse operator()(const std::string&, const std::string&, const std::map<std::string, std::string>&) const {
        const auto i = (*calls)++;
        return script.at(std::min(i, script.size() - 1));
    }
};

RetryPolicy fast_retry() { return {3, std::chrono::milliseconds(1)}; }

fs::path temp_dir(const std::string& name) {
    auto dir = fs::temp_directory_path() / ("prmt4td_" + name + "_" + std::to_string(::getpid()));
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

class ConstantBackend : public CompletionBackend {
public:
    explicit ConstantBackend(std::string text) : text_(std::move(text)) {}
    std::string complete(const CompletionRequest&) override { return text_; }

private:
    std::string text_;
};

}  // namespace

TEST(RequestHash, CanonicalAndStable) {
    EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    const auto r = make_request("hello", "m", 0.0, 16);
    EXPECT_EQ(canonical_json(r),
              R"({"max_tokens":16,"messages":[{"content":"hello","role":"user"}],"model":"m","temperature":0.0})");
    EXPECT_EQ(request_hash(r), sha256_hex(canonical_json(r)));
    EXPECT_EQ(request_hash(r), request_hash(make_request("hello", "m", 0.0, 16)));
    EXPECT_NE(request_hash(r), request_hash(make_request("hello!", "m", 0.0, 16)));
    EXPECT_NE(request_hash(r), request_hash(make_request("hello", "m", 0.5, 16)));
}

TEST(ChatBackend, RetriesRateLimitThenSucceeds) {
    ScriptedTransport t{{{429, ""}, {429, ""}, {200, ok_body("Final label: audit")}}};
    ChatCompletionBackend backend("https://example.invalid/v1", "k", fast_retry(), t);
    EXPECT_EQ(backend.complete(make_request("p", "m")), "Final label: audit");
    EXPECT_EQ(backend.attempts(), 3);
}

TEST(ChatBackend, AuthenticationFailsImmediately) {
    for (int status : {401, 403}) {
        ScriptedTransport t{{{status, ""}}};
        ChatCompletionBackend backend("u", "k", fast_retry(), t);
        EXPECT_THROW(backend.complete(make_request("p", "m")), AuthenticationError);
        EXPECT_EQ(backend.attempts(), 1);
    }
}

TEST(ChatBackend, ServerErrorsExhaustRetries) {
    ScriptedTransport t{{{503, ""}}};
    ChatCompletionBackend backend("u", "k", fast_retry(), t);
    EXPECT_THROW(backend.complete(make_request("p", "m")), RetriesExhaustedError);
    EXPECT_EQ(backend.attempts(), 4);
}

TEST(ChatBackend, ClientErrorIsNotRetried) {
    ScriptedTransport t{{{400, "bad"}}};
    ChatCompletionBackend backend("u", "k", fast_retry(), t);
    EXPECT_THROW(backend.complete(make_request("p", "m")), BackendError);
    EXPECT_EQ(backend.attempts(), 1);
}

TEST(ChatBackend, SendsBearerTokenAndCanonicalBody) {
    std::string seen_body, seen_auth;
    HttpTransport t = [&](const std::string&, const std::string& body, const std::map<std::string, std::string>& h) {
        seen_body = body;
        seen_auth = h.at("Authorization");
        return HttpResponse{200, ok_body("x")};
    };
    ChatCompletionBackend backend("u", "secret", fast_retry(), t);
    const auto r = make_request("p", "m");
    backend.complete(r);
    EXPECT_EQ(seen_body, canonical_json(r));
    EXPECT_EQ(seen_auth, "Bearer secret");
}

TEST(ChatBackend, MalformedBodyIsABackendError) {
    EXPECT_THROW(ChatCompletionBackend::extract_content("{}"), BackendError);
    EXPECT_THROW(ChatCompletionBackend::extract_content("not json"), BackendError);
}

TEST(Replay, HitAndMiss) {
    const auto dir = temp_dir("replay");
    const auto hit = make_request("stored", "m");
    {
        RecordingBackend rec(std::make_shared<ConstantBackend>("Final label: pooling"), dir);
        rec.complete(hit);
    }
    ASSERT_TRUE(fs::exists(dir / (request_hash(hit) + ".json")));
    ReplayBackend replay(dir);
    EXPECT_EQ(replay.complete(hit), "Final label: pooling");

    const auto miss = make_request("not stored", "m");
    try {
        replay.complete(miss);
        FAIL() << "expected a replay miss";
    } catch (const ReplayMissError& e) {
        EXPECT_EQ(e.hash(), request_hash(miss));
        EXPECT_NE(std::string(e.what()).find(request_hash(miss)), std::string::npos);
    }
    EXPECT_THROW(ReplayBackend(dir / "absent"), BackendError);
    fs::remove_all(dir);
}

TEST(Echo, RepeatsTheLastSmallModelPrediction) {
    EchoBackend echo;
    const auto r = make_request("Small model prediction: audit (confidence: 0.90)\nmore\n"
                                "Small model prediction: heartbeat (confidence: 0.51)\n",
                                "m");
    EXPECT_EQ(parse_label(echo.complete(r)).label, TacticLabel::heartbeat);
    EXPECT_FALSE(parse_label(echo.complete(make_request("no hint", "m"))).label.has_value());
}

TEST(CompleteAll, PreservesInputOrderAndCapturesErrors) {
    class Jittery : public CompletionBackend {
    public:
        std::string complete(const CompletionRequest& r) override {
            const auto& text = r.messages.at(0).content;
            std::this_thread::sleep_for(std::chrono::microseconds((std::hash<std::string>{}(text) % 7) * 300));
            if (text == "boom") throw BackendError("boom");
            return text;
        }
    } backend;
    std::vector<CompletionRequest> requests;
    for (int i = 0; i < 40; ++i) requests.push_back(make_request(i == 17 ? "boom" : std::to_string(i), "m"));
    const auto out = complete_all(backend, requests, 6);
    ASSERT_EQ(out.size(), 40u);
    for (int i = 0; i < 40; ++i) {
        if (i == 17) {
            EXPECT_TRUE(out[i].error);
        } else {
            EXPECT_FALSE(out[i].error);
            EXPECT_EQ(out[i].response, std::to_string(i));
        }
    }
    EXPECT_TRUE(complete_all(backend, {}, 4).empty());
}

TEST(RateLimit, SpacesRequests) {
    RateLimitedBackend limited(std::make_shared<ConstantBackend>("x"), 50.0);
    const auto start = std::chrono::steady_clock::now();
    for (int i = 0; i < 5; ++i) limited.complete(make_request("p", "m"));
    EXPECT_GE(std::chrono::steady_clock::now() - start, std::chrono::milliseconds(75));
}

TEST(ParseLabel, FinalLineForms) {
    struct Case {
        const char* text;
        std::optional<TacticLabel> label;
        bool from_final;
    };
    const Case cases[] = {
        {"Final label: audit\nBecause it logs.", TacticLabel::audit, true},
        {"Reasoning first.\n\n**Final label:** Pooling", TacticLabel::pooling, true},
        {"final label: `heartbeat`.", TacticLabel::heartbeat, true},
        {"Final Label: 'scheduler'", TacticLabel::scheduler, true},
        {"Final label: audit\nlater\nFinal label: unrelated", TacticLabel::unrelated, true},
        {"It looks like a scheduler to me.", TacticLabel::scheduler, false},
        {"Could be audit or pooling.", std::nullopt, false},
        {"Final label: caching", std::nullopt, false},
        {"", std::nullopt, false},
    };
    for (const auto& c : cases) {
        const auto p = parse_label(c.text);
        EXPECT_EQ(p.label, c.label) << c.text;
        EXPECT_EQ(p.from_final_line, c.from_final) << c.text;
    }
    EXPECT_EQ(parse_label("Final label: audit\nBecause it logs.").rationale, "Because it logs.");
}

TEST(ParseLabel, RestrictedUniverse) {
    const std::vector<TacticLabel> only{TacticLabel::audit};
    EXPECT_FALSE(parse_label("Final label: pooling", only).label.has_value());
    EXPECT_EQ(parse_label("Final label: audit", only).label, TacticLabel::audit);
}

TEST(ParseLabel, TotalOnArbitraryInput) {
    std::mt19937_64 rng(11);
    const std::string alphabet = "abcdefghilnoprstuFL: \n*`'\"._-#>\t";
    for (int trial = 0; trial < 2000; ++trial) {
        std::string s(rng() % 120, ' ');
        for (auto& ch : s) ch = alphabet[rng() % alphabet.size()];
        if (trial % 3 == 0) s += "\nFinal label: " + std::string(to_string(kAllLabels[trial % kLabelCount]));
        ParsedLabel p;
        ASSERT_NO_THROW(p = parse_label(s));
        if (trial % 3 == 0) {
            EXPECT_EQ(p.label, kAllLabels[trial % kLabelCount]);
        }
    }
}

TEST(DetectionResultJson, RoundTripWithoutLatency) {
    DetectionResult r;
    r.input_id = "x1";
    r.parsed_label = TacticLabel::authenticate;
    r.rationale = "checks password";
    r.raw_response = "Final label: authenticate\nchecks password";
    r.prompt_variant = PromptVariant::no_cot;
    r.fallback_used = true;
    r.prompt_hash = "ab";
    r.latency_ms = 12.5;
    const auto j = to_json(r);
    EXPECT_FALSE(j.contains("latency_ms"));
    const auto back = detection_result_from_json(j);
    EXPECT_EQ(back.input_id, r.input_id);
    EXPECT_EQ(back.parsed_label, r.parsed_label);
    EXPECT_EQ(back.rationale, r.rationale);
    EXPECT_EQ(back.raw_response, r.raw_response);
    EXPECT_EQ(back.prompt_variant, r.prompt_variant);
    EXPECT_TRUE(back.fallback_used);
    EXPECT_EQ(back.prompt_hash, r.prompt_hash);

    r.parsed_label.reset();
    EXPECT_FALSE(detection_result_from_json(to_json(r)).parsed_label.has_value());
}
