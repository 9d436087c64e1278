#pragma once

#include <atomic>
#include <chrono>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "tap/error.hpp"
#include "tap/prompt_engine.hpp"

namespace tap {

enum class DescriptionSource { Live, Cache, Fixture };

const char* to_string(DescriptionSource source);

struct SamplingParams {
    int samples_per_prompt = 5;
    int max_tokens = 60;
    double temperature = 0.9;

    void validate() const;
};

struct LlmRequest {
    std::string prompt_id;
    int class_id = 0;
    std::string class_name;
    std::string prompt_text;
    SamplingParams sampling;
};

std::vector<LlmRequest> make_requests(const std::vector<TargetedPrompt>& prompts, const SamplingParams& sampling);

struct Description {
    std::string prompt_id;
    int class_id = 0;
    std::string class_name;
    std::string text;
    int sample_index = 0;
    DescriptionSource source = DescriptionSource::Live;

    bool operator==(const Description&) const = default;
};

// What a transport is asked for: the completions for specific sample slots of
// one prompt. Only slots missing from the cache are requested.
struct CompletionRequest {
    std::string prompt_id;
    std::string prompt_text;
    std::vector<int> sample_indices;
    int max_tokens = 0;
    double temperature = 0.0;
};

// Thrown by transports. Transient failures are retried with backoff.
class TransportFailure : public std::runtime_error {
public:
    TransportFailure(bool transient, bool malformed, const std::string& message)
        : std::runtime_error(message), transient_(transient), malformed_(malformed) {}

    bool transient() const noexcept { return transient_; }
    bool malformed() const noexcept { return malformed_; }

private:
    bool transient_;
    bool malformed_;
};

class Transport {
public:
    virtual ~Transport() = default;

    // Returns one raw completion per requested sample index, in order.
    // Must be safe to call from several threads at once.
    virtual std::vector<std::string> complete(const CompletionRequest& request) = 0;
    virtual DescriptionSource source() const = 0;
};

struct HttpTransportConfig {
    // Completion-style endpoint, e.g. "http://localhost:8000/v1/completions".
    std::string url;
    std::string model;
    // Name of the environment variable holding the bearer token.
    std::string token_env = "TAP_LLM_API_KEY";
    int timeout_seconds = 60;
};

// POSTs {model, prompt, max_tokens, temperature, n} and reads choices[i].text.
class HttpTransport final : public Transport {
public:
    explicit HttpTransport(HttpTransportConfig config);

    std::vector<std::string> complete(const CompletionRequest& request) override;
    DescriptionSource source() const override { return DescriptionSource::Live; }

private:
    HttpTransportConfig config_;
    std::string base_;
    std::string path_;
    std::optional<std::string> token_;
};

// Serves pre-recorded descriptions keyed by (prompt_id, sample_index).
class FixtureTransport final : public Transport {
public:
    explicit FixtureTransport(std::vector<Description> records);

    std::vector<std::string> complete(const CompletionRequest& request) override;
    DescriptionSource source() const override { return DescriptionSource::Fixture; }

private:
    std::vector<Description> records_;
};

class MockTransport final : public Transport {
public:
    using Handler = std::function<std::vector<std::string>(const CompletionRequest&)>;

    explicit MockTransport(Handler handler);

    std::vector<std::string> complete(const CompletionRequest& request) override;
    DescriptionSource source() const override { return DescriptionSource::Live; }

    std::size_t calls() const noexcept { return calls_.load(); }

private:
    Handler handler_;
    std::atomic<std::size_t> calls_{0};
    std::mutex mutex_;
};

struct FetchOptions {
    std::optional<std::filesystem::path> cache_dir;
    // Part of the cache key so different models never share entries.
    std::string model;
    int max_in_flight = 4;
    int max_attempts = 3;
    std::chrono::milliseconds initial_backoff{200};
    bool allow_partial = false;
};

struct FetchFailure {
    std::string prompt_id;
    ErrorKind kind = ErrorKind::EndpointUnreachable;
    std::string message;
};

struct FetchResult {
    std::vector<Description> descriptions;
    std::vector<FetchFailure> failures;
    std::size_t transport_calls = 0;
    std::size_t cache_hits = 0;
};

// Output is ordered by request order, then sample index, independent of the
// order in which concurrent requests complete. Throws FetchError unless
// allow_partial is set.
FetchResult fetch_descriptions(const std::vector<LlmRequest>& requests, Transport& transport,
                               const FetchOptions& options = {});

// Hex SHA-256 over the prompt text, sample slot and sampling parameters.
std::string cache_key(const std::string& prompt_text, int sample_index, const SamplingParams& sampling,
                      const std::string& model);

// Strips surrounding whitespace and quote characters; nothing else.
std::string clean_completion(std::string_view raw);

// JSON-lines {prompt_id, class_id, class_name, sample_index, text}.
std::string descriptions_to_jsonl(const std::vector<Description>& descriptions);
void write_descriptions(const std::vector<Description>& descriptions, const std::filesystem::path& path);
std::vector<Description> read_descriptions(const std::filesystem::path& path,
                                           DescriptionSource source = DescriptionSource::Fixture);
std::vector<Description> load_fixture_descriptions(const std::filesystem::path& path);

}  // namespace tap
