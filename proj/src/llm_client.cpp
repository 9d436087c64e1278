#include "tap/llm_client.hpp"

#include <algorithm>
#include <cstdlib>
#include <map>
#include <set>
#include <thread>

#include <openssl/evp.h>

#include <httplib.h>
#include <json.hpp>

#include "tap/io_util.hpp"

namespace tap {

namespace {

std::string to_hex(const unsigned char* data, std::size_t n) {
    static constexpr char digits[] = "0123456789abcdef";
    std::string out(n * 2, '0');
    for (std::size_t i = 0; i < n; ++i) {
        out[2 * i] = digits[data[i] >> 4];
        out[2 * i + 1] = digits[data[i] & 0xf];
    }
    return out;
}

std::string sha256_hex(std::string_view text) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(text.data(), text.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
        throw Error(ErrorKind::IoError, "SHA-256 digest failed");
    }
    return to_hex(digest, len);
}

std::filesystem::path cache_path(const std::filesystem::path& dir, const std::string& key) {
    return dir / key.substr(0, 2) / (key + ".json");
}

std::optional<std::string> cache_lookup(const std::filesystem::path& dir, const std::string& key) {
    const auto path = cache_path(dir, key);
    if (!std::filesystem::exists(path)) return std::nullopt;
    try {
        const auto doc = nlohmann::json::parse(read_text_file(path));
        if (doc.value("key", std::string()) != key) return std::nullopt;
        auto text = doc.at("text").get<std::string>();
        if (trim(text).empty()) return std::nullopt;
        return text;
    } catch (const std::exception&) {
        // A corrupt entry is treated as a miss and overwritten.
        return std::nullopt;
    }
}

void cache_store(const std::filesystem::path& dir, const std::string& key, const LlmRequest& req,
                 int sample_index, const std::string& model, const std::string& text) {
    nlohmann::ordered_json doc;
    doc["key"] = key;
    doc["prompt_id"] = req.prompt_id;
    doc["prompt_text"] = req.prompt_text;
    doc["sample_index"] = sample_index;
    doc["max_tokens"] = req.sampling.max_tokens;
    doc["temperature"] = req.sampling.temperature;
    doc["model"] = model;
    doc["text"] = text;
    write_text_file_atomic(cache_path(dir, key), doc.dump(2) + "\n");
}

struct RequestOutcome {
    std::vector<Description> descriptions;
    std::optional<FetchFailure> failure;
    std::size_t transport_calls = 0;
    std::size_t cache_hits = 0;
};

RequestOutcome run_request(const LlmRequest& req, Transport& transport, const FetchOptions& options) {
    RequestOutcome outcome;
    const int n = req.sampling.samples_per_prompt;
    std::vector<std::optional<Description>> slots(static_cast<std::size_t>(n));
    std::vector<std::string> keys(static_cast<std::size_t>(n));
    CompletionRequest completion{req.prompt_id, req.prompt_text, {}, req.sampling.max_tokens, req.sampling.temperature};

    for (int s = 0; s < n; ++s) {
        keys[static_cast<std::size_t>(s)] = cache_key(req.prompt_text, s, req.sampling, options.model);
        if (options.cache_dir) {
            if (auto text = cache_lookup(*options.cache_dir, keys[static_cast<std::size_t>(s)])) {
                slots[static_cast<std::size_t>(s)] =
                    Description{req.prompt_id, req.class_id, req.class_name, *text, s, DescriptionSource::Cache};
                ++outcome.cache_hits;
                continue;
            }
        }
        completion.sample_indices.push_back(s);
    }

    if (!completion.sample_indices.empty()) {
        std::vector<std::string> raw;
        std::string last_error;
        bool done = false;
        for (int attempt = 1; attempt <= options.max_attempts && !done; ++attempt) {
            try {
                ++outcome.transport_calls;
                raw = transport.complete(completion);
                done = true;
            } catch (const TransportFailure& f) {
                last_error = f.what();
                if (f.malformed()) {
                    outcome.failure = FetchFailure{req.prompt_id, ErrorKind::MalformedResponse, last_error};
                    return outcome;
                }
                if (!f.transient()) break;
                if (attempt < options.max_attempts) {
                    std::this_thread::sleep_for(options.initial_backoff * (1 << (attempt - 1)));
                }
            }
        }
        if (!done) {
            outcome.failure = FetchFailure{req.prompt_id, ErrorKind::EndpointUnreachable, last_error};
            return outcome;
        }
        if (raw.size() != completion.sample_indices.size()) {
            outcome.failure = FetchFailure{req.prompt_id, ErrorKind::MalformedResponse,
                                           "expected " + std::to_string(completion.sample_indices.size()) +
                                               " completions, got " + std::to_string(raw.size())};
            return outcome;
        }
        for (std::size_t i = 0; i < raw.size(); ++i) {
            const std::string text = clean_completion(raw[i]);
            if (text.empty()) {
                outcome.failure = FetchFailure{req.prompt_id, ErrorKind::MalformedResponse,
                                               "empty completion for sample " +
                                                   std::to_string(completion.sample_indices[i])};
                return outcome;
            }
            const int s = completion.sample_indices[i];
            slots[static_cast<std::size_t>(s)] =
                Description{req.prompt_id, req.class_id, req.class_name, text, s, transport.source()};
        }
        if (options.cache_dir) {
            for (int s : completion.sample_indices) {
                cache_store(*options.cache_dir, keys[static_cast<std::size_t>(s)], req, s, options.model,
                            slots[static_cast<std::size_t>(s)]->text);
            }
        }
    }

    for (auto& slot : slots) outcome.descriptions.push_back(std::move(*slot));
    return outcome;
}

// Splits "http://host:port/path" into the client base and the request path.
std::pair<std::string, std::string> split_url(const std::string& url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw Error(ErrorKind::InvalidConfig, "endpoint URL needs a scheme: " + url);
    const auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {url, "/"};
    return {url.substr(0, path_start), url.substr(path_start)};
}

}  // namespace

const char* to_string(DescriptionSource source) {
    switch (source) {
        case DescriptionSource::Live: return "live";
        case DescriptionSource::Cache: return "cache";
        case DescriptionSource::Fixture: return "fixture";
    }
    return "live";
}

void SamplingParams::validate() const {
    if (samples_per_prompt < 1) throw Error(ErrorKind::InvalidConfig, "samples_per_prompt must be >= 1");
    if (max_tokens < 1) throw Error(ErrorKind::InvalidConfig, "max_tokens must be >= 1");
    if (!(temperature >= 0.0)) throw Error(ErrorKind::InvalidConfig, "sampling temperature must be >= 0");
}

std::vector<LlmRequest> make_requests(const std::vector<TargetedPrompt>& prompts, const SamplingParams& sampling) {
    sampling.validate();
    std::vector<LlmRequest> out;
    out.reserve(prompts.size());
    for (const auto& p : prompts) out.push_back(LlmRequest{p.prompt_id, p.class_id, p.class_name, p.rendered_text, sampling});
    return out;
}

std::string cache_key(const std::string& prompt_text, int sample_index, const SamplingParams& sampling,
                      const std::string& model) {
    nlohmann::ordered_json material;
    material["prompt"] = prompt_text;
    material["sample_index"] = sample_index;
    material["max_tokens"] = sampling.max_tokens;
    material["temperature"] = format_double(sampling.temperature);
    material["model"] = model;
    return sha256_hex(material.dump());
}

std::string clean_completion(std::string_view raw) {
    std::string text = trim(raw);
    static const std::vector<std::string> quotes = {"\"", "'", "\xE2\x80\x9C", "\xE2\x80\x9D", "\xE2\x80\x98",
                                                    "\xE2\x80\x99"};
    bool changed = true;
    while (changed && !text.empty()) {
        changed = false;
        for (const auto& q : quotes) {
            if (text.starts_with(q)) {
                text.erase(0, q.size());
                changed = true;
            }
            if (text.ends_with(q)) {
                text.erase(text.size() - q.size());
                changed = true;
            }
        }
        text = trim(text);
    }
    return text;
}

HttpTransport::HttpTransport(HttpTransportConfig config) : config_(std::move(config)) {
    std::tie(base_, path_) = split_url(config_.url);
    if (!config_.token_env.empty()) {
        if (const char* token = std::getenv(config_.token_env.c_str()); token && *token) token_ = token;
    }
}

std::vector<std::string> HttpTransport::complete(const CompletionRequest& request) {
    httplib::Client client(base_);
    client.set_connection_timeout(config_.timeout_seconds);
    client.set_read_timeout(config_.timeout_seconds);
    httplib::Headers headers;
    if (token_) headers.emplace("Authorization", "Bearer " + *token_);

    nlohmann::json body;
    if (!config_.model.empty()) body["model"] = config_.model;
    body["prompt"] = request.prompt_text;
    body["max_tokens"] = request.max_tokens;
    body["temperature"] = request.temperature;
    body["n"] = request.sample_indices.size();

    auto res = client.Post(path_, headers, body.dump(), "application/json");
    if (!res) {
        throw TransportFailure(true, false, "request to " + config_.url + " failed: " + httplib::to_string(res.error()));
    }
    if (res->status == 429 || res->status >= 500) {
        throw TransportFailure(true, false, "HTTP " + std::to_string(res->status) + " from " + config_.url);
    }
    if (res->status != 200) {
        throw TransportFailure(false, false, "HTTP " + std::to_string(res->status) + " from " + config_.url);
    }
    try {
        const auto doc = nlohmann::json::parse(res->body);
        std::vector<std::string> out;
        for (const auto& choice : doc.at("choices")) out.push_back(choice.at("text").get<std::string>());
        return out;
    } catch (const nlohmann::json::exception& e) {
        throw TransportFailure(false, true, std::string("unparseable completion response: ") + e.what());
    }
}

FixtureTransport::FixtureTransport(std::vector<Description> records) : records_(std::move(records)) {}

std::vector<std::string> FixtureTransport::complete(const CompletionRequest& request) {
    std::vector<std::string> out;
    for (int s : request.sample_indices) {
        auto it = std::find_if(records_.begin(), records_.end(), [&](const Description& d) {
            return d.prompt_id == request.prompt_id && d.sample_index == s;
        });
        if (it == records_.end()) {
            throw TransportFailure(false, false,
                                   "fixture has no sample " + std::to_string(s) + " for prompt " + request.prompt_id);
        }
        out.push_back(it->text);
    }
    return out;
}

MockTransport::MockTransport(Handler handler) : handler_(std::move(handler)) {}

std::vector<std::string> MockTransport::complete(const CompletionRequest& request) {
    ++calls_;
    std::lock_guard lock(mutex_);
    return handler_(request);
}

FetchResult fetch_descriptions(const std::vector<LlmRequest>& requests, Transport& transport,
                               const FetchOptions& options) {
    for (const auto& r : requests) r.sampling.validate();
    {
        std::set<std::string> ids;
        for (const auto& r : requests) {
            if (!ids.insert(r.prompt_id).second) {
                throw Error(ErrorKind::InvalidConfig, "duplicate prompt_id '" + r.prompt_id + "'");
            }
        }
    }

    std::vector<RequestOutcome> outcomes(requests.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < requests.size(); i = next++) {
            outcomes[i] = run_request(requests[i], transport, options);
        }
    };
    const std::size_t threads =
        std::clamp<std::size_t>(static_cast<std::size_t>(std::max(options.max_in_flight, 1)), 1, requests.size() + 1);
    if (threads <= 1 || requests.size() <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t t = 0; t < std::min(threads, requests.size()); ++t) pool.emplace_back(worker);
    }

    FetchResult result;
    for (auto& o : outcomes) {
        result.transport_calls += o.transport_calls;
        result.cache_hits += o.cache_hits;
        if (o.failure) {
            result.failures.push_back(std::move(*o.failure));
            continue;
        }
        for (auto& d : o.descriptions) result.descriptions.push_back(std::move(d));
    }
    if (!result.failures.empty() && !options.allow_partial) {
        std::vector<std::string> ids;
        bool any_unreachable = false;
        for (const auto& f : result.failures) {
            ids.push_back(f.prompt_id);
            any_unreachable = any_unreachable || f.kind == ErrorKind::EndpointUnreachable;
        }
        std::string message = std::to_string(ids.size()) + " prompt(s) failed:";
        for (const auto& f : result.failures) message += " " + f.prompt_id + " (" + f.message + ");";
        throw FetchError(any_unreachable ? ErrorKind::EndpointUnreachable : ErrorKind::MalformedResponse,
                         std::move(ids), message);
    }
    return result;
}

std::string descriptions_to_jsonl(const std::vector<Description>& descriptions) {
    std::string out;
    for (const auto& d : descriptions) {
        nlohmann::ordered_json rec;
        rec["prompt_id"] = d.prompt_id;
        rec["class_id"] = d.class_id;
        rec["class_name"] = d.class_name;
        rec["sample_index"] = d.sample_index;
        rec["text"] = d.text;
        out += rec.dump();
        out += '\n';
    }
    return out;
}

void write_descriptions(const std::vector<Description>& descriptions, const std::filesystem::path& path) {
    write_text_file_atomic(path, descriptions_to_jsonl(descriptions));
}

std::vector<Description> read_descriptions(const std::filesystem::path& path, DescriptionSource source) {
    const auto lines = split_lines(read_text_file(path));
    std::vector<Description> out;
    std::map<std::string, int> next_sample;
    std::set<std::pair<std::string, int>> seen;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (trim(lines[i]).empty()) continue;
        Description d;
        try {
            const auto rec = nlohmann::json::parse(lines[i]);
            if (!rec.is_object()) throw ParseError(i + 1, "expected a JSON object");
            d.prompt_id = rec.at("prompt_id").get<std::string>();
            d.class_id = rec.at("class_id").get<int>();
            d.class_name = rec.value("class_name", std::string());
            d.text = rec.at("text").get<std::string>();
            d.sample_index = rec.contains("sample_index") ? rec["sample_index"].get<int>() : next_sample[d.prompt_id];
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(i + 1, e.what());
        }
        d.text = trim(d.text);
        d.source = source;
        if (d.text.empty()) throw ParseError(i + 1, "description text is empty");
        if (d.sample_index < 0) throw ParseError(i + 1, "sample_index is negative");
        if (!seen.emplace(d.prompt_id, d.sample_index).second) {
            throw ParseError(i + 1, "duplicate (prompt_id, sample_index) = (" + d.prompt_id + ", " +
                                        std::to_string(d.sample_index) + ")");
        }
        next_sample[d.prompt_id] = std::max(next_sample[d.prompt_id], d.sample_index + 1);
        out.push_back(std::move(d));
    }
    return out;
}

std::vector<Description> load_fixture_descriptions(const std::filesystem::path& path) {
    return read_descriptions(path, DescriptionSource::Fixture);
}

}  // namespace tap
