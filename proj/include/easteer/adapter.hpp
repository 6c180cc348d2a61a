#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <string>
#include <vector>

#include "easteer/schema.hpp"
#include "easteer/tensor.hpp"
#include "easteer/transport.hpp"

namespace easteer {

inline constexpr int kProtocolVersion = 1;

struct AdapterEndpoint {
    std::string base_url;
    int timeout_ms = 60000;
    std::size_t max_in_flight = 4;
    int protocol_version = kProtocolVersion;
    /// Attempts for idempotent calls (encode, classify, vqa, fetch); generate is never retried.
    int retries = 2;
    /// Accept classifier categories outside the 2-gender / 4-race schema.
    bool permissive = false;
};

/// Diffusion parameters forwarded to the generator.
struct ImageParams {
    int steps = 26;
    double guidance = 3.5;
    int width = 512;
    int height = 512;

    friend bool operator==(const ImageParams&, const ImageParams&) = default;
};

struct GenerationRequest {
    /// Conditions the sequence path of the generator.
    std::string base_prompt;
    /// Replaces the pooled conditioning vector.
    Embedding steered_embedding;
    std::uint64_t seed = 0;
    ImageParams params;
};

struct AdapterMeta {
    std::size_t dim = 0;
    std::string encoder_id;
    std::vector<std::string> model_ids;
    int protocol_version = kProtocolVersion;
    /// Generator identity reported in experiment rows.
    std::string generator_id;
};

/// The model-adapter surface: text encoding, generation, attribute
/// classification and the VQA ensemble. Implementations must be safe for
/// concurrent use.
class Adapter {
public:
    virtual ~Adapter() = default;

    virtual AdapterMeta meta() = 0;
    virtual Embedding encode(const std::string& prompt) = 0;
    /// Returns the server-side image id.
    virtual std::string generate(const GenerationRequest& request) = 0;
    virtual std::string fetch_image(const std::string& image_id) = 0;
    virtual ClassifyResult classify(const std::string& image_id) = 0;
    virtual VqaResult vqa(const std::string& image_id, const std::string& concept_name) = 0;
};

/// Typed client for the /v1 wire protocol over any Transport. All invariant
/// checks happen here and reject responses instead of repairing them.
class HttpAdapter final : public Adapter {
public:
    HttpAdapter(std::shared_ptr<Transport> transport, AdapterEndpoint endpoint);

    AdapterMeta meta() override;
    Embedding encode(const std::string& prompt) override;
    std::string generate(const GenerationRequest& request) override;
    std::string fetch_image(const std::string& image_id) override;
    ClassifyResult classify(const std::string& image_id) override;
    VqaResult vqa(const std::string& image_id, const std::string& concept_name) override;

private:
    HttpResponse call(const HttpRequest& request, bool idempotent);

    std::shared_ptr<Transport> transport_;
    AdapterEndpoint endpoint_;
    std::counting_semaphore<> in_flight_;
    std::mutex meta_mu_;
    std::optional<AdapterMeta> meta_;
};

// Wire codec shared by the client and the in-process service.

[[nodiscard]] std::string encode_generation_request(const GenerationRequest& request);
[[nodiscard]] GenerationRequest decode_generation_request(const std::string& body);

/// Server side of the protocol: dispatches /v1 requests to an Adapter
/// backend and renders responses (errors as {"error": {"code", "message"}}).
/// Usable directly as an in-process Transport or behind HttpServer.
class AdapterService final : public Transport {
public:
    explicit AdapterService(std::shared_ptr<Adapter> backend);

    HttpResponse send(const HttpRequest& request) override;

private:
    std::shared_ptr<Adapter> backend_;
};

[[nodiscard]] std::shared_ptr<Adapter> make_http_adapter(const AdapterEndpoint& endpoint);

} // namespace easteer
