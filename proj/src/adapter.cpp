#include "easteer/adapter.hpp"

#include <cmath>

#include <json.hpp>

#include "easteer/codec.hpp"
#include "easteer/errors.hpp"

namespace easteer {

using nlohmann::json;

namespace {

std::optional<ErrorCode> error_code_from_string(const std::string& s) {
    for (int i = 0; i <= static_cast<int>(ErrorCode::Incomplete); ++i) {
        const auto code = static_cast<ErrorCode>(i);
        if (to_string(code) == s) {
            return code;
        }
    }
    return std::nullopt;
}

int status_for(ErrorCode code) {
    switch (code) {
    case ErrorCode::UnknownImage:
    case ErrorCode::FixtureMiss: return 404;
    case ErrorCode::InvalidArgument:
    case ErrorCode::DimensionMismatch:
    case ErrorCode::NonFiniteInput:
    case ErrorCode::ProtocolViolation:
    case ErrorCode::ProtocolVersionMismatch: return 400;
    default: return 500;
    }
}

HttpResponse error_response(ErrorCode code, const std::string& message) {
    json body = {{"error", {{"code", std::string(to_string(code))}, {"message", message}}}};
    return {status_for(code), "application/json", body.dump()};
}

json parse_body(const HttpResponse& response, const std::string& what) {
    try {
        return json::parse(response.body);
    } catch (const json::exception& e) {
        throw Error(ErrorCode::ProtocolViolation, what + ": response is not JSON: " + e.what());
    }
}

template <typename F>
auto protocol_guard(const std::string& what, F&& f) {
    try {
        return f();
    } catch (const json::exception& e) {
        throw Error(ErrorCode::ProtocolViolation, what + ": " + e.what());
    }
}

void check_probability(double p, const std::string& what) {
    if (!std::isfinite(p) || p < 0.0 || p > 1.0) {
        throw Error(ErrorCode::ProtocolViolation, what + " probability " + std::to_string(p) + " outside [0,1]");
    }
}

template <std::size_t N>
std::array<double, N> read_block(const json& block, const std::array<std::string_view, N>& categories,
                                 bool permissive, const std::string& what) {
    if (!block.is_object()) {
        throw Error(ErrorCode::ProtocolViolation, what + " is not an object");
    }
    std::array<double, N> out{};
    double total = 0.0;
    for (std::size_t i = 0; i < N; ++i) {
        const std::string key(categories[i]);
        if (!block.contains(key)) {
            throw Error(ErrorCode::ProtocolViolation, what + " lacks category '" + key + "'");
        }
        out[i] = block.at(key).get<double>();
    }
    for (const auto& [key, value] : block.items()) {
        const bool known = std::find(categories.begin(), categories.end(), std::string_view(key)) != categories.end();
        if (!known && !permissive) {
            throw Error(ErrorCode::ProtocolViolation, what + " has unexpected category '" + key + "'");
        }
        const double p = value.template get<double>();
        check_probability(p, what);
        total += p;
    }
    if (std::abs(total - 1.0) > 1e-6) {
        throw Error(ErrorCode::ProtocolViolation, what + " sums to " + std::to_string(total));
    }
    return out;
}

template <std::size_t N>
json write_block(const std::array<double, N>& probs, const std::array<std::string_view, N>& categories) {
    json out = json::object();
    for (std::size_t i = 0; i < N; ++i) {
        out[std::string(categories[i])] = probs[i];
    }
    return out;
}

json classify_to_json(const ClassifyResult& r) {
    return {{"image_id", r.image_id},
            {"gender_probs", write_block(r.gender_probs, kGenderCategories)},
            {"race_probs", write_block(r.race_probs, kRaceCategories)}};
}

json vqa_to_json(const VqaResult& r) {
    return {{"image_id", r.image_id},
            {"concept", r.concept_name},
            {"yes_probabilities", r.yes_probabilities},
            {"model_ids", r.model_ids}};
}

json meta_to_json(const AdapterMeta& m) {
    return {{"dim", m.dim},
            {"encoder_id", m.encoder_id},
            {"model_ids", m.model_ids},
            {"protocol_version", m.protocol_version},
            {"generator_id", m.generator_id}};
}

class SemaphoreGuard {
public:
    explicit SemaphoreGuard(std::counting_semaphore<>& s) : s_(s) { s_.acquire(); }
    ~SemaphoreGuard() { s_.release(); }
    SemaphoreGuard(const SemaphoreGuard&) = delete;
    SemaphoreGuard& operator=(const SemaphoreGuard&) = delete;

private:
    std::counting_semaphore<>& s_;
};

} // namespace

// Wire codec ---------------------------------------------------------------------

std::string encode_generation_request(const GenerationRequest& request) {
    json j = {{"base_prompt", request.base_prompt},
              {"pooled_embedding", floats_to_base64(request.steered_embedding.span())},
              {"encoder_id", request.steered_embedding.encoder_id()},
              {"dim", request.steered_embedding.dim()},
              {"seed", request.seed},
              {"params",
               {{"steps", request.params.steps},
                {"guidance", request.params.guidance},
                {"width", request.params.width},
                {"height", request.params.height}}}};
    return j.dump();
}

GenerationRequest decode_generation_request(const std::string& body) {
    return protocol_guard("generate request", [&] {
        const auto j = json::parse(body);
        auto values = floats_from_base64(j.at("pooled_embedding").get<std::string>());
        if (values.size() != j.at("dim").get<std::size_t>()) {
            throw Error(ErrorCode::ProtocolViolation, "pooled_embedding length disagrees with dim");
        }
        GenerationRequest r;
        r.base_prompt = j.at("base_prompt").get<std::string>();
        r.steered_embedding = Embedding(std::move(values), j.at("encoder_id").get<std::string>());
        r.seed = j.at("seed").get<std::uint64_t>();
        const auto& p = j.at("params");
        r.params = {p.at("steps").get<int>(), p.at("guidance").get<double>(), p.at("width").get<int>(),
                    p.at("height").get<int>()};
        return r;
    });
}

// HttpAdapter --------------------------------------------------------------------

HttpAdapter::HttpAdapter(std::shared_ptr<Transport> transport, AdapterEndpoint endpoint)
    : transport_(std::move(transport)),
      endpoint_(std::move(endpoint)),
      in_flight_(static_cast<std::ptrdiff_t>(std::max<std::size_t>(endpoint_.max_in_flight, 1))) {
    if (endpoint_.max_in_flight < 1) {
        throw Error(ErrorCode::InvalidArgument, "max_in_flight must be >= 1");
    }
}

HttpResponse HttpAdapter::call(const HttpRequest& request, bool idempotent) {
    SemaphoreGuard guard(in_flight_);
    const int attempts = idempotent ? 1 + std::max(endpoint_.retries, 0) : 1;
    for (int attempt = 1;; ++attempt) {
        HttpResponse response;
        try {
            response = transport_->send(request);
        } catch (const Error& e) {
            if (e.code() == ErrorCode::Transport && attempt < attempts) {
                continue;
            }
            throw;
        }
        if (response.status >= 200 && response.status < 300) {
            return response;
        }
        auto body = json::parse(response.body, nullptr, false);
        if (!body.is_discarded() && body.contains("error")) {
            const auto code = error_code_from_string(body["error"].value("code", ""));
            const auto message = body["error"].value("message", "");
            throw Error(code.value_or(ErrorCode::Transport), request.path + ": " + message);
        }
        throw Error(ErrorCode::Transport, request.path + ": HTTP " + std::to_string(response.status));
    }
}

AdapterMeta HttpAdapter::meta() {
    std::lock_guard lock(meta_mu_);
    if (meta_) {
        return *meta_;
    }
    const auto j = parse_body(call({"GET", "/v1/meta", ""}, true), "meta");
    auto m = protocol_guard("meta", [&] {
        AdapterMeta out;
        out.dim = j.at("dim").get<std::size_t>();
        out.encoder_id = j.at("encoder_id").get<std::string>();
        out.model_ids = j.at("model_ids").get<std::vector<std::string>>();
        out.protocol_version = j.at("protocol_version").get<int>();
        out.generator_id = j.value("generator_id", std::string("unknown"));
        return out;
    });
    if (m.protocol_version != endpoint_.protocol_version) {
        throw Error(ErrorCode::ProtocolVersionMismatch, "adapter speaks v" + std::to_string(m.protocol_version) +
                                                            ", client expects v" +
                                                            std::to_string(endpoint_.protocol_version));
    }
    meta_ = m;
    return m;
}

Embedding HttpAdapter::encode(const std::string& prompt) {
    if (prompt.empty()) {
        throw Error(ErrorCode::InvalidArgument, "encode: empty prompt");
    }
    const auto m = meta();
    const auto j = parse_body(call({"POST", "/v1/encode", json{{"prompt", prompt}}.dump()}, true), "encode");
    return protocol_guard("encode", [&] {
        auto values = floats_from_base64(j.at("embedding").get<std::string>());
        if (values.size() != j.at("dim").get<std::size_t>() || values.size() != m.dim) {
            throw Error(ErrorCode::ProtocolViolation, "encode: embedding length " + std::to_string(values.size()) +
                                                          " disagrees with advertised dim " + std::to_string(m.dim));
        }
        return Embedding(std::move(values), j.at("encoder_id").get<std::string>());
    });
}

std::string HttpAdapter::generate(const GenerationRequest& request) {
    const auto m = meta();
    if (request.steered_embedding.dim() != m.dim) {
        throw Error(ErrorCode::DimensionMismatch, "generate: embedding dim " +
                                                      std::to_string(request.steered_embedding.dim()) +
                                                      ", adapter expects " + std::to_string(m.dim));
    }
    HttpResponse response;
    try {
        response = call({"POST", "/v1/generate", encode_generation_request(request)}, false);
    } catch (const Error& e) {
        throw Error(e.code() == ErrorCode::Transport ? ErrorCode::Transport : ErrorCode::GenerationFailure,
                    "generate(seed=" + std::to_string(request.seed) + ", base_prompt='" + request.base_prompt +
                        "'): " + e.what());
    }
    const auto j = parse_body(response, "generate");
    return protocol_guard("generate", [&] { return j.at("image_id").get<std::string>(); });
}

std::string HttpAdapter::fetch_image(const std::string& image_id) {
    return call({"GET", "/v1/image/" + image_id, ""}, true).body;
}

ClassifyResult HttpAdapter::classify(const std::string& image_id) {
    const auto j = parse_body(call({"POST", "/v1/classify", json{{"image_id", image_id}}.dump()}, true), "classify");
    return protocol_guard("classify", [&] {
        ClassifyResult r;
        r.image_id = j.at("image_id").get<std::string>();
        if (r.image_id != image_id) {
            throw Error(ErrorCode::ProtocolViolation, "classify answered for '" + r.image_id + "'");
        }
        r.gender_probs = read_block(j.at("gender_probs"), kGenderCategories, endpoint_.permissive, "gender_probs");
        r.race_probs = read_block(j.at("race_probs"), kRaceCategories, endpoint_.permissive, "race_probs");
        return r;
    });
}

VqaResult HttpAdapter::vqa(const std::string& image_id, const std::string& concept_name) {
    json req = {{"image_id", image_id}, {"concept", concept_name}, {"question", vqa_question(concept_name)}};
    const auto j = parse_body(call({"POST", "/v1/vqa", req.dump()}, true), "vqa");
    return protocol_guard("vqa", [&] {
        VqaResult r;
        r.image_id = j.at("image_id").get<std::string>();
        r.concept_name = j.at("concept").get<std::string>();
        r.yes_probabilities = j.at("yes_probabilities").get<std::vector<double>>();
        r.model_ids = j.at("model_ids").get<std::vector<std::string>>();
        if (r.image_id != image_id || r.concept_name != concept_name) {
            throw Error(ErrorCode::ProtocolViolation, "vqa answered a different question");
        }
        if (r.yes_probabilities.empty() || r.yes_probabilities.size() != r.model_ids.size()) {
            throw Error(ErrorCode::ProtocolViolation, "vqa needs one probability per model and at least one model");
        }
        for (double p : r.yes_probabilities) {
            check_probability(p, "vqa yes");
        }
        return r;
    });
}

std::shared_ptr<Adapter> make_http_adapter(const AdapterEndpoint& endpoint) {
    return std::make_shared<HttpAdapter>(std::make_shared<HttplibTransport>(endpoint.base_url, endpoint.timeout_ms),
                                         endpoint);
}

// AdapterService -----------------------------------------------------------------

AdapterService::AdapterService(std::shared_ptr<Adapter> backend) : backend_(std::move(backend)) {}

HttpResponse AdapterService::send(const HttpRequest& request) {
    try {
        const auto& path = request.path;
        const auto body = [&] {
            return protocol_guard("request body", [&] { return json::parse(request.body); });
        };
        if (request.method == "GET" && path == "/v1/meta") {
            return {200, "application/json", meta_to_json(backend_->meta()).dump()};
        }
        if (request.method == "GET" && path.starts_with("/v1/image/")) {
            return {200, "image/x-portable-graymap", backend_->fetch_image(path.substr(10))};
        }
        if (request.method != "POST") {
            return error_response(ErrorCode::InvalidArgument, "no route " + request.method + " " + path);
        }
        if (path == "/v1/encode") {
            const auto prompt = protocol_guard("encode", [&] { return body().at("prompt").get<std::string>(); });
            const auto e = backend_->encode(prompt);
            json out = {{"embedding", floats_to_base64(e.span())}, {"encoder_id", e.encoder_id()}, {"dim", e.dim()}};
            return {200, "application/json", out.dump()};
        }
        if (path == "/v1/generate") {
            const auto id = backend_->generate(decode_generation_request(request.body));
            return {200, "application/json", json{{"image_id", id}}.dump()};
        }
        if (path == "/v1/classify") {
            const auto id = protocol_guard("classify", [&] { return body().at("image_id").get<std::string>(); });
            return {200, "application/json", classify_to_json(backend_->classify(id)).dump()};
        }
        if (path == "/v1/vqa") {
            const auto j = body();
            const auto [id, concept_name] = protocol_guard("vqa", [&] {
                return std::pair{j.at("image_id").get<std::string>(), j.at("concept").get<std::string>()};
            });
            if (j.contains("question") && j["question"] != vqa_question(concept_name)) {
                return error_response(ErrorCode::ProtocolViolation, "question differs from the protocol template");
            }
            return {200, "application/json", vqa_to_json(backend_->vqa(id, concept_name)).dump()};
        }
        return error_response(ErrorCode::InvalidArgument, "no route POST " + path);
    } catch (const Error& e) {
        return error_response(e.code(), e.what());
    }
}

} // namespace easteer
