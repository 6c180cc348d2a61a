#include "easteer/mock.hpp"

#include <cctype>
#include <cmath>
#include <numbers>
#include <random>

#include <json.hpp>

#include "easteer/codec.hpp"
#include "easteer/container.hpp"
#include "easteer/errors.hpp"

namespace easteer {

using nlohmann::json;

namespace {

double unit_uniform(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Box-Muller on the fully specified engine output, so noise is platform-stable.
double standard_normal(std::mt19937_64& rng) {
    const double u1 = 1.0 - unit_uniform(rng);
    const double u2 = unit_uniform(rng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

std::vector<std::string> words(std::string_view prompt) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : prompt) {
        if (std::isalnum(static_cast<unsigned char>(c))) {
            cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
        } else if (!cur.empty()) {
            out.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) {
        out.push_back(std::move(cur));
    }
    return out;
}

std::vector<float> read_vector(const json& j, std::size_t dim, const std::string& what) {
    std::vector<float> v(dim, 0.0f);
    if (j.is_array()) {
        if (j.size() != dim) {
            throw Error(ErrorCode::ConfigError, what + ": expected " + std::to_string(dim) + " values");
        }
        for (std::size_t i = 0; i < dim; ++i) {
            v[i] = j[i].get<float>();
        }
    } else {
        for (const auto& [k, val] : j.items()) {
            const auto idx = std::stoul(k);
            if (idx >= dim) {
                throw Error(ErrorCode::ConfigError, what + ": index " + k + " out of range");
            }
            v[idx] = val.get<float>();
        }
    }
    return v;
}

} // namespace

MockWorld MockWorld::from_json(std::string_view text) {
    MockWorld w;
    try {
        const auto j = json::parse(text);
        w.encoder_id = j.value("encoder_id", w.encoder_id);
        w.generator_id = j.value("generator_id", w.generator_id);
        w.dim = j.value("dim", w.dim);
        w.protocol_version = j.value("protocol_version", w.protocol_version);
        w.word_seed = j.value("word_seed", w.word_seed);
        w.content_offset = j.value("content_offset", w.content_offset);
        w.content_scale = j.value("content_scale", w.content_scale);
        w.normalize_output = j.value("normalize_output", w.normalize_output);
        w.output_norm = j.value("output_norm", w.output_norm);
        const auto lexicon = j.value("lexicon", json::object());
        for (const auto& [word, v] : lexicon.items()) {
            w.lexicon[word] = read_vector(v, w.dim, "lexicon." + word);
        }
        const auto overrides = j.value("encode_overrides", json::object());
        for (const auto& [prompt, v] : overrides.items()) {
            w.encode_overrides[prompt] = read_vector(v, w.dim, "encode_overrides");
        }
        if (j.contains("classifier")) {
            const auto& c = j["classifier"];
            w.gender_axis = c.value("gender_axis", w.gender_axis);
            w.gender_gain = c.value("gender_gain", w.gender_gain);
            w.gender_bias = c.value("gender_bias", w.gender_bias);
            w.race_axes = c.value("race_axes", w.race_axes);
            w.race_gain = c.value("race_gain", w.race_gain);
            w.race_bias = c.value("race_bias", w.race_bias);
            w.noise = c.value("noise", w.noise);
        }
        if (j.contains("vqa_models")) {
            w.vqa_models.clear();
            for (const auto& m : j["vqa_models"]) {
                w.vqa_models.push_back({m.at("id").get<std::string>(), m.value("slope", 8.0), m.value("offset", 0.5)});
            }
        }
        w.fail_generate_seeds = j.value("fail_generate_seeds", w.fail_generate_seeds);
    } catch (const json::exception& e) {
        throw Error(ErrorCode::ConfigError, std::string("mock world: ") + e.what());
    }
    if (w.dim == 0 || w.race_axes.size() != 4 || w.race_bias.size() != 4 || w.gender_axis >= w.dim ||
        w.vqa_models.empty()) {
        throw Error(ErrorCode::ConfigError, "mock world: inconsistent classifier or dimension settings");
    }
    for (auto a : w.race_axes) {
        if (a >= w.dim) {
            throw Error(ErrorCode::ConfigError, "mock world: race axis out of range");
        }
    }
    return w;
}

MockWorld MockWorld::load(const std::filesystem::path& path) {
    return from_json(read_file(path));
}

MockAdapter::MockAdapter(MockWorld world) : world_(std::move(world)) {}

AdapterMeta MockAdapter::meta() {
    AdapterMeta m;
    m.dim = world_.dim;
    m.encoder_id = world_.encoder_id;
    m.protocol_version = world_.protocol_version;
    m.generator_id = world_.generator_id;
    for (const auto& v : world_.vqa_models) {
        m.model_ids.push_back(v.id);
    }
    return m;
}

Embedding MockAdapter::encode(const std::string& prompt) {
    if (prompt.empty()) {
        throw Error(ErrorCode::InvalidArgument, "encode: empty prompt");
    }
    if (auto it = world_.encode_overrides.find(prompt); it != world_.encode_overrides.end()) {
        return {it->second, world_.encoder_id};
    }
    std::vector<double> sum(world_.dim, 0.0);
    for (const auto& w : words(prompt)) {
        if (auto it = world_.lexicon.find(w); it != world_.lexicon.end()) {
            for (std::size_t i = 0; i < world_.dim; ++i) {
                sum[i] += it->second[i];
            }
            continue;
        }
        std::mt19937_64 rng(hash64(w) ^ world_.word_seed);
        for (std::size_t i = world_.content_offset; i < world_.dim; ++i) {
            sum[i] += world_.content_scale * (2.0 * unit_uniform(rng) - 1.0);
        }
    }
    double scale = 1.0;
    if (world_.normalize_output) {
        double n = 0.0;
        for (double x : sum) {
            n += x * x;
        }
        n = std::sqrt(n);
        if (!(n > 0.0)) {
            throw Error(ErrorCode::EncoderFailure, "prompt '" + prompt + "' encodes to zero");
        }
        scale = world_.output_norm / n;
    }
    std::vector<float> out(world_.dim);
    for (std::size_t i = 0; i < world_.dim; ++i) {
        out[i] = static_cast<float>(sum[i] * scale);
    }
    return {std::move(out), world_.encoder_id};
}

std::string MockAdapter::generate(const GenerationRequest& request) {
    if (request.steered_embedding.dim() != world_.dim) {
        throw Error(ErrorCode::DimensionMismatch, "generate: embedding dim " +
                                                      std::to_string(request.steered_embedding.dim()));
    }
    if (world_.fail_generate_seeds.contains(request.seed)) {
        throw Error(ErrorCode::GenerationFailure, "injected failure for seed " + std::to_string(request.seed));
    }
    const auto id = "img-" + sha256_hex(request.base_prompt + "\n" + floats_to_base64(request.steered_embedding.span()) +
                                        "\n" + std::to_string(request.seed) + "\n" +
                                        std::to_string(request.params.steps) + "/" +
                                        std::to_string(request.params.guidance) + "/" +
                                        std::to_string(request.params.width) + "x" +
                                        std::to_string(request.params.height))
                                 .substr(0, 20);

    std::vector<double> latent(request.steered_embedding.values().begin(), request.steered_embedding.values().end());
    if (world_.noise > 0.0) {
        std::mt19937_64 rng(request.seed);
        for (auto& x : latent) {
            x += world_.noise * standard_normal(rng);
        }
    }
    std::lock_guard lock(mu_);
    images_.try_emplace(id, Image{request, std::move(latent)});
    return id;
}

const MockAdapter::Image& MockAdapter::image(const std::string& image_id) const {
    std::lock_guard lock(mu_);
    auto it = images_.find(image_id);
    if (it == images_.end()) {
        throw Error(ErrorCode::UnknownImage, "image '" + image_id + "' does not exist");
    }
    return it->second;
}

std::vector<double> MockAdapter::latent(const std::string& image_id) const {
    return image(image_id).latent;
}

std::string MockAdapter::fetch_image(const std::string& image_id) {
    const auto& img = image(image_id);
    // 8x8 8-bit PGM whose pixels are the latent squashed into [0, 255].
    std::string out = "P5\n8 8\n255\n";
    for (std::size_t i = 0; i < 64; ++i) {
        const double v = img.latent[i % img.latent.size()];
        out.push_back(static_cast<char>(static_cast<unsigned char>(std::lround(255.0 * sigmoid(v)))));
    }
    return out;
}

ClassifyResult MockAdapter::classify(const std::string& image_id) {
    const auto& latent = image(image_id).latent;
    ClassifyResult r;
    r.image_id = image_id;
    const double z = world_.gender_gain * latent[world_.gender_axis] + world_.gender_bias;
    r.gender_probs = {sigmoid(-2.0 * z), 0.0};
    r.gender_probs[1] = 1.0 - r.gender_probs[0];

    std::array<double, 4> logits{};
    double mx = -INFINITY;
    for (std::size_t i = 0; i < 4; ++i) {
        logits[i] = world_.race_gain * latent[world_.race_axes[i]] + world_.race_bias[i];
        mx = std::max(mx, logits[i]);
    }
    double total = 0.0;
    for (std::size_t i = 0; i < 4; ++i) {
        r.race_probs[i] = std::exp(logits[i] - mx);
        total += r.race_probs[i];
    }
    for (auto& p : r.race_probs) {
        p /= total;
    }
    return r;
}

VqaResult MockAdapter::vqa(const std::string& image_id, const std::string& concept_name) {
    const auto& latent = image(image_id).latent;
    const auto reference = encode(concept_name);
    double d = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < latent.size(); ++i) {
        d += latent[i] * reference.values()[i];
        na += latent[i] * latent[i];
        nb += static_cast<double>(reference.values()[i]) * reference.values()[i];
    }
    const double cos = (na > 0.0 && nb > 0.0) ? d / std::sqrt(na * nb) : 0.0;
    VqaResult r;
    r.image_id = image_id;
    r.concept_name = concept_name;
    for (const auto& m : world_.vqa_models) {
        r.model_ids.push_back(m.id);
        r.yes_probabilities.push_back(sigmoid(m.slope * (cos - m.offset)));
    }
    return r;
}

} // namespace easteer
