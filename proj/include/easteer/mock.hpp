#pragma once

#include <filesystem>
#include <map>
#include <mutex>
#include <set>
#include <string>
#include <vector>

#include "easteer/adapter.hpp"

namespace easteer {

/// Parameters of the synthetic world behind MockAdapter. Loaded from a JSON
/// fixture file; every field has a default.
///
/// Encoding: a prompt is lower-cased and split into alphanumeric words; each
/// word maps to its lexicon vector or, failing that, to a hashed random vector
/// on the content dimensions (indices >= content_offset). The word vectors are
/// summed and, when normalize_output is set, rescaled to output_norm. Prompts
/// in encode_overrides return their scripted vector verbatim.
///
/// Classification: the image latent is the conditioning embedding plus
/// per-seed Gaussian noise. Gender is softmax([-z, z]) over (male, female) with
/// z = gender_gain * latent[gender_axis] + gender_bias; race is softmax over
/// race_gain * latent[race_axes[i]] + race_bias[i].
///
/// VQA: model m answers yes with sigmoid(slope_m * (cos(latent, encode(concept)) - offset_m)).
struct MockWorld {
    std::string encoder_id = "mock-clip";
    std::string generator_id = "mock-t2i";
    std::size_t dim = 16;
    int protocol_version = kProtocolVersion;
    std::uint64_t word_seed = 1;
    std::size_t content_offset = 5;
    double content_scale = 1.0;
    bool normalize_output = false;
    double output_norm = 1.0;
    std::map<std::string, std::vector<float>> lexicon;
    std::map<std::string, std::vector<float>> encode_overrides;

    std::size_t gender_axis = 0;
    double gender_gain = 1.0;
    double gender_bias = 0.0;
    std::vector<std::size_t> race_axes{1, 2, 3, 4};
    double race_gain = 1.0;
    std::vector<double> race_bias{0.0, 0.0, 0.0, 0.0};
    double noise = 0.0;

    struct VqaModel {
        std::string id;
        double slope = 8.0;
        double offset = 0.5;
    };
    std::vector<VqaModel> vqa_models{{"mock-vqa-a", 8.0, 0.5}, {"mock-vqa-b", 6.0, 0.45}, {"mock-vqa-c", 10.0, 0.55}};

    std::set<std::uint64_t> fail_generate_seeds;

    /// Lexicon entries are written sparsely: {"word": {"0": 1.5, "5": 0.5}} or as dense arrays.
    static MockWorld from_json(std::string_view text);
    static MockWorld load(const std::filesystem::path& path);
};

/// Deterministic in-process adapter over a MockWorld.
class MockAdapter final : public Adapter {
public:
    explicit MockAdapter(MockWorld world);

    AdapterMeta meta() override;
    Embedding encode(const std::string& prompt) override;
    std::string generate(const GenerationRequest& request) override;
    std::string fetch_image(const std::string& image_id) override;
    ClassifyResult classify(const std::string& image_id) override;
    VqaResult vqa(const std::string& image_id, const std::string& concept_name) override;

    [[nodiscard]] const MockWorld& world() const noexcept { return world_; }
    /// Latent of a generated image (embedding + seed noise).
    [[nodiscard]] std::vector<double> latent(const std::string& image_id) const;

private:
    struct Image {
        GenerationRequest request;
        std::vector<double> latent;
    };

    const Image& image(const std::string& image_id) const;

    MockWorld world_;
    mutable std::mutex mu_;
    std::map<std::string, Image> images_;
};

} // namespace easteer
