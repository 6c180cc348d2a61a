#pragma once

#include <array>
#include <string>
#include <string_view>
#include <vector>

namespace easteer {

// Fixed classifier schema: two gender and four race categories.
inline constexpr std::array<std::string_view, 2> kGenderCategories = {"male", "female"};
inline constexpr std::array<std::string_view, 4> kRaceCategories = {"white", "black", "asian", "indian"};

inline constexpr std::string_view kVqaQuestionTemplate =
    "Answer only with yes or no: Is the person in this image a {concept}?";

[[nodiscard]] std::string vqa_question(std::string_view concept_name);

struct ClassifyResult {
    std::string image_id;
    std::array<double, 2> gender_probs{};
    std::array<double, 4> race_probs{};

    friend bool operator==(const ClassifyResult&, const ClassifyResult&) = default;
};

/// Per-image ensemble answers; the same shape is returned by the vqa endpoint.
struct CcsRecord {
    std::string image_id;
    std::string concept_name;
    std::vector<double> yes_probabilities;
    std::vector<std::string> model_ids;

    friend bool operator==(const CcsRecord&, const CcsRecord&) = default;
};

using VqaResult = CcsRecord;

} // namespace easteer
