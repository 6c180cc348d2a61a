#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "easteer/tensor.hpp"

namespace easteer {

inline constexpr int kTableFormatVersion = 1;

inline constexpr std::string_view kDefaultTemplate = "A photo portrait of {article} {profession}.";

struct PromptPair {
    std::string base_prompt;
    std::string attributed_prompt;
    std::string attribute;
    std::string base_concept;
};

/// Embeddings of one base concept with and without the attribute.
struct EmbeddingPair {
    std::string concept_name;
    Embedding base;
    Embedding attributed;
};

struct AttributeVector {
    std::string name;
    DirectionVector direction;
    double raw_norm = 0.0;
    std::vector<std::string> source_concepts;
    bool intersectional = false;
    std::string encoder_id;

    [[nodiscard]] std::size_t k() const noexcept { return source_concepts.size(); }

    friend bool operator==(const AttributeVector&, const AttributeVector&) = default;
};

/// Declares which attribute strings a lookup table holds. Intersections are
/// named "{race} {gender}", e.g. "black female".
struct AttributeAxes {
    std::vector<std::string> gender;
    std::vector<std::string> race;
    bool intersections = false;
    std::vector<std::string> other;

    [[nodiscard]] std::vector<std::string> intersection_names() const;
    /// gender, race, intersections, other, in that order.
    [[nodiscard]] std::vector<std::string> all() const;
    [[nodiscard]] bool is_intersection(const std::string& name) const;

    [[nodiscard]] static AttributeAxes demographic();
};

[[nodiscard]] std::string intersection_name(const std::string& race, const std::string& gender);

/// Immutable collection of attribute vectors sharing one encoder and dimension.
class LookupTable {
public:
    LookupTable(std::string encoder_id, std::size_t dim, std::string prompt_template, std::size_t created_with_k,
                std::vector<AttributeVector> entries);

    [[nodiscard]] const AttributeVector& at(const std::string& name) const;
    [[nodiscard]] bool contains(const std::string& name) const { return index_.contains(name); }
    [[nodiscard]] const std::vector<AttributeVector>& entries() const noexcept { return entries_; }
    [[nodiscard]] std::vector<std::string> names() const;
    [[nodiscard]] std::size_t size() const noexcept { return entries_.size(); }

    [[nodiscard]] const std::string& encoder_id() const noexcept { return encoder_id_; }
    [[nodiscard]] std::size_t dim() const noexcept { return dim_; }
    [[nodiscard]] const std::string& prompt_template() const noexcept { return prompt_template_; }
    [[nodiscard]] std::size_t created_with_k() const noexcept { return created_with_k_; }

    /// Union of every entry's source concepts, in first-seen order.
    [[nodiscard]] std::vector<std::string> source_concepts() const;

    friend bool operator==(const LookupTable& a, const LookupTable& b) {
        return a.encoder_id_ == b.encoder_id_ && a.dim_ == b.dim_ && a.prompt_template_ == b.prompt_template_ &&
               a.created_with_k_ == b.created_with_k_ && a.entries_ == b.entries_;
    }

private:
    std::string encoder_id_;
    std::size_t dim_;
    std::string prompt_template_;
    std::size_t created_with_k_;
    std::vector<AttributeVector> entries_;
    std::map<std::string, std::size_t> index_;
};

struct SteeringTerm {
    std::string attribute;
    double alpha = 0.0;
};

struct SteeringSpec {
    std::vector<SteeringTerm> terms;

    [[nodiscard]] bool empty() const noexcept { return terms.empty(); }
};

using EncodeFn = std::function<Embedding(const std::string&)>;

// Prompt construction ---------------------------------------------------------

/// Checks that a template has a {profession} placeholder; throws ConfigError otherwise.
void validate_template(std::string_view tmpl);

/// "a" or "an" for the given phrase, by the sound class of its first word.
[[nodiscard]] std::string indefinite_article(std::string_view phrase);

/// Renders a prompt. With an empty attribute this is the base prompt. The
/// attribute fills {attribute} if present, otherwise it is inserted as a
/// pre-modifier of {profession}. {article} agrees with the word that follows it.
[[nodiscard]] std::string render_prompt(std::string_view tmpl, std::string_view concept_name,
                                        std::string_view attribute = {});

[[nodiscard]] PromptPair make_prompt_pair(std::string_view tmpl, const std::string& concept_name,
                                          const std::string& attribute);

// Derivation and composition --------------------------------------------------

/// Unit direction of the mean (attributed - base) difference over the K pairs.
[[nodiscard]] AttributeVector derive_attribute_vector(std::span<const EmbeddingPair> pairs,
                                                      const std::string& attribute, bool intersectional = false);

struct AttributeRequest {
    std::string name;
    bool intersectional = false;
};

[[nodiscard]] std::vector<AttributeRequest> attribute_requests(const AttributeAxes& axes);

/// Encodes every base and attributed prompt (up to max_in_flight at once) and
/// derives one vector per attribute from all base concepts.
[[nodiscard]] LookupTable build_lookup_table(std::span<const AttributeRequest> attributes,
                                             std::span<const std::string> base_concepts, std::string_view tmpl,
                                             const EncodeFn& encode, std::size_t max_in_flight = 1);

/// e_base + sum(alpha_i * v_i). Zero-alpha terms are skipped so an all-zero
/// spec returns e_base bit-for-bit.
[[nodiscard]] Embedding compose(const Embedding& base, const SteeringSpec& spec, const LookupTable& table);

/// normalize(a + b): the composed vector used by the composability probe.
[[nodiscard]] DirectionVector compose_vectors(const AttributeVector& a, const AttributeVector& b);

// Persistence -----------------------------------------------------------------

struct TablePaths {
    std::filesystem::path tensors;
    std::filesystem::path metadata;
};

/// "out/table" -> out/table.tensors + out/table.meta.json. Either suffix on input is accepted.
[[nodiscard]] TablePaths table_paths(const std::filesystem::path& stem);

void save_lookup_table(const LookupTable& table, const std::filesystem::path& stem);
[[nodiscard]] LookupTable load_lookup_table(const std::filesystem::path& stem);

} // namespace easteer
