#include "easteer/steering.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <set>

#include <json.hpp>

#include "easteer/container.hpp"
#include "easteer/errors.hpp"
#include "easteer/parallel.hpp"

namespace easteer {

using nlohmann::json;

// AttributeAxes ----------------------------------------------------------------

std::string intersection_name(const std::string& race, const std::string& gender) {
    return race + " " + gender;
}

std::vector<std::string> AttributeAxes::intersection_names() const {
    std::vector<std::string> out;
    if (!intersections) {
        return out;
    }
    for (const auto& r : race) {
        for (const auto& g : gender) {
            out.push_back(intersection_name(r, g));
        }
    }
    return out;
}

std::vector<std::string> AttributeAxes::all() const {
    std::vector<std::string> out = gender;
    out.insert(out.end(), race.begin(), race.end());
    auto inter = intersection_names();
    out.insert(out.end(), inter.begin(), inter.end());
    out.insert(out.end(), other.begin(), other.end());
    return out;
}

bool AttributeAxes::is_intersection(const std::string& name) const {
    const auto inter = intersection_names();
    return std::find(inter.begin(), inter.end(), name) != inter.end();
}

AttributeAxes AttributeAxes::demographic() {
    return {{"male", "female"}, {"white", "black", "asian", "indian"}, true, {}};
}

// LookupTable ------------------------------------------------------------------

LookupTable::LookupTable(std::string encoder_id, std::size_t dim, std::string prompt_template,
                         std::size_t created_with_k, std::vector<AttributeVector> entries)
    : encoder_id_(std::move(encoder_id)),
      dim_(dim),
      prompt_template_(std::move(prompt_template)),
      created_with_k_(created_with_k),
      entries_(std::move(entries)) {
    if (dim_ == 0) {
        throw Error(ErrorCode::InvalidArgument, "lookup table dim must be >= 1");
    }
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        const auto& e = entries_[i];
        if (e.encoder_id != encoder_id_) {
            throw Error(ErrorCode::MixedEncoders, "entry '" + e.name + "' was derived with encoder '" +
                                                      e.encoder_id + "', table uses '" + encoder_id_ + "'");
        }
        if (e.direction.dim() != dim_) {
            throw Error(ErrorCode::DimensionMismatch, "entry '" + e.name + "' has dim " +
                                                          std::to_string(e.direction.dim()));
        }
        if (e.source_concepts.empty() || !(e.raw_norm > 0.0)) {
            throw Error(ErrorCode::InvalidArgument, "entry '" + e.name + "' lacks provenance");
        }
        if (!index_.emplace(e.name, i).second) {
            throw Error(ErrorCode::InvalidArgument, "duplicate attribute '" + e.name + "'");
        }
    }
}

const AttributeVector& LookupTable::at(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) {
        throw Error(ErrorCode::UnknownAttribute, "'" + name + "' is not in the lookup table");
    }
    return entries_[it->second];
}

std::vector<std::string> LookupTable::names() const {
    std::vector<std::string> out;
    for (const auto& e : entries_) {
        out.push_back(e.name);
    }
    return out;
}

std::vector<std::string> LookupTable::source_concepts() const {
    std::vector<std::string> out;
    for (const auto& e : entries_) {
        for (const auto& c : e.source_concepts) {
            if (std::find(out.begin(), out.end(), c) == out.end()) {
                out.push_back(c);
            }
        }
    }
    return out;
}

// Prompts ----------------------------------------------------------------------

namespace {

constexpr std::string_view kArticle = "{article}";
constexpr std::string_view kProfession = "{profession}";
constexpr std::string_view kAttribute = "{attribute}";

bool replace_first(std::string& s, std::string_view what, std::string_view with) {
    auto pos = s.find(what);
    if (pos == std::string::npos) {
        return false;
    }
    s.replace(pos, what.size(), with);
    return true;
}

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
    return out;
}

void collapse_spaces(std::string& s) {
    std::string out;
    for (char c : s) {
        if (c == ' ' && !out.empty() && out.back() == ' ') {
            continue;
        }
        out.push_back(c);
    }
    for (std::string_view punct : {" .", " ,"}) {
        for (auto pos = out.find(punct); pos != std::string::npos; pos = out.find(punct)) {
            out.erase(pos, 1);
        }
    }
    while (!out.empty() && out.back() == ' ') {
        out.pop_back();
    }
    while (!out.empty() && out.front() == ' ') {
        out.erase(out.begin());
    }
    s = std::move(out);
}

} // namespace

void validate_template(std::string_view tmpl) {
    if (tmpl.find(kProfession) == std::string_view::npos) {
        throw Error(ErrorCode::ConfigError, "prompt template lacks a {profession} placeholder: '" +
                                                std::string(tmpl) + "'");
    }
}

std::string indefinite_article(std::string_view phrase) {
    const auto word = lower(phrase.substr(0, phrase.find(' ')));
    if (word.empty()) {
        return "a";
    }
    for (std::string_view p : {"hour", "honest", "honor", "honour", "heir"}) {
        if (word.starts_with(p)) {
            return "an";
        }
    }
    for (std::string_view p : {"uni", "use", "usu", "uro", "eu", "one", "once"}) {
        if (word.starts_with(p)) {
            return "a";
        }
    }
    return std::string_view("aeiou").find(word.front()) != std::string_view::npos ? "an" : "a";
}

std::string render_prompt(std::string_view tmpl, std::string_view concept_name, std::string_view attribute) {
    validate_template(tmpl);
    std::string out(tmpl);
    if (out.find(kAttribute) != std::string::npos) {
        if (attribute.empty()) {
            if (!replace_first(out, ", {attribute}", "") && !replace_first(out, " {attribute}", "")) {
                replace_first(out, kAttribute, "");
            }
        } else {
            replace_first(out, kAttribute, attribute);
        }
        replace_first(out, kProfession, concept_name);
    } else {
        std::string phrase = attribute.empty() ? std::string(concept_name)
                                               : std::string(attribute) + " " + std::string(concept_name);
        replace_first(out, kProfession, phrase);
    }
    collapse_spaces(out);

    for (auto pos = out.find(kArticle); pos != std::string::npos; pos = out.find(kArticle)) {
        auto next = out.find_first_not_of(' ', pos + kArticle.size());
        const auto article = indefinite_article(next == std::string::npos ? "" : std::string_view(out).substr(next));
        out.replace(pos, kArticle.size(), article);
    }
    return out;
}

PromptPair make_prompt_pair(std::string_view tmpl, const std::string& concept_name, const std::string& attribute) {
    PromptPair p{render_prompt(tmpl, concept_name), render_prompt(tmpl, concept_name, attribute), attribute,
                 concept_name};
    if (p.base_prompt == p.attributed_prompt) {
        throw Error(ErrorCode::InvalidArgument, "attribute '" + attribute + "' does not change the prompt");
    }
    return p;
}

// Derivation -------------------------------------------------------------------

AttributeVector derive_attribute_vector(std::span<const EmbeddingPair> pairs, const std::string& attribute,
                                        bool intersectional) {
    if (pairs.empty()) {
        throw Error(ErrorCode::InvalidArgument, "no prompt pairs for attribute '" + attribute + "'");
    }
    const auto dim = pairs.front().base.dim();
    const auto& encoder = pairs.front().base.encoder_id();
    std::vector<double> sum(dim, 0.0);
    std::vector<std::string> concepts;
    for (const auto& p : pairs) {
        if (p.base.encoder_id() != encoder || p.attributed.encoder_id() != encoder) {
            throw Error(ErrorCode::MixedEncoders, "pairs for '" + attribute + "' come from different encoders");
        }
        if (p.base.dim() != dim || p.attributed.dim() != dim) {
            throw Error(ErrorCode::DimensionMismatch, "pairs for '" + attribute + "' differ in dim");
        }
        for (std::size_t i = 0; i < dim; ++i) {
            sum[i] += static_cast<double>(p.attributed.values()[i]) - static_cast<double>(p.base.values()[i]);
        }
        concepts.push_back(p.concept_name);
    }

    const double k = static_cast<double>(pairs.size());
    double norm_sq = 0.0;
    for (auto& s : sum) {
        s /= k;
        norm_sq += s * s;
    }
    const double norm = std::sqrt(norm_sq);
    if (!(norm > kNormEpsilon)) {
        throw Error(ErrorCode::DegenerateVector, "averaged difference for '" + attribute + "' has zero norm");
    }
    std::vector<float> unit(dim);
    for (std::size_t i = 0; i < dim; ++i) {
        unit[i] = static_cast<float>(sum[i] / norm);
    }
    return {attribute, DirectionVector(std::move(unit), true), norm, std::move(concepts), intersectional, encoder};
}

std::vector<AttributeRequest> attribute_requests(const AttributeAxes& axes) {
    std::vector<AttributeRequest> out;
    for (const auto& name : axes.all()) {
        out.push_back({name, axes.is_intersection(name)});
    }
    return out;
}

LookupTable build_lookup_table(std::span<const AttributeRequest> attributes,
                               std::span<const std::string> base_concepts, std::string_view tmpl,
                               const EncodeFn& encode, std::size_t max_in_flight) {
    if (base_concepts.empty()) {
        throw Error(ErrorCode::InvalidArgument, "base_concepts is empty");
    }
    if (attributes.empty()) {
        throw Error(ErrorCode::InvalidArgument, "no attributes requested");
    }
    validate_template(tmpl);
    std::set<std::string> seen;
    for (const auto& a : attributes) {
        if (!seen.insert(a.name).second) {
            throw Error(ErrorCode::InvalidArgument, "duplicate attribute '" + a.name + "'");
        }
    }
    seen.clear();
    for (const auto& c : base_concepts) {
        if (!seen.insert(c).second) {
            throw Error(ErrorCode::InvalidArgument, "duplicate base concept '" + c + "'");
        }
    }

    // Slot 0 of each concept row is the base prompt, slot j+1 the j-th attribute.
    const std::size_t row = attributes.size() + 1;
    std::vector<std::string> prompts;
    for (const auto& c : base_concepts) {
        prompts.push_back(render_prompt(tmpl, c));
        for (const auto& a : attributes) {
            auto pair = make_prompt_pair(tmpl, c, a.name);
            prompts.push_back(std::move(pair.attributed_prompt));
        }
    }
    std::vector<std::optional<Embedding>> encoded(prompts.size());
    parallel_for(prompts.size(), max_in_flight, [&](std::size_t i) {
        try {
            encoded[i] = encode(prompts[i]);
        } catch (const Error& e) {
            throw Error(e.code(), "encoding '" + prompts[i] + "': " + e.message());
        }
    });

    const auto dim = encoded.front()->dim();
    const auto encoder_id = encoded.front()->encoder_id();
    std::vector<AttributeVector> entries;
    for (std::size_t j = 0; j < attributes.size(); ++j) {
        std::vector<EmbeddingPair> pairs;
        for (std::size_t k = 0; k < base_concepts.size(); ++k) {
            pairs.push_back({base_concepts[k], *encoded[k * row], *encoded[k * row + j + 1]});
        }
        try {
            entries.push_back(derive_attribute_vector(pairs, attributes[j].name, attributes[j].intersectional));
        } catch (const Error& e) {
            throw Error(e.code(), "attribute '" + attributes[j].name + "': " + e.message());
        }
    }
    return {encoder_id, dim, std::string(tmpl), base_concepts.size(), std::move(entries)};
}

Embedding compose(const Embedding& base, const SteeringSpec& spec, const LookupTable& table) {
    if (base.dim() != table.dim()) {
        throw Error(ErrorCode::DimensionMismatch, "base embedding dim " + std::to_string(base.dim()) +
                                                      " vs table dim " + std::to_string(table.dim()));
    }
    if (base.encoder_id() != table.encoder_id()) {
        throw Error(ErrorCode::MixedEncoders, "base embedding from '" + base.encoder_id() + "', table from '" +
                                                  table.encoder_id() + "'");
    }
    std::vector<const AttributeVector*> vectors;
    for (const auto& t : spec.terms) {
        vectors.push_back(&table.at(t.attribute));
        if (!std::isfinite(t.alpha)) {
            throw Error(ErrorCode::NonFiniteInput, "alpha for '" + t.attribute + "' is not finite");
        }
    }
    std::vector<double> acc(base.values().begin(), base.values().end());
    bool touched = false;
    for (std::size_t j = 0; j < spec.terms.size(); ++j) {
        const double alpha = spec.terms[j].alpha;
        if (alpha == 0.0) {
            continue;
        }
        touched = true;
        const auto& v = vectors[j]->direction.values();
        for (std::size_t i = 0; i < acc.size(); ++i) {
            acc[i] += alpha * static_cast<double>(v[i]);
        }
    }
    if (!touched) {
        return base;
    }
    std::vector<float> out(acc.size());
    std::transform(acc.begin(), acc.end(), out.begin(), [](double x) { return static_cast<float>(x); });
    return {std::move(out), base.encoder_id()};
}

DirectionVector compose_vectors(const AttributeVector& a, const AttributeVector& b) {
    if (a.encoder_id != b.encoder_id) {
        throw Error(ErrorCode::MixedEncoders, "'" + a.name + "' and '" + b.name + "' come from different encoders");
    }
    return normalize(add(a.direction.span(), b.direction.span()));
}

// Persistence ------------------------------------------------------------------

TablePaths table_paths(const std::filesystem::path& stem) {
    std::string s = stem.string();
    for (std::string_view suffix : {".meta.json", ".tensors"}) {
        if (s.ends_with(suffix)) {
            s.resize(s.size() - suffix.size());
        }
    }
    return {s + ".tensors", s + ".meta.json"};
}

void save_lookup_table(const LookupTable& table, const std::filesystem::path& stem) {
    const auto paths = table_paths(stem);
    std::vector<NamedTensor> tensors;
    json entries = json::array();
    for (const auto& e : table.entries()) {
        tensors.push_back({e.name, e.direction.values()});
        entries.push_back({{"name", e.name},
                           {"raw_norm", e.raw_norm},
                           {"source_concepts", e.source_concepts},
                           {"intersectional", e.intersectional}});
    }
    json meta = {{"format_version", kTableFormatVersion},
                 {"encoder_id", table.encoder_id()},
                 {"dim", table.dim()},
                 {"prompt_template", table.prompt_template()},
                 {"created_with_K", table.created_with_k()},
                 {"tensors", paths.tensors.filename().string()},
                 {"entries", entries}};
    save_container(paths.tensors, tensors);
    write_file(paths.metadata, meta.dump(2) + "\n");
}

LookupTable load_lookup_table(const std::filesystem::path& stem) {
    const auto paths = table_paths(stem);
    json meta;
    try {
        meta = json::parse(read_file(paths.metadata));
        if (meta.at("format_version").get<int>() != kTableFormatVersion) {
            throw Error(ErrorCode::CorruptContainer, "unsupported table format_version in " + paths.metadata.string());
        }
    } catch (const json::exception& e) {
        throw Error(ErrorCode::CorruptContainer, paths.metadata.string() + ": " + e.what());
    }
    const auto tensors = load_container(paths.tensors);
    std::map<std::string, const NamedTensor*> by_name;
    for (const auto& t : tensors) {
        by_name[t.name] = &t;
    }

    try {
        const auto encoder_id = meta.at("encoder_id").get<std::string>();
        std::vector<AttributeVector> entries;
        for (const auto& e : meta.at("entries")) {
            const auto name = e.at("name").get<std::string>();
            auto it = by_name.find(name);
            if (it == by_name.end()) {
                throw Error(ErrorCode::CorruptContainer, "metadata names '" + name + "' but the container lacks it");
            }
            entries.push_back({name, DirectionVector(it->second->values, true), e.at("raw_norm").get<double>(),
                               e.at("source_concepts").get<std::vector<std::string>>(),
                               e.at("intersectional").get<bool>(), encoder_id});
        }
        if (entries.size() != tensors.size()) {
            throw Error(ErrorCode::CorruptContainer, "container and metadata disagree on entry count");
        }
        return {encoder_id, meta.at("dim").get<std::size_t>(), meta.at("prompt_template").get<std::string>(),
                meta.at("created_with_K").get<std::size_t>(), std::move(entries)};
    } catch (const json::exception& e) {
        throw Error(ErrorCode::CorruptContainer, paths.metadata.string() + ": " + e.what());
    }
}

} // namespace easteer
