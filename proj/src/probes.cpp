#include "easteer/probes.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <mutex>
#include <set>

#include <json.hpp>

#include "easteer/codec.hpp"
#include "easteer/errors.hpp"
#include "easteer/parallel.hpp"
#include "easteer/sampling.hpp"

namespace easteer {

using nlohmann::ordered_json;

namespace {

struct ImageOutcome {
    std::string image_id;
    ClassifyResult classification;
    VqaResult vqa;
};

ImageOutcome generate_and_score(Adapter& adapter, const std::string& base_prompt, const Embedding& conditioning,
                                std::uint64_t seed, const std::string& concept_name, const ImageParams& params) {
    ImageOutcome out;
    out.image_id = adapter.generate({base_prompt, conditioning, seed, params});
    out.classification = adapter.classify(out.image_id);
    out.vqa = adapter.vqa(out.image_id, concept_name);
    return out;
}

bool cancelled(const ProbeOptions& o) {
    return o.cancel != nullptr && o.cancel->load();
}

std::string category_name(const ClassifyResult& c) {
    return intersection_name(std::string(kRaceCategories[argmax(c.race_probs)]),
                             std::string(kGenderCategories[argmax(c.gender_probs)]));
}

FrequencyTable frequencies(const std::vector<ImageOutcome>& outcomes) {
    FrequencyTable t;
    for (auto race : kRaceCategories) {
        for (auto gender : kGenderCategories) {
            t[intersection_name(std::string(race), std::string(gender))] = 0.0;
        }
    }
    for (const auto& o : outcomes) {
        t[category_name(o.classification)] += 1.0;
    }
    for (auto& [_, v] : t) {
        v /= static_cast<double>(outcomes.size());
    }
    return t;
}

/// Runs `n` images through the adapter; returns them in index order.
std::vector<ImageOutcome> run_images(Adapter& adapter, std::size_t n, const ProbeOptions& options,
                                     const std::function<ImageOutcome(std::size_t)>& one) {
    std::vector<ImageOutcome> out(n);
    parallel_for(n, options.max_in_flight, [&](std::size_t i) {
        if (cancelled(options)) {
            throw Error(ErrorCode::Incomplete, "cancelled");
        }
        out[i] = one(i);
    });
    (void)adapter;
    return out;
}

std::vector<std::string> axis_attributes(const AttributeAxes& axes, const std::string& axis) {
    if (axis == "gender") {
        return axes.gender;
    }
    if (axis == "race") {
        return axes.race;
    }
    if (axis == "intersection") {
        return axes.intersection_names();
    }
    return {};
}

} // namespace

// Orthogonality ----------------------------------------------------------------------

SimilarityMatrix orthogonality_matrix(const LookupTable& table, const std::optional<std::vector<std::string>>& subset) {
    SimilarityMatrix m;
    m.labels = subset ? *subset : table.names();
    if (m.labels.size() < 2) {
        throw Error(ErrorCode::InvalidArgument, "orthogonality needs at least two vectors");
    }
    std::vector<const AttributeVector*> vs;
    for (const auto& l : m.labels) {
        vs.push_back(&table.at(l));
    }
    const auto n = vs.size();
    m.values.assign(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        m.values[i * n + i] = 1.0;
        for (std::size_t j = i + 1; j < n; ++j) {
            const double c = cosine_similarity(vs[i]->direction.span(), vs[j]->direction.span());
            m.values[i * n + j] = c;
            m.values[j * n + i] = c;
        }
    }
    return m;
}

// Composability ------------------------------------------------------------------------

CompositionReport composability_probe(const LookupTable& table, const std::string& race, const std::string& gender,
                                      Adapter* adapter, const std::string& base_concept, std::size_t n,
                                      const ProbeOptions& options) {
    CompositionReport r;
    r.identity = intersection_name(race, gender);
    const auto& intersectional = table.at(r.identity);
    const auto composed = compose_vectors(table.at(race), table.at(gender));
    r.cosine_composed_vs_intersectional = cosine_similarity(composed.span(), intersectional.direction.span());
    if (adapter == nullptr || n == 0) {
        return r;
    }

    r.base_concept = base_concept;
    r.n_images = n;
    const auto prompt = render_prompt(options.prompt_template, base_concept);
    try {
        const auto base = adapter->encode(prompt);
        const Embedding via_composed(add(base.span(), scale(composed.span(), options.alpha)), base.encoder_id());
        const auto via_intersection = compose(base, {{{r.identity, options.alpha}}}, table);
        auto run = [&](const Embedding& e) {
            return run_images(*adapter, n, options, [&](std::size_t i) {
                return generate_and_score(*adapter, prompt, e, image_seed(options.master_seed, i), base_concept,
                                          options.params);
            });
        };
        r.generation_rates = std::pair{frequencies(run(via_composed)), frequencies(run(via_intersection))};
    } catch (const Error& e) {
        r.incomplete = true;
        r.error = e.what();
    }
    return r;
}

// Alpha sweep ----------------------------------------------------------------------------

double attribute_confidence(const ClassifyResult& c, const std::string& attribute) {
    for (std::size_t g = 0; g < kGenderCategories.size(); ++g) {
        if (attribute == kGenderCategories[g]) {
            return c.gender_probs[g];
        }
    }
    for (std::size_t r = 0; r < kRaceCategories.size(); ++r) {
        if (attribute == kRaceCategories[r]) {
            return c.race_probs[r];
        }
        for (std::size_t g = 0; g < kGenderCategories.size(); ++g) {
            if (attribute == intersection_name(std::string(kRaceCategories[r]), std::string(kGenderCategories[g]))) {
                return c.race_probs[r] * c.gender_probs[g];
            }
        }
    }
    throw Error(ErrorCode::InvalidArgument, "attribute '" + attribute + "' has no classifier class");
}

std::vector<double> default_alpha_grid() {
    std::vector<double> out;
    for (int i = 0; i <= 20; ++i) {
        out.push_back(0.25 * i);
    }
    return out;
}

SweepResult alpha_sweep(Adapter& adapter, const LookupTable& table, const std::string& base_concept,
                        const std::string& attribute, const std::vector<double>& alphas, std::size_t n_per_point,
                        const ProbeOptions& options) {
    if (alphas.empty() || !std::is_sorted(alphas.begin(), alphas.end())) {
        throw Error(ErrorCode::InvalidArgument, "alphas must be non-empty and sorted ascending");
    }
    if (n_per_point == 0) {
        throw Error(ErrorCode::InvalidArgument, "n_per_point must be >= 1");
    }
    (void)table.at(attribute);
    (void)attribute_confidence(ClassifyResult{}, attribute);

    SweepResult result{base_concept, attribute, {}, false, {}};
    std::vector<std::uint64_t> seeds;
    for (std::size_t i = 0; i < n_per_point; ++i) {
        seeds.push_back(image_seed(options.master_seed, i));
    }
    const auto prompt = render_prompt(options.prompt_template, base_concept);
    try {
        const auto base = adapter.encode(prompt);
        for (double alpha : alphas) {
            const auto steered = compose(base, {{{attribute, alpha}}}, table);
            const auto outcomes = run_images(adapter, n_per_point, options, [&](std::size_t i) {
                return generate_and_score(adapter, prompt, steered, seeds[i], base_concept, options.params);
            });
            SweepPoint p{alpha, 0.0, 0.0, n_per_point, seeds};
            std::vector<CcsRecord> ccs;
            for (const auto& o : outcomes) {
                p.attribute_confidence += attribute_confidence(o.classification, attribute);
                ccs.push_back(o.vqa);
            }
            p.attribute_confidence /= static_cast<double>(n_per_point);
            p.ccs = ccs_condition(ccs);
            result.points.push_back(std::move(p));
        }
    } catch (const Error& e) {
        result.incomplete = true;
        result.error = e.what();
    }
    return result;
}

// K ablation -----------------------------------------------------------------------------

double AblationRow::gender_fraction(std::size_t category) const {
    return n_images == 0 ? 0.0 : static_cast<double>(gender_counts.at(category)) / static_cast<double>(n_images);
}

AblationReport k_ablation(Adapter& adapter, const std::vector<std::string>& target_concepts,
                          const std::vector<std::vector<std::string>>& k_configs, const std::string& attribute,
                          std::size_t n, const ProbeOptions& options) {
    if (target_concepts.empty() || k_configs.empty()) {
        throw Error(ErrorCode::InvalidArgument, "k_ablation needs targets and at least one configuration");
    }
    const auto axis = axis_attributes(options.axes, attribute);
    std::vector<AttributeRequest> requests;
    if (axis.empty()) {
        requests.push_back({attribute, options.axes.is_intersection(attribute)});
    } else {
        for (const auto& a : axis) {
            requests.push_back({a, options.axes.is_intersection(a)});
        }
    }
    for (const auto& cfg : k_configs) {
        if (cfg.empty()) {
            throw Error(ErrorCode::InvalidArgument, "empty base-concept configuration");
        }
        for (const auto& t : target_concepts) {
            if (std::find(cfg.begin(), cfg.end(), t) != cfg.end()) {
                throw Error(ErrorCode::ProvenanceMismatch, "target '" + t + "' is also a source concept");
            }
        }
    }

    AblationReport report{attribute, {}, false, {}};
    const auto encode = [&](const std::string& p) { return adapter.encode(p); };
    try {
        for (const auto& cfg : k_configs) {
            const auto table =
                build_lookup_table(requests, cfg, options.prompt_template, encode, options.max_in_flight);
            for (const auto& target : target_concepts) {
                const auto prompt = render_prompt(options.prompt_template, target);
                const auto base = adapter.encode(prompt);
                std::vector<std::string> picks(n, attribute);
                if (!axis.empty()) {
                    picks = sample_attributes(AttributeDistribution::uniform(axis), n,
                                              sampling_seed(options.master_seed, target));
                }
                const auto outcomes = run_images(adapter, n, options, [&](std::size_t i) {
                    const auto steered = compose(base, {{{picks[i], options.alpha}}}, table);
                    return generate_and_score(adapter, prompt, steered, image_seed(options.master_seed, i), target,
                                              options.params);
                });
                AblationRow row{target, cfg, table.created_with_k(), n, {}, {}, 0.0};
                std::vector<CcsRecord> ccs;
                for (const auto& o : outcomes) {
                    ++row.gender_counts[argmax(o.classification.gender_probs)];
                    ++row.race_counts[argmax(o.classification.race_probs)];
                    ccs.push_back(o.vqa);
                }
                row.ccs = ccs_condition(ccs);
                report.rows.push_back(std::move(row));
            }
        }
    } catch (const Error& e) {
        if (e.code() == ErrorCode::ProvenanceMismatch || e.code() == ErrorCode::UnknownAttribute) {
            throw;
        }
        report.incomplete = true;
        report.error = e.what();
    }
    return report;
}

// Generalization ---------------------------------------------------------------------------

std::string_view to_string(Method m) noexcept {
    switch (m) {
    case Method::Default: return "default";
    case Method::EAGender: return "EA_g";
    case Method::EAIntersectional: return "EA_i";
    }
    return "default";
}

Method method_from_string(std::string_view s) {
    if (s == "default") {
        return Method::Default;
    }
    if (s == "EA_g") {
        return Method::EAGender;
    }
    if (s == "EA_i") {
        return Method::EAIntersectional;
    }
    throw Error(ErrorCode::ConfigError, "unknown method '" + std::string(s) + "' (expected default, EA_g or EA_i)");
}

std::uint64_t sampling_seed(std::uint64_t master_seed, const std::string& concept_name) {
    return splitmix64(master_seed ^ hash64("sample/" + concept_name));
}

std::string record_key(const GenerationRecord& r) {
    return r.concept_name + "\x1f" + r.method + "\x1f" + std::to_string(r.seed);
}

namespace {

ordered_json classify_json(const ClassifyResult& c) {
    return {{"gender_probs", c.gender_probs}, {"race_probs", c.race_probs}};
}

} // namespace

std::string record_to_json(const GenerationRecord& r) {
    ordered_json j = {{"record_version", kRecordVersion},
                      {"model_id", r.model_id},
                      {"method", r.method},
                      {"concept", r.concept_name},
                      {"index", r.index},
                      {"seed", r.seed},
                      {"attribute", r.attribute},
                      {"alpha", r.alpha},
                      {"base_prompt", r.base_prompt},
                      {"image_id", r.image_id},
                      {"complete", r.complete}};
    if (r.classification) {
        j["classification"] = classify_json(*r.classification);
    }
    if (r.vqa) {
        j["vqa"] = {{"yes_probabilities", r.vqa->yes_probabilities}, {"model_ids", r.vqa->model_ids}};
    }
    if (!r.error.empty()) {
        j["error"] = r.error;
    }
    return j.dump();
}

GenerationRecord record_from_json(std::string_view line) {
    try {
        const auto j = ordered_json::parse(line);
        const auto version = j.at("record_version").get<int>();
        if (version != kRecordVersion) {
            throw Error(ErrorCode::CorruptRecord, "record_version " + std::to_string(version) + " is not supported (expected " +
                                                      std::to_string(kRecordVersion) + ")");
        }
        GenerationRecord r;
        r.model_id = j.at("model_id").get<std::string>();
        r.method = j.at("method").get<std::string>();
        r.concept_name = j.at("concept").get<std::string>();
        r.index = j.at("index").get<std::size_t>();
        r.seed = j.at("seed").get<std::uint64_t>();
        r.attribute = j.at("attribute").get<std::string>();
        r.alpha = j.at("alpha").get<double>();
        r.base_prompt = j.at("base_prompt").get<std::string>();
        r.image_id = j.at("image_id").get<std::string>();
        r.complete = j.at("complete").get<bool>();
        if (j.contains("classification")) {
            ClassifyResult c;
            c.image_id = r.image_id;
            c.gender_probs = j["classification"].at("gender_probs").get<std::array<double, 2>>();
            c.race_probs = j["classification"].at("race_probs").get<std::array<double, 4>>();
            r.classification = c;
        }
        if (j.contains("vqa")) {
            r.vqa = VqaResult{r.image_id, r.concept_name, j["vqa"].at("yes_probabilities").get<std::vector<double>>(),
                              j["vqa"].at("model_ids").get<std::vector<std::string>>()};
        }
        r.error = j.value("error", "");
        if (r.complete && (!r.classification || !r.vqa)) {
            throw Error(ErrorCode::CorruptRecord, "complete record lacks classifier or VQA output");
        }
        return r;
    } catch (const ordered_json::exception& e) {
        throw Error(ErrorCode::CorruptRecord, e.what());
    }
}

void check_split(const GeneralizationSplit& split, const LookupTable* table, bool allow_overlap) {
    if (split.source_concepts.empty() || split.target_concepts.empty()) {
        throw Error(ErrorCode::InvalidArgument, "split needs non-empty source and target sets");
    }
    const std::set<std::string> sources(split.source_concepts.begin(), split.source_concepts.end());
    const std::set<std::string> targets(split.target_concepts.begin(), split.target_concepts.end());
    if (!allow_overlap) {
        for (const auto& t : targets) {
            if (sources.contains(t)) {
                throw Error(ErrorCode::ProvenanceMismatch, "'" + t + "' is both a source and a target concept");
            }
        }
    }
    if (table == nullptr) {
        return;
    }
    for (const auto& c : table->source_concepts()) {
        if (!sources.contains(c)) {
            throw Error(ErrorCode::ProvenanceMismatch, "table was derived from '" + c + "', which is not a split source");
        }
        if (!allow_overlap && targets.contains(c)) {
            throw Error(ErrorCode::ProvenanceMismatch, "table was derived from target concept '" + c + "'");
        }
    }
}

GeneralizationResult generalization_run(Adapter& adapter, const LookupTable* table, const GeneralizationSplit& split,
                                        Method method, double alpha, std::size_t n, const ProbeOptions& options,
                                        bool allow_overlap, const RunHooks& hooks) {
    if (!std::isfinite(alpha)) {
        throw Error(ErrorCode::NonFiniteInput, "alpha is not finite");
    }
    if (method != Method::Default && table == nullptr) {
        throw Error(ErrorCode::InvalidArgument, std::string(to_string(method)) + " needs a lookup table");
    }
    check_split(split, method == Method::Default ? nullptr : table, allow_overlap);

    std::vector<std::string> pool;
    if (method == Method::EAGender) {
        pool = options.axes.gender;
    } else if (method == Method::EAIntersectional) {
        pool = options.axes.intersection_names();
    }
    for (const auto& a : pool) {
        (void)table->at(a);
    }

    const auto model_id = adapter.meta().generator_id;
    const auto method_name = std::string(to_string(method));
    GeneralizationResult result;
    std::mutex mu;

    for (const auto& concept_name : split.target_concepts) {
        const auto prompt = render_prompt(options.prompt_template, concept_name);
        std::vector<std::string> picks(n);
        if (!pool.empty()) {
            picks = sample_attributes(AttributeDistribution::uniform(pool), n,
                                      sampling_seed(options.master_seed, concept_name));
        }
        std::optional<Embedding> base;
        std::vector<GenerationRecord> records(n);
        for (std::size_t i = 0; i < n; ++i) {
            auto& r = records[i];
            r.model_id = model_id;
            r.method = method_name;
            r.concept_name = concept_name;
            r.index = i;
            r.seed = image_seed(options.master_seed, i);
            r.attribute = picks[i];
            r.alpha = pool.empty() ? 0.0 : alpha;
            r.base_prompt = prompt;
        }

        auto task = [&](std::size_t i) {
            auto& r = records[i];
            if (hooks.existing != nullptr) {
                if (auto it = hooks.existing->find(record_key(r)); it != hooks.existing->end() && it->second.complete) {
                    r = it->second;
                    return;
                }
            }
            if (cancelled(options)) {
                r.error = "cancelled";
                return;
            }
            try {
                {
                    std::lock_guard lock(mu);
                    if (!base) {
                        base = adapter.encode(prompt);
                    }
                }
                SteeringSpec spec;
                if (!r.attribute.empty()) {
                    spec.terms.push_back({r.attribute, r.alpha});
                }
                const auto conditioning = table != nullptr ? compose(*base, spec, *table) : *base;
                auto outcome = generate_and_score(adapter, prompt, conditioning, r.seed, concept_name, options.params);
                r.image_id = outcome.image_id;
                r.classification = std::move(outcome.classification);
                r.vqa = std::move(outcome.vqa);
                r.complete = true;
            } catch (const Error& e) {
                r.error = e.what();
            }
            if (hooks.on_record) {
                std::lock_guard lock(mu);
                hooks.on_record(r);
            }
        };
        parallel_for(n, options.max_in_flight, task);

        for (auto& r : records) {
            result.incomplete = result.incomplete || !r.complete;
            result.records.push_back(std::move(r));
        }
    }
    return result;
}

void records_to_report_inputs(std::span<const GenerationRecord> records, std::vector<ImageRecord>& images,
                              std::vector<ClassifyResult>& classifications, std::vector<CcsRecord>& ccs) {
    for (const auto& r : records) {
        if (!r.complete) {
            continue;
        }
        // Qualified by method: an unsteered EA image can equal the default one.
        const auto id = r.method + "/" + r.image_id;
        images.push_back({id, r.model_id, r.method, r.concept_name});
        auto c = *r.classification;
        c.image_id = id;
        classifications.push_back(std::move(c));
        auto v = *r.vqa;
        v.image_id = id;
        v.concept_name = r.concept_name;
        ccs.push_back(std::move(v));
    }
}

// Result documents ----------------------------------------------------------------------

namespace {

std::string num(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) {
        return s;
    }
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') {
            out += '"';
        }
        out += c;
    }
    return out + "\"";
}

} // namespace

std::string matrix_to_json(const SimilarityMatrix& m) {
    ordered_json rows = ordered_json::array();
    for (std::size_t i = 0; i < m.size(); ++i) {
        ordered_json row = ordered_json::array();
        for (std::size_t j = 0; j < m.size(); ++j) {
            row.push_back(m.at(i, j));
        }
        rows.push_back(row);
    }
    ordered_json doc = {{"probe", "orthogonality"}, {"labels", m.labels}, {"cosine", rows}};
    return doc.dump(2) + "\n";
}

std::string matrix_to_csv(const SimilarityMatrix& m) {
    std::string out = "label";
    for (const auto& l : m.labels) {
        out += "," + csv_field(l);
    }
    out += "\n";
    for (std::size_t i = 0; i < m.size(); ++i) {
        out += csv_field(m.labels[i]);
        for (std::size_t j = 0; j < m.size(); ++j) {
            out += "," + num(m.at(i, j));
        }
        out += "\n";
    }
    return out;
}

std::string composition_to_json(const CompositionReport& r) {
    ordered_json doc = {{"probe", "composability"},
                        {"identity", r.identity},
                        {"cosine_composed_vs_intersectional", r.cosine_composed_vs_intersectional}};
    if (r.generation_rates) {
        doc["base_concept"] = r.base_concept;
        doc["n_images"] = r.n_images;
        doc["generation_rates"] = {{"composed", r.generation_rates->first},
                                   {"intersectional", r.generation_rates->second}};
    } else {
        doc["generation_rates"] = nullptr;
        doc["generation_omitted"] = true;
    }
    doc["incomplete"] = r.incomplete;
    if (!r.error.empty()) {
        doc["error"] = r.error;
    }
    return doc.dump(2) + "\n";
}

std::string sweep_to_json(const SweepResult& r) {
    ordered_json points = ordered_json::array();
    for (const auto& p : r.points) {
        points.push_back({{"alpha", p.alpha},
                          {"attribute_confidence", p.attribute_confidence},
                          {"ccs", p.ccs},
                          {"n_images", p.n_images},
                          {"seed_set", p.seed_set}});
    }
    ordered_json doc = {{"probe", "sweep"},
                        {"base_concept", r.base_concept},
                        {"attribute", r.attribute},
                        {"points", points},
                        {"incomplete", r.incomplete}};
    if (!r.error.empty()) {
        doc["error"] = r.error;
    }
    return doc.dump(2) + "\n";
}

std::string sweep_to_csv(const SweepResult& r) {
    std::string out = "alpha,attribute_confidence,ccs,n_images\n";
    for (const auto& p : r.points) {
        out += num(p.alpha) + "," + num(p.attribute_confidence) + "," + num(p.ccs) + "," +
               std::to_string(p.n_images) + "\n";
    }
    return out;
}

std::string ablation_to_json(const AblationReport& r) {
    ordered_json rows = ordered_json::array();
    for (const auto& row : r.rows) {
        rows.push_back({{"target", row.target},
                        {"k_config", row.k_config},
                        {"created_with_K", row.created_with_k},
                        {"n_images", row.n_images},
                        {"gender_counts", row.gender_counts},
                        {"race_counts", row.race_counts},
                        {"male_fraction", row.gender_fraction(0)},
                        {"female_fraction", row.gender_fraction(1)},
                        {"ccs", row.ccs}});
    }
    ordered_json doc = {{"probe", "ablation"}, {"attribute", r.attribute}, {"rows", rows}, {"incomplete", r.incomplete}};
    if (!r.error.empty()) {
        doc["error"] = r.error;
    }
    return doc.dump(2) + "\n";
}

std::string ablation_to_csv(const AblationReport& r) {
    std::string out = "target,K,k_config,n_images,male_fraction,female_fraction,ccs\n";
    for (const auto& row : r.rows) {
        std::string cfg;
        for (const auto& c : row.k_config) {
            cfg += (cfg.empty() ? "" : ";") + c;
        }
        out += csv_field(row.target) + "," + std::to_string(row.created_with_k) + "," + csv_field(cfg) + "," +
               std::to_string(row.n_images) + "," + num(row.gender_fraction(0)) + "," + num(row.gender_fraction(1)) +
               "," + num(row.ccs) + "\n";
    }
    return out;
}

} // namespace easteer
