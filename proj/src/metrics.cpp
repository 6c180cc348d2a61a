#include "easteer/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <set>
#include <tuple>

#include <json.hpp>

#include "easteer/errors.hpp"

namespace easteer {

using nlohmann::ordered_json;

std::string vqa_question(std::string_view concept_name) {
    std::string q(kVqaQuestionTemplate);
    q.replace(q.find("{concept}"), 9, concept_name);
    return q;
}

double shannon_entropy(std::span<const std::uint64_t> counts, int category_count) {
    if (category_count < 2) {
        throw Error(ErrorCode::InvalidN, "category count must be >= 2, got " + std::to_string(category_count));
    }
    if (counts.size() > static_cast<std::size_t>(category_count)) {
        throw Error(ErrorCode::InvalidArgument, std::to_string(counts.size()) + " categories observed but N = " +
                                                    std::to_string(category_count));
    }
    const double total = std::accumulate(counts.begin(), counts.end(), 0.0,
                                         [](double acc, std::uint64_t c) { return acc + static_cast<double>(c); });
    if (!(total > 0.0)) {
        throw Error(ErrorCode::EmptyCounts, "total count is zero");
    }
    // Summed in sorted order so the result does not depend on category order.
    std::vector<std::uint64_t> sorted(counts.begin(), counts.end());
    std::sort(sorted.begin(), sorted.end());
    double h = 0.0;
    for (auto c : sorted) {
        if (c == 0) {
            continue;
        }
        const double p = static_cast<double>(c) / total;
        h -= p * std::log(p);
    }
    h /= std::log(static_cast<double>(category_count));
    return h <= 0.0 ? 0.0 : std::min(h, 1.0);
}

double shannon_entropy(const AttributeCounts& counts) {
    std::vector<std::uint64_t> v;
    for (const auto& [_, c] : counts.counts) {
        v.push_back(c);
    }
    return shannon_entropy(v, counts.category_count);
}

double ccs_image(const CcsRecord& record) {
    if (record.yes_probabilities.empty()) {
        throw Error(ErrorCode::EmptyEnsemble, "image '" + record.image_id + "' has no ensemble answers");
    }
    if (!record.model_ids.empty() && record.model_ids.size() != record.yes_probabilities.size()) {
        throw Error(ErrorCode::InvalidArgument, "image '" + record.image_id + "': model id count mismatch");
    }
    double sum = 0.0;
    for (double p : record.yes_probabilities) {
        if (!(p >= 0.0 && p <= 1.0)) {
            throw Error(ErrorCode::InvalidArgument, "image '" + record.image_id + "': probability outside [0,1]");
        }
        sum += p;
    }
    return sum / static_cast<double>(record.yes_probabilities.size());
}

double ccs_condition(std::span<const CcsRecord> records) {
    if (records.empty()) {
        throw Error(ErrorCode::EmptyCondition, "no images in condition");
    }
    double sum = 0.0;
    for (const auto& r : records) {
        if (r.concept_name != records.front().concept_name) {
            throw Error(ErrorCode::MixedConcepts,
                        "'" + r.concept_name + "' and '" + records.front().concept_name + "' in one condition");
        }
        sum += ccs_image(r);
    }
    return sum / static_cast<double>(records.size());
}

double quantile(std::vector<double> values, double q) {
    if (values.empty()) {
        throw Error(ErrorCode::EmptySet, "quantile of an empty set");
    }
    std::sort(values.begin(), values.end());
    const double pos = q * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

namespace {

SetStats set_stats(std::span<const CcsRecord> records, const char* label) {
    if (records.empty()) {
        throw Error(ErrorCode::EmptySet, std::string(label) + " set is empty");
    }
    std::vector<double> scores;
    for (const auto& r : records) {
        scores.push_back(ccs_image(r));
    }
    const auto [mn, mx] = std::minmax_element(scores.begin(), scores.end());
    return {scores.size(), quantile(scores, 0.5), quantile(scores, 0.25), quantile(scores, 0.75), *mn, *mx};
}

ordered_json stats_json(const SetStats& s, bool pass) {
    return {{"n", s.n},   {"median", s.median}, {"q1", s.q1}, {"q3", s.q3},
            {"min", s.min}, {"max", s.max},     {"pass", pass}};
}

} // namespace

CcsValidation ccs_validation(std::span<const CcsRecord> real, std::span<const CcsRecord> positive,
                             std::span<const CcsRecord> negative, const CcsThresholds& thresholds) {
    CcsValidation v;
    v.real = set_stats(real, "real");
    v.positive = set_stats(positive, "positive");
    v.negative = set_stats(negative, "negative");
    v.real_pass = v.real.median > thresholds.coherent_median_min;
    v.positive_pass = v.positive.median > thresholds.coherent_median_min;
    v.negative_pass = v.negative.median < thresholds.negative_median_max;
    return v;
}

std::string validation_to_json(const CcsValidation& v, const CcsThresholds& thresholds) {
    ordered_json doc = {
        {"thresholds",
         {{"coherent_median_min", thresholds.coherent_median_min},
          {"negative_median_max", thresholds.negative_median_max}}},
        {"real", stats_json(v.real, v.real_pass)},
        {"positive", stats_json(v.positive, v.positive_pass)},
        {"negative", stats_json(v.negative, v.negative_pass)},
        {"result", v.pass() ? "PASS" : "FAIL"},
    };
    return doc.dump(2) + "\n";
}

std::size_t argmax(std::span<const double> probs) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < probs.size(); ++i) {
        if (probs[i] > probs[best]) {
            best = i;
        }
    }
    return best;
}

ExperimentReport assemble_report(std::span<const ImageRecord> images, std::span<const ClassifyResult> classifications,
                                 std::span<const CcsRecord> ccs_records) {
    if (images.empty()) {
        throw Error(ErrorCode::EmptyCondition, "no image records");
    }
    std::map<std::string, const ClassifyResult*> cls_by_id;
    for (const auto& c : classifications) {
        if (!cls_by_id.emplace(c.image_id, &c).second) {
            throw Error(ErrorCode::CorruptRecord, "duplicate classifier record for image '" + c.image_id + "'");
        }
    }
    std::map<std::string, const CcsRecord*> ccs_by_id;
    for (const auto& c : ccs_records) {
        if (!ccs_by_id.emplace(c.image_id, &c).second) {
            throw Error(ErrorCode::CorruptRecord, "duplicate CCS record for image '" + c.image_id + "'");
        }
    }

    using Key = std::tuple<std::string, std::string, std::string>;
    std::vector<Key> order;
    std::map<Key, std::vector<const ImageRecord*>> groups;
    for (const auto& img : images) {
        Key key{img.model_id, img.method, img.concept_name};
        auto [it, inserted] = groups.try_emplace(key);
        if (inserted) {
            order.push_back(key);
        }
        it->second.push_back(&img);
    }

    ExperimentReport report;
    for (const auto& key : order) {
        ReportRow row{std::get<0>(key), std::get<1>(key), std::get<2>(key)};
        std::vector<CcsRecord> ccs;
        for (const auto* img : groups[key]) {
            auto c = cls_by_id.find(img->image_id);
            if (c == cls_by_id.end()) {
                throw Error(ErrorCode::MissingRecord, "no classifier record for image '" + img->image_id + "'");
            }
            auto v = ccs_by_id.find(img->image_id);
            if (v == ccs_by_id.end()) {
                throw Error(ErrorCode::MissingRecord, "no CCS record for image '" + img->image_id + "'");
            }
            ++row.gender_counts[argmax(c->second->gender_probs)];
            ++row.race_counts[argmax(c->second->race_probs)];
            ccs.push_back(*v->second);
            // The condition is defined by the image's concept even if the VQA record says otherwise.
            ccs.back().concept_name = row.concept_name;
        }
        row.n_images = ccs.size();
        row.h_gender = shannon_entropy(row.gender_counts, 2);
        row.h_race = shannon_entropy(row.race_counts, 4);
        row.ccs = ccs_condition(ccs);
        report.rows.push_back(std::move(row));
    }
    return report;
}

std::string report_to_json(const ExperimentReport& report) {
    ordered_json rows = ordered_json::array();
    for (const auto& r : report.rows) {
        rows.push_back({{"model_id", r.model_id},
                        {"method", r.method},
                        {"concept", r.concept_name},
                        {"H_g", r.h_gender},
                        {"H_r", r.h_race},
                        {"CCS", r.ccs},
                        {"n_images", r.n_images},
                        {"gender_counts", r.gender_counts},
                        {"race_counts", r.race_counts}});
    }
    ordered_json doc = {{"format_version", 1},
                        {"columns", {"H_g", "H_r", "CCS"}},
                        {"gender_categories", kGenderCategories},
                        {"race_categories", kRaceCategories},
                        {"rows", rows}};
    return doc.dump(2) + "\n";
}

ExperimentReport report_from_json(std::string_view text) {
    try {
        const auto doc = ordered_json::parse(text);
        if (doc.at("format_version").get<int>() != 1) {
            throw Error(ErrorCode::CorruptRecord, "unsupported report format_version");
        }
        ExperimentReport report;
        for (const auto& r : doc.at("rows")) {
            ReportRow row;
            row.model_id = r.at("model_id").get<std::string>();
            row.method = r.at("method").get<std::string>();
            row.concept_name = r.at("concept").get<std::string>();
            row.h_gender = r.at("H_g").get<double>();
            row.h_race = r.at("H_r").get<double>();
            row.ccs = r.at("CCS").get<double>();
            row.n_images = r.at("n_images").get<std::size_t>();
            row.gender_counts = r.at("gender_counts").get<std::array<std::uint64_t, 2>>();
            row.race_counts = r.at("race_counts").get<std::array<std::uint64_t, 4>>();
            report.rows.push_back(std::move(row));
        }
        return report;
    } catch (const ordered_json::exception& e) {
        throw Error(ErrorCode::CorruptRecord, std::string("report: ") + e.what());
    }
}

namespace {

std::string fixed(double v, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

} // namespace

std::string report_to_csv(const ExperimentReport& report) {
    std::string out = "model_id,method,concept,H_g,H_r,CCS,n_images\n";
    for (const auto& r : report.rows) {
        out += r.model_id + "," + r.method + "," + r.concept_name + "," + fixed(r.h_gender, 6) + "," +
               fixed(r.h_race, 6) + "," + fixed(r.ccs, 6) + "," + std::to_string(r.n_images) + "\n";
    }
    return out;
}

std::string report_to_markdown(const ExperimentReport& report) {
    std::vector<std::string> concepts;
    std::vector<std::pair<std::string, std::string>> lines;
    std::map<std::tuple<std::string, std::string, std::string>, const ReportRow*> cells;
    for (const auto& r : report.rows) {
        if (std::find(concepts.begin(), concepts.end(), r.concept_name) == concepts.end()) {
            concepts.push_back(r.concept_name);
        }
        std::pair line{r.model_id, r.method};
        if (std::find(lines.begin(), lines.end(), line) == lines.end()) {
            lines.push_back(line);
        }
        cells[{r.model_id, r.method, r.concept_name}] = &r;
    }

    std::string out = "| model | method |";
    std::string rule = "|---|---|";
    for (const auto& c : concepts) {
        out += " " + c + " H_g | " + c + " H_r | " + c + " CCS |";
        rule += "---|---|---|";
    }
    out += "\n" + rule + "\n";
    for (const auto& [model, method] : lines) {
        out += "| " + model + " | " + method + " |";
        for (const auto& c : concepts) {
            auto it = cells.find({model, method, c});
            if (it == cells.end()) {
                out += " - | - | - |";
            } else {
                out += " " + fixed(it->second->h_gender, 2) + " | " + fixed(it->second->h_race, 2) + " | " +
                       fixed(it->second->ccs, 2) + " |";
            }
        }
        out += "\n";
    }
    return out;
}

} // namespace easteer
