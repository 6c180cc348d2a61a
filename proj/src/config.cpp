#include "easteer/config.hpp"

#include <cmath>
#include <set>

#include <json.hpp>

#include "easteer/container.hpp"
#include "easteer/errors.hpp"

namespace easteer {

using nlohmann::json;
using nlohmann::ordered_json;

AdapterEndpoint AdapterConfig::endpoint() const {
    AdapterEndpoint e;
    e.base_url = url;
    e.timeout_ms = timeout_ms;
    e.max_in_flight = max_in_flight;
    e.retries = retries;
    e.permissive = permissive;
    e.protocol_version = protocol_version;
    return e;
}

ProbeOptions ExperimentConfig::probe_options() const {
    ProbeOptions o;
    o.prompt_template = prompt_template;
    o.params = image_params;
    o.max_in_flight = adapter.max_in_flight;
    o.master_seed = master_seed;
    o.alpha = alpha;
    o.axes = attributes;
    return o;
}

namespace {

void only_keys(const json& j, std::initializer_list<std::string_view> allowed, const std::string& where) {
    if (!j.is_object()) {
        throw Error(ErrorCode::ConfigError, where + " must be an object");
    }
    for (const auto& [k, _] : j.items()) {
        if (std::find(allowed.begin(), allowed.end(), k) == allowed.end()) {
            throw Error(ErrorCode::ConfigError, "unknown key '" + (where.empty() ? k : where + "." + k) + "'");
        }
    }
}

template <class T>
void take(const json& j, const char* key, T& out) {
    if (j.contains(key)) {
        out = j[key].get<T>();
    }
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
    if (p.empty()) {
        return {};
    }
    std::filesystem::path path(p);
    return path.is_absolute() || base.empty() ? path : (base / path).lexically_normal();
}

void parse_adapter(const json& j, AdapterConfig& a, const std::filesystem::path& base) {
    only_keys(j, {"url", "timeout_ms", "max_in_flight", "retries", "permissive", "protocol_version", "fixtures", "mock"},
              "adapter");
    take(j, "url", a.url);
    take(j, "timeout_ms", a.timeout_ms);
    take(j, "max_in_flight", a.max_in_flight);
    take(j, "retries", a.retries);
    take(j, "permissive", a.permissive);
    take(j, "protocol_version", a.protocol_version);
    a.fixtures = resolve(base, j.value("fixtures", ""));
    a.mock = resolve(base, j.value("mock", ""));
    if (a.timeout_ms <= 0) {
        throw Error(ErrorCode::ConfigError, "adapter.timeout_ms must be > 0");
    }
    if (a.max_in_flight < 1) {
        throw Error(ErrorCode::ConfigError, "adapter.max_in_flight must be >= 1");
    }
    if (a.retries < 1) {
        throw Error(ErrorCode::ConfigError, "adapter.retries must be >= 1");
    }
}

void parse_probes(const json& j, ExperimentConfig& c) {
    only_keys(j, {"orthogonality", "composability", "sweep", "ablation"}, "probes");
    if (j.contains("orthogonality")) {
        const auto& o = j["orthogonality"];
        only_keys(o, {"subset"}, "probes.orthogonality");
        if (o.contains("subset")) {
            c.orthogonality_subset = o["subset"].get<std::vector<std::string>>();
        }
    }
    if (j.contains("composability")) {
        const auto& o = j["composability"];
        only_keys(o, {"race", "gender", "base_concept", "n_images"}, "probes.composability");
        take(o, "race", c.composability.race);
        take(o, "gender", c.composability.gender);
        take(o, "base_concept", c.composability.base_concept);
        take(o, "n_images", c.composability.n_images);
    }
    if (j.contains("sweep")) {
        const auto& o = j["sweep"];
        only_keys(o, {"base_concept", "attribute", "alphas", "n_per_point"}, "probes.sweep");
        take(o, "base_concept", c.sweep.base_concept);
        take(o, "attribute", c.sweep.attribute);
        take(o, "alphas", c.sweep.alphas);
        take(o, "n_per_point", c.sweep.n_per_point);
        if (c.sweep.n_per_point < 1) {
            throw Error(ErrorCode::ConfigError, "probes.sweep.n_per_point must be >= 1");
        }
    }
    if (j.contains("ablation")) {
        const auto& o = j["ablation"];
        only_keys(o, {"targets", "k_configs", "attribute", "n_images"}, "probes.ablation");
        take(o, "targets", c.ablation.targets);
        take(o, "k_configs", c.ablation.k_configs);
        take(o, "attribute", c.ablation.attribute);
        take(o, "n_images", c.ablation.n_images);
    }
}

} // namespace

ExperimentConfig parse_config(std::string_view text, const std::filesystem::path& base_dir) {
    ExperimentConfig c;
    try {
        const auto j = json::parse(text);
        only_keys(j,
                  {"adapter", "table", "attributes", "source_concepts", "target_concepts", "template", "method",
                   "alpha", "n_images", "master_seed", "output_dir", "allow_source_overlap", "image_params", "probes",
                   "compose"},
                  "");
        if (j.contains("adapter")) {
            parse_adapter(j["adapter"], c.adapter, base_dir);
        }
        c.table = resolve(base_dir, j.value("table", ""));
        if (j.contains("attributes")) {
            const auto& a = j["attributes"];
            only_keys(a, {"gender", "race", "intersections", "other"}, "attributes");
            c.attributes = AttributeAxes{};
            take(a, "gender", c.attributes.gender);
            take(a, "race", c.attributes.race);
            take(a, "intersections", c.attributes.intersections);
            take(a, "other", c.attributes.other);
            if (c.attributes.all().empty()) {
                throw Error(ErrorCode::ConfigError, "attributes declares no attribute");
            }
        }
        take(j, "source_concepts", c.source_concepts);
        take(j, "target_concepts", c.target_concepts);
        take(j, "template", c.prompt_template);
        if (j.contains("method")) {
            c.methods.clear();
            const auto& m = j["method"];
            if (m.is_string()) {
                c.methods.push_back(method_from_string(m.get<std::string>()));
            } else {
                for (const auto& s : m) {
                    c.methods.push_back(method_from_string(s.get<std::string>()));
                }
            }
            if (c.methods.empty()) {
                throw Error(ErrorCode::ConfigError, "method list is empty");
            }
        }
        take(j, "alpha", c.alpha);
        take(j, "n_images", c.n_images);
        take(j, "master_seed", c.master_seed);
        if (j.contains("output_dir")) {
            c.output_dir = resolve(base_dir, j["output_dir"].get<std::string>());
        }
        take(j, "allow_source_overlap", c.allow_source_overlap);
        if (j.contains("image_params")) {
            const auto& p = j["image_params"];
            only_keys(p, {"steps", "guidance", "width", "height"}, "image_params");
            take(p, "steps", c.image_params.steps);
            take(p, "guidance", c.image_params.guidance);
            take(p, "width", c.image_params.width);
            take(p, "height", c.image_params.height);
        }
        if (j.contains("probes")) {
            parse_probes(j["probes"], c);
        }
        if (j.contains("compose")) {
            const auto& o = j["compose"];
            only_keys(o, {"base_concept", "terms", "output"}, "compose");
            take(o, "base_concept", c.compose.base_concept);
            c.compose.output = resolve(base_dir, o.value("output", ""));
            for (const auto& t : o.value("terms", json::array())) {
                only_keys(t, {"attribute", "alpha"}, "compose.terms[]");
                c.compose.terms.push_back({t.at("attribute").get<std::string>(), t.at("alpha").get<double>()});
            }
        }
    } catch (const json::exception& e) {
        throw Error(ErrorCode::ConfigError, e.what());
    }

    validate_template(c.prompt_template);
    if (c.n_images < 1) {
        throw Error(ErrorCode::ConfigError, "n_images must be >= 1");
    }
    if (!std::isfinite(c.alpha)) {
        throw Error(ErrorCode::ConfigError, "alpha must be finite");
    }
    if (c.source_concepts.empty()) {
        throw Error(ErrorCode::ConfigError, "source_concepts is empty");
    }
    return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    if (!std::filesystem::is_regular_file(path)) {
        throw Error(ErrorCode::ConfigError, "no config file at " + path.string());
    }
    return parse_config(read_file(path), path.parent_path());
}

std::string config_to_json(const ExperimentConfig& c) {
    std::vector<std::string> methods;
    for (auto m : c.methods) {
        methods.emplace_back(to_string(m));
    }
    ordered_json adapter = {{"url", c.adapter.url},
                            {"timeout_ms", c.adapter.timeout_ms},
                            {"max_in_flight", c.adapter.max_in_flight},
                            {"retries", c.adapter.retries},
                            {"permissive", c.adapter.permissive},
                            {"protocol_version", c.adapter.protocol_version},
                            {"fixtures", c.adapter.fixtures.generic_string()},
                            {"mock", c.adapter.mock.generic_string()}};
    ordered_json terms = ordered_json::array();
    for (const auto& t : c.compose.terms) {
        terms.push_back({{"attribute", t.attribute}, {"alpha", t.alpha}});
    }
    ordered_json orth = ordered_json::object();
    if (c.orthogonality_subset) {
        orth["subset"] = *c.orthogonality_subset;
    }
    ordered_json j = {
        {"adapter", adapter},
        {"table", c.table.generic_string()},
        {"attributes",
         {{"gender", c.attributes.gender},
          {"race", c.attributes.race},
          {"intersections", c.attributes.intersections},
          {"other", c.attributes.other}}},
        {"source_concepts", c.source_concepts},
        {"target_concepts", c.target_concepts},
        {"template", c.prompt_template},
        {"method", methods},
        {"alpha", c.alpha},
        {"n_images", c.n_images},
        {"master_seed", c.master_seed},
        {"output_dir", c.output_dir.generic_string()},
        {"allow_source_overlap", c.allow_source_overlap},
        {"image_params",
         {{"steps", c.image_params.steps},
          {"guidance", c.image_params.guidance},
          {"width", c.image_params.width},
          {"height", c.image_params.height}}},
        {"probes",
         {{"orthogonality", orth},
          {"composability",
           {{"race", c.composability.race},
            {"gender", c.composability.gender},
            {"base_concept", c.composability.base_concept},
            {"n_images", c.composability.n_images}}},
          {"sweep",
           {{"base_concept", c.sweep.base_concept},
            {"attribute", c.sweep.attribute},
            {"alphas", c.sweep.alphas},
            {"n_per_point", c.sweep.n_per_point}}},
          {"ablation",
           {{"targets", c.ablation.targets},
            {"k_configs", c.ablation.k_configs},
            {"attribute", c.ablation.attribute},
            {"n_images", c.ablation.n_images}}}}},
        {"compose",
         {{"base_concept", c.compose.base_concept}, {"terms", terms}, {"output", c.compose.output.generic_string()}}}};
    return j.dump(2) + "\n";
}

} // namespace easteer
