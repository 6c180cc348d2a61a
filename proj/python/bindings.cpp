#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "easteer/benchmark.hpp"
#include "easteer/cli.hpp"
#include "easteer/errors.hpp"
#include "easteer/metrics.hpp"
#include "easteer/mock.hpp"
#include "easteer/probes.hpp"
#include "easteer/sampling.hpp"
#include "easteer/steering.hpp"
#include "easteer/tensor.hpp"

namespace py = pybind11;
using namespace easteer;

namespace {

std::vector<CcsRecord> to_records(const std::vector<std::vector<double>>& images) {
    std::vector<CcsRecord> out;
    for (std::size_t i = 0; i < images.size(); ++i) {
        out.push_back({"img" + std::to_string(i), "concept", images[i], {}});
    }
    return out;
}

py::dict set_stats(const SetStats& s) {
    py::dict d;
    d["n"] = s.n;
    d["median"] = s.median;
    d["q1"] = s.q1;
    d["q3"] = s.q3;
    d["min"] = s.min;
    d["max"] = s.max;
    return d;
}

} // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "easteer native core";

    static py::exception<Error> error(m, "EasteerError");
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) {
                std::rethrow_exception(p);
            }
        } catch (const Error& e) {
            py::set_error(error, e.what());
        }
    });

    m.attr("DEFAULT_TEMPLATE") = std::string(kDefaultTemplate);

    // Vector algebra
    m.def("normalize", [](const std::vector<float>& v) { return normalize(v).values(); }, py::arg("v"));
    m.def("cosine_similarity",
          [](const std::vector<float>& a, const std::vector<float>& b) { return cosine_similarity(a, b); },
          py::arg("a"), py::arg("b"));

    // Prompts and derivation
    m.def("render_prompt",
          [](const std::string& tmpl, const std::string& concept_name, const std::string& attribute) {
              return render_prompt(tmpl, concept_name, attribute);
          },
          py::arg("template"), py::arg("concept"), py::arg("attribute") = "");
    m.def(
        "derive_attribute_vector",
        [](const std::vector<std::pair<std::vector<float>, std::vector<float>>>& pairs, const std::string& name) {
            std::vector<EmbeddingPair> ps;
            for (std::size_t i = 0; i < pairs.size(); ++i) {
                ps.push_back({"c" + std::to_string(i), Embedding(pairs[i].first, "py"), Embedding(pairs[i].second, "py")});
            }
            const auto v = derive_attribute_vector(ps, name);
            return std::pair{v.direction.values(), v.raw_norm};
        },
        py::arg("pairs"), py::arg("name") = "attribute",
        "pairs: list of (base, attributed) embeddings. Returns (unit direction, raw norm).");

    py::class_<LookupTable>(m, "LookupTable")
        .def_static("load", &load_lookup_table, py::arg("stem"))
        .def("save", [](const LookupTable& t, const std::filesystem::path& stem) { save_lookup_table(t, stem); },
             py::arg("stem"))
        .def("names", &LookupTable::names)
        .def("vector", [](const LookupTable& t, const std::string& name) { return t.at(name).direction.values(); })
        .def("__contains__", &LookupTable::contains)
        .def("__len__", &LookupTable::size)
        .def_property_readonly("dim", &LookupTable::dim)
        .def_property_readonly("encoder_id", &LookupTable::encoder_id)
        .def_property_readonly("created_with_k", &LookupTable::created_with_k)
        .def_property_readonly("source_concepts", &LookupTable::source_concepts)
        .def(
            "compose",
            [](const LookupTable& t, const std::vector<float>& base,
               const std::vector<std::pair<std::string, double>>& terms) {
                SteeringSpec spec;
                for (const auto& [a, alpha] : terms) {
                    spec.terms.push_back({a, alpha});
                }
                return compose(Embedding(base, t.encoder_id()), spec, t).values();
            },
            py::arg("base"), py::arg("terms"))
        .def("orthogonality",
             [](const LookupTable& t, std::optional<std::vector<std::string>> subset) {
                 const auto mat = orthogonality_matrix(t, subset);
                 std::vector<std::vector<double>> rows(mat.size(), std::vector<double>(mat.size()));
                 for (std::size_t i = 0; i < mat.size(); ++i) {
                     for (std::size_t j = 0; j < mat.size(); ++j) {
                         rows[i][j] = mat.at(i, j);
                     }
                 }
                 return std::pair{mat.labels, rows};
             },
             py::arg("subset") = py::none())
        .def("composability",
             [](const LookupTable& t, const std::string& race, const std::string& gender) {
                 return composability_probe(t, race, gender, nullptr, "", 0, {}).cosine_composed_vs_intersectional;
             },
             py::arg("race"), py::arg("gender"));

    m.def(
        "build_table_from_mock",
        [](const std::filesystem::path& world, const std::vector<std::string>& sources, const std::string& tmpl) {
            MockAdapter mock(MockWorld::load(world));
            const auto requests = attribute_requests(AttributeAxes::demographic());
            return build_lookup_table(requests, sources, tmpl, [&](const std::string& p) { return mock.encode(p); }, 1);
        },
        py::arg("world"), py::arg("sources"), py::arg("template") = std::string(kDefaultTemplate),
        "Derive the 14-entry demographic table from a mock world file.");

    // Sampling
    m.def(
        "sample_attributes",
        [](const std::map<std::string, double>& weights, std::size_t n, std::uint64_t seed) {
            return sample_attributes(AttributeDistribution(weights), n, seed);
        },
        py::arg("weights"), py::arg("n"), py::arg("seed"));
    m.def("image_seed", &image_seed, py::arg("master_seed"), py::arg("index"));
    m.def("sampling_seed", &sampling_seed, py::arg("master_seed"), py::arg("concept"));

    // Metrics
    m.def(
        "shannon_entropy",
        [](const std::vector<std::uint64_t>& counts, int n) { return shannon_entropy(counts, n); },
        py::arg("counts"), py::arg("category_count"));
    m.def(
        "ccs_image", [](const std::vector<double>& yes) { return ccs_image({"img", "concept", yes, {}}); },
        py::arg("yes_probabilities"));
    m.def(
        "ccs_condition", [](const std::vector<std::vector<double>>& images) { return ccs_condition(to_records(images)); },
        py::arg("images"));
    m.def(
        "ccs_validation",
        [](const std::vector<std::vector<double>>& real, const std::vector<std::vector<double>>& positive,
           const std::vector<std::vector<double>>& negative) {
            const auto v = ccs_validation(to_records(real), to_records(positive), to_records(negative));
            py::dict d;
            d["real"] = set_stats(v.real);
            d["positive"] = set_stats(v.positive);
            d["negative"] = set_stats(v.negative);
            d["real_pass"] = v.real_pass;
            d["positive_pass"] = v.positive_pass;
            d["negative_pass"] = v.negative_pass;
            d["pass"] = v.pass();
            return d;
        },
        py::arg("real"), py::arg("positive"), py::arg("negative"));

    // Runs
    m.def(
        "report_json",
        [](const std::filesystem::path& dir) { return report_to_json(report_from_records(collect_records(dir))); },
        py::arg("records_dir"), "Rebuild the report document from a run's raw records.");
    m.def(
        "run_cli",
        [](std::vector<std::string> args) {
            args.insert(args.begin(), "easteer");
            py::gil_scoped_release release;
            return run_cli(args);
        },
        py::arg("args"), "Run the command-line tool in-process; returns the exit code.");
}
