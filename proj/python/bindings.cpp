#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include <json.hpp>

#include "tap/bundle.hpp"
#include "tap/core_math.hpp"
#include "tap/error.hpp"
#include "tap/evaluator.hpp"
#include "tap/pipeline.hpp"
#include "tap/prompt_engine.hpp"
#include "tap/synthetic_space.hpp"
#include "tap/trainer.hpp"

namespace py = pybind11;
using namespace tap;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;
using DoubleArray = py::array_t<double, py::array::c_style | py::array::forcecast>;

Embedding to_vector(const DoubleArray& a) {
    if (a.ndim() != 1) throw Error(ErrorKind::ShapeMismatch, "expected a 1-d array");
    return Embedding(a.data(), a.data() + a.size());
}

DoubleArray to_array(const std::vector<double>& v) {
    DoubleArray out(static_cast<py::ssize_t>(v.size()));
    std::copy(v.begin(), v.end(), out.mutable_data());
    return out;
}

EmbeddingBundle bundle_from(const FloatArray& matrix, std::optional<std::vector<int>> labels,
                            std::vector<std::string> class_names = {}) {
    if (matrix.ndim() != 2) throw Error(ErrorKind::ShapeMismatch, "embedding matrix must be 2-d");
    std::vector<float> data(matrix.data(), matrix.data() + matrix.size());
    return EmbeddingBundle(static_cast<std::uint32_t>(matrix.shape(1)), std::move(data), std::move(labels), {},
                           std::move(class_names));
}

FloatArray matrix_of(const EmbeddingBundle& b) {
    FloatArray out({static_cast<py::ssize_t>(b.count()), static_cast<py::ssize_t>(b.dimension())});
    std::copy(b.matrix().begin(), b.matrix().end(), out.mutable_data());
    return out;
}

py::object json_to_py(const nlohmann::json& doc) { return py::module_::import("json").attr("loads")(doc.dump()); }

nlohmann::json py_to_json(const py::object& obj) {
    return nlohmann::json::parse(py::module_::import("json").attr("dumps")(obj).cast<std::string>());
}

ClassVocabulary vocab_for(const std::vector<std::string>& names, const std::vector<int>& labels) {
    if (!names.empty()) return ClassVocabulary(names);
    int k = 0;
    for (int l : labels) k = std::max(k, l + 1);
    std::vector<std::string> numbered;
    for (int c = 0; c < k; ++c) numbered.push_back("class_" + std::to_string(c));
    return ClassVocabulary(numbered);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Text-only training of zero-shot visual classifiers";

    static py::exception<Error> tap_error(m, "TapError");
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const Error& e) {
            py::set_error(tap_error, e.what());
        }
    });

    m.def("normalize", [](const DoubleArray& v) { return to_array(normalize(to_vector(v))); }, py::arg("v"));
    m.def("cosine_similarity", [](const DoubleArray& a, const DoubleArray& b) {
        return cosine_similarity(to_vector(a), to_vector(b));
    });
    m.def(
        "softmax", [](const DoubleArray& z, double temperature) { return to_array(softmax(to_vector(z), temperature)); },
        py::arg("logits"), py::arg("temperature") = 1.0);
    m.def(
        "zero_shot",
        [](const DoubleArray& image, const DoubleArray& class_embeddings, double temperature) {
            if (class_embeddings.ndim() != 2) throw Error(ErrorKind::ShapeMismatch, "class embeddings must be 2-d");
            std::vector<Embedding> rows;
            const auto k = class_embeddings.shape(0), d = class_embeddings.shape(1);
            for (py::ssize_t c = 0; c < k; ++c) rows.emplace_back(class_embeddings.data(c, 0), class_embeddings.data(c, 0) + d);
            return to_array(zero_shot_probabilities(to_vector(image), ClassTextEmbeddings::from_rows(rows),
                                                    ZeroShotConfig{temperature}));
        },
        py::arg("image"), py::arg("class_embeddings"), py::arg("temperature") = 0.01);

    m.def(
        "render_prompts",
        [](const py::dict& profile, const std::vector<std::string>& classes) {
            const auto prompts = render_prompts(task_profile_from_json(py_to_json(profile)), ClassVocabulary(classes));
            py::list out;
            for (const auto& p : prompts) {
                py::dict d;
                d["prompt_id"] = p.prompt_id;
                d["class_id"] = p.class_id;
                d["class_name"] = p.class_name;
                d["text"] = p.rendered_text;
                out.append(d);
            }
            return out;
        },
        py::arg("profile"), py::arg("classes"));

    m.def(
        "read_bundle",
        [](const std::filesystem::path& path) {
            const auto b = read_bundle(path);
            py::object labels = py::none();
            if (b.has_labels()) labels = py::cast(b.labels());
            return py::make_tuple(matrix_of(b), labels, b.class_names());
        },
        py::arg("path"), "Returns (matrix, labels or None, class_names).");
    m.def(
        "write_bundle",
        [](const std::filesystem::path& path, const FloatArray& matrix, std::optional<std::vector<int>> labels,
           std::vector<std::string> class_names) { write_bundle(bundle_from(matrix, labels, class_names), path); },
        py::arg("path"), py::arg("matrix"), py::arg("labels") = py::none(),
        py::arg("class_names") = std::vector<std::string>{});

    m.def(
        "synthetic_bundle",
        [](int num_classes, int per_class, const std::string& modality, int dimension, double sigma_intra,
           double modality_gap, std::uint64_t seed, const std::string& tag) {
            const SyntheticSpace space(SyntheticSpaceConfig{dimension, num_classes, sigma_intra, modality_gap, seed});
            const auto b = space.encode_all(synthetic_items(num_classes, per_class, tag), modality_from_string(modality));
            return py::make_tuple(matrix_of(b), b.labels());
        },
        py::arg("num_classes") = 10, py::arg("per_class") = 50, py::arg("modality") = "text",
        py::arg("dimension") = 128, py::arg("sigma_intra") = 0.1, py::arg("modality_gap") = 0.0, py::arg("seed") = 0,
        py::arg("tag") = "item");

    py::class_<LinearClassifier>(m, "Classifier")
        .def_property_readonly("dimension", [](const LinearClassifier& c) { return c.dimension; })
        .def_property_readonly("class_names", [](const LinearClassifier& c) { return c.vocab.names(); })
        .def_property_readonly("weights",
                               [](const LinearClassifier& c) {
                                   DoubleArray w({static_cast<py::ssize_t>(c.num_classes()),
                                                  static_cast<py::ssize_t>(c.dimension)});
                                   std::copy(c.weights.begin(), c.weights.end(), w.mutable_data());
                                   return w;
                               })
        .def_property_readonly("bias", [](const LinearClassifier& c) { return to_array(c.bias); })
        .def_property_readonly("loss_history", [](const LinearClassifier& c) { return c.meta.loss_history; })
        .def_property_readonly("final_loss", [](const LinearClassifier& c) { return c.meta.final_loss; })
        .def_property_readonly("warnings", [](const LinearClassifier& c) { return c.meta.warnings; })
        .def("logits", [](const LinearClassifier& c, const DoubleArray& x) {
            return to_array(classifier_logits(c, to_vector(x)));
        })
        .def("predict",
             [](const LinearClassifier& c, const FloatArray& matrix) {
                 const auto b = bundle_from(matrix, std::nullopt);
                 std::vector<int> out;
                 for (std::size_t i = 0; i < b.count(); ++i) {
                     out.push_back(static_cast<int>(predict_class(classifier_logits(c, b.row_embedding(i)))));
                 }
                 return out;
             })
        .def("to_dict", [](const LinearClassifier& c) { return json_to_py(to_json(c)); })
        .def("save", [](const LinearClassifier& c, const std::filesystem::path& p) { save_classifier(c, p); })
        .def_static("load", [](const std::filesystem::path& p) { return load_classifier(p); })
        .def("same_parameters", &LinearClassifier::same_parameters);

    m.def(
        "train",
        [](const FloatArray& matrix, const std::vector<int>& labels, std::vector<std::string> class_names,
           const py::dict& config) {
            const auto vocab = vocab_for(class_names, labels);
            TextDataset ds;
            ds.vocab = vocab;
            for (int l : labels) ds.items.push_back(TextItem{vocab.name(l), l});
            const auto cfg = train_config_from_json(py_to_json(config));
            return train_text_classifier(ds, bundle_from(matrix, labels), cfg);
        },
        py::arg("matrix"), py::arg("labels"), py::arg("class_names") = std::vector<std::string>{},
        py::arg("config") = py::dict(), "Trains the linear head on text embeddings; config keys as in TrainConfig JSON.");

    m.def(
        "evaluate",
        [](const LinearClassifier& clf, const FloatArray& matrix, const std::vector<int>& labels) {
            return json_to_py(to_json(evaluate_classifier(clf, bundle_from(matrix, labels))));
        },
        py::arg("classifier"), py::arg("matrix"), py::arg("labels"));

    m.def(
        "refine",
        [](const LinearClassifier& clf, const FloatArray& unlabeled, double threshold, int steps, double lr) {
            PseudoLabelConfig cfg{threshold, steps, lr};
            return pseudo_label_refine(clf, bundle_from(unlabeled, std::nullopt), cfg);
        },
        py::arg("classifier"), py::arg("unlabeled"), py::arg("threshold") = 0.95, py::arg("steps") = 200,
        py::arg("lr") = 1e-3);

    m.def(
        "render_report",
        [](const py::list& rows, const std::string& format) {
            EvalReport report;
            for (const auto& r : rows) report.rows.push_back(eval_row_from_json(py_to_json(py::reinterpret_borrow<py::object>(r))));
            return render_report(report, report_format_from_string(format));
        },
        py::arg("rows"), py::arg("format") = "table");

    m.def(
        "run_cli",
        [](std::vector<std::string> args) {
            args.insert(args.begin(), "tap");
            std::ostringstream out, err;
            int code = 0;
            {
                py::gil_scoped_release release;
                code = run_cli(args, out, err);
            }
            return py::make_tuple(code, out.str(), err.str());
        },
        py::arg("args"), "Runs a tap subcommand in-process; returns (exit_code, stdout, stderr).");
}
