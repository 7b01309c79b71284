#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "unetseg/checkpoint.hpp"
#include "unetseg/data.hpp"
#include "unetseg/losses.hpp"
#include "unetseg/metrics.hpp"
#include "unetseg/trainer.hpp"

namespace py = pybind11;
using namespace unetseg;

namespace {

using DoubleArray = py::array_t<double, py::array::c_style | py::array::forcecast>;
using LabelArray = py::array_t<std::int32_t, py::array::c_style | py::array::forcecast>;

// Accepts (h, w), (c, h, w) or (n, c, h, w); lower ranks get leading 1s.
Tensor4 tensor_from_array(const DoubleArray& arr) {
    const py::buffer_info info = arr.request();
    Shape4 shape;
    if (info.ndim == 2) {
        shape = {1, 1, info.shape[0], info.shape[1]};
    } else if (info.ndim == 3) {
        shape = {1, info.shape[0], info.shape[1], info.shape[2]};
    } else if (info.ndim == 4) {
        shape = {info.shape[0], info.shape[1], info.shape[2], info.shape[3]};
    } else {
        throw ShapeError("expected a 2-, 3- or 4-dimensional array");
    }
    Tensor4 t(shape);
    const auto* src = static_cast<const double*>(info.ptr);
    std::copy(src, src + t.size(), t.data());
    return t;
}

py::array tensor_to_array(const Tensor4& t) {
    const Shape4& s = t.shape();
    py::array_t<double> arr({s.n, s.c, s.h, s.w});
    std::copy(t.data(), t.data() + t.size(), arr.mutable_data());
    return arr;
}

LabelMap labels_from_array(const LabelArray& arr) {
    const py::buffer_info info = arr.request();
    LabelMap m;
    if (info.ndim == 2) {
        m = LabelMap(1, info.shape[0], info.shape[1]);
    } else if (info.ndim == 3) {
        m = LabelMap(info.shape[0], info.shape[1], info.shape[2]);
    } else {
        throw ShapeError("expected a 2- or 3-dimensional label array");
    }
    const auto* src = static_cast<const std::int32_t*>(info.ptr);
    std::copy(src, src + m.size(), m.data.begin());
    return m;
}

py::array labels_to_array(const LabelMap& m) {
    py::array_t<std::int32_t> arr({m.n, m.h, m.w});
    std::copy(m.data.begin(), m.data.end(), arr.mutable_data());
    return arr;
}

std::vector<Sample> samples_from_pairs(
    const std::vector<std::pair<DoubleArray, LabelArray>>& pairs) {
    std::vector<Sample> samples;
    samples.reserve(pairs.size());
    for (const auto& [image, mask] : pairs) {
        samples.push_back({tensor_from_array(image), labels_from_array(mask)});
    }
    return samples;
}

py::dict counts_dict(const ConfusionCounts& c) {
    py::dict d;
    d["n_tp"] = c.n_tp;
    d["n_tn"] = c.n_tn;
    d["n_fp"] = c.n_fp;
    d["n_fn"] = c.n_fn;
    return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Encoder-decoder segmentation network with a supervised bottleneck head";

    py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);
    py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<DecodeError>(m, "DecodeError", PyExc_ValueError);
    py::register_exception<NumericDivergence>(m, "NumericDivergenceError", PyExc_RuntimeError);

    py::class_<UNetConfig>(m, "UNetConfig")
        .def(py::init<>())
        .def_readwrite("in_channels", &UNetConfig::in_channels)
        .def_readwrite("num_classes", &UNetConfig::num_classes)
        .def_readwrite("depth", &UNetConfig::depth)
        .def_readwrite("base_channels", &UNetConfig::base_channels)
        .def_readwrite("fc_hidden", &UNetConfig::fc_hidden)
        .def_readwrite("lambda_bottleneck", &UNetConfig::lambda_bottleneck)
        .def_readwrite("input_h", &UNetConfig::input_h)
        .def_readwrite("input_w", &UNetConfig::input_w)
        .def("validate", &UNetConfig::validate);

    py::class_<TrainConfig>(m, "TrainConfig")
        .def(py::init<>())
        .def_readwrite("learning_rate", &TrainConfig::learning_rate)
        .def_readwrite("momentum", &TrainConfig::momentum)
        .def_readwrite("batch_size", &TrainConfig::batch_size)
        .def_readwrite("steps", &TrainConfig::steps)
        .def_readwrite("lambda_bottleneck", &TrainConfig::lambda_bottleneck)
        .def_readwrite("seed", &TrainConfig::seed)
        .def_readwrite("eval_every", &TrainConfig::eval_every)
        .def_readwrite("checkpoint_path", &TrainConfig::checkpoint_path);

    py::class_<Model>(m, "Model")
        .def(py::init<const UNetConfig&, std::uint64_t>(), py::arg("config"), py::arg("seed"))
        .def_property_readonly("config", &Model::config)
        .def_property_readonly("param_count",
                               [](const Model& model) { return model.params().scalar_count(); })
        .def("parameters",
             [](const Model& model) {
                 py::list out;
                 for (const auto& e : model.params()) {
                     out.append(py::make_tuple(e.name, tensor_to_array(e.value)));
                 }
                 return out;
             })
        .def("forward", [](const Model& model, const DoubleArray& x) {
            const ForwardOutput out = model.forward(tensor_from_array(x));
            return py::make_tuple(tensor_to_array(out.seg_logits),
                                  tensor_to_array(out.bottleneck_logits));
        });

    m.def(
        "generate_phantom",
        [](std::uint64_t seed, std::int64_t h, std::int64_t w, const std::string& difficulty) {
            const Sample s = generate_phantom(seed, h, w, parse_difficulty(difficulty));
            return py::make_tuple(tensor_to_array(s.image), labels_to_array(s.mask));
        },
        py::arg("seed"), py::arg("h"), py::arg("w"), py::arg("difficulty") = "easy");

    m.def(
        "downsample_labels",
        [](const LabelArray& mask, std::int64_t factor) {
            return labels_to_array(downsample_labels(labels_from_array(mask), factor));
        },
        py::arg("mask"), py::arg("factor"));

    m.def(
        "generate_dataset",
        [](const std::string& dir, std::int64_t count, std::int64_t h, std::int64_t w,
           const std::string& difficulty, std::uint64_t seed) {
            generate_dataset(dir, count, h, w, parse_difficulty(difficulty), seed);
        },
        py::arg("dir"), py::arg("count"), py::arg("h"), py::arg("w"),
        py::arg("difficulty") = "easy", py::arg("seed") = 0);

    m.def("load_dataset", [](const std::string& manifest_path) {
        const std::vector<Sample> samples = load_dataset(load_manifest(manifest_path));
        py::list out;
        for (const auto& s : samples) {
            out.append(py::make_tuple(tensor_to_array(s.image), labels_to_array(s.mask)));
        }
        return out;
    });

    m.def(
        "l1_loss",
        [](const DoubleArray& pred, const DoubleArray& target) {
            const LossResult r = l1_loss(tensor_from_array(pred), tensor_from_array(target));
            return py::make_tuple(r.value, tensor_to_array(r.grad));
        },
        py::arg("pred"), py::arg("target"));

    m.def(
        "pixelwise_cross_entropy",
        [](const DoubleArray& logits, const LabelArray& labels) {
            const LossResult r =
                pixelwise_cross_entropy(tensor_from_array(logits), labels_from_array(labels));
            return py::make_tuple(r.value, tensor_to_array(r.grad));
        },
        py::arg("logits"), py::arg("labels"));

    py::class_<ConfusionCounts>(m, "ConfusionCounts")
        .def(py::init([](std::int64_t n_tp, std::int64_t n_tn, std::int64_t n_fp,
                         std::int64_t n_fn) {
                 return ConfusionCounts{n_tp, n_tn, n_fp, n_fn};
             }),
             py::arg("n_tp") = 0, py::arg("n_tn") = 0, py::arg("n_fp") = 0, py::arg("n_fn") = 0)
        .def_readwrite("n_tp", &ConfusionCounts::n_tp)
        .def_readwrite("n_tn", &ConfusionCounts::n_tn)
        .def_readwrite("n_fp", &ConfusionCounts::n_fp)
        .def_readwrite("n_fn", &ConfusionCounts::n_fn)
        .def_property_readonly("n_p", &ConfusionCounts::n_p)
        .def_property_readonly("n_n", &ConfusionCounts::n_n);

    m.def("confusion", [](const LabelArray& pred, const LabelArray& gt) {
        return confusion(labels_from_array(pred), labels_from_array(gt));
    });
    m.def("sensitivity", &sensitivity);
    m.def("specificity", &specificity);
    m.def("accuracy", &accuracy);

    m.def(
        "train",
        [](Model& model, const std::vector<std::pair<DoubleArray, LabelArray>>& samples,
           const TrainConfig& cfg) {
            const TrainResult result = train(model, samples_from_pairs(samples), cfg);
            py::list log;
            for (const auto& e : result.log) {
                log.append(py::make_tuple(e.step, e.total, e.l1_term, e.ce_term));
            }
            return log;
        },
        py::arg("model"), py::arg("samples"), py::arg("config"));

    m.def(
        "evaluate",
        [](const Model& model, const std::vector<std::pair<DoubleArray, LabelArray>>& samples) {
            const EvalReport report = evaluate(model, samples_from_pairs(samples));
            py::dict d;
            d["sensitivity"] = report.summary.sensitivity;
            d["specificity"] = report.summary.specificity;
            d["accuracy"] = report.summary.accuracy;
            d["bottleneck_ce"] = report.summary.bottleneck_ce;
            py::list classes;
            for (const auto& c : report.summary.class_counts) classes.append(counts_dict(c));
            d["class_counts"] = classes;
            return d;
        },
        py::arg("model"), py::arg("samples"));

    m.def(
        "gradcheck",
        [](const UNetConfig& cfg, std::uint64_t seed, double eps) {
            const GradCheckReport report = gradcheck(cfg, seed, eps);
            py::dict d;
            d["worst_rel_err"] = report.worst_rel_err;
            py::dict groups;
            for (const auto& g : report.groups) groups[g.name.c_str()] = g.max_rel_err;
            d["groups"] = groups;
            return d;
        },
        py::arg("config"), py::arg("seed") = 0, py::arg("eps") = 1e-5);

    m.def("save_checkpoint", &save_checkpoint, py::arg("path"), py::arg("model"));
    m.def("load_checkpoint", &load_checkpoint, py::arg("path"));

    m.def(
        "save_sample",
        [](const DoubleArray& image, const LabelArray& mask, const std::string& image_path,
           const std::string& mask_path) {
            save_sample({tensor_from_array(image), labels_from_array(mask)}, image_path,
                        mask_path);
        },
        py::arg("image"), py::arg("mask"), py::arg("image_path"), py::arg("mask_path"));

    m.def("load_sample", [](const std::string& image_path, const std::string& mask_path) {
        const Sample s = load_sample(image_path, mask_path);
        return py::make_tuple(tensor_to_array(s.image), labels_to_array(s.mask));
    });

    m.attr("__version__") = "0.1.0";
}
