#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "rgbdseg/container.hpp"
#include "rgbdseg/dataset.hpp"
#include "rgbdseg/layers.hpp"
#include "rgbdseg/metrics.hpp"
#include "rgbdseg/model.hpp"
#include "rgbdseg/pipeline.hpp"
#include "rgbdseg/run_config.hpp"
#include "rgbdseg/superpixel.hpp"
#include "rgbdseg/synth.hpp"
#include "rgbdseg/temporal.hpp"

namespace py = pybind11;
namespace fs = std::filesystem;
using namespace rgbdseg;

namespace {

using DoubleArray = py::array_t<double, py::array::c_style | py::array::forcecast>;
using LabelArray = py::array_t<std::int32_t, py::array::c_style | py::array::forcecast>;

Tensor to_tensor(const DoubleArray& a) {
  Shape shape(a.shape(), a.shape() + a.ndim());
  Tensor t(shape);
  std::copy(a.data(), a.data() + a.size(), t.values().begin());
  return t;
}

py::array_t<double> to_array(const Tensor& t) {
  py::array_t<double> out(std::vector<py::ssize_t>(t.shape().begin(), t.shape().end()));
  std::copy(t.values().begin(), t.values().end(), out.mutable_data());
  return out;
}

LabelMap to_labels(const LabelArray& a) {
  if (a.ndim() != 2) throw ShapeError("label arrays must be 2-D");
  LabelMap m(static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1)));
  std::copy(a.data(), a.data() + a.size(), m.labels.begin());
  return m;
}

py::array_t<std::int32_t> to_array(const LabelMap& m) {
  py::array_t<std::int32_t> out({static_cast<py::ssize_t>(m.height), static_cast<py::ssize_t>(m.width)});
  std::copy(m.labels.begin(), m.labels.end(), out.mutable_data());
  return out;
}

Segmentation to_segmentation(const LabelArray& a) {
  Segmentation seg;
  seg.regions = to_labels(a);
  for (std::int32_t l : seg.regions.labels) {
    if (l < 0) throw DataError("region ids must be non-negative");
    if (static_cast<std::size_t>(l) >= seg.sizes.size()) seg.sizes.resize(static_cast<std::size_t>(l) + 1, 0);
    ++seg.sizes[static_cast<std::size_t>(l)];
  }
  for (std::size_t s : seg.sizes) {
    if (s == 0) throw DataError("region ids must be contiguous");
  }
  return seg;
}

DType parse_dtype(const std::string& name) {
  for (DType d : {DType::f64, DType::f32, DType::u16, DType::u8}) {
    if (name == dtype_name(d)) return d;
  }
  throw ConfigError("unknown dtype " + name);
}

Padding parse_padding(const std::string& name) {
  if (name == "same") return Padding::same;
  if (name == "valid") return Padding::valid;
  throw ConfigError("padding must be 'same' or 'valid'");
}

py::dict summary_dict(const EvaluationSummary& s) {
  py::dict d;
  d["classwise_accuracy"] = classwise_accuracy(s.confusion);
  d["pixel_accuracy_pooled"] = s.pixels.pooled;
  d["pixel_accuracy_mean"] = s.pixels.mean;
  d["class_names"] = s.class_names;
  py::list per_class;
  for (const auto& a : per_class_accuracy(s.confusion)) {
    per_class.append(a ? py::cast(*a) : py::none());
  }
  d["per_class_accuracy"] = per_class;
  return d;
}

}  // namespace

PYBIND11_MODULE(_rgbdseg, m) {
  m.doc() = "RGB-D multiscale convnet scene labelling";

  static py::exception<Error> error(m, "Error", PyExc_RuntimeError);
  py::register_exception<ShapeError>(m, "ShapeError", error.ptr());
  py::register_exception<NumericError>(m, "NumericError", error.ptr());
  py::register_exception<DataError>(m, "DataError", error.ptr());
  py::register_exception<ConfigError>(m, "ConfigError", error.ptr());

  m.def("load_container", [](const fs::path& path) {
    const Container c = load_container(path);
    return py::make_tuple(to_array(c.tensor), std::string(dtype_name(c.dtype)));
  }, py::arg("path"), "Reads an RGDT container as (array, dtype name).");
  m.def("save_container", [](const fs::path& path, const DoubleArray& a, const std::string& dtype) {
    save_container(path, to_tensor(a), parse_dtype(dtype));
  }, py::arg("path"), py::arg("array"), py::arg("dtype") = "f64");

  m.def("load_checkpoint", [](const fs::path& path) {
    const Checkpoint ckpt = Checkpoint::load(path);
    py::dict out;
    for (const auto& [name, c] : ckpt.entries()) out[py::str(name)] = to_array(c.tensor);
    return out;
  }, py::arg("path"));
  m.def("save_checkpoint", [](const fs::path& path, const std::map<std::string, DoubleArray>& entries) {
    Checkpoint ckpt;
    for (const auto& [name, a] : entries) ckpt.put(name, to_tensor(a));
    ckpt.save(path);
  }, py::arg("path"), py::arg("entries"));

  m.def("conv2d", [](const DoubleArray& input, const DoubleArray& kernels, const DoubleArray& bias,
                     const std::string& padding) {
    ConvLayerParams p;
    p.kernels = to_tensor(kernels);
    p.bias = to_tensor(bias);
    return to_array(conv2d_forward(to_tensor(input), p, parse_padding(padding)));
  }, py::arg("input"), py::arg("kernels"), py::arg("bias"), py::arg("padding") = "same");
  m.def("maxpool2x2", [](const DoubleArray& input) { return to_array(maxpool2x2_forward(to_tensor(input)).output); },
        py::arg("input"));

  m.def("segment", [](const DoubleArray& rgb, double k, double sigma, std::size_t min_size) {
    SuperpixelConfig cfg;
    cfg.k = k;
    cfg.sigma = sigma;
    cfg.min_size = min_size;
    return to_array(segment(to_tensor(rgb), cfg).regions);
  }, py::arg("rgb"), py::arg("k") = 300.0, py::arg("sigma") = 0.8, py::arg("min_size") = 20,
        "Graph-based superpixels of a 3 x H x W image in [0, 1].");
  m.def("region_distributions", [](const DoubleArray& dist, const LabelArray& regions) {
    return to_array(region_distributions(to_tensor(dist), to_segmentation(regions)));
  }, py::arg("distributions"), py::arg("regions"));

  py::class_<TemporalSmoother>(m, "TemporalSmoother")
      .def(py::init([](double alpha, double min_overlap) {
             TemporalConfig cfg;
             cfg.alpha = alpha;
             cfg.min_overlap = min_overlap;
             return TemporalSmoother(cfg);
           }),
           py::arg("alpha") = 0.7, py::arg("min_overlap") = 0.3)
      .def("step", [](TemporalSmoother& s, const DoubleArray& region_dists, const LabelArray& regions) {
        return to_array(s.step(to_tensor(region_dists), to_segmentation(regions)));
      }, py::arg("region_distributions"), py::arg("regions"))
      .def("reset", &TemporalSmoother::reset);
  m.def("flicker_fraction", [](const LabelArray& a, const LabelArray& b) {
    return flicker_fraction(to_labels(a), to_labels(b));
  });

  m.def("confusion_matrix", [](const LabelArray& truth, const LabelArray& predicted, std::size_t classes) {
    ConfusionMatrix cm(classes);
    cm.add(to_labels(truth), to_labels(predicted));
    py::array_t<std::uint64_t> out({static_cast<py::ssize_t>(classes), static_cast<py::ssize_t>(classes)});
    auto v = out.mutable_unchecked<2>();
    for (std::size_t t = 0; t < classes; ++t) {
      for (std::size_t p = 0; p < classes; ++p) v(t, p) = cm.at(t, p);
    }
    return out;
  }, py::arg("truth"), py::arg("predicted"), py::arg("classes"));
  m.def("classwise_accuracy", [](const py::array_t<std::uint64_t, py::array::c_style | py::array::forcecast>& a) {
    if (a.ndim() != 2 || a.shape(0) != a.shape(1)) throw ShapeError("confusion matrix must be square");
    const auto k = static_cast<std::size_t>(a.shape(0));
    ConfusionMatrix cm(k);
    auto v = a.unchecked<2>();
    for (std::size_t t = 0; t < k; ++t) {
      for (std::size_t p = 0; p < k; ++p) cm.add(t, p, v(t, p));
    }
    return classwise_accuracy(cm);
  }, py::arg("confusion"));

  m.def("generate_scene", [](std::size_t height, std::size_t width, std::uint64_t seed, std::size_t index,
                             const std::string& layout) {
    SynthConfig cfg;
    cfg.height = height;
    cfg.width = width;
    if (layout == "patches") cfg.layout = SynthLayout::patches;
    else if (layout != "room") throw ConfigError("layout must be 'room' or 'patches'");
    const SynthScene s = generate_scene(cfg, seed, index);
    return py::make_tuple(to_array(s.rgb), to_array(s.depth), to_array(s.labels));
  }, py::arg("height") = 240, py::arg("width") = 320, py::arg("seed") = 1, py::arg("index") = 0,
        py::arg("layout") = "room", "Returns (rgb 3xHxW, depth 1xHxW metres, raw labels HxW).");

  m.def("read_color", [](const fs::path& p) { return to_array(read_color(p)); });
  m.def("read_depth", [](const fs::path& p) { return to_array(read_depth(p)); });
  m.def("read_labels", [](const fs::path& p) { return to_array(read_labels(p)); });
  m.def("write_sample", [](const fs::path& root, const std::string& split, std::size_t index,
                           const DoubleArray& rgb, const DoubleArray& depth, const LabelArray& labels) {
    write_sample(root, split, index, to_tensor(rgb), to_tensor(depth), to_labels(labels));
  }, py::arg("root"), py::arg("split"), py::arg("index"), py::arg("rgb"), py::arg("depth"), py::arg("labels"));

  py::class_<RunConfig>(m, "RunConfig")
      .def(py::init<>())
      .def_static("parse", [](const std::string& text) {
        std::istringstream in(text);
        return RunConfig::parse(in);
      })
      .def_static("load", &RunConfig::load)
      .def("set", &RunConfig::set)
      .def("get", [](const RunConfig& c, const std::string& key) {
        for (const auto& [k, v] : c.entries()) {
          if (k == key) return v;
        }
        throw ConfigError("config: unknown key '" + key + "'");
      })
      .def("entries", &RunConfig::entries)
      .def("dump", &RunConfig::dump)
      .def("validate", &RunConfig::validate);

  m.def("run_synth", [](const RunConfig& c, const fs::path& out) {
    std::ostringstream log;
    run_synth(c, out, log);
    return log.str();
  }, py::arg("config"), py::arg("out_dir"));
  m.def("run_train", [](const RunConfig& c, const fs::path& dataset, const fs::path& checkpoint, bool resume) {
    std::ostringstream log;
    {
      py::gil_scoped_release release;
      run_train(c, dataset, checkpoint, resume, log);
    }
    return log.str();
  }, py::arg("config"), py::arg("dataset"), py::arg("checkpoint"), py::arg("resume") = false,
        "Trains and returns the training log.");
  m.def("run_eval", [](const RunConfig& c, const fs::path& checkpoint, const fs::path& dataset,
                       const std::string& split) {
    std::ostringstream log;
    EvalReport r;
    {
      py::gil_scoped_release release;
      r = run_eval(c, checkpoint, dataset, split, log);
    }
    py::dict out;
    out["convnet"] = summary_dict(r.convnet);
    out["superpixels"] = r.superpixels ? py::object(summary_dict(*r.superpixels)) : py::none();
    out["frame_seconds"] = r.frame_seconds;
    out["text"] = r.text;
    return out;
  }, py::arg("config"), py::arg("checkpoint"), py::arg("dataset"), py::arg("split") = "test");

  py::class_<Model>(m, "Model")
      .def_static("initialize", [](std::array<std::size_t, 4> channels, std::size_t kernel, std::size_t height,
                                   std::size_t width, std::size_t hidden_units, std::size_t classes,
                                   std::uint64_t seed) {
        NetworkConfig net;
        net.channels = channels;
        net.kernel = kernel;
        net.height = height;
        net.width = width;
        return Model::initialize(net, hidden_units, classes, seed);
      }, py::arg("channels") = std::array<std::size_t, 4>{4, 16, 64, 256}, py::arg("kernel") = 7,
                  py::arg("height") = 240, py::arg("width") = 320, py::arg("hidden_units") = kHiddenUnits,
                  py::arg("classes") = 894, py::arg("seed") = 1)
      .def_static("load", &Model::load)
      .def("save", &Model::save)
      .def_property_readonly("num_classes", &Model::num_classes)
      .def_property_readonly("epochs_done", [](const Model& m) { return m.epochs_done; })
      .def_property_readonly("frame_size", [](const Model& m) {
        return py::make_tuple(m.network.height, m.network.width);
      })
      .def("label", [](const Model& model, const DoubleArray& rgb, const DoubleArray& depth, bool superpixels) {
        InferenceOptions options;
        options.superpixels = superpixels;
        const Tensor c = to_tensor(rgb), d = to_tensor(depth);
        FrameResult r;
        {
          py::gil_scoped_release release;
          r = label_frame(model, prepare_frame(model, c, d, options), options);
        }
        py::dict out;
        out["labels"] = to_array(r.labels);
        out["convnet"] = to_array(r.convnet);
        out["distributions"] = to_array(r.distributions);
        out["seconds"] = r.timings.total;
        return out;
      }, py::arg("rgb"), py::arg("depth"), py::arg("superpixels") = true,
           "Labels one frame: rgb 3xHxW in [0, 1], depth 1xHxW in metres.");
}
