#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "roverad/cli.hpp"
#include "roverad/derive.hpp"
#include "roverad/detect.hpp"
#include "roverad/error.hpp"
#include "roverad/features.hpp"
#include "roverad/net.hpp"
#include "roverad/pipeline.hpp"
#include "roverad/synth.hpp"
#include "roverad/telemetry.hpp"

namespace py = pybind11;
using namespace roverad;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

constexpr std::size_t kStreamColumns = 2 + kSensorChannelCount;

// Streams cross the boundary as (frames, 30) arrays: t, sol, then the sensor columns.
TelemetryStream to_stream(const Array& a) {
    if (a.ndim() != 2 || static_cast<std::size_t>(a.shape(1)) != kStreamColumns) {
        throw DataError("stream array must have shape (n, " + std::to_string(kStreamColumns) + ")");
    }
    const auto r = a.unchecked<2>();
    std::vector<TelemetryFrame> frames(static_cast<std::size_t>(a.shape(0)));
    for (py::ssize_t i = 0; i < a.shape(0); ++i) {
        auto& f = frames[static_cast<std::size_t>(i)];
        f.t = r(i, 0);
        f.sol = static_cast<std::int64_t>(r(i, 1));
        for (std::size_t c = 0; c < kSensorChannelCount; ++c) f.values[c] = r(i, static_cast<py::ssize_t>(c + 2));
    }
    return TelemetryStream(std::move(frames));
}

Array from_stream(const TelemetryStream& s) {
    Array out({static_cast<py::ssize_t>(s.size()), static_cast<py::ssize_t>(kStreamColumns)});
    auto w = out.mutable_unchecked<2>();
    for (std::size_t i = 0; i < s.size(); ++i) {
        const auto& f = s[i];
        const auto row = static_cast<py::ssize_t>(i);
        w(row, 0) = f.t;
        w(row, 1) = static_cast<double>(f.sol);
        for (std::size_t c = 0; c < kSensorChannelCount; ++c) w(row, static_cast<py::ssize_t>(c + 2)) = f.values[c];
    }
    return out;
}

Array from_rows(std::size_t rows, std::size_t cols, const double* data) {
    Array out({static_cast<py::ssize_t>(rows), static_cast<py::ssize_t>(cols)});
    std::copy(data, data + rows * cols, out.mutable_data());
    return out;
}

WindowSpec window_spec(double window_s, double stride_s) {
    WindowSpec w;
    w.window_s = window_s;
    w.stride_s = stride_s;
    w.validate();
    return w;
}

py::list labels_to_py(const std::vector<AnomalyEvent>& events) {
    return py::module_::import("json").attr("loads")(labels_to_json(events));
}

py::dict flag_to_py(const FlagRecord& f) {
    py::list contributors;
    for (const auto& c : f.contributors) {
        contributors.append(py::dict(py::arg("feature") = c.feature, py::arg("index") = c.index,
                                     py::arg("magnitude") = c.magnitude));
    }
    return py::dict(py::arg("sol") = f.sol, py::arg("start_t") = f.start_t, py::arg("end_t") = f.end_t,
                    py::arg("score") = f.score, py::arg("threshold") = f.threshold,
                    py::arg("contributors") = contributors);
}

/// Model, scaler and (once calibrated) threshold for one variant.
struct Detector {
    PipelineConfig config;
    Autoencoder model;
    MinMaxScaler scaler;
    std::optional<Threshold> threshold;

    std::vector<FeatureVector> features(const Array& stream) const {
        return featurize_stream(to_stream(stream), config.window, FeatureMask(config.variant));
    }

    const Threshold& require_threshold() const {
        if (!threshold) throw ArtifactError("detector is not calibrated");
        return *threshold;
    }
};

Detector fit_detector(const Array& stream, const std::string& variant, std::size_t epochs, std::size_t batch_size,
                      std::uint64_t seed, double window_s, double stride_s) {
    PipelineConfig cfg;
    cfg.variant = parse_variant(variant);
    cfg.window = window_spec(window_s, stride_s);
    cfg.train.epochs = epochs;
    cfg.train.batch_size = batch_size;
    cfg.train.seed = seed;
    const auto s = to_stream(stream);
    py::gil_scoped_release unlock;
    auto trained = train_pipeline(s, cfg);
    return Detector{cfg, std::move(trained.model), std::move(trained.scaler), std::nullopt};
}

Detector load_detector(const std::filesystem::path& dir) {
    Detector d;
    read_pipeline_json(dir / artifact::kPipeline, d.config);
    d.model = load_model(dir / artifact::kModel, d.config.variant);
    d.scaler = MinMaxScaler::load(dir / artifact::kScaler);
    if (d.scaler.variant() != d.config.variant || d.scaler.size() != d.model.input_dim()) {
        throw ArtifactError("scaler does not match model");
    }
    if (std::filesystem::exists(dir / artifact::kThreshold)) d.threshold = Threshold::load(dir / artifact::kThreshold);
    return d;
}

void save_detector(const Detector& d, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    write_pipeline_json(d.config, dir / artifact::kPipeline);
    save_model(d.model, dir / artifact::kModel);
    d.scaler.save(dir / artifact::kScaler);
    if (d.threshold) d.threshold->save(dir / artifact::kThreshold);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Rover telemetry autoencoder anomaly detection";

    auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
    py::register_exception<SchemaError>(m, "SchemaError", base.ptr());
    auto data = py::register_exception<DataError>(m, "DataError", base.ptr());
    py::register_exception<OrderingError>(m, "OrderingError", data.ptr());
    py::register_exception<ArtifactError>(m, "ArtifactError", base.ptr());
    py::register_exception<TrainingError>(m, "TrainingError", base.ptr());
    py::register_exception<IoError>(m, "IoError", base.ptr());
    py::register_exception<UsageError>(m, "UsageError", base.ptr());

    m.attr("SENSOR_CHANNELS") = kSensorChannelCount;
    m.attr("DERIVED_CHANNELS") = kDerivedChannelCount;

    m.def("csv_header", [] {
        const auto h = csv_header();
        return std::vector<std::string>(h.begin(), h.end());
    });
    m.def("derived_channel_names", [] {
        std::vector<std::string> out;
        for (const auto& c : derived_channels()) out.push_back(c.label());
        return out;
    });
    m.def("feature_names", [](const std::string& variant) { return FeatureMask(parse_variant(variant)).names(); },
          py::arg("variant") = "prime");

    m.def("read_stream", [](const std::filesystem::path& p) { return from_stream(read_stream(p)); }, py::arg("path"));
    m.def("write_stream", [](const Array& a, const std::filesystem::path& p) { write_stream(to_stream(a), p); },
          py::arg("stream"), py::arg("path"));

    m.def(
        "generate_nominal",
        [](double duration_s, std::uint64_t seed, std::uint64_t rover_seed) {
            NominalProfile profile;
            profile.duration_s = duration_s;
            profile.rover_seed = rover_seed;
            return from_stream(generate_nominal(profile, seed));
        },
        py::arg("duration_s"), py::arg("seed") = 0, py::arg("rover_seed") = 0);

    m.def(
        "make_dataset",
        [](double train_s, double test_s, const std::string& events, std::uint64_t seed, double severity) {
            DatasetSpec spec;
            spec.train_s = train_s;
            spec.test_s = test_s;
            spec.events = schedule_events(parse_event_counts(events), test_s, 0.0, seed, severity);
            const auto ds = make_dataset(spec, seed);
            return py::make_tuple(from_stream(ds.train), from_stream(ds.test.stream), labels_to_py(ds.test.events));
        },
        py::arg("train_s"), py::arg("test_s"), py::arg("events") = "none", py::arg("seed") = 0,
        py::arg("severity") = 1.0,
        "Returns (train, test, labels). Streams are (frames, 30) arrays; labels is a list of dicts.");

    m.def(
        "derive",
        [](const Array& a) {
            const auto d = derive_stream(to_stream(a));
            return from_rows(d.size(), kDerivedChannelCount, d.data().data());
        },
        py::arg("stream"), "Per-frame 46-channel derived signals.");

    m.def("stats7",
          [](const std::vector<double>& xs) {
              const auto s = stats7(xs);
              return std::vector<double>(s.begin(), s.end());
          },
          py::arg("samples"), "mean, std, kurt, skew, min, max, median");

    m.def(
        "featurize",
        [](const Array& a, const std::string& variant, double window_s, double stride_s) {
            const auto mask = FeatureMask(parse_variant(variant));
            const auto vs = featurize_stream(to_stream(a), window_spec(window_s, stride_s), mask);
            Array out({static_cast<py::ssize_t>(vs.size()), static_cast<py::ssize_t>(mask.size())});
            double* dst = out.mutable_data();
            for (const auto& v : vs) dst = std::copy(v.values.begin(), v.values.end(), dst);
            return out;
        },
        py::arg("stream"), py::arg("variant") = "prime", py::arg("window_s") = 4.0, py::arg("stride_s") = 1.0);

    m.def(
        "nearest_rank",
        [](const std::vector<double>& scores, double percentile) { return calibrate(scores, percentile).value; },
        py::arg("scores"), py::arg("percentile") = 99.9);

    m.def(
        "run_cli",
        [](std::vector<std::string> args) {
            args.insert(args.begin(), "roverad");
            std::ostringstream out, err;
            int code = 0;
            {
                py::gil_scoped_release unlock;
                code = run_cli(args, out, err);
            }
            return py::make_tuple(code, out.str(), err.str());
        },
        py::arg("args"), "Runs the command line in-process. Returns (exit_code, stdout, stderr).");

    py::class_<Detector>(m, "Detector")
        .def_static("fit", &fit_detector, py::arg("stream"), py::arg("variant") = "prime", py::arg("epochs") = 200,
                    py::arg("batch_size") = 256, py::arg("seed") = 42, py::arg("window_s") = 4.0,
                    py::arg("stride_s") = 1.0)
        .def_static("load", &load_detector, py::arg("directory"))
        .def("save", &save_detector, py::arg("directory"))
        .def_property_readonly("variant", [](const Detector& d) { return std::string(variant_name(d.config.variant)); })
        .def_property_readonly("dims",
                               [](const Detector& d) {
                                   std::vector<std::size_t> dims;
                                   for (const auto& l : d.model.layers()) dims.push_back(l.out_dim());
                                   return dims;
                               })
        .def_property_readonly("threshold",
                               [](const Detector& d) -> std::optional<double> {
                                   if (!d.threshold) return std::nullopt;
                                   return d.threshold->value;
                               })
        .def(
            "scores",
            [](const Detector& d, const Array& stream) {
                const auto scored = score_all(d.model, d.scaler, d.features(stream));
                py::array_t<double> out(static_cast<py::ssize_t>(scored.scores.size()));
                auto w = out.mutable_unchecked<1>();
                for (std::size_t i = 0; i < scored.scores.size(); ++i) w(static_cast<py::ssize_t>(i)) = scored.scores[i].a;
                return out;
            },
            py::arg("stream"))
        .def(
            "calibrate",
            [](Detector& d, const Array& stream, double percentile) {
                const auto c = calibrate_pipeline(d.model, d.scaler, to_stream(stream), d.config.window, percentile);
                d.threshold = c.threshold;
                d.config.percentile = percentile;
                return c.threshold.value;
            },
            py::arg("stream"), py::arg("percentile") = 99.9)
        .def(
            "detect",
            [](const Detector& d, const Array& stream) {
                const auto det =
                    detect_pipeline(d.model, d.scaler, d.require_threshold(), to_stream(stream), d.config.window);
                py::list out;
                for (const auto& f : det.flags) out.append(flag_to_py(f));
                return out;
            },
            py::arg("stream"), "Flagged windows as dicts with sol, start_t, end_t, score and contributors.");
}
