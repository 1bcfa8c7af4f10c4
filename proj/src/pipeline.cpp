#include "roverad/pipeline.hpp"

#include <json.hpp>

#include "roverad/error.hpp"
#include "roverad/io.hpp"

namespace roverad {

TrainedArtifacts train_pipeline(const TelemetryStream& train, const PipelineConfig& config,
                                const EpochObserver& observer) {
    config.window.validate();
    const FeatureMask mask(config.variant);
    const auto vectors = featurize_stream(train, config.window, mask);
    if (vectors.size() < 10) {
        throw DataError("training stream yields " + std::to_string(vectors.size()) +
                        " windows; at least 10 are needed");
    }
    auto scaler = MinMaxScaler::fit(vectors);
    std::vector<FeatureVector> scaled;
    scaled.reserve(vectors.size());
    for (const auto& v : vectors) scaled.push_back(scaler.transform(v));

    auto model = build_model(config.variant, config.train.seed);
    auto report = roverad::train(model, to_matrix(scaled), config.train, observer);
    return TrainedArtifacts{std::move(model), std::move(scaler), std::move(report), vectors.size()};
}

Calibration calibrate_pipeline(const Autoencoder& model, const MinMaxScaler& scaler, const TelemetryStream& train,
                               const WindowSpec& window, double percentile) {
    const FeatureMask mask(scaler.variant());
    const auto vectors = featurize_stream(train, window, mask);
    auto scored = score_all(model, scaler, vectors);
    auto threshold = calibrate(std::span<const AnomalyScore>(scored.scores), percentile);
    return Calibration{threshold, std::move(scored.scores)};
}

Detection detect_pipeline(const Autoencoder& model, const MinMaxScaler& scaler, const Threshold& threshold,
                          const TelemetryStream& test, const WindowSpec& window) {
    const FeatureMask mask(scaler.variant());
    const auto vectors = featurize_stream(test, window, mask);
    const auto scored = score_all(model, scaler, vectors);
    Detection out;
    out.flags = flag(scored.scores, threshold, scored.errors, mask);
    out.windows.reserve(scored.scores.size());
    for (const auto& s : scored.scores) {
        out.windows.push_back({s.sol, s.start_t, s.end_t, s.a, s.a > threshold.value});
    }
    return out;
}

Metrics evaluate(std::span<const ScoreRow> windows, std::span<const FlagRecord> flags,
                 std::span<const AnomalyEvent> events) {
    Metrics m;
    for (const auto& e : events) ++m.per_kind[static_cast<std::size_t>(e.kind)].events;

    auto overlapping = [&](double start, double end) -> const AnomalyEvent* {
        for (const auto& e : events) {
            if (e.overlaps(start, end)) return &e;
        }
        return nullptr;
    };

    m.windows = windows.size();
    for (const auto& w : windows) {
        const bool anomalous = overlapping(w.start_t, w.end_t) != nullptr;
        if (anomalous) {
            ++m.anomalous_windows;
            if (!w.flagged) ++m.false_negatives;
        } else {
            ++m.nominal_windows;
            if (!w.flagged) ++m.true_negatives;
        }
    }

    std::vector<bool> detected(events.size(), false);
    for (const auto& f : flags) {
        bool hit = false;
        for (std::size_t i = 0; i < events.size(); ++i) {
            if (events[i].overlaps(f.start_t, f.end_t)) {
                hit = true;
                detected[i] = true;
                ++m.per_kind[static_cast<std::size_t>(events[i].kind)].flags;
            }
        }
        hit ? ++m.true_positives : ++m.false_positives;
    }
    std::size_t total_detected = 0;
    for (std::size_t i = 0; i < events.size(); ++i) {
        if (detected[i]) {
            ++m.per_kind[static_cast<std::size_t>(events[i].kind)].detected;
            ++total_detected;
        }
    }
    for (auto& k : m.per_kind) {
        if (k.events > 0) k.recall = static_cast<double>(k.detected) / static_cast<double>(k.events);
    }
    if (!events.empty()) m.overall_recall = static_cast<double>(total_detected) / static_cast<double>(events.size());
    if (m.nominal_windows > 0) {
        m.false_positive_rate = static_cast<double>(m.false_positives) / static_cast<double>(m.nominal_windows);
    } else if (m.false_positives == 0) {
        m.false_positive_rate = 0.0;
    }
    return m;
}

std::string metrics_to_json(const Metrics& m) {
    auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
    nlohmann::json kinds = nlohmann::json::object();
    for (std::size_t i = 0; i < kAnomalyKinds.size(); ++i) {
        const auto& k = m.per_kind[i];
        kinds[std::string(anomaly_name(kAnomalyKinds[i]))] = {
            {"events", k.events}, {"detected", k.detected}, {"flags", k.flags}, {"recall", opt(k.recall)}};
    }
    nlohmann::json j{{"recall", std::move(kinds)},
                     {"overall_recall", opt(m.overall_recall)},
                     {"false_positive_rate", opt(m.false_positive_rate)},
                     {"windows", m.windows},
                     {"nominal_windows", m.nominal_windows},
                     {"anomalous_windows", m.anomalous_windows},
                     {"confusion",
                      {{"true_positive", m.true_positives},
                       {"false_positive", m.false_positives},
                       {"false_negative", m.false_negatives},
                       {"true_negative", m.true_negatives}}}};
    return j.dump(1) + "\n";
}

void write_pipeline_json(const PipelineConfig& config, const std::filesystem::path& path) {
    nlohmann::json j{{"variant", variant_name(config.variant)},
                     {"window_s", config.window.window_s},
                     {"stride_s", config.window.stride_s},
                     {"sample_rate_hz", config.window.sample_rate_hz}};
    write_text_file(path, j.dump(1) + "\n");
}

void read_pipeline_json(const std::filesystem::path& path, PipelineConfig& config) {
    try {
        const auto j = nlohmann::json::parse(read_text_file(path));
        config.variant = parse_variant(j.at("variant").get<std::string>());
        config.window.window_s = j.at("window_s").get<double>();
        config.window.stride_s = j.at("stride_s").get<double>();
        config.window.sample_rate_hz = j.at("sample_rate_hz").get<double>();
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(path.string() + ": " + e.what());
    }
}

}  // namespace roverad
