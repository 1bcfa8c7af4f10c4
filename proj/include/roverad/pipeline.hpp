#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "roverad/detect.hpp"
#include "roverad/features.hpp"
#include "roverad/net.hpp"
#include "roverad/synth.hpp"

namespace roverad {

struct PipelineConfig {
    Variant variant = Variant::Prime;
    WindowSpec window;
    double percentile = 99.9;
    TrainConfig train;
};

struct TrainedArtifacts {
    Autoencoder model;
    MinMaxScaler scaler;
    TrainReport report;
    std::size_t windows = 0;
};

/// derive -> windows -> featurize -> fit scaler -> transform -> train.
TrainedArtifacts train_pipeline(const TelemetryStream& train, const PipelineConfig& config,
                                const EpochObserver& observer = {});

struct Calibration {
    Threshold threshold;
    std::vector<AnomalyScore> scores;
};

/// Scores every training window and takes the nearest-rank percentile.
Calibration calibrate_pipeline(const Autoencoder& model, const MinMaxScaler& scaler, const TelemetryStream& train,
                               const WindowSpec& window, double percentile);

struct Detection {
    std::vector<FlagRecord> flags;
    std::vector<ScoreRow> windows;
};

Detection detect_pipeline(const Autoencoder& model, const MinMaxScaler& scaler, const Threshold& threshold,
                          const TelemetryStream& test, const WindowSpec& window);

struct KindMetrics {
    std::size_t events = 0;
    std::size_t detected = 0;
    std::size_t flags = 0;
    std::optional<double> recall;  // empty when there are no events of this kind
};

struct Metrics {
    std::array<KindMetrics, kAnomalyKinds.size()> per_kind{};
    std::size_t windows = 0;
    std::size_t nominal_windows = 0;
    std::size_t anomalous_windows = 0;
    std::size_t true_positives = 0;   // flagged windows overlapping an event
    std::size_t false_positives = 0;  // flagged windows overlapping none
    std::size_t false_negatives = 0;  // unflagged windows overlapping an event
    std::size_t true_negatives = 0;
    std::optional<double> false_positive_rate;
    std::optional<double> overall_recall;

    const KindMetrics& operator[](AnomalyKind k) const { return per_kind[static_cast<std::size_t>(k)]; }
};

/// A flag is a true positive iff its window overlaps a labeled event. `windows` supplies
/// the full set of scored windows so nominal windows can be counted.
Metrics evaluate(std::span<const ScoreRow> windows, std::span<const FlagRecord> flags,
                 std::span<const AnomalyEvent> events);

std::string metrics_to_json(const Metrics& metrics);

/// Window geometry persisted next to the model so later stages reuse it.
void write_pipeline_json(const PipelineConfig& config, const std::filesystem::path& path);
/// Reads variant and window from pipeline.json into `config`.
void read_pipeline_json(const std::filesystem::path& path, PipelineConfig& config);

}  // namespace roverad
