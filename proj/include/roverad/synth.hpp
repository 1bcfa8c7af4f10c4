#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "roverad/telemetry.hpp"

namespace roverad {

/// Generator defaults for a nominal straight drive. Magnitudes are chosen for clean
/// separation of injected events, not calibrated against flight data.
struct NominalProfile {
    double duration_s = 600.0;
    double start_t = 0.0;
    std::int64_t start_sol = 1;
    /// A new sol starts every this many seconds of drive time.
    double sol_length_s = 1000.0;

    double base_current = 0.5;        // A
    double current_offset_max = 0.05; // per-wheel offset drawn in [-max, max]
    double current_noise = 0.02;      // A
    double bus_voltage = 28.0;        // V
    double voltage_jitter = 0.05;
    double wheel_rate = 0.6;          // rad/s
    double rate_jitter = 0.01;
    double accel_noise_xy = 0.05;     // m/s^2
    double accel_noise_z = 0.08;
    double rotation_noise = 0.005;    // rad/s
    double suspension_step = 1e-4;    // rad per frame
    /// Per-frame pull back toward zero, keeping the walk stationary.
    double suspension_reversion = 1e-3;
    double suspension_clamp = 0.15;   // rad
    /// Seeds the fixed per-wheel current offsets, i.e. the "rover" rather than the drive.
    std::uint64_t rover_seed = 0;

    void validate() const;
};

/// Per-wheel current offsets implied by profile.rover_seed.
std::array<double, kWheelCount> wheel_offsets(const NominalProfile& profile);

enum class AnomalyKind : std::uint8_t { RockDrop, Wheelie, MTSC, HighSlip, IntenseTerrain };
inline constexpr std::array<AnomalyKind, 5> kAnomalyKinds{AnomalyKind::RockDrop, AnomalyKind::Wheelie, AnomalyKind::MTSC,
                                                          AnomalyKind::HighSlip, AnomalyKind::IntenseTerrain};

std::string_view anomaly_name(AnomalyKind k);
AnomalyKind parse_anomaly(std::string_view name);
/// Kinds whose signature targets one wheel.
bool needs_wheel(AnomalyKind k);
double default_duration(AnomalyKind k);

struct AnomalyEvent {
    AnomalyKind kind = AnomalyKind::RockDrop;
    double t0 = 0.0;
    double duration_s = 4.0;
    std::optional<Wheel> wheel;
    double severity = 1.0;

    double end() const { return t0 + duration_s; }
    bool contains(double t) const { return t >= t0 && t < end(); }
    bool overlaps(double start, double stop) const { return start < end() && t0 < stop; }
};

struct LabeledStream {
    TelemetryStream stream;
    std::vector<AnomalyEvent> events;
};

TelemetryStream generate_nominal(const NominalProfile& profile, std::uint64_t seed);

/// Superposes the event's signature onto the frames inside [t0, t0 + duration).
/// Frames outside the interval are returned bit-identical.
TelemetryStream inject(const TelemetryStream& stream, const AnomalyEvent& event, std::uint64_t seed,
                       const NominalProfile& profile = {});

struct DatasetSpec {
    double train_s = 5000.0;
    double test_s = 2000.0;
    NominalProfile profile;
    std::vector<AnomalyEvent> events;
};

struct Dataset {
    TelemetryStream train;
    LabeledStream test;
};

/// Clean training stream plus a test stream carrying the labeled events. Train and test
/// use disjoint child seeds; test sols continue after the training sols.
Dataset make_dataset(const DatasetSpec& spec, std::uint64_t seed);

struct EventCounts {
    std::array<std::size_t, kAnomalyKinds.size()> per_kind{};
    std::size_t total() const;
};

/// Parses "none", "mixed<N>" or "kind=count,..." (kinds: rockdrop, wheelie, mtsc, highslip, intenseterrain).
EventCounts parse_event_counts(std::string_view spec);

/// Spreads events over the test duration, one per equal-length slot with a guard margin
/// so that no window touches two events. Kinds are shuffled; wheels drawn uniformly.
std::vector<AnomalyEvent> schedule_events(const EventCounts& counts, double test_s, double start_t, std::uint64_t seed,
                                          double severity = 1.0);

/// Labels JSON: [{"kind", "t0", "duration", "wheel", "severity"}, ...]
std::string labels_to_json(std::span<const AnomalyEvent> events);
std::vector<AnomalyEvent> labels_from_json(std::string_view text);
void write_labels(std::span<const AnomalyEvent> events, const std::filesystem::path& path);
std::vector<AnomalyEvent> read_labels(const std::filesystem::path& path);

}  // namespace roverad
