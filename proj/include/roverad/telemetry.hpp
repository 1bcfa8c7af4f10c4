#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace roverad {

enum class Wheel : std::uint8_t { LF, LM, LR, RF, RM, RR };

inline constexpr std::size_t kWheelCount = 6;
inline constexpr std::array<Wheel, kWheelCount> kWheels{Wheel::LF, Wheel::LM, Wheel::LR,
                                                        Wheel::RF, Wheel::RM, Wheel::RR};

std::string_view wheel_name(Wheel w);
/// Parses "LF".."RR"; throws DataError otherwise.
Wheel parse_wheel(std::string_view name);

/// The 28 sensor channels in CSV column order.
enum class SensorChannel : std::uint8_t {
    CurrentLF, CurrentLM, CurrentLR, CurrentRF, CurrentRM, CurrentRR,
    RateLF, RateLM, RateLR, RateRF, RateRM, RateRR,
    VoltageLF, VoltageLM, VoltageLR, VoltageRF, VoltageRM, VoltageRR,
    AccelX, AccelY, AccelZ,
    RotX, RotY, RotZ,
    BogieLeft, BogieRight,
    DiffLeft, DiffRight,
};

inline constexpr std::size_t kSensorChannelCount = 28;

constexpr std::size_t index_of(SensorChannel c) { return static_cast<std::size_t>(c); }

constexpr SensorChannel current_channel(Wheel w) {
    return static_cast<SensorChannel>(static_cast<std::size_t>(w));
}
constexpr SensorChannel rate_channel(Wheel w) {
    return static_cast<SensorChannel>(kWheelCount + static_cast<std::size_t>(w));
}
constexpr SensorChannel voltage_channel(Wheel w) {
    return static_cast<SensorChannel>(2 * kWheelCount + static_cast<std::size_t>(w));
}

/// True for wheels on the left side of the rover.
constexpr bool is_left(Wheel w) { return static_cast<std::size_t>(w) < 3; }

/// CSV column name, e.g. "current_LF" or "accel_Z".
std::string_view column_name(SensorChannel c);

/// SI unit string for the channel.
std::string_view unit_of(SensorChannel c);

/// Exact CSV header: t, sol, then the 28 sensor columns.
std::span<const std::string> csv_header();

struct TelemetryFrame {
    double t = 0.0;
    std::int64_t sol = 0;
    std::array<double, kSensorChannelCount> values{};

    double operator[](SensorChannel c) const { return values[index_of(c)]; }
    double& operator[](SensorChannel c) { return values[index_of(c)]; }
};

/// Time-ordered 8 Hz telemetry. Validated on construction and immutable afterwards.
class TelemetryStream {
public:
    static constexpr double kSampleRateHz = 8.0;
    static constexpr double kSamplePeriod = 1.0 / kSampleRateHz;
    static constexpr double kSpacingTolerance = 1e-6;

    TelemetryStream() = default;
    /// Throws DataError on non-finite values and OrderingError on bad timestamps/sols.
    explicit TelemetryStream(std::vector<TelemetryFrame> frames);

    const std::vector<TelemetryFrame>& frames() const { return frames_; }
    std::size_t size() const { return frames_.size(); }
    bool empty() const { return frames_.empty(); }
    const TelemetryFrame& operator[](std::size_t i) const { return frames_[i]; }

    /// Last timestamp minus first.
    double span() const;
    /// Frame count times the sample period.
    double duration() const { return static_cast<double>(frames_.size()) * kSamplePeriod; }

private:
    std::vector<TelemetryFrame> frames_;
};

TelemetryStream read_stream(const std::filesystem::path& path);
void write_stream(const TelemetryStream& stream, const std::filesystem::path& path);

namespace detail {
/// Splits one CSV line on commas; no quoting is supported.
std::vector<std::string_view> split_csv_line(std::string_view line);
/// Strict double parse of a whole cell; returns false on junk or non-finite values.
bool parse_finite(std::string_view cell, double& out);
/// Shortest-safe text form with 17 significant digits.
std::string format_double(double v);
}  // namespace detail

}  // namespace roverad
