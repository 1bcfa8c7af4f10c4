#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "roverad/telemetry.hpp"

namespace roverad {

/// Signal kinds of the 46-channel derived stream.
enum class SignalKind : std::uint8_t {
    Current, CurrentDev, Rate, Voltage, Power, PowerDev,
    AccelX, AccelY, AccelZ, RotX, RotY, RotZ,
    BogieLeft, BogieRight, DiffLeft, DiffRight,
};

inline constexpr std::size_t kPerWheelSignals = 6;
inline constexpr std::size_t kDerivedChannelCount = 46;

/// One of the 46 derived channels. Canonical index: wheel-major block of
/// (C, CD, Rate, U, P, PD) for LF..RR, then accel X/Y/Z, rot X/Y/Z, bogie L/R, diff L/R.
class DerivedChannel {
public:
    constexpr DerivedChannel() = default;
    static DerivedChannel from_index(std::size_t index);
    static DerivedChannel wheel_signal(SignalKind kind, Wheel wheel);
    static DerivedChannel body(SignalKind kind);

    constexpr std::size_t index() const { return index_; }
    SignalKind kind() const;
    /// Only meaningful for per-wheel kinds.
    Wheel wheel() const;
    bool is_wheel_signal() const { return index_ < kWheelCount * kPerWheelSignals; }
    bool is_acceleration() const;

    /// Report label, e.g. "C[LF]", "PD[RR]", "accel[Z]", "bogie[L]".
    std::string label() const;
    /// CSV column name, e.g. "current_LF", "pdev_RR", "accel_Z".
    std::string column() const;

    friend constexpr bool operator==(DerivedChannel, DerivedChannel) = default;

private:
    explicit constexpr DerivedChannel(std::size_t i) : index_(i) {}
    std::size_t index_ = 0;
};

/// All 46 channels in canonical order.
std::span<const DerivedChannel> derived_channels();

/// Sensor source of a channel copied straight from telemetry; false for computed channels.
bool sensor_source(DerivedChannel ch, SensorChannel& out);

/// P = I * U.
constexpr double power(double current, double voltage) { return current * voltage; }

double mean_over_wheels(std::span<const double, kWheelCount> values);

/// |x_i - mean(x)| for each wheel. Serves both current and power deviation.
std::array<double, kWheelCount> deviation(std::span<const double, kWheelCount> values);

/// Row-major (frames x 46) matrix with timestamps and sols of the source stream.
class DerivedStream {
public:
    static constexpr double kSampleRateHz = TelemetryStream::kSampleRateHz;

    DerivedStream() = default;
    DerivedStream(std::vector<double> t, std::vector<std::int64_t> sol, std::vector<double> data);

    std::size_t size() const { return t_.size(); }
    bool empty() const { return t_.empty(); }
    double t(std::size_t frame) const { return t_[frame]; }
    std::int64_t sol(std::size_t frame) const { return sol_[frame]; }
    double at(std::size_t frame, DerivedChannel ch) const { return data_[frame * kDerivedChannelCount + ch.index()]; }
    std::span<const double> row(std::size_t frame) const {
        return {data_.data() + frame * kDerivedChannelCount, kDerivedChannelCount};
    }
    std::span<const double> data() const { return data_; }

private:
    std::vector<double> t_;
    std::vector<std::int64_t> sol_;
    std::vector<double> data_;
};

/// Computes per-frame powers and deviations and assembles the 46-channel stream.
DerivedStream derive_stream(const TelemetryStream& stream);

/// Optional CSV dump: t, sol, then one column per derived channel.
void write_derived_csv(const DerivedStream& stream, const std::filesystem::path& path);

}  // namespace roverad
