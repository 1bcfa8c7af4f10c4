#include "roverad/derive.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "roverad/error.hpp"

namespace roverad {

namespace {

constexpr std::size_t kWheelBlock = kWheelCount * kPerWheelSignals;

constexpr std::array<SignalKind, kPerWheelSignals> kWheelKinds{
    SignalKind::Current, SignalKind::CurrentDev, SignalKind::Rate,
    SignalKind::Voltage, SignalKind::Power,      SignalKind::PowerDev};

constexpr std::array<SignalKind, 10> kBodyKinds{
    SignalKind::AccelX, SignalKind::AccelY,    SignalKind::AccelZ,     SignalKind::RotX,     SignalKind::RotY,
    SignalKind::RotZ,   SignalKind::BogieLeft, SignalKind::BogieRight, SignalKind::DiffLeft, SignalKind::DiffRight};

constexpr std::array<std::string_view, kPerWheelSignals> kWheelLabels{"C", "CD", "Rate", "V", "P", "PD"};
constexpr std::array<std::string_view, kPerWheelSignals> kWheelColumns{"current", "cdev",  "rate",
                                                                       "voltage", "power", "pdev"};
constexpr std::array<std::string_view, 10> kBodyLabels{"accel[X]", "accel[Y]", "accel[Z]", "rot[X]",  "rot[Y]",
                                                       "rot[Z]",   "bogie[L]", "bogie[R]", "diff[L]", "diff[R]"};
constexpr std::array<SensorChannel, 10> kBodySensors{
    SensorChannel::AccelX,    SensorChannel::AccelY,     SensorChannel::AccelZ,   SensorChannel::RotX,
    SensorChannel::RotY,      SensorChannel::RotZ,       SensorChannel::BogieLeft, SensorChannel::BogieRight,
    SensorChannel::DiffLeft,  SensorChannel::DiffRight};

std::vector<DerivedChannel> make_channels() {
    std::vector<DerivedChannel> out;
    out.reserve(kDerivedChannelCount);
    for (std::size_t i = 0; i < kDerivedChannelCount; ++i) {
        out.push_back(DerivedChannel::from_index(i));
    }
    return out;
}

}  // namespace

DerivedChannel DerivedChannel::from_index(std::size_t index) {
    if (index >= kDerivedChannelCount) {
        throw DataError("derived channel index out of range: " + std::to_string(index));
    }
    return DerivedChannel(index);
}

DerivedChannel DerivedChannel::wheel_signal(SignalKind kind, Wheel wheel) {
    for (std::size_t k = 0; k < kPerWheelSignals; ++k) {
        if (kWheelKinds[k] == kind) {
            return DerivedChannel(static_cast<std::size_t>(wheel) * kPerWheelSignals + k);
        }
    }
    throw DataError("not a per-wheel signal kind");
}

DerivedChannel DerivedChannel::body(SignalKind kind) {
    for (std::size_t k = 0; k < kBodyKinds.size(); ++k) {
        if (kBodyKinds[k] == kind) {
            return DerivedChannel(kWheelBlock + k);
        }
    }
    throw DataError("not a body signal kind");
}

SignalKind DerivedChannel::kind() const {
    if (is_wheel_signal()) {
        return kWheelKinds[index_ % kPerWheelSignals];
    }
    return kBodyKinds[index_ - kWheelBlock];
}

Wheel DerivedChannel::wheel() const {
    if (!is_wheel_signal()) {
        throw DataError("channel " + label() + " is not a wheel signal");
    }
    return kWheels[index_ / kPerWheelSignals];
}

bool DerivedChannel::is_acceleration() const {
    const auto k = kind();
    return k == SignalKind::AccelX || k == SignalKind::AccelY || k == SignalKind::AccelZ;
}

std::string DerivedChannel::label() const {
    if (is_wheel_signal()) {
        return std::string(kWheelLabels[index_ % kPerWheelSignals]) + "[" + std::string(wheel_name(wheel())) + "]";
    }
    return std::string(kBodyLabels[index_ - kWheelBlock]);
}

std::string DerivedChannel::column() const {
    if (is_wheel_signal()) {
        return std::string(kWheelColumns[index_ % kPerWheelSignals]) + "_" + std::string(wheel_name(wheel()));
    }
    return std::string(column_name(kBodySensors[index_ - kWheelBlock]));
}

std::span<const DerivedChannel> derived_channels() {
    static const std::vector<DerivedChannel> channels = make_channels();
    return channels;
}

bool sensor_source(DerivedChannel ch, SensorChannel& out) {
    if (!ch.is_wheel_signal()) {
        out = kBodySensors[ch.index() - kWheelBlock];
        return true;
    }
    switch (ch.kind()) {
        case SignalKind::Current: out = current_channel(ch.wheel()); return true;
        case SignalKind::Rate: out = rate_channel(ch.wheel()); return true;
        case SignalKind::Voltage: out = voltage_channel(ch.wheel()); return true;
        default: return false;
    }
}

double mean_over_wheels(std::span<const double, kWheelCount> values) {
    // Summing offsets from the first wheel keeps equal inputs exact.
    const double ref = values[0];
    double sum = 0.0;
    for (double v : values) sum += v - ref;
    return ref + sum / static_cast<double>(kWheelCount);
}

std::array<double, kWheelCount> deviation(std::span<const double, kWheelCount> values) {
    const double mean = mean_over_wheels(values);
    std::array<double, kWheelCount> out{};
    for (std::size_t k = 0; k < kWheelCount; ++k) {
        out[k] = std::abs(values[k] - mean);
    }
    return out;
}

DerivedStream::DerivedStream(std::vector<double> t, std::vector<std::int64_t> sol, std::vector<double> data)
    : t_(std::move(t)), sol_(std::move(sol)), data_(std::move(data)) {
    if (sol_.size() != t_.size() || data_.size() != t_.size() * kDerivedChannelCount) {
        throw DataError("derived stream: inconsistent buffer sizes");
    }
}

DerivedStream derive_stream(const TelemetryStream& stream) {
    const std::size_t n = stream.size();
    std::vector<double> t(n);
    std::vector<std::int64_t> sol(n);
    std::vector<double> data(n * kDerivedChannelCount);

    for (std::size_t i = 0; i < n; ++i) {
        const auto& f = stream[i];
        t[i] = f.t;
        sol[i] = f.sol;
        std::array<double, kWheelCount> currents{};
        std::array<double, kWheelCount> powers{};
        for (std::size_t k = 0; k < kWheelCount; ++k) {
            currents[k] = f[current_channel(kWheels[k])];
            powers[k] = power(currents[k], f[voltage_channel(kWheels[k])]);
        }
        const auto cdev = deviation(currents);
        const auto pdev = deviation(powers);

        double* row = data.data() + i * kDerivedChannelCount;
        for (std::size_t k = 0; k < kWheelCount; ++k) {
            const Wheel w = kWheels[k];
            double* block = row + k * kPerWheelSignals;
            block[0] = currents[k];
            block[1] = cdev[k];
            block[2] = f[rate_channel(w)];
            block[3] = f[voltage_channel(w)];
            block[4] = powers[k];
            block[5] = pdev[k];
        }
        for (std::size_t b = 0; b < kBodySensors.size(); ++b) {
            row[kWheelBlock + b] = f[kBodySensors[b]];
        }
    }
    return DerivedStream(std::move(t), std::move(sol), std::move(data));
}

void write_derived_csv(const DerivedStream& stream, const std::filesystem::path& path) {
    if (stream.empty()) {
        throw DataError("empty stream");
    }
    // Sensor columns in telemetry CSV order, then the computed columns grouped by kind.
    std::vector<std::size_t> order;
    std::ostringstream out;
    out << "t,sol";
    for (std::size_t c = 0; c < kSensorChannelCount; ++c) {
        const auto sc = static_cast<SensorChannel>(c);
        for (auto ch : derived_channels()) {
            SensorChannel src{};
            if (sensor_source(ch, src) && src == sc) {
                order.push_back(ch.index());
                out << ',' << column_name(sc);
            }
        }
    }
    for (auto kind : {SignalKind::Power, SignalKind::CurrentDev, SignalKind::PowerDev}) {
        for (auto w : kWheels) {
            const auto ch = DerivedChannel::wheel_signal(kind, w);
            order.push_back(ch.index());
            out << ',' << ch.column();
        }
    }
    out << '\n';
    for (std::size_t i = 0; i < stream.size(); ++i) {
        out << detail::format_double(stream.t(i)) << ',' << stream.sol(i);
        const auto row = stream.row(i);
        for (auto idx : order) {
            out << ',' << detail::format_double(row[idx]);
        }
        out << '\n';
    }
    std::ofstream file(path, std::ios::binary);
    if (!file || !(file << out.str())) {
        throw IoError("cannot write " + path.string());
    }
}

}  // namespace roverad
