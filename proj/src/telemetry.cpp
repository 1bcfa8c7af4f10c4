#include "roverad/telemetry.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "roverad/error.hpp"

namespace roverad {

namespace {

constexpr std::array<std::string_view, kWheelCount> kWheelNames{"LF", "LM", "LR", "RF", "RM", "RR"};

constexpr std::array<std::string_view, kSensorChannelCount> kColumnNames{
    "current_LF", "current_LM", "current_LR", "current_RF", "current_RM", "current_RR",
    "rate_LF",    "rate_LM",    "rate_LR",    "rate_RF",    "rate_RM",    "rate_RR",
    "voltage_LF", "voltage_LM", "voltage_LR", "voltage_RF", "voltage_RM", "voltage_RR",
    "accel_X",    "accel_Y",    "accel_Z",    "rot_X",      "rot_Y",      "rot_Z",
    "bogie_L",    "bogie_R",    "diff_L",     "diff_R",
};

std::vector<std::string> make_header() {
    std::vector<std::string> h{"t", "sol"};
    for (auto name : kColumnNames) {
        h.emplace_back(name);
    }
    return h;
}

std::string strip_cr(std::string line) {
    if (!line.empty() && line.back() == '\r') {
        line.pop_back();
    }
    return line;
}

}  // namespace

std::string_view wheel_name(Wheel w) { return kWheelNames[static_cast<std::size_t>(w)]; }

Wheel parse_wheel(std::string_view name) {
    for (std::size_t i = 0; i < kWheelCount; ++i) {
        if (kWheelNames[i] == name) {
            return kWheels[i];
        }
    }
    throw DataError("unknown wheel '" + std::string(name) + "'");
}

std::string_view column_name(SensorChannel c) { return kColumnNames[index_of(c)]; }

std::string_view unit_of(SensorChannel c) {
    const auto i = index_of(c);
    if (i < kWheelCount) return "A";
    if (i < 2 * kWheelCount) return "rad/s";
    if (i < 3 * kWheelCount) return "V";
    if (c == SensorChannel::AccelX || c == SensorChannel::AccelY || c == SensorChannel::AccelZ) return "m/s^2";
    if (c == SensorChannel::RotX || c == SensorChannel::RotY || c == SensorChannel::RotZ) return "rad/s";
    return "rad";
}

std::span<const std::string> csv_header() {
    static const std::vector<std::string> header = make_header();
    return header;
}

TelemetryStream::TelemetryStream(std::vector<TelemetryFrame> frames) : frames_(std::move(frames)) {
    for (std::size_t i = 0; i < frames_.size(); ++i) {
        const auto& f = frames_[i];
        if (!std::isfinite(f.t)) {
            throw DataError("non-finite timestamp at frame " + std::to_string(i));
        }
        for (std::size_t c = 0; c < kSensorChannelCount; ++c) {
            if (!std::isfinite(f.values[c])) {
                throw DataError("non-finite value in " + std::string(kColumnNames[c]) + " at frame " +
                                std::to_string(i));
            }
        }
        if (i == 0) continue;
        const auto& prev = frames_[i - 1];
        if (!(f.t > prev.t)) {
            throw OrderingError("timestamps not strictly increasing at frame " + std::to_string(i));
        }
        if (std::abs((f.t - prev.t) - kSamplePeriod) > kSpacingTolerance) {
            throw OrderingError("non-uniform sample spacing at frame " + std::to_string(i) + " (dt=" +
                                detail::format_double(f.t - prev.t) + ")");
        }
        if (f.sol < prev.sol) {
            throw OrderingError("sol decreases at frame " + std::to_string(i));
        }
    }
}

double TelemetryStream::span() const {
    return frames_.empty() ? 0.0 : frames_.back().t - frames_.front().t;
}

namespace detail {

std::vector<std::string_view> split_csv_line(std::string_view line) {
    std::vector<std::string_view> cells;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        if (comma == std::string_view::npos) {
            cells.push_back(line.substr(start));
            break;
        }
        cells.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
    return cells;
}

bool parse_finite(std::string_view cell, double& out) {
    while (!cell.empty() && cell.front() == ' ') cell.remove_prefix(1);
    while (!cell.empty() && cell.back() == ' ') cell.remove_suffix(1);
    if (cell.empty()) return false;
    if (cell.front() == '+') cell.remove_prefix(1);
    const auto* end = cell.data() + cell.size();
    auto [ptr, ec] = std::from_chars(cell.data(), end, out);
    return ec == std::errc{} && ptr == end && std::isfinite(out);
}

std::string format_double(double v) {
    std::array<char, 64> buf{};
    auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v, std::chars_format::general, 17);
    return {buf.data(), ptr};
}

}  // namespace detail

TelemetryStream read_stream(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    std::string line;
    if (!std::getline(in, line)) {
        throw SchemaError(path.string() + ": missing CSV header");
    }
    line = strip_cr(line);
    const auto got = detail::split_csv_line(line);
    const auto want = csv_header();

    std::string missing;
    for (const auto& col : want) {
        if (std::find(got.begin(), got.end(), col) == got.end()) {
            missing += (missing.empty() ? "" : ", ") + col;
        }
    }
    if (!missing.empty()) {
        throw SchemaError(path.string() + ": missing column(s): " + missing);
    }
    std::string extra;
    for (auto col : got) {
        if (std::find(want.begin(), want.end(), col) == want.end()) {
            extra += (extra.empty() ? "" : ", ") + std::string(col);
        }
    }
    if (!extra.empty()) {
        throw SchemaError(path.string() + ": unexpected column(s): " + extra);
    }
    if (got.size() != want.size() || !std::equal(want.begin(), want.end(), got.begin())) {
        throw SchemaError(path.string() + ": columns out of canonical order or duplicated");
    }

    // Row numbers in messages are 1-based data rows (the header is row 0).
    std::vector<TelemetryFrame> frames;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        line = strip_cr(line);
        if (line.empty()) continue;
        ++row;
        const auto cells = detail::split_csv_line(line);
        if (cells.size() != want.size()) {
            throw DataError(path.string() + ": row " + std::to_string(row) + " has " +
                            std::to_string(cells.size()) + " cells, expected " + std::to_string(want.size()));
        }
        TelemetryFrame f;
        if (!detail::parse_finite(cells[0], f.t)) {
            throw DataError(path.string() + ": row " + std::to_string(row) + ": bad value in column t");
        }
        double sol = 0.0;
        if (!detail::parse_finite(cells[1], sol) || sol != std::floor(sol)) {
            throw DataError(path.string() + ": row " + std::to_string(row) + ": bad value in column sol");
        }
        f.sol = static_cast<std::int64_t>(sol);
        for (std::size_t c = 0; c < kSensorChannelCount; ++c) {
            if (!detail::parse_finite(cells[c + 2], f.values[c])) {
                throw DataError(path.string() + ": row " + std::to_string(row) + ": bad value in column " +
                                std::string(kColumnNames[c]));
            }
        }
        if (!frames.empty()) {
            const auto& prev = frames.back();
            if (!(f.t > prev.t)) {
                throw OrderingError(path.string() + ": row " + std::to_string(row) +
                                    ": timestamp not strictly increasing");
            }
            if (std::abs((f.t - prev.t) - TelemetryStream::kSamplePeriod) > TelemetryStream::kSpacingTolerance) {
                throw OrderingError(path.string() + ": row " + std::to_string(row) + ": sample spacing is not 0.125 s");
            }
            if (f.sol < prev.sol) {
                throw OrderingError(path.string() + ": row " + std::to_string(row) + ": sol decreases");
            }
        }
        frames.push_back(f);
    }
    return TelemetryStream(std::move(frames));
}

void write_stream(const TelemetryStream& stream, const std::filesystem::path& path) {
    if (stream.empty()) {
        throw DataError("empty stream");
    }
    std::ostringstream out;
    const auto header = csv_header();
    for (std::size_t i = 0; i < header.size(); ++i) {
        out << (i ? "," : "") << header[i];
    }
    out << '\n';
    for (const auto& f : stream.frames()) {
        out << detail::format_double(f.t) << ',' << f.sol;
        for (double v : f.values) {
            out << ',' << detail::format_double(v);
        }
        out << '\n';
    }
    std::ofstream file(path, std::ios::binary);
    if (!file) {
        throw IoError("cannot open " + path.string() + " for writing");
    }
    file << out.str();
    if (!file) {
        throw IoError("write failed for " + path.string());
    }
}

}  // namespace roverad
