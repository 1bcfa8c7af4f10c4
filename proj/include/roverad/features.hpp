#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "roverad/derive.hpp"

namespace roverad {

/// Rolling-window geometry. Defaults: 4 s windows, 1 s stride, 8 Hz.
struct WindowSpec {
    double window_s = 4.0;
    double stride_s = 1.0;
    double sample_rate_hz = 8.0;

    /// Throws DataError unless both lengths are whole frame counts and the window has >= 2 frames.
    std::size_t window_frames() const;
    std::size_t stride_frames() const;
    void validate() const;
};

/// Number of windows for a stream of `length` frames.
std::size_t window_count(std::size_t length, const WindowSpec& spec);

struct Window {
    double start_t = 0.0;
    /// Exclusive end: start_t + window length.
    double end_t = 0.0;
    std::int64_t sol = 0;
    /// frames x 46 derived channels
    Eigen::MatrixXd data;
};

/// Cuts the stream into windows starting at frame stride*i. Short streams yield none.
std::vector<Window> windows(const DerivedStream& stream, const WindowSpec& spec);

enum class Stat : std::uint8_t { Mean, Std, Kurt, Skew, Min, Max, Median };
inline constexpr std::size_t kStatCount = 7;
inline constexpr std::array<Stat, kStatCount> kStats{Stat::Mean, Stat::Std, Stat::Kurt, Stat::Skew,
                                                     Stat::Min,  Stat::Max, Stat::Median};
std::string_view stat_name(Stat s);

/// mean, std, kurt, skew, min, max, median with population moments and Fisher
/// excess kurtosis. Constant input gives skew = kurt = 0. Requires n >= 2.
std::array<double, kStatCount> stats7(std::span<const double> samples);

inline constexpr std::size_t kPrimeFeatureCount = kDerivedChannelCount * kStatCount;  // 322
inline constexpr std::size_t kRefinedFeatureCount = 301;

struct FeatureId {
    DerivedChannel channel;
    Stat stat = Stat::Mean;

    std::size_t index() const { return channel.index() * kStatCount + static_cast<std::size_t>(stat); }
    static FeatureId from_index(std::size_t index);
    /// e.g. "std(accel[Z])"
    std::string name() const;
};

enum class Variant : std::uint8_t { Prime, Refined };
std::string_view variant_name(Variant v);
Variant parse_variant(std::string_view name);

/// Which canonical features a model consumes. Refined drops the accelerometer statistics.
class FeatureMask {
public:
    explicit FeatureMask(Variant variant);

    Variant variant() const { return variant_; }
    std::size_t size() const { return kept_.size(); }
    std::span<const FeatureId> kept() const { return kept_; }
    const FeatureId& operator[](std::size_t i) const { return kept_[i]; }
    std::vector<std::string> names() const;

private:
    Variant variant_;
    std::vector<FeatureId> kept_;
};

struct FeatureVector {
    std::vector<double> values;
    Variant variant = Variant::Prime;
    double start_t = 0.0;
    double end_t = 0.0;
    std::int64_t sol = 0;
};

FeatureVector featurize(const Window& window, const FeatureMask& mask);

/// Per-feature min-max scaler. Constant features (max == min) map to 0.
class MinMaxScaler {
public:
    MinMaxScaler() = default;
    MinMaxScaler(Variant variant, std::vector<double> min, std::vector<double> max);

    /// Requires >= 2 vectors of one variant and equal length.
    static MinMaxScaler fit(std::span<const FeatureVector> vectors);

    Variant variant() const { return variant_; }
    std::size_t size() const { return min_.size(); }
    std::span<const double> min() const { return min_; }
    std::span<const double> max() const { return max_; }
    std::span<const std::size_t> constant_features() const { return constant_; }
    bool is_constant(std::size_t i) const { return min_[i] == max_[i]; }

    /// (x - min) / (max - min), unclamped.
    FeatureVector transform(const FeatureVector& v) const;

    std::string to_json() const;
    static MinMaxScaler from_json(std::string_view text);
    void save(const std::filesystem::path& path) const;
    static MinMaxScaler load(const std::filesystem::path& path);

private:
    Variant variant_ = Variant::Prime;
    std::vector<double> min_;
    std::vector<double> max_;
    std::vector<std::size_t> constant_;
};

/// Convenience: derive, window and featurize a telemetry stream.
std::vector<FeatureVector> featurize_stream(const TelemetryStream& stream, const WindowSpec& spec,
                                            const FeatureMask& mask);

/// Stacks vectors into a (rows = samples) matrix.
Eigen::MatrixXd to_matrix(std::span<const FeatureVector> vectors);

/// Feature matrix CSV: sol, start_t, then one column per FeatureId name.
void write_feature_csv(std::span<const FeatureVector> vectors, const FeatureMask& mask,
                       const std::filesystem::path& path);

}  // namespace roverad
