#include "roverad/features.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <sstream>

#include <json.hpp>

#include "roverad/error.hpp"
#include "roverad/io.hpp"

namespace roverad {

namespace {

constexpr std::array<std::string_view, kStatCount> kStatNames{"mean", "std", "kurt", "skew", "min", "max", "median"};

std::size_t whole_frames(double seconds, double rate, const char* what) {
    const double frames = seconds * rate;
    const double rounded = std::round(frames);
    if (!(frames > 0.0) || std::abs(frames - rounded) > 1e-9) {
        throw DataError(std::string(what) + " of " + detail::format_double(seconds) +
                        " s is not a whole number of frames at " + detail::format_double(rate) + " Hz");
    }
    return static_cast<std::size_t>(rounded);
}

}  // namespace

std::size_t WindowSpec::window_frames() const {
    const auto n = whole_frames(window_s, sample_rate_hz, "window");
    if (n < 2) {
        throw DataError("window must span at least 2 frames");
    }
    return n;
}

std::size_t WindowSpec::stride_frames() const { return whole_frames(stride_s, sample_rate_hz, "stride"); }

void WindowSpec::validate() const {
    (void)window_frames();
    (void)stride_frames();
}

std::size_t window_count(std::size_t length, const WindowSpec& spec) {
    const auto w = spec.window_frames();
    const auto s = spec.stride_frames();
    return length < w ? 0 : (length - w) / s + 1;
}

std::vector<Window> windows(const DerivedStream& stream, const WindowSpec& spec) {
    const auto w = spec.window_frames();
    const auto s = spec.stride_frames();
    const auto count = window_count(stream.size(), spec);
    if (count == 0) {
        std::clog << "warning: stream of " << stream.size() << " frames is shorter than one " << w
                  << "-frame window; no windows produced\n";
        return {};
    }
    std::vector<Window> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        const std::size_t first = i * s;
        Window win;
        win.start_t = stream.t(first);
        win.end_t = win.start_t + static_cast<double>(w) / spec.sample_rate_hz;
        win.sol = stream.sol(first);
        win.data.resize(static_cast<Eigen::Index>(w), static_cast<Eigen::Index>(kDerivedChannelCount));
        for (std::size_t r = 0; r < w; ++r) {
            const auto row = stream.row(first + r);
            for (std::size_t c = 0; c < kDerivedChannelCount; ++c) {
                win.data(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = row[c];
            }
        }
        out.push_back(std::move(win));
    }
    return out;
}

std::string_view stat_name(Stat s) { return kStatNames[static_cast<std::size_t>(s)]; }

std::array<double, kStatCount> stats7(std::span<const double> samples) {
    const std::size_t n = samples.size();
    if (n < 2) {
        throw DataError("stats7 needs at least 2 samples, got " + std::to_string(n));
    }
    const auto nd = static_cast<double>(n);
    const auto [lo, hi] = std::minmax_element(samples.begin(), samples.end());

    double sum = 0.0;
    for (double x : samples) sum += x;
    const double mean = sum / nd;

    double m2 = 0.0, m3 = 0.0, m4 = 0.0;
    for (double x : samples) {
        const double d = x - mean;
        const double d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= nd;
    m3 /= nd;
    m4 /= nd;

    double skew = 0.0, kurt = 0.0;
    if (*lo != *hi && m2 > 0.0) {
        skew = m3 / std::pow(m2, 1.5);
        kurt = m4 / (m2 * m2) - 3.0;
    }

    std::vector<double> sorted(samples.begin(), samples.end());
    const std::size_t mid = n / 2;
    std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(mid), sorted.end());
    double median = sorted[mid];
    if (n % 2 == 0) {
        const double lower = *std::max_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(mid));
        median = 0.5 * (lower + median);
    }
    // Midpoint rounding can step outside [min, max] for nearly equal values.
    const double mean_clamped = std::clamp(mean, *lo, *hi);
    return {mean_clamped, std::sqrt(m2), kurt, skew, *lo, *hi, median};
}

FeatureId FeatureId::from_index(std::size_t index) {
    if (index >= kPrimeFeatureCount) {
        throw DataError("feature index out of range: " + std::to_string(index));
    }
    return FeatureId{DerivedChannel::from_index(index / kStatCount), kStats[index % kStatCount]};
}

std::string FeatureId::name() const { return std::string(stat_name(stat)) + "(" + channel.label() + ")"; }

std::string_view variant_name(Variant v) { return v == Variant::Prime ? "prime" : "refined"; }

Variant parse_variant(std::string_view name) {
    if (name == "prime") return Variant::Prime;
    if (name == "refined") return Variant::Refined;
    throw DataError("unknown variant '" + std::string(name) + "' (expected prime or refined)");
}

FeatureMask::FeatureMask(Variant variant) : variant_(variant) {
    kept_.reserve(kPrimeFeatureCount);
    for (std::size_t i = 0; i < kPrimeFeatureCount; ++i) {
        const auto id = FeatureId::from_index(i);
        if (variant == Variant::Refined && id.channel.is_acceleration()) {
            continue;
        }
        kept_.push_back(id);
    }
}

std::vector<std::string> FeatureMask::names() const {
    std::vector<std::string> out;
    out.reserve(kept_.size());
    for (const auto& id : kept_) out.push_back(id.name());
    return out;
}

FeatureVector featurize(const Window& window, const FeatureMask& mask) {
    if (window.data.cols() != static_cast<Eigen::Index>(kDerivedChannelCount)) {
        throw DataError("window has " + std::to_string(window.data.cols()) + " channels, expected 46");
    }
    std::array<double, kPrimeFeatureCount> all{};
    std::vector<double> column(static_cast<std::size_t>(window.data.rows()));
    for (std::size_t c = 0; c < kDerivedChannelCount; ++c) {
        for (Eigen::Index r = 0; r < window.data.rows(); ++r) {
            column[static_cast<std::size_t>(r)] = window.data(r, static_cast<Eigen::Index>(c));
        }
        const auto s = stats7(column);
        std::copy(s.begin(), s.end(), all.begin() + static_cast<std::ptrdiff_t>(c * kStatCount));
    }
    FeatureVector v;
    v.variant = mask.variant();
    v.start_t = window.start_t;
    v.end_t = window.end_t;
    v.sol = window.sol;
    v.values.reserve(mask.size());
    for (const auto& id : mask.kept()) {
        v.values.push_back(all[id.index()]);
    }
    return v;
}

MinMaxScaler::MinMaxScaler(Variant variant, std::vector<double> min, std::vector<double> max)
    : variant_(variant), min_(std::move(min)), max_(std::move(max)) {
    if (min_.size() != max_.size() || min_.empty()) {
        throw DataError("scaler min/max lengths differ or are empty");
    }
    for (std::size_t i = 0; i < min_.size(); ++i) {
        if (!std::isfinite(min_[i]) || !std::isfinite(max_[i]) || min_[i] > max_[i]) {
            throw DataError("scaler feature " + std::to_string(i) + " has invalid range");
        }
        if (min_[i] == max_[i]) constant_.push_back(i);
    }
}

MinMaxScaler MinMaxScaler::fit(std::span<const FeatureVector> vectors) {
    if (vectors.size() < 2) {
        throw DataError("scaler fit needs at least 2 feature vectors, got " + std::to_string(vectors.size()));
    }
    const auto variant = vectors.front().variant;
    const auto d = vectors.front().values.size();
    std::vector<double> lo(vectors.front().values);
    std::vector<double> hi(vectors.front().values);
    for (std::size_t r = 1; r < vectors.size(); ++r) {
        const auto& v = vectors[r];
        if (v.values.size() != d) {
            throw DataError("ragged feature vectors: row " + std::to_string(r) + " has " +
                            std::to_string(v.values.size()) + " features, expected " + std::to_string(d));
        }
        if (v.variant != variant) {
            throw DataError("mixed feature variants in scaler fit");
        }
        for (std::size_t i = 0; i < d; ++i) {
            lo[i] = std::min(lo[i], v.values[i]);
            hi[i] = std::max(hi[i], v.values[i]);
        }
    }
    return MinMaxScaler(variant, std::move(lo), std::move(hi));
}

FeatureVector MinMaxScaler::transform(const FeatureVector& v) const {
    if (v.values.size() != min_.size()) {
        throw DataError("scaler expects " + std::to_string(min_.size()) + " features, got " +
                        std::to_string(v.values.size()));
    }
    if (v.variant != variant_) {
        throw ArtifactError("scaler is " + std::string(variant_name(variant_)) + " but vector is " +
                            std::string(variant_name(v.variant)));
    }
    FeatureVector out = v;
    for (std::size_t i = 0; i < min_.size(); ++i) {
        out.values[i] = is_constant(i) ? 0.0 : (v.values[i] - min_[i]) / (max_[i] - min_[i]);
    }
    return out;
}

std::string MinMaxScaler::to_json() const {
    nlohmann::json j;
    j["variant"] = variant_name(variant_);
    j["min"] = min_;
    j["max"] = max_;
    j["constant"] = constant_;
    return j.dump(1) + "\n";
}

MinMaxScaler MinMaxScaler::from_json(std::string_view text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(std::string("scaler JSON parse error: ") + e.what());
    }
    try {
        auto s = MinMaxScaler(parse_variant(j.at("variant").get<std::string>()),
                              j.at("min").get<std::vector<double>>(), j.at("max").get<std::vector<double>>());
        if (j.at("constant").get<std::vector<std::size_t>>() != s.constant_) {
            throw SchemaError("scaler 'constant' list disagrees with min/max");
        }
        const std::size_t want = s.variant_ == Variant::Prime ? kPrimeFeatureCount : kRefinedFeatureCount;
        if (s.size() != want) {
            throw ArtifactError("scaler has " + std::to_string(s.size()) + " features but variant " +
                                std::string(variant_name(s.variant_)) + " needs " + std::to_string(want));
        }
        return s;
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(std::string("scaler JSON schema error: ") + e.what());
    }
}

void MinMaxScaler::save(const std::filesystem::path& path) const { write_text_file(path, to_json()); }

MinMaxScaler MinMaxScaler::load(const std::filesystem::path& path) { return from_json(read_text_file(path)); }

std::vector<FeatureVector> featurize_stream(const TelemetryStream& stream, const WindowSpec& spec,
                                            const FeatureMask& mask) {
    const auto derived = derive_stream(stream);
    const auto wins = windows(derived, spec);
    std::vector<FeatureVector> out;
    out.reserve(wins.size());
    for (const auto& w : wins) {
        out.push_back(featurize(w, mask));
    }
    return out;
}

Eigen::MatrixXd to_matrix(std::span<const FeatureVector> vectors) {
    if (vectors.empty()) return {};
    const auto d = vectors.front().values.size();
    Eigen::MatrixXd m(static_cast<Eigen::Index>(vectors.size()), static_cast<Eigen::Index>(d));
    for (std::size_t r = 0; r < vectors.size(); ++r) {
        if (vectors[r].values.size() != d) {
            throw DataError("ragged feature vectors at row " + std::to_string(r));
        }
        for (std::size_t c = 0; c < d; ++c) {
            m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = vectors[r].values[c];
        }
    }
    return m;
}

void write_feature_csv(std::span<const FeatureVector> vectors, const FeatureMask& mask,
                       const std::filesystem::path& path) {
    std::ostringstream out;
    out << "sol,start_t";
    for (const auto& name : mask.names()) out << ',' << name;
    out << '\n';
    for (const auto& v : vectors) {
        if (v.values.size() != mask.size()) {
            throw DataError("feature vector length does not match mask");
        }
        out << v.sol << ',' << detail::format_double(v.start_t);
        for (double x : v.values) out << ',' << detail::format_double(x);
        out << '\n';
    }
    write_text_file(path, out.str());
}

}  // namespace roverad
