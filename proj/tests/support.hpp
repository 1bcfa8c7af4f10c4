#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include <Eigen/Dense>

#include "roverad/net.hpp"
#include "roverad/random.hpp"
#include "roverad/telemetry.hpp"

namespace testsupport {

namespace fs = std::filesystem;

/// Scratch directory removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static int counter = 0;
        path_ = fs::temp_directory_path() /
                ("roverad_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        fs::remove_all(path_);
        fs::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const fs::path& path() const { return path_; }
    fs::path operator/(const std::string& name) const { return path_ / name; }

private:
    fs::path path_;
};

/// Random but plausible frames at 8 Hz. std::mt19937_64 output is fully specified, so
/// this is reproducible; the uniform_real_distribution mapping may differ across
/// standard libraries, which is fine for fixtures.
inline std::vector<roverad::TelemetryFrame> random_frames(std::size_t n, std::uint64_t seed, double t0 = 0.0,
                                                          std::int64_t sol = 1) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<roverad::TelemetryFrame> frames(n);
    for (std::size_t i = 0; i < n; ++i) {
        frames[i].t = t0 + 0.125 * static_cast<double>(i);
        frames[i].sol = sol;
        for (std::size_t c = 0; c < roverad::kSensorChannelCount; ++c) {
            frames[i].values[c] = u(rng) * (c >= 12 && c < 18 ? 1.0 : 2.0) + (c >= 12 && c < 18 ? 28.0 : 0.0);
        }
    }
    return frames;
}

inline roverad::TelemetryStream random_stream(std::size_t n, std::uint64_t seed) {
    return roverad::TelemetryStream(random_frames(n, seed));
}

// ---------------------------------------------------------------------------
// Oracles. Each is a direct textbook evaluation, written without the library.

/// mean, std, kurt, skew, min, max, median from raw sums of powers.
inline std::vector<double> textbook_stats(const std::vector<double>& x) {
    const double n = static_cast<double>(x.size());
    long double s1 = 0;
    for (double v : x) s1 += v;
    const long double mean = s1 / n;
    long double m2 = 0, m3 = 0, m4 = 0;
    for (double v : x) {
        const long double d = v - mean;
        m2 += d * d;
        m3 += d * d * d;
        m4 += d * d * d * d;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    std::vector<double> sorted = x;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t k = sorted.size();
    const double median = k % 2 == 1 ? sorted[k / 2] : 0.5 * (sorted[k / 2 - 1] + sorted[k / 2]);
    const bool flat = m2 == 0;
    const double skew = flat ? 0.0 : static_cast<double>(m3 / std::pow(m2, 1.5L));
    const double kurt = flat ? 0.0 : static_cast<double>(m4 / (m2 * m2) - 3.0L);
    return {static_cast<double>(mean), static_cast<double>(std::sqrt(m2)), kurt, skew, sorted.front(),
            sorted.back(), median};
}

/// Counts windows by walking every candidate start frame.
inline std::size_t brute_window_count(std::size_t length, std::size_t window, std::size_t stride) {
    std::size_t count = 0;
    for (std::size_t start = 0; start < length; start += stride) {
        if (start + window <= length) ++count;
    }
    return count;
}

/// Nearest-rank percentile by counting: smallest value v with #{x <= v} >= p/100 * N.
inline double nearest_rank_by_count(const std::vector<double>& xs, double p) {
    std::vector<double> candidates = xs;
    std::sort(candidates.begin(), candidates.end());
    for (double v : candidates) {
        const auto at_or_below = std::count_if(xs.begin(), xs.end(), [v](double x) { return x <= v; });
        if (100.0 * static_cast<double>(at_or_below) >= p * static_cast<double>(xs.size()) - 1e-9) return v;
    }
    return candidates.back();
}

/// Mean squared error of projecting centered rows of `x` (rows = samples) onto the top-k
/// principal directions, measured per element.
inline double pca_reconstruction_mse(const Eigen::MatrixXd& x, int k) {
    const Eigen::RowVectorXd mean = x.colwise().mean();
    const Eigen::MatrixXd centered = x.rowwise() - mean;
    const Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(x.rows());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
    const Eigen::MatrixXd basis = eig.eigenvectors().rightCols(k);
    const Eigen::MatrixXd recon = centered * basis * basis.transpose();
    return (centered - recon).squaredNorm() / static_cast<double>(x.size());
}

/// Seeded dense network with small non-zero biases so their gradients are exercised too.
inline roverad::Autoencoder toy(std::size_t in, const std::vector<roverad::LayerSpec>& specs, std::uint64_t seed) {
    auto m = roverad::build_model(in, specs, seed);
    roverad::Rng rng(seed + 1000);
    for (auto& l : m.layers()) {
        for (Eigen::Index i = 0; i < l.bias.size(); ++i) l.bias(i) = rng.uniform(-0.3, 0.3);
    }
    return m;
}

/// d x n matrix of uniform values in [-1, 1); columns are samples.
inline Eigen::MatrixXd random_batch(Eigen::Index d, Eigen::Index n, std::uint64_t seed) {
    roverad::Rng rng(seed);
    Eigen::MatrixXd x(d, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        for (Eigen::Index i = 0; i < d; ++i) x(i, j) = rng.uniform(-1.0, 1.0);
    }
    return x;
}

/// Largest relative error between backward() and central differences over all parameters.
inline double gradient_check(roverad::Autoencoder m, const Eigen::MatrixXd& x, double h = 1e-5) {
    auto loss = [&] { return roverad::mse_loss(roverad::forward(m, x).output(), x); };
    const auto g = roverad::backward(m, roverad::forward(m, x), x);
    double worst = 0.0;
    auto compare = [&](double analytic, double& param) {
        const double saved = param;
        param = saved + h;
        const double up = loss();
        param = saved - h;
        const double down = loss();
        param = saved;
        const double numeric = (up - down) / (2 * h);
        const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-7});
        worst = std::max(worst, std::abs(analytic - numeric) / denom);
    };
    for (std::size_t l = 0; l < m.layers().size(); ++l) {
        auto& layer = m.layers()[l];
        for (Eigen::Index i = 0; i < layer.weights.rows(); ++i) {
            for (Eigen::Index j = 0; j < layer.weights.cols(); ++j) compare(g.weights[l](i, j), layer.weights(i, j));
            compare(g.biases[l](i), layer.bias(i));
        }
    }
    return worst;
}

}  // namespace testsupport
