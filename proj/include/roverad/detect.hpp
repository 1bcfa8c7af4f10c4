#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "roverad/features.hpp"
#include "roverad/net.hpp"

namespace roverad {

/// Residual x - x_hat in scaled feature space, indexed like the model's mask.
struct ErrorVector {
    std::vector<double> e;
};

/// 1-norm of the residual plus the window it belongs to.
struct AnomalyScore {
    double a = 0.0;
    std::int64_t sol = 0;
    double start_t = 0.0;
    double end_t = 0.0;
};

double l1_norm(std::span<const double> v);

/// Scales `v`, reconstructs it and returns the residual and its 1-norm.
std::pair<ErrorVector, AnomalyScore> score(const Autoencoder& model, const MinMaxScaler& scaler,
                                           const FeatureVector& v);

struct ScoredWindows {
    std::vector<ErrorVector> errors;
    std::vector<AnomalyScore> scores;
};

/// score() over many windows; each window is evaluated independently.
ScoredWindows score_all(const Autoencoder& model, const MinMaxScaler& scaler, std::span<const FeatureVector> vectors);

struct Threshold {
    double percentile = 99.9;
    double value = 0.0;
    std::size_t n = 0;

    std::string to_json() const;
    static Threshold from_json(std::string_view text);
    void save(const std::filesystem::path& path) const;
    static Threshold load(const std::filesystem::path& path);
};

/// Smallest calibration set accepted for `percentile` (100 when percentile >= 99).
std::size_t min_calibration_size(double percentile);

/// Nearest-rank percentile: sort ascending and take the value at 1-based rank ceil(p/100 * N).
Threshold calibrate(std::span<const double> scores, double percentile = 99.9);
Threshold calibrate(std::span<const AnomalyScore> scores, double percentile = 99.9);

struct Contributor {
    std::size_t index = 0;  // position in the mask's kept list
    std::string feature;    // e.g. "std(accel[Z])"
    double magnitude = 0.0; // |e_i|
};

struct FlagRecord {
    std::int64_t sol = 0;
    double start_t = 0.0;
    double end_t = 0.0;
    double score = 0.0;
    double threshold = 0.0;
    std::vector<Contributor> contributors;
};

inline constexpr std::size_t kMaxContributors = 3;
inline constexpr double kContributorFloor = 0.10;

/// Up to three largest |e_i|, descending, dropping any below 10% of `a` but keeping at least one.
/// Ties keep the lower feature index first.
std::vector<Contributor> top_contributors(const ErrorVector& error, double a, const FeatureMask& mask);

/// One record per window with a strictly above the threshold.
std::vector<FlagRecord> flag(std::span<const AnomalyScore> scores, const Threshold& threshold,
                             std::span<const ErrorVector> errors, const FeatureMask& mask);

/// report.csv: sol,start_t,score,threshold,feature_1,e_1,feature_2,e_2,feature_3,e_3
void write_report_csv(std::span<const FlagRecord> flags, const std::filesystem::path& path);

struct ReportMeta {
    Variant variant = Variant::Prime;
    double percentile = 99.9;
    double threshold = 0.0;
    std::size_t windows = 0;
};

std::string report_to_json(std::span<const FlagRecord> flags, const ReportMeta& meta);
std::vector<FlagRecord> report_from_json(std::string_view text, ReportMeta* meta = nullptr);
void write_report_json(std::span<const FlagRecord> flags, const ReportMeta& meta, const std::filesystem::path& path);
std::vector<FlagRecord> read_report_json(const std::filesystem::path& path, ReportMeta* meta = nullptr);

struct ScoreRow {
    std::int64_t sol = 0;
    double start_t = 0.0;
    double end_t = 0.0;
    double score = 0.0;
    bool flagged = false;
};

/// scores.csv: sol,start_t,end_t,score,flagged (one row per window, for score-vs-time plots).
void write_scores_csv(std::span<const ScoreRow> rows, const std::filesystem::path& path);
std::vector<ScoreRow> read_scores_csv(const std::filesystem::path& path);

}  // namespace roverad
