#include "roverad/detect.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "roverad/error.hpp"
#include "roverad/io.hpp"

namespace roverad {

double l1_norm(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += std::abs(x);
    return s;
}

std::pair<ErrorVector, AnomalyScore> score(const Autoencoder& model, const MinMaxScaler& scaler,
                                           const FeatureVector& v) {
    if (model.variant() && *model.variant() != scaler.variant()) {
        throw ArtifactError("model is " + std::string(variant_name(*model.variant())) + " but scaler is " +
                            std::string(variant_name(scaler.variant())));
    }
    if (v.values.size() != model.input_dim() || scaler.size() != model.input_dim()) {
        throw DataError("score: feature vector has " + std::to_string(v.values.size()) + " values, model expects " +
                        std::to_string(model.input_dim()));
    }
    const auto scaled = scaler.transform(v);
    const auto d = static_cast<Eigen::Index>(scaled.values.size());
    const Eigen::VectorXd x = Eigen::Map<const Eigen::VectorXd>(scaled.values.data(), d);
    const Eigen::VectorXd residual = x - model.reconstruct(x);

    ErrorVector err{std::vector<double>(residual.data(), residual.data() + d)};
    AnomalyScore s{l1_norm(err.e), v.sol, v.start_t, v.end_t};
    return {std::move(err), s};
}

ScoredWindows score_all(const Autoencoder& model, const MinMaxScaler& scaler, std::span<const FeatureVector> vectors) {
    ScoredWindows out;
    out.errors.reserve(vectors.size());
    out.scores.reserve(vectors.size());
    for (const auto& v : vectors) {
        auto [e, s] = score(model, scaler, v);
        out.errors.push_back(std::move(e));
        out.scores.push_back(s);
    }
    return out;
}

std::string Threshold::to_json() const {
    nlohmann::json j{{"percentile", percentile}, {"value", value}, {"n", n}};
    return j.dump(1) + "\n";
}

Threshold Threshold::from_json(std::string_view text) {
    try {
        const auto j = nlohmann::json::parse(text);
        Threshold t;
        t.percentile = j.at("percentile").get<double>();
        t.value = j.at("value").get<double>();
        t.n = j.at("n").get<std::size_t>();
        if (!(t.percentile > 0.0 && t.percentile < 100.0) || !std::isfinite(t.value)) {
            throw SchemaError("threshold JSON: percentile or value out of range");
        }
        return t;
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(std::string("threshold JSON error: ") + e.what());
    }
}

void Threshold::save(const std::filesystem::path& path) const { write_text_file(path, to_json()); }

Threshold Threshold::load(const std::filesystem::path& path) { return from_json(read_text_file(path)); }

std::size_t min_calibration_size(double percentile) { return percentile >= 99.0 ? 100 : 1; }

Threshold calibrate(std::span<const double> scores, double percentile) {
    if (!(percentile > 0.0 && percentile < 100.0)) {
        throw DataError("percentile must lie in (0, 100)");
    }
    const auto need = min_calibration_size(percentile);
    if (scores.size() < need) {
        throw DataError("calibration at the " + detail::format_double(percentile) + "th percentile needs at least " +
                        std::to_string(need) + " scores, got " + std::to_string(scores.size()));
    }
    std::vector<double> sorted(scores.begin(), scores.end());
    std::sort(sorted.begin(), sorted.end());
    const double n = static_cast<double>(sorted.size());
    // The small slack absorbs representation error, e.g. 99.9 / 100 * 1000 landing just above 999.
    const double exact = percentile / 100.0 * n;
    auto rank = static_cast<std::size_t>(std::ceil(exact - 1e-9 * std::max(1.0, exact)));
    rank = std::clamp<std::size_t>(rank, 1, sorted.size());
    return Threshold{percentile, sorted[rank - 1], sorted.size()};
}

Threshold calibrate(std::span<const AnomalyScore> scores, double percentile) {
    std::vector<double> a;
    a.reserve(scores.size());
    for (const auto& s : scores) a.push_back(s.a);
    return calibrate(std::span<const double>(a), percentile);
}

std::vector<Contributor> top_contributors(const ErrorVector& error, double a, const FeatureMask& mask) {
    if (error.e.size() != mask.size()) {
        throw DataError("error vector length " + std::to_string(error.e.size()) + " does not match mask of " +
                        std::to_string(mask.size()));
    }
    std::vector<std::size_t> order(error.e.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    const std::size_t k = std::min(kMaxContributors, order.size());
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                      [&](std::size_t lhs, std::size_t rhs) {
                          const double l = std::abs(error.e[lhs]), r = std::abs(error.e[rhs]);
                          return l != r ? l > r : lhs < rhs;
                      });
    std::vector<Contributor> out;
    for (std::size_t i = 0; i < k; ++i) {
        const double mag = std::abs(error.e[order[i]]);
        if (i > 0 && mag < kContributorFloor * a) break;
        out.push_back({order[i], mask[order[i]].name(), mag});
    }
    return out;
}

std::vector<FlagRecord> flag(std::span<const AnomalyScore> scores, const Threshold& threshold,
                             std::span<const ErrorVector> errors, const FeatureMask& mask) {
    if (scores.size() != errors.size()) {
        throw DataError("flag: " + std::to_string(scores.size()) + " scores but " + std::to_string(errors.size()) +
                        " error vectors");
    }
    std::vector<FlagRecord> out;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        const auto& s = scores[i];
        if (!(s.a > threshold.value)) continue;
        out.push_back({s.sol, s.start_t, s.end_t, s.a, threshold.value, top_contributors(errors[i], s.a, mask)});
    }
    return out;
}

void write_report_csv(std::span<const FlagRecord> flags, const std::filesystem::path& path) {
    std::ostringstream out;
    out << "sol,start_t,score,threshold,feature_1,e_1,feature_2,e_2,feature_3,e_3\n";
    for (const auto& f : flags) {
        out << f.sol << ',' << detail::format_double(f.start_t) << ',' << detail::format_double(f.score) << ','
            << detail::format_double(f.threshold);
        for (std::size_t i = 0; i < kMaxContributors; ++i) {
            if (i < f.contributors.size()) {
                out << ',' << f.contributors[i].feature << ',' << detail::format_double(f.contributors[i].magnitude);
            } else {
                out << ",,";
            }
        }
        out << '\n';
    }
    write_text_file(path, out.str());
}

std::string report_to_json(std::span<const FlagRecord> flags, const ReportMeta& meta) {
    nlohmann::json records = nlohmann::json::array();
    for (const auto& f : flags) {
        nlohmann::json contributors = nlohmann::json::array();
        for (const auto& c : f.contributors) {
            contributors.push_back({{"feature", c.feature}, {"index", c.index}, {"e", c.magnitude}});
        }
        records.push_back({{"sol", f.sol},
                           {"start_t", f.start_t},
                           {"end_t", f.end_t},
                           {"score", f.score},
                           {"threshold", f.threshold},
                           {"contributors", std::move(contributors)}});
    }
    nlohmann::json j{{"variant", variant_name(meta.variant)},
                     {"percentile", meta.percentile},
                     {"threshold", meta.threshold},
                     {"windows", meta.windows},
                     {"flags", std::move(records)}};
    return j.dump(1) + "\n";
}

std::vector<FlagRecord> report_from_json(std::string_view text, ReportMeta* meta) {
    try {
        const auto j = nlohmann::json::parse(text);
        if (meta) {
            meta->variant = parse_variant(j.at("variant").get<std::string>());
            meta->percentile = j.at("percentile").get<double>();
            meta->threshold = j.at("threshold").get<double>();
            meta->windows = j.at("windows").get<std::size_t>();
        }
        std::vector<FlagRecord> out;
        for (const auto& r : j.at("flags")) {
            FlagRecord f;
            f.sol = r.at("sol").get<std::int64_t>();
            f.start_t = r.at("start_t").get<double>();
            f.end_t = r.at("end_t").get<double>();
            f.score = r.at("score").get<double>();
            f.threshold = r.at("threshold").get<double>();
            for (const auto& c : r.at("contributors")) {
                f.contributors.push_back(
                    {c.at("index").get<std::size_t>(), c.at("feature").get<std::string>(), c.at("e").get<double>()});
            }
            out.push_back(std::move(f));
        }
        return out;
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(std::string("report JSON error: ") + e.what());
    }
}

void write_report_json(std::span<const FlagRecord> flags, const ReportMeta& meta, const std::filesystem::path& path) {
    write_text_file(path, report_to_json(flags, meta));
}

std::vector<FlagRecord> read_report_json(const std::filesystem::path& path, ReportMeta* meta) {
    return report_from_json(read_text_file(path), meta);
}

void write_scores_csv(std::span<const ScoreRow> rows, const std::filesystem::path& path) {
    std::ostringstream out;
    out << "sol,start_t,end_t,score,flagged\n";
    for (const auto& r : rows) {
        out << r.sol << ',' << detail::format_double(r.start_t) << ',' << detail::format_double(r.end_t) << ','
            << detail::format_double(r.score) << ',' << (r.flagged ? 1 : 0) << '\n';
    }
    write_text_file(path, out.str());
}

std::vector<ScoreRow> read_scores_csv(const std::filesystem::path& path) {
    std::istringstream in(read_text_file(path));
    std::string line;
    if (!std::getline(in, line) || line.rfind("sol,start_t,end_t,score,flagged", 0) != 0) {
        throw SchemaError(path.string() + ": not a scores CSV");
    }
    std::vector<ScoreRow> rows;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        ++row;
        const auto cells = detail::split_csv_line(line);
        double sol = 0.0, flagged = 0.0;
        ScoreRow r;
        if (cells.size() != 5 || !detail::parse_finite(cells[0], sol) || !detail::parse_finite(cells[1], r.start_t) ||
            !detail::parse_finite(cells[2], r.end_t) || !detail::parse_finite(cells[3], r.score) ||
            !detail::parse_finite(cells[4], flagged)) {
            throw DataError(path.string() + ": malformed row " + std::to_string(row));
        }
        r.sol = static_cast<std::int64_t>(sol);
        r.flagged = flagged != 0.0;
        rows.push_back(r);
    }
    return rows;
}

}  // namespace roverad
