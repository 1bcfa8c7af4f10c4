#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace roverad {

enum ExitCode : int {
    kExitOk = 0,
    kExitFailure = 1,
    kExitUsage = 2,
    kExitData = 3,
    kExitArtifact = 4,
};

/// Fixed artifact file names inside --artifacts.
namespace artifact {
inline constexpr const char* kModel = "model.json";
inline constexpr const char* kScaler = "scaler.json";
inline constexpr const char* kThreshold = "threshold.json";
inline constexpr const char* kReportCsv = "report.csv";
inline constexpr const char* kReportJson = "report.json";
inline constexpr const char* kScores = "scores.csv";
inline constexpr const char* kMetrics = "metrics.json";
inline constexpr const char* kLossCurve = "loss.csv";
inline constexpr const char* kTrainReport = "train_report.json";
inline constexpr const char* kCalibrationScores = "calibration_scores.csv";
inline constexpr const char* kPipeline = "pipeline.json";
}  // namespace artifact

/// Runs the `roverad` command line. args[0] is the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace roverad
