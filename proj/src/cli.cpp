#include "roverad/cli.hpp"

#include <filesystem>
#include <iomanip>
#include <ostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "roverad/error.hpp"
#include "roverad/io.hpp"
#include "roverad/pipeline.hpp"

namespace roverad {

namespace fs = std::filesystem;

namespace {

struct GenerateArgs {
    fs::path out = "data";
    std::uint64_t seed = 1;
    std::uint64_t rover_seed = 0;
    double train_s = 5000.0;
    double test_s = 2000.0;
    std::string events = "none";
    double severity = 1.0;
};

struct TrainArgs {
    fs::path train;
    fs::path artifacts;
    std::string variant = "prime";
    double window_s = 4.0;
    double stride_s = 1.0;
    TrainConfig cfg;
    std::size_t log_every = 10;
};

struct CalibrateArgs {
    fs::path train;
    fs::path artifacts;
    double percentile = 99.9;
};

struct DetectArgs {
    fs::path test;
    fs::path artifacts;
    std::optional<double> percentile;
    std::string variant;
};

struct EvaluateArgs {
    fs::path artifacts;
    fs::path labels;
};

void require_file(const fs::path& p, const char* what) {
    if (!fs::is_regular_file(p)) {
        throw IoError(std::string(what) + " not found: " + p.string());
    }
}

PipelineConfig load_pipeline(const fs::path& dir) {
    PipelineConfig cfg;
    if (fs::is_regular_file(dir / artifact::kPipeline)) {
        read_pipeline_json(dir / artifact::kPipeline, cfg);
    }
    return cfg;
}

/// Loads the model and scaler and checks that they agree.
std::pair<Autoencoder, MinMaxScaler> load_model_and_scaler(const fs::path& dir) {
    require_file(dir / artifact::kModel, "model");
    require_file(dir / artifact::kScaler, "scaler");
    auto model = load_model(dir / artifact::kModel);
    auto scaler = MinMaxScaler::load(dir / artifact::kScaler);
    if (!model.variant()) {
        throw ArtifactError("model in " + dir.string() + " has no pipeline variant");
    }
    if (*model.variant() != scaler.variant()) {
        throw ArtifactError("artifact mismatch: " + std::string(variant_name(*model.variant())) + " model with " +
                            std::string(variant_name(scaler.variant())) + " scaler");
    }
    if (scaler.size() != model.input_dim()) {
        throw ArtifactError("artifact mismatch: scaler has " + std::to_string(scaler.size()) +
                            " features, model expects " + std::to_string(model.input_dim()));
    }
    return {std::move(model), std::move(scaler)};
}

void cmd_generate(const GenerateArgs& a, std::ostream& out) {
    fs::create_directories(a.out);
    DatasetSpec spec;
    spec.train_s = a.train_s;
    spec.test_s = a.test_s;
    spec.profile.rover_seed = a.rover_seed;
    spec.events = schedule_events(parse_event_counts(a.events), a.test_s, 0.0, a.seed, a.severity);
    const auto ds = make_dataset(spec, a.seed);
    write_stream(ds.train, a.out / "train.csv");
    write_stream(ds.test.stream, a.out / "test.csv");
    write_labels(ds.test.events, a.out / "labels.json");
    out << "wrote " << ds.train.size() << " training frames, " << ds.test.stream.size() << " test frames and "
        << ds.test.events.size() << " labeled events to " << a.out.string() << "\n";
}

void cmd_train(const TrainArgs& a, std::ostream& out, std::ostream& err) {
    require_file(a.train, "training CSV");
    PipelineConfig cfg;
    cfg.variant = parse_variant(a.variant);
    cfg.window = WindowSpec{a.window_s, a.stride_s, TelemetryStream::kSampleRateHz};
    cfg.train = a.cfg;

    const auto stream = read_stream(a.train);
    EpochObserver observer;
    if (a.log_every > 0) {
        observer = [&err, every = a.log_every](std::size_t epoch, double tl, double vl) {
            if (epoch % every == 0 || epoch == 1) {
                err << "epoch " << epoch << "  train " << std::setprecision(6) << tl << "  val " << vl << "\n";
            }
        };
    }
    auto trained = train_pipeline(stream, cfg, observer);

    fs::create_directories(a.artifacts);
    save_model(trained.model, a.artifacts / artifact::kModel);
    trained.scaler.save(a.artifacts / artifact::kScaler);
    write_loss_curve(trained.report, a.artifacts / artifact::kLossCurve);
    write_pipeline_json(cfg, a.artifacts / artifact::kPipeline);
    const nlohmann::json report{{"windows", trained.windows},
                                {"train_rows", trained.report.train_rows},
                                {"val_rows", trained.report.val_rows},
                                {"final_train_loss", trained.report.final_train_loss()},
                                {"final_val_loss", trained.report.final_val_loss()},
                                {"threads", trained.report.threads},
                                {"metadata", {{"duration_s", trained.report.duration_s}}}};
    write_text_file(a.artifacts / artifact::kTrainReport, report.dump(1) + "\n");
    out << "trained " << variant_name(cfg.variant) << " model on " << trained.windows << " windows; final loss "
        << trained.report.final_train_loss() << " (val " << trained.report.final_val_loss() << ")\n";
}

void cmd_calibrate(const CalibrateArgs& a, std::ostream& out) {
    require_file(a.train, "training CSV");
    const auto [model, scaler] = load_model_and_scaler(a.artifacts);
    const auto cfg = load_pipeline(a.artifacts);
    const auto stream = read_stream(a.train);
    const auto cal = calibrate_pipeline(model, scaler, stream, cfg.window, a.percentile);
    cal.threshold.save(a.artifacts / artifact::kThreshold);
    std::vector<ScoreRow> rows;
    rows.reserve(cal.scores.size());
    for (const auto& s : cal.scores) rows.push_back({s.sol, s.start_t, s.end_t, s.a, s.a > cal.threshold.value});
    write_scores_csv(rows, a.artifacts / artifact::kCalibrationScores);
    out << "threshold " << cal.threshold.value << " at the " << cal.threshold.percentile << "th percentile of "
        << cal.threshold.n << " training windows\n";
}

void cmd_detect(const DetectArgs& a, std::ostream& out) {
    require_file(a.test, "test CSV");
    const auto [model, scaler] = load_model_and_scaler(a.artifacts);
    if (!a.variant.empty() && parse_variant(a.variant) != scaler.variant()) {
        throw ArtifactError("artifacts hold a " + std::string(variant_name(scaler.variant())) + " model, not " +
                            a.variant);
    }
    const auto cfg = load_pipeline(a.artifacts);
    Threshold threshold;
    if (a.percentile) {
        // Re-derive the threshold from the stored calibration scores; no retraining.
        require_file(a.artifacts / artifact::kCalibrationScores, "calibration scores");
        std::vector<double> scores;
        for (const auto& r : read_scores_csv(a.artifacts / artifact::kCalibrationScores)) scores.push_back(r.score);
        threshold = calibrate(std::span<const double>(scores), *a.percentile);
    } else {
        require_file(a.artifacts / artifact::kThreshold, "threshold");
        threshold = Threshold::load(a.artifacts / artifact::kThreshold);
    }
    const auto stream = read_stream(a.test);
    const auto det = detect_pipeline(model, scaler, threshold, stream, cfg.window);
    write_report_csv(det.flags, a.artifacts / artifact::kReportCsv);
    write_report_json(det.flags, ReportMeta{scaler.variant(), threshold.percentile, threshold.value, det.windows.size()},
                      a.artifacts / artifact::kReportJson);
    write_scores_csv(det.windows, a.artifacts / artifact::kScores);
    out << det.flags.size() << " of " << det.windows.size() << " windows flagged (threshold " << threshold.value
        << ")\n";
}

void cmd_evaluate(const EvaluateArgs& a, std::ostream& out) {
    require_file(a.labels, "labels JSON");
    require_file(a.artifacts / artifact::kReportJson, "report");
    require_file(a.artifacts / artifact::kScores, "scores");
    const auto events = read_labels(a.labels);
    const auto flags = read_report_json(a.artifacts / artifact::kReportJson);
    const auto windows = read_scores_csv(a.artifacts / artifact::kScores);
    const auto metrics = evaluate(windows, flags, events);
    write_text_file(a.artifacts / artifact::kMetrics, metrics_to_json(metrics));
    for (auto k : kAnomalyKinds) {
        const auto& km = metrics[k];
        out << std::left << std::setw(16) << anomaly_name(k) << " events " << km.events << "  recall ";
        if (km.recall) out << *km.recall; else out << "n/a";
        out << "\n";
    }
    out << "false-positive rate ";
    if (metrics.false_positive_rate) out << *metrics.false_positive_rate; else out << "n/a";
    out << " over " << metrics.nominal_windows << " nominal windows\n";
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Rover mobility anomaly detection with undercomplete autoencoders", "roverad"};
    app.set_config("--config", "", "key=value config file; command-line flags take precedence");
    app.require_subcommand(1);

    GenerateArgs gen;
    auto* generate = app.add_subcommand("generate", "Write synthetic train/test telemetry and labels");
    generate->add_option("--out", gen.out, "Output directory")->capture_default_str();
    generate->add_option("--seed", gen.seed, "Master seed")->capture_default_str();
    generate->add_option("--rover-seed", gen.rover_seed, "Seed of the fixed per-wheel characteristics")
        ->capture_default_str();
    generate->add_option("--train-s", gen.train_s, "Training duration [s]")
        ->check(CLI::Range(4.0, 1e9))
        ->capture_default_str();
    generate->add_option("--test-s", gen.test_s, "Test duration [s]")->check(CLI::Range(4.0, 1e9))->capture_default_str();
    generate->add_option("--events", gen.events, "none | mixed<N> | kind=count,...")->capture_default_str();
    generate->add_option("--severity", gen.severity, "Severity of injected events")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();

    TrainArgs tr;
    auto* train_cmd = app.add_subcommand("train", "Featurize training telemetry and train an autoencoder");
    train_cmd->add_option("--train", tr.train, "Training telemetry CSV")->required();
    train_cmd->add_option("--artifacts", tr.artifacts, "Artifact directory")->required();
    train_cmd->add_option("--variant", tr.variant, "prime | refined")
        ->check(CLI::IsMember({"prime", "refined"}))
        ->capture_default_str();
    train_cmd->add_option("--window-s", tr.window_s, "Window length [s]")->capture_default_str();
    train_cmd->add_option("--stride-s", tr.stride_s, "Window stride [s]")->capture_default_str();
    train_cmd->add_option("--epochs", tr.cfg.epochs)->check(CLI::PositiveNumber)->capture_default_str();
    train_cmd->add_option("--batch-size", tr.cfg.batch_size)->check(CLI::PositiveNumber)->capture_default_str();
    train_cmd->add_option("--lr", tr.cfg.adam.learning_rate)->check(CLI::PositiveNumber)->capture_default_str();
    train_cmd->add_option("--val-fraction", tr.cfg.validation_fraction)
        ->check(CLI::Range(0.0, 1.0))
        ->capture_default_str();
    train_cmd->add_option("--seed", tr.cfg.seed)->capture_default_str();
    train_cmd->add_option("--log-every", tr.log_every, "Print losses every N epochs (0 = silent)")
        ->capture_default_str();

    CalibrateArgs cal;
    auto* calibrate_cmd = app.add_subcommand("calibrate", "Set the anomaly threshold from training windows");
    calibrate_cmd->add_option("--train", cal.train, "Training telemetry CSV")->required();
    calibrate_cmd->add_option("--artifacts", cal.artifacts, "Artifact directory")->required();
    calibrate_cmd->add_option("--percentile", cal.percentile)->check(CLI::Range(0.0, 100.0))->capture_default_str();

    DetectArgs det;
    auto* detect_cmd = app.add_subcommand("detect", "Score test telemetry and flag anomalous windows");
    detect_cmd->add_option("--test", det.test, "Test telemetry CSV")->required();
    detect_cmd->add_option("--artifacts", det.artifacts, "Artifact directory")->required();
    detect_cmd->add_option("--percentile", det.percentile, "Re-calibrate at this percentile")
        ->check(CLI::Range(0.0, 100.0));
    detect_cmd->add_option("--variant", det.variant, "Expected model variant")
        ->check(CLI::IsMember({"prime", "refined"}));

    EvaluateArgs ev;
    auto* evaluate_cmd = app.add_subcommand("evaluate", "Compare a detection report with ground-truth labels");
    evaluate_cmd->add_option("--artifacts", ev.artifacts, "Artifact directory")->required();
    evaluate_cmd->add_option("--labels", ev.labels, "labels.json from generate")->required();

    std::vector<const char*> argv;
    argv.reserve(args.size());
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "usage error: " << e.what() << "\n";
        return kExitUsage;
    }

    try {
        if (*generate) {
            cmd_generate(gen, out);
        } else if (*train_cmd) {
            cmd_train(tr, out, err);
        } else if (*calibrate_cmd) {
            cmd_calibrate(cal, out);
        } else if (*detect_cmd) {
            cmd_detect(det, out);
        } else if (*evaluate_cmd) {
            cmd_evaluate(ev, out);
        }
    } catch (const UsageError& e) {
        err << "usage error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const ArtifactError& e) {
        err << "artifact error: " << e.what() << "\n";
        return kExitArtifact;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return kExitData;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitFailure;
    }
    return kExitOk;
}

}  // namespace roverad
