#include "roverad/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <json.hpp>

#include "roverad/error.hpp"
#include "roverad/io.hpp"
#include "roverad/random.hpp"

namespace roverad {

namespace {

constexpr double kPeriod = TelemetryStream::kSamplePeriod;
constexpr double kTwoPi = 2.0 * std::numbers::pi;

// RockDrop: damped oscillation seen by the IMU after dropping off a rock.
constexpr double kDropPeak = 3.0;          // m/s^2 at severity 1
constexpr double kDropDecay = 0.8;         // s
constexpr double kDropFrequency = 4.0;     // Hz
constexpr double kDropXCoupling = 0.3;
constexpr double kDropBogiePeak = 0.002;   // rad

constexpr double kWheelieBogie = 0.08;     // rad at severity 1
constexpr double kWheelieUnload = 0.8;     // current falls to 20% at the crest

constexpr double kSlipNoiseGain = 4.0;     // x nominal current noise
constexpr int kSlipTailDof = 3;
constexpr double kSlipRateRipple = 0.05;   // rad/s
constexpr double kSlipRippleHz = 1.0;

constexpr double kTerrainSurge = 4.0;      // current multiplier at the crest
constexpr double kTerrainRateDrop = 0.9;
constexpr double kTerrainBogie = 0.03;     // rad
constexpr double kTerrainDiff = 0.02;      // rad
constexpr double kTerrainOscHz = 1.5;

constexpr std::array<std::string_view, 5> kKindNames{"RockDrop", "Wheelie", "MTSC", "HighSlip", "IntenseTerrain"};

SensorChannel bogie_of(Wheel w) { return is_left(w) ? SensorChannel::BogieLeft : SensorChannel::BogieRight; }
SensorChannel diff_of(Wheel w) { return is_left(w) ? SensorChannel::DiffLeft : SensorChannel::DiffRight; }

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
    return out;
}

}  // namespace

void NominalProfile::validate() const {
    if (!(duration_s >= 4.0)) throw DataError("profile duration must be >= 4 s");
    if (!(sol_length_s > 0.0)) throw DataError("sol length must be positive");
    for (double s : {current_offset_max, current_noise, voltage_jitter, rate_jitter, accel_noise_xy, accel_noise_z,
                     rotation_noise, suspension_step, suspension_reversion, suspension_clamp}) {
        if (!(s >= 0.0) || !std::isfinite(s)) throw DataError("profile noise parameters must be finite and >= 0");
    }
    if (suspension_reversion >= 1.0) throw DataError("suspension reversion must be < 1");
}

std::array<double, kWheelCount> wheel_offsets(const NominalProfile& profile) {
    Rng rng(mix_seed(profile.rover_seed, 7));
    std::array<double, kWheelCount> out{};
    for (auto& o : out) o = rng.uniform(-profile.current_offset_max, profile.current_offset_max);
    return out;
}

std::string_view anomaly_name(AnomalyKind k) { return kKindNames[static_cast<std::size_t>(k)]; }

AnomalyKind parse_anomaly(std::string_view name) {
    const auto want = lower(name);
    for (std::size_t i = 0; i < kKindNames.size(); ++i) {
        if (lower(kKindNames[i]) == want) return kAnomalyKinds[i];
    }
    throw DataError("unknown anomaly kind '" + std::string(name) + "'");
}

bool needs_wheel(AnomalyKind k) {
    return k == AnomalyKind::Wheelie || k == AnomalyKind::MTSC || k == AnomalyKind::IntenseTerrain;
}

double default_duration(AnomalyKind k) {
    switch (k) {
        case AnomalyKind::RockDrop: return 4.0;
        case AnomalyKind::Wheelie: return 4.0;
        case AnomalyKind::MTSC: return 1.5;
        case AnomalyKind::HighSlip: return 8.0;
        case AnomalyKind::IntenseTerrain: return 3.0;
    }
    return 4.0;
}

TelemetryStream generate_nominal(const NominalProfile& profile, std::uint64_t seed) {
    profile.validate();
    const auto n = static_cast<std::size_t>(std::llround(profile.duration_s / kPeriod));
    const auto offsets = wheel_offsets(profile);
    Rng rng(seed);

    std::array<double, 4> suspension{};  // bogie L/R, diff L/R
    constexpr std::array<SensorChannel, 4> kSuspension{SensorChannel::BogieLeft, SensorChannel::BogieRight,
                                                        SensorChannel::DiffLeft, SensorChannel::DiffRight};
    std::vector<TelemetryFrame> frames(n);
    for (std::size_t i = 0; i < n; ++i) {
        auto& f = frames[i];
        const double rel = static_cast<double>(i) * kPeriod;
        f.t = profile.start_t + rel;
        f.sol = profile.start_sol + static_cast<std::int64_t>(std::floor(rel / profile.sol_length_s));
        for (std::size_t k = 0; k < kWheelCount; ++k) {
            const Wheel w = kWheels[k];
            f[current_channel(w)] = rng.normal(profile.base_current + offsets[k], profile.current_noise);
            f[rate_channel(w)] = rng.normal(profile.wheel_rate, profile.rate_jitter);
            f[voltage_channel(w)] = rng.normal(profile.bus_voltage, profile.voltage_jitter);
        }
        f[SensorChannel::AccelX] = rng.normal(0.0, profile.accel_noise_xy);
        f[SensorChannel::AccelY] = rng.normal(0.0, profile.accel_noise_xy);
        f[SensorChannel::AccelZ] = rng.normal(0.0, profile.accel_noise_z);
        f[SensorChannel::RotX] = rng.normal(0.0, profile.rotation_noise);
        f[SensorChannel::RotY] = rng.normal(0.0, profile.rotation_noise);
        f[SensorChannel::RotZ] = rng.normal(0.0, profile.rotation_noise);
        for (std::size_t s = 0; s < suspension.size(); ++s) {
            suspension[s] = (1.0 - profile.suspension_reversion) * suspension[s] + rng.normal(0.0, profile.suspension_step);
            suspension[s] = std::clamp(suspension[s], -profile.suspension_clamp, profile.suspension_clamp);
            f[kSuspension[s]] = suspension[s];
        }
    }
    return TelemetryStream(std::move(frames));
}

TelemetryStream inject(const TelemetryStream& stream, const AnomalyEvent& event, std::uint64_t seed,
                       const NominalProfile& profile) {
    if (stream.empty()) throw DataError("cannot inject into an empty stream");
    if (!(event.severity > 0.0) || !(event.duration_s > 0.0)) {
        throw DataError("event severity and duration must be positive");
    }
    const double first = stream.frames().front().t;
    const double last = stream.frames().back().t + kPeriod;
    if (event.t0 < first - 1e-9 || event.end() > last + 1e-9) {
        throw DataError(std::string(anomaly_name(event.kind)) + " event [" + detail::format_double(event.t0) + ", " +
                        detail::format_double(event.end()) + ") lies outside the stream");
    }
    if (needs_wheel(event.kind) && !event.wheel) {
        throw DataError(std::string(anomaly_name(event.kind)) + " event needs a wheel");
    }

    std::vector<TelemetryFrame> frames = stream.frames();
    Rng rng(seed);
    const double sev = event.severity;
    const double clamp = profile.suspension_clamp;

    // tau runs from the first frame inside the interval so oscillation peaks land on samples.
    std::optional<double> origin;
    for (auto& f : frames) {
        if (!event.contains(f.t)) continue;
        if (!origin) origin = f.t;
        const double tau = f.t - *origin;
        // Smooth build-up and recovery over the event.
        const double bump = std::sin(std::numbers::pi * std::clamp(tau / event.duration_s, 0.0, 1.0));

        switch (event.kind) {
            case AnomalyKind::RockDrop: {
                const double osc = std::exp(-tau / kDropDecay) * std::cos(kTwoPi * kDropFrequency * tau);
                f[SensorChannel::AccelZ] += kDropPeak * sev * osc;
                f[SensorChannel::AccelX] += kDropXCoupling * kDropPeak * sev * osc;
                f[SensorChannel::BogieLeft] += kDropBogiePeak * sev * osc;
                f[SensorChannel::BogieRight] += kDropBogiePeak * sev * osc;
                break;
            }
            case AnomalyKind::MTSC: {
                f[current_channel(*event.wheel)] *= 3.0 + sev;
                break;
            }
            case AnomalyKind::Wheelie: {
                f[current_channel(*event.wheel)] *= 1.0 - kWheelieUnload * bump;
                f[bogie_of(*event.wheel)] += kWheelieBogie * sev * bump;
                break;
            }
            case AnomalyKind::HighSlip: {
                for (auto w : kWheels) {
                    f[current_channel(w)] += kSlipNoiseGain * sev * profile.current_noise * rng.student_t(kSlipTailDof);
                    f[rate_channel(w)] += kSlipRateRipple * sev * std::sin(kTwoPi * kSlipRippleHz * tau);
                }
                break;
            }
            case AnomalyKind::IntenseTerrain: {
                const Wheel w = *event.wheel;
                const double osc = std::sin(kTwoPi * kTerrainOscHz * tau);
                f[current_channel(w)] *= 1.0 + (kTerrainSurge * sev - 1.0) * bump;
                f[rate_channel(w)] *= 1.0 - kTerrainRateDrop * bump;
                f[bogie_of(w)] += kTerrainBogie * sev * osc;
                f[diff_of(w)] += kTerrainDiff * sev * osc;
                break;
            }
        }
        for (auto ch : {SensorChannel::BogieLeft, SensorChannel::BogieRight, SensorChannel::DiffLeft,
                        SensorChannel::DiffRight}) {
            f[ch] = std::clamp(f[ch], -clamp, clamp);
        }
    }
    return TelemetryStream(std::move(frames));
}

Dataset make_dataset(const DatasetSpec& spec, std::uint64_t seed) {
    NominalProfile train_profile = spec.profile;
    train_profile.duration_s = spec.train_s;
    auto train = generate_nominal(train_profile, mix_seed(seed, 10));

    NominalProfile test_profile = spec.profile;
    test_profile.duration_s = spec.test_s;
    test_profile.start_sol = train.frames().back().sol + 1;
    auto test = generate_nominal(test_profile, mix_seed(seed, 11));

    auto events = spec.events;
    std::sort(events.begin(), events.end(), [](const auto& a, const auto& b) { return a.t0 < b.t0; });
    for (std::size_t i = 1; i < events.size(); ++i) {
        if (events[i].t0 < events[i - 1].end()) {
            throw DataError("events overlap at t=" + detail::format_double(events[i].t0));
        }
    }
    for (std::size_t i = 0; i < events.size(); ++i) {
        test = inject(test, events[i], mix_seed(seed, 100 + i), test_profile);
    }
    return Dataset{std::move(train), LabeledStream{std::move(test), std::move(events)}};
}

std::size_t EventCounts::total() const {
    std::size_t n = 0;
    for (auto c : per_kind) n += c;
    return n;
}

EventCounts parse_event_counts(std::string_view spec) {
    EventCounts counts;
    const auto s = lower(spec);
    if (s.empty() || s == "none") return counts;
    if (s.rfind("mixed", 0) == 0) {
        // Cycle 2:2:2:1:1 over (RockDrop, MTSC, Wheelie, HighSlip, IntenseTerrain).
        constexpr std::array<AnomalyKind, 8> cycle{AnomalyKind::RockDrop, AnomalyKind::MTSC,     AnomalyKind::Wheelie,
                                                   AnomalyKind::HighSlip, AnomalyKind::IntenseTerrain,
                                                   AnomalyKind::RockDrop, AnomalyKind::MTSC,     AnomalyKind::Wheelie};
        std::size_t n = 0;
        const auto digits = s.substr(5);
        if (digits.empty() || digits.find_first_not_of("0123456789") != std::string::npos) {
            throw DataError("bad event spec '" + std::string(spec) + "'");
        }
        n = std::stoul(digits);
        for (std::size_t i = 0; i < n; ++i) ++counts.per_kind[static_cast<std::size_t>(cycle[i % cycle.size()])];
        return counts;
    }
    std::size_t start = 0;
    while (start <= s.size()) {
        const auto comma = s.find(',', start);
        const auto item = s.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
        const auto eq = item.find('=');
        if (eq == std::string::npos) throw DataError("bad event spec item '" + item + "'");
        const auto count = item.substr(eq + 1);
        if (count.empty() || count.find_first_not_of("0123456789") != std::string::npos) {
            throw DataError("bad event count in '" + item + "'");
        }
        counts.per_kind[static_cast<std::size_t>(parse_anomaly(item.substr(0, eq)))] += std::stoul(count);
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return counts;
}

std::vector<AnomalyEvent> schedule_events(const EventCounts& counts, double test_s, double start_t, std::uint64_t seed,
                                          double severity) {
    std::vector<AnomalyKind> kinds;
    for (std::size_t k = 0; k < kAnomalyKinds.size(); ++k) {
        kinds.insert(kinds.end(), counts.per_kind[k], kAnomalyKinds[k]);
    }
    if (kinds.empty()) return {};
    Rng rng(mix_seed(seed, 20));
    rng.shuffle(std::span<AnomalyKind>(kinds));

    constexpr double margin = 4.0;  // one window length of quiet on either side
    const double slot = test_s / static_cast<double>(kinds.size());
    std::vector<AnomalyEvent> events;
    for (std::size_t i = 0; i < kinds.size(); ++i) {
        AnomalyEvent e;
        e.kind = kinds[i];
        e.duration_s = default_duration(e.kind);
        e.severity = severity;
        const double room = slot - e.duration_s - 2.0 * margin;
        if (room < 0.0) {
            throw DataError(std::to_string(kinds.size()) + " events do not fit in " + detail::format_double(test_s) +
                            " s");
        }
        const double offset = static_cast<double>(i) * slot + margin + rng.uniform() * room;
        // Snap onto the 8 Hz grid; the overshoot (< one period) is far below the margin.
        e.t0 = start_t + std::ceil(offset / kPeriod) * kPeriod;
        if (needs_wheel(e.kind)) e.wheel = kWheels[rng.below(kWheelCount)];
        events.push_back(e);
    }
    return events;
}

std::string labels_to_json(std::span<const AnomalyEvent> events) {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& e : events) {
        j.push_back({{"kind", anomaly_name(e.kind)},
                     {"t0", e.t0},
                     {"duration", e.duration_s},
                     {"wheel", e.wheel ? nlohmann::json(std::string(wheel_name(*e.wheel))) : nlohmann::json(nullptr)},
                     {"severity", e.severity}});
    }
    return j.dump(1) + "\n";
}

std::vector<AnomalyEvent> labels_from_json(std::string_view text) {
    try {
        const auto j = nlohmann::json::parse(text);
        std::vector<AnomalyEvent> out;
        for (const auto& r : j) {
            AnomalyEvent e;
            e.kind = parse_anomaly(r.at("kind").get<std::string>());
            e.t0 = r.at("t0").get<double>();
            e.duration_s = r.at("duration").get<double>();
            if (!r.at("wheel").is_null()) e.wheel = parse_wheel(r.at("wheel").get<std::string>());
            e.severity = r.at("severity").get<double>();
            out.push_back(e);
        }
        return out;
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(std::string("labels JSON error: ") + e.what());
    }
}

void write_labels(std::span<const AnomalyEvent> events, const std::filesystem::path& path) {
    write_text_file(path, labels_to_json(events));
}

std::vector<AnomalyEvent> read_labels(const std::filesystem::path& path) {
    return labels_from_json(read_text_file(path));
}

}  // namespace roverad
