#include <doctest.h>

#include "roverad/error.hpp"
#include "roverad/features.hpp"
#include "roverad/synth.hpp"
#include "support.hpp"

using namespace roverad;

namespace {

NominalProfile short_profile(double seconds) {
    NominalProfile p;
    p.duration_s = seconds;
    return p;
}

double peak_abs(const TelemetryStream& s, SensorChannel c, double t0, double t1) {
    double m = 0.0;
    for (const auto& f : s.frames()) {
        if (f.t >= t0 && f.t < t1) m = std::max(m, std::abs(f[c]));
    }
    return m;
}

double peak_deviation(const TelemetryStream& base, const TelemetryStream& s, SensorChannel c) {
    double m = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) m = std::max(m, std::abs(s[i][c] - base[i][c]));
    return m;
}

bool frames_equal(const TelemetryFrame& a, const TelemetryFrame& b) {
    return a.t == b.t && a.sol == b.sol && a.values == b.values;
}

}  // namespace

TEST_CASE("nominal generation") {
    const auto a = generate_nominal(short_profile(60.0), 5);
    const auto b = generate_nominal(short_profile(60.0), 5);
    const auto c = generate_nominal(short_profile(60.0), 6);
    CHECK(a.size() == 480);
    bool same = true, differs = false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        same = same && frames_equal(a[i], b[i]);
        differs = differs || a[i].values != c[i].values;
    }
    CHECK(same);
    CHECK(differs);
    CHECK(a[0].t == 0.0);
    CHECK(a[0].sol == 1);

    CHECK_THROWS_AS(generate_nominal(short_profile(3.0), 1), DataError);
    auto bad = short_profile(60.0);
    bad.accel_noise_z = -1.0;
    CHECK_THROWS_AS(generate_nominal(bad, 1), DataError);
}

TEST_CASE("nominal channels stay in their bands") {
    NominalProfile p = short_profile(1000.0);
    p.sol_length_s = 300.0;
    const auto s = generate_nominal(p, 77);
    const auto offsets = wheel_offsets(p);
    for (double o : offsets) CHECK(std::abs(o) <= p.current_offset_max);
    for (const auto& f : s.frames()) {
        for (std::size_t k = 0; k < kWheelCount; ++k) {
            const double base = p.base_current + offsets[k];
            CHECK(std::abs(f[current_channel(kWheels[k])] - base) <= 6 * p.current_noise);
        }
        for (auto ch : {SensorChannel::BogieLeft, SensorChannel::BogieRight, SensorChannel::DiffLeft,
                        SensorChannel::DiffRight}) {
            CHECK(std::abs(f[ch]) <= p.suspension_clamp);
        }
        for (double v : f.values) CHECK(std::isfinite(v));
    }
    CHECK(s[s.size() - 1].sol == 4);

    // Offsets belong to the rover, not the drive.
    NominalProfile q = p;
    q.rover_seed = 1;
    CHECK(wheel_offsets(p) == wheel_offsets(NominalProfile{}));
    CHECK(wheel_offsets(q) != wheel_offsets(p));
}

TEST_CASE("anomaly names") {
    for (auto k : kAnomalyKinds) CHECK(parse_anomaly(anomaly_name(k)) == k);
    CHECK(parse_anomaly("highslip") == AnomalyKind::HighSlip);
    CHECK(parse_anomaly("MTSC") == AnomalyKind::MTSC);
    CHECK_THROWS_AS(parse_anomaly("landslide"), DataError);
    CHECK(needs_wheel(AnomalyKind::MTSC));
    CHECK_FALSE(needs_wheel(AnomalyKind::RockDrop));
    CHECK(default_duration(AnomalyKind::MTSC) == 1.5);
}

TEST_CASE("injection leaves frames outside the event untouched") {
    const auto base = generate_nominal(short_profile(120.0), 3);
    for (auto kind : kAnomalyKinds) {
        const AnomalyEvent ev{kind, 50.0, default_duration(kind), Wheel::LM, 1.0};
        const auto s = inject(base, ev, 9);
        REQUIRE(s.size() == base.size());
        std::size_t changed = 0;
        for (std::size_t i = 0; i < s.size(); ++i) {
            if (ev.contains(s[i].t)) {
                changed += frames_equal(s[i], base[i]) ? 0 : 1;
            } else {
                CHECK(frames_equal(s[i], base[i]));
            }
            for (auto ch : {SensorChannel::BogieLeft, SensorChannel::BogieRight, SensorChannel::DiffLeft,
                            SensorChannel::DiffRight}) {
                CHECK(std::abs(s[i][ch]) <= NominalProfile{}.suspension_clamp);
            }
        }
        CHECK(changed > 0);
    }
}

TEST_CASE("injection signatures") {
    const NominalProfile p = short_profile(120.0);
    const auto base = generate_nominal(p, 4);

    SUBCASE("rock drop shakes the vertical axis") {
        const AnomalyEvent ev{AnomalyKind::RockDrop, 40.0, 4.0, std::nullopt, 1.0};
        const auto s = inject(base, ev, 1);
        CHECK(peak_abs(s, SensorChannel::AccelZ, ev.t0, ev.end()) >= 5 * 6 * p.accel_noise_z);

        const WindowSpec spec;
        const FeatureMask mask(Variant::Prime);
        const auto before = featurize_stream(base, spec, mask);
        const auto after = featurize_stream(s, spec, mask);
        const std::size_t std_az = FeatureId{DerivedChannel::body(SignalKind::AccelZ), Stat::Std}.index();
        double nominal_max = 0.0, event_max = 0.0;
        for (std::size_t i = 0; i < before.size(); ++i) {
            nominal_max = std::max(nominal_max, before[i].values[std_az]);
            if (ev.overlaps(after[i].start_t, after[i].end_t)) event_max = std::max(event_max, after[i].values[std_az]);
        }
        CHECK(event_max > 3 * nominal_max);
    }
    SUBCASE("startup current on one wheel") {
        const AnomalyEvent ev{AnomalyKind::MTSC, 30.0, 1.5, Wheel::LR, 1.0};
        const auto s = inject(base, ev, 1);
        CHECK(peak_abs(s, current_channel(Wheel::LR), ev.t0, ev.end()) >= 3 * p.base_current);
        for (auto w : kWheels) {
            if (w != Wheel::LR) CHECK(peak_deviation(base, s, current_channel(w)) <= 1e-12);
        }
        const auto d0 = derive_stream(base);
        const auto d1 = derive_stream(s);
        const auto pw = DerivedChannel::wheel_signal(SignalKind::Power, Wheel::LR);
        const auto i = static_cast<std::size_t>(ev.t0 * 8);
        CHECK(d1.at(i, pw) > 2.5 * d0.at(i, pw));
    }
    SUBCASE("wheelie unloads the wheel and lifts its bogie") {
        const AnomalyEvent ev{AnomalyKind::Wheelie, 60.0, 4.0, Wheel::RF, 1.0};
        const auto s = inject(base, ev, 1);
        const auto mid = static_cast<std::size_t>(62.0 * 8);
        CHECK(s[mid][current_channel(Wheel::RF)] < 0.4 * base[mid][current_channel(Wheel::RF)]);
        CHECK(s[mid][SensorChannel::BogieRight] - base[mid][SensorChannel::BogieRight] == doctest::Approx(0.08));
        CHECK(peak_deviation(base, s, SensorChannel::BogieLeft) == 0.0);
    }
    SUBCASE("high slip disturbs every wheel") {
        const AnomalyEvent ev{AnomalyKind::HighSlip, 70.0, 8.0, std::nullopt, 1.0};
        const auto s = inject(base, ev, 1);
        for (auto w : kWheels) {
            CHECK(peak_deviation(base, s, current_channel(w)) > 4 * p.current_noise);
            CHECK(peak_deviation(base, s, rate_channel(w)) > 0.0);
        }
    }
    SUBCASE("intense terrain") {
        const AnomalyEvent ev{AnomalyKind::IntenseTerrain, 20.0, 3.0, Wheel::RR, 1.0};
        const auto s = inject(base, ev, 1);
        const auto mid = static_cast<std::size_t>(21.5 * 8);
        CHECK(s[mid][current_channel(Wheel::RR)] > 3.5 * base[mid][current_channel(Wheel::RR)]);
        CHECK(s[mid][rate_channel(Wheel::RR)] < 0.2 * base[mid][rate_channel(Wheel::RR)]);
        CHECK(peak_deviation(base, s, SensorChannel::BogieRight) > 0.0);
    }
    SUBCASE("severity is monotone") {
        for (auto [kind, ch] : {std::pair{AnomalyKind::RockDrop, SensorChannel::AccelZ},
                                std::pair{AnomalyKind::MTSC, current_channel(Wheel::LF)}}) {
            double previous = 0.0;
            for (double sev : {0.5, 1.0, 2.0, 4.0}) {
                const AnomalyEvent ev{kind, 30.0, default_duration(kind), Wheel::LF, sev};
                const double peak = peak_deviation(base, inject(base, ev, 2), ch);
                CHECK(peak >= previous);
                previous = peak;
            }
        }
    }
    SUBCASE("bad events") {
        CHECK_THROWS_AS(inject(base, AnomalyEvent{AnomalyKind::RockDrop, 118.0, 4.0, std::nullopt, 1.0}, 1), DataError);
        CHECK_THROWS_AS(inject(base, AnomalyEvent{AnomalyKind::RockDrop, -1.0, 4.0, std::nullopt, 1.0}, 1), DataError);
        CHECK_THROWS_AS(inject(base, AnomalyEvent{AnomalyKind::MTSC, 10.0, 1.5, std::nullopt, 1.0}, 1), DataError);
        CHECK_THROWS_AS(inject(base, AnomalyEvent{AnomalyKind::RockDrop, 10.0, 4.0, std::nullopt, 0.0}, 1), DataError);
    }
}

TEST_CASE("datasets") {
    DatasetSpec spec;
    spec.train_s = 100.0;
    spec.test_s = 300.0;

    SUBCASE("no events means a nominal test stream") {
        const auto ds = make_dataset(spec, 1);
        CHECK(ds.test.events.empty());
        CHECK(ds.train.size() == 800);
        CHECK(ds.test.stream.size() == 2400);
        CHECK(ds.test.stream[0].values != ds.train[0].values);
        CHECK(ds.test.stream[0].sol > ds.train[ds.train.size() - 1].sol);
    }
    SUBCASE("labels survive") {
        spec.test_s = 2000.0;
        spec.events = schedule_events(parse_event_counts("mixed20"), spec.test_s, 0.0, 3);
        REQUIRE(spec.events.size() == 20);
        const auto ds = make_dataset(spec, 3);
        REQUIRE(ds.test.events.size() == 20);
        for (std::size_t i = 0; i < 20; ++i) {
            CHECK(ds.test.events[i].t0 == spec.events[i].t0);
            CHECK(ds.test.events[i].kind == spec.events[i].kind);
            if (i > 0) CHECK(ds.test.events[i - 1].end() + 4.0 <= ds.test.events[i].t0);
            CHECK(std::fmod(ds.test.events[i].t0, 0.125) == 0.0);
        }
        const auto again = make_dataset(spec, 3);
        CHECK(again.test.stream[5000].values == ds.test.stream[5000].values);
    }
    SUBCASE("overlapping events are rejected") {
        spec.events = {{AnomalyKind::RockDrop, 10.0, 4.0, std::nullopt, 1.0},
                       {AnomalyKind::HighSlip, 12.0, 8.0, std::nullopt, 1.0}};
        CHECK_THROWS_AS(make_dataset(spec, 1), DataError);
    }
    SUBCASE("events past the end are rejected") {
        spec.events = {{AnomalyKind::RockDrop, 299.0, 4.0, std::nullopt, 1.0}};
        CHECK_THROWS_AS(make_dataset(spec, 1), DataError);
    }
}

TEST_CASE("event counts and schedules") {
    const auto none = parse_event_counts("none");
    CHECK(none.total() == 0);
    const auto mixed = parse_event_counts("mixed8");
    CHECK(mixed.total() == 8);
    for (auto n : mixed.per_kind) CHECK(n >= 1);
    const auto listed = parse_event_counts("rockdrop=10,mtsc=10,wheelie=10,highslip=5,intenseterrain=5");
    CHECK(listed.total() == 40);
    CHECK(listed.per_kind[static_cast<std::size_t>(AnomalyKind::HighSlip)] == 5);
    CHECK_THROWS_AS(parse_event_counts("rockdrop"), DataError);
    CHECK_THROWS_AS(parse_event_counts("rockdrop=x"), DataError);
    CHECK_THROWS_AS(parse_event_counts("boulder=1"), DataError);

    const auto evs = schedule_events(listed, 2000.0, 0.0, 7, 1.5);
    REQUIRE(evs.size() == 40);
    for (const auto& e : evs) {
        CHECK(e.severity == 1.5);
        CHECK(e.wheel.has_value() == needs_wheel(e.kind));
        CHECK(e.duration_s == default_duration(e.kind));
        CHECK(e.t0 >= 0.0);
        CHECK(e.end() <= 2000.0);
    }
    CHECK_THROWS_AS(schedule_events(listed, 100.0, 0.0, 7), DataError);
}

TEST_CASE("labels json") {
    testsupport::TempDir dir("labels");
    const std::vector<AnomalyEvent> evs{{AnomalyKind::Wheelie, 12.5, 4.0, Wheel::RM, 2.0},
                                        {AnomalyKind::HighSlip, 40.0, 8.0, std::nullopt, 1.0}};
    write_labels(evs, dir / "labels.json");
    const auto back = read_labels(dir / "labels.json");
    REQUIRE(back.size() == 2);
    CHECK(back[0].wheel == Wheel::RM);
    CHECK(back[0].severity == 2.0);
    CHECK_FALSE(back[1].wheel.has_value());
    CHECK(labels_to_json(back) == labels_to_json(evs));
    const auto text = labels_to_json(evs);
    for (const char* key : {"\"kind\"", "\"t0\"", "\"duration\"", "\"wheel\"", "\"severity\""}) {
        CHECK(text.find(key) != std::string::npos);
    }
    CHECK_THROWS_AS(labels_from_json("{\"kind\": 1}"), SchemaError);
}
