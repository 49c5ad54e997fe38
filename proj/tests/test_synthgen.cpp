#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "mpguard/ingest.hpp"
#include "mpguard/matrix_profile.hpp"
#include "mpguard/synthgen.hpp"
#include "mpguard/util.hpp"

using namespace mpguard;
using synthgen::AttackKind;
using synthgen::AttackSpec;
using synthgen::Effect;
using synthgen::Waveform;

namespace {

// lag of the strongest autocorrelation peak in [lo, hi]; every lag is scored
// over the same fixed sample window so term counts introduce no bias
std::size_t autocorr_peak(const std::vector<double>& x, std::size_t lo, std::size_t hi) {
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= static_cast<double>(x.size());
    const std::size_t window = x.size() - hi;
    double best = -1e300;
    std::size_t best_lag = lo;
    for (std::size_t lag = lo; lag <= hi; ++lag) {
        double acc = 0.0;
        for (std::size_t t = 0; t < window; ++t)
            acc += (x[t] - mean) * (x[t + lag] - mean);
        if (acc > best) {
            best = acc;
            best_lag = lag;
        }
    }
    return best_lag;
}

} // namespace

TEST_CASE("generation is labeled all-normal and deterministic") {
    const auto config = synthgen::default_process_config(12000, 99);
    const auto a = synthgen::generate(config);
    CHECK(a.rows() == 12000);
    CHECK(a.labels.intervals.empty());
    for (auto s : a.labels.per_step) CHECK(s == 0);

    const auto b = synthgen::generate(config);
    CHECK(a.features.data().values == b.features.data().values);

    auto other = config;
    other.seed = 100;
    const auto c = synthgen::generate(other);
    CHECK(a.features.data().values != c.features.data().values);
}

TEST_CASE("the triangle channel repeats at its configured period") {
    synthgen::ProcessConfig config;
    config.length = 12000;
    config.seed = 3;
    config.channels = {{"lvl", Waveform::triangle, 800, 10.0, 100.0, 0.0}};
    const auto clean = synthgen::generate(config);
    CHECK(autocorr_peak(clean.features.column(0), 400, 1200) == 800);

    // sensor noise may nudge the empirical peak by a sample or two
    config.channels[0].noise_std = 0.05;
    const auto noisy = synthgen::generate(config);
    const auto peak = autocorr_peak(noisy.features.column(0), 400, 1200);
    CHECK(peak >= 796);
    CHECK(peak <= 804);
}

TEST_CASE("boolean actuators stay strictly 0/1") {
    synthgen::ProcessConfig config;
    config.length = 5000;
    config.seed = 8;
    config.channels = {{"mv", Waveform::boolean_actuator, 700, 1.0, 0.0, 0.0}};
    const auto ds = synthgen::generate(config);
    CHECK(ds.features.schema()[0].kind == preprocess::ColumnKind::boolean);
    for (double v : ds.features.column(0)) CHECK((v == 0.0 || v == 1.0));

    config.channels[0].noise_std = 0.1;
    CHECK_THROWS_AS(synthgen::generate(config), std::invalid_argument);
}

TEST_CASE("a level hold freezes exactly the attacked span of one channel") {
    const auto config = synthgen::default_process_config(8000, 5);
    const auto base = synthgen::generate(config);

    AttackSpec attack;
    attack.kind = AttackKind::sssp;
    attack.channels = {0};
    attack.interval = {1000, 1500};
    attack.stages = {{{1000, 1500}, Effect::level_hold, 0.0}};

    const auto attacked = synthgen::inject_attacks(base, std::array{attack}, 1);

    for (std::size_t t = 0; t < attacked.rows(); ++t) {
        const bool inside = t >= 1000 && t <= 1500;
        CHECK(attacked.labels.per_step[t] == (inside ? 1 : 0));
        if (inside)
            CHECK(attacked.features.at(t, 0) == attacked.features.at(1000, 0));
        else
            CHECK(attacked.features.at(t, 0) == base.features.at(t, 0));
        // untargeted channels never move
        CHECK(attacked.features.at(t, 1) == base.features.at(t, 1));
        CHECK(attacked.features.at(t, 2) == base.features.at(t, 2));
    }
    REQUIRE(attacked.labels.intervals.size() == 1);
    CHECK(attacked.labels.intervals[0] == core::Interval{1000, 1500});
}

TEST_CASE("labels reconstruct the injected intervals exactly") {
    const auto config = synthgen::default_process_config(20000, 6);
    const auto base = synthgen::generate(config);

    std::vector<AttackSpec> attacks;
    AttackSpec shift;
    shift.kind = AttackKind::sssp;
    shift.channels = {0};
    shift.interval = {3000, 3400};
    shift.stages = {{{3000, 3400}, Effect::setpoint_shift, 25.0}};
    attacks.push_back(shift);

    AttackSpec multi;
    multi.kind = AttackKind::msmp;
    multi.channels = {0, 1};
    multi.interval = {9000, 9800};
    multi.stages = {{{9000, 9399}, Effect::setpoint_shift, 10.0},
                    {{9400, 9800}, Effect::frequency_change, 2.0}};
    attacks.push_back(multi);

    const auto attacked = synthgen::inject_attacks(base, attacks, 2);
    REQUIRE(attacked.labels.intervals.size() == 2);
    CHECK(attacked.labels.intervals[0] == core::Interval{3000, 3400});
    CHECK(attacked.labels.intervals[1] == core::Interval{9000, 9800});
}

TEST_CASE("attack taxonomy invariants are enforced") {
    const auto config = synthgen::default_process_config(5000, 1);
    const auto base = synthgen::generate(config);

    AttackSpec bad;
    bad.kind = AttackKind::ssmp;
    bad.channels = {0}; // multi-point needs >= 2
    bad.interval = {100, 200};
    bad.stages = {{{100, 200}, Effect::level_hold, 0.0}};
    CHECK_THROWS_AS(synthgen::inject_attacks(base, std::array{bad}, 1), std::invalid_argument);

    AttackSpec single_stage;
    single_stage.kind = AttackKind::mssp;
    single_stage.channels = {0};
    single_stage.interval = {100, 200};
    single_stage.stages = {{{100, 200}, Effect::level_hold, 0.0}}; // needs >= 2
    CHECK_THROWS_AS(synthgen::inject_attacks(base, std::array{single_stage}, 1),
                    std::invalid_argument);

    AttackSpec shift_bool;
    shift_bool.kind = AttackKind::sssp;
    shift_bool.channels = {2}; // the boolean actuator
    shift_bool.interval = {100, 200};
    shift_bool.stages = {{{100, 200}, Effect::setpoint_shift, 1.0}};
    CHECK_THROWS_AS(synthgen::inject_attacks(base, std::array{shift_bool}, 1),
                    std::invalid_argument);

    AttackSpec outside;
    outside.kind = AttackKind::sssp;
    outside.channels = {0};
    outside.interval = {4900, 5200};
    outside.stages = {{{4900, 5200}, Effect::level_hold, 0.0}};
    CHECK_THROWS_AS(synthgen::inject_attacks(base, std::array{outside}, 1),
                    std::invalid_argument);
}

TEST_CASE("stuck and frequency effects keep booleans boolean") {
    const auto config = synthgen::default_process_config(10000, 31);
    const auto base = synthgen::generate(config);

    AttackSpec stuck;
    stuck.kind = AttackKind::sssp;
    stuck.channels = {2};
    stuck.interval = {2000, 2500};
    stuck.stages = {{{2000, 2500}, Effect::stuck_actuator, 1.0}};

    AttackSpec faster;
    faster.kind = AttackKind::sssp;
    faster.channels = {2};
    faster.interval = {6000, 6800};
    faster.stages = {{{6000, 6800}, Effect::frequency_change, 2.0}};

    const auto attacked = synthgen::inject_attacks(base, std::array{stuck, faster}, 3);
    for (double v : attacked.features.column(2)) CHECK((v == 0.0 || v == 1.0));
    for (std::size_t t = 2000; t <= 2500; ++t) CHECK(attacked.features.at(t, 2) == 1.0);
}

TEST_CASE("the paper-mix preset reproduces the taxonomy counts") {
    const auto config = synthgen::default_process_config(250000, 17);
    const auto attacks = synthgen::paper_mix_attacks(config, 17);
    REQUIRE(attacks.size() == 36);

    std::size_t sssp = 0, ssmp = 0, mssp = 0, msmp = 0;
    for (const auto& a : attacks) {
        switch (a.kind) {
        case AttackKind::sssp: ++sssp; break;
        case AttackKind::ssmp: ++ssmp; break;
        case AttackKind::mssp: ++mssp; break;
        case AttackKind::msmp: ++msmp; break;
        }
    }
    CHECK(sssp == 26);
    CHECK(ssmp == 4);
    CHECK(mssp == 2);
    CHECK(msmp == 4);

    // non-overlapping, sorted, and injectable as-is
    for (std::size_t i = 1; i < attacks.size(); ++i)
        CHECK(attacks[i].interval.start > attacks[i - 1].interval.end);
    const auto base = synthgen::generate(config);
    const auto attacked = synthgen::inject_attacks(base, attacks, 17);
    CHECK(attacked.labels.intervals.size() == 36);
}

TEST_CASE("strong attacks rise above the pre-attack profile noise") {
    // scaled-down version of the detectability premise
    synthgen::ProcessConfig config;
    config.length = 20000;
    config.seed = 220;
    config.channels = {{"lvl", Waveform::triangle, 1000, 20.0, 200.0, 0.3}};
    const auto base = synthgen::generate(config);

    AttackSpec attack;
    attack.kind = AttackKind::sssp;
    attack.channels = {0};
    attack.interval = {14000, 14400}; // duration >= m
    attack.stages = {{{14000, 14400}, Effect::setpoint_shift, 6.0}}; // 20x noise
    const auto attacked = synthgen::inject_attacks(base, std::array{attack}, 0);

    const std::size_t m = 200;
    const auto result =
        mp::compute_matrix_profile(attacked.channel("lvl"), m, mp::default_exclusion_radius(m));

    std::vector<double> pre(result.distances.begin(), result.distances.begin() + 12000);
    const double p99 = util::nearest_rank_quantile(pre, 0.99);
    double attack_peak = 0.0;
    for (std::size_t i = 14000 - m; i < 14400 && i < result.profile_length(); ++i)
        attack_peak = std::max(attack_peak, result.distances[i]);
    CHECK(attack_peak > p99);
}

TEST_CASE("emitted CSV is self-compatible with the loader") {
    const auto config = synthgen::default_process_config(4000, 44);
    auto base = synthgen::generate(config);
    const auto attacks = [&] {
        AttackSpec a;
        a.kind = AttackKind::sssp;
        a.channels = {1};
        a.interval = {2000, 2200};
        a.stages = {{{2000, 2200}, Effect::setpoint_shift, 5.0}};
        return std::array{a};
    }();
    base = synthgen::inject_attacks(base, attacks, 0);

    const auto path = std::filesystem::temp_directory_path() / "mpguard_synth_selfcompat.csv";
    ingest::write_csv(base, path);
    const auto reloaded = ingest::load_csv(path);
    std::error_code ec;
    std::filesystem::remove(path, ec);

    CHECK(reloaded.features.data().values == base.features.data().values);
    CHECK(reloaded.labels.per_step == base.labels.per_step);
    CHECK(reloaded.features.schema() == base.features.schema());
}

TEST_CASE("process configs parse from key=value text") {
    const auto config = synthgen::parse_process_config(
        "# plant\n"
        "length=5000\n"
        "seed=9\n"
        "channel.0.name=LIT-301\n"
        "channel.0.kind=triangle\n"
        "channel.0.period=1200\n"
        "channel.0.amplitude=40\n"
        "channel.0.baseline=480\n"
        "channel.0.noise_std=0.4\n"
        "channel.1.name=MV-101\n"
        "channel.1.kind=bool\n"
        "channel.1.period=900\n");
    CHECK(config.length == 5000);
    CHECK(config.seed == 9);
    REQUIRE(config.channels.size() == 2);
    CHECK(config.channels[0].name == "LIT-301");
    CHECK(config.channels[0].period == 1200);
    CHECK(config.channels[1].kind == Waveform::boolean_actuator);

    CHECK_THROWS_AS(synthgen::parse_process_config("length=0"), std::invalid_argument);
    CHECK_THROWS_AS(synthgen::parse_process_config("length=100\nchannel.0.kind=wat"),
                    std::invalid_argument);
}
