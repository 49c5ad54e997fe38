#include "mpguard/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "mpguard/util.hpp"

namespace mpguard::synthgen {

namespace {

using preprocess::ColumnInfo;
using preprocess::ColumnKind;

constexpr double kPi = 3.14159265358979323846;

double waveform_value(const ChannelSpec& ch, std::size_t t) {
    const double frac =
        static_cast<double>(t % ch.period) / static_cast<double>(ch.period);
    switch (ch.kind) {
    case Waveform::triangle: {
        const double tri = frac < 0.5 ? 2.0 * frac : 2.0 - 2.0 * frac;
        return ch.baseline + ch.amplitude * tri;
    }
    case Waveform::spiky: {
        // sharp rise, exponential backwash decay, high-frequency ripple
        const double body = frac < 0.08 ? frac / 0.08
                                        : std::exp(-3.0 * (frac - 0.08) / 0.92);
        const double ripple =
            0.10 * std::sin(14.0 * kPi * frac) + 0.05 * std::sin(34.0 * kPi * frac);
        return ch.baseline + ch.amplitude * (body + ripple);
    }
    case Waveform::boolean_actuator:
        return frac < 0.5 ? 1.0 : 0.0;
    }
    return ch.baseline;
}

void validate_config(const ProcessConfig& config) {
    if (config.channels.empty())
        throw std::invalid_argument("synthgen: config needs at least one channel");
    if (config.length == 0) throw std::invalid_argument("synthgen: length must be positive");
    for (const auto& ch : config.channels) {
        if (ch.period < 2)
            throw std::invalid_argument("synthgen: channel '" + ch.name + "' period must be >= 2");
        if (ch.noise_std < 0.0)
            throw std::invalid_argument("synthgen: channel '" + ch.name + "' noise must be >= 0");
        if (ch.kind == Waveform::boolean_actuator && ch.noise_std != 0.0)
            throw std::invalid_argument("synthgen: boolean channel '" + ch.name +
                                        "' cannot carry noise");
    }
}

bool is_boolean_channel(const ingest::Dataset& ds, std::size_t channel) {
    return ds.features.schema()[channel].kind == ColumnKind::boolean;
}

void validate_attack(const ingest::Dataset& ds, const AttackSpec& attack) {
    const auto rows = static_cast<std::int64_t>(ds.rows());
    if (attack.interval.start < 0 || attack.interval.end < attack.interval.start ||
        attack.interval.end >= rows)
        throw std::invalid_argument("inject_attacks: attack interval outside series");
    if (attack.channels.empty())
        throw std::invalid_argument("inject_attacks: attack targets no channel");
    for (std::size_t c : attack.channels)
        if (c >= ds.features.cols())
            throw std::invalid_argument("inject_attacks: channel index out of range");

    const bool multi_point =
        attack.kind == AttackKind::ssmp || attack.kind == AttackKind::msmp;
    const bool multi_stage =
        attack.kind == AttackKind::mssp || attack.kind == AttackKind::msmp;
    if (multi_point && attack.channels.size() < 2)
        throw std::invalid_argument("inject_attacks: " + to_string(attack.kind) +
                                    " must target >= 2 channels");
    if (!multi_point && attack.channels.size() != 1)
        throw std::invalid_argument("inject_attacks: " + to_string(attack.kind) +
                                    " must target exactly one channel");
    if (multi_stage && attack.stages.size() < 2)
        throw std::invalid_argument("inject_attacks: " + to_string(attack.kind) +
                                    " must span >= 2 effect stages");
    if (!multi_stage && attack.stages.size() != 1)
        throw std::invalid_argument("inject_attacks: " + to_string(attack.kind) +
                                    " must have exactly one stage");

    for (const Stage& stage : attack.stages) {
        if (stage.interval.start < attack.interval.start ||
            stage.interval.end > attack.interval.end ||
            stage.interval.end < stage.interval.start)
            throw std::invalid_argument("inject_attacks: stage outside the attack interval");
        for (std::size_t c : attack.channels) {
            if (!is_boolean_channel(ds, c)) continue;
            if (stage.effect == Effect::setpoint_shift)
                throw std::invalid_argument(
                    "inject_attacks: setpoint shift is invalid on a boolean channel");
            if (stage.effect == Effect::stuck_actuator && stage.magnitude != 0.0 &&
                stage.magnitude != 1.0)
                throw std::invalid_argument(
                    "inject_attacks: boolean channel can only stick at 0 or 1");
        }
        if (stage.effect == Effect::frequency_change && !(stage.magnitude > 0.0))
            throw std::invalid_argument(
                "inject_attacks: frequency change needs a positive factor");
    }
}

void apply_stage(core::Matrix& data, std::size_t channel, const Stage& stage) {
    const auto start = static_cast<std::size_t>(stage.interval.start);
    const auto end = static_cast<std::size_t>(stage.interval.end);
    switch (stage.effect) {
    case Effect::level_hold: {
        const double held = data.at(start, channel);
        for (std::size_t t = start; t <= end; ++t) data.at(t, channel) = held;
        break;
    }
    case Effect::setpoint_shift:
        for (std::size_t t = start; t <= end; ++t) data.at(t, channel) += stage.magnitude;
        break;
    case Effect::frequency_change: {
        // replay the recorded signal at `magnitude` x speed from the stage start
        std::vector<double> source(data.rows);
        for (std::size_t t = 0; t < data.rows; ++t) source[t] = data.at(t, channel);
        for (std::size_t t = start; t <= end; ++t) {
            const double offset = static_cast<double>(t - start) * stage.magnitude;
            std::size_t src = start + static_cast<std::size_t>(std::llround(offset));
            src = std::min(src, data.rows - 1);
            data.at(t, channel) = source[src];
        }
        break;
    }
    case Effect::stuck_actuator:
        for (std::size_t t = start; t <= end; ++t) data.at(t, channel) = stage.magnitude;
        break;
    }
}

} // namespace

ingest::Dataset generate(const ProcessConfig& config) {
    validate_config(config);

    core::Matrix data(config.length, config.channels.size());
    std::vector<ColumnInfo> schema(config.channels.size());
    for (std::size_t c = 0; c < config.channels.size(); ++c) {
        const ChannelSpec& ch = config.channels[c];
        schema[c].name = ch.name.empty() ? "ch" + std::to_string(c) : ch.name;
        schema[c].kind = ch.kind == Waveform::boolean_actuator ? ColumnKind::boolean
                                                               : ColumnKind::continuous;
        util::Rng64 rng(util::Rng64::derive_seed(config.seed, c));
        for (std::size_t t = 0; t < config.length; ++t) {
            double v = waveform_value(ch, t);
            if (ch.noise_std > 0.0) v += ch.noise_std * rng.next_gaussian();
            data.at(t, c) = v;
        }
    }

    ingest::Dataset ds;
    ds.features = preprocess::FeatureMatrix(std::move(data), std::move(schema));
    ds.labels = ingest::LabelIntervals::from_per_step(
        std::vector<std::uint8_t>(config.length, 0));
    ds.source = "synthgen seed=" + std::to_string(config.seed);
    return ds;
}

ingest::Dataset inject_attacks(const ingest::Dataset& ds,
                               std::span<const AttackSpec> attacks, std::uint64_t seed) {
    (void)seed; // reserved for stochastic effects; the four primitives are deterministic
    for (const AttackSpec& attack : attacks) validate_attack(ds, attack);

    core::Matrix data = ds.features.data();
    std::vector<std::uint8_t> labels = ds.labels.per_step;
    for (const AttackSpec& attack : attacks) {
        for (const Stage& stage : attack.stages)
            for (std::size_t c : attack.channels) apply_stage(data, c, stage);
        for (std::int64_t t = attack.interval.start; t <= attack.interval.end; ++t)
            labels[static_cast<std::size_t>(t)] = 1;
    }

    ingest::Dataset out;
    out.features = preprocess::FeatureMatrix(std::move(data), ds.features.schema());
    out.labels = ingest::LabelIntervals::from_per_step(std::move(labels));
    out.timestamps = ds.timestamps;
    out.source = ds.source;
    return out;
}

std::vector<AttackSpec> paper_mix_attacks(const ProcessConfig& config, std::uint64_t seed) {
    validate_config(config);
    if (config.channels.size() < 2)
        throw std::invalid_argument(
            "paper_mix_attacks: multi-point attacks need at least two channels");
    // the taxonomy counts reported for the real data
    std::vector<AttackKind> kinds;
    kinds.insert(kinds.end(), 26, AttackKind::sssp);
    kinds.insert(kinds.end(), 4, AttackKind::ssmp);
    kinds.insert(kinds.end(), 2, AttackKind::mssp);
    kinds.insert(kinds.end(), 4, AttackKind::msmp);

    util::Rng64 rng(util::Rng64::derive_seed(seed, 0x41544bULL));
    for (std::size_t i = kinds.size(); i > 1; --i)
        std::swap(kinds[i - 1], kinds[rng.next_below(i)]);

    const auto length = static_cast<std::int64_t>(config.length);
    const std::int64_t region_start = length * 2 / 5;
    const std::int64_t region_len = length - region_start - length / 50;
    const std::int64_t slot = region_len / static_cast<std::int64_t>(kinds.size());
    if (slot < 8)
        throw std::invalid_argument("paper_mix_attacks: series too short for 36 attacks");

    auto pick_effect = [&](bool boolean_target) {
        if (boolean_target) {
            constexpr Effect table[3] = {Effect::level_hold, Effect::stuck_actuator,
                                         Effect::frequency_change};
            return table[rng.next_below(3)];
        }
        constexpr Effect table[4] = {Effect::level_hold, Effect::setpoint_shift,
                                     Effect::frequency_change, Effect::stuck_actuator};
        return table[rng.next_below(4)];
    };

    auto magnitude_for = [&](Effect effect, const ChannelSpec& ch, bool boolean_target) {
        switch (effect) {
        case Effect::level_hold:
            return 0.0;
        case Effect::setpoint_shift: {
            const double base = std::max(3.5 * ch.noise_std, 0.25 * std::fabs(ch.amplitude));
            return rng.next_below(2) == 0 ? base : -base;
        }
        case Effect::frequency_change: {
            constexpr double factors[3] = {0.5, 2.0, 3.0};
            return factors[rng.next_below(3)];
        }
        case Effect::stuck_actuator:
            // 0/1 whenever a boolean channel is among the targets
            if (boolean_target) return static_cast<double>(rng.next_below(2));
            return ch.baseline + 0.5 * ch.amplitude;
        }
        return 0.0;
    };

    std::vector<AttackSpec> attacks;
    attacks.reserve(kinds.size());
    for (std::size_t a = 0; a < kinds.size(); ++a) {
        const std::int64_t slot_start = region_start + static_cast<std::int64_t>(a) * slot;
        const std::int64_t max_len = std::max<std::int64_t>(4, slot * 3 / 5);
        const std::int64_t min_len = std::max<std::int64_t>(2, slot / 5);
        const std::int64_t len =
            min_len + static_cast<std::int64_t>(
                          rng.next_below(static_cast<std::uint64_t>(max_len - min_len + 1)));
        const std::int64_t offset = static_cast<std::int64_t>(
            rng.next_below(static_cast<std::uint64_t>(slot - len + 1)));

        AttackSpec spec;
        spec.kind = kinds[a];
        spec.interval = {slot_start + offset, slot_start + offset + len - 1};

        const bool multi_point = spec.kind == AttackKind::ssmp || spec.kind == AttackKind::msmp;
        const bool multi_stage = spec.kind == AttackKind::mssp || spec.kind == AttackKind::msmp;

        spec.channels.push_back(rng.next_below(config.channels.size()));
        if (multi_point && config.channels.size() >= 2) {
            std::size_t second = rng.next_below(config.channels.size() - 1);
            if (second >= spec.channels[0]) ++second;
            spec.channels.push_back(second);
        }
        // any boolean target restricts the effect choices for every stage
        bool boolean_target = false;
        for (std::size_t c : spec.channels)
            boolean_target |= config.channels[c].kind == Waveform::boolean_actuator;

        const ChannelSpec& primary = config.channels[spec.channels.front()];
        if (!multi_stage) {
            const Effect effect = pick_effect(boolean_target);
            spec.stages.push_back(
                {spec.interval, effect, magnitude_for(effect, primary, boolean_target)});
        } else {
            const std::int64_t half = len / 2;
            const core::Interval first{spec.interval.start, spec.interval.start + half - 1};
            const core::Interval second{spec.interval.start + half, spec.interval.end};
            for (const auto& iv : {first, second}) {
                const Effect effect = pick_effect(boolean_target);
                spec.stages.push_back(
                    {iv, effect, magnitude_for(effect, primary, boolean_target)});
            }
        }
        attacks.push_back(std::move(spec));
    }
    return attacks;
}

ProcessConfig parse_process_config(std::string_view text) {
    ProcessConfig config;
    config.length = 0;
    std::vector<ChannelSpec> channels;
    auto channel_at = [&](std::size_t idx) -> ChannelSpec& {
        if (channels.size() <= idx) channels.resize(idx + 1);
        return channels[idx];
    };

    for (const auto& [key, value] : util::parse_key_values(text)) {
        if (key == "length") {
            const auto v = util::parse_int(value);
            if (!v || *v <= 0) throw std::invalid_argument("synth config: bad length");
            config.length = static_cast<std::size_t>(*v);
        } else if (key == "seed") {
            const auto v = util::parse_int(value);
            if (!v) throw std::invalid_argument("synth config: bad seed");
            config.seed = static_cast<std::uint64_t>(*v);
        } else if (key.starts_with("channel.")) {
            const std::size_t dot = key.find('.', 8);
            if (dot == std::string::npos)
                throw std::invalid_argument("synth config: malformed key '" + key + "'");
            const auto idx = util::parse_int(std::string_view(key).substr(8, dot - 8));
            if (!idx || *idx < 0)
                throw std::invalid_argument("synth config: bad channel index in '" + key + "'");
            ChannelSpec& ch = channel_at(static_cast<std::size_t>(*idx));
            const std::string field = key.substr(dot + 1);
            if (field == "name") {
                ch.name = value;
            } else if (field == "kind") {
                const std::string v = util::to_lower(value);
                if (v == "triangle")
                    ch.kind = Waveform::triangle;
                else if (v == "spiky")
                    ch.kind = Waveform::spiky;
                else if (v == "bool" || v == "boolean" || v == "boolean_actuator")
                    ch.kind = Waveform::boolean_actuator;
                else
                    throw std::invalid_argument("synth config: unknown waveform '" + value + "'");
            } else if (field == "period") {
                const auto v = util::parse_int(value);
                if (!v || *v < 2) throw std::invalid_argument("synth config: bad period");
                ch.period = static_cast<std::size_t>(*v);
            } else if (field == "amplitude" || field == "baseline" || field == "noise_std") {
                const auto v = util::parse_double(value);
                if (!v) throw std::invalid_argument("synth config: bad value for " + field);
                if (field == "amplitude")
                    ch.amplitude = *v;
                else if (field == "baseline")
                    ch.baseline = *v;
                else
                    ch.noise_std = *v;
            } else {
                throw std::invalid_argument("synth config: unknown field '" + field + "'");
            }
        } else {
            throw std::invalid_argument("synth config: unknown key '" + key + "'");
        }
    }
    if (channels.empty() || config.length == 0)
        throw std::invalid_argument("synth config: length and at least one channel required");
    config.channels = std::move(channels);
    return config;
}

ProcessConfig default_process_config(std::size_t length, std::uint64_t seed) {
    ProcessConfig config;
    config.length = length;
    config.seed = seed;
    config.channels = {
        {"LIT-301", Waveform::triangle, 2000, 50.0, 500.0, 0.5},
        {"DPIT-301", Waveform::spiky, 2000, 10.0, 25.0, 0.15},
        {"MV-301", Waveform::boolean_actuator, 3000, 1.0, 0.0, 0.0},
    };
    return config;
}

std::string to_string(AttackKind k) {
    switch (k) {
    case AttackKind::sssp: return "SSSP";
    case AttackKind::ssmp: return "SSMP";
    case AttackKind::mssp: return "MSSP";
    case AttackKind::msmp: return "MSMP";
    }
    return "SSSP";
}

std::string to_string(Effect e) {
    switch (e) {
    case Effect::level_hold: return "level_hold";
    case Effect::setpoint_shift: return "setpoint_shift";
    case Effect::frequency_change: return "frequency_change";
    case Effect::stuck_actuator: return "stuck_actuator";
    }
    return "level_hold";
}

} // namespace mpguard::synthgen
