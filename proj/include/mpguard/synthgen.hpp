#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mpguard/core.hpp"
#include "mpguard/ingest.hpp"

namespace mpguard::synthgen {

// triangle: smooth periodic tank level; spiky: rugged periodic differential
// pressure; boolean_actuator: 0/1 square wave, never noisy.
enum class Waveform { triangle, spiky, boolean_actuator };

struct ChannelSpec {
    std::string name;
    Waveform kind = Waveform::triangle;
    std::size_t period = 2000;
    double amplitude = 1.0;
    double baseline = 0.0;
    double noise_std = 0.0;
};

struct ProcessConfig {
    std::vector<ChannelSpec> channels;
    std::size_t length = 0;
    std::uint64_t seed = 0;
};

enum class AttackKind { sssp, ssmp, mssp, msmp };

enum class Effect {
    level_hold,      // freeze at the value observed at stage start
    setpoint_shift,  // add magnitude
    frequency_change,// replay the original signal at `magnitude` x speed
    stuck_actuator   // force the constant value `magnitude`
};

struct Stage {
    core::Interval interval;
    Effect effect = Effect::level_hold;
    double magnitude = 0.0;
};

struct AttackSpec {
    AttackKind kind = AttackKind::sssp;
    std::vector<std::size_t> channels; // >= 2 for ssmp / msmp
    core::Interval interval;           // labeled span, covers all stages
    std::vector<Stage> stages;         // exactly 1 for single-stage kinds, >= 2 otherwise
};

// All-normal labeled data, deterministic under the seed; per-channel noise
// streams are derived from (seed, channel index).
ingest::Dataset generate(const ProcessConfig& config);

// Applies every attack's stages to its target channels and sets the label to
// 1 exactly on the attack intervals. The seed is reserved for effects that
// draw randomness; the four primitive effects are deterministic.
ingest::Dataset inject_attacks(const ingest::Dataset& ds,
                               std::span<const AttackSpec> attacks, std::uint64_t seed);

// The taxonomy mix reported for the SWaT data: 26 SSSP + 4 SSMP + 2 MSSP +
// 4 MSMP attacks placed in the second part of the series.
std::vector<AttackSpec> paper_mix_attacks(const ProcessConfig& config, std::uint64_t seed);

// Key=value channel description, e.g.
//   length=250000
//   seed=7
//   channel.0.name=LIT-301
//   channel.0.kind=triangle
//   channel.0.period=2000
//   channel.0.amplitude=50
//   channel.0.baseline=500
//   channel.0.noise_std=0.5
ProcessConfig parse_process_config(std::string_view text);

// Three-channel default plant (triangle + spiky + actuator).
ProcessConfig default_process_config(std::size_t length, std::uint64_t seed);

std::string to_string(AttackKind k);
std::string to_string(Effect e);

} // namespace mpguard::synthgen
