#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mpguard/core.hpp"
#include "mpguard/ingest.hpp"

namespace mpguard::eval {

// Attack is the positive class.
struct ConfusionMatrix {
    std::int64_t tp = 0;
    std::int64_t fp = 0;
    std::int64_t tn = 0;
    std::int64_t fn = 0;

    std::int64_t total() const noexcept { return tp + fp + tn + fn; }
    friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

ConfusionMatrix score_pointwise(std::span<const std::uint8_t> pred,
                                const ingest::LabelIntervals& truth);

// (tp + tn) / total; an empty evaluation counts as 1 (vacuously perfect).
double accuracy(const ConfusionMatrix& cm);

// 2tp / (2tp + fp + fn); defined as 1 when no positives exist anywhere.
double f1(const ConfusionMatrix& cm);

struct EventResult {
    core::Interval interval;
    bool hit = false;
};

struct EventScore {
    std::int64_t events_total = 0;
    std::int64_t events_hit = 0;
    std::vector<EventResult> per_event;
};

// A truth event is hit when any predicted interval overlaps it by >= 1 step.
// Both lists must be sorted and disjoint.
EventScore score_events(std::span<const core::Interval> pred,
                        std::span<const core::Interval> truth);

struct DetectionReport {
    ConfusionMatrix confusion;
    double accuracy = 0.0;
    double f1 = 0.0;
    std::int64_t events_total = 0;
    std::int64_t events_hit = 0;
    std::vector<EventResult> per_event;
};

DetectionReport make_report(std::span<const std::uint8_t> pred,
                            const ingest::LabelIntervals& truth);

// Fixed key names: tp, fp, tn, fn, accuracy, f1, events_total, events_hit,
// per_event (objects with start, end, hit).
std::string to_json(const DetectionReport& report);

} // namespace mpguard::eval
