#include "mpguard/eval.hpp"

#include <stdexcept>

#include <json.hpp>

namespace mpguard::eval {

ConfusionMatrix score_pointwise(std::span<const std::uint8_t> pred,
                                const ingest::LabelIntervals& truth) {
    if (pred.size() != truth.per_step.size())
        throw std::invalid_argument("score_pointwise: prediction/truth length mismatch");
    ConfusionMatrix cm;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const bool p = pred[i] != 0;
        const bool t = truth.per_step[i] != 0;
        if (p && t)
            ++cm.tp;
        else if (p && !t)
            ++cm.fp;
        else if (!p && t)
            ++cm.fn;
        else
            ++cm.tn;
    }
    return cm;
}

double accuracy(const ConfusionMatrix& cm) {
    const std::int64_t total = cm.total();
    if (total == 0) return 1.0; // nothing scored, vacuously perfect
    return static_cast<double>(cm.tp + cm.tn) / static_cast<double>(total);
}

double f1(const ConfusionMatrix& cm) {
    const std::int64_t denom = 2 * cm.tp + cm.fp + cm.fn;
    if (denom == 0) return 1.0; // no positives anywhere
    return 2.0 * static_cast<double>(cm.tp) / static_cast<double>(denom);
}

EventScore score_events(std::span<const core::Interval> pred,
                        std::span<const core::Interval> truth) {
    EventScore score;
    score.events_total = static_cast<std::int64_t>(truth.size());
    std::size_t p = 0;
    for (const auto& event : truth) {
        // both lists are sorted; advance past predictions ending before the event
        while (p < pred.size() && pred[p].end < event.start) ++p;
        const bool hit = p < pred.size() && pred[p].start <= event.end;
        score.per_event.push_back({event, hit});
        if (hit) ++score.events_hit;
    }
    return score;
}

DetectionReport make_report(std::span<const std::uint8_t> pred,
                            const ingest::LabelIntervals& truth) {
    DetectionReport report;
    report.confusion = score_pointwise(pred, truth);
    report.accuracy = accuracy(report.confusion);
    report.f1 = f1(report.confusion);

    const auto pred_intervals = ingest::LabelIntervals::from_per_step(
        std::vector<std::uint8_t>(pred.begin(), pred.end()));
    const EventScore events =
        score_events(pred_intervals.intervals, truth.intervals);
    report.events_total = events.events_total;
    report.events_hit = events.events_hit;
    report.per_event = events.per_event;
    return report;
}

std::string to_json(const DetectionReport& report) {
    nlohmann::ordered_json j;
    j["tp"] = report.confusion.tp;
    j["fp"] = report.confusion.fp;
    j["tn"] = report.confusion.tn;
    j["fn"] = report.confusion.fn;
    j["accuracy"] = report.accuracy;
    j["f1"] = report.f1;
    j["events_total"] = report.events_total;
    j["events_hit"] = report.events_hit;
    auto events = nlohmann::ordered_json::array();
    for (const auto& e : report.per_event) {
        nlohmann::ordered_json item;
        item["start"] = e.interval.start;
        item["end"] = e.interval.end;
        item["hit"] = e.hit;
        events.push_back(item);
    }
    j["per_event"] = events;
    return j.dump(2);
}

} // namespace mpguard::eval
