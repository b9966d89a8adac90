#include "lat/measurement.hpp"

#include <algorithm>

namespace lat {

std::optional<std::map<object_idx, event_idx>> support_of(const attestation_system& sys,
                                                          const event_poset& p, event_idx e) {
    const auto* m = std::get_if<meas_label>(&p.label(e));
    if (!m) throw analysis_error("event '" + p.id(e) + "' is not a measurement");
    std::map<object_idx, event_idx> out;
    if (m->by == sys.rtm()) return out;
    for (object_idx dep : dependency_set(sys, m->target, 1)) {
        std::optional<event_idx> earliest;
        for (event_idx i = 0; i < p.size(); ++i) {
            const auto* mi = std::get_if<meas_label>(&p.label(i));
            if (!mi || mi->target != dep || !p.precedes(i, e)) continue;
            if (!earliest) {
                earliest = i;
                continue;
            }
            // earliest = minimal under the order, ties by id for determinism
            if (p.precedes(i, *earliest) ||
                (!p.comparable(i, *earliest) && p.id(i) < p.id(*earliest)))
                earliest = i;
        }
        if (!earliest) return std::nullopt;
        out[dep] = *earliest;
    }
    return out;
}

bool measures_bottom_up(const attestation_system& sys, const event_poset& p) {
    for (event_idx i = 0; i < p.size(); ++i)
        if (is_measurement(p.label(i)) && !support_of(sys, p, i)) return false;
    return true;
}

avoidance_verdict classify_avoidance(const attestation_system& sys, const event_poset& p,
                                     event_idx e) {
    const auto* m = std::get_if<meas_label>(&p.label(e));
    if (!m) throw analysis_error("event '" + p.id(e) + "' is not a measurement");
    if (m->by == sys.rtm())
        throw analysis_error("event '" + p.id(e) + "' is measured by rtm; theorem does not apply");
    if (!support_of(sys, p, e))
        throw analysis_error("event '" + p.id(e) + "' is not well-supported");
    if (!detected_corruptions(p, sys).empty())
        throw analysis_error("execution detects corruptions; theorem hypotheses do not hold");
    if (measurement_output(p, e, sys).cls != meas_class::avoidance)
        throw analysis_error("event '" + p.id(e) + "' is not an avoidance event");

    avoidance_verdict verdict{e, m->target, {}, {}};
    auto d1 = dependency_set(sys, m->target, 1);
    auto d2 = dependency_set(sys, m->target, 2);

    std::vector<event_idx> att_starts;
    for (event_idx i = 0; i < p.size(); ++i)
        if (std::holds_alternative<att_start_label>(p.label(i))) att_starts.push_back(i);

    for (event_idx c = 0; c < p.size(); ++c) {
        const auto* cl = std::get_if<corr_label>(&p.label(c));
        if (!cl || !p.precedes(c, e)) continue;
        if (std::find(d1.begin(), d1.end(), cl->obj) != d1.end()) {
            for (event_idx mi = 0; mi < p.size(); ++mi) {
                const auto* ml = std::get_if<meas_label>(&p.label(mi));
                if (!ml || ml->target != cl->obj || !p.precedes(mi, c)) continue;
                bool since_nonce = std::any_of(att_starts.begin(), att_starts.end(),
                                               [&](event_idx a) { return p.precedes(a, mi); });
                verdict.recent.push_back({cl->obj, mi, c, since_nonce});
            }
        }
        if (std::find(d2.begin(), d2.end(), cl->obj) != d2.end())
            verdict.deep.push_back({cl->obj, c});
    }
    return verdict;
}

theorem1_report check_recent_or_deep(const attestation_system& sys, const event_poset& p) {
    theorem1_report rep;
    rep.detections = detected_corruptions(p, sys);
    if (!rep.detections.empty()) return rep;
    for (event_idx e = 0; e < p.size(); ++e) {
        const auto* m = std::get_if<meas_label>(&p.label(e));
        if (!m || measurement_output(p, e, sys).cls != meas_class::avoidance) continue;
        if (m->by == sys.rtm() || !support_of(sys, p, e)) {
            rep.uncovered.push_back(e);
            continue;
        }
        rep.verdicts.push_back(classify_avoidance(sys, p, e));
    }
    return rep;
}

}  // namespace lat
