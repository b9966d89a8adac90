#pragma once

#include <map>
#include <optional>
#include <vector>

#include "lat/poset.hpp"

namespace lat {

// Earliest prior measurement of each D^1 dependency of the target, when
// every dependency has one. Measurements by rtm are vacuously supported
// (empty map); absent means not well-supported.
std::optional<std::map<object_idx, event_idx>> support_of(const attestation_system& sys,
                                                          const event_poset& p, event_idx e);

// True iff every measurement event of p is well-supported.
bool measures_bottom_up(const attestation_system& sys, const event_poset& p);

struct recent_witness {
    object_idx obj;          // in D^1 of the avoided target
    event_idx measured_at;   // measurement of obj
    event_idx corrupted_at;  // corr(obj) after it, before the avoidance
    bool since_nonce;        // an att-start event precedes measured_at
};

struct deep_witness {
    object_idx obj;  // in D^2 of the avoided target
    event_idx corrupted_at;
};

struct avoidance_verdict {
    event_idx event;
    object_idx target;
    std::vector<recent_witness> recent;
    std::vector<deep_witness> deep;

    bool witnessed() const { return !recent.empty() || !deep.empty(); }
};

// All recent-or-deep witnesses for one avoidance event. Preconditions
// (well-supported, non-rtm measurer, execution detects no corruptions,
// adversary avoids detection at e) are enforced with analysis_error.
avoidance_verdict classify_avoidance(const attestation_system& sys, const event_poset& p,
                                     event_idx e);

struct theorem1_report {
    std::vector<event_idx> detections;  // nonempty: theorem hypotheses do not apply
    std::vector<avoidance_verdict> verdicts;
    std::vector<event_idx> uncovered;  // avoidance at rtm measurements or unsupported ones

    bool failed() const {
        for (const auto& v : verdicts)
            if (!v.witnessed()) return true;
        return false;
    }
};

// Verdicts for every avoidance event the theorem covers. A verdict without
// witnesses is a semantics bug and marks the report failed.
theorem1_report check_recent_or_deep(const attestation_system& sys, const event_poset& p);

}  // namespace lat
