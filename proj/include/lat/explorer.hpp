#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "lat/bundling.hpp"
#include "lat/measurement.hpp"
#include "lat/poset.hpp"

namespace lat {

// Bounds for the bounded-exhaustive run. Enumeration is deterministic for a
// fixed budget; the seed rotates the adversary-event alphabet.
struct exploration_budget {
    unsigned max_adversary_events = 0;
    std::optional<std::vector<object_idx>> whitelist;  // default: every non-rtm object
    bool include_repairs = true;
    std::uint64_t max_executions = 100'000'000;
    std::uint64_t seed = 0;
};

enum relax_flags : unsigned {
    relax_none = 0,
    relax_prior_meas = 1u << 0,
    relax_fresh_meas = 1u << 1,
};

struct explore_options {
    unsigned workers = 0;           // 0: OpenMP default
    bool serial_reference = false;  // evaluate through the generic poset machinery
};

struct theorem_report {
    std::string mode;  // recent-or-deep | joint-strategy
    unsigned max_adversary_events = 0;
    bool include_repairs = true;
    std::uint64_t seed = 0;
    unsigned relax = relax_none;

    std::uint64_t total_available = 0;  // full universe size at these bounds
    std::uint64_t enumerated = 0;
    std::uint64_t skipped_invalid = 0;
    std::uint64_t filtered = 0;  // detecting executions / assumption violations
    std::uint64_t analyzed = 0;
    std::uint64_t avoidance_events = 0;
    std::uint64_t uncovered_avoidance_events = 0;
    std::map<std::string, std::uint64_t> verdicts;
    std::map<std::string, std::uint64_t> witness_classes;
    std::uint64_t failures = 0;
    std::optional<std::string> first_failure;  // execution document of the first failure
    bool budget_exhausted = false;

    std::string to_text() const;
    std::string to_json_text() const;
};

// Every total order over the base events plus up to max_adversary_events
// inserted corr/rep events that linearizes the base order, in canonical
// order. Executions failing validate_execution are skipped and counted.
struct enumeration_stats {
    std::uint64_t yielded = 0;
    std::uint64_t skipped_invalid = 0;
    bool budget_exhausted = false;
};
enumeration_stats enumerate_executions(const attestation_system& sys, const event_poset& base,
                                       const exploration_budget& budget,
                                       const std::function<bool(const event_poset&)>& visit);

// Theorem "recent or deep" over every enumerated execution of spec that
// detects no corruptions: each covered avoidance event must carry a
// recent-or-deep witness. Witness classes are keyed by the witness object's
// depth relative to the specification's sink target.
theorem_report verify_recent_or_deep(const attestation_system& sys, const event_poset& spec,
                                     const exploration_budget& budget,
                                     const explore_options& opts = {});

// Joint-strategy theorem over every enumerated execution of the scaffold:
// executions producing the scaffold's clean bundle and satisfying the
// (non-relaxed) assumptions must classify as admits-core, deep or recent.
theorem_report verify_joint_strategy(const attestation_system& sys, const event_poset& scaffold,
                                     const exploration_budget& budget, unsigned relax = relax_none,
                                     const explore_options& opts = {});

// First enumerated execution defeating the property under the relaxed
// assumptions: for measurement specifications a covered avoidance without a
// witness, for scaffolds an execution outside {admits-core, deep, recent}
// (or, when `against` is given, one that does not admit `against`).
std::optional<event_poset> find_counterexample(const attestation_system& sys,
                                               const event_poset& base,
                                               const exploration_budget& budget,
                                               unsigned relax = relax_none,
                                               const event_poset* against = nullptr);

// Quote outputs of the scaffold's quote events in topological order: the
// bundle every enumerated execution of the scaffold produces.
quote_bundle scaffold_bundle(const attestation_system& sys, const event_poset& scaffold);

}  // namespace lat
