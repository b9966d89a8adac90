#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "lat/measurement.hpp"
#include "lat/poset.hpp"

namespace lat {

struct quote_bundle {
    std::vector<term> quotes;
};

// A quote term taken apart: sig over (input, reported PCRs, their chains)
// with a TPM key known to the system.
struct parsed_quote {
    term original;
    term input;
    std::string tpm;
    std::vector<pcr_idx> pcrs;
    std::vector<std::vector<term>> chains;  // seq view per reported PCR
};

// Recognizes a quote structurally; absent when the term has a different
// shape, an unknown TPM key, or a value that is not a hash chain.
std::optional<parsed_quote> parse_quote(const attestation_system& sys, const term& t);

struct extraction_origin {
    std::size_t quote;     // index into the bundle
    pcr_idx pcr;           // reported PCR the value was contained in
    std::size_t position;  // chain position
};

struct extracted_spec {
    event_poset spec;  // measurement and att-start events only
    std::map<std::string, extraction_origin> origin;  // spec event id -> provenance
    std::vector<validation_entry> notes;
};

struct extraction_result {
    std::optional<extracted_spec> spec;
    std::vector<validation_entry> errors;  // nonempty iff extraction was rejected
    std::vector<validation_entry> notes;

    bool ok() const { return spec.has_value(); }
};

// Builds the measurement specification S(Q) of the bundling strategy: one
// measurement event per contained measurement value (measurer fixed by the
// M and L side conditions), one att-start per distinct nonce, ordered by
// quote containment. Rejection reasons (no measurer satisfying M and L,
// ambiguous measurer, malformed chain) come back as errors.
extraction_result extract_specification(const attestation_system& sys, const quote_bundle& bundle);

enum class compliance : std::uint8_t { complies, fails_bottom_up, extraction_failed };

struct compliance_result {
    compliance verdict;
    extraction_result extraction;
};

// The bundle complies with the bundling strategy iff S(bundle) measures
// bottom-up.
compliance_result complies_with_strategy(const attestation_system& sys, const quote_bundle& bundle);

// True iff some chain of some quote contains a bad measurement value.
bool bundle_indicates_corruption(const attestation_system& sys, const quote_bundle& bundle);

struct substructure_result {
    std::optional<std::vector<event_idx>> extends;  // recording extend per reported value
    std::vector<validation_entry> errors;
};

// The extend events of exec recording each measurement value reported in
// the bundle. Errors when exec does not produce some quote or lacks a
// recorder.
substructure_result extension_substructure(const attestation_system& sys, const event_poset& exec,
                                           const quote_bundle& bundle);

// Every member extending a value of MV(t) is either extended by rtm or
// preceded, for each o in D^1(t), by some extend of a value of MV(o).
bool extends_bottom_up(const attestation_system& sys, const event_poset& exec,
                       const std::vector<event_idx>& members);

// Core of a bottom-up specification: same events, order reduced to the
// support orderings between measurement events (transitively closed).
// Only measurement and att-start events are accepted.
event_poset core_of(const attestation_system& sys, const event_poset& spec);

struct a2_violation {
    event_idx ext_event;
    std::optional<event_idx> most_recent_meas;  // absent: no prior measurement at all
    std::string detail;
};

// Assumption: a regular component extends only the value it most recently
// produced by measuring the target.
std::vector<a2_violation> check_assumption_prior_meas(const attestation_system& sys,
                                                      const event_poset& exec);

struct a3_violation {
    event_idx meas_event;  // measurement of a D^1 dependency of the target
    event_idx ext_event;   // later extend of the target's value
};

// Assumption: once a dependency of t is remeasured, a regular component
// remeasures t before extending t's value.
std::vector<a3_violation> check_assumption_fresh_meas(const attestation_system& sys,
                                                      const event_poset& exec);

enum class joint_kind : std::uint8_t {
    admits_core,
    deep,
    recent,
    assumptions_violated,
    precondition_failed,
    theorem_failure,
};

struct joint_deep_witness {
    object_idx target;
    object_idx deep_obj;   // in D^2(target)
    event_idx corrupted_at;
};

struct joint_recent_witness {
    object_idx target;
    object_idx dep_obj;  // in D^1(target)
    event_idx measured_at;
    event_idx corrupted_at;
};

struct joint_verdict {
    joint_kind kind;
    std::optional<embedding> core_embedding;
    std::vector<joint_deep_witness> deep;
    std::vector<joint_recent_witness> recent;
    std::vector<validation_entry> problems;  // precondition or assumption details
};

// Theorem check for the joint strategy: an execution producing a clean,
// compliant bundle and satisfying both assumptions must admit the core of
// S(bundle), or carry a deep corruption, or a recent one. Anything else is
// a semantics bug and reported as theorem_failure.
joint_verdict check_joint_strategy(const attestation_system& sys, const event_poset& exec,
                                   const quote_bundle& bundle);

// Deep/recent witnesses over a whole execution (Theorem joint-strategy,
// outcome 2): used by the verdict and by the explorer.
std::vector<joint_deep_witness> find_deep_witnesses(const attestation_system& sys,
                                                    const event_poset& exec);
std::vector<joint_recent_witness> find_recent_witnesses(const attestation_system& sys,
                                                        const event_poset& exec);

}  // namespace lat
