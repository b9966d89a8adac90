#pragma once

#include <stdexcept>
#include <string>

#include "lat/bundling.hpp"
#include "lat/measurement.hpp"
#include "lat/poset.hpp"
#include "lat/system.hpp"

namespace lat {

struct io_error : std::runtime_error {
    explicit io_error(const std::string& what) : std::runtime_error(what) {}
};

struct parsed_system {
    attestation_system sys;
    validation_report report;  // validate_system output, attached on every parse
};

// System document: objects, rtm, M, C, tpms, L, optional mv. Unknown names
// and malformed fields raise io_error with field context.
parsed_system parse_system(const std::string& text);
std::string serialize_system(const attestation_system& sys);

// Execution document: events (id + label string) and order cover edges.
// Syntax, unknown names and cyclic orders raise; semantic label checks are
// validate_execution's job.
event_poset parse_execution(const std::string& text, const attestation_system& sys);
std::string serialize_execution(const attestation_system& sys, const event_poset& p);

event_label parse_event_label(const std::string& text, const attestation_system& sys);

// Bundle document: a JSON list of serialized quote terms.
quote_bundle parse_bundle(const std::string& text);
std::string serialize_bundle(const quote_bundle& b);

// Graphviz rendering: systems with solid M and dotted C edges; executions
// as cover edges with avoidance events starred and witness corruptions
// boxed when a theorem report is supplied. Byte-deterministic.
std::string export_dot(const attestation_system& sys);
std::string export_dot(const attestation_system& sys, const event_poset& p,
                       const theorem1_report* annotations = nullptr);

std::string read_file(const std::string& path);

}  // namespace lat
