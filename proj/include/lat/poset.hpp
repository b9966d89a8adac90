#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "lat/system.hpp"
#include "lat/term.hpp"

namespace lat {

using event_idx = std::uint32_t;

struct analysis_error : std::runtime_error {
    explicit analysis_error(const std::string& what) : std::runtime_error(what) {}
};

struct meas_label {
    object_idx by;
    object_idx target;
    bool operator==(const meas_label&) const = default;
};
struct corr_label {
    object_idx obj;
    bool operator==(const corr_label&) const = default;
};
struct rep_label {
    object_idx obj;
    bool operator==(const rep_label&) const = default;
};
struct att_start_label {
    term nonce;
    bool operator==(const att_start_label&) const = default;
};
struct ext_label {
    object_idx by;
    pcr_idx pcr;
    term value;
    bool operator==(const ext_label&) const = default;
};
struct quote_label {
    term input;
    std::vector<pcr_idx> pcrs;
    bool operator==(const quote_label&) const = default;
};

using event_label =
    std::variant<meas_label, corr_label, rep_label, att_start_label, ext_label, quote_label>;

bool is_adversary(const event_label& l);
bool is_measurement(const event_label& l);
bool is_extend(const event_label& l);
bool is_quote(const event_label& l);

// An event touches an object when the object is a label argument or lies in
// the support {measurer} ∪ C^-1(measurer) of a measurement.
bool touches_object(const event_label& l, object_idx o, const attestation_system& sys);
bool touches_pcr(const event_label& l, pcr_idx p);

std::string label_to_string(const event_label& l, const attestation_system& sys);

enum class corruption_state : std::uint8_t { undefined, regular, corrupt };

enum class meas_class : std::uint8_t { clean, detects, avoidance };

struct meas_output {
    term value;
    meas_class cls;
};

struct quote_output_result {
    term value;
    bool indicates_corruption;
};

// Finite set of labeled events with a strict partial order. Doubles as a
// specification (no adversary events) and an execution. Order is stored as
// cover edges and queried through its transitive closure.
class event_poset {
public:
    struct event {
        std::string id;
        event_label label;
    };

    event_poset() = default;
    // Throws analysis_error when the order edges are cyclic or ids collide.
    static event_poset build(std::vector<event> events,
                             const std::vector<std::pair<std::string, std::string>>& order);
    static event_poset build_indexed(std::vector<event> events,
                                     const std::vector<std::pair<event_idx, event_idx>>& order);

    std::size_t size() const { return events_.size(); }
    const std::string& id(event_idx e) const { return events_[e].id; }
    const event_label& label(event_idx e) const { return events_[e].label; }
    std::optional<event_idx> find_id(const std::string& id) const;

    bool precedes(event_idx a, event_idx b) const;
    bool comparable(event_idx a, event_idx b) const {
        return precedes(a, b) || precedes(b, a);
    }
    const std::vector<std::pair<event_idx, event_idx>>& given_edges() const { return given_; }
    // Canonical cover edges: the transitive reduction of the order.
    std::vector<std::pair<event_idx, event_idx>> cover_edges() const;

    std::vector<event_idx> events_before(event_idx e) const;

    bool has_adversary_events() const;
    std::vector<event_idx> topological_order() const;

    // Every linear extension, each as a sequence of event indices. The
    // visitor may return false to stop early.
    void linear_extensions(const std::function<bool(const std::vector<event_idx>&)>& visit) const;
    std::uint64_t count_linear_extensions(std::uint64_t cap = UINT64_MAX) const;

private:
    std::vector<event> events_;
    std::vector<std::pair<event_idx, event_idx>> given_;
    std::vector<std::vector<std::uint64_t>> after_;  // after_[a] bit b: a ≺ b
    void close();
};

// Induced subposet on the events satisfying pred; second result maps new
// indices back to the original ones.
std::pair<event_poset, std::vector<event_idx>> restrict(
    const event_poset& p, const std::function<bool(event_idx)>& pred);

// In every per-object restriction each adversary event is comparable to
// every other event of that restriction.
bool is_adversary_ordered(const event_poset& p, const attestation_system& sys);

// In every per-PCR restriction any two incomparable events are both quotes.
bool is_extend_ordered(const event_poset& p, const attestation_system& sys);

// Corruption state of o at e. Undefined when e does not touch o; corrupt at
// corr(o), regular at rep(o); otherwise the state at the unique maximal
// prior adversary event of the restriction (regular when there is none).
// Requires an adversary-ordered poset.
corruption_state corruption_state_at(const event_poset& p, event_idx e, object_idx o,
                                     const attestation_system& sys);

// Measurement Accuracy: bad value iff the target is corrupt while the
// measurer and its whole context are regular; good value otherwise.
meas_output measurement_output(const event_poset& p, event_idx e, const attestation_system& sys);

// Value of PCR `pcr` at an event touching it (extend-ordered posets only).
term pcr_value(const event_poset& p, event_idx e, pcr_idx pcr, const attestation_system& sys);

// Signature over (input, reported PCRs, their values) with the TPM's key.
quote_output_result quote_output(const event_poset& p, event_idx e, const attestation_system& sys);

// Output of an event, when it has one (measurements, att-start, quotes).
std::optional<term> event_output(const event_poset& p, event_idx e, const attestation_system& sys);

// Label well-formedness against sys, adversary- and extend-ordering, nonce
// uniqueness, and derivability of every event input from the public terms
// plus prior outputs. All failures are report entries.
validation_report validate_execution(const attestation_system& sys, const event_poset& p);

// Measurement events whose output is a bad value.
std::vector<event_idx> detected_corruptions(const event_poset& p, const attestation_system& sys);

using embedding = std::vector<event_idx>;  // spec event index -> exec event index

// Injective label-preserving map of partial orders from spec into exec, if
// one exists. Search is exhaustive backtracking over spec events in
// topological order, candidates in id-lexicographic order, so the witness
// is deterministic. spec must contain no adversary events.
std::optional<embedding> admits(const event_poset& spec, const event_poset& exec);

}  // namespace lat
