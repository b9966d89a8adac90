#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "lat/term.hpp"

namespace lat {

using object_idx = std::uint32_t;
using pcr_idx = std::uint32_t;

struct pcr_name {
    std::string tpm;
    std::string reg;

    std::string full() const { return tpm + "." + reg; }
    bool operator==(const pcr_name&) const = default;
    bool operator<(const pcr_name& o) const {
        return tpm != o.tpm ? tpm < o.tpm : reg < o.reg;
    }
};

struct validation_entry {
    std::string code;
    std::string message;
};

struct validation_report {
    std::vector<validation_entry> violations;
    std::vector<validation_entry> notes;

    bool ok() const { return violations.empty(); }
};

// Transitive closure of a binary relation over strings; idempotent.
std::set<std::pair<std::string, std::string>> relation_closure(
    const std::set<std::pair<std::string, std::string>>& rel);

// Measurement-value partition for one object: good values indicate a regular
// component, bad values indicate corruption. All values are public atoms.
struct mv_partition {
    std::vector<std::string> good;
    std::vector<std::string> bad;
};

// A layered measurement-and-attestation system: objects with a measures
// relation M rooted at rtm, a context relation C (kept transitively closed),
// TPM PCRs, and the extend-access relation L. When there are no PCRs this is
// a plain measurement system.
class attestation_system {
public:
    struct raw {
        std::vector<std::string> objects;
        std::string rtm;
        std::vector<std::pair<std::string, std::string>> measures;
        std::vector<std::pair<std::string, std::string>> context;
        std::vector<pcr_name> pcrs;
        std::vector<std::pair<std::string, std::string>> access;  // (object, tpm.reg)
        std::map<std::string, mv_partition> mv;  // defaulted to {g:<o>},{b:<o>} when absent
    };

    // Builds the system, closing C transitively (recorded as a note) and
    // synthesizing default measurement values. Unknown names throw.
    static attestation_system build(const raw& r);

    std::size_t object_count() const { return names_.size(); }
    const std::string& object_name(object_idx o) const { return names_[o]; }
    std::optional<object_idx> find_object(const std::string& name) const;
    object_idx object(const std::string& name) const;  // throws on unknown
    object_idx rtm() const { return rtm_; }

    bool measures(object_idx by, object_idx target) const { return m_[by][target]; }
    bool context(object_idx helper, object_idx of) const { return c_[helper][of]; }
    const std::vector<object_idx>& measurers_of(object_idx o) const { return m_inv_[o]; }
    const std::vector<object_idx>& context_of(object_idx o) const { return c_inv_[o]; }
    const std::vector<std::pair<object_idx, object_idx>>& measure_edges() const { return m_edges_; }
    const std::vector<std::pair<object_idx, object_idx>>& context_edges() const { return c_edges_; }
    const std::vector<std::pair<object_idx, object_idx>>& context_edges_given() const {
        return c_edges_given_;
    }

    std::size_t pcr_count() const { return pcr_names_.size(); }
    const pcr_name& pcr(pcr_idx p) const { return pcr_names_[p]; }
    std::optional<pcr_idx> find_pcr(const std::string& full) const;
    bool may_extend(object_idx o, pcr_idx p) const;
    std::optional<object_idx> pcr_owner(pcr_idx p) const { return pcr_owner_[p]; }
    const std::vector<std::pair<object_idx, pcr_idx>>& access_pairs() const { return l_pairs_; }

    const mv_partition& mv(object_idx o) const { return mv_[o]; }
    // Canonical outputs per Measurement Accuracy: the first listed value.
    term good_value(object_idx o) const { return term::pub(mv_[o].good.front()); }
    term bad_value(object_idx o) const { return term::pub(mv_[o].bad.front()); }
    // Classifies a term as some object's measurement value.
    std::optional<std::pair<object_idx, bool>> classify_mv(const term& t) const;

    const std::vector<validation_entry>& normalization_notes() const { return notes_; }

    // Support of a measurement by `by`: the measurer and its context.
    std::vector<object_idx> support_objects(object_idx by) const;

private:
    std::vector<std::string> names_;
    std::map<std::string, object_idx> index_;
    object_idx rtm_ = 0;
    std::vector<std::vector<bool>> m_, c_;
    std::vector<std::vector<object_idx>> m_inv_, c_inv_;
    std::vector<std::pair<object_idx, object_idx>> m_edges_, c_edges_, c_edges_given_;
    std::vector<pcr_name> pcr_names_;
    std::map<std::string, pcr_idx> pcr_index_;
    std::vector<std::optional<object_idx>> pcr_owner_;
    std::vector<std::pair<object_idx, pcr_idx>> l_pairs_;
    std::vector<std::vector<bool>> l_;
    std::vector<mv_partition> mv_;
    std::map<std::string, std::pair<object_idx, bool>> mv_class_;
    std::vector<validation_entry> notes_;
};

// Checks every structural invariant: rootedness and acyclicity of M, C and
// M∪C acyclicity, no measurement of rtm, L injectivity and one TPM per
// object, and the MV partitions. All findings are report entries.
validation_report validate_system(const attestation_system& sys);

// D^1(o) = M^-1(o) ∪ C^-1(M^-1(o)); D^{i+1}(o) = D^1(D^i(o)).
std::vector<object_idx> dependency_set(const attestation_system& sys, object_idx o, unsigned depth);
std::vector<object_idx> dependency_set_of(const attestation_system& sys,
                                          const std::vector<object_idx>& objs);

// Least i >= 1 with o in D^i(anchor), if any within |objects| iterations.
std::optional<unsigned> dependency_depth(const attestation_system& sys, object_idx anchor,
                                         object_idx o);

}  // namespace lat
