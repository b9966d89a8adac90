#include "lat/bundling.hpp"

#include <algorithm>
#include <set>

namespace lat {

namespace {

std::set<std::string> known_tpms(const attestation_system& sys) {
    std::set<std::string> out;
    for (pcr_idx p = 0; p < sys.pcr_count(); ++p) out.insert(sys.pcr(p).tpm);
    return out;
}

// Peels a right-nested pair list whose first elements are PCR atoms.
std::optional<std::vector<std::string>> peel_pcr_list(const term& t) {
    std::vector<std::string> out;
    const term* cur = &t;
    while (cur->kind() == term_kind::pair && cur->args()[0].kind() == term_kind::pub_atom) {
        out.push_back(cur->args()[0].name());
        cur = &cur->args()[1];
    }
    if (cur->kind() != term_kind::pub_atom) return std::nullopt;
    out.push_back(cur->name());
    return out;
}

std::optional<std::vector<term>> peel_values(const term& t, std::size_t count) {
    std::vector<term> out;
    const term* cur = &t;
    while (out.size() + 1 < count) {
        if (cur->kind() != term_kind::pair) return std::nullopt;
        out.push_back(cur->args()[0]);
        cur = &cur->args()[1];
    }
    out.push_back(*cur);
    return out;
}

}  // namespace

std::optional<parsed_quote> parse_quote(const attestation_system& sys, const term& t) {
    if (t.kind() != term_kind::sig) return std::nullopt;
    const term& key = t.args()[1];
    if (key.kind() != term_kind::key || !key.name().starts_with("sk:")) return std::nullopt;
    std::string tpm = key.name().substr(3);
    if (!known_tpms(sys).count(tpm)) return std::nullopt;
    const term& payload = t.args()[0];
    if (payload.kind() != term_kind::pair) return std::nullopt;
    const term& rest = payload.args()[1];
    if (rest.kind() != term_kind::pair) return std::nullopt;
    auto pcr_names = peel_pcr_list(rest.args()[0]);
    if (!pcr_names) return std::nullopt;
    parsed_quote out;
    out.original = t;
    out.input = payload.args()[0];
    out.tpm = std::move(tpm);
    for (const auto& name : *pcr_names) {
        auto p = sys.find_pcr(name);
        if (!p || sys.pcr(*p).tpm != out.tpm) return std::nullopt;
        out.pcrs.push_back(*p);
    }
    auto values = peel_values(rest.args()[1], out.pcrs.size());
    if (!values) return std::nullopt;
    for (const term& v : *values) {
        auto view = seq_view(v);
        if (!view) return std::nullopt;
        out.chains.push_back(std::move(*view));
    }
    return out;
}

extraction_result extract_specification(const attestation_system& sys, const quote_bundle& bundle) {
    extraction_result res;
    std::vector<parsed_quote> quotes;
    for (std::size_t qi = 0; qi < bundle.quotes.size(); ++qi) {
        auto q = parse_quote(sys, bundle.quotes[qi]);
        if (!q) {
            res.errors.push_back({"malformed-quote", "bundle entry " + std::to_string(qi) +
                                                         " does not parse as a TPM quote"});
            return res;
        }
        quotes.push_back(std::move(*q));
    }

    struct pending_event {
        std::string id;
        event_label label;
        std::size_t quote;   // originating bundle quote
        pcr_idx pcr = 0;
        std::size_t position = 0;
        bool is_att = false;
    };
    std::vector<pending_event> events;
    std::map<std::string, std::size_t> att_index;  // nonce text -> event position

    for (std::size_t qi = 0; qi < quotes.size(); ++qi) {
        const parsed_quote& q = quotes[qi];
        if (q.input.kind() == term_kind::nonce) {
            std::string key = to_string(q.input);
            if (!att_index.count(key)) {
                att_index.emplace(key, events.size());
                events.push_back({"att:" + q.input.name(), att_start_label{q.input}, qi, 0, 0, true});
            }
        }
        for (std::size_t pi = 0; pi < q.pcrs.size(); ++pi) {
            pcr_idx p = q.pcrs[pi];
            for (std::size_t pos = 0; pos < q.chains[pi].size(); ++pos) {
                const term& v = q.chains[pi][pos];
                auto mv = sys.classify_mv(v);
                if (!mv) {
                    if (parse_quote(sys, v)) continue;  // nested quote: ordering only
                    res.notes.push_back({"opaque-value",
                                         "quote " + std::to_string(qi) + " PCR " + sys.pcr(p).full() +
                                             " position " + std::to_string(pos) +
                                             ": value is not a measurement value; ignored"});
                    continue;
                }
                object_idx target = mv->first;
                std::vector<object_idx> measurers;
                for (object_idx o = 0; o < sys.object_count(); ++o)
                    if (sys.measures(o, target) && sys.may_extend(o, p)) measurers.push_back(o);
                if (measurers.empty()) {
                    res.errors.push_back(
                        {"no-measurer", "value " + to_string(v) + " in PCR " + sys.pcr(p).full() +
                                            ": no object o with M(o, " + sys.object_name(target) +
                                            ") and L(o, " + sys.pcr(p).full() + ")"});
                    continue;
                }
                if (measurers.size() > 1) {
                    res.errors.push_back(
                        {"ambiguous-measurer", "value " + to_string(v) + " in PCR " +
                                                   sys.pcr(p).full() + " has several admissible measurers"});
                    continue;
                }
                events.push_back({"q" + std::to_string(qi) + ":" + sys.pcr(p).full() + ":" +
                                      std::to_string(pos),
                                  meas_label{measurers.front(), target}, qi, p, pos, false});
            }
        }
    }
    if (!res.errors.empty()) return res;

    // e < e_v iff e stems from a quote contained before v in v's chain.
    std::vector<std::pair<std::string, std::string>> order;
    for (const pending_event& ev : events) {
        if (ev.is_att) continue;
        const parsed_quote& q = quotes[ev.quote];
        std::size_t pi = 0;
        while (q.pcrs[pi] != ev.pcr) ++pi;
        for (std::size_t before = 0; before < ev.position; ++before) {
            const term& earlier = q.chains[pi][before];
            for (std::size_t qj = 0; qj < quotes.size(); ++qj) {
                if (!(quotes[qj].original == earlier)) continue;
                for (const pending_event& src : events)
                    if (src.quote == qj || (src.is_att && quotes[qj].input.kind() == term_kind::nonce &&
                                            src.label == event_label(att_start_label{quotes[qj].input})))
                        order.emplace_back(src.id, ev.id);
            }
        }
    }

    std::vector<event_poset::event> poset_events;
    for (const pending_event& ev : events) poset_events.push_back({ev.id, ev.label});
    event_poset spec = event_poset::build(std::move(poset_events), order);

    // Duplicate detection: same label and same ordering context.
    for (event_idx a = 0; a < spec.size(); ++a)
        for (event_idx b = a + 1; b < spec.size(); ++b) {
            if (!(spec.label(a) == spec.label(b))) continue;
            bool same_context = true;
            for (event_idx x = 0; x < spec.size() && same_context; ++x) {
                if (x == a || x == b) continue;
                if (spec.precedes(x, a) != spec.precedes(x, b)) same_context = false;
                if (spec.precedes(a, x) != spec.precedes(b, x)) same_context = false;
            }
            if (same_context)
                res.notes.push_back({"duplicate-event",
                                     "events '" + spec.id(a) + "' and '" + spec.id(b) +
                                         "' carry the same label and ordering context"});
        }

    extracted_spec out;
    out.spec = std::move(spec);
    for (const pending_event& ev : events)
        if (!ev.is_att) out.origin.emplace(ev.id, extraction_origin{ev.quote, ev.pcr, ev.position});
    out.notes = res.notes;
    res.spec = std::move(out);
    return res;
}

compliance_result complies_with_strategy(const attestation_system& sys, const quote_bundle& bundle) {
    compliance_result out{compliance::extraction_failed, extract_specification(sys, bundle)};
    if (!out.extraction.ok()) return out;
    out.verdict = measures_bottom_up(sys, out.extraction.spec->spec) ? compliance::complies
                                                                     : compliance::fails_bottom_up;
    return out;
}

bool bundle_indicates_corruption(const attestation_system& sys, const quote_bundle& bundle) {
    for (const term& t : bundle.quotes) {
        auto q = parse_quote(sys, t);
        if (!q) continue;
        for (const auto& chain : q->chains)
            for (const term& v : chain) {
                auto mv = sys.classify_mv(v);
                if (mv && !mv->second) return true;
            }
    }
    return false;
}

substructure_result extension_substructure(const attestation_system& sys, const event_poset& exec,
                                           const quote_bundle& bundle) {
    substructure_result res;
    std::set<event_idx> members;
    for (std::size_t qi = 0; qi < bundle.quotes.size(); ++qi) {
        auto parsed = parse_quote(sys, bundle.quotes[qi]);
        if (!parsed) {
            res.errors.push_back({"malformed-quote",
                                  "bundle entry " + std::to_string(qi) + " does not parse as a quote"});
            continue;
        }
        std::optional<event_idx> producer;
        for (event_idx e = 0; e < exec.size(); ++e) {
            if (!is_quote(exec.label(e))) continue;
            if (quote_output(exec, e, sys).value == bundle.quotes[qi]) {
                if (!producer || exec.id(e) < exec.id(*producer)) producer = e;
            }
        }
        if (!producer) {
            res.errors.push_back({"missing-quote", "execution does not produce bundle quote " +
                                                       std::to_string(qi)});
            continue;
        }
        for (std::size_t pi = 0; pi < parsed->pcrs.size(); ++pi) {
            pcr_idx p = parsed->pcrs[pi];
            std::vector<event_idx> recorders;
            for (event_idx e = 0; e < exec.size(); ++e) {
                const auto* x = std::get_if<ext_label>(&exec.label(e));
                if (x && x->pcr == p && exec.precedes(e, *producer)) recorders.push_back(e);
            }
            std::sort(recorders.begin(), recorders.end(),
                      [&](event_idx a, event_idx b) { return exec.precedes(a, b); });
            if (recorders.size() != parsed->chains[pi].size()) {
                res.errors.push_back({"missing-recorder",
                                      "PCR " + sys.pcr(p).full() + " chain length " +
                                          std::to_string(parsed->chains[pi].size()) + " but " +
                                          std::to_string(recorders.size()) + " prior extends"});
                continue;
            }
            for (std::size_t k = 0; k < recorders.size(); ++k) {
                const term& v = parsed->chains[pi][k];
                if (!(std::get<ext_label>(exec.label(recorders[k])).value == v)) {
                    res.errors.push_back({"missing-recorder", "no extend records " + to_string(v) +
                                                                  " at position " + std::to_string(k) +
                                                                  " of PCR " + sys.pcr(p).full()});
                    continue;
                }
                if (sys.classify_mv(v)) members.insert(recorders[k]);
            }
        }
    }
    if (!res.errors.empty()) return res;
    res.extends = std::vector<event_idx>(members.begin(), members.end());
    return res;
}

bool extends_bottom_up(const attestation_system& sys, const event_poset& exec,
                       const std::vector<event_idx>& members) {
    for (event_idx e : members) {
        const auto* x = std::get_if<ext_label>(&exec.label(e));
        if (!x) throw analysis_error("event '" + exec.id(e) + "' is not an extend event");
        auto mv = sys.classify_mv(x->value);
        if (!mv)
            throw analysis_error("event '" + exec.id(e) + "' does not extend a measurement value");
        if (x->by == sys.rtm()) continue;
        for (object_idx dep : dependency_set(sys, mv->first, 1)) {
            bool found = false;
            for (event_idx e2 = 0; e2 < exec.size() && !found; ++e2) {
                const auto* x2 = std::get_if<ext_label>(&exec.label(e2));
                if (!x2 || !exec.precedes(e2, e)) continue;
                auto mv2 = sys.classify_mv(x2->value);
                if (mv2 && mv2->first == dep) found = true;
            }
            if (!found) return false;
        }
    }
    return true;
}

event_poset core_of(const attestation_system& sys, const event_poset& spec) {
    for (event_idx e = 0; e < spec.size(); ++e)
        if (!is_measurement(spec.label(e)) && !std::holds_alternative<att_start_label>(spec.label(e)))
            throw analysis_error("core is defined for measurement specifications only");
    if (!measures_bottom_up(sys, spec))
        throw analysis_error("core requires a specification that measures bottom-up");

    std::vector<std::pair<event_idx, event_idx>> kept;
    for (event_idx j = 0; j < spec.size(); ++j) {
        if (!is_measurement(spec.label(j))) continue;
        auto support = support_of(sys, spec, j);
        for (event_idx i = 0; i < spec.size(); ++i) {
            if (!is_measurement(spec.label(i)) || !spec.precedes(i, j)) continue;
            for (const auto& [dep, witness] : *support)
                if (witness == i) kept.emplace_back(i, j);
        }
    }
    std::vector<event_poset::event> events;
    for (event_idx e = 0; e < spec.size(); ++e) events.push_back({spec.id(e), spec.label(e)});
    return event_poset::build_indexed(std::move(events), kept);
}

std::vector<a2_violation> check_assumption_prior_meas(const attestation_system& sys,
                                                      const event_poset& exec) {
    std::vector<a2_violation> out;
    for (event_idx e = 0; e < exec.size(); ++e) {
        const auto* x = std::get_if<ext_label>(&exec.label(e));
        if (!x) continue;
        auto mv = sys.classify_mv(x->value);
        if (!mv) continue;
        if (corruption_state_at(exec, e, x->by, sys) != corruption_state::regular) continue;
        object_idx target = mv->first;
        std::vector<event_idx> prior;
        for (event_idx m = 0; m < exec.size(); ++m) {
            const auto* ml = std::get_if<meas_label>(&exec.label(m));
            if (ml && ml->by == x->by && ml->target == target && exec.precedes(m, e))
                prior.push_back(m);
        }
        if (prior.empty()) {
            out.push_back({e, std::nullopt,
                           "no prior measurement of '" + sys.object_name(target) + "' by '" +
                               sys.object_name(x->by) + "'"});
            continue;
        }
        for (event_idx m : prior) {
            bool maximal = true;
            for (event_idx m2 : prior)
                if (m2 != m && exec.precedes(m, m2)) maximal = false;
            if (!maximal) continue;
            term produced = measurement_output(exec, m, sys).value;
            if (!(produced == x->value))
                out.push_back({e, m,
                               "most recent measurement '" + exec.id(m) + "' output " +
                                   to_string(produced) + ", extend records " + to_string(x->value)});
        }
    }
    return out;
}

std::vector<a3_violation> check_assumption_fresh_meas(const attestation_system& sys,
                                                      const event_poset& exec) {
    std::vector<a3_violation> out;
    for (event_idx e2 = 0; e2 < exec.size(); ++e2) {
        const auto* x = std::get_if<ext_label>(&exec.label(e2));
        if (!x) continue;
        auto mv = sys.classify_mv(x->value);
        if (!mv) continue;
        object_idx target = mv->first;
        auto d1 = dependency_set(sys, target, 1);
        bool extender_corrupt =
            corruption_state_at(exec, e2, x->by, sys) == corruption_state::corrupt;
        for (event_idx e1 = 0; e1 < exec.size(); ++e1) {
            const auto* ml = std::get_if<meas_label>(&exec.label(e1));
            if (!ml || !exec.precedes(e1, e2)) continue;
            if (std::find(d1.begin(), d1.end(), ml->target) == d1.end()) continue;
            if (extender_corrupt) continue;
            bool remeasured = false;
            for (event_idx mid = 0; mid < exec.size() && !remeasured; ++mid) {
                const auto* m2 = std::get_if<meas_label>(&exec.label(mid));
                if (m2 && m2->by == x->by && m2->target == target && exec.precedes(e1, mid) &&
                    exec.precedes(mid, e2))
                    remeasured = true;
            }
            if (!remeasured) out.push_back({e1, e2});
        }
    }
    return out;
}

std::vector<joint_deep_witness> find_deep_witnesses(const attestation_system& sys,
                                                    const event_poset& exec) {
    std::vector<joint_deep_witness> out;
    for (object_idx target = 0; target < sys.object_count(); ++target) {
        auto d2 = dependency_set(sys, target, 2);
        for (event_idx c = 0; c < exec.size(); ++c) {
            const auto* cl = std::get_if<corr_label>(&exec.label(c));
            if (cl && std::find(d2.begin(), d2.end(), cl->obj) != d2.end())
                out.push_back({target, cl->obj, c});
        }
    }
    return out;
}

std::vector<joint_recent_witness> find_recent_witnesses(const attestation_system& sys,
                                                        const event_poset& exec) {
    std::vector<joint_recent_witness> out;
    for (object_idx target = 0; target < sys.object_count(); ++target) {
        auto d1 = dependency_set(sys, target, 1);
        for (event_idx c = 0; c < exec.size(); ++c) {
            const auto* cl = std::get_if<corr_label>(&exec.label(c));
            if (!cl || std::find(d1.begin(), d1.end(), cl->obj) == d1.end()) continue;
            for (event_idx m = 0; m < exec.size(); ++m) {
                const auto* ml = std::get_if<meas_label>(&exec.label(m));
                if (ml && ml->target == cl->obj && exec.precedes(m, c))
                    out.push_back({target, cl->obj, m, c});
            }
        }
    }
    return out;
}

joint_verdict check_joint_strategy(const attestation_system& sys, const event_poset& exec,
                                   const quote_bundle& bundle) {
    joint_verdict out{joint_kind::precondition_failed, std::nullopt, {}, {}, {}};
    auto extraction = extract_specification(sys, bundle);
    if (!extraction.ok()) {
        out.problems = extraction.errors;
        return out;
    }
    for (std::size_t qi = 0; qi < bundle.quotes.size(); ++qi) {
        bool produced = false;
        for (event_idx e = 0; e < exec.size() && !produced; ++e)
            if (is_quote(exec.label(e)) && quote_output(exec, e, sys).value == bundle.quotes[qi])
                produced = true;
        if (!produced)
            out.problems.push_back({"not-produced", "execution does not produce bundle quote " +
                                                        std::to_string(qi)});
    }
    if (!out.problems.empty()) return out;
    if (!measures_bottom_up(sys, extraction.spec->spec)) {
        out.problems.push_back({"not-bottom-up", "S(bundle) does not measure bottom-up"});
        return out;
    }
    if (bundle_indicates_corruption(sys, bundle)) {
        out.problems.push_back({"bundle-corrupt", "bundle indicates a corruption"});
        return out;
    }
    auto a2 = check_assumption_prior_meas(sys, exec);
    auto a3 = check_assumption_fresh_meas(sys, exec);
    if (!a2.empty() || !a3.empty()) {
        out.kind = joint_kind::assumptions_violated;
        for (const auto& v : a2)
            out.problems.push_back({"assumption-prior-meas", "ext '" + exec.id(v.ext_event) +
                                                                 "': " + v.detail});
        for (const auto& v : a3)
            out.problems.push_back({"assumption-fresh-meas",
                                    "measurement '" + exec.id(v.meas_event) + "' precedes ext '" +
                                        exec.id(v.ext_event) + "' without intervening remeasurement"});
        return out;
    }
    event_poset core = core_of(sys, extraction.spec->spec);
    if (auto emb = admits(core, exec)) {
        out.kind = joint_kind::admits_core;
        out.core_embedding = std::move(emb);
        return out;
    }
    out.deep = find_deep_witnesses(sys, exec);
    if (!out.deep.empty()) {
        out.kind = joint_kind::deep;
        return out;
    }
    out.recent = find_recent_witnesses(sys, exec);
    if (!out.recent.empty()) {
        out.kind = joint_kind::recent;
        return out;
    }
    out.kind = joint_kind::theorem_failure;
    out.problems.push_back(
        {"theorem-failure", "execution satisfies every hypothesis yet no conclusion holds"});
    return out;
}

}  // namespace lat
