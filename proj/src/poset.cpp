#include "lat/poset.hpp"

#include <algorithm>
#include <map>
#include <set>

namespace lat {

bool is_adversary(const event_label& l) {
    return std::holds_alternative<corr_label>(l) || std::holds_alternative<rep_label>(l);
}
bool is_measurement(const event_label& l) { return std::holds_alternative<meas_label>(l); }
bool is_extend(const event_label& l) { return std::holds_alternative<ext_label>(l); }
bool is_quote(const event_label& l) { return std::holds_alternative<quote_label>(l); }

bool touches_object(const event_label& l, object_idx o, const attestation_system& sys) {
    if (const auto* m = std::get_if<meas_label>(&l)) {
        if (m->target == o || m->by == o) return true;
        return sys.context(o, m->by);  // support of the measurement
    }
    if (const auto* c = std::get_if<corr_label>(&l)) return c->obj == o;
    if (const auto* r = std::get_if<rep_label>(&l)) return r->obj == o;
    if (const auto* x = std::get_if<ext_label>(&l)) return x->by == o;
    return false;  // att-start and quotes touch no object
}

bool touches_pcr(const event_label& l, pcr_idx p) {
    if (const auto* x = std::get_if<ext_label>(&l)) return x->pcr == p;
    if (const auto* q = std::get_if<quote_label>(&l))
        return std::find(q->pcrs.begin(), q->pcrs.end(), p) != q->pcrs.end();
    return false;
}

std::string label_to_string(const event_label& l, const attestation_system& sys) {
    if (const auto* m = std::get_if<meas_label>(&l))
        return "meas " + sys.object_name(m->by) + " " + sys.object_name(m->target);
    if (const auto* c = std::get_if<corr_label>(&l)) return "corr " + sys.object_name(c->obj);
    if (const auto* r = std::get_if<rep_label>(&l)) return "rep " + sys.object_name(r->obj);
    if (const auto* a = std::get_if<att_start_label>(&l)) return "att_start " + to_string(a->nonce);
    if (const auto* x = std::get_if<ext_label>(&l))
        return "ext " + sys.object_name(x->by) + " " + sys.pcr(x->pcr).full() + " " +
               to_string(x->value);
    const auto& q = std::get<quote_label>(l);
    std::string out = "quote " + to_string(q.input);
    for (pcr_idx p : q.pcrs) out += " " + sys.pcr(p).full();
    return out;
}

event_poset event_poset::build(std::vector<event> events,
                               const std::vector<std::pair<std::string, std::string>>& order) {
    std::map<std::string, event_idx> idx;
    for (event_idx i = 0; i < events.size(); ++i)
        if (!idx.emplace(events[i].id, i).second)
            throw analysis_error("duplicate event id '" + events[i].id + "'");
    std::vector<std::pair<event_idx, event_idx>> edges;
    for (const auto& [a, b] : order) {
        auto ia = idx.find(a), ib = idx.find(b);
        if (ia == idx.end()) throw analysis_error("order names unknown event '" + a + "'");
        if (ib == idx.end()) throw analysis_error("order names unknown event '" + b + "'");
        edges.emplace_back(ia->second, ib->second);
    }
    return build_indexed(std::move(events), edges);
}

event_poset event_poset::build_indexed(std::vector<event> events,
                                       const std::vector<std::pair<event_idx, event_idx>>& order) {
    event_poset p;
    p.events_ = std::move(events);
    p.given_ = order;
    p.close();
    return p;
}

void event_poset::close() {
    const std::size_t n = events_.size();
    const std::size_t words = (n + 63) / 64;
    after_.assign(n, std::vector<std::uint64_t>(words, 0));
    for (auto [a, b] : given_) {
        if (a == b) throw analysis_error("order edge relates event '" + events_[a].id + "' to itself");
        after_[a][b / 64] |= std::uint64_t(1) << (b % 64);
    }
    // Propagate along a topological order; cycles surface as leftover edges.
    std::vector<unsigned> indeg(n, 0);
    std::vector<std::vector<event_idx>> succ(n);
    for (auto [a, b] : given_) {
        succ[a].push_back(b);
        ++indeg[b];
    }
    std::vector<event_idx> order;
    for (event_idx i = 0; i < n; ++i)
        if (indeg[i] == 0) order.push_back(i);
    for (std::size_t h = 0; h < order.size(); ++h) {
        event_idx e = order[h];
        for (event_idx s : succ[e])
            if (--indeg[s] == 0) order.push_back(s);
    }
    if (order.size() != n) throw analysis_error("order edges are cyclic");
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        event_idx e = *it;
        for (event_idx s : succ[e])
            for (std::size_t w = 0; w < words; ++w) after_[e][w] |= after_[s][w];
    }
    for (event_idx i = 0; i < n; ++i)
        if (precedes(i, i)) throw analysis_error("order edges are cyclic");
}

std::optional<event_idx> event_poset::find_id(const std::string& id) const {
    for (event_idx i = 0; i < events_.size(); ++i)
        if (events_[i].id == id) return i;
    return std::nullopt;
}

bool event_poset::precedes(event_idx a, event_idx b) const {
    return (after_[a][b / 64] >> (b % 64)) & 1;
}

std::vector<std::pair<event_idx, event_idx>> event_poset::cover_edges() const {
    std::vector<std::pair<event_idx, event_idx>> out;
    const event_idx n = static_cast<event_idx>(size());
    for (event_idx a = 0; a < n; ++a)
        for (event_idx b = 0; b < n; ++b) {
            if (!precedes(a, b)) continue;
            bool direct = true;
            for (event_idx k = 0; k < n && direct; ++k)
                if (precedes(a, k) && precedes(k, b)) direct = false;
            if (direct) out.emplace_back(a, b);
        }
    return out;
}

std::vector<event_idx> event_poset::events_before(event_idx e) const {
    std::vector<event_idx> out;
    for (event_idx i = 0; i < size(); ++i)
        if (precedes(i, e)) out.push_back(i);
    return out;
}

bool event_poset::has_adversary_events() const {
    for (const auto& ev : events_)
        if (is_adversary(ev.label)) return true;
    return false;
}

std::vector<event_idx> event_poset::topological_order() const {
    const event_idx n = static_cast<event_idx>(size());
    std::vector<event_idx> order;
    std::vector<bool> placed(n, false);
    for (event_idx step = 0; step < n; ++step) {
        std::optional<event_idx> pick;
        for (event_idx i = 0; i < n; ++i) {
            if (placed[i]) continue;
            bool ready = true;
            for (event_idx j = 0; j < n && ready; ++j)
                if (!placed[j] && precedes(j, i)) ready = false;
            if (!ready) continue;
            if (!pick || events_[i].id < events_[*pick].id) pick = i;
        }
        placed[*pick] = true;
        order.push_back(*pick);
    }
    return order;
}

namespace {

bool extend_linearizations(const event_poset& p, std::vector<event_idx>& prefix,
                           std::vector<bool>& used,
                           const std::function<bool(const std::vector<event_idx>&)>& visit) {
    const event_idx n = static_cast<event_idx>(p.size());
    if (prefix.size() == n) return visit(prefix);
    for (event_idx i = 0; i < n; ++i) {
        if (used[i]) continue;
        bool ready = true;
        for (event_idx j = 0; j < n && ready; ++j)
            if (!used[j] && j != i && p.precedes(j, i)) ready = false;
        if (!ready) continue;
        used[i] = true;
        prefix.push_back(i);
        bool go_on = extend_linearizations(p, prefix, used, visit);
        prefix.pop_back();
        used[i] = false;
        if (!go_on) return false;
    }
    return true;
}

}  // namespace

void event_poset::linear_extensions(
    const std::function<bool(const std::vector<event_idx>&)>& visit) const {
    std::vector<event_idx> prefix;
    std::vector<bool> used(size(), false);
    extend_linearizations(*this, prefix, used, visit);
}

std::uint64_t event_poset::count_linear_extensions(std::uint64_t cap) const {
    std::uint64_t count = 0;
    linear_extensions([&](const std::vector<event_idx>&) {
        ++count;
        return count < cap;
    });
    return count;
}

std::pair<event_poset, std::vector<event_idx>> restrict(
    const event_poset& p, const std::function<bool(event_idx)>& pred) {
    std::vector<event_idx> keep;
    for (event_idx i = 0; i < p.size(); ++i)
        if (pred(i)) keep.push_back(i);
    std::vector<event_poset::event> events;
    for (event_idx i : keep) events.push_back({p.id(i), p.label(i)});
    std::vector<std::pair<event_idx, event_idx>> edges;
    for (event_idx a = 0; a < keep.size(); ++a)
        for (event_idx b = 0; b < keep.size(); ++b)
            if (p.precedes(keep[a], keep[b])) edges.emplace_back(a, b);
    return {event_poset::build_indexed(std::move(events), edges), keep};
}

namespace {

std::vector<event_idx> touching_object(const event_poset& p, object_idx o,
                                       const attestation_system& sys) {
    std::vector<event_idx> out;
    for (event_idx i = 0; i < p.size(); ++i)
        if (touches_object(p.label(i), o, sys)) out.push_back(i);
    return out;
}

}  // namespace

bool is_adversary_ordered(const event_poset& p, const attestation_system& sys) {
    for (object_idx o = 0; o < sys.object_count(); ++o) {
        auto members = touching_object(p, o, sys);
        for (event_idx a : members) {
            if (!is_adversary(p.label(a))) continue;
            for (event_idx e : members)
                if (e != a && !p.comparable(a, e)) return false;
        }
    }
    return true;
}

bool is_extend_ordered(const event_poset& p, const attestation_system& sys) {
    for (pcr_idx pc = 0; pc < sys.pcr_count(); ++pc) {
        std::vector<event_idx> members;
        for (event_idx i = 0; i < p.size(); ++i)
            if (touches_pcr(p.label(i), pc)) members.push_back(i);
        for (std::size_t x = 0; x < members.size(); ++x)
            for (std::size_t y = x + 1; y < members.size(); ++y) {
                event_idx a = members[x], b = members[y];
                if (p.comparable(a, b)) continue;
                if (!is_quote(p.label(a)) || !is_quote(p.label(b))) return false;
            }
    }
    return true;
}

corruption_state corruption_state_at(const event_poset& p, event_idx e, object_idx o,
                                     const attestation_system& sys) {
    const event_label& l = p.label(e);
    if (!touches_object(l, o, sys)) return corruption_state::undefined;
    if (const auto* c = std::get_if<corr_label>(&l); c && c->obj == o)
        return corruption_state::corrupt;
    if (const auto* r = std::get_if<rep_label>(&l); r && r->obj == o)
        return corruption_state::regular;

    // Unique maximal prior adversary event of the per-object restriction
    // (Lemma: existence and uniqueness on adversary-ordered posets).
    std::vector<event_idx> prior;
    for (event_idx i = 0; i < p.size(); ++i)
        if (is_adversary(p.label(i)) && touches_object(p.label(i), o, sys) && p.precedes(i, e))
            prior.push_back(i);
    if (prior.empty()) return corruption_state::regular;
    std::optional<event_idx> best;
    for (event_idx a : prior) {
        bool maximal = true;
        for (event_idx b : prior)
            if (b != a && p.precedes(a, b)) maximal = false;
        if (!maximal) continue;
        if (best)
            throw analysis_error("corruption state of '" + sys.object_name(o) + "' at '" + p.id(e) +
                                 "' is ambiguous: poset is not adversary-ordered");
        best = a;
    }
    return std::holds_alternative<corr_label>(p.label(*best)) ? corruption_state::corrupt
                                                              : corruption_state::regular;
}

meas_output measurement_output(const event_poset& p, event_idx e, const attestation_system& sys) {
    const auto* m = std::get_if<meas_label>(&p.label(e));
    if (!m) throw analysis_error("event '" + p.id(e) + "' is not a measurement");
    corruption_state target_cs = corruption_state_at(p, e, m->target, sys);
    bool measurers_regular = true;
    for (object_idx o : sys.support_objects(m->by))
        if (corruption_state_at(p, e, o, sys) != corruption_state::regular) measurers_regular = false;
    if (target_cs == corruption_state::corrupt && measurers_regular)
        return {sys.bad_value(m->target), meas_class::detects};
    if (target_cs == corruption_state::corrupt)
        return {sys.good_value(m->target), meas_class::avoidance};
    return {sys.good_value(m->target), meas_class::clean};
}

namespace {

std::optional<event_idx> max_prior_extend(const event_poset& p, event_idx e, pcr_idx pcr) {
    std::vector<event_idx> prior;
    for (event_idx i = 0; i < p.size(); ++i) {
        const auto* x = std::get_if<ext_label>(&p.label(i));
        if (x && x->pcr == pcr && p.precedes(i, e)) prior.push_back(i);
    }
    if (prior.empty()) return std::nullopt;
    std::optional<event_idx> best;
    for (event_idx a : prior) {
        bool maximal = true;
        for (event_idx b : prior)
            if (b != a && p.precedes(a, b)) maximal = false;
        if (!maximal) continue;
        if (best) throw analysis_error("PCR history at '" + p.id(e) + "' is ambiguous: not extend-ordered");
        best = a;
    }
    return best;
}

}  // namespace

term pcr_value(const event_poset& p, event_idx e, pcr_idx pcr, const attestation_system& sys) {
    if (!touches_pcr(p.label(e), pcr))
        throw analysis_error("event '" + p.id(e) + "' does not touch PCR " + sys.pcr(pcr).full());
    auto prior = max_prior_extend(p, e, pcr);
    term before = prior ? pcr_value(p, *prior, pcr, sys) : term::rst();
    if (const auto* x = std::get_if<ext_label>(&p.label(e)); x && x->pcr == pcr)
        return term::hash(term::pair(x->value, std::move(before)));
    return before;
}

quote_output_result quote_output(const event_poset& p, event_idx e, const attestation_system& sys) {
    const auto* q = std::get_if<quote_label>(&p.label(e));
    if (!q) throw analysis_error("event '" + p.id(e) + "' is not a quote");
    if (q->pcrs.empty()) throw analysis_error("quote '" + p.id(e) + "' reports no PCRs");
    std::vector<term> pcr_atoms, values;
    bool indicates = false;
    for (pcr_idx pc : q->pcrs) {
        pcr_atoms.push_back(term::pub(sys.pcr(pc).full()));
        term v = pcr_value(p, e, pc, sys);
        if (auto view = seq_view(v)) {
            for (const term& item : *view) {
                auto cls = sys.classify_mv(item);
                if (cls && !cls->second) indicates = true;
            }
        }
        values.push_back(std::move(v));
    }
    auto encode_list = [](std::vector<term> items) {
        term out = items.back();
        for (std::size_t i = items.size() - 1; i-- > 0;)
            out = term::pair(items[i], std::move(out));
        return out;
    };
    const std::string tpm = sys.pcr(q->pcrs.front()).tpm;
    term payload = term::pair(q->input, term::pair(encode_list(std::move(pcr_atoms)),
                                                   encode_list(std::move(values))));
    return {term::sig(std::move(payload), term::key("sk:" + tpm)), indicates};
}

std::optional<term> event_output(const event_poset& p, event_idx e, const attestation_system& sys) {
    const event_label& l = p.label(e);
    if (is_measurement(l)) return measurement_output(p, e, sys).value;
    if (const auto* a = std::get_if<att_start_label>(&l)) return a->nonce;
    if (is_quote(l)) return quote_output(p, e, sys).value;
    return std::nullopt;
}

validation_report validate_execution(const attestation_system& sys, const event_poset& p) {
    validation_report rep;
    std::map<std::string, std::string> nonce_seen;  // nonce -> event id
    for (event_idx i = 0; i < p.size(); ++i) {
        const event_label& l = p.label(i);
        if (const auto* m = std::get_if<meas_label>(&l)) {
            if (!sys.measures(m->by, m->target))
                rep.violations.push_back({"meas-not-in-m", "event '" + p.id(i) + "': M(" +
                                                               sys.object_name(m->by) + ", " +
                                                               sys.object_name(m->target) +
                                                               ") does not hold"});
        } else if (const auto* c = std::get_if<corr_label>(&l)) {
            if (c->obj == sys.rtm())
                rep.violations.push_back({"adv-rtm", "event '" + p.id(i) + "': rtm cannot be corrupted"});
        } else if (const auto* r = std::get_if<rep_label>(&l)) {
            if (r->obj == sys.rtm())
                rep.violations.push_back({"adv-rtm", "event '" + p.id(i) + "': rtm cannot be repaired"});
        } else if (const auto* a = std::get_if<att_start_label>(&l)) {
            if (a->nonce.kind() != term_kind::nonce)
                rep.violations.push_back(
                    {"att-start-nonce", "event '" + p.id(i) + "': att_start argument must be a nonce"});
            else {
                auto [it, fresh] = nonce_seen.emplace(to_string(a->nonce), p.id(i));
                if (!fresh)
                    rep.violations.push_back({"nonce-reused", "nonce " + to_string(a->nonce) +
                                                                  " used by '" + it->second +
                                                                  "' and '" + p.id(i) + "'"});
            }
        } else if (const auto* x = std::get_if<ext_label>(&l)) {
            if (!sys.may_extend(x->by, x->pcr))
                rep.violations.push_back({"ext-not-in-l", "event '" + p.id(i) + "': L(" +
                                                              sys.object_name(x->by) + ", " +
                                                              sys.pcr(x->pcr).full() +
                                                              ") does not hold"});
        } else if (const auto* q = std::get_if<quote_label>(&l)) {
            if (q->pcrs.empty())
                rep.violations.push_back({"quote-empty", "event '" + p.id(i) + "' reports no PCRs"});
            else {
                const std::string& tpm = sys.pcr(q->pcrs.front()).tpm;
                for (pcr_idx pc : q->pcrs)
                    if (sys.pcr(pc).tpm != tpm)
                        rep.violations.push_back({"quote-mixed-tpm", "event '" + p.id(i) +
                                                                         "' reports PCRs of several TPMs"});
            }
        }
    }
    bool adv_ordered = is_adversary_ordered(p, sys);
    if (!adv_ordered)
        rep.violations.push_back({"not-adversary-ordered",
                                  "some adversary event is incomparable to an event touching the same object"});
    bool ext_ordered = is_extend_ordered(p, sys);
    if (!ext_ordered)
        rep.violations.push_back(
            {"not-extend-ordered", "some PCR has incomparable events that are not both quotes"});

    if (rep.ok()) {
        // Input derivability from public terms plus prior outputs.
        for (event_idx i = 0; i < p.size(); ++i) {
            const term* input = nullptr;
            if (const auto* x = std::get_if<ext_label>(&p.label(i))) input = &x->value;
            if (const auto* q = std::get_if<quote_label>(&p.label(i))) input = &q->input;
            if (!input) continue;
            std::vector<term> base;
            for (event_idx j = 0; j < p.size(); ++j)
                if (p.precedes(j, i))
                    if (auto out = event_output(p, j, sys)) base.push_back(std::move(*out));
            if (!derivable(base, *input))
                rep.violations.push_back({"input-not-derivable",
                                          "event '" + p.id(i) + "': input " + to_string(*input) +
                                              " is not derivable from prior outputs"});
        }
    }
    return rep;
}

std::vector<event_idx> detected_corruptions(const event_poset& p, const attestation_system& sys) {
    std::vector<event_idx> out;
    for (event_idx i = 0; i < p.size(); ++i)
        if (is_measurement(p.label(i)) &&
            measurement_output(p, i, sys).cls == meas_class::detects)
            out.push_back(i);
    return out;
}

namespace {

bool assign_embedding(const event_poset& spec, const event_poset& exec,
                      const std::vector<event_idx>& order, std::size_t pos,
                      std::vector<std::optional<event_idx>>& map, std::vector<bool>& used) {
    if (pos == order.size()) return true;
    event_idx s = order[pos];
    std::vector<event_idx> candidates;
    for (event_idx e = 0; e < exec.size(); ++e)
        if (!used[e] && exec.label(e) == spec.label(s)) candidates.push_back(e);
    std::sort(candidates.begin(), candidates.end(),
              [&](event_idx a, event_idx b) { return exec.id(a) < exec.id(b); });
    for (event_idx e : candidates) {
        bool fits = true;
        for (std::size_t q = 0; q < pos && fits; ++q) {
            event_idx s2 = order[q];
            if (spec.precedes(s2, s) && !exec.precedes(*map[s2], e)) fits = false;
            if (spec.precedes(s, s2) && !exec.precedes(e, *map[s2])) fits = false;
        }
        if (!fits) continue;
        map[s] = e;
        used[e] = true;
        if (assign_embedding(spec, exec, order, pos + 1, map, used)) return true;
        used[e] = false;
        map[s] = std::nullopt;
    }
    return false;
}

}  // namespace

std::optional<embedding> admits(const event_poset& spec, const event_poset& exec) {
    if (spec.has_adversary_events())
        throw analysis_error("specification contains adversary events");
    std::vector<event_idx> order = spec.topological_order();
    std::vector<std::optional<event_idx>> map(spec.size());
    std::vector<bool> used(exec.size(), false);
    if (!assign_embedding(spec, exec, order, 0, map, used)) return std::nullopt;
    embedding out(spec.size());
    for (event_idx s = 0; s < spec.size(); ++s) out[s] = *map[s];
    return out;
}

}  // namespace lat
