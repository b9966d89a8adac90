#include "lat/explorer.hpp"

#include <algorithm>
#include <sstream>

#include "json.hpp"
#include "lat/io.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace lat {

namespace {

using u64 = std::uint64_t;
constexpr u64 k_sat = UINT64_MAX;

u64 sat_add(u64 a, u64 b) { return a > k_sat - b ? k_sat : a + b; }
u64 sat_mul(u64 a, u64 b) {
    if (a == 0 || b == 0) return 0;
    return a > k_sat / b ? k_sat : a * b;
}

u64 binom(u64 a, u64 b) {
    if (b > a) return 0;
    b = std::min(b, a - b);
    u64 r = 1;
    for (u64 i = 1; i <= b; ++i) {
        u64 num = a - b + i;
        if (r > k_sat / num) return k_sat;
        r = r * num / i;  // exact at each step
    }
    return r;
}

u64 ipow(u64 base, unsigned e) {
    u64 r = 1;
    while (e--) r = sat_mul(r, base);
    return r;
}

struct adv_event {
    object_idx obj;
    bool is_corr;
};

std::vector<adv_event> make_alphabet(const attestation_system& sys,
                                     const exploration_budget& budget) {
    std::vector<object_idx> objs;
    if (budget.whitelist) {
        objs = *budget.whitelist;
        for (object_idx o : objs) {
            if (o >= sys.object_count()) throw analysis_error("whitelist names an unknown object");
            if (o == sys.rtm()) throw analysis_error("rtm cannot be an adversary target");
        }
    } else {
        for (object_idx o = 0; o < sys.object_count(); ++o)
            if (o != sys.rtm()) objs.push_back(o);
    }
    std::sort(objs.begin(), objs.end());
    objs.erase(std::unique(objs.begin(), objs.end()), objs.end());
    std::vector<adv_event> out;
    for (object_idx o : objs) {
        out.push_back({o, true});
        if (budget.include_repairs) out.push_back({o, false});
    }
    if (!out.empty() && budget.seed != 0)
        std::rotate(out.begin(), out.begin() + static_cast<long>(budget.seed % out.size()),
                    out.end());
    return out;
}

// Sequences of up to `extra` further insertions into gaps >= g of an
// n-event chain: sum over j of m^j * multichoose(n+1-g, j).
u64 tail_count(unsigned n, unsigned g, unsigned extra, u64 m) {
    u64 total = 0;
    for (unsigned j = 0; j <= extra; ++j)
        total = sat_add(total, sat_mul(ipow(m, j), binom(static_cast<u64>(n - g) + j, j)));
    return total;
}

u64 universe_per_extension(unsigned n, unsigned max_k, u64 m) {
    u64 total = 0;
    for (unsigned k = 0; k <= max_k; ++k)
        total = sat_add(total, sat_mul(ipow(m, k), binom(static_cast<u64>(n) + k, k)));
    return total;
}

struct insertion {
    unsigned gap;
    unsigned alpha;
};

// Canonical order: gaps never decrease; same-gap insertions append. Visits
// the current state first, then extends, spending one unit of countdown per
// visit. Returns false when the visitor aborted the whole run.
template <typename Visit>
bool insertion_dfs(std::vector<insertion>& cur, unsigned min_gap, unsigned n, unsigned max_k,
                   std::size_t alphabet, u64& countdown, const Visit& visit) {
    if (countdown == 0) return true;
    --countdown;
    if (!visit(cur)) return false;
    if (cur.size() >= max_k) return true;
    for (unsigned g = min_gap; g <= n; ++g)
        for (unsigned a = 0; a < alphabet; ++a) {
            cur.push_back({g, a});
            bool keep = insertion_dfs(cur, g, n, max_k, alphabet, countdown, visit);
            cur.pop_back();
            if (!keep) return false;
            if (countdown == 0) return true;
        }
    return true;
}

event_poset materialize(const attestation_system& sys, const event_poset& base,
                        const std::vector<event_idx>& ext_order,
                        const std::vector<insertion>& ins, const std::vector<adv_event>& alphabet) {
    const unsigned n = static_cast<unsigned>(ext_order.size());
    std::vector<event_poset::event> events;
    std::size_t j = 0;
    for (unsigned p = 0; p <= n; ++p) {
        while (j < ins.size() && ins[j].gap == p) {
            const adv_event& a = alphabet[ins[j].alpha];
            event_label l = a.is_corr ? event_label(corr_label{a.obj}) : event_label(rep_label{a.obj});
            events.push_back({"adv" + std::to_string(j), std::move(l)});
            ++j;
        }
        if (p < n) events.push_back({base.id(ext_order[p]), base.label(ext_order[p])});
    }
    std::vector<std::pair<event_idx, event_idx>> edges;
    for (event_idx i = 0; i + 1 < events.size(); ++i) edges.emplace_back(i, i + 1);
    return event_poset::build_indexed(std::move(events), edges);
}

std::optional<object_idx> sink_target(const attestation_system& sys, const event_poset& p) {
    std::optional<object_idx> sink;
    for (event_idx e = 0; e < p.size(); ++e) {
        const auto* m = std::get_if<meas_label>(&p.label(e));
        if (!m) continue;
        bool maximal = true;
        for (event_idx f = 0; f < p.size() && maximal; ++f)
            if (is_measurement(p.label(f)) && p.precedes(e, f)) maximal = false;
        if (!maximal) continue;
        if (sink && *sink != m->target) return std::nullopt;
        sink = m->target;
    }
    return sink;
}

struct meas_rec {
    unsigned base;
    object_idx by, target;
    bool by_rtm;
    std::vector<object_idx> support;
    std::vector<std::vector<unsigned>> dep_meas;  // per D1 dep: base meas events targeting it
    std::vector<char> in_d1, in_d2;               // per object
};

struct ext_rec {
    unsigned base;
    object_idx by;
    bool by_rtm;
    object_idx target;
    bool matches_good, matches_bad;
    std::vector<unsigned> a2_meas;  // base meas events measuring target by the extender
};

struct a3_rec {
    unsigned meas_base;
    unsigned ext_base;
    object_idx extender;
    std::vector<unsigned> between;  // base meas events meas(extender, target)
};

enum class run_mode { recent_or_deep, joint };

struct chain_setup {
    const attestation_system& sys;
    const event_poset& base;
    run_mode mode;
    unsigned relax = relax_none;
    unsigned n = 0;
    std::vector<adv_event> alphabet;

    std::vector<meas_rec> meas;
    std::vector<ext_rec> exts;
    std::vector<a3_rec> a3;
    std::vector<char> recent_eligible, deep_eligible;
    std::vector<std::vector<unsigned>> meas_targeting;  // per object
    std::vector<std::string> class_key_recent, class_key_deep;

    quote_bundle bundle;
    event_poset core;
    std::vector<std::pair<unsigned, unsigned>> core_edges;  // base index pairs
    bool core_fast = false;

    chain_setup(const attestation_system& s, const event_poset& b, run_mode m,
                const exploration_budget& budget, unsigned relax_mask, bool need_compliance)
        : sys(s), base(b), mode(m), relax(relax_mask) {
        n = static_cast<unsigned>(base.size());
        if (base.has_adversary_events())
            throw analysis_error("exploration base must not contain adversary events");
        auto base_report = validate_execution(sys, base);
        if (!base_report.ok())
            throw analysis_error("exploration base is not a valid execution: " +
                                 base_report.violations.front().message);
        alphabet = make_alphabet(sys, budget);

        const std::size_t nobj = sys.object_count();
        meas_targeting.assign(nobj, {});
        for (event_idx e = 0; e < base.size(); ++e) {
            const auto* ml = std::get_if<meas_label>(&base.label(e));
            if (ml) meas_targeting[ml->target].push_back(e);
        }
        for (event_idx e = 0; e < base.size(); ++e) {
            if (const auto* ml = std::get_if<meas_label>(&base.label(e))) {
                meas_rec rec;
                rec.base = e;
                rec.by = ml->by;
                rec.target = ml->target;
                rec.by_rtm = ml->by == sys.rtm();
                rec.support = sys.support_objects(ml->by);
                rec.in_d1.assign(nobj, 0);
                rec.in_d2.assign(nobj, 0);
                for (object_idx o : dependency_set(sys, ml->target, 1)) {
                    rec.in_d1[o] = 1;
                    rec.dep_meas.push_back(meas_targeting[o]);
                }
                for (object_idx o : dependency_set(sys, ml->target, 2)) rec.in_d2[o] = 1;
                meas.push_back(std::move(rec));
            } else if (const auto* xl = std::get_if<ext_label>(&base.label(e))) {
                auto mv = sys.classify_mv(xl->value);
                if (!mv) continue;
                ext_rec rec;
                rec.base = e;
                rec.by = xl->by;
                rec.by_rtm = xl->by == sys.rtm();
                rec.target = mv->first;
                rec.matches_good = xl->value == sys.good_value(mv->first);
                rec.matches_bad = xl->value == sys.bad_value(mv->first);
                for (unsigned c : meas_targeting[mv->first]) {
                    const auto& ml = std::get<meas_label>(base.label(c));
                    if (ml.by == xl->by) rec.a2_meas.push_back(c);
                }
                exts.push_back(std::move(rec));
            }
        }
        for (const ext_rec& x : exts) {
            auto d1 = dependency_set(sys, x.target, 1);
            std::vector<unsigned> between;
            for (unsigned c : meas_targeting[x.target]) {
                const auto& ml = std::get<meas_label>(base.label(c));
                if (ml.by == x.by) between.push_back(c);
            }
            for (object_idx dep : d1)
                for (unsigned m2 : meas_targeting[dep]) a3.push_back({m2, x.base, x.by, between});
        }

        recent_eligible.assign(nobj, 0);
        deep_eligible.assign(nobj, 0);
        for (object_idx t = 0; t < nobj; ++t) {
            for (object_idx o : dependency_set(sys, t, 1)) recent_eligible[o] = 1;
            for (object_idx o : dependency_set(sys, t, 2)) deep_eligible[o] = 1;
        }

        if (mode == run_mode::joint) {
            bundle = scaffold_bundle(sys, base);
            if (bundle.quotes.empty())
                throw analysis_error("joint-strategy scaffold contains no quote events");
            auto extraction = extract_specification(sys, bundle);
            if (!extraction.ok())
                throw analysis_error("scaffold bundle extraction failed: " +
                                     extraction.errors.front().message);
            if (bundle_indicates_corruption(sys, bundle))
                throw analysis_error("scaffold bundle indicates a corruption");
            bool bottom_up = measures_bottom_up(sys, extraction.spec->spec);
            if (!bottom_up && need_compliance)
                throw analysis_error("scaffold bundle does not comply with the bundling strategy");
            if (bottom_up) {
                core = core_of(sys, extraction.spec->spec);
                core_fast = true;
                for (event_idx c = 0; c < core.size(); ++c) {
                    std::vector<event_idx> matches;
                    for (event_idx e = 0; e < base.size(); ++e)
                        if (base.label(e) == core.label(c)) matches.push_back(e);
                    if (matches.size() != 1) {
                        core_fast = false;
                        break;
                    }
                }
                if (core_fast)
                    for (auto [a, b] : core.cover_edges()) {
                        unsigned ba = 0, bb = 0;
                        for (event_idx e = 0; e < base.size(); ++e) {
                            if (base.label(e) == core.label(a)) ba = e;
                            if (base.label(e) == core.label(b)) bb = e;
                        }
                        core_edges.emplace_back(ba, bb);
                    }
            }
        }

        std::optional<object_idx> sink =
            mode == run_mode::joint && core.size() > 0 ? sink_target(sys, core)
                                                       : sink_target(sys, base);
        class_key_recent.resize(nobj);
        class_key_deep.resize(nobj);
        for (object_idx o = 0; o < nobj; ++o) {
            if (sink) {
                auto depth = dependency_depth(sys, *sink, o);
                std::string key = !depth            ? "other-" + sys.object_name(o)
                                  : *depth == 1     ? "recent-" + sys.object_name(o)
                                                    : "deep-" + sys.object_name(o);
                class_key_recent[o] = key;
                class_key_deep[o] = key;
            } else {
                class_key_recent[o] = "recent-" + sys.object_name(o);
                class_key_deep[o] = "deep-" + sys.object_name(o);
            }
        }
    }
};

struct tally {
    u64 enumerated = 0, skipped_invalid = 0, filtered = 0, analyzed = 0;
    u64 avoidance_events = 0, uncovered_avoidance = 0, failures = 0;
    u64 verdicts[4] = {0, 0, 0, 0};  // mode-specific buckets
    std::vector<u64> witness;        // 2 * object count

    void init(std::size_t nobj) { witness.assign(2 * nobj, 0); }
    void merge(const tally& o) {
        enumerated += o.enumerated;
        skipped_invalid += o.skipped_invalid;
        filtered += o.filtered;
        analyzed += o.analyzed;
        avoidance_events += o.avoidance_events;
        uncovered_avoidance += o.uncovered_avoidance;
        failures += o.failures;
        for (int i = 0; i < 4; ++i) verdicts[i] += o.verdicts[i];
        for (std::size_t i = 0; i < witness.size(); ++i) witness[i] += o.witness[i];
    }
};

// recent-or-deep buckets: 0 no-avoidance, 1 witnessed, 2 uncovered-only, 3 unwitnessed
// joint buckets: 0 admits-core, 1 deep, 2 recent, 3 unclassified

struct workspace {
    std::vector<unsigned> ext_pos;   // base idx -> extension position
    std::vector<unsigned> abs_base;  // base idx -> absolute position
    std::vector<std::pair<unsigned, adv_event>> adv;  // absolute position + event
    std::vector<char> out_bad;                        // per meas record
    std::vector<char> wflags;                         // 2 * object count scratch

    void prepare_extension(const std::vector<event_idx>& order, unsigned n) {
        ext_pos.assign(n, 0);
        for (unsigned p = 0; p < n; ++p) ext_pos[order[p]] = p;
    }

    void resolve(const chain_setup& s, const std::vector<insertion>& ins) {
        abs_base.resize(s.n);
        adv.clear();
        for (std::size_t j = 0; j < ins.size(); ++j)
            adv.emplace_back(ins[j].gap + static_cast<unsigned>(j), s.alphabet[ins[j].alpha]);
        // absolute base position: extension position plus insertions at gaps <= it
        for (unsigned b = 0; b < s.n; ++b) {
            unsigned p = ext_pos[b], bump = 0;
            for (const auto& i : ins)
                if (i.gap <= p) ++bump;
            abs_base[b] = p + bump;
        }
    }

    bool corrupt_at(object_idx o, unsigned q) const {
        for (auto it = adv.rbegin(); it != adv.rend(); ++it)
            if (it->second.obj == o && it->first < q) return it->second.is_corr;
        return false;
    }
};

struct failure_sink {
    // (task index, serialized doc); the lowest task index wins.
    std::optional<std::pair<u64, std::string>> best;

    void offer(u64 task_idx, const std::string& doc) {
        if (!best || task_idx < best->first) best = {task_idx, doc};
    }
};

void eval_fast_t1(const chain_setup& s, workspace& ws, const std::vector<insertion>& ins,
                  tally& t, const std::function<void()>& on_failure) {
    ++t.enumerated;
    ws.resolve(s, ins);
    bool detects = false;
    ws.out_bad.assign(s.meas.size(), 0);
    for (std::size_t mi = 0; mi < s.meas.size(); ++mi) {
        const meas_rec& rec = s.meas[mi];
        unsigned q = ws.abs_base[rec.base];
        if (!ws.corrupt_at(rec.target, q)) continue;
        bool sup_regular = true;
        for (object_idx o : rec.support)
            if (ws.corrupt_at(o, q)) sup_regular = false;
        if (sup_regular) {
            ws.out_bad[mi] = 1;
            detects = true;
        }
    }
    if (detects) {
        ++t.filtered;
        return;
    }
    ++t.analyzed;
    bool has_covered = false, has_uncovered = false, failed = false;
    for (std::size_t mi = 0; mi < s.meas.size(); ++mi) {
        const meas_rec& rec = s.meas[mi];
        unsigned q = ws.abs_base[rec.base];
        if (ws.out_bad[mi] || !ws.corrupt_at(rec.target, q)) continue;  // avoidance only
        bool covered = !rec.by_rtm;
        for (const auto& dl : rec.dep_meas) {
            bool found = false;
            for (unsigned c : dl)
                if (ws.ext_pos[c] < ws.ext_pos[rec.base]) found = true;
            if (!found) covered = false;
        }
        if (!covered) {
            ++t.uncovered_avoidance;
            has_uncovered = true;
            continue;
        }
        has_covered = true;
        ++t.avoidance_events;
        std::fill(ws.wflags.begin(), ws.wflags.end(), 0);
        bool witnessed = false;
        for (const auto& [pos, ev] : ws.adv) {
            if (!ev.is_corr || pos >= q) continue;
            object_idx o = ev.obj;
            if (rec.in_d1[o]) {
                for (unsigned c : s.meas_targeting[o])
                    if (ws.abs_base[c] < pos) {
                        ws.wflags[2 * o] = 1;
                        witnessed = true;
                        break;
                    }
            }
            if (rec.in_d2[o]) {
                ws.wflags[2 * o + 1] = 1;
                witnessed = true;
            }
        }
        for (std::size_t f = 0; f < ws.wflags.size(); ++f)
            if (ws.wflags[f]) ++t.witness[f];
        if (!witnessed) failed = true;
    }
    if (failed) {
        ++t.failures;
        ++t.verdicts[3];
        on_failure();
    } else if (has_covered) {
        ++t.verdicts[1];
    } else if (has_uncovered) {
        ++t.verdicts[2];
    } else {
        ++t.verdicts[0];
    }
}

void eval_fast_joint(const chain_setup& s, workspace& ws, const std::vector<insertion>& ins,
                     tally& t, const std::function<void()>& on_failure) {
    ++t.enumerated;
    ws.resolve(s, ins);
    ws.out_bad.assign(s.meas.size(), 0);
    std::vector<unsigned> meas_rec_of(s.n, UINT32_MAX);
    for (std::size_t mi = 0; mi < s.meas.size(); ++mi) {
        const meas_rec& rec = s.meas[mi];
        meas_rec_of[rec.base] = static_cast<unsigned>(mi);
        unsigned q = ws.abs_base[rec.base];
        if (!ws.corrupt_at(rec.target, q)) continue;
        bool sup_regular = true;
        for (object_idx o : rec.support)
            if (ws.corrupt_at(o, q)) sup_regular = false;
        if (sup_regular) ws.out_bad[mi] = 1;
    }
    bool violated = false;
    if (!(s.relax & relax_prior_meas)) {
        for (const ext_rec& x : s.exts) {
            unsigned q = ws.abs_base[x.base];
            if (ws.corrupt_at(x.by, q)) continue;
            int best = -1;
            for (unsigned c : x.a2_meas)
                if (ws.ext_pos[c] < ws.ext_pos[x.base] &&
                    (best < 0 || ws.ext_pos[c] > ws.ext_pos[static_cast<unsigned>(best)]))
                    best = static_cast<int>(c);
            if (best < 0) {
                violated = true;
                break;
            }
            bool bad = ws.out_bad[meas_rec_of[static_cast<unsigned>(best)]];
            if (!(bad ? x.matches_bad : x.matches_good)) {
                violated = true;
                break;
            }
        }
    }
    if (!violated && !(s.relax & relax_fresh_meas)) {
        for (const a3_rec& r : s.a3) {
            if (ws.ext_pos[r.meas_base] >= ws.ext_pos[r.ext_base]) continue;
            if (ws.corrupt_at(r.extender, ws.abs_base[r.ext_base])) continue;
            bool remeasured = false;
            for (unsigned b : r.between)
                if (ws.ext_pos[b] > ws.ext_pos[r.meas_base] && ws.ext_pos[b] < ws.ext_pos[r.ext_base])
                    remeasured = true;
            if (!remeasured) {
                violated = true;
                break;
            }
        }
    }
    if (violated) {
        ++t.filtered;
        return;
    }
    ++t.analyzed;
    bool admits_core = s.core_fast;
    for (auto [a, b] : s.core_edges)
        if (ws.ext_pos[a] >= ws.ext_pos[b]) admits_core = false;
    if (admits_core) {
        ++t.verdicts[0];
        return;
    }
    std::fill(ws.wflags.begin(), ws.wflags.end(), 0);
    bool deep = false, recent = false;
    for (const auto& [pos, ev] : ws.adv) {
        if (!ev.is_corr) continue;
        object_idx o = ev.obj;
        if (s.deep_eligible[o]) {
            deep = true;
            ws.wflags[2 * o + 1] = 1;
        }
        if (s.recent_eligible[o])
            for (unsigned c : s.meas_targeting[o])
                if (ws.abs_base[c] < pos) {
                    recent = true;
                    ws.wflags[2 * o] = 1;
                }
    }
    if (deep) {
        ++t.verdicts[1];
        for (std::size_t f = 1; f < ws.wflags.size(); f += 2)
            if (ws.wflags[f]) ++t.witness[f];
        return;
    }
    if (recent) {
        ++t.verdicts[2];
        for (std::size_t f = 0; f < ws.wflags.size(); f += 2)
            if (ws.wflags[f]) ++t.witness[f];
        return;
    }
    ++t.failures;
    ++t.verdicts[3];
    on_failure();
}

// Reference lane: the same stream evaluated through the generic poset
// machinery. Kept for testing the fast kernels.
void eval_reference(const chain_setup& s, const event_poset& exec, tally& t,
                    const std::function<void()>& on_failure) {
    ++t.enumerated;
    if (!validate_execution(s.sys, exec).ok()) {
        ++t.skipped_invalid;
        return;
    }
    const std::size_t nobj = s.sys.object_count();
    std::vector<char> flags(2 * nobj, 0);
    if (s.mode == run_mode::recent_or_deep) {
        theorem1_report rep = check_recent_or_deep(s.sys, exec);
        if (!rep.detections.empty()) {
            ++t.filtered;
            return;
        }
        ++t.analyzed;
        t.uncovered_avoidance += rep.uncovered.size();
        t.avoidance_events += rep.verdicts.size();
        bool failed = false;
        for (const auto& v : rep.verdicts) {
            std::fill(flags.begin(), flags.end(), 0);
            for (const auto& w : v.recent) flags[2 * w.obj] = 1;
            for (const auto& w : v.deep) flags[2 * w.obj + 1] = 1;
            for (std::size_t f = 0; f < flags.size(); ++f)
                if (flags[f]) ++t.witness[f];
            if (!v.witnessed()) failed = true;
        }
        if (failed) {
            ++t.failures;
            ++t.verdicts[3];
            on_failure();
        } else if (!rep.verdicts.empty())
            ++t.verdicts[1];
        else if (!rep.uncovered.empty())
            ++t.verdicts[2];
        else
            ++t.verdicts[0];
        return;
    }
    // joint mode
    bool violated = false;
    if (!(s.relax & relax_prior_meas) && !check_assumption_prior_meas(s.sys, exec).empty())
        violated = true;
    if (!violated && !(s.relax & relax_fresh_meas) &&
        !check_assumption_fresh_meas(s.sys, exec).empty())
        violated = true;
    if (violated) {
        ++t.filtered;
        return;
    }
    ++t.analyzed;
    if (s.core.size() > 0 && admits(s.core, exec)) {
        ++t.verdicts[0];
        return;
    }
    auto deep = find_deep_witnesses(s.sys, exec);
    if (!deep.empty()) {
        ++t.verdicts[1];
        for (const auto& w : deep) flags[2 * w.deep_obj + 1] = 1;
        for (std::size_t f = 0; f < flags.size(); ++f)
            if (flags[f]) ++t.witness[f];
        return;
    }
    auto recent = find_recent_witnesses(s.sys, exec);
    if (!recent.empty()) {
        ++t.verdicts[2];
        for (const auto& w : recent) flags[2 * w.dep_obj] = 1;
        for (std::size_t f = 0; f < flags.size(); ++f)
            if (flags[f]) ++t.witness[f];
        return;
    }
    ++t.failures;
    ++t.verdicts[3];
    on_failure();
}

struct task {
    unsigned ext;
    int first_gap;    // -1: the bare linearization (no insertions)
    unsigned alpha;
    u64 budget;       // executions this task may yield
};

std::vector<std::vector<event_idx>> collect_extensions(const event_poset& base) {
    std::vector<std::vector<event_idx>> out;
    base.linear_extensions([&](const std::vector<event_idx>& order) {
        out.push_back(order);
        return out.size() < 5'000'000;
    });
    if (out.size() >= 5'000'000)
        throw analysis_error("exploration base has too many linear extensions");
    return out;
}

std::vector<task> plan_tasks(const chain_setup& s,
                             const std::vector<std::vector<event_idx>>& extensions,
                             const exploration_budget& budget, u64& total_available) {
    const u64 m = s.alphabet.size();
    const unsigned K = budget.max_adversary_events;
    total_available =
        sat_mul(static_cast<u64>(extensions.size()), universe_per_extension(s.n, K, m));
    std::vector<task> tasks;
    u64 consumed = 0;
    auto remaining = [&]() {
        return budget.max_executions > consumed ? budget.max_executions - consumed : 0;
    };
    for (unsigned e = 0; e < extensions.size(); ++e) {
        u64 give = std::min<u64>(1, remaining());
        tasks.push_back({e, -1, 0, give});
        consumed = sat_add(consumed, give);
        if (K == 0 || m == 0) continue;
        for (unsigned g = 0; g <= s.n; ++g) {
            u64 subtree = tail_count(s.n, g, K - 1, m);
            for (unsigned a = 0; a < m; ++a) {
                u64 slice = std::min<u64>(subtree, remaining());
                tasks.push_back({e, static_cast<int>(g), a, slice});
                consumed = sat_add(consumed, slice);
            }
        }
    }
    return tasks;
}

theorem_report run_exploration(const attestation_system& sys, const event_poset& base,
                               const exploration_budget& budget, run_mode mode, unsigned relax,
                               const explore_options& opts) {
    chain_setup setup(sys, base, mode, budget, relax, /*need_compliance=*/true);
    auto extensions = collect_extensions(base);
    u64 total_available = 0;
    auto tasks = plan_tasks(setup, extensions, budget, total_available);

    int threads = 1;
#ifdef _OPENMP
    threads = opts.workers ? static_cast<int>(opts.workers) : omp_get_max_threads();
#endif
    std::vector<tally> tallies(static_cast<std::size_t>(threads));
    for (auto& t : tallies) t.init(sys.object_count());
    failure_sink failures;

    auto run_task = [&](std::size_t ti, tally& t, workspace& ws) {
        const task& tk = tasks[ti];
        if (tk.budget == 0) return;
        ws.prepare_extension(extensions[tk.ext], setup.n);
        ws.wflags.assign(2 * sys.object_count(), 0);
        u64 countdown = tk.budget;
        std::vector<insertion> ins;
        unsigned min_gap = 0;
        if (tk.first_gap >= 0) {
            ins.push_back({static_cast<unsigned>(tk.first_gap), tk.alpha});
            min_gap = static_cast<unsigned>(tk.first_gap);
        }
        auto visit = [&](const std::vector<insertion>& cur) {
            auto on_failure = [&]() {
                event_poset exec = materialize(sys, base, extensions[tk.ext], cur, setup.alphabet);
                std::string doc = serialize_execution(sys, exec);
#ifdef _OPENMP
#pragma omp critical(lat_failure_sink)
#endif
                failures.offer(ti, doc);
            };
            if (opts.serial_reference) {
                event_poset exec = materialize(sys, base, extensions[tk.ext], cur, setup.alphabet);
                eval_reference(setup, exec, t, on_failure);
            } else if (mode == run_mode::recent_or_deep) {
                eval_fast_t1(setup, ws, cur, t, on_failure);
            } else {
                eval_fast_joint(setup, ws, cur, t, on_failure);
            }
            return true;
        };
        if (tk.first_gap < 0) {
            if (countdown) {
                --countdown;
                visit(ins);
            }
        } else {
            insertion_dfs(ins, min_gap, setup.n, budget.max_adversary_events,
                          setup.alphabet.size(), countdown, visit);
        }
    };

#ifdef _OPENMP
#pragma omp parallel num_threads(threads)
    {
        workspace ws;
        tally& t = tallies[static_cast<std::size_t>(omp_get_thread_num())];
#pragma omp for schedule(dynamic, 16)
        for (std::ptrdiff_t ti = 0; ti < static_cast<std::ptrdiff_t>(tasks.size()); ++ti)
            run_task(static_cast<std::size_t>(ti), t, ws);
    }
#else
    {
        workspace ws;
        for (std::size_t ti = 0; ti < tasks.size(); ++ti) run_task(ti, tallies[0], ws);
    }
#endif

    tally total;
    total.init(sys.object_count());
    for (const auto& t : tallies) total.merge(t);

    theorem_report rep;
    rep.mode = mode == run_mode::recent_or_deep ? "recent-or-deep" : "joint-strategy";
    rep.max_adversary_events = budget.max_adversary_events;
    rep.include_repairs = budget.include_repairs;
    rep.seed = budget.seed;
    rep.relax = relax;
    rep.total_available = total_available;
    rep.enumerated = total.enumerated;
    rep.skipped_invalid = total.skipped_invalid;
    rep.filtered = total.filtered;
    rep.analyzed = total.analyzed;
    rep.avoidance_events = total.avoidance_events;
    rep.uncovered_avoidance_events = total.uncovered_avoidance;
    rep.failures = total.failures;
    rep.budget_exhausted = total_available > budget.max_executions;
    const char* names_t1[4] = {"no-avoidance", "witnessed", "uncovered-only", "unwitnessed"};
    const char* names_joint[4] = {"admits-core", "deep", "recent", "unclassified"};
    for (int i = 0; i < 4; ++i) {
        u64 v = total.verdicts[i];
        if (v)
            rep.verdicts[mode == run_mode::recent_or_deep ? names_t1[i] : names_joint[i]] = v;
    }
    for (object_idx o = 0; o < sys.object_count(); ++o) {
        if (total.witness[2 * o]) rep.witness_classes[setup.class_key_recent[o]] += total.witness[2 * o];
        if (total.witness[2 * o + 1])
            rep.witness_classes[setup.class_key_deep[o]] += total.witness[2 * o + 1];
    }
    if (failures.best) rep.first_failure = failures.best->second;
    return rep;
}

}  // namespace

enumeration_stats enumerate_executions(const attestation_system& sys, const event_poset& base,
                                       const exploration_budget& budget,
                                       const std::function<bool(const event_poset&)>& visit) {
    chain_setup setup(sys, base, run_mode::recent_or_deep, budget, relax_none, false);
    auto extensions = collect_extensions(base);
    enumeration_stats stats;
    u64 countdown = budget.max_executions;
    u64 total = sat_mul(static_cast<u64>(extensions.size()),
                        universe_per_extension(setup.n, budget.max_adversary_events,
                                               setup.alphabet.size()));
    stats.budget_exhausted = total > budget.max_executions;
    for (const auto& order : extensions) {
        std::vector<insertion> ins;
        bool keep = insertion_dfs(
            ins, 0, setup.n, budget.max_adversary_events, setup.alphabet.size(), countdown,
            [&](const std::vector<insertion>& cur) {
                event_poset exec = materialize(sys, base, order, cur, setup.alphabet);
                if (!validate_execution(sys, exec).ok()) {
                    ++stats.skipped_invalid;
                    return true;
                }
                ++stats.yielded;
                return visit(exec);
            });
        if (!keep || countdown == 0) break;
    }
    return stats;
}

theorem_report verify_recent_or_deep(const attestation_system& sys, const event_poset& spec,
                                     const exploration_budget& budget,
                                     const explore_options& opts) {
    return run_exploration(sys, spec, budget, run_mode::recent_or_deep, relax_none, opts);
}

theorem_report verify_joint_strategy(const attestation_system& sys, const event_poset& scaffold,
                                     const exploration_budget& budget, unsigned relax,
                                     const explore_options& opts) {
    return run_exploration(sys, scaffold, budget, run_mode::joint, relax, opts);
}

std::optional<event_poset> find_counterexample(const attestation_system& sys,
                                               const event_poset& base,
                                               const exploration_budget& budget, unsigned relax,
                                               const event_poset* against) {
    bool joint = false;
    for (event_idx e = 0; e < base.size(); ++e)
        if (is_extend(base.label(e)) || is_quote(base.label(e))) joint = true;
    run_mode mode = joint ? run_mode::joint : run_mode::recent_or_deep;
    chain_setup setup(sys, base, mode, budget, relax, /*need_compliance=*/against == nullptr);
    auto extensions = collect_extensions(base);

    workspace ws;
    ws.wflags.assign(2 * sys.object_count(), 0);
    tally t;
    t.init(sys.object_count());
    std::optional<event_poset> found;
    u64 countdown = budget.max_executions;
    for (const auto& order : extensions) {
        ws.prepare_extension(order, setup.n);
        std::vector<insertion> ins;
        bool keep = insertion_dfs(
            ins, 0, setup.n, budget.max_adversary_events, setup.alphabet.size(), countdown,
            [&](const std::vector<insertion>& cur) {
                bool defeated = false;
                if (against) {
                    // Property under test: the execution admits `against`.
                    u64 before = t.filtered;
                    if (mode == run_mode::joint)
                        eval_fast_joint(setup, ws, cur, t, [] {});
                    else
                        eval_fast_t1(setup, ws, cur, t, [] {});
                    bool excluded = t.filtered > before;
                    if (!excluded) {
                        event_poset exec = materialize(sys, base, order, cur, setup.alphabet);
                        defeated = !admits(*against, exec).has_value();
                        if (defeated) found = std::move(exec);
                    }
                } else {
                    u64 before = t.failures;
                    if (mode == run_mode::joint)
                        eval_fast_joint(setup, ws, cur, t, [] {});
                    else
                        eval_fast_t1(setup, ws, cur, t, [] {});
                    if (t.failures > before) {
                        found = materialize(sys, base, order, cur, setup.alphabet);
                        defeated = true;
                    }
                }
                return !defeated;
            });
        if (!keep || countdown == 0 || found) break;
    }
    return found;
}

quote_bundle scaffold_bundle(const attestation_system& sys, const event_poset& scaffold) {
    quote_bundle bundle;
    for (event_idx e : scaffold.topological_order())
        if (is_quote(scaffold.label(e)))
            bundle.quotes.push_back(quote_output(scaffold, e, sys).value);
    return bundle;
}

std::string theorem_report::to_text() const {
    std::ostringstream out;
    out << "mode: " << mode << "\n";
    out << "bounds: max-adversary-events=" << max_adversary_events
        << " repairs=" << (include_repairs ? "on" : "off") << " seed=" << seed;
    out << " relax=";
    if (relax == relax_none)
        out << "none";
    else {
        if (relax & relax_prior_meas) out << "prior-meas";
        if ((relax & relax_prior_meas) && (relax & relax_fresh_meas)) out << ",";
        if (relax & relax_fresh_meas) out << "fresh-meas";
    }
    out << "\n";
    out << "universe: total=" << total_available << " enumerated=" << enumerated
        << (budget_exhausted ? " (budget exhausted)" : "") << "\n";
    out << "skipped-invalid: " << skipped_invalid << "\n";
    out << (mode == "recent-or-deep" ? "filtered-detecting: " : "filtered-assumption-violating: ")
        << filtered << "\n";
    out << "analyzed: " << analyzed << "\n";
    if (mode == "recent-or-deep") {
        out << "avoidance-events: " << avoidance_events << "\n";
        out << "uncovered-avoidance-events: " << uncovered_avoidance_events << "\n";
    }
    out << "verdicts:";
    for (const auto& [k, v] : verdicts) out << " " << k << "=" << v;
    out << "\n";
    out << "witness-classes:";
    for (const auto& [k, v] : witness_classes) out << " " << k << "=" << v;
    out << "\n";
    out << "failures: " << failures << "\n";
    if (first_failure) out << "first-failure:\n" << *first_failure;
    return out.str();
}

std::string theorem_report::to_json_text() const {
    nlohmann::json doc;
    doc["mode"] = mode;
    doc["bounds"] = {{"max_adversary_events", max_adversary_events},
                     {"include_repairs", include_repairs},
                     {"seed", seed},
                     {"relax", relax}};
    doc["total_available"] = total_available;
    doc["enumerated"] = enumerated;
    doc["skipped_invalid"] = skipped_invalid;
    doc["filtered"] = filtered;
    doc["analyzed"] = analyzed;
    doc["avoidance_events"] = avoidance_events;
    doc["uncovered_avoidance_events"] = uncovered_avoidance_events;
    doc["verdicts"] = verdicts;
    doc["witness_classes"] = witness_classes;
    doc["failures"] = failures;
    doc["budget_exhausted"] = budget_exhausted;
    if (first_failure) doc["first_failure"] = *first_failure;
    return doc.dump(2) + "\n";
}

}  // namespace lat
