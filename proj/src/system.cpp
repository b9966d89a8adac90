#include "lat/system.hpp"

#include <algorithm>
#include <stdexcept>

namespace lat {

std::set<std::pair<std::string, std::string>> relation_closure(
    const std::set<std::pair<std::string, std::string>>& rel) {
    std::set<std::pair<std::string, std::string>> out = rel;
    bool changed = true;
    while (changed) {
        changed = false;
        std::vector<std::pair<std::string, std::string>> add;
        for (const auto& [a, b] : out)
            for (const auto& [c, d] : out)
                if (b == c && !out.count({a, d})) add.emplace_back(a, d);
        for (auto& e : add) changed |= out.insert(std::move(e)).second;
    }
    return out;
}

namespace {

std::vector<std::pair<object_idx, object_idx>> close_edges(
    std::size_t n, std::vector<std::pair<object_idx, object_idx>> edges) {
    std::vector<std::vector<bool>> reach(n, std::vector<bool>(n, false));
    for (auto [a, b] : edges) reach[a][b] = true;
    for (std::size_t k = 0; k < n; ++k)
        for (std::size_t i = 0; i < n; ++i)
            if (reach[i][k])
                for (std::size_t j = 0; j < n; ++j)
                    if (reach[k][j]) reach[i][j] = true;
    std::vector<std::pair<object_idx, object_idx>> out;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            if (reach[i][j]) out.emplace_back(static_cast<object_idx>(i), static_cast<object_idx>(j));
    return out;
}

}  // namespace

attestation_system attestation_system::build(const raw& r) {
    attestation_system sys;
    sys.names_ = r.objects;
    for (object_idx i = 0; i < sys.names_.size(); ++i) {
        if (!sys.index_.emplace(sys.names_[i], i).second)
            throw std::runtime_error("duplicate object name '" + sys.names_[i] + "'");
    }
    auto obj = [&](const std::string& name) {
        auto it = sys.index_.find(name);
        if (it == sys.index_.end()) throw std::runtime_error("unknown object '" + name + "'");
        return it->second;
    };
    sys.rtm_ = obj(r.rtm);

    const std::size_t n = sys.names_.size();
    sys.m_.assign(n, std::vector<bool>(n, false));
    sys.c_.assign(n, std::vector<bool>(n, false));
    for (const auto& [a, b] : r.measures) {
        object_idx ia = obj(a), ib = obj(b);
        if (!sys.m_[ia][ib]) {
            sys.m_[ia][ib] = true;
            sys.m_edges_.emplace_back(ia, ib);
        }
    }
    for (const auto& [a, b] : r.context) {
        object_idx ia = obj(a), ib = obj(b);
        if (!sys.c_[ia][ib]) {
            sys.c_[ia][ib] = true;
            sys.c_edges_given_.emplace_back(ia, ib);
        }
    }
    sys.c_edges_ = close_edges(n, sys.c_edges_given_);
    if (sys.c_edges_.size() != sys.c_edges_given_.size())
        sys.notes_.push_back({"c-closed", "context relation was not transitive; closed at load"});
    for (auto [a, b] : sys.c_edges_) sys.c_[a][b] = true;

    sys.m_inv_.assign(n, {});
    sys.c_inv_.assign(n, {});
    for (auto [a, b] : sys.m_edges_) sys.m_inv_[b].push_back(a);
    for (auto [a, b] : sys.c_edges_) sys.c_inv_[b].push_back(a);
    for (auto& v : sys.m_inv_) std::sort(v.begin(), v.end());
    for (auto& v : sys.c_inv_) std::sort(v.begin(), v.end());

    sys.pcr_names_ = r.pcrs;
    std::sort(sys.pcr_names_.begin(), sys.pcr_names_.end());
    for (pcr_idx i = 0; i < sys.pcr_names_.size(); ++i) {
        if (!sys.pcr_index_.emplace(sys.pcr_names_[i].full(), i).second)
            throw std::runtime_error("duplicate PCR '" + sys.pcr_names_[i].full() + "'");
    }
    sys.pcr_owner_.assign(sys.pcr_names_.size(), std::nullopt);
    sys.l_.assign(n, std::vector<bool>(sys.pcr_names_.size(), false));
    for (const auto& [o, p] : r.access) {
        object_idx io = obj(o);
        auto it = sys.pcr_index_.find(p);
        if (it == sys.pcr_index_.end()) throw std::runtime_error("unknown PCR '" + p + "'");
        sys.l_pairs_.emplace_back(io, it->second);
        sys.l_[io][it->second] = true;
        if (!sys.pcr_owner_[it->second]) sys.pcr_owner_[it->second] = io;
    }

    sys.mv_.resize(n);
    for (object_idx i = 0; i < n; ++i) {
        auto it = r.mv.find(sys.names_[i]);
        if (it != r.mv.end() && !(it->second.good.empty() && it->second.bad.empty()))
            sys.mv_[i] = it->second;
        else
            sys.mv_[i] = mv_partition{{"g:" + sys.names_[i]}, {"b:" + sys.names_[i]}};
        for (const auto& v : sys.mv_[i].good) sys.mv_class_.emplace(v, std::make_pair(i, true));
        for (const auto& v : sys.mv_[i].bad) sys.mv_class_.emplace(v, std::make_pair(i, false));
    }
    for (const auto& [name, extra] : r.mv)
        obj(name);  // reject mv entries naming unknown objects
    return sys;
}

std::optional<object_idx> attestation_system::find_object(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

object_idx attestation_system::object(const std::string& name) const {
    auto o = find_object(name);
    if (!o) throw std::runtime_error("unknown object '" + name + "'");
    return *o;
}

std::optional<pcr_idx> attestation_system::find_pcr(const std::string& full) const {
    auto it = pcr_index_.find(full);
    if (it == pcr_index_.end()) return std::nullopt;
    return it->second;
}

bool attestation_system::may_extend(object_idx o, pcr_idx p) const { return l_[o][p]; }

std::optional<std::pair<object_idx, bool>> attestation_system::classify_mv(const term& t) const {
    if (t.kind() != term_kind::pub_atom) return std::nullopt;
    auto it = mv_class_.find(t.name());
    if (it == mv_class_.end()) return std::nullopt;
    return it->second;
}

std::vector<object_idx> attestation_system::support_objects(object_idx by) const {
    std::vector<object_idx> out{by};
    for (object_idx c : c_inv_[by]) out.push_back(c);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

validation_report validate_system(const attestation_system& sys) {
    validation_report rep;
    rep.notes = sys.normalization_notes();
    const std::size_t n = sys.object_count();

    // M rooted: every non-rtm object reachable from rtm through M.
    std::vector<bool> seen(n, false);
    std::vector<object_idx> stack{sys.rtm()};
    seen[sys.rtm()] = true;
    while (!stack.empty()) {
        object_idx o = stack.back();
        stack.pop_back();
        for (auto [a, b] : sys.measure_edges())
            if (a == o && !seen[b]) {
                seen[b] = true;
                stack.push_back(b);
            }
    }
    for (object_idx o = 0; o < n; ++o)
        if (!seen[o])
            rep.violations.push_back(
                {"m-not-rooted", "object '" + sys.object_name(o) + "' unreachable from rtm via M"});

    auto cyclic = [&](const std::vector<std::pair<object_idx, object_idx>>& edges) {
        std::vector<std::vector<bool>> reach(n, std::vector<bool>(n, false));
        for (auto [a, b] : edges) reach[a][b] = true;
        for (std::size_t k = 0; k < n; ++k)
            for (std::size_t i = 0; i < n; ++i)
                if (reach[i][k])
                    for (std::size_t j = 0; j < n; ++j)
                        if (reach[k][j]) reach[i][j] = true;
        for (std::size_t i = 0; i < n; ++i)
            if (reach[i][i]) return true;
        return false;
    };
    if (cyclic(sys.measure_edges()))
        rep.violations.push_back({"m-cyclic", "transitive closure of M is not irreflexive"});
    if (cyclic(sys.context_edges()))
        rep.violations.push_back({"c-cyclic", "context relation C is cyclic"});
    auto mc = sys.measure_edges();
    mc.insert(mc.end(), sys.context_edges().begin(), sys.context_edges().end());
    if (cyclic(mc)) rep.violations.push_back({"mc-cyclic", "M ∪ C is cyclic"});

    for (auto [a, b] : sys.measure_edges())
        if (b == sys.rtm())
            rep.violations.push_back(
                {"m-into-rtm", "M edge " + sys.object_name(a) + " -> rtm is forbidden"});

    // L: injective per PCR, single TPM per object.
    std::vector<std::vector<object_idx>> per_pcr(sys.pcr_count());
    std::vector<std::set<std::string>> tpms_of(n);
    for (auto [o, p] : sys.access_pairs()) {
        per_pcr[p].push_back(o);
        tpms_of[o].insert(sys.pcr(p).tpm);
    }
    for (pcr_idx p = 0; p < sys.pcr_count(); ++p) {
        auto& v = per_pcr[p];
        std::sort(v.begin(), v.end());
        v.erase(std::unique(v.begin(), v.end()), v.end());
        if (v.size() > 1)
            rep.violations.push_back(
                {"l-not-injective", "PCR " + sys.pcr(p).full() + " shared by several objects"});
    }
    for (object_idx o = 0; o < n; ++o)
        if (tpms_of[o].size() > 1)
            rep.violations.push_back(
                {"l-multi-tpm", "object '" + sys.object_name(o) + "' accesses several TPMs"});

    // MV partitions: nonempty, disjoint, not shared across objects.
    std::map<std::string, object_idx> owner;
    for (object_idx o = 0; o < n; ++o) {
        const auto& mv = sys.mv(o);
        if (mv.good.empty() || mv.bad.empty())
            rep.violations.push_back(
                {"mv-empty", "object '" + sys.object_name(o) + "' lacks good or bad values"});
        std::set<std::string> g(mv.good.begin(), mv.good.end());
        for (const auto& b : mv.bad)
            if (g.count(b))
                rep.violations.push_back({"mv-overlap", "value '" + b + "' is both good and bad for '" +
                                                            sys.object_name(o) + "'"});
        for (const auto& v : mv.good) {
            auto [it, fresh] = owner.emplace(v, o);
            if (!fresh && it->second != o)
                rep.violations.push_back({"mv-shared", "value '" + v + "' belongs to two objects"});
        }
        for (const auto& v : mv.bad) {
            auto [it, fresh] = owner.emplace(v, o);
            if (!fresh && it->second != o)
                rep.violations.push_back({"mv-shared", "value '" + v + "' belongs to two objects"});
        }
    }
    return rep;
}

std::vector<object_idx> dependency_set_of(const attestation_system& sys,
                                          const std::vector<object_idx>& objs) {
    std::vector<bool> in(sys.object_count(), false);
    for (object_idx o : objs) {
        for (object_idx m : sys.measurers_of(o)) {
            in[m] = true;
            for (object_idx c : sys.context_of(m)) in[c] = true;
        }
    }
    std::vector<object_idx> out;
    for (object_idx o = 0; o < sys.object_count(); ++o)
        if (in[o]) out.push_back(o);
    return out;
}

std::vector<object_idx> dependency_set(const attestation_system& sys, object_idx o, unsigned depth) {
    if (depth == 0) throw std::runtime_error("dependency depth must be positive");
    std::vector<object_idx> cur{o};
    for (unsigned i = 0; i < depth; ++i) cur = dependency_set_of(sys, cur);
    return cur;
}

std::optional<unsigned> dependency_depth(const attestation_system& sys, object_idx anchor,
                                         object_idx o) {
    std::vector<object_idx> cur{anchor};
    for (unsigned i = 1; i <= sys.object_count(); ++i) {
        cur = dependency_set_of(sys, cur);
        if (std::find(cur.begin(), cur.end(), o) != cur.end()) return i;
        if (cur.empty()) break;
    }
    return std::nullopt;
}

}  // namespace lat
