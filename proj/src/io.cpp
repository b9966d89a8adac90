#include "lat/io.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace lat {

namespace {

using nlohmann::json;

json parse_json(const std::string& text) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw io_error(std::string("document is not valid JSON: ") + e.what());
    }
}

const json& field(const json& doc, const char* name) {
    auto it = doc.find(name);
    if (it == doc.end()) throw io_error(std::string(name) + " required");
    return *it;
}

std::vector<std::pair<std::string, std::string>> edge_list(const json& arr, const char* name) {
    if (!arr.is_array()) throw io_error(std::string(name) + " must be a list of [from, to] pairs");
    std::vector<std::pair<std::string, std::string>> out;
    for (const auto& e : arr) {
        if (!e.is_array() || e.size() != 2 || !e[0].is_string() || !e[1].is_string())
            throw io_error(std::string(name) + " entries must be [from, to] name pairs");
        out.emplace_back(e[0].get<std::string>(), e[1].get<std::string>());
    }
    return out;
}

}  // namespace

parsed_system parse_system(const std::string& text) {
    json doc = parse_json(text);
    attestation_system::raw raw;
    for (const auto& o : field(doc, "objects")) {
        if (!o.is_string()) throw io_error("objects entries must be names");
        raw.objects.push_back(o.get<std::string>());
    }
    raw.rtm = field(doc, "rtm").get<std::string>();
    if (doc.contains("M")) raw.measures = edge_list(doc["M"], "M");
    if (doc.contains("C")) raw.context = edge_list(doc["C"], "C");
    if (doc.contains("tpms")) {
        if (!doc["tpms"].is_object()) throw io_error("tpms must map TPM names to register lists");
        for (const auto& [tpm, regs] : doc["tpms"].items())
            for (const auto& r : regs) raw.pcrs.push_back({tpm, r.get<std::string>()});
    }
    if (doc.contains("L")) raw.access = edge_list(doc["L"], "L");
    if (doc.contains("mv")) {
        for (const auto& [name, part] : doc["mv"].items()) {
            mv_partition mv;
            if (part.contains("good"))
                for (const auto& v : part["good"]) mv.good.push_back(v.get<std::string>());
            if (part.contains("bad"))
                for (const auto& v : part["bad"]) mv.bad.push_back(v.get<std::string>());
            raw.mv.emplace(name, std::move(mv));
        }
    }
    try {
        parsed_system out{attestation_system::build(raw), {}};
        out.report = validate_system(out.sys);
        return out;
    } catch (const std::runtime_error& e) {
        throw io_error(e.what());
    }
}

std::string serialize_system(const attestation_system& sys) {
    json doc;
    doc["objects"] = json::array();
    for (object_idx o = 0; o < sys.object_count(); ++o) doc["objects"].push_back(sys.object_name(o));
    doc["rtm"] = sys.object_name(sys.rtm());
    auto edges = [&](const std::vector<std::pair<object_idx, object_idx>>& in) {
        std::vector<std::pair<std::string, std::string>> named;
        for (auto [a, b] : in) named.emplace_back(sys.object_name(a), sys.object_name(b));
        std::sort(named.begin(), named.end());
        json arr = json::array();
        for (auto& [a, b] : named) arr.push_back({a, b});
        return arr;
    };
    doc["M"] = edges(sys.measure_edges());
    doc["C"] = edges(sys.context_edges());
    json tpms = json::object();
    for (pcr_idx p = 0; p < sys.pcr_count(); ++p) tpms[sys.pcr(p).tpm].push_back(sys.pcr(p).reg);
    doc["tpms"] = std::move(tpms);
    std::vector<std::pair<std::string, std::string>> access;
    for (auto [o, p] : sys.access_pairs())
        access.emplace_back(sys.object_name(o), sys.pcr(p).full());
    std::sort(access.begin(), access.end());
    doc["L"] = json::array();
    for (auto& [o, p] : access) doc["L"].push_back({o, p});
    json mv = json::object();
    for (object_idx o = 0; o < sys.object_count(); ++o)
        mv[sys.object_name(o)] = {{"good", sys.mv(o).good}, {"bad", sys.mv(o).bad}};
    doc["mv"] = std::move(mv);
    return doc.dump(2) + "\n";
}

event_label parse_event_label(const std::string& text, const attestation_system& sys) {
    std::istringstream in(text);
    std::string kind;
    in >> kind;
    auto object_arg = [&](const char* what) {
        std::string name;
        if (!(in >> name)) throw io_error(std::string("label '") + text + "': missing " + what);
        auto o = sys.find_object(name);
        if (!o) throw io_error(std::string("label '") + text + "': unknown object '" + name + "'");
        return *o;
    };
    auto rest_term = [&]() {
        std::string rest;
        std::getline(in, rest);
        try {
            return parse_term(rest);
        } catch (const term_parse_error& e) {
            throw io_error(std::string("label '") + text + "': " + e.what());
        }
    };
    if (kind == "meas") {
        object_idx by = object_arg("measurer");
        object_idx target = object_arg("target");
        return meas_label{by, target};
    }
    if (kind == "corr") return corr_label{object_arg("object")};
    if (kind == "rep") return rep_label{object_arg("object")};
    if (kind == "att_start") return att_start_label{rest_term()};
    if (kind == "ext") {
        object_idx by = object_arg("extender");
        std::string pcr;
        if (!(in >> pcr)) throw io_error("label '" + text + "': missing PCR");
        auto p = sys.find_pcr(pcr);
        if (!p) throw io_error("label '" + text + "': unknown PCR '" + pcr + "'");
        return ext_label{by, *p, rest_term()};
    }
    if (kind == "quote") {
        std::string rest;
        std::getline(in, rest);
        term input;
        std::string_view tail;
        try {
            auto [t, r] = parse_term_prefix(rest);
            input = std::move(t);
            tail = r;
        } catch (const term_parse_error& e) {
            throw io_error("label '" + text + "': " + e.what());
        }
        std::istringstream pcrs_in{std::string(tail)};
        std::vector<pcr_idx> pcrs;
        std::string name;
        while (pcrs_in >> name) {
            auto p = sys.find_pcr(name);
            if (!p) throw io_error("label '" + text + "': unknown PCR '" + name + "'");
            pcrs.push_back(*p);
        }
        if (pcrs.empty()) throw io_error("label '" + text + "': quote reports no PCRs");
        return quote_label{std::move(input), std::move(pcrs)};
    }
    throw io_error("label '" + text + "': unknown event kind '" + kind + "'");
}

event_poset parse_execution(const std::string& text, const attestation_system& sys) {
    json doc = parse_json(text);
    std::vector<event_poset::event> events;
    for (const auto& e : field(doc, "events")) {
        if (!e.contains("id") || !e.contains("label"))
            throw io_error("events entries need id and label");
        events.push_back(
            {e["id"].get<std::string>(), parse_event_label(e["label"].get<std::string>(), sys)});
    }
    std::vector<std::pair<std::string, std::string>> order;
    if (doc.contains("order")) order = edge_list(doc["order"], "order");
    try {
        return event_poset::build(std::move(events), order);
    } catch (const analysis_error& e) {
        throw io_error(e.what());
    }
}

std::string serialize_execution(const attestation_system& sys, const event_poset& p) {
    json doc;
    doc["events"] = json::array();
    for (event_idx e = 0; e < p.size(); ++e)
        doc["events"].push_back({{"id", p.id(e)}, {"label", label_to_string(p.label(e), sys)}});
    std::vector<std::pair<std::string, std::string>> order;
    for (auto [a, b] : p.cover_edges()) order.emplace_back(p.id(a), p.id(b));
    std::sort(order.begin(), order.end());
    doc["order"] = json::array();
    for (auto& [a, b] : order) doc["order"].push_back({a, b});
    return doc.dump(2) + "\n";
}

quote_bundle parse_bundle(const std::string& text) {
    json doc = parse_json(text);
    if (!doc.is_array()) throw io_error("bundle document must be a list of quote terms");
    quote_bundle out;
    for (const auto& q : doc) {
        if (!q.is_string()) throw io_error("bundle entries must be serialized terms");
        try {
            out.quotes.push_back(parse_term(q.get<std::string>()));
        } catch (const term_parse_error& e) {
            throw io_error(std::string("bundle entry: ") + e.what());
        }
    }
    return out;
}

std::string serialize_bundle(const quote_bundle& b) {
    json doc = json::array();
    for (const term& q : b.quotes) doc.push_back(to_string(q));
    return doc.dump(2) + "\n";
}

namespace {

std::string dot_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        if (c == '"' || c == '\\') out.push_back('\\');
        out.push_back(c);
    }
    return out;
}

}  // namespace

std::string export_dot(const attestation_system& sys) {
    std::ostringstream out;
    out << "digraph system {\n  rankdir=TB;\n";
    std::vector<std::string> names;
    for (object_idx o = 0; o < sys.object_count(); ++o) names.push_back(sys.object_name(o));
    std::sort(names.begin(), names.end());
    for (const auto& n : names) out << "  \"" << dot_escape(n) << "\";\n";
    std::vector<std::string> lines;
    for (auto [a, b] : sys.measure_edges())
        lines.push_back("  \"" + dot_escape(sys.object_name(a)) + "\" -> \"" +
                        dot_escape(sys.object_name(b)) + "\";");
    for (auto [a, b] : sys.context_edges())
        lines.push_back("  \"" + dot_escape(sys.object_name(a)) + "\" -> \"" +
                        dot_escape(sys.object_name(b)) + "\" [style=dotted];");
    std::sort(lines.begin(), lines.end());
    for (const auto& l : lines) out << l << "\n";
    out << "}\n";
    return out.str();
}

std::string export_dot(const attestation_system& sys, const event_poset& p,
                       const theorem1_report* annotations) {
    std::vector<bool> starred(p.size(), false), boxed(p.size(), false);
    if (annotations) {
        for (const auto& v : annotations->verdicts) {
            starred[v.event] = true;
            for (const auto& w : v.recent) boxed[w.corrupted_at] = true;
            for (const auto& w : v.deep) boxed[w.corrupted_at] = true;
        }
        for (event_idx e : annotations->uncovered) starred[e] = true;
    }
    std::ostringstream out;
    out << "digraph execution {\n  rankdir=TB;\n";
    std::vector<event_idx> order(p.size());
    for (event_idx e = 0; e < p.size(); ++e) order[e] = e;
    std::sort(order.begin(), order.end(),
              [&](event_idx a, event_idx b) { return p.id(a) < p.id(b); });
    for (event_idx e : order) {
        out << "  \"" << dot_escape(p.id(e)) << "\" [label=\""
            << dot_escape(p.id(e) + ": " + label_to_string(p.label(e), sys) +
                          (starred[e] ? " *" : ""))
            << "\"";
        if (boxed[e]) out << " shape=box";
        out << "];\n";
    }
    std::vector<std::string> lines;
    for (auto [a, b] : p.cover_edges())
        lines.push_back("  \"" + dot_escape(p.id(a)) + "\" -> \"" + dot_escape(p.id(b)) + "\";");
    std::sort(lines.begin(), lines.end());
    for (const auto& l : lines) out << l << "\n";
    out << "}\n";
    return out.str();
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot open '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

}  // namespace lat
