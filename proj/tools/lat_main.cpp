#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "lat/explorer.hpp"
#include "lat/io.hpp"

namespace {

using nlohmann::json;

enum exit_code : int { exit_ok = 0, exit_findings = 1, exit_usage = 2 };

struct cli_ctx {
    std::string format = "text";

    bool json_out() const { return format == "json"; }
};

json report_json(const lat::validation_report& rep) {
    json out;
    out["violations"] = json::array();
    for (const auto& v : rep.violations) out["violations"].push_back({{"code", v.code}, {"message", v.message}});
    out["notes"] = json::array();
    for (const auto& v : rep.notes) out["notes"].push_back({{"code", v.code}, {"message", v.message}});
    return out;
}

void print_report(const cli_ctx& ctx, const lat::validation_report& rep) {
    if (ctx.json_out()) {
        std::cout << report_json(rep).dump(2) << "\n";
        return;
    }
    for (const auto& n : rep.notes) std::cout << "note [" << n.code << "] " << n.message << "\n";
    for (const auto& v : rep.violations)
        std::cout << "violation [" << v.code << "] " << v.message << "\n";
    if (rep.ok()) std::cout << "ok: no violations\n";
}

lat::attestation_system load_system(const std::string& path) {
    lat::parsed_system parsed = lat::parse_system(lat::read_file(path));
    if (!parsed.report.ok()) {
        std::string msg = "system '" + path + "' is invalid:";
        for (const auto& v : parsed.report.violations) msg += "\n  [" + v.code + "] " + v.message;
        throw lat::io_error(msg);
    }
    return std::move(parsed.sys);
}

lat::event_poset load_execution(const std::string& path, const lat::attestation_system& sys,
                                bool must_validate = true) {
    lat::event_poset p = lat::parse_execution(lat::read_file(path), sys);
    if (must_validate) {
        auto rep = lat::validate_execution(sys, p);
        if (!rep.ok()) {
            std::string msg = "execution '" + path + "' is invalid:";
            for (const auto& v : rep.violations) msg += "\n  [" + v.code + "] " + v.message;
            throw lat::io_error(msg);
        }
    }
    return p;
}

json theorem1_json(const lat::attestation_system& sys, const lat::event_poset& p,
                   const lat::theorem1_report& rep) {
    json out;
    out["detections"] = json::array();
    for (auto e : rep.detections) out["detections"].push_back(p.id(e));
    out["uncovered"] = json::array();
    for (auto e : rep.uncovered) out["uncovered"].push_back(p.id(e));
    out["verdicts"] = json::array();
    for (const auto& v : rep.verdicts) {
        json jv;
        jv["event"] = p.id(v.event);
        jv["target"] = sys.object_name(v.target);
        jv["recent"] = json::array();
        for (const auto& w : v.recent)
            jv["recent"].push_back({{"object", sys.object_name(w.obj)},
                                    {"measured_at", p.id(w.measured_at)},
                                    {"corrupted_at", p.id(w.corrupted_at)},
                                    {"since_nonce", w.since_nonce}});
        jv["deep"] = json::array();
        for (const auto& w : v.deep)
            jv["deep"].push_back(
                {{"object", sys.object_name(w.obj)}, {"corrupted_at", p.id(w.corrupted_at)}});
        out["verdicts"].push_back(std::move(jv));
    }
    out["failed"] = rep.failed();
    return out;
}

void print_theorem1(const cli_ctx& ctx, const lat::attestation_system& sys,
                    const lat::event_poset& p, const lat::theorem1_report& rep) {
    if (ctx.json_out()) {
        std::cout << theorem1_json(sys, p, rep).dump(2) << "\n";
        return;
    }
    if (!rep.detections.empty()) {
        std::cout << "execution detects corruptions at:";
        for (auto e : rep.detections) std::cout << " " << p.id(e);
        std::cout << "\ntheorem hypotheses do not apply\n";
        return;
    }
    for (const auto& v : rep.verdicts) {
        std::cout << "avoidance at " << p.id(v.event) << " (target " << sys.object_name(v.target)
                  << "):\n";
        for (const auto& w : v.recent)
            std::cout << "  recent " << sys.object_name(w.obj) << ": " << p.id(w.measured_at)
                      << " < " << p.id(w.corrupted_at) << " < " << p.id(v.event)
                      << (w.since_nonce ? " (since nonce)" : "") << "\n";
        for (const auto& w : v.deep)
            std::cout << "  deep " << sys.object_name(w.obj) << ": " << p.id(w.corrupted_at)
                      << " < " << p.id(v.event) << "\n";
        if (!v.witnessed()) std::cout << "  NO WITNESS (semantics bug)\n";
    }
    for (auto e : rep.uncovered)
        std::cout << "avoidance at " << p.id(e) << ": not covered by the theorem\n";
    if (rep.verdicts.empty() && rep.uncovered.empty()) std::cout << "no avoidance events\n";
}

unsigned parse_relax(const std::vector<std::string>& flags) {
    unsigned mask = lat::relax_none;
    for (const auto& f : flags) {
        if (f == "prior-meas")
            mask |= lat::relax_prior_meas;
        else if (f == "fresh-meas")
            mask |= lat::relax_fresh_meas;
        else
            throw CLI::ValidationError("--relax", "unknown assumption '" + f + "'");
    }
    return mask;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"layered attestation analyzer"};
    app.require_subcommand(1);
    cli_ctx ctx;
    app.add_option("--format", ctx.format, "report format")
        ->check(CLI::IsMember({"text", "json"}))
        ->capture_default_str();

    std::string system_path, exec_path, spec_path, bundle_path, object_name, base_path, against_path;
    unsigned max_depth = 0;
    bool with_verdicts = false;

    auto* validate = app.add_subcommand("validate", "check system structural invariants");
    validate->add_option("system", system_path)->required();

    auto* depths = app.add_subcommand("depths", "layered dependency sets D^i of an object");
    depths->add_option("object", object_name)->required();
    depths->add_option("-s,--system", system_path)->required();
    depths->add_option("--max-depth", max_depth, "stop after this depth (default: stabilize)");

    auto* check_exec = app.add_subcommand("check-exec", "validate an execution against a system");
    check_exec->add_option("exec", exec_path)->required();
    check_exec->add_option("-s,--system", system_path)->required();

    auto* admits_cmd = app.add_subcommand("admits", "search a spec-into-execution embedding");
    admits_cmd->add_option("spec", spec_path)->required();
    admits_cmd->add_option("exec", exec_path)->required();
    admits_cmd->add_option("-s,--system", system_path)->required();

    auto* classify = app.add_subcommand("classify", "recent-or-deep verdicts for an execution");
    classify->add_option("exec", exec_path)->required();
    classify->add_option("-s,--system", system_path)->required();

    auto* bundle_extract = app.add_subcommand("bundle-extract", "extract S(Q) from a bundle");
    bundle_extract->add_option("bundle", bundle_path)->required();
    bundle_extract->add_option("-s,--system", system_path)->required();

    auto* bundle_check = app.add_subcommand("bundle-check", "bundling-strategy compliance");
    bundle_check->add_option("bundle", bundle_path)->required();
    bundle_check->add_option("-s,--system", system_path)->required();

    auto* assumptions = app.add_subcommand("assumptions", "check Assumptions on an execution");
    assumptions->add_option("exec", exec_path)->required();
    assumptions->add_option("-s,--system", system_path)->required();

    auto* joint = app.add_subcommand("joint", "joint-strategy verdict for execution + bundle");
    joint->add_option("exec", exec_path)->required();
    joint->add_option("bundle", bundle_path)->required();
    joint->add_option("-s,--system", system_path)->required();

    auto* explore = app.add_subcommand("explore", "bounded-exhaustive theorem check");
    lat::exploration_budget budget;
    lat::explore_options opts;
    std::vector<std::string> objects, relax_names;
    bool no_repairs = false, find_cx = false;
    explore->add_option("-s,--system", system_path)->required();
    explore->add_option("--base", base_path, "specification or scaffold execution document")
        ->required();
    explore->add_option("--max-adv", budget.max_adversary_events, "adversary event budget");
    explore->add_option("--objects", objects, "corruptible objects (default: all but rtm)")
        ->delimiter(',');
    explore->add_flag("--no-repairs", no_repairs, "insert corruption events only");
    explore->add_option("--max-execs", budget.max_executions, "enumeration cap");
    explore->add_option("--seed", budget.seed, "enumeration order token");
    explore->add_option("--relax", relax_names, "assumptions to relax (prior-meas, fresh-meas)")
        ->delimiter(',');
    explore->add_option("--workers", opts.workers, "worker threads (0: default)");
    explore->add_flag("--reference", opts.serial_reference,
                      "evaluate through the serial reference implementation");
    explore->add_flag("--find-counterexample", find_cx,
                      "report the first execution defeating the property");
    explore->add_option("--against", against_path,
                        "specification the counterexample must fail to admit");

    auto* export_dot = app.add_subcommand("export-dot", "render a system or execution as DOT");
    export_dot->add_option("-s,--system", system_path)->required();
    export_dot->add_option("--exec", exec_path);
    export_dot->add_flag("--verdicts", with_verdicts, "star avoidances and box witnesses");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? exit_ok : exit_usage;
    }

    try {
        if (*validate) {
            lat::parsed_system parsed = lat::parse_system(lat::read_file(system_path));
            print_report(ctx, parsed.report);
            return parsed.report.ok() ? exit_ok : exit_findings;
        }
        if (*depths) {
            auto sys = load_system(system_path);
            auto obj = sys.find_object(object_name);
            if (!obj) throw lat::io_error("unknown object '" + object_name + "'");
            json jd;
            std::vector<lat::object_idx> cur{*obj};
            std::vector<std::vector<lat::object_idx>> seen;
            unsigned limit = max_depth ? max_depth : static_cast<unsigned>(sys.object_count());
            for (unsigned i = 1; i <= limit; ++i) {
                cur = lat::dependency_set_of(sys, cur);
                if (cur.empty()) break;
                std::vector<std::string> names;
                for (auto o : cur) names.push_back(sys.object_name(o));
                if (ctx.json_out())
                    jd[std::to_string(i)] = names;
                else {
                    std::cout << "D^" << i << "(" << object_name << ") = {";
                    for (std::size_t k = 0; k < names.size(); ++k)
                        std::cout << (k ? ", " : "") << names[k];
                    std::cout << "}\n";
                }
            }
            if (ctx.json_out())
                std::cout << json{{"object", object_name}, {"depths", jd}}.dump(2) << "\n";
            return exit_ok;
        }
        if (*check_exec) {
            auto sys = load_system(system_path);
            auto p = lat::parse_execution(lat::read_file(exec_path), sys);
            auto rep = lat::validate_execution(sys, p);
            print_report(ctx, rep);
            return rep.ok() ? exit_ok : exit_findings;
        }
        if (*admits_cmd) {
            auto sys = load_system(system_path);
            auto spec = load_execution(spec_path, sys);
            auto exec = load_execution(exec_path, sys);
            auto emb = lat::admits(spec, exec);
            if (ctx.json_out()) {
                json out;
                if (emb) {
                    json m = json::object();
                    for (lat::event_idx s = 0; s < spec.size(); ++s) m[spec.id(s)] = exec.id((*emb)[s]);
                    out["embedding"] = std::move(m);
                } else
                    out["embedding"] = nullptr;
                std::cout << out.dump(2) << "\n";
            } else if (emb) {
                std::cout << "admits: embedding found\n";
                for (lat::event_idx s = 0; s < spec.size(); ++s)
                    std::cout << "  " << spec.id(s) << " -> " << exec.id((*emb)[s]) << "\n";
            } else {
                std::cout << "admits: no embedding exists\n";
            }
            return emb ? exit_ok : exit_findings;
        }
        if (*classify) {
            auto sys = load_system(system_path);
            auto exec = load_execution(exec_path, sys);
            auto rep = lat::check_recent_or_deep(sys, exec);
            print_theorem1(ctx, sys, exec, rep);
            return rep.failed() ? exit_findings : exit_ok;
        }
        if (*bundle_extract) {
            auto sys = load_system(system_path);
            auto bundle = lat::parse_bundle(lat::read_file(bundle_path));
            auto res = lat::extract_specification(sys, bundle);
            if (!res.ok()) {
                if (ctx.json_out()) {
                    json out;
                    out["errors"] = json::array();
                    for (const auto& e : res.errors)
                        out["errors"].push_back({{"code", e.code}, {"message", e.message}});
                    std::cout << out.dump(2) << "\n";
                } else {
                    for (const auto& e : res.errors)
                        std::cout << "extraction error [" << e.code << "] " << e.message << "\n";
                }
                return exit_findings;
            }
            for (const auto& n : res.spec->notes)
                std::cerr << "note [" << n.code << "] " << n.message << "\n";
            std::cout << lat::serialize_execution(sys, res.spec->spec);
            return exit_ok;
        }
        if (*bundle_check) {
            auto sys = load_system(system_path);
            auto bundle = lat::parse_bundle(lat::read_file(bundle_path));
            auto res = lat::complies_with_strategy(sys, bundle);
            std::string verdict = res.verdict == lat::compliance::complies ? "complies"
                                  : res.verdict == lat::compliance::fails_bottom_up
                                      ? "does not measure bottom-up"
                                      : "extraction failed";
            if (ctx.json_out()) {
                json out{{"verdict", verdict}};
                out["errors"] = json::array();
                for (const auto& e : res.extraction.errors)
                    out["errors"].push_back({{"code", e.code}, {"message", e.message}});
                std::cout << out.dump(2) << "\n";
            } else {
                std::cout << verdict << "\n";
                for (const auto& e : res.extraction.errors)
                    std::cout << "  [" << e.code << "] " << e.message << "\n";
            }
            return res.verdict == lat::compliance::complies ? exit_ok : exit_findings;
        }
        if (*assumptions) {
            auto sys = load_system(system_path);
            auto exec = load_execution(exec_path, sys);
            auto a2 = lat::check_assumption_prior_meas(sys, exec);
            auto a3 = lat::check_assumption_fresh_meas(sys, exec);
            if (ctx.json_out()) {
                json out;
                out["prior_meas"] = json::array();
                for (const auto& v : a2)
                    out["prior_meas"].push_back({{"ext", exec.id(v.ext_event)}, {"detail", v.detail}});
                out["fresh_meas"] = json::array();
                for (const auto& v : a3)
                    out["fresh_meas"].push_back(
                        {{"meas", exec.id(v.meas_event)}, {"ext", exec.id(v.ext_event)}});
                std::cout << out.dump(2) << "\n";
            } else {
                for (const auto& v : a2)
                    std::cout << "prior-meas violation at " << exec.id(v.ext_event) << ": " << v.detail
                              << "\n";
                for (const auto& v : a3)
                    std::cout << "fresh-meas violation at (" << exec.id(v.meas_event) << ", "
                              << exec.id(v.ext_event) << ")\n";
                if (a2.empty() && a3.empty()) std::cout << "assumptions hold\n";
            }
            return a2.empty() && a3.empty() ? exit_ok : exit_findings;
        }
        if (*joint) {
            auto sys = load_system(system_path);
            auto exec = load_execution(exec_path, sys);
            auto bundle = lat::parse_bundle(lat::read_file(bundle_path));
            auto v = lat::check_joint_strategy(sys, exec, bundle);
            const char* names[] = {"admits-core",          "deep",
                                   "recent",               "assumptions-violated",
                                   "precondition-failed",  "theorem-failure"};
            std::string kind = names[static_cast<int>(v.kind)];
            if (ctx.json_out()) {
                json out{{"verdict", kind}};
                out["problems"] = json::array();
                for (const auto& p : v.problems)
                    out["problems"].push_back({{"code", p.code}, {"message", p.message}});
                json deep = json::array();
                for (const auto& w : v.deep)
                    deep.push_back({{"target", sys.object_name(w.target)},
                                    {"object", sys.object_name(w.deep_obj)},
                                    {"corrupted_at", exec.id(w.corrupted_at)}});
                out["deep"] = std::move(deep);
                json recent = json::array();
                for (const auto& w : v.recent)
                    recent.push_back({{"target", sys.object_name(w.target)},
                                      {"object", sys.object_name(w.dep_obj)},
                                      {"measured_at", exec.id(w.measured_at)},
                                      {"corrupted_at", exec.id(w.corrupted_at)}});
                out["recent"] = std::move(recent);
                std::cout << out.dump(2) << "\n";
            } else {
                std::cout << "verdict: " << kind << "\n";
                for (const auto& p : v.problems)
                    std::cout << "  [" << p.code << "] " << p.message << "\n";
                for (const auto& w : v.deep)
                    std::cout << "  deep: " << sys.object_name(w.deep_obj) << " (D^2 of "
                              << sys.object_name(w.target) << ") corrupted at "
                              << exec.id(w.corrupted_at) << "\n";
                for (const auto& w : v.recent)
                    std::cout << "  recent: " << sys.object_name(w.dep_obj) << " (D^1 of "
                              << sys.object_name(w.target) << ") measured at "
                              << exec.id(w.measured_at) << ", corrupted at "
                              << exec.id(w.corrupted_at) << "\n";
            }
            return v.kind == lat::joint_kind::admits_core ? exit_ok : exit_findings;
        }
        if (*explore) {
            auto sys = load_system(system_path);
            auto base = load_execution(base_path, sys);
            budget.include_repairs = !no_repairs;
            if (!objects.empty()) {
                std::vector<lat::object_idx> wl;
                for (const auto& name : objects) wl.push_back(sys.object(name));
                budget.whitelist = std::move(wl);
            }
            unsigned relax = parse_relax(relax_names);
            bool joint_base = false;
            for (lat::event_idx e = 0; e < base.size(); ++e)
                if (lat::is_extend(base.label(e)) || lat::is_quote(base.label(e))) joint_base = true;

            if (find_cx) {
                std::optional<lat::event_poset> against;
                if (!against_path.empty()) against = load_execution(against_path, sys);
                auto cx = lat::find_counterexample(sys, base, budget, relax,
                                                   against ? &*against : nullptr);
                if (cx) {
                    std::cout << lat::serialize_execution(sys, *cx);
                    return exit_findings;
                }
                std::cout << (ctx.json_out() ? "{\"counterexample\": null}\n"
                                             : "no counterexample at these bounds\n");
                return exit_ok;
            }
            lat::theorem_report rep =
                joint_base ? lat::verify_joint_strategy(sys, base, budget, relax, opts)
                           : lat::verify_recent_or_deep(sys, base, budget, opts);
            std::cout << (ctx.json_out() ? rep.to_json_text() : rep.to_text());
            return rep.failures == 0 ? exit_ok : exit_findings;
        }
        if (*export_dot) {
            auto sys = load_system(system_path);
            if (exec_path.empty()) {
                std::cout << lat::export_dot(sys);
            } else {
                auto exec = load_execution(exec_path, sys);
                if (with_verdicts) {
                    auto rep = lat::check_recent_or_deep(sys, exec);
                    std::cout << lat::export_dot(sys, exec, &rep);
                } else {
                    std::cout << lat::export_dot(sys, exec, nullptr);
                }
            }
            return exit_ok;
        }
    } catch (const lat::io_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_usage;
    } catch (const lat::term_parse_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_usage;
    } catch (const lat::analysis_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_findings;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_usage;
    }
    return exit_usage;
}
