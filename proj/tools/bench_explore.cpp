#include <chrono>
#include <iostream>
#include <string>

#include "lat/explorer.hpp"
#include "lat/io.hpp"

namespace {

double seconds(const std::function<void()>& fn) {
    auto t0 = std::chrono::steady_clock::now();
    fn();
    auto t1 = std::chrono::steady_clock::now();
    return std::chrono::duration<double>(t1 - t0).count();
}

void row(const std::string& name, double ref, double fast1, double fastn,
         std::uint64_t executions) {
    std::cout << name << "\n"
              << "  executions:        " << executions << "\n"
              << "  reference (1t):    " << ref << " s\n"
              << "  fast kernel (1t):  " << fast1 << " s  (" << ref / fast1 << "x)\n"
              << "  fast kernel (all): " << fastn << " s  (" << ref / fastn << "x)\n";
}

}  // namespace

int main(int argc, char** argv) {
    if (argc < 4) {
        std::cerr << "usage: lat_bench <system.json> <spec.json> <scaffold.json>\n";
        return 2;
    }
    auto sys = lat::parse_system(lat::read_file(argv[1])).sys;
    auto spec = lat::parse_execution(lat::read_file(argv[2]), sys);
    auto scaffold = lat::parse_execution(lat::read_file(argv[3]), sys);

    {
        lat::exploration_budget budget;
        budget.max_adversary_events = 2;
        lat::theorem_report ref, f1, fn;
        double t_ref = seconds([&] {
            ref = lat::verify_recent_or_deep(sys, spec, budget, {.workers = 1, .serial_reference = true});
        });
        double t_f1 = seconds(
            [&] { f1 = lat::verify_recent_or_deep(sys, spec, budget, {.workers = 1}); });
        double t_fn = seconds([&] { fn = lat::verify_recent_or_deep(sys, spec, budget, {}); });
        if (ref.to_json_text() != f1.to_json_text() || f1.to_json_text() != fn.to_json_text()) {
            std::cerr << "lane mismatch on recent-or-deep workload\n";
            return 1;
        }
        row("recent-or-deep, max-adv=2", t_ref, t_f1, t_fn, ref.enumerated);
    }
    {
        lat::exploration_budget budget;
        budget.max_adversary_events = 1;
        lat::theorem_report ref, f1, fn;
        double t_ref = seconds([&] {
            ref = lat::verify_joint_strategy(sys, scaffold, budget, lat::relax_none,
                                             {.workers = 1, .serial_reference = true});
        });
        double t_f1 = seconds([&] {
            f1 = lat::verify_joint_strategy(sys, scaffold, budget, lat::relax_none, {.workers = 1});
        });
        double t_fn = seconds(
            [&] { fn = lat::verify_joint_strategy(sys, scaffold, budget, lat::relax_none, {}); });
        if (ref.to_json_text() != f1.to_json_text() || f1.to_json_text() != fn.to_json_text()) {
            std::cerr << "lane mismatch on joint workload\n";
            return 1;
        }
        row("joint-strategy, max-adv=1", t_ref, t_f1, t_fn, ref.enumerated);
    }
    {
        lat::exploration_budget budget;
        budget.max_adversary_events = 2;
        lat::theorem_report f1, fn;
        double t_f1 = seconds([&] {
            f1 = lat::verify_joint_strategy(sys, scaffold, budget, lat::relax_none, {.workers = 1});
        });
        double t_fn = seconds(
            [&] { fn = lat::verify_joint_strategy(sys, scaffold, budget, lat::relax_none, {}); });
        if (f1.to_json_text() != fn.to_json_text()) {
            std::cerr << "worker counts disagree on joint workload\n";
            return 1;
        }
        std::cout << "joint-strategy, max-adv=2 (fast lanes only)\n"
                  << "  executions:        " << f1.enumerated << "\n"
                  << "  fast kernel (1t):  " << t_f1 << " s\n"
                  << "  fast kernel (all): " << t_fn << " s  (" << t_f1 / t_fn << "x)\n";
    }
    return 0;
}
