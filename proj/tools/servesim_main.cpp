#include <cstdint>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "servesim/colloc.hpp"
#include "servesim/config.hpp"
#include "servesim/disagg.hpp"
#include "servesim/metrics.hpp"
#include "servesim/optimize.hpp"
#include "servesim/report.hpp"
#include "servesim/roofline.hpp"
#include "servesim/strategy.hpp"
#include "servesim/workload.hpp"

namespace {

using namespace servesim;

struct GlobalArgs {
    std::string config_path;
    std::int64_t seed = -1; // <0: keep the config's seed
    std::string out_dir = ".";
    int workers = 1;
};

Config load(const GlobalArgs& g) {
    if (g.config_path.empty())
        throw ConfigError("--config is required");
    Config cfg = load_config(g.config_path);
    if (g.seed >= 0)
        cfg.scenario.seed = static_cast<std::uint64_t>(g.seed);
    return cfg;
}

int default_tp(const Config& cfg) { return cfg.search.tp_sizes.front(); }

Phase parse_phase(const std::string& text) {
    if (text == "prefill")
        return Phase::Prefill;
    if (text == "decode")
        return Phase::Decode;
    throw ConfigError("bad --phase '" + text + "': expected prefill or decode");
}

// "a:b:step" inclusive grid, or a comma-separated list.
std::vector<double> parse_rates(const std::string& text) {
    std::vector<double> rates;
    const auto parse_one = [](const std::string& s) {
        try {
            std::size_t used = 0;
            const double v = std::stod(s, &used);
            if (used != s.size() || !(v > 0.0))
                throw std::invalid_argument(s);
            return v;
        } catch (const std::exception&) {
            throw ConfigError("bad rate value '" + s + "'");
        }
    };
    if (text.find(':') != std::string::npos) {
        const auto c1 = text.find(':');
        const auto c2 = text.find(':', c1 + 1);
        if (c2 == std::string::npos || text.find(':', c2 + 1) != std::string::npos)
            throw ConfigError("bad --rates grid '" + text + "': expected a:b:step");
        const double lo = parse_one(text.substr(0, c1));
        const double hi = parse_one(text.substr(c1 + 1, c2 - c1 - 1));
        const double step = parse_one(text.substr(c2 + 1));
        for (double r = lo; r <= hi + step * 1e-9; r += step)
            rates.push_back(r);
    } else {
        std::size_t start = 0;
        while (start <= text.size()) {
            const auto comma = text.find(',', start);
            const auto end = comma == std::string::npos ? text.size() : comma;
            if (end > start)
                rates.push_back(parse_one(text.substr(start, end - start)));
            if (comma == std::string::npos)
                break;
            start = comma + 1;
        }
    }
    if (rates.empty())
        throw ConfigError("--rates produced an empty grid");
    return rates;
}

MetricSummaryLine average_lines(const std::vector<MetricSummaryLine>& lines) {
    MetricSummaryLine avg;
    for (const MetricSummaryLine& l : lines) {
        avg.stats.mean += l.stats.mean;
        avg.stats.p50 += l.stats.p50;
        avg.stats.p90 += l.stats.p90;
        avg.stats.p99 += l.stats.p99;
        avg.ok_fraction += l.ok_fraction;
    }
    const double n = static_cast<double>(lines.size());
    avg.stats.mean /= n;
    avg.stats.p50 /= n;
    avg.stats.p90 /= n;
    avg.stats.p99 /= n;
    avg.ok_fraction /= n;
    avg.slo_goal = lines.front().slo_goal;
    return avg;
}

int cmd_estimate(const GlobalArgs& g, const std::string& phase_text, int batch, int tp_arg,
                 std::int64_t context_arg) {
    const Config cfg = load(g);
    const CostModel cost(cfg);
    const Phase phase = parse_phase(phase_text);
    const int tp = tp_arg > 0 ? tp_arg : default_tp(cfg);
    std::int64_t context = context_arg;
    if (context <= 0) {
        // Decode defaults to the last generation step of the scenario.
        context = phase == Phase::Prefill
                      ? cfg.scenario.prompt_tokens
                      : cfg.scenario.prompt_tokens + cfg.scenario.output_tokens - 1;
    }
    const StepBreakdown bd = cost.step_breakdown(batch, context, tp, phase);
    std::cout << render_breakdown(bd, phase, batch, context, tp);
    return 0;
}

int cmd_simulate(const GlobalArgs& g, const std::string& arch_text, int tp_arg,
                 bool emit_hist) {
    const Config cfg = load(g);
    const CostModel cost(cfg);
    ServingStrategy strat = parse_arch(arch_text);
    strat.tp = tp_arg > 0 ? tp_arg : default_tp(cfg);
    const Optimizer opt(cfg, cost);

    std::vector<MetricSummaryLine> ttft_lines, tpot_lines;
    std::vector<double> first_arrivals;
    RunMetrics first_run;
    for (int rep = 0; rep < cfg.scenario.repetitions; ++rep) {
        const std::uint64_t seed = cfg.scenario.seed + static_cast<std::uint64_t>(rep);
        const std::vector<double> arrivals =
            generate_arrivals(cfg.scenario.arrival_rate, cfg.scenario.requests, seed);
        const RunMetrics m = opt.run_once(strat, arrivals, seed);
        ttft_lines.push_back(summarize_metric(m.ttft, cfg.slo.ttft_ms));
        tpot_lines.push_back(summarize_metric(m.tpot, cfg.slo.tpot_ms));
        if (rep == 0) {
            first_arrivals = arrivals;
            first_run = m;
        }
    }

    const std::string report =
        render_metrics_report(cfg, strat.arch_name(), strat.tp, cfg.scenario.arrival_rate,
                              average_lines(ttft_lines), average_lines(tpot_lines));
    std::cout << report;
    const std::filesystem::path out(g.out_dir);
    write_text_file(out / "metrics.txt", report);
    if (emit_hist) {
        write_text_file(out / "hist_ttft.tsv",
                        render_histogram("ttft_ms", first_run.ttft, cfg.slo.ttft_ms));
        write_text_file(out / "hist_tpot.tsv",
                        render_histogram("tpot_ms", first_run.tpot, cfg.slo.tpot_ms));
        write_text_file(out / "trace.tsv",
                        render_trace(first_arrivals, first_run, cfg.scenario.output_tokens));
    }
    return 0;
}

int cmd_sweep(const GlobalArgs& g, const std::string& arch_text, int tp_arg,
              const std::string& rates_text) {
    const Config cfg = load(g);
    const CostModel cost(cfg);
    ServingStrategy strat = parse_arch(arch_text);
    strat.tp = tp_arg > 0 ? tp_arg : default_tp(cfg);
    const Optimizer opt(cfg, cost);

    std::vector<ProbePoint> rows;
    for (double rate : parse_rates(rates_text))
        rows.push_back(opt.evaluate(strat, rate));
    const std::string body = render_sweep(rows);
    std::cout << body;
    write_text_file(std::filesystem::path(g.out_dir) / "sweep.tsv", body);
    return 0;
}

int cmd_optimize(const GlobalArgs& g, const std::string& arch_filter, double epsilon_arg) {
    Config cfg = load(g);
    if (epsilon_arg > 0.0)
        cfg.search.epsilon = epsilon_arg;
    const CostModel cost(cfg);

    std::vector<ServingStrategy> strategies = enumerate_strategies(cfg.search);
    if (!arch_filter.empty()) {
        std::vector<ServingStrategy> kept;
        for (const ServingStrategy& s : strategies) {
            const std::string name = s.arch_name();
            std::size_t start = 0;
            while (start <= arch_filter.size()) {
                const auto comma = arch_filter.find(',', start);
                const auto end = comma == std::string::npos ? arch_filter.size() : comma;
                if (arch_filter.substr(start, end - start) == name) {
                    kept.push_back(s);
                    break;
                }
                if (comma == std::string::npos)
                    break;
                start = comma + 1;
            }
        }
        if (kept.empty())
            throw ConfigError("--arch-filter '" + arch_filter + "' matches no strategy");
        strategies = std::move(kept);
    }

    const Optimizer opt(cfg, cost);
    const std::vector<GoodputResult> ranked = opt.run(strategies, g.workers);
    const std::string report = render_run_report(cfg, ranked);
    std::cout << report;
    const std::filesystem::path out(g.out_dir);
    write_text_file(out / "report.txt", report);
    write_text_file(out / "ranking.csv", render_ranking_csv(ranked));
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Capacity planner for LLM serving: roofline cost model plus "
                 "discrete-event simulation of collocated and disaggregated strategies"};
    app.require_subcommand(1);
    app.fallthrough();
    app.set_version_flag("--version", servesim::kToolVersion);

    GlobalArgs g;
    app.add_option("--config", g.config_path, "path to the run config (JSON)");
    app.add_option("--seed", g.seed, "override scenario.rng_seed");
    app.add_option("--out-dir", g.out_dir, "directory for emitted files");
    app.add_option("--workers", g.workers, "parallel strategy evaluations")
        ->check(CLI::PositiveNumber);

    auto* est = app.add_subcommand("estimate", "per-module cost breakdown for one step");
    std::string phase_text = "prefill";
    int batch = 1;
    int tp_arg = 0;
    std::int64_t context_arg = 0;
    est->add_option("--phase", phase_text, "prefill or decode");
    est->add_option("--batch", batch, "batch size")->check(CLI::PositiveNumber);
    est->add_option("--tp", tp_arg, "tensor-parallel size")->check(CLI::PositiveNumber);
    est->add_option("--context", context_arg, "context tokens (default from scenario)");

    auto* sim = app.add_subcommand("simulate", "simulate one strategy at the scenario rate");
    std::string arch_text;
    bool emit_hist = false;
    sim->add_option("--arch", arch_text, "strategy, e.g. 2m or 1p1d")->required();
    sim->add_option("--tp", tp_arg, "tensor-parallel size")->check(CLI::PositiveNumber);
    sim->add_flag("--emit-hist", emit_hist, "also write histogram and trace files");

    auto* swp = app.add_subcommand("sweep", "P90 metrics across an arrival-rate grid");
    std::string rates_text;
    swp->add_option("--arch", arch_text, "strategy, e.g. 2m or 1p1d")->required();
    swp->add_option("--tp", tp_arg, "tensor-parallel size")->check(CLI::PositiveNumber);
    swp->add_option("--rates", rates_text, "a:b:step grid or comma list")->required();

    auto* opt = app.add_subcommand("optimize", "rank all strategies by max feasible rate");
    std::string arch_filter;
    double epsilon_arg = 0.0;
    opt->add_option("--arch-filter", arch_filter, "comma list of arch names to keep");
    opt->add_option("--epsilon", epsilon_arg, "bisection stop width, requests/s")
        ->check(CLI::PositiveNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0)
            return app.exit(e); // --help / --version
        app.exit(e);
        return 2;
    }

    try {
        if (est->parsed())
            return cmd_estimate(g, phase_text, batch, tp_arg, context_arg);
        if (sim->parsed())
            return cmd_simulate(g, arch_text, tp_arg, emit_hist);
        if (swp->parsed())
            return cmd_sweep(g, arch_text, tp_arg, rates_text);
        return cmd_optimize(g, arch_filter, epsilon_arg);
    } catch (const servesim::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
}
