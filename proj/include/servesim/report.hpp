#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "servesim/config.hpp"
#include "servesim/metrics.hpp"
#include "servesim/optimize.hpp"
#include "servesim/roofline.hpp"

namespace servesim {

inline constexpr const char* kToolVersion = "0.1.0";

// Fixed-precision decimal, locale-independent. All report numbers go
// through here so identical inputs render identical bytes.
inline std::string fmt(double v, int precision = 3) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", precision, v);
    return buf;
}

// Canonical JSON echo of the parsed config: defaults filled in, keys sorted
// by the JSON library. Feeding this back through the tool reproduces the run.
inline nlohmann::json config_to_json(const Config& c) {
    nlohmann::json j;
    j["model"] = {{"hidden", c.model.hidden},
                  {"intermediate", c.model.intermediate},
                  {"heads", c.model.heads},
                  {"kv_heads", c.model.kv_heads},
                  {"layers", c.model.layers}};
    j["hardware"] = {{"compute_flops", c.hardware.compute_flops},
                     {"mem_bandwidth", c.hardware.mem_bandwidth},
                     {"interconnect_bandwidth", c.hardware.interconnect_bandwidth},
                     {"mem_bw_scale", c.hardware.mem_bw_scale},
                     {"comm_floor_ms", c.hardware.comm_floor_ms}};
    j["kappa"] = {{"rate", c.hardware.aux_rate()}};
    j["dispatch_ms"] = {{"rmsnorm", c.dispatch.rmsnorm_ms},
                        {"attention", c.dispatch.attention_ms},
                        {"mlp", c.dispatch.mlp_ms}};
    j["efficiency"] = {{"prefill",
                        {{"compute", c.efficiency.prefill.compute},
                         {"memory", c.efficiency.prefill.memory},
                         {"interconnect", c.efficiency.prefill.interconnect}}},
                       {"decode",
                        {{"compute", c.efficiency.decode.compute},
                         {"memory", c.efficiency.decode.memory},
                         {"interconnect", c.efficiency.decode.interconnect}}}};
    j["batching"] = {{"tau_b", c.batching.tau_b},
                     {"prefill_max_batch", c.batching.prefill_max_batch},
                     {"decode_max_batch", c.batching.decode_max_batch}};
    j["scenario"] = {{"prompt_tokens", c.scenario.prompt_tokens},
                     {"output_tokens", c.scenario.output_tokens},
                     {"arrival_rate", c.scenario.arrival_rate},
                     {"requests", c.scenario.requests},
                     {"repetitions", c.scenario.repetitions},
                     {"rng_seed", c.scenario.seed}};
    j["slo"] = {{"ttft_ms", c.slo.ttft_ms},
                {"tpot_ms", c.slo.tpot_ms},
                {"relaxation", c.slo.relaxation}};
    j["search"] = {{"max_instances", c.search.max_instances},
                   {"tp_sizes", c.search.tp_sizes},
                   {"epsilon", c.search.epsilon},
                   {"rate_floor", c.search.rate_floor},
                   {"rate_headroom", c.search.rate_headroom}};
    return j;
}

inline std::string render_breakdown(const StepBreakdown& bd, Phase phase, int b,
                                    std::int64_t context, int tp) {
    std::string out;
    out += "# schema: servesim/estimate v1\n";
    out += std::string("phase: ") + (phase == Phase::Prefill ? "prefill" : "decode") + "\n";
    out += "batch: " + std::to_string(b) + "\n";
    out += "context_tokens: " + std::to_string(context) + "\n";
    out += "tp: " + std::to_string(tp) + "\n";
    out += "module\tdispatch_ms\tcompute_ms\tcommunicate_ms\n";
    const auto row = [&](const char* name, const ModuleCost& m) {
        out += std::string(name) + "\t" + fmt(m.dispatch_ms) + "\t" + fmt(m.compute_ms) +
               "\t" + fmt(m.comm_ms) + "\n";
    };
    row("rmsnorm", bd.norm);
    row("attention", bd.attention);
    row("mlp", bd.mlp);
    out += "total_ms\t" + fmt(bd.total_ms) + "\n";
    return out;
}

struct MetricSummaryLine {
    LatencySummary stats;
    double slo_goal = 0.0;
    double ok_fraction = 0.0; // share of requests meeting the goal
};

inline MetricSummaryLine summarize_metric(const std::vector<double>& values, double goal) {
    MetricSummaryLine line;
    line.stats = summarize(values);
    line.slo_goal = goal;
    int ok = 0;
    for (double v : values)
        if (v <= goal)
            ++ok;
    line.ok_fraction = static_cast<double>(ok) / static_cast<double>(values.size());
    return line;
}

inline std::string render_metrics_report(const Config& cfg, const std::string& arch,
                                         int tp, double rate,
                                         const MetricSummaryLine& ttft,
                                         const MetricSummaryLine& tpot) {
    std::string out;
    out += "# schema: servesim/metrics v1\n";
    out += std::string("# version: ") + kToolVersion + "\n";
    out += "arch: " + arch + "\n";
    out += "tp: " + std::to_string(tp) + "\n";
    out += "rate_per_s: " + fmt(rate, 6) + "\n";
    out += "requests: " + std::to_string(cfg.scenario.requests) + "\n";
    out += "repetitions: " + std::to_string(cfg.scenario.repetitions) + "\n";
    out += "seed: " + std::to_string(cfg.scenario.seed) + "\n";
    out += "metric\tmean\tp50\tp90\tp99\tslo_goal\tok_frac\n";
    const auto row = [&](const char* name, const MetricSummaryLine& m) {
        out += std::string(name) + "\t" + fmt(m.stats.mean) + "\t" + fmt(m.stats.p50) +
               "\t" + fmt(m.stats.p90) + "\t" + fmt(m.stats.p99) + "\t" +
               fmt(m.slo_goal) + "\t" + fmt(m.ok_fraction, 4) + "\n";
    };
    row("ttft_ms", ttft);
    row("tpot_ms", tpot);
    return out;
}

// Frequency bins over [0, max]; marker lines carry the percentiles and the
// SLO goal so plots can drop verticals without recomputing.
inline std::string render_histogram(const std::string& metric,
                                    const std::vector<double>& values, double slo_goal,
                                    int bins = 40) {
    double hi = 0.0;
    for (double v : values)
        hi = std::max(hi, v);
    if (hi <= 0.0)
        hi = 1.0;
    std::vector<int> counts(bins, 0);
    for (double v : values) {
        int idx = static_cast<int>(v / hi * bins);
        if (idx >= bins)
            idx = bins - 1;
        if (idx < 0)
            idx = 0;
        ++counts[idx];
    }
    std::string out;
    out += "# schema: servesim/hist v1\n";
    out += "# metric: " + metric + "\n";
    out += "# p90: " + fmt(percentile(values, 0.90)) + "\n";
    out += "# p99: " + fmt(percentile(values, 0.99)) + "\n";
    out += "# slo: " + fmt(slo_goal) + "\n";
    out += "bin_lo\tbin_hi\tcount\n";
    const double width = hi / bins;
    for (int i = 0; i < bins; ++i) {
        out += fmt(width * i) + "\t" + fmt(width * (i + 1)) + "\t" +
               std::to_string(counts[i]) + "\n";
    }
    return out;
}

inline std::string render_trace(const std::vector<double>& arrivals,
                                const RunMetrics& m, std::int64_t output_tokens) {
    std::string out;
    out += "# schema: servesim/trace v1\n";
    out += "id\tarrival_ms\tfirst_token_ms\tdone_ms\tttft_ms\ttpot_ms\n";
    for (std::size_t r = 0; r < arrivals.size(); ++r) {
        const double d1 = arrivals[r] + m.ttft[r];
        const double d2 = d1 + m.tpot[r] * static_cast<double>(output_tokens);
        out += std::to_string(r) + "\t" + fmt(arrivals[r]) + "\t" + fmt(d1) + "\t" +
               fmt(d2) + "\t" + fmt(m.ttft[r]) + "\t" + fmt(m.tpot[r]) + "\n";
    }
    return out;
}

inline std::string render_sweep(const std::vector<ProbePoint>& rows) {
    std::string out;
    out += "# schema: servesim/sweep v1\n";
    out += "rate_per_s\tp90_ttft_ms\tp90_tpot_ms\n";
    for (const ProbePoint& p : rows)
        out += fmt(p.rate, 6) + "\t" + fmt(p.p90_ttft) + "\t" + fmt(p.p90_tpot) + "\n";
    return out;
}

inline std::string render_ranking_csv(const std::vector<GoodputResult>& ranked) {
    std::string out;
    out += "# schema: servesim/ranking v1\n";
    out += "rank,arch,tp,accelerators,goodput_per_s,normalized_per_s,feasible_at_floor,probes\n";
    int rank = 1;
    for (const GoodputResult& r : ranked) {
        out += std::to_string(rank++) + "," + r.strategy.arch_name() + "," +
               std::to_string(r.strategy.tp) + "," + std::to_string(r.accelerators) +
               "," + fmt(r.goodput, 4) + "," + fmt(r.normalized, 5) + "," +
               (r.feasible_at_floor ? "yes" : "no") + "," +
               std::to_string(r.probes.size()) + "\n";
    }
    return out;
}

// Self-contained run report: same config + seed + version reproduces these
// bytes exactly.
inline std::string render_run_report(const Config& cfg,
                                     const std::vector<GoodputResult>& ranked) {
    std::string out;
    out += "# schema: servesim/report v1\n";
    out += std::string("# version: ") + kToolVersion + "\n";
    out += "# seed: " + std::to_string(cfg.scenario.seed) + "\n";
    out += "\n[config]\n";
    out += config_to_json(cfg).dump(2) + "\n";
    out += "\n[ranking]\n";
    out += "rank\tarch\ttp\taccel\tgoodput_per_s\tnormalized_per_s\tfloor_ok\tprobes\n";
    int rank = 1;
    for (const GoodputResult& r : ranked) {
        out += std::to_string(rank++) + "\t" + r.strategy.arch_name() + "\t" +
               std::to_string(r.strategy.tp) + "\t" + std::to_string(r.accelerators) +
               "\t" + fmt(r.goodput, 4) + "\t" + fmt(r.normalized, 5) + "\t" +
               (r.feasible_at_floor ? "yes" : "no") + "\t" +
               std::to_string(r.probes.size()) + "\n";
    }
    out += "\n[probes]\n";
    out += "arch\ttp\trate_per_s\tp90_ttft_ms\tp90_tpot_ms\tfeasible\n";
    for (const GoodputResult& r : ranked) {
        for (const ProbePoint& p : r.probes) {
            out += r.strategy.arch_name() + "\t" + std::to_string(r.strategy.tp) + "\t" +
                   fmt(p.rate, 6) + "\t" + fmt(p.p90_ttft) + "\t" + fmt(p.p90_tpot) +
                   "\t" + (p.feasible ? "yes" : "no") + "\n";
        }
    }
    return out;
}

inline void write_text_file(const std::filesystem::path& path, const std::string& body) {
    if (path.has_parent_path())
        std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw std::runtime_error("cannot write " + path.string());
    out << body;
    if (!out)
        throw std::runtime_error("short write to " + path.string());
}

} // namespace servesim
