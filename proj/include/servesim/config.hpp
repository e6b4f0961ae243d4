#pragma once

#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace servesim {

// Thrown for anything wrong with user-supplied configuration; the CLI maps
// it to exit code 2 (everything else unexpected maps to 3).
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

struct ModelDims {
    std::int64_t hidden = 0;        // h
    std::int64_t intermediate = 0;  // h0, MLP inner width
    std::int64_t heads = 0;         // query heads
    std::int64_t kv_heads = 0;      // <= heads; < heads means grouped-query
    int layers = 0;

    bool grouped_query() const { return kv_heads < heads; }
};

struct HardwareSpec {
    double compute_flops = 0.0;            // peak FLOP/s per device
    double mem_bandwidth = 0.0;            // datasheet byte/s per device
    double interconnect_bandwidth = 0.0;   // byte/s between TP peers
    // Single calibration scalar applied to e_m * S_m. The datasheet number
    // alone does not reproduce measured kernel times; one scalar fixed from
    // a single normalization measurement closes the gap for every
    // bandwidth-bound operator at once.
    double mem_bw_scale = 1.0;
    // Effective rate for the bandwidth-only bookkeeping rows in decode
    // attention (KV append, KV head replication, logit upcast). These rows
    // have no FLOP cost, so the roofline needs a rate, not an intensity.
    // 0 means "use mem_bandwidth".
    double aux_bandwidth = 0.0;
    double comm_floor_ms = 0.1;            // latency floor per synchronization

    double aux_rate() const { return aux_bandwidth > 0.0 ? aux_bandwidth : mem_bandwidth; }
};

struct DispatchSpec {
    // Host-side launch cost per module visit, milliseconds.
    double rmsnorm_ms = 0.024;
    double attention_ms = 0.190;
    double mlp_ms = 0.041;
};

struct PhaseEfficiency {
    double compute = 0.0;       // fraction of peak FLOP/s actually reached
    double memory = 0.0;        // fraction of peak byte/s
    double interconnect = 0.0;
};

struct EfficiencySpec {
    PhaseEfficiency prefill{0.65, 0.60, 0.60};
    PhaseEfficiency decode{0.65, 0.30, 0.30};
};

struct BatchingSpec {
    double tau_b = 2.5;         // pseudo-batch balance scalar
    int prefill_max_batch = 4;
    int decode_max_batch = 16;
};

struct ScenarioSpec {
    std::int64_t prompt_tokens = 0;   // s
    std::int64_t output_tokens = 0;   // s+
    double arrival_rate = 0.0;        // requests per second
    int requests = 0;                 // n
    int repetitions = 1;
    std::uint64_t seed = 1;
};

struct SloSpec {
    double ttft_ms = 1500.0;
    double tpot_ms = 70.0;
    double relaxation = 0.1;    // rho: goals are checked against (1+rho)*goal
};

struct SearchSpec {
    int max_instances = 5;
    std::vector<int> tp_sizes = {4};
    double epsilon = 0.05;      // bisection stop width, requests/s
    double rate_floor = 0.1;    // lambda_l
    double rate_headroom = 1.2; // lambda_u = headroom / T_min
};

struct Config {
    ModelDims model;
    HardwareSpec hardware;
    DispatchSpec dispatch;
    EfficiencySpec efficiency;
    BatchingSpec batching;
    ScenarioSpec scenario;
    SloSpec slo;
    SearchSpec search;
};

namespace detail {

inline double get_num(const nlohmann::json& j, const char* section, const char* key,
                      double fallback, bool required = false) {
    if (!j.contains(key)) {
        if (required)
            throw ConfigError(std::string(section) + "." + key + " is required");
        return fallback;
    }
    const auto& v = j.at(key);
    if (!v.is_number())
        throw ConfigError(std::string(section) + "." + key + " must be a number");
    return v.get<double>();
}

inline void require_pos(double v, const char* what) {
    if (!(v > 0.0))
        throw ConfigError(std::string(what) + " must be positive");
}

inline void require_nonneg(double v, const char* what) {
    if (v < 0.0)
        throw ConfigError(std::string(what) + " must be non-negative");
}

} // namespace detail

inline Config parse_config(const nlohmann::json& j) {
    using detail::get_num;
    using detail::require_nonneg;
    using detail::require_pos;
    Config c;

    if (!j.contains("model") || !j.at("model").is_object())
        throw ConfigError("config needs a \"model\" section");
    {
        const auto& m = j.at("model");
        c.model.hidden = static_cast<std::int64_t>(get_num(m, "model", "hidden", 0, true));
        c.model.intermediate = static_cast<std::int64_t>(get_num(m, "model", "intermediate", 0, true));
        c.model.heads = static_cast<std::int64_t>(get_num(m, "model", "heads", 0, true));
        c.model.kv_heads = static_cast<std::int64_t>(get_num(m, "model", "kv_heads",
                                                             static_cast<double>(c.model.heads)));
        c.model.layers = static_cast<int>(get_num(m, "model", "layers", 0, true));
        require_pos(static_cast<double>(c.model.hidden), "model.hidden");
        require_pos(static_cast<double>(c.model.intermediate), "model.intermediate");
        require_pos(static_cast<double>(c.model.heads), "model.heads");
        require_pos(static_cast<double>(c.model.kv_heads), "model.kv_heads");
        require_pos(c.model.layers, "model.layers");
        if (c.model.kv_heads > c.model.heads)
            throw ConfigError("model.kv_heads cannot exceed model.heads");
        if (c.model.heads % c.model.kv_heads != 0)
            throw ConfigError("model.heads must be a multiple of model.kv_heads");
    }

    if (!j.contains("hardware") || !j.at("hardware").is_object())
        throw ConfigError("config needs a \"hardware\" section");
    {
        const auto& h = j.at("hardware");
        c.hardware.compute_flops = get_num(h, "hardware", "compute_flops", 0, true);
        c.hardware.mem_bandwidth = get_num(h, "hardware", "mem_bandwidth", 0, true);
        c.hardware.interconnect_bandwidth =
            get_num(h, "hardware", "interconnect_bandwidth", 0, true);
        c.hardware.mem_bw_scale = get_num(h, "hardware", "mem_bw_scale", 1.0);
        c.hardware.aux_bandwidth = get_num(h, "hardware", "aux_bandwidth", 0.0);
        c.hardware.comm_floor_ms = get_num(h, "hardware", "comm_floor_ms", 0.1);
        require_pos(c.hardware.compute_flops, "hardware.compute_flops");
        require_pos(c.hardware.mem_bandwidth, "hardware.mem_bandwidth");
        require_pos(c.hardware.interconnect_bandwidth, "hardware.interconnect_bandwidth");
        require_pos(c.hardware.mem_bw_scale, "hardware.mem_bw_scale");
        require_nonneg(c.hardware.aux_bandwidth, "hardware.aux_bandwidth");
        require_nonneg(c.hardware.comm_floor_ms, "hardware.comm_floor_ms");
    }

    // Decode attention carries bookkeeping rows (KV append/replicate, logit
    // upcast) that move bytes without FLOPs; they bypass the roofline and
    // are charged at this rate. One rate covers all three rows.
    if (j.contains("kappa")) {
        const auto& k = j.at("kappa");
        c.hardware.aux_bandwidth = get_num(k, "kappa", "rate", c.hardware.aux_bandwidth);
        require_pos(c.hardware.aux_bandwidth, "kappa.rate");
    }

    if (j.contains("dispatch_ms")) {
        const auto& d = j.at("dispatch_ms");
        c.dispatch.rmsnorm_ms = get_num(d, "dispatch_ms", "rmsnorm", c.dispatch.rmsnorm_ms);
        c.dispatch.attention_ms = get_num(d, "dispatch_ms", "attention", c.dispatch.attention_ms);
        c.dispatch.mlp_ms = get_num(d, "dispatch_ms", "mlp", c.dispatch.mlp_ms);
        require_nonneg(c.dispatch.rmsnorm_ms, "dispatch_ms.rmsnorm");
        require_nonneg(c.dispatch.attention_ms, "dispatch_ms.attention");
        require_nonneg(c.dispatch.mlp_ms, "dispatch_ms.mlp");
    }

    if (j.contains("efficiency")) {
        const auto& e = j.at("efficiency");
        auto read_phase = [&](const char* name, PhaseEfficiency& out) {
            if (!e.contains(name)) return;
            const auto& p = e.at(name);
            out.compute = get_num(p, name, "compute", out.compute);
            out.memory = get_num(p, name, "memory", out.memory);
            out.interconnect = get_num(p, name, "interconnect", out.interconnect);
            require_pos(out.compute, "efficiency compute");
            require_pos(out.memory, "efficiency memory");
            require_pos(out.interconnect, "efficiency interconnect");
        };
        read_phase("prefill", c.efficiency.prefill);
        read_phase("decode", c.efficiency.decode);
    }

    if (j.contains("batching")) {
        const auto& b = j.at("batching");
        c.batching.tau_b = get_num(b, "batching", "tau_b", c.batching.tau_b);
        c.batching.prefill_max_batch =
            static_cast<int>(get_num(b, "batching", "prefill_max_batch", c.batching.prefill_max_batch));
        c.batching.decode_max_batch =
            static_cast<int>(get_num(b, "batching", "decode_max_batch", c.batching.decode_max_batch));
        require_pos(c.batching.tau_b, "batching.tau_b");
        require_pos(c.batching.prefill_max_batch, "batching.prefill_max_batch");
        require_pos(c.batching.decode_max_batch, "batching.decode_max_batch");
    }

    if (!j.contains("scenario") || !j.at("scenario").is_object())
        throw ConfigError("config needs a \"scenario\" section");
    {
        const auto& s = j.at("scenario");
        c.scenario.prompt_tokens =
            static_cast<std::int64_t>(get_num(s, "scenario", "prompt_tokens", 0, true));
        c.scenario.output_tokens =
            static_cast<std::int64_t>(get_num(s, "scenario", "output_tokens", 0, true));
        c.scenario.arrival_rate = get_num(s, "scenario", "arrival_rate", 0, true);
        c.scenario.requests = static_cast<int>(get_num(s, "scenario", "requests", 0, true));
        c.scenario.repetitions =
            static_cast<int>(get_num(s, "scenario", "repetitions", c.scenario.repetitions));
        // rng_seed is the documented name; seed is accepted as an alias.
        double seed_val = get_num(s, "scenario", "seed", static_cast<double>(c.scenario.seed));
        seed_val = get_num(s, "scenario", "rng_seed", seed_val);
        c.scenario.seed = static_cast<std::uint64_t>(seed_val);
        require_pos(static_cast<double>(c.scenario.prompt_tokens), "scenario.prompt_tokens");
        require_pos(static_cast<double>(c.scenario.output_tokens), "scenario.output_tokens");
        require_pos(c.scenario.arrival_rate, "scenario.arrival_rate");
        require_pos(c.scenario.requests, "scenario.requests");
        require_pos(c.scenario.repetitions, "scenario.repetitions");
    }

    if (j.contains("slo")) {
        const auto& s = j.at("slo");
        c.slo.ttft_ms = get_num(s, "slo", "ttft_ms", c.slo.ttft_ms);
        c.slo.tpot_ms = get_num(s, "slo", "tpot_ms", c.slo.tpot_ms);
        c.slo.relaxation = get_num(s, "slo", "relaxation", c.slo.relaxation);
        require_pos(c.slo.ttft_ms, "slo.ttft_ms");
        require_pos(c.slo.tpot_ms, "slo.tpot_ms");
        require_nonneg(c.slo.relaxation, "slo.relaxation");
    }

    if (j.contains("search")) {
        const auto& s = j.at("search");
        c.search.max_instances =
            static_cast<int>(get_num(s, "search", "max_instances", c.search.max_instances));
        if (s.contains("tp_sizes")) {
            if (!s.at("tp_sizes").is_array())
                throw ConfigError("search.tp_sizes must be an array");
            c.search.tp_sizes.clear();
            for (const auto& v : s.at("tp_sizes")) {
                if (!v.is_number_integer() || v.get<int>() < 1)
                    throw ConfigError("search.tp_sizes entries must be positive integers");
                c.search.tp_sizes.push_back(v.get<int>());
            }
        }
        c.search.epsilon = get_num(s, "search", "epsilon", c.search.epsilon);
        c.search.rate_floor = get_num(s, "search", "rate_floor", c.search.rate_floor);
        c.search.rate_headroom = get_num(s, "search", "rate_headroom", c.search.rate_headroom);
        require_pos(c.search.max_instances, "search.max_instances");
        require_pos(c.search.epsilon, "search.epsilon");
        require_pos(c.search.rate_floor, "search.rate_floor");
        require_pos(c.search.rate_headroom, "search.rate_headroom");
    }
    if (c.search.tp_sizes.empty())
        throw ConfigError("search.tp_sizes must not be empty");

    return c;
}

inline Config load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot open config file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config is not valid JSON: " + std::string(e.what()));
    }
    return parse_config(j);
}

} // namespace servesim
