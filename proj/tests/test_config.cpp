#include <catch2/catch_amalgamated.hpp>

#include <json.hpp>

#include "servesim/config.hpp"

using namespace servesim;
using nlohmann::json;

namespace {

json minimal() {
    return json{
        {"model",
         {{"hidden", 8192}, {"intermediate", 22016}, {"heads", 64}, {"kv_heads", 8}, {"layers", 48}}},
        {"hardware",
         {{"compute_flops", 313e12},
          {"mem_bandwidth", 1.6e12},
          {"interconnect_bandwidth", 90e9}}},
        {"scenario",
         {{"prompt_tokens", 2048},
          {"output_tokens", 64},
          {"arrival_rate", 3.5},
          {"requests", 100}}}};
}

} // namespace

TEST_CASE("minimal config fills defaults") {
    const Config c = parse_config(minimal());
    CHECK(c.model.hidden == 8192);
    CHECK(c.model.grouped_query());
    CHECK(c.hardware.mem_bw_scale == 1.0);
    CHECK(c.hardware.comm_floor_ms == Catch::Approx(0.1));
    CHECK(c.hardware.aux_rate() == Catch::Approx(1.6e12)); // falls back to mem bandwidth
    CHECK(c.dispatch.rmsnorm_ms == Catch::Approx(0.024));
    CHECK(c.dispatch.attention_ms == Catch::Approx(0.190));
    CHECK(c.dispatch.mlp_ms == Catch::Approx(0.041));
    CHECK(c.efficiency.prefill.compute == Catch::Approx(0.65));
    CHECK(c.efficiency.prefill.memory == Catch::Approx(0.60));
    CHECK(c.efficiency.decode.memory == Catch::Approx(0.30));
    CHECK(c.batching.tau_b == Catch::Approx(2.5));
    CHECK(c.batching.prefill_max_batch == 4);
    CHECK(c.batching.decode_max_batch == 16);
    CHECK(c.scenario.repetitions == 1);
    CHECK(c.scenario.seed == 1);
    CHECK(c.slo.ttft_ms == Catch::Approx(1500.0));
    CHECK(c.slo.tpot_ms == Catch::Approx(70.0));
    CHECK(c.slo.relaxation == Catch::Approx(0.1));
    CHECK(c.search.max_instances == 5);
    CHECK(c.search.tp_sizes == std::vector<int>{4});
    CHECK(c.search.epsilon == Catch::Approx(0.05));
    CHECK(c.search.rate_floor == Catch::Approx(0.1));
    CHECK(c.search.rate_headroom == Catch::Approx(1.2));
}

TEST_CASE("kv_heads defaults to heads") {
    json j = minimal();
    j["model"].erase("kv_heads");
    const Config c = parse_config(j);
    CHECK(c.model.kv_heads == c.model.heads);
    CHECK_FALSE(c.model.grouped_query());
}

TEST_CASE("kappa section sets the auxiliary rate") {
    json j = minimal();
    j["kappa"] = {{"rate", 2.0e12}};
    CHECK(parse_config(j).hardware.aux_rate() == Catch::Approx(2.0e12));
    j["kappa"]["rate"] = 0.0;
    CHECK_THROWS_AS(parse_config(j), ConfigError);
}

TEST_CASE("rng_seed is primary, seed accepted as alias") {
    json j = minimal();
    j["scenario"]["seed"] = 7;
    CHECK(parse_config(j).scenario.seed == 7);
    j["scenario"]["rng_seed"] = 9;
    CHECK(parse_config(j).scenario.seed == 9);
}

TEST_CASE("missing sections are rejected") {
    for (const char* section : {"model", "hardware", "scenario"}) {
        json j = minimal();
        j.erase(section);
        CHECK_THROWS_AS(parse_config(j), ConfigError);
    }
}

TEST_CASE("model dimension validation") {
    json j = minimal();
    j["model"]["kv_heads"] = 128; // exceeds heads
    CHECK_THROWS_AS(parse_config(j), ConfigError);

    j = minimal();
    j["model"]["kv_heads"] = 7; // 64 % 7 != 0
    CHECK_THROWS_AS(parse_config(j), ConfigError);

    j = minimal();
    j["model"]["hidden"] = 0;
    CHECK_THROWS_AS(parse_config(j), ConfigError);

    j = minimal();
    j["model"]["layers"] = -1;
    CHECK_THROWS_AS(parse_config(j), ConfigError);
}

TEST_CASE("rates must be positive, dispatch non-negative") {
    json j = minimal();
    j["hardware"]["mem_bandwidth"] = 0.0;
    CHECK_THROWS_AS(parse_config(j), ConfigError);

    j = minimal();
    j["hardware"]["compute_flops"] = -1.0;
    CHECK_THROWS_AS(parse_config(j), ConfigError);

    j = minimal();
    j["dispatch_ms"] = {{"rmsnorm", -0.1}};
    CHECK_THROWS_AS(parse_config(j), ConfigError);

    j = minimal();
    j["dispatch_ms"] = {{"rmsnorm", 0.0}};
    CHECK(parse_config(j).dispatch.rmsnorm_ms == 0.0);
}

TEST_CASE("efficiencies must be positive when given") {
    json j = minimal();
    j["efficiency"] = {{"prefill", {{"memory", 0.0}}}};
    CHECK_THROWS_AS(parse_config(j), ConfigError);
    j["efficiency"] = {{"decode", {{"compute", 0.9}}}};
    CHECK(parse_config(j).efficiency.decode.compute == Catch::Approx(0.9));
}

TEST_CASE("scenario numbers validated") {
    json j = minimal();
    j["scenario"]["requests"] = 0;
    CHECK_THROWS_AS(parse_config(j), ConfigError);

    j = minimal();
    j["scenario"]["arrival_rate"] = "fast";
    CHECK_THROWS_AS(parse_config(j), ConfigError);
}

TEST_CASE("search tp_sizes validation") {
    json j = minimal();
    j["search"] = {{"tp_sizes", json::array()}};
    CHECK_THROWS_AS(parse_config(j), ConfigError);

    j["search"] = {{"tp_sizes", {1, 2, 4}}};
    CHECK(parse_config(j).search.tp_sizes == std::vector<int>{1, 2, 4});

    j["search"] = {{"tp_sizes", {0}}};
    CHECK_THROWS_AS(parse_config(j), ConfigError);

    j["search"] = {{"tp_sizes", {2.5}}};
    CHECK_THROWS_AS(parse_config(j), ConfigError);
}

TEST_CASE("load_config rejects missing or malformed files") {
    CHECK_THROWS_AS(load_config("/nonexistent/servesim.json"), ConfigError);
}

TEST_CASE("shipped fixture parses with pinned calibration") {
    const Config c = load_config(std::string(SERVESIM_CONFIG_DIR) + "/codellama34b_1p1d.json");
    CHECK(c.model.hidden == 8192);
    CHECK(c.model.intermediate == 22016);
    CHECK(c.model.layers == 48);
    CHECK(c.hardware.mem_bw_scale == Catch::Approx(1.0973560538116591).epsilon(1e-15));
    CHECK(c.hardware.aux_rate() == Catch::Approx(1.6e12));
    CHECK(c.hardware.comm_floor_ms == 0.0);
    CHECK(c.batching.decode_max_batch == 16);
    CHECK(c.scenario.prompt_tokens == 2048);
    CHECK(c.scenario.output_tokens == 64);
    CHECK(c.scenario.requests == 10000);
}
