#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <vector>

#include "servesim/report.hpp"

using namespace servesim;
namespace fs = std::filesystem;

namespace {

const std::string kBin = SERVESIM_BIN;
const std::string kConfigDir = SERVESIM_CONFIG_DIR;

struct CmdResult {
    int status = -1;
    std::string out; // stdout and stderr merged
};

CmdResult run_cmd(const std::string& cmd) {
    CmdResult r;
    FILE* pipe = popen((cmd + " 2>&1").c_str(), "r");
    REQUIRE(pipe != nullptr);
    char buf[4096];
    std::size_t n = 0;
    while ((n = std::fread(buf, 1, sizeof buf, pipe)) > 0)
        r.out.append(buf, n);
    const int rc = pclose(pipe);
    r.status = WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
    return r;
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("servesim_cli_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string base_cmd(const std::string& config, const fs::path& out_dir) {
    return kBin + " --config '" + kConfigDir + "/" + config + "' --out-dir '" +
           out_dir.string() + "'";
}

// First line starting with the given prefix, without the newline.
std::string find_line(const std::string& text, const std::string& prefix) {
    std::istringstream ss(text);
    std::string line;
    while (std::getline(ss, line))
        if (line.rfind(prefix, 0) == 0)
            return line;
    return {};
}

std::vector<std::string> split_tabs(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == '\t') {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

} // namespace

TEST_CASE("numbers render with fixed precision") {
    CHECK(fmt(1.23456) == "1.235");
    CHECK(fmt(0.0) == "0.000");
    CHECK(fmt(2.5, 6) == "2.500000");
    CHECK(fmt(-0.1, 1) == "-0.1");
}

TEST_CASE("metric summaries count the share under the goal") {
    const MetricSummaryLine line = summarize_metric({1.0, 2.0, 3.0, 4.0}, 2.5);
    CHECK(line.ok_fraction == 0.5);
    CHECK(line.slo_goal == 2.5);
    CHECK(line.stats.p50 == 2.0);
}

TEST_CASE("histograms cover every sample exactly once") {
    std::vector<double> values;
    for (int i = 0; i < 1000; ++i)
        values.push_back(0.5 * i);
    const std::string h = render_histogram("ttft_ms", values, 100.0);
    REQUIRE(h.find("# schema: servesim/hist v1") == 0);
    CHECK(find_line(h, "# p90: ") != "");
    CHECK(find_line(h, "# slo: 100.000") != "");

    std::istringstream ss(h);
    std::string line;
    long total = 0;
    int data_rows = 0;
    while (std::getline(ss, line)) {
        if (line.empty() || line[0] == '#' || line.rfind("bin_lo", 0) == 0)
            continue;
        const auto cols = split_tabs(line);
        REQUIRE(cols.size() == 3);
        total += std::stol(cols[2]);
        ++data_rows;
    }
    CHECK(data_rows == 40);
    CHECK(total == 1000);
}

TEST_CASE("estimate prints the calibrated per-step breakdown") {
    const auto dir = scratch("estimate");
    const auto pre = run_cmd(base_cmd("codellama34b_2m.json", dir) +
                             " estimate --phase prefill --batch 1");
    REQUIRE(pre.status == 0);
    CHECK(pre.out.find("# schema: servesim/estimate v1") == 0);
    CHECK(pre.out.find("phase: prefill") != std::string::npos);
    CHECK(pre.out.find("context_tokens: 2048") != std::string::npos);
    CHECK(pre.out.find("total_ms\t265.699") != std::string::npos);

    // Decode defaults to the final generation step of the scenario.
    const auto dec = run_cmd(base_cmd("codellama34b_2m.json", dir) +
                             " estimate --phase decode --batch 1");
    REQUIRE(dec.status == 0);
    CHECK(dec.out.find("context_tokens: 2111") != std::string::npos);
    CHECK(dec.out.find("total_ms\t34.088") != std::string::npos);
}

TEST_CASE("simulate writes the metrics file it prints, reproducibly") {
    const auto dir_a = scratch("sim_a");
    const auto dir_b = scratch("sim_b");
    const std::string cmd_tail = " simulate --arch 2m";
    const auto a = run_cmd(base_cmd("codellama34b_2m.json", dir_a) + cmd_tail);
    const auto b = run_cmd(base_cmd("codellama34b_2m.json", dir_b) + cmd_tail);
    REQUIRE(a.status == 0);
    REQUIRE(b.status == 0);
    REQUIRE(a.out == b.out);

    const std::string file_a = read_file(dir_a / "metrics.txt");
    CHECK(file_a == a.out);
    CHECK(file_a.find("# schema: servesim/metrics v1") == 0);
    CHECK(find_line(file_a, "arch: 2m") != "");
    CHECK(find_line(file_a, "ttft_ms\t") != "");
    CHECK(find_line(file_a, "tpot_ms\t") != "");
    CHECK(file_a == read_file(dir_b / "metrics.txt"));
}

TEST_CASE("the seed override changes the sampled workload") {
    const auto dir_a = scratch("seed_a");
    const auto dir_b = scratch("seed_b");
    const auto a = run_cmd(base_cmd("codellama34b_2m.json", dir_a) +
                           " --seed 7 simulate --arch 2m");
    const auto b = run_cmd(base_cmd("codellama34b_2m.json", dir_b) +
                           " --seed 8 simulate --arch 2m");
    REQUIRE(a.status == 0);
    REQUIRE(b.status == 0);
    CHECK(find_line(a.out, "seed: 7") != "");
    CHECK(find_line(b.out, "seed: 8") != "");
    CHECK(a.out != b.out);
}

TEST_CASE("emitted histograms and trace cover the whole first run") {
    const auto dir = scratch("hist");
    const auto r = run_cmd(base_cmd("codellama34b_2m.json", dir) +
                           " simulate --arch 2m --emit-hist");
    REQUIRE(r.status == 0);

    const std::string hist = read_file(dir / "hist_ttft.tsv");
    CHECK(hist.find("# schema: servesim/hist v1") == 0);
    CHECK(find_line(hist, "# p90: ") != "");
    CHECK(find_line(hist, "# p99: ") != "");
    CHECK(read_file(dir / "hist_tpot.tsv").find("# schema: servesim/hist v1") == 0);

    const std::string trace = read_file(dir / "trace.tsv");
    CHECK(trace.find("# schema: servesim/trace v1") == 0);
    long lines = 0;
    for (char c : trace)
        if (c == '\n')
            ++lines;
    CHECK(lines == 2 + 10000); // schema + header + one row per request
}

TEST_CASE("a sweep row at the scenario rate matches simulate") {
    const auto dir_sim = scratch("sweep_sim");
    const auto dir_swp = scratch("sweep_swp");
    const auto sim = run_cmd(base_cmd("codellama34b_2m.json", dir_sim) +
                             " simulate --arch 2m");
    const auto swp = run_cmd(base_cmd("codellama34b_2m.json", dir_swp) +
                             " sweep --arch 2m --rates 3.5");
    REQUIRE(sim.status == 0);
    REQUIRE(swp.status == 0);

    const auto ttft_cols = split_tabs(find_line(sim.out, "ttft_ms\t"));
    const auto tpot_cols = split_tabs(find_line(sim.out, "tpot_ms\t"));
    REQUIRE(ttft_cols.size() == 7);
    REQUIRE(tpot_cols.size() == 7);

    const std::string row = find_line(swp.out, "3.500000\t");
    REQUIRE(row != "");
    const auto cols = split_tabs(row);
    REQUIRE(cols.size() == 3);
    CHECK(cols[1] == ttft_cols[3]); // p90 column
    CHECK(cols[2] == tpot_cols[3]);
    CHECK(read_file(dir_swp / "sweep.tsv") == swp.out);
}

TEST_CASE("rate grids expand inclusively and lists keep their order") {
    const auto dir = scratch("grid");
    const auto grid = run_cmd(base_cmd("codellama34b_2m.json", dir) +
                              " sweep --arch 2m --rates 1.0:2.0:0.5");
    REQUIRE(grid.status == 0);
    CHECK(find_line(grid.out, "1.000000\t") != "");
    CHECK(find_line(grid.out, "1.500000\t") != "");
    CHECK(find_line(grid.out, "2.000000\t") != "");

    const auto list = run_cmd(base_cmd("codellama34b_2m.json", dir) +
                              " sweep --arch 2m --rates 2.0,1.0");
    REQUIRE(list.status == 0);
    const auto pos2 = list.out.find("\n2.000000\t");
    const auto pos1 = list.out.find("\n1.000000\t");
    REQUIRE(pos2 != std::string::npos);
    REQUIRE(pos1 != std::string::npos);
    CHECK(pos2 < pos1);
}

TEST_CASE("optimize writes a reproducible ranked report") {
    const auto dir_a = scratch("opt_a");
    const auto dir_b = scratch("opt_b");
    const std::string tail =
        " optimize --arch-filter 1m,2m,1p1d --epsilon 0.4";
    const auto a = run_cmd(base_cmd("codellama34b_2m.json", dir_a) + " --workers 2" + tail);
    const auto b = run_cmd(base_cmd("codellama34b_2m.json", dir_b) + " --workers 1" + tail);
    REQUIRE(a.status == 0);
    REQUIRE(b.status == 0);
    REQUIRE(a.out == b.out);

    const std::string report = read_file(dir_a / "report.txt");
    CHECK(report == a.out);
    CHECK(report.find("# schema: servesim/report v1") == 0);
    CHECK(report.find("\n[config]\n") != std::string::npos);
    CHECK(report.find("\n[ranking]\n") != std::string::npos);
    CHECK(report.find("\n[probes]\n") != std::string::npos);
    CHECK(report.find("\"rng_seed\": 1") != std::string::npos);
    CHECK(report.find("\"kappa\"") != std::string::npos);
    CHECK(report == read_file(dir_b / "report.txt"));

    const std::string csv = read_file(dir_a / "ranking.csv");
    CHECK(csv.find("# schema: servesim/ranking v1") == 0);
    CHECK(csv.find("rank,arch,tp,") != std::string::npos);
    long rows = 0;
    for (char c : csv)
        if (c == '\n')
            ++rows;
    CHECK(rows == 2 + 3); // schema + header + one row per strategy
}

TEST_CASE("usage errors exit with the config-error code") {
    const auto dir = scratch("errors");
    const std::string base = base_cmd("codellama34b_2m.json", dir);

    CHECK(run_cmd(base + " simulate --arch 2x").status == 2);
    CHECK(run_cmd(base + " sweep --arch 2m --rates abc").status == 2);
    CHECK(run_cmd(base + " sweep --arch 2m --rates 1.0:2.0").status == 2);
    CHECK(run_cmd(base + " optimize --arch-filter zzz").status == 2);
    CHECK(run_cmd(base + " estimate --phase walk").status == 2);
    CHECK(run_cmd(base + " frobnicate").status == 2);
    CHECK(run_cmd(base + " simulate --arch 2m --bogus").status == 2);
    CHECK(run_cmd(kBin + " simulate --arch 2m").status == 2); // no --config
    CHECK(run_cmd(kBin + " --config /nonexistent.json simulate --arch 2m").status == 2);
    CHECK(run_cmd(kBin).status == 2); // a subcommand is required

    const fs::path bad_json = dir / "bad.json";
    std::ofstream(bad_json) << "{ not json";
    CHECK(run_cmd(kBin + " --config '" + bad_json.string() + "' simulate --arch 2m")
              .status == 2);
}

TEST_CASE("runtime failures exit with the runtime-error code") {
    // /dev/null is not a directory, so the output path cannot be created.
    const auto r = run_cmd(base_cmd("codellama34b_2m.json", fs::path("/dev/null/x")) +
                           " simulate --arch 2m");
    CHECK(r.status == 3);
}

TEST_CASE("version and help exit cleanly") {
    const auto v = run_cmd(kBin + " --version");
    CHECK(v.status == 0);
    CHECK(v.out.find("0.1.0") != std::string::npos);
    CHECK(run_cmd(kBin + " --help").status == 0);
}
