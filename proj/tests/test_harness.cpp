#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "lora/error.hpp"
#include "lora/harness/config.hpp"
#include "lora/harness/records.hpp"
#include "lora/harness/runner.hpp"
#include "lora/harness/summary.hpp"
#include "oracles.hpp"

using namespace lora;
using namespace lora::harness;
using nlohmann::json;

namespace {

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::filesystem::path scratch(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / ("lora_harness_" + name);
    std::filesystem::remove_all(dir);
    return dir;
}

json small_matrix_config() {
    return json::parse(R"({
        "id": "mc_small", "kind": "matrix_completion",
        "seeds": [1, 2, 3], "budgets": [200000, 400000],
        "matrix": {"rows": 30, "cols": 20, "rank": 2, "spike_rows": 2, "spike_scale": 5,
                   "noise": {"kind": "gaussian", "scale": 0.01}},
        "lme": {"beta_scale": 0.01, "anchor_mode": "fixed_k", "anchor_count": 5},
        "rank": 2,
        "evaluators": ["lme_leveraged", "cur_uniform_anchors", {"kind": "cur_oracle_anchors", "top_k": true}]
    })");
}

ExperimentRecord record(const std::string& eval, std::uint64_t seed, double err) {
    ExperimentRecord r;
    r.experiment = "x";
    r.evaluator = eval;
    r.seed = seed;
    r.budget = 10;
    r.entrywise_error = err;
    return r;
}

}  // namespace

TEST_CASE("config parsing and validation") {
    const auto c = parse_config(small_matrix_config());
    CHECK(c.kind == ExperimentKind::matrix_completion);
    CHECK(c.seeds.size() == 3);
    CHECK(c.budgets == std::vector<std::uint64_t>{200000, 400000});
    REQUIRE(c.evaluators.size() == 3);
    CHECK(c.evaluators[2].oracle_top_k);
    CHECK(c.evaluators[0].lme.anchor_mode == lme::AnchorMode::fixed_k);
    CHECK(c.evaluators[1].rank == 2);
    CHECK(c.matrix.rows == 30);

    auto bad = small_matrix_config();
    bad["budgets"] = {400000, 200000};
    CHECK_THROWS_AS(parse_config(bad), ConfigError);
    bad = small_matrix_config();
    bad["kind"] = "unknown";
    CHECK_THROWS_AS(parse_config(bad), ConfigError);
    bad = small_matrix_config();
    bad["evaluators"] = {"magic"};
    CHECK_THROWS_AS(parse_config(bad), ConfigError);
    bad = small_matrix_config();
    bad["delta"] = 2.0;
    CHECK_THROWS_AS(parse_config(bad), ConfigError);
    bad = small_matrix_config();
    bad["kind"] = "lora_pi";
    CHECK_THROWS_AS(parse_config(bad), ConfigError);  // no eps
    bad["budgets"] = {1e7};
    bad["eps"] = 0.1;
    CHECK(parse_config(bad).budgets.front() == 10'000'000);
    CHECK_THROWS_AS(load_config("/nonexistent.json"), ConfigError);

    CHECK(parse_seed_list("3,1,2") == std::vector<std::uint64_t>{3, 1, 2});
    CHECK_THROWS_AS(parse_seed_list("1,x"), ConfigError);
    CHECK_THROWS_AS(parse_seed_list(""), ConfigError);
}

TEST_CASE("records round trip through CSV") {
    ExperimentRecord r = record("lme_leveraged", 4, 0.125);
    r.warnings = join_warnings({"a, b", "c"});
    r.consumed = 99;
    const auto back = parse_csv_row(to_csv_row(r));
    CHECK(back.evaluator == r.evaluator);
    CHECK(back.seed == 4);
    CHECK(back.entrywise_error == 0.125);
    CHECK(std::isnan(back.frobenius_error));
    CHECK(back.warnings == "a  b;c");
    CHECK(back.consumed == 99);
    CHECK_THROWS_AS(parse_csv_row("a,b,c"), ConfigError);
    CHECK(csv_preamble().rfind(kRecordsVersion, 0) == 0);
}

TEST_CASE("summary statistics") {
    CHECK(median({3.0}) == 3.0);
    CHECK(median({1.0, 2.0, 3.0, 4.0}) == 2.5);
    CHECK(quantile({1.0, 2.0, 3.0, 4.0, 5.0}, 0.25) == 2.0);
    CHECK(std::isnan(median({})));

    for (int n : {10, 30}) {
        for (int k = 0; k <= n; ++k) CHECK(sign_test_p(k, n - k) == doctest::Approx(oracle::binomial_upper_tail(n, k)));
    }
    CHECK(sign_test_p(25, 5) < 0.01);
    CHECK(sign_test_p(0, 0) == 1.0);

    const std::vector<ExperimentRecord> one{record("lme_leveraged", 1, 0.5)};
    const auto s1 = summarize(one);
    REQUIRE(s1.cells.size() == 1);
    CHECK(s1.cells[0].entrywise.median == 0.5);
    CHECK_THROWS_AS(summarize(std::vector<ExperimentRecord>{}), ConfigError);
}

TEST_CASE("sign test over constructed paired records, ties excluded") {
    std::vector<ExperimentRecord> rows;
    for (std::uint64_t s = 0; s < 30; ++s) {
        rows.push_back(record("lme_leveraged", s, s < 25 ? 0.1 : 0.5));
        rows.push_back(record("cur_uniform_anchors", s, 0.3));
    }
    // Two extra tied pairs.
    rows.push_back(record("lme_leveraged", 100, 0.2));
    rows.push_back(record("cur_uniform_anchors", 100, 0.2));
    const auto s = summarize(rows);
    REQUIRE(s.tests.size() == 1);
    CHECK(s.tests[0].wins == 25);
    CHECK(s.tests[0].losses == 5);
    CHECK(s.tests[0].ties == 1);
    CHECK(s.tests[0].p_value < 0.01);
    CHECK(s.tests[0].p_value == doctest::Approx(oracle::binomial_upper_tail(30, 25)));
}

TEST_CASE("summary uses the last epoch of each run") {
    auto a = record("lme_leveraged", 1, 0.9);
    auto b = record("lme_leveraged", 1, 0.1);
    b.epoch = 3;
    const std::vector<ExperimentRecord> rows{b, a};
    CHECK(summarize(rows).cells[0].entrywise.median == 0.1);
}

TEST_CASE("runs are deterministic, thread-count independent and resumable") {
    const auto config = parse_config(small_matrix_config());
    const auto d1 = scratch("a"), d2 = scratch("b"), d3 = scratch("c");
    RunOptions o1{d1, std::nullopt, 1};
    RunOptions o2{d2, std::nullopt, 3};
    const auto r1 = run_experiment(config, o1);
    run_experiment(config, o2);
    const std::string csv = slurp(r1.records);
    CHECK(csv == slurp(d2 / "records.csv"));
    CHECK(r1.cells == 6);
    CHECK(csv.find("cur_oracle_anchors_top_k") != std::string::npos);
    const auto records = read_records(r1.records);
    CHECK(records.size() == 18);
    for (const auto& r : records) {
        CHECK(r.status == "ok");
        CHECK(r.entrywise_error >= 0.0);
        CHECK(r.consumed <= r.budget);
    }
    CHECK(std::filesystem::exists(d1 / "summary.json"));
    CHECK(std::filesystem::exists(d1 / "config.json"));

    // Crash simulation: keep the first cell and half of a row from the second.
    std::filesystem::create_directories(d3);
    const std::string preamble = csv_preamble();
    std::size_t cut = preamble.size();
    for (int line = 0; line < 4; ++line) cut = csv.find('\n', cut) + 1;
    {
        std::ofstream out(d3 / "records.csv", std::ios::binary);
        out << csv.substr(0, cut + 10);
    }
    const auto r3 = run_experiment(config, {d3, std::nullopt, 2});
    CHECK(r3.skipped == 1);
    CHECK(slurp(d3 / "records.csv") == csv);

    // A second resume has nothing to do.
    const auto r4 = run_experiment(config, {d3, std::nullopt, 2});
    CHECK(r4.skipped == 6);
    CHECK(slurp(d3 / "records.csv") == csv);

    // Seed override.
    const auto d4 = scratch("d");
    const auto r5 = run_experiment(config, {d4, std::vector<std::uint64_t>{2}, 1});
    CHECK(r5.cells == 2);
    for (const auto& r : read_records(r5.records)) CHECK(r.seed == 2);
    for (const auto& d : {d1, d2, d3, d4}) std::filesystem::remove_all(d);
}

TEST_CASE("infeasible cells become rows") {
    auto j = small_matrix_config();
    j["budgets"] = {100, 300000};
    j["seeds"] = {1};
    const auto rows = run_cell(parse_config(j), 1, 100);
    REQUIRE(rows.size() == 3);
    for (const auto& r : rows) {
        CHECK(r.status == "infeasible");
        CHECK(r.warnings.find("minimal_budget=") != std::string::npos);
    }
}

TEST_CASE("lora_pi cells log epochs and the bound check") {
    const auto j = json::parse(R"({
        "id": "pi", "kind": "lora_pi", "seeds": [1], "budgets": [1000000],
        "mdp": {"toy": true}, "eps_fraction": 0.1, "delta": 0.1,
        "schedule": {"kind": "geometric", "base": 0, "ratio": 1.1},
        "evaluators": ["full_matrix_mc"]
    })");
    const auto rows = run_cell(parse_config(j), 1, 1'000'000);
    REQUIRE(rows.size() > 2);
    CHECK(rows.back().epoch == static_cast<int>(rows.size()));
    CHECK(std::isnan(rows.back().entrywise_error));
    CHECK(rows.back().warnings.find("api_violations=0") != std::string::npos);
}

TEST_CASE("thread count from the environment") {
    setenv("LORA_THREADS", "3", 1);
    CHECK(thread_count() == 3);
    setenv("LORA_THREADS", "junk", 1);
    CHECK(thread_count() >= 1);
    unsetenv("LORA_THREADS");
}

TEST_CASE("golden toy and condition landscape") {
    const double v0[] = {2.86, 2.98};
    const auto g = golden_toy(v0);
    CHECK(g.policy_conditions[0] == doctest::Approx(16.08).epsilon(0.001));
    CHECK(g.v_max == doctest::Approx(3.6923).epsilon(1e-4));
    CHECK(g.vi_max_condition > 1.0);

    const auto toy = mdp::load_toy_mdp();
    const auto grid = cond_landscape(toy, 64);
    REQUIRE(grid.size() == 64 * 64);
    CHECK(grid.front()[0] == doctest::Approx(-toy.value_bound()));
    CHECK(grid.back()[1] == doctest::Approx(toy.value_bound()));
    // Independent recomputation at one lattice point.
    const auto& p = grid[64 * 10 + 20];
    const auto f = oracle::lookahead(toy, Eigen::Vector2d(p[0], p[1]));
    const Eigen::JacobiSVD<Eigen::MatrixXd> svd(f);
    CHECK(p[2] == doctest::Approx(svd.singularValues()(0) / svd.singularValues()(1)));

    auto j = json::parse(R"({"id": "land", "kind": "cond_landscape", "mdp": {"toy": true}, "grid": 8})");
    const auto dir = scratch("land");
    const auto out = run_experiment(parse_config(j), {dir, std::nullopt, 1});
    const std::string text = slurp(out.records);
    CHECK(text.rfind("# lora-landscape/1\nv1,v2,condition_number\n", 0) == 0);
    CHECK(std::count(text.begin(), text.end(), '\n') == 2 + 64);
    std::filesystem::remove_all(dir);
}
