// Acceptance checks. `acceptance --criterion N` runs one criterion, no
// argument runs all of them; each prints one PASS/FAIL line and the exit
// status is nonzero when any selected criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "../oracles.hpp"
#include "lora/algorithms.hpp"
#include "lora/harness/config.hpp"
#include "lora/harness/records.hpp"
#include "lora/harness/runner.hpp"
#include "lora/lme.hpp"
#include "lora/oracle.hpp"

namespace {

using namespace lora;
using oracle::Matrix;
using oracle::Vec;

const std::filesystem::path kConfigDir = LORA_CONFIG_DIR;

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// V^pi by a plain LU solve of (I - gamma P_pi) V = r_pi.
Vec solve_value(const mdp::TabularMdp& m, const std::vector<int>& pi) {
    const int S = m.states();
    Matrix sys = Matrix::Identity(S, S);
    Vec rhs(S);
    for (int s = 0; s < S; ++s) {
        rhs(s) = m.mean_rewards()(s, pi[s]);
        for (int s2 = 0; s2 < S; ++s2) sys(s, s2) -= m.gamma() * oracle::p(m, s, pi[s], s2);
    }
    return sys.partialPivLu().solve(rhs);
}

Matrix exact_q(const mdp::TabularMdp& m, const std::vector<int>& pi) {
    return oracle::lookahead(m, solve_value(m, pi));
}

// V* by value iteration on the oracle lookahead, run to machine precision.
Vec optimal_value(const mdp::TabularMdp& m) {
    Vec v = Vec::Zero(m.states());
    for (int k = 0; k < 100000; ++k) {
        const Vec next = oracle::lookahead(m, v).rowwise().maxCoeff();
        const double diff = (next - v).cwiseAbs().maxCoeff();
        v = next;
        if (diff < 1e-13) break;
    }
    return v;
}

// l_s = ||U_s||^2 / d from a Jacobi SVD.
Vec row_leverage(const Matrix& m, int d) {
    Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeThinU);
    return svd.matrixU().leftCols(d).rowwise().squaredNorm() / d;
}

harness::ExperimentConfig config(const char* name) { return harness::load_config(kConfigDir / name); }

lme::LmeOptions lme_options(const harness::ExperimentConfig& c) { return c.evaluators.front().lme; }

// 1: toy-MDP condition numbers, V_max and the VI condition peak.
Outcome golden_numbers() {
    const std::vector<double> v0{2.86, 2.98};
    const auto g = harness::golden_toy(v0);
    const double expected[4] = {16.08, 4.38, 15.29, 12.07};
    bool conds = true;
    std::string detail = "cond";
    for (int i = 0; i < 4; ++i) {
        conds = conds && std::abs(g.policy_conditions[i] - expected[i]) <= 0.01;
        detail += fmt(" %.3f", g.policy_conditions[i]);
    }
    const bool vmax = std::abs(g.v_max - 3.69) <= 0.005;
    const bool vi = std::abs(g.vi_max_condition - 2497.82) <= 0.01 * 2497.82;
    detail += fmt(" [%s]; V_max %.4f [%s]; VI max cond %.2f vs 2497.82 [%s]", conds ? "ok" : "off", g.v_max,
                  vmax ? "ok" : "off", g.vi_max_condition, vi ? "ok" : "off");
    return {conds && vmax && vi, detail};
}

// 2: ||Q^pi - Q^pi_tau||_inf <= eps with tau from truncation_horizon.
Outcome truncation_bound() {
    std::mt19937_64 gen(2024);
    std::uniform_int_distribution<int> dim(2, 30);
    std::uniform_real_distribution<double> g(0.5, 0.95);
    int violations = 0, checks = 0;
    double worst = 0.0;
    for (int i = 0; i < 50; ++i) {
        const int S = dim(gen), A = dim(gen);
        const auto m = oracle::random_mdp(S, A, g(gen), gen());
        std::vector<int> pi(static_cast<std::size_t>(S));
        for (auto& a : pi) a = static_cast<int>(gen() % static_cast<std::uint64_t>(A));
        const Matrix q = exact_q(m, pi);
        for (double eps : {0.1, 0.01}) {
            const int tau = mdp::truncation_horizon(m.gamma(), m.r_max(), eps);
            const double err = oracle::sup(q - oracle::truncated_q(m, pi, tau));
            worst = std::max(worst, err / eps);
            violations += err > eps;
            ++checks;
        }
    }
    return {violations == 0, fmt("%d/%d violations, worst err/eps %.3f", violations, checks, worst)};
}

// 3: weighted CUR reproduces a rank-d matrix from anchors spanning its rank.
Outcome cur_exactness() {
    std::mt19937_64 gen(77);
    std::uniform_real_distribution<double> w(0.1, 10.0);
    double worst = 0.0;
    for (int i = 0; i < 200; ++i) {
        const int d = 1 + static_cast<int>(gen() % 8);
        const int S = d + static_cast<int>(gen() % static_cast<std::uint64_t>(101 - d));
        const int A = d + static_cast<int>(gen() % static_cast<std::uint64_t>(101 - d));
        Matrix m = oracle::random_lowrank(S, A, d, gen());
        m /= oracle::sup(m);
        lme::AnchorPlan plan;
        for (;;) {
            auto pick = [&](int n) {
                std::vector<int> idx(static_cast<std::size_t>(n));
                for (int k = 0; k < n; ++k) idx[static_cast<std::size_t>(k)] = k;
                std::shuffle(idx.begin(), idx.end(), gen);
                const int k = d + static_cast<int>(gen() % static_cast<std::uint64_t>(std::min(n, 2 * d) - d + 1));
                idx.resize(static_cast<std::size_t>(k));
                std::sort(idx.begin(), idx.end());
                return idx;
            };
            plan.rows = pick(S);
            plan.cols = pick(A);
            Matrix core(plan.rows.size(), plan.cols.size());
            for (std::size_t r = 0; r < plan.rows.size(); ++r)
                for (std::size_t c = 0; c < plan.cols.size(); ++c) core(r, c) = m(plan.rows[r], plan.cols[c]);
            Eigen::FullPivLU<Matrix> lu(core);
            lu.setThreshold(1e-8);
            if (lu.rank() == d) break;
        }
        plan.row_weights = Vec::NullaryExpr(static_cast<Eigen::Index>(plan.rows.size()), [&] { return w(gen); });
        plan.col_weights = Vec::NullaryExpr(static_cast<Eigen::Index>(plan.cols.size()), [&] { return w(gen); });
        const Matrix rebuilt = lme::cur_complete(m, plan, d, 1e-10, false);
        worst = std::max(worst, oracle::sup(rebuilt - m));
    }
    return {worst < 1e-8, fmt("max entrywise error %.3e over 200 matrices", worst)};
}

// 4: spectral rank recovery, first with a threshold inside the gap on
// noiseless entries, then with the formula threshold once it falls below sigma_d / 2.
Outcome rank_recovery() {
    const double delta = 0.1, gamma = 0.5;
    std::mt19937_64 gen(404);
    int hits = 0;
    for (int i = 0; i < 100; ++i) {
        const int d = 1 + static_cast<int>(gen() % 5);
        const int S = 10 + static_cast<int>(gen() % 31), A = 10 + static_cast<int>(gen() % 31);
        Matrix m = oracle::random_lowrank(S, A, d, gen());
        m /= oracle::sup(m);
        const Vec sigma = Eigen::JacobiSVD<Matrix>(m).singularValues();
        const lme::MatrixOracle source(m, mdp::RewardNoise::none());
        const std::uint64_t T = 1'000'000'000'000ULL;
        const auto plan = lme::build_plan(source, T, delta, gamma, 1.0);
        lme::LmeOptions opt;
        opt.beta_scale = 0.5 * sigma(d - 1) / lme::spectral_threshold(S, A, T, gamma, 1.0, delta);
        hits += lme::phase1_estimate(source, plan, opt, Rng(gen())).rank == d;
    }

    const int S = 6, A = 6, d = 2;
    int noisy_hits = 0, noisy_runs = 0;
    std::uint64_t largest_T = 0;
    for (std::uint64_t seed = 1; seed <= 50; ++seed) {
        Matrix m = oracle::random_lowrank(S, A, d, 9000 + seed);
        m /= oracle::sup(m);
        const double sigma_d = Eigen::JacobiSVD<Matrix>(m).singularValues()(d - 1);
        std::uint64_t T = 0;
        for (std::uint64_t t = 10; t <= 10'000'000'000'000'000'000ULL; t *= 10) {
            if (lme::spectral_threshold(S, A, t, gamma, 1.0, delta) < 0.5 * sigma_d) {
                T = t;
                break;
            }
            if (t > 1'000'000'000'000'000'000ULL) break;
        }
        ++noisy_runs;
        if (T == 0) continue;
        largest_T = std::max(largest_T, T);
        const lme::MatrixOracle source(m, mdp::RewardNoise::gaussian(0.1));
        const auto plan = lme::build_plan(source, T, delta, gamma, 1.0);
        noisy_hits += lme::phase1_estimate(source, plan, lme::LmeOptions{}, Rng(seed)).rank == d;
    }
    const bool ok = hits == 100 && noisy_hits * 100 >= 95 * noisy_runs;
    return {ok, fmt("gap threshold %d/100; formula threshold %d/%d (T up to %.0e)", hits, noisy_hits, noisy_runs,
                    static_cast<double>(largest_T))};
}

// 5: l_s <= 4 l^_s for every state, from Phase-1 estimates on rollouts.
Outcome leverage_estimation() {
    const auto c = config("leverage_mdp.json");
    const std::uint64_t T = c.budgets.front();
    int good = 0;
    double worst = 0.0;
    for (auto seed : c.seeds) {
        const auto m = harness::load_instance(c, seed);
        const std::vector<int> pi(static_cast<std::size_t>(m.states()), 0);
        const Vec exact = row_leverage(exact_q(m, pi), c.mdp.generator.rank);
        const lme::RolloutOracle source(m, mdp::DeterministicPolicy{pi});
        const auto plan = lme::build_plan(source, T, c.delta, m.gamma(), m.r_max());
        const auto est = lme::phase1_estimate(source, plan, lme_options(c), Rng(derive_seed(seed, {T})));
        const double ratio = (exact.array() / est.profile.left.array()).maxCoeff();
        worst = std::max(worst, ratio);
        good += ratio <= 4.0;
    }
    const int n = static_cast<int>(c.seeds.size());
    return {good * 10 >= 9 * n, fmt("%d/%d seeds hold for all states, worst l/l^ %.3f", good, n, worst)};
}

// 6: relative entrywise accuracy at the largest budget; median error falls with T.
Outcome lme_accuracy() {
    const auto c = config("lme_mdp.json");
    std::vector<double> medians;
    int good = 0;
    double worst = 0.0;
    for (auto T : c.budgets) {
        std::vector<double> errs;
        for (auto seed : c.seeds) {
            const auto m = harness::load_instance(c, seed);
            const std::vector<int> pi(static_cast<std::size_t>(m.states()), 0);
            const Matrix q = exact_q(m, pi);
            const lme::RolloutOracle source(m, mdp::DeterministicPolicy{pi});
            const auto res = lme::lme(source, T, c.delta, m.gamma(), m.r_max(), lme_options(c),
                                      Rng(derive_seed(seed, {T})));
            const double err = oracle::sup(res.q_hat - q);
            errs.push_back(err);
            if (T == c.budgets.back()) {
                worst = std::max(worst, err / oracle::sup(q));
                good += err <= 0.05 * oracle::sup(q);
            }
        }
        medians.push_back(median(errs));
    }
    bool decreasing = true;
    for (std::size_t i = 1; i < medians.size(); ++i) decreasing = decreasing && medians[i] < medians[i - 1];
    const int n = static_cast<int>(c.seeds.size());
    std::string detail = fmt("%d/%d seeds within 5%% (worst %.4f); medians", good, n, worst);
    for (double v : medians) detail += fmt(" %.4g", v);
    return {good * 10 >= 9 * n && decreasing, detail};
}

// 7: LoRa-PI reaches eps-optimality and the API inequality holds at every epoch.
Outcome lora_pi_end_to_end() {
    bool pass = true;
    std::string detail;
    for (const char* name : {"lora_pi_toy.json", "lora_pi.json"}) {
        const auto c = config(name);
        int good = 0, violations = 0;
        double worst = 0.0;
        for (auto seed : c.seeds) {
            const auto m = harness::load_instance(c, seed);
            algo::LoraConfig lc;
            lc.budget = c.budgets.front();
            lc.eps = c.eps_fraction.value_or(0.1) * m.value_bound();
            lc.delta = c.delta;
            lc.evaluator = c.evaluators.front();
            lc.schedule = c.schedule;
            lc.max_epochs = c.max_epochs;
            const auto run = algo::lora_pi(m, lc, Rng(derive_seed(seed, {lc.budget})));
            const double gap = (optimal_value(m) - solve_value(m, run.policy.actions)).cwiseAbs().maxCoeff();
            const auto bound = algo::check_api_bound(m, run);
            worst = std::max(worst, gap / lc.eps);
            good += gap <= lc.eps;
            violations += bound.api_violations + bound.improvement_violations;
        }
        const int n = static_cast<int>(c.seeds.size());
        pass = pass && good * 10 >= 9 * n && violations == 0;
        detail += fmt("%s%s %d/%d eps-optimal (worst gap/eps %.3f), %d bound violations", detail.empty() ? "" : "; ",
                      c.id.c_str(), good, n, worst, violations);
    }
    return {pass, detail};
}

// 8: leveraged anchors beat uniform ones on a coherent matrix; oracle anchors
// are within a factor of two of the leveraged ones in median.
Outcome anchor_ordering() {
    const auto c = config("matrix_completion.json");
    std::vector<double> lev, uni, orc;
    for (auto seed : c.seeds)
        for (const auto& r : harness::run_cell(c, seed, c.budgets.front())) {
            if (r.status != "ok") return {false, "seed " + std::to_string(seed) + ": " + r.evaluator + " " + r.status};
            if (r.evaluator == "lme_leveraged") lev.push_back(r.entrywise_error);
            if (r.evaluator == "cur_uniform_anchors") uni.push_back(r.entrywise_error);
            if (r.evaluator == "cur_oracle_anchors") orc.push_back(r.entrywise_error);
        }
    int wins = 0, losses = 0;
    for (std::size_t i = 0; i < lev.size(); ++i) {
        wins += lev[i] < uni[i];
        losses += lev[i] > uni[i];
    }
    const double p = oracle::binomial_upper_tail(wins + losses, wins);
    const double ratio = median(orc) / median(lev);
    const bool ordering = wins * 10 >= 7 * static_cast<int>(lev.size()) && p < 0.05;
    const bool close = ratio >= 0.5 && ratio <= 2.0;
    return {ordering && close,
            fmt("leveraged beats uniform %d/%zu (p %.2e) [%s]; medians lev %.4g uniform %.4g oracle %.4g, "
                "oracle/lev %.3f [%s]",
                wins, lev.size(), p, ordering ? "ok" : "off", median(lev), median(uni), median(orc), ratio,
                close ? "ok" : "off")};
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

// 9: identical config and seeds give byte-identical CSV output, also across thread counts.
Outcome determinism() {
    const auto root = std::filesystem::temp_directory_path() / ("lora_acceptance_" + std::to_string(::getpid()));
    std::filesystem::remove_all(root);
    int compared = 0;
    std::string mismatched;
    for (const auto& entry : std::filesystem::directory_iterator(kConfigDir)) {
        const auto c = harness::load_config(entry.path());
        std::string first;
        for (int threads : {1, 2, 1}) {
            harness::RunOptions opt;
            opt.out_dir = root / (c.id + "_" + std::to_string(compared++));
            opt.threads = threads;
            if (c.uses_cells()) opt.seeds = std::vector<std::uint64_t>(c.seeds.begin(), c.seeds.begin() + std::min<std::size_t>(3, c.seeds.size()));
            harness::run_experiment(c, opt);
            std::string bytes = slurp(opt.out_dir / "records.csv");
            if (c.kind == harness::ExperimentKind::cond_landscape) bytes += slurp(opt.out_dir / "landscape.csv");
            if (first.empty()) first = std::move(bytes);
            else if (bytes != first && mismatched.find(c.id) == std::string::npos) mismatched += " " + c.id;
        }
    }
    std::filesystem::remove_all(root);
    return {mismatched.empty(), fmt("%d runs over %d configs, mismatches:%s", compared, compared / 3,
                                    mismatched.empty() ? " none" : mismatched.c_str())};
}

struct Criterion {
    const char* name;
    double limit_seconds;
    std::function<Outcome()> run;
};

const std::vector<Criterion> kCriteria = {
    {"toy golden numbers", 1, golden_numbers},
    {"truncation bound", 10, truncation_bound},
    {"weighted CUR exactness", 10, cur_exactness},
    {"rank recovery", 60, rank_recovery},
    {"leverage estimation", 300, leverage_estimation},
    {"LME entrywise accuracy", 600, lme_accuracy},
    {"LoRa-PI end to end", 900, lora_pi_end_to_end},
    {"anchor quality ordering", 600, anchor_ordering},
    {"determinism", 600, determinism},
};

bool run_one(int index) {
    const auto& c = kCriteria[static_cast<std::size_t>(index - 1)];
    const auto start = std::chrono::steady_clock::now();
    Outcome out;
    try {
        out = c.run();
    } catch (const std::exception& e) {
        out = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = secs < c.limit_seconds;
    const bool pass = out.pass && in_time;
    std::printf("criterion %d %s: %s (%.2fs, limit %.0fs%s) %s\n", index, pass ? "PASS" : "FAIL", c.name, secs,
                c.limit_seconds, in_time ? "" : ", over time", out.detail.c_str());
    std::fflush(stdout);
    return pass;
}

}  // namespace

int main(int argc, char** argv) {
    std::vector<int> selected;
    for (int i = 1; i < argc; ++i) {
        const std::string arg = argv[i];
        if (arg == "--criterion" && i + 1 < argc) {
            const int n = std::atoi(argv[++i]);
            if (n < 1 || n > static_cast<int>(kCriteria.size())) {
                std::fprintf(stderr, "unknown criterion %s\n", argv[i]);
                return 2;
            }
            selected.push_back(n);
        } else {
            std::fprintf(stderr, "usage: acceptance [--criterion N]...\n");
            return 2;
        }
    }
    if (selected.empty())
        for (int i = 1; i <= static_cast<int>(kCriteria.size()); ++i) selected.push_back(i);
    bool all = true;
    for (int n : selected) all = run_one(n) && all;
    return all ? 0 : 1;
}
