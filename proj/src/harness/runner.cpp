#include "lora/harness/runner.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <condition_variable>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "lora/error.hpp"
#include "lora/harness/summary.hpp"
#include "lora/mdp_io.hpp"

namespace lora::harness {

using linalg::DenseMatrix;
using linalg::Vector;

namespace {

constexpr std::uint64_t kPolicyTag = 7;
constexpr std::uint64_t kInstanceTag = 11;

std::uint64_t name_tag(std::string_view name) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : name) h = (h ^ c) * 0x100000001b3ULL;
    return h;
}

std::string evaluator_label(const algo::EvaluatorSpec& spec) {
    std::string name(algo::evaluator_name(spec.kind));
    if (spec.kind == algo::EvaluatorKind::cur_oracle_anchors && spec.oracle_top_k) name += "_top_k";
    return name;
}

ExperimentRecord base_record(const ExperimentConfig& c, const algo::EvaluatorSpec& spec, std::uint64_t seed,
                             std::uint64_t budget) {
    ExperimentRecord r;
    r.experiment = c.id;
    r.evaluator = evaluator_label(spec);
    r.seed = seed;
    r.budget = budget;
    return r;
}

void mark_infeasible(ExperimentRecord& r, const InfeasibleBudget& e) {
    r.status = "infeasible";
    r.warnings = join_warnings({"minimal_budget=" + std::to_string(e.minimal_budget())});
}

void mark_failed(ExperimentRecord& r, const std::exception& e) {
    r.status = "failed";
    r.warnings = join_warnings({e.what()});
}

void fill_from_evaluation(ExperimentRecord& r, const algo::Evaluation& ev, const DenseMatrix& truth) {
    const DenseMatrix diff = ev.q_hat - truth;
    r.entrywise_error = linalg::max_abs(diff);
    r.frobenius_error = linalg::frobenius(diff);
    r.consumed = ev.consumed;
    r.d_hat = ev.rank;
    r.anchor_rows = ev.anchor_rows;
    r.anchor_cols = ev.anchor_cols;
    r.warnings = join_warnings(ev.warnings);
}

std::vector<ExperimentRecord> matrix_cell(const ExperimentConfig& c, std::uint64_t seed, std::uint64_t budget) {
    mdp::MatrixSpec spec = c.matrix;
    if (c.vary_instance) spec.seed = derive_seed(c.matrix.seed, {kInstanceTag, seed});
    const DenseMatrix target = mdp::generate_lowrank_matrix(spec);
    const double cond = linalg::condition_number(target);
    const lme::MatrixOracle oracle(target, c.matrix_noise);
    std::vector<ExperimentRecord> out;
    for (const auto& ev_spec : c.evaluators) {
        ExperimentRecord r = base_record(c, ev_spec, seed, budget);
        r.condition_number = cond;
        try {
            const Rng rng(derive_seed(seed, {budget, name_tag(r.evaluator)}));
            const auto ev = algo::evaluate(oracle, ev_spec, budget, c.delta, 0.0, 1.0, &target, rng);
            fill_from_evaluation(r, ev, target);
        } catch (const InfeasibleBudget& e) {
            mark_infeasible(r, e);
        } catch (const NumericalError& e) {
            mark_failed(r, e);
        }
        out.push_back(std::move(r));
    }
    return out;
}

mdp::DeterministicPolicy target_policy(const ExperimentConfig& c, const mdp::TabularMdp& m, std::uint64_t seed) {
    mdp::DeterministicPolicy p{std::vector<int>(static_cast<std::size_t>(m.states()), 0)};
    if (c.policy == "random") {
        Rng rng(derive_seed(seed, {kPolicyTag}));
        for (auto& a : p.actions) a = static_cast<int>(rng.below(static_cast<std::uint64_t>(m.actions())));
    }
    return p;
}

std::vector<ExperimentRecord> lme_mdp_cell(const ExperimentConfig& c, std::uint64_t seed, std::uint64_t budget) {
    const mdp::TabularMdp m = load_instance(c, seed);
    const auto policy = target_policy(c, m, seed);
    const DenseMatrix truth = mdp::exact_policy_q(m, policy);
    const double cond = linalg::condition_number(truth);
    const lme::RolloutOracle oracle(m, policy);
    std::vector<ExperimentRecord> out;
    for (const auto& ev_spec : c.evaluators) {
        ExperimentRecord r = base_record(c, ev_spec, seed, budget);
        r.condition_number = cond;
        try {
            const Rng rng(derive_seed(seed, {budget, name_tag(r.evaluator)}));
            const auto ev = algo::evaluate(oracle, ev_spec, budget, c.delta, m.gamma(), m.r_max(), &truth, rng);
            fill_from_evaluation(r, ev, truth);
        } catch (const InfeasibleBudget& e) {
            mark_infeasible(r, e);
        } catch (const NumericalError& e) {
            mark_failed(r, e);
        }
        out.push_back(std::move(r));
    }
    return out;
}

std::vector<ExperimentRecord> lora_cell(const ExperimentConfig& c, std::uint64_t seed, std::uint64_t budget) {
    const mdp::TabularMdp m = load_instance(c, seed);
    std::vector<ExperimentRecord> out;
    for (const auto& ev_spec : c.evaluators) {
        algo::LoraConfig lc;
        lc.budget = budget;
        lc.eps = c.eps.value_or(c.eps_fraction.value_or(0.0) * m.value_bound());
        lc.delta = c.delta;
        lc.evaluator = ev_spec;
        lc.schedule = c.schedule;
        lc.max_epochs = c.max_epochs;
        if (c.kind == ExperimentKind::lora_vi && c.v0.size() == static_cast<std::size_t>(m.states()))
            lc.initial_value = Eigen::Map<const Vector>(c.v0.data(), m.states());
        const ExperimentRecord base = base_record(c, ev_spec, seed, budget);
        try {
            const Rng rng(derive_seed(seed, {budget, name_tag(base.evaluator)}));
            const auto run = c.kind == ExperimentKind::lora_pi ? algo::lora_pi(m, lc, rng) : algo::lora_vi(m, lc, rng);
            for (const auto& log : run.logs) {
                ExperimentRecord r = base;
                r.epoch = log.epoch;
                r.entrywise_error = log.q_error;
                r.frobenius_error = log.q_frobenius;
                r.value_suboptimality = log.value_gap;
                r.condition_number = log.condition_number;
                r.consumed = log.consumed;
                r.d_hat = log.rank;
                r.anchor_rows = log.anchor_rows;
                r.anchor_cols = log.anchor_cols;
                r.warnings = join_warnings(log.warnings);
                out.push_back(std::move(r));
            }
            ExperimentRecord fin = base;
            fin.epoch = static_cast<int>(run.logs.size()) + 1;
            fin.value_suboptimality = run.value_gap;
            fin.consumed = run.consumed;
            if (c.kind == ExperimentKind::lora_pi) {
                const auto bound = algo::check_api_bound(m, run);
                fin.warnings = join_warnings({"api_violations=" + std::to_string(bound.api_violations),
                                              "improvement_violations=" +
                                                  std::to_string(bound.improvement_violations)});
            }
            out.push_back(std::move(fin));
        } catch (const InfeasibleBudget& e) {
            ExperimentRecord r = base;
            mark_infeasible(r, e);
            out.push_back(std::move(r));
        } catch (const NumericalError& e) {
            ExperimentRecord r = base;
            mark_failed(r, e);
            out.push_back(std::move(r));
        }
    }
    return out;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
}

std::string landscape_csv(const std::vector<std::array<double, 3>>& rows) {
    std::string s = "# lora-landscape/1\nv1,v2,condition_number\n";
    for (const auto& r : rows) s += format_number(r[0]) + ',' + format_number(r[1]) + ',' + format_number(r[2]) + '\n';
    return s;
}

// A cell is complete when every evaluator has its terminal row: any row for
// single-shot kinds, the final summary row (or a failure row) for LoRa runs.
bool cell_complete(const ExperimentConfig& c, const std::vector<ExperimentRecord>& rows) {
    std::set<std::string> finished;
    const bool lora = c.kind == ExperimentKind::lora_pi || c.kind == ExperimentKind::lora_vi;
    for (const auto& r : rows)
        if (!lora || r.status != "ok" || std::isnan(r.entrywise_error)) finished.insert(r.evaluator);
    for (const auto& spec : c.evaluators)
        if (!finished.count(evaluator_label(spec))) return false;
    return true;
}

// Completed (seed, budget) keys in an existing CSV and the byte length of the
// prefix to keep; an incomplete trailing cell is dropped.
std::set<std::pair<std::uint64_t, std::uint64_t>> resume_prefix(const ExperimentConfig& c,
                                                                 const std::filesystem::path& path,
                                                                 std::size_t& keep_bytes) {
    std::set<std::pair<std::uint64_t, std::uint64_t>> done;
    keep_bytes = 0;
    std::ifstream in(path, std::ios::binary);
    std::stringstream buf;
    buf << in.rdbuf();
    const std::string text = buf.str();
    const std::string preamble = csv_preamble();
    if (text.compare(0, preamble.size(), preamble) != 0) {
        if (text.empty()) return done;
        throw ConfigError("resume: " + path.string() + " does not carry the expected CSV header");
    }
    std::size_t pos = preamble.size();
    std::size_t cell_start = pos;
    std::pair<std::uint64_t, std::uint64_t> key{};
    std::vector<ExperimentRecord> cell;
    while (pos < text.size()) {
        const std::size_t end = text.find('\n', pos);
        if (end == std::string::npos) break;
        ExperimentRecord r = parse_csv_row(text.substr(pos, end - pos));
        const std::pair row_key{r.seed, r.budget};
        if (!cell.empty() && row_key != key) {
            done.insert(key);
            cell.clear();
            cell_start = pos;
        }
        key = row_key;
        cell.push_back(std::move(r));
        pos = end + 1;
    }
    if (!cell.empty() && cell_complete(c, cell)) {
        done.insert(key);
        keep_bytes = pos;
    } else {
        keep_bytes = cell_start;
    }
    return done;
}

}  // namespace

int thread_count() {
    if (const char* env = std::getenv("LORA_THREADS")) {
        const int n = std::atoi(env);
        if (n >= 1) return n;
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

mdp::TabularMdp load_instance(const ExperimentConfig& c, std::uint64_t seed) {
    switch (c.mdp.kind) {
        case MdpSource::Kind::toy:
            return mdp::load_toy_mdp();
        case MdpSource::Kind::file:
            return mdp::load_mdp(c.mdp.file);
        case MdpSource::Kind::generator: {
            mdp::GeneratorSpec spec = c.mdp.generator;
            if (c.vary_instance) spec.seed = derive_seed(c.mdp.generator.seed, {kInstanceTag, seed});
            return mdp::generate_lowrank_mdp(spec);
        }
    }
    throw ConfigError("unknown mdp source");
}

std::vector<ExperimentRecord> run_cell(const ExperimentConfig& c, std::uint64_t seed, std::uint64_t budget) {
    switch (c.kind) {
        case ExperimentKind::matrix_completion:
            return matrix_cell(c, seed, budget);
        case ExperimentKind::lme_mdp:
            return lme_mdp_cell(c, seed, budget);
        case ExperimentKind::lora_pi:
        case ExperimentKind::lora_vi:
            return lora_cell(c, seed, budget);
        default:
            throw ConfigError("run_cell: experiment kind has no cells");
    }
}

GoldenToy golden_toy(std::span<const double> v0) {
    const mdp::TabularMdp m = mdp::load_toy_mdp();
    if (v0.size() != 2) throw ConfigError("golden_toy: v0 must have two entries");
    GoldenToy g;
    const auto policies = mdp::all_policies(m.states(), m.actions());
    for (std::size_t i = 0; i < policies.size(); ++i)
        g.policy_conditions[i] = linalg::condition_number(mdp::exact_policy_q(m, policies[i]));
    g.v_max = m.value_bound();
    const auto trace = algo::vi_condition_trace(m, Eigen::Map<const Vector>(v0.data(), 2));
    g.vi_max_condition = trace.max_condition();
    g.vi_iterations = trace.iterations;
    return g;
}

nlohmann::json to_json(const GoldenToy& g) {
    return {{"policy_condition_numbers", g.policy_conditions},
            {"v_max", g.v_max},
            {"vi_max_condition_number", g.vi_max_condition},
            {"vi_iterations", g.vi_iterations}};
}

std::vector<std::array<double, 3>> cond_landscape(const mdp::TabularMdp& m, int grid) {
    if (m.states() != 2) throw ConfigError("cond_landscape: needs a 2-state MDP");
    if (grid < 2) throw ConfigError("cond_landscape: grid must be >= 2");
    const double vmax = m.value_bound();
    std::vector<std::array<double, 3>> out;
    out.reserve(static_cast<std::size_t>(grid) * grid);
    for (int i = 0; i < grid; ++i) {
        for (int j = 0; j < grid; ++j) {
            const double v1 = -vmax + 2.0 * vmax * i / (grid - 1);
            const double v2 = -vmax + 2.0 * vmax * j / (grid - 1);
            const DenseMatrix f = mdp::f_operator(m, Vector{{v1, v2}});
            out.push_back({v1, v2, linalg::condition_number(f)});
        }
    }
    return out;
}

RunOutcome run_experiment(const ExperimentConfig& config, const RunOptions& options) {
    const auto started = std::chrono::steady_clock::now();
    ExperimentConfig c = config;
    if (options.seeds) c.seeds = *options.seeds;
    std::filesystem::create_directories(options.out_dir);
    write_text(options.out_dir / "config.json", c.raw.dump(2) + "\n");

    RunOutcome outcome;
    outcome.records = options.out_dir / "records.csv";
    outcome.summary = options.out_dir / "summary.json";
    nlohmann::json summary_json;

    if (c.kind == ExperimentKind::toy_golden) {
        const GoldenToy g = golden_toy(c.v0);
        std::string csv = csv_preamble();
        for (std::size_t i = 0; i < g.policy_conditions.size(); ++i) {
            ExperimentRecord r;
            r.experiment = c.id;
            r.evaluator = "policy_" + std::to_string(i);
            r.epoch = static_cast<int>(i);
            r.condition_number = g.policy_conditions[i];
            csv += to_csv_row(r);
        }
        ExperimentRecord vi;
        vi.experiment = c.id;
        vi.evaluator = "vi_trace_max";
        vi.epoch = g.vi_iterations;
        vi.condition_number = g.vi_max_condition;
        vi.value_suboptimality = ExperimentRecord::nan;
        csv += to_csv_row(vi);
        write_text(outcome.records, csv);
        summary_json = {{"golden", to_json(g)}};
    } else if (c.kind == ExperimentKind::cond_landscape) {
        const auto rows = cond_landscape(load_instance(c, c.seeds.front()), c.grid);
        outcome.records = options.out_dir / "landscape.csv";
        write_text(outcome.records, landscape_csv(rows));
        double worst = 0.0;
        for (const auto& r : rows) worst = std::max(worst, r[2]);
        summary_json = {{"grid", c.grid}, {"max_condition_number", worst}};
    } else {
        std::vector<std::pair<std::uint64_t, std::uint64_t>> cells;
        for (auto seed : c.seeds)
            for (auto budget : c.budgets) cells.emplace_back(seed, budget);
        outcome.cells = cells.size();

        std::size_t keep = 0;
        std::set<std::pair<std::uint64_t, std::uint64_t>> done;
        if (std::filesystem::exists(outcome.records)) {
            done = resume_prefix(c, outcome.records, keep);
            std::filesystem::resize_file(outcome.records, keep);
        }
        if (keep == 0) write_text(outcome.records, csv_preamble());

        std::vector<std::size_t> pending;
        for (std::size_t i = 0; i < cells.size(); ++i)
            if (!done.count(cells[i])) pending.push_back(i);
        outcome.skipped = cells.size() - pending.size();

        std::vector<std::optional<std::vector<ExperimentRecord>>> results(pending.size());
        std::exception_ptr error;
        std::mutex mu;
        std::condition_variable cv;
        std::atomic<std::size_t> next{0};
        auto worker = [&] {
            for (;;) {
                const std::size_t k = next.fetch_add(1);
                if (k >= pending.size()) return;
                std::vector<ExperimentRecord> rows;
                std::exception_ptr err;
                try {
                    const auto& [seed, budget] = cells[pending[k]];
                    rows = run_cell(c, seed, budget);
                } catch (...) {
                    err = std::current_exception();
                }
                std::lock_guard lock(mu);
                if (err && !error) error = err;
                results[k] = std::move(rows);
                cv.notify_all();
            }
        };
        const int threads = std::max(1, std::min<int>(options.threads > 0 ? options.threads : thread_count(),
                                                      static_cast<int>(std::max<std::size_t>(pending.size(), 1))));
        std::vector<std::jthread> pool;
        for (int t = 0; t < threads; ++t) pool.emplace_back(worker);

        std::ofstream csv(outcome.records, std::ios::binary | std::ios::app);
        for (std::size_t k = 0; k < pending.size(); ++k) {
            std::unique_lock lock(mu);
            cv.wait(lock, [&] { return results[k].has_value() || error; });
            if (error) break;
            const auto rows = std::move(*results[k]);
            results[k].reset();
            lock.unlock();
            std::string block;
            for (const auto& r : rows) {
                if (r.status == "infeasible") ++outcome.infeasible;
                if (r.status == "failed") ++outcome.failed;
                block += to_csv_row(r);
            }
            csv << block;
            csv.flush();
        }
        next.store(pending.size());
        pool.clear();
        if (error) std::rethrow_exception(error);
        csv.close();

        const auto records = read_records(outcome.records);
        summary_json = to_json(summarize(records));
    }

    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    summary_json["experiment"] = c.id;
    summary_json["kind"] = std::string(kind_name(c.kind));
    summary_json["wall_time_seconds"] = wall;
    write_text(outcome.summary, summary_json.dump(2) + "\n");
    return outcome;
}

}  // namespace lora::harness
