#include "lora/harness/summary.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <tuple>

#include "lora/error.hpp"

namespace lora::harness {

namespace {

using RunKey = std::tuple<std::string, std::string, std::uint64_t, std::uint64_t>;  // exp, eval, budget, seed

MetricStats stats(const std::vector<double>& v) {
    MetricStats s;
    s.count = static_cast<std::size_t>(std::count_if(v.begin(), v.end(), [](double x) { return std::isfinite(x); }));
    s.median = median(v);
    s.iqr = quantile(v, 0.75) - quantile(v, 0.25);
    return s;
}

double headline(const ExperimentRecord& r) {
    return std::isfinite(r.entrywise_error) ? r.entrywise_error : r.value_suboptimality;
}

nlohmann::json metric_json(const MetricStats& s) {
    auto num = [](double x) { return std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(nullptr); };
    return {{"count", s.count}, {"median", num(s.median)}, {"iqr", num(s.iqr)}};
}

}  // namespace

double quantile(std::vector<double> values, double q) {
    std::erase_if(values, [](double x) { return !std::isfinite(x); });
    if (values.empty()) return ExperimentRecord::nan;
    std::sort(values.begin(), values.end());
    const double pos = q * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

double median(std::vector<double> values) { return quantile(std::move(values), 0.5); }

double sign_test_p(int wins, int losses) {
    const int n = wins + losses;
    if (n <= 0) return 1.0;
    // Sum of C(n, k) 2^-n for k >= wins, in log space.
    double p = 0.0;
    for (int k = wins; k <= n; ++k)
        p += std::exp(std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0) - n * std::log(2.0));
    return std::min(1.0, p);
}

Summary summarize(std::span<const ExperimentRecord> records) {
    if (records.empty()) throw ConfigError("summarize: no records");
    // Final row of each run: the highest epoch.
    std::map<RunKey, const ExperimentRecord*> last;
    for (const auto& r : records) {
        const RunKey key{r.experiment, r.evaluator, r.budget, r.seed};
        auto [it, inserted] = last.emplace(key, &r);
        if (!inserted && r.epoch >= it->second->epoch) it->second = &r;
    }

    Summary out;
    std::map<std::tuple<std::string, std::string, std::uint64_t>, std::vector<const ExperimentRecord*>> cells;
    for (const auto& [key, r] : last) cells[{std::get<0>(key), std::get<1>(key), std::get<2>(key)}].push_back(r);
    for (const auto& [key, rows] : cells) {
        CellSummary c;
        c.experiment = std::get<0>(key);
        c.evaluator = std::get<1>(key);
        c.budget = std::get<2>(key);
        std::vector<double> e, f, g;
        for (const auto* r : rows) {
            ++c.runs;
            if (r->status != "ok") {
                ++c.failed;
                continue;
            }
            e.push_back(r->entrywise_error);
            f.push_back(r->frobenius_error);
            g.push_back(r->value_suboptimality);
        }
        c.entrywise = stats(e);
        c.frobenius = stats(f);
        c.value_gap = stats(g);
        out.cells.push_back(std::move(c));
    }

    const std::string leveraged = "lme_leveraged";
    std::map<std::tuple<std::string, std::string, std::uint64_t>, SignTest> tests;
    for (const auto& [key, r] : last) {
        const auto& [exp, eval, budget, seed] = key;
        if (eval != leveraged || r->status != "ok") continue;
        for (const auto& [other_key, o] : last) {
            const auto& [oexp, oeval, obudget, oseed] = other_key;
            if (oexp != exp || obudget != budget || oseed != seed || oeval == leveraged || o->status != "ok")
                continue;
            auto& t = tests[{exp, oeval, budget}];
            t.experiment = exp;
            t.first = leveraged;
            t.second = oeval;
            t.budget = budget;
            const double a = headline(*r), b = headline(*o);
            if (!std::isfinite(a) || !std::isfinite(b)) continue;
            if (a < b) {
                ++t.wins;
            } else if (a > b) {
                ++t.losses;
            } else {
                ++t.ties;
            }
        }
    }
    for (auto& [key, t] : tests) {
        t.p_value = sign_test_p(t.wins, t.losses);
        out.tests.push_back(t);
    }
    return out;
}

nlohmann::json to_json(const Summary& s) {
    nlohmann::json cells = nlohmann::json::array();
    for (const auto& c : s.cells)
        cells.push_back({{"experiment", c.experiment},
                         {"evaluator", c.evaluator},
                         {"budget", c.budget},
                         {"runs", c.runs},
                         {"failed", c.failed},
                         {"entrywise_error", metric_json(c.entrywise)},
                         {"frobenius_error", metric_json(c.frobenius)},
                         {"value_suboptimality", metric_json(c.value_gap)}});
    nlohmann::json tests = nlohmann::json::array();
    for (const auto& t : s.tests)
        tests.push_back({{"experiment", t.experiment},
                         {"first", t.first},
                         {"second", t.second},
                         {"budget", t.budget},
                         {"wins", t.wins},
                         {"losses", t.losses},
                         {"ties", t.ties},
                         {"p_value", t.p_value}});
    return {{"cells", cells}, {"sign_tests", tests}};
}

}  // namespace lora::harness
