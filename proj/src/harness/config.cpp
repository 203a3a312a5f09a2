#include "lora/harness/config.hpp"

#include <array>
#include <cmath>
#include <fstream>
#include <sstream>

#include "lora/error.hpp"
#include "lora/mdp_io.hpp"

namespace lora::harness {

using nlohmann::json;

namespace {

constexpr std::array<std::pair<ExperimentKind, std::string_view>, 6> kKinds{{
    {ExperimentKind::matrix_completion, "matrix_completion"},
    {ExperimentKind::lme_mdp, "lme_mdp"},
    {ExperimentKind::lora_pi, "lora_pi"},
    {ExperimentKind::lora_vi, "lora_vi"},
    {ExperimentKind::cond_landscape, "cond_landscape"},
    {ExperimentKind::toy_golden, "toy_golden"},
}};

ExperimentKind parse_kind(const std::string& name) {
    for (const auto& [k, n] : kKinds)
        if (n == name) return k;
    throw ConfigError("config: unknown kind '" + name + "'");
}

template <class T>
T get(const json& j, const char* key, T fallback) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: bad value for '") + key + "': " + e.what());
    }
}

std::vector<std::uint64_t> uint_list(const json& j, const char* key) {
    std::vector<std::uint64_t> out;
    if (!j.contains(key)) return out;
    if (!j.at(key).is_array()) throw ConfigError(std::string("config: '") + key + "' must be an array");
    for (const auto& v : j.at(key)) {
        if (v.is_number_unsigned()) {
            out.push_back(v.get<std::uint64_t>());
        } else if (v.is_number() && v.get<double>() >= 0.0 && v.get<double>() == std::floor(v.get<double>())) {
            out.push_back(static_cast<std::uint64_t>(v.get<double>()));  // allows 1e7
        } else {
            throw ConfigError(std::string("config: '") + key + "' entries must be non-negative integers");
        }
    }
    return out;
}

mdp::GeneratorSpec parse_generator(const json& g) {
    mdp::GeneratorSpec s;
    s.states = get(g, "states", s.states);
    s.actions = get(g, "actions", s.actions);
    s.rank = get(g, "rank", s.rank);
    s.gamma = get(g, "gamma", s.gamma);
    s.r_max = get(g, "r_max", s.r_max);
    if (g.contains("noise")) s.noise = mdp::noise_from_json(g.at("noise"));
    s.state_concentration = get(g, "state_concentration", s.state_concentration);
    s.action_concentration = get(g, "action_concentration", s.action_concentration);
    s.base_concentration = get(g, "base_concentration", s.base_concentration);
    s.approx_noise = get(g, "approx_noise", s.approx_noise);
    s.seed = get<std::uint64_t>(g, "seed", s.seed);
    return s;
}

algo::EvaluatorSpec parse_evaluator_entry(const json& e, const algo::EvaluatorSpec& base) {
    algo::EvaluatorSpec spec = base;
    if (e.is_string()) {
        spec.kind = algo::parse_evaluator(e.get<std::string>());
    } else if (e.is_object()) {
        spec.kind = algo::parse_evaluator(get<std::string>(e, "kind", ""));
        spec.oracle_top_k = get(e, "top_k", spec.oracle_top_k);
        if (e.contains("anchors")) spec.anchors = get<int>(e, "anchors", 0);
    } else {
        throw ConfigError("config: evaluator entries must be names or objects");
    }
    return spec;
}

}  // namespace

std::string_view kind_name(ExperimentKind kind) {
    for (const auto& [k, n] : kKinds)
        if (k == kind) return n;
    return "unknown";
}

ExperimentConfig parse_config(const json& j) {
    if (!j.is_object()) throw ConfigError("config: top level must be an object");
    ExperimentConfig c;
    c.raw = j;
    c.id = get<std::string>(j, "id", c.id);
    if (c.id.empty() || c.id.find_first_of("/\\,") != std::string::npos)
        throw ConfigError("config: 'id' must be non-empty without '/', '\\' or ','");
    if (!j.contains("kind")) throw ConfigError("config: missing 'kind'");
    c.kind = parse_kind(get<std::string>(j, "kind", ""));

    c.seeds = uint_list(j, "seeds");
    if (c.seeds.empty()) c.seeds.push_back(0);
    c.budgets = uint_list(j, "budgets");
    if (c.uses_cells()) {
        if (c.budgets.empty()) throw ConfigError("config: 'budgets' must list at least one budget");
        for (std::size_t i = 1; i < c.budgets.size(); ++i)
            if (c.budgets[i] <= c.budgets[i - 1]) throw ConfigError("config: 'budgets' must be strictly increasing");
    }

    if (j.contains("mdp")) {
        const json& m = j.at("mdp");
        if (m.contains("file")) {
            c.mdp.kind = MdpSource::Kind::file;
            c.mdp.file = get<std::string>(m, "file", "");
        } else if (m.contains("generator")) {
            c.mdp.kind = MdpSource::Kind::generator;
            c.mdp.generator = parse_generator(m.at("generator"));
        } else if (get(m, "toy", false)) {
            c.mdp.kind = MdpSource::Kind::toy;
        } else {
            throw ConfigError("config: 'mdp' needs one of 'toy', 'file', 'generator'");
        }
    }
    if (j.contains("matrix")) {
        const json& m = j.at("matrix");
        c.matrix.rows = get(m, "rows", c.matrix.rows);
        c.matrix.cols = get(m, "cols", c.matrix.cols);
        c.matrix.rank = get(m, "rank", c.matrix.rank);
        c.matrix.spike_rows = get(m, "spike_rows", c.matrix.spike_rows);
        c.matrix.spike_scale = get(m, "spike_scale", c.matrix.spike_scale);
        c.matrix.seed = get<std::uint64_t>(m, "seed", c.matrix.seed);
        if (m.contains("noise")) c.matrix_noise = mdp::noise_from_json(m.at("noise"));
    }
    c.vary_instance = get(j, "vary_instance", c.vary_instance);

    algo::EvaluatorSpec base;
    if (j.contains("lme")) {
        const json& l = j.at("lme");
        base.lme.beta_scale = get(l, "beta_scale", base.lme.beta_scale);
        const std::string mode = get<std::string>(l, "anchor_mode", "bernoulli");
        if (mode == "bernoulli") {
            base.lme.anchor_mode = lme::AnchorMode::bernoulli;
        } else if (mode == "fixed_k") {
            base.lme.anchor_mode = lme::AnchorMode::fixed_k;
        } else {
            throw ConfigError("config: unknown anchor_mode '" + mode + "'");
        }
        if (l.contains("anchor_count")) base.lme.anchor_count = get<int>(l, "anchor_count", 0);
        base.lme.pinv_rtol = get(l, "pinv_rtol", base.lme.pinv_rtol);
        if (!(base.lme.beta_scale >= 0.0)) throw ConfigError("config: beta_scale must be >= 0");
        if (!(base.lme.pinv_rtol > 0.0)) throw ConfigError("config: pinv_rtol must be positive");
    }
    if (j.contains("rank")) base.rank = get<int>(j, "rank", 0);
    if (j.contains("anchors")) base.anchors = get<int>(j, "anchors", 0);
    if (j.contains("evaluators")) {
        if (!j.at("evaluators").is_array()) throw ConfigError("config: 'evaluators' must be an array");
        for (const auto& e : j.at("evaluators")) c.evaluators.push_back(parse_evaluator_entry(e, base));
    }
    if (c.evaluators.empty()) c.evaluators.push_back(base);

    c.delta = get(j, "delta", c.delta);
    if (!(c.delta > 0.0 && c.delta < 1.0)) throw ConfigError("config: delta must lie in (0, 1)");
    if (j.contains("eps")) c.eps = get(j, "eps", 0.0);
    if (j.contains("eps_fraction")) c.eps_fraction = get(j, "eps_fraction", 0.0);
    if ((c.kind == ExperimentKind::lora_pi || c.kind == ExperimentKind::lora_vi) && !c.eps && !c.eps_fraction)
        throw ConfigError("config: lora runs need 'eps' or 'eps_fraction'");
    if (j.contains("schedule")) {
        const json& s = j.at("schedule");
        const std::string kind = get<std::string>(s, "kind", "uniform");
        if (kind == "uniform") {
            c.schedule.kind = algo::BudgetSchedule::Kind::uniform;
        } else if (kind == "geometric") {
            c.schedule.kind = algo::BudgetSchedule::Kind::geometric;
        } else {
            throw ConfigError("config: unknown schedule kind '" + kind + "'");
        }
        c.schedule.base = get(s, "base", c.schedule.base);
        c.schedule.ratio = get(s, "ratio", c.schedule.ratio);
    }
    c.max_epochs = get(j, "max_epochs", c.max_epochs);
    c.policy = get<std::string>(j, "policy", c.policy);
    if (c.policy != "zero" && c.policy != "random") throw ConfigError("config: policy must be 'zero' or 'random'");
    c.grid = get(j, "grid", c.grid);
    if (c.grid < 2) throw ConfigError("config: grid must be >= 2");
    if (j.contains("v0")) c.v0 = get<std::vector<double>>(j, "v0", {});
    return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError("config: " + path.string() + ": " + e.what());
    }
    ExperimentConfig c = parse_config(j);
    if (c.mdp.kind == MdpSource::Kind::file && c.mdp.file.is_relative())
        c.mdp.file = path.parent_path() / c.mdp.file;
    return c;
}

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
    std::vector<std::uint64_t> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        std::size_t pos = 0;
        unsigned long long v = 0;
        try {
            v = std::stoull(item, &pos);
        } catch (const std::exception&) {
            throw ConfigError("seeds: '" + item + "' is not an integer");
        }
        if (pos != item.size() || item.front() == '-') throw ConfigError("seeds: '" + item + "' is not an integer");
        out.push_back(v);
    }
    if (out.empty()) throw ConfigError("seeds: empty list");
    return out;
}

}  // namespace lora::harness
