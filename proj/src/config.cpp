#include "marl/config.hpp"

#include "marl/errors.hpp"

#include <cmath>
#include <fstream>
#include <initializer_list>
#include <set>
#include <sstream>

namespace marl {

using nlohmann::json;

namespace {

std::string join_path(const std::string& parent, const std::string& key) {
    return parent.empty() ? key : parent + "." + key;
}

// Parse with duplicate-key detection; nlohmann would silently keep the last.
json parse_strict(std::string_view text) {
    std::vector<std::set<std::string>> keys;
    std::vector<std::string> path;
    std::string pending;
    auto callback = [&](int /*depth*/, json::parse_event_t event, json& parsed) {
        switch (event) {
        case json::parse_event_t::object_start:
            keys.emplace_back();
            path.push_back(pending);
            pending.clear();
            break;
        case json::parse_event_t::object_end:
            keys.pop_back();
            path.pop_back();
            break;
        case json::parse_event_t::key: {
            const std::string key = parsed.get<std::string>();
            if (!keys.back().insert(key).second) {
                std::string where;
                for (const auto& p : path)
                    if (!p.empty()) where = join_path(where, p);
                throw ConfigError("duplicate key '" + join_path(where, key) + "'");
            }
            pending = key;
            break;
        }
        case json::parse_event_t::value:
        case json::parse_event_t::array_end:
            pending.clear();
            break;
        case json::parse_event_t::array_start:
            break;
        }
        return true;
    };
    try {
        return json::parse(text.begin(), text.end(), callback);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("malformed config: ") + e.what());
    }
}

class Section {
public:
    Section(const json& node, std::string path) : node_(node), path_(std::move(path)) {
        if (!node_.is_object()) throw ConfigError("'" + label() + "' must be an object");
    }

    void allow(std::initializer_list<const char*> keys) const {
        for (const auto& [key, value] : node_.items()) {
            bool known = false;
            for (const char* k : keys) known = known || key == k;
            if (!known) throw ConfigError("unknown key '" + join_path(path_, key) + "'");
        }
    }

    bool has(const char* key) const { return node_.contains(key); }
    const json& at(const char* key) const { return node_.at(key); }
    std::string path(const char* key) const { return join_path(path_, key); }

    std::optional<double> number(const char* key) const {
        if (!has(key)) return std::nullopt;
        const json& v = at(key);
        if (!v.is_number()) throw ConfigError("'" + path(key) + "' must be a number");
        const double x = v.get<double>();
        if (!std::isfinite(x)) throw ConfigError("'" + path(key) + "' must be finite");
        return x;
    }

    std::optional<std::int64_t> integer(const char* key) const {
        if (!has(key)) return std::nullopt;
        const json& v = at(key);
        if (!v.is_number_integer()) throw ConfigError("'" + path(key) + "' must be an integer");
        return v.get<std::int64_t>();
    }

    std::optional<std::uint64_t> unsigned_integer(const char* key) const {
        if (!has(key)) return std::nullopt;
        const json& v = at(key);
        if (!v.is_number_unsigned()) throw ConfigError("'" + path(key) + "' must be a non-negative integer");
        return v.get<std::uint64_t>();
    }

    std::optional<std::string> string(const char* key) const {
        if (!has(key)) return std::nullopt;
        const json& v = at(key);
        if (!v.is_string()) throw ConfigError("'" + path(key) + "' must be a string");
        return v.get<std::string>();
    }

    std::optional<Section> child(const char* key) const {
        if (!has(key)) return std::nullopt;
        return Section(at(key), path(key));
    }

private:
    std::string label() const { return path_.empty() ? "config" : path_; }

    const json& node_;
    std::string path_;
};

void require(bool ok, const std::string& message) {
    if (!ok) throw ConfigError(message);
}

int positive_int(const Section& s, const char* key, int fallback) {
    const auto v = s.integer(key);
    if (!v) return fallback;
    require(*v >= 1 && *v <= 1000000, "'" + s.path(key) + "' must be a positive integer");
    return static_cast<int>(*v);
}

double positive_number(const Section& s, const char* key, double fallback) {
    const auto v = s.number(key);
    if (!v) return fallback;
    require(*v > 0.0, "'" + s.path(key) + "' must be positive");
    return *v;
}

EnvironmentConfig parse_environment(const Section& s) {
    EnvironmentConfig env;
    const std::string type = s.string("type").value_or("grid");
    if (type == "grid") {
        s.allow({"type", "side", "agents", "reward_scale", "reward_cells"});
        GridWorldSpec spec;
        spec.side = positive_int(s, "side", 2);
        spec.num_agents = positive_int(s, "agents", 2);
        spec.reward_scale = positive_number(s, "reward_scale", 10.0);
        if (s.has("reward_cells")) {
            const json& cells = s.at("reward_cells");
            require(cells.is_array(), "'" + s.path("reward_cells") + "' must be an array");
            for (std::size_t k = 0; k < cells.size(); ++k) {
                const Section cell(cells[k], s.path("reward_cells") + "[" + std::to_string(k) + "]");
                cell.allow({"row", "col", "rewards"});
                RewardCell rc;
                const auto row = cell.integer("row");
                const auto col = cell.integer("col");
                require(row && col, "'" + cell.path("row") + "' and 'col' are required");
                require(*row >= 0 && *row < spec.side && *col >= 0 && *col < spec.side,
                        "reward cell at '" + cell.path("row") + "' lies outside the grid");
                rc.row = static_cast<int>(*row);
                rc.col = static_cast<int>(*col);
                require(cell.has("rewards") && cell.at("rewards").is_array(),
                        "'" + cell.path("rewards") + "' must be an array");
                for (const auto& r : cell.at("rewards")) {
                    require(r.is_number(), "'" + cell.path("rewards") + "' must hold numbers");
                    rc.rewards.push_back(r.get<double>());
                }
                require(static_cast<int>(rc.rewards.size()) == spec.num_agents,
                        "'" + cell.path("rewards") + "' needs one entry per agent");
                for (double r : rc.rewards)
                    require(r >= 0.0 && r <= spec.reward_scale,
                            "'" + cell.path("rewards") + "' entries must lie in [0, reward_scale]");
                spec.reward_cells.push_back(std::move(rc));
            }
        } else {
            require(spec.num_agents == 2, "'" + s.path("reward_cells") + "' is required unless agents = 2");
            spec.reward_cells = GridWorldSpec::cooperative_navigation(spec.side).reward_cells;
        }
        env.kind = EnvironmentKind::grid;
        env.grid = std::move(spec);
    } else if (type == "random") {
        s.allow({"type", "states", "agents", "actions_per_agent", "seed"});
        env.kind = EnvironmentKind::random;
        env.states = positive_int(s, "states", 4);
        env.agents = positive_int(s, "agents", 2);
        env.actions_per_agent = positive_int(s, "actions_per_agent", 2);
        env.seed = s.unsigned_integer("seed").value_or(0);
    } else {
        throw ConfigError("'" + s.path("type") + "' must be \"grid\" or \"random\"");
    }
    return env;
}

NetworkConfig parse_network(const Section& s) {
    s.allow({"model", "p", "B", "edge_sets", "seed"});
    NetworkConfig net;
    const std::string model = s.string("model").value_or("ring");
    if (model == "ring") net.model = GraphModel::ring;
    else if (model == "complete") net.model = GraphModel::complete;
    else if (model == "periodic") net.model = GraphModel::periodic;
    else if (model == "erdos_renyi") net.model = GraphModel::erdos_renyi;
    else throw ConfigError("'" + s.path("model") + "' must be one of ring, complete, periodic, erdos_renyi");

    if (const auto p = s.number("p")) {
        require(*p > 0.0 && *p <= 1.0, "'" + s.path("p") + "' must lie in (0, 1]");
        net.p = *p;
    }
    net.window = positive_int(s, "B", 1);
    net.seed = s.unsigned_integer("seed");
    if (s.has("edge_sets")) {
        const json& sets = s.at("edge_sets");
        const std::string where = s.path("edge_sets");
        require(sets.is_array(), "'" + where + "' must be an array of edge lists");
        for (const auto& set : sets) {
            require(set.is_array(), "'" + where + "' must be an array of edge lists");
            EdgeSet edges;
            for (const auto& e : set) {
                require(e.is_array() && e.size() == 2 && e[0].is_number_integer() && e[1].is_number_integer(),
                        "'" + where + "' edges must be [i, j] integer pairs");
                edges.emplace_back(e[0].get<int>(), e[1].get<int>());
            }
            net.edge_sets.push_back(std::move(edges));
        }
    }
    require(net.model != GraphModel::periodic || !net.edge_sets.empty(),
            "'" + s.path("edge_sets") + "' is required for the periodic model");
    return net;
}

AlgorithmConfig parse_algorithm(const Section& s) {
    s.allow({"name", "T", "beta", "alpha", "t_mix", "tau", "alpha_rule", "M", "sampling"});
    AlgorithmConfig alg;
    const std::string name = s.string("name").value_or("rmapd");
    if (name == "rmapd") alg.name = AlgorithmName::rmapd;
    else if (name == "cspd") alg.name = AlgorithmName::cspd;
    else if (name == "iavi") alg.name = AlgorithmName::iavi;
    else if (name == "lp") alg.name = AlgorithmName::lp;
    else if (name == "meta") alg.name = AlgorithmName::meta;
    else throw ConfigError("'" + s.path("name") + "' must be one of rmapd, cspd, iavi, lp, meta");

    alg.t_mix = positive_number(s, "t_mix", 1.0);
    if (const auto tau = s.number("tau")) {
        require(*tau >= 1.0, "tau must be >= 1");
        alg.tau = *tau;
    }
    if (const auto t = s.integer("T")) {
        require(*t >= 1, "'" + s.path("T") + "' must be a positive integer");
        alg.overrides.iterations = *t;
    }
    if (s.has("beta")) alg.overrides.beta = positive_number(s, "beta", 0.0);
    if (s.has("alpha")) alg.overrides.alpha = positive_number(s, "alpha", 0.0);
    if (const auto m = s.number("M")) {
        require(*m >= 0.0, "'" + s.path("M") + "' must be non-negative");
        alg.overrides.shift = *m;
    }
    const std::string rule = s.string("alpha_rule").value_or("analysis");
    if (rule == "analysis") alg.overrides.alpha_rule = AlphaRule::analysis;
    else if (rule == "algorithm1") alg.overrides.alpha_rule = AlphaRule::algorithm1;
    else throw ConfigError("'" + s.path("alpha_rule") + "' must be \"analysis\" or \"algorithm1\"");

    const std::string sampling = s.string("sampling").value_or("generative");
    if (sampling == "generative") alg.sampling = SamplingMode::generative;
    else if (sampling == "on_policy") alg.sampling = SamplingMode::on_policy;
    else throw ConfigError("'" + s.path("sampling") + "' must be \"generative\" or \"on_policy\"");
    return alg;
}

MetaConfig parse_meta(const Section& s) {
    s.allow({"epsilon", "delta", "K", "L", "c_L", "start_state"});
    MetaConfig meta;
    meta.epsilon = positive_number(s, "epsilon", meta.epsilon);
    if (const auto d = s.number("delta")) {
        require(*d > 0.0 && *d < 1.0, "'" + s.path("delta") + "' must lie in (0, 1)");
        meta.delta = *d;
    }
    if (s.has("K")) meta.trials = positive_int(s, "K", 1);
    if (const auto l = s.integer("L")) {
        require(*l >= 1, "'" + s.path("L") + "' must be a positive integer");
        meta.horizon = *l;
    }
    meta.horizon_constant = positive_number(s, "c_L", meta.horizon_constant);
    if (const auto st = s.integer("start_state")) {
        require(*st >= 0, "'" + s.path("start_state") + "' must be non-negative");
        meta.start_state = static_cast<int>(*st);
    }
    return meta;
}

OutputConfig parse_output(const Section& s) {
    s.allow({"dir", "stride"});
    OutputConfig out;
    if (const auto dir = s.string("dir")) {
        require(!dir->empty(), "'" + s.path("dir") + "' must not be empty");
        out.dir = *dir;
    }
    if (const auto stride = s.integer("stride")) {
        require(*stride >= 1, "'" + s.path("stride") + "' must be a positive integer");
        out.stride = *stride;
    }
    return out;
}

int environment_states(const EnvironmentConfig& env) {
    if (env.kind == EnvironmentKind::random) return env.states;
    double states = 1.0;
    for (int i = 0; i < env.grid.num_agents; ++i) states *= env.grid.side * env.grid.side;
    return states > 1e6 ? -1 : static_cast<int>(states);
}

} // namespace

RunConfig parse_config(std::string_view text) {
    const json doc = parse_strict(text);
    const Section root(doc, "");
    root.allow({"seed", "environment", "network", "algorithm", "meta", "output"});

    RunConfig config;
    config.seed = root.unsigned_integer("seed").value_or(0);
    if (const auto s = root.child("environment")) config.environment = parse_environment(*s);
    if (const auto s = root.child("network")) config.network = parse_network(*s);
    if (const auto s = root.child("algorithm")) config.algorithm = parse_algorithm(*s);
    if (const auto s = root.child("meta")) config.meta = parse_meta(*s);
    if (const auto s = root.child("output")) config.output = parse_output(*s);

    const int states = environment_states(config.environment);
    require(states > 0, "environment has more than 10^6 joint states");
    require(config.meta.start_state < states, "'meta.start_state' must index a state");
    return config;
}

RunConfig load_config(const std::string& path) {
    std::ifstream file(path, std::ios::binary);
    if (!file) throw ConfigError("cannot open config file " + path);
    std::ostringstream buffer;
    buffer << file.rdbuf();
    return parse_config(buffer.str());
}

std::string to_string(AlgorithmName name) {
    switch (name) {
    case AlgorithmName::rmapd: return "rmapd";
    case AlgorithmName::cspd: return "cspd";
    case AlgorithmName::iavi: return "iavi";
    case AlgorithmName::lp: return "lp";
    case AlgorithmName::meta: return "meta";
    }
    throw InternalError("unknown algorithm name");
}

std::string to_string(GraphModel model) {
    switch (model) {
    case GraphModel::complete: return "complete";
    case GraphModel::ring: return "ring";
    case GraphModel::periodic: return "periodic";
    case GraphModel::erdos_renyi: return "erdos_renyi";
    }
    throw InternalError("unknown graph model");
}

json config_to_json(const RunConfig& c) {
    json env;
    if (c.environment.kind == EnvironmentKind::grid) {
        json cells = json::array();
        for (const auto& cell : c.environment.grid.reward_cells)
            cells.push_back({{"row", cell.row}, {"col", cell.col}, {"rewards", cell.rewards}});
        env = {{"type", "grid"},
               {"side", c.environment.grid.side},
               {"agents", c.environment.grid.num_agents},
               {"reward_scale", c.environment.grid.reward_scale},
               {"reward_cells", cells}};
    } else {
        env = {{"type", "random"},
               {"states", c.environment.states},
               {"agents", c.environment.agents},
               {"actions_per_agent", c.environment.actions_per_agent},
               {"seed", c.environment.seed}};
    }

    json net = {{"model", to_string(c.network.model)}, {"p", c.network.p}, {"B", c.network.window}};
    if (!c.network.edge_sets.empty()) {
        json sets = json::array();
        for (const auto& set : c.network.edge_sets) {
            json edges = json::array();
            for (const auto& [i, j] : set) edges.push_back({i, j});
            sets.push_back(edges);
        }
        net["edge_sets"] = sets;
    }
    if (c.network.seed) net["seed"] = *c.network.seed;

    const auto& o = c.algorithm.overrides;
    json alg = {{"name", to_string(c.algorithm.name)},
                {"t_mix", c.algorithm.t_mix},
                {"tau", c.algorithm.tau},
                {"alpha_rule", o.alpha_rule == AlphaRule::analysis ? "analysis" : "algorithm1"},
                {"sampling", c.algorithm.sampling == SamplingMode::generative ? "generative" : "on_policy"}};
    if (o.iterations) alg["T"] = *o.iterations;
    if (o.beta) alg["beta"] = *o.beta;
    if (o.alpha) alg["alpha"] = *o.alpha;
    if (o.shift) alg["M"] = *o.shift;

    json meta = {{"epsilon", c.meta.epsilon},
                 {"delta", c.meta.delta},
                 {"c_L", c.meta.horizon_constant},
                 {"start_state", c.meta.start_state}};
    if (c.meta.trials) meta["K"] = *c.meta.trials;
    if (c.meta.horizon) meta["L"] = *c.meta.horizon;

    return {{"seed", c.seed},
            {"environment", env},
            {"network", net},
            {"algorithm", alg},
            {"meta", meta},
            {"output", {{"dir", c.output.dir}, {"stride", c.output.stride}}}};
}

TabularMdp build_environment(const EnvironmentConfig& env) {
    if (env.kind == EnvironmentKind::grid) return build_grid_world(env.grid);
    Rng rng(env.seed);
    return random_unichain_mdp(env.states, std::vector<int>(static_cast<std::size_t>(env.agents), env.actions_per_agent),
                               env.agents, rng);
}

GraphSchedule build_schedule(const NetworkConfig& network, int num_agents, std::uint64_t run_seed) {
    switch (network.model) {
    case GraphModel::complete: return GraphSchedule::complete(num_agents);
    case GraphModel::ring: return GraphSchedule::ring(num_agents);
    case GraphModel::periodic: return GraphSchedule::periodic(num_agents, network.edge_sets);
    case GraphModel::erdos_renyi:
        return GraphSchedule::erdos_renyi(num_agents, network.p,
                                          network.seed.value_or(derive_seed(run_seed, 0x6e6574)));
    }
    throw InternalError("unknown graph model");
}

} // namespace marl
