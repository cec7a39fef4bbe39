#include "ewa/config.hpp"

#include <fstream>
#include <set>

#include "ewa/error.hpp"

namespace ewa {

using nlohmann::json;

namespace {

void require_keys(const json& obj, const std::string& where, std::initializer_list<const char*> allowed) {
    if (!obj.is_object()) throw ConfigError("config: '" + where + "' must be an object");
    const std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& [key, _] : obj.items())
        if (!ok.count(key)) throw ConfigError("config: unknown key '" + key + "' in " + where);
}

template <typename T>
void read(const json& obj, const char* key, T& out) {
    if (obj.contains(key) && !obj.at(key).is_null()) out = obj.at(key).get<T>();
}

template <typename T>
void read_opt(const json& obj, const char* key, std::optional<T>& out) {
    if (!obj.contains(key)) return;
    if (obj.at(key).is_null())
        out.reset();
    else
        out = obj.at(key).get<T>();
}

template <typename T>
json opt_json(const std::optional<T>& v) {
    return v ? json(*v) : json(nullptr);
}

void parse_sampler(const json& s, SamplerConfig& out) {
    require_keys(s, "sampler",
                 {"algorithm", "parametrization", "step_size", "n_iters", "burn_in", "thin", "n_chains", "seed",
                  "init", "init_vector", "adapt", "max_halvings"});
    if (s.contains("algorithm")) out.algorithm = parse_algorithm(s.at("algorithm").get<std::string>());
    if (s.contains("parametrization"))
        out.parametrization = parse_parametrization(s.at("parametrization").get<std::string>());
    read_opt(s, "step_size", out.step_size);
    read(s, "n_iters", out.n_iters);
    read_opt(s, "burn_in", out.burn_in);
    read(s, "thin", out.thin);
    read(s, "n_chains", out.n_chains);
    read(s, "seed", out.seed);
    if (s.contains("init")) out.init = parse_init_kind(s.at("init").get<std::string>());
    if (s.contains("init_vector")) {
        const auto v = s.at("init_vector").get<std::vector<double>>();
        out.init_vector = Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
    }
    read(s, "adapt", out.adapt);
    read(s, "max_halvings", out.max_halvings);
}

}  // namespace

ExperimentConfig parse_experiment_config(const json& doc) {
    try {
        require_keys(doc, "top level",
                     {"seed", "family", "cells", "design", "truth", "replications", "epsilon", "sampler", "overrides",
                      "report"});
        ExperimentConfig cfg;
        read(doc, "seed", cfg.seed);
        if (doc.contains("family")) {
            const json& f = doc.at("family");
            require_keys(f, "family", {"kind", "scale", "theta_lo", "theta_hi"});
            if (f.contains("kind")) cfg.family.kind = parse_family_kind(f.at("kind").get<std::string>());
            read(f, "scale", cfg.family.scale);
            read_opt(f, "theta_lo", cfg.family.theta_lo);
            read_opt(f, "theta_hi", cfg.family.theta_hi);
        }
        if (doc.contains("cells")) {
            const json& c = doc.at("cells");
            require_keys(c, "cells", {"n", "p", "p0"});
            read(c, "n", cfg.n_list);
            read(c, "p", cfg.p_list);
            read(c, "p0", cfg.p0_list);
        }
        if (doc.contains("design")) {
            const json& d = doc.at("design");
            require_keys(d, "design", {"kind", "rho"});
            if (d.contains("kind")) cfg.design.kind = parse_design_kind(d.at("kind").get<std::string>());
            read(d, "rho", cfg.design.rho);
        }
        if (doc.contains("truth")) {
            const json& t = doc.at("truth");
            require_keys(t, "truth", {"kind", "amplitude", "decay", "bump"});
            if (t.contains("kind")) cfg.truth.kind = parse_truth_kind(t.at("kind").get<std::string>());
            read(t, "amplitude", cfg.truth.amplitude);
            read(t, "decay", cfg.truth.decay);
            read(t, "bump", cfg.truth.bump);
        }
        read(doc, "replications", cfg.n_replications);
        read(doc, "epsilon", cfg.epsilon_list);
        if (doc.contains("sampler")) parse_sampler(doc.at("sampler"), cfg.sampler);
        if (doc.contains("overrides")) {
            const json& o = doc.at("overrides");
            require_keys(o, "overrides", {"lambda", "zeta", "B1"});
            read_opt(o, "lambda", cfg.lambda);
            read_opt(o, "zeta", cfg.zeta);
            read(o, "B1", cfg.B1);
        }
        if (doc.contains("report")) {
            const json& r = doc.at("report");
            require_keys(r, "report", {"record_wall_time"});
            read(r, "record_wall_time", cfg.record_wall_time);
        }
        cfg.validate();
        return cfg;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file " + path.string());
    json doc;
    try {
        doc = json::parse(in, nullptr, true, /*ignore_comments=*/true);
    } catch (const json::parse_error& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    return parse_experiment_config(doc);
}

json to_json(const ExperimentConfig& cfg) {
    const SamplerConfig& s = cfg.sampler;
    json j;
    j["seed"] = cfg.seed;
    j["family"] = {{"kind", std::string(to_string(cfg.family.kind))},
                   {"scale", cfg.family.scale},
                   {"theta_lo", opt_json(cfg.family.theta_lo)},
                   {"theta_hi", opt_json(cfg.family.theta_hi)}};
    j["cells"] = {{"n", cfg.n_list}, {"p", cfg.p_list}, {"p0", cfg.p0_list}};
    j["design"] = {{"kind", std::string(to_string(cfg.design.kind))}, {"rho", cfg.design.rho}};
    j["truth"] = {{"kind", std::string(to_string(cfg.truth.kind))},
                  {"amplitude", cfg.truth.amplitude},
                  {"decay", cfg.truth.decay},
                  {"bump", cfg.truth.bump}};
    j["replications"] = cfg.n_replications;
    j["epsilon"] = cfg.epsilon_list;
    j["sampler"] = {{"algorithm", std::string(to_string(s.algorithm))},
                    {"parametrization", std::string(to_string(s.parametrization))},
                    {"step_size", opt_json(s.step_size)},
                    {"n_iters", s.n_iters},
                    {"burn_in", s.burn_in_iters()},
                    {"thin", s.thin},
                    {"n_chains", s.n_chains},
                    {"seed", s.seed},
                    {"init", std::string(to_string(s.init))},
                    {"init_vector", std::vector<double>(s.init_vector.data(), s.init_vector.data() + s.init_vector.size())},
                    {"adapt", s.adapt},
                    {"max_halvings", s.max_halvings}};
    j["overrides"] = {{"lambda", opt_json(cfg.lambda)}, {"zeta", opt_json(cfg.zeta)}, {"B1", cfg.B1}};
    j["report"] = {{"record_wall_time", cfg.record_wall_time}};
    return j;
}

}  // namespace ewa
