#include "config.hpp"

#include <fstream>
#include <set>

#include "blockpg/error.hpp"

namespace blockpg::app {

namespace fs = std::filesystem;

namespace {

const std::set<std::string> kKnownKeys = {
    "model",   "observations", "observation_seed", "cover",        "schedule",   "kernel",
    "sweeps",  "burn_in",      "replications",     "seed",         "threads",    "out",
    "trace",   "cap_states",   "h",                "rates",        "profile",    "compare_threads",
    "T_grid",  "max_sweeps",   "schedules",        "chains",       "level",
};

template <class T>
T get_or(const json& j, const char* key, T fallback)
{
    if (!j.contains(key))
        return fallback;
    try
    {
        return j.at(key).get<T>();
    }
    catch (const json::exception& e)
    {
        throw ValidationError(std::string("config key '") + key + "': " + e.what());
    }
}

Eigen::VectorXd to_vector(const json& j, const char* what)
{
    if (!j.is_array() || j.empty())
        throw ValidationError(std::string(what) + " must be a non-empty array");
    Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i)
        v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
    return v;
}

Eigen::MatrixXd to_matrix(const json& j, const char* what)
{
    if (!j.is_array() || j.empty() || !j[0].is_array())
        throw ValidationError(std::string(what) + " must be a non-empty array of rows");
    const auto rows = static_cast<Eigen::Index>(j.size());
    const auto cols = static_cast<Eigen::Index>(j[0].size());
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
    {
        const json& row = j[static_cast<std::size_t>(r)];
        if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols)
            throw ValidationError(std::string(what) + " rows must all have the same length");
        for (Eigen::Index c = 0; c < cols; ++c)
            m(r, c) = row[static_cast<std::size_t>(c)].get<double>();
    }
    return m;
}

json matrix_json(const Eigen::MatrixXd& m)
{
    json rows = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r)
    {
        json row = json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c)
            row.push_back(m(r, c));
        rows.push_back(row);
    }
    return rows;
}

std::vector<std::size_t> size_list(const json& j, const char* key)
{
    if (!j.contains(key))
        return {};
    const json& v = j.at(key);
    if (v.is_number_unsigned())
        return {v.get<std::size_t>()};
    return v.get<std::vector<std::size_t>>();
}

}  // namespace

HmmModel model_from_json(const json& j)
{
    try
    {
        if (!j.is_object())
            throw ValidationError("model must be a JSON object");
        Eigen::VectorXd initial = to_vector(j.at("initial"), "initial");
        Eigen::MatrixXd transition = to_matrix(j.at("transition"), "transition");
        const json& e = j.at("emission");
        const std::string type = e.value("type", "discrete");
        if (type == "discrete")
            return HmmModel(std::move(initial), std::move(transition), DiscreteEmission{to_matrix(e.at("table"), "emission table")});
        if (type == "gaussian")
            return HmmModel(std::move(initial), std::move(transition),
                            GaussianEmission{to_vector(e.at("means"), "means"), to_vector(e.at("sds"), "sds")});
        throw ValidationError("unknown emission type '" + type + "'");
    }
    catch (const json::exception& ex)
    {
        throw ValidationError(std::string("malformed model: ") + ex.what());
    }
}

json model_to_json(const HmmModel& model)
{
    json j;
    j["initial"] = std::vector<double>(model.initial().data(), model.initial().data() + model.initial().size());
    j["transition"] = matrix_json(model.transition());
    if (const auto* d = std::get_if<DiscreteEmission>(&model.emission()))
        j["emission"] = {{"type", "discrete"}, {"table", matrix_json(d->table)}};
    else if (const auto* g = std::get_if<GaussianEmission>(&model.emission()))
        j["emission"] = {{"type", "gaussian"},
                         {"means", std::vector<double>(g->means.data(), g->means.data() + g->means.size())},
                         {"sds", std::vector<double>(g->sds.data(), g->sds.data() + g->sds.size())}};
    else
        j["emission"] = {{"type", "custom"}};
    return j;
}

ExperimentConfig parse_config(const json& j, const fs::path& base_dir)
{
    if (!j.is_object())
        throw ValidationError("config must be a JSON object");
    for (const auto& [key, value] : j.items())
        if (!kKnownKeys.count(key))
            throw ValidationError("unknown config key '" + key + "'");

    ExperimentConfig c;
    if (j.contains("model"))
    {
        const json& m = j.at("model");
        if (m.is_string())
        {
            fs::path p = m.get<std::string>();
            if (p.is_relative())
                p = base_dir / p;
            std::ifstream in(p);
            if (!in)
                throw ValidationError("cannot read model file " + p.string());
            try
            {
                c.model = json::parse(in);
            }
            catch (const json::exception& e)
            {
                throw ValidationError("model file " + p.string() + ": " + e.what());
            }
        }
        else
        {
            c.model = m;
        }
    }
    if (j.contains("observations"))
        c.observations = get_or<std::vector<double>>(j, "observations", {});
    if (j.contains("observation_seed"))
        c.observation_seed = get_or<std::uint64_t>(j, "observation_seed", 0);

    if (j.contains("cover"))
    {
        const json& cv = j.at("cover");
        c.cover.length = get_or<std::size_t>(cv, "T", 0);
        if (cv.contains("L"))
            c.cover.block_size = get_or<std::size_t>(cv, "L", 0);
        if (cv.contains("p"))
            c.cover.overlap = get_or<std::size_t>(cv, "p", 0);
        if (cv.contains("blocks"))
            for (const auto& b : cv.at("blocks"))
            {
                if (!b.is_array() || b.size() != 2)
                    throw ValidationError("cover blocks must be [first, last] pairs");
                c.cover.blocks.emplace_back(b[0].get<std::size_t>(), b[1].get<std::size_t>());
            }
        if (c.cover.length == 0)
            throw ValidationError("cover needs T >= 1");
    }

    c.schedule = get_or<std::string>(j, "schedule", c.schedule);
    if (j.contains("kernel"))
    {
        const json& k = j.at("kernel");
        c.kernel.type = get_or<std::string>(k, "type", c.kernel.type);
        c.kernel.particles = get_or<std::size_t>(k, "particles", c.kernel.particles);
        c.kernel.proposal = get_or<std::string>(k, "proposal", c.kernel.proposal);
    }
    c.sweeps = get_or(j, "sweeps", c.sweeps);
    c.burn_in = get_or(j, "burn_in", c.burn_in);
    c.replications = get_or(j, "replications", c.replications);
    c.seed = get_or(j, "seed", c.seed);
    c.threads = get_or(j, "threads", c.threads);
    if (j.contains("out"))
    {
        fs::path p = get_or<std::string>(j, "out", "out");
        c.out = p.is_relative() && !base_dir.empty() ? base_dir / p : p;
    }
    c.trace = get_or(j, "trace", c.trace);
    c.cap_states = get_or(j, "cap_states", c.cap_states);
    c.h = get_or(j, "h", c.h);

    if (j.contains("rates"))
    {
        const json& r = j.at("rates");
        c.grid_L = size_list(r, "L");
        c.grid_p = size_list(r, "p");
        c.grid_N = size_list(r, "N");
    }
    if (j.contains("profile"))
    {
        const json& p = j.at("profile");
        MixingProfile mp;
        mp.sigma_minus = get_or(p, "sigma_minus", mp.sigma_minus);
        mp.sigma_plus = get_or(p, "sigma_plus", mp.sigma_plus);
        mp.delta = get_or(p, "delta", mp.delta);
        mp.h = get_or(p, "h", c.h);
        c.profile = mp;
    }
    if (j.contains("compare_threads"))
        c.compare_threads = get_or<int>(j, "compare_threads", 1);
    c.T_grid = size_list(j, "T_grid");
    c.max_sweeps = get_or(j, "max_sweeps", c.max_sweeps);
    c.schedules = get_or<std::vector<std::string>>(j, "schedules", {});
    c.chains = get_or(j, "chains", c.chains);
    c.level = get_or(j, "level", c.level);
    return c;
}

ExperimentConfig load_config(const fs::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw ValidationError("cannot read config file " + path.string());
    json j;
    try
    {
        j = json::parse(in);
    }
    catch (const json::exception& e)
    {
        throw ValidationError("config file " + path.string() + ": " + e.what());
    }
    ExperimentConfig c = parse_config(j, path.parent_path());
    c.source = path;
    return c;
}

json ExperimentConfig::to_json() const
{
    json j;
    if (!model.is_null())
        j["model"] = model;
    if (observations)
        j["observations"] = *observations;
    if (observation_seed)
        j["observation_seed"] = *observation_seed;
    if (cover.present())
    {
        json cv{{"T", cover.length}};
        if (cover.block_size)
            cv["L"] = *cover.block_size;
        if (cover.overlap)
            cv["p"] = *cover.overlap;
        if (!cover.blocks.empty())
        {
            cv["blocks"] = json::array();
            for (const auto& [a, b] : cover.blocks)
                cv["blocks"].push_back({a, b});
        }
        j["cover"] = cv;
    }
    j["schedule"] = schedule;
    j["kernel"] = {{"type", kernel.type}, {"particles", kernel.particles}, {"proposal", kernel.proposal}};
    j["sweeps"] = sweeps;
    j["burn_in"] = burn_in;
    j["replications"] = replications;
    j["seed"] = seed;
    j["threads"] = threads;
    j["out"] = out.string();
    j["trace"] = trace;
    j["cap_states"] = cap_states;
    j["h"] = h;
    if (!grid_L.empty() || !grid_p.empty() || !grid_N.empty())
        j["rates"] = {{"L", grid_L}, {"p", grid_p}, {"N", grid_N}};
    if (profile)
        j["profile"] = {{"sigma_minus", profile->sigma_minus},
                        {"sigma_plus", profile->sigma_plus},
                        {"delta", profile->delta},
                        {"h", profile->h}};
    if (compare_threads)
        j["compare_threads"] = *compare_threads;
    if (!T_grid.empty())
        j["T_grid"] = T_grid;
    j["max_sweeps"] = max_sweeps;
    if (!schedules.empty())
        j["schedules"] = schedules;
    j["chains"] = chains;
    j["level"] = level;
    return j;
}

BlockCover make_cover_from(const CoverSpec& spec)
{
    if (!spec.present())
        throw ValidationError("config has no cover");
    if (!spec.blocks.empty())
    {
        std::vector<Interval> blocks;
        for (const auto& [a, b] : spec.blocks)
        {
            if (a < 1 || b < a || b > spec.length)
                throw ValidationError("block [" + std::to_string(a) + "-" + std::to_string(b)
                                      + "] is not inside 1.." + std::to_string(spec.length));
            blocks.push_back({a - 1, b - 1});
        }
        return make_cover(spec.length, std::move(blocks));
    }
    if (!spec.block_size)
        throw ValidationError("cover needs either L (and p) or explicit blocks");
    return build_cover(spec.length, *spec.block_size, spec.overlap.value_or(0));
}

KernelConfig make_kernel(const KernelSpec& spec)
{
    if (spec.type == "ideal")
        return IdealKernel{};
    if (spec.type != "pg")
        throw ValidationError("kernel type must be 'pg' or 'ideal', got '" + spec.type + "'");
    if (spec.proposal != "bootstrap")
        throw ValidationError("only the bootstrap proposal can be configured from a file");
    if (spec.particles < 2)
        throw ValidationError("particle Gibbs needs N >= 2");
    return PgKernel{spec.particles, ProposalKernel::bootstrap()};
}

ObservationRecord make_observations(const ExperimentConfig& cfg, const HmmModel& model, std::size_t length)
{
    if (cfg.observations)
    {
        if (cfg.observations->size() != length)
            throw ValidationError("config has " + std::to_string(cfg.observations->size())
                                  + " observations but T = " + std::to_string(length));
        return ObservationRecord(*cfg.observations);
    }
    StreamRng rng(cfg.observation_seed.value_or(cfg.seed), 0x0b5, length);
    return ObservationRecord(simulate(model, length, rng).observations);
}

}  // namespace blockpg::app
