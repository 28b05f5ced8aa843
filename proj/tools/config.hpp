#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "blockpg/blocking.hpp"
#include "blockpg/hmm.hpp"
#include "blockpg/pg_kernel.hpp"
#include "blockpg/schedule.hpp"

namespace blockpg::app {

using json = nlohmann::json;

//! Either (T, L, p) or T with explicit 1-based inclusive blocks.
struct CoverSpec
{
    std::size_t length = 0;
    std::optional<std::size_t> block_size;
    std::optional<std::size_t> overlap;
    std::vector<std::pair<std::size_t, std::size_t>> blocks;

    bool present() const noexcept { return length > 0; }
};

struct KernelSpec
{
    std::string type = "pg";  // "pg" or "ideal"
    std::size_t particles = 20;
    std::string proposal = "bootstrap";
};

/*!
 * One experiment, read from a JSON file. Command line flags override the
 * file; the effective configuration is echoed next to the outputs.
 */
struct ExperimentConfig
{
    std::filesystem::path source;  // config file, empty for in-memory configs
    json model;                    // model object (a "model" path is resolved on load)
    std::optional<std::vector<double>> observations;
    std::optional<std::uint64_t> observation_seed;  // simulate y when no observations are given

    CoverSpec cover;
    std::string schedule = "LR";
    KernelSpec kernel;
    std::size_t sweeps = 1000;
    std::size_t burn_in = 0;
    std::size_t replications = 1;
    std::uint64_t seed = 1;
    int threads = 1;
    std::filesystem::path out = "out";
    bool trace = false;
    std::size_t cap_states = 4096;
    int h = 1;

    // rates
    std::vector<std::size_t> grid_L;
    std::vector<std::size_t> grid_p;
    std::vector<std::size_t> grid_N;
    std::optional<MixingProfile> profile;

    // sample
    std::optional<int> compare_threads;

    // stability
    std::vector<std::size_t> T_grid;

    // contraction
    std::size_t max_sweeps = 10;
    std::vector<std::string> schedules;  // defaults to {schedule}

    // invariance
    std::size_t chains = 0;
    double level = 0.001;

    json to_json() const;
};

//! Parses a config object; relative paths resolve against `base_dir`.
ExperimentConfig parse_config(const json& j, const std::filesystem::path& base_dir = {});

//! Reads and parses a config file; throws ValidationError if unreadable.
ExperimentConfig load_config(const std::filesystem::path& path);

HmmModel model_from_json(const json& j);
json model_to_json(const HmmModel& model);

//! The configured cover; throws ValidationError if absent or malformed.
BlockCover make_cover_from(const CoverSpec& spec);

KernelConfig make_kernel(const KernelSpec& spec);

/*!
 * Observations of length T: the configured ones, or simulated from the
 * model with the observation seed (default: the run seed).
 */
ObservationRecord make_observations(const ExperimentConfig& cfg, const HmmModel& model, std::size_t length);

}  // namespace blockpg::app
