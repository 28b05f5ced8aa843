#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "config.hpp"

#include "blockpg/blocking.hpp"
#include "blockpg/hmm.hpp"
#include "blockpg/pg_kernel.hpp"
#include "blockpg/schedule.hpp"

namespace blockpg::app {

enum ExitCode : int
{
    kExitOk = 0,
    kExitValidation = 1,
    kExitRuntime = 2,
};

//! Every problem found in the configuration; empty means valid.
struct ValidationReport
{
    std::vector<std::string> problems;
    std::vector<std::string> notes;
    bool ok() const noexcept { return problems.empty(); }
};

ValidationReport validate_config(const ExperimentConfig& cfg);

// ---- invariance ------------------------------------------------------------

struct SiteTest
{
    std::size_t site = 0;  // 1-based
    double statistic = 0.0;
    int df = 0;
    double p_value = 1.0;
    double p_adjusted = 1.0;  // Bonferroni over sites
};

struct InvarianceResult
{
    std::optional<double> residual;  // ||phi P - phi||_1 from the exact operator
    std::string residual_note;
    std::size_t chains = 0;
    std::vector<SiteTest> sites;
    double level = 0.001;
    bool pass = true;
};

/*!
 * Exact fixed-point residual when K^T <= cap (and the PG law is enumerable),
 * and, if chains > 0, a chi-square test per site of one-sweep chains started
 * from exact draws of phi against the smoothing marginals.
 */
InvarianceResult invariance_check(const SmoothingTarget& target, const BlockCover& cover,
                                  const SweepSchedule& schedule, const KernelConfig& kernel, std::size_t chains,
                                  std::uint64_t seed, int threads, double level, std::size_t cap);

// ---- stability -------------------------------------------------------------

struct StabilityRow
{
    std::size_t length = 0;
    std::string kernel;  // "blocked" or "single"
    std::size_t block_size = 0;
    std::size_t overlap = 0;
    std::size_t particles = 0;
    std::size_t num_blocks = 0;
    std::size_t replications = 0;
    std::size_t sweeps = 0;
    double median_acf1 = 0.0;
    double median_acf5 = 0.0;
    double median_update_rate = 0.0;
    std::optional<double> boundary_acf1;
    std::optional<double> interior_acf1;
    std::optional<double> boundary_update_rate;
    std::optional<double> interior_update_rate;
    double seconds = 0.0;  // wall clock, not written to CSV
};

struct StabilitySettings
{
    std::size_t block_size = 10;
    std::size_t overlap = 2;
    std::size_t particles = 20;
    std::size_t sweeps = 1000;
    std::size_t burn_in = 100;
    std::size_t replications = 20;
    std::string schedule = "LR";
    std::uint64_t seed = 1;
    int threads = 1;
};

/*!
 * Blocked PG with a fixed (L, p, N) and single-block PG with the same N,
 * on freshly simulated data for every T and replication. Per-site statistics
 * are averaged over replications; medians are then taken over sites.
 */
std::vector<StabilityRow> stability_study(const HmmModel& model, const std::vector<std::size_t>& lengths,
                                          const StabilitySettings& settings);

// ---- contraction -----------------------------------------------------------

struct ContractionCurve
{
    std::string schedule;
    double alpha = 0.0;
    double lambda = 0.0;        // A1 constant
    double norm = 0.0;          // ||W||_inf of one composed sweep
    double ideal_decay = 0.0;   // lambda^2 (PAR) or beta (L-R)
    double measured_decay = 0.0;
    std::vector<double> tv;               // max over point-mass starts, k = 0..K
    std::vector<double> envelope;         // T lambda^{k-1} ||W||, k >= 1; 1 at k = 0
    std::vector<double> envelope_direct;  // T ||W^k||
};

/*!
 * Exact sweep operators of a micro instance and the Wasserstein envelope
 * built from the strong mixing constants of the same instance.
 */
ContractionCurve contraction_curve(const SmoothingTarget& target, const BlockCover& cover,
                                   const SweepSchedule& schedule, const KernelConfig& kernel, int h,
                                   std::size_t max_sweeps, std::size_t cap);

// ---- subcommands -----------------------------------------------------------

int cmd_validate(const ExperimentConfig& cfg, std::ostream& out);
int cmd_rates(const ExperimentConfig& cfg, std::ostream& out);
int cmd_sample(const ExperimentConfig& cfg, std::ostream& out);
int cmd_invariance(const ExperimentConfig& cfg, std::ostream& out);
int cmd_stability(const ExperimentConfig& cfg, std::ostream& out);
int cmd_contraction(const ExperimentConfig& cfg, std::ostream& out);

/*!
 * Validates first (fail-fast), then runs the named subcommand. Validation
 * problems give exit 1, other errors exit 2; messages go to `err`.
 */
int run_command(const std::string& name, const ExperimentConfig& cfg, std::ostream& out, std::ostream& err);

}  // namespace blockpg::app
