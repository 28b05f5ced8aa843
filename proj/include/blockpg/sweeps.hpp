#pragma once

#include <cstddef>
#include <cstdint>
#include <ostream>
#include <vector>

#include <Eigen/Dense>

#include "blockpg/blocking.hpp"
#include "blockpg/hmm.hpp"
#include "blockpg/pg_kernel.hpp"
#include "blockpg/schedule.hpp"

namespace blockpg {

//! Current Gibbs chain position.
struct ChainState
{
    Trajectory x;
    std::uint64_t sweep_count = 0;
    std::uint64_t seed = 0;
};

struct SweepOptions
{
    int threads = 1;
};

//! Wall-clock of one sweep, per phase in execution order.
struct SweepTiming
{
    double seconds = 0.0;
    std::vector<double> phase_seconds;
};

/*!
 * One complete sweep.
 *
 * Each block update draws from its own stream keyed by
 * (seed, sweep_count, block index) and replaces only x_J. Within a phase,
 * every block reads the trajectory as it was when the phase started, so the
 * result does not depend on the thread count or on the order of blocks in a
 * phase. Parallel and reversible-parallel schedules require a cover
 * satisfying B1 and B2. A reversible pair flips a fair coin (its own
 * stream) to choose the forward or reversed order.
 */
ChainState sweep(const ChainState& chain, const SmoothingTarget& target, const BlockCover& cover,
                 const SweepSchedule& schedule, const KernelConfig& kernel,
                 const SweepOptions& options = {}, SweepTiming* timing = nullptr);

//! sweep() for a ReversiblePair schedule; throws ValidationError for other kinds.
ChainState reversible_sweep(const ChainState& chain, const SmoothingTarget& target, const BlockCover& cover,
                            const SweepSchedule& schedule, const KernelConfig& kernel,
                            const SweepOptions& options = {});

//! Streaming autocorrelation estimate for a fixed set of lags.
class AutocorrelationAccumulator
{
  public:
    explicit AutocorrelationAccumulator(std::vector<std::size_t> lags);

    void push(double v);
    std::size_t count() const noexcept { return n_; }

    //! Sample autocorrelation at lags()[i]; 1 when the series never varies.
    double value(std::size_t i) const;
    const std::vector<std::size_t>& lags() const noexcept { return lags_; }

  private:
    std::vector<std::size_t> lags_;
    std::size_t max_lag_ = 0;
    std::size_t n_ = 0;
    double sum_ = 0.0;
    double sum_sq_ = 0.0;
    std::vector<double> cross_;  // sum x_t x_{t-lag}
    std::vector<double> head_;   // first max_lag values
    std::vector<double> ring_;   // last max_lag values
};

struct CollectorOptions
{
    std::size_t burn_in = 0;
    bool retain_trace = false;
    std::size_t trace_cap = std::size_t{1} << 24;  // stored site values
};

//! Streaming statistics of a chain run.
struct ChainTrace
{
    std::size_t sweeps = 0;
    std::size_t recorded = 0;           // sweeps after burn-in
    std::vector<Trajectory> trace;      // init plus every post-sweep state, if retained
    Eigen::MatrixXd marginal_counts;    // T x K, post burn-in
    std::vector<double> update_rate;    // per site
    std::vector<double> acf1;
    std::vector<double> acf5;
    std::vector<SweepTiming> timings;
    ChainState final_state;
};

ChainTrace run_chain(const SmoothingTarget& target, const BlockCover& cover, const SweepSchedule& schedule,
                     const KernelConfig& kernel, const Trajectory& init, std::size_t sweeps,
                     std::uint64_t seed, const SweepOptions& options = {},
                     const CollectorOptions& collectors = {});

//! Columns sweep,site,value for every retained post-sweep state (sites 1-based).
void write_trace_csv(const ChainTrace& trace, std::ostream& os);

//! Columns site,update_rate,acf1,acf5.
void write_summary_csv(const ChainTrace& trace, std::ostream& os);

}  // namespace blockpg
