#include "blockpg/sweeps.hpp"

#include <algorithm>
#include <chrono>
#include <exception>
#include <mutex>

#include "blockpg/exact.hpp"

namespace blockpg {

namespace {

using Clock = std::chrono::steady_clock;

std::vector<State> update_block(const SmoothingTarget& target, std::span<const State> snapshot,
                                const Interval& block, const KernelConfig& kernel, StreamRng& rng)
{
    if (const auto* pg = std::get_if<PgKernel>(&kernel))
        return pg_block_step(target, snapshot, block, pg->particles, pg->proposal, rng);
    return sample_block_conditional(target, snapshot, block, rng);
}

void run_phase(const std::vector<std::size_t>& blocks, Trajectory& x, const ChainState& chain,
               const SmoothingTarget& target, const BlockCover& cover, const KernelConfig& kernel,
               int threads)
{
    const Trajectory snapshot = x;
    std::exception_ptr failure;
    std::mutex failure_mutex;
    const auto count = static_cast<long>(blocks.size());

#pragma omp parallel for num_threads(std::max(threads, 1)) schedule(dynamic, 1) if (threads > 1 && count > 1)
    for (long j = 0; j < count; ++j)
    {
        try
        {
            const std::size_t k = blocks[static_cast<std::size_t>(j)];
            const Interval& b = cover.blocks[k];
            StreamRng rng(chain.seed, chain.sweep_count, k);
            const auto fresh = update_block(target, snapshot, b, kernel, rng);
            std::copy(fresh.begin(), fresh.end(), x.begin() + static_cast<std::ptrdiff_t>(b.first));
        }
        catch (...)
        {
            std::lock_guard lock(failure_mutex);
            if (!failure)
                failure = std::current_exception();
        }
    }
    if (failure)
        std::rethrow_exception(failure);
}

void check_inputs(const ChainState& chain, const SmoothingTarget& target, const BlockCover& cover,
                  const SweepSchedule& schedule)
{
    if (chain.x.size() != target.length() || cover.length != target.length())
        throw ValidationError("chain, cover and observations disagree on the sequence length");
    for (State s : chain.x)
        if (s < 0 || s >= target.num_states())
            throw ValidationError("chain state contains a value outside the state space");
    if (schedule.base == ScheduleKind::Parallel)
    {
        require_ordered_cover(cover);
    }
    else
    {
        for (const auto& v : validate_cover(cover))
            if (v.assumption == CoverAssumption::Cover)
                throw ValidationError("invalid cover: " + v.message);
    }
    for (const auto& phase : schedule.phases)
        for (std::size_t k : phase)
            if (k >= cover.blocks.size())
                throw ValidationError("schedule names a block outside the cover");
}

}  // namespace

ChainState sweep(const ChainState& chain, const SmoothingTarget& target, const BlockCover& cover,
                 const SweepSchedule& schedule, const KernelConfig& kernel, const SweepOptions& options,
                 SweepTiming* timing)
{
    check_inputs(chain, target, cover, schedule);
    bool reversed = false;
    if (schedule.kind == ScheduleKind::ReversiblePair)
    {
        StreamRng coin(chain.seed, chain.sweep_count, cover.blocks.size());
        reversed = coin.uniform() < 0.5;
    }
    const auto& phases = reversed ? schedule.reverse_phases : schedule.phases;

    ChainState next = chain;
    const auto start = Clock::now();
    if (timing)
        timing->phase_seconds.clear();
    for (const auto& phase : phases)
    {
        const auto phase_start = Clock::now();
        run_phase(phase, next.x, chain, target, cover, kernel, options.threads);
        if (timing)
            timing->phase_seconds.push_back(std::chrono::duration<double>(Clock::now() - phase_start).count());
    }
    if (timing)
        timing->seconds = std::chrono::duration<double>(Clock::now() - start).count();
    ++next.sweep_count;
    return next;
}

ChainState reversible_sweep(const ChainState& chain, const SmoothingTarget& target, const BlockCover& cover,
                            const SweepSchedule& schedule, const KernelConfig& kernel,
                            const SweepOptions& options)
{
    if (schedule.kind != ScheduleKind::ReversiblePair)
        throw ValidationError("reversible_sweep needs a ReversiblePair schedule");
    return sweep(chain, target, cover, schedule, kernel, options);
}

AutocorrelationAccumulator::AutocorrelationAccumulator(std::vector<std::size_t> lags)
    : lags_(std::move(lags)), cross_(lags_.size(), 0.0)
{
    for (std::size_t l : lags_)
        max_lag_ = std::max(max_lag_, l);
    ring_.assign(max_lag_, 0.0);
}

void AutocorrelationAccumulator::push(double v)
{
    for (std::size_t i = 0; i < lags_.size(); ++i)
    {
        const std::size_t l = lags_[i];
        if (l > 0 && n_ >= l)
            cross_[i] += v * ring_[(n_ - l) % max_lag_];
        else if (l == 0)
            cross_[i] += v * v;
    }
    if (head_.size() < max_lag_)
        head_.push_back(v);
    if (max_lag_ > 0)
        ring_[n_ % max_lag_] = v;
    sum_ += v;
    sum_sq_ += v * v;
    ++n_;
}

double AutocorrelationAccumulator::value(std::size_t i) const
{
    const std::size_t l = lags_.at(i);
    if (n_ <= l)
        return 0.0;
    const double n = static_cast<double>(n_);
    const double mean = sum_ / n;
    const double c0 = sum_sq_ / n - mean * mean;
    if (c0 <= 1e-14 * std::max(1.0, sum_sq_ / n))
        return 1.0;
    double first = 0.0;
    double last = 0.0;
    for (std::size_t j = 0; j < l; ++j)
    {
        first += head_[j];
        last += ring_[(n_ - 1 - j) % max_lag_];
    }
    const double s_head = sum_ - first;  // sum over t > l
    const double s_tail = sum_ - last;   // sum over t <= n - l
    const double cl = (cross_[i] - mean * (s_head + s_tail) + static_cast<double>(n_ - l) * mean * mean) / n;
    return cl / c0;
}

ChainTrace run_chain(const SmoothingTarget& target, const BlockCover& cover, const SweepSchedule& schedule,
                     const KernelConfig& kernel, const Trajectory& init, std::size_t sweeps,
                     std::uint64_t seed, const SweepOptions& options, const CollectorOptions& collectors)
{
    const std::size_t n = target.length();
    const int k = target.num_states();
    ChainState chain{init, 0, seed};
    check_inputs(chain, target, cover, schedule);

    ChainTrace out;
    out.sweeps = sweeps;
    out.marginal_counts = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), k);
    std::vector<std::size_t> changes(n, 0);
    std::vector<AutocorrelationAccumulator> acf(n, AutocorrelationAccumulator({1, 5}));
    const bool retain = collectors.retain_trace && (sweeps + 1) * n <= collectors.trace_cap;
    if (collectors.retain_trace && !retain)
        throw ValidationError("full trace of " + std::to_string((sweeps + 1) * n)
                              + " values exceeds the trace cap of " + std::to_string(collectors.trace_cap));
    if (retain)
    {
        out.trace.reserve(sweeps + 1);
        out.trace.push_back(init);
    }

    for (std::size_t s = 0; s < sweeps; ++s)
    {
        SweepTiming timing;
        ChainState next = sweep(chain, target, cover, schedule, kernel, options, &timing);
        out.timings.push_back(std::move(timing));
        if (s >= collectors.burn_in)
        {
            ++out.recorded;
            for (std::size_t i = 0; i < n; ++i)
            {
                out.marginal_counts(static_cast<Eigen::Index>(i), next.x[i]) += 1.0;
                if (next.x[i] != chain.x[i])
                    ++changes[i];
                acf[i].push(static_cast<double>(next.x[i]));
            }
        }
        if (retain)
            out.trace.push_back(next.x);
        chain = std::move(next);
    }

    out.update_rate.resize(n);
    out.acf1.resize(n);
    out.acf5.resize(n);
    for (std::size_t i = 0; i < n; ++i)
    {
        out.update_rate[i] = out.recorded ? static_cast<double>(changes[i]) / static_cast<double>(out.recorded) : 0.0;
        out.acf1[i] = acf[i].value(0);
        out.acf5[i] = acf[i].value(1);
    }
    out.final_state = std::move(chain);
    return out;
}

void write_trace_csv(const ChainTrace& trace, std::ostream& os)
{
    os << "sweep,site,value\n";
    for (std::size_t s = 1; s < trace.trace.size(); ++s)
        for (std::size_t i = 0; i < trace.trace[s].size(); ++i)
            os << s << "," << i + 1 << "," << trace.trace[s][i] << "\n";
}

void write_summary_csv(const ChainTrace& trace, std::ostream& os)
{
    os << "site,update_rate,acf1,acf5\n";
    os.precision(10);
    for (std::size_t i = 0; i < trace.update_rate.size(); ++i)
        os << i + 1 << "," << trace.update_rate[i] << "," << trace.acf1[i] << "," << trace.acf5[i] << "\n";
}

}  // namespace blockpg
