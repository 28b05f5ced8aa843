#include "commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include <boost/math/distributions/chi_squared.hpp>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "blockpg/error.hpp"
#include "blockpg/exact.hpp"
#include "blockpg/rates.hpp"
#include "blockpg/sweeps.hpp"

namespace blockpg::app {

namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

std::string fmt(double v)
{
    if (!std::isfinite(v))
        return std::isnan(v) ? "NA" : (v > 0 ? "inf" : "-inf");
    std::ostringstream os;
    os << std::setprecision(10) << v;
    return os.str();
}

std::string fmt(const std::optional<double>& v)
{
    return v ? fmt(*v) : "NA";
}

double median(std::vector<double> v)
{
    if (v.empty())
        return std::numeric_limits<double>::quiet_NaN();
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::optional<double> mean_over(const std::vector<double>& v, const std::vector<bool>& pick, bool want)
{
    double s = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < v.size(); ++i)
        if (pick[i] == want)
        {
            s += v[i];
            ++n;
        }
    if (n == 0)
        return std::nullopt;
    return s / static_cast<double>(n);
}

std::vector<bool> boundary_sites(const BlockCover& cover)
{
    std::vector<bool> out(cover.length, false);
    for (std::size_t k = 0; k < cover.blocks.size(); ++k)
    {
        const Boundary b = boundary(cover, k);
        if (b.left)
            out[*b.left] = true;
        if (b.right)
            out[*b.right] = true;
    }
    return out;
}

std::size_t target_length(const ExperimentConfig& cfg)
{
    if (cfg.cover.present())
        return cfg.cover.length;
    if (cfg.observations)
        return cfg.observations->size();
    throw ValidationError("config needs a cover or observations to fix T");
}

SmoothingTarget make_target(const ExperimentConfig& cfg, std::size_t length)
{
    if (cfg.model.is_null())
        throw ValidationError("config has no model");
    HmmModel model = model_from_json(cfg.model);
    ObservationRecord obs = make_observations(cfg, model, length);
    return SmoothingTarget(std::move(model), std::move(obs));
}

void prepare_out(const ExperimentConfig& cfg)
{
    fs::create_directories(cfg.out);
    std::ofstream os(cfg.out / "config.json");
    os << cfg.to_json().dump(2) << "\n";
    if (!os)
        throw Error("cannot write to output directory " + cfg.out.string());
}

std::ofstream open_csv(const ExperimentConfig& cfg, const std::string& name)
{
    std::ofstream os(cfg.out / name);
    if (!os)
        throw Error("cannot write " + (cfg.out / name).string());
    return os;
}

std::vector<std::string> contraction_schedules(const ExperimentConfig& cfg)
{
    return cfg.schedules.empty() ? std::vector<std::string>{cfg.schedule} : cfg.schedules;
}

}  // namespace

// ---- validation --------------------------------------------------------------

ValidationReport validate_config(const ExperimentConfig& cfg)
{
    ValidationReport r;
    std::optional<HmmModel> model;
    if (!cfg.model.is_null())
    {
        try
        {
            model = model_from_json(cfg.model);
        }
        catch (const ValidationError& e)
        {
            r.problems.push_back(std::string("model: ") + e.what());
        }
    }

    std::optional<BlockCover> cover;
    if (cfg.cover.present())
    {
        try
        {
            cover = make_cover_from(cfg.cover);
            for (const auto& v : validate_cover(*cover))
            {
                const std::string line = std::string(to_string(v.assumption)) + ": " + v.message;
                if (v.assumption == CoverAssumption::B3)
                    r.notes.push_back(line);
                else
                    r.problems.push_back(line);
            }
        }
        catch (const ValidationError& e)
        {
            r.problems.push_back(std::string("cover: ") + e.what());
        }
    }

    try
    {
        parse_schedule(cfg.schedule, cover ? cover->num_blocks() : 1);
    }
    catch (const ValidationError& e)
    {
        r.problems.push_back(std::string("schedule: ") + e.what());
    }
    for (const auto& s : cfg.schedules)
    {
        try
        {
            parse_schedule(s, 1);
        }
        catch (const ValidationError& e)
        {
            r.problems.push_back(std::string("schedules: ") + e.what());
        }
    }
    try
    {
        make_kernel(cfg.kernel);
    }
    catch (const ValidationError& e)
    {
        r.problems.push_back(std::string("kernel: ") + e.what());
    }

    if (cfg.threads < 1)
        r.problems.push_back("threads must be >= 1");
    if (cfg.h < 1)
        r.problems.push_back("h must be >= 1");
    if (cfg.replications < 1)
        r.problems.push_back("replications must be >= 1");
    if (!(cfg.level > 0.0 && cfg.level < 1.0))
        r.problems.push_back("level must lie in (0, 1)");
    if (cfg.compare_threads && *cfg.compare_threads < 1)
        r.problems.push_back("compare_threads must be >= 1");
    if (cfg.profile)
    {
        try
        {
            cfg.profile->validate();
        }
        catch (const ValidationError& e)
        {
            r.problems.push_back(std::string("profile: ") + e.what());
        }
    }
    for (std::size_t t : cfg.T_grid)
        if (t == 0)
            r.problems.push_back("T_grid entries must be >= 1");

    if (model && (cfg.cover.present() || cfg.observations))
    {
        try
        {
            const std::size_t t = target_length(cfg);
            SmoothingTarget target(*model, make_observations(cfg, *model, t));
        }
        catch (const ValidationError& e)
        {
            r.problems.push_back(std::string("observations: ") + e.what());
        }
    }
    return r;
}

int cmd_validate(const ExperimentConfig& cfg, std::ostream& out)
{
    const ValidationReport r = validate_config(cfg);
    for (const auto& n : r.notes)
        out << "note: " << n << "\n";
    for (const auto& p : r.problems)
        out << "violation: " << p << "\n";
    if (cfg.cover.present() && r.ok())
        out << "cover: " << to_string(make_cover_from(cfg.cover)) << "\n";
    out << (r.ok() ? "valid" : "invalid") << "\n";
    return r.ok() ? kExitOk : kExitValidation;
}

// ---- rates -------------------------------------------------------------------

int cmd_rates(const ExperimentConfig& cfg, std::ostream& out)
{
    MixingProfile profile;
    if (cfg.profile)
    {
        profile = *cfg.profile;
    }
    else
    {
        const SmoothingTarget target = make_target(cfg, target_length(cfg));
        profile = mixing_profile(target, cfg.h);
    }
    profile.validate();

    std::vector<std::size_t> ls = cfg.grid_L;
    std::vector<std::size_t> ps = cfg.grid_p;
    std::vector<std::size_t> ns = cfg.grid_N;
    if (ls.empty() && cfg.cover.block_size)
        ls = {*cfg.cover.block_size};
    if (ps.empty())
        ps = {cfg.cover.overlap.value_or(0)};
    if (ns.empty())
        ns = {cfg.kernel.particles};
    if (ls.empty())
        throw ValidationError("rates need a block size: set cover.L or rates.L");

    prepare_out(cfg);
    auto csv = open_csv(cfg, "rates.csv");
    csv << rate_csv_header() << "\n";
    out << std::left << std::setw(6) << "L" << std::setw(4) << "p" << std::setw(7) << "N" << std::setw(14)
        << "epsilon" << std::setw(14) << "lambda_ideal" << std::setw(14) << "beta" << std::setw(14)
        << "lambda_pg_par" << std::setw(14) << "lambda_pg_lr"
        << "flags\n";
    std::size_t rows = 0;
    for (std::size_t l : ls)
        for (std::size_t p : ps)
            for (std::size_t n : ns)
            {
                if (p >= l || n < 2)
                {
                    out << "skipped L=" << l << " p=" << p << " N=" << n << " (needs p < L and N >= 2)\n";
                    continue;
                }
                const RateReport r = rate_pg_common(profile, l, p, n);
                csv << rate_csv_row(r) << "\n";
                out << std::left << std::setw(6) << l << std::setw(4) << p << std::setw(7) << n << std::setw(14)
                    << fmt(r.epsilon) << std::setw(14) << fmt(r.lambda_ideal) << std::setw(14) << fmt(r.beta)
                    << std::setw(14) << fmt(r.lambda_pg_par) << std::setw(14) << fmt(r.lambda_pg_lr) << r.flags()
                    << "\n";
                ++rows;
            }
    out << "alpha=" << fmt(coupling_alpha(profile)) << " rows=" << rows << "\n";
    return kExitOk;
}

// ---- sample ------------------------------------------------------------------

int cmd_sample(const ExperimentConfig& cfg, std::ostream& out)
{
    const SmoothingTarget target = make_target(cfg, target_length(cfg));
    const BlockCover cover = make_cover_from(cfg.cover);
    const SweepSchedule schedule = parse_schedule(cfg.schedule, cover.num_blocks());
    const KernelConfig kernel = make_kernel(cfg.kernel);
    StreamRng init_rng(cfg.seed, 0x1417, 0);
    const Trajectory init = simulate_prior(target.model(), target.length(), init_rng);

    CollectorOptions collectors;
    collectors.burn_in = cfg.burn_in;
    collectors.retain_trace = cfg.trace || cfg.compare_threads.has_value();

    prepare_out(cfg);
    const ChainTrace trace = run_chain(target, cover, schedule, kernel, init, cfg.sweeps, cfg.seed,
                                       SweepOptions{cfg.threads}, collectors);
    {
        auto os = open_csv(cfg, "summary.csv");
        write_summary_csv(trace, os);
    }
    if (cfg.trace)
    {
        auto os = open_csv(cfg, "trace.csv");
        write_trace_csv(trace, os);
    }
    {
        // wall clock varies between runs; kept out of the deterministic files
        auto os = open_csv(cfg, "timing.csv");
        os << "sweep,phase,seconds\n";
        for (std::size_t s = 0; s < trace.timings.size(); ++s)
            for (std::size_t ph = 0; ph < trace.timings[s].phase_seconds.size(); ++ph)
                os << s + 1 << "," << ph + 1 << "," << fmt(trace.timings[s].phase_seconds[ph]) << "\n";
    }

    auto phase_totals = [](const ChainTrace& t) {
        std::vector<double> totals;
        for (const auto& s : t.timings)
        {
            totals.resize(std::max(totals.size(), s.phase_seconds.size()), 0.0);
            for (std::size_t i = 0; i < s.phase_seconds.size(); ++i)
                totals[i] += s.phase_seconds[i];
        }
        return totals;
    };

    out << "cover: " << to_string(cover) << "\n";
    out << "schedule: " << to_string(schedule) << " threads: " << cfg.threads << " sweeps: " << cfg.sweeps << "\n";
    const auto base_totals = phase_totals(trace);
    for (std::size_t i = 0; i < base_totals.size(); ++i)
        out << "phase " << i + 1 << " seconds: " << fmt(base_totals[i]) << "\n";

    if (cfg.compare_threads)
    {
        const ChainTrace other = run_chain(target, cover, schedule, kernel, init, cfg.sweeps, cfg.seed,
                                           SweepOptions{*cfg.compare_threads}, collectors);
        std::ostringstream a;
        std::ostringstream b;
        write_trace_csv(trace, a);
        write_trace_csv(other, b);
        const bool same = a.str() == b.str();
        out << "threads " << cfg.threads << " vs " << *cfg.compare_threads
            << " traces identical: " << (same ? "yes" : "no") << "\n";
        const auto other_totals = phase_totals(other);
        for (std::size_t i = 0; i < base_totals.size() && i < other_totals.size(); ++i)
            out << "phase " << i + 1 << " wall time ratio: "
                << fmt(base_totals[i] > 0 ? other_totals[i] / base_totals[i] : 0.0) << "\n";
        if (!same)
            throw Error("traces differ between thread counts");
    }
    return kExitOk;
}

// ---- invariance ----------------------------------------------------------------

InvarianceResult invariance_check(const SmoothingTarget& target, const BlockCover& cover,
                                  const SweepSchedule& schedule, const KernelConfig& kernel, std::size_t chains,
                                  std::uint64_t seed, int threads, double level, std::size_t cap)
{
    InvarianceResult res;
    res.chains = chains;
    res.level = level;
    try
    {
        const SweepOperator op = sweep_operator(target, cover, schedule, kernel, cap);
        const Eigen::RowVectorXd phi = op.target.transpose();
        res.residual = (phi * op.matrix - phi).cwiseAbs().sum();
        if (*res.residual > 1e-9)
            res.pass = false;
    }
    catch (const CapacityError& e)
    {
        res.residual_note = e.what();
    }
    if (chains == 0)
    {
        if (!res.residual)
            throw CapacityError("instance too large for an exact invariance check and no chains requested: "
                                + res.residual_note);
        return res;
    }

    const std::size_t n = target.length();
    const int k = target.num_states();
    const Eigen::MatrixXd marginals = smoothing_marginals(target);
    const Interval whole{0, n - 1};
    const int nthreads = std::max(threads, 1);
    std::vector<Eigen::MatrixXd> counts(static_cast<std::size_t>(nthreads),
                                        Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), k));
    std::exception_ptr failure;

#pragma omp parallel num_threads(nthreads)
    {
#ifdef _OPENMP
        const int tid = omp_get_thread_num();
#else
        const int tid = 0;
#endif
        Eigen::MatrixXd& local = counts[static_cast<std::size_t>(tid)];
        const Trajectory zeros(n, 0);
#pragma omp for schedule(static)
        for (long c = 0; c < static_cast<long>(chains); ++c)
        {
            try
            {
                StreamRng rng(seed, 0x1a7, static_cast<std::uint64_t>(c));
                ChainState chain{sample_block_conditional(target, zeros, whole, rng), 0, rng()};
                const ChainState next = sweep(chain, target, cover, schedule, kernel);
                for (std::size_t t = 0; t < n; ++t)
                    local(static_cast<Eigen::Index>(t), next.x[t]) += 1.0;
            }
            catch (...)
            {
#pragma omp critical
                if (!failure)
                    failure = std::current_exception();
            }
        }
    }
    if (failure)
        std::rethrow_exception(failure);

    Eigen::MatrixXd total = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), k);
    for (const auto& c : counts)
        total += c;

    const double m = static_cast<double>(chains);
    for (std::size_t t = 0; t < n; ++t)
    {
        SiteTest st;
        st.site = t + 1;
        bool impossible = false;
        for (int x = 0; x < k; ++x)
        {
            const double expected = m * marginals(static_cast<Eigen::Index>(t), x);
            const double observed = total(static_cast<Eigen::Index>(t), x);
            if (expected <= 0.0)
            {
                impossible = impossible || observed > 0.0;
                continue;
            }
            st.statistic += (observed - expected) * (observed - expected) / expected;
            ++st.df;
        }
        st.df -= 1;
        if (impossible)
            st.p_value = 0.0;
        else if (st.df > 0)
            st.p_value = boost::math::cdf(boost::math::complement(boost::math::chi_squared(st.df), st.statistic));
        st.p_adjusted = std::min(1.0, st.p_value * static_cast<double>(n));
        if (!(st.p_adjusted > level))
            res.pass = false;
        res.sites.push_back(st);
    }
    return res;
}

int cmd_invariance(const ExperimentConfig& cfg, std::ostream& out)
{
    const SmoothingTarget target = make_target(cfg, target_length(cfg));
    const BlockCover cover = make_cover_from(cfg.cover);
    const SweepSchedule schedule = parse_schedule(cfg.schedule, cover.num_blocks());
    const KernelConfig kernel = make_kernel(cfg.kernel);
    prepare_out(cfg);
    const InvarianceResult r = invariance_check(target, cover, schedule, kernel, cfg.chains, cfg.seed, cfg.threads,
                                                cfg.level, cfg.cap_states);

    auto csv = open_csv(cfg, "invariance.csv");
    csv << "site,statistic,df,p_value,p_bonferroni\n";
    for (const auto& s : r.sites)
        csv << s.site << "," << fmt(s.statistic) << "," << s.df << "," << fmt(s.p_value) << ","
            << fmt(s.p_adjusted) << "\n";

    if (r.residual)
        out << "exact residual ||phi P - phi||_1 = " << fmt(*r.residual) << "\n";
    else
        out << "exact residual skipped: " << r.residual_note << "\n";
    if (r.chains > 0)
    {
        double min_p = 1.0;
        for (const auto& s : r.sites)
            min_p = std::min(min_p, s.p_adjusted);
        out << "chains: " << r.chains << " smallest Bonferroni p-value: " << fmt(min_p) << " (level " << fmt(r.level)
            << ")\n";
    }
    out << (r.pass ? "pass" : "fail") << "\n";
    return r.pass ? kExitOk : kExitValidation;
}

// ---- stability -----------------------------------------------------------------

std::vector<StabilityRow> stability_study(const HmmModel& model, const std::vector<std::size_t>& lengths,
                                          const StabilitySettings& s)
{
    if (lengths.empty())
        throw ValidationError("stability needs a non-empty T grid");
    if (s.replications < 1 || s.sweeps <= s.burn_in + 5)
        throw ValidationError("stability needs replications >= 1 and sweeps > burn_in + 5");
    const KernelConfig kernel = PgKernel{s.particles, ProposalKernel::bootstrap()};

    struct RunStats
    {
        std::vector<double> acf1, acf5, rate;
    };

    std::vector<StabilityRow> rows;
    for (std::size_t t_len : lengths)
    {
        const BlockCover blocked = build_cover(t_len, s.block_size, s.overlap);
        const BlockCover single = build_cover(t_len, t_len, 0);
        const SweepSchedule blocked_schedule = parse_schedule(s.schedule, blocked.num_blocks());
        const SweepSchedule single_schedule = SweepSchedule::left_to_right(1);

        std::vector<RunStats> blocked_runs(s.replications);
        std::vector<RunStats> single_runs(s.replications);
        std::exception_ptr failure;
        const auto start = Clock::now();

#pragma omp parallel for num_threads(std::max(s.threads, 1)) schedule(dynamic, 1)
        for (long r = 0; r < static_cast<long>(s.replications); ++r)
        {
            try
            {
                StreamRng rng(s.seed, t_len, static_cast<std::uint64_t>(r));
                const Simulation sim = simulate(model, t_len, rng);
                const SmoothingTarget target(model, ObservationRecord(sim.observations));
                const Trajectory init = simulate_prior(model, t_len, rng);
                const std::uint64_t chain_seed = rng();
                CollectorOptions col;
                col.burn_in = s.burn_in;
                const ChainTrace a = run_chain(target, blocked, blocked_schedule, kernel, init, s.sweeps, chain_seed,
                                               SweepOptions{1}, col);
                const ChainTrace b = run_chain(target, single, single_schedule, kernel, init, s.sweeps,
                                               chain_seed ^ 0x5151, SweepOptions{1}, col);
                blocked_runs[static_cast<std::size_t>(r)] = {a.acf1, a.acf5, a.update_rate};
                single_runs[static_cast<std::size_t>(r)] = {b.acf1, b.acf5, b.update_rate};
            }
            catch (...)
            {
#pragma omp critical
                if (!failure)
                    failure = std::current_exception();
            }
        }
        if (failure)
            std::rethrow_exception(failure);
        const double seconds = std::chrono::duration<double>(Clock::now() - start).count();

        auto summarise = [&](const std::vector<RunStats>& runs, const BlockCover& cover, const char* name) {
            std::vector<double> acf1(t_len, 0.0), acf5(t_len, 0.0), rate(t_len, 0.0);
            for (const auto& run : runs)
                for (std::size_t i = 0; i < t_len; ++i)
                {
                    acf1[i] += run.acf1[i] / static_cast<double>(runs.size());
                    acf5[i] += run.acf5[i] / static_cast<double>(runs.size());
                    rate[i] += run.rate[i] / static_cast<double>(runs.size());
                }
            const auto edge = boundary_sites(cover);
            StabilityRow row;
            row.length = t_len;
            row.kernel = name;
            row.block_size = cover.common_size.value_or(0);
            row.overlap = cover.common_overlap.value_or(0);
            row.particles = s.particles;
            row.num_blocks = cover.num_blocks();
            row.replications = s.replications;
            row.sweeps = s.sweeps;
            row.median_acf1 = median(acf1);
            row.median_acf5 = median(acf5);
            row.median_update_rate = median(rate);
            row.boundary_acf1 = mean_over(acf1, edge, true);
            row.interior_acf1 = mean_over(acf1, edge, false);
            row.boundary_update_rate = mean_over(rate, edge, true);
            row.interior_update_rate = mean_over(rate, edge, false);
            row.seconds = seconds;
            return row;
        };
        rows.push_back(summarise(blocked_runs, blocked, "blocked"));
        rows.push_back(summarise(single_runs, single, "single"));
    }
    return rows;
}

int cmd_stability(const ExperimentConfig& cfg, std::ostream& out)
{
    if (cfg.model.is_null())
        throw ValidationError("config has no model");
    const HmmModel model = model_from_json(cfg.model);
    StabilitySettings s;
    if (!cfg.cover.block_size)
        throw ValidationError("stability needs cover.L and cover.p");
    s.block_size = *cfg.cover.block_size;
    s.overlap = cfg.cover.overlap.value_or(0);
    s.particles = cfg.kernel.particles;
    s.sweeps = cfg.sweeps;
    s.burn_in = cfg.burn_in;
    s.replications = cfg.replications;
    s.schedule = cfg.schedule;
    s.seed = cfg.seed;
    s.threads = cfg.threads;
    const std::vector<std::size_t> grid = cfg.T_grid.empty() ? std::vector<std::size_t>{cfg.cover.length} : cfg.T_grid;

    prepare_out(cfg);
    const auto rows = stability_study(model, grid, s);
    auto csv = open_csv(cfg, "stability.csv");
    csv << "T,kernel,L,p,N,m,replications,sweeps,median_acf1,median_acf5,median_update_rate,"
           "boundary_acf1,interior_acf1,boundary_update_rate,interior_update_rate\n";
    for (const auto& r : rows)
    {
        csv << r.length << "," << r.kernel << "," << r.block_size << "," << r.overlap << "," << r.particles << ","
            << r.num_blocks << "," << r.replications << "," << r.sweeps << "," << fmt(r.median_acf1) << ","
            << fmt(r.median_acf5) << "," << fmt(r.median_update_rate) << "," << fmt(r.boundary_acf1) << ","
            << fmt(r.interior_acf1) << "," << fmt(r.boundary_update_rate) << "," << fmt(r.interior_update_rate)
            << "\n";
        out << "T=" << r.length << " " << r.kernel << " median acf1=" << fmt(r.median_acf1)
            << " update rate=" << fmt(r.median_update_rate) << " (" << fmt(r.seconds) << " s for both kernels)\n";
    }
    return kExitOk;
}

// ---- contraction ----------------------------------------------------------------

ContractionCurve contraction_curve(const SmoothingTarget& target, const BlockCover& cover,
                                   const SweepSchedule& schedule, const KernelConfig& kernel, int h,
                                   std::size_t max_sweeps, std::size_t cap)
{
    if (schedule.kind == ScheduleKind::ReversiblePair)
        throw ValidationError("contraction envelopes are defined for LR and PAR sweeps only");
    if (max_sweeps < 2)
        throw ValidationError("contraction needs max_sweeps >= 2");

    ContractionCurve c;
    c.schedule = to_string(schedule);
    const MixingProfile profile = mixing_profile(target, h);
    c.alpha = coupling_alpha(profile);
    const auto w = ideal_cover_wasserstein(c.alpha, h, cover);
    const A1Check a1 = verify_A1(cover, w);
    c.lambda = a1.lambda;
    const auto order = schedule.order();
    const Eigen::MatrixXd sweep_w = compose_sweep(w, order);
    c.norm = sweep_w.cwiseAbs().rowwise().sum().maxCoeff();
    c.ideal_decay = rate_ideal(cover, w, schedule.base).decay;

    const SweepOperator op = sweep_operator(target, cover, schedule, kernel, cap);
    const Eigen::Index n = op.matrix.rows();
    const Eigen::RowVectorXd phi = op.target.transpose();
    const double t_len = static_cast<double>(cover.length);

    Eigen::MatrixXd power = Eigen::MatrixXd::Identity(n, n);
    Eigen::MatrixXd w_power = Eigen::MatrixXd::Identity(sweep_w.rows(), sweep_w.cols());
    Eigen::VectorXd tv_first;
    Eigen::VectorXd tv_row(n);
    for (std::size_t k = 0; k <= max_sweeps; ++k)
    {
        if (k > 0)
        {
            power = power * op.matrix;
            w_power = sweep_w * w_power;
        }
        for (Eigen::Index r = 0; r < n; ++r)
            tv_row(r) = 0.5 * (power.row(r) - phi).cwiseAbs().sum();
        c.tv.push_back(tv_row.maxCoeff());
        if (k == 0)
        {
            c.envelope.push_back(1.0);
            c.envelope_direct.push_back(1.0);
            continue;
        }
        c.envelope.push_back(t_len * std::pow(c.lambda, static_cast<double>(k - 1)) * c.norm);
        c.envelope_direct.push_back(t_len * w_power.cwiseAbs().rowwise().sum().maxCoeff());
        if (k == 1)
            tv_first = tv_row;
    }
    const double span = static_cast<double>(max_sweeps - 1);
    for (Eigen::Index r = 0; r < n; ++r)
        if (tv_first(r) > 1e-12)
            c.measured_decay = std::max(c.measured_decay, std::pow(tv_row(r) / tv_first(r), 1.0 / span));
    return c;
}

int cmd_contraction(const ExperimentConfig& cfg, std::ostream& out)
{
    const SmoothingTarget target = make_target(cfg, target_length(cfg));
    const BlockCover cover = make_cover_from(cfg.cover);
    const KernelConfig kernel = make_kernel(cfg.kernel);
    prepare_out(cfg);
    auto csv = open_csv(cfg, "contraction.csv");
    csv << "schedule,k,tv,envelope,envelope_direct\n";
    bool dominated = true;
    for (const auto& name : contraction_schedules(cfg))
    {
        const SweepSchedule schedule = parse_schedule(name, cover.num_blocks());
        const ContractionCurve c = contraction_curve(target, cover, schedule, kernel, cfg.h, cfg.max_sweeps,
                                                     cfg.cap_states);
        for (std::size_t k = 0; k < c.tv.size(); ++k)
        {
            csv << c.schedule << "," << k << "," << fmt(c.tv[k]) << "," << fmt(c.envelope[k]) << ","
                << fmt(c.envelope_direct[k]) << "\n";
            dominated = dominated && c.tv[k] <= c.envelope[k] + 1e-12;
        }
        out << c.schedule << ": alpha=" << fmt(c.alpha) << " lambda=" << fmt(c.lambda) << " ||W||=" << fmt(c.norm)
            << " ideal decay=" << fmt(c.ideal_decay) << " measured decay=" << fmt(c.measured_decay) << "\n";
    }
    if (std::holds_alternative<PgKernel>(kernel))
        out << "note: the envelope is derived for the ideal kernel\n";
    out << "TV within envelope at every k: " << (dominated ? "yes" : "no") << "\n";
    return kExitOk;
}

// ---- dispatch ---------------------------------------------------------------------

int run_command(const std::string& name, const ExperimentConfig& cfg, std::ostream& out, std::ostream& err)
{
    try
    {
        if (name == "validate")
            return cmd_validate(cfg, out);
        const ValidationReport report = validate_config(cfg);
        if (!report.ok())
        {
            for (const auto& p : report.problems)
                err << "violation: " << p << "\n";
            return kExitValidation;
        }
        if (name == "rates")
            return cmd_rates(cfg, out);
        if (name == "sample")
            return cmd_sample(cfg, out);
        if (name == "invariance")
            return cmd_invariance(cfg, out);
        if (name == "stability")
            return cmd_stability(cfg, out);
        if (name == "contraction")
            return cmd_contraction(cfg, out);
        err << "unknown subcommand '" << name << "'\n";
        return kExitValidation;
    }
    catch (const ValidationError& e)
    {
        err << "error: " << e.what() << "\n";
        return kExitValidation;
    }
    catch (const std::exception& e)
    {
        err << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
}

}  // namespace blockpg::app
