#include "blockpg/pg_kernel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "blockpg/exact.hpp"

namespace blockpg {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

std::optional<State> left_state(std::span<const State> ref, const Interval& block)
{
    if (block.first == 0)
        return std::nullopt;
    return ref[block.first - 1];
}

std::optional<State> right_state(std::span<const State> ref, const Interval& block)
{
    if (block.last + 1 >= ref.size())
        return std::nullopt;
    return ref[block.last + 1];
}

/*!
 * log w_t(prev, x) = log [g(x, y_t) m(prev, x) / r_t(prev, x)], with mu in
 * place of m at site 0. For the bootstrap proposal this is log g exactly.
 */
double log_increment(const SmoothingTarget& target, const ProposalKernel& proposal,
                     std::optional<State> prev, std::size_t site, State x, double proposal_prob)
{
    const double lg = target.log_emission(site, x);
    if (proposal.kind() == ProposalKernel::Kind::Bootstrap)
        return lg;
    const double lm = prev ? target.log_transition(*prev, x) : target.log_initial(x);
    return lg + lm - std::log(proposal_prob);
}

void normalise_log(std::span<const double> logw, std::span<double> probs)
{
    const double norm = log_sum_exp(logw);
    for (std::size_t i = 0; i < logw.size(); ++i)
        probs[i] = logw[i] == kNegInf ? 0.0 : std::exp(logw[i] - norm);
}

std::uint64_t saturating_mul(std::uint64_t a, std::uint64_t b)
{
    if (a != 0 && b > std::numeric_limits<std::uint64_t>::max() / a)
        return std::numeric_limits<std::uint64_t>::max();
    return a * b;
}

std::uint64_t saturating_pow(std::uint64_t base, std::uint64_t exp)
{
    std::uint64_t r = 1;
    for (std::uint64_t i = 0; i < exp; ++i)
        r = saturating_mul(r, base);
    return r;
}

}  // namespace

ProposalKernel ProposalKernel::custom(Fill fill)
{
    if (!fill)
        throw ValidationError("custom proposal needs a fill callback");
    ProposalKernel p;
    p.kind_ = Kind::Custom;
    p.fill_ = std::move(fill);
    return p;
}

void ProposalKernel::probabilities(const SmoothingTarget& target, std::optional<State> prev,
                                   std::size_t site, std::optional<State> right_boundary,
                                   std::span<double> out) const
{
    const int k = target.num_states();
    if (kind_ == Kind::Bootstrap)
    {
        for (int x = 0; x < k; ++x)
            out[static_cast<std::size_t>(x)]
                = prev ? target.model().transition()(*prev, x) : target.model().initial()(x);
        return;
    }
    fill_(prev, site, right_boundary, out);
}

std::vector<State> ParticleSystem::trajectory(std::size_t i) const
{
    const std::size_t len = block.size();
    std::vector<State> path(len);
    std::size_t idx = i;
    for (std::size_t t = len; t-- > 0;)
    {
        path[t] = state(idx, t);
        if (t > 0)
            idx = ancestor(idx, t);
    }
    return path;
}

std::vector<State> pg_block_step(const SmoothingTarget& target, std::span<const State> reference,
                                 const Interval& block, std::size_t particles,
                                 const ProposalKernel& proposal, StreamRng& rng, ParticleSystem* trace)
{
    if (particles < 2)
        throw ValidationError("particle Gibbs needs N >= 2 particles (N=" + std::to_string(particles) + ")");
    if (block.first > block.last || block.last >= reference.size() || reference.size() != target.length())
        throw ValidationError("block does not lie within the reference trajectory");

    const std::size_t len = block.size();
    const std::size_t ref = particles - 1;
    const auto k = static_cast<std::size_t>(target.num_states());
    const auto left = left_state(reference, block);
    const auto right = right_state(reference, block);

    ParticleSystem local;
    ParticleSystem& sys = trace ? *trace : local;
    sys.particles = particles;
    sys.block = block;
    sys.states.assign(particles * len, 0);
    sys.log_weights.assign(particles * len, kNegInf);
    sys.ancestors.assign(particles * (len > 0 ? len - 1 : 0), 0);

    std::vector<double> probs(k);
    std::vector<double> column(particles);
    std::vector<double> normalised(particles);

    auto at = [len](std::size_t i, std::size_t t) { return i * len + t; };

    for (std::size_t t = 0; t < len; ++t)
    {
        const std::size_t site = block.first + t;
        const bool last = t + 1 == len;
        const std::optional<State> hint = last ? right : std::nullopt;

        if (t > 0)
        {
            for (std::size_t i = 0; i < particles; ++i)
                column[i] = sys.log_weights[at(i, t - 1)];
            normalise_log(column, normalised);
        }
        for (std::size_t i = 0; i < particles; ++i)
        {
            std::optional<State> prev = left;
            std::size_t ancestor = i;
            if (t > 0)
            {
                ancestor = i == ref ? ref : sample_categorical(normalised, rng);
                sys.ancestors[i * (len - 1) + (t - 1)] = ancestor;
                prev = sys.states[at(ancestor, t - 1)];
            }
            proposal.probabilities(target, prev, site, hint, probs);
            State x;
            if (i == ref)
                x = reference[site];
            else
                x = static_cast<State>(sample_categorical(probs, rng));
            sys.states[at(i, t)] = x;
            double lw = log_increment(target, proposal, prev, site, x, probs[static_cast<std::size_t>(x)]);
            if (last && right)
                lw += target.log_transition(x, *right);
            sys.log_weights[at(i, t)] = lw;
        }
        bool any = false;
        for (std::size_t i = 0; i < particles; ++i)
            any = any || sys.log_weights[at(i, t)] > kNegInf;
        if (!any)
            throw Error("all particle weights are zero at site " + std::to_string(site + 1)
                        + " (model violates positivity)");
    }

    for (std::size_t i = 0; i < particles; ++i)
        column[i] = sys.log_weights[at(i, len - 1)];
    sys.selected = sample_log_categorical(column, rng);
    return sys.trajectory(sys.selected);
}

std::uint64_t pg_enumeration_size(int num_states, std::size_t block_size, std::size_t particles)
{
    const auto k = static_cast<std::uint64_t>(num_states);
    const auto n = static_cast<std::uint64_t>(particles);
    const std::uint64_t free = n - 1;
    std::uint64_t total = saturating_pow(k, free);
    total = saturating_mul(total, saturating_pow(saturating_mul(n, k), free * (block_size - 1)));
    return saturating_mul(total, n);
}

std::vector<double> pg_kernel_law(const SmoothingTarget& target, std::span<const State> reference,
                                  const Interval& block, std::size_t particles,
                                  const ProposalKernel& proposal, std::uint64_t cap)
{
    if (particles < 2)
        throw ValidationError("particle Gibbs needs N >= 2 particles");
    if (block.first > block.last || block.last >= reference.size() || reference.size() != target.length())
        throw ValidationError("block does not lie within the reference trajectory");
    const int k = target.num_states();
    const std::size_t len = block.size();
    const std::uint64_t size = pg_enumeration_size(k, len, particles);
    if (size > cap)
        throw CapacityError("PG enumeration needs up to " + std::to_string(size)
                            + " outcomes, above the cap of " + std::to_string(cap));

    const std::size_t ref = particles - 1;
    const auto left = left_state(reference, block);
    const auto right = right_state(reference, block);

    std::size_t table_size = 1;
    for (std::size_t t = 0; t < len; ++t)
        table_size *= static_cast<std::size_t>(k);
    std::vector<double> law(table_size, 0.0);

    // per level: particle states, log-weights, ancestors
    std::vector<std::vector<State>> states(len, std::vector<State>(particles));
    std::vector<std::vector<double>> logw(len, std::vector<double>(particles));
    std::vector<std::vector<std::size_t>> anc(len, std::vector<std::size_t>(particles));

    struct Option
    {
        std::size_t ancestor;
        State x;
        double prob;
        double log_weight;
    };

    std::vector<double> probs(static_cast<std::size_t>(k));

    auto finalise = [&](double prob) {
        std::vector<double> sel(particles);
        normalise_log(logw[len - 1], sel);
        for (std::size_t i = 0; i < particles; ++i)
        {
            if (sel[i] == 0.0)
                continue;
            std::size_t idx = i;
            std::size_t code = 0;
            for (std::size_t t = len; t-- > 0;)
            {
                code = code * static_cast<std::size_t>(k) + static_cast<std::size_t>(states[t][idx]);
                if (t > 0)
                    idx = anc[t][idx];
            }
            // code was built last-site-first, which is the little-endian index
            law[code] += prob * sel[i];
        }
    };

    auto options_at = [&](std::size_t t) {
        const std::size_t site = block.first + t;
        const bool last = t + 1 == len;
        const std::optional<State> hint = last ? right : std::nullopt;
        std::vector<Option> opts;
        std::vector<double> ap(particles, 0.0);
        if (t == 0)
            ap[0] = 1.0;
        else
            normalise_log(logw[t - 1], ap);
        for (std::size_t a = 0; a < (t == 0 ? 1 : particles); ++a)
        {
            if (ap[a] == 0.0)
                continue;
            const std::optional<State> prev = t == 0 ? left : std::optional<State>(states[t - 1][a]);
            proposal.probabilities(target, prev, site, hint, probs);
            for (int x = 0; x < k; ++x)
            {
                const double r = probs[static_cast<std::size_t>(x)];
                if (r <= 0.0)
                    continue;
                double lw = log_increment(target, proposal, prev, site, x, r);
                if (last && right)
                    lw += target.log_transition(x, *right);
                opts.push_back({a, x, ap[a] * r, lw});
            }
        }
        // reference particle
        const std::optional<State> ref_prev
            = t == 0 ? left : std::optional<State>(states[t - 1][ref]);
        const State xr = reference[site];
        proposal.probabilities(target, ref_prev, site, hint, probs);
        double ref_lw = log_increment(target, proposal, ref_prev, site, xr,
                                      probs[static_cast<std::size_t>(xr)]);
        if (last && right)
            ref_lw += target.log_transition(xr, *right);
        return std::make_pair(std::move(opts), ref_lw);
    };

    std::function<void(std::size_t, double)> descend = [&](std::size_t t, double prob) {
        auto [opts, ref_lw] = options_at(t);
        states[t][ref] = reference[block.first + t];
        logw[t][ref] = ref_lw;
        anc[t][ref] = ref;
        if (opts.empty())
            return;
        const std::size_t free = particles - 1;
        std::vector<std::size_t> odo(free, 0);
        while (true)
        {
            double p = prob;
            bool any = ref_lw > kNegInf;
            for (std::size_t i = 0; i < free; ++i)
            {
                const Option& o = opts[odo[i]];
                p *= o.prob;
                states[t][i] = o.x;
                logw[t][i] = o.log_weight;
                anc[t][i] = o.ancestor;
                any = any || o.log_weight > kNegInf;
            }
            if (p > 0.0)
            {
                if (!any)
                    throw Error("all particle weights are zero at site "
                                + std::to_string(block.first + t + 1));
                if (t + 1 == len)
                    finalise(p);
                else
                    descend(t + 1, p);
            }
            std::size_t pos = 0;
            while (pos < free && ++odo[pos] == opts.size())
                odo[pos++] = 0;
            if (pos == free)
                break;
        }
    };
    descend(0, 1.0);
    return law;
}

double pg_epsilon(double c, std::size_t particles, std::size_t block_size)
{
    if (block_size == 0)
        return 0.0;
    const double per_site = 1.0 - 1.0 / (c * static_cast<double>(particles - 1) + 1.0);
    return 1.0 - std::pow(per_site, static_cast<double>(block_size));
}

MinorisationBound minorisation_bound(const MixingProfile& profile, std::size_t particles,
                                     std::size_t block_size)
{
    profile.validate();
    if (particles < 1)
        throw ValidationError("minorisation bound needs N >= 1");
    MinorisationBound b;
    b.c = 1.0 / (2.0 * profile.delta * profile.sigma_plus / profile.sigma_minus - 1.0);
    b.epsilon = pg_epsilon(b.c, particles, block_size);
    return b;
}

double minorisation_empirical(const SmoothingTarget& target, const Interval& block,
                              std::size_t particles, std::uint64_t cap)
{
    const std::size_t n = target.length();
    const int k = target.num_states();
    const Boundary bd = boundary(block, n);
    std::vector<std::size_t> sites;
    if (bd.left)
        sites.push_back(*bd.left);
    for (std::size_t i = block.first; i <= block.last; ++i)
        sites.push_back(i);
    if (bd.right)
        sites.push_back(*bd.right);

    Trajectory x(n, 0);
    double gamma = std::numeric_limits<double>::infinity();
    std::vector<State> odo(sites.size(), 0);
    const auto proposal = ProposalKernel::bootstrap();
    while (true)
    {
        for (std::size_t j = 0; j < sites.size(); ++j)
            x[sites[j]] = odo[j];
        const BlockConditional cond = block_conditional(target, x, block);
        if (cond.table[encode_block(x, block, k)] > 0.0)
        {
            const auto law = pg_kernel_law(target, x, block, particles, proposal, cap);
            for (std::size_t c = 0; c < law.size(); ++c)
                if (cond.table[c] > 0.0)
                    gamma = std::min(gamma, law[c] / cond.table[c]);
        }
        std::size_t pos = 0;
        while (pos < odo.size() && ++odo[pos] == k)
            odo[pos++] = 0;
        if (pos == odo.size())
            break;
    }
    return gamma;
}

}  // namespace blockpg
