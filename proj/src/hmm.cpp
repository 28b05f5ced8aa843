#include "blockpg/hmm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

namespace blockpg {

namespace {

constexpr double kStochasticTol = 1e-12;
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

template <class Derived>
void require_probability_vector(const Eigen::MatrixBase<Derived>& v, const std::string& what)
{
    for (Eigen::Index i = 0; i < v.size(); ++i)
    {
        if (!std::isfinite(v(i)) || v(i) < 0.0)
        {
            std::ostringstream os;
            os << what << ": entry " << i << " is not a nonnegative finite number";
            throw ValidationError(os.str());
        }
    }
    if (std::abs(v.sum() - 1.0) > kStochasticTol)
    {
        std::ostringstream os;
        os << what << " sums to " << v.sum() << ", expected 1";
        throw ValidationError(os.str());
    }
}

double safe_log(double v)
{
    return v > 0.0 ? std::log(v) : kNegInf;
}

}  // namespace

HmmModel::HmmModel(Eigen::VectorXd initial, Eigen::MatrixXd transition, Emission emission)
    : initial_(std::move(initial))
    , transition_(std::move(transition))
    , emission_(std::move(emission))
{
    const auto k = initial_.size();
    if (k < 1)
        throw ValidationError("model: number of states must be positive");
    require_probability_vector(initial_, "initial distribution");
    if (transition_.rows() != k || transition_.cols() != k)
        throw ValidationError("transition matrix must be K x K with K = size of initial");
    for (Eigen::Index r = 0; r < k; ++r)
        require_probability_vector(transition_.row(r).transpose(),
                                   "transition row " + std::to_string(r));

    std::visit(
        [k](const auto& e) {
            using E = std::decay_t<decltype(e)>;
            if constexpr (std::is_same_v<E, DiscreteEmission>)
            {
                if (e.table.rows() != k || e.table.cols() < 1)
                    throw ValidationError("emission table must have K rows and at least one column");
                for (Eigen::Index r = 0; r < k; ++r)
                    require_probability_vector(e.table.row(r).transpose(),
                                               "emission row " + std::to_string(r));
            }
            else if constexpr (std::is_same_v<E, GaussianEmission>)
            {
                if (e.means.size() != k || e.sds.size() != k)
                    throw ValidationError("gaussian emission needs K means and K sds");
                for (Eigen::Index r = 0; r < k; ++r)
                    if (!(e.sds(r) > 0.0) || !std::isfinite(e.means(r)))
                        throw ValidationError("gaussian emission: sd must be positive, mean finite (state "
                                              + std::to_string(r) + ")");
            }
            else
            {
                if (!e.log_density)
                    throw ValidationError("custom emission without a density callback");
            }
        },
        emission_);
}

double HmmModel::log_emission(State x, double y) const
{
    return std::visit(
        [x, y](const auto& e) -> double {
            using E = std::decay_t<decltype(e)>;
            if constexpr (std::is_same_v<E, DiscreteEmission>)
            {
                const double rounded = std::round(y);
                if (rounded != y || rounded < 0 || rounded >= static_cast<double>(e.table.cols()))
                    throw ValidationError("observation " + std::to_string(y)
                                          + " is not a symbol of the emission alphabet");
                return safe_log(e.table(x, static_cast<Eigen::Index>(rounded)));
            }
            else if constexpr (std::is_same_v<E, GaussianEmission>)
            {
                const double sd = e.sds(x);
                const double z = (y - e.means(x)) / sd;
                return -0.5 * z * z - std::log(sd) - 0.5 * std::log(2.0 * std::numbers::pi);
            }
            else
            {
                return e.log_density(x, y);
            }
        },
        emission_);
}

ObservationRecord::ObservationRecord(std::vector<double> y) : y_(std::move(y))
{
    if (y_.empty())
        throw ValidationError("observation record must contain at least one observation");
}

SmoothingTarget::SmoothingTarget(HmmModel model, ObservationRecord obs)
    : model_(std::move(model)), obs_(std::move(obs))
{
    const int k = model_.num_states();
    const auto n = static_cast<Eigen::Index>(obs_.length());
    log_initial_ = model_.initial().unaryExpr([](double v) { return safe_log(v); });
    log_transition_ = model_.transition().unaryExpr([](double v) { return safe_log(v); });
    log_emission_.resize(n, k);
    for (Eigen::Index t = 0; t < n; ++t)
    {
        bool any_positive = false;
        for (int x = 0; x < k; ++x)
        {
            const double lg = model_.log_emission(x, obs_[static_cast<std::size_t>(t)]);
            if (std::isnan(lg) || lg == std::numeric_limits<double>::infinity())
                throw ValidationError("emission density at t=" + std::to_string(t + 1)
                                      + " is not finite");
            log_emission_(t, x) = lg;
            any_positive = any_positive || lg > kNegInf;
        }
        if (!any_positive)
            throw ValidationError("observation at t=" + std::to_string(t + 1)
                                  + " has zero emission probability under every state");
    }

    // forward algorithm in log space
    std::vector<double> alpha(static_cast<std::size_t>(k));
    std::vector<double> next(static_cast<std::size_t>(k));
    std::vector<double> terms(static_cast<std::size_t>(k));
    for (int x = 0; x < k; ++x)
        alpha[static_cast<std::size_t>(x)] = log_initial_(x) + log_emission_(0, x);
    for (Eigen::Index t = 1; t < n; ++t)
    {
        for (int x = 0; x < k; ++x)
        {
            for (int prev = 0; prev < k; ++prev)
                terms[static_cast<std::size_t>(prev)]
                    = alpha[static_cast<std::size_t>(prev)] + log_transition_(prev, x);
            next[static_cast<std::size_t>(x)] = log_sum_exp(terms) + log_emission_(t, x);
        }
        alpha.swap(next);
    }
    log_evidence_ = log_sum_exp(alpha);
    if (!std::isfinite(log_evidence_))
        throw ValidationError("observations have zero probability under the model");
}

void MixingProfile::validate() const
{
    if (!(sigma_minus > 0.0) || !(sigma_plus >= sigma_minus) || !std::isfinite(sigma_plus))
        throw ValidationError("mixing profile requires 0 < sigma- <= sigma+");
    if (!(delta >= 1.0) || !std::isfinite(delta))
        throw ValidationError("mixing profile requires delta >= 1");
    if (h < 1)
        throw ValidationError("mixing profile requires h >= 1");
}

double log_sum_exp(std::span<const double> v) noexcept
{
    double hi = kNegInf;
    for (double a : v)
        hi = std::max(hi, a);
    if (hi == kNegInf)
        return kNegInf;
    double s = 0.0;
    for (double a : v)
        s += std::exp(a - hi);
    return hi + std::log(s);
}

double jsd_log_density(const SmoothingTarget& target, std::span<const State> x)
{
    const std::size_t n = target.length();
    if (x.size() != n)
        throw ValidationError("trajectory length " + std::to_string(x.size())
                              + " does not match observation length " + std::to_string(n));
    const int k = target.num_states();
    double lp = 0.0;
    for (std::size_t t = 0; t < n; ++t)
    {
        if (x[t] < 0 || x[t] >= k)
            throw ValidationError("trajectory entry at t=" + std::to_string(t + 1)
                                  + " is not a model state");
        const double lg = target.log_emission(t, x[t]);
        if (lg == kNegInf)
            throw ValidationError("zero emission probability at t=" + std::to_string(t + 1));
        const double lm = t == 0 ? target.log_initial(x[0]) : target.log_transition(x[t - 1], x[t]);
        if (lm == kNegInf)
            throw ValidationError("zero transition probability into t=" + std::to_string(t + 1));
        lp += lm + lg;
    }
    return lp - target.log_evidence();
}

MixingProfile mixing_profile(const SmoothingTarget& target, int h)
{
    if (h < 1)
        throw ValidationError("mixing profile requires h >= 1");
    const auto& model = target.model();
    const double k = model.num_states();
    const Eigen::MatrixXd& p = model.transition();

    MixingProfile profile;
    profile.h = h;
    profile.sigma_plus = k * p.maxCoeff();

    // integral against nu over the h-1 intermediate states of prod m = K * P^h
    Eigen::MatrixXd composite = p;
    for (int i = 1; i < h; ++i)
        composite = composite * p;
    profile.sigma_minus = k * composite.minCoeff();

    double worst_ratio = 1.0;
    const auto& lg = target.log_emission_table();
    for (Eigen::Index t = 0; t < lg.rows(); ++t)
    {
        const double lo = lg.row(t).minCoeff();
        if (lo == kNegInf)
            throw ValidationError("S2 unverifiable: inf_x g(x, y_t) = 0 at t=" + std::to_string(t + 1));
        worst_ratio = std::max(worst_ratio, std::exp(lg.row(t).maxCoeff() - lo));
    }
    profile.delta = std::pow(worst_ratio, h);
    return profile;
}

std::size_t sample_categorical(std::span<const double> probabilities, StreamRng& rng)
{
    const double u = rng.uniform();
    double total = 0.0;
    for (double p : probabilities)
        total += p;
    const double target = u * total;
    double cumulative = 0.0;
    std::size_t last_positive = 0;
    for (std::size_t i = 0; i < probabilities.size(); ++i)
    {
        if (probabilities[i] <= 0.0)
            continue;
        cumulative += probabilities[i];
        last_positive = i;
        if (target < cumulative)
            return i;
    }
    return last_positive;
}

std::size_t sample_log_categorical(std::span<const double> log_weights, StreamRng& rng)
{
    const double norm = log_sum_exp(log_weights);
    if (norm == kNegInf)
        throw Error("all weights are zero");
    const double u = rng.uniform();
    double cumulative = 0.0;
    std::size_t last_positive = 0;
    for (std::size_t i = 0; i < log_weights.size(); ++i)
    {
        if (log_weights[i] == kNegInf)
            continue;
        cumulative += std::exp(log_weights[i] - norm);
        last_positive = i;
        if (u < cumulative)
            return i;
    }
    return last_positive;
}

Trajectory simulate_prior(const HmmModel& model, std::size_t length, StreamRng& rng)
{
    Trajectory x(length);
    const Eigen::VectorXd& mu = model.initial();
    const Eigen::MatrixXd& p = model.transition();
    std::vector<double> row(static_cast<std::size_t>(model.num_states()));
    for (std::size_t t = 0; t < length; ++t)
    {
        for (int j = 0; j < model.num_states(); ++j)
            row[static_cast<std::size_t>(j)] = t == 0 ? mu(j) : p(x[t - 1], j);
        x[t] = static_cast<State>(sample_categorical(row, rng));
    }
    return x;
}

Simulation simulate(const HmmModel& model, std::size_t length, StreamRng& rng)
{
    Simulation sim;
    sim.states = simulate_prior(model, length, rng);
    sim.observations.reserve(length);
    for (State x : sim.states)
    {
        std::visit(
            [&](const auto& e) {
                using E = std::decay_t<decltype(e)>;
                if constexpr (std::is_same_v<E, DiscreteEmission>)
                {
                    std::vector<double> row(static_cast<std::size_t>(e.table.cols()));
                    for (Eigen::Index j = 0; j < e.table.cols(); ++j)
                        row[static_cast<std::size_t>(j)] = e.table(x, j);
                    sim.observations.push_back(static_cast<double>(sample_categorical(row, rng)));
                }
                else if constexpr (std::is_same_v<E, GaussianEmission>)
                {
                    // Box-Muller
                    const double u1 = 1.0 - rng.uniform();
                    const double u2 = rng.uniform();
                    const double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
                    sim.observations.push_back(e.means(x) + e.sds(x) * z);
                }
                else
                {
                    throw ValidationError("cannot simulate observations from a custom emission density");
                }
            },
            model.emission());
    }
    return sim;
}

}  // namespace blockpg
