#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "blockpg/error.hpp"
#include "blockpg/rng.hpp"

namespace blockpg {

//! A latent state in {0, ..., K-1}.
using State = int;

//! A point x_{1:T} of the state space, stored 0-based.
using Trajectory = std::vector<State>;

//! Emission table over a finite alphabet: g(x, y) = table(x, y).
struct DiscreteEmission
{
    Eigen::MatrixXd table;  // K x M, rows sum to one
};

//! Gaussian emission y | x ~ N(means[x], sds[x]^2).
struct GaussianEmission
{
    Eigen::VectorXd means;
    Eigen::VectorXd sds;
};

//! User supplied log g(x, y).
struct CustomEmission
{
    std::function<double(State, double)> log_density;
};

using Emission = std::variant<DiscreteEmission, GaussianEmission, CustomEmission>;

/*!
 * Time-homogeneous HMM over a finite state space.
 *
 * Transition rows are stored as conditional probabilities. Whenever a
 * density m(x, x') is needed (mixing constants), it is taken against the
 * uniform dominating measure nu = 1/K on the K states, i.e.
 * m(x, x') = K * P(x, x').
 */
class HmmModel
{
  public:
    //! Validates the invariants and throws ValidationError on the first failure.
    HmmModel(Eigen::VectorXd initial, Eigen::MatrixXd transition, Emission emission);

    int num_states() const noexcept { return static_cast<int>(initial_.size()); }
    const Eigen::VectorXd& initial() const noexcept { return initial_; }
    const Eigen::MatrixXd& transition() const noexcept { return transition_; }
    const Emission& emission() const noexcept { return emission_; }

    double log_emission(State x, double y) const;

    //! Transition density against the uniform dominating measure.
    double transition_density(State from, State to) const
    {
        return num_states() * transition_(from, to);
    }

  private:
    Eigen::VectorXd initial_;
    Eigen::MatrixXd transition_;
    Emission emission_;
};

//! Fixed observation record y_{1:T}; immutable once constructed.
class ObservationRecord
{
  public:
    explicit ObservationRecord(std::vector<double> y);

    std::size_t length() const noexcept { return y_.size(); }
    double operator[](std::size_t t) const noexcept { return y_[t]; }
    std::span<const double> values() const noexcept { return y_; }

  private:
    std::vector<double> y_;
};

/*!
 * A model paired with its observations, with log g(x, y_t) cached.
 *
 * This is the joint smoothing distribution phi every sampler targets.
 * Construction fails with a ValidationError naming t if some y_t has
 * g(x, y_t) = 0 for every x, or if any emission value is not finite.
 */
class SmoothingTarget
{
  public:
    SmoothingTarget(HmmModel model, ObservationRecord obs);

    const HmmModel& model() const noexcept { return model_; }
    const ObservationRecord& observations() const noexcept { return obs_; }
    int num_states() const noexcept { return model_.num_states(); }
    std::size_t length() const noexcept { return obs_.length(); }

    double log_initial(State x) const noexcept { return log_initial_[x]; }
    double log_transition(State from, State to) const noexcept
    {
        return log_transition_(from, to);
    }
    double log_emission(std::size_t t, State x) const noexcept
    {
        return log_emission_(static_cast<Eigen::Index>(t), x);
    }
    const Eigen::MatrixXd& log_emission_table() const noexcept { return log_emission_; }

    //! log p(y_{1:T}) by the forward algorithm.
    double log_evidence() const noexcept { return log_evidence_; }

  private:
    HmmModel model_;
    ObservationRecord obs_;
    Eigen::VectorXd log_initial_;
    Eigen::MatrixXd log_transition_;
    Eigen::MatrixXd log_emission_;  // T x K
    double log_evidence_ = 0.0;
};

//! Strong mixing constants (sigma-, sigma+, delta, h).
struct MixingProfile
{
    double sigma_minus = 1.0;
    double sigma_plus = 1.0;
    double delta = 1.0;
    int h = 1;

    //! Throws ValidationError unless 0 < sigma- <= sigma+, delta >= 1, h >= 1.
    void validate() const;
};

//! log(sum(exp(v))) without overflow; -inf for an empty or all -inf input.
double log_sum_exp(std::span<const double> v) noexcept;

//! log phi(x), the normalised joint smoothing log-probability.
double jsd_log_density(const SmoothingTarget& target, std::span<const State> x);

/*!
 * Strong mixing constants of a tabular model over the given observations.
 *
 * sigma+ is the largest transition density, sigma- the smallest h-step
 * composite density K * (P^h)(x, x'), and delta = (max_t sup g / inf g)^h.
 * Throws ValidationError if some y_t has inf_x g(x, y_t) = 0.
 */
MixingProfile mixing_profile(const SmoothingTarget& target, int h);

//! Forward simulation of (X, Y) from the model; discrete or Gaussian emissions only.
struct Simulation
{
    Trajectory states;
    std::vector<double> observations;
};
Simulation simulate(const HmmModel& model, std::size_t length, StreamRng& rng);

//! Forward simulation of X from mu and the transition kernel, ignoring y.
Trajectory simulate_prior(const HmmModel& model, std::size_t length, StreamRng& rng);

//! Inverse-CDF draw from unnormalised log-weights; ties resolve to the lower index.
std::size_t sample_log_categorical(std::span<const double> log_weights, StreamRng& rng);

//! Inverse-CDF draw from a probability vector; ties resolve to the lower index.
std::size_t sample_categorical(std::span<const double> probabilities, StreamRng& rng);

}  // namespace blockpg
