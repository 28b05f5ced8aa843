#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include "blockpg/blocking.hpp"
#include "blockpg/hmm.hpp"
#include "blockpg/rng.hpp"

namespace blockpg {

/*!
 * Proposal r_t(x_{t-1}, x_t) for the conditional SMC pass.
 *
 * The bootstrap proposal draws from mu at site 0 and from the transition
 * kernel elsewhere, so the importance weights reduce to g(x_t, y_t).
 * A custom proposal fills a probability vector over the K states given the
 * previous state (absent at site 0) and the site index. At the last site of
 * a block it also receives the fixed right boundary state, if any.
 */
class ProposalKernel
{
  public:
    enum class Kind
    {
        Bootstrap,
        Custom,
    };

    using Fill = std::function<void(std::optional<State> prev, std::size_t site,
                                    std::optional<State> right_boundary, std::span<double> probs)>;

    static ProposalKernel bootstrap() { return ProposalKernel(); }
    static ProposalKernel custom(Fill fill);

    Kind kind() const noexcept { return kind_; }

    //! Proposal probabilities for one site.
    void probabilities(const SmoothingTarget& target, std::optional<State> prev, std::size_t site,
                       std::optional<State> right_boundary, std::span<double> out) const;

  private:
    ProposalKernel() = default;

    Kind kind_ = Kind::Bootstrap;
    Fill fill_;
};

//! Exact draw from the block conditional.
struct IdealKernel
{
};

//! Conditional SMC with a given number of particles (N >= 2).
struct PgKernel
{
    std::size_t particles = 2;
    ProposalKernel proposal = ProposalKernel::bootstrap();
};

using KernelConfig = std::variant<IdealKernel, PgKernel>;

/*!
 * Particles, log-weights and ancestors of one conditional SMC pass.
 *
 * Row i, column t holds particle i at the t-th site of the block. The last
 * slot (N-1) is pinned to the reference trajectory with ancestor N-1.
 */
struct ParticleSystem
{
    std::size_t particles = 0;
    Interval block;
    std::vector<State> states;          // particles x |J|
    std::vector<double> log_weights;    // particles x |J|
    std::vector<std::size_t> ancestors; // particles x (|J| - 1); column t-1 is A_t
    std::size_t selected = 0;

    std::size_t reference_index() const noexcept { return particles - 1; }
    State state(std::size_t i, std::size_t t) const { return states[i * block.size() + t]; }
    double log_weight(std::size_t i, std::size_t t) const { return log_weights[i * block.size() + t]; }
    std::size_t ancestor(std::size_t i, std::size_t t) const
    {
        return ancestors[i * (block.size() - 1) + (t - 1)];
    }

    //! Ancestral path of particle i at the last site, as block states.
    std::vector<State> trajectory(std::size_t i) const;
};

/*!
 * One draw from the particle Gibbs kernel Q_N^J(x*_{J+}, .).
 *
 * `reference` is the full current trajectory; only its values on J and the
 * boundary of J are read. Returns the new values for the sites of `block`.
 * If `trace` is given it receives the full particle system.
 * Throws ValidationError for N < 2 and Error if all weights vanish.
 */
std::vector<State> pg_block_step(const SmoothingTarget& target, std::span<const State> reference,
                                 const Interval& block, std::size_t particles,
                                 const ProposalKernel& proposal, StreamRng& rng,
                                 ParticleSystem* trace = nullptr);

//! Default bound on the number of enumerated outcomes of one PG pass.
inline constexpr std::uint64_t kPgEnumerationCap = 10'000'000;

/*!
 * Exact law of the PG kernel output by enumerating every outcome of the
 * initial draws, ancestor draws, propagation draws and the final selection.
 *
 * The result is indexed by block configurations in mixed-radix order with
 * the first block site varying fastest. Throws CapacityError if the
 * number of outcomes could exceed `cap`.
 */
std::vector<double> pg_kernel_law(const SmoothingTarget& target, std::span<const State> reference,
                                  const Interval& block, std::size_t particles,
                                  const ProposalKernel& proposal,
                                  std::uint64_t cap = kPgEnumerationCap);

//! Upper bound on the outcome count pg_kernel_law would visit.
std::uint64_t pg_enumeration_size(int num_states, std::size_t block_size, std::size_t particles);

//! Minorisation constants of the bootstrap PG kernel.
struct MinorisationBound
{
    double c = 1.0;        // (2 delta sigma+ / sigma- - 1)^{-1}
    double epsilon = 0.0;  // 1 - (1 - 1 / (c (N - 1) + 1))^L
};

MinorisationBound minorisation_bound(const MixingProfile& profile, std::size_t particles,
                                     std::size_t block_size);

//! epsilon(N, L) for a given c.
double pg_epsilon(double c, std::size_t particles, std::size_t block_size);

/*!
 * Largest gamma with Q_N^J(x, .) >= gamma * phi_x^J over every boundary and
 * reference configuration, by exact enumeration of the bootstrap PG law.
 */
double minorisation_empirical(const SmoothingTarget& target, const Interval& block,
                              std::size_t particles, std::uint64_t cap = kPgEnumerationCap);

}  // namespace blockpg
