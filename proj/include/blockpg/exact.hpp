#pragma once

#include <cstddef>
#include <optional>
#include <ostream>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "blockpg/blocking.hpp"
#include "blockpg/hmm.hpp"
#include "blockpg/pg_kernel.hpp"
#include "blockpg/schedule.hpp"

namespace blockpg {

// Trajectories and block configurations are enumerated in mixed-radix
// order with the first site varying fastest.

//! Default cap on K^T for dense exact operators.
inline constexpr std::size_t kDefaultStateCap = 4096;

//! Default cap on K^|J| for block conditional tables (2^20).
inline constexpr std::size_t kDefaultTableCap = std::size_t{1} << 20;

std::size_t encode_trajectory(std::span<const State> x, int num_states);
Trajectory decode_trajectory(std::size_t index, std::size_t length, int num_states);
std::size_t encode_block(std::span<const State> x, const Interval& block, int num_states);

//! phi_x^J as a table over block configurations.
struct BlockConditional
{
    Interval block;
    std::vector<double> table;
    std::optional<State> left;
    std::optional<State> right;
};

/*!
 * Exact conditional law of x_J given the rest of x.
 *
 * Throws CapacityError if K^|J| exceeds `cap`; sample_block_conditional()
 * draws from the same law without building the table.
 */
BlockConditional block_conditional(const SmoothingTarget& target, std::span<const State> x,
                                   const Interval& block, std::size_t cap = kDefaultTableCap);

//! Exact draw of x_J from phi_x^J by forward filtering and backward sampling within the block.
std::vector<State> sample_block_conditional(const SmoothingTarget& target, std::span<const State> x,
                                            const Interval& block, StreamRng& rng);

//! phi over all K^T trajectories.
Eigen::VectorXd enumerate_target(const SmoothingTarget& target, std::size_t cap = kDefaultStateCap);

//! Smoothing marginals P(X_t = x | y_{1:T}) by forward-backward, T x K.
Eigen::MatrixXd smoothing_marginals(const SmoothingTarget& target);

//! Dense one-sweep transition matrix over the enumerated state space.
struct SweepOperator
{
    Eigen::MatrixXd matrix;
    Eigen::VectorXd target;  // phi, in the same enumeration order
    int num_states = 0;
    std::size_t length = 0;

    Trajectory label(std::size_t index) const { return decode_trajectory(index, length, num_states); }
};

//! Transition matrix P^J of one block update.
Eigen::MatrixXd block_operator(const SmoothingTarget& target, const Interval& block,
                               const KernelConfig& kernel, std::size_t cap = kDefaultStateCap);

//! Product P^{J_a} P^{J_b} ... for the given visit order.
Eigen::MatrixXd compose_operator(const SmoothingTarget& target, const BlockCover& cover,
                                 std::span<const std::size_t> order, const KernelConfig& kernel,
                                 std::size_t cap = kDefaultStateCap);

/*!
 * Exact one-sweep operator for a schedule. The reversible pair yields
 * 1/2 (forward + reversed). PG kernels are enumerated exactly, which only
 * works for tiny K, |J| and N (see pg_enumeration_size()).
 */
SweepOperator sweep_operator(const SmoothingTarget& target, const BlockCover& cover,
                             const SweepSchedule& schedule, const KernelConfig& kernel,
                             std::size_t cap = kDefaultStateCap);

//! Total variation between init * P^k and phi.
double tv_to_target(const SweepOperator& op, const Eigen::VectorXd& init, std::size_t sweeps);

//! TV distances for k = 0..max_sweeps.
std::vector<double> tv_curve(const SweepOperator& op, const Eigen::VectorXd& init, std::size_t max_sweeps);

//! Dense CSV: header "from,<labels>" and one row per source trajectory.
void write_operator_csv(const SweepOperator& op, std::ostream& os);

}  // namespace blockpg
