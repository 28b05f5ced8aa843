#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "blockpg/blocking.hpp"
#include "blockpg/hmm.hpp"
#include "blockpg/schedule.hpp"

namespace blockpg {

enum class MatrixSystem
{
    Original,  // one row/column per site
    Lumped,    // one row/column per segment of the lumped system
};

/*!
 * Nonnegative matrix W with osc_j(P f) <= sum_i osc_i(f) W_ij.
 *
 * For the ideal kernel of block J, rows outside J are identity rows and
 * rows inside J are nonzero only in the boundary columns of J.
 */
struct WassersteinMatrix
{
    Eigen::MatrixXd entries;
    MatrixSystem system = MatrixSystem::Original;

    Eigen::Index size() const noexcept { return entries.rows(); }
    double operator()(std::size_t i, std::size_t j) const
    {
        return entries(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    }
};

//! alpha = 1 - delta^{(1-h)/h} sigma- / sigma+, in [0, 1).
double coupling_alpha(const MixingProfile& profile);

//! alpha^{floor(distance / h)}, with alpha^0 = 1 even for alpha = 0.
double alpha_power(double alpha, std::size_t distance, int h);

/*!
 * Wasserstein matrix of the ideal kernel updating `block` (sites 0..T-1):
 * row i in J has alpha^{floor((i-(s-1))/h)} in column s-1 and
 * alpha^{floor((u+1-i)/h)} in column u+1, where those columns exist.
 */
WassersteinMatrix ideal_block_wasserstein(double alpha, int h, const Interval& block, std::size_t length);

//! Ideal matrices for every block of a cover.
std::vector<WassersteinMatrix> ideal_cover_wasserstein(double alpha, int h, const BlockCover& cover);

/*!
 * (2m-1) x (2m-1) matrix for block k (0-based) of the lumped system of a
 * regular cover with block size L and overlap p. Requires L > 2p >= 2.
 */
WassersteinMatrix lumped_block_wasserstein(double alpha, int h, std::size_t block_size, std::size_t overlap,
                                           std::size_t num_blocks, std::size_t k);

std::vector<WassersteinMatrix> lumped_cover_wasserstein(double alpha, int h, std::size_t block_size,
                                                        std::size_t overlap, std::size_t num_blocks);

/*!
 * Adds epsilon to rows in `block` and columns in block plus its boundary.
 * Entries above one make the resulting bound vacuous; `vacuous` reports it.
 */
WassersteinMatrix perturb(const WassersteinMatrix& w, double epsilon, const Interval& block,
                          bool* vacuous = nullptr);

//! W^{J_last} ... W^{J_first} for the visit order J_first, ..., J_last.
Eigen::MatrixXd compose_sweep(std::span<const WassersteinMatrix> matrices, std::span<const std::size_t> order);

//! Max row sum of compose_sweep().
double sweep_matrix_norm(std::span<const WassersteinMatrix> matrices, std::span<const std::size_t> order);

struct A1Check
{
    double lambda = 0.0;
    bool satisfied = true;
    std::optional<std::size_t> worst_block;
    std::optional<std::size_t> worst_site;
    std::string detail;
};

//! lambda = max over blocks J and sites i in J that are boundary points of any block.
A1Check verify_A1(const BlockCover& cover, std::span<const WassersteinMatrix> matrices);

struct IdealRate
{
    bool applicable = false;
    double lambda = 0.0;
    double norm_bound = 0.0;  // bound on ||W||_inf of one sweep
    double decay = 0.0;       // per-sweep factor
    std::string note;
};

/*!
 * Per-sweep decay for the ideal sampler. Parallel: lambda^2 with norm
 * bound 2. Left-to-right: beta = max_k lambda a_k + b_k with norm bound
 * 1 + lambda. Any other cover structure falls back to lambda with the
 * directly composed norm.
 */
IdealRate rate_ideal(const BlockCover& cover, std::span<const WassersteinMatrix> matrices, ScheduleKind schedule);

//! Bounds for the regular-cover bootstrap PG sampler, and their ideal counterparts.
struct RateReport
{
    double alpha = 0.0;
    int h = 1;
    std::size_t block_size = 0;
    std::size_t overlap = 0;
    std::size_t particles = 0;
    double c = 1.0;
    double epsilon = 0.0;
    double lambda_ideal = 0.0;   // A1 constant
    double beta = 0.0;           // ideal left-to-right decay
    double lambda_lumped = 0.0;  // 2 alpha^{floor((p+1)/h)}
    double w_hat = 0.0;          // alpha^{floor(1/h)} + alpha^{floor((L-p+1)/h)}
    double lambda_pg_par = 0.0;
    double lambda_pg_lr = 0.0;
    bool a1_holds = false;
    bool lumped_lambda_below_one = false;
    bool par_applicable = false;
    bool lr_applicable = false;
    bool lumping_defined = true;
    bool epsilon_guaranteed = true;  // false for non-bootstrap proposals

    //! Semicolon separated flag names, "ok" if none.
    std::string flags() const;
};

//! Rates for a given epsilon (epsilon = 0 gives the ideal sampler).
RateReport common_rates(double alpha, int h, std::size_t block_size, std::size_t overlap, double epsilon);

//! Rates with epsilon(N, L) from the minorisation constant of the profile.
RateReport rate_pg_common(const MixingProfile& profile, std::size_t block_size, std::size_t overlap,
                          std::size_t particles);

//! Per-site bounds on the row sums of the perturbed one-sweep matrix.
struct GeneralBound
{
    bool applicable = false;
    std::string reason;
    std::vector<double> per_site;
    double lambda = 0.0;
    double beta = 0.0;   // left-to-right only
    double w_hat = 0.0;
    double w_bar = 0.0;  // left-to-right only
    double c = 0.0;      // left-to-right only
    std::size_t max_block = 0;
    std::size_t max_overlap = 0;

    double max() const;
};

/*!
 * Parallel sweep bound from ideal block matrices and a common epsilon.
 * Sites exclusive to an odd-numbered block, exclusive to an even-numbered
 * block, and shared overlaps each get their own expression.
 */
GeneralBound rate_pg_general_par(const BlockCover& cover, std::span<const WassersteinMatrix> ideal,
                                 double epsilon);

//! Left-to-right sweep bound; inapplicable unless w_bar + (L1 + 1) epsilon < 1.
GeneralBound rate_pg_general_lr(const BlockCover& cover, std::span<const WassersteinMatrix> ideal,
                                double epsilon);

std::string rate_csv_header();
std::string rate_csv_row(const RateReport& r);

}  // namespace blockpg
