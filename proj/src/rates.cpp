#include "blockpg/rates.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "blockpg/error.hpp"
#include "blockpg/pg_kernel.hpp"

namespace blockpg {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Boundary-column entries of the ideal matrix of block k at row i (0 if absent).
struct BoundaryEntries
{
    const BlockCover& cover;
    std::span<const WassersteinMatrix> w;

    double left(std::size_t k, std::size_t i) const
    {
        const auto& b = cover.blocks[k];
        return b.first > 0 ? w[k](i, b.first - 1) : 0.0;
    }
    double right(std::size_t k, std::size_t i) const
    {
        const auto& b = cover.blocks[k];
        return b.last + 1 < cover.length ? w[k](i, b.last + 1) : 0.0;
    }
};

void check_matrices(const BlockCover& cover, std::span<const WassersteinMatrix> w)
{
    if (w.size() != cover.blocks.size())
        throw ValidationError("need one Wasserstein matrix per block");
    for (const auto& m : w)
        if (m.entries.rows() != static_cast<Eigen::Index>(cover.length) || m.entries.cols() != m.entries.rows())
            throw ValidationError("Wasserstein matrix dimension does not match the cover length");
}

bool ordered(const BlockCover& cover)
{
    for (const auto& v : validate_cover(cover))
        if (v.assumption != CoverAssumption::B3)
            return false;
    return true;
}

std::size_t max_block(const BlockCover& cover)
{
    std::size_t l = 0;
    for (const auto& b : cover.blocks)
        l = std::max(l, b.size());
    return l;
}

std::size_t max_overlap(const BlockCover& cover)
{
    std::size_t l = 0;
    for (std::size_t k = 1; k < cover.blocks.size(); ++k)
        if (cover.blocks[k - 1].last >= cover.blocks[k].first)
            l = std::max(l, cover.blocks[k - 1].last - cover.blocks[k].first + 1);
    return l;
}

double max_boundary_row_sum(const BlockCover& cover, std::span<const WassersteinMatrix> w)
{
    const BoundaryEntries e{cover, w};
    double best = 0.0;
    for (std::size_t k = 0; k < cover.blocks.size(); ++k)
        for (std::size_t i = cover.blocks[k].first; i <= cover.blocks[k].last; ++i)
            best = std::max(best, e.left(k, i) + e.right(k, i));
    return best;
}

std::string format_value(double v)
{
    if (std::isnan(v))
        return "NA";
    std::ostringstream os;
    os.precision(12);
    os << v;
    return os.str();
}

}  // namespace

double coupling_alpha(const MixingProfile& profile)
{
    profile.validate();
    const double h = profile.h;
    return 1.0 - std::pow(profile.delta, (1.0 - h) / h) * profile.sigma_minus / profile.sigma_plus;
}

double alpha_power(double alpha, std::size_t distance, int h)
{
    const std::size_t e = distance / static_cast<std::size_t>(h);
    if (e == 0)
        return 1.0;
    return std::pow(alpha, static_cast<double>(e));
}

WassersteinMatrix ideal_block_wasserstein(double alpha, int h, const Interval& block, std::size_t length)
{
    if (block.first > block.last || block.last >= length)
        throw ValidationError("block lies outside 1..T");
    const auto n = static_cast<Eigen::Index>(length);
    WassersteinMatrix w{Eigen::MatrixXd::Identity(n, n), MatrixSystem::Original};
    for (std::size_t i = block.first; i <= block.last; ++i)
    {
        const auto r = static_cast<Eigen::Index>(i);
        w.entries.row(r).setZero();
        if (block.first > 0)
            w.entries(r, static_cast<Eigen::Index>(block.first - 1)) = alpha_power(alpha, i - (block.first - 1), h);
        if (block.last + 1 < length)
            w.entries(r, static_cast<Eigen::Index>(block.last + 1)) = alpha_power(alpha, block.last + 1 - i, h);
    }
    return w;
}

std::vector<WassersteinMatrix> ideal_cover_wasserstein(double alpha, int h, const BlockCover& cover)
{
    std::vector<WassersteinMatrix> out;
    out.reserve(cover.blocks.size());
    for (const auto& b : cover.blocks)
        out.push_back(ideal_block_wasserstein(alpha, h, b, cover.length));
    return out;
}

WassersteinMatrix lumped_block_wasserstein(double alpha, int h, std::size_t block_size, std::size_t overlap,
                                           std::size_t num_blocks, std::size_t k)
{
    if (overlap < 1 || block_size <= 2 * overlap)
        throw ValidationError("lumped matrices need L > 2p >= 2");
    if (num_blocks < 1 || k >= num_blocks)
        throw ValidationError("lumped block index out of range");
    const std::size_t n = 2 * num_blocks - 1;
    WassersteinMatrix w{Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n)),
                        MatrixSystem::Lumped};

    const double near = alpha_power(alpha, 1, h);
    const double far = alpha_power(alpha, block_size - overlap + 1, h);
    const double mid = alpha_power(alpha, overlap + 1, h);

    // 1-based lumped indices: rows 2k-2, 2k-1, 2k; boundary columns 2k-3, 2k+1
    const std::size_t kk = k + 1;
    const long left_col = static_cast<long>(2 * kk) - 3;
    const long right_col = static_cast<long>(2 * kk) + 1;
    const double left_vals[3] = {near, mid, far};
    const double right_vals[3] = {far, mid, near};
    for (int j = 0; j < 3; ++j)
    {
        const long row = static_cast<long>(2 * kk) - 2 + j;
        if (row < 1 || row > static_cast<long>(n))
            continue;
        const auto r = static_cast<Eigen::Index>(row - 1);
        w.entries.row(r).setZero();
        if (left_col >= 1)
            w.entries(r, static_cast<Eigen::Index>(left_col - 1)) = left_vals[j];
        if (right_col <= static_cast<long>(n))
            w.entries(r, static_cast<Eigen::Index>(right_col - 1)) = right_vals[j];
    }
    return w;
}

std::vector<WassersteinMatrix> lumped_cover_wasserstein(double alpha, int h, std::size_t block_size,
                                                        std::size_t overlap, std::size_t num_blocks)
{
    std::vector<WassersteinMatrix> out;
    for (std::size_t k = 0; k < num_blocks; ++k)
        out.push_back(lumped_block_wasserstein(alpha, h, block_size, overlap, num_blocks, k));
    return out;
}

WassersteinMatrix perturb(const WassersteinMatrix& w, double epsilon, const Interval& block, bool* vacuous)
{
    if (!(epsilon >= 0.0 && epsilon < 1.0))
        throw ValidationError("perturbation epsilon must lie in [0, 1)");
    const auto n = static_cast<std::size_t>(w.size());
    if (block.first > block.last || block.last >= n)
        throw ValidationError("perturbed block lies outside the matrix");
    WassersteinMatrix out = w;
    const std::size_t lo = block.first > 0 ? block.first - 1 : 0;
    const std::size_t hi = std::min(block.last + 1, n - 1);
    for (std::size_t i = block.first; i <= block.last; ++i)
        for (std::size_t j = lo; j <= hi; ++j)
            out.entries(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) += epsilon;
    if (vacuous)
        *vacuous = out.entries.maxCoeff() > 1.0;
    return out;
}

Eigen::MatrixXd compose_sweep(std::span<const WassersteinMatrix> matrices, std::span<const std::size_t> order)
{
    if (matrices.empty())
        throw ValidationError("no matrices to compose");
    const auto n = matrices.front().size();
    Eigen::MatrixXd acc = Eigen::MatrixXd::Identity(n, n);
    for (std::size_t k : order)
    {
        if (k >= matrices.size())
            throw ValidationError("visit order names a missing block matrix");
        if (matrices[k].size() != n)
            throw ValidationError("Wasserstein matrices have mismatched dimensions");
        acc = matrices[k].entries * acc;
    }
    return acc;
}

double sweep_matrix_norm(std::span<const WassersteinMatrix> matrices, std::span<const std::size_t> order)
{
    return compose_sweep(matrices, order).cwiseAbs().rowwise().sum().maxCoeff();
}

A1Check verify_A1(const BlockCover& cover, std::span<const WassersteinMatrix> matrices)
{
    check_matrices(cover, matrices);
    const BoundaryEntries e{cover, matrices};
    std::vector<bool> is_boundary(cover.length, false);
    for (std::size_t k = 0; k < cover.blocks.size(); ++k)
    {
        const Boundary bd = boundary(cover, k);
        if (bd.left)
            is_boundary[*bd.left] = true;
        if (bd.right)
            is_boundary[*bd.right] = true;
    }
    A1Check out;
    for (std::size_t k = 0; k < cover.blocks.size(); ++k)
    {
        for (std::size_t i = cover.blocks[k].first; i <= cover.blocks[k].last; ++i)
        {
            if (!is_boundary[i])
                continue;
            const double s = e.left(k, i) + e.right(k, i);
            if (s > out.lambda || !out.worst_block)
            {
                if (s >= out.lambda)
                {
                    out.lambda = s;
                    out.worst_block = k;
                    out.worst_site = i;
                }
            }
        }
    }
    out.satisfied = out.lambda < 1.0;
    if (!out.satisfied)
    {
        std::ostringstream os;
        os << "A1 violated: boundary row sum " << out.lambda << " >= 1 at site " << *out.worst_site + 1
           << " of block " << *out.worst_block + 1;
        out.detail = os.str();
    }
    return out;
}

IdealRate rate_ideal(const BlockCover& cover, std::span<const WassersteinMatrix> matrices, ScheduleKind schedule)
{
    const A1Check a1 = verify_A1(cover, matrices);
    IdealRate out;
    out.lambda = a1.lambda;
    if (!a1.satisfied)
    {
        out.note = a1.detail;
        return out;
    }
    if (!ordered(cover))
    {
        if (schedule == ScheduleKind::Parallel)
        {
            out.note = "parallel sweeps need B1 and B2";
            return out;
        }
        // arbitrary cover: only the generic iterate bound is available
        std::vector<std::size_t> order(cover.blocks.size());
        for (std::size_t k = 0; k < order.size(); ++k)
            order[k] = k;
        out.applicable = true;
        out.decay = a1.lambda;
        out.norm_bound = sweep_matrix_norm(matrices, order);
        out.note = "cover violates B1/B2; generic bound";
        return out;
    }
    out.applicable = true;
    if (schedule == ScheduleKind::Parallel)
    {
        out.decay = a1.lambda * a1.lambda;
        out.norm_bound = 2.0;
        return out;
    }
    const BoundaryEntries e{cover, matrices};
    double beta = 0.0;
    for (std::size_t k = 1; k < cover.blocks.size(); ++k)
    {
        const std::size_t row = cover.blocks[k - 1].last + 1;
        beta = std::max(beta, a1.lambda * e.left(k, row) + e.right(k, row));
    }
    out.decay = beta;
    out.norm_bound = 1.0 + a1.lambda;
    return out;
}

std::string RateReport::flags() const
{
    std::vector<std::string> f;
    if (!a1_holds)
        f.push_back("A1_violated");
    if (!lumping_defined)
        f.push_back("lumping_undefined");
    if (!lumped_lambda_below_one)
        f.push_back("lambda_ge_1");
    if (!par_applicable)
        f.push_back("par_inapplicable");
    else if (lambda_pg_par >= 1.0)
        f.push_back("par_vacuous");
    if (!lr_applicable)
        f.push_back("lr_inapplicable");
    else if (lambda_pg_lr >= 1.0)
        f.push_back("lr_vacuous");
    if (!epsilon_guaranteed)
        f.push_back("epsilon_not_guaranteed");
    if (f.empty())
        return "ok";
    std::string out;
    for (const auto& s : f)
        out += (out.empty() ? "" : ";") + s;
    return out;
}

RateReport common_rates(double alpha, int h, std::size_t block_size, std::size_t overlap, double epsilon)
{
    if (h < 1 || !(alpha >= 0.0 && alpha < 1.0))
        throw ValidationError("rates need alpha in [0, 1) and h >= 1");
    if (block_size < 1 || overlap >= block_size)
        throw ValidationError("rates need 0 <= p < L");
    // epsilon(N, L) < 1 exactly but rounds to 1 for weakly mixing profiles; the flags then say so
    if (!(epsilon >= 0.0 && epsilon <= 1.0))
        throw ValidationError("epsilon must lie in [0, 1]");

    RateReport r;
    r.alpha = alpha;
    r.h = h;
    r.block_size = block_size;
    r.overlap = overlap;
    r.epsilon = epsilon;

    const double a_p1 = alpha_power(alpha, overlap + 1, h);
    const double a_lp = alpha_power(alpha, block_size - overlap, h);
    const double a_lp1 = alpha_power(alpha, block_size - overlap + 1, h);
    const double a_1 = alpha_power(alpha, 1, h);

    r.lambda_ideal = a_lp + a_p1;
    r.beta = r.lambda_ideal * a_p1 + a_lp;
    r.a1_holds = r.lambda_ideal < 1.0;

    r.lambda_lumped = 2.0 * a_p1;
    r.w_hat = a_1 + a_lp1;
    r.lumped_lambda_below_one = r.lambda_lumped < 1.0;
    r.lumping_defined = overlap >= 1 && block_size > 2 * overlap;

    const double eps = epsilon;
    if (r.lumping_defined)
    {
        const double lam = r.lambda_lumped;
        const double wv = std::max(r.w_hat, 1.0);
        r.par_applicable = r.lumped_lambda_below_one;
        r.lambda_pg_par = r.par_applicable ? lam * wv + eps * (2.0 * lam + 25.0 * eps + 8.0 * wv) : kNaN;
        const double side = 2.0 * eps + a_p1;
        r.lr_applicable = r.lumped_lambda_below_one && side < 1.0;
        r.lambda_pg_lr = r.lr_applicable
                             ? lam + a_lp1 + 2.0 * eps * (3.0 * wv + 1.0 + lam) / (1.0 - side)
                             : kNaN;
    }
    else
    {
        // no lumped system: general bounds on three unlumped blocks
        const std::size_t m = 3;
        const BlockCover cover = build_cover((block_size - overlap) * m + overlap, block_size, overlap);
        const auto w = ideal_cover_wasserstein(alpha, h, cover);
        const GeneralBound par = rate_pg_general_par(cover, w, eps);
        const GeneralBound lr = rate_pg_general_lr(cover, w, eps);
        r.par_applicable = par.applicable;
        r.lambda_pg_par = par.applicable ? par.max() : kNaN;
        r.lr_applicable = lr.applicable;
        r.lambda_pg_lr = lr.applicable ? lr.max() : kNaN;
    }
    return r;
}

RateReport rate_pg_common(const MixingProfile& profile, std::size_t block_size, std::size_t overlap,
                          std::size_t particles)
{
    const MinorisationBound mb = minorisation_bound(profile, particles, block_size);
    RateReport r = common_rates(coupling_alpha(profile), profile.h, block_size, overlap, mb.epsilon);
    r.particles = particles;
    r.c = mb.c;
    return r;
}

double GeneralBound::max() const
{
    double m = 0.0;
    for (double v : per_site)
        m = std::max(m, v);
    return m;
}

GeneralBound rate_pg_general_par(const BlockCover& cover, std::span<const WassersteinMatrix> ideal, double epsilon)
{
    check_matrices(cover, ideal);
    GeneralBound out;
    if (!ordered(cover))
    {
        out.reason = "cover violates B1/B2";
        return out;
    }
    const auto members = site_membership(cover);
    const BoundaryEntries e{cover, ideal};
    out.max_block = max_block(cover);
    out.max_overlap = max_overlap(cover);
    out.w_hat = max_boundary_row_sum(cover, ideal);
    for (std::size_t i = 0; i < cover.length; ++i)
        if (members[i].size() == 1)
        {
            const std::size_t k = members[i][0];
            out.lambda = std::max(out.lambda, e.left(k, i) + e.right(k, i));
        }

    const double lam = out.lambda;
    const double what = out.w_hat;
    const double eps = epsilon;
    const double l = static_cast<double>(out.max_block);
    const double wv = std::max(1.0, what);
    out.per_site.resize(cover.length);
    for (std::size_t i = 0; i < cover.length; ++i)
    {
        if (members[i].size() == 1)
        {
            // block index k is 0-based: even k is an odd-numbered block
            if (members[i][0] % 2 == 0)
                out.per_site[i] = lam + eps * (l + 2.0);
            else
                out.per_site[i] = lam * lam + eps * (lam * (l + 4.0) + eps * (l + 2.0) * (l + 2.0) + l * wv);
        }
        else
        {
            out.per_site[i] = lam * what
                              + eps * (what * (l + 2.0) + 2.0 * lam + eps * (l + 2.0) * (l + 2.0) + l * wv);
        }
    }
    out.applicable = true;
    return out;
}

GeneralBound rate_pg_general_lr(const BlockCover& cover, std::span<const WassersteinMatrix> ideal, double epsilon)
{
    check_matrices(cover, ideal);
    GeneralBound out;
    if (!ordered(cover))
    {
        out.reason = "cover violates B1/B2";
        return out;
    }
    const auto members = site_membership(cover);
    const BoundaryEntries e{cover, ideal};
    out.max_block = max_block(cover);
    out.max_overlap = max_overlap(cover);
    out.w_hat = max_boundary_row_sum(cover, ideal);

    for (std::size_t i = 0; i < cover.length; ++i)
    {
        if (members[i].size() != 1)
            continue;
        const std::size_t k = members[i][0];
        const double denom = 1.0 - e.left(k, i);
        if (denom <= 0.0)
        {
            out.reason = "left boundary coefficient equals 1 at site " + std::to_string(i + 1);
            return out;
        }
        out.lambda = std::max(out.lambda, e.right(k, i) / denom);
    }
    for (std::size_t k = 1; k < cover.blocks.size(); ++k)
    {
        const auto& prev = cover.blocks[k - 1];
        const auto& cur = cover.blocks[k];
        for (std::size_t i = cur.first; i <= cur.last; ++i)
        {
            if (prev.contains(i))
                out.beta = std::max(out.beta, out.lambda * e.left(k, i) + e.right(k, i));
            else
                out.w_bar = std::max(out.w_bar, e.left(k, i));
        }
    }
    const double eps = epsilon;
    const double l1 = static_cast<double>(out.max_overlap);
    const double margin = 1.0 - (l1 + 1.0) * eps - out.w_bar;
    if (margin <= 0.0)
    {
        std::ostringstream os;
        os << "side condition w_bar + (L1+1) eps < 1 fails (" << out.w_bar + (l1 + 1.0) * eps << ")";
        out.reason = os.str();
        return out;
    }
    const double l = static_cast<double>(out.max_block);
    out.c = (l * std::max(out.w_hat * std::max(out.lambda, 1.0), 1.0) + 1.0 + out.lambda) / margin;
    out.per_site.resize(cover.length);
    for (std::size_t i = 0; i < cover.length; ++i)
        out.per_site[i] = members[i].size() == 1 ? out.lambda + out.c * eps : out.beta + 2.0 * out.c * eps;
    out.applicable = true;
    return out;
}

std::string rate_csv_header()
{
    return "alpha,h,L,p,N,epsilon,lambda_ideal,beta,lambda_lumped,w_hat,lambda_pg_par,lambda_pg_lr,flags";
}

std::string rate_csv_row(const RateReport& r)
{
    std::ostringstream os;
    os << format_value(r.alpha) << "," << r.h << "," << r.block_size << "," << r.overlap << "," << r.particles
       << "," << format_value(r.epsilon) << "," << format_value(r.lambda_ideal) << "," << format_value(r.beta)
       << "," << format_value(r.lambda_lumped) << "," << format_value(r.w_hat) << ","
       << format_value(r.lambda_pg_par) << "," << format_value(r.lambda_pg_lr) << "," << r.flags();
    return os.str();
}

}  // namespace blockpg
