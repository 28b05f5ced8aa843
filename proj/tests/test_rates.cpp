#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include <gtest/gtest.h>

#include "blockpg/pg_kernel.hpp"
#include "blockpg/rates.hpp"

using namespace blockpg;

namespace {

double rel_err(double got, double want)
{
    return std::abs(got - want) / std::max(std::abs(want), 1e-300);
}

double max_row_sum(const Eigen::MatrixXd& m)
{
    return m.cwiseAbs().rowwise().sum().maxCoeff();
}

std::vector<std::size_t> iota(std::size_t m)
{
    std::vector<std::size_t> v(m);
    for (std::size_t k = 0; k < m; ++k)
        v[k] = k;
    return v;
}

// regular cover with m blocks
BlockCover regular(std::size_t L, std::size_t p, std::size_t m)
{
    return build_cover((L - p) * m + p, L, p);
}

}  // namespace

TEST(Alpha, Examples)
{
    EXPECT_DOUBLE_EQ(coupling_alpha(MixingProfile{0.7, 0.7, 1.0, 1}), 0.0);
    EXPECT_DOUBLE_EQ(coupling_alpha(MixingProfile{0.5, 1.0, 1.0, 1}), 0.5);
    EXPECT_DOUBLE_EQ(coupling_alpha(MixingProfile{0.5, 1.0, 4.0, 2}), 0.75);
}

TEST(Alpha, PowerConventions)
{
    EXPECT_EQ(alpha_power(0.0, 0, 1), 1.0);
    EXPECT_EQ(alpha_power(0.0, 1, 2), 1.0);  // floor(1/2) = 0
    EXPECT_EQ(alpha_power(0.0, 2, 2), 0.0);
    EXPECT_DOUBLE_EQ(alpha_power(0.5, 7, 3), 0.25);
}

TEST(IdealMatrix, MiddleBlockExample)
{
    const auto w = ideal_block_wasserstein(0.5, 1, Interval{1, 3}, 5);
    const double want[3][5] = {{0.5, 0, 0, 0, 0.125}, {0.25, 0, 0, 0, 0.25}, {0.125, 0, 0, 0, 0.5}};
    for (std::size_t r = 0; r < 3; ++r)
        for (std::size_t c = 0; c < 5; ++c)
            EXPECT_DOUBLE_EQ(w(r + 1, c), want[r][c]);
    EXPECT_EQ(w(0, 0), 1.0);
    EXPECT_EQ(w(4, 4), 1.0);
    EXPECT_EQ(w(0, 4), 0.0);
}

TEST(IdealMatrix, DegenerateCases)
{
    const auto w0 = ideal_block_wasserstein(0.0, 1, Interval{1, 3}, 5);
    for (std::size_t r = 1; r <= 3; ++r)
        EXPECT_EQ(w0.entries.row(static_cast<Eigen::Index>(r)).sum(), 0.0);
    const auto whole = ideal_block_wasserstein(0.6, 1, Interval{0, 4}, 5);
    EXPECT_EQ(whole.entries.cwiseAbs().sum(), 0.0);
    EXPECT_THROW(ideal_block_wasserstein(0.5, 1, Interval{2, 5}, 5), ValidationError);
}

TEST(LumpedMatrix, MiddleBlockExample)
{
    const auto w = lumped_block_wasserstein(0.5, 1, 5, 1, 3, 1);
    ASSERT_EQ(w.size(), 5);
    EXPECT_EQ(w.system, MatrixSystem::Lumped);
    // 0-based rows 1..3, boundary columns 0 and 4
    EXPECT_DOUBLE_EQ(w(1, 0), 0.5);
    EXPECT_DOUBLE_EQ(w(1, 4), 0.03125);
    EXPECT_DOUBLE_EQ(w(2, 0), 0.25);
    EXPECT_DOUBLE_EQ(w(2, 4), 0.25);
    EXPECT_DOUBLE_EQ(w(3, 0), 0.03125);
    EXPECT_DOUBLE_EQ(w(3, 4), 0.5);
    for (std::size_t r = 1; r <= 3; ++r)
        for (std::size_t c = 1; c <= 3; ++c)
            EXPECT_EQ(w(r, c), 0.0);
    EXPECT_EQ(w(0, 0), 1.0);
    EXPECT_EQ(w(4, 4), 1.0);
}

TEST(LumpedMatrix, EndBlocks)
{
    const auto first = lumped_block_wasserstein(0.5, 1, 5, 1, 3, 0);
    // rows 0,1 updated, only right boundary column 2
    EXPECT_DOUBLE_EQ(first(0, 2), 0.25);
    EXPECT_DOUBLE_EQ(first(1, 2), 0.5);
    EXPECT_EQ(first(0, 0), 0.0);
    EXPECT_EQ(first(2, 2), 1.0);
    const auto last = lumped_block_wasserstein(0.5, 1, 5, 1, 3, 2);
    EXPECT_DOUBLE_EQ(last(3, 2), 0.5);
    EXPECT_DOUBLE_EQ(last(4, 2), 0.25);
    EXPECT_EQ(last(2, 2), 1.0);

    const auto zero = lumped_block_wasserstein(0.0, 1, 5, 1, 3, 1);
    EXPECT_EQ(zero.entries.block(1, 0, 3, 5).sum(), 0.0);

    EXPECT_THROW(lumped_block_wasserstein(0.5, 1, 5, 1, 3, 3), ValidationError);
    EXPECT_THROW(lumped_block_wasserstein(0.5, 1, 4, 2, 3, 0), ValidationError);
    EXPECT_THROW(lumped_block_wasserstein(0.5, 1, 5, 0, 3, 0), ValidationError);
}

TEST(Perturb, IndicatorWindow)
{
    const auto w = lumped_block_wasserstein(0.5, 1, 5, 1, 3, 1);
    bool vacuous = true;
    const auto same = perturb(w, 0.0, Interval{1, 3}, &vacuous);
    EXPECT_TRUE(same.entries.isApprox(w.entries));
    EXPECT_FALSE(vacuous);

    const auto p = perturb(w, 0.1, Interval{1, 3}, &vacuous);
    const Eigen::MatrixXd diff = p.entries - w.entries;
    for (Eigen::Index r = 0; r < 5; ++r)
        for (Eigen::Index c = 0; c < 5; ++c)
            EXPECT_NEAR(diff(r, c), (r >= 1 && r <= 3) ? 0.1 : 0.0, 1e-15);
    EXPECT_FALSE(vacuous);

    perturb(w, 0.6, Interval{1, 3}, &vacuous);
    EXPECT_TRUE(vacuous);  // 0.5 + 0.6 > 1
    EXPECT_THROW(perturb(w, 1.0, Interval{1, 3}), ValidationError);
    EXPECT_THROW(perturb(w, -0.1, Interval{1, 3}), ValidationError);

    // window clipped at the matrix edge
    const auto e = perturb(lumped_block_wasserstein(0.5, 1, 5, 1, 3, 0), 0.1, Interval{0, 1});
    EXPECT_NEAR(e(0, 0), 0.1, 1e-15);
    EXPECT_NEAR(e(1, 2), 0.6, 1e-15);
    EXPECT_EQ(e(0, 3), 0.0);
}

TEST(A1, CommonCoverExample)
{
    const BlockCover cover = build_cover(13, 5, 1);
    const auto w = ideal_cover_wasserstein(0.5, 1, cover);
    const A1Check a1 = verify_A1(cover, w);
    EXPECT_TRUE(a1.satisfied);
    EXPECT_DOUBLE_EQ(a1.lambda, 0.3125);
}

TEST(A1, SingleBlockAndViolation)
{
    const BlockCover one = make_cover(6, {Interval{0, 5}});
    EXPECT_EQ(verify_A1(one, ideal_cover_wasserstein(0.9, 1, one)).lambda, 0.0);

    const BlockCover tight = build_cover(8, 2, 0);
    const auto w = ideal_cover_wasserstein(0.9, 1, tight);
    const A1Check a1 = verify_A1(tight, w);
    EXPECT_FALSE(a1.satisfied);
    EXPECT_NEAR(a1.lambda, 0.9 + 0.81, 1e-12);  // boundary site: alpha + alpha^2
    EXPECT_NE(a1.detail.find("site"), std::string::npos);
    EXPECT_FALSE(rate_ideal(tight, w, ScheduleKind::LeftToRight).applicable);
}

TEST(A1, MatchesClosedFormOnRegularCovers)
{
    for (double alpha : {0.2, 0.5, 0.8})
        for (int h : {1, 2})
            for (std::size_t L : {4, 6, 9})
                for (std::size_t p = 0; p < L / 2; ++p)
                {
                    const BlockCover cover = regular(L, p, 4);
                    const A1Check a1 = verify_A1(cover, ideal_cover_wasserstein(alpha, h, cover));
                    const double want = alpha_power(alpha, L - p, h) + alpha_power(alpha, p + 1, h);
                    EXPECT_NEAR(a1.lambda, want, 1e-14) << alpha << " " << h << " " << L << " " << p;
                }
}

TEST(IdealRate, Examples)
{
    const BlockCover cover = build_cover(13, 5, 1);
    const auto w = ideal_cover_wasserstein(0.5, 1, cover);
    const IdealRate par = rate_ideal(cover, w, ScheduleKind::Parallel);
    ASSERT_TRUE(par.applicable);
    EXPECT_DOUBLE_EQ(par.decay, 0.09765625);
    EXPECT_EQ(par.norm_bound, 2.0);
    const IdealRate lr = rate_ideal(cover, w, ScheduleKind::LeftToRight);
    ASSERT_TRUE(lr.applicable);
    EXPECT_DOUBLE_EQ(lr.decay, 0.140625);
    EXPECT_DOUBLE_EQ(lr.norm_bound, 1.3125);
}

TEST(IdealRate, BetaOverLambdaSquaredTendsToOne)
{
    double prev = std::numeric_limits<double>::infinity();
    for (std::size_t L : {5, 10, 20, 40})
    {
        const RateReport r = common_rates(0.5, 1, L, 1, 0.0);
        const double ratio = r.beta / (r.lambda_ideal * r.lambda_ideal);
        // beta - lambda^2 = b (1 - lambda) > 0, so the ratio decreases to 1 from above
        EXPECT_GT(ratio, 1.0);
        EXPECT_LT(ratio, prev);
        prev = ratio;
    }
    EXPECT_LT(prev - 1.0, 1e-10);
}

TEST(IdealRate, ParallelNeedsSeparatedBlocks)
{
    const BlockCover wide = build_cover(11, 5, 3);  // blocks 1 and 3 share site 5
    const auto w = ideal_cover_wasserstein(0.2, 1, wide);
    EXPECT_FALSE(rate_ideal(wide, w, ScheduleKind::Parallel).applicable);
    const IdealRate lr = rate_ideal(wide, w, ScheduleKind::LeftToRight);
    ASSERT_TRUE(lr.applicable);
    const std::vector<std::size_t> order{0, 1, 2, 3};
    EXPECT_DOUBLE_EQ(lr.norm_bound, sweep_matrix_norm(w, order));
}

TEST(SweepNorm, Basics)
{
    const auto id = WassersteinMatrix{Eigen::MatrixXd::Identity(4, 4)};
    const std::vector<WassersteinMatrix> ids{id, id};
    const std::vector<std::size_t> order{0, 1};
    EXPECT_EQ(sweep_matrix_norm(ids, order), 1.0);
    const std::vector<WassersteinMatrix> whole{ideal_block_wasserstein(0.4, 1, Interval{0, 3}, 4)};
    const std::vector<std::size_t> o1{0};
    EXPECT_EQ(sweep_matrix_norm(whole, o1), 0.0);
    const std::vector<WassersteinMatrix> bad{id, WassersteinMatrix{Eigen::MatrixXd::Identity(3, 3)}};
    EXPECT_THROW(sweep_matrix_norm(bad, order), ValidationError);
}

TEST(SweepNorm, ComposesInVisitOrder)
{
    Eigen::MatrixXd a(2, 2), b(2, 2);
    a << 0, 1, 0, 1;
    b << 1, 0, 0.5, 0;
    const std::vector<WassersteinMatrix> ws{WassersteinMatrix{a}, WassersteinMatrix{b}};
    const std::vector<std::size_t> order{0, 1};
    EXPECT_TRUE(compose_sweep(ws, order).isApprox(b * a));
}

// iterate bounds on random regular covers satisfying A1
TEST(Contraction, IterateBoundsOnRandomCovers)
{
    std::mt19937_64 gen(7);
    std::uniform_real_distribution<double> ua(0.05, 0.9);
    int checked = 0;
    for (int trial = 0; trial < 200; ++trial)
    {
        const double alpha = ua(gen);
        const int h = 1 + static_cast<int>(gen() % 2);
        const std::size_t L = 2 + gen() % 7;
        const std::size_t p = gen() % ((L + 1) / 2);  // 2p < L
        const std::size_t m = 2 + gen() % 5;
        const BlockCover cover = regular(L, p, m);
        const auto w = ideal_cover_wasserstein(alpha, h, cover);
        const A1Check a1 = verify_A1(cover, w);
        if (!a1.satisfied)
            continue;
        ++checked;
        for (ScheduleKind kind : {ScheduleKind::LeftToRight, ScheduleKind::Parallel})
        {
            const auto order = kind == ScheduleKind::Parallel ? par_order(m) : iota(m);
            const Eigen::MatrixXd sweep = compose_sweep(w, order);
            const double norm = max_row_sum(sweep);
            const IdealRate rate = rate_ideal(cover, w, kind);
            ASSERT_TRUE(rate.applicable);
            EXPECT_LE(norm, rate.norm_bound + 1e-12);
            Eigen::MatrixXd power = sweep;
            for (int k = 1; k <= 10; ++k)
            {
                const double pk = max_row_sum(power);
                EXPECT_LE(pk, std::pow(a1.lambda, k - 1) * norm + 1e-12) << "generic k=" << k;
                EXPECT_LE(pk, std::pow(rate.decay, k - 1) * norm + 1e-12)
                    << (kind == ScheduleKind::Parallel ? "PAR" : "LR") << " k=" << k << " alpha=" << alpha
                    << " L=" << L << " p=" << p << " m=" << m << " h=" << h;
                power = sweep * power;
            }
        }
    }
    EXPECT_GT(checked, 50);
}

TEST(CommonRates, HandEvaluatedExample)
{
    const MixingProfile prof{1.0, 1.0, 1.0, 1};  // c = 1
    const RateReport r = rate_pg_common(prof, 5, 1, 101);
    const double eps = 1.0 - std::pow(100.0 / 101.0, 5);
    EXPECT_LT(rel_err(r.epsilon, eps), 1e-12);
    EXPECT_EQ(r.alpha, 0.0);

    // same (L, p, N) with alpha = 0.5 and the c = 1 epsilon
    const RateReport q = common_rates(0.5, 1, 5, 1, eps);
    EXPECT_DOUBLE_EQ(q.lambda_lumped, 0.5);
    EXPECT_DOUBLE_EQ(q.w_hat, 0.53125);
    EXPECT_DOUBLE_EQ(q.lambda_ideal, 0.3125);
    EXPECT_DOUBLE_EQ(q.beta, 0.140625);
    const double par = 0.5 + eps * (1.0 + 25.0 * eps + 8.0);
    EXPECT_LT(rel_err(q.lambda_pg_par, par), 1e-12);
    EXPECT_NEAR(q.lambda_pg_par, 0.99569, 1e-5);
    const double lr = 0.5 + 0.03125 + 2.0 * eps * (3.0 + 1.0 + 0.5) / (1.0 - 2.0 * eps - 0.25);
    EXPECT_LT(rel_err(q.lambda_pg_lr, lr), 1e-12);
    EXPECT_TRUE(q.par_applicable);
    EXPECT_TRUE(q.lr_applicable);
    EXPECT_GT(q.lambda_pg_lr, 1.0);
    EXPECT_EQ(q.flags(), "lr_vacuous");
}

TEST(CommonRates, ZeroEpsilonIsIdealStyle)
{
    for (double alpha : {0.1, 0.3, 0.45})
    {
        const RateReport r = common_rates(alpha, 1, 7, 2, 0.0);
        EXPECT_DOUBLE_EQ(r.lambda_pg_par, r.lambda_lumped * std::max(r.w_hat, 1.0));
        EXPECT_DOUBLE_EQ(r.lambda_pg_lr, r.lambda_lumped + std::pow(alpha, 6));
    }
}

TEST(CommonRates, ParticlesLimitIsMonotone)
{
    const MixingProfile prof{0.4, 1.0, 1.5, 1};
    double prev_par = std::numeric_limits<double>::infinity();
    double prev_eps = 1.0;
    for (std::size_t n : {2, 5, 20, 100, 1000, 100000, 10000000})
    {
        const RateReport r = rate_pg_common(prof, 7, 2, n);
        EXPECT_LT(r.epsilon, prev_eps);
        if (r.par_applicable)
        {
            EXPECT_LE(r.lambda_pg_par, prev_par);
            prev_par = r.lambda_pg_par;
        }
        prev_eps = r.epsilon;
    }
    const RateReport ideal = common_rates(coupling_alpha(prof), 1, 7, 2, 0.0);
    EXPECT_NEAR(prev_par, ideal.lambda_pg_par, 1e-4);
}

TEST(CommonRates, EpsilonProperties)
{
    EXPECT_DOUBLE_EQ(pg_epsilon(1.0, 2, 1), 0.5);
    for (double c : {0.5, 1.0, 3.0})
        for (std::size_t L = 1; L < 20; ++L)
            for (std::size_t n = 2; n < 50; ++n)
            {
                const double e = pg_epsilon(c, n, L);
                EXPECT_GE(e, 0.0);
                EXPECT_LT(e, 1.0);
                EXPECT_LT(pg_epsilon(c, n + 1, L), e);
                EXPECT_GT(pg_epsilon(c, n, L + 1), e);
            }
}

TEST(CommonRates, SideConditionFailureFlagsLr)
{
    // 2 eps + alpha^{p+1} = 0.7 + 0.36 >= 1
    const RateReport r = common_rates(0.6, 1, 5, 1, 0.35);
    EXPECT_FALSE(r.lr_applicable);
    EXPECT_TRUE(std::isnan(r.lambda_pg_lr));
    EXPECT_NE(r.flags().find("lr_inapplicable"), std::string::npos);

    const RateReport big = common_rates(0.8, 1, 5, 1, 0.0);  // lambda = 1.28
    EXPECT_FALSE(big.lumped_lambda_below_one);
    EXPECT_FALSE(big.par_applicable);
    EXPECT_NE(big.flags().find("lambda_ge_1"), std::string::npos);
    EXPECT_NE(big.flags().find("par_inapplicable"), std::string::npos);
}

TEST(CommonRates, SaturatedEpsilonIsFlaggedNotThrown)
{
    // sticky chain: c = 1 / (2 * 16 * 9 - 1), so epsilon rounds to 1 at L = 20
    const MixingProfile sticky{0.2, 1.8, 16.0, 1};
    const RateReport r = rate_pg_common(sticky, 20, 4, 20);
    EXPECT_EQ(r.epsilon, 1.0);
    EXPECT_FALSE(r.lr_applicable);
    EXPECT_NE(r.flags(), "ok");
    const RateReport q = common_rates(0.2, 1, 7, 2, 1.0);
    EXPECT_TRUE(q.par_applicable);
    EXPECT_GT(q.lambda_pg_par, 1.0);
    EXPECT_NE(q.flags().find("par_vacuous"), std::string::npos);
    EXPECT_THROW(common_rates(0.2, 1, 7, 2, 1.5), ValidationError);
}

TEST(CommonRates, MonotoneInBlockSizeAndOverlap)
{
    const double eps = 0.01;
    for (double alpha : {0.1, 0.3, 0.5, 0.7})
        for (int h : {1, 2})
        {
            // L grows with p fixed
            for (std::size_t p = 1; p <= 3; ++p)
                for (std::size_t L = 2 * p + 1; L < 30; ++L)
                {
                    const RateReport a = common_rates(alpha, h, L, p, eps);
                    const RateReport b = common_rates(alpha, h, L + 1, p, eps);
                    EXPECT_LE(b.lambda_ideal, a.lambda_ideal + 1e-15);
                    EXPECT_LE(b.beta, a.beta + 1e-15);
                    EXPECT_LE(b.lambda_lumped, a.lambda_lumped + 1e-15);
                    if (a.par_applicable && b.par_applicable)
                        EXPECT_LE(b.lambda_pg_par, a.lambda_pg_par + 1e-15);
                    if (a.lr_applicable && b.lr_applicable)
                        EXPECT_LE(b.lambda_pg_lr, a.lambda_pg_lr + 1e-15);
                }
            // p grows with L - p fixed
            for (std::size_t d = 4; d < 12; ++d)
                for (std::size_t p = 1; p + 1 < d; ++p)
                {
                    const RateReport a = common_rates(alpha, h, d + p, p, eps);
                    const RateReport b = common_rates(alpha, h, d + p + 1, p + 1, eps);
                    EXPECT_LE(b.lambda_ideal, a.lambda_ideal + 1e-15);
                    EXPECT_LE(b.beta, a.beta + 1e-15);
                    EXPECT_LE(b.lambda_lumped, a.lambda_lumped + 1e-15);
                    if (a.par_applicable && b.par_applicable)
                        EXPECT_LE(b.lambda_pg_par, a.lambda_pg_par + 1e-15);
                    if (a.lr_applicable && b.lr_applicable)
                        EXPECT_LE(b.lambda_pg_lr, a.lambda_pg_lr + 1e-15);
                }
        }
}

TEST(CommonRates, NoLumpingFallsBackToGeneralBounds)
{
    const RateReport r = common_rates(0.3, 1, 4, 0, 0.01);
    EXPECT_FALSE(r.lumping_defined);
    EXPECT_NE(r.flags().find("lumping_undefined"), std::string::npos);
    EXPECT_TRUE(r.par_applicable);
    EXPECT_GT(r.lambda_pg_par, 0.0);
    // 2p = L breaks B2, so neither general bound applies
    const RateReport wide = common_rates(0.3, 1, 4, 2, 0.01);
    EXPECT_FALSE(wide.par_applicable);
    EXPECT_FALSE(wide.lr_applicable);
}

TEST(CommonRates, CsvRow)
{
    const RateReport r = common_rates(0.5, 1, 5, 1, 0.0);
    const std::string row = rate_csv_row(r);
    EXPECT_EQ(std::count(row.begin(), row.end(), ','), 12);
    const std::string header = rate_csv_header();
    EXPECT_EQ(std::count(header.begin(), header.end(), ','), 12);
    EXPECT_EQ(row.rfind("0.5,1,5,1,0,0,0.3125,0.140625,0.5,", 0), 0u) << row;
    const RateReport bad = common_rates(0.6, 1, 5, 1, 0.35);
    EXPECT_NE(rate_csv_row(bad).find(",NA,"), std::string::npos);
}

// general bounds against explicitly composed perturbed matrices
namespace {

struct Instance
{
    BlockCover cover;
    std::vector<WassersteinMatrix> ideal;
    std::vector<WassersteinMatrix> perturbed;
    double epsilon;
};

Instance random_lumped(std::mt19937_64& gen)
{
    std::uniform_real_distribution<double> ua(0.0, 0.7);
    std::uniform_real_distribution<double> ue(0.0, 0.08);
    const std::size_t p = 1 + gen() % 3;
    const std::size_t L = 2 * p + 1 + gen() % 5;
    const std::size_t m = 2 + gen() % 6;
    const int h = 1 + static_cast<int>(gen() % 2);
    const double alpha = ua(gen);
    Instance in{lump(regular(L, p, m)).as_cover(), lumped_cover_wasserstein(alpha, h, L, p, m), {}, ue(gen)};
    for (std::size_t k = 0; k < m; ++k)
        in.perturbed.push_back(perturb(in.ideal[k], in.epsilon, in.cover.blocks[k]));
    return in;
}

Instance random_original(std::mt19937_64& gen)
{
    std::uniform_real_distribution<double> ua(0.0, 0.7);
    std::uniform_real_distribution<double> ue(0.0, 0.05);
    const std::size_t L = 2 + gen() % 6;
    const std::size_t p = gen() % ((L + 1) / 2);
    const std::size_t m = 2 + gen() % 5;
    const int h = 1 + static_cast<int>(gen() % 2);
    const BlockCover cover = regular(L, p, m);
    Instance in{cover, ideal_cover_wasserstein(ua(gen), h, cover), {}, ue(gen)};
    for (std::size_t k = 0; k < m; ++k)
        in.perturbed.push_back(perturb(in.ideal[k], in.epsilon, cover.blocks[k]));
    return in;
}

void expect_dominates(const GeneralBound& b, const Eigen::MatrixXd& composed, const char* what)
{
    ASSERT_EQ(b.per_site.size(), static_cast<std::size_t>(composed.rows()));
    const Eigen::VectorXd rows = composed.rowwise().sum();
    for (Eigen::Index i = 0; i < rows.size(); ++i)
        EXPECT_LE(rows(i), b.per_site[static_cast<std::size_t>(i)] + 1e-9) << what << " site " << i;
}

}  // namespace

TEST(GeneralBounds, DominateComposedLumpedMatrices)
{
    std::mt19937_64 gen(2024);
    int lr_checked = 0;
    for (int trial = 0; trial < 200; ++trial)
    {
        const Instance in = random_lumped(gen);
        const std::size_t m = in.cover.num_blocks();
        const GeneralBound par = rate_pg_general_par(in.cover, in.ideal, in.epsilon);
        ASSERT_TRUE(par.applicable);
        EXPECT_EQ(par.max_block, m >= 3 ? 3u : 2u);
        expect_dominates(par, compose_sweep(in.perturbed, par_order(m)), "PAR");
        const GeneralBound lr = rate_pg_general_lr(in.cover, in.ideal, in.epsilon);
        if (lr.applicable)
        {
            ++lr_checked;
            expect_dominates(lr, compose_sweep(in.perturbed, iota(m)), "LR");
        }
    }
    EXPECT_GT(lr_checked, 100);
}

TEST(GeneralBounds, DominateComposedOriginalMatrices)
{
    std::mt19937_64 gen(99);
    for (int trial = 0; trial < 200; ++trial)
    {
        const Instance in = random_original(gen);
        const std::size_t m = in.cover.num_blocks();
        const GeneralBound par = rate_pg_general_par(in.cover, in.ideal, in.epsilon);
        ASSERT_TRUE(par.applicable);
        expect_dominates(par, compose_sweep(in.perturbed, par_order(m)), "PAR");
        const GeneralBound lr = rate_pg_general_lr(in.cover, in.ideal, in.epsilon);
        if (lr.applicable)
            expect_dominates(lr, compose_sweep(in.perturbed, iota(m)), "LR");
    }
}

TEST(GeneralBounds, ZeroEpsilonCollapses)
{
    const XiSystem xi = lump(build_cover(13, 5, 1));
    const BlockCover cover = xi.as_cover();
    const auto w = lumped_cover_wasserstein(0.5, 1, 5, 1, 3);
    const GeneralBound par = rate_pg_general_par(cover, w, 0.0);
    const double lam = par.lambda;
    const double what = par.w_hat;
    const auto members = site_membership(cover);
    for (std::size_t i = 0; i < cover.length; ++i)
    {
        double want = lam * what;
        if (members[i].size() == 1)
            want = members[i][0] % 2 == 0 ? lam : lam * lam;
        EXPECT_DOUBLE_EQ(par.per_site[i], want);
    }
    const GeneralBound lr = rate_pg_general_lr(cover, w, 0.0);
    ASSERT_TRUE(lr.applicable);
    EXPECT_TRUE(std::isfinite(lr.c));
    for (std::size_t i = 0; i < cover.length; ++i)
        EXPECT_DOUBLE_EQ(lr.per_site[i], members[i].size() == 1 ? lr.lambda : lr.beta);
}

TEST(GeneralBounds, LumpedInstanceMatchesCommonConstants)
{
    for (double alpha : {0.2, 0.5})
        for (double eps : {0.0, 0.01, 0.05})
        {
            const std::size_t L = 7, p = 2, m = 5;
            const BlockCover cover = lump(regular(L, p, m)).as_cover();
            const auto w = lumped_cover_wasserstein(alpha, 1, L, p, m);
            const GeneralBound par = rate_pg_general_par(cover, w, eps);
            const RateReport common = common_rates(alpha, 1, L, p, eps);
            EXPECT_DOUBLE_EQ(par.lambda, common.lambda_lumped);
            EXPECT_DOUBLE_EQ(par.w_hat, common.w_hat);
            EXPECT_EQ(par.max_block, 3u);
            // overlap sites: W(L+2) + L(1 v W) <= 8 (W v 1) and (L+2)^2 = 25 at L = 3
            const auto members = site_membership(cover);
            for (std::size_t i = 0; i < cover.length; ++i)
                if (members[i].size() == 2)
                    EXPECT_LE(par.per_site[i], common.lambda_pg_par + 1e-15);
        }
}

TEST(GeneralBounds, LrSideConditionAndMalformedCovers)
{
    const BlockCover cover = lump(build_cover(13, 5, 1)).as_cover();
    const auto w = lumped_cover_wasserstein(0.5, 1, 5, 1, 3);
    const GeneralBound lr = rate_pg_general_lr(cover, w, 0.45);
    EXPECT_FALSE(lr.applicable);
    EXPECT_TRUE(lr.per_site.empty());
    EXPECT_NE(lr.reason.find("side condition"), std::string::npos);

    const BlockCover nested = make_cover(6, {Interval{0, 4}, Interval{1, 3}, Interval{4, 5}});
    const auto wn = ideal_cover_wasserstein(0.3, 1, nested);
    EXPECT_FALSE(rate_pg_general_par(nested, wn, 0.0).applicable);
    EXPECT_FALSE(rate_pg_general_lr(nested, wn, 0.0).applicable);
}
