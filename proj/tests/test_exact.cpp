#include <cmath>
#include <sstream>

#include <boost/math/distributions/chi_squared.hpp>
#include <gtest/gtest.h>

#include "blockpg/exact.hpp"
#include "oracle.hpp"

using namespace blockpg;

namespace {

struct Tiny
{
    Eigen::VectorXd mu;
    Eigen::MatrixXd p;
    Eigen::MatrixXd g;
    std::vector<int> y;

    SmoothingTarget target() const
    {
        return SmoothingTarget(HmmModel(mu, p, DiscreteEmission{g}), ObservationRecord(oracle::to_doubles(y)));
    }
};

Tiny random_tiny(int k, std::vector<int> y, std::uint64_t seed)
{
    StreamRng rng(seed);
    auto stoch = [&](int r, int c) {
        Eigen::MatrixXd m(r, c);
        for (int i = 0; i < r; ++i)
        {
            for (int j = 0; j < c; ++j)
                m(i, j) = 0.1 + rng.uniform();
            m.row(i) /= m.row(i).sum();
        }
        return m;
    };
    return Tiny{stoch(1, k).row(0).transpose(), stoch(k, k), stoch(k, 3), std::move(y)};
}

Tiny uniform_tiny(std::size_t len)
{
    return Tiny{Eigen::Vector2d(0.5, 0.5), Eigen::Matrix2d::Constant(0.5), Eigen::Matrix2d::Constant(0.5),
                std::vector<int>(len, 0)};
}

double chi_square_p(const std::vector<double>& counts, const std::vector<double>& probs)
{
    double n = 0.0;
    for (double c : counts)
        n += c;
    double stat = 0.0;
    int df = -1;
    for (std::size_t i = 0; i < counts.size(); ++i)
    {
        if (probs[i] <= 0.0)
            continue;
        const double e = n * probs[i];
        stat += (counts[i] - e) * (counts[i] - e) / e;
        ++df;
    }
    return boost::math::cdf(boost::math::complement(boost::math::chi_squared(df), stat));
}

double l1_residual(const SweepOperator& op)
{
    const Eigen::RowVectorXd phi = op.target.transpose();
    return (phi * op.matrix - phi).cwiseAbs().sum();
}

}  // namespace

TEST(Encoding, RoundTripFirstSiteFastest)
{
    EXPECT_EQ(encode_trajectory(Trajectory{1, 0, 0}, 2), 1u);
    EXPECT_EQ(encode_trajectory(Trajectory{0, 1, 0}, 2), 2u);
    for (std::size_t i = 0; i < 81; ++i)
        EXPECT_EQ(encode_trajectory(decode_trajectory(i, 4, 3), 3), i);
    EXPECT_EQ(encode_block(Trajectory{2, 1, 0, 2}, Interval{1, 2}, 3), 1u);
}

TEST(BlockConditional, UniformModelGivesUniformTable)
{
    const auto t = uniform_tiny(5).target();
    for (const Interval& j : {Interval{0, 1}, Interval{1, 3}, Interval{4, 4}})
    {
        const auto bc = block_conditional(t, Trajectory{0, 1, 1, 0, 1}, j);
        for (double v : bc.table)
            EXPECT_NEAR(v, 1.0 / static_cast<double>(bc.table.size()), 1e-12);
    }
}

TEST(BlockConditional, MatchesConditionedJointEverywhere)
{
    const Tiny tiny = random_tiny(2, {0, 2, 1, 1}, 4);
    const auto t = tiny.target();
    const auto post = oracle::posterior(tiny.mu, tiny.p, tiny.g, tiny.y);
    for (std::size_t first = 0; first < 4; ++first)
        for (std::size_t last = first; last < 4; ++last)
            for (std::size_t xi = 0; xi < 16; ++xi)
            {
                const auto x = oracle::decode(xi, 4, 2);
                const auto want = oracle::conditional(post, 4, 2, x, first, last);
                const auto got = block_conditional(t, x, Interval{first, last});
                ASSERT_EQ(got.table.size(), want.size());
                for (std::size_t c = 0; c < want.size(); ++c)
                    EXPECT_NEAR(got.table[c], want[c], 1e-12) << first << "-" << last << " x=" << xi;
            }
}

TEST(BlockConditional, ThreeStatesMiddleSite)
{
    const Tiny tiny = random_tiny(3, {2, 0, 1}, 8);
    const auto t = tiny.target();
    const auto post = oracle::posterior(tiny.mu, tiny.p, tiny.g, tiny.y);
    const Trajectory x{2, 0, 1};
    const auto got = block_conditional(t, x, Interval{1, 1});
    // hand form: m(x1, .) g(., y2) m(., x3)
    std::vector<double> hand(3);
    double z = 0.0;
    for (int s = 0; s < 3; ++s)
        z += hand[s] = tiny.p(2, s) * tiny.g(s, 0) * tiny.p(s, 1);
    for (int s = 0; s < 3; ++s)
        EXPECT_NEAR(got.table[s], hand[s] / z, 1e-12);
    const auto want = oracle::conditional(post, 3, 3, x, 1, 1);
    for (int s = 0; s < 3; ++s)
        EXPECT_NEAR(got.table[s], want[s], 1e-12);
    EXPECT_EQ(*got.left, 2);
    EXPECT_EQ(*got.right, 1);
}

TEST(BlockConditional, DependsOnlyOnBoundary)
{
    const Tiny tiny = random_tiny(3, {0, 1, 2, 0, 1, 2}, 12);
    const auto t = tiny.target();
    const Interval j{2, 3};
    const Trajectory base{0, 1, 2, 2, 0, 1};
    const auto ref = block_conditional(t, base, j);
    for (State a : {0, 1, 2})
        for (State b : {0, 1, 2})
            for (State far : {0, 2})
            {
                Trajectory x = base;
                x[2] = a;
                x[3] = b;
                x[0] = far;
                x[5] = 2 - far;
                const auto other = block_conditional(t, x, j);
                for (std::size_t c = 0; c < ref.table.size(); ++c)
                    EXPECT_NEAR(other.table[c], ref.table[c], 1e-12);
            }
}

TEST(BlockConditional, CapExceeded)
{
    const auto t = uniform_tiny(22).target();
    EXPECT_THROW(block_conditional(t, Trajectory(22, 0), Interval{0, 21}), CapacityError);
    StreamRng rng(1);
    EXPECT_EQ(sample_block_conditional(t, Trajectory(22, 0), Interval{0, 21}, rng).size(), 22u);
}

TEST(SampleBlockConditional, UniformFrequencies)
{
    const auto t = uniform_tiny(4).target();
    StreamRng rng(77);
    std::vector<double> counts(4, 0.0);
    const int n = 100000;
    for (int i = 0; i < n; ++i)
    {
        const auto s = sample_block_conditional(t, Trajectory{0, 0, 0, 0}, Interval{1, 2}, rng);
        counts[static_cast<std::size_t>(s[0] + 2 * s[1])] += 1.0;
    }
    const double sd = std::sqrt(n * 0.25 * 0.75);
    for (double c : counts)
        EXPECT_NEAR(c, n * 0.25, 4 * sd);
}

TEST(SampleBlockConditional, MatchesTable)
{
    const Tiny tiny = random_tiny(2, {0, 2, 1}, 21);
    const auto t = tiny.target();
    const Trajectory x{1, 0, 0};
    const auto table = block_conditional(t, x, Interval{1, 1}).table;
    StreamRng rng(5);
    std::vector<double> counts(2, 0.0);
    for (int i = 0; i < 100000; ++i)
        counts[static_cast<std::size_t>(sample_block_conditional(t, x, Interval{1, 1}, rng)[0])] += 1.0;
    EXPECT_GT(chi_square_p(counts, table), 0.01);
}

TEST(SampleBlockConditional, LongerBlockMatchesTable)
{
    const Tiny tiny = random_tiny(3, {0, 2, 1, 1, 0}, 31);
    const auto t = tiny.target();
    const Trajectory x{1, 0, 2, 0, 1};
    const Interval j{1, 3};
    const auto table = block_conditional(t, x, j).table;
    StreamRng rng(6);
    std::vector<double> counts(table.size(), 0.0);
    for (int i = 0; i < 200000; ++i)
    {
        const auto s = sample_block_conditional(t, x, j, rng);
        counts[encode_trajectory(s, 3)] += 1.0;
    }
    EXPECT_GT(chi_square_p(counts, table), 0.01);
}

TEST(SampleBlockConditional, SingleState)
{
    const SmoothingTarget t(HmmModel(Eigen::VectorXd::Ones(1), Eigen::MatrixXd::Ones(1, 1),
                                     DiscreteEmission{Eigen::MatrixXd::Constant(1, 2, 0.5)}),
                            ObservationRecord({0, 1, 0}));
    StreamRng rng(1);
    for (int i = 0; i < 10; ++i)
        EXPECT_EQ(sample_block_conditional(t, Trajectory(3, 0), Interval{0, 2}, rng), Trajectory(3, 0));
}

TEST(EnumerateTarget, MatchesBruteForce)
{
    const Tiny tiny = random_tiny(3, {0, 1, 2, 2}, 2);
    const auto phi = enumerate_target(tiny.target());
    const auto post = oracle::posterior(tiny.mu, tiny.p, tiny.g, tiny.y);
    ASSERT_EQ(static_cast<std::size_t>(phi.size()), post.size());
    for (std::size_t i = 0; i < post.size(); ++i)
        EXPECT_NEAR(phi(static_cast<Eigen::Index>(i)), post[i], 1e-12);
    EXPECT_THROW(enumerate_target(tiny.target(), 80), CapacityError);
}

TEST(SmoothingMarginals, MatchBruteForce)
{
    const Tiny tiny = random_tiny(3, {0, 1, 2, 2, 1}, 19);
    const auto marg = smoothing_marginals(tiny.target());
    const auto post = oracle::posterior(tiny.mu, tiny.p, tiny.g, tiny.y);
    Eigen::MatrixXd want = Eigen::MatrixXd::Zero(5, 3);
    for (std::size_t i = 0; i < post.size(); ++i)
    {
        const auto x = oracle::decode(i, 5, 3);
        for (int s = 0; s < 5; ++s)
            want(s, x[static_cast<std::size_t>(s)]) += post[i];
    }
    EXPECT_LT((marg - want).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(SweepOperator, IdealSchedulesPreservePhi)
{
    const Tiny tiny = random_tiny(2, {0, 1, 2, 2, 1, 0, 2}, 40);
    const auto t = tiny.target();
    const std::vector<BlockCover> covers{build_cover(7, 3, 1), build_cover(7, 2, 1), build_cover(7, 7, 0),
                                         make_cover(7, {{0, 1}, {2, 4}, {5, 6}})};
    for (const auto& cover : covers)
        for (const char* s : {"LR", "PAR", "REV-LR", "REV-PAR"})
        {
            const auto op = sweep_operator(t, cover, parse_schedule(s, cover.num_blocks()), IdealKernel{});
            EXPECT_LT(l1_residual(op), 1e-9) << to_string(cover) << " " << s;
            EXPECT_LT((op.matrix.rowwise().sum().array() - 1.0).abs().maxCoeff(), 1e-9);
        }
}

TEST(SweepOperator, PgPreservesPhi)
{
    const Tiny tiny = random_tiny(2, {0, 2, 1}, 41);
    const auto t = tiny.target();
    const BlockCover cover = make_cover(3, {{0, 1}, {1, 2}});
    for (std::size_t n : {2u, 3u})
    {
        const auto op = sweep_operator(t, cover, SweepSchedule::left_to_right(2), PgKernel{n});
        EXPECT_LT(l1_residual(op), 1e-9) << "N=" << n;
    }
}

TEST(SweepOperator, ParIsProductOfPhases)
{
    const Tiny tiny = random_tiny(2, {0, 2, 1, 1, 0, 2, 1}, 42);
    const auto t = tiny.target();
    const BlockCover cover = build_cover(7, 3, 1);
    const auto par = sweep_operator(t, cover, SweepSchedule::parallel(3), IdealKernel{});
    const std::vector<std::size_t> odd{0, 2};
    const std::vector<std::size_t> odd_swapped{2, 0};
    const std::vector<std::size_t> even{1};
    const Eigen::MatrixXd p_odd = compose_operator(t, cover, odd, IdealKernel{});
    const Eigen::MatrixXd p_odd2 = compose_operator(t, cover, odd_swapped, IdealKernel{});
    const Eigen::MatrixXd p_even = compose_operator(t, cover, even, IdealKernel{});
    EXPECT_LT((p_odd - p_odd2).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT((par.matrix - p_odd * p_even).cwiseAbs().maxCoeff(), 1e-12);
    const Eigen::MatrixXd direct = block_operator(t, cover.blocks[0], IdealKernel{})
                                   * block_operator(t, cover.blocks[2], IdealKernel{})
                                   * block_operator(t, cover.blocks[1], IdealKernel{});
    EXPECT_LT((par.matrix - direct).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(SweepOperator, LeftToRightAndParallel)
{
    const Tiny tiny = random_tiny(2, {0, 2, 1, 1, 0, 2, 1}, 43);
    const auto t = tiny.target();
    // two blocks: odd-then-even is the left-to-right order
    const BlockCover two = make_cover(5, {{0, 2}, {2, 4}});
    const SmoothingTarget t5(tiny.target().model(), ObservationRecord({0, 2, 1, 1, 0}));
    const auto lr2 = sweep_operator(t5, two, SweepSchedule::left_to_right(2), IdealKernel{});
    const auto par2 = sweep_operator(t5, two, SweepSchedule::parallel(2), IdealKernel{});
    EXPECT_LT((lr2.matrix - par2.matrix).cwiseAbs().maxCoeff(), 1e-15);
    // three blocks: the kernels differ
    const BlockCover three = build_cover(7, 3, 1);
    const auto lr3 = sweep_operator(t, three, SweepSchedule::left_to_right(3), IdealKernel{});
    const auto par3 = sweep_operator(t, three, SweepSchedule::parallel(3), IdealKernel{});
    EXPECT_GT((lr3.matrix - par3.matrix).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(SweepOperator, ReversiblePairSatisfiesDetailedBalance)
{
    const Tiny tiny = random_tiny(2, {0, 2, 1, 1, 0}, 44);
    const auto t = tiny.target();
    const BlockCover cover = build_cover(5, 3, 1);
    for (ScheduleKind base : {ScheduleKind::LeftToRight, ScheduleKind::Parallel})
    {
        const auto op = sweep_operator(t, cover, SweepSchedule::reversible(base, 2), IdealKernel{});
        const Eigen::MatrixXd flow = op.target.asDiagonal() * op.matrix;
        EXPECT_LT((flow - flow.transpose()).cwiseAbs().maxCoeff(), 1e-9);
    }
    // D M_fwd = (D M_rev)^T for two ideal blocks
    const auto fwd = sweep_operator(t, cover, SweepSchedule::left_to_right(2), IdealKernel{});
    const std::vector<std::size_t> rev{1, 0};
    const Eigen::MatrixXd m_rev = compose_operator(t, cover, rev, IdealKernel{});
    const Eigen::MatrixXd lhs = fwd.target.asDiagonal() * fwd.matrix;
    const Eigen::MatrixXd rhs = (fwd.target.asDiagonal() * m_rev).transpose();
    EXPECT_LT((lhs - rhs).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(SweepOperator, SingleBlockReversibleEqualsPlain)
{
    const Tiny tiny = random_tiny(2, {0, 2, 1, 1}, 45);
    const auto t = tiny.target();
    const BlockCover cover = build_cover(4, 4, 0);
    const auto a = sweep_operator(t, cover, SweepSchedule::reversible(ScheduleKind::LeftToRight, 1), IdealKernel{});
    const auto b = sweep_operator(t, cover, SweepSchedule::left_to_right(1), IdealKernel{});
    EXPECT_LT((a.matrix - b.matrix).cwiseAbs().maxCoeff(), 1e-15);
    // a single ideal block draws exactly from phi
    for (Eigen::Index r = 0; r < b.matrix.rows(); ++r)
        EXPECT_LT((b.matrix.row(r).transpose() - b.target).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(SweepOperator, CapExceeded)
{
    const auto t = uniform_tiny(13).target();
    EXPECT_THROW(sweep_operator(t, build_cover(13, 5, 1), SweepSchedule::left_to_right(3), IdealKernel{}),
                 CapacityError);
}

TEST(TvToTarget, StartsAtZeroFromPhiAndDecays)
{
    const Tiny tiny = random_tiny(2, {0, 2, 1, 1, 0}, 46);
    const auto t = tiny.target();
    const auto op = sweep_operator(t, build_cover(5, 3, 1), SweepSchedule::left_to_right(2), IdealKernel{});
    EXPECT_NEAR(tv_to_target(op, op.target, 0), 0.0, 1e-15);
    Eigen::VectorXd point = Eigen::VectorXd::Zero(op.target.size());
    point(0) = 1.0;
    const auto curve = tv_curve(op, point, 40);
    EXPECT_NEAR(curve[0], 1.0 - op.target(0), 1e-12);
    for (std::size_t k = 1; k < curve.size(); ++k)
        EXPECT_LE(curve[k], curve[k - 1] + 1e-15);
    EXPECT_LT(curve.back(), 1e-6);
}

TEST(WriteOperatorCsv, HeaderAndRows)
{
    const auto t = uniform_tiny(2).target();
    const auto op = sweep_operator(t, build_cover(2, 1, 0), SweepSchedule::left_to_right(2), IdealKernel{});
    std::ostringstream os;
    write_operator_csv(op, os);
    const std::string s = os.str();
    EXPECT_EQ(s.substr(0, s.find('\n')), "from,0,1,2,3");
    EXPECT_EQ(std::count(s.begin(), s.end(), '\n'), 5);
}
