#include "blockpg/exact.hpp"

#include <cmath>
#include <limits>
#include <unordered_map>

namespace blockpg {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

std::size_t checked_power(int base, std::size_t exp, std::size_t cap, const char* what)
{
    std::size_t r = 1;
    for (std::size_t i = 0; i < exp; ++i)
    {
        if (r > cap / static_cast<std::size_t>(base))
            throw CapacityError(std::string(what) + " exceeds the cap of " + std::to_string(cap)
                                + " configurations");
        r *= static_cast<std::size_t>(base);
    }
    if (r > cap)
        throw CapacityError(std::string(what) + " exceeds the cap of " + std::to_string(cap)
                            + " configurations");
    return r;
}

double log_joint_unnormalised(const SmoothingTarget& target, std::span<const State> x)
{
    double lp = target.log_initial(x[0]) + target.log_emission(0, x[0]);
    for (std::size_t t = 1; t < x.size(); ++t)
        lp += target.log_transition(x[t - 1], x[t]) + target.log_emission(t, x[t]);
    return lp;
}

// Block law for the kernel at the current trajectory, cached by x_{J+}.
class BlockLawCache
{
  public:
    BlockLawCache(const SmoothingTarget& target, const Interval& block, const KernelConfig& kernel)
        : target_(target), block_(block), kernel_(kernel)
    {
        const Boundary bd = boundary(block, target.length());
        lo_ = bd.left.value_or(block.first);
        hi_ = bd.right.value_or(block.last);
    }

    const std::vector<double>& law(std::span<const State> x)
    {
        std::size_t key = 0;
        for (std::size_t t = hi_ + 1; t-- > lo_;)
            key = key * static_cast<std::size_t>(target_.num_states()) + static_cast<std::size_t>(x[t]);
        auto it = cache_.find(key);
        if (it != cache_.end())
            return it->second;
        std::vector<double> q;
        if (const auto* pg = std::get_if<PgKernel>(&kernel_))
            q = pg_kernel_law(target_, x, block_, pg->particles, pg->proposal);
        else
            q = block_conditional(target_, x, block_).table;
        return cache_.emplace(key, std::move(q)).first->second;
    }

  private:
    const SmoothingTarget& target_;
    Interval block_;
    const KernelConfig& kernel_;
    std::size_t lo_ = 0;
    std::size_t hi_ = 0;
    std::unordered_map<std::size_t, std::vector<double>> cache_;
};

// out = m * P^J
Eigen::MatrixXd apply_block(const SmoothingTarget& target, const Eigen::MatrixXd& m, const Interval& block,
                            const KernelConfig& kernel)
{
    const int k = target.num_states();
    const std::size_t n = target.length();
    std::size_t stride = 1;
    for (std::size_t t = 0; t < block.first; ++t)
        stride *= static_cast<std::size_t>(k);

    BlockLawCache cache(target, block, kernel);
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(m.rows(), m.cols());
    for (Eigen::Index col = 0; col < m.cols(); ++col)
    {
        const Trajectory x = decode_trajectory(static_cast<std::size_t>(col), n, k);
        const auto& q = cache.law(x);
        const std::size_t base = static_cast<std::size_t>(col) - encode_block(x, block, k) * stride;
        for (std::size_t c = 0; c < q.size(); ++c)
        {
            if (q[c] == 0.0)
                continue;
            const auto dest = static_cast<Eigen::Index>(base + c * stride);
            out.col(dest) += q[c] * m.col(col);
        }
    }
    return out;
}

}  // namespace

std::size_t encode_trajectory(std::span<const State> x, int num_states)
{
    std::size_t code = 0;
    for (std::size_t t = x.size(); t-- > 0;)
        code = code * static_cast<std::size_t>(num_states) + static_cast<std::size_t>(x[t]);
    return code;
}

Trajectory decode_trajectory(std::size_t index, std::size_t length, int num_states)
{
    Trajectory x(length);
    for (std::size_t t = 0; t < length; ++t)
    {
        x[t] = static_cast<State>(index % static_cast<std::size_t>(num_states));
        index /= static_cast<std::size_t>(num_states);
    }
    return x;
}

std::size_t encode_block(std::span<const State> x, const Interval& block, int num_states)
{
    return encode_trajectory(x.subspan(block.first, block.size()), num_states);
}

BlockConditional block_conditional(const SmoothingTarget& target, std::span<const State> x,
                                   const Interval& block, std::size_t cap)
{
    const std::size_t n = target.length();
    if (x.size() != n || block.first > block.last || block.last >= n)
        throw ValidationError("block conditional: block or trajectory does not match the target");
    const int k = target.num_states();
    const std::size_t size = checked_power(k, block.size(), cap,
                                           "block conditional table (use sample_block_conditional)");
    BlockConditional out;
    out.block = block;
    const Boundary bd = boundary(block, n);
    if (bd.left)
        out.left = x[*bd.left];
    if (bd.right)
        out.right = x[*bd.right];

    std::vector<double> logw(size);
    for (std::size_t c = 0; c < size; ++c)
    {
        const Trajectory cfg = decode_trajectory(c, block.size(), k);
        double lw = 0.0;
        for (std::size_t j = 0; j < cfg.size(); ++j)
        {
            const std::size_t site = block.first + j;
            const State prev_state = j > 0 ? cfg[j - 1] : (out.left ? *out.left : -1);
            lw += (site == 0 ? target.log_initial(cfg[j]) : target.log_transition(prev_state, cfg[j]))
                  + target.log_emission(site, cfg[j]);
        }
        if (out.right)
            lw += target.log_transition(cfg.back(), *out.right);
        logw[c] = lw;
    }
    const double norm = log_sum_exp(logw);
    if (norm == kNegInf)
        throw Error("block conditional has zero mass for the given boundary");
    out.table.resize(size);
    for (std::size_t c = 0; c < size; ++c)
        out.table[c] = logw[c] == kNegInf ? 0.0 : std::exp(logw[c] - norm);
    return out;
}

std::vector<State> sample_block_conditional(const SmoothingTarget& target, std::span<const State> x,
                                            const Interval& block, StreamRng& rng)
{
    const std::size_t n = target.length();
    if (x.size() != n || block.first > block.last || block.last >= n)
        throw ValidationError("block conditional: block or trajectory does not match the target");
    const auto k = static_cast<std::size_t>(target.num_states());
    const std::size_t len = block.size();
    const Boundary bd = boundary(block, n);

    // filter[t][x]: log p(x_t = x, y_{s:t} | x_{s-1}) with the right boundary
    // factor folded into the last site as an extra observation
    std::vector<double> filter(len * k);
    std::vector<double> terms(k);
    for (std::size_t t = 0; t < len; ++t)
    {
        const std::size_t site = block.first + t;
        for (std::size_t xs = 0; xs < k; ++xs)
        {
            const auto s = static_cast<State>(xs);
            double pred;
            if (t == 0)
                pred = site == 0 ? target.log_initial(s) : target.log_transition(x[*bd.left], s);
            else
            {
                for (std::size_t p = 0; p < k; ++p)
                    terms[p] = filter[(t - 1) * k + p] + target.log_transition(static_cast<State>(p), s);
                pred = log_sum_exp(terms);
            }
            double v = pred + target.log_emission(site, s);
            if (t + 1 == len && bd.right)
                v += target.log_transition(s, x[*bd.right]);
            filter[t * k + xs] = v;
        }
    }

    std::vector<State> out(len);
    std::vector<double> w(k);
    for (std::size_t t = len; t-- > 0;)
    {
        for (std::size_t xs = 0; xs < k; ++xs)
        {
            w[xs] = filter[t * k + xs];
            if (t + 1 < len)
                w[xs] += target.log_transition(static_cast<State>(xs), out[t + 1]);
        }
        out[t] = static_cast<State>(sample_log_categorical(w, rng));
    }
    return out;
}

Eigen::VectorXd enumerate_target(const SmoothingTarget& target, std::size_t cap)
{
    const int k = target.num_states();
    const std::size_t n = target.length();
    const std::size_t size = checked_power(k, n, cap, "trajectory space");
    Eigen::VectorXd phi(static_cast<Eigen::Index>(size));
    const double lz = target.log_evidence();
    for (std::size_t i = 0; i < size; ++i)
    {
        const double lp = log_joint_unnormalised(target, decode_trajectory(i, n, k));
        phi(static_cast<Eigen::Index>(i)) = lp == kNegInf ? 0.0 : std::exp(lp - lz);
    }
    return phi;
}

Eigen::MatrixXd smoothing_marginals(const SmoothingTarget& target)
{
    const int k = target.num_states();
    const auto n = static_cast<Eigen::Index>(target.length());
    Eigen::MatrixXd fwd(n, k), bwd(n, k);
    std::vector<double> terms(static_cast<std::size_t>(k));
    for (int x = 0; x < k; ++x)
        fwd(0, x) = target.log_initial(x) + target.log_emission(0, x);
    for (Eigen::Index t = 1; t < n; ++t)
        for (int x = 0; x < k; ++x)
        {
            for (int p = 0; p < k; ++p)
                terms[static_cast<std::size_t>(p)] = fwd(t - 1, p) + target.log_transition(p, x);
            fwd(t, x) = log_sum_exp(terms) + target.log_emission(static_cast<std::size_t>(t), x);
        }
    bwd.row(n - 1).setZero();
    for (Eigen::Index t = n - 1; t-- > 0;)
        for (int x = 0; x < k; ++x)
        {
            for (int nx = 0; nx < k; ++nx)
                terms[static_cast<std::size_t>(nx)] = target.log_transition(x, nx)
                                                      + target.log_emission(static_cast<std::size_t>(t + 1), nx)
                                                      + bwd(t + 1, nx);
            bwd(t, x) = log_sum_exp(terms);
        }
    Eigen::MatrixXd out(n, k);
    for (Eigen::Index t = 0; t < n; ++t)
        for (int x = 0; x < k; ++x)
        {
            const double v = fwd(t, x) + bwd(t, x) - target.log_evidence();
            out(t, x) = v == kNegInf ? 0.0 : std::exp(v);
        }
    return out;
}

Eigen::MatrixXd compose_operator(const SmoothingTarget& target, const BlockCover& cover,
                                 std::span<const std::size_t> order, const KernelConfig& kernel,
                                 std::size_t cap)
{
    if (cover.length != target.length())
        throw ValidationError("cover length does not match the observation record");
    const std::size_t size = checked_power(target.num_states(), target.length(), cap, "trajectory space");
    const auto s = static_cast<Eigen::Index>(size);
    Eigen::MatrixXd m = Eigen::MatrixXd::Identity(s, s);
    for (std::size_t k : order)
    {
        if (k >= cover.blocks.size())
            throw ValidationError("visit order names a block outside the cover");
        m = apply_block(target, m, cover.blocks[k], kernel);
    }
    return m;
}

Eigen::MatrixXd block_operator(const SmoothingTarget& target, const Interval& block,
                               const KernelConfig& kernel, std::size_t cap)
{
    const BlockCover single = make_cover(target.length(), {block});
    const std::size_t order[] = {0};
    return compose_operator(target, single, order, kernel, cap);
}

SweepOperator sweep_operator(const SmoothingTarget& target, const BlockCover& cover,
                             const SweepSchedule& schedule, const KernelConfig& kernel, std::size_t cap)
{
    SweepOperator op;
    op.num_states = target.num_states();
    op.length = target.length();
    op.target = enumerate_target(target, cap);
    const auto fwd = schedule.order();
    op.matrix = compose_operator(target, cover, fwd, kernel, cap);
    if (schedule.kind == ScheduleKind::ReversiblePair)
    {
        const auto rev = schedule.reverse_order();
        op.matrix = 0.5 * (op.matrix + compose_operator(target, cover, rev, kernel, cap));
    }
    return op;
}

double tv_to_target(const SweepOperator& op, const Eigen::VectorXd& init, std::size_t sweeps)
{
    if (init.size() != op.target.size())
        throw ValidationError("initial distribution does not match the operator dimension");
    Eigen::RowVectorXd v = init.transpose();
    for (std::size_t i = 0; i < sweeps; ++i)
        v = v * op.matrix;
    return 0.5 * (v.transpose() - op.target).cwiseAbs().sum();
}

std::vector<double> tv_curve(const SweepOperator& op, const Eigen::VectorXd& init, std::size_t max_sweeps)
{
    if (init.size() != op.target.size())
        throw ValidationError("initial distribution does not match the operator dimension");
    std::vector<double> out;
    Eigen::RowVectorXd v = init.transpose();
    for (std::size_t i = 0;; ++i)
    {
        out.push_back(0.5 * (v.transpose() - op.target).cwiseAbs().sum());
        if (i == max_sweeps)
            break;
        v = v * op.matrix;
    }
    return out;
}

void write_operator_csv(const SweepOperator& op, std::ostream& os)
{
    os << "from";
    for (Eigen::Index j = 0; j < op.matrix.cols(); ++j)
        os << "," << j;
    os << "\n";
    os.precision(17);
    for (Eigen::Index i = 0; i < op.matrix.rows(); ++i)
    {
        os << i;
        for (Eigen::Index j = 0; j < op.matrix.cols(); ++j)
            os << "," << op.matrix(i, j);
        os << "\n";
    }
}

}  // namespace blockpg
