#include "blockpg/blocking.hpp"

#include <sstream>

#include "blockpg/error.hpp"

namespace blockpg {

const char* to_string(CoverAssumption a) noexcept
{
    switch (a)
    {
    case CoverAssumption::Cover: return "cover";
    case CoverAssumption::B1: return "B1";
    case CoverAssumption::B2: return "B2";
    case CoverAssumption::B3: return "B3";
    }
    return "?";
}

BlockCover build_cover(std::size_t length, std::size_t block_size, std::size_t overlap)
{
    if (block_size < 1 || block_size > length)
        throw ValidationError("block size L=" + std::to_string(block_size)
                              + " must satisfy 1 <= L <= T=" + std::to_string(length));
    if (overlap >= block_size)
        throw ValidationError("overlap p=" + std::to_string(overlap) + " must be smaller than L="
                              + std::to_string(block_size));
    const std::size_t stride = block_size - overlap;
    if ((length - overlap) % stride != 0)
    {
        // valid lengths are stride * m + p for m >= 1
        const std::size_t m_below = (length - overlap) / stride;
        std::ostringstream os;
        os << "T=" << length << " is not of the form (L-p)*m+p for L=" << block_size
           << ", p=" << overlap << "; nearest valid T: ";
        if (m_below >= 1)
            os << m_below * stride + overlap << " (below), ";
        os << (m_below + 1) * stride + overlap << " (above)";
        throw ValidationError(os.str());
    }
    const std::size_t m = (length - overlap) / stride;
    BlockCover cover;
    cover.length = length;
    cover.common_size = block_size;
    cover.common_overlap = overlap;
    cover.blocks.reserve(m);
    for (std::size_t k = 0; k < m; ++k)
        cover.blocks.push_back({k * stride, k * stride + block_size - 1});
    return cover;
}

BlockCover make_cover(std::size_t length, std::vector<Interval> blocks)
{
    BlockCover cover;
    cover.length = length;
    cover.blocks = std::move(blocks);
    return cover;
}

std::vector<CoverViolation> validate_cover(const BlockCover& cover)
{
    std::vector<CoverViolation> out;
    const auto& b = cover.blocks;
    const std::size_t n = cover.length;

    if (n == 0)
        out.push_back({CoverAssumption::Cover, {}, "sequence length must be positive"});
    if (b.empty())
        out.push_back({CoverAssumption::Cover, {}, "cover has no blocks"});

    std::vector<bool> covered(n, false);
    for (std::size_t k = 0; k < b.size(); ++k)
    {
        if (b[k].first > b[k].last || b[k].last >= n)
        {
            out.push_back({CoverAssumption::Cover, {k},
                           "block " + std::to_string(k + 1) + " is not a valid interval within 1.."
                               + std::to_string(n)});
            continue;
        }
        for (std::size_t i = b[k].first; i <= b[k].last; ++i)
            covered[i] = true;
    }
    for (std::size_t i = 0; i < n; ++i)
    {
        if (!covered[i])
        {
            out.push_back({CoverAssumption::Cover, {}, "site " + std::to_string(i + 1) + " is not covered"});
            break;
        }
    }

    for (std::size_t k = 1; k < b.size(); ++k)
    {
        if (!(b[k - 1].first < b[k].first && b[k - 1].last < b[k].last))
            out.push_back({CoverAssumption::B1, {k - 1, k},
                           "blocks " + std::to_string(k) + " and " + std::to_string(k + 1)
                               + " are not strictly increasing in min and max"});
    }
    for (std::size_t j = 0; j < b.size(); ++j)
    {
        for (std::size_t k = j + 2; k < b.size(); ++k)
        {
            // max(J_j) < min(J_k) - 1
            if (!(b[j].last + 1 < b[k].first))
                out.push_back({CoverAssumption::B2, {j, k},
                               "non-consecutive blocks " + std::to_string(j + 1) + " and "
                                   + std::to_string(k + 1) + " are not separated"});
        }
    }

    if (cover.common_size || cover.common_overlap)
    {
        const std::size_t size = cover.common_size.value_or(0);
        const std::size_t overlap = cover.common_overlap.value_or(0);
        for (std::size_t k = 0; k < b.size(); ++k)
            if (b[k].first <= b[k].last && b[k].size() != size)
                out.push_back({CoverAssumption::B3, {k},
                               "block " + std::to_string(k + 1) + " has size "
                                   + std::to_string(b[k].size()) + ", expected L=" + std::to_string(size)});
        for (std::size_t k = 1; k < b.size(); ++k)
        {
            const std::size_t ov = b[k - 1].last >= b[k].first ? b[k - 1].last - b[k].first + 1 : 0;
            if (ov != overlap)
                out.push_back({CoverAssumption::B3, {k - 1, k},
                               "blocks " + std::to_string(k) + " and " + std::to_string(k + 1)
                                   + " overlap by " + std::to_string(ov) + ", expected p="
                                   + std::to_string(overlap)});
        }
        if (size > overlap && (size - overlap) * b.size() + overlap != n)
            out.push_back({CoverAssumption::B3, {},
                           "T=" + std::to_string(n) + " differs from (L-p)*m+p"});
    }
    return out;
}

void require_ordered_cover(const BlockCover& cover)
{
    const auto violations = validate_cover(cover);
    std::string msg;
    for (const auto& v : violations)
    {
        if (v.assumption == CoverAssumption::B3)
            continue;
        msg += std::string(msg.empty() ? "" : "; ") + to_string(v.assumption) + ": " + v.message;
    }
    if (!msg.empty())
        throw ValidationError("invalid cover: " + msg);
}

Boundary boundary(const Interval& block, std::size_t length)
{
    Boundary out;
    if (block.first > 0)
        out.left = block.first - 1;
    if (block.last + 1 < length)
        out.right = block.last + 1;
    return out;
}

Boundary boundary(const BlockCover& cover, std::size_t k)
{
    if (k >= cover.blocks.size())
        throw ValidationError("block index " + std::to_string(k + 1) + " out of range 1.."
                              + std::to_string(cover.blocks.size()));
    return boundary(cover.blocks[k], cover.length);
}

std::string to_string(const BlockCover& cover)
{
    std::ostringstream os;
    if (cover.common_size && cover.common_overlap)
        os << "L=" << *cover.common_size << ",p=" << *cover.common_overlap << ",";
    os << "m=" << cover.blocks.size() << ":";
    for (const auto& b : cover.blocks)
        os << "[" << b.first + 1 << "-" << b.last + 1 << "]";
    return os.str();
}

BlockCover XiSystem::as_cover() const
{
    BlockCover c;
    c.length = segments.size();
    for (const auto& blk : blocks)
        c.blocks.push_back({blk.front(), blk.back()});
    return c;
}

XiSystem lump(const BlockCover& cover)
{
    if (!cover.common_size || !cover.common_overlap)
        throw ValidationError("lumping needs a regular cover with common L and p");
    const std::size_t size = *cover.common_size;
    const std::size_t overlap = *cover.common_overlap;
    if (overlap == 0)
        throw ValidationError("lumping is undefined for p=0 (empty overlap segments); "
                              "use the unlumped rate analysis instead");
    if (size <= 2 * overlap)
        throw ValidationError("lumping needs L > 2p so that interior segments are nonempty (L="
                              + std::to_string(size) + ", p=" + std::to_string(overlap) + ")");
    for (const auto& v : validate_cover(cover))
        throw ValidationError(std::string("lumping needs a valid regular cover: ") + to_string(v.assumption)
                              + ": " + v.message);

    const std::size_t m = cover.blocks.size();
    const std::size_t stride = size - overlap;
    XiSystem xi;
    if (m == 1)
    {
        xi.segments.push_back({0, cover.length - 1});
        xi.blocks.push_back({0});
        return xi;
    }
    // 1-based site ranges: Xi_1 = 1:(L-p); Xi_2i = (L-p)i+1 : (L-p)i+p;
    // Xi_{2i-1} = (L-p)(i-1)+p+1 : (L-p)i; Xi_{2m-1} = (L-p)(m-1)+p+1 : (L-p)m+p
    xi.segments.push_back({0, stride - 1});
    for (std::size_t i = 1; i < m; ++i)
    {
        xi.segments.push_back({stride * i, stride * i + overlap - 1});
        if (i + 1 < m)
            xi.segments.push_back({stride * i + overlap, stride * (i + 1) - 1});
    }
    xi.segments.push_back({stride * (m - 1) + overlap, stride * m + overlap - 1});

    const std::size_t count = 2 * m - 1;
    for (std::size_t k = 1; k <= m; ++k)
    {
        std::vector<std::size_t> blk;
        for (std::size_t s = 2 * k - 2; s <= 2 * k; ++s)
            if (s >= 1 && s <= count)
                blk.push_back(s - 1);
        xi.blocks.push_back(std::move(blk));
    }
    return xi;
}

std::vector<std::size_t> par_order(std::size_t num_blocks)
{
    std::vector<std::size_t> order;
    order.reserve(num_blocks);
    for (std::size_t k = 0; k < num_blocks; k += 2)
        order.push_back(k);
    for (std::size_t k = 1; k < num_blocks; k += 2)
        order.push_back(k);
    return order;
}

std::vector<std::vector<std::size_t>> site_membership(const BlockCover& cover)
{
    std::vector<std::vector<std::size_t>> out(cover.length);
    for (std::size_t k = 0; k < cover.blocks.size(); ++k)
        for (std::size_t i = cover.blocks[k].first; i <= cover.blocks[k].last && i < cover.length; ++i)
            out[i].push_back(k);
    return out;
}

}  // namespace blockpg
