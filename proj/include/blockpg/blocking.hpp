#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace blockpg {

//! Closed interval of sites [first, last], 0-based.
struct Interval
{
    std::size_t first = 0;
    std::size_t last = 0;

    std::size_t size() const noexcept { return last - first + 1; }
    bool contains(std::size_t i) const noexcept { return first <= i && i <= last; }
    friend bool operator==(const Interval&, const Interval&) = default;
};

/*!
 * Ordered cover of the sites 0..T-1 by intervals.
 *
 * Any list of intervals can be represented so that arbitrary covers can be
 * analysed; validate_cover() reports which of the structural assumptions
 * hold. Covers produced by build_cover() also record their common block
 * size and overlap.
 */
struct BlockCover
{
    std::size_t length = 0;
    std::vector<Interval> blocks;
    std::optional<std::size_t> common_size;
    std::optional<std::size_t> common_overlap;

    std::size_t num_blocks() const noexcept { return blocks.size(); }
};

enum class CoverAssumption
{
    Cover,  // union is not 0..T-1 or an interval is malformed
    B1,     // interval blocks with strictly increasing min and max
    B2,     // non-consecutive blocks separated by at least one site
    B3,     // common block size and overlap
};

const char* to_string(CoverAssumption a) noexcept;

struct CoverViolation
{
    CoverAssumption assumption;
    std::vector<std::size_t> blocks;  // 0-based block indices involved
    std::string message;
};

/*!
 * Regular cover with m = (T - p) / (L - p) blocks of size L overlapping by p.
 *
 * Throws ValidationError unless 1 <= L <= T, p < L and (L - p) divides
 * (T - p); the message names the nearest valid lengths above and below T.
 */
BlockCover build_cover(std::size_t length, std::size_t block_size, std::size_t overlap);

//! Cover from explicit 0-based intervals; no validation beyond basic shape.
BlockCover make_cover(std::size_t length, std::vector<Interval> blocks);

std::vector<CoverViolation> validate_cover(const BlockCover& cover);

//! Throws ValidationError listing every violation if the cover fails Cover/B1/B2.
void require_ordered_cover(const BlockCover& cover);

//! Left and right boundary sites of block k (absent at the sequence ends).
struct Boundary
{
    std::optional<std::size_t> left;
    std::optional<std::size_t> right;
};
Boundary boundary(const BlockCover& cover, std::size_t k);
Boundary boundary(const Interval& block, std::size_t length);

//! Canonical one-line form, e.g. "L=5,p=1,m=3:[1-5][5-9][9-13]" (1-based sites).
std::string to_string(const BlockCover& cover);

/*!
 * Lumped segment system of a regular cover.
 *
 * Sites are grouped into 2m-1 consecutive segments that alternate between
 * block interiors and overlaps; lumped block k covers segments
 * {2k-2, 2k-1, 2k} (1-based) intersected with the segment range.
 */
struct XiSystem
{
    std::vector<Interval> segments;                // in site units
    std::vector<std::vector<std::size_t>> blocks;  // 0-based segment indices per block

    //! The lumped blocks as a cover of the segment index set.
    BlockCover as_cover() const;
};

//! Throws ValidationError for p = 0, for L <= 2p, or if the cover is not regular.
XiSystem lump(const BlockCover& cover);

//! Block indices in the PAR visit order: 1st, 3rd, ... then 2nd, 4th, ... (0-based).
std::vector<std::size_t> par_order(std::size_t num_blocks);

//! Which blocks each site belongs to (0-based block indices, ascending).
std::vector<std::vector<std::size_t>> site_membership(const BlockCover& cover);

}  // namespace blockpg
