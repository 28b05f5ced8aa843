#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace blockpg {

enum class ScheduleKind
{
    LeftToRight,
    Parallel,
    ReversiblePair,
};

/*!
 * Block visit order of one complete sweep, grouped into phases.
 *
 * Blocks inside a phase are mutually separated and may be updated
 * concurrently; phases run in sequence. Left-to-right uses one block per
 * phase. Parallel runs the 1st, 3rd, ... blocks, then the 2nd, 4th, ...
 * A reversible pair applies the forward phases or, with probability 1/2,
 * the exactly reversed sequence.
 */
struct SweepSchedule
{
    ScheduleKind kind = ScheduleKind::LeftToRight;
    ScheduleKind base = ScheduleKind::LeftToRight;
    std::vector<std::vector<std::size_t>> phases;
    std::vector<std::vector<std::size_t>> reverse_phases;

    static SweepSchedule left_to_right(std::size_t num_blocks);
    static SweepSchedule parallel(std::size_t num_blocks);
    static SweepSchedule reversible(ScheduleKind base, std::size_t num_blocks);

    //! Forward visit order, flattened.
    std::vector<std::size_t> order() const;
    std::vector<std::size_t> reverse_order() const;
};

std::string to_string(const SweepSchedule& s);

//! Parses "LR", "PAR", "REV-LR" or "REV-PAR" (case-insensitive).
SweepSchedule parse_schedule(const std::string& name, std::size_t num_blocks);

}  // namespace blockpg
