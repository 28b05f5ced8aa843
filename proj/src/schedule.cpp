#include "blockpg/schedule.hpp"

#include <algorithm>
#include <cctype>

#include "blockpg/blocking.hpp"
#include "blockpg/error.hpp"

namespace blockpg {

SweepSchedule SweepSchedule::left_to_right(std::size_t num_blocks)
{
    SweepSchedule s;
    s.kind = s.base = ScheduleKind::LeftToRight;
    for (std::size_t k = 0; k < num_blocks; ++k)
        s.phases.push_back({k});
    s.reverse_phases.assign(s.phases.rbegin(), s.phases.rend());
    return s;
}

SweepSchedule SweepSchedule::parallel(std::size_t num_blocks)
{
    SweepSchedule s;
    s.kind = s.base = ScheduleKind::Parallel;
    std::vector<std::size_t> odd, even;
    for (std::size_t k = 0; k < num_blocks; ++k)
        (k % 2 == 0 ? odd : even).push_back(k);
    s.phases.push_back(odd);
    if (!even.empty())
        s.phases.push_back(even);
    s.reverse_phases.assign(s.phases.rbegin(), s.phases.rend());
    return s;
}

SweepSchedule SweepSchedule::reversible(ScheduleKind base, std::size_t num_blocks)
{
    if (base == ScheduleKind::ReversiblePair)
        throw ValidationError("a reversible pair needs a left-to-right or parallel base schedule");
    SweepSchedule s = base == ScheduleKind::Parallel ? parallel(num_blocks) : left_to_right(num_blocks);
    s.kind = ScheduleKind::ReversiblePair;
    return s;
}

std::vector<std::size_t> SweepSchedule::order() const
{
    std::vector<std::size_t> out;
    for (const auto& p : phases)
        out.insert(out.end(), p.begin(), p.end());
    return out;
}

std::vector<std::size_t> SweepSchedule::reverse_order() const
{
    auto out = order();
    std::reverse(out.begin(), out.end());
    return out;
}

std::string to_string(const SweepSchedule& s)
{
    const char* base = s.base == ScheduleKind::Parallel ? "PAR" : "LR";
    if (s.kind == ScheduleKind::ReversiblePair)
        return std::string("REV-") + base;
    return base;
}

SweepSchedule parse_schedule(const std::string& name, std::size_t num_blocks)
{
    std::string up = name;
    std::transform(up.begin(), up.end(), up.begin(), [](unsigned char c) { return std::toupper(c); });
    if (up == "LR" || up == "L-R")
        return SweepSchedule::left_to_right(num_blocks);
    if (up == "PAR")
        return SweepSchedule::parallel(num_blocks);
    if (up == "REV-LR")
        return SweepSchedule::reversible(ScheduleKind::LeftToRight, num_blocks);
    if (up == "REV-PAR")
        return SweepSchedule::reversible(ScheduleKind::Parallel, num_blocks);
    throw ValidationError("unknown schedule '" + name + "' (expected LR, PAR, REV-LR or REV-PAR)");
}

}  // namespace blockpg
