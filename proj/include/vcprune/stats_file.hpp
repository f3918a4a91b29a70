#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "vcprune/calib_stats.hpp"

namespace vcprune {

struct ChannelRecord {
    std::size_t channel = 0;
    std::uint64_t count = 0;
    double mean = 0.0;
    /// Raw second moment E[x^2], not the deviation sum held by ChannelStats.
    double second_moment = 0.0;
};

struct StatsSection {
    std::string layer;
    std::vector<ChannelRecord> records;

    std::size_t d_in() const { return records.size(); }
};

/// Line-oriented calibration statistics, one section per layer:
///
///     # comment
///     layer <name> d_in <n>
///     channel <idx> count <n> mean <f> m2 <f>
///
/// Floats are written in shortest round-trip form.
struct StatsFile {
    std::vector<StatsSection> sections;

    const StatsSection* find(const std::string& layer) const;
};

StatsFile parse_stats(std::istream& in);
void format_stats(std::ostream& out, const StatsFile& stats);
StatsFile read_stats_file(const std::filesystem::path& path);
void write_stats_file(const std::filesystem::path& path, const StatsFile& stats);

StatsSection to_section(const std::string& layer, const ChannelStats& stats);
ChannelStats to_channel_stats(const StatsSection& section);

} // namespace vcprune
