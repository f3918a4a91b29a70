#include "vcprune/stats_file.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace vcprune {

namespace {

constexpr double moment_tolerance = 1e-6;

[[noreturn]] void fail(std::size_t line, const std::string& msg)
{
    throw Error(ErrorKind::malformed_file, "stats line " + std::to_string(line) + ": " + msg);
}

template <typename T>
T parse_number(std::string_view text, std::size_t line, const char* what)
{
    T value{};
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size()) {
        fail(line, std::string("bad ") + what + " '" + std::string(text) + "'");
    }
    return value;
}

std::string shortest(double v)
{
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

void validate_section(const StatsSection& s, std::size_t declared, std::size_t line)
{
    if (s.records.size() != declared) {
        fail(line, "layer '" + s.layer + "' declares d_in " + std::to_string(declared) + " but has " +
                       std::to_string(s.records.size()) + " channel records");
    }
}

} // namespace

const StatsSection* StatsFile::find(const std::string& layer) const
{
    for (const auto& s : sections) {
        if (s.layer == layer) return &s;
    }
    return nullptr;
}

StatsFile parse_stats(std::istream& in)
{
    StatsFile file;
    std::size_t declared = 0;
    std::size_t section_line = 0;
    std::string text;
    std::size_t line = 0;
    while (std::getline(in, text)) {
        ++line;
        std::istringstream ss(text);
        std::vector<std::string> tok;
        for (std::string t; ss >> t;) tok.push_back(t);
        if (tok.empty() || tok[0].starts_with('#')) continue;

        if (tok[0] == "layer") {
            if (tok.size() != 4 || tok[2] != "d_in") fail(line, "expected 'layer <name> d_in <n>'");
            if (!file.sections.empty()) validate_section(file.sections.back(), declared, section_line);
            if (file.find(tok[1])) fail(line, "duplicate layer '" + tok[1] + "'");
            file.sections.push_back({tok[1], {}});
            declared = parse_number<std::size_t>(tok[3], line, "d_in");
            section_line = line;
            continue;
        }
        if (tok[0] != "channel") fail(line, "unknown record '" + tok[0] + "'");
        if (tok.size() != 8 || tok[2] != "count" || tok[4] != "mean" || tok[6] != "m2") {
            fail(line, "expected 'channel <idx> count <n> mean <f> m2 <f>'");
        }
        if (file.sections.empty()) fail(line, "channel record before any 'layer' line");
        auto& section = file.sections.back();
        ChannelRecord r;
        r.channel = parse_number<std::size_t>(tok[1], line, "channel index");
        r.count = parse_number<std::uint64_t>(tok[3], line, "count");
        r.mean = parse_number<double>(tok[5], line, "mean");
        r.second_moment = parse_number<double>(tok[7], line, "m2");
        if (r.channel != section.records.size()) {
            fail(line, "channel index " + std::to_string(r.channel) + " out of order");
        }
        if (r.count < 1) fail(line, "count must be at least 1");
        if (!std::isfinite(r.mean) || !std::isfinite(r.second_moment)) fail(line, "non-finite moment");
        if (r.second_moment < r.mean * r.mean - moment_tolerance) fail(line, "m2 below mean^2");
        section.records.push_back(r);
    }
    if (in.bad()) {
        throw Error(ErrorKind::io, "stats read failed");
    }
    if (!file.sections.empty()) validate_section(file.sections.back(), declared, section_line);
    return file;
}

void format_stats(std::ostream& out, const StatsFile& stats)
{
    out << "# per-channel activation statistics: count, mean, m2 = E[x^2]\n";
    for (const auto& s : stats.sections) {
        out << "layer " << s.layer << " d_in " << s.records.size() << '\n';
        for (const auto& r : s.records) {
            out << "channel " << r.channel << " count " << r.count << " mean " << shortest(r.mean) << " m2 "
                << shortest(r.second_moment) << '\n';
        }
    }
}

StatsFile read_stats_file(const std::filesystem::path& path)
{
    std::error_code ec;
    if (!std::filesystem::is_regular_file(path, ec)) {
        throw Error(ErrorKind::missing_file, "no such file: " + path.string());
    }
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::io, "cannot open " + path.string());
    return parse_stats(in);
}

void write_stats_file(const std::filesystem::path& path, const StatsFile& stats)
{
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error(ErrorKind::io, "cannot open for writing: " + path.string());
    format_stats(out, stats);
    out.flush();
    if (!out) throw Error(ErrorKind::io, "write failed: " + path.string());
}

StatsSection to_section(const std::string& layer, const ChannelStats& stats)
{
    if (layer.empty() || layer.find_first_of(" \t\n") != std::string::npos) {
        throw Error(ErrorKind::invalid_argument, "layer name must be non-empty without whitespace");
    }
    if (stats.count() == 0) {
        throw Error(ErrorKind::empty_input, "layer '" + layer + "': stats hold no samples");
    }
    StatsSection s{layer, {}};
    const auto second = stats.second_moment();
    s.records.reserve(stats.d_in());
    for (std::size_t j = 0; j < stats.d_in(); ++j) {
        s.records.push_back({j, stats.count(), stats.mean()[j], second[j]});
    }
    return s;
}

ChannelStats to_channel_stats(const StatsSection& section)
{
    if (section.records.empty()) {
        throw Error(ErrorKind::empty_input, "layer '" + section.layer + "' has no channels");
    }
    const std::uint64_t count = section.records.front().count;
    std::vector<double> mean(section.records.size());
    std::vector<double> m2(section.records.size());
    for (std::size_t j = 0; j < section.records.size(); ++j) {
        const auto& r = section.records[j];
        if (r.count != count) {
            throw Error(ErrorKind::malformed_file, "layer '" + section.layer + "': channel counts differ");
        }
        mean[j] = r.mean;
        const double var = r.second_moment - r.mean * r.mean;
        m2[j] = var > 0.0 ? var * static_cast<double>(count) : 0.0;
    }
    return ChannelStats(count, std::move(mean), std::move(m2));
}

} // namespace vcprune
