#include "vcprune/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace vcprune {

namespace {

std::string_view trim(std::string_view s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

double parse_double(std::string_view key, std::string_view value)
{
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
    if (ec != std::errc{} || ptr != value.data() + value.size() || !std::isfinite(v)) {
        throw Error(ErrorKind::invalid_argument, std::string(key) + ": expected a number, got '" + std::string(value) + "'");
    }
    return v;
}

int parse_int(std::string_view key, std::string_view value)
{
    int v = 0;
    auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
    if (ec != std::errc{} || ptr != value.data() + value.size()) {
        throw Error(ErrorKind::invalid_argument, std::string(key) + ": expected an integer, got '" + std::string(value) + "'");
    }
    return v;
}

bool parse_bool(std::string_view key, std::string_view value)
{
    if (value == "true" || value == "1" || value == "yes" || value == "on") return true;
    if (value == "false" || value == "0" || value == "no" || value == "off") return false;
    throw Error(ErrorKind::invalid_argument, std::string(key) + ": expected a boolean, got '" + std::string(value) + "'");
}

std::string number(double v)
{
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

} // namespace

std::filesystem::path PruneJobConfig::masks_path() const
{
    if (!masks.empty()) return masks;
    auto p = output;
    p += ".masks";
    return p;
}

void PruneJobConfig::validate() const
{
    if (!(alpha >= 0.0)) throw Error(ErrorKind::invalid_argument, "alpha must be >= 0");
    if (!(eps > 0.0)) throw Error(ErrorKind::invalid_argument, "eps must be > 0");
    if (!(holdout >= 0.0 && holdout < 1.0)) throw Error(ErrorKind::invalid_argument, "holdout must lie in [0, 1)");
    if (threads < 0) throw Error(ErrorKind::invalid_argument, "threads must be >= 0");
    ec_config.validate();
}

void apply_setting(PruneJobConfig& c, std::string_view key, std::string_view value)
{
    const std::string v(trim(value));
    if (key == "input") c.input = v;
    else if (key == "output") c.output = v;
    else if (key == "masks") c.masks = v;
    else if (key == "report") c.report = v;
    else if (key == "stats") c.stats = v;
    else if (key == "activations") c.activations = v;
    else if (key == "criterion") c.criterion = parse_criterion(v);
    else if (key == "alpha") c.alpha = parse_double(key, v);
    else if (key == "eps") c.eps = parse_double(key, v);
    else if (key == "activation_factor") c.activation_factor = parse_activation_factor(v);
    else if (key == "sparsity") c.sparsity = SparsitySpec::parse(v);
    else if (key == "grouping") c.grouping = parse_grouping(v);
    else if (key == "ec") c.ec = parse_ec_mode(v);
    else if (key == "ec_eps") c.ec_config.eps = parse_double(key, v);
    else if (key == "clamp_lo") c.ec_config.clamp_lo = parse_double(key, v);
    else if (key == "clamp_hi") c.ec_config.clamp_hi = parse_double(key, v);
    else if (key == "filter") c.filter = v;
    else if (key == "holdout") c.holdout = parse_double(key, v);
    else if (key == "report_timings") c.report_timings = parse_bool(key, v);
    else if (key == "threads") c.threads = parse_int(key, v);
    else throw Error(ErrorKind::invalid_argument, "unknown config key '" + std::string(key) + "'");
}

std::map<std::string, std::string> parse_settings(std::istream& in)
{
    std::map<std::string, std::string> out;
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        const auto body = trim(line);
        if (body.empty()) continue;
        const auto eq = body.find('=');
        if (eq == std::string_view::npos) {
            throw Error(ErrorKind::invalid_argument, "config line " + std::to_string(n) + ": expected key=value");
        }
        const auto key = trim(body.substr(0, eq));
        if (key.empty()) {
            throw Error(ErrorKind::invalid_argument, "config line " + std::to_string(n) + ": empty key");
        }
        out[std::string(key)] = std::string(trim(body.substr(eq + 1)));
    }
    return out;
}

PruneJobConfig load_config(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::missing_file, "cannot open config " + path.string());
    PruneJobConfig c;
    for (const auto& [k, v] : parse_settings(in)) apply_setting(c, k, v);
    return c;
}

std::string format_config(const PruneJobConfig& c)
{
    std::ostringstream out;
    auto path = [&](const char* key, const std::filesystem::path& p) {
        if (!p.empty()) out << key << " = " << p.string() << '\n';
    };
    path("input", c.input);
    path("output", c.output);
    path("masks", c.masks);
    path("report", c.report);
    path("stats", c.stats);
    path("activations", c.activations);
    out << "criterion = " << to_string(c.criterion) << '\n'
        << "alpha = " << number(c.alpha) << '\n'
        << "eps = " << number(c.eps) << '\n'
        << "activation_factor = " << to_string(c.activation_factor) << '\n'
        << "sparsity = " << c.sparsity.to_string() << '\n'
        << "grouping = " << to_string(c.grouping) << '\n'
        << "ec = " << to_string(c.ec) << '\n'
        << "ec_eps = " << number(c.ec_config.eps) << '\n'
        << "clamp_lo = " << number(c.ec_config.clamp_lo) << '\n'
        << "clamp_hi = " << number(c.ec_config.clamp_hi) << '\n'
        << "filter = " << c.filter << '\n'
        << "holdout = " << number(c.holdout) << '\n'
        << "report_timings = " << (c.report_timings ? "true" : "false") << '\n'
        << "threads = " << c.threads << '\n';
    return out.str();
}

} // namespace vcprune
