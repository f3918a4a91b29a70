#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <fnmatch.h>
#include <fstream>
#include <iostream>
#include <iterator>
#include <map>
#include <optional>
#include <sstream>

#include "vcprune/config.hpp"
#include "vcprune/error.hpp"
#include "vcprune/pipeline.hpp"
#include "vcprune/stats_file.hpp"
#include "vcprune/synthetic.hpp"
#include "vcprune/tensor_store.hpp"

namespace {

using namespace vcprune;

std::string quoted(std::string_view s)
{
    std::string out = "\"";
    for (char ch : s) {
        switch (ch) {
        case '"': out += "\\\""; break;
        case '\\': out += "\\\\"; break;
        case '\n': out += "\\n"; break;
        default: out += ch;
        }
    }
    return out + '"';
}

int fail(std::string_view kind, std::string_view message)
{
    std::cerr << "error: kind=" << kind << " message=" << quoted(message) << '\n';
    return 1;
}

// Job settings shared by prune, bench and ablate. Every key accepted by the
// config file is also a flag (underscores become dashes); flags win.
struct JobOptions {
    std::string config_file;
    std::map<std::string, std::string> flags;
    std::map<std::string, CLI::Option*> options;
    std::vector<std::string> sets;

    void attach(CLI::App& app)
    {
        app.add_option("--config", config_file, "key=value job file")->check(CLI::ExistingFile);
        static const char* keys[] = {"input",    "output",  "masks",    "report",   "stats",  "activations",
                                     "criterion", "alpha",  "eps",      "activation_factor", "sparsity",
                                     "grouping", "ec",      "ec_eps",   "clamp_lo", "clamp_hi", "filter",
                                     "holdout",  "threads"};
        for (const char* key : keys) {
            std::string flag = "--" + std::string(key);
            std::replace(flag.begin(), flag.end(), '_', '-');
            options[key] = app.add_option(flag, flags[key]);
        }
        options["report_timings"] = app.add_flag("--report-timings");
        app.add_option("--set", sets, "extra key=value setting (repeatable)");
    }

    PruneJobConfig resolve() const
    {
        PruneJobConfig c;
        if (!config_file.empty()) c = load_config(config_file);
        for (const auto& [key, opt] : options) {
            if (opt->count() == 0) continue;
            apply_setting(c, key, key == "report_timings" ? "true" : flags.at(key));
        }
        for (const auto& s : sets) {
            const auto eq = s.find('=');
            if (eq == std::string::npos) throw Error(ErrorKind::invalid_argument, "--set expects key=value: " + s);
            apply_setting(c, s.substr(0, eq), s.substr(eq + 1));
        }
        c.validate();
        return c;
    }
};

std::pair<std::size_t, std::size_t> parse_shape(const std::string& text)
{
    const auto x = text.find('x');
    std::size_t r = 0, c = 0;
    try {
        if (x == std::string::npos) throw std::invalid_argument(text);
        std::size_t used = 0;
        r = std::stoul(text.substr(0, x), &used);
        if (used != x) throw std::invalid_argument(text);
        c = std::stoul(text.substr(x + 1), &used);
        if (used != text.size() - x - 1) throw std::invalid_argument(text);
    } catch (const std::exception&) {
        throw Error(ErrorKind::invalid_argument, "expected ROWSxCOLS, got '" + text + "'");
    }
    if (r == 0 || c == 0) throw Error(ErrorKind::invalid_argument, "shape must be nonzero: " + text);
    return {r, c};
}

std::string slurp(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::missing_file, "cannot open " + path);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

int cmd_stats(const std::string& dump, const std::string& output, double holdout, const std::string& filter)
{
    if (!(holdout >= 0.0 && holdout < 1.0)) throw Error(ErrorKind::invalid_argument, "holdout must lie in [0, 1)");
    const auto acts = TensorFile::load(dump);
    StatsFile file;
    for (const auto& name : acts.names()) {
        if (!acts.at(name).is_float_matrix() || fnmatch(filter.c_str(), name.c_str(), 0) != 0) continue;
        const auto split = split_activations(acts.matrix(name), holdout);
        file.sections.push_back(to_section(name, update(ChannelStats{}, split.calibration)));
        std::cout << name << ": " << split.calibration.rows() << " samples x " << split.calibration.cols()
                  << " channels (" << split.heldout.rows() << " held out)\n";
    }
    if (file.sections.empty()) throw Error(ErrorKind::empty_input, "no activation matrices matched in " + dump);
    write_stats_file(output, file);
    return 0;
}

int cmd_prune(const JobOptions& job)
{
    const auto config = job.resolve();
    const auto summary = run_job(config);
    std::cout << format_report(report_json(summary, config));
    std::cout << "wrote " << config.output.string() << " and " << config.masks_path().string() << '\n';
    return 0;
}

int cmd_bench(const JobOptions& job, int repeats, const std::string& synthetic, std::uint64_t seed, std::size_t samples)
{
    auto config = job.resolve();
    BenchmarkTable table;
    if (!synthetic.empty()) {
        const auto [rows, cols] = parse_shape(synthetic);
        const auto w = gaussian_matrix(rows, cols, seed);
        const auto stats = update(ChannelStats{}, gaussian_matrix(samples, cols, seed + 1));
        table = benchmark_layer("synthetic", w, &stats, config, repeats);
    } else {
        table = benchmark(config, repeats);
    }
    std::cout << format_benchmark(table);
    return 0;
}

int cmd_ablate(const JobOptions& job, const std::string& layer, bool synthetic, std::uint64_t seed,
               const SyntheticLayerOptions& shape, bool as_json)
{
    auto config = job.resolve();
    WeightMatrix w;
    ActivationMatrix x;
    if (synthetic) {
        auto l = make_aligned_layer(shape, seed);
        w = std::move(l.weights);
        x = std::move(l.activations);
    } else {
        if (config.input.empty() || config.activations.empty()) {
            throw Error(ErrorKind::invalid_argument, "ablate needs --input and --activations, or --synthetic");
        }
        const auto ckpt = TensorFile::load(config.input);
        std::string name = layer;
        if (name.empty()) {
            for (const auto& n : ckpt.names()) {
                if (ckpt.at(n).is_float_matrix()) {
                    name = n;
                    break;
                }
            }
        }
        w = ckpt.matrix(name);
        x = read_tensor(config.activations, name);
    }
    const auto rows = run_ablation(w, x, config);
    if (!as_json) {
        std::cout << format_ablation(rows);
        return 0;
    }
    auto doc = nlohmann::ordered_json::array();
    for (const auto& r : rows) {
        doc.push_back({{"label", r.label},
                       {"reconstruction_error", r.reconstruction_error},
                       {"column_energy_deviation", r.column_energy_deviation},
                       {"achieved_sparsity", r.achieved_sparsity}});
    }
    std::cout << doc.dump(2) << '\n';
    return 0;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Variance-calibrated post-training pruning"};
    app.require_subcommand(1);

    auto* stats = app.add_subcommand("stats", "Reduce an activation dump to per-channel statistics");
    std::string dump, stats_out, stats_filter = "*";
    double holdout = 0.2;
    stats->add_option("activations", dump, "activation dump (layer name -> samples x d_in)")->required();
    stats->add_option("-o,--output", stats_out, "stats file to write")->required();
    stats->add_option("--holdout", holdout, "trailing fraction left out of the statistics");
    stats->add_option("--filter", stats_filter, "glob over layer names");

    auto* prune = app.add_subcommand("prune", "Prune a checkpoint");
    JobOptions prune_job;
    prune_job.attach(*prune);

    auto* report = app.add_subcommand("report", "Pretty-print a JSON pruning report");
    std::string report_path;
    report->add_option("report", report_path)->required();

    auto* bench = app.add_subcommand("bench", "Time scoring, masking and compensation");
    JobOptions bench_job;
    bench_job.attach(*bench);
    int repeats = 5;
    std::string bench_shape;
    std::uint64_t bench_seed = 0;
    std::size_t bench_samples = 128;
    bench->add_option("--repeats", repeats, "runs per method (median reported, >= 3)");
    bench->add_option("--synthetic", bench_shape, "time a Gaussian ROWSxCOLS layer instead of --input");
    bench->add_option("--seed", bench_seed);
    bench->add_option("--samples", bench_samples, "synthetic calibration samples");

    auto* ablate = app.add_subcommand("ablate", "Wanda, +CVR, +EC_col, +EC_col+row on one layer");
    JobOptions ablate_job;
    ablate_job.attach(*ablate);
    std::string ablate_layer;
    bool ablate_synthetic = false;
    bool ablate_json = false;
    std::uint64_t ablate_seed = 0;
    SyntheticLayerOptions shape;
    ablate->add_option("--layer", ablate_layer, "tensor name (default: first matrix)");
    ablate->add_flag("--synthetic", ablate_synthetic, "use a generated layer with aligned activations");
    ablate->add_option("--seed", ablate_seed);
    ablate->add_flag("--json", ablate_json, "print rows as JSON with full precision");
    ablate->add_option("--d-out", shape.d_out);
    ablate->add_option("--d-in", shape.d_in);
    ablate->add_option("--samples", shape.samples);
    ablate->add_option("--rank", shape.rank);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        return fail("usage", e.what());
    }

    try {
        if (stats->parsed()) return cmd_stats(dump, stats_out, holdout, stats_filter);
        if (prune->parsed()) return cmd_prune(prune_job);
        if (report->parsed()) {
            std::cout << format_report(slurp(report_path));
            return 0;
        }
        if (bench->parsed()) return cmd_bench(bench_job, repeats, bench_shape, bench_seed, bench_samples);
        if (ablate->parsed()) return cmd_ablate(ablate_job, ablate_layer, ablate_synthetic, ablate_seed, shape, ablate_json);
    } catch (const Error& e) {
        return fail(to_string(e.kind()), e.what());
    } catch (const std::exception& e) {
        return fail("internal", e.what());
    }
    return 0;
}
