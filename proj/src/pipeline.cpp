#include "vcprune/pipeline.hpp"

#include <fnmatch.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>

#include <json.hpp>

#include "vcprune/masking.hpp"
#include "vcprune/parallel.hpp"
#include "vcprune/scoring.hpp"
#include "vcprune/stats_file.hpp"
#include "vcprune/tensor_store.hpp"

namespace vcprune {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0)
{
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

double median(std::vector<double> v)
{
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

ScoreMatrix compute_scores(const WeightMatrix& weights, const ChannelStats* stats, const PruneJobConfig& config)
{
    switch (config.criterion) {
    case Criterion::magnitude: return score_magnitude(weights);
    case Criterion::wanda: return score_wanda(weights, *stats);
    case Criterion::cvr: return score_cvr(weights, *stats, config.cvr_options());
    }
    throw Error(ErrorKind::invalid_argument, "unknown criterion");
}

std::string fixed(double v, int digits)
{
    if (!std::isfinite(v)) return "-";
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
    return buf;
}

std::string pad(std::string s, std::size_t width)
{
    if (s.size() < width) s.append(width - s.size(), ' ');
    return s;
}

} // namespace

ActivationSplit split_activations(const ActivationMatrix& activations, double holdout)
{
    if (!(holdout >= 0.0 && holdout < 1.0)) {
        throw Error(ErrorKind::invalid_argument, "holdout must lie in [0, 1)");
    }
    const std::size_t n = activations.rows();
    std::size_t held = static_cast<std::size_t>(std::floor(holdout * static_cast<double>(n)));
    if (holdout > 0.0 && n >= 2) held = std::clamp<std::size_t>(held, 1, n - 1);
    const std::size_t calib = n - held;
    const std::size_t d = activations.cols();
    const auto v = activations.values();
    ActivationSplit split;
    split.calibration = ActivationMatrix(calib, d, std::vector<double>(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(calib * d)));
    split.heldout = ActivationMatrix(held, d, std::vector<double>(v.begin() + static_cast<std::ptrdiff_t>(calib * d), v.end()));
    return split;
}

double reconstruction_error(const WeightMatrix& original, const WeightMatrix& pruned, const ActivationMatrix& activations)
{
    require_same_shape(original, pruned, "reconstruction_error");
    if (activations.cols() != original.cols()) {
        throw Error(ErrorKind::dimension_mismatch, "activation width does not match weight d_in");
    }
    const std::size_t n = activations.rows();
    const std::size_t d_out = original.rows();
    const std::size_t d_in = original.cols();
    std::vector<double> err(n, 0.0);
    std::vector<double> ref(n, 0.0);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t s = 0; s < static_cast<std::ptrdiff_t>(n); ++s) {
        const double* x = activations.data() + static_cast<std::size_t>(s) * d_in;
        double e = 0.0, r = 0.0;
        for (std::size_t i = 0; i < d_out; ++i) {
            const double* w = original.data() + i * d_in;
            const double* p = pruned.data() + i * d_in;
            double y = 0.0, yp = 0.0;
            for (std::size_t j = 0; j < d_in; ++j) {
                y += w[j] * x[j];
                yp += p[j] * x[j];
            }
            e += (yp - y) * (yp - y);
            r += y * y;
        }
        err[static_cast<std::size_t>(s)] = e;
        ref[static_cast<std::size_t>(s)] = r;
    }
    double e = 0.0, r = 0.0;
    for (std::size_t s = 0; s < n; ++s) {
        e += err[s];
        r += ref[s];
    }
    if (r == 0.0) return e == 0.0 ? 0.0 : INFINITY;
    return std::sqrt(e / r);
}

LayerResult prune_layer(const WeightMatrix& weights, const ChannelStats* stats, const PruneJobConfig& config,
                        const std::string& name, const ActivationMatrix* heldout)
{
    config.validate();
    if (weights.empty()) {
        throw Error(ErrorKind::empty_input, "layer '" + name + "' is empty");
    }
    for (double w : weights.values()) {
        if (!std::isfinite(w)) throw Error(ErrorKind::non_finite, "layer '" + name + "' has non-finite weights");
    }
    if (config.needs_stats()) {
        if (stats == nullptr) {
            throw Error(ErrorKind::missing_stats, "criterion " + std::string(to_string(config.criterion)) +
                                                      " needs activation statistics for layer '" + name + "'");
        }
        if (stats->d_in() != weights.cols()) {
            throw Error(ErrorKind::dimension_mismatch, "layer '" + name + "': stats d_in " + std::to_string(stats->d_in()) +
                                                           " != weight d_in " + std::to_string(weights.cols()));
        }
    }

    LayerResult result;
    auto& report = result.report;
    report.layer = name;
    report.d_out = weights.rows();
    report.d_in = weights.cols();
    report.criterion = config.criterion;
    report.sparsity = config.sparsity.to_string();
    report.target_sparsity = config.sparsity.target_sparsity();
    report.ec = config.ec;

    auto t0 = Clock::now();
    const auto scores = compute_scores(weights, stats, config);
    report.timings.scoring = seconds_since(t0);

    t0 = Clock::now();
    result.mask = build_mask(scores, config.sparsity, config.grouping);
    if (config.ec == EcMode::off) {
        result.weights = apply_mask(weights, result.mask);
    }
    report.timings.masking = seconds_since(t0);

    if (config.ec != EcMode::off) {
        t0 = Clock::now();
        auto comp = energy_compensate(weights, result.mask, config.ec_config, config.ec);
        report.timings.compensation = seconds_since(t0);
        result.weights = std::move(comp.weights);
        report.correction = std::move(comp.report);
    }

    report.achieved_sparsity = mask_sparsity(result.mask);
    if (heldout != nullptr && heldout->rows() > 0) {
        report.reconstruction_error = reconstruction_error(weights, result.weights, *heldout);
    }
    return result;
}

JobSummary run_job(const PruneJobConfig& config)
{
    config.validate();
    if (config.input.empty()) throw Error(ErrorKind::invalid_argument, "no input checkpoint configured");
    if (config.output.empty()) throw Error(ErrorKind::invalid_argument, "no output checkpoint configured");
    set_num_threads(config.threads);

    const auto input = TensorFile::load(config.input);
    std::optional<StatsFile> stats_file;
    if (!config.stats.empty()) stats_file = read_stats_file(config.stats);
    std::optional<TensorFile> dumps;
    if (!config.activations.empty()) dumps = TensorFile::load(config.activations);

    TensorFile output;
    TensorFile masks;
    output.metadata() = input.metadata();
    JobSummary summary;

    for (const auto& name : input.names()) {
        const auto& entry = input.at(name);
        if (!entry.is_float_matrix() || fnmatch(config.filter.c_str(), name.c_str(), 0) != 0) {
            output.put(name, entry);
            summary.passthrough.push_back(name);
            continue;
        }
        try {
            const auto weights = input.matrix(name);
            std::optional<ChannelStats> stats;
            std::optional<ActivationMatrix> heldout;
            if (dumps && dumps->contains(name)) {
                auto split = split_activations(dumps->matrix(name), config.holdout);
                if (!stats_file && split.calibration.rows() > 0) {
                    stats = update(ChannelStats{}, split.calibration);
                }
                if (split.heldout.rows() > 0) heldout = std::move(split.heldout);
            }
            if (stats_file) {
                if (const auto* section = stats_file->find(name)) stats = to_channel_stats(*section);
            }
            auto result = prune_layer(weights, stats ? &*stats : nullptr, config, name, heldout ? &*heldout : nullptr);
            output.put_matrix(name, result.weights);
            masks.put_mask(name + ".mask", result.mask);
            summary.layers.push_back(std::move(result.report));
        } catch (const Error& e) {
            throw Error(e.kind(), "layer '" + name + "': " + e.what());
        }
    }

    output.save(config.output);
    masks.save(config.masks_path());
    if (!config.report.empty()) {
        std::ofstream out(config.report, std::ios::trunc);
        if (!out) throw Error(ErrorKind::io, "cannot open for writing: " + config.report.string());
        out << report_json(summary, config) << '\n';
        if (!out.flush()) throw Error(ErrorKind::io, "write failed: " + config.report.string());
    }
    return summary;
}

std::string report_json(const JobSummary& summary, const PruneJobConfig& config)
{
    ordered_json doc;
    ordered_json cfg;
    cfg["criterion"] = to_string(config.criterion);
    cfg["alpha"] = config.alpha;
    cfg["eps"] = config.eps;
    cfg["activation_factor"] = to_string(config.activation_factor);
    cfg["sparsity"] = config.sparsity.to_string();
    cfg["grouping"] = to_string(config.grouping);
    cfg["ec"] = to_string(config.ec);
    cfg["ec_eps"] = config.ec_config.eps;
    cfg["clamp_lo"] = config.ec_config.clamp_lo;
    cfg["clamp_hi"] = config.ec_config.clamp_hi;
    cfg["filter"] = config.filter;
    cfg["holdout"] = config.holdout;
    doc["config"] = cfg;

    ordered_json layers = ordered_json::array();
    for (const auto& r : summary.layers) {
        ordered_json l;
        l["layer"] = r.layer;
        l["d_out"] = r.d_out;
        l["d_in"] = r.d_in;
        l["criterion"] = to_string(r.criterion);
        l["sparsity"] = r.sparsity;
        l["target_sparsity"] = r.target_sparsity;
        l["achieved_sparsity"] = r.achieved_sparsity;
        l["ec"] = to_string(r.ec);
        l["reconstruction_error"] = r.reconstruction_error ? ordered_json(*r.reconstruction_error) : ordered_json(nullptr);
        if (r.correction) {
            const auto& c = *r.correction;
            l["correction"] = {
                {"clamped_columns", c.clamped_columns},
                {"clamped_rows", c.clamped_rows},
                {"column_deviation_before", c.column_deviation_before},
                {"column_deviation_after", c.column_deviation_after},
                {"row_deviation_before", c.row_deviation_before},
                {"row_deviation_after", c.row_deviation_after},
                {"column_scales", c.column_scales},
                {"row_scales", c.row_scales},
            };
        }
        if (config.report_timings) {
            l["timings"] = {{"scoring", r.timings.scoring},
                            {"masking", r.timings.masking},
                            {"compensation", r.timings.compensation}};
        }
        layers.push_back(std::move(l));
    }
    doc["layers"] = std::move(layers);
    doc["passthrough"] = summary.passthrough;
    return doc.dump(2);
}

std::string format_report(const std::string& json_text)
{
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::exception& e) {
        throw Error(ErrorKind::malformed_file, std::string("report is not valid JSON: ") + e.what());
    }
    if (!doc.contains("layers") || !doc["layers"].is_array()) {
        throw Error(ErrorKind::malformed_file, "report has no 'layers' array");
    }
    std::ostringstream out;
    if (doc.contains("config")) {
        const auto& c = doc["config"];
        out << "criterion " << c.value("criterion", "?") << ", sparsity " << c.value("sparsity", "?") << ", ec "
            << c.value("ec", "?") << "\n\n";
    }
    out << pad("layer", 28) << pad("shape", 12) << pad("sparsity", 10) << pad("recon_err", 11) << pad("clamped", 9)
        << pad("col_dev before->after", 24) << "row_dev before->after\n";
    for (const auto& l : doc["layers"]) {
        const std::string shape = std::to_string(l.value("d_out", 0)) + "x" + std::to_string(l.value("d_in", 0));
        const auto& re = l["reconstruction_error"];
        std::string col = "-", row = "-", clamped = "-";
        if (l.contains("correction")) {
            const auto& c = l["correction"];
            col = fixed(c.value("column_deviation_before", 0.0), 4) + " -> " + fixed(c.value("column_deviation_after", 0.0), 4);
            row = fixed(c.value("row_deviation_before", 0.0), 4) + " -> " + fixed(c.value("row_deviation_after", 0.0), 4);
            clamped = std::to_string(c.value("clamped_columns", 0) + c.value("clamped_rows", 0));
        }
        out << pad(l.value("layer", "?"), 28) << pad(shape, 12) << pad(fixed(l.value("achieved_sparsity", 0.0), 4), 10)
            << pad(re.is_number() ? fixed(re.get<double>(), 5) : "-", 11) << pad(clamped, 9) << pad(col, 24) << row
            << '\n';
    }
    if (doc.contains("passthrough") && !doc["passthrough"].empty()) {
        out << "\n" << doc["passthrough"].size() << " tensor(s) copied unchanged\n";
    }
    return out.str();
}

BenchmarkTable benchmark_layer(const std::string& name, const WeightMatrix& weights, const ChannelStats* stats,
                               const PruneJobConfig& config, int repeats)
{
    if (repeats < 3) {
        throw Error(ErrorKind::invalid_argument, "benchmark needs at least 3 repeats");
    }
    struct Method {
        std::string label;
        Criterion criterion;
        EcMode ec;
    };
    std::vector<Method> methods{{"magnitude", Criterion::magnitude, EcMode::off}};
    if (stats) methods.push_back({"wanda", Criterion::wanda, EcMode::off});
    if (config.criterion != Criterion::magnitude && (config.criterion != Criterion::wanda || !stats)) {
        methods.push_back({std::string(to_string(config.criterion)), config.criterion, EcMode::off});
    }
    const EcMode ec = config.ec == EcMode::off ? EcMode::columns_rows : config.ec;
    methods.push_back({std::string(to_string(config.criterion)) + (ec == EcMode::columns ? "+EC_col" : "+EC"),
                       config.criterion, ec});

    std::erase_if(methods, [&](const Method& m) { return m.criterion != Criterion::magnitude && !stats; });

    // Methods take turns within each repeat so that background load drifts
    // hit all of them alike.
    struct Samples {
        std::vector<double> scoring, masking, comp, total;
    };
    std::vector<Samples> samples(methods.size());
    for (int r = 0; r < repeats; ++r) {
        for (std::size_t k = 0; k < methods.size(); ++k) {
            PruneJobConfig run = config;
            run.criterion = methods[k].criterion;
            run.ec = methods[k].ec;
            const auto res = prune_layer(weights, stats, run, name);
            samples[k].scoring.push_back(res.report.timings.scoring);
            samples[k].masking.push_back(res.report.timings.masking);
            samples[k].comp.push_back(res.report.timings.compensation);
            samples[k].total.push_back(res.report.timings.total());
        }
    }

    BenchmarkTable table;
    for (std::size_t k = 0; k < methods.size(); ++k) {
        const auto& m = methods[k];
        auto& t = samples[k];
        BenchmarkRow row{name, m.label, m.ec != EcMode::off,
                         {median(t.scoring), median(t.masking), median(t.comp)}, median(t.total)};
        table.rows.push_back(row);
        if (m.ec != EcMode::off) {
            const double base = row.median.scoring + row.median.masking;
            table.ec_overhead.push_back(base > 0.0 ? row.median.compensation / base : 0.0);
        }
    }
    return table;
}

BenchmarkTable benchmark(const PruneJobConfig& config, int repeats)
{
    config.validate();
    if (repeats < 3) throw Error(ErrorKind::invalid_argument, "benchmark needs at least 3 repeats");
    set_num_threads(config.threads);
    const auto input = TensorFile::load(config.input);
    std::optional<StatsFile> stats_file;
    if (!config.stats.empty()) stats_file = read_stats_file(config.stats);
    std::optional<TensorFile> dumps;
    if (!config.activations.empty()) dumps = TensorFile::load(config.activations);

    BenchmarkTable table;
    for (const auto& name : input.names()) {
        const auto& entry = input.at(name);
        if (!entry.is_float_matrix() || fnmatch(config.filter.c_str(), name.c_str(), 0) != 0) continue;
        std::optional<ChannelStats> stats;
        if (stats_file) {
            if (const auto* s = stats_file->find(name)) stats = to_channel_stats(*s);
        } else if (dumps && dumps->contains(name)) {
            stats = update(ChannelStats{}, split_activations(dumps->matrix(name), config.holdout).calibration);
        }
        auto t = benchmark_layer(name, input.matrix(name), stats ? &*stats : nullptr, config, repeats);
        table.rows.insert(table.rows.end(), t.rows.begin(), t.rows.end());
        table.ec_overhead.insert(table.ec_overhead.end(), t.ec_overhead.begin(), t.ec_overhead.end());
    }
    return table;
}

std::string format_benchmark(const BenchmarkTable& table)
{
    std::ostringstream out;
    out << pad("layer", 24) << pad("method", 16) << pad("update", 8) << pad("scoring_s", 11) << pad("masking_s", 11)
        << pad("ec_s", 11) << "total_s\n";
    for (const auto& r : table.rows) {
        out << pad(r.layer, 24) << pad(r.method, 16) << pad(r.weight_update ? "yes" : "no", 8)
            << pad(fixed(r.median.scoring, 5), 11) << pad(fixed(r.median.masking, 5), 11)
            << pad(fixed(r.median.compensation, 5), 11) << fixed(r.total, 5) << '\n';
    }
    for (std::size_t k = 0; k < table.ec_overhead.size(); ++k) {
        out << "ec overhead vs scoring+masking: " << fixed(table.ec_overhead[k], 3) << "x\n";
    }
    return out.str();
}

std::vector<AblationRow> run_ablation(const WeightMatrix& weights, const ActivationMatrix& activations,
                                      const PruneJobConfig& config)
{
    config.validate();
    if (activations.cols() != weights.cols()) {
        throw Error(ErrorKind::dimension_mismatch, "activation width does not match weight d_in");
    }
    const auto split = split_activations(activations, config.holdout);
    if (split.heldout.rows() == 0 || split.calibration.rows() == 0) {
        throw Error(ErrorKind::invalid_argument, "ablation needs both calibration and held-out rows");
    }
    const auto stats = update(ChannelStats{}, split.calibration);

    auto row = [&](std::string label, const WeightMatrix& out, const PruneMask& mask) {
        return AblationRow{std::move(label), reconstruction_error(weights, out, split.heldout),
                           column_energy_deviation(weights, out), mask_sparsity(mask)};
    };

    std::vector<AblationRow> rows;
    const auto wanda_mask = build_mask(score_wanda(weights, stats), config.sparsity, config.grouping);
    rows.push_back(row("wanda", apply_mask(weights, wanda_mask), wanda_mask));

    const auto cvr_mask = build_mask(score_cvr(weights, stats, config.cvr_options()), config.sparsity, config.grouping);
    rows.push_back(row("+CVR", apply_mask(weights, cvr_mask), cvr_mask));
    rows.push_back(row("+EC_col", energy_compensate(weights, cvr_mask, config.ec_config, EcMode::columns).weights, cvr_mask));
    rows.push_back(row("+EC_col+row", energy_compensate(weights, cvr_mask, config.ec_config, EcMode::columns_rows).weights, cvr_mask));
    return rows;
}

std::string format_ablation(const std::vector<AblationRow>& rows)
{
    std::ostringstream out;
    out << pad("selection", 14) << pad("recon_err", 12) << pad("col_energy_dev", 16) << "sparsity\n";
    for (const auto& r : rows) {
        out << pad(r.label, 14) << pad(fixed(r.reconstruction_error, 6), 12) << pad(fixed(r.column_energy_deviation, 6), 16)
            << fixed(r.achieved_sparsity, 4) << '\n';
    }
    return out.str();
}

} // namespace vcprune
