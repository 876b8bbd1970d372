#include "gatead/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <exception>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "gatead/benchmark.hpp"
#include "gatead/errors.hpp"
#include "gatead/eval.hpp"
#include "gatead/maps.hpp"
#include "gatead/score.hpp"
#include "gatead/synth.hpp"
#include "gatead/tokenio.hpp"
#include "gatead/train.hpp"

namespace gatead::cli {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

constexpr const char* kCheckpointName = "model.gadc";
constexpr const char* kHistoryName = "loss_history.csv";
constexpr const char* kManifestName = "manifest.json";
constexpr const char* kScoresName = "scores.csv";
constexpr const char* kSweepName = "sweep.csv";
constexpr const char* kMapsDir = "maps";

const std::vector<std::string> kTrainKeys = {"lr",         "max_epochs", "patience",    "min_delta",  "seed",
                                             "layers",     "hidden_dim", "mask_ratio",  "dropout",    "aggregation",
                                             "leaky_slope", "latent_dim", "gamma",      "g_hidden_dim", "objective"};
const std::vector<std::string> kScoreKeys = {"top_ratio", "pooling", "sigma", "out_rows", "out_cols"};

std::string flag_name(const std::string& key) {
    std::string flag = "--" + key;
    std::replace(flag.begin(), flag.end(), '_', '-');
    return flag;
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

/// Writes next to the destination and renames, so readers never see a partial file.
template <class Writer>
void write_atomically(const fs::path& path, Writer&& writer) {
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
        writer(out);
        out.flush();
        if (!out) throw IoError("failed writing " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) throw IoError("cannot move " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

void write_text(const fs::path& path, const std::string& text) {
    write_atomically(path, [&](std::ostream& out) { out << text; });
}

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
}

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

// --- settings plumbing -------------------------------------------------------

/// Raw flag values, keyed by setting name.
struct SettingFlags {
    std::map<std::string, std::string> values;
    std::map<std::string, CLI::Option*> options;
    std::string config_path;
};

void add_setting_flags(CLI::App& cmd, SettingFlags& flags, const std::vector<std::string>& keys) {
    cmd.add_option("--config", flags.config_path, "flat key = value settings file (flags take precedence)");
    for (const auto& key : keys) {
        flags.options[key] = cmd.add_option(flag_name(key), flags.values[key], "setting " + key);
    }
}

RunSettings resolve_settings(const SettingFlags& flags) {
    RunSettings settings;
    if (!flags.config_path.empty()) {
        for (const auto& [key, value] : parse_config_file(flags.config_path)) {
            apply_setting(settings, key, value, "config key " + key);
        }
    }
    for (const auto& [key, opt] : flags.options) {
        if (opt->count() > 0) apply_setting(settings, key, flags.values.at(key), flag_name(key));
    }
    settings.score.validate();
    return settings;
}

json config_json(const RunSettings& settings, const std::vector<std::string>& keys) {
    json obj = json::object();
    for (const auto& key : keys) {
        const std::string text = setting_value(settings, key);
        json parsed = json::parse(text, nullptr, false);
        obj[key] = parsed.is_discarded() ? json(text) : parsed;
    }
    return obj;
}

void write_manifest(const fs::path& out_dir, const std::string& command, const RunSettings& settings,
                    const std::vector<std::string>& keys, const std::vector<std::string>& inputs,
                    const std::vector<std::string>& outputs, const json& timings, json extra = json::object()) {
    json m;
    m["command"] = command;
    m["tool_version"] = kToolVersion;
    m["seed"] = settings.train.seed;
    m["config"] = config_json(settings, keys);
    m["inputs"] = inputs;
    m["outputs"] = outputs;
    m["timings_s"] = timings;
    for (auto& [k, v] : extra.items()) m[k] = v;
    write_text(out_dir / kManifestName, m.dump(2) + "\n");
}

// --- labeled files -----------------------------------------------------------

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream in(line);
    while (std::getline(in, cell, ',')) {
        const auto a = cell.find_first_not_of(" \t\r");
        const auto b = cell.find_last_not_of(" \t\r");
        cells.push_back(a == std::string::npos ? std::string() : cell.substr(a, b - a + 1));
    }
    return cells;
}

/// Two-column CSV with a header row; returns (stem of first column, second column).
std::vector<std::pair<std::string, std::string>> read_two_column_csv(const fs::path& path) {
    std::istringstream in(read_text(path));
    std::string line;
    std::vector<std::pair<std::string, std::string>> rows;
    bool header = true;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        if (header) {
            header = false;
            continue;
        }
        auto cells = split_csv_line(line);
        if (cells.size() != 2) {
            throw FormatError(path.string() + " line " + std::to_string(line_no) + ": expected 2 columns");
        }
        rows.emplace_back(fs::path(cells[0]).stem().string(), cells[1]);
    }
    return rows;
}

double parse_number_cell(const std::string& text, const fs::path& path) {
    try {
        std::size_t used = 0;
        const double v = std::stod(text, &used);
        if (used != text.size()) throw std::invalid_argument(text);
        return v;
    } catch (const std::exception&) {
        throw FormatError(path.string() + ": not a number: '" + text + "'");
    }
}

std::map<std::string, std::uint8_t> read_labels(const fs::path& path) {
    std::map<std::string, std::uint8_t> labels;
    for (const auto& [stem, value] : read_two_column_csv(path)) {
        if (value != "0" && value != "1") throw FormatError(path.string() + ": label must be 0 or 1, got '" + value + "'");
        if (!labels.emplace(stem, value == "1" ? 1 : 0).second) {
            throw ConfigError(path.string() + ": duplicate entry " + stem);
        }
    }
    return labels;
}

/// Stems present on one side only; empty when the two key sets agree.
template <class A, class B>
std::vector<std::string> orphans(const A& left, const B& right) {
    std::vector<std::string> out;
    for (const auto& [k, v] : left)
        if (!right.count(k)) out.push_back(k);
    for (const auto& [k, v] : right)
        if (!left.count(k)) out.push_back(k);
    std::sort(out.begin(), out.end());
    return out;
}

void reject_orphans(const std::vector<std::string>& names, const std::string& what) {
    if (names.empty()) return;
    std::string msg = "unmatched " + what + ":";
    for (const auto& n : names) msg += " " + n;
    throw ConfigError(msg);
}

std::map<std::string, fs::path> files_by_stem(const fs::path& dir, const std::string& extension) {
    if (!fs::is_directory(dir)) throw IoError(dir.string() + " is not a directory");
    std::map<std::string, fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == extension) {
            files.emplace(entry.path().stem().string(), entry.path());
        }
    }
    return files;
}

std::vector<PatchGrid> load_all(const std::vector<std::string>& paths) {
    std::vector<PatchGrid> grids;
    grids.reserve(paths.size());
    for (const auto& p : paths) grids.push_back(load_tokens(p));
    return grids;
}

void require_unique_stems(const std::vector<std::string>& paths) {
    std::set<std::string> seen;
    for (const auto& p : paths) {
        const std::string stem = fs::path(p).stem().string();
        if (!seen.insert(stem).second) throw ConfigError("two query files share the name " + stem);
    }
}

// --- metrics output ----------------------------------------------------------

const std::vector<std::string> kMetricNames = {"image_auroc", "image_ap", "pixel_auroc", "pixel_pro"};

std::vector<std::optional<double>> metric_values(const MetricsReport& r) {
    return {r.image_auroc, r.image_ap, r.pixel_auroc, r.pixel_pro};
}

std::string metrics_csv(const MetricsReport& r) {
    std::string header, row;
    const auto values = metric_values(r);
    for (std::size_t k = 0; k < kMetricNames.size(); ++k) {
        header += (k ? "," : "") + kMetricNames[k];
        row += (k ? "," : "") + (values[k] ? fmt(*values[k]) : std::string());
    }
    return header + "\n" + row + "\n";
}

std::string metrics_jsonl(const MetricsReport& r) {
    json obj = json::object();
    const auto values = metric_values(r);
    for (std::size_t k = 0; k < kMetricNames.size(); ++k) {
        obj[kMetricNames[k]] = values[k] ? json(*values[k]) : json(nullptr);
    }
    return obj.dump() + "\n";
}

// --- train -------------------------------------------------------------------

struct TrainArgs {
    std::vector<std::string> support;
    std::string out_dir;
    SettingFlags flags;
};

int cmd_train(const TrainArgs& args, std::ostream& out) {
    const RunSettings settings = resolve_settings(args.flags);
    const auto t_load = Clock::now();
    const std::vector<PatchGrid> support = load_all(args.support);
    const double load_s = seconds_since(t_load);

    const auto t_train = Clock::now();
    TrainResult result = train_model(support, settings.train);
    const double train_s = seconds_since(t_train);

    const fs::path dir(args.out_dir);
    ensure_dir(dir);
    Checkpoint ckpt{result.model, static_cast<std::uint32_t>(result.loss_history.size()), result.best_loss};
    write_atomically(dir / kCheckpointName, [&](std::ostream& s) { save_checkpoint(ckpt, s); });

    std::string history = "epoch,loss\n";
    for (std::size_t e = 0; e < result.loss_history.size(); ++e) {
        history += std::to_string(e) + "," + fmt(result.loss_history[e]) + "\n";
    }
    write_text(dir / kHistoryName, history);

    write_manifest(dir, "train", settings, kTrainKeys, args.support, {kCheckpointName, kHistoryName},
                   {{"load", load_s}, {"train", train_s}},
                   {{"epochs", result.loss_history.size()},
                    {"best_epoch", result.best_epoch},
                    {"best_loss", result.best_loss}});
    out << "trained " << result.loss_history.size() << " epochs, best loss " << fmt(result.best_loss) << " at epoch "
        << result.best_epoch << "\n";
    return kExitOk;
}

// --- score -------------------------------------------------------------------

struct ScoreArgs {
    std::string model;
    std::vector<std::string> queries;
    std::string out_dir;
    SettingFlags flags;
};

int cmd_score(const ScoreArgs& args, std::ostream& out) {
    RunSettings settings = resolve_settings(args.flags);
    require_unique_stems(args.queries);
    const auto t_load = Clock::now();
    const Checkpoint ckpt = load_checkpoint(fs::path(args.model));
    settings.train = ckpt.model.config;
    const double load_s = seconds_since(t_load);

    const fs::path dir(args.out_dir);
    ensure_dir(dir / kMapsDir);
    const GridTopology topo = build_grid_topology(ckpt.model.rows, ckpt.model.cols);

    const auto t_score = Clock::now();
    std::string csv = "file,image_score\n";
    for (const auto& path : args.queries) {
        const PatchGrid grid = load_tokens(path);
        const AnomalyResult r = score_image(grid, ckpt.model, topo, settings.score);
        const fs::path p(path);
        csv += p.filename().string() + "," + fmt(r.image_score) + "\n";
        const std::string stem = p.stem().string();
        write_atomically(dir / kMapsDir / (stem + ".map"), [&](std::ostream& s) {
            PatchGrid raw;
            raw.rows = r.pixel_map.rows;
            raw.cols = r.pixel_map.cols;
            raw.dim = 1;
            raw.data = r.pixel_map.values;
            write_tokens(raw, s);
        });
        write_atomically(dir / kMapsDir / (stem + ".pgm"), [&](std::ostream& s) { write_heatmap_pgm(r.pixel_map, s); });
    }
    write_text(dir / kScoresName, csv);
    const double score_s = seconds_since(t_score);

    std::vector<std::string> inputs{args.model};
    inputs.insert(inputs.end(), args.queries.begin(), args.queries.end());
    std::vector<std::string> keys = kTrainKeys;
    keys.insert(keys.end(), kScoreKeys.begin(), kScoreKeys.end());
    write_manifest(dir, "score", settings, keys, inputs, {kScoresName, kMapsDir}, {{"load", load_s}, {"score", score_s}});
    out << "scored " << args.queries.size() << " grids\n";
    return kExitOk;
}

// --- eval --------------------------------------------------------------------

struct EvalArgs {
    std::string scores, labels, maps, masks, format = "csv", out_dir;
};

MetricsReport evaluate_files(const EvalArgs& args) {
    MetricsReport report;
    const bool image = !args.scores.empty() || !args.labels.empty();
    const bool pixel = !args.maps.empty() || !args.masks.empty();
    if (!image && !pixel) throw ConfigError("eval needs --scores/--labels and/or --maps/--masks");
    if (image && (args.scores.empty() || args.labels.empty())) {
        throw ConfigError("--scores and --labels must be given together");
    }
    if (pixel && (args.maps.empty() || args.masks.empty())) {
        throw ConfigError("--maps and --masks must be given together");
    }
    if (image) {
        std::map<std::string, double> scores;
        for (const auto& [stem, value] : read_two_column_csv(args.scores)) {
            if (!scores.emplace(stem, parse_number_cell(value, args.scores)).second) {
                throw ConfigError(args.scores + ": duplicate entry " + stem);
            }
        }
        const auto labels = read_labels(args.labels);
        reject_orphans(orphans(scores, labels), "score/label entries");
        std::vector<double> s;
        std::vector<std::uint8_t> l;
        for (const auto& [stem, value] : scores) {
            s.push_back(value);
            l.push_back(labels.at(stem));
        }
        report.image_auroc = auroc(s, l);
        report.image_ap = average_precision(s, l);
    }
    if (pixel) {
        const auto maps = files_by_stem(args.maps, ".map");
        const auto masks = files_by_stem(args.masks, ".pgm");
        reject_orphans(orphans(maps, masks), "map/mask files");
        std::vector<MaskedMap> pairs;
        for (const auto& [stem, map_path] : maps) {
            FloatMap map = load_raw_map(map_path);
            BinaryMask mask = load_mask_pgm(masks.at(stem));
            if (mask.rows != map.rows || mask.cols != map.cols) mask = resize_nearest(mask, map.rows, map.cols);
            pairs.emplace_back(std::move(map), std::move(mask));
        }
        if (pairs.empty()) throw ConfigError("no .map files in " + args.maps);
        report.pixel_auroc = pixel_auroc(pairs);
        report.pixel_pro = pro(pairs);
    }
    return report;
}

int cmd_eval(const EvalArgs& args, std::ostream& out) {
    const auto t0 = Clock::now();
    const MetricsReport report = evaluate_files(args);
    const std::string text = args.format == "jsonl" ? metrics_jsonl(report) : metrics_csv(report);
    out << text;
    if (!args.out_dir.empty()) {
        const fs::path dir(args.out_dir);
        ensure_dir(dir);
        const std::string name = args.format == "jsonl" ? "metrics.jsonl" : "metrics.csv";
        write_text(dir / name, text);
        std::vector<std::string> inputs;
        for (const auto* p : {&args.scores, &args.labels, &args.maps, &args.masks})
            if (!p->empty()) inputs.push_back(*p);
        write_manifest(dir, "eval", RunSettings{}, {}, inputs, {name}, {{"eval", seconds_since(t0)}});
    }
    return kExitOk;
}

// --- sweep -------------------------------------------------------------------

struct SweepArgs {
    std::string grid;
    std::string out_dir;
    bool synthetic = false;
    std::uint64_t bench_seed = 0;
    std::vector<std::string> support, queries;
    std::string labels, masks;
    unsigned jobs = 1;
    SettingFlags flags;
};

struct SweepPoint {
    RunSettings settings;
    std::vector<std::string> values;  // one per grid key
};

std::vector<SweepPoint> expand_grid(const RunSettings& base,
                                    const std::vector<std::pair<std::string, std::vector<std::string>>>& grid) {
    for (const auto& [key, values] : grid) {
        if (key == "seed") throw ConfigError("grid key seed: seeds are derived from the base seed and point index");
        if (std::find(setting_keys().begin(), setting_keys().end(), key) == setting_keys().end()) {
            throw ConfigError("grid key " + key + ": unknown setting");
        }
    }
    std::vector<SweepPoint> points;
    std::vector<std::size_t> digit(grid.size(), 0);
    while (true) {
        SweepPoint p{base, {}};
        for (std::size_t k = 0; k < grid.size(); ++k) {
            const std::string& v = grid[k].second[digit[k]];
            apply_setting(p.settings, grid[k].first, v, "grid key " + grid[k].first);
            p.values.push_back(v);
        }
        try {
            p.settings.score.validate();
        } catch (const ConfigError& e) {
            throw ConfigError(std::string("grid point ") + std::to_string(points.size()) + ": " + e.what());
        }
        p.settings.train.seed = base.train.seed + points.size();
        points.push_back(std::move(p));
        // Odometer with the last key fastest.
        std::size_t k = grid.size();
        while (k > 0) {
            --k;
            if (++digit[k] < grid[k].second.size()) break;
            digit[k] = 0;
            if (k == 0) return points;
        }
        if (grid.empty()) return points;
    }
}

struct SweepData {
    std::vector<PatchGrid> support;
    std::vector<LabeledQuery> queries;
};

SweepData load_sweep_data(const SweepArgs& args) {
    SweepData data;
    if (args.synthetic) {
        if (!args.support.empty() || !args.queries.empty()) {
            throw ConfigError("--synthetic cannot be combined with --support/--queries");
        }
        BenchmarkSpec spec;
        spec.seed = args.bench_seed;
        Benchmark bench = make_synthetic_benchmark(spec);
        data.support = std::move(bench.support);
        data.queries = std::move(bench.queries);
        return data;
    }
    if (args.support.empty() || args.queries.empty() || args.labels.empty()) {
        throw ConfigError("sweep needs --synthetic or --support, --queries and --labels");
    }
    require_unique_stems(args.queries);
    data.support = load_all(args.support);
    const auto labels = read_labels(args.labels);
    std::map<std::string, std::string> query_stems;
    for (const auto& q : args.queries) query_stems.emplace(fs::path(q).stem().string(), q);
    reject_orphans(orphans(query_stems, labels), "query/label entries");
    std::map<std::string, fs::path> masks;
    if (!args.masks.empty()) {
        masks = files_by_stem(args.masks, ".pgm");
        reject_orphans(orphans(query_stems, masks), "query/mask files");
    }
    for (const auto& q : args.queries) {
        const std::string stem = fs::path(q).stem().string();
        LabeledQuery lq{stem, load_tokens(q), labels.at(stem), {}};
        if (!masks.empty()) lq.mask = load_mask_pgm(masks.at(stem));
        data.queries.push_back(std::move(lq));
    }
    return data;
}

struct SweepRow {
    std::size_t epochs = 0;
    double best_loss = 0.0;
    MetricsReport metrics;
};

SweepRow run_point(const SweepPoint& point, const SweepData& data) {
    TrainResult trained = train_model(data.support, point.settings.train);
    EvaluationResult eval = evaluate_queries(trained.model, data.queries, point.settings.score);
    return {trained.loss_history.size(), trained.best_loss, eval.metrics};
}

int cmd_sweep(const SweepArgs& args, std::ostream& out) {
    const RunSettings base = resolve_settings(args.flags);
    const auto grid = parse_grid_text(read_text(args.grid));
    const std::vector<SweepPoint> points = expand_grid(base, grid);
    const auto t_load = Clock::now();
    const SweepData data = load_sweep_data(args);
    const double load_s = seconds_since(t_load);

    const auto t_run = Clock::now();
    std::vector<SweepRow> rows(points.size());
    std::vector<std::exception_ptr> failures(points.size());
    const unsigned jobs = std::max(1u, std::min<unsigned>(args.jobs, static_cast<unsigned>(points.size())));
    std::vector<std::thread> workers;
    for (unsigned w = 0; w < jobs; ++w) {
        workers.emplace_back([&, w] {
            for (std::size_t i = w; i < points.size(); i += jobs) {
                try {
                    rows[i] = run_point(points[i], data);
                } catch (...) {
                    failures[i] = std::current_exception();
                }
            }
        });
    }
    for (auto& t : workers) t.join();
    for (const auto& f : failures)
        if (f) std::rethrow_exception(f);
    const double run_s = seconds_since(t_run);

    std::string csv = "index,seed";
    for (const auto& [key, values] : grid) csv += "," + key;
    csv += ",epochs,best_loss";
    for (const auto& m : kMetricNames) csv += "," + m;
    csv += "\n";
    for (std::size_t i = 0; i < points.size(); ++i) {
        csv += std::to_string(i) + "," + std::to_string(points[i].settings.train.seed);
        for (const auto& v : points[i].values) csv += "," + v;
        csv += "," + std::to_string(rows[i].epochs) + "," + fmt(rows[i].best_loss);
        for (const auto& v : metric_values(rows[i].metrics)) csv += "," + (v ? fmt(*v) : std::string());
        csv += "\n";
    }
    const fs::path dir(args.out_dir);
    ensure_dir(dir);
    write_text(dir / kSweepName, csv);

    std::vector<std::string> inputs{args.grid};
    for (const auto* list : {&args.support, &args.queries}) inputs.insert(inputs.end(), list->begin(), list->end());
    json grid_json = json::object();
    for (const auto& [key, values] : grid) grid_json[key] = values;
    write_manifest(dir, "sweep", base, setting_keys(), inputs, {kSweepName}, {{"load", load_s}, {"sweep", run_s}},
                   {{"grid", grid_json}, {"synthetic", args.synthetic}, {"jobs", jobs}});
    out << csv;
    return kExitOk;
}

// --- synth -------------------------------------------------------------------

struct SynthArgs {
    BenchmarkSpec bench;
    std::string out_dir;
};

int cmd_synth(const SynthArgs& args, std::ostream& out) {
    const auto t0 = Clock::now();
    const Benchmark bench = make_synthetic_benchmark(args.bench);
    const fs::path dir(args.out_dir);
    for (const char* sub : {"support", "queries", "masks"}) ensure_dir(dir / sub);
    std::vector<std::string> outputs;
    for (std::size_t k = 0; k < bench.support.size(); ++k) {
        char name[32];
        std::snprintf(name, sizeof name, "support_%03zu.gadt", k);
        write_atomically(dir / "support" / name, [&](std::ostream& s) { write_tokens(bench.support[k], s); });
        outputs.push_back(std::string("support/") + name);
    }
    std::string labels = "file,label\n";
    for (const auto& q : bench.queries) {
        write_atomically(dir / "queries" / (q.name + ".gadt"), [&](std::ostream& s) { write_tokens(q.grid, s); });
        write_atomically(dir / "masks" / (q.name + ".pgm"), [&](std::ostream& s) { write_mask_pgm(q.mask, s); });
        labels += q.name + ".gadt," + std::to_string(q.label) + "\n";
        outputs.push_back("queries/" + q.name + ".gadt");
    }
    write_text(dir / "labels.csv", labels);
    outputs.push_back("labels.csv");

    const SynthSpec& g = args.bench.grid;
    json spec = {{"rows", g.rows},
                 {"cols", g.cols},
                 {"dim", g.dim},
                 {"texture_rank", g.texture_rank},
                 {"texture_amplitude", g.texture_amplitude},
                 {"noise_sigma", g.noise_sigma},
                 {"block_height", g.anomaly_block.height},
                 {"block_width", g.anomaly_block.width},
                 {"anomaly_magnitude", g.anomaly_magnitude},
                 {"texture_seed", g.texture_seed},
                 {"support", args.bench.support_count},
                 {"normal", args.bench.normal_count},
                 {"anomalous", args.bench.anomalous_count}};
    RunSettings settings;
    settings.train.seed = args.bench.seed;
    write_manifest(dir, "synth", settings, {}, {}, outputs, {{"generate", seconds_since(t0)}}, {{"synth", spec}});
    out << "wrote " << bench.support.size() << " support and " << bench.queries.size() << " query grids\n";
    return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Few-shot anomaly detection on patch-token grids", "gatead"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kToolVersion);

    std::vector<std::string> train_keys = kTrainKeys;
    std::vector<std::string> score_keys = kScoreKeys;

    TrainArgs train_args;
    auto* train = app.add_subcommand("train", "train a model on normal support grids");
    train->add_option("support", train_args.support, "support token files")->required();
    train->add_option("--out-dir", train_args.out_dir, "output directory")->required();
    add_setting_flags(*train, train_args.flags, train_keys);

    ScoreArgs score_args;
    auto* score = app.add_subcommand("score", "score query grids with a trained model");
    score->add_option("--model", score_args.model, "checkpoint file")->required();
    score->add_option("queries", score_args.queries, "query token files")->required();
    score->add_option("--out-dir", score_args.out_dir, "output directory")->required();
    add_setting_flags(*score, score_args.flags, score_keys);

    EvalArgs eval_args;
    auto* eval = app.add_subcommand("eval", "compute detection and localization metrics");
    eval->add_option("--scores", eval_args.scores, "scores CSV (file,image_score)");
    eval->add_option("--labels", eval_args.labels, "labels CSV (file,label)");
    eval->add_option("--maps", eval_args.maps, "directory of .map files");
    eval->add_option("--masks", eval_args.masks, "directory of .pgm masks");
    eval->add_option("--format", eval_args.format, "csv or jsonl")->check(CLI::IsMember({"csv", "jsonl"}));
    eval->add_option("--out-dir", eval_args.out_dir, "also write the report here");

    SweepArgs sweep_args;
    auto* sweep = app.add_subcommand("sweep", "train and evaluate every point of a settings grid");
    sweep->add_option("--grid", sweep_args.grid, "grid file, one 'key = v1, v2' per line")->required();
    sweep->add_option("--out-dir", sweep_args.out_dir, "output directory")->required();
    sweep->add_flag("--synthetic", sweep_args.synthetic, "use the built-in synthetic benchmark");
    sweep->add_option("--bench-seed", sweep_args.bench_seed, "seed of the synthetic benchmark");
    sweep->add_option("--support", sweep_args.support, "support token files");
    sweep->add_option("--queries", sweep_args.queries, "query token files");
    sweep->add_option("--labels", sweep_args.labels, "labels CSV");
    sweep->add_option("--masks", sweep_args.masks, "directory of .pgm masks");
    sweep->add_option("--jobs", sweep_args.jobs, "parallel grid points")->check(CLI::PositiveNumber);
    add_setting_flags(*sweep, sweep_args.flags, setting_keys());

    SynthArgs synth_args;
    auto& sb = synth_args.bench;
    auto* synth = app.add_subcommand("synth", "write a synthetic benchmark to disk");
    synth->add_option("--out-dir", synth_args.out_dir, "output directory")->required();
    synth->add_option("--rows", sb.grid.rows)->check(CLI::Range(2u, 4096u));
    synth->add_option("--cols", sb.grid.cols)->check(CLI::Range(2u, 4096u));
    synth->add_option("--dim", sb.grid.dim)->check(CLI::Range(1u, 65536u));
    synth->add_option("--rank", sb.grid.texture_rank);
    synth->add_option("--amplitude", sb.grid.texture_amplitude);
    synth->add_option("--noise-sigma", sb.grid.noise_sigma);
    synth->add_option("--magnitude", sb.grid.anomaly_magnitude);
    synth->add_option("--block-height", sb.grid.anomaly_block.height);
    synth->add_option("--block-width", sb.grid.anomaly_block.width);
    synth->add_option("--texture-seed", sb.grid.texture_seed);
    synth->add_option("--support", sb.support_count);
    synth->add_option("--normal", sb.normal_count);
    synth->add_option("--anomalous", sb.anomalous_count);
    synth->add_option("--seed", sb.seed);

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {
            app.exit(e, out, err);
            return kExitOk;
        }
        err << "error: " << e.what() << "\n";
        return kExitValidation;
    }

    try {
        if (train->parsed()) return cmd_train(train_args, out);
        if (score->parsed()) return cmd_score(score_args, out);
        if (eval->parsed()) return cmd_eval(eval_args, out);
        if (sweep->parsed()) return cmd_sweep(sweep_args, out);
        if (synth->parsed()) return cmd_synth(synth_args, out);
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const DimensionError& e) {
        err << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const DegenerateLabelsError& e) {
        err << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const IndexError& e) {
        err << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return kExitIo;
    } catch (const std::filesystem::filesystem_error& e) {
        err << "error: " << e.what() << "\n";
        return kExitIo;
    }
    return kExitValidation;
}

}  // namespace gatead::cli
