#include "uncharted/cli.hpp"

#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <set>

#include <CLI11.hpp>
#include <json.hpp>

#include "uncharted/dataset.hpp"
#include "uncharted/errors.hpp"
#include "uncharted/forest.hpp"
#include "uncharted/io.hpp"
#include "uncharted/metrics.hpp"
#include "uncharted/parallel.hpp"
#include "uncharted/refcluster.hpp"

namespace uncharted::cli {

namespace {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

/// Bad flag values detected after parsing.
class UsageError : public Error {
public:
    using Error::Error;
};

struct DataFlags {
    std::string input;
    std::string labels;
    std::string ids;
    std::string missing;
    std::string unknown_label = "?";
    std::vector<std::string> preprocess;
    std::vector<std::string> label_order;
    CLI::Option* labels_opt = nullptr;
    CLI::Option* ids_opt = nullptr;
    CLI::Option* missing_opt = nullptr;
    CLI::Option* order_opt = nullptr;
};

struct ForestFlags {
    std::size_t trees = 100;
    std::size_t depth = 0;
    std::string metric = "variance";
    std::string gain = "sum";
    std::size_t vars_per_tree = 0;
    std::size_t min_node_size = 5;
    std::uint64_t seed = 0;
    CLI::Option* depth_opt = nullptr;
    CLI::Option* vars_opt = nullptr;
};

// Flags as recorded in the manifest: every resolved value, so that a rerun
// does not depend on defaults.
using FlagMap = std::map<std::string, json>;

struct Output {
    std::string name;
    std::string contents;
};

void add_data_flags(CLI::App& app, DataFlags& f, bool labels_required) {
    app.add_option("--input", f.input, "Input CSV (header row, comma separated)")->required();
    f.labels_opt = app.add_option("--labels", f.labels, "Column holding class labels");
    if (labels_required) {
        f.labels_opt->required();
    }
    f.ids_opt = app.add_option("--ids", f.ids, "Column holding sample ids");
    f.missing_opt = app.add_option("--missing", f.missing, "Cell text marking a missing value");
    app.add_option("--unknown-label", f.unknown_label, "Label of samples of unknown class")
        ->capture_default_str();
    app.add_option("--preprocess", f.preprocess,
                   "Ordered steps: log10, snv, standardize, impute:<r>, impute:<sentinel>:<r>")
        ->delimiter(',');
    f.order_opt = app.add_option("--label-order", f.label_order, "Class order of the matrix blocks")
                      ->delimiter(',');
}

void add_forest_flags(CLI::App& app, ForestFlags& f) {
    app.add_option("--trees", f.trees, "Number of trees")->capture_default_str()->check(CLI::PositiveNumber);
    f.depth_opt = app.add_option("--depth", f.depth, "Maximum tree depth (default: round(log2(#classes)), min 1)");
    app.add_option("--metric", f.metric, "Spread metric")
        ->capture_default_str()
        ->check(CLI::IsMember({"variance", "mad", "ad"}));
    app.add_option("--gain", f.gain, "Gain mode")
        ->capture_default_str()
        ->check(CLI::IsMember({"sum", "weighted", "literal"}));
    f.vars_opt = app.add_option("--vars-per-tree", f.vars_per_tree,
                                "Variables drawn per tree (default: round(sqrt(n_vars)))")
                     ->check(CLI::PositiveNumber);
    app.add_option("--min-node-size", f.min_node_size, "Nodes smaller than this are not split")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    app.add_option("--seed", f.seed, "Random seed")->capture_default_str();
}

Dataset load_data(const DataFlags& f) {
    CsvOptions options;
    if (f.labels_opt->count()) options.label_column = f.labels;
    if (f.ids_opt->count()) options.id_column = f.ids;
    if (f.missing_opt->count()) options.missing_sentinel = f.missing;
    options.unknown_label = f.unknown_label;
    Dataset data = load_csv(f.input, options);

    PreprocessSpec spec;
    for (const auto& step : f.preprocess) {
        try {
            spec.push_back(parse_preprocess_step(step));
        } catch (const InvalidArgument& e) {
            throw UsageError(e.what());
        }
    }
    data = preprocess(data, spec);
    if (data.missing_count() > 0) {
        throw DataError(std::to_string(data.missing_count()) +
                        " missing cells remain; add an impute step to --preprocess");
    }
    return data;
}

std::optional<std::vector<std::string>> label_order(const DataFlags& f) {
    if (f.order_opt->count()) {
        return f.label_order;
    }
    return std::nullopt;
}

std::size_t known_class_count(const Dataset& data) {
    std::set<std::string> classes(data.labels->begin(), data.labels->end());
    classes.erase(data.unknown_label);
    return classes.size();
}

ForestConfig resolve_forest(const ForestFlags& f, const Dataset& data, std::ostream& err) {
    ForestConfig cfg;
    cfg.n_trees = f.trees;
    cfg.seed = f.seed;
    cfg.growth.metric = parse_spread_metric(f.metric);
    cfg.growth.gain_mode = parse_gain_mode(f.gain);
    cfg.growth.min_node_size = f.min_node_size;
    if (f.depth_opt->count()) {
        cfg.growth.max_depth = f.depth;
    } else if (data.has_labels()) {
        const auto classes = static_cast<double>(std::max<std::size_t>(1, known_class_count(data)));
        cfg.growth.max_depth = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(std::log2(classes))));
    } else {
        throw UsageError("--depth is required when the data has no --labels");
    }
    if (cfg.growth.max_depth == 0) {
        err << "warning: --depth 0 grows single-leaf trees; every affinity is 1\n";
    }
    cfg.vars_per_tree = f.vars_opt->count() ? f.vars_per_tree : default_vars_per_tree(data.n_vars());
    if (*cfg.vars_per_tree > data.n_vars()) {
        throw UsageError("--vars-per-tree " + std::to_string(*cfg.vars_per_tree) + " exceeds the " +
                         std::to_string(data.n_vars()) + " variables");
    }
    return cfg;
}

void record_data_flags(FlagMap& flags, const DataFlags& f) {
    flags["input"] = fs::absolute(f.input).lexically_normal().string();
    if (f.labels_opt->count()) flags["labels"] = f.labels;
    if (f.ids_opt->count()) flags["ids"] = f.ids;
    if (f.missing_opt->count()) flags["missing"] = f.missing;
    flags["unknown-label"] = f.unknown_label;
    if (!f.preprocess.empty()) flags["preprocess"] = f.preprocess;
    if (f.order_opt->count()) flags["label-order"] = f.label_order;
}

void record_forest_flags(FlagMap& flags, const ForestConfig& cfg) {
    flags["trees"] = std::to_string(cfg.n_trees);
    flags["depth"] = std::to_string(cfg.growth.max_depth);
    flags["metric"] = to_string(cfg.growth.metric);
    flags["gain"] = to_string(cfg.growth.gain_mode);
    flags["vars-per-tree"] = std::to_string(*cfg.vars_per_tree);
    flags["min-node-size"] = std::to_string(cfg.growth.min_node_size);
    flags["seed"] = std::to_string(cfg.seed);
}

std::string utc_timestamp() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::string manifest_json(const std::string& command, const FlagMap& flags, std::uint64_t seed,
                          const std::string& input_sha, const std::vector<Output>& outputs) {
    json m;
    m["version"] = kVersion;
    m["command"] = command;
    json f = json::object();
    for (const auto& [name, value] : flags) {
        f[name] = value;
    }
    m["flags"] = f;
    m["seed"] = seed;
    m["input_sha256"] = input_sha;
    json names = json::array();
    for (const auto& o : outputs) {
        names.push_back(o.name);
    }
    m["outputs"] = names;
    m["timestamp"] = utc_timestamp();
    return m.dump(2) + "\n";
}

void write_outputs(const fs::path& dir, const std::vector<Output>& outputs) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) {
        throw DataError("cannot create output directory '" + dir.string() + "': " + ec.message());
    }
    for (const auto& o : outputs) {
        write_file(dir / o.name, o.contents);
    }
}

std::string ids_csv(const Dataset& data) {
    std::string out = data.has_labels() ? "id,label\n" : "id\n";
    for (std::size_t i = 0; i < data.n_samples(); ++i) {
        out += data.sample_ids[i];
        if (data.has_labels()) {
            out += ',' + (*data.labels)[i];
        }
        out += '\n';
    }
    return out;
}

json correlation_json(const Correlation& c) {
    json j;
    j["n"] = c.n;
    j["r"] = c.r ? json(*c.r) : json(nullptr);
    if (c.ci) {
        j["lo"] = c.ci->lo;
        j["hi"] = c.ci->hi;
    } else {
        j["lo"] = nullptr;
        j["hi"] = nullptr;
    }
    if (c.warning) {
        j["warning"] = *c.warning;
    }
    return j;
}

json config_json(const ForestConfig& cfg) {
    json j;
    j["trees"] = cfg.n_trees;
    j["depth"] = cfg.growth.max_depth;
    j["min_node_size"] = cfg.growth.min_node_size;
    j["metric"] = to_string(cfg.growth.metric);
    j["gain"] = to_string(cfg.growth.gain_mode);
    j["vars_per_tree"] = *cfg.vars_per_tree;
    j["seed"] = cfg.seed;
    return j;
}

json usage_json(const SplitUsage& usage, const Dataset& data) {
    json vars = json::array();
    for (const auto& v : usage.variables) {
        json jv;
        jv["variable"] = data.var_names.at(v.var_index);
        jv["usage_count"] = v.usage_count;
        jv["usage_fraction"] = v.usage_fraction;
        json th = json::array();
        for (const auto& t : v.thresholds) {
            th.push_back({{"threshold", t.threshold}, {"count", t.count}, {"ever_at_root", t.ever_at_root}});
        }
        jv["thresholds"] = th;
        vars.push_back(jv);
    }
    return {{"total_branches", usage.total_branches}, {"variables", vars}};
}

json votes_json(const VoteResult& votes, const Dataset& data) {
    json out = json::array();
    for (const auto& v : votes.votes) {
        json jv;
        jv["id"] = data.sample_ids[v.row];
        jv["assigned"] = v.assigned() ? json(v.top_labels.front()) : json(nullptr);
        jv["tied"] = v.tied();
        jv["unassignable"] = v.unassignable();
        jv["top_labels"] = v.top_labels;
        json means = json::object();
        for (std::size_t c = 0; c < votes.candidate_labels.size(); ++c) {
            means[votes.candidate_labels[c]] = v.block_means[c];
        }
        jv["means"] = means;
        out.push_back(jv);
    }
    return out;
}

std::string vote_cell(const VoteResult* votes, std::size_t row) {
    if (votes == nullptr) {
        return "";
    }
    for (const auto& v : votes->votes) {
        if (v.row == row) {
            if (v.unassignable()) return "unassignable";
            std::string cell;
            for (const auto& l : v.top_labels) {
                cell += (cell.empty() ? "" : "|") + l;
            }
            return cell;
        }
    }
    return "";
}

std::string report_json(const Dataset& data, const ForestConfig& cfg, const Forest& forest,
                        const std::optional<ClassBlocks>& blocks, const std::optional<MetricsReport>& metrics,
                        const std::vector<std::string>& warnings) {
    json r;
    r["n_samples"] = data.n_samples();
    r["n_vars"] = data.n_vars();
    r["forest"] = config_json(cfg);
    if (blocks && metrics) {
        const auto& m = *metrics;
        json jb = json::array();
        for (const auto& b : blocks->blocks()) {
            jb.push_back({{"label", b.label}, {"start", b.start}, {"end", b.end}, {"size", b.size()}});
        }
        r["blocks"] = jb;
        json iq = json::array();
        for (Eigen::Index i = 0; i < m.iq.rows(); ++i) {
            json row = json::array();
            for (Eigen::Index j = 0; j < m.iq.cols(); ++j) {
                row.push_back(m.iq(i, j));
            }
            iq.push_back(row);
        }
        r["iq"] = iq;
        json saq = json::object();
        for (std::size_t i = 0; i < m.block_labels.size(); ++i) {
            saq[m.block_labels[i]] = m.iq(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i));
        }
        r["saq"] = saq;
        r["tiq"] = m.tiq ? json(*m.tiq) : json(nullptr);
        r["tsaq"] = m.tsaq;

        if (!m.row_iq.empty()) {
            json per_class = json::object();
            for (const auto& b : blocks->blocks()) {
                double total = 0.0;
                double peak = 0.0;
                for (std::size_t row = b.start; row < b.end; ++row) {
                    total += m.row_iq[row];
                    peak = std::max(peak, m.row_iq[row]);
                }
                per_class[b.label] = {{"mean", total / static_cast<double>(b.size())}, {"max", peak}};
            }
            r["row_iq_by_class"] = per_class;

            json rows = json::array();
            for (std::size_t row = 0; row < data.n_samples(); ++row) {
                rows.push_back({{"id", data.sample_ids[row]},
                                {"label", (*data.labels)[row]},
                                {"row_iq", m.row_iq[row]},
                                {"z", m.outliers ? m.outliers->z[row] : 0.0}});
            }
            r["row_iq"] = rows;
        }
        if (m.outliers) {
            const auto& o = *m.outliers;
            json flagged = json::array();
            for (const auto& f : o.flags) {
                flagged.push_back({{"id", data.sample_ids[f.row]},
                                   {"label", (*data.labels)[f.row]},
                                   {"row_iq", f.row_iq},
                                   {"z", f.z}});
            }
            r["outliers"] = {{"mean", o.mean},           {"std", o.std},
                             {"threshold_sigma", o.threshold_sigma},
                             {"degenerate", o.degenerate}, {"flagged", flagged}};
        }
        if (m.votes) {
            r["votes"] = votes_json(*m.votes, data);
        }
    }
    r["split_usage"] = usage_json(forest.usage, data);
    r["warnings"] = warnings;
    return r.dump(2) + "\n";
}

std::string report_csv(const Dataset& data, const std::optional<MetricsReport>& metrics) {
    std::string out = "id,label,row_iq,z,flagged,vote\n";
    const VoteResult* votes = metrics && metrics->votes ? &*metrics->votes : nullptr;
    for (std::size_t row = 0; row < data.n_samples(); ++row) {
        out += data.sample_ids[row] + ',';
        if (data.has_labels()) out += (*data.labels)[row];
        out += ',';
        bool flagged = false;
        if (metrics && !metrics->row_iq.empty()) {
            out += format_real(metrics->row_iq[row]);
            out += ',';
            out += metrics->outliers ? format_real(metrics->outliers->z[row]) : "";
            if (metrics->outliers) {
                for (const auto& f : metrics->outliers->flags) {
                    flagged = flagged || f.row == row;
                }
            }
        } else {
            out += ',';
        }
        out += flagged ? ",1," : ",0,";
        out += vote_cell(votes, row);
        out += '\n';
    }
    return out;
}

struct Prepared {
    Dataset data;
    std::optional<ClassBlocks> blocks;
    ForestConfig forest_config;
    Forest forest;
    AffinityMatrix affinity;
};

Prepared prepare(const DataFlags& df, const ForestFlags& ff, std::ostream& err) {
    Prepared p;
    p.data = load_data(df);
    if (p.data.has_labels()) {
        auto ordered = order_by_label(p.data, label_order(df));
        p.data = std::move(ordered.data);
        p.blocks = std::move(ordered.blocks);
    } else if (df.order_opt->count()) {
        throw UsageError("--label-order needs --labels");
    }
    p.forest_config = resolve_forest(ff, p.data, err);
    const std::size_t threads = default_threads();
    p.forest = grow_forest(p.data.values, p.forest_config, threads);
    p.affinity = build_affinity(p.forest.trees, p.data.n_samples(), threads);
    return p;
}

int cmd_analyze(const DataFlags& df, const ForestFlags& ff, double sigma, const std::string& out_dir,
                std::ostream& err) {
    std::vector<std::string> warnings;
    std::ostringstream warn;
    Prepared p = prepare(df, ff, warn);
    if (!warn.str().empty()) {
        warnings.push_back(warn.str().substr(9, warn.str().size() - 10));
        err << warn.str();
    }

    std::optional<MetricsReport> metrics;
    if (p.blocks) {
        if (p.blocks->size() < 2) {
            throw DegenerateError("all samples share one label; block metrics need at least two classes");
        }
        std::optional<std::size_t> unknown = p.blocks->find(p.data.unknown_label);
        if (unknown && p.blocks->size() < 2) {
            unknown.reset();
        }
        metrics = compute_metrics(p.affinity, *p.blocks, sigma, unknown);
        if (metrics->outliers && metrics->outliers->degenerate) {
            warnings.push_back("row IQ values are constant; no outliers can be flagged");
            err << "warning: " << warnings.back() << '\n';
        }
    }

    std::vector<Output> outputs;
    outputs.push_back({"affinity.csv", format_matrix_csv(p.affinity.values())});
    outputs.push_back({"affinity_ids.csv", ids_csv(p.data)});
    outputs.push_back({"report.json", report_json(p.data, p.forest_config, p.forest, p.blocks, metrics, warnings)});
    outputs.push_back({"report.csv", report_csv(p.data, metrics)});
    outputs.push_back({"heatmap.pgm", format_pgm(p.affinity.values())});
    if (p.blocks) {
        outputs.push_back({"blocks.csv", format_blocks_csv(*p.blocks)});
        outputs.push_back({"heatmap_overlay.pgm", format_overlay_pgm(p.affinity.values(), *p.blocks)});
    }

    FlagMap flags;
    record_data_flags(flags, df);
    record_forest_flags(flags, p.forest_config);
    flags["sigma"] = format_real(sigma);
    flags["out-dir"] = out_dir;
    const auto manifest = manifest_json("analyze", flags, p.forest_config.seed,
                                        sha256_hex(read_file(df.input)), outputs);
    outputs.push_back({"manifest.json", manifest});
    write_outputs(out_dir, outputs);

    if (metrics && metrics->tiq) {
        err << "TIQ " << *metrics->tiq << "  TSAQ " << metrics->tsaq;
        if (metrics->outliers) {
            err << "  flagged " << metrics->outliers->flags.size();
        }
        err << '\n';
    }
    return kSuccess;
}

int cmd_assign(const DataFlags& df, const ForestFlags& ff, const std::string& out_dir, std::ostream& err) {
    if (df.order_opt->count()) {
        throw UsageError("assign orders sources first and unknowns last; --label-order is not accepted");
    }
    std::ostringstream warn;
    Prepared p = prepare(df, ff, warn);
    err << warn.str();
    const auto unknown = p.blocks->find(p.data.unknown_label);
    if (!unknown) {
        throw DegenerateError("no samples labelled '" + p.data.unknown_label + "' to assign");
    }
    if (p.blocks->size() < 2) {
        throw DegenerateError("no labelled source classes to assign unknowns to");
    }
    const VoteResult votes = vote_assign(p.affinity, *p.blocks, *unknown);

    std::string csv = "id,assigned,tied,unassignable,top_labels";
    for (const auto& l : votes.candidate_labels) {
        csv += ",mean_" + l;
    }
    csv += '\n';
    std::size_t unassignable = 0;
    for (const auto& v : votes.votes) {
        csv += p.data.sample_ids[v.row] + ',';
        csv += v.assigned() ? v.top_labels.front() : "";
        csv += v.tied() ? ",1" : ",0";
        csv += v.unassignable() ? ",1," : ",0,";
        csv += vote_cell(&votes, v.row);
        for (const double m : v.block_means) {
            csv += ',' + format_real(m);
        }
        csv += '\n';
        if (v.unassignable()) {
            ++unassignable;
        }
    }

    json jv;
    jv["unknown_label"] = p.data.unknown_label;
    jv["candidates"] = votes.candidate_labels;
    jv["forest"] = config_json(p.forest_config);
    jv["votes"] = votes_json(votes, p.data);

    std::vector<Output> outputs;
    outputs.push_back({"votes.csv", csv});
    outputs.push_back({"votes.json", jv.dump(2) + "\n"});
    outputs.push_back({"affinity.csv", format_matrix_csv(p.affinity.values())});
    outputs.push_back({"affinity_ids.csv", ids_csv(p.data)});
    outputs.push_back({"blocks.csv", format_blocks_csv(*p.blocks)});

    FlagMap flags;
    record_data_flags(flags, df);
    record_forest_flags(flags, p.forest_config);
    flags["out-dir"] = out_dir;
    const auto manifest = manifest_json("assign", flags, p.forest_config.seed,
                                        sha256_hex(read_file(df.input)), outputs);
    outputs.push_back({"manifest.json", manifest});
    write_outputs(out_dir, outputs);

    if (unassignable > 0) {
        err << "warning: " << unassignable << " unknown sample(s) have zero association with every source\n";
    }
    err << "assigned " << votes.votes.size() - unassignable << " of " << votes.votes.size() << " unknowns\n";
    return kSuccess;
}

int cmd_compare(const DataFlags& df, const ForestFlags& ff, SweepConfig sweep, const std::string& out_dir,
                std::ostream& err) {
    const Dataset data = load_data(df);
    if (sweep.k_min < 2 || sweep.k_min > sweep.k_max) {
        throw UsageError("need 2 <= --kmin <= --kmax");
    }
    if (sweep.k_max > data.n_samples()) {
        throw DataError("--kmax " + std::to_string(sweep.k_max) + " exceeds the " +
                        std::to_string(data.n_samples()) + " samples");
    }
    // Cluster blocks stand in for classes, so the depth has a fixed default.
    ForestConfig cfg;
    cfg.n_trees = ff.trees;
    cfg.seed = ff.seed;
    cfg.growth.metric = parse_spread_metric(ff.metric);
    cfg.growth.gain_mode = parse_gain_mode(ff.gain);
    cfg.growth.min_node_size = ff.min_node_size;
    cfg.growth.max_depth = ff.depth_opt->count() ? ff.depth : 5;
    cfg.vars_per_tree = ff.vars_opt->count() ? ff.vars_per_tree : default_vars_per_tree(data.n_vars());
    if (*cfg.vars_per_tree > data.n_vars()) {
        throw UsageError("--vars-per-tree exceeds the number of variables");
    }

    const SweepResult result = sweep_compare(data.values, sweep, cfg, default_threads());

    std::string csv = "method,k,replicate,tiq,tsaq,within_var,between_var\n";
    for (const auto& r : result.records) {
        csv += to_string(r.method) + ',' + std::to_string(r.k) + ',' + std::to_string(r.replicate) + ',' +
               format_real(r.tiq) + ',' + format_real(r.tsaq) + ',' + format_real(r.within_var) + ',' +
               format_real(r.between_var) + '\n';
    }
    json corr;
    corr["confidence"] = result.confidence;
    corr["records_per_method"] = result.records.size() / 2;
    json methods = json::object();
    for (const auto& s : result.summary) {
        json m;
        m["tsaq_within"] = correlation_json(s.tsaq_within);
        m["tiq_between"] = correlation_json(s.tiq_between);
        m["supplementary"] = {{"tsaq_between", correlation_json(s.tsaq_between)},
                              {"tiq_within", correlation_json(s.tiq_within)}};
        methods[to_string(s.method)] = m;
        for (const auto* c : {&s.tsaq_within, &s.tiq_between}) {
            if (c->warning) {
                err << "warning: " << to_string(s.method) << ": " << *c->warning << '\n';
            }
        }
    }
    corr["methods"] = methods;

    std::vector<Output> outputs;
    outputs.push_back({"sweep.csv", csv});
    outputs.push_back({"correlations.json", corr.dump(2) + "\n"});

    FlagMap flags;
    record_data_flags(flags, df);
    record_forest_flags(flags, cfg);
    flags["kmin"] = std::to_string(sweep.k_min);
    flags["kmax"] = std::to_string(sweep.k_max);
    flags["replicates"] = std::to_string(sweep.replicates);
    flags["confidence"] = format_real(sweep.confidence);
    flags["out-dir"] = out_dir;
    const auto manifest = manifest_json("compare", flags, cfg.seed, sha256_hex(read_file(df.input)), outputs);
    outputs.push_back({"manifest.json", manifest});
    write_outputs(out_dir, outputs);

    for (const auto& s : result.summary) {
        err << to_string(s.method) << ": r(TSAQ, within) = "
            << (s.tsaq_within.r ? format_real(*s.tsaq_within.r) : "n/a") << ", r(TIQ, between) = "
            << (s.tiq_between.r ? format_real(*s.tiq_between.r) : "n/a") << '\n';
    }
    return kSuccess;
}

int cmd_heatmap(const std::string& matrix_path, const std::string& blocks_path, bool has_blocks,
                const std::string& out_path) {
    const std::string matrix_text = read_file(matrix_path);
    const Eigen::MatrixXd m = parse_matrix_csv(matrix_text);
    if (m.rows() != m.cols()) {
        throw DataError("matrix is " + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) +
                        ", expected square");
    }
    if (!((m.array() >= 0.0).all() && (m.array() <= 1.0).all())) {
        throw DataError("matrix entries must lie in [0, 1]");
    }
    const fs::path out(out_path);
    const fs::path dir = out.parent_path().empty() ? fs::path(".") : out.parent_path();
    const std::string stem = out.stem().string();

    std::vector<Output> outputs;
    outputs.push_back({out.filename().string(), format_pgm(m)});
    FlagMap flags;
    flags["matrix"] = fs::absolute(matrix_path).lexically_normal().string();
    flags["out"] = out_path;
    if (has_blocks) {
        const auto blocks = parse_blocks_csv(read_file(blocks_path), static_cast<std::size_t>(m.rows()));
        outputs.push_back({stem + "_overlay.pgm", format_overlay_pgm(m, blocks)});
        flags["blocks"] = fs::absolute(blocks_path).lexically_normal().string();
    }
    const auto manifest = manifest_json("heatmap", flags, 0, sha256_hex(matrix_text), outputs);
    outputs.push_back({stem + ".manifest.json", manifest});
    write_outputs(dir, outputs);
    return kSuccess;
}

std::vector<std::string> rerun_args(const std::string& manifest_path, const std::string& out_override,
                                    bool has_override) {
    json m;
    try {
        m = json::parse(read_file(manifest_path));
    } catch (const json::exception& e) {
        throw DataError(std::string("malformed manifest: ") + e.what());
    }
    if (!m.contains("command") || !m.contains("flags") || !m["flags"].is_object()) {
        throw DataError("manifest lacks command or flags");
    }
    const std::string command = m["command"].get<std::string>();
    std::vector<std::string> args{command};
    for (const auto& [name, value] : m["flags"].items()) {
        std::string text;
        if (value.is_array()) {
            for (const auto& part : value) {
                text += (text.empty() ? "" : ",") + part.get<std::string>();
            }
        } else {
            text = value.get<std::string>();
        }
        if (has_override && name == "out-dir") {
            text = out_override;
        } else if (has_override && name == "out") {
            text = (fs::path(out_override) / fs::path(text).filename()).string();
        }
        args.push_back("--" + name);
        args.push_back(text);
    }
    const std::string input_key = command == "heatmap" ? "matrix" : "input";
    if (m["flags"].contains(input_key) && m.contains("input_sha256")) {
        const auto actual = sha256_hex(read_file(m["flags"][input_key].get<std::string>()));
        if (actual != m["input_sha256"].get<std::string>()) {
            throw DataError("input file changed since the manifest was written (SHA-256 mismatch)");
        }
    }
    return args;
}

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err, int depth);

int run_app(const std::vector<std::string>& args, std::ostream& out, std::ostream& err, int rerun_depth) {
    CLI::App app{"uncharted: unsupervised tree-ensemble affinity analysis", "uncharted"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kVersion);

    DataFlags analyze_data;
    ForestFlags analyze_forest;
    double sigma = 3.0;
    std::string analyze_out = ".";
    auto* analyze = app.add_subcommand("analyze", "Affinity matrix, block metrics and outlier flags");
    add_data_flags(*analyze, analyze_data, false);
    add_forest_flags(*analyze, analyze_forest);
    analyze->add_option("--sigma", sigma, "Outlier threshold in standard deviations")->capture_default_str();
    analyze->add_option("--out-dir", analyze_out, "Output directory")->capture_default_str();

    std::string matrix_path;
    std::string blocks_path;
    std::string image_path;
    auto* heatmap = app.add_subcommand("heatmap", "Render an affinity matrix as a grayscale PGM");
    heatmap->add_option("--matrix", matrix_path, "Affinity matrix CSV")->required();
    auto* blocks_opt = heatmap->add_option("--blocks", blocks_path, "Class blocks CSV (label,start,end)");
    heatmap->add_option("--out", image_path, "Output PGM path")->required();

    DataFlags assign_data;
    ForestFlags assign_forest;
    std::string assign_out = ".";
    auto* assign = app.add_subcommand("assign", "Maximum-vote provenance assignment of unknown samples");
    add_data_flags(*assign, assign_data, true);
    add_forest_flags(*assign, assign_forest);
    assign->add_option("--out-dir", assign_out, "Output directory")->capture_default_str();

    DataFlags compare_data;
    ForestFlags compare_forest;
    compare_forest.trees = 200;
    SweepConfig sweep;
    std::string compare_out = ".";
    auto* compare = app.add_subcommand("compare", "K-means / Ward sweep against TIQ and TSAQ");
    add_data_flags(*compare, compare_data, false);
    add_forest_flags(*compare, compare_forest);
    compare_forest.depth_opt->description("Maximum tree depth (default 5)");
    compare->add_option("--kmin", sweep.k_min, "Smallest cluster count")->capture_default_str();
    compare->add_option("--kmax", sweep.k_max, "Largest cluster count")->capture_default_str();
    compare->add_option("--replicates", sweep.replicates, "K-means restarts per cluster count")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    compare->add_option("--confidence", sweep.confidence, "Confidence level of the correlation intervals")
        ->capture_default_str()
        ->check(CLI::Range(0.5, 0.999999));
    compare->add_option("--out-dir", compare_out, "Output directory")->capture_default_str();

    std::string manifest_path;
    std::string rerun_out;
    auto* rerun = app.add_subcommand("rerun", "Repeat a run from its manifest.json");
    rerun->add_option("--manifest", manifest_path, "manifest.json of an earlier run")->required();
    auto* rerun_out_opt = rerun->add_option("--out-dir", rerun_out, "Write outputs here instead");

    std::vector<std::string> argv_storage{"uncharted"};
    argv_storage.insert(argv_storage.end(), args.begin(), args.end());
    std::vector<const char*> argv;
    for (const auto& a : argv_storage) {
        argv.push_back(a.c_str());
    }
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kSuccess;
    } catch (const CLI::CallForVersion&) {
        out << kVersion << '\n';
        return kSuccess;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n';
        const CLI::App* failed = &app;
        for (auto* sub : {analyze, heatmap, assign, compare, rerun}) {
            if (sub->parsed()) failed = sub;
        }
        err << failed->help();
        return kUsageError;
    }

    if (analyze->parsed()) {
        return cmd_analyze(analyze_data, analyze_forest, sigma, analyze_out, err);
    }
    if (heatmap->parsed()) {
        return cmd_heatmap(matrix_path, blocks_path, blocks_opt->count() > 0, image_path);
    }
    if (assign->parsed()) {
        return cmd_assign(assign_data, assign_forest, assign_out, err);
    }
    if (compare->parsed()) {
        return cmd_compare(compare_data, compare_forest, sweep, compare_out, err);
    }
    if (rerun_depth > 0) {
        throw UsageError("a manifest cannot describe a rerun");
    }
    return dispatch(rerun_args(manifest_path, rerun_out, rerun_out_opt->count() > 0), out, err, rerun_depth + 1);
}

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err, int depth) {
    try {
        return run_app(args, out, err, depth);
    } catch (const UsageError& e) {
        err << "error: " << e.what() << '\n';
        return kUsageError;
    } catch (const DegenerateError& e) {
        err << "error: " << e.what() << '\n';
        return kDegenerateError;
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return kDataError;
    }
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    return dispatch(args, out, err, 0);
}

}  // namespace uncharted::cli
