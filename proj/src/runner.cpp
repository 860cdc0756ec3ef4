#include "runner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <iostream>

#include <json.hpp>

#include "csv.hpp"
#include "events_io.hpp"
#include "experiments.hpp"
#include "regularized.hpp"
#include "rng.hpp"

namespace msj {

namespace {

constexpr const char* kVersion = "0.1.0";

bool verbose_logging() {
    const char* v = std::getenv("MSJUMP_VERBOSE");
    return v && *v && std::string_view(v) != "0";
}

void log_line(const std::string& msg) {
    if (verbose_logging()) std::cerr << "[msjump] " << msg << "\n";
}

std::string transition_label(const StateSpace& states, int from, int to) {
    return states.label(from) + "->" + states.label(to);
}

std::string sanitize(std::string s) {
    for (char& c : s)
        if (!std::isalnum(static_cast<unsigned char>(c)) && c != '.' && c != '-') c = '_';
    return s;
}

std::string format_cell(const RateCell& cell, bool defined_only_rate = false) {
    if (!cell.defined) return "NA,NA,NA,NA";
    (void)defined_only_rate;
    return format_full(cell.rate) + ',' + format_full(cell.variance) + ',' +
           format_full(cell.ci_lo) + ',' + format_full(cell.ci_hi);
}

struct CommandContext {
    const AppConfig& config;
    std::filesystem::path out_dir;
    RunOptions options;
    std::uint64_t seed = 0;
    int threads = 0;
    std::vector<std::string> files;
    nlohmann::json extra;
    std::chrono::steady_clock::time_point started = std::chrono::steady_clock::now();

    void write(const std::string& name, std::string_view content) {
        auto path = out_dir / name;
        write_text_file(path.string(), content);
        files.push_back(path.string());
        log_line("wrote " + path.string());
    }

    void finish(const std::string& command) {
        nlohmann::json manifest;
        manifest["command"] = command;
        manifest["version"] = kVersion;
        manifest["config_source"] = config.source();
        manifest["config_hash"] = fnv1a_hex(config.raw_text());
        manifest["config_text"] = config.raw_text();
        manifest["master_seed"] = seed;
        manifest["paper_scale"] = options.paper_scale;
        manifest["threads"] = threads;
        auto elapsed = std::chrono::steady_clock::now() - started;
        manifest["wall_ms"] =
            std::chrono::duration_cast<std::chrono::milliseconds>(elapsed).count();
        nlohmann::json file_list = nlohmann::json::array();
        for (const auto& f : files) file_list.push_back(f);
        manifest["files"] = file_list;
        if (!extra.is_null()) manifest["details"] = extra;

        auto path = out_dir / "manifest.json";
        write_text_file(path.string(), manifest.dump(2) + "\n");
        files.push_back(path.string());
    }
};

experiments::StudySetup study_setup(const CommandContext& ctx) {
    SimConfig sim = ctx.config.simulation();
    experiments::StudySetup setup;
    setup.model = std::move(sim.model);
    setup.initial_state = sim.initial_state;
    setup.horizon = sim.horizon;
    setup.censoring = sim.censoring;
    setup.master_seed = ctx.seed;
    setup.threads = ctx.threads;
    return setup;
}

std::int64_t experiment_n(const CommandContext& ctx, std::int64_t fallback) {
    if (ctx.options.paper_scale && ctx.config.has("experiment", "paper_n"))
        return ctx.config.get_int("experiment", "paper_n");
    return ctx.config.get_int_or("experiment", "n", fallback);
}

std::pair<int, int> study_transition(const CommandContext& ctx,
                                     const IntensityModel& model) {
    if (ctx.config.has("estimation", "transition"))
        return ctx.config.transition_key(ctx.config.get_string("estimation", "transition"));
    const auto& tr = model.transitions.front();
    return {tr.from, tr.to};
}

std::vector<int> mesh_list(const CommandContext& ctx, std::vector<int> fallback) {
    if (!ctx.config.has("experiment", "m_list")) return fallback;
    std::vector<int> out;
    for (double v : ctx.config.get_double_list("experiment", "m_list"))
        out.push_back(static_cast<int>(v));
    return out;
}

void check_experiment_name(const CommandContext& ctx, const std::string& command) {
    if (!ctx.config.has("experiment", "name")) return;
    std::string name = ctx.config.get_string("experiment", "name");
    if (name != command)
        throw ValidationError(ctx.config.source() + ": [experiment] name is '" + name +
                              "' but the requested command is '" + command + "'");
}

// --- data loading shared by estimate/lasso/tree -----------------------------

struct LoadedData {
    std::vector<Trajectory> cohort;
    StateSpace states;
    std::vector<std::pair<int, int>> transitions;
    bool simulated = false;
    const IntensityModel* model = nullptr;  // when simulated
};

LoadedData load_data(CommandContext& ctx) {
    LoadedData data;
    if (ctx.config.has_section("data")) {
        auto ingest = ingest_events(ctx.config.get_string("data", "events"));
        data.cohort = std::move(ingest.cohort);
        data.states = std::move(ingest.states);
        OETable probe = aggregate_1d(data.cohort, {0.0, 1.0, 1}, data.states.size());
        // estimate whatever transitions appear in the file
        for (int from = 0; from < data.states.size(); ++from)
            for (int to = 0; to < data.states.size(); ++to)
                if (from != to)
                    for (const auto& traj : data.cohort)
                        if (std::any_of(traj.jumps.begin(), traj.jumps.end(),
                                        [&](const Jump& j) {
                                            return j.from == from && j.to == to;
                                        })) {
                            data.transitions.emplace_back(from, to);
                            break;
                        }
        ctx.extra["data_source"] = ctx.config.get_string("data", "events");
        ctx.extra["subjects"] = data.cohort.size();
        return data;
    }

    SimConfig sim = ctx.config.simulation();
    sim.master_seed = ctx.seed;
    sim.threads = ctx.threads;
    if (ctx.options.paper_scale && ctx.config.has("experiment", "paper_n"))
        sim.n = ctx.config.get_int("experiment", "paper_n");
    data.cohort = simulate_cohort(sim);
    data.states = ctx.config.model().states;
    data.transitions = ctx.config.model().transition_pairs();
    data.simulated = true;
    data.model = &ctx.config.model();
    ctx.extra["data_source"] = "simulated";
    ctx.extra["subjects"] = data.cohort.size();
    return data;
}

// --- pinned CSV schemas ------------------------------------------------------

std::string truth_table_csv(const IntensityModel& model, const TimeGrid& grid) {
    std::string out = "transition,bin,t_mid,truth\n";
    for (const auto& tr : model.transitions) {
        std::optional<double> u;
        for (int m = 0; m < grid.bins; ++m) {
            double t = grid.mid(m);
            if (tr.expr.uses_duration()) u = t;  // duration equals time before the first jump
            out += transition_label(model.states, tr.from, tr.to) + ',' + std::to_string(m + 1) +
                   ',' + format_full(t) + ',' +
                   format_full(experiments::true_intensity(model, tr.from, tr.to, t, u)) + '\n';
        }
    }
    return out;
}

std::string slice_csv(const StateSpace& states, int from, int to, double d,
                      const std::vector<SlicePoint>& points, const IntensityModel* model) {
    std::string out = model ? "transition,d,t_mid,rate,variance,ci_lo,ci_hi,truth\n"
                            : "transition,d,t_mid,rate,variance,ci_lo,ci_hi\n";
    for (const auto& pt : points) {
        out += transition_label(states, from, to) + ',' + format_full(d) + ',' +
               format_full(pt.t) + ',' + format_cell(pt.cell);
        if (model)
            out += ',' + format_full(experiments::true_intensity(*model, from, to, pt.t,
                                                                 pt.t - d));
        out += '\n';
    }
    return out;
}

}  // namespace

std::string rate_fit_csv(const RateFit& fit, const StateSpace& states) {
    std::string out;
    if (fit.duration_grid) {
        out = "transition,bin,t_lo,t_hi,u_lo,u_hi,rate,variance,ci_lo,ci_hi\n";
        const TimeGrid& tg = fit.grid;
        const TimeGrid& ug = *fit.duration_grid;
        for (const auto& row : fit.rows) {
            std::string label = transition_label(states, row.from, row.to);
            for (int m1 = 0; m1 < tg.bins; ++m1)
                for (int m2 = 0; m2 < ug.bins; ++m2) {
                    int linear = m1 * ug.bins + m2;
                    out += label + ',' + std::to_string(linear + 1) + ',' +
                           format_full(tg.lo(m1)) + ',' + format_full(tg.hi(m1)) + ',' +
                           format_full(ug.lo(m2)) + ',' + format_full(ug.hi(m2)) + ',' +
                           format_cell(row.cells[static_cast<std::size_t>(linear)]) + '\n';
                }
        }
        return out;
    }
    out = "transition,bin,t_lo,t_hi,rate,variance,ci_lo,ci_hi\n";
    for (const auto& row : fit.rows) {
        std::string label = transition_label(states, row.from, row.to);
        for (int m = 0; m < fit.grid.bins; ++m)
            out += label + ',' + std::to_string(m + 1) + ',' + format_full(fit.grid.lo(m)) +
                   ',' + format_full(fit.grid.hi(m)) + ',' +
                   format_cell(row.cells[static_cast<std::size_t>(m)]) + '\n';
    }
    return out;
}

std::string oe_table_csv(const OETable& table, const StateSpace& states,
                         const std::vector<std::pair<int, int>>& transitions) {
    std::string out = "transition,bin_index,t_lo,t_hi,occurrence,exposure\n";
    for (auto [from, to] : transitions) {
        std::string label = transition_label(states, from, to);
        for (int m = 0; m < table.grid.bins; ++m)
            out += label + ',' + std::to_string(m + 1) + ',' + format_full(table.grid.lo(m)) +
                   ',' + format_full(table.grid.hi(m)) + ',' +
                   std::to_string(table.occ(from, to, m)) + ',' +
                   format_full(table.expo(from, m)) + '\n';
    }
    return out;
}

std::string oe_table_csv(const OETable2D& table, const StateSpace& states,
                         const std::vector<std::pair<int, int>>& transitions) {
    std::string out = "transition,bin_index,t_lo,t_hi,u_lo,u_hi,occurrence,exposure\n";
    const TimeGrid& tg = table.grid.time;
    const TimeGrid& ug = table.grid.duration;
    for (auto [from, to] : transitions) {
        std::string label = transition_label(states, from, to);
        for (int m1 = 0; m1 < tg.bins; ++m1)
            for (int m2 = 0; m2 < ug.bins; ++m2)
                out += label + ',' + std::to_string(m1 * ug.bins + m2 + 1) + ',' +
                       format_full(tg.lo(m1)) + ',' + format_full(tg.hi(m1)) + ',' +
                       format_full(ug.lo(m2)) + ',' + format_full(ug.hi(m2)) + ',' +
                       std::to_string(table.occ(from, to, m1, m2)) + ',' +
                       format_full(table.expo(from, m1, m2)) + '\n';
    }
    return out;
}

RateFit read_rate_fit_csv(const std::string& path, StateSpace& states) {
    std::string text = read_text_file(path);
    std::vector<std::string_view> lines;
    std::size_t pos = 0;
    while (pos < text.size()) {
        auto eol = text.find('\n', pos);
        if (eol == std::string::npos) eol = text.size();
        if (eol > pos) lines.push_back(std::string_view(text).substr(pos, eol - pos));
        pos = eol + 1;
    }
    if (lines.empty()) throw ValidationError(path + ": empty fit file");
    bool two_d = lines[0].find("u_lo") != std::string_view::npos;
    const std::size_t expect = two_d ? 10 : 8;

    struct RawRow {
        std::string label;
        int bin;
        double t_lo, t_hi, u_lo, u_hi;
        RateCell cell;
    };
    std::vector<RawRow> rows;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const std::string where = path + ":" + std::to_string(i + 1);
        auto fields = split_csv_line(lines[i]);
        if (fields.size() != expect)
            throw ValidationError(where + ": expected " + std::to_string(expect) + " fields");
        RawRow row;
        row.label = std::string(fields[0]);
        row.bin = static_cast<int>(parse_int(fields[1], where));
        row.t_lo = parse_double(fields[2], where);
        row.t_hi = parse_double(fields[3], where);
        std::size_t base = 4;
        if (two_d) {
            row.u_lo = parse_double(fields[4], where);
            row.u_hi = parse_double(fields[5], where);
            base = 6;
        }
        if (fields[base] == "NA") {
            row.cell.defined = false;
        } else {
            row.cell.defined = true;
            row.cell.rate = parse_double(fields[base], where);
            row.cell.variance = parse_double(fields[base + 1], where);
            row.cell.ci_lo = parse_double(fields[base + 2], where);
            row.cell.ci_hi = parse_double(fields[base + 3], where);
        }
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw ValidationError(path + ": fit file has no rows");

    RateFit fit;
    int max_bin = 0;
    std::vector<double> u_los;
    for (const auto& row : rows) {
        max_bin = std::max(max_bin, row.bin);
        if (two_d && std::find(u_los.begin(), u_los.end(), row.u_lo) == u_los.end())
            u_los.push_back(row.u_lo);
    }
    if (two_d) {
        std::sort(u_los.begin(), u_los.end());
        int u_bins = static_cast<int>(u_los.size());
        int t_bins = max_bin / u_bins;
        double u_max = 0.0, t_max = 0.0, u0 = u_los.front(), t0 = rows.front().t_lo;
        for (const auto& row : rows) {
            u_max = std::max(u_max, row.u_hi);
            t_max = std::max(t_max, row.t_hi);
            t0 = std::min(t0, row.t_lo);
        }
        fit.grid = {t0, t_max, t_bins};
        fit.duration_grid = TimeGrid{u0, u_max, u_bins};
    } else {
        double t0 = rows.front().t_lo, t_max = 0.0;
        for (const auto& row : rows) {
            t0 = std::min(t0, row.t_lo);
            t_max = std::max(t_max, row.t_hi);
        }
        fit.grid = {t0, t_max, max_bin};
    }

    int cells_per_row = two_d ? fit.grid.bins * fit.duration_grid->bins : fit.grid.bins;
    for (const auto& row : rows) {
        auto arrow = row.label.find("->");
        if (arrow == std::string::npos)
            throw ValidationError(path + ": transition '" + row.label + "' is not 'from->to'");
        std::string from_label = row.label.substr(0, arrow);
        std::string to_label = row.label.substr(arrow + 2);
        auto intern = [&](const std::string& l) {
            int idx = states.find(l);
            if (idx >= 0) return idx;
            states.labels.push_back(l);
            return states.size() - 1;
        };
        int from = intern(from_label), to = intern(to_label);
        RateFit::Row* target = nullptr;
        for (auto& r : fit.rows)
            if (r.from == from && r.to == to) target = &r;
        if (!target) {
            fit.rows.push_back({from, to, std::vector<RateCell>(
                                              static_cast<std::size_t>(cells_per_row))});
            target = &fit.rows.back();
        }
        if (row.bin < 1 || row.bin > cells_per_row)
            throw ValidationError(path + ": bin index " + std::to_string(row.bin) +
                                  " out of range");
        target->cells[static_cast<std::size_t>(row.bin - 1)] = row.cell;
    }
    return fit;
}

namespace {

// --- commands ----------------------------------------------------------------

void cmd_simulate(CommandContext& ctx) {
    SimConfig sim = ctx.config.simulation();
    sim.master_seed = ctx.seed;
    sim.threads = ctx.threads;
    if (ctx.options.paper_scale && ctx.config.has("experiment", "paper_n"))
        sim.n = ctx.config.get_int("experiment", "paper_n");
    auto cohort = simulate_cohort(sim);
    ctx.extra["subjects"] = cohort.size();
    ctx.write("events.csv", events_csv(cohort, sim.model.states));
}

void run_lasso_on(CommandContext& ctx, const LoadedData& data, const TimeGrid& grid);
void run_tree_on(CommandContext& ctx, const LoadedData& data, const TimeGrid& grid);

void cmd_estimate(CommandContext& ctx) {
    std::string method = ctx.config.get_string_or("estimation", "method", "oe");
    LoadedData data = load_data(ctx);
    TimeGrid grid = ctx.config.grid();

    if (method == "lasso") {
        run_lasso_on(ctx, data, grid);
        return;
    }
    if (method == "tree") {
        run_tree_on(ctx, data, grid);
        return;
    }
    if (method != "oe")
        throw ValidationError(ctx.config.source() + ": estimation method must be oe, lasso or "
                                                    "tree, got '" +
                              method + "'");

    double level = ctx.config.get_double_or("estimation", "level", 0.95);
    bool log_ci = ctx.options.log_scale_ci ||
                  ctx.config.get_string_or("estimation", "ci_scale", "wald") == "log";

    auto table = aggregate_1d(data.cohort, grid, data.states.size());
    ctx.write("oe_table.csv", oe_table_csv(table, data.states, data.transitions));
    auto fit = oe_rates(table, data.transitions, level, log_ci);
    ctx.write("rates.csv", rate_fit_csv(fit, data.states));

    if (auto dur = ctx.config.duration_grid()) {
        TimeDurationGrid grid2{grid, *dur};
        auto table2 = aggregate_2d(data.cohort, grid2, data.states.size());
        ctx.write("oe_table_2d.csv", oe_table_csv(table2, data.states, data.transitions));
        auto fit2 = oe_rates(table2, data.transitions, level, log_ci);
        ctx.write("rates_2d.csv", rate_fit_csv(fit2, data.states));
    }

    // Single-sample illustration: overlay of the true intensities at bin
    // midpoints, available whenever the data came from a known model.
    if (data.simulated) ctx.write("truth.csv", truth_table_csv(*data.model, grid));
}

std::pair<std::vector<std::int64_t>, std::vector<double>> transition_series(
    const OETable& table, int from, int to) {
    std::vector<std::int64_t> occ(static_cast<std::size_t>(table.grid.bins));
    std::vector<double> expo(static_cast<std::size_t>(table.grid.bins));
    for (int m = 0; m < table.grid.bins; ++m) {
        occ[static_cast<std::size_t>(m)] = table.occ(from, to, m);
        expo[static_cast<std::size_t>(m)] = table.expo(from, m);
    }
    return {std::move(occ), std::move(expo)};
}

void run_lasso_on(CommandContext& ctx, const LoadedData& data, const TimeGrid& grid) {
    if (ctx.config.duration_grid())
        throw ValidationError(ctx.config.source() +
                              ": the fused lasso is 1D only; drop [grid.duration]");
    if (!ctx.config.has("estimation", "transition"))
        throw ValidationError(ctx.config.source() +
                              ": [estimation] transition is required for lasso fits");
    int from, to;
    if (data.simulated) {
        std::tie(from, to) =
            ctx.config.transition_key(ctx.config.get_string("estimation", "transition"));
    } else {
        std::string spec = ctx.config.get_string("estimation", "transition");
        auto arrow = spec.find("->");
        if (arrow == std::string::npos)
            throw ValidationError(ctx.config.source() + ": transition must be 'from -> to'");
        auto strip = [](std::string s) {
            while (!s.empty() && s.front() == ' ') s.erase(s.begin());
            while (!s.empty() && s.back() == ' ') s.pop_back();
            return s;
        };
        from = data.states.find(strip(spec.substr(0, arrow)));
        to = data.states.find(strip(spec.substr(arrow + 2)));
        if (from < 0 || to < 0)
            throw ValidationError(ctx.config.source() + ": transition '" + spec +
                                  "' not present in the data");
    }

    std::vector<double> lambdas;
    if (ctx.config.has("estimation", "lambda_list"))
        lambdas = ctx.config.get_double_list("estimation", "lambda_list");
    else if (ctx.config.has("estimation", "lambda"))
        lambdas = {ctx.config.get_double("estimation", "lambda")};
    else
        throw ValidationError(ctx.config.source() +
                              ": lasso needs [estimation] lambda or lambda_list");

    FusedLassoOptions opts;
    opts.tol = ctx.config.get_double_or("estimation", "tol", 1e-10);
    opts.max_iter = static_cast<int>(ctx.config.get_int_or("estimation", "max_iter", 100000));
    double level = ctx.config.get_double_or("estimation", "level", 0.95);

    auto table = aggregate_1d(data.cohort, grid, data.states.size());
    auto [occ, expo] = transition_series(table, from, to);
    auto path = lasso_path(occ, expo, lambdas, opts);

    std::string label = transition_label(data.states, from, to);
    std::string summary = "lambda,objective,df\n";
    nlohmann::json converged = nlohmann::json::array();
    for (std::size_t k = 0; k < path.size(); ++k) {
        const auto& fit = path[k];
        summary += format_full(fit.lambda) + ',' + format_full(fit.objective_value) + ',' +
                   std::to_string(fit.df) + '\n';
        converged.push_back(fit.converged);

        auto cells = lasso_cells(fit, expo, level);
        std::string csv =
            "transition,bin,t_lo,t_hi,rate,variance,ci_lo,ci_hi,method,lambda\n";
        for (int m = 0; m < grid.bins; ++m)
            csv += label + ',' + std::to_string(m + 1) + ',' + format_full(grid.lo(m)) + ',' +
                   format_full(grid.hi(m)) + ',' +
                   format_cell(cells[static_cast<std::size_t>(m)]) + ",lasso," +
                   format_full(fit.lambda) + '\n';
        char name[64];
        std::snprintf(name, sizeof(name), "lasso_rates_%03zu.csv", k);
        ctx.write(name, csv);
    }
    ctx.write("lasso_path.csv", summary);
    ctx.extra["transition"] = label;
    ctx.extra["converged"] = converged;
    ctx.extra["bands"] = "heuristic";
}

void run_tree_on(CommandContext& ctx, const LoadedData& data, const TimeGrid& grid) {
    if (ctx.config.duration_grid())
        throw ValidationError(ctx.config.source() +
                              ": the deviance tree is 1D only; drop [grid.duration]");
    if (!ctx.config.has("estimation", "transition"))
        throw ValidationError(ctx.config.source() +
                              ": [estimation] transition is required for tree fits");
    int from = -1, to = -1;
    {
        std::string spec = ctx.config.get_string("estimation", "transition");
        auto arrow = spec.find("->");
        if (arrow == std::string::npos)
            throw ValidationError(ctx.config.source() + ": transition must be 'from -> to'");
        auto strip = [](std::string s) {
            while (!s.empty() && s.front() == ' ') s.erase(s.begin());
            while (!s.empty() && s.back() == ' ') s.pop_back();
            return s;
        };
        from = data.states.find(strip(spec.substr(0, arrow)));
        to = data.states.find(strip(spec.substr(arrow + 2)));
        if (from < 0 || to < 0)
            throw ValidationError(ctx.config.source() + ": transition '" + spec +
                                  "' not present in the data");
    }

    PoissonTreeParams params;
    params.max_depth = static_cast<int>(ctx.config.get_int_or("estimation", "max_depth", 6));
    params.min_exposure = ctx.config.get_double_or("estimation", "min_exposure", 0.0);
    params.min_deviance_gain =
        ctx.config.get_double_or("estimation", "min_deviance_gain", 0.0);
    double level = ctx.config.get_double_or("estimation", "level", 0.95);

    auto table = aggregate_1d(data.cohort, grid, data.states.size());
    auto [occ, expo] = transition_series(table, from, to);
    auto tree = tree_fit(occ, expo, params);
    auto cells = tree_cells(tree, level);

    std::string label = transition_label(data.states, from, to);
    std::string csv = "transition,bin,t_lo,t_hi,rate,variance,ci_lo,ci_hi,method,leaf_id\n";
    for (int m = 0; m < grid.bins; ++m)
        csv += label + ',' + std::to_string(m + 1) + ',' + format_full(grid.lo(m)) + ',' +
               format_full(grid.hi(m)) + ',' + format_cell(cells[static_cast<std::size_t>(m)]) +
               ",tree," + std::to_string(tree.leaf_index_of_bin(m)) + '\n';
    ctx.write("tree_rates.csv", csv);

    nlohmann::json nodes = nlohmann::json::array();
    for (const auto& node : tree.nodes) {
        nlohmann::json j;
        j["bin_lo"] = node.lo + 1;
        j["bin_hi"] = node.hi;  // inclusive 1-based range
        j["occurrence"] = node.occ;
        j["exposure"] = node.expo;
        j["rate"] = node.rate;
        j["deviance"] = node.deviance;
        j["depth"] = node.depth;
        if (node.left >= 0) {
            j["split_boundary"] = node.split;
            j["gain"] = node.gain;
            j["left"] = node.left;
            j["right"] = node.right;
        }
        nodes.push_back(j);
    }
    nlohmann::json treedoc;
    treedoc["transition"] = label;
    treedoc["max_depth"] = params.max_depth;
    treedoc["min_exposure"] = params.min_exposure;
    treedoc["min_deviance_gain"] = params.min_deviance_gain;
    treedoc["nodes"] = nodes;
    ctx.write("tree_structure.json", treedoc.dump(2) + "\n");
    ctx.extra["transition"] = label;
    ctx.extra["bands"] = "heuristic";
}

void cmd_lasso(CommandContext& ctx) {
    LoadedData data = load_data(ctx);
    run_lasso_on(ctx, data, ctx.config.grid());
}

void cmd_tree(CommandContext& ctx) {
    LoadedData data = load_data(ctx);
    run_tree_on(ctx, data, ctx.config.grid());
}

void cmd_sweep(CommandContext& ctx) {
    auto setup = study_setup(ctx);
    auto [from, to] = study_transition(ctx, setup.model);
    std::int64_t n = experiment_n(ctx, 500);
    int reps = static_cast<int>(ctx.config.get_int_or("experiment", "reps", 1000));
    double t_eval = ctx.config.get_double_or("experiment", "t_eval", 20.0);
    std::vector<int> meshes = mesh_list(ctx, {5, 10, 15, 20, 25, 30, 35, 40,
                                              45, 50, 55, 60, 65, 70, 75, 80});

    auto rows = experiments::bias_variance_sweep(setup, from, to, t_eval, n, reps, meshes);
    std::string csv = "M,delta,var_z,scaled_abs_bias,reps,reps_used,n\n";
    for (const auto& row : rows)
        csv += std::to_string(row.m_bins) + ',' + format_full(row.delta) + ',' +
               format_full(row.var_z) + ',' + format_full(row.scaled_abs_bias) + ',' +
               std::to_string(row.reps) + ',' + std::to_string(row.reps_used) + ',' +
               std::to_string(row.n) + '\n';
    ctx.write("sweep.csv", csv);
    ctx.extra["transition"] = transition_label(setup.model.states, from, to);
    ctx.extra["t_eval"] = t_eval;
}

void cmd_clt(CommandContext& ctx) {
    auto setup = study_setup(ctx);
    auto [from, to] = study_transition(ctx, setup.model);
    std::int64_t n = experiment_n(ctx, 500);
    int reps = static_cast<int>(ctx.config.get_int_or("experiment", "reps", 1000));
    double t_eval = ctx.config.get_double_or("experiment", "t_eval", 20.0);
    std::vector<int> meshes = mesh_list(ctx, {5, 15, 75});

    auto samples = experiments::clt_study(setup, from, to, t_eval, n, reps, meshes);
    std::string summary =
        "M,delta,reps,reps_used,matched_sd,sample_variance,theorem_variance,ks_distance\n";
    for (const auto& s : samples) {
        summary += std::to_string(s.m_bins) + ',' + format_full(s.delta) + ',' +
                   std::to_string(s.reps) + ',' + std::to_string(s.reps_used) + ',' +
                   format_full(s.matched_sd) + ',' + format_full(s.sample_variance) + ',' +
                   format_full(s.theorem_variance) + ',' + format_full(s.ks_distance) + '\n';
        std::string zfile = "z\n";
        for (double z : s.z_values) zfile += format_full(z) + '\n';
        ctx.write("clt_z_M" + std::to_string(s.m_bins) + ".csv", zfile);
    }
    ctx.write("clt_summary.csv", summary);
    ctx.extra["transition"] = transition_label(setup.model.states, from, to);
}

void cmd_independence(CommandContext& ctx) {
    auto setup = study_setup(ctx);
    auto [from, to] = study_transition(ctx, setup.model);
    std::int64_t n = experiment_n(ctx, 500);
    int reps = static_cast<int>(ctx.config.get_int_or("experiment", "reps", 2000));
    double s_eval = ctx.config.get_double_or("experiment", "s_eval", 15.0);
    double t_eval = ctx.config.get_double_or("experiment", "t_eval", 25.0);

    experiments::IndependenceResult result;
    if (setup.model.kind == ModelKind::SemiMarkov) {
        TimeGrid tg = ctx.config.has_section("grid")
                          ? ctx.config.grid()
                          : TimeGrid{0.0, setup.horizon,
                                     static_cast<int>(std::round(setup.horizon / 2.0))};
        TimeGrid ug = ctx.config.duration_grid().value_or(tg);
        double u_eval = ctx.config.get_double_or("experiment", "u_eval", 3.0);
        result = experiments::independence_check_2d(setup, from, to, s_eval, t_eval, u_eval, n,
                                                    reps, TimeDurationGrid{tg, ug});
    } else {
        int m_bins = static_cast<int>(ctx.config.get_int_or("experiment", "bins", 15));
        result = experiments::independence_check(setup, from, to, s_eval, t_eval, n, reps,
                                                 m_bins);
    }

    std::string csv = "kind,s,t,corr,ci_lo,ci_hi,reps,reps_used\n";
    csv += std::string(result.semi_markov ? "semi_markov" : "markov") + ',' +
           format_full(result.s_eval) + ',' + format_full(result.t_eval) + ',' +
           format_full(result.corr) + ',' + format_full(result.ci_lo) + ',' +
           format_full(result.ci_hi) + ',' + std::to_string(result.reps) + ',' +
           std::to_string(result.reps_used) + '\n';
    ctx.write("independence.csv", csv);
    ctx.extra["transition"] = transition_label(setup.model.states, from, to);
}

void cmd_lemma_check(CommandContext& ctx) {
    auto setup = study_setup(ctx);
    auto [from, to] = study_transition(ctx, setup.model);
    std::int64_t n = experiment_n(ctx, 200000);
    double t_eval = ctx.config.get_double_or("experiment", "t_eval", 20.0);
    double delta_t = ctx.config.get_double_or("experiment", "delta_t", 0.25);

    std::vector<experiments::MomentCheckRow> rows;
    if (setup.model.kind == ModelKind::SemiMarkov) {
        double u_eval = ctx.config.get_double_or("experiment", "u_eval", 3.0);
        double delta_u = ctx.config.get_double_or("experiment", "delta_u", delta_t);
        rows = experiments::lemma_moment_check_2d(setup, from, to, t_eval, u_eval, delta_t,
                                                  delta_u, n);
    } else {
        rows = experiments::lemma_moment_check(setup, from, to, t_eval, delta_t, n);
    }

    std::string csv = "quantity,observed,predicted,mc_se\n";
    for (const auto& row : rows)
        csv += row.quantity + ',' + format_full(row.observed) + ',' +
               format_full(row.predicted) + ',' + format_full(row.mc_se) + '\n';
    ctx.write("lemma_check.csv", csv);
    ctx.extra["transition"] = transition_label(setup.model.states, from, to);
    ctx.extra["n"] = n;
}

void cmd_surface(CommandContext& ctx) {
    SimConfig sim = ctx.config.simulation();
    sim.master_seed = ctx.seed;
    sim.threads = ctx.threads;
    if (ctx.options.paper_scale && ctx.config.has("experiment", "paper_n"))
        sim.n = ctx.config.get_int("experiment", "paper_n");
    const IntensityModel& model = ctx.config.model();

    TimeGrid tg = ctx.config.has_section("grid")
                      ? ctx.config.grid()
                      : TimeGrid{0.0, sim.horizon,
                                 static_cast<int>(std::round(sim.horizon / 2.0))};
    TimeGrid ug = ctx.config.duration_grid().value_or(tg);
    TimeDurationGrid grid{tg, ug};
    double level = ctx.config.get_double_or("estimation", "level", 0.95);

    auto cohort = simulate_cohort(sim);
    auto table = aggregate_2d(cohort, grid, model.states.size());
    auto transitions = model.transition_pairs();
    ctx.write("surface_table.csv", oe_table_csv(table, model.states, transitions));
    auto fit = oe_rates(table, transitions, level);
    ctx.write("surface_rates.csv", rate_fit_csv(fit, model.states));

    // Truth at box centres on the admissible region u <= t.
    std::string truth = "transition,bin,t_mid,u_mid,truth\n";
    for (auto [from, to] : transitions) {
        std::string label = transition_label(model.states, from, to);
        for (int m1 = 0; m1 < tg.bins; ++m1)
            for (int m2 = 0; m2 < ug.bins; ++m2) {
                double t = tg.mid(m1), u = ug.mid(m2);
                if (u > t) continue;
                truth += label + ',' + std::to_string(m1 * ug.bins + m2 + 1) + ',' +
                         format_full(t) + ',' + format_full(u) + ',' +
                         format_full(experiments::true_intensity(model, from, to, t, u)) + '\n';
            }
    }
    ctx.write("surface_truth.csv", truth);

    // Diagonal sections: d = 0 for transitions out of the initial state
    // (duration equals calendar time there), the configured d list otherwise.
    std::vector<double> d_list = ctx.config.has("experiment", "d_list")
                                     ? ctx.config.get_double_list("experiment", "d_list")
                                     : std::vector<double>{1.0, 5.0, 10.0, 20.0};
    for (auto [from, to] : transitions) {
        std::string label = sanitize(model.states.label(from) + "to" + model.states.label(to));
        std::vector<double> ds =
            from == sim.initial_state ? std::vector<double>{0.0} : d_list;
        for (double d : ds) {
            auto points = diagonal_slice(fit, from, to, d);
            ctx.write("slice_" + label + "_d" + format_full(d) + ".csv",
                      slice_csv(model.states, from, to, d, points, &model));
        }
    }
    ctx.extra["subjects"] = cohort.size();
}

void cmd_slice(CommandContext& ctx) {
    if (!ctx.config.has_section("slice"))
        throw ValidationError(ctx.config.source() + ": the slice command needs a [slice] section");
    StateSpace states;
    RateFit fit = read_rate_fit_csv(ctx.config.get_string("slice", "fit"), states);
    if (!fit.duration_grid)
        throw ValidationError(ctx.config.source() + ": slice needs a 2D fit file");

    std::vector<std::pair<int, int>> targets;
    if (ctx.config.has("slice", "transition")) {
        std::string spec = ctx.config.get_string("slice", "transition");
        auto arrow = spec.find("->");
        if (arrow == std::string::npos)
            throw ValidationError(ctx.config.source() + ": transition must be 'from -> to'");
        auto strip = [](std::string s) {
            while (!s.empty() && s.front() == ' ') s.erase(s.begin());
            while (!s.empty() && s.back() == ' ') s.pop_back();
            return s;
        };
        int from = states.find(strip(spec.substr(0, arrow)));
        int to = states.find(strip(spec.substr(arrow + 2)));
        if (from < 0 || to < 0)
            throw ValidationError(ctx.config.source() + ": transition '" + spec +
                                  "' not present in the fit file");
        targets.emplace_back(from, to);
    } else {
        for (const auto& row : fit.rows) targets.emplace_back(row.from, row.to);
    }

    for (auto [from, to] : targets) {
        std::string label = sanitize(states.label(from) + "to" + states.label(to));
        for (double d : ctx.config.get_double_list("slice", "d_list")) {
            auto points = diagonal_slice(fit, from, to, d);
            ctx.write("slice_" + label + "_d" + format_full(d) + ".csv",
                      slice_csv(states, from, to, d, points, nullptr));
        }
    }
}

}  // namespace

const std::vector<std::string>& known_commands() {
    static const std::vector<std::string> commands = {
        "simulate", "estimate", "sweep",  "clt",  "independence",
        "lemma-check", "surface", "lasso", "tree", "slice"};
    return commands;
}

RunResult run_command(const std::string& command, const AppConfig& config,
                      const std::string& out_dir, const RunOptions& options) {
    if (std::find(known_commands().begin(), known_commands().end(), command) ==
        known_commands().end())
        throw ValidationError("unknown command '" + command + "'");

    CommandContext ctx{config, std::filesystem::path(out_dir), options};
    std::error_code ec;
    std::filesystem::create_directories(ctx.out_dir, ec);
    if (ec) throw RuntimeError("cannot create output directory '" + out_dir + "'");

    ctx.threads = options.threads > 0
                      ? options.threads
                      : static_cast<int>(config.get_int_or("simulation", "threads", 0));
    ctx.seed = options.seed_override
                   ? *options.seed_override
                   : (config.has("simulation", "master_seed")
                          ? static_cast<std::uint64_t>(config.get_int("simulation",
                                                                      "master_seed"))
                          : 0);
    check_experiment_name(ctx, command);

    if (command == "simulate")
        cmd_simulate(ctx);
    else if (command == "estimate")
        cmd_estimate(ctx);
    else if (command == "sweep")
        cmd_sweep(ctx);
    else if (command == "clt")
        cmd_clt(ctx);
    else if (command == "independence")
        cmd_independence(ctx);
    else if (command == "lemma-check")
        cmd_lemma_check(ctx);
    else if (command == "surface")
        cmd_surface(ctx);
    else if (command == "lasso")
        cmd_lasso(ctx);
    else if (command == "tree")
        cmd_tree(ctx);
    else if (command == "slice")
        cmd_slice(ctx);

    ctx.finish(command);
    return RunResult{std::move(ctx.files)};
}

}  // namespace msj
