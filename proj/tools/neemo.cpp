// neemo: EMD estimates, shape fits and self-checks from the command line.
//
// Exit codes: 0 success, 1 a check failed, 2 bad input or configuration,
// 3 numerical failure (divergence, non-finite values), 4 anything else.

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "neemo/checks.hpp"
#include "neemo/events.hpp"
#include "neemo/experiments.hpp"
#include "neemo/fitter.hpp"
#include "neemo/ot.hpp"
#include "neemo/shapes.hpp"
#include "svg.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace neemo;

namespace {

constexpr const char* kVersion = "0.1.0";

enum Exit { kOk = 0, kCheckFailed = 1, kInputError = 2, kNumericalError = 3, kInternal = 4 };

struct Globals {
    std::uint64_t seed = 0;
    bool seed_given = false;
    std::string config_path;
    std::string out_dir;
    std::string format = "text";
    bool deterministic = false;
};

struct Run {
    json report = json::object();
    std::vector<std::string> artifacts;
    fit::FitConfig config;
    int exit = kOk;
};

fit::FitConfig load_fit_config(const Globals& g) {
    auto cfg = g.config_path.empty() ? fit::FitConfig{} : fit::load_config(g.config_path);
    if (g.seed_given) cfg.seed = g.seed;
    cfg.validate();
    return cfg;
}

fs::path out_path(const Globals& g, const std::string& name) {
    return g.out_dir.empty() ? fs::path(name) : fs::path(g.out_dir) / name;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream os(path);
    if (!os) throw InputError("cannot write " + path.string());
    os << text;
}

void write_atomic(const fs::path& path, const std::string& text) {
    auto tmp = path;
    tmp += ".tmp";
    write_text(tmp, text);
    fs::rename(tmp, path);
}

json config_json(const fit::FitConfig& cfg) {
    json j = json::object();
    std::istringstream in(fit::config_to_text(cfg));
    for (std::string line; std::getline(in, line);) {
        const auto eq = line.find(" = ");
        if (eq != std::string::npos) j[line.substr(0, eq)] = line.substr(eq + 3);
    }
    return j;
}

void print_report(const Globals& g, const json& report) {
    if (g.format == "json") {
        std::cout << report.dump(2) << "\n";
        return;
    }
    for (const auto& [key, value] : report.items()) {
        if (value.is_string()) {
            std::cout << key << ": " << value.get<std::string>() << "\n";
        } else {
            std::cout << key << ": " << value.dump() << "\n";
        }
    }
}

json matrix_json(const Eigen::MatrixXd& M) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < M.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < M.cols(); ++c) row.push_back(M(r, c));
        rows.push_back(row);
    }
    return rows;
}

// ---- gen

struct GenArgs {
    std::string generator;
    std::string output;
    std::string event_format;
    int points = 200;
    double jitter = 0.0;
    int n_centers = 3;
    double sigma = 0.05;
    int per_center = 10;
    std::vector<std::vector<double>> circles;
};

void cmd_gen(const Globals& g, const GenArgs& a, Run& run) {
    events::Event event;
    if (a.generator == "circles") {
        auto layout = events::three_circle_layout();
        if (!a.circles.empty()) {
            layout.clear();
            for (const auto& c : a.circles) {
                if (c.size() != 3) throw InputError("--circle takes cx,cy,r");
                layout.push_back({c[0], c[1], c[2]});
            }
        }
        event = events::gen_circle_event(layout, a.points, a.jitter, g.seed);
    } else if (a.generator == "triangle-ellipse") {
        event = events::gen_triangle_ellipse_event(events::triangle_ellipse_layout(), a.points, g.seed);
    } else {
        events::SubjetParams p;
        p.n_centers = a.n_centers;
        p.sigma = a.sigma;
        p.particles_per_center = a.per_center;
        event = events::gen_subjet_event(p, g.seed);
    }
    const fs::path path = a.output.empty() ? out_path(g, "event.csv") : fs::path(a.output);
    const auto fmt = a.event_format.empty() ? events::format_for(path) : events::parse_format(a.event_format);
    events::save_event(event, path, fmt);
    run.artifacts.push_back(path.string());
    run.report["generator"] = a.generator;
    run.report["particles"] = event.size();
    run.report["output"] = path.string();
}

// ---- emd

struct EmdArgs {
    std::string a, b;
    std::string method = "exact";
    double epsilon = 1e-3;
    std::size_t max_iters = 100000;
    double tol = 1e-9;
    std::string plan;
    std::string checkpoint;
};

void cmd_emd(const Globals& g, const EmdArgs& a, Run& run) {
    const auto P = events::normalize(events::load_event(a.a));
    const auto Q = events::normalize(events::load_event(a.b));
    run.report["method"] = a.method;
    if (a.method == "exact") {
        const auto plan = ot::exact_emd(P, Q);
        run.report["emd"] = plan.cost;
        run.report["pivots"] = plan.pivots;
        if (!a.plan.empty()) {
            std::ostringstream os;
            os.precision(17);
            os << "i,j,mass\n";
            for (Eigen::Index i = 0; i < plan.gamma.rows(); ++i)
                for (Eigen::Index j = 0; j < plan.gamma.cols(); ++j)
                    if (plan.gamma(i, j) > 0.0) os << i << "," << j << "," << plan.gamma(i, j) << "\n";
            write_text(a.plan, os.str());
            run.artifacts.push_back(a.plan);
        }
    } else if (a.method == "sinkhorn") {
        ot::SinkhornOptions opt;
        opt.epsilon = a.epsilon;
        opt.max_iters = a.max_iters;
        opt.tol = a.tol;
        const auto r = ot::sinkhorn_emd(P, Q, opt);
        run.report["emd"] = r.value;
        run.report["epsilon"] = a.epsilon;
        run.report["iterations"] = r.iterations;
        run.report["marginal_error"] = r.marginal_error;
    } else {
        run.config = load_fit_config(g);
        auto arch = run.config.arch;
        arch.input_dim = static_cast<int>(P.dim());
        const auto net = lipnet::LipschitzMLP::random(arch, run.config.seed);
        const auto est = fit::estimate_emd(P, {Q.weights, Q.points}, net, run.config);
        run.report["emd"] = est.emd;
        run.report["steps"] = est.history.size();
        run.report["origin"] = std::vector<double>(est.origin.data(), est.origin.data() + est.origin.size());
        const fs::path ck = a.checkpoint.empty() ? out_path(g, "potential.json") : fs::path(a.checkpoint);
        est.net.save(ck);
        run.artifacts.push_back(ck.string());
    }
}

// ---- fit

struct FitArgs {
    std::string event;
    std::string shape;
    bool svg = false;
};

svg::Frame frame_for(const events::Event& event, const fit::FitConfig& cfg, const fit::Snapshot& snap) {
    svg::Frame f;
    f.grid = cfg.heatmap;
    f.heatmap = snap.heatmap;
    f.event_points = event.positions;
    f.event_weights = event.energies;
    f.sample_points = snap.sample_points;
    f.forces = snap.forces;
    f.title = "step " + std::to_string(snap.step);
    return f;
}

void write_fit_outputs(const Globals& g, const FitArgs& a, const events::Event& event, const shapes::ShapeSpec& init,
                       const fit::FitTrace& trace, const fit::FitConfig& cfg, Run& run) {
    const auto trace_path = out_path(g, "trace.jsonl");
    write_text(trace_path, fit::trace_to_jsonl(trace));
    run.artifacts.push_back(trace_path.string());
    if (!trace.final_theta.empty()) {
        auto final_spec = init;
        final_spec.set_theta(trace.final_theta);
        const auto shape_path = out_path(g, "final_shape.json");
        final_spec.save(shape_path);
        run.artifacts.push_back(shape_path.string());
    }
    if (trace.final_net.layers().empty()) return;
    const auto net_path = out_path(g, "potential.json");
    trace.final_net.save(net_path);
    run.artifacts.push_back(net_path.string());
    for (const auto& snap : trace.snapshots) {
        char name[32];
        std::snprintf(name, sizeof name, "heatmap_%05zu.txt", snap.step);
        const auto hp = out_path(g, name);
        fit::save_heatmap(hp, cfg.heatmap, snap.heatmap);
        run.artifacts.push_back(hp.string());
        if (a.svg && event.dim() == 2) {
            std::snprintf(name, sizeof name, "frame_%05zu.svg", snap.step);
            const auto sp = out_path(g, name);
            svg::write(sp, frame_for(event, cfg, snap));
            run.artifacts.push_back(sp.string());
        }
    }
}

void cmd_fit(const Globals& g, const FitArgs& a, Run& run) {
    const auto event = events::load_event(a.event);
    const auto init = shapes::ShapeSpec::load(a.shape);
    run.config = load_fit_config(g);
    try {
        const auto trace = fit::fit(event, init, run.config);
        write_fit_outputs(g, a, event, init, trace, run.config, run);
        run.report["observable"] = trace.final_observable;
        run.report["outer_steps"] = trace.outer_steps_run;
        run.report["theta"] = trace.final_theta;
    } catch (const fit::FitDivergence& e) {
        write_fit_outputs(g, a, event, init, e.trace(), run.config, run);
        throw;
    }
}

// ---- subjets

struct SubjetArgs {
    std::vector<int> true_n{3, 4, 5};
    std::vector<int> fit_n{3, 4, 5};
    int trials = 10;
    unsigned threads = 0;
    bool learned_weights = false;
    std::string init = "particles";
    double sigma = 0.05;
};

void cmd_subjets(const Globals& g, const SubjetArgs& a, Run& run) {
    exp::SubjetStudy study;
    study.true_n = a.true_n;
    study.fit_n = a.fit_n;
    study.trials = a.trials;
    study.fit = load_fit_config(g);
    study.seed = g.seed;
    study.threads = g.deterministic ? 1 : a.threads;
    study.learned_weights = a.learned_weights;
    study.init = a.init == "box" ? exp::CenterInit::Box : exp::CenterInit::Particles;
    study.gen.sigma = a.sigma;
    run.config = study.fit;

    const auto cells = exp::run_subjet_study(study);
    Eigen::MatrixXd mean(static_cast<Eigen::Index>(a.true_n.size()), static_cast<Eigen::Index>(a.fit_n.size()));
    Eigen::MatrixXd stddev = mean, stderr_mean = mean;
    json cell_list = json::array();
    for (std::size_t k = 0; k < cells.size(); ++k) {
        const auto r = static_cast<Eigen::Index>(k / a.fit_n.size()), c = static_cast<Eigen::Index>(k % a.fit_n.size());
        mean(r, c) = cells[k].mean;
        stddev(r, c) = cells[k].stddev;
        stderr_mean(r, c) = cells[k].stderr_mean;
        cell_list.push_back({{"true_n", cells[k].true_n}, {"fit_n", cells[k].fit_n}, {"values", cells[k].values},
                             {"failed", cells[k].failed}, {"mean", cells[k].mean}, {"stddev", cells[k].stddev}});
    }
    run.report["true_n"] = a.true_n;
    run.report["fit_n"] = a.fit_n;
    run.report["mean"] = matrix_json(mean);
    run.report["stddev"] = matrix_json(stddev);
    run.report["stderr"] = matrix_json(stderr_mean);
    if (!g.out_dir.empty()) {
        const auto path = out_path(g, "subjets.json");
        write_text(path, json{{"cells", cell_list}}.dump(2));
        run.artifacts.push_back(path.string());
    }
    if (g.format == "text") {
        std::printf("true\\fit");
        for (int f : a.fit_n) std::printf("  %16d", f);
        std::printf("\n");
        for (Eigen::Index r = 0; r < mean.rows(); ++r) {
            std::printf("%8d", a.true_n[static_cast<std::size_t>(r)]);
            for (Eigen::Index c = 0; c < mean.cols(); ++c) std::printf("  %7.4f +- %6.4f", mean(r, c), stddev(r, c));
            std::printf("\n");
        }
    }
}

// ---- check

void cmd_check(const Globals& g, const std::string& suite, Run& run) {
    std::vector<std::string> names = suite == "all" ? checks::suite_names() : std::vector<std::string>{suite};
    bool ok = true;
    for (const auto& n : names) {
        const auto r = checks::run_suite(n, g.seed);
        ok = ok && r.passed;
        run.report[n] = {{"passed", r.passed}, {"metric", r.metric}, {"threshold", r.threshold}, {"detail", r.detail}};
        if (g.format == "text")
            std::printf("%-10s %s  worst %.3g (limit %.3g)  %s\n", n.c_str(), r.passed ? "PASS" : "FAIL", r.metric,
                        r.threshold, r.detail.c_str());
    }
    run.report["passed"] = ok;
    if (!ok) run.exit = kCheckFailed;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Neural EMD estimates and minimax shape fits"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);
    Globals g;
    auto* seed_opt = app.add_option("--seed", g.seed, "Random seed")->capture_default_str();
    app.add_option("--config", g.config_path, "key = value fit configuration")->check(CLI::ExistingFile);
    app.add_option("--out-dir", g.out_dir, "Directory for artifacts and the run manifest");
    app.add_option("--format", g.format, "Report format")->check(CLI::IsMember({"text", "json"}))->capture_default_str();
    app.add_flag("--deterministic", g.deterministic, "Single-threaded, bitwise reproducible runs");

    GenArgs gen;
    auto* gen_cmd = app.add_subcommand("gen", "Generate a synthetic event");
    gen_cmd->add_option("generator", gen.generator)->required()->check(CLI::IsMember({"circles", "triangle-ellipse", "subjets"}));
    gen_cmd->add_option("-o,--output", gen.output, "Event file (.csv or .jsonl)");
    gen_cmd->add_option("--event-format", gen.event_format)->check(CLI::IsMember({"csv", "jsonl"}));
    gen_cmd->add_option("--points", gen.points, "Points per circle or shape")->capture_default_str();
    gen_cmd->add_option("--jitter", gen.jitter, "Radial Gaussian jitter (circles)")->capture_default_str();
    gen_cmd->add_option("--circle", gen.circles, "cx,cy,r; repeat for several circles")->delimiter(',')->allow_extra_args(false);
    gen_cmd->add_option("--n", gen.n_centers, "Subjet centers")->capture_default_str();
    gen_cmd->add_option("--sigma", gen.sigma, "Subjet spread")->capture_default_str();
    gen_cmd->add_option("--per-center", gen.per_center, "Particles per subjet")->capture_default_str();

    EmdArgs emd;
    auto* emd_cmd = app.add_subcommand("emd", "EMD between two events");
    emd_cmd->add_option("a", emd.a)->required()->check(CLI::ExistingFile);
    emd_cmd->add_option("b", emd.b)->required()->check(CLI::ExistingFile);
    emd_cmd->add_option("--method", emd.method)->check(CLI::IsMember({"exact", "dual", "sinkhorn"}))->capture_default_str();
    emd_cmd->add_option("--epsilon", emd.epsilon, "Sinkhorn regularization")->capture_default_str();
    emd_cmd->add_option("--max-iters", emd.max_iters)->capture_default_str();
    emd_cmd->add_option("--tol", emd.tol)->capture_default_str();
    emd_cmd->add_option("--plan", emd.plan, "Write the exact plan as CSV");
    emd_cmd->add_option("--checkpoint", emd.checkpoint, "Where to save the trained potential");

    FitArgs fa;
    auto* fit_cmd = app.add_subcommand("fit", "Fit a shape to an event");
    fit_cmd->add_option("event", fa.event)->required()->check(CLI::ExistingFile);
    fit_cmd->add_option("shape", fa.shape, "Initial shape spec (JSON)")->required()->check(CLI::ExistingFile);
    fit_cmd->add_flag("--svg", fa.svg, "Write SVG frames for every snapshot");

    SubjetArgs sa;
    auto* sub_cmd = app.add_subcommand("subjets", "Mean O(Q) over true and fitted subjet counts");
    sub_cmd->add_option("--true-n", sa.true_n)->delimiter(',')->capture_default_str();
    sub_cmd->add_option("--fit-n", sa.fit_n)->delimiter(',')->capture_default_str();
    sub_cmd->add_option("--trials", sa.trials)->capture_default_str();
    sub_cmd->add_option("--threads", sa.threads, "0: all cores")->capture_default_str();
    sub_cmd->add_flag("--learned-weights", sa.learned_weights);
    sub_cmd->add_option("--init", sa.init)->check(CLI::IsMember({"particles", "box"}))->capture_default_str();
    sub_cmd->add_option("--sigma", sa.sigma)->capture_default_str();

    std::string suite = "all";
    auto* check_cmd = app.add_subcommand("check", "Run self-check suites");
    check_cmd->add_option("suite", suite)->check(CLI::IsMember({"all", "lipschitz", "gradients", "oracle", "duality"}));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kInputError;
    }
    g.seed_given = seed_opt->count() > 0;

    const auto t0 = std::chrono::steady_clock::now();
    Run run;
    std::string command;
    try {
        if (!g.out_dir.empty()) fs::create_directories(g.out_dir);
        if (*gen_cmd) {
            command = "gen";
            cmd_gen(g, gen, run);
        } else if (*emd_cmd) {
            command = "emd";
            cmd_emd(g, emd, run);
        } else if (*fit_cmd) {
            command = "fit";
            cmd_fit(g, fa, run);
        } else if (*sub_cmd) {
            command = "subjets";
            cmd_subjets(g, sa, run);
        } else {
            command = "check";
            cmd_check(g, suite, run);
        }
    } catch (const NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return kNumericalError;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kInputError;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kInputError;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return kInternal;
    }
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    // check and subjets print their own tables in text mode
    if (g.format == "json" || (command != "check" && command != "subjets")) print_report(g, run.report);

    if (!g.out_dir.empty()) {
        json manifest{{"command", command},
                      {"argv", std::vector<std::string>(argv, argv + argc)},
                      {"config", config_json(run.config)},
                      {"seed", g.seed},
                      {"deterministic", g.deterministic},
                      {"artifacts", run.artifacts},
                      {"report", run.report},
                      {"wall_time_s", wall},
                      {"version", kVersion}};
        try {
            write_atomic(fs::path(g.out_dir) / "manifest.json", manifest.dump(2) + "\n");
        } catch (const std::exception& e) {
            std::cerr << "error: " << e.what() << "\n";
            return kInputError;
        }
    }
    return run.exit;
}
