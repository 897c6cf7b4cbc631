#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "pdg/config.hpp"
#include "pdg/dataset.hpp"
#include "pdg/errors.hpp"
#include "pdg/mlp.hpp"
#include "pdg/scp.hpp"
#include "pdg/simeval.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitSolver = 3;
constexpr int kExitMissing = 4;

// The output directory resolves from, in order: --output-dir, the
// PDG_OUTPUT_DIR environment variable, then the config value.
std::string resolve_output_dir(const pdg::RunConfig& cfg, const std::string& cli_override) {
    if (!cli_override.empty()) return cli_override;
    if (const char* env = std::getenv("PDG_OUTPUT_DIR"); env != nullptr && env[0] != '\0') {
        return env;
    }
    return cfg.output_dir;
}

void write_trajectory_csv(const fs::path& path, const pdg::ReferenceTrajectory& traj) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw pdg::IoError("cannot open " + path.string());
    os << "node,t_s,m_kg,rx_m,ry_m,rz_m,vx_m_s,vy_m_s,vz_m_s,"
          "q0,q1,q2,q3,wx_rad_s,wy_rad_s,wz_rad_s,Tx_N,Ty_N,Tz_N\n";
    char buf[64];
    for (int k = 0; k < traj.n(); ++k) {
        os << k;
        const double t = traj.tau(k) * traj.tf;
        const pdg::Frame f = pdg::make_frame(traj.xs[k], traj.us[k]);
        std::snprintf(buf, sizeof(buf), ",%.17g", t);
        os << buf;
        for (int i = 0; i < pdg::kFrameDim; ++i) {
            std::snprintf(buf, sizeof(buf), ",%.17g", f(i));
            os << buf;
        }
        os << '\n';
    }
}

json iteration_to_json(const pdg::IterationRecord& r) {
    return json{{"iter", r.iter},
                {"j_tr", r.j_tr},
                {"j_vc", r.j_vc},
                {"max_state_diff", r.max_state_diff},
                {"tf_s", r.tf},
                {"cost", r.cost},
                {"status", pdg::socp::to_string(r.status)},
                {"status_detail", r.status_detail},
                {"discretize_ms", r.discretize_ms},
                {"solve_ms", r.solve_ms}};
}

void write_iteration_log(const fs::path& path, const std::vector<pdg::IterationRecord>& log) {
    std::ofstream os(path, std::ios::trunc);
    for (const auto& r : log) os << iteration_to_json(r).dump() << '\n';
}

json aggregate_to_json(const pdg::McAggregate& a) {
    return json{{"cases", a.cases},
                {"converged", a.converged},
                {"median_iterations", a.median_iterations},
                {"mean_iterations", a.mean_iterations},
                {"median_err_r_m", a.median_err_r},
                {"median_err_v_m_s", a.median_err_v},
                {"median_err_q", a.median_err_q},
                {"median_err_w_rad_s", a.median_err_w},
                {"mean_scp_ms", a.mean_scp_ms},
                {"median_final_mass_kg", a.median_final_mass}};
}

int cmd_solve(const pdg::RunConfig& cfg, const std::string& init_kind,
              const std::string& model_path, const std::string& out_override,
              bool dump_subproblems) {
    const fs::path out = resolve_output_dir(cfg, out_override);
    fs::create_directories(out);

    pdg::ScpConfig scp = cfg.scp;
    if (dump_subproblems) {
        fs::create_directories(out / "subproblems");
        scp.debug_dump_dir = (out / "subproblems").string();
    }

    pdg::ReferenceTrajectory init;
    if (init_kind == "straight") {
        init = pdg::straight_line_init(cfg.mission, cfg.bounds, cfg.disc.n_nodes, scp.tf_guess);
    } else if (init_kind == "model") {
        const fs::path mpath = model_path.empty() ? fs::path(cfg.model_file) : fs::path(model_path);
        if (!fs::exists(mpath)) {
            std::cerr << "pdg solve: model file not found: " << mpath << '\n';
            return kExitMissing;
        }
        const pdg::MlpModel model = pdg::load_model(mpath);
        try {
            init = pdg::generate_trajectory(model, cfg.mission.x0, cfg.bounds.t_b0,
                                            cfg.disc.n_nodes);
            init.tf = scp.tf_guess;
        } catch (const pdg::GenerationError& e) {
            std::cerr << "pdg solve: generator failed (" << e.what()
                      << "), falling back to the straight-line initialization\n";
            init = pdg::straight_line_init(cfg.mission, cfg.bounds, cfg.disc.n_nodes,
                                           scp.tf_guess);
        }
    } else {
        std::cerr << "pdg solve: --init must be 'straight' or 'model'\n";
        return kExitConfig;
    }

    pdg::ScpResult result;
    try {
        result = pdg::run_scp(cfg.problem(), init, scp);
    } catch (const pdg::ScpAbortError& e) {
        write_iteration_log(out / "iterations.jsonl", e.log);
        std::cerr << "pdg solve: " << e.what() << '\n';
        return kExitSolver;
    } catch (const pdg::Error& e) {
        std::cerr << "pdg solve: " << e.what() << '\n';
        return kExitSolver;
    }

    write_trajectory_csv(out / "trajectory.csv", result.trajectory);
    write_iteration_log(out / "iterations.jsonl", result.log);
    json summary{{"converged", result.converged},
                 {"reason", result.reason},
                 {"iterations", result.iterations},
                 {"final_mass_kg", result.final_mass},
                 {"tf_s", result.trajectory.tf},
                 {"max_defect_nondim", result.max_defect},
                 {"total_solve_ms", result.total_solve_ms},
                 {"init", init_kind},
                 {"config_hash", cfg.config_hash}};
    std::ofstream(out / "summary.json") << summary.dump(2) << '\n';

    std::printf("solve: %s in %d iterations, final mass %.1f kg, tf %.2f s\n",
                result.converged ? "converged" : "NOT converged", result.iterations,
                result.final_mass, result.trajectory.tf);
    return result.converged ? kExitOk : kExitSolver;
}

int cmd_dataset(const pdg::RunConfig& cfg, const std::string& out_override, int jobs) {
    const fs::path out = resolve_output_dir(cfg, out_override);
    fs::create_directories(out);
    fs::path prefix = cfg.dataset_prefix;
    if (prefix.is_relative() && prefix.parent_path() == fs::path(cfg.output_dir)) {
        prefix = out / prefix.filename();
    }
    fs::create_directories(prefix.parent_path().empty() ? out : prefix.parent_path());

    pdg::ScpConfig scp = cfg.scp;
    scp.criteria_mode = pdg::CriteriaMode::dataset;

    pdg::BuildDatasetOptions opts;
    opts.count = cfg.dataset_count;
    opts.split_fraction = cfg.split_fraction;
    opts.master_seed = cfg.dataset_seed;
    opts.jobs = jobs;
    opts.config_hash = cfg.config_hash;

    const pdg::Dataset ds = pdg::build_dataset(cfg.problem(), cfg.ranges, opts, scp);
    pdg::save_dataset(ds, prefix);

    json summary{{"attempted", ds.manifest.attempted},
                 {"stored", ds.manifest.record_count},
                 {"acceptance_rate", ds.manifest.acceptance_rate},
                 {"train_records", ds.manifest.train_idx.size()},
                 {"test_records", ds.manifest.test_idx.size()},
                 {"median_tf_s", ds.manifest.median_tf},
                 {"config_hash", cfg.config_hash}};
    std::ofstream(out / "dataset_summary.json") << summary.dump(2) << '\n';
    std::printf("dataset: stored %llu/%llu trajectories (acceptance %.1f%%), median tf %.2f s\n",
                static_cast<unsigned long long>(ds.manifest.record_count),
                static_cast<unsigned long long>(ds.manifest.attempted),
                100.0 * ds.manifest.acceptance_rate, ds.manifest.median_tf);
    return kExitOk;
}

int cmd_train(const pdg::RunConfig& cfg, const std::string& out_override) {
    const fs::path out = resolve_output_dir(cfg, out_override);
    fs::create_directories(out);
    if (!fs::exists(cfg.dataset_prefix + ".records.bin")) {
        std::cerr << "pdg train: dataset not found at prefix '" << cfg.dataset_prefix
                  << "' (run 'pdg dataset' first)\n";
        return kExitMissing;
    }
    const pdg::Dataset ds = pdg::load_dataset(cfg.dataset_prefix);
    const auto train_pairs = pdg::frame_pairs(ds, ds.manifest.train_idx);
    const auto test_pairs = pdg::frame_pairs(ds, ds.manifest.test_idx);
    std::printf("train: %zu training pairs, %zu test pairs\n", train_pairs.size(),
                test_pairs.size());

    pdg::TrainReport report;
    pdg::MlpModel model = pdg::train(train_pairs, test_pairs, cfg.train, &report);
    model.config_hash = cfg.config_hash;
    model.dataset_id = cfg.dataset_prefix + "#" + std::to_string(ds.manifest.master_seed);
    fs::create_directories(fs::path(cfg.model_file).parent_path().empty()
                               ? out
                               : fs::path(cfg.model_file).parent_path());
    pdg::save_model(model, cfg.model_file);

    {
        std::ofstream os(out / "loss.csv", std::ios::trunc);
        os << "epoch,lr,train_mse,train_loss,best_train_loss,test_mse\n";
        double best = std::numeric_limits<double>::infinity();
        char buf[160];
        for (std::size_t e = 0; e < report.train_loss.size(); ++e) {
            best = std::min(best, report.train_loss[e]);
            std::snprintf(buf, sizeof(buf), "%zu,%.10g,%.10g,%.10g,%.10g,%.10g\n", e,
                          report.lr[e], report.train_mse[e], report.train_loss[e], best,
                          report.test_mse[e]);
            os << buf;
        }
    }
    json summary{{"epochs", report.train_loss.size()},
                 {"final_train_mse", report.train_mse.back()},
                 {"final_train_loss", report.train_loss.back()},
                 {"final_test_mse", report.test_mse.back()},
                 {"final_lr", report.lr.back()},
                 {"model_file", cfg.model_file},
                 {"config_hash", cfg.config_hash}};
    std::ofstream(out / "train_summary.json") << summary.dump(2) << '\n';
    std::printf("train: final train mse %.3e, test mse %.3e, model -> %s\n",
                report.train_mse.back(), report.test_mse.back(), cfg.model_file.c_str());
    return kExitOk;
}

int cmd_mc(const pdg::RunConfig& cfg, const std::string& out_override, int jobs) {
    const fs::path out = resolve_output_dir(cfg, out_override);
    fs::create_directories(out);
    if (!fs::exists(cfg.model_file)) {
        std::cerr << "pdg mc: model file not found: " << cfg.model_file
                  << " (run 'pdg train' first)\n";
        return kExitMissing;
    }
    const pdg::MlpModel model = pdg::load_model(cfg.model_file);

    pdg::ScpConfig scp = cfg.scp;
    scp.criteria_mode = pdg::CriteriaMode::online;
    pdg::McOptions opts = cfg.mc;
    if (jobs > 0) opts.jobs = jobs;

    const pdg::McSummary summary = pdg::run_monte_carlo(cfg.problem(), cfg.ranges, opts, scp,
                                                        model);
    {
        std::ofstream os(out / "mc_cases.jsonl", std::ios::trunc);
        for (const auto& c : summary.cases) {
            json j{{"case_id", c.case_id},
                   {"seed", c.seed},
                   {"method", c.method},
                   {"solver_ok", c.solver_ok},
                   {"converged", c.converged},
                   {"generator_failed", c.generator_failed},
                   {"iterations", c.iterations},
                   {"tf_s", c.tf},
                   {"final_mass_kg", c.final_mass},
                   {"err_r_m", c.errors.r},
                   {"err_v_m_s", c.errors.v},
                   {"err_q", c.errors.q},
                   {"err_q_raw", c.errors.q_raw},
                   {"err_w_rad_s", c.errors.w},
                   {"gen_ms", c.gen_ms},
                   {"scp_ms", c.scp_ms},
                   {"propagate_ms", c.propagate_ms}};
            os << j.dump() << '\n';
        }
    }
    json jsum{{"n_cases", opts.n_cases},
              {"seed", opts.seed},
              {"straight", aggregate_to_json(summary.straight)},
              {"model", aggregate_to_json(summary.model)},
              {"config_hash", cfg.config_hash}};
    std::ofstream(out / "mc_summary.json") << jsum.dump(2) << '\n';
    std::printf("mc: %d paired cases; median iterations %.1f (straight) vs %.1f (model)\n",
                opts.n_cases, summary.straight.median_iterations,
                summary.model.median_iterations);
    return kExitOk;
}

int cmd_export_dataset(const pdg::RunConfig& cfg, const std::string& csv) {
    if (!fs::exists(cfg.dataset_prefix + ".records.bin")) {
        std::cerr << "pdg export-dataset: dataset not found at prefix '" << cfg.dataset_prefix
                  << "'\n";
        return kExitMissing;
    }
    const pdg::Dataset ds = pdg::load_dataset(cfg.dataset_prefix);
    pdg::export_dataset_csv(ds, csv);
    std::printf("export-dataset: wrote %s\n", csv.c_str());
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Powered-descent guidance toolkit: sequential convex programming with a "
                 "learned initial-trajectory generator"};
    app.require_subcommand(1);

    std::string config_path;
    std::string output_dir;
    int jobs = 0;
    app.add_option("--config,-c", config_path, "Run configuration file (JSON)")->required();
    app.add_option("--output-dir,-o", output_dir,
                   "Output directory (overrides config and PDG_OUTPUT_DIR)");
    app.add_option("--jobs,-j", jobs, "Worker threads for dataset/mc (0 = all cores)");

    auto* solve = app.add_subcommand("solve", "Solve one guidance problem");
    std::string init_kind = "straight";
    std::string model_path;
    bool dump_subproblems = false;
    solve->add_option("--init", init_kind, "Initialization: straight | model")
        ->check(CLI::IsMember({"straight", "model"}));
    solve->add_option("--model", model_path, "Model file for --init model");
    solve->add_flag("--dump-subproblems", dump_subproblems,
                    "Write each convex subproblem in the plain-text sparse format");

    auto* dataset = app.add_subcommand("dataset", "Build the training dataset");
    auto* train = app.add_subcommand("train", "Train the initial-trajectory generator");
    auto* mc = app.add_subcommand("mc", "Paired Monte Carlo comparison");
    auto* exp = app.add_subcommand("export-dataset", "Export the dataset to CSV");
    std::string csv_path = "dataset.csv";
    exp->add_option("--csv", csv_path, "Destination CSV path");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kExitOk : kExitConfig;
    }

    pdg::RunConfig cfg;
    try {
        cfg = pdg::load_config(config_path);
    } catch (const pdg::ConfigError& e) {
        std::cerr << "pdg: " << e.what() << '\n';
        return kExitConfig;
    }

    try {
        if (solve->parsed()) return cmd_solve(cfg, init_kind, model_path, output_dir,
                                              dump_subproblems);
        if (dataset->parsed()) return cmd_dataset(cfg, output_dir, jobs);
        if (train->parsed()) return cmd_train(cfg, output_dir);
        if (mc->parsed()) return cmd_mc(cfg, output_dir, jobs);
        if (exp->parsed()) return cmd_export_dataset(cfg, csv_path);
    } catch (const pdg::IoError& e) {
        std::cerr << "pdg: " << e.what() << '\n';
        return kExitMissing;
    } catch (const pdg::Error& e) {
        std::cerr << "pdg: " << e.what() << '\n';
        return kExitSolver;
    }
    return kExitConfig;
}
