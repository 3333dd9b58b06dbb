// Benchmark and verification CLI for the twin-iterate Polyak stepsize family.
//
// Subcommands:
//   run            execute a seeded experiment from a config file / flags
//   sweep          grid over one method parameter, with a summary CSV
//   verify         run the executable theory checks
//   estimate-fstar compute an optimal-value certificate for an objective
//   parse-check    validate a LIBSVM file and print its stats
//
// Exit codes: 0 success, 1 verification failure, 2 configuration error,
// 3 I/O or parse error, 4 numeric divergence in a run.

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "tp/dataio.hpp"
#include "tp/harness.hpp"
#include "tp/kvconfig.hpp"
#include "tp/verify.hpp"
#include "tp/version.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitVerifyFailed = 1;
constexpr int kExitConfig = 2;
constexpr int kExitIo = 3;
constexpr int kExitDiverged = 4;

// Flag overrides land in a (config key -> value) map applied on top of the
// config file, so precedence is simply "flags win".
class OverrideSet {
  public:
    explicit OverrideSet(CLI::App* cmd) : cmd_(cmd) {}

    void add(const std::string& flag, const std::string& key, const std::string& desc) {
        values_[key] = std::nullopt;
        cmd_->add_option(flag, values_[key], desc);
    }

    void apply(tp::KvMap& kv) const {
        for (const auto& [key, value] : values_)
            if (value) kv.set(key, *value);
    }

  private:
    CLI::App* cmd_;
    std::map<std::string, std::optional<std::string>> values_;
};

void add_run_overrides(OverrideSet& o) {
    o.add("--method", "method", "gd|polyak|tp|sgd|spsmax|decsps|sls|stp|stpm");
    o.add("--objective", "objective", "quadratic|logistic|least_squares");
    o.add("--dataset", "dataset", "LIBSVM file (.gz accepted)");
    o.add("--quad-spectrum", "quad_spectrum", "diagonal spectrum, comma-separated");
    o.add("--quad-offset", "quad_offset", "additive constant of the quadratic");
    o.add("--label-normalize", "label_normalize", "auto|binary|none");
    o.add("--scale-features", "scale_features", "per-feature max-abs scaling (true/false)");
    o.add("--seeds", "seeds", "comma-separated seed list");
    o.add("--epochs", "epochs", "epoch count (full-batch: iteration count)");
    o.add("--batch-size", "batch_size", "batch size; 0 = full batch");
    o.add("--test-fraction", "test_fraction", "held-out fraction in [0,1)");
    o.add("--split-seed", "split_seed", "seed of the train/test permutation");
    o.add("--fstar-mode", "fstar_mode", "certificate|provided|none");
    o.add("--fstar-value", "fstar_value", "optimal value when fstar_mode = provided");
    o.add("--fstar-grad-tol", "fstar_grad_tol", "certificate gradient tolerance");
    o.add("--fstar-max-iter", "fstar_max_iter", "certificate iteration cap");
    o.add("--init-mode", "init_mode", "gaussian|zeros|provided");
    o.add("--x0", "x0", "initial point, comma-separated");
    o.add("--y0", "y0", "twin initial point, comma-separated");
    o.add("--wrap-c", "wrap_c", "objective scale (f -> c f + d)");
    o.add("--wrap-d", "wrap_d", "objective shift (f -> c f + d)");
    o.add("--output", "output", "CSV/metadata path prefix");
    o.add("--window", "running_avg_window", "running-average window");
    o.add("--timings", "timings", "per-step wall clock in the CSV (true/false)");
    o.add("--jobs", "jobs", "parallel seeds");
    // method parameters
    o.add("--eta", "eta", "gd/sgd stepsize (default 1/L)");
    o.add("--fstar", "fstar", "polyak optimal value");
    o.add("--sps-c", "sps_c", "spsmax curvature constant");
    o.add("--gamma", "gamma", "spsmax stepsize cap (inf = unclipped)");
    o.add("--c0", "c0", "decsps schedule scale");
    o.add("--eta-b", "eta_b", "decsps initial bound");
    o.add("--lstar", "lstar", "batch lower bound for spsmax/decsps");
    o.add("--beta", "beta", "sls backtracking factor");
    o.add("--sls-c", "sls_c", "sls sufficient-decrease constant");
    o.add("--eta-max", "eta_max", "sls initial stepsize");
    o.add("--alpha", "alpha", "stpm momentum");
    o.add("--epsilon", "epsilon", "twin gap threshold (0 = relative default)");
    o.add("--tp-multiplier", "tp_multiplier", "twin stepsize multiplier");
}

tp::KvMap load_config(const std::string& config_path, const OverrideSet& overrides) {
    tp::KvMap kv;
    if (!config_path.empty()) kv = tp::KvMap::parse_file(config_path);
    overrides.apply(kv);
    return kv;
}

void echo_config(const tp::RunConfig& config) {
    std::cout << "# effective configuration\n" << config.to_kv().serialize() << std::flush;
}

int print_seed_summaries(const std::vector<tp::RunTrace>& traces) {
    bool any_diverged = false;
    for (const auto& t : traces) {
        std::cout << "seed=" << t.seed << " steps=" << t.rows.size();
        if (t.final_subopt) std::cout << " final_subopt=" << tp::format_double(*t.final_subopt);
        if (t.final_test_acc)
            std::cout << " test_acc=" << tp::format_double(*t.final_test_acc);
        std::cout << " returned=" << tp::mover_name(t.returned_point)
                  << " f=" << tp::format_double(t.final_f);
        if (t.stopped) std::cout << " stopped";
        if (t.diverged) {
            std::cout << " DIVERGED (" << t.note << ")";
            any_diverged = true;
        }
        std::cout << '\n';
    }
    return any_diverged ? kExitDiverged : kExitOk;
}

int cmd_run(const std::string& config_path, const OverrideSet& overrides) {
    tp::RunConfig config = tp::RunConfig::from_kv(load_config(config_path, overrides));
    echo_config(config);
    const tp::PreparedProblem problem = tp::prepare(config);
    const auto traces = tp::run_all(config, problem);
    return print_seed_summaries(traces);
}

struct GridSpec {
    std::string param;            // empty = single cell (parameter-free method)
    std::vector<double> values;
};

const std::map<std::string, std::vector<tp::Method>> kGridParams = {
    {"eta", {tp::Method::gd, tp::Method::sgd}},
    {"gamma", {tp::Method::spsmax}},
    {"sps_c", {tp::Method::spsmax}},
    {"c0", {tp::Method::decsps}},
    {"eta_b", {tp::Method::decsps}},
    {"lstar", {tp::Method::spsmax, tp::Method::decsps}},
    {"beta", {tp::Method::sls}},
    {"sls_c", {tp::Method::sls}},
    {"eta_max", {tp::Method::sls}},
    {"alpha", {tp::Method::stpm}},
    {"tp_multiplier", {tp::Method::tp, tp::Method::stp, tp::Method::stpm}},
    {"epsilon", {tp::Method::tp, tp::Method::stp}},
};

int cmd_sweep(const std::string& config_path, const OverrideSet& overrides,
              const std::string& grid_param, const std::string& grid_values,
              const std::string& out_dir) {
    tp::KvMap kv = load_config(config_path, overrides);
    GridSpec grid;
    grid.param = grid_param.empty() ? kv.get_or("grid_param", "") : grid_param;
    {
        tp::KvMap tmp;
        tmp.set("v", grid_values.empty() ? kv.get_or("grid_values", "") : grid_values);
        if (!tmp.get("v").empty()) grid.values = tmp.get_doubles("v");
    }
    // sweep-level keys are not part of a RunConfig; drop them before validation
    tp::KvMap run_kv;
    for (const auto& key : kv.order())
        if (key != "grid_param" && key != "grid_values" && key != "sweep_output")
            run_kv.set(key, kv.get(key));

    tp::RunConfig base = tp::RunConfig::from_kv(run_kv);
    if (!grid.param.empty()) {
        auto it = kGridParams.find(grid.param);
        if (it == kGridParams.end())
            throw tp::ConfigError("unknown grid parameter '" + grid.param + "'");
        if (std::find(it->second.begin(), it->second.end(), base.method) == it->second.end())
            throw tp::ConfigError("method " + tp::method_name(base.method) +
                                  " has no parameter '" + grid.param + "'");
        if (grid.values.empty())
            throw tp::ConfigError("grid_values must be a nonempty explicit list");
    }

    const std::string dir = out_dir.empty() ? kv.get_or("sweep_output", "sweep_out") : out_dir;
    std::filesystem::create_directories(dir);

    echo_config(base);
    std::cout << "# sweep " << (grid.param.empty() ? "(single cell)" : grid.param) << " over "
              << grid.values.size() << " values, " << base.seeds.size() << " seeds\n";

    std::ofstream summary(dir + "/summary.csv", std::ios::binary | std::ios::trunc);
    if (!summary) throw tp::IoError("cannot open " + dir + "/summary.csv");
    summary << "method,grid_param,grid_value,seed,final_subopt,final_subopt_runavg,"
               "final_test_acc,steps,flags\n";

    const std::size_t cells = grid.param.empty() ? 1 : grid.values.size();
    for (std::size_t cell = 0; cell < cells; ++cell) {
        tp::RunConfig config = base;
        std::string cell_tag = "single";
        if (!grid.param.empty()) {
            tp::KvMap cell_kv = run_kv;
            cell_kv.set(grid.param, grid.values[cell]);
            config = tp::RunConfig::from_kv(cell_kv);
            cell_tag = grid.param + "_" + tp::format_double(grid.values[cell]);
        }
        config.output_path = dir + "/" + cell_tag;
        const tp::PreparedProblem problem = tp::prepare(config);
        const auto traces = tp::run_all(config, problem);
        for (const auto& t : traces) {
            summary << tp::method_name(config.method) << ',' << grid.param << ','
                    << (grid.param.empty() ? "" : tp::format_double(grid.values[cell])) << ','
                    << t.seed << ','
                    << (t.final_subopt ? tp::format_double(*t.final_subopt) : "") << ','
                    << (t.final_subopt_runavg ? tp::format_double(*t.final_subopt_runavg) : "")
                    << ','
                    << (t.final_test_acc ? tp::format_double(*t.final_test_acc) : "") << ','
                    << t.rows.size() << ',' << (t.diverged ? "diverged" : "") << '\n';
        }
    }
    if (!summary) throw tp::IoError("write failed for sweep summary");
    return kExitOk;
}

int cmd_verify(const std::string& suites_csv, std::uint64_t seed, const std::string& data_dir,
               const std::string& report_path) {
    std::vector<std::string> names;
    {
        std::string item;
        std::istringstream in(suites_csv);
        while (std::getline(in, item, ','))
            if (!item.empty()) names.push_back(item);
    }
    if (names.empty()) names.push_back("all");

    std::cout << "# verify suites seed=" << seed << " data_dir=" << data_dir << "\n";
    const auto results = tp::run_suites(names, seed, data_dir);

    tp::KvMap report;
    report.set("seed", static_cast<std::int64_t>(seed));
    bool all_ok = true;
    for (const auto& suite : results) {
        for (const auto& [name, r] : suite.checks) {
            const std::string full = suite.suite + "." + name;
            std::cout << tp::format_report_human(full, r) << '\n';
            tp::append_report_kv(report, full, r);
        }
        all_ok = all_ok && suite.all_ok();
    }
    report.set("all_ok", all_ok);
    std::cout << (all_ok ? "VERIFY PASS" : "VERIFY FAIL") << '\n';

    if (!report_path.empty()) {
        std::ofstream out(report_path, std::ios::binary | std::ios::trunc);
        if (!out) throw tp::IoError("cannot open report file " + report_path);
        out << report.serialize();
    }
    return all_ok ? kExitOk : kExitVerifyFailed;
}

int cmd_estimate_fstar(const std::string& config_path, const OverrideSet& overrides,
                       const std::string& out_path) {
    tp::RunConfig config = tp::RunConfig::from_kv(load_config(config_path, overrides));
    config.fstar_mode = tp::FstarMode::none;  // prepare() must not recurse into a certificate
    echo_config(config);
    const tp::PreparedProblem problem = tp::prepare(config);
    tp::Vec x0(static_cast<std::size_t>(problem.objective->dim()), 0.0);
    const tp::FStarCertificate cert =
        tp::estimate_fstar(*problem.objective, x0, config.fstar_grad_tol, config.fstar_max_iter);

    tp::KvMap kv;
    kv.set("fstar", cert.fstar);
    kv.set("method", cert.method);
    kv.set("residual_grad_norm", cert.residual_grad_norm);
    kv.set("iterations_used", cert.iterations_used);
    kv.set("requested_grad_tol", cert.requested_grad_tol);
    kv.set("converged", cert.converged());
    std::cout << kv.serialize();
    if (!out_path.empty()) {
        std::ofstream out(out_path, std::ios::binary | std::ios::trunc);
        if (!out) throw tp::IoError("cannot open " + out_path);
        out << kv.serialize();
    }
    return kExitOk;
}

int cmd_parse_check(const std::string& input, std::int64_t override_features) {
    std::vector<tp::ParseWarning> warnings;
    tp::ParseOptions opts;
    opts.n_features_override = override_features;
    const tp::SparseDataset ds = tp::load_libsvm_file(input, opts, &warnings);
    std::cout << "examples = " << ds.n_examples() << "\nfeatures = " << ds.n_features()
              << "\nnnz = " << ds.features.nnz() << "\nbinary_labels = "
              << (tp::labels_are_binary(ds) ? "true" : "false") << "\nwarnings = "
              << warnings.size() << '\n';
    for (const auto& w : warnings)
        std::cout << "warning line " << w.line << ": " << w.message << '\n';
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Twin-iterate Polyak stepsize benchmark"};
    app.require_subcommand(1);
    app.set_version_flag("--version", tp::kVersion);
    int verbosity = 0;
    app.add_flag("-v,--verbose", verbosity, "increase verbosity");

    std::string run_config, sweep_config, fstar_config;
    auto* run = app.add_subcommand("run", "execute a seeded experiment");
    run->add_option("--config", run_config, "key = value config file");
    OverrideSet run_overrides(run);
    add_run_overrides(run_overrides);

    auto* sweep = app.add_subcommand("sweep", "grid over one method parameter");
    sweep->add_option("--config", sweep_config, "key = value config file");
    std::string grid_param, grid_values, sweep_out;
    sweep->add_option("--grid-param", grid_param, "parameter to sweep");
    sweep->add_option("--grid-values", grid_values, "explicit comma-separated value list");
    sweep->add_option("--out-dir", sweep_out, "sweep output directory");
    OverrideSet sweep_overrides(sweep);
    add_run_overrides(sweep_overrides);

    auto* verify = app.add_subcommand("verify", "run the executable theory checks");
    std::string suites = "all", data_dir = "data", report_path;
    std::uint64_t verify_seed = 0;
    verify->add_option("--suite", suites, "gradients|lemma1|theorem1|lemma2|invariance|all");
    verify->add_option("--seed", verify_seed, "seed of the verification runs");
    verify->add_option("--data-dir", data_dir, "directory with the benchmark datasets");
    verify->add_option("--report", report_path, "machine-readable report file");

    auto* fstar = app.add_subcommand("estimate-fstar", "optimal-value certificate");
    fstar->add_option("--config", fstar_config, "key = value config file");
    std::string fstar_out;
    fstar->add_option("--out", fstar_out, "certificate output file");
    OverrideSet fstar_overrides(fstar);
    add_run_overrides(fstar_overrides);

    auto* parse = app.add_subcommand("parse-check", "validate a LIBSVM file");
    std::string parse_input;
    std::int64_t parse_override = 0;
    parse->add_option("--input", parse_input, "LIBSVM file")->required();
    parse->add_option("--override-features", parse_override, "pin the feature dimension");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;  // unknown/invalid flags are config errors
    }

    try {
        if (run->parsed()) return cmd_run(run_config, run_overrides);
        if (sweep->parsed())
            return cmd_sweep(sweep_config, sweep_overrides, grid_param, grid_values, sweep_out);
        if (verify->parsed()) return cmd_verify(suites, verify_seed, data_dir, report_path);
        if (fstar->parsed()) return cmd_estimate_fstar(fstar_config, fstar_overrides, fstar_out);
        if (parse->parsed()) return cmd_parse_check(parse_input, parse_override);
    } catch (const tp::ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const tp::UnsupportedError& e) {
        std::cerr << "configuration error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const tp::ParseError& e) {
        std::cerr << "parse error: " << e.what() << '\n';
        return kExitIo;
    } catch (const tp::IoError& e) {
        std::cerr << "i/o error: " << e.what() << '\n';
        return kExitIo;
    } catch (const tp::NumericError& e) {
        std::cerr << "numeric error: " << e.what() << '\n';
        return kExitDiverged;
    } catch (const tp::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitConfig;
    }
    return kExitOk;
}
