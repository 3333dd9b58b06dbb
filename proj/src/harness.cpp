#include "tp/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <future>
#include <sstream>

#include "tp/dataio.hpp"
#include "tp/rng.hpp"
#include "tp/version.hpp"

namespace tp {

namespace {

constexpr std::uint64_t kInitStream = 1;
constexpr std::uint64_t kBatchStream = 2;

FstarMode fstar_mode_from_name(const std::string& s) {
    if (s == "certificate") return FstarMode::certificate;
    if (s == "provided") return FstarMode::provided;
    if (s == "none") return FstarMode::none;
    throw ConfigError("unknown fstar_mode '" + s + "'");
}

std::string fstar_mode_name(FstarMode m) {
    switch (m) {
        case FstarMode::certificate: return "certificate";
        case FstarMode::provided: return "provided";
        case FstarMode::none: return "none";
    }
    return "?";
}

InitMode init_mode_from_name(const std::string& s) {
    if (s == "gaussian") return InitMode::gaussian;
    if (s == "zeros") return InitMode::zeros;
    if (s == "provided") return InitMode::provided;
    throw ConfigError("unknown init_mode '" + s + "'");
}

std::string init_mode_name(InitMode m) {
    switch (m) {
        case InitMode::gaussian: return "gaussian";
        case InitMode::zeros: return "zeros";
        case InitMode::provided: return "provided";
    }
    return "?";
}

std::string join_doubles(const Vec& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out.push_back(',');
        out += format_double(v[i]);
    }
    return out;
}

const std::vector<std::string> kConfigKeys = {
    "method", "objective", "dataset", "quad_spectrum", "quad_offset", "label_normalize",
    "scale_features", "seeds", "epochs", "batch_size", "test_fraction", "split_seed",
    "fstar_mode", "fstar_value", "fstar_grad_tol", "fstar_max_iter", "init_mode", "x0", "y0",
    "wrap_c", "wrap_d", "output", "running_avg_window", "timings", "jobs",
    // method parameters
    "eta", "fstar", "sps_c", "gamma", "c0", "eta_b", "lstar", "beta", "sls_c", "eta_max",
    "alpha", "epsilon", "tp_multiplier"};

}  // namespace

RunConfig RunConfig::from_kv(const KvMap& kv) {
    const auto unknown = kv.unknown_keys(kConfigKeys);
    if (!unknown.empty())
        throw ConfigError("unknown config key '" + unknown.front() + "'");

    RunConfig c;
    c.method = method_from_name(kv.get_or("method", "tp"));
    c.objective_kind = kv.get_or("objective", "quadratic");
    if (c.objective_kind != "quadratic" && c.objective_kind != "logistic" &&
        c.objective_kind != "least_squares")
        throw ConfigError("unknown objective '" + c.objective_kind + "'");
    c.dataset_path = kv.get_or("dataset", "");
    if (kv.has("quad_spectrum")) c.quad_spectrum = kv.get_doubles("quad_spectrum");
    c.quad_offset = kv.get_double_or("quad_offset", 0.0);
    c.label_normalize = kv.get_or("label_normalize", "auto");
    if (c.label_normalize != "auto" && c.label_normalize != "binary" &&
        c.label_normalize != "none")
        throw ConfigError("unknown label_normalize '" + c.label_normalize + "'");
    c.scale_features = kv.get_bool_or("scale_features", false);
    if (kv.has("seeds")) c.seeds = kv.get_u64s("seeds");
    if (c.seeds.empty()) throw ConfigError("seeds must be nonempty");
    c.epochs = kv.get_int_or("epochs", 0);
    // unspecified batch size: 32 for empirical-risk objectives, full batch
    // for quadratics (which have no per-example structure)
    c.batch_size = kv.get_int_or("batch_size", c.objective_kind == "quadratic" ? 0 : 32);
    c.test_fraction = kv.get_double_or("test_fraction", 0.0);
    c.split_seed = static_cast<std::uint64_t>(kv.get_int_or("split_seed", 12345));
    c.fstar_mode = fstar_mode_from_name(kv.get_or("fstar_mode", "none"));
    c.fstar_provided = kv.get_double_or("fstar_value", 0.0);
    c.fstar_grad_tol = kv.get_double_or("fstar_grad_tol", 1e-8);
    c.fstar_max_iter = kv.get_int_or("fstar_max_iter", 20000);
    c.init_mode = init_mode_from_name(kv.get_or("init_mode", "gaussian"));
    if (kv.has("x0")) c.x0_provided = kv.get_doubles("x0");
    if (kv.has("y0")) c.y0_provided = kv.get_doubles("y0");
    c.wrap_c = kv.get_double_or("wrap_c", 1.0);
    c.wrap_d = kv.get_double_or("wrap_d", 0.0);
    c.output_path = kv.get_or("output", "");
    c.running_avg_window = kv.get_int_or("running_avg_window", 10);
    c.timings = kv.get_bool_or("timings", false);
    c.jobs = kv.get_int_or("jobs", 1);

    MethodParams& p = c.params;
    if (kv.has("eta")) p.eta = kv.get_double("eta");
    if (kv.has("fstar")) p.fstar = kv.get_double("fstar");
    p.sps_c = kv.get_double_or("sps_c", p.sps_c);
    if (kv.has("gamma")) p.gamma = kv.get_double("gamma");
    p.c0 = kv.get_double_or("c0", p.c0);
    p.eta_b = kv.get_double_or("eta_b", p.eta_b);
    p.lstar = kv.get_double_or("lstar", p.lstar);
    p.beta = kv.get_double_or("beta", p.beta);
    p.sls_c = kv.get_double_or("sls_c", p.sls_c);
    p.eta_max = kv.get_double_or("eta_max", p.eta_max);
    p.alpha = kv.get_double_or("alpha", p.alpha);
    p.epsilon = kv.get_double_or("epsilon", p.epsilon);
    p.tp_multiplier = kv.get_double_or("tp_multiplier", p.tp_multiplier);
    return c;
}

KvMap RunConfig::to_kv() const {
    KvMap kv;
    kv.set("method", method_name(method));
    kv.set("objective", objective_kind);
    if (!dataset_path.empty()) kv.set("dataset", dataset_path);
    if (objective_kind == "quadratic") {
        kv.set("quad_spectrum", join_doubles(quad_spectrum));
        kv.set("quad_offset", quad_offset);
    } else {
        kv.set("label_normalize", label_normalize);
        kv.set("scale_features", scale_features);
    }
    {
        std::string s;
        for (std::size_t i = 0; i < seeds.size(); ++i) {
            if (i) s.push_back(',');
            s += std::to_string(seeds[i]);
        }
        kv.set("seeds", s);
    }
    kv.set("epochs", epochs);
    kv.set("batch_size", batch_size);
    kv.set("test_fraction", test_fraction);
    kv.set("split_seed", static_cast<std::int64_t>(split_seed));
    kv.set("fstar_mode", fstar_mode_name(fstar_mode));
    if (fstar_mode == FstarMode::provided) kv.set("fstar_value", fstar_provided);
    if (fstar_mode == FstarMode::certificate) {
        kv.set("fstar_grad_tol", fstar_grad_tol);
        kv.set("fstar_max_iter", fstar_max_iter);
    }
    kv.set("init_mode", init_mode_name(init_mode));
    if (init_mode == InitMode::provided) {
        kv.set("x0", join_doubles(x0_provided));
        if (!y0_provided.empty()) kv.set("y0", join_doubles(y0_provided));
    }
    if (wrap_c != 1.0 || wrap_d != 0.0) {
        kv.set("wrap_c", wrap_c);
        kv.set("wrap_d", wrap_d);
    }
    if (!output_path.empty()) kv.set("output", output_path);
    kv.set("running_avg_window", running_avg_window);
    kv.set("timings", timings);
    kv.set("jobs", jobs);

    switch (method) {
        case Method::gd:
        case Method::sgd:
            if (params.eta) kv.set("eta", *params.eta);
            break;
        case Method::polyak:
            if (params.fstar) kv.set("fstar", *params.fstar);
            break;
        case Method::spsmax:
            kv.set("sps_c", params.sps_c);
            if (params.gamma) kv.set("gamma", *params.gamma);
            kv.set("lstar", params.lstar);
            break;
        case Method::decsps:
            kv.set("c0", params.c0);
            kv.set("eta_b", params.eta_b);
            kv.set("lstar", params.lstar);
            break;
        case Method::sls:
            kv.set("beta", params.beta);
            kv.set("sls_c", params.sls_c);
            kv.set("eta_max", params.eta_max);
            break;
        case Method::stpm:
            kv.set("alpha", params.alpha);
            kv.set("tp_multiplier", params.tp_multiplier);
            break;
        case Method::tp:
        case Method::stp:
            kv.set("epsilon", params.epsilon);
            kv.set("tp_multiplier", params.tp_multiplier);
            break;
    }
    return kv;
}

BatchScheduler::BatchScheduler(std::uint64_t seed, std::int64_t n, std::int64_t tau)
    : n_(n), tau_(tau), rng_(Rng::stream(seed, kBatchStream)) {
    if (tau_ < 0) throw ConfigError("batch size must be >= 0");
    if (tau_ > 0 && tau_ > n_)
        throw ConfigError("batch_size exceeds the number of training examples");
    steps_per_epoch_ = tau_ == 0 ? 1 : (n_ + tau_ - 1) / tau_;
    if (tau_ > 0) {
        perm_.resize(static_cast<std::size_t>(n_));
        for (std::int64_t i = 0; i < n_; ++i) perm_[i] = i;
    }
}

void BatchScheduler::next_epoch() {
    if (tau_ > 0) rng_.shuffle(perm_);
}

std::optional<BatchIndex> BatchScheduler::batch(std::int64_t s) {
    if (tau_ == 0) return std::nullopt;
    const std::int64_t lo = s * tau_;
    const std::int64_t hi = std::min(lo + tau_, n_);
    std::vector<std::int64_t> block(perm_.begin() + lo, perm_.begin() + hi);
    std::sort(block.begin(), block.end());
    return BatchIndex::from_sorted(std::move(block), n_);
}

std::vector<double> running_average(const std::vector<double>& values, std::int64_t window) {
    if (window < 1) throw ConfigError("running_average: window must be >= 1");
    std::vector<double> out(values.size());
    double acc = 0.0;
    for (std::size_t t = 0; t < values.size(); ++t) {
        acc += values[t];
        if (t >= static_cast<std::size_t>(window)) acc -= values[t - window];
        const auto span = std::min<std::int64_t>(static_cast<std::int64_t>(t) + 1, window);
        out[t] = acc / static_cast<double>(span);
    }
    return out;
}

double test_accuracy(const Vec& x, const SparseDataset& test) {
    if (test.n_examples() == 0)
        throw MetricError("test_accuracy: empty test set");
    std::int64_t correct = 0;
    for (std::int64_t i = 0; i < test.n_examples(); ++i) {
        const double margin = row_dot(test.features, i, x);
        const double pred = margin >= 0.0 ? 1.0 : -1.0;
        if (pred == test.labels[i]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(test.n_examples());
}

PreparedProblem prepare(const RunConfig& config) {
    PreparedProblem prob;
    prob.params = config.params;

    if (config.objective_kind == "quadratic") {
        if (!config.dataset_path.empty())
            throw ConfigError("quadratic objective takes no dataset");
        if (config.batch_size != 0)
            throw ConfigError("quadratic objective has no per-example structure; use batch_size = 0");
        prob.objective =
            std::make_shared<QuadraticObjective>(config.quad_spectrum, config.quad_offset);
    } else {
        if (config.dataset_path.empty())
            throw ConfigError(config.objective_kind + " objective requires a dataset path");
        std::vector<ParseWarning> warnings;
        SparseDataset ds = load_libsvm_file(config.dataset_path, {}, &warnings);
        prob.n_parse_warnings = warnings.size();
        if (config.scale_features) ds = scale_features_maxabs(ds);
        const bool classification = config.objective_kind == "logistic";
        if (classification) {
            if (config.label_normalize == "binary" ||
                (config.label_normalize == "auto" && !labels_are_binary(ds)))
                ds = normalize_labels_binary(ds);
        }
        auto [train, test] = split(ds, config.test_fraction, config.split_seed);
        prob.train = std::make_shared<SparseDataset>(std::move(train));
        prob.test = std::make_shared<SparseDataset>(std::move(test));
        if (classification)
            prob.objective = std::make_shared<LogisticObjective>(prob.train);
        else
            prob.objective = std::make_shared<LeastSquaresObjective>(prob.train);
    }

    if (config.wrap_c != 1.0 || config.wrap_d != 0.0)
        prob.objective = wrap_scale_shift(prob.objective, config.wrap_c, config.wrap_d);

    const std::int64_t n = prob.objective->n_examples();
    if (config.batch_size < 0) throw ConfigError("batch_size must be >= 0");
    if (config.batch_size > 0 && config.batch_size > n)
        throw ConfigError("batch_size exceeds the number of training examples");
    if (config.batch_size > 0 && (config.method == Method::tp || config.method == Method::polyak))
        throw ConfigError(method_name(config.method) +
                          " is a full-batch method; use batch_size = 0 (or its stochastic "
                          "counterpart)");
    prob.steps_per_epoch =
        config.batch_size == 0 ? 1 : (n + config.batch_size - 1) / config.batch_size;
    prob.epochs = config.epochs > 0 ? config.epochs : (config.batch_size == 0 ? 500 : 50);

    if (config.fstar_mode == FstarMode::provided) {
        prob.fstar = config.fstar_provided;
    } else if (config.fstar_mode == FstarMode::certificate) {
        Vec x0(static_cast<std::size_t>(prob.objective->dim()), 0.0);
        prob.fstar_cert =
            estimate_fstar(*prob.objective, x0, config.fstar_grad_tol, config.fstar_max_iter);
        prob.fstar = prob.fstar_cert->fstar;
    }

    // Resolve parameters that need the objective.
    if ((config.method == Method::gd || config.method == Method::sgd) && !prob.params.eta) {
        double L;
        try {
            L = prob.objective->estimate_smoothness();
        } catch (const ConvergenceError& e) {
            throw ConfigError(method_name(config.method) +
                              ": no eta given and the smoothness estimate failed (" + e.what() +
                              ")");
        }
        if (!(L > 0.0))
            throw ConfigError(method_name(config.method) +
                              ": smoothness estimate is zero; provide eta explicitly");
        prob.smoothness = L;
        prob.params.eta = 1.0 / L;
    }
    if (config.method == Method::polyak && !prob.params.fstar) {
        if (!prob.fstar)
            throw ConfigError("polyak: missing required parameter 'fstar' "
                              "(set fstar, fstar_value, or fstar_mode = certificate)");
        prob.params.fstar = *prob.fstar;
    }
    return prob;
}

namespace {

void attach_metrics(const PreparedProblem& prob, const RunConfig& config, Stepper& stepper,
                    TraceRow& row) {
    const double fx = prob.objective->value(stepper.x());
    row.rec.f_full_x = fx;
    double fbest = fx;
    const Vec* best_point = &stepper.x();
    if (stepper.is_twin()) {
        const double fy = prob.objective->value(stepper.y());
        row.rec.f_full_y = fy;
        if (fy < fx) {
            fbest = fy;
            best_point = &stepper.y();
        }
    }
    if (prob.fstar) {
        const double sub = fbest - *prob.fstar;
        row.subopt = sub;
        if (sub < -1e-9 * (1.0 + std::abs(fbest))) row.rec.flags |= kFlagFstarViolated;
    }
    if (config.objective_kind == "logistic" && prob.test && prob.test->n_examples() > 0)
        row.test_acc = test_accuracy(*best_point, *prob.test);
}

}  // namespace

RunTrace run_seed(const PreparedProblem& prob, const RunConfig& config, std::uint64_t seed) {
    RunTrace trace;
    trace.seed = seed;

    const auto d = static_cast<std::size_t>(prob.objective->dim());
    Rng init_rng = Rng::stream(seed, kInitStream);
    Vec x0, y0;
    switch (config.init_mode) {
        case InitMode::gaussian:
            x0 = init_rng.gaussian_vector(d);
            if (method_is_twin(config.method)) y0 = init_rng.gaussian_vector(d);
            break;
        case InitMode::zeros:
            x0.assign(d, 0.0);
            if (method_is_twin(config.method)) y0.assign(d, 0.0);
            break;
        case InitMode::provided:
            x0 = config.x0_provided;
            y0 = config.y0_provided;
            break;
    }

    auto stepper = make_stepper(config.method, prob.params, prob.objective, std::move(x0),
                                std::move(y0));

    BatchScheduler scheduler(seed, prob.objective->n_examples(), config.batch_size);
    const bool deterministic = config.batch_size == 0;
    bool done = false;
    for (std::int64_t epoch = 0; epoch < prob.epochs && !done; ++epoch) {
        scheduler.next_epoch();
        for (std::int64_t s = 0; s < prob.steps_per_epoch; ++s) {
            const std::optional<BatchIndex> batch = scheduler.batch(s);

            TraceRow row;
            row.epoch = epoch;
            const auto t0 = std::chrono::steady_clock::now();
            try {
                row.rec = stepper->step(batch ? &*batch : nullptr);
            } catch (const NumericError& e) {
                trace.diverged = true;
                trace.note = e.what();
            } catch (const LineSearchError& e) {
                trace.diverged = true;
                trace.note = e.what();
            } catch (const InconsistencyError& e) {
                trace.diverged = true;
                trace.note = e.what();
            }
            if (config.timings) {
                const auto t1 = std::chrono::steady_clock::now();
                row.wall_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
            }
            if (trace.diverged) {
                row.rec.flags |= kFlagDiverged;
                row.rec.mover = Mover::none;
                row.rec.eta = 0.0;
                trace.rows.push_back(std::move(row));
                done = true;
                break;
            }

            const bool epoch_end = s + 1 == prob.steps_per_epoch;
            const bool want_metrics = deterministic || epoch_end;
            if (want_metrics) {
                try {
                    attach_metrics(prob, config, *stepper, row);
                } catch (const NumericError& e) {
                    trace.diverged = true;
                    trace.note = e.what();
                    row.rec.flags |= kFlagDiverged;
                }
            }
            const bool stopped_now = stepper->stopped();
            trace.rows.push_back(std::move(row));
            if (trace.diverged || stopped_now) {
                trace.stopped = stopped_now;
                done = true;
                break;
            }
        }
    }

    // Running average over the suboptimality samples actually taken.
    {
        std::vector<double> series;
        for (const auto& row : trace.rows)
            if (row.subopt) series.push_back(*row.subopt);
        if (!series.empty()) {
            const auto avg = running_average(series, config.running_avg_window);
            std::size_t j = 0;
            for (auto& row : trace.rows)
                if (row.subopt) row.subopt_runavg = avg[j++];
        }
    }

    // Final summary at the returned point (the lower twin for twin methods).
    if (!trace.diverged) {
        double fx = prob.objective->value(stepper->x());
        trace.returned_point = Mover::x;
        trace.final_f = fx;
        if (stepper->is_twin()) {
            const double fy = prob.objective->value(stepper->y());
            if (fy < fx) {
                trace.returned_point = Mover::y;
                trace.final_f = fy;
            }
        }
        if (prob.fstar) trace.final_subopt = trace.final_f - *prob.fstar;
    }
    for (auto it = trace.rows.rbegin(); it != trace.rows.rend(); ++it) {
        if (it->subopt_runavg) {
            trace.final_subopt_runavg = it->subopt_runavg;
            break;
        }
    }
    for (auto it = trace.rows.rbegin(); it != trace.rows.rend(); ++it) {
        if (it->test_acc) {
            trace.final_test_acc = it->test_acc;
            break;
        }
    }
    return trace;
}

const char* const kCsvHeader =
    "seed,step,epoch,mover,eta,f_full_x,f_full_y,subopt,subopt_runavg,grad_sq_norm,"
    "test_acc,wall_ms,flags";

std::string trace_to_csv(const RunTrace& trace) {
    std::string out;
    auto opt = [](const std::optional<double>& v) {
        return v ? format_double(*v) : std::string();
    };
    for (const auto& row : trace.rows) {
        out += std::to_string(trace.seed);
        out.push_back(',');
        out += std::to_string(row.rec.k);
        out.push_back(',');
        out += std::to_string(row.epoch);
        out.push_back(',');
        out += mover_name(row.rec.mover);
        out.push_back(',');
        out += format_double(row.rec.eta);
        out.push_back(',');
        out += opt(row.rec.f_full_x);
        out.push_back(',');
        out += opt(row.rec.f_full_y);
        out.push_back(',');
        out += opt(row.subopt);
        out.push_back(',');
        out += opt(row.subopt_runavg);
        out.push_back(',');
        out += opt(row.rec.grad_sq_norm);
        out.push_back(',');
        out += opt(row.test_acc);
        out.push_back(',');
        out += opt(row.wall_ms);
        out.push_back(',');
        out += flags_to_string(row.rec.flags);
        out.push_back('\n');
    }
    return out;
}

KvMap run_metadata(const RunConfig& config, const PreparedProblem& prob) {
    KvMap kv = config.to_kv();
    kv.set("epochs_resolved", prob.epochs);
    kv.set("steps_per_epoch", prob.steps_per_epoch);
    if (prob.train) {
        kv.set("dataset.n_train", prob.train->n_examples());
        kv.set("dataset.n_test", prob.test ? prob.test->n_examples() : 0);
        kv.set("dataset.n_features", prob.train->n_features());
        kv.set("dataset.parse_warnings", static_cast<std::int64_t>(prob.n_parse_warnings));
    }
    if (prob.fstar_cert) {
        kv.set("fstar.value", prob.fstar_cert->fstar);
        kv.set("fstar.method", prob.fstar_cert->method);
        kv.set("fstar.residual_grad_norm", prob.fstar_cert->residual_grad_norm);
        kv.set("fstar.iterations_used", prob.fstar_cert->iterations_used);
        kv.set("fstar.requested_grad_tol", prob.fstar_cert->requested_grad_tol);
    } else if (prob.fstar) {
        kv.set("fstar.value", *prob.fstar);
    }
    if (prob.smoothness) kv.set("smoothness.L", *prob.smoothness);
    if (prob.params.eta) kv.set("eta_resolved", *prob.params.eta);
    kv.set("library.version", kVersion);
    return kv;
}

namespace {

std::ofstream preflight_open(const std::string& path) {
    const auto parent = std::filesystem::path(path).parent_path();
    if (!parent.empty()) {
        std::error_code ec;
        std::filesystem::create_directories(parent, ec);
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open output file " + path);
    return out;
}

}  // namespace

std::vector<RunTrace> run_all(const RunConfig& config, const PreparedProblem& prob) {
    // Preflight all outputs before burning compute.
    std::vector<std::ofstream> csv_files;
    std::ofstream meta_file;
    if (!config.output_path.empty()) {
        for (const auto seed : config.seeds)
            csv_files.push_back(
                preflight_open(config.output_path + "_seed" + std::to_string(seed) + ".csv"));
        meta_file = preflight_open(config.output_path + ".meta");
    }

    std::vector<RunTrace> traces(config.seeds.size());
    const std::int64_t jobs = std::max<std::int64_t>(1, config.jobs);
    if (jobs == 1 || config.seeds.size() == 1) {
        for (std::size_t i = 0; i < config.seeds.size(); ++i)
            traces[i] = run_seed(prob, config, config.seeds[i]);
    } else {
        std::vector<std::future<RunTrace>> futures(config.seeds.size());
        std::size_t next = 0;
        while (next < config.seeds.size()) {
            const std::size_t batch_end =
                std::min(next + static_cast<std::size_t>(jobs), config.seeds.size());
            for (std::size_t i = next; i < batch_end; ++i)
                futures[i] = std::async(std::launch::async, [&prob, &config, i]() {
                    return run_seed(prob, config, config.seeds[i]);
                });
            for (std::size_t i = next; i < batch_end; ++i) traces[i] = futures[i].get();
            next = batch_end;
        }
    }

    if (!config.output_path.empty()) {
        for (std::size_t i = 0; i < traces.size(); ++i) {
            csv_files[i] << kCsvHeader << '\n' << trace_to_csv(traces[i]);
            if (!csv_files[i]) throw IoError("write failed for seed CSV");
        }
        meta_file << run_metadata(config, prob).serialize();
        if (!meta_file) throw IoError("write failed for metadata file");
    }
    return traces;
}

std::vector<RunTrace> run_all(const RunConfig& config) {
    const PreparedProblem prob = prepare(config);
    return run_all(config, prob);
}

}  // namespace tp
