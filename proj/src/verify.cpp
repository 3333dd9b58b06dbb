#include "tp/verify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "tp/dataio.hpp"
#include "tp/harness.hpp"
#include "tp/kvconfig.hpp"
#include "tp/rng.hpp"

namespace tp {

namespace {

struct TwinSample {
    double fx, fy;
    Mover mover;
    double eta;
    double grad_sq_norm;
};

// Runs a twin stepper and snapshots values/iterates around every step.
struct TwinTrace {
    std::vector<TwinSample> samples;
    std::vector<Vec> xs;  // xs[k] = x after k steps (xs[0] = x0)
    std::vector<Vec> ys;
    bool stopped = false;
};

TwinTrace run_twin(const Objective& obj, Method method, const MethodParams& params,
                   const Vec& x0, const Vec& y0, std::int64_t steps) {
    auto obj_ptr = std::shared_ptr<const Objective>(&obj, [](const Objective*) {});
    auto stepper = make_stepper(method, params, obj_ptr, x0, y0);
    TwinTrace trace;
    trace.xs.push_back(stepper->x());
    trace.ys.push_back(stepper->y());
    for (std::int64_t k = 0; k < steps; ++k) {
        StepRecord rec = stepper->step(nullptr);
        if (rec.stop_flag) {
            trace.stopped = true;
            break;
        }
        TwinSample s;
        s.fx = obj.value(trace.xs.back());
        s.fy = obj.value(trace.ys.back());
        s.mover = rec.mover;
        s.eta = rec.eta;
        s.grad_sq_norm = rec.grad_sq_norm.value_or(0.0);
        trace.samples.push_back(s);
        trace.xs.push_back(stepper->x());
        trace.ys.push_back(stepper->y());
    }
    return trace;
}

}  // namespace

RateReport check_lemma1(const Vec& spectrum, double offset, const Vec& x0, const Vec& y0,
                        std::int64_t steps) {
    RateReport report;
    report.claim = "quadratic twin dynamics: ratio flip, alternation, closed-form contraction";
    QuadraticObjective obj(spectrum, offset);
    const double fx0 = obj.value(x0);
    const double fy0 = obj.value(y0);
    if (fx0 == fy0) {
        report.skipped = true;
        report.skip_reason = "equal initial values";
        return report;
    }

    MethodParams params;
    const TwinTrace trace = run_twin(obj, Method::tp, params, x0, y0, steps);

    // Independent scalar oracle: the closed-form recursion on the M-norms.
    double s_cf = obj.m_norm_sq(x0);
    double t_cf = obj.m_norm_sq(y0);

    bool ok = true;
    double worst = 0.0;
    Mover prev_mover = Mover::none;
    for (std::size_t k = 0; k < trace.samples.size(); ++k) {
        const TwinSample& smp = trace.samples[k];
        const double s_before = obj.m_norm_sq(trace.xs[k]);
        const double t_before = obj.m_norm_sq(trace.ys[k]);
        const double s_after = obj.m_norm_sq(trace.xs[k + 1]);
        const double t_after = obj.m_norm_sq(trace.ys[k + 1]);

        // (i) ratio flip
        const double flip = (s_after / t_after) * (s_before / t_before);
        const double flip_margin = std::abs(flip - 1.0);
        worst = std::max(worst, flip_margin);
        if (flip_margin > 1e-10) ok = false;

        // (ii) alternation, and the moved twin lands below the stayer
        if (prev_mover != Mover::none && smp.mover == prev_mover) ok = false;
        prev_mover = smp.mover;
        const double f_moved =
            smp.mover == Mover::x ? 0.5 * s_after + offset : 0.5 * t_after + offset;
        const double f_stayer = smp.mover == Mover::x ? smp.fy : smp.fx;
        if (!(f_moved < f_stayer)) ok = false;

        // (iii) suboptimality of the worse twin tracks the closed form,
        // relative to the oracle value even as both decay over many decades
        if (s_cf > t_cf)
            s_cf = t_cf * t_cf / s_cf;
        else
            t_cf = s_cf * s_cf / t_cf;
        const double oracle_max = 0.5 * std::max(s_cf, t_cf);
        const double observed_max = 0.5 * std::max(s_after, t_after);
        report.bound_values.push_back(oracle_max);
        report.observed_values.push_back(observed_max);
        const double cf_margin =
            std::abs(observed_max - oracle_max) / std::max(oracle_max, 1e-300);
        worst = std::max(worst, cf_margin);
        if (cf_margin > 1e-9) ok = false;
    }
    report.satisfied = ok && !trace.samples.empty();
    report.worst_margin = worst;
    report.details.emplace_back("steps", std::to_string(trace.samples.size()));
    return report;
}

RateReport check_theorem1(const Vec& spectrum, const Vec& x0, const Vec& y0,
                          std::int64_t steps) {
    RateReport report;
    report.claim = "per-move contraction of ||p - x*||^2 at rate (1 - a_min mu / L)";
    for (double m : spectrum)
        if (!(m > 0.0)) throw ConfigError("check_theorem1: spectrum must be positive");
    QuadraticObjective obj(spectrum, 0.0);
    const double mu = *std::min_element(spectrum.begin(), spectrum.end());
    const double L = *std::max_element(spectrum.begin(), spectrum.end());

    MethodParams params;
    const TwinTrace trace = run_twin(obj, Method::tp, params, x0, y0, steps);
    if (trace.samples.empty()) {
        // already at the stop rule: distances are degenerate, nothing to refute
        report.satisfied = true;
        report.details.emplace_back("steps", "0");
        return report;
    }

    // Measured twin-gap ratio a over the trace (f* = 0 by construction).
    double a_min = std::numeric_limits<double>::infinity();
    double eta_floor_ratio = std::numeric_limits<double>::infinity();
    for (const auto& smp : trace.samples) {
        const double fmax = std::max(smp.fx, smp.fy);
        if (fmax <= 0.0) continue;
        a_min = std::min(a_min, std::abs(smp.fx - smp.fy) / fmax);
        if (smp.eta > 0.0) eta_floor_ratio = std::min(eta_floor_ratio, smp.eta * L);
    }
    if (!std::isfinite(a_min)) {
        report.satisfied = true;
        report.details.emplace_back("note", "iterates already optimal");
        return report;
    }

    const double factor = 1.0 - a_min * mu / L;
    bool ok = true;
    double worst = 0.0;
    for (int seq = 0; seq < 2; ++seq) {
        const auto& points = seq == 0 ? trace.xs : trace.ys;
        const Mover who = seq == 0 ? Mover::x : Mover::y;
        const double d0 = norm_sq(points[0]);
        std::int64_t moves = 0;
        double bound = d0;
        for (std::size_t k = 0; k < trace.samples.size(); ++k) {
            if (trace.samples[k].mover != who) continue;
            const double before = norm_sq(points[k]);
            const double after = norm_sq(points[k + 1]);
            if (after > before * (1.0 + 1e-12)) ok = false;
            // per-move factor, not just the cumulative product
            if (after > before * (factor + 1e-10)) ok = false;
            worst = std::max(worst, after / std::max(before, 1e-300) - 1.0);
            ++moves;
            bound *= factor;
            report.bound_values.push_back(bound);
            report.observed_values.push_back(after);
            if (after > bound * (1.0 + 1e-8)) ok = false;
        }
        (void)moves;
    }
    report.satisfied = ok;
    report.worst_margin = worst;
    report.details.emplace_back("a_min", format_double(a_min));
    report.details.emplace_back("mu_over_L", format_double(mu / L));
    // Informational: smallest observed eta * L against the a_min floor.
    report.details.emplace_back("eta_L_min", format_double(eta_floor_ratio));
    return report;
}

RateReport check_lemma2(std::shared_ptr<const Objective> obj, const Vec& x0, const Vec& y0,
                        std::int64_t steps, double cert_grad_tol,
                        std::int64_t cert_max_iter) {
    RateReport report;
    report.claim = "min_t f(x^t) - f* <= G ||x0 - x*|| / (2 sqrt(a b k))";

    Vec zero(static_cast<std::size_t>(obj->dim()), 0.0);
    const FStarCertificate cert = estimate_fstar(*obj, zero, cert_grad_tol, cert_max_iter);
    const double fstar = cert.fstar;

    MethodParams params;
    const TwinTrace trace = run_twin(*obj, Method::tp, params, x0, y0, steps);
    if (trace.samples.empty()) {
        report.skipped = true;
        report.skip_reason = "no steps executed";
        return report;
    }

    AssumptionConstants c;
    c.a_min = std::numeric_limits<double>::infinity();
    c.b_min = std::numeric_limits<double>::infinity();
    for (const auto& smp : trace.samples) {
        const double fmax = std::max(smp.fx, smp.fy) - fstar;
        const double fmin = std::min(smp.fx, smp.fy) - fstar;
        if (fmax <= 0.0) {
            c.a_min = 0.0;
            c.b_min = 0.0;
            break;
        }
        c.a_min = std::min(c.a_min, std::abs(smp.fx - smp.fy) / fmax);
        c.b_min = std::min(c.b_min, fmin / fmax);
        c.g_max = std::max(c.g_max, std::sqrt(smp.grad_sq_norm));
    }
    report.details.emplace_back("a_min", format_double(c.a_min));
    report.details.emplace_back("b_min", format_double(c.b_min));
    report.details.emplace_back("g_max", format_double(c.g_max));
    report.details.emplace_back("fstar", format_double(fstar));
    report.details.emplace_back("fstar_residual", format_double(cert.residual_grad_norm));

    if (!(c.a_min > 0.0) || !(c.b_min > 0.0)) {
        report.assumption_violated = true;
        report.satisfied = true;  // vacuous: the bound's premise failed on this trace
        report.details.emplace_back("note", "assumption violated on this trace");
        return report;
    }

    const double r0 = std::sqrt(norm_sq(axpy(-1.0, cert.minimizer, x0)));
    report.details.emplace_back("x0_to_xstar", format_double(r0));

    bool ok = true;
    double worst = -std::numeric_limits<double>::infinity();
    double best_so_far = std::numeric_limits<double>::infinity();
    for (std::size_t k = 1; k <= trace.samples.size(); ++k) {
        best_so_far = std::min(best_so_far, obj->value(trace.xs[k]) - fstar);
        const double bound =
            c.g_max * r0 / (2.0 * std::sqrt(c.a_min * c.b_min * static_cast<double>(k)));
        report.bound_values.push_back(bound);
        report.observed_values.push_back(best_so_far);
        if (best_so_far > bound + 1e-12 * (1.0 + std::abs(bound))) ok = false;
        worst = std::max(worst, best_so_far / bound);
    }
    report.satisfied = ok;
    report.worst_margin = worst;
    return report;
}

RateReport check_invariance(std::shared_ptr<const Objective> obj, Method method, double wrap_c,
                            double wrap_d, std::uint64_t seed, std::int64_t epochs,
                            std::int64_t batch_size) {
    if (!method_is_twin(method))
        throw ConfigError("check_invariance: method must be one of tp/stp/stpm");
    RateReport report;
    report.claim = "identical movers and iterates under f -> c f + d";
    report.details.emplace_back("method", method_name(method));
    report.details.emplace_back("c", format_double(wrap_c));
    report.details.emplace_back("d", format_double(wrap_d));

    auto wrapped = wrap_scale_shift(obj, wrap_c, wrap_d);
    const auto d = static_cast<std::size_t>(obj->dim());
    Rng init_rng = Rng::stream(seed, 1);
    const Vec x0 = init_rng.gaussian_vector(d);
    const Vec y0 = init_rng.gaussian_vector(d);

    MethodParams params;
    auto base = make_stepper(method, params, obj, x0, y0);
    auto transformed = make_stepper(method, params, wrapped, x0, y0);

    BatchScheduler scheduler(seed, obj->n_examples(), batch_size);

    bool ok = true;
    double worst = 0.0;
    auto compare_points = [&](const Vec& u, const Vec& v) {
        for (std::size_t i = 0; i < u.size(); ++i) {
            const double dev = std::abs(u[i] - v[i]) / (1.0 + std::max(std::abs(u[i]), std::abs(v[i])));
            worst = std::max(worst, dev);
            if (dev > 1e-9) ok = false;
        }
    };

    std::int64_t mover_mismatches = 0;
    for (std::int64_t epoch = 0; epoch < epochs; ++epoch) {
        scheduler.next_epoch();
        for (std::int64_t s = 0; s < scheduler.steps_per_epoch(); ++s) {
            const std::optional<BatchIndex> batch = scheduler.batch(s);
            const StepRecord ra = base->step(batch ? &*batch : nullptr);
            const StepRecord rb = transformed->step(batch ? &*batch : nullptr);
            if (ra.mover != rb.mover || ra.stop_flag != rb.stop_flag) {
                ok = false;
                ++mover_mismatches;
            }
            compare_points(base->x(), transformed->x());
            compare_points(base->y(), transformed->y());
            if (base->stopped() || transformed->stopped()) {
                epoch = epochs;
                break;
            }
        }
        report.observed_values.push_back(worst);
    }
    report.satisfied = ok;
    report.worst_margin = worst;
    report.details.emplace_back("mover_mismatches", std::to_string(mover_mismatches));
    return report;
}

RateReport check_gradients(std::shared_ptr<const Objective> obj, std::int64_t trials,
                           std::uint64_t seed) {
    if (trials < 1) throw ConfigError("check_gradients: trials must be >= 1");
    RateReport report;
    report.claim = "central finite differences match analytic gradients to 1e-6 relative";
    report.details.emplace_back("kind", obj->kind());

    Rng rng = Rng::stream(seed, 3);
    const auto d = static_cast<std::size_t>(obj->dim());
    const double h = 1e-6;
    bool ok = true;
    double worst = 0.0;
    for (std::int64_t t = 0; t < trials; ++t) {
        const Vec x = rng.gaussian_vector(d);
        Vec u = rng.gaussian_vector(d);
        scale_inplace(1.0 / std::sqrt(norm_sq(u)), u);
        const double fp = obj->value(axpy(h, u, x));
        const double fm = obj->value(axpy(-h, u, x));
        const double fd = (fp - fm) / (2.0 * h);
        const Vec g = obj->gradient(x);
        const double ip = dot(g, u);
        // error relative to the gradient scale: a random direction can have a
        // near-zero component, which says nothing about gradient correctness
        const double rel = std::abs(fd - ip) / std::max(std::sqrt(norm_sq(g)), 1e-12);
        report.observed_values.push_back(rel);
        worst = std::max(worst, rel);
        if (rel > 1e-6) ok = false;
    }
    report.bound_values.assign(report.observed_values.size(), 1e-6);
    report.satisfied = ok;
    report.worst_margin = worst;
    return report;
}

bool SuiteResult::all_ok() const {
    for (const auto& [name, r] : checks)
        if (!r.skipped && !r.satisfied) return false;
    return true;
}

namespace {

std::shared_ptr<const SparseDataset> load_classification(const std::string& path) {
    SparseDataset ds = load_libsvm_file(path);
    if (!labels_are_binary(ds)) ds = normalize_labels_binary(ds);
    return std::make_shared<SparseDataset>(std::move(ds));
}

SuiteResult suite_gradients(std::uint64_t seed, const std::string& data_dir) {
    SuiteResult suite{"gradients", {}, };
    Rng rng = Rng::stream(seed, 40);
    Vec spectrum(20);
    for (auto& m : spectrum) m = rng.uniform(0.1, 10.0);
    auto quad = std::make_shared<QuadraticObjective>(spectrum, 1.5);
    suite.checks.emplace_back("quadratic", check_gradients(quad, 50, seed));

    auto a1a = load_classification(data_dir + "/a1a.libsvm");
    suite.checks.emplace_back("logistic",
                              check_gradients(std::make_shared<LogisticObjective>(a1a), 50, seed));

    auto housing = std::make_shared<SparseDataset>(load_libsvm_file(data_dir + "/housing.libsvm"));
    suite.checks.emplace_back(
        "least_squares",
        check_gradients(std::make_shared<LeastSquaresObjective>(housing), 50, seed));
    return suite;
}

SuiteResult suite_lemma1(std::uint64_t seed) {
    SuiteResult suite{"lemma1", {}};
    suite.checks.emplace_back("identity-2d",
                              check_lemma1({1.0, 1.0}, 0.0, {2.0, 0.0}, {1.0, 0.0}, 20));

    Rng rng = Rng::stream(seed, 41);
    bool isotropic_ok = true;
    double worst = 0.0;
    for (int i = 0; i < 20; ++i) {
        const auto d = static_cast<std::size_t>(1 + rng.below(50));
        const Vec spectrum(d, rng.uniform(0.1, 10.0));
        const double offset = rng.uniform(-5.0, 5.0);
        const Vec x0 = rng.gaussian_vector(d);
        const Vec y0 = rng.gaussian_vector(d);
        RateReport r = check_lemma1(spectrum, offset, x0, y0, 100);
        if (r.skipped) continue;
        isotropic_ok = isotropic_ok && r.satisfied;
        worst = std::max(worst, r.worst_margin);
    }
    RateReport iso;
    iso.claim = "exact alternation on random isotropic quadratics";
    iso.satisfied = isotropic_ok;
    iso.worst_margin = worst;
    suite.checks.emplace_back("isotropic-random", std::move(iso));

    // Anisotropic spectra sit outside the exact-alternation regime: the
    // closed-form recursion requires gradients parallel to the iterate. The
    // oracle comparison is expected to fail and we assert exactly that.
    RateReport aniso = check_lemma1({4.0, 1.0}, 0.0, {1.0, 1.0}, {0.5, 0.25}, 20);
    RateReport aniso_expected;
    aniso_expected.claim = "anisotropic spectrum diverges from the closed form (expected)";
    aniso_expected.satisfied = !aniso.satisfied;
    aniso_expected.worst_margin = aniso.worst_margin;
    suite.checks.emplace_back("anisotropic-counterexample", std::move(aniso_expected));

    suite.checks.emplace_back("degenerate-init",
                              check_lemma1({1.0, 1.0}, 0.0, {1.0, 0.0}, {-1.0, 0.0}, 20));
    return suite;
}

SuiteResult suite_theorem1(std::uint64_t seed) {
    SuiteResult suite{"theorem1", {}};
    for (std::uint64_t s = 0; s < 5; ++s) {
        Rng rng = Rng::stream(seed + s, 42);
        const Vec x0 = rng.gaussian_vector(2);
        const Vec y0 = rng.gaussian_vector(2);
        suite.checks.emplace_back("spectrum-10-1-seed" + std::to_string(s),
                                  check_theorem1({10.0, 1.0}, x0, y0, 200));
    }
    suite.checks.emplace_back("at-optimum",
                              check_theorem1({10.0, 1.0}, {0.0, 0.0}, {0.0, 0.0}, 50));
    return suite;
}

SuiteResult suite_lemma2(std::uint64_t seed, const std::string& data_dir) {
    SuiteResult suite{"lemma2", {}};
    auto data = load_classification(data_dir + "/colon-cancer.libsvm");
    auto obj = std::make_shared<LogisticObjective>(data);
    Rng rng = Rng::stream(seed, 43);
    const Vec x0 = rng.gaussian_vector(static_cast<std::size_t>(obj->dim()));
    const Vec y0 = rng.gaussian_vector(static_cast<std::size_t>(obj->dim()));
    suite.checks.emplace_back("colon-cancer-logistic",
                              check_lemma2(obj, x0, y0, 500, 1e-10, 20000));
    return suite;
}

SuiteResult suite_invariance(std::uint64_t seed, const std::string& data_dir) {
    SuiteResult suite{"invariance", {}};
    auto data = load_classification(data_dir + "/a1a.libsvm");
    auto obj = std::make_shared<LogisticObjective>(data);
    const struct {
        double c, d;
        const char* tag;
    } transforms[] = {{1000.0, -7.0, "c1e3"}, {1e-6, 1e6, "c1e-6"}};
    for (const auto& tr : transforms) {
        suite.checks.emplace_back(std::string("tp-") + tr.tag,
                                  check_invariance(obj, Method::tp, tr.c, tr.d, seed, 50, 0));
        suite.checks.emplace_back(std::string("stp-") + tr.tag,
                                  check_invariance(obj, Method::stp, tr.c, tr.d, seed, 50, 32));
        suite.checks.emplace_back(std::string("stpm-") + tr.tag,
                                  check_invariance(obj, Method::stpm, tr.c, tr.d, seed, 50, 32));
    }
    return suite;
}

}  // namespace

std::vector<SuiteResult> run_suites(const std::vector<std::string>& names, std::uint64_t seed,
                                    const std::string& data_dir) {
    std::vector<std::string> expanded;
    for (const auto& name : names) {
        if (name == "all") {
            expanded.insert(expanded.end(),
                            {"gradients", "lemma1", "theorem1", "lemma2", "invariance"});
        } else if (name == "gradients" || name == "lemma1" || name == "theorem1" ||
                   name == "lemma2" || name == "invariance") {
            expanded.push_back(name);
        } else {
            throw ConfigError("verify suite '" + name + "' does not exist");
        }
    }
    std::vector<SuiteResult> out;
    for (const auto& name : expanded) {
        if (name == "gradients") out.push_back(suite_gradients(seed, data_dir));
        else if (name == "lemma1") out.push_back(suite_lemma1(seed));
        else if (name == "theorem1") out.push_back(suite_theorem1(seed));
        else if (name == "lemma2") out.push_back(suite_lemma2(seed, data_dir));
        else out.push_back(suite_invariance(seed, data_dir));
    }
    return out;
}

std::string format_report_human(const std::string& name, const RateReport& r) {
    std::string line = "[" + name + "] ";
    if (r.skipped) {
        line += "SKIP (" + r.skip_reason + ")";
    } else {
        line += r.satisfied ? "PASS" : "FAIL";
        line += " worst_margin=" + format_double(r.worst_margin);
        if (r.assumption_violated) line += " (assumption violated; vacuous)";
    }
    for (const auto& [k, v] : r.details) line += " " + k + "=" + v;
    return line;
}

void append_report_kv(KvMap& kv, const std::string& name, const RateReport& r) {
    kv.set(name + ".satisfied", r.satisfied);
    kv.set(name + ".skipped", r.skipped);
    if (r.skipped) kv.set(name + ".skip_reason", r.skip_reason);
    kv.set(name + ".worst_margin", r.worst_margin);
    if (r.assumption_violated) kv.set(name + ".assumption_violated", true);
    for (const auto& [k, v] : r.details) kv.set(name + "." + k, v);
}

}  // namespace tp
