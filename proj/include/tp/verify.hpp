#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "tp/objectives.hpp"
#include "tp/steppers.hpp"

namespace tp {

/// Trace-measured stand-ins for the existential constants of the twin-gap
/// and twin-floor assumptions, plus the gradient bound.
struct AssumptionConstants {
    double a_min = 0.0;  // min |f(x)-f(y)| / (max(f(x),f(y)) - f*)
    double b_min = 0.0;  // min (min(f(x),f(y)) - f*) / (max(f(x),f(y)) - f*)
    double g_max = 0.0;  // max observed gradient norm
};

struct RateReport {
    std::string claim;
    std::vector<double> bound_values;
    std::vector<double> observed_values;
    bool satisfied = false;
    double worst_margin = 0.0;
    bool skipped = false;
    std::string skip_reason;
    bool assumption_violated = false;  // twin values collapsed onto f*
    std::vector<std::pair<std::string, std::string>> details;
};

/// Exact-alternation check on a diagonal quadratic: per-step M-norm ratio
/// flip (1e-10 relative), mover alternation, decrease of the moved twin below
/// the stayer, and agreement of max(f)-offset with the closed-form scalar
/// recursion s <- t^2/s (1e-9 relative).
RateReport check_lemma1(const Vec& spectrum, double offset, const Vec& x0, const Vec& y0,
                        std::int64_t steps);

/// Per-move contraction of ||p - x*||^2 on a positive diagonal quadratic:
/// nonincreasing (1e-12 relative slack) and bounded by
/// (1 - a_min * mu / L)^moves with a_min measured along the trace (1e-8 slack).
RateReport check_theorem1(const Vec& spectrum, const Vec& x0, const Vec& y0,
                          std::int64_t steps);

/// Sublinear rate on a convex objective with bounded gradients:
/// min_{t<=k} f(x^t) - f* <= G_max ||x0 - x*|| / (2 sqrt(a_min b_min k)) for
/// every k, with f* and x* from a gradient-descent certificate. Reports an
/// assumption violation (vacuous pass) if a_min or b_min collapses to 0.
RateReport check_lemma2(std::shared_ptr<const Objective> obj, const Vec& x0, const Vec& y0,
                        std::int64_t steps, double cert_grad_tol,
                        std::int64_t cert_max_iter);

/// Runs `method` on obj and on wrap_c * obj + wrap_d from identical inits and
/// batch sequences; asserts identical mover choices and coordinatewise iterate
/// agreement to 1e-9 relative. Twin methods only.
RateReport check_invariance(std::shared_ptr<const Objective> obj, Method method, double wrap_c,
                            double wrap_d, std::uint64_t seed, std::int64_t epochs,
                            std::int64_t batch_size);

/// Central finite differences against the analytic gradient on random points
/// and directions; 1e-6 relative per trial.
RateReport check_gradients(std::shared_ptr<const Objective> obj, std::int64_t trials,
                           std::uint64_t seed);

struct SuiteResult {
    std::string suite;
    std::vector<std::pair<std::string, RateReport>> checks;
    bool all_ok() const;
};

/// Known suites: gradients, lemma1, theorem1, lemma2, invariance, all.
/// Unknown names raise ConfigError. data_dir must contain the benchmark
/// datasets for the suites that need them.
std::vector<SuiteResult> run_suites(const std::vector<std::string>& names,
                                    std::uint64_t seed, const std::string& data_dir);

std::string format_report_human(const std::string& name, const RateReport& r);
void append_report_kv(class KvMap& kv, const std::string& name, const RateReport& r);

}  // namespace tp
