#pragma once

#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "tp/objectives.hpp"

namespace tp {

enum class Method { gd, polyak, tp, sgd, spsmax, decsps, sls, stp, stpm };

Method method_from_name(const std::string& name);
std::string method_name(Method m);
bool method_is_twin(Method m);
bool method_is_stochastic(Method m);

/// Per-method hyperparameters. Fields left unset fall back to the documented
/// defaults during resolve; genuinely required fields (sgd/gd stepsize when no
/// smoothness estimate is possible, spsmax gamma) raise ConfigError.
struct MethodParams {
    std::optional<double> eta;          // gd / sgd
    std::optional<double> fstar;        // polyak
    double sps_c = 0.5;                 // spsmax curvature constant
    std::optional<double> gamma;        // spsmax stepsize cap; +inf disables clipping
    double c0 = 1.0;                    // decsps schedule scale
    double eta_b = 10.0;                // decsps stepsize bound at k=0
    double lstar = 0.0;                 // decsps / spsmax batch lower bound
    double beta = 0.9;                  // sls backtracking factor
    double sls_c = 0.1;                 // sls sufficient-decrease constant
    double eta_max = 1.0;               // sls initial stepsize (restarted every step)
    double alpha = 0.9;                 // stpm momentum
    double tp_multiplier = 2.0;         // twin stepsize multiplier
    double epsilon = 0.0;               // twin gap threshold; 0 = 1e-12*(1+|f(x0)|)
};

enum class Mover { none, x, y };

std::string mover_name(Mover m);

// StepRecord.flags bits.
enum StepFlag : std::uint32_t {
    kFlagSkip = 1u << 0,           // twin gap below epsilon in a stochastic method
    kFlagDegenerateGrad = 1u << 1, // zero gradient; step skipped or clipped
    kFlagClipped = 1u << 2,        // spsmax took the gamma branch
    kFlagStop = 1u << 3,           // deterministic twin stop rule fired
    kFlagDiverged = 1u << 4,       // non-finite value encountered (harness-set)
    kFlagFstarViolated = 1u << 5,  // observed f below the certificate (harness-set)
};

std::string flags_to_string(std::uint32_t flags);

struct StepRecord {
    std::int64_t k = 0;
    Mover mover = Mover::none;
    double eta = 0.0;
    std::optional<double> f_full_x;  // harness-filled at metric boundaries
    std::optional<double> f_full_y;
    std::optional<double> grad_sq_norm;  // absent when no gradient was evaluated
    std::optional<double> batch_loss_mover;
    bool stop_flag = false;
    std::uint32_t flags = 0;
};

/// Paired iterates with their most recent (full or batch) values.
struct TwinState {
    Vec x;
    Vec y;
    double fx = 0.0;
    double fy = 0.0;
    std::int64_t k = 0;
};

/// EMA accumulators behind the stochastic twin surrogate
/// h_p = fbar_p + <g_p, p> - z_p. `dfbar` tracks fbar_x - fbar_y directly
/// (accumulated from per-batch gaps) so the surrogate difference that drives
/// the step never subtracts two large near-equal totals.
struct MomentumAccumulators {
    double fbar_x = 0.0;
    double fbar_y = 0.0;
    double dfbar = 0.0;
    Vec g_x;
    Vec g_y;
    double z_x = 0.0;
    double z_y = 0.0;
    bool initialized = false;
};

// ---- Elementary step rules -------------------------------------------------

/// x - eta * grad.
Vec gd_step(const Vec& x, const Vec& grad, double eta);

struct ScalarStep {
    Vec x;
    double eta;
};

/// eta = (fx - fstar) / ||grad||^2.
ScalarStep polyak_step(const Vec& x, double fx, double fstar, const Vec& grad);

/// eta = min{ (f_batch - fstar_batch) / (c ||grad||^2), gamma }. A zero batch
/// gradient with a positive gap takes the gamma branch (clipped=true).
struct SpsStep {
    Vec x;
    double eta;
    bool clipped;
};
SpsStep sps_max_step(const Vec& x, double f_batch, double fstar_batch, const Vec& grad_batch,
                     double c, double gamma);

/// Recursive decreasing stepsize with schedule c_k = c0 sqrt(k+1); the k=0
/// bound is seeded with c0 * eta_b.
struct DecSpsStep {
    Vec x;
    double eta;
    double c_k;
};
DecSpsStep decsps_step(const Vec& x, double f_batch, double lstar, const Vec& grad_batch,
                       std::int64_t k, double c0, double eta_b, double prev_c,
                       double prev_eta);

/// Armijo backtracking from eta_max on the provided evaluation closure
/// (called on the same batch as the gradient). Throws LineSearchError after
/// 200 shrinks.
struct ArmijoStep {
    Vec x;
    double eta;
    int n_backtracks;
    double f0;  // f_eval(x), reused by callers for trace records
};
template <typename F>
ArmijoStep sls_armijo_step(const Vec& x, F&& f_eval, const Vec& grad_batch, double beta,
                           double c, double eta_max);

// ---- Uniform stepping interface ---------------------------------------------

/// One optimization run's mutable state behind a method-agnostic interface.
/// `batch == nullptr` means "use the full objective"; a non-null batch routes
/// every oracle through the mini-batch path.
class Stepper {
  public:
    virtual ~Stepper() = default;
    virtual StepRecord step(const BatchIndex* batch) = 0;
    virtual const Vec& x() const = 0;
    virtual const Vec& y() const;  // throws for single-sequence methods
    virtual bool is_twin() const = 0;
    virtual bool stopped() const { return false; }
    virtual Method method() const = 0;
};

/// Validates parameters and builds the stepping closure. `y0` may be empty
/// for single-sequence methods. Resolution of defaults that need the
/// objective (sgd eta = 1/L) happens here.
std::unique_ptr<Stepper> make_stepper(Method method, const MethodParams& params,
                                      std::shared_ptr<const Objective> obj, Vec x0, Vec y0);

// ---- template implementation ----

template <typename F>
ArmijoStep sls_armijo_step(const Vec& x, F&& f_eval, const Vec& grad_batch, double beta,
                           double c, double eta_max) {
    if (!(beta > 0.0 && beta < 1.0)) throw ConfigError("sls: beta must be in (0,1)");
    if (!(c > 0.0 && c < 1.0)) throw ConfigError("sls: c must be in (0,1)");
    if (!(eta_max > 0.0)) throw ConfigError("sls: eta_max must be positive");
    const double fx = f_eval(x);
    const double gn2 = norm_sq(grad_batch);
    double eta = eta_max;
    Vec trial(x.size());
    for (int j = 0; j <= 200; ++j) {
        for (std::size_t i = 0; i < x.size(); ++i) trial[i] = x[i] - eta * grad_batch[i];
        double ft;
        try {
            ft = f_eval(trial);
        } catch (const NumericError&) {
            ft = std::numeric_limits<double>::infinity();
        }
        if (ft <= fx - c * eta * gn2) return {std::move(trial), eta, j, fx};
        eta *= beta;
    }
    throw LineSearchError("sls: no sufficient decrease within 200 backtracks", eta);
}

}  // namespace tp
