#include "tp/steppers.hpp"

#include <cmath>

namespace tp {

namespace {

constexpr double kDegenerateGradSq = 1e-300;

}  // namespace

Method method_from_name(const std::string& name) {
    if (name == "gd") return Method::gd;
    if (name == "polyak") return Method::polyak;
    if (name == "tp") return Method::tp;
    if (name == "sgd") return Method::sgd;
    if (name == "spsmax") return Method::spsmax;
    if (name == "decsps") return Method::decsps;
    if (name == "sls") return Method::sls;
    if (name == "stp") return Method::stp;
    if (name == "stpm") return Method::stpm;
    throw ConfigError("unknown method '" + name + "'");
}

std::string method_name(Method m) {
    switch (m) {
        case Method::gd: return "gd";
        case Method::polyak: return "polyak";
        case Method::tp: return "tp";
        case Method::sgd: return "sgd";
        case Method::spsmax: return "spsmax";
        case Method::decsps: return "decsps";
        case Method::sls: return "sls";
        case Method::stp: return "stp";
        case Method::stpm: return "stpm";
    }
    return "?";
}

bool method_is_twin(Method m) {
    return m == Method::tp || m == Method::stp || m == Method::stpm;
}

bool method_is_stochastic(Method m) {
    return m == Method::sgd || m == Method::spsmax || m == Method::decsps ||
           m == Method::sls || m == Method::stp || m == Method::stpm;
}

std::string mover_name(Mover m) {
    switch (m) {
        case Mover::none: return "none";
        case Mover::x: return "x";
        case Mover::y: return "y";
    }
    return "?";
}

std::string flags_to_string(std::uint32_t flags) {
    std::string out;
    auto add = [&](const char* name) {
        if (!out.empty()) out.push_back(';');
        out += name;
    };
    if (flags & kFlagSkip) add("skip");
    if (flags & kFlagDegenerateGrad) add("degenerate_grad");
    if (flags & kFlagClipped) add("clipped");
    if (flags & kFlagStop) add("stop");
    if (flags & kFlagDiverged) add("diverged");
    if (flags & kFlagFstarViolated) add("fstar_violated");
    return out;
}

Vec gd_step(const Vec& x, const Vec& grad, double eta) {
    if (!(eta > 0.0)) throw ConfigError("gd: eta must be positive");
    return axpy(-eta, grad, x);
}

ScalarStep polyak_step(const Vec& x, double fx, double fstar, const Vec& grad) {
    if (fx < fstar)
        throw CertificateError("polyak: f(x) below the provided f*; certificate is wrong");
    const double gn2 = norm_sq(grad);
    if (gn2 < kDegenerateGradSq) {
        if (fx > fstar)
            throw InconsistencyError("polyak: zero gradient with f(x) > f*");
        return {x, 0.0};
    }
    const double eta = (fx - fstar) / gn2;
    return {axpy(-eta, grad, x), eta};
}

SpsStep sps_max_step(const Vec& x, double f_batch, double fstar_batch, const Vec& grad_batch,
                     double c, double gamma) {
    if (!(c > 0.0)) throw ConfigError("spsmax: c must be positive");
    if (!(gamma > 0.0)) throw ConfigError("spsmax: gamma must be positive");
    if (f_batch < fstar_batch)
        throw CertificateError("spsmax: batch value below its lower bound");
    const double gap = f_batch - fstar_batch;
    const double gn2 = norm_sq(grad_batch);
    if (gn2 < kDegenerateGradSq) {
        if (gap > 0.0) return {axpy(-gamma, grad_batch, x), gamma, true};
        return {x, 0.0, false};
    }
    const double candidate = gap / (c * gn2);
    const bool clipped = gamma < candidate;
    const double eta = clipped ? gamma : candidate;
    return {axpy(-eta, grad_batch, x), eta, clipped};
}

DecSpsStep decsps_step(const Vec& x, double f_batch, double lstar, const Vec& grad_batch,
                       std::int64_t k, double c0, double eta_b, double prev_c,
                       double prev_eta) {
    if (!(c0 > 0.0)) throw ConfigError("decsps: c0 must be positive");
    if (f_batch < lstar)
        throw CertificateError("decsps: batch value below its lower bound");
    const double c_k = c0 * std::sqrt(static_cast<double>(k + 1));
    const double bound = (k == 0) ? c0 * eta_b : prev_c * prev_eta;
    const double gn2 = norm_sq(grad_batch);
    double candidate = std::numeric_limits<double>::infinity();
    if (gn2 >= kDegenerateGradSq) candidate = (f_batch - lstar) / gn2;
    const double eta = std::min(candidate, bound) / c_k;
    return {axpy(-eta, grad_batch, x), eta, c_k};
}

// ---- Twin-sequence stepper (tp / stp / stpm) --------------------------------

namespace {

class TwinStepper final : public Stepper {
  public:
    TwinStepper(Method method, const MethodParams& params,
                std::shared_ptr<const Objective> obj, Vec x0, Vec y0)
        : method_(method), obj_(std::move(obj)), params_(params) {
        state_.x = std::move(x0);
        state_.y = std::move(y0);
        if (state_.x.size() != state_.y.size())
            throw ConfigError("twin stepper: x0 and y0 must have the same dimension");
        if (method_ == Method::stpm) {
            if (!(params_.alpha >= 0.0 && params_.alpha < 1.0))
                throw ConfigError("stpm: alpha must be in [0,1)");
        } else if (params_.epsilon > 0.0) {
            eps_ = params_.epsilon;
            eps_resolved_ = true;
        }
        if (!(params_.tp_multiplier > 0.0))
            throw ConfigError("twin stepper: multiplier must be positive");
    }

    StepRecord step(const BatchIndex* batch) override {
        if (method_ == Method::stpm) return step_momentum(batch);
        return step_plain(batch);
    }

    const Vec& x() const override { return state_.x; }
    const Vec& y() const override { return state_.y; }
    bool is_twin() const override { return true; }
    bool stopped() const override { return stopped_; }
    Method method() const override { return method_; }

  private:
    StepRecord step_plain(const BatchIndex* batch) {
        StepRecord rec;
        rec.k = state_.k;
        if (stopped_) {
            rec.stop_flag = true;
            rec.flags |= kFlagStop;
            return rec;
        }
        const GapResult gr =
            batch ? obj_->batch_gap(state_.x, state_.y, *batch) : obj_->value_gap(state_.x, state_.y);
        state_.fx = gr.fx;
        state_.fy = gr.fy;

        // Default gap threshold: relative to the initial twin gap, which makes
        // the stop rule itself invariant to rescaling and shifting of f.
        if (!eps_resolved_) {
            eps_ = 1e-12 * std::abs(gr.gap);
            eps_resolved_ = true;
        }

        if (gr.gap == 0.0 || std::abs(gr.gap) < eps_) {
            if (method_ == Method::tp) {
                stopped_ = true;
                rec.stop_flag = true;
                rec.flags |= kFlagStop;
            } else {
                rec.flags |= kFlagSkip;
                ++state_.k;
            }
            return rec;
        }

        const bool x_moves = gr.gap > 0.0;
        Vec& p = x_moves ? state_.x : state_.y;
        Vec g = batch ? obj_->batch_gradient(p, *batch) : obj_->gradient(p);
        const double gn2 = norm_sq(g);
        rec.grad_sq_norm = gn2;
        if (gn2 < kDegenerateGradSq) {
            if (method_ == Method::tp)
                throw InconsistencyError(
                    "tp: zero gradient at the higher twin despite a value gap");
            rec.flags |= kFlagSkip | kFlagDegenerateGrad;
            ++state_.k;
            return rec;
        }
        const double eta = params_.tp_multiplier * std::abs(gr.gap) / gn2;
        axpy_inplace(-eta, g, p);
        rec.eta = eta;
        rec.mover = x_moves ? Mover::x : Mover::y;
        rec.batch_loss_mover = x_moves ? gr.fx : gr.fy;
        ++state_.k;
        return rec;
    }

    StepRecord step_momentum(const BatchIndex* batch) {
        StepRecord rec;
        rec.k = state_.k;
        const GapResult gr =
            batch ? obj_->batch_gap(state_.x, state_.y, *batch) : obj_->value_gap(state_.x, state_.y);
        state_.fx = gr.fx;
        state_.fy = gr.fy;
        Vec gx = batch ? obj_->batch_gradient(state_.x, *batch) : obj_->gradient(state_.x);
        Vec gy = batch ? obj_->batch_gradient(state_.y, *batch) : obj_->gradient(state_.y);

        const double a = params_.alpha;
        if (!acc_.initialized) {
            acc_.fbar_x = gr.fx;
            acc_.fbar_y = gr.fy;
            acc_.dfbar = gr.gap;
            acc_.g_x = gx;
            acc_.g_y = gy;
            acc_.z_x = dot(gx, state_.x);
            acc_.z_y = dot(gy, state_.y);
            acc_.initialized = true;
        } else {
            acc_.fbar_x = a * acc_.fbar_x + (1.0 - a) * gr.fx;
            acc_.fbar_y = a * acc_.fbar_y + (1.0 - a) * gr.fy;
            acc_.dfbar = a * acc_.dfbar + (1.0 - a) * gr.gap;
            for (std::size_t i = 0; i < gx.size(); ++i) {
                acc_.g_x[i] = a * acc_.g_x[i] + (1.0 - a) * gx[i];
                acc_.g_y[i] = a * acc_.g_y[i] + (1.0 - a) * gy[i];
            }
            acc_.z_x = a * acc_.z_x + (1.0 - a) * dot(gx, state_.x);
            acc_.z_y = a * acc_.z_y + (1.0 - a) * dot(gy, state_.y);
        }

        // Surrogate difference h_x - h_y, assembled from the gap accumulator
        // rather than h_x and h_y themselves (whose shared additive part would
        // otherwise swamp the difference for shifted objectives).
        const double w_x = dot(acc_.g_x, state_.x) - acc_.z_x;
        const double w_y = dot(acc_.g_y, state_.y) - acc_.z_y;
        const double dh = acc_.dfbar + w_x - w_y;
        if (!std::isfinite(dh)) throw NumericError("stpm: non-finite surrogate");

        const bool x_moves = dh >= 0.0;  // exact tie moves x
        Vec& p = x_moves ? state_.x : state_.y;
        const Vec& gm = x_moves ? acc_.g_x : acc_.g_y;
        const double gn2 = norm_sq(gm);
        rec.grad_sq_norm = gn2;
        if (gn2 < kDegenerateGradSq) {
            rec.flags |= kFlagSkip | kFlagDegenerateGrad;
            ++state_.k;
            return rec;
        }
        const double eta = params_.tp_multiplier * std::abs(dh) / gn2;
        axpy_inplace(-eta, gm, p);
        rec.eta = eta;
        rec.mover = x_moves ? Mover::x : Mover::y;
        rec.batch_loss_mover = x_moves ? gr.fx : gr.fy;
        ++state_.k;
        return rec;
    }

    Method method_;
    std::shared_ptr<const Objective> obj_;
    MethodParams params_;
    TwinState state_;
    MomentumAccumulators acc_;
    double eps_ = 0.0;
    bool eps_resolved_ = false;
    bool stopped_ = false;
};

// ---- Single-sequence steppers ------------------------------------------------

class SingleStepper : public Stepper {
  public:
    SingleStepper(Method method, std::shared_ptr<const Objective> obj, Vec x0)
        : method_(method), obj_(std::move(obj)), x_(std::move(x0)) {}

    const Vec& x() const override { return x_; }
    bool is_twin() const override { return false; }
    Method method() const override { return method_; }

  protected:
    double eval(const Vec& v, const BatchIndex* batch) const {
        return batch ? obj_->batch_value(v, *batch) : obj_->value(v);
    }
    Vec grad(const Vec& v, const BatchIndex* batch) const {
        return batch ? obj_->batch_gradient(v, *batch) : obj_->gradient(v);
    }

    Method method_;
    std::shared_ptr<const Objective> obj_;
    Vec x_;
    std::int64_t k_ = 0;
};

class GdStepper final : public SingleStepper {
  public:
    GdStepper(Method method, std::shared_ptr<const Objective> obj, Vec x0, double eta)
        : SingleStepper(method, std::move(obj), std::move(x0)), eta_(eta) {}

    StepRecord step(const BatchIndex* batch) override {
        StepRecord rec;
        rec.k = k_++;
        Vec g = grad(x_, batch);
        rec.grad_sq_norm = norm_sq(g);
        axpy_inplace(-eta_, g, x_);
        rec.eta = eta_;
        rec.mover = Mover::x;
        return rec;
    }

  private:
    double eta_;
};

class PolyakStepper final : public SingleStepper {
  public:
    PolyakStepper(std::shared_ptr<const Objective> obj, Vec x0, double fstar)
        : SingleStepper(Method::polyak, std::move(obj), std::move(x0)), fstar_(fstar) {}

    StepRecord step(const BatchIndex* batch) override {
        StepRecord rec;
        rec.k = k_++;
        const double fx = eval(x_, batch);
        Vec g = grad(x_, batch);
        rec.grad_sq_norm = norm_sq(g);
        rec.batch_loss_mover = fx;
        ScalarStep s = polyak_step(x_, fx, fstar_, g);
        x_ = std::move(s.x);
        rec.eta = s.eta;
        rec.mover = s.eta > 0.0 ? Mover::x : Mover::none;
        return rec;
    }

  private:
    double fstar_;
};

class SpsMaxStepper final : public SingleStepper {
  public:
    SpsMaxStepper(std::shared_ptr<const Objective> obj, Vec x0, double c, double gamma,
                  double lstar)
        : SingleStepper(Method::spsmax, std::move(obj), std::move(x0)),
          c_(c), gamma_(gamma), lstar_(lstar) {}

    StepRecord step(const BatchIndex* batch) override {
        StepRecord rec;
        rec.k = k_++;
        const double fb = eval(x_, batch);
        Vec g = grad(x_, batch);
        const double gn2 = norm_sq(g);
        rec.grad_sq_norm = gn2;
        rec.batch_loss_mover = fb;
        if (gn2 < kDegenerateGradSq) rec.flags |= kFlagDegenerateGrad;
        SpsStep s = sps_max_step(x_, fb, lstar_, g, c_, gamma_);
        x_ = std::move(s.x);
        rec.eta = s.eta;
        if (s.clipped) rec.flags |= kFlagClipped;
        rec.mover = s.eta > 0.0 ? Mover::x : Mover::none;
        return rec;
    }

  private:
    double c_, gamma_, lstar_;
};

class DecSpsStepper final : public SingleStepper {
  public:
    DecSpsStepper(std::shared_ptr<const Objective> obj, Vec x0, double c0, double eta_b,
                  double lstar)
        : SingleStepper(Method::decsps, std::move(obj), std::move(x0)),
          c0_(c0), eta_b_(eta_b), lstar_(lstar) {}

    StepRecord step(const BatchIndex* batch) override {
        StepRecord rec;
        rec.k = k_;
        const double fb = eval(x_, batch);
        Vec g = grad(x_, batch);
        const double gn2 = norm_sq(g);
        rec.grad_sq_norm = gn2;
        rec.batch_loss_mover = fb;
        if (gn2 < kDegenerateGradSq) rec.flags |= kFlagDegenerateGrad;
        DecSpsStep s = decsps_step(x_, fb, lstar_, g, k_, c0_, eta_b_, prev_c_, prev_eta_);
        x_ = std::move(s.x);
        rec.eta = s.eta;
        rec.mover = s.eta > 0.0 ? Mover::x : Mover::none;
        prev_c_ = s.c_k;
        prev_eta_ = s.eta;
        ++k_;
        return rec;
    }

  private:
    double c0_, eta_b_, lstar_;
    double prev_c_ = 0.0;
    double prev_eta_ = 0.0;
};

class SlsStepper final : public SingleStepper {
  public:
    SlsStepper(std::shared_ptr<const Objective> obj, Vec x0, double beta, double c,
               double eta_max)
        : SingleStepper(Method::sls, std::move(obj), std::move(x0)),
          beta_(beta), c_(c), eta_max_(eta_max) {}

    StepRecord step(const BatchIndex* batch) override {
        StepRecord rec;
        rec.k = k_++;
        Vec g = grad(x_, batch);
        rec.grad_sq_norm = norm_sq(g);
        auto f_eval = [&](const Vec& v) { return eval(v, batch); };
        ArmijoStep s = sls_armijo_step(x_, f_eval, g, beta_, c_, eta_max_);
        rec.batch_loss_mover = s.f0;
        x_ = std::move(s.x);
        rec.eta = s.eta;
        rec.mover = Mover::x;
        return rec;
    }

  private:
    double beta_, c_, eta_max_;
};

}  // namespace

const Vec& Stepper::y() const {
    throw Error(method_name(method()) + ": single-sequence method has no y iterate");
}

std::unique_ptr<Stepper> make_stepper(Method method, const MethodParams& params,
                                      std::shared_ptr<const Objective> obj, Vec x0, Vec y0) {
    if (static_cast<std::int64_t>(x0.size()) != obj->dim())
        throw ConfigError("x0 dimension does not match the objective");

    if (method_is_twin(method)) {
        if (y0.empty()) throw ConfigError(method_name(method) + ": missing y0 initial point");
        return std::make_unique<TwinStepper>(method, params, std::move(obj), std::move(x0),
                                             std::move(y0));
    }

    switch (method) {
        case Method::gd:
        case Method::sgd: {
            double eta;
            if (params.eta) {
                eta = *params.eta;
            } else {
                double L;
                try {
                    L = obj->estimate_smoothness();
                } catch (const ConvergenceError& e) {
                    throw ConfigError(method_name(method) +
                                      ": no eta given and the smoothness estimate failed (" +
                                      e.what() + ")");
                }
                if (!(L > 0.0))
                    throw ConfigError(method_name(method) +
                                      ": smoothness estimate is zero; provide eta explicitly");
                eta = 1.0 / L;
            }
            if (!(eta > 0.0) || !std::isfinite(eta))
                throw ConfigError(method_name(method) + ": eta must be positive and finite");
            return std::make_unique<GdStepper>(method, std::move(obj), std::move(x0), eta);
        }
        case Method::polyak:
            if (!params.fstar)
                throw ConfigError("polyak: missing required parameter 'fstar'");
            return std::make_unique<PolyakStepper>(std::move(obj), std::move(x0), *params.fstar);
        case Method::spsmax:
            if (!params.gamma)
                throw ConfigError("spsmax: missing required parameter 'gamma'");
            if (!(params.sps_c > 0.0)) throw ConfigError("spsmax: c must be positive");
            return std::make_unique<SpsMaxStepper>(std::move(obj), std::move(x0), params.sps_c,
                                                   *params.gamma, params.lstar);
        case Method::decsps:
            if (!(params.c0 > 0.0)) throw ConfigError("decsps: c0 must be positive");
            if (!(params.eta_b > 0.0)) throw ConfigError("decsps: eta_b must be positive");
            return std::make_unique<DecSpsStepper>(std::move(obj), std::move(x0), params.c0,
                                                   params.eta_b, params.lstar);
        case Method::sls:
            if (!(params.beta > 0.0 && params.beta < 1.0))
                throw ConfigError("sls: beta must be in (0,1)");
            if (!(params.sls_c > 0.0 && params.sls_c < 1.0))
                throw ConfigError("sls: c must be in (0,1)");
            if (!(params.eta_max > 0.0)) throw ConfigError("sls: eta_max must be positive");
            return std::make_unique<SlsStepper>(std::move(obj), std::move(x0), params.beta,
                                                params.sls_c, params.eta_max);
        default:
            throw ConfigError("unhandled method");
    }
}

}  // namespace tp
