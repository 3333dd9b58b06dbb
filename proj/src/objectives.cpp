#include "tp/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace tp {

namespace {

double sigmoid(double t) {
    if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
    const double e = std::exp(t);
    return e / (1.0 + e);
}

// log(1 + exp(t)) without overflow at large |t|.
double softplus(double t) {
    return std::max(t, 0.0) + std::log1p(std::exp(-std::abs(t)));
}

void require_dim(const Vec& x, std::int64_t d, const char* who) {
    if (static_cast<std::int64_t>(x.size()) != d)
        throw DimensionError(std::string(who) + ": point has length " +
                             std::to_string(x.size()) + ", expected " + std::to_string(d));
}

}  // namespace

BatchIndex BatchIndex::full(std::int64_t n) {
    BatchIndex b;
    b.idx.resize(static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < n; ++i) b.idx[i] = i;
    return b;
}

BatchIndex BatchIndex::from_sorted(std::vector<std::int64_t> indices, std::int64_t n) {
    if (indices.empty()) throw DimensionError("batch: empty index set");
    for (std::size_t i = 0; i < indices.size(); ++i) {
        if (indices[i] < 0 || indices[i] >= n)
            throw DimensionError("batch: index " + std::to_string(indices[i]) +
                                 " out of range [0," + std::to_string(n) + ")");
        if (i > 0 && indices[i] <= indices[i - 1])
            throw DimensionError("batch: indices not strictly increasing");
    }
    BatchIndex b;
    b.idx = std::move(indices);
    return b;
}

double Objective::batch_value(const Vec&, const BatchIndex&) const {
    throw UnsupportedError(kind() + ": no per-example structure to batch");
}

Vec Objective::batch_gradient(const Vec&, const BatchIndex&) const {
    throw UnsupportedError(kind() + ": no per-example structure to batch");
}

GapResult Objective::value_gap(const Vec& x, const Vec& y) const {
    const double fx = value(x);
    const double fy = value(y);
    return {fx - fy, fx, fy};
}

GapResult Objective::batch_gap(const Vec& x, const Vec& y, const BatchIndex& B) const {
    const double fx = batch_value(x, B);
    const double fy = batch_value(y, B);
    return {fx - fy, fx, fy};
}

QuadraticObjective::QuadraticObjective(Vec spectrum, double offset)
    : spectrum_(std::move(spectrum)), offset_(offset) {
    if (spectrum_.empty()) throw DimensionError("quadratic: empty spectrum");
    for (double m : spectrum_)
        if (!(m >= 0.0)) throw ConfigError("quadratic: spectrum must be nonnegative (PSD)");
}

double QuadraticObjective::value(const Vec& x) const {
    require_dim(x, dim(), "quadratic value");
    const double v = 0.5 * m_norm_sq(x) + offset_;
    if (!std::isfinite(v)) throw NumericError("quadratic value: non-finite result");
    return v;
}

double QuadraticObjective::m_norm_sq(const Vec& x) const {
    double s = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) s += spectrum_[j] * x[j] * x[j];
    return s;
}

GapResult QuadraticObjective::value_gap(const Vec& x, const Vec& y) const {
    require_dim(x, dim(), "quadratic gap");
    require_dim(y, dim(), "quadratic gap");
    const double sx = m_norm_sq(x);
    const double sy = m_norm_sq(y);
    const double gap = 0.5 * (sx - sy);
    if (!std::isfinite(gap)) throw NumericError("quadratic gap: non-finite result");
    return {gap, 0.5 * sx + offset_, 0.5 * sy + offset_};
}

Vec QuadraticObjective::gradient(const Vec& x) const {
    require_dim(x, dim(), "quadratic gradient");
    Vec g(x.size());
    for (std::size_t j = 0; j < x.size(); ++j) g[j] = spectrum_[j] * x[j];
    if (!all_finite(g)) throw NumericError("quadratic gradient: non-finite result");
    return g;
}

double QuadraticObjective::smoothness_impl(double, std::int64_t, std::uint64_t) const {
    return *std::max_element(spectrum_.begin(), spectrum_.end());
}

DataObjective::DataObjective(std::shared_ptr<const SparseDataset> data)
    : data_(std::move(data)) {
    all_rows_.resize(static_cast<std::size_t>(data_->n_examples()));
    for (std::int64_t i = 0; i < data_->n_examples(); ++i) all_rows_[i] = i;
}

double DataObjective::value_rows(const Vec& x, std::span<const std::int64_t> rows) const {
    require_dim(x, dim(), "value");
    double s = 0.0;
    for (std::int64_t i : rows)
        s += row_loss(row_dot(data_->features, i, x), data_->labels[i]);
    const double v = s / static_cast<double>(rows.size());
    if (!std::isfinite(v)) throw NumericError(kind() + " value: non-finite result");
    return v;
}

Vec DataObjective::gradient_rows(const Vec& x, std::span<const std::int64_t> rows) const {
    require_dim(x, dim(), "gradient");
    Vec g(x.size(), 0.0);
    for (std::int64_t i : rows) {
        const double coef = row_coef(row_dot(data_->features, i, x), data_->labels[i]);
        row_axpy(data_->features, i, coef, g);
    }
    scale_inplace(1.0 / static_cast<double>(rows.size()), g);
    if (!all_finite(g)) throw NumericError(kind() + " gradient: non-finite result");
    return g;
}

double DataObjective::value(const Vec& x) const { return value_rows(x, all_rows_); }

Vec DataObjective::gradient(const Vec& x) const { return gradient_rows(x, all_rows_); }

double DataObjective::batch_value(const Vec& x, const BatchIndex& B) const {
    return value_rows(x, B.idx);
}

Vec DataObjective::batch_gradient(const Vec& x, const BatchIndex& B) const {
    return gradient_rows(x, B.idx);
}

GapResult DataObjective::value_gap(const Vec& x, const Vec& y) const {
    const double fx = value_rows(x, all_rows_);
    const double fy = value_rows(y, all_rows_);
    return {fx - fy, fx, fy};
}

GapResult DataObjective::batch_gap(const Vec& x, const Vec& y, const BatchIndex& B) const {
    const double fx = value_rows(x, B.idx);
    const double fy = value_rows(y, B.idx);
    return {fx - fy, fx, fy};
}

LogisticObjective::LogisticObjective(std::shared_ptr<const SparseDataset> data)
    : DataObjective(std::move(data)) {
    for (double b : data_->labels)
        if (b != -1.0 && b != 1.0)
            throw ConfigError("logistic: labels must be in {-1,+1}; normalize first");
}

double LogisticObjective::row_loss(double margin, double label) const {
    return softplus(-label * margin);
}

double LogisticObjective::row_coef(double margin, double label) const {
    return -label * sigmoid(-label * margin);
}

double LogisticObjective::smoothness_impl(double tol, std::int64_t max_iter,
                                              std::uint64_t seed) const {
    const auto& A = data_->features;
    const double scale = 1.0 / (4.0 * static_cast<double>(data_->n_examples()));
    auto apply = [&](const Vec& u, Vec& out) {
        Vec Au = spmv(A, u);
        out = spmv_transpose(A, Au);
        scale_inplace(scale, out);
    };
    return power_iteration_sym(apply, dim(), tol, max_iter, seed);
}

LeastSquaresObjective::LeastSquaresObjective(std::shared_ptr<const SparseDataset> data)
    : DataObjective(std::move(data)) {}

double LeastSquaresObjective::row_loss(double margin, double label) const {
    const double r = margin - label;
    return 0.5 * r * r;
}

double LeastSquaresObjective::row_coef(double margin, double label) const {
    return margin - label;
}

double LeastSquaresObjective::smoothness_impl(double tol, std::int64_t max_iter,
                                                  std::uint64_t seed) const {
    const auto& A = data_->features;
    const double scale = 1.0 / static_cast<double>(data_->n_examples());
    auto apply = [&](const Vec& u, Vec& out) {
        Vec Au = spmv(A, u);
        out = spmv_transpose(A, Au);
        scale_inplace(scale, out);
    };
    return power_iteration_sym(apply, dim(), tol, max_iter, seed);
}

ScaleShiftObjective::ScaleShiftObjective(std::shared_ptr<const Objective> inner, double c,
                                         double d)
    : inner_(std::move(inner)), c_(c), d_(d) {
    if (!(c > 0.0)) throw ConfigError("scale_shift: scale c must be positive");
}

double ScaleShiftObjective::value(const Vec& x) const { return c_ * inner_->value(x) + d_; }

Vec ScaleShiftObjective::gradient(const Vec& x) const {
    Vec g = inner_->gradient(x);
    scale_inplace(c_, g);
    return g;
}

double ScaleShiftObjective::batch_value(const Vec& x, const BatchIndex& B) const {
    return c_ * inner_->batch_value(x, B) + d_;
}

Vec ScaleShiftObjective::batch_gradient(const Vec& x, const BatchIndex& B) const {
    Vec g = inner_->batch_gradient(x, B);
    scale_inplace(c_, g);
    return g;
}

GapResult ScaleShiftObjective::value_gap(const Vec& x, const Vec& y) const {
    const GapResult inner = inner_->value_gap(x, y);
    return {c_ * inner.gap, c_ * inner.fx + d_, c_ * inner.fy + d_};
}

GapResult ScaleShiftObjective::batch_gap(const Vec& x, const Vec& y, const BatchIndex& B) const {
    const GapResult inner = inner_->batch_gap(x, y, B);
    return {c_ * inner.gap, c_ * inner.fx + d_, c_ * inner.fy + d_};
}

double ScaleShiftObjective::smoothness_impl(double tol, std::int64_t max_iter,
                                                std::uint64_t seed) const {
    return c_ * inner_->estimate_smoothness(tol, max_iter, seed);
}

std::shared_ptr<Objective> wrap_scale_shift(std::shared_ptr<const Objective> obj, double c,
                                            double d) {
    return std::make_shared<ScaleShiftObjective>(std::move(obj), c, d);
}

FStarCertificate estimate_fstar(const Objective& obj, const Vec& x0, double grad_tol,
                                std::int64_t max_iter) {
    if (!(grad_tol > 0.0)) throw ConfigError("estimate_fstar: grad_tol must be positive");
    require_dim(x0, obj.dim(), "estimate_fstar");

    // Trial evaluation that maps any numeric failure to +inf so the
    // backtracking loop simply rejects the stepsize.
    auto try_value = [&](const Vec& x) {
        try {
            return obj.value(x);
        } catch (const NumericError&) {
            return std::numeric_limits<double>::infinity();
        }
    };

    Vec x = x0;
    double fx = obj.value(x);
    double eta = 1.0;
    double grad_norm = 0.0;
    std::int64_t it = 0;
    for (; it < max_iter; ++it) {
        Vec g = obj.gradient(x);
        const double gn2 = norm_sq(g);
        grad_norm = std::sqrt(gn2);
        if (grad_norm <= grad_tol) break;

        eta = std::min(eta * 2.0, 1e12);
        Vec trial(x.size());
        bool accepted = false;
        for (int bt = 0; bt < 200; ++bt) {
            for (std::size_t j = 0; j < x.size(); ++j) trial[j] = x[j] - eta * g[j];
            const double ft = try_value(trial);
            if (ft <= fx - 1e-4 * eta * gn2) {
                x.swap(trial);
                fx = ft;
                accepted = true;
                break;
            }
            eta *= 0.5;
        }
        if (!accepted) break;  // stalled; report the residual we are stuck at
    }
    if (it == max_iter || grad_norm > grad_tol) {
        // recompute at the final point so the reported residual is current
        grad_norm = std::sqrt(norm_sq(obj.gradient(x)));
    }

    FStarCertificate cert;
    cert.fstar = fx;
    cert.method = "gd-armijo";
    cert.residual_grad_norm = grad_norm;
    cert.iterations_used = it;
    cert.requested_grad_tol = grad_tol;
    cert.minimizer = std::move(x);
    return cert;
}

}  // namespace tp
