#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "tp/dataio.hpp"
#include "tp/numkit.hpp"

namespace tp {

/// Strictly increasing, nonempty subset of {0..n-1}.
struct BatchIndex {
    std::vector<std::int64_t> idx;

    static BatchIndex full(std::int64_t n);
    // Validates ordering and the [0, n) range.
    static BatchIndex from_sorted(std::vector<std::int64_t> indices, std::int64_t n);

    std::int64_t size() const { return static_cast<std::int64_t>(idx.size()); }
};

/// f(x) - f(y) together with both values. The gap is the quantity twin
/// methods step on; computing it through one oracle keeps an additive shift
/// of the objective out of the difference entirely.
struct GapResult {
    double gap;
    double fx;
    double fy;
};

class Objective {
  public:
    virtual ~Objective() = default;

    virtual std::string kind() const = 0;
    virtual std::int64_t dim() const = 0;
    virtual bool data_backed() const { return false; }
    virtual std::int64_t n_examples() const { return 0; }
    virtual const SparseDataset* dataset() const { return nullptr; }

    virtual double value(const Vec& x) const = 0;
    virtual Vec gradient(const Vec& x) const = 0;

    // Mini-batch oracles; only data-backed objectives support them.
    virtual double batch_value(const Vec& x, const BatchIndex& B) const;
    virtual Vec batch_gradient(const Vec& x, const BatchIndex& B) const;

    virtual GapResult value_gap(const Vec& x, const Vec& y) const;
    virtual GapResult batch_gap(const Vec& x, const Vec& y, const BatchIndex& B) const;

    /// Upper-bounding smoothness constant L (spectral, via power iteration
    /// for data-backed kinds). Deterministic for a fixed seed.
    double estimate_smoothness(double tol = 1e-8, std::int64_t max_iter = 100000,
                               std::uint64_t seed = 0) const {
        return smoothness_impl(tol, max_iter, seed);
    }

  protected:
    virtual double smoothness_impl(double tol, std::int64_t max_iter,
                                   std::uint64_t seed) const = 0;
};

/// f(x) = 1/2 sum_j m_j x_j^2 + offset with m the (PSD) diagonal spectrum.
class QuadraticObjective final : public Objective {
  public:
    QuadraticObjective(Vec spectrum, double offset);

    std::string kind() const override { return "quadratic"; }
    std::int64_t dim() const override { return static_cast<std::int64_t>(spectrum_.size()); }
    double value(const Vec& x) const override;
    Vec gradient(const Vec& x) const override;
    // offset-free gap: the additive constant cancels structurally instead of
    // being subtracted away at whatever precision the values have left
    GapResult value_gap(const Vec& x, const Vec& y) const override;
    double smoothness_impl(double, std::int64_t, std::uint64_t) const override;

    const Vec& spectrum() const { return spectrum_; }
    double offset() const { return offset_; }
    // M-weighted squared norm x' M x; the invariant quantity of the twin
    // dynamics on this objective.
    double m_norm_sq(const Vec& x) const;

  private:
    Vec spectrum_;
    double offset_;
};

/// Shared machinery for empirical-risk objectives over a SparseDataset.
class DataObjective : public Objective {
  public:
    explicit DataObjective(std::shared_ptr<const SparseDataset> data);

    std::int64_t dim() const override { return data_->n_features(); }
    bool data_backed() const override { return true; }
    std::int64_t n_examples() const override { return data_->n_examples(); }
    const SparseDataset* dataset() const override { return data_.get(); }

    double value(const Vec& x) const override;
    Vec gradient(const Vec& x) const override;
    double batch_value(const Vec& x, const BatchIndex& B) const override;
    Vec batch_gradient(const Vec& x, const BatchIndex& B) const override;
    GapResult value_gap(const Vec& x, const Vec& y) const override;
    GapResult batch_gap(const Vec& x, const Vec& y, const BatchIndex& B) const override;

  protected:
    // Per-example loss and d(loss)/d(margin) at margin m = <a_i, x>.
    virtual double row_loss(double margin, double label) const = 0;
    virtual double row_coef(double margin, double label) const = 0;

    double value_rows(const Vec& x, std::span<const std::int64_t> rows) const;
    Vec gradient_rows(const Vec& x, std::span<const std::int64_t> rows) const;

    std::shared_ptr<const SparseDataset> data_;
    std::vector<std::int64_t> all_rows_;
};

/// (1/n) sum log(1 + exp(-b_i <a_i, x>)), labels in {-1,+1}.
class LogisticObjective final : public DataObjective {
  public:
    explicit LogisticObjective(std::shared_ptr<const SparseDataset> data);
    std::string kind() const override { return "logistic"; }
    double smoothness_impl(double tol, std::int64_t max_iter, std::uint64_t seed) const override;

  protected:
    double row_loss(double margin, double label) const override;
    double row_coef(double margin, double label) const override;
};

/// (1/2n) sum (<a_i, x> - b_i)^2.
class LeastSquaresObjective final : public DataObjective {
  public:
    explicit LeastSquaresObjective(std::shared_ptr<const SparseDataset> data);
    std::string kind() const override { return "least_squares"; }
    double smoothness_impl(double tol, std::int64_t max_iter, std::uint64_t seed) const override;

  protected:
    double row_loss(double margin, double label) const override;
    double row_coef(double margin, double label) const override;
};

/// c * f(.) + d with c > 0. Values and gradients scale by construction; the
/// gap oracles scale the inner gap so the shift d never enters a difference.
class ScaleShiftObjective final : public Objective {
  public:
    ScaleShiftObjective(std::shared_ptr<const Objective> inner, double c, double d);

    std::string kind() const override { return inner_->kind(); }
    std::int64_t dim() const override { return inner_->dim(); }
    bool data_backed() const override { return inner_->data_backed(); }
    std::int64_t n_examples() const override { return inner_->n_examples(); }
    const SparseDataset* dataset() const override { return inner_->dataset(); }

    double value(const Vec& x) const override;
    Vec gradient(const Vec& x) const override;
    double batch_value(const Vec& x, const BatchIndex& B) const override;
    Vec batch_gradient(const Vec& x, const BatchIndex& B) const override;
    GapResult value_gap(const Vec& x, const Vec& y) const override;
    GapResult batch_gap(const Vec& x, const Vec& y, const BatchIndex& B) const override;
    double smoothness_impl(double tol, std::int64_t max_iter, std::uint64_t seed) const override;

  private:
    std::shared_ptr<const Objective> inner_;
    double c_;
    double d_;
};

std::shared_ptr<Objective> wrap_scale_shift(std::shared_ptr<const Objective> obj,
                                            double c, double d);

/// Empirically estimated optimal value. `residual_grad_norm` quantifies how
/// far from stationarity the estimate stopped; callers decide whether that
/// is good enough.
struct FStarCertificate {
    double fstar = 0.0;
    std::string method;
    double residual_grad_norm = 0.0;
    std::int64_t iterations_used = 0;
    double requested_grad_tol = 0.0;
    Vec minimizer;

    bool converged() const { return residual_grad_norm <= requested_grad_tol; }
};

/// Full-gradient descent with Armijo backtracking (doubling warm start)
/// until ||grad|| <= grad_tol or max_iter. Independent of the twin steppers
/// so it can serve as their reference.
FStarCertificate estimate_fstar(const Objective& obj, const Vec& x0, double grad_tol,
                                std::int64_t max_iter);

}  // namespace tp
