#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "tp/kvconfig.hpp"
#include "tp/objectives.hpp"
#include "tp/rng.hpp"
#include "tp/steppers.hpp"

namespace tp {

enum class FstarMode { certificate, provided, none };
enum class InitMode { gaussian, zeros, provided };

struct RunConfig {
    Method method = Method::tp;
    MethodParams params;

    std::string objective_kind = "quadratic";  // quadratic | logistic | least_squares
    std::string dataset_path;
    Vec quad_spectrum = {1.0, 1.0};
    double quad_offset = 0.0;
    std::string label_normalize = "auto";  // auto | binary | none
    bool scale_features = false;

    std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4};
    std::int64_t epochs = 0;      // 0 = default (50 stochastic, 500 deterministic)
    std::int64_t batch_size = 0;  // 0 = full batch
    double test_fraction = 0.0;
    std::uint64_t split_seed = 12345;

    FstarMode fstar_mode = FstarMode::none;
    double fstar_provided = 0.0;
    double fstar_grad_tol = 1e-8;
    std::int64_t fstar_max_iter = 20000;

    InitMode init_mode = InitMode::gaussian;
    Vec x0_provided;
    Vec y0_provided;

    // Objective transform f -> wrap_c * f + wrap_d (identity by default).
    double wrap_c = 1.0;
    double wrap_d = 0.0;

    std::string output_path;  // CSV prefix; empty = keep traces in memory only
    std::int64_t running_avg_window = 10;
    bool timings = false;  // per-step wall clock, off by default (non-reproducible)
    std::int64_t jobs = 1;

    static RunConfig from_kv(const KvMap& kv);
    KvMap to_kv() const;  // fully resolved effective configuration
};

/// One StepRecord plus the harness-level metrics attached to it.
struct TraceRow {
    StepRecord rec;
    std::int64_t epoch = 0;
    std::optional<double> subopt;
    std::optional<double> subopt_runavg;
    std::optional<double> test_acc;
    std::optional<double> wall_ms;
};

struct RunTrace {
    std::uint64_t seed = 0;
    std::vector<TraceRow> rows;
    bool diverged = false;
    bool stopped = false;       // deterministic twin stop rule fired
    std::string note;           // e.g. the divergence message
    Mover returned_point = Mover::x;  // argmin of the final full losses for twins
    std::optional<double> final_subopt;
    std::optional<double> final_subopt_runavg;
    std::optional<double> final_test_acc;
    double final_f = 0.0;  // full loss at the returned point
};

/// Per-epoch batching: a seeded permutation of {0..n-1} chopped into
/// consecutive blocks of size tau (the last block may be short), re-shuffled
/// every epoch. Every method consumes the identical sequence for a given
/// (seed, n, tau), which is what makes seed-paired method comparisons valid.
/// tau = 0 denotes full-batch mode: next() yields nullopt once per epoch.
class BatchScheduler {
  public:
    BatchScheduler(std::uint64_t seed, std::int64_t n, std::int64_t tau);

    std::int64_t steps_per_epoch() const { return steps_per_epoch_; }
    /// The batch for step s of the current epoch, s in [0, steps_per_epoch).
    std::optional<BatchIndex> batch(std::int64_t s);
    void next_epoch();

  private:
    std::int64_t n_;
    std::int64_t tau_;
    std::int64_t steps_per_epoch_;
    Rng rng_;
    std::vector<std::int64_t> perm_;
};

/// Everything derived from a config once, shared across seeds.
struct PreparedProblem {
    std::shared_ptr<const Objective> objective;  // wrapped if wrap_c/d set
    std::shared_ptr<const SparseDataset> train;  // null for quadratic
    std::shared_ptr<const SparseDataset> test;
    std::optional<FStarCertificate> fstar_cert;
    std::optional<double> fstar;     // value used for suboptimality
    std::optional<double> smoothness;  // filled when a method needed 1/L
    std::int64_t epochs = 0;         // resolved
    std::int64_t steps_per_epoch = 0;
    MethodParams params;             // resolved (eta, fstar filled in)
    std::size_t n_parse_warnings = 0;
};

PreparedProblem prepare(const RunConfig& config);

/// Executes one seed; deterministic for a fixed (config, seed).
RunTrace run_seed(const PreparedProblem& problem, const RunConfig& config,
                  std::uint64_t seed);

/// All seeds (parallel up to config.jobs), CSV + metadata emission when
/// output_path is set. Output files are preflighted before any compute.
std::vector<RunTrace> run_all(const RunConfig& config, const PreparedProblem& problem);
std::vector<RunTrace> run_all(const RunConfig& config);

/// Element t is the mean of the last min(t+1, window) values.
std::vector<double> running_average(const std::vector<double>& values, std::int64_t window);

/// Fraction of test rows with sign(<a_i, x>) == b_i; sign(0) counts as +1.
double test_accuracy(const Vec& x, const SparseDataset& test);

std::string trace_to_csv(const RunTrace& trace);
extern const char* const kCsvHeader;

KvMap run_metadata(const RunConfig& config, const PreparedProblem& problem);

}  // namespace tp
