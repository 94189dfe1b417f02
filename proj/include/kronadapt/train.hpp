#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "kronadapt/adapters.hpp"
#include "kronadapt/matrix.hpp"
#include "kronadapt/rank_select.hpp"

namespace kronadapt {

struct TaskDims {
    index_t rows = 0;
    index_t cols = 0;
    index_t samples = 0; // 0 = auto (2 * cols)
};

/// Linear teacher-student regression task. The target weight is
/// w_star = w0 + delta where both w0 and the structured part of delta are
/// Kronecker sums over a shared orthonormal factor set, so noiseless tasks are
/// exactly representable by a Kronecker adapter of rank kp_rank_star. Targets
/// are w_star * inputs with no label noise; the eps term lives inside delta.
struct SyntheticTask {
    Matrix w0;
    Matrix w_star;
    Matrix inputs;  // cols x samples
    Matrix targets; // rows x samples
    KronShape shape;
    index_t kp_rank_star = 1;
    double noise_eps = 0.0;
    std::uint64_t seed = 0;
};

enum class OptimizerKind { gradient_descent, momentum };

struct TrainConfig {
    index_t steps = 2000;
    double learning_rate = 0.1; // documented default; stable across the battery
    index_t batch_size = 0;     // 0 = full batch
    OptimizerKind optimizer = OptimizerKind::gradient_descent;
    double momentum_beta = 0.9;
    std::uint64_t seed = 42;
    index_t adapter_rank = 0; // lora/pissa/kron_random rank; 0 = reuse SoKA's r_final

    void validate() const;
};

struct TrainRecord {
    index_t step = 0;
    double loss = 0.0;      // mean squared error over the batch, before the update
    double grad_norm = 0.0; // global L2 norm over all trainable parameters
};

struct TrainLog {
    std::string method;
    std::vector<TrainRecord> records;
    bool diverged = false;
    index_t diverged_at_step = 0;
    std::string snapshot_ref; // relative path of the saved adapter, when written
};

struct MethodSummary {
    std::string method;
    index_t steps = 0;
    double loss_step0 = 0.0;
    double loss_final = 0.0;
    double loss_q25 = 0.0;
    double loss_q50 = 0.0;
    double loss_q75 = 0.0;
    double loss_auc = 0.0; // trapezoidal area under the loss curve
    double max_grad_norm = 0.0;
    bool diverged = false;
};

struct ComparisonReport {
    index_t steps = 0;
    std::vector<MethodSummary> methods;
};

/// Deterministic task construction: same seed, same task, bit for bit.
SyntheticTask make_task(const TaskDims& dims, index_t kp_rank_star, double noise_eps,
                        std::uint64_t seed);

/// Runs MSE regression of the chosen adapter toward w_star. Batches cycle
/// round-robin through the task inputs; a non-finite loss or gradient norm
/// marks the run diverged and stops it at that step.
TrainLog train(const SyntheticTask& task, AdapterKind kind, const RankPolicy& policy,
               const TrainConfig& config);

/// train() plus the final adapter state, for callers that persist snapshots.
struct TrainOutcome {
    TrainLog log;
    AnyAdapter adapter;
};
TrainOutcome train_with_adapter(const SyntheticTask& task, AdapterKind kind,
                                const RankPolicy& policy, const TrainConfig& config);

ComparisonReport compare_runs(std::span<const TrainLog> logs);

/// One battery entry; the default battery spans 3 seeds x 3 shapes x
/// {noiseless, eps = 0.01}.
struct BatterySpec {
    TaskDims dims;
    index_t kp_rank_star = 1;
    double noise_eps = 0.0;
    std::uint64_t seed = 0;
    std::string id; // stable identifier used in file names
};

std::vector<BatterySpec> default_battery();

} // namespace kronadapt
