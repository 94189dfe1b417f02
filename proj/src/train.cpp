#include "kronadapt/train.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "kronadapt/rng.hpp"

namespace kronadapt {

void TrainConfig::validate() const {
    if (steps == 0) {
        throw argument_error("train config: steps must be >= 1");
    }
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
        throw argument_error("train config: learning rate must be positive and finite");
    }
    if (optimizer == OptimizerKind::momentum && !(momentum_beta >= 0.0 && momentum_beta < 1.0)) {
        throw argument_error("train config: momentum beta must lie in [0, 1)");
    }
}

namespace {

// r mutually orthonormal vectors of the given length, unvectorized to
// rows x cols factors. Two Gram-Schmidt passes keep orthogonality tight.
std::vector<Matrix> orthonormal_factors(Rng& rng, index_t rows, index_t cols, index_t count) {
    const index_t length = rows * cols;
    std::vector<std::vector<double>> basis;
    basis.reserve(count);
    while (basis.size() < count) {
        std::vector<double> v(length);
        for (double& x : v) {
            x = rng.normal();
        }
        for (int pass = 0; pass < 2; ++pass) {
            for (const auto& u : basis) {
                double proj = 0.0;
                for (index_t i = 0; i < length; ++i) {
                    proj += v[i] * u[i];
                }
                for (index_t i = 0; i < length; ++i) {
                    v[i] -= proj * u[i];
                }
            }
        }
        double norm = 0.0;
        for (double x : v) {
            norm += x * x;
        }
        norm = std::sqrt(norm);
        if (norm < 1e-8) {
            continue; // degenerate draw, retry
        }
        for (double& x : v) {
            x /= norm;
        }
        basis.push_back(std::move(v));
    }
    std::vector<Matrix> factors;
    factors.reserve(count);
    for (auto& v : basis) {
        factors.push_back(unvec(Matrix(length, 1, std::move(v)), rows, cols));
    }
    return factors;
}

} // namespace

SyntheticTask make_task(const TaskDims& dims, index_t kp_rank_star, double noise_eps,
                        std::uint64_t seed) {
    if (dims.rows == 0 || dims.cols == 0) {
        throw argument_error("make_task: dims must be positive");
    }
    if (kp_rank_star == 0) {
        throw argument_error("make_task: kp_rank_star must be >= 1");
    }
    if (!(noise_eps >= 0.0) || !std::isfinite(noise_eps)) {
        throw argument_error("make_task: noise_eps must be nonnegative and finite");
    }
    const KronShape shape = choose_factor_shape(dims.rows, dims.cols);
    if (kp_rank_star > std::min(shape.left_size(), shape.right_size())) {
        throw argument_error("make_task: kp_rank_star " + std::to_string(kp_rank_star) +
                             " exceeds min(m*n, p*q) for the chosen factor shape");
    }

    Rng rng(seed);
    const auto left = orthonormal_factors(rng, shape.m, shape.n, kp_rank_star);
    const auto right = orthonormal_factors(rng, shape.p, shape.q, kp_rank_star);

    // Closely spaced leading weights put both the largest spectral gap and the
    // tau = 0.95 energy crossing at kp_rank_star, so dynamic selection recovers
    // the planted rank.
    Matrix w0(dims.rows, dims.cols);
    Matrix delta(dims.rows, dims.cols);
    for (index_t k = 0; k < kp_rank_star; ++k) {
        const double d_k = 1.0 - 0.05 * static_cast<double>(k);
        const double c_k = 0.5 * d_k;
        const Matrix block = kron(left[k], right[k]);
        auto wv = w0.values();
        auto dv = delta.values();
        auto bv = block.values();
        for (index_t i = 0; i < bv.size(); ++i) {
            wv[i] += d_k * bv[i];
            dv[i] += c_k * bv[i];
        }
    }
    if (noise_eps > 0.0) {
        Matrix noise(dims.rows, dims.cols);
        for (double& v : noise.values()) {
            v = rng.normal();
        }
        const double scale = noise_eps / frobenius_norm(noise);
        auto dv = delta.values();
        auto nv = noise.values();
        for (index_t i = 0; i < dv.size(); ++i) {
            dv[i] += scale * nv[i];
        }
    }

    const index_t samples = dims.samples > 0 ? dims.samples : 2 * dims.cols;
    Matrix inputs(dims.cols, samples);
    for (double& v : inputs.values()) {
        v = rng.normal();
    }

    SyntheticTask task{std::move(w0),  Matrix(1, 1),  std::move(inputs), Matrix(1, 1),
                       shape,          kp_rank_star,  noise_eps,         seed};
    task.w_star = task.w0 + delta;
    task.targets = task.w_star * task.inputs;
    return task;
}

namespace {

double l2_norm(std::span<const double> values) {
    double sum = 0.0;
    for (double v : values) {
        sum += v * v;
    }
    return std::sqrt(sum);
}

template <typename Adapter, typename Gradients>
TrainLog run_training(Adapter& adapter, const SyntheticTask& task, const TrainConfig& config,
                      const std::string& method) {
    TrainLog log;
    log.method = method;
    log.records.reserve(config.steps);

    std::vector<double*> params = trainable_params(adapter);
    std::vector<double> velocity;
    if (config.optimizer == OptimizerKind::momentum) {
        velocity.assign(params.size(), 0.0);
    }

    const index_t samples = task.inputs.cols();
    const index_t batch =
        config.batch_size == 0 ? samples : std::min<index_t>(config.batch_size, samples);
    const double denom = static_cast<double>(batch) * static_cast<double>(task.targets.rows());

    Matrix batch_x(task.inputs.rows(), batch);
    Matrix batch_t(task.targets.rows(), batch);
    for (index_t step = 0; step < config.steps; ++step) {
        const index_t start = (step * batch) % samples;
        for (index_t c = 0; c < batch; ++c) {
            const index_t src = (start + c) % samples;
            for (index_t i = 0; i < batch_x.rows(); ++i) {
                batch_x(i, c) = task.inputs(i, src);
            }
            for (index_t i = 0; i < batch_t.rows(); ++i) {
                batch_t(i, c) = task.targets(i, src);
            }
        }

        Matrix outputs = forward(adapter, batch_x);
        double loss = 0.0;
        {
            auto ov = outputs.values();
            auto tv = batch_t.values();
            for (index_t i = 0; i < ov.size(); ++i) {
                const double e = ov[i] - tv[i];
                loss += e * e;
                ov[i] = 2.0 * e / denom; // outputs becomes the upstream gradient
            }
            loss /= denom;
        }

        Gradients grads = backward(adapter, batch_x, outputs);
        std::vector<double> flat = flatten(grads);
        const double grad_norm = l2_norm(flat);
        log.records.push_back(TrainRecord{step, loss, grad_norm});

        if (!std::isfinite(loss) || !std::isfinite(grad_norm)) {
            log.diverged = true;
            log.diverged_at_step = step;
            break;
        }

        if (config.optimizer == OptimizerKind::momentum) {
            for (index_t i = 0; i < params.size(); ++i) {
                velocity[i] = config.momentum_beta * velocity[i] + flat[i];
                *params[i] -= config.learning_rate * velocity[i];
            }
        } else {
            for (index_t i = 0; i < params.size(); ++i) {
                *params[i] -= config.learning_rate * flat[i];
            }
        }
    }
    return log;
}

index_t baseline_rank(const SyntheticTask& task, const RankPolicy& policy,
                      const TrainConfig& config) {
    if (config.adapter_rank > 0) {
        return config.adapter_rank;
    }
    const KpsvdResult spectrum_only = kpsvd(task.w0, task.shape, 0);
    return select_rank(spectrum_only.spectrum, policy).r_final;
}

} // namespace

TrainOutcome train_with_adapter(const SyntheticTask& task, AdapterKind kind,
                                const RankPolicy& policy, const TrainConfig& config) {
    config.validate();
    policy.validate();
    const std::string method = to_string(kind);
    switch (kind) {
    case AdapterKind::soka: {
        SokaAdapter adapter = soka_init(task.w0, task.shape, policy);
        TrainLog log = run_training<SokaAdapter, SokaGradients>(adapter, task, config, method);
        return TrainOutcome{std::move(log), std::move(adapter)};
    }
    case AdapterKind::kron_random: {
        SokaAdapter adapter =
            kron_random_init(task.w0, task.shape, baseline_rank(task, policy, config), config.seed);
        TrainLog log = run_training<SokaAdapter, SokaGradients>(adapter, task, config, method);
        return TrainOutcome{std::move(log), std::move(adapter)};
    }
    case AdapterKind::lora: {
        LoraAdapter adapter = lora_init(task.w0, baseline_rank(task, policy, config), config.seed);
        TrainLog log = run_training<LoraAdapter, LowRankGradients>(adapter, task, config, method);
        return TrainOutcome{std::move(log), std::move(adapter)};
    }
    case AdapterKind::pissa: {
        PissaAdapter adapter = pissa_init(task.w0, baseline_rank(task, policy, config));
        TrainLog log = run_training<PissaAdapter, LowRankGradients>(adapter, task, config, method);
        return TrainOutcome{std::move(log), std::move(adapter)};
    }
    case AdapterKind::full: {
        FullAdapter adapter{task.w0};
        TrainLog log = run_training<FullAdapter, FullGradients>(adapter, task, config, method);
        return TrainOutcome{std::move(log), std::move(adapter)};
    }
    }
    throw argument_error("train: unknown adapter kind");
}

TrainLog train(const SyntheticTask& task, AdapterKind kind, const RankPolicy& policy,
               const TrainConfig& config) {
    return train_with_adapter(task, kind, policy, config).log;
}

namespace {

double quantile(std::vector<double> sorted, double fraction) {
    if (sorted.empty()) {
        return 0.0;
    }
    const double pos = fraction * static_cast<double>(sorted.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(pos);
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] * (1.0 - frac) + sorted[hi] * frac;
}

} // namespace

ComparisonReport compare_runs(std::span<const TrainLog> logs) {
    if (logs.empty()) {
        throw argument_error("compare_runs: no logs");
    }
    index_t steps = 0;
    for (const TrainLog& log : logs) {
        if (log.records.empty()) {
            throw argument_error("compare_runs: log '" + log.method + "' has no records");
        }
        if (!log.diverged) {
            if (steps == 0) {
                steps = log.records.size();
            } else if (log.records.size() != steps) {
                throw argument_error("compare_runs: step counts differ (" +
                                     std::to_string(log.records.size()) + " vs " +
                                     std::to_string(steps) + ")");
            }
        }
    }
    if (steps == 0) {
        steps = logs.front().records.size();
    }

    ComparisonReport report;
    report.steps = steps;
    for (const TrainLog& log : logs) {
        MethodSummary summary;
        summary.method = log.method;
        summary.steps = log.records.size();
        summary.diverged = log.diverged;
        summary.loss_step0 = log.records.front().loss;
        summary.loss_final = log.records.back().loss;

        std::vector<double> losses;
        losses.reserve(log.records.size());
        double auc = 0.0;
        double max_grad = 0.0;
        for (std::size_t i = 0; i < log.records.size(); ++i) {
            const TrainRecord& rec = log.records[i];
            losses.push_back(rec.loss);
            max_grad = std::max(max_grad, rec.grad_norm);
            if (i > 0) {
                auc += 0.5 * (log.records[i - 1].loss + rec.loss);
            }
        }
        std::sort(losses.begin(), losses.end());
        summary.loss_q25 = quantile(losses, 0.25);
        summary.loss_q50 = quantile(losses, 0.50);
        summary.loss_q75 = quantile(losses, 0.75);
        summary.loss_auc = auc;
        summary.max_grad_norm = max_grad;
        report.methods.push_back(std::move(summary));
    }
    return report;
}

std::vector<BatterySpec> default_battery() {
    struct ShapeEntry {
        index_t rows;
        index_t cols;
        index_t rank;
    };
    const ShapeEntry shapes[] = {{16, 16, 1}, {64, 64, 2}, {60, 84, 3}};
    const double eps_values[] = {0.0, 0.01};
    const std::uint64_t seeds[] = {1, 2, 3};

    std::vector<BatterySpec> specs;
    for (const ShapeEntry& entry : shapes) {
        for (double eps : eps_values) {
            for (std::uint64_t seed : seeds) {
                BatterySpec spec;
                spec.dims = TaskDims{entry.rows, entry.cols, 0};
                spec.kp_rank_star = entry.rank;
                spec.noise_eps = eps;
                spec.seed = seed;
                spec.id = std::to_string(entry.rows) + "x" + std::to_string(entry.cols) + "_r" +
                          std::to_string(entry.rank) + (eps > 0.0 ? "_noisy" : "_clean") +
                          "_seed" + std::to_string(seed);
                specs.push_back(std::move(spec));
            }
        }
    }
    return specs;
}

} // namespace kronadapt
