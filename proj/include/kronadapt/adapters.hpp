#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "kronadapt/kpsvd.hpp"
#include "kronadapt/kron.hpp"
#include "kronadapt/matrix.hpp"
#include "kronadapt/rank_select.hpp"

namespace kronadapt {

enum class AdapterKind { soka, lora, pissa, full, kron_random };

std::string to_string(AdapterKind kind);
AdapterKind parse_adapter_kind(const std::string& name);

/// Kronecker-sum adapter: a frozen residual plus trainable (sigma, U, V)
/// terms. soka_init produces terms from the truncated KPSVD of the weight so
/// that base + sum_k sigma_k * kron(U_k, V_k) reproduces it at initialization.
struct SokaAdapter {
    Matrix base;
    std::vector<KronTerm> terms;
    KronShape shape;
    RankDecision rank_decision;
};

/// Conventional low-rank adapter: frozen full weight, update scale * A * B^T
/// with A random and B zero at initialization (update starts at exactly
/// zero). scale is a fixed hyperparameter, not trained; the default of 1
/// keeps parameter-count comparisons clean.
struct LoraAdapter {
    Matrix base;
    Matrix A; // rows x r
    Matrix B; // cols x r
    double scale = 1.0;
};

/// Low-rank adapter initialized from the top-r singular triplets of the
/// weight; the frozen base is the residual, so base + A * B^T reproduces the
/// weight at initialization.
struct PissaAdapter {
    Matrix base;
    Matrix A;
    Matrix B;
};

/// Full fine-tuning baseline: every weight entry is trainable.
struct FullAdapter {
    Matrix weight;
};

/// Variant over the concrete adapter types; the kron_random ablation shares
/// the SokaAdapter representation.
using AnyAdapter = std::variant<SokaAdapter, LoraAdapter, PissaAdapter, FullAdapter>;

Matrix forward_any(const AnyAdapter& adapter, const Matrix& inputs);
Matrix merge_any(const AnyAdapter& adapter);

struct CostReport {
    std::uint64_t trainable_params = 0;
    std::uint64_t matvec_flops = 0;           // multiply-adds to apply the update to one vector
    std::uint64_t dense_equivalent_flops = 0; // rows * cols
};

/// Deterministic factor-shape chooser: m is the largest divisor of rows with
/// m*m <= rows (p = rows/m), and likewise n from cols. Balanced factors
/// minimize m*n + p*q for the fixed products.
KronShape choose_factor_shape(index_t rows, index_t cols);

SokaAdapter soka_init(const Matrix& weight, const KronShape& shape, const RankPolicy& policy);

/// KPSVD initialization at a caller-chosen rank, bypassing dynamic selection.
/// The decision audit still carries the spectrum and gap curves; r_energy is
/// left 0 since no threshold was applied.
SokaAdapter soka_init_manual(const Matrix& weight, const KronShape& shape, index_t rank);

/// A entries are drawn uniformly from (-1, 1) scaled by 1/sqrt(rank); B is
/// zero. The distribution is a fixed constant of the artifact.
LoraAdapter lora_init(const Matrix& weight, index_t rank, std::uint64_t seed,
                      double scale = 1.0);

PissaAdapter pissa_init(const Matrix& weight, index_t rank);

/// Ablation: Kronecker terms with LoRA-style initialization (sigma = 1,
/// U random unit-Frobenius, V zero) against the frozen full weight. The
/// update starts at zero; no spectrum information is used.
SokaAdapter kron_random_init(const Matrix& weight, const KronShape& shape, index_t rank,
                             std::uint64_t seed);

/// Applies one Kronecker term to a column vector of length n*q without
/// materializing the dense product: sigma * vec(V * unvec(x, q, n) * U^T),
/// length m*p. When madd_counter is non-null every fused multiply-add of the
/// two inner matrix products is counted (sigma scaling is folded into the
/// first product and not counted separately), so the total per call is
/// exactly p*q*n + p*n*m.
Matrix kron_matvec(const KronTerm& term, const Matrix& x, std::uint64_t* madd_counter = nullptr);

Matrix forward(const SokaAdapter& adapter, const Matrix& inputs);
Matrix forward(const LoraAdapter& adapter, const Matrix& inputs);
Matrix forward(const PissaAdapter& adapter, const Matrix& inputs);
Matrix forward(const FullAdapter& adapter, const Matrix& inputs);

struct SokaGradients {
    std::vector<double> sigma;
    std::vector<Matrix> U;
    std::vector<Matrix> V;
    Matrix input;
};

struct LowRankGradients {
    Matrix A;
    Matrix B;
    Matrix input;
};

struct FullGradients {
    Matrix weight;
    Matrix input;
};

// Batch-summed analytic gradients of <G, forward(adapter, X)> with respect to
// every trainable parameter, plus the gradient with respect to the inputs.
// Finite differences are the normative check for all of these.
SokaGradients backward(const SokaAdapter& adapter, const Matrix& inputs, const Matrix& upstream);
LowRankGradients backward(const LoraAdapter& adapter, const Matrix& inputs, const Matrix& upstream);
LowRankGradients backward(const PissaAdapter& adapter, const Matrix& inputs, const Matrix& upstream);
FullGradients backward(const FullAdapter& adapter, const Matrix& inputs, const Matrix& upstream);

Matrix merge(const SokaAdapter& adapter);
Matrix merge(const LoraAdapter& adapter);
Matrix merge(const PissaAdapter& adapter);
Matrix merge(const FullAdapter& adapter);

CostReport soka_cost(const KronShape& shape, index_t rank);
CostReport low_rank_cost(index_t rows, index_t cols, index_t rank);
CostReport full_cost(index_t rows, index_t cols);

CostReport cost_report(const SokaAdapter& adapter);
CostReport cost_report(const LoraAdapter& adapter);
CostReport cost_report(const PissaAdapter& adapter);
CostReport cost_report(const FullAdapter& adapter);

// Flat views over the trainable parameters, the single mutation entry point
// used by optimizers and finite-difference checks. Order: SoKA terms in order,
// each as (sigma, U row-major, V row-major); low-rank as A then B row-major;
// full as the weight row-major. flatten() emits gradients in the same order.
std::vector<double*> trainable_params(SokaAdapter& adapter);
std::vector<double*> trainable_params(LoraAdapter& adapter);
std::vector<double*> trainable_params(PissaAdapter& adapter);
std::vector<double*> trainable_params(FullAdapter& adapter);

std::vector<double> flatten(const SokaGradients& grads);
std::vector<double> flatten(const LowRankGradients& grads);
std::vector<double> flatten(const FullGradients& grads);

} // namespace kronadapt
