#include "kronadapt/adapters.hpp"

#include <cmath>
#include <string>

#include "kronadapt/rng.hpp"
#include "kronadapt/svd.hpp"

namespace kronadapt {

std::string to_string(AdapterKind kind) {
    switch (kind) {
    case AdapterKind::soka: return "soka";
    case AdapterKind::lora: return "lora";
    case AdapterKind::pissa: return "pissa";
    case AdapterKind::full: return "full";
    case AdapterKind::kron_random: return "kron_random";
    }
    return "unknown";
}

AdapterKind parse_adapter_kind(const std::string& name) {
    if (name == "soka") return AdapterKind::soka;
    if (name == "lora") return AdapterKind::lora;
    if (name == "pissa") return AdapterKind::pissa;
    if (name == "full") return AdapterKind::full;
    if (name == "kron_random") return AdapterKind::kron_random;
    throw argument_error("unknown adapter kind '" + name + "'");
}

KronShape choose_factor_shape(index_t rows, index_t cols) {
    if (rows == 0 || cols == 0) {
        throw dimension_error("factor shape requires positive dimensions");
    }
    const auto balanced = [](index_t extent) {
        index_t d = 1;
        for (index_t candidate = 1; candidate * candidate <= extent; ++candidate) {
            if (extent % candidate == 0) {
                d = candidate;
            }
        }
        return d;
    };
    KronShape shape;
    shape.m = balanced(rows);
    shape.p = rows / shape.m;
    shape.n = balanced(cols);
    shape.q = cols / shape.n;
    return shape;
}

SokaAdapter soka_init(const Matrix& weight, const KronShape& shape, const RankPolicy& policy) {
    const index_t full = std::min(shape.left_size(), shape.right_size());
    KpsvdResult decomposition = kpsvd(weight, shape, full);
    RankDecision decision = select_rank(decomposition.spectrum, policy);

    SokaAdapter adapter{Matrix(weight.rows(), weight.cols()), {}, shape, std::move(decision)};
    decomposition.terms.erase(decomposition.terms.begin() + adapter.rank_decision.r_final,
                              decomposition.terms.end());
    adapter.terms = std::move(decomposition.terms);

    const KpsvdResult kept{adapter.terms, shape, {}, 0.0};
    adapter.base = weight - reconstruct(kept);
    return adapter;
}

SokaAdapter soka_init_manual(const Matrix& weight, const KronShape& shape, index_t rank) {
    KpsvdResult decomposition =
        kpsvd(weight, shape, std::min(shape.left_size(), shape.right_size()));

    RankDecision decision;
    decision.spectrum = decomposition.spectrum;
    decision.gaps.reserve(decision.spectrum.size());
    for (index_t i = 0; i + 1 < decision.spectrum.size(); ++i) {
        decision.gaps.push_back(decision.spectrum[i] - decision.spectrum[i + 1]);
    }
    decision.r_elbow = elbow_rank(decision.spectrum);
    decision.energy_curve.assign(decision.spectrum.size(), 0.0);
    double total = 0.0;
    for (double s : decision.spectrum) {
        total += s * s;
    }
    if (total > 0.0) {
        double cumulative = 0.0;
        for (index_t k = 0; k < decision.spectrum.size(); ++k) {
            cumulative += decision.spectrum[k] * decision.spectrum[k];
            decision.energy_curve[k] = cumulative / total;
        }
    }
    if (rank > decision.spectrum.size()) {
        throw argument_error("manual rank " + std::to_string(rank) +
                             " exceeds spectrum length " +
                             std::to_string(decision.spectrum.size()));
    }
    decision.r_energy = 0;
    decision.r_final = rank;
    decision.clamped = false;

    SokaAdapter adapter{Matrix(weight.rows(), weight.cols()), {}, shape, std::move(decision)};
    decomposition.terms.erase(decomposition.terms.begin() + rank, decomposition.terms.end());
    adapter.terms = std::move(decomposition.terms);
    const KpsvdResult kept{adapter.terms, shape, {}, 0.0};
    adapter.base = weight - reconstruct(kept);
    return adapter;
}

LoraAdapter lora_init(const Matrix& weight, index_t rank, std::uint64_t seed, double scale) {
    if (rank == 0 || rank > std::min(weight.rows(), weight.cols())) {
        throw argument_error("lora rank must lie in [1, min(rows, cols)]");
    }
    if (!(scale > 0.0) || !std::isfinite(scale)) {
        throw argument_error("lora scale must be positive and finite");
    }
    Rng rng(seed);
    const double spread = 1.0 / std::sqrt(static_cast<double>(rank));
    Matrix a(weight.rows(), rank);
    for (double& v : a.values()) {
        v = spread * rng.uniform(-1.0, 1.0);
    }
    return LoraAdapter{weight, std::move(a), Matrix(weight.cols(), rank), scale};
}

PissaAdapter pissa_init(const Matrix& weight, index_t rank) {
    if (rank == 0 || rank > std::min(weight.rows(), weight.cols())) {
        throw argument_error("pissa rank must lie in [1, min(rows, cols)]");
    }
    const SvdResult factorization = svd(weight);
    Matrix a(weight.rows(), rank);
    Matrix b(weight.cols(), rank);
    for (index_t k = 0; k < rank; ++k) {
        const double root = std::sqrt(factorization.S[k]);
        for (index_t i = 0; i < weight.rows(); ++i) {
            a(i, k) = factorization.U(i, k) * root;
        }
        for (index_t i = 0; i < weight.cols(); ++i) {
            b(i, k) = factorization.Vt(k, i) * root;
        }
    }
    Matrix base = weight;
    add_matmul_a_bt(base, -1.0, a, b);
    return PissaAdapter{std::move(base), std::move(a), std::move(b)};
}

SokaAdapter kron_random_init(const Matrix& weight, const KronShape& shape, index_t rank,
                             std::uint64_t seed) {
    check_shape(shape, weight.rows(), weight.cols());
    if (rank > std::min(shape.left_size(), shape.right_size())) {
        throw argument_error("kron_random rank exceeds min(m*n, p*q)");
    }
    Rng rng(seed);
    SokaAdapter adapter{weight, {}, shape, RankDecision{}};
    adapter.rank_decision.r_final = rank;
    adapter.terms.reserve(rank);
    for (index_t k = 0; k < rank; ++k) {
        Matrix u(shape.m, shape.n);
        double norm = 0.0;
        for (double& v : u.values()) {
            v = rng.uniform(-1.0, 1.0);
            norm += v * v;
        }
        norm = std::sqrt(norm);
        for (double& v : u.values()) {
            v /= norm;
        }
        adapter.terms.push_back(KronTerm{1.0, std::move(u), Matrix(shape.p, shape.q)});
    }
    return adapter;
}

namespace {

void check_input_rows(index_t expected, const Matrix& inputs, const char* who) {
    if (inputs.rows() != expected) {
        throw dimension_error(std::string(who) + ": input has " + std::to_string(inputs.rows()) +
                              " rows, expected " + std::to_string(expected));
    }
}

void check_upstream(const Matrix& upstream, index_t rows, index_t cols) {
    if (upstream.rows() != rows || upstream.cols() != cols) {
        throw dimension_error("backward: upstream gradient shape " +
                              std::to_string(upstream.rows()) + "x" +
                              std::to_string(upstream.cols()) + " does not match output " +
                              std::to_string(rows) + "x" + std::to_string(cols));
    }
}

// out(:, col) += sigma * vec(V * Xt * U^T) for the q x n slab Xt taken from
// inputs(:, col). Shared by forward and kron_matvec.
void add_kron_term_column(Matrix& out, index_t out_col, const KronTerm& term,
                          const Matrix& inputs, index_t in_col, std::uint64_t* madd_counter) {
    const index_t m = term.U.rows();
    const index_t n = term.U.cols();
    const index_t p = term.V.rows();
    const index_t q = term.V.cols();

    // P = (sigma * V) * Xt, p x n; Xt(i, j) = inputs(i + j*q, in_col).
    Matrix prod(p, n);
    for (index_t i = 0; i < p; ++i) {
        for (index_t j = 0; j < n; ++j) {
            double acc = 0.0;
            for (index_t k = 0; k < q; ++k) {
                acc += term.V(i, k) * inputs(k + j * q, in_col);
                if (madd_counter) {
                    ++*madd_counter;
                }
            }
            prod(i, j) = term.sigma * acc;
        }
    }
    // out column += vec(P * U^T): entry (s + t*p) is row s, col t of P * U^T.
    for (index_t t = 0; t < m; ++t) {
        for (index_t s = 0; s < p; ++s) {
            double acc = 0.0;
            for (index_t k = 0; k < n; ++k) {
                acc += prod(s, k) * term.U(t, k);
                if (madd_counter) {
                    ++*madd_counter;
                }
            }
            out(s + t * p, out_col) += acc;
        }
    }
}

} // namespace

Matrix kron_matvec(const KronTerm& term, const Matrix& x, std::uint64_t* madd_counter) {
    const index_t in_len = term.U.cols() * term.V.cols();
    if (x.cols() != 1 || x.rows() != in_len) {
        throw dimension_error("kron_matvec: expected a column vector of length " +
                              std::to_string(in_len));
    }
    Matrix out(term.U.rows() * term.V.rows(), 1);
    add_kron_term_column(out, 0, term, x, 0, madd_counter);
    return out;
}

Matrix forward(const SokaAdapter& adapter, const Matrix& inputs) {
    check_input_rows(adapter.base.cols(), inputs, "soka forward");
    Matrix out(adapter.base.rows(), inputs.cols());
    add_matmul(out, 1.0, adapter.base, inputs);
    for (const KronTerm& term : adapter.terms) {
        for (index_t col = 0; col < inputs.cols(); ++col) {
            add_kron_term_column(out, col, term, inputs, col, nullptr);
        }
    }
    return out;
}

namespace {

Matrix low_rank_forward(const Matrix& base, const Matrix& a, const Matrix& b, double scale,
                        const Matrix& inputs) {
    Matrix out(base.rows(), inputs.cols());
    add_matmul(out, 1.0, base, inputs);
    Matrix bt_x(a.cols(), inputs.cols());
    add_matmul_at_b(bt_x, 1.0, b, inputs);
    add_matmul(out, scale, a, bt_x);
    return out;
}

LowRankGradients low_rank_backward(const Matrix& base, const Matrix& a, const Matrix& b,
                                   double scale, const Matrix& inputs, const Matrix& upstream) {
    LowRankGradients grads{Matrix(a.rows(), a.cols()), Matrix(b.rows(), b.cols()),
                           Matrix(inputs.rows(), inputs.cols())};
    // grad_A = s G (B^T X)^T, grad_B = s X (G^T A), grad_input = base^T G + s B (A^T G).
    Matrix bt_x(b.cols(), inputs.cols());
    add_matmul_at_b(bt_x, 1.0, b, inputs);
    add_matmul_a_bt(grads.A, scale, upstream, bt_x);
    Matrix gt_a(upstream.cols(), a.cols());
    add_matmul_at_b(gt_a, 1.0, upstream, a);
    add_matmul(grads.B, scale, inputs, gt_a);
    add_matmul_at_b(grads.input, 1.0, base, upstream);
    Matrix at_g(a.cols(), upstream.cols());
    add_matmul_at_b(at_g, 1.0, a, upstream);
    add_matmul(grads.input, scale, b, at_g);
    return grads;
}

} // namespace

Matrix forward(const LoraAdapter& adapter, const Matrix& inputs) {
    check_input_rows(adapter.base.cols(), inputs, "lora forward");
    return low_rank_forward(adapter.base, adapter.A, adapter.B, adapter.scale, inputs);
}

Matrix forward(const PissaAdapter& adapter, const Matrix& inputs) {
    check_input_rows(adapter.base.cols(), inputs, "pissa forward");
    return low_rank_forward(adapter.base, adapter.A, adapter.B, 1.0, inputs);
}

Matrix forward(const FullAdapter& adapter, const Matrix& inputs) {
    check_input_rows(adapter.weight.cols(), inputs, "full forward");
    return adapter.weight * inputs;
}

SokaGradients backward(const SokaAdapter& adapter, const Matrix& inputs, const Matrix& upstream) {
    check_input_rows(adapter.base.cols(), inputs, "soka backward");
    check_upstream(upstream, adapter.base.rows(), inputs.cols());

    SokaGradients grads{{}, {}, {}, Matrix(inputs.rows(), inputs.cols())};
    grads.sigma.assign(adapter.terms.size(), 0.0);
    grads.U.reserve(adapter.terms.size());
    grads.V.reserve(adapter.terms.size());
    for (const KronTerm& term : adapter.terms) {
        grads.U.emplace_back(term.U.rows(), term.U.cols());
        grads.V.emplace_back(term.V.rows(), term.V.cols());
    }
    add_matmul_at_b(grads.input, 1.0, adapter.base, upstream);

    const index_t batch = inputs.cols();
    for (index_t term_idx = 0; term_idx < adapter.terms.size(); ++term_idx) {
        const KronTerm& term = adapter.terms[term_idx];
        const index_t m = term.U.rows();
        const index_t n = term.U.cols();
        const index_t p = term.V.rows();
        const index_t q = term.V.cols();

        Matrix xt(q, n);
        Matrix gt(p, m);
        Matrix gu(p, n);    // Gt * U
        Matrix prod(p, n);  // V * Xt
        Matrix vt_gu(q, n); // V^T * GU
        for (index_t col = 0; col < batch; ++col) {
            for (index_t j = 0; j < n; ++j) {
                for (index_t i = 0; i < q; ++i) {
                    xt(i, j) = inputs(i + j * q, col);
                }
            }
            for (index_t j = 0; j < m; ++j) {
                for (index_t i = 0; i < p; ++i) {
                    gt(i, j) = upstream(i + j * p, col);
                }
            }
            for (double& v : gu.values()) {
                v = 0.0;
            }
            add_matmul(gu, 1.0, gt, term.U);
            for (double& v : prod.values()) {
                v = 0.0;
            }
            add_matmul(prod, 1.0, term.V, xt);

            grads.sigma[term_idx] += dot(gu, prod);
            // grad_V += sigma * Gt U Xt^T, grad_U += sigma * Gt^T (V Xt).
            add_matmul_a_bt(grads.V[term_idx], term.sigma, gu, xt);
            add_matmul_at_b(grads.U[term_idx], term.sigma, gt, prod);
            // grad_x += sigma * vec(V^T Gt U) = sigma * vec(V^T * GU).
            for (double& v : vt_gu.values()) {
                v = 0.0;
            }
            add_matmul_at_b(vt_gu, term.sigma, term.V, gu);
            for (index_t j = 0; j < n; ++j) {
                for (index_t i = 0; i < q; ++i) {
                    grads.input(i + j * q, col) += vt_gu(i, j);
                }
            }
        }
    }
    return grads;
}

LowRankGradients backward(const LoraAdapter& adapter, const Matrix& inputs,
                          const Matrix& upstream) {
    check_input_rows(adapter.base.cols(), inputs, "lora backward");
    check_upstream(upstream, adapter.base.rows(), inputs.cols());
    return low_rank_backward(adapter.base, adapter.A, adapter.B, adapter.scale, inputs,
                             upstream);
}

LowRankGradients backward(const PissaAdapter& adapter, const Matrix& inputs,
                          const Matrix& upstream) {
    check_input_rows(adapter.base.cols(), inputs, "pissa backward");
    check_upstream(upstream, adapter.base.rows(), inputs.cols());
    return low_rank_backward(adapter.base, adapter.A, adapter.B, 1.0, inputs, upstream);
}

FullGradients backward(const FullAdapter& adapter, const Matrix& inputs, const Matrix& upstream) {
    check_input_rows(adapter.weight.cols(), inputs, "full backward");
    check_upstream(upstream, adapter.weight.rows(), inputs.cols());
    FullGradients grads{Matrix(adapter.weight.rows(), adapter.weight.cols()),
                        Matrix(inputs.rows(), inputs.cols())};
    add_matmul_a_bt(grads.weight, 1.0, upstream, inputs);
    add_matmul_at_b(grads.input, 1.0, adapter.weight, upstream);
    return grads;
}

Matrix merge(const SokaAdapter& adapter) {
    const KpsvdResult kept{adapter.terms, adapter.shape, {}, 0.0};
    return adapter.base + reconstruct(kept);
}

Matrix merge(const LoraAdapter& adapter) {
    Matrix out = adapter.base;
    add_matmul_a_bt(out, adapter.scale, adapter.A, adapter.B);
    return out;
}

Matrix merge(const PissaAdapter& adapter) {
    Matrix out = adapter.base;
    add_matmul_a_bt(out, 1.0, adapter.A, adapter.B);
    return out;
}

Matrix merge(const FullAdapter& adapter) { return adapter.weight; }

Matrix forward_any(const AnyAdapter& adapter, const Matrix& inputs) {
    return std::visit([&](const auto& concrete) { return forward(concrete, inputs); }, adapter);
}

Matrix merge_any(const AnyAdapter& adapter) {
    return std::visit([](const auto& concrete) { return merge(concrete); }, adapter);
}

CostReport soka_cost(const KronShape& shape, index_t rank) {
    const std::uint64_t m = shape.m, n = shape.n, p = shape.p, q = shape.q;
    CostReport report;
    report.trainable_params = static_cast<std::uint64_t>(rank) * (m * n + p * q + 1);
    report.matvec_flops = static_cast<std::uint64_t>(rank) * (p * q * n + p * n * m);
    report.dense_equivalent_flops = (m * p) * (n * q);
    return report;
}

CostReport low_rank_cost(index_t rows, index_t cols, index_t rank) {
    CostReport report;
    report.trainable_params = static_cast<std::uint64_t>(rank) * (rows + cols);
    report.matvec_flops = static_cast<std::uint64_t>(rank) * (rows + cols);
    report.dense_equivalent_flops = static_cast<std::uint64_t>(rows) * cols;
    return report;
}

CostReport full_cost(index_t rows, index_t cols) {
    CostReport report;
    report.trainable_params = static_cast<std::uint64_t>(rows) * cols;
    report.matvec_flops = report.trainable_params;
    report.dense_equivalent_flops = report.trainable_params;
    return report;
}

CostReport cost_report(const SokaAdapter& adapter) {
    return soka_cost(adapter.shape, adapter.terms.size());
}

CostReport cost_report(const LoraAdapter& adapter) {
    return low_rank_cost(adapter.base.rows(), adapter.base.cols(), adapter.A.cols());
}

CostReport cost_report(const PissaAdapter& adapter) {
    return low_rank_cost(adapter.base.rows(), adapter.base.cols(), adapter.A.cols());
}

CostReport cost_report(const FullAdapter& adapter) {
    return full_cost(adapter.weight.rows(), adapter.weight.cols());
}

std::vector<double*> trainable_params(SokaAdapter& adapter) {
    std::vector<double*> params;
    for (KronTerm& term : adapter.terms) {
        params.push_back(&term.sigma);
        for (double& v : term.U.values()) {
            params.push_back(&v);
        }
        for (double& v : term.V.values()) {
            params.push_back(&v);
        }
    }
    return params;
}

namespace {

std::vector<double*> low_rank_params(Matrix& a, Matrix& b) {
    std::vector<double*> params;
    params.reserve(a.size() + b.size());
    for (double& v : a.values()) {
        params.push_back(&v);
    }
    for (double& v : b.values()) {
        params.push_back(&v);
    }
    return params;
}

} // namespace

std::vector<double*> trainable_params(LoraAdapter& adapter) {
    return low_rank_params(adapter.A, adapter.B);
}

std::vector<double*> trainable_params(PissaAdapter& adapter) {
    return low_rank_params(adapter.A, adapter.B);
}

std::vector<double*> trainable_params(FullAdapter& adapter) {
    std::vector<double*> params;
    params.reserve(adapter.weight.size());
    for (double& v : adapter.weight.values()) {
        params.push_back(&v);
    }
    return params;
}

std::vector<double> flatten(const SokaGradients& grads) {
    std::vector<double> flat;
    for (index_t k = 0; k < grads.sigma.size(); ++k) {
        flat.push_back(grads.sigma[k]);
        flat.insert(flat.end(), grads.U[k].values().begin(), grads.U[k].values().end());
        flat.insert(flat.end(), grads.V[k].values().begin(), grads.V[k].values().end());
    }
    return flat;
}

std::vector<double> flatten(const LowRankGradients& grads) {
    std::vector<double> flat;
    flat.reserve(grads.A.size() + grads.B.size());
    flat.insert(flat.end(), grads.A.values().begin(), grads.A.values().end());
    flat.insert(flat.end(), grads.B.values().begin(), grads.B.values().end());
    return flat;
}

std::vector<double> flatten(const FullGradients& grads) {
    return std::vector<double>(grads.weight.values().begin(), grads.weight.values().end());
}

} // namespace kronadapt
