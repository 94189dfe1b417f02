#include "doctest.h"

#include <cmath>
#include <vector>

#include "kronadapt/adapters.hpp"
#include "kronadapt/rng.hpp"
#include "oracles.hpp"

using namespace kronadapt;

namespace {

// Gradient-check loss <G, forward(adapter, X)>: backward computes exactly its
// parameter gradient, and central differences are the normative comparison.
template <typename Adapter>
void finite_difference_check(Adapter& adapter, const Matrix& inputs, const Matrix& upstream) {
    const auto analytic = flatten(backward(adapter, inputs, upstream));
    std::vector<double*> params = trainable_params(adapter);
    REQUIRE(analytic.size() == params.size());

    const auto value = [&] { return dot(upstream, forward(adapter, inputs)); };
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double numeric = oracles::central_difference(params[i], value, 1e-5);
        CHECK(oracles::grad_rel_err(analytic[i], numeric) <= 1e-5);
    }
}

void perturb_params(std::vector<double*> params, std::uint64_t seed) {
    Rng rng(seed);
    for (double* p : params) {
        *p += 0.01 * rng.normal();
    }
}

} // namespace

TEST_CASE("factor shape chooser picks balanced divisors") {
    const KronShape square = choose_factor_shape(64, 64);
    CHECK(square.m == 8);
    CHECK(square.p == 8);
    CHECK(square.n == 8);
    CHECK(square.q == 8);

    const KronShape rect = choose_factor_shape(60, 84);
    CHECK(rect.m == 6);
    CHECK(rect.p == 10);
    CHECK(rect.n == 7);
    CHECK(rect.q == 12);

    const KronShape prime = choose_factor_shape(7, 13);
    CHECK(prime.m == 1);
    CHECK(prime.p == 7);
    CHECK(prime.n == 1);
    CHECK(prime.q == 13);
}

TEST_CASE("soka_init on an exact Kronecker weight") {
    const Matrix a = oracles::random_matrix(3, 2, 50);
    const Matrix b = oracles::random_matrix(2, 3, 51);
    const Matrix w = kron(a, b);
    for (double tau : {0.5, 0.9, 0.99}) {
        RankPolicy policy;
        policy.tau = tau;
        const SokaAdapter adapter = soka_init(w, KronShape{3, 2, 2, 3}, policy);
        CHECK(adapter.rank_decision.r_final == 1);
        CHECK(frobenius_norm(adapter.base) < 1e-10 * frobenius_norm(w));
    }
}

TEST_CASE("soka_init residual identity and forward exactness") {
    const KronShape shape{4, 2, 2, 4};
    const Matrix w = oracles::random_matrix(8, 8, 52);
    const SokaAdapter adapter = soka_init(w, shape, RankPolicy{});

    const KpsvdResult kept{adapter.terms, shape, {}, 0.0};
    CHECK(frobenius_norm(w - (adapter.base + reconstruct(kept))) / frobenius_norm(w) < 1e-9);

    const Matrix x = oracles::random_matrix(8, 5, 53);
    const Matrix expected = w * x;
    CHECK(frobenius_norm(forward(adapter, x) - expected) / frobenius_norm(expected) < 1e-8);
}

TEST_CASE("pissa and lora initialization") {
    const Matrix w = oracles::random_matrix(6, 5, 54);

    const PissaAdapter pissa = pissa_init(w, 3);
    Matrix update = pissa.base;
    add_matmul_a_bt(update, 1.0, pissa.A, pissa.B);
    CHECK(frobenius_norm(w - update) / frobenius_norm(w) < 1e-9);
    const Matrix x = oracles::random_matrix(5, 4, 55);
    const Matrix expected = w * x;
    CHECK(frobenius_norm(forward(pissa, x) - expected) / frobenius_norm(expected) < 1e-8);

    const LoraAdapter lora = lora_init(w, 3, 99);
    CHECK(forward(lora, x) == lora.base * x); // zero update at init, exact
    CHECK(frobenius_norm(lora.A) > 0.0);
    for (double v : lora.B.values()) {
        CHECK(v == 0.0);
    }

    CHECK_THROWS_AS(pissa_init(w, 6), argument_error);
    CHECK_THROWS_AS(lora_init(w, 0, 1), argument_error);
}

TEST_CASE("kron_matvec identity and linearity") {
    const KronTerm eye{1.0, Matrix::identity(3), Matrix::identity(2)};
    const Matrix x = oracles::random_matrix(6, 1, 56);
    CHECK(max_abs_diff(kron_matvec(eye, x), x) == 0.0);

    const KronTerm term{0.8, oracles::random_matrix(3, 2, 57), oracles::random_matrix(2, 3, 58)};
    const Matrix u = oracles::random_matrix(6, 1, 59);
    const Matrix v = oracles::random_matrix(6, 1, 60);
    const Matrix sum = kron_matvec(term, u + v);
    CHECK(max_abs_diff(sum, kron_matvec(term, u) + kron_matvec(term, v)) < 1e-10);

    CHECK_THROWS_AS(kron_matvec(term, Matrix(5, 1)), dimension_error);
}

TEST_CASE("kron_matvec agrees with the dense oracle") {
    Rng rng(61);
    for (int trial = 0; trial < 25; ++trial) {
        const std::uint64_t seed = rng.next_u64();
        const KronTerm term{0.1 + rng.uniform(), oracles::random_matrix(3, 2, seed),
                            oracles::random_matrix(2, 3, seed + 1)};
        const Matrix x = oracles::random_matrix(6, 1, seed + 2);
        const Matrix dense = oracles::dense_kron(term.U, term.V);
        const Matrix expected = term.sigma * (dense * x);
        CHECK(max_abs_diff(kron_matvec(term, x), expected) < 1e-10);
    }
}

TEST_CASE("kron_matvec multiply-add count matches the two-GEMM formula") {
    const struct {
        index_t m, n, p, q;
    } shapes[] = {{3, 2, 2, 3}, {4, 4, 4, 4}, {2, 5, 3, 2}, {8, 8, 8, 8}};
    for (const auto& s : shapes) {
        const KronTerm term{1.3, oracles::random_matrix(s.m, s.n, 62),
                            oracles::random_matrix(s.p, s.q, 63)};
        const Matrix x = oracles::random_matrix(s.n * s.q, 1, 64);
        std::uint64_t counted = 0;
        (void)kron_matvec(term, x, &counted);
        CHECK(counted == s.p * s.q * s.n + s.p * s.n * s.m);
        // p*n*(q + m) <= m*p*n*q always, strictly when (m-1)(q-1) > 1.
        const std::uint64_t dense = static_cast<std::uint64_t>(s.m * s.p) * (s.n * s.q);
        if ((s.m - 1) * (s.q - 1) > 1) {
            CHECK(counted < dense);
        } else {
            CHECK(counted <= dense);
        }
    }
}

TEST_CASE("forward matches the merged dense operator") {
    const KronShape shape{3, 2, 2, 3};
    const Matrix w = oracles::random_matrix(6, 6, 65);
    SokaAdapter adapter = soka_init(w, shape, RankPolicy{});
    const Matrix x = oracles::random_matrix(6, 4, 66);

    const Matrix merged = merge(adapter);
    CHECK(frobenius_norm(forward(adapter, x) - merged * x) / frobenius_norm(merged * x) < 1e-9);

    // Single column reduces to the vector case.
    Matrix one_col(6, 1);
    for (index_t i = 0; i < 6; ++i) {
        one_col(i, 0) = x(i, 0);
    }
    const Matrix batch_out = forward(adapter, x);
    const Matrix single_out = forward(adapter, one_col);
    for (index_t i = 0; i < 6; ++i) {
        CHECK(batch_out(i, 0) == single_out(i, 0));
    }

    // Equivalence survives arbitrary parameter perturbation.
    perturb_params(trainable_params(adapter), 67);
    const Matrix merged2 = merge(adapter);
    CHECK(frobenius_norm(forward(adapter, x) - merged2 * x) / frobenius_norm(merged2 * x) < 1e-9);
}

TEST_CASE("merge identities") {
    const Matrix w = oracles::random_matrix(6, 6, 68);
    const LoraAdapter lora = lora_init(w, 2, 69);
    CHECK(max_abs_diff(merge(lora), lora.base) == 0.0);

    const KronShape shape{3, 2, 2, 3};
    const SokaAdapter soka = soka_init(w, shape, RankPolicy{});
    const KpsvdResult kept{soka.terms, shape, {}, 0.0};
    CHECK(max_abs_diff(merge(soka) - soka.base, reconstruct(kept)) < 1e-12);
}

TEST_CASE("cost reports reproduce the counting formulas") {
    const CostReport soka = soka_cost(KronShape{64, 64, 64, 64}, 128);
    CHECK(soka.trainable_params == 1048704);
    CHECK(soka.dense_equivalent_flops == 4096ull * 4096ull);
    CHECK(soka.matvec_flops == 128ull * (64ull * 64 * 64 + 64ull * 64 * 64));

    const CostReport lora = low_rank_cost(4096, 4096, 128);
    CHECK(lora.trainable_params == 1048576);

    CHECK(soka_cost(KronShape{4, 4, 4, 4}, 0).trainable_params == 0);

    // Near-parity at equal rank for square balanced factors: r(2N+1) vs 2Nr.
    const CostReport balanced = soka_cost(KronShape{8, 8, 8, 8}, 4);
    const CostReport low_rank = low_rank_cost(64, 64, 4);
    CHECK(balanced.trainable_params == low_rank.trainable_params + 4);
}

TEST_CASE("trainable parameter views match the cost accounting") {
    const Matrix w = oracles::random_matrix(8, 8, 70);
    SokaAdapter soka = soka_init(w, KronShape{4, 2, 2, 4}, RankPolicy{});
    CHECK(trainable_params(soka).size() == cost_report(soka).trainable_params);

    LoraAdapter lora = lora_init(w, 3, 71);
    CHECK(trainable_params(lora).size() == cost_report(lora).trainable_params);

    PissaAdapter pissa = pissa_init(w, 3);
    CHECK(trainable_params(pissa).size() == cost_report(pissa).trainable_params);

    FullAdapter full{w};
    CHECK(trainable_params(full).size() == cost_report(full).trainable_params);
}

TEST_CASE("zero upstream gradient gives zero parameter gradients") {
    const Matrix w = oracles::random_matrix(6, 6, 72);
    const SokaAdapter adapter = soka_init(w, KronShape{3, 2, 2, 3}, RankPolicy{});
    const Matrix x = oracles::random_matrix(6, 3, 73);
    const Matrix zero(6, 3);
    const auto grads = backward(adapter, x, zero);
    for (double g : flatten(grads)) {
        CHECK(g == 0.0);
    }
}

TEST_CASE("identity-factor grad_sigma reduces to a dot product") {
    SokaAdapter adapter{Matrix(6, 6), {KronTerm{0.7, Matrix::identity(2), Matrix::identity(3)}},
                        KronShape{2, 2, 3, 3}, RankDecision{}};
    const Matrix x = oracles::random_matrix(6, 1, 74);
    const Matrix g = oracles::random_matrix(6, 1, 75);
    const SokaGradients grads = backward(adapter, x, g);
    CHECK(grads.sigma[0] == doctest::Approx(dot(g, x)).epsilon(1e-12));
    finite_difference_check(adapter, x, g);
}

TEST_CASE("gradients match finite differences across seeds and shapes") {
    const struct {
        index_t rows, cols;
        KronShape shape;
    } cases[] = {
        {6, 6, {3, 2, 2, 3}},
        {4, 4, {2, 2, 2, 2}},
        {8, 15, {4, 3, 2, 5}},
    };
    for (std::uint64_t seed : {1, 2, 3}) {
        for (const auto& c : cases) {
            const Matrix w = oracles::random_matrix(c.rows, c.cols, 1000 + seed);
            const Matrix x = oracles::random_matrix(c.cols, 3, 2000 + seed);
            const Matrix g = oracles::random_matrix(c.rows, 3, 3000 + seed);

            SokaAdapter soka = soka_init(w, c.shape, RankPolicy{});
            perturb_params(trainable_params(soka), 4000 + seed);
            finite_difference_check(soka, x, g);

            SokaAdapter ablation = kron_random_init(w, c.shape, 2, 4100 + seed);
            finite_difference_check(ablation, x, g);

            LoraAdapter lora = lora_init(w, 2, 4200 + seed);
            perturb_params(trainable_params(lora), 4300 + seed);
            finite_difference_check(lora, x, g);

            PissaAdapter pissa = pissa_init(w, 2);
            perturb_params(trainable_params(pissa), 4400 + seed);
            finite_difference_check(pissa, x, g);

            FullAdapter full{w};
            finite_difference_check(full, x, g);
        }
    }
}

TEST_CASE("lora scale flows through forward, backward, and merge") {
    const Matrix w = oracles::random_matrix(6, 5, 4900);
    LoraAdapter scaled = lora_init(w, 2, 4901, 0.7);
    perturb_params(trainable_params(scaled), 4902);
    const Matrix x = oracles::random_matrix(5, 3, 4903);
    const Matrix g = oracles::random_matrix(6, 3, 4904);
    finite_difference_check(scaled, x, g);

    const Matrix merged = merge(scaled);
    CHECK(frobenius_norm(forward(scaled, x) - merged * x) / frobenius_norm(merged * x) < 1e-9);

    // Halving the scale halves the update part.
    LoraAdapter half = scaled;
    half.scale = 0.35;
    const Matrix update_full = merge(scaled) - scaled.base;
    const Matrix update_half = merge(half) - half.base;
    CHECK(max_abs_diff(0.5 * update_full, update_half) < 1e-12);

    CHECK_THROWS_AS(lora_init(w, 2, 1, -1.0), argument_error);
}

TEST_CASE("input gradients match finite differences") {
    const Matrix w = oracles::random_matrix(6, 6, 5000);
    SokaAdapter adapter = soka_init(w, KronShape{3, 2, 2, 3}, RankPolicy{});
    Matrix x = oracles::random_matrix(6, 2, 5001);
    const Matrix g = oracles::random_matrix(6, 2, 5002);
    const SokaGradients grads = backward(adapter, x, g);
    const auto value = [&] { return dot(g, forward(adapter, x)); };
    for (index_t i = 0; i < x.rows(); ++i) {
        for (index_t j = 0; j < x.cols(); ++j) {
            const double numeric = oracles::central_difference(&x(i, j), value, 1e-5);
            CHECK(oracles::grad_rel_err(grads.input(i, j), numeric) <= 1e-5);
        }
    }
}

TEST_CASE("forward and backward validate shapes") {
    const Matrix w = oracles::random_matrix(6, 6, 6000);
    const SokaAdapter adapter = soka_init(w, KronShape{3, 2, 2, 3}, RankPolicy{});
    CHECK_THROWS_AS(forward(adapter, Matrix(5, 2)), dimension_error);
    CHECK_THROWS_AS(backward(adapter, Matrix(6, 2), Matrix(6, 3)), dimension_error);
    CHECK_THROWS_AS(backward(adapter, Matrix(6, 2), Matrix(5, 2)), dimension_error);
}
