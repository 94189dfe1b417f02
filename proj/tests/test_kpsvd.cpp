#include "doctest.h"

#include <cmath>
#include <vector>

#include "kronadapt/adapters.hpp"
#include "kronadapt/kpsvd.hpp"
#include "kronadapt/svd.hpp"
#include "oracles.hpp"

using namespace kronadapt;

namespace {

Matrix unit_fro(Matrix m) {
    const double norm = frobenius_norm(m);
    for (double& v : m.values()) {
        v /= norm;
    }
    return m;
}

// Tail energy sqrt(sum_{k>=r} sigma_k^2) from an independent SVD of the
// rearranged weight.
double oracle_tail(const Matrix& w, const KronShape& shape, index_t r) {
    const SvdResult oracle = svd(rearrange(w, shape));
    double tail = 0.0;
    for (index_t k = r; k < oracle.S.size(); ++k) {
        tail += oracle.S[k] * oracle.S[k];
    }
    return std::sqrt(tail);
}

} // namespace

TEST_CASE("exact Kronecker input has KP-rank one") {
    const Matrix a = unit_fro(oracles::random_matrix(3, 2, 7));
    const Matrix b = unit_fro(oracles::random_matrix(2, 3, 8));
    const KronShape shape{3, 2, 2, 3};
    const KpsvdResult result = kpsvd(kron(a, b), shape, 1);

    CHECK(result.terms.size() == 1);
    CHECK(result.terms[0].sigma == doctest::Approx(1.0).epsilon(1e-12));
    for (index_t k = 1; k < result.spectrum.size(); ++k) {
        CHECK(result.spectrum[k] < 1e-12);
    }
    CHECK(result.residual_fro < 1e-12);
    CHECK(std::abs(frobenius_norm(result.terms[0].U) - 1.0) < 1e-10);
    CHECK(std::abs(frobenius_norm(result.terms[0].V) - 1.0) < 1e-10);
}

TEST_CASE("constructed orthogonal KP-rank-2 input is recovered") {
    // vec-orthonormal factor pairs with weights 2 and 1: the rearranged matrix
    // has exactly those singular values.
    const KronShape shape{2, 2, 2, 2};
    Matrix f1 = unit_fro(oracles::random_matrix(2, 2, 17));
    Matrix f2 = oracles::random_matrix(2, 2, 18);
    const double overlap = dot(f1, f2);
    for (index_t i = 0; i < f2.size(); ++i) {
        f2.values()[i] -= overlap * f1.values()[i];
    }
    f2 = unit_fro(std::move(f2));
    Matrix g1 = unit_fro(oracles::random_matrix(2, 2, 19));
    Matrix g2 = oracles::random_matrix(2, 2, 20);
    const double overlap_g = dot(g1, g2);
    for (index_t i = 0; i < g2.size(); ++i) {
        g2.values()[i] -= overlap_g * g1.values()[i];
    }
    g2 = unit_fro(std::move(g2));

    const Matrix w = 2.0 * kron(f1, g1) + kron(f2, g2);
    const KpsvdResult result = kpsvd(w, shape, 2);
    CHECK(result.spectrum[0] == doctest::Approx(2.0).epsilon(1e-10));
    CHECK(result.spectrum[1] == doctest::Approx(1.0).epsilon(1e-10));
    for (index_t k = 2; k < result.spectrum.size(); ++k) {
        CHECK(result.spectrum[k] < 1e-10);
    }
    CHECK(result.residual_fro < 1e-10);
}

TEST_CASE("residual equals tail energy on random input") {
    const KronShape shape{3, 2, 2, 3};
    const Matrix w = oracles::random_matrix(6, 6, 77);
    const KpsvdResult result = kpsvd(w, shape, 2);
    CHECK(oracles::rel_err(result.residual_fro, oracle_tail(w, shape, 2)) < 1e-8);
}

TEST_CASE("truncation optimality transfers across all ranks") {
    const KronShape shape{2, 3, 3, 2};
    const Matrix w = oracles::random_matrix(6, 6, 78);
    const index_t full = std::min(shape.left_size(), shape.right_size());
    double previous = std::numeric_limits<double>::infinity();
    for (index_t r = 0; r <= full; ++r) {
        const KpsvdResult result = kpsvd(w, shape, r);
        const double err = approximation_error(w, result);
        const double tail = oracle_tail(w, shape, r);
        CHECK(std::abs(err * err - tail * tail) <=
              1e-8 * std::max(frobenius_norm(w) * frobenius_norm(w), 1e-300));
        CHECK(err <= previous + 1e-12);
        previous = err;
    }
}

TEST_CASE("reconstruct round trips") {
    const KronShape shape{4, 2, 2, 4};
    const Matrix w = oracles::random_matrix(8, 8, 79);
    const index_t full = std::min(shape.left_size(), shape.right_size());

    const KpsvdResult complete = kpsvd(w, shape, full);
    CHECK(frobenius_norm(w - reconstruct(complete)) / frobenius_norm(w) < 1e-9);

    const KpsvdResult none = kpsvd(w, shape, 0);
    CHECK(frobenius_norm(reconstruct(none)) == 0.0);
    CHECK(none.spectrum.size() == full);

    const Matrix a = unit_fro(oracles::random_matrix(4, 2, 80));
    const Matrix b = unit_fro(oracles::random_matrix(2, 4, 81));
    const Matrix exact = kron(a, b);
    const KpsvdResult one = kpsvd(exact, shape, 1);
    CHECK(max_abs_diff(exact, reconstruct(one)) < 1e-10);
}

TEST_CASE("spectrum conserves energy and factors stay orthogonal") {
    const KronShape shape{3, 3, 3, 3};
    const Matrix w = oracles::random_matrix(9, 9, 82);
    const KpsvdResult result = kpsvd(w, shape, std::min(shape.left_size(), shape.right_size()));

    double energy = 0.0;
    for (double s : result.spectrum) {
        energy += s * s;
    }
    const double total = frobenius_norm(w);
    CHECK(oracles::rel_err(energy, total * total) < 1e-9);

    for (index_t j = 0; j < result.terms.size(); ++j) {
        for (index_t k = j; k < result.terms.size(); ++k) {
            if (j != k &&
                std::abs(result.spectrum[j] - result.spectrum[k]) < 1e-9 * result.spectrum[0]) {
                continue; // degenerate cluster, basis not pinned
            }
            const double target = j == k ? 1.0 : 0.0;
            CHECK(std::abs(dot(result.terms[j].U, result.terms[k].U) - target) < 1e-9);
            CHECK(std::abs(dot(result.terms[j].V, result.terms[k].V) - target) < 1e-9);
        }
    }
}

TEST_CASE("kpsvd is deterministic") {
    const KronShape shape{3, 2, 2, 3};
    const Matrix w = oracles::random_matrix(6, 6, 83);
    const KpsvdResult first = kpsvd(w, shape, 3);
    const KpsvdResult second = kpsvd(w, shape, 3);
    CHECK(first.spectrum == second.spectrum);
    CHECK(first.residual_fro == second.residual_fro);
    REQUIRE(first.terms.size() == second.terms.size());
    for (index_t k = 0; k < first.terms.size(); ++k) {
        CHECK(first.terms[k].sigma == second.terms[k].sigma);
        CHECK(first.terms[k].U == second.terms[k].U);
        CHECK(first.terms[k].V == second.terms[k].V);
    }
}

TEST_CASE("zero weight yields canonical zero terms") {
    const KronShape shape{2, 2, 2, 2};
    const Matrix zero(4, 4);
    const KpsvdResult result = kpsvd(zero, shape, 2);
    REQUIRE(result.terms.size() == 2);
    for (index_t k = 0; k < 2; ++k) {
        CHECK(result.terms[k].sigma == 0.0);
        // Canonical basis vector e_k unvectorized column-major.
        Matrix e(4, 1);
        e(k, 0) = 1.0;
        CHECK(result.terms[k].U == unvec(e, 2, 2));
    }
    CHECK(result.residual_fro == 0.0);
}

TEST_CASE("prime dimensions degrade to a single exact term") {
    // The balanced chooser returns m = n = 1 for prime extents, so the
    // rearrangement is a single row and one Kronecker term is exact.
    const KronShape shape = choose_factor_shape(7, 13);
    CHECK(shape.m == 1);
    CHECK(shape.n == 1);
    const Matrix w = oracles::random_matrix(7, 13, 86);
    const KpsvdResult result = kpsvd(w, shape, 1);
    CHECK(result.spectrum.size() == 1);
    CHECK(result.residual_fro <= 1e-12 * frobenius_norm(w));
    CHECK(max_abs_diff(reconstruct(result), w) < 1e-12);
}

TEST_CASE("kpsvd rejects bad arguments") {
    const Matrix w = oracles::random_matrix(6, 6, 84);
    CHECK_THROWS_AS(kpsvd(w, KronShape{3, 2, 2, 2}, 1), dimension_error);
    CHECK_THROWS_AS(kpsvd(w, KronShape{3, 2, 2, 3}, 7), argument_error);
    CHECK_THROWS_AS(approximation_error(oracles::random_matrix(4, 6, 85),
                                        kpsvd(w, KronShape{3, 2, 2, 3}, 1)),
                    dimension_error);
}
