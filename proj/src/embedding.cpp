#include "qhpm/embedding.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace qhpm {

namespace {

std::size_t checked_mul(std::size_t a, std::size_t b, const char* what) {
    std::size_t out = 0;
    if (__builtin_mul_overflow(a, b, &out)) {
        fail(ErrorKind::CapExceeded, std::string(what) + ": size overflow");
    }
    return out;
}

std::size_t checked_add(std::size_t a, std::size_t b, const char* what) {
    std::size_t out = 0;
    if (__builtin_add_overflow(a, b, &out)) {
        fail(ErrorKind::CapExceeded, std::string(what) + ": size overflow");
    }
    return out;
}

std::size_t ipow(std::size_t base, std::size_t e) {
    std::size_t out = 1;
    for (std::size_t k = 0; k < e; ++k) {
        out = checked_mul(out, base, "ipow");
    }
    return out;
}

// Number of L-tuples of non-negative integers summing to exactly s.
std::size_t tuples_with_sum(std::size_t s, std::size_t L) {
    return L == 0 ? (s == 0 ? 1 : 0) : binomial(s + L - 1, L - 1);
}

}  // namespace

std::size_t binomial(std::size_t n, std::size_t k) {
    if (k > n) {
        return 0;
    }
    k = std::min(k, n - k);
    std::size_t out = 1;
    for (std::size_t i = 1; i <= k; ++i) {
        // out * (n-k+i) is divisible by i; divide by the gcd first to delay overflow.
        const std::size_t num = n - k + i;
        const std::size_t g = std::gcd(out, i);
        out = checked_mul(out / g, num / (i / g), "binomial");
    }
    return out;
}

std::vector<MultiIndex> enumerate_level(std::size_t c, std::size_t i) {
    require(i <= c, ErrorKind::Validation,
            "enumerate_level: level " + std::to_string(i) + " exceeds order " + std::to_string(c));
    if (i == 0) {
        return {MultiIndex{0}};
    }
    std::vector<MultiIndex> out;
    MultiIndex a(i + 1, 0);
    // Compositions of `rem` into slots k..i, visited in lexicographic order.
    auto fill = [&](auto&& self, std::size_t k, std::size_t rem) -> void {
        if (k == i) {
            a[k] = rem;
            out.push_back(a);
            return;
        }
        for (std::size_t v = 0; v <= rem; ++v) {
            a[k] = v;
            self(self, k + 1, rem - v);
        }
    };
    for (std::size_t s = 0; s <= c - i; ++s) {
        fill(fill, 0, s);
    }
    return out;
}

std::size_t embedding_dimension(std::size_t n, std::size_t c) {
    const std::size_t total = ipow(n + 1, c + 1);
    return total - 1 - checked_mul(c, n, "embedding_dimension");
}

EmbeddingIndexMap::EmbeddingIndexMap(std::size_t n, std::size_t c, std::size_t N_cap) : n_(n), c_(c) {
    require(n > 0, ErrorKind::Validation, "embedding: n must be positive");
    beta_.resize(c + 1);
    block_size_.resize(c + 1);
    level_offset_.resize(c + 1);
    std::size_t pos = 0;
    for (std::size_t i = 0; i <= c; ++i) {
        beta_[i] = i == 0 ? 1 : binomial(c + 1, i + 1);
        block_size_[i] = ipow(n, i + 1);
        level_offset_[i] = pos;
        pos = checked_add(pos, checked_mul(beta_[i], block_size_[i], "embedding"), "embedding");
        require(pos <= N_cap, ErrorKind::CapExceeded,
                "embedding dimension exceeds cap " + std::to_string(N_cap) + " (n = " + std::to_string(n) +
                    ", c = " + std::to_string(c) + ")");
    }
    N_ = pos;
}

std::size_t EmbeddingIndexMap::offset(std::size_t i, std::size_t j) const {
    require(i <= c_ && j < beta_[i], ErrorKind::Validation, "embedding: block index out of range");
    return level_offset_[i] + j * block_size_[i];
}

std::size_t EmbeddingIndexMap::rank(std::size_t i, std::span<const std::size_t> a) const {
    require(i <= c_, ErrorKind::Validation, "rank: level out of range");
    require(a.size() == i + 1, ErrorKind::Validation, "rank: multi-index length must be level + 1");
    const std::size_t sum = std::accumulate(a.begin(), a.end(), std::size_t{0});
    if (i == 0) {
        require(sum == 0, ErrorKind::Validation, "rank: level 0 only admits (0)");
        return 0;
    }
    require(sum <= c_ - i, ErrorKind::Validation, "rank: inadmissible multi-index (sum exceeds c - level)");
    const std::size_t L = i + 1;
    std::size_t j = 0;
    for (std::size_t s = 0; s < sum; ++s) {
        j += tuples_with_sum(s, L);
    }
    std::size_t rem = sum;
    for (std::size_t k = 0; k + 1 < L; ++k) {
        for (std::size_t v = 0; v < a[k]; ++v) {
            j += tuples_with_sum(rem - v, L - k - 1);
        }
        rem -= a[k];
    }
    return j;
}

MultiIndex EmbeddingIndexMap::unrank(std::size_t i, std::size_t j) const {
    require(i <= c_ && j < beta_[i], ErrorKind::Validation, "unrank: (level, position) out of range");
    if (i == 0) {
        return {0};
    }
    const std::size_t L = i + 1;
    std::size_t s = 0;
    while (j >= tuples_with_sum(s, L)) {
        j -= tuples_with_sum(s, L);
        ++s;
    }
    MultiIndex a(L, 0);
    std::size_t rem = s;
    for (std::size_t k = 0; k + 1 < L; ++k) {
        std::size_t v = 0;
        while (true) {
            const std::size_t cnt = tuples_with_sum(rem - v, L - k - 1);
            if (j < cnt) {
                break;
            }
            j -= cnt;
            ++v;
        }
        a[k] = v;
        rem -= v;
    }
    a[L - 1] = rem;
    return a;
}

std::span<const double> EmbeddingIndexMap::block(std::span<const double> y, std::size_t i, std::size_t j) const {
    require(y.size() == N_, ErrorKind::Validation, "block: vector length must equal N");
    return y.subspan(offset(i, j), block_size_[i]);
}

SparseMatrix assemble_A(const QuadraticODE& ode, const EmbeddingIndexMap& index) {
    const std::size_t n = ode.n;
    const std::size_t c = index.c();
    require(index.n() == n, ErrorKind::Validation, "assemble_A: index map dimension differs from the ODE");
    SparseBuilder builder(index.N(), index.N());

    // Level 0: F1 on the diagonal, β_1 copies of F2 to the right.
    for (const auto& t : ode.F1.triplets()) {
        builder.add(t.row, t.col, t.value);
    }
    if (c >= 1) {
        const auto f2 = ode.F2.triplets();
        for (std::size_t j = 0; j < index.beta(1); ++j) {
            const std::size_t col0 = index.offset(1, j);
            for (const auto& t : f2) {
                builder.add(t.row, col0 + t.col, t.value);
            }
        }
    }

    for (std::size_t i = 1; i <= c; ++i) {
        const std::size_t bs = index.block_size(i);
        std::vector<std::size_t> place(i + 1);  // n^{i-k}: weight of digit k
        for (std::size_t k = 0; k <= i; ++k) {
            place[k] = 1;
            for (std::size_t e = 0; e < i - k; ++e) place[k] *= n;
        }
        for (std::size_t j = 0; j < index.beta(i); ++j) {
            const MultiIndex a = index.unrank(i, j);
            const std::size_t row0 = index.offset(i, j);

            // Targets of the F2 coupling: every slot with a_k ≥ 1 split as (l, a_k−1−l).
            struct Target {
                std::size_t slot;
                std::size_t col0;
            };
            std::vector<Target> targets;
            for (std::size_t k = 0; k <= i; ++k) {
                for (std::size_t l = 0; l < a[k]; ++l) {
                    MultiIndex b;
                    b.reserve(i + 2);
                    b.insert(b.end(), a.begin(), a.begin() + static_cast<std::ptrdiff_t>(k));
                    b.push_back(l);
                    b.push_back(a[k] - 1 - l);
                    b.insert(b.end(), a.begin() + static_cast<std::ptrdiff_t>(k + 1), a.end());
                    targets.push_back({k, index.offset(i + 1, index.rank(i + 1, b))});
                }
            }

            for (std::size_t r = 0; r < bs; ++r) {
                for (std::size_t k = 0; k <= i; ++k) {
                    const std::size_t dk = (r / place[k]) % n;
                    const auto f1row = ode.F1.row(dk);
                    for (std::size_t e = 0; e < f1row.cols.size(); ++e) {
                        const std::size_t col = r + f1row.cols[e] * place[k] - dk * place[k];
                        builder.add(row0 + r, row0 + col, f1row.values[e]);
                    }
                }
                for (const auto& tg : targets) {
                    const std::size_t k = tg.slot;
                    const std::size_t dk = (r / place[k]) % n;
                    const std::size_t high = r / (place[k] * n);
                    const std::size_t low = r % place[k];
                    const auto f2row = ode.F2.row(dk);
                    for (std::size_t e = 0; e < f2row.cols.size(); ++e) {
                        const std::size_t col = (high * n * n + f2row.cols[e]) * place[k] + low;
                        builder.add(row0 + r, tg.col0 + col, f2row.values[e]);
                    }
                }
            }
        }
    }
    return std::move(builder).finalize();
}

Vector assemble_y_in(const QuadraticODE& ode, const EmbeddingIndexMap& index) {
    require(index.n() == ode.n, ErrorKind::Validation, "assemble_y_in: index map dimension differs from the ODE");
    Vector y(index.N(), 0.0);
    Vector power = ode.u_in;
    for (std::size_t i = 0; i <= index.c(); ++i) {
        if (i > 0) {
            power = kron(power, ode.u_in);
        }
        std::copy(power.begin(), power.end(), y.begin() + static_cast<std::ptrdiff_t>(index.offset(i, 0)));
    }
    return y;
}

EmbeddedSystem embed(const QuadraticODE& ode, std::size_t c, std::size_t N_cap) {
    EmbeddingIndexMap index(ode.n, c, N_cap);
    SparseMatrix A = assemble_A(ode, index);
    Vector y_in = assemble_y_in(ode, index);
    const double norm_A = A.nnz() == 0 ? 0.0 : spectral_norm(A);
    return EmbeddedSystem{std::move(index), std::move(A), std::move(y_in), norm_A};
}

Vector embedded_state(const EmbeddingIndexMap& index, std::span<const Vector> nu) {
    require(nu.size() == index.c() + 1, ErrorKind::Validation, "embedded_state: need orders 0..c");
    Vector y(index.N(), 0.0);
    for (const auto& v : nu) {
        require(v.size() == index.n(), ErrorKind::Validation, "embedded_state: order has wrong dimension");
        axpy(1.0, v, std::span<double>(y.data(), index.n()));
    }
    for (std::size_t i = 1; i <= index.c(); ++i) {
        for (std::size_t j = 0; j < index.beta(i); ++j) {
            const MultiIndex a = index.unrank(i, j);
            Vector prod = nu[a[0]];
            for (std::size_t k = 1; k < a.size(); ++k) {
                prod = kron(prod, nu[a[k]]);
            }
            std::copy(prod.begin(), prod.end(), y.begin() + static_cast<std::ptrdiff_t>(index.offset(i, j)));
        }
    }
    return y;
}

double embedded_norm(const EmbeddingIndexMap& index, std::span<const Vector> nu) {
    require(nu.size() == index.c() + 1, ErrorKind::Validation, "embedded_norm: need orders 0..c");
    Vector sum(index.n(), 0.0);
    std::vector<double> sq(nu.size());
    for (std::size_t l = 0; l < nu.size(); ++l) {
        axpy(1.0, nu[l], sum);
        sq[l] = norm2_squared(nu[l]);
    }
    double total = norm2_squared(sum);
    for (std::size_t i = 1; i <= index.c(); ++i) {
        for (const auto& a : enumerate_level(index.c(), i)) {
            double p = 1.0;
            for (std::size_t ak : a) {
                p *= sq[ak];
            }
            total += p;
        }
    }
    return std::sqrt(total);
}

StructuralReport structural_report(const QuadraticODE& ode, const EmbeddedSystem& sys, std::size_t dense_cap,
                                   bool throw_on_violation) {
    StructuralReport rep;
    const std::size_t c = sys.index.c();
    rep.s = ode.sparsity();
    rep.max_row_nnz = sys.A.max_row_nnz();
    rep.max_col_nnz = sys.A.max_col_nnz();
    rep.sparsity_witness = rep.s * (c + 1) * (c + 1);
    rep.sparsity_ok = rep.max_row_nnz <= rep.sparsity_witness && rep.max_col_nnz <= rep.sparsity_witness;

    const double nf1 = ode.F1.nnz() ? spectral_norm(ode.F1) : 0.0;
    const double nf2 = ode.F2.nnz() ? spectral_norm(ode.F2) : 0.0;
    rep.norm_A = sys.norm_A;
    rep.norm_bound = static_cast<double>(c + 1) * (nf1 + nf2);
    rep.norm_ok = rep.norm_A <= rep.norm_bound * (1.0 + 1e-8);

    const std::size_t N = sys.index.N();
    if (N <= dense_cap / N) {
        rep.eigenvalues_checked = true;
        double best = -std::numeric_limits<double>::infinity();
        for (const auto& ev : dense_eigs(DenseMatrix::from_sparse(sys.A, dense_cap))) {
            best = std::max(best, ev.real());
        }
        rep.max_real_eigenvalue = best;
        rep.eigenvalues_ok = best < 0.0;
    }

    if (throw_on_violation && !rep.ok()) {
        fail(ErrorKind::BoundViolation,
             "embedding structure violates a proven bound (row nnz " + std::to_string(rep.max_row_nnz) + ", col nnz " +
                 std::to_string(rep.max_col_nnz) + ", witness " + std::to_string(rep.sparsity_witness) + "; norm " +
                 std::to_string(rep.norm_A) + " vs " + std::to_string(rep.norm_bound) + "; max Re eig " +
                 std::to_string(rep.max_real_eigenvalue) + ")");
    }
    return rep;
}

std::vector<std::size_t> row_pattern_Bm(const SparseMatrix& F1, std::size_t m, std::span<const std::size_t> digits) {
    const std::size_t n = F1.rows();
    require(F1.cols() == n, ErrorKind::Validation, "row_pattern_Bm: F1 must be square");
    require(digits.size() == m + 1, ErrorKind::Validation, "row_pattern_Bm: need m + 1 digits");
    for (std::size_t d : digits) {
        require(d < n, ErrorKind::Validation, "row_pattern_Bm: digit out of range");
    }
    const std::size_t j0 = digits[0];
    const auto row = F1.row(j0);
    if (m == 0) {
        std::vector<std::size_t> cols(row.cols.begin(), row.cols.end());
        if (!std::binary_search(cols.begin(), cols.end(), j0)) {
            cols.insert(std::upper_bound(cols.begin(), cols.end(), j0), j0);
        }
        return cols;
    }
    // B(m) = F1 ⊗ I^{⊗m} + I ⊗ B(m−1). Columns split into three ranges by the
    // leading digit: below j0 (F1 only), equal to j0 (the B(m−1) pattern, which
    // already carries the diagonal) and above j0 (F1 only).
    const std::size_t tail_size = [&] {
        std::size_t p = 1;
        for (std::size_t k = 0; k < m; ++k) p *= n;
        return p;
    }();
    std::size_t tail_index = 0;
    for (std::size_t k = 1; k <= m; ++k) {
        tail_index = tail_index * n + digits[k];
    }
    std::vector<std::size_t> out;
    std::size_t e = 0;
    for (; e < row.cols.size() && row.cols[e] < j0; ++e) {
        out.push_back(row.cols[e] * tail_size + tail_index);
    }
    for (std::size_t col : row_pattern_Bm(F1, m - 1, digits.subspan(1))) {
        out.push_back(j0 * tail_size + col);
    }
    for (; e < row.cols.size(); ++e) {
        if (row.cols[e] > j0) {
            out.push_back(row.cols[e] * tail_size + tail_index);
        }
    }
    return out;
}

}  // namespace qhpm
