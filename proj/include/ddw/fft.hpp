#pragma once

#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

namespace ddw {
namespace fft {

/// Mixed-radix Cooley-Tukey DFT plan for arbitrary length. Composite lengths
/// split on the smallest prime factor; prime lengths fall back to direct
/// summation. Forward is unnormalized with kernel e^{-2*pi*i*jk/n}; inverse
/// applies the conjugate kernel and the 1/n factor.
template <class R>
class Plan {
public:
    explicit Plan(std::size_t n) : n_(n), twiddle_(n) {
        for (std::size_t k = 0; k < n; ++k) {
            const R ang = static_cast<R>(-2.0 * std::numbers::pi_v<double> * static_cast<double>(k) / static_cast<double>(n));
            twiddle_[k] = {std::cos(ang), std::sin(ang)};
        }
        scratch_.resize(n);
    }

    std::size_t size() const { return n_; }

    void forward(std::complex<R>* data) { run(data, false); }

    void inverse(std::complex<R>* data) {
        run(data, true);
        const R s = static_cast<R>(1) / static_cast<R>(n_);
        for (std::size_t i = 0; i < n_; ++i) data[i] *= s;
    }

    /// Inverse kernel without the 1/n factor (the adjoint of forward).
    void inverse_unnormalized(std::complex<R>* data) { run(data, true); }

private:
    std::complex<R> tw(std::size_t idx, bool conj) const {
        const auto w = twiddle_[idx % n_];
        return conj ? std::conj(w) : w;
    }

    static std::size_t smallest_factor(std::size_t n) {
        for (std::size_t p = 2; p * p <= n; ++p)
            if (n % p == 0) return p;
        return n;
    }

    void run(std::complex<R>* data, bool conj) {
        rec(data, 1, scratch_.data(), n_, n_, conj);
        for (std::size_t i = 0; i < n_; ++i) data[i] = scratch_[i];
    }

    // DFT of data[0], data[stride], ..., ((n-1)*stride) into out[0..n).
    // twiddle_step maps this level's unit frequency into the root table.
    void rec(const std::complex<R>* data, std::size_t stride, std::complex<R>* out,
             std::size_t n, std::size_t table_n, bool conj) {
        const std::size_t step = n_ / table_n; // table stride for e^{-2pi i /table_n}
        if (n == 1) {
            out[0] = data[0];
            return;
        }
        const std::size_t p = smallest_factor(n);
        if (p == n) {
            // Prime length: direct summation.
            for (std::size_t k = 0; k < n; ++k) {
                std::complex<R> acc{0, 0};
                for (std::size_t j = 0; j < n; ++j)
                    acc += data[j * stride] * tw((j * k % n) * step, conj);
                out[k] = acc;
            }
            return;
        }
        const std::size_t m = n / p;
        std::vector<std::complex<R>> sub(n);
        for (std::size_t r = 0; r < p; ++r)
            rec(data + r * stride, stride * p, sub.data() + r * m, m, table_n / p, conj);
        // Combine: X[k1 + q*m] = sum_r w^{r*(k1 + q*m)} * Sub_r[k1].
        for (std::size_t k1 = 0; k1 < m; ++k1) {
            for (std::size_t q = 0; q < p; ++q) {
                const std::size_t k = k1 + q * m;
                std::complex<R> acc{0, 0};
                for (std::size_t r = 0; r < p; ++r)
                    acc += sub[r * m + k1] * tw((r * k % n) * step, conj);
                out[k] = acc;
            }
        }
    }

    std::size_t n_;
    std::vector<std::complex<R>> twiddle_;
    std::vector<std::complex<R>> scratch_;
};

/// Row-column 2-D DFT over a dense [h][w] complex field.
template <class R>
class Plan2d {
public:
    Plan2d(std::size_t h, std::size_t w) : h_(h), w_(w), row_(w), col_(h), colbuf_(h) {}

    std::size_t height() const { return h_; }
    std::size_t width() const { return w_; }

    void forward(std::complex<R>* field) { run(field, false); }

    void inverse(std::complex<R>* field) {
        run(field, true);
        const R s = static_cast<R>(1) / static_cast<R>(h_ * w_);
        for (std::size_t i = 0; i < h_ * w_; ++i) field[i] *= s;
    }

    void inverse_unnormalized(std::complex<R>* field) { run(field, true); }

private:
    void run(std::complex<R>* field, bool conj) {
        for (std::size_t j = 0; j < h_; ++j) {
            auto* row = field + j * w_;
            if (conj) row_.inverse_unnormalized(row); else row_.forward(row);
        }
        for (std::size_t k = 0; k < w_; ++k) {
            for (std::size_t j = 0; j < h_; ++j) colbuf_[j] = field[j * w_ + k];
            if (conj) col_.inverse_unnormalized(colbuf_.data()); else col_.forward(colbuf_.data());
            for (std::size_t j = 0; j < h_; ++j) field[j * w_ + k] = colbuf_[j];
        }
    }

    std::size_t h_, w_;
    Plan<R> row_;
    Plan<R> col_;
    std::vector<std::complex<R>> colbuf_;
};

} // namespace fft
} // namespace ddw
