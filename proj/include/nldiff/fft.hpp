#pragma once

#include <fftw3.h>

#include <cstdlib>
#include <memory>
#include <mutex>
#include <string>

#include "nldiff/error.hpp"

namespace nldiff::detail {

struct FftwFree {
    void operator()(void* p) const noexcept { fftw_free(p); }
};
using RealBuffer = std::unique_ptr<double[], FftwFree>;
using ComplexBuffer = std::unique_ptr<fftw_complex[], FftwFree>;

inline std::mutex& fftw_planner_mutex() {
    static std::mutex m;
    return m;
}

/// Thread count for FFTW, read once from NLDIFF_THREADS (default 1).
inline int fftw_thread_count() {
    static const int count = [] {
        int n = 1;
        if (const char* env = std::getenv("NLDIFF_THREADS")) {
            n = std::atoi(env);
            if (n < 1) n = 1;
        }
        if (n > 1) {
            fftw_init_threads();
            fftw_plan_with_nthreads(n);
        }
        return n;
    }();
    return count;
}

/// Smallest 7-smooth integer >= n.
inline int smooth_size(int n) {
    for (int m = std::max(n, 1);; ++m) {
        int r = m;
        for (int p : {2, 3, 5, 7})
            while (r % p == 0) r /= p;
        if (r == 1) return m;
    }
}

/// Paired real-to-complex / complex-to-real 2-D transforms of size P x P.
///
/// Plans use FFTW_ESTIMATE so the algorithm choice, and hence every rounding
/// error, is reproducible run to run. Execution goes through the new-array
/// interface, so one instance may be shared read-only between threads.
class RealFft2D {
public:
    explicit RealFft2D(int P) : P_(P) {
        if (P < 1) throw InvalidArgument("FFT size must be positive");
        fftw_thread_count();
        RealBuffer r = make_real();
        ComplexBuffer c = make_complex();
        std::lock_guard lock(fftw_planner_mutex());
        forward_ = fftw_plan_dft_r2c_2d(P_, P_, r.get(), c.get(), FFTW_ESTIMATE);
        backward_ = fftw_plan_dft_c2r_2d(P_, P_, c.get(), r.get(), FFTW_ESTIMATE);
        if (!forward_ || !backward_) throw Error("FFTW planning failed for size " + std::to_string(P));
    }

    RealFft2D(const RealFft2D&) = delete;
    RealFft2D& operator=(const RealFft2D&) = delete;

    ~RealFft2D() {
        std::lock_guard lock(fftw_planner_mutex());
        if (forward_) fftw_destroy_plan(forward_);
        if (backward_) fftw_destroy_plan(backward_);
    }

    int size() const { return P_; }
    std::size_t real_count() const { return static_cast<std::size_t>(P_) * P_; }
    std::size_t spectral_count() const { return static_cast<std::size_t>(P_) * (P_ / 2 + 1); }

    RealBuffer make_real() const {
        auto* p = static_cast<double*>(fftw_malloc(sizeof(double) * real_count()));
        if (!p) throw std::bad_alloc();
        return RealBuffer(p);
    }
    ComplexBuffer make_complex() const {
        auto* p = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * spectral_count()));
        if (!p) throw std::bad_alloc();
        return ComplexBuffer(p);
    }

    void forward(double* in, fftw_complex* out) const { fftw_execute_dft_r2c(forward_, in, out); }
    /// Unnormalized; overwrites `in`.
    void backward(fftw_complex* in, double* out) const { fftw_execute_dft_c2r(backward_, in, out); }

private:
    int P_;
    fftw_plan forward_ = nullptr;
    fftw_plan backward_ = nullptr;
};

}  // namespace nldiff::detail
