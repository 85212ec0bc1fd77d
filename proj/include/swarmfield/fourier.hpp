#pragma once

#include <complex>
#include <span>
#include <vector>

#include "swarmfield/kernel.hpp"
#include "swarmfield/ring.hpp"

namespace swarmfield {

// Plain O(n^2) DFT. Grids here are a few hundred cells and the transform is
// called once per scenario, so there is no need for an FFT (and no
// power-of-two restriction).
inline std::vector<std::complex<double>> dft(std::span<const double> x) {
    const int n = static_cast<int>(x.size());
    std::vector<std::complex<double>> w(static_cast<std::size_t>(n));
    for (int j = 0; j < n; ++j) {
        const double a = -kTwoPi * j / n;
        w[static_cast<std::size_t>(j)] = {std::cos(a), std::sin(a)};
    }
    std::vector<std::complex<double>> out(static_cast<std::size_t>(n));
    for (int m = 0; m < n; ++m) {
        std::complex<double> acc = 0.0;
        for (int k = 0; k < n; ++k) {
            const int idx = static_cast<int>((static_cast<long long>(m) * k) % n);
            acc += x[static_cast<std::size_t>(k)] * w[static_cast<std::size_t>(idx)];
        }
        out[static_cast<std::size_t>(m)] = acc;
    }
    return out;
}

inline std::vector<double> idft_real(std::span<const std::complex<double>> X) {
    const int n = static_cast<int>(X.size());
    std::vector<std::complex<double>> w(static_cast<std::size_t>(n));
    for (int j = 0; j < n; ++j) {
        const double a = kTwoPi * j / n;
        w[static_cast<std::size_t>(j)] = {std::cos(a), std::sin(a)};
    }
    std::vector<double> out(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) {
        std::complex<double> acc = 0.0;
        for (int m = 0; m < n; ++m) {
            const int idx = static_cast<int>((static_cast<long long>(m) * k) % n);
            acc += X[static_cast<std::size_t>(m)] * w[static_cast<std::size_t>(idx)];
        }
        out[static_cast<std::size_t>(k)] = acc.real() / n;
    }
    return out;
}

// DFT of the kernel displacement table f(wrap(l*dx)) * dx; entry m is the
// eigenvalue of convolve_periodic acting on the discrete mode e^{2*pi*i*m*k/n}.
inline std::vector<std::complex<double>> kernel_symbol(const RingGrid& grid,
                                                       const InteractionKernel& kernel) {
    return dft(kernel_displacement_table(grid, kernel));
}

}  // namespace swarmfield
