// SPDX-License-Identifier: Apache-2.0
// Straightforward binary64 forward pass of the 3-layer random feature net,
// written against the documented weight layout rather than the library.

#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace oracle {

using Volume = std::vector<std::vector<std::vector<double>>>;  // [c][y][x]

struct Conv {
    int in = 0, out = 0;
    std::vector<double> w;  // (out, in, ky, kx)
    double at(int o, int i, int ky, int kx) const { return w[((o * in + i) * 3 + ky) * 3 + kx]; }
};

inline std::vector<Conv> make_net(int channels, std::uint64_t seed) {
    std::mt19937_64 eng(seed);
    std::vector<Conv> net;
    int in = channels;
    for (int l = 0; l < 3; ++l) {
        Conv c;
        c.in = in;
        c.out = 32;
        const double s = std::sqrt(1.0 / (in * 9.0));
        for (int k = 0; k < c.out * c.in * 9; ++k) {
            const double u = static_cast<double>(eng() >> 11) * 0x1.0p-53;
            c.w.push_back((2.0 * u - 1.0) * s);
        }
        net.push_back(c);
        in = 32;
    }
    return net;
}

inline Volume conv_relu(const Conv& c, const Volume& x) {
    const int H = static_cast<int>(x[0].size()), W = static_cast<int>(x[0][0].size());
    Volume y(c.out, std::vector<std::vector<double>>(H, std::vector<double>(W, 0.0)));
    for (int o = 0; o < c.out; ++o)
        for (int r = 0; r < H; ++r)
            for (int q = 0; q < W; ++q) {
                double acc = 0;
                for (int i = 0; i < c.in; ++i)
                    for (int ky = 0; ky < 3; ++ky)
                        for (int kx = 0; kx < 3; ++kx) {
                            const int rr = r + ky - 1, qq = q + kx - 1;
                            if (rr < 0 || rr >= H || qq < 0 || qq >= W) continue;
                            acc += c.at(o, i, ky, kx) * x[i][rr][qq];
                        }
                y[o][r][q] = acc > 0 ? acc : 0;
            }
    return y;
}

/// `hwc` is row-major (row, col, channel).
inline std::vector<double> features(const std::vector<float>& hwc, int H, int W, int C, std::uint64_t seed) {
    Volume x(C, std::vector<std::vector<double>>(H, std::vector<double>(W)));
    for (int r = 0; r < H; ++r)
        for (int q = 0; q < W; ++q)
            for (int ch = 0; ch < C; ++ch) x[ch][r][q] = hwc[(r * W + q) * C + ch];
    for (const auto& layer : make_net(C, seed)) x = conv_relu(layer, x);
    std::vector<double> f(32, 0.0);
    for (int o = 0; o < 32; ++o) {
        double s = 0;
        for (int r = 0; r < H; ++r)
            for (int q = 0; q < W; ++q) s += x[o][r][q];
        f[o] = s / (H * W);
    }
    return f;
}

}  // namespace oracle
