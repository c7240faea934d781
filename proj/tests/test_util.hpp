#pragma once

#include <random>

#include "pemadm/model.hpp"

namespace testutil {

using pemadm::Matrix;
using pemadm::Vector;

inline Matrix scalar(double v) { return Matrix::Constant(1, 1, v); }

/// Single-mode scalar model x+ = a x + b u, y = c x + d w + e v.
inline pemadm::PemAdmModel scalar_model(double a, double b, double c = 1.0, double d = 0.0, double e = 0.0) {
    pemadm::PemAdmModel m;
    m.A = scalar(a);
    m.B = scalar(b);
    m.modes = {{scalar(c), scalar(d), scalar(e)}};
    m.transition = pemadm::TransitionMatrix(scalar(1.0));
    return m;
}

/// Random row-stochastic matrix with strictly positive entries.
inline Matrix random_stochastic(int n, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.05, 1.0);
    Matrix p(n, n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) p(i, j) = u(rng);
        p.row(i) /= p.row(i).sum();
    }
    return p;
}

inline Matrix random_matrix(int r, int c, std::mt19937_64& rng) {
    std::normal_distribution<double> g(0.0, 1.0);
    Matrix m(r, c);
    for (int i = 0; i < r; ++i) {
        for (int j = 0; j < c; ++j) m(i, j) = g(rng);
    }
    return m;
}

/// Random valid model with n1 states, n2 inputs, n3 outputs and N modes.
inline pemadm::PemAdmModel random_model(int n1, int n2, int n3, int modes, std::mt19937_64& rng) {
    pemadm::PemAdmModel m;
    m.A = random_matrix(n1, n1, rng);
    m.B = random_matrix(n1, n2, rng);
    for (int i = 0; i < modes; ++i) m.modes.push_back({random_matrix(n3, n1, rng), random_matrix(n3, n3, rng), random_matrix(n3, n3, rng)});
    m.transition = pemadm::TransitionMatrix(random_stochastic(modes, rng));
    m.bias_bound = 1.0;
    return m;
}

}  // namespace testutil
