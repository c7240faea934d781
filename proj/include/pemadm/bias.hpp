#pragma once

#include <string>

#include "pemadm/model.hpp"

namespace pemadm {

/// Low-frequency perception bias v(k).
struct BiasSignal {
    enum class Kind { Zero, Constant, Sinusoid };

    Kind kind = Kind::Zero;
    Vector value;          // Constant: v; Sinusoid: amplitude
    double period = 1.0;   // steps
    double phase = 0.0;    // radians

    static BiasSignal zero() { return {}; }
    static BiasSignal constant(Vector v) { return {Kind::Constant, std::move(v), 1.0, 0.0}; }
    static BiasSignal sinusoid(Vector amplitude, double period, double phase = 0.0) {
        return {Kind::Sinusoid, std::move(amplitude), period, phase};
    }

    /// v(k) as a vector of length dim.
    Vector at(int k, int dim) const;
    /// sup_k |v(k)| (Euclidean).
    double norm_bound() const;
};

const char* to_string(BiasSignal::Kind k);

}  // namespace pemadm
