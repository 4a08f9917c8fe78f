#pragma once

#include <Eigen/Core>

#include <optional>
#include <stdexcept>
#include <string>

namespace hhsplit {

/// Upper bound on the gating dimension d. Gate vectors live on the stack.
inline constexpr int kMaxGates = 8;

template <typename Scalar>
using GateVector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1, Eigen::ColMajor, kMaxGates, 1>;

/// Full state flattened as (V, U, [Z]).
template <typename Scalar>
using StateVector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1, Eigen::ColMajor, kMaxGates + 2, 1>;

/// Point of the state space R x [0,1]^d (x R for the OU-driven system).
template <typename Scalar>
struct State {
    Scalar v{0};
    GateVector<Scalar> u;
    std::optional<Scalar> z;

    int dim() const { return static_cast<int>(u.size()); }
    int flat_size() const { return 1 + dim() + (z ? 1 : 0); }

    StateVector<Scalar> flat() const {
        StateVector<Scalar> x(flat_size());
        x(0) = v;
        x.segment(1, dim()) = u;
        if (z) x(flat_size() - 1) = *z;
        return x;
    }

    static State from_flat(const StateVector<Scalar>& x, int d, bool has_z) {
        State s;
        s.v = x(0);
        s.u = x.segment(1, d);
        if (has_z) s.z = x(1 + d);
        return s;
    }

    bool all_finite() const {
        using std::isfinite;
        if (!isfinite(v)) return false;
        if (z && !isfinite(*z)) return false;
        for (int i = 0; i < u.size(); ++i)
            if (!isfinite(u(i))) return false;
        return true;
    }
};

/// Raised when the configured reference trajectory of a study stops being finite.
class ReferenceExplosion : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace hhsplit
