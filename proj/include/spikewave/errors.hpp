// errors.hpp -- exception types shared across the toolkit.
#pragma once

#include <stdexcept>
#include <string>

namespace spikewave {

struct PreconditionViolation : std::invalid_argument {
    explicit PreconditionViolation(const std::string& what) : std::invalid_argument(what) {}
};

// Amplitude calibration failed to bracket or converge.
struct NonConvergence : std::runtime_error {
    explicit NonConvergence(const std::string& what) : std::runtime_error(what) {}
};

// Adaptive step size collapsed below the floor without meeting the error target.
struct ToleranceFailure : std::runtime_error {
    explicit ToleranceFailure(const std::string& what) : std::runtime_error(what) {}
};

struct QuadratureFailure : std::runtime_error {
    explicit QuadratureFailure(const std::string& what) : std::runtime_error(what) {}
};

// Operation requires p_z != 0 (the reduced frame degenerates otherwise).
struct ZeroPz : std::invalid_argument {
    explicit ZeroPz(const std::string& what) : std::invalid_argument(what) {}
};

// A sampled curve velocity failed the causal-future classification.
struct NotCausal : std::runtime_error {
    explicit NotCausal(const std::string& what) : std::runtime_error(what) {}
};

// Barrier search exhausted its internal spike cap. Spike heights grow without
// bound, so this signals misconfiguration rather than physics.
struct NoBarrier : std::runtime_error {
    explicit NoBarrier(const std::string& what) : std::runtime_error(what) {}
};

// Test function support sticks out of the interval the solution covers.
struct SupportViolation : std::invalid_argument {
    explicit SupportViolation(const std::string& what) : std::invalid_argument(what) {}
};

struct EmptyGrid : std::invalid_argument {
    explicit EmptyGrid(const std::string& what) : std::invalid_argument(what) {}
};

} // namespace spikewave
