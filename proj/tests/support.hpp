#pragma once

#include <random>

#include "carm/cspace.hpp"
#include "carm/kinematics.hpp"

namespace carm::testing {

inline ArmGeometry paper_arm() { return {SectionGeometry{}, SectionGeometry{}, SectionGeometry{}}; }

inline GridSpec grid_of(std::uint32_t steps) { return GridSpec{-0.04, 0.04, steps}; }

/// Cache over the default geometry; covering box with cubes of `cube_dim`.
inline Cache small_cache(std::uint32_t steps, double cube_dim) {
    return build_cache(grid_of(steps), paper_arm(), EllipseCoefficients{}, cube_dim);
}

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

/// Random pair accepted by the default ellipse, by rejection.
inline JointPair random_valid_pair(std::mt19937_64& rng) {
    const EllipseCoefficients e;
    for (;;) {
        const JointPair j{uniform(rng, -0.04, 0.04), uniform(rng, -0.04, 0.04)};
        if (is_valid_actuation(j, e)) return j;
    }
}

}  // namespace carm::testing
