#pragma once

// Reduced two-actuator constant-curvature model of one continuum section and
// the serial three-section chain built from it.

#include <array>
#include <limits>
#include <numbers>
#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>

namespace carm {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

inline constexpr int kSections = 3;

/// Which rotation closes the bend in the section transform. `untwist` uses
/// Rz(-theta) so a pure bend carries no axial twist; `leading_repeat` repeats
/// Rz(+theta). Tip positions agree, orientations do not.
enum class TwistConvention { untwist, leading_repeat };

struct SectionGeometry {
    double backbone_length = 0.15;    // L, meters
    double offset_radius = 0.0125;    // r, meters
    double joint_shift = 0.0;         // sigma, meters, applied at the section tip
    double joint_twist = 0.0;         // gamma, radians, applied at the section tip
    double actuation_min = -0.04;
    double actuation_max = 0.04;
    double max_bend = std::numbers::pi;
    TwistConvention twist = TwistConvention::untwist;

    /// Throws std::invalid_argument naming the first broken invariant.
    void check() const;

    friend bool operator==(const SectionGeometry&, const SectionGeometry&) = default;
};

using ArmGeometry = std::array<SectionGeometry, kSections>;

/// Length changes of the two retained actuators; the third is implied.
struct JointPair {
    double l1 = 0.0;
    double l2 = 0.0;

    friend bool operator==(const JointPair&, const JointPair&) = default;
};

/// Arc triple of a bent section. `lambda` is +infinity for a straight section.
struct CurveParams {
    double theta = 0.0;
    double phi = 0.0;
    double lambda = std::numeric_limits<double>::infinity();

    bool straight() const noexcept { return phi == 0.0; }

    friend bool operator==(const CurveParams&, const CurveParams&) = default;
};

struct RigidTransform {
    Mat3 rotation = Mat3::Identity();
    Vec3 position = Vec3::Zero();

    static RigidTransform identity() { return {}; }

    RigidTransform operator*(const RigidTransform& rhs) const {
        return {rotation * rhs.rotation, position + rotation * rhs.position};
    }
    Vec3 apply(const Vec3& p) const { return position + rotation * p; }

    friend bool operator==(const RigidTransform& a, const RigidTransform& b) {
        return a.rotation == b.rotation && a.position == b.position;
    }
};

/// Normalized position along a section's neutral axis: 0 at the base, 1 at the tip.
class ArcFraction {
public:
    constexpr explicit ArcFraction(double xi) : xi_(xi) {
        if (!(xi >= 0.0 && xi <= 1.0)) throw std::invalid_argument("arc fraction outside [0, 1]");
    }
    static constexpr ArcFraction base() { return ArcFraction(0.0); }
    static constexpr ArcFraction tip() { return ArcFraction(1.0); }

    constexpr double value() const noexcept { return xi_; }
    constexpr bool at_tip() const noexcept { return xi_ == 1.0; }

private:
    double xi_;
};

/// g(l1, l2) = a l1^2 + b l1 l2 + c l2^2 + d l1 + e l2 + f; pairs with g >= 0
/// are valid. Defaults are the fitted ellipse for L = 0.15 m, r = 0.0125 m.
struct EllipseCoefficients {
    double a = -0.5766;
    double b = 0.5789;
    double c = -0.5766;
    double d = 0.0;
    double e = 0.0;
    double f = 0.0007;

    double evaluate(const JointPair& j) const noexcept {
        return a * j.l1 * j.l1 + b * j.l1 * j.l2 + c * j.l2 * j.l2 + d * j.l1 + e * j.l2 + f;
    }
    /// The quadratic part must be negative definite so {g >= 0} is bounded.
    bool bounded() const noexcept { return a < 0.0 && 4.0 * a * c - b * b > 0.0; }

    friend bool operator==(const EllipseCoefficients&, const EllipseCoefficients&) = default;
};

/// Base, mid, tip order.
struct ArmJointConfig {
    std::array<JointPair, kSections> sections{};

    friend bool operator==(const ArmJointConfig&, const ArmJointConfig&) = default;
};

using OrientationVector = std::array<double, 2 * kSections>;

/// Length change of the omitted actuator implied by the zero-sum constraint.
double third_actuator(const JointPair& j) noexcept;

CurveParams curve_params(const JointPair& j, const SectionGeometry& g) noexcept;

bool is_valid_actuation(const JointPair& j, const EllipseCoefficients& e) noexcept;

/// phi <= max_bend, evaluated from the exact curve parameters.
bool exact_bend_valid(const JointPair& j, const SectionGeometry& g) noexcept;

/// Wraps an angle into (-pi, pi].
double wrap_angle(double a) noexcept;

/// Pose of the point at arc fraction `x` relative to the section base. The
/// inter-section joint (shift then twist) is appended only at x = 1.
RigidTransform section_transform(const JointPair& j, const SectionGeometry& g, ArcFraction x);

/// Same, from already computed curve parameters.
RigidTransform section_transform(const CurveParams& c, const SectionGeometry& g, ArcFraction x);

/// Serial composition: sections before the last are taken at their tip, the
/// last at `x`.
RigidTransform arm_transform(const ArmJointConfig& c, const ArmGeometry& geoms, ArcFraction x);

/// Frame at arc fraction `x` within section `section` (0-based), all earlier
/// sections at their tip.
RigidTransform arm_transform(const ArmJointConfig& c, const ArmGeometry& geoms, int section,
                             ArcFraction x);

/// `samples_per_section` points per section at xi = k / samples_per_section,
/// k = 1..samples_per_section, base to tip. The last point is the arm tip.
std::vector<Vec3> skeleton_points(const ArmJointConfig& c, const ArmGeometry& geoms,
                                  int samples_per_section);

/// (theta1, phi1, theta2, phi2, theta3, phi3).
OrientationVector orientation_vector(const ArmJointConfig& c, const ArmGeometry& geoms) noexcept;

/// Euclidean distance between two orientation vectors with theta differences
/// wrapped into (-pi, pi].
double orientation_distance(const OrientationVector& a, const OrientationVector& b) noexcept;

}  // namespace carm
