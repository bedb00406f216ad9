#include "carm/kinematics.hpp"

#include <cmath>

#include <Eigen/Geometry>

namespace carm {

namespace {

constexpr double kSqrt3 = std::numbers::sqrt3;
constexpr double kSmallBend = 1e-6;

Mat3 rot_z(double a) {
    return Eigen::AngleAxisd(a, Vec3::UnitZ()).toRotationMatrix();
}

Mat3 rot_y(double a) {
    return Eigen::AngleAxisd(a, Vec3::UnitY()).toRotationMatrix();
}

}  // namespace

void SectionGeometry::check() const {
    if (!(backbone_length > 0.0)) throw std::invalid_argument("backbone_length > 0");
    if (!(offset_radius > 0.0)) throw std::invalid_argument("offset_radius > 0");
    if (!(joint_shift >= 0.0)) throw std::invalid_argument("joint_shift >= 0");
    if (!std::isfinite(joint_twist)) throw std::invalid_argument("joint_twist finite");
    if (!(actuation_min < actuation_max)) throw std::invalid_argument("actuation_min < actuation_max");
    if (!(max_bend > 0.0)) throw std::invalid_argument("max_bend > 0");
}

double third_actuator(const JointPair& j) noexcept { return -(j.l1 + j.l2); }

CurveParams curve_params(const JointPair& j, const SectionGeometry& g) noexcept {
    const double q = j.l1 * j.l1 - j.l1 * j.l2 + j.l2 * j.l2;
    if (q <= 0.0) return {};
    const double root = std::sqrt(q);
    CurveParams c;
    c.theta = wrap_angle(std::atan2(j.l2 * kSqrt3, 2.0 * j.l1 - j.l2));
    c.phi = 2.0 * root / (g.offset_radius * kSqrt3);
    c.lambda = kSqrt3 * g.backbone_length * g.offset_radius / (2.0 * root);
    return c;
}

bool is_valid_actuation(const JointPair& j, const EllipseCoefficients& e) noexcept {
    return e.evaluate(j) >= 0.0;
}

bool exact_bend_valid(const JointPair& j, const SectionGeometry& g) noexcept {
    return curve_params(j, g).phi <= g.max_bend;
}

double wrap_angle(double a) noexcept {
    double w = std::remainder(a, 2.0 * std::numbers::pi);
    if (w <= -std::numbers::pi) w += 2.0 * std::numbers::pi;
    return w;
}

RigidTransform section_transform(const JointPair& j, const SectionGeometry& g, ArcFraction x) {
    return section_transform(curve_params(j, g), g, x);
}

RigidTransform section_transform(const CurveParams& c, const SectionGeometry& g, ArcFraction x) {
    const double xi = x.value();
    const double bend = xi * c.phi;
    const double length = g.backbone_length;

    // In-plane offsets of the arc point: radial = lambda (1 - cos bend),
    // axial = lambda sin bend. lambda = L / phi is folded in so the straight
    // limit has no inf * 0 product.
    double radial = 0.0;
    double axial = xi * length;
    if (c.phi >= kSmallBend) {
        const double s = std::sin(0.5 * bend);
        radial = c.lambda * 2.0 * s * s;
        axial = c.lambda * std::sin(bend);
    } else if (c.phi > 0.0) {
        const double b2 = bend * bend;
        radial = length * xi * 0.5 * bend * (1.0 - b2 / 12.0);
        axial = length * xi * (1.0 - b2 / 6.0 + b2 * b2 / 120.0);
    }

    const Mat3 lead = rot_z(c.theta);
    const Mat3 bend_rot = rot_y(bend);
    const Mat3 trail = g.twist == TwistConvention::untwist ? rot_z(-c.theta) : rot_z(c.theta);

    RigidTransform t;
    t.rotation = lead * bend_rot * trail;
    t.position = lead * Vec3(radial, 0.0, axial);
    if (x.at_tip()) {
        t.position += t.rotation * Vec3(0.0, 0.0, g.joint_shift);
        t.rotation = t.rotation * rot_z(g.joint_twist);
    }
    return t;
}

RigidTransform arm_transform(const ArmJointConfig& c, const ArmGeometry& geoms, ArcFraction x) {
    return arm_transform(c, geoms, kSections - 1, x);
}

RigidTransform arm_transform(const ArmJointConfig& c, const ArmGeometry& geoms, int section,
                             ArcFraction x) {
    if (section < 0 || section >= kSections) throw std::out_of_range("section index");
    RigidTransform acc;
    for (int i = 0; i < section; ++i) {
        acc = acc * section_transform(c.sections[i], geoms[i], ArcFraction::tip());
    }
    return acc * section_transform(c.sections[section], geoms[section], x);
}

std::vector<Vec3> skeleton_points(const ArmJointConfig& c, const ArmGeometry& geoms,
                                  int samples_per_section) {
    if (samples_per_section < 2) throw std::invalid_argument("samples_per_section >= 2");
    std::vector<Vec3> points;
    points.reserve(static_cast<std::size_t>(kSections * samples_per_section));
    RigidTransform base;
    for (int i = 0; i < kSections; ++i) {
        const CurveParams cp = curve_params(c.sections[i], geoms[i]);
        for (int k = 1; k <= samples_per_section; ++k) {
            const ArcFraction xi(k == samples_per_section
                                     ? 1.0
                                     : static_cast<double>(k) / samples_per_section);
            points.push_back(base.apply(section_transform(cp, geoms[i], xi).position));
        }
        base = base * section_transform(cp, geoms[i], ArcFraction::tip());
    }
    return points;
}

OrientationVector orientation_vector(const ArmJointConfig& c, const ArmGeometry& geoms) noexcept {
    OrientationVector v{};
    for (int i = 0; i < kSections; ++i) {
        const CurveParams cp = curve_params(c.sections[i], geoms[i]);
        v[2 * i] = cp.theta;
        v[2 * i + 1] = cp.phi;
    }
    return v;
}

double orientation_distance(const OrientationVector& a, const OrientationVector& b) noexcept {
    double sum = 0.0;
    for (int i = 0; i < kSections; ++i) {
        const double dt = wrap_angle(a[2 * i] - b[2 * i]);
        const double dp = a[2 * i + 1] - b[2 * i + 1];
        sum += dt * dt + dp * dp;
    }
    return std::sqrt(sum);
}

}  // namespace carm
