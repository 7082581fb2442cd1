#include "confopt/dynamics.hpp"

#include <algorithm>
#include <cmath>

namespace confopt::fitness {

double Vec3::norm() const { return std::sqrt(x * x + y * y + z * z); }

namespace {

constexpr double kTinyLength = 1e-12;

/// Rotate a vector by a unit quaternion (body frame to world).
Vec3 rotate(const std::array<double, 4>& q, const Vec3& v) {
    const Vec3 u{q[1], q[2], q[3]};
    const double w = q[0];
    Vec3 t = u.cross(v) * 2.0;
    return v + t * w + u.cross(t);
}

Vec3 rotate_inverse(const std::array<double, 4>& q, const Vec3& v) {
    return rotate({q[0], -q[1], -q[2], -q[3]}, v);
}

bool finite(const Vec3& v) {
    return std::isfinite(v.x) && std::isfinite(v.y) && std::isfinite(v.z);
}

}  // namespace

int World::add_body(double mass, Vec3 inertia_diagonal, Vec3 center) {
    Body b;
    b.mass = mass;
    b.inertia = inertia_diagonal;
    b.center0 = b.position = center;
    bodies_.push_back(b);
    return static_cast<int>(bodies_.size()) - 1;
}

int World::add_point_mass(double mass, Vec3 position) {
    masses_.push_back({mass, position, {}, {}});
    return static_cast<int>(masses_.size()) - 1;
}

void World::lock_body_axis(int body, int axis) {
    bodies_[static_cast<std::size_t>(body)].axis_mode[static_cast<std::size_t>(axis)] = 1;
}

void World::prescribe_body_axis(int body, int axis, double amplitude, double angular_frequency) {
    Body& b = bodies_[static_cast<std::size_t>(body)];
    b.axis_mode[static_cast<std::size_t>(axis)] = 2;
    b.amplitude[static_cast<std::size_t>(axis)] = amplitude;
    b.frequency[static_cast<std::size_t>(axis)] = angular_frequency;
}

void World::constrain_body_rotation(int body, Vec3 row) {
    Body& b = bodies_[static_cast<std::size_t>(body)];
    // Gram-Schmidt against existing rows; drop dependent ones
    for (const Vec3& r : b.rotation_rows) row -= r * row.dot(r);
    double len = row.norm();
    if (len > 1e-9) b.rotation_rows.push_back(row * (1.0 / len));
}

void World::add_spring(Anchor a, Anchor b, double stiffness, double damping, double rest_length) {
    double rest = rest_length;
    if (rest < 0.0) rest = (anchor_position(b) - anchor_position(a)).norm();
    springs_.push_back({a, b, stiffness, damping, rest});
}

void World::add_angle_spring(Anchor center, Anchor end1, Anchor end2, double stiffness) {
    AngleSpring s{center, end1, end2, stiffness, 0.0};
    s.rest_angle = angle_at(s);
    angles_.push_back(s);
}

Vec3 World::anchor_position(const Anchor& a) const {
    if (a.body >= 0) {
        const Body& b = bodies_[static_cast<std::size_t>(a.body)];
        return b.position + rotate(b.quat, a.local);
    }
    if (a.mass >= 0) return masses_[static_cast<std::size_t>(a.mass)].position;
    return a.local;  // fixed world point
}

Vec3 World::anchor_velocity(const Anchor& a) const {
    if (a.body >= 0) {
        const Body& b = bodies_[static_cast<std::size_t>(a.body)];
        return b.velocity + b.omega.cross(rotate(b.quat, a.local));
    }
    if (a.mass >= 0) return masses_[static_cast<std::size_t>(a.mass)].velocity;
    return {};
}

Vec3 World::point_mass_position(int mass) const {
    return masses_[static_cast<std::size_t>(mass)].position;
}

void World::apply_force(const Anchor& a, const Vec3& f) {
    if (a.body >= 0) {
        Body& b = bodies_[static_cast<std::size_t>(a.body)];
        b.force += f;
        b.torque += rotate(b.quat, a.local).cross(f);
    } else if (a.mass >= 0) {
        masses_[static_cast<std::size_t>(a.mass)].force += f;
    }
}

double World::angle_at(const AngleSpring& s) const {
    Vec3 u = anchor_position(s.end1) - anchor_position(s.center);
    Vec3 v = anchor_position(s.end2) - anchor_position(s.center);
    double lu = u.norm(), lv = v.norm();
    if (lu < kTinyLength || lv < kTinyLength) return 0.0;
    double c = std::clamp(u.dot(v) / (lu * lv), -1.0, 1.0);
    return std::acos(c);
}

void World::accumulate_forces() {
    for (Body& b : bodies_) {
        b.force = {};
        b.torque = {};
    }
    for (PointMass& m : masses_) m.force = {};

    for (const Spring& s : springs_) {
        Vec3 pa = anchor_position(s.a), pb = anchor_position(s.b);
        Vec3 d = pb - pa;
        double len = d.norm();
        if (len < kTinyLength) continue;
        Vec3 dir = d * (1.0 / len);
        double rate = (anchor_velocity(s.b) - anchor_velocity(s.a)).dot(dir);
        double magnitude = s.stiffness * (len - s.rest) + s.damping * rate;
        apply_force(s.a, dir * magnitude);
        apply_force(s.b, dir * (-magnitude));
    }

    for (const AngleSpring& s : angles_) {
        Vec3 pc = anchor_position(s.center);
        Vec3 u = anchor_position(s.end1) - pc;
        Vec3 v = anchor_position(s.end2) - pc;
        double lu = u.norm(), lv = v.norm();
        if (lu < kTinyLength || lv < kTinyLength) continue;
        Vec3 uh = u * (1.0 / lu), vh = v * (1.0 / lv);
        double c = std::clamp(uh.dot(vh), -1.0, 1.0);
        double sin_theta = std::sqrt(std::max(1.0 - c * c, 1e-12));
        double theta = std::acos(c);
        double moment = s.stiffness * (theta - s.rest_angle);
        Vec3 f1 = (uh * c - vh) * (-moment / (lu * sin_theta));
        Vec3 f2 = (vh * c - uh) * (-moment / (lv * sin_theta));
        apply_force(s.end1, f1);
        apply_force(s.end2, f2);
        apply_force(s.center, (f1 + f2) * -1.0);
    }
}

void World::step(double dt) {
    if (diverged_) return;
    accumulate_forces();
    const double t_next = time_ + dt;

    for (Body& b : bodies_) {
        // translation (semi-implicit; locked/prescribed axes are kinematic)
        for (int axis = 0; axis < 3; ++axis) {
            switch (b.axis_mode[static_cast<std::size_t>(axis)]) {
                case 0: {
                    double v = b.velocity.component(axis) +
                               dt * b.force.component(axis) / b.mass;
                    b.velocity.set_component(axis, v);
                    b.position.set_component(axis, b.position.component(axis) + dt * v);
                    break;
                }
                case 1:
                    b.velocity.set_component(axis, 0.0);
                    b.position.set_component(axis, b.center0.component(axis));
                    break;
                default: {
                    double amp = b.amplitude[static_cast<std::size_t>(axis)];
                    double omega = b.frequency[static_cast<std::size_t>(axis)];
                    b.position.set_component(axis,
                                             b.center0.component(axis) + amp * std::sin(omega * t_next));
                    b.velocity.set_component(axis, amp * omega * std::cos(omega * t_next));
                    break;
                }
            }
        }
        // rotation: world-frame inertia from the body diagonal
        Vec3 omega_body = rotate_inverse(b.quat, b.omega);
        Vec3 l_body{b.inertia.x * omega_body.x, b.inertia.y * omega_body.y,
                    b.inertia.z * omega_body.z};
        Vec3 gyro = b.omega.cross(rotate(b.quat, l_body));
        Vec3 torque_body = rotate_inverse(b.quat, b.torque - gyro);
        Vec3 domega_body{torque_body.x / b.inertia.x, torque_body.y / b.inertia.y,
                         torque_body.z / b.inertia.z};
        b.omega += rotate(b.quat, domega_body) * dt;
        for (const Vec3& row : b.rotation_rows) b.omega -= row * row.dot(b.omega);
        // quaternion update q' = q + dt/2 * (0, omega) x q
        std::array<double, 4> q = b.quat;
        Vec3 w = b.omega;
        std::array<double, 4> dq{
            -0.5 * (w.x * q[1] + w.y * q[2] + w.z * q[3]),
            0.5 * (w.x * q[0] + w.y * q[3] - w.z * q[2]),
            0.5 * (w.y * q[0] + w.z * q[1] - w.x * q[3]),
            0.5 * (w.z * q[0] + w.x * q[2] - w.y * q[1]),
        };
        for (int k = 0; k < 4; ++k) q[static_cast<std::size_t>(k)] += dt * dq[static_cast<std::size_t>(k)];
        double qn = std::sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]);
        for (double& qk : q) qk /= qn;
        b.quat = q;
    }

    for (PointMass& m : masses_) {
        m.velocity += m.force * (dt / m.mass);
        m.position += m.velocity * dt;
    }

    time_ = t_next;
    for (const Body& b : bodies_) {
        if (!finite(b.position) || !finite(b.omega) || b.position.norm() > 1e9) diverged_ = true;
    }
    for (const PointMass& m : masses_) {
        if (!finite(m.position) || m.position.norm() > 1e9) diverged_ = true;
    }
}

double World::kinetic_energy() const {
    double e = 0.0;
    for (const Body& b : bodies_) {
        e += 0.5 * b.mass * b.velocity.dot(b.velocity);
        Vec3 omega_body = rotate_inverse(b.quat, b.omega);
        e += 0.5 * (b.inertia.x * omega_body.x * omega_body.x +
                    b.inertia.y * omega_body.y * omega_body.y +
                    b.inertia.z * omega_body.z * omega_body.z);
    }
    for (const PointMass& m : masses_) e += 0.5 * m.mass * m.velocity.dot(m.velocity);
    return e;
}

double World::potential_energy() const {
    double e = 0.0;
    for (const Spring& s : springs_) {
        double stretch = (anchor_position(s.b) - anchor_position(s.a)).norm() - s.rest;
        e += 0.5 * s.stiffness * stretch * stretch;
    }
    for (const AngleSpring& s : angles_) {
        double d = angle_at(s) - s.rest_angle;
        e += 0.5 * s.stiffness * d * d;
    }
    return e;
}

}  // namespace confopt::fitness
