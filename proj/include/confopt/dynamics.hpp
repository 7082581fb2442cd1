#pragma once

#include <array>
#include <cstdint>
#include <vector>

namespace confopt::fitness {

struct Vec3 {
    double x = 0.0, y = 0.0, z = 0.0;

    Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    Vec3& operator+=(const Vec3& o) {
        x += o.x;
        y += o.y;
        z += o.z;
        return *this;
    }
    Vec3& operator-=(const Vec3& o) {
        x -= o.x;
        y -= o.y;
        z -= o.z;
        return *this;
    }
    double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
    Vec3 cross(const Vec3& o) const {
        return {y * o.z - z * o.y, z * o.x - x * o.z, x * o.y - y * o.x};
    }
    double norm() const;
    double component(int axis) const { return axis == 0 ? x : (axis == 1 ? y : z); }
    void set_component(int axis, double v) {
        (axis == 0 ? x : (axis == 1 ? y : z)) = v;
    }
};

/// Attachment point: a local offset on a rigid body, a point mass, or a
/// fixed world position.
struct Anchor {
    int body = -1;
    int mass = -1;
    Vec3 local;  // body offset, or world position for fixed anchors

    static Anchor on_body(int body, Vec3 local) { return {body, -1, local}; }
    static Anchor on_mass(int mass) { return {-1, mass, {}}; }
    static Anchor fixed(Vec3 world) { return {-1, -1, world}; }
};

/// Lumped spring-network dynamics: rigid bodies (quaternion orientation,
/// diagonal body-frame inertia), point masses, axial springs with parallel
/// dampers, and angular springs between member pairs. Semi-implicit Euler.
class World {
public:
    int add_body(double mass, Vec3 inertia_diagonal, Vec3 center);
    int add_point_mass(double mass, Vec3 position);

    /// Pins one axis of a body's center to its initial value.
    void lock_body_axis(int body, int axis);
    /// Drives one axis of a body's center as initial + amplitude*sin(omega*t).
    void prescribe_body_axis(int body, int axis, double amplitude, double angular_frequency);
    /// Adds a rotational constraint row: omega . row = 0.
    void constrain_body_rotation(int body, Vec3 row);

    void add_spring(Anchor a, Anchor b, double stiffness, double damping,
                    double rest_length = -1.0);  // negative = current distance
    void add_angle_spring(Anchor center, Anchor end1, Anchor end2, double stiffness);

    Vec3 anchor_position(const Anchor& a) const;
    Vec3 anchor_velocity(const Anchor& a) const;
    Vec3 point_mass_position(int mass) const;

    void step(double dt);
    double time() const { return time_; }
    bool diverged() const { return diverged_; }

    double kinetic_energy() const;
    double potential_energy() const;
    double total_energy() const { return kinetic_energy() + potential_energy(); }

private:
    struct Body {
        double mass;
        Vec3 inertia;  // diagonal, body frame
        Vec3 center0, position, velocity;
        std::array<double, 4> quat{1.0, 0.0, 0.0, 0.0};  // w, x, y, z
        Vec3 omega;
        Vec3 force, torque;
        std::array<int, 3> axis_mode{0, 0, 0};  // 0 free, 1 locked, 2 prescribed
        std::array<double, 3> amplitude{};
        std::array<double, 3> frequency{};
        std::vector<Vec3> rotation_rows;  // orthonormalized lazily
    };
    struct PointMass {
        double mass;
        Vec3 position, velocity, force;
    };
    struct Spring {
        Anchor a, b;
        double stiffness, damping, rest;
    };
    struct AngleSpring {
        Anchor center, end1, end2;
        double stiffness, rest_angle;
    };

    void apply_force(const Anchor& a, const Vec3& f);
    void accumulate_forces();
    double angle_at(const AngleSpring& s) const;

    std::vector<Body> bodies_;
    std::vector<PointMass> masses_;
    std::vector<Spring> springs_;
    std::vector<AngleSpring> angles_;
    double time_ = 0.0;
    bool diverged_ = false;
};

}  // namespace confopt::fitness
