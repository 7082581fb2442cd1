#include "confopt/fitness.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "confopt/rng.hpp"

namespace confopt::fitness {

namespace {

Vec3 parse_vec3(const nlohmann::json& j) {
    if (!j.is_array() || j.size() != 3) throw FitnessError("expected a 3-vector");
    return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()};
}

int parse_axis(const std::string& axis) {
    if (axis == "x") return 0;
    if (axis == "y") return 1;
    if (axis == "z") return 2;
    throw FitnessError("boundary axis must be x, y, or z");
}

MeasurePoint parse_measure(const nlohmann::json& j) {
    return {j.at("body").get<std::string>(), parse_vec3(j.at("point"))};
}

}  // namespace

void SimParams::validate() const {
    auto positive = [](double v, const char* what) {
        if (!(v > 0.0)) throw FitnessError(std::string(what) + " must be strictly positive");
    };
    positive(timestep, "sim.timestep");
    positive(duration, "sim.duration");
    if (substeps < 1) throw FitnessError("sim.substeps must be >= 1");
    positive(joint_mass, "joint_mass");
    positive(shock.spring_constant, "shock.spring_constant");
    positive(beam.elastic_modulus, "beam.elastic_modulus");
    positive(beam.cross_section_area, "beam.cross_section_area");
    for (const auto& [name, body] : bodies) {
        positive(body.mass, (name + ".mass").c_str());
    }
    if (weights.w1 < 0.0 || weights.w2 < 0.0) throw FitnessError("weights must be non-negative");
}

SimParams parse_sim_params(const nlohmann::json& params) {
    SimParams p;
    try {
        if (params.contains("weights")) {
            p.weights.w1 = params.at("weights").value("w1", p.weights.w1);
            p.weights.w2 = params.at("weights").value("w2", p.weights.w2);
        }
        p.signed_acceleration = params.value("signed_acceleration", false);
        if (params.value("count_term", "components") == std::string("active_joints")) {
            p.count_term = CountTerm::ActiveJoints;
        }
        for (const auto& [side, list] : params.at("joint_positions").items()) {
            std::vector<Vec3> positions;
            for (const auto& v : list) positions.push_back(parse_vec3(v));
            p.joint_positions[side] = std::move(positions);
        }
        if (params.contains("shock")) {
            const auto& s = params.at("shock");
            p.shock.spring_constant = s.value("spring_constant", p.shock.spring_constant);
            p.shock.natural_length = s.value("natural_length", p.shock.natural_length);
            p.shock.damping = s.value("damping", p.shock.damping);
        }
        if (params.contains("beam")) {
            const auto& b = params.at("beam");
            p.beam.cross_section_area = b.value("cross_section_area", p.beam.cross_section_area);
            p.beam.density = b.value("density", p.beam.density);
            p.beam.elastic_modulus = b.value("elastic_modulus", p.beam.elastic_modulus);
            p.beam.shear_modulus = b.value("shear_modulus", p.beam.shear_modulus);
            p.beam.second_moment_y = b.value("second_moment_y", p.beam.second_moment_y);
            p.beam.second_moment_z = b.value("second_moment_z", p.beam.second_moment_z);
            p.beam.polar_moment = b.value("polar_moment", p.beam.polar_moment);
            p.beam.damping = b.value("damping", p.beam.damping);
        }
        for (const auto& [name, body] : params.at("bodies").items()) {
            BodyParams bp;
            bp.mass = body.at("mass").get<double>();
            bp.inertia = parse_vec3(body.at("inertia"));
            bp.center = parse_vec3(body.at("center"));
            p.bodies[name] = bp;
        }
        const auto& mp = params.at("measure_points");
        p.q1 = parse_measure(mp.at("q1"));
        p.q2 = parse_measure(mp.at("q2"));
        p.q3 = parse_measure(mp.at("q3"));
        for (const auto& bc : params.value("boundary_conditions", nlohmann::json::array())) {
            BoundaryCondition b;
            b.body = bc.at("body").get<std::string>();
            b.point = parse_vec3(bc.at("point"));
            b.axis = parse_axis(bc.at("axis").get<std::string>());
            b.amplitude = bc.value("amplitude", 0.0);
            b.angular_frequency = bc.value("angular_frequency", 0.0);
            p.boundary_conditions.push_back(b);
        }
        for (const auto& inst : params.at("instances")) {
            AssemblyInstance a;
            a.side = inst.at("side").get<std::string>();
            for (const auto& [envo, body] : inst.at("envo_bodies").items()) {
                a.envo_bodies[envo] = body.get<std::string>();
            }
            p.instances.push_back(a);
        }
        p.joint_mass = params.value("joint_mass", p.joint_mass);
        p.weld_angular_stiffness = params.value("weld_angular_stiffness", p.weld_angular_stiffness);
        p.weld_joint_code = params.value("weld_joint_code", 1);
        p.beam_component_code = params.value("beam_component_code", 1);
        p.shock_component_code = params.value("shock_component_code", 2);
        if (params.contains("sim")) {
            const auto& s = params.at("sim");
            p.timestep = s.value("timestep", p.timestep);
            p.duration = s.value("duration", p.duration);
            p.substeps = s.value("substeps", p.substeps);
        }
    } catch (const nlohmann::json::exception& e) {
        throw FitnessError(std::string("malformed fitness params: ") + e.what());
    }
    p.validate();
    return p;
}

namespace {

struct BuiltWorld {
    World world;
    Anchor q1, q2, q3;
    Vec3 q2_start, q3_start;
};

BuiltWorld build_world(const ProblemSpec& spec, const Solution& s, const SimParams& params) {
    BuiltWorld built;
    World& world = built.world;

    std::map<std::string, int> body_ids;
    for (const auto& [name, bp] : params.bodies) {
        body_ids[name] = world.add_body(bp.mass, bp.inertia, bp.center);
    }

    for (const BoundaryCondition& bc : params.boundary_conditions) {
        auto it = body_ids.find(bc.body);
        if (it == body_ids.end()) throw FitnessError("boundary condition on unknown body " + bc.body);
        const Vec3 center = params.bodies.at(bc.body).center;
        const Vec3 offset = bc.point - center;
        if (offset.norm() < 1e-9 || bc.amplitude != 0.0) {
            // center-level: excitations drive the axis, zero rows pin it
            if (bc.amplitude != 0.0) {
                world.prescribe_body_axis(it->second, bc.axis, bc.amplitude, bc.angular_frequency);
            } else {
                world.lock_body_axis(it->second, bc.axis);
            }
        } else {
            // off-center zero row: the point's axis motion due to rotation
            // vanishes, i.e. omega . (r x e_axis) = 0
            Vec3 e;
            e.set_component(bc.axis, 1.0);
            world.constrain_body_rotation(it->second, offset.cross(e));
        }
    }

    auto measure_anchor = [&](const MeasurePoint& mp) {
        auto it = body_ids.find(mp.body);
        if (it == body_ids.end()) throw FitnessError("measure point on unknown body " + mp.body);
        return Anchor::on_body(it->second, mp.point - params.bodies.at(mp.body).center);
    };
    built.q1 = measure_anchor(params.q1);
    built.q2 = measure_anchor(params.q2);
    built.q3 = measure_anchor(params.q3);
    built.q2_start = world.anchor_position(built.q2);
    built.q3_start = world.anchor_position(built.q3);

    // instantiate the configuration once per side
    for (const AssemblyInstance& inst : params.instances) {
        auto positions_it = params.joint_positions.find(inst.side);
        if (positions_it == params.joint_positions.end()) {
            throw FitnessError("instance references unknown joint position table " + inst.side);
        }
        const std::vector<Vec3>& positions = positions_it->second;
        if (static_cast<int>(positions.size()) != spec.n_joints) {
            throw FitnessError("joint position table size does not match the spec");
        }

        std::vector<std::optional<Anchor>> anchors(static_cast<std::size_t>(spec.n_joints));
        auto anchor_of = [&](int joint) -> Anchor {
            auto& slot = anchors[static_cast<std::size_t>(joint)];
            if (!slot) {
                if (spec.in_envo(joint)) {
                    const std::string& envo_name =
                        spec.envos[static_cast<std::size_t>(spec.envo_of(joint))].name;
                    auto binding = inst.envo_bodies.find(envo_name);
                    if (binding == inst.envo_bodies.end()) {
                        throw FitnessError("instance does not bind envo " + envo_name);
                    }
                    int body = body_ids.at(binding->second);
                    slot = Anchor::on_body(body, positions[static_cast<std::size_t>(joint)] -
                                                     params.bodies.at(binding->second).center);
                } else {
                    int mass = built.world.add_point_mass(params.joint_mass,
                                                          positions[static_cast<std::size_t>(joint)]);
                    slot = Anchor::on_mass(mass);
                }
            }
            return *slot;
        };

        std::vector<std::vector<std::pair<int, int>>> members(  // joint -> (other, code)
            static_cast<std::size_t>(spec.n_joints));
        for (const Variable& v : spec.variables().all()) {
            if (v.kind != VarKind::Component) continue;
            int code = s.values[static_cast<std::size_t>(v.flat_index)];
            if (code == 0) continue;
            Anchor a = anchor_of(v.pair_i);
            Anchor b = anchor_of(v.pair_j);
            double length =
                (positions[static_cast<std::size_t>(v.pair_j)] - positions[static_cast<std::size_t>(v.pair_i)])
                    .norm();
            if (code == params.shock_component_code) {
                world.add_spring(a, b, params.shock.spring_constant, params.shock.damping);
            } else {
                double stiffness =
                    params.beam.elastic_modulus * params.beam.cross_section_area / std::max(length, 1e-6);
                world.add_spring(a, b, stiffness, params.beam.damping);
            }
            members[static_cast<std::size_t>(v.pair_i)].push_back({v.pair_j, code});
            members[static_cast<std::size_t>(v.pair_j)].push_back({v.pair_i, code});
        }

        // welded joints resist relative rotation of each incident member pair
        for (int j = 0; j < spec.n_joints; ++j) {
            if (s.joint(spec, j) != params.weld_joint_code) continue;
            const auto& incident = members[static_cast<std::size_t>(j)];
            for (std::size_t m1 = 0; m1 < incident.size(); ++m1) {
                for (std::size_t m2 = m1 + 1; m2 < incident.size(); ++m2) {
                    world.add_angle_spring(anchor_of(j), anchor_of(incident[m1].first),
                                           anchor_of(incident[m2].first),
                                           params.weld_angular_stiffness);
                }
            }
        }
    }
    return built;
}

}  // namespace

Trajectory simulate(const ProblemSpec& spec, const Solution& s, const SimParams& params) {
    BuiltWorld built = build_world(spec, s, params);
    World& world = built.world;

    const long long samples = std::llround(params.duration / params.timestep);
    const double sub_dt = params.timestep / params.substeps;
    Trajectory traj;
    traj.time.reserve(static_cast<std::size_t>(samples));

    double prev_vz = world.anchor_velocity(built.q1).z;
    for (long long step = 1; step <= samples; ++step) {
        for (int sub = 0; sub < params.substeps && !world.diverged(); ++sub) world.step(sub_dt);
        if (world.diverged()) {
            traj.diverged = true;
            break;
        }
        double vz = world.anchor_velocity(built.q1).z;
        traj.time.push_back(world.time());
        traj.a_z_q1.push_back((vz - prev_vz) / params.timestep);
        prev_vz = vz;
        traj.d_q2.push_back((world.anchor_position(built.q2) - built.q2_start).norm());
        traj.d_q3.push_back((world.anchor_position(built.q3) - built.q3_start).norm());
    }
    return traj;
}

double fitness_suspension(const ProblemSpec& spec, const Solution& s, const SimParams& params) {
    Trajectory traj = simulate(spec, s, params);
    if (traj.diverged) return std::numeric_limits<double>::infinity();
    double total = 0.0;
    for (std::size_t t = 0; t < traj.time.size(); ++t) {
        double accel = params.signed_acceleration ? traj.a_z_q1[t] : std::abs(traj.a_z_q1[t]);
        total += accel + params.weights.w1 * (traj.d_q2[t] + traj.d_q3[t]);
    }
    int count = params.count_term == CountTerm::Components ? active_component_count(spec, s)
                                                           : active_joint_count(spec, s);
    return total + params.weights.w2 * count;
}

std::vector<std::pair<int, int>> adjacent_pairing(int n_vars) {
    std::vector<std::pair<int, int>> pairs;
    for (int g = 0; g + 1 < n_vars; g += 2) pairs.push_back({g, g + 1});
    return pairs;
}

std::vector<std::pair<int, int>> planted_pairing(int n_vars, std::uint64_t pairing_seed) {
    std::vector<int> order(static_cast<std::size_t>(n_vars));
    for (int i = 0; i < n_vars; ++i) order[static_cast<std::size_t>(i)] = i;
    Rng rng(pairing_seed);
    rng.shuffle(order);
    std::vector<std::pair<int, int>> pairs;
    for (int g = 0; g + 1 < n_vars; g += 2) {
        int a = order[static_cast<std::size_t>(g)], b = order[static_cast<std::size_t>(g + 1)];
        pairs.push_back({std::min(a, b), std::max(a, b)});
    }
    return pairs;
}

namespace {

double trap_score(int a, int b) {
    if (a == 1 && b == 1) return -2.0;
    if (a == 0 && b == 0) return -1.0;
    return 0.0;
}

}  // namespace

double fitness_synthetic(SyntheticKind kind, const Solution& s,
                         const std::vector<std::pair<int, int>>& pairs) {
    const int n = static_cast<int>(s.values.size());
    switch (kind) {
        case SyntheticKind::OneMax: {
            int ones = 0;
            for (int v : s.values) ones += v == 1 ? 1 : 0;
            return -static_cast<double>(ones);
        }
        case SyntheticKind::TrapPairs:
        case SyntheticKind::PlantedPairs: {
            const std::vector<std::pair<int, int>>& use =
                pairs.empty() ? adjacent_pairing(n) : pairs;
            double total = 0.0;
            for (const auto& [i, j] : use) {
                total += trap_score(s.values[static_cast<std::size_t>(i)],
                                    s.values[static_cast<std::size_t>(j)]);
            }
            return total;
        }
    }
    return 0.0;
}

std::vector<std::pair<int, int>> pairing_from_spec(const ProblemSpec& spec) {
    const int n = spec.variables().size();
    if (spec.fitness_params.contains("pairs")) {
        std::vector<std::pair<int, int>> pairs;
        for (const auto& p : spec.fitness_params.at("pairs")) {
            pairs.push_back({p.at(0).get<int>(), p.at(1).get<int>()});
        }
        return pairs;
    }
    if (spec.fitness_params.contains("pairing_seed")) {
        return planted_pairing(n, spec.fitness_params.at("pairing_seed").get<std::uint64_t>());
    }
    return adjacent_pairing(n);
}

eda::Evaluator make_evaluator(const ProblemSpec& spec) {
    const std::string& id = spec.fitness_id;
    if (id == "suspension") {
        auto params = std::make_shared<SimParams>(parse_sim_params(spec.fitness_params));
        return [params](const ProblemSpec& sp, const Solution& s) {
            return fitness_suspension(sp, s, *params);
        };
    }
    if (id == "onemax") {
        return [](const ProblemSpec&, const Solution& s) {
            return fitness_synthetic(SyntheticKind::OneMax, s);
        };
    }
    if (id == "trap_pairs") {
        return [](const ProblemSpec&, const Solution& s) {
            return fitness_synthetic(SyntheticKind::TrapPairs, s);
        };
    }
    if (id == "planted_pairs") {
        auto pairs = std::make_shared<std::vector<std::pair<int, int>>>(pairing_from_spec(spec));
        return [pairs](const ProblemSpec&, const Solution& s) {
            return fitness_synthetic(SyntheticKind::PlantedPairs, s, *pairs);
        };
    }
    throw FitnessError("unknown fitness id: " + id);
}

}  // namespace confopt::fitness
