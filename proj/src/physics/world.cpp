#include "sketchplay/physics/world.hpp"

#include "sketchplay/sketch.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>

namespace sketchplay::physics {

namespace {

constexpr double kBaseMargin = 2e-3;  // speculative contact distance, m

struct BodyState {
  double inv_mass = 0.0;
  Mat3 inv_inertia = Mat3::Zero();  // world frame
  Mat3 rotation = Mat3::Identity();
  Vec3 gravity = Vec3::Zero();      // acceleration actually applied
  Vec3 v_start = Vec3::Zero();      // linear velocity before gravity
  std::optional<Polyhedron> poly;
  bool touched = false;
  Mat3 inertia = Mat3::Zero();  // world frame, start of step
  // Velocities after gravity, after the contact solve and the solved spin
  // the orientation advanced with.
  Vec3 v_pre = Vec3::Zero(), w_pre = Vec3::Zero();
  Vec3 v_solved = Vec3::Zero(), w_solved = Vec3::Zero();
  Quat turn = Quat::Identity();  // this step's rotation
};

struct ContactConstraint {
  int a = -1;  // rigid body index, -1 for the ground plane
  int b = -1;
  Vec3 point, normal, t1, t2, ra, rb;
  double separation = 0.0;
  double friction = 0.0;
  double restitution = 0.0;
  double normal_mass = 0.0;
  double t1_mass = 0.0;
  double t2_mass = 0.0;
  double approach_speed = 0.0;  // normal velocity at first touch, <= 0 when closing
  double vn_solved = 0.0;
  double lambda_n = 0.0;
  double lambda_t1 = 0.0;
  double lambda_t2 = 0.0;
};

Quat integrate_rotation(const Quat& q, const Vec3& rotation_vector) {
  const double angle = rotation_vector.norm();
  if (angle < 1e-300) return q;
  return (Quat(Eigen::AngleAxisd(angle, rotation_vector / angle)) * q).normalized();
}

void tangent_basis(const Vec3& n, Vec3* t1, Vec3* t2) {
  if (std::abs(n.x()) > 0.57735026919) {
    *t1 = Vec3(n.y(), -n.x(), 0.0).normalized();
  } else {
    *t1 = Vec3(0.0, n.z(), -n.y()).normalized();
  }
  *t2 = n.cross(*t1);
}

class RigidSolver {
 public:
  RigidSolver(World& world) : world_(world) {}

  std::vector<ContactRecord> run() {
    auto& bodies = world_.rigid_bodies;
    states_.resize(bodies.size());
    for (std::size_t i = 0; i < bodies.size(); ++i) prepare_body(i);
    find_contacts();
    for (auto& c : contacts_) prepare_contact(c);
    for (auto& c : contacts_) warm_start(c);

    for (int it = 0; it < world_.solver_iterations; ++it)
      for (auto& c : contacts_) solve_velocity(c);
    save_warm_start();
    for (std::size_t i = 0; i < bodies.size(); ++i) {
      states_[i].v_solved = bodies[i].linear_velocity;
      states_[i].w_solved = bodies[i].angular_velocity;
    }
    for (auto& c : contacts_) {
      c.vn_solved = normal_velocity(c);
      if (c.lambda_n > 0.0) {
        if (c.a >= 0) states_[c.a].touched = true;
        if (c.b >= 0) states_[c.b].touched = true;
      }
    }

    integrate_positions();

    for (int it = 0; it < world_.solver_iterations; ++it)
      for (auto& c : contacts_) apply_restitution(c);
    limit_contact_energy();
    turn_restitution_spin();

    correct_positions();

    std::vector<ContactRecord> records;
    for (const auto& c : contacts_) {
      if (c.lambda_n <= 0.0) continue;
      records.push_back({c.a < 0 ? std::string("ground") : bodies[c.a].id, bodies[c.b].id,
                         c.point, c.normal, c.lambda_n});
    }
    return records;
  }

 private:
  void prepare_body(std::size_t i) {
    RigidBody& body = world_.rigid_bodies[i];
    BodyState& s = states_[i];
    s.rotation = body.orientation.toRotationMatrix();
    if (!std::holds_alternative<Sphere>(body.shape)) {
      if (const auto* box = std::get_if<Box>(&body.shape)) s.poly = make_polyhedron(*box);
      else s.poly = make_polyhedron(std::get<ConvexPrism>(body.shape));
    }
    s.v_start = body.linear_velocity;
    if (body.is_static) return;
    s.inv_mass = 1.0 / body.mass;
    s.inv_inertia = s.rotation * body.inertia.inverse() * s.rotation.transpose();
    s.inertia = s.rotation * body.inertia * s.rotation.transpose();
    s.gravity = world_.gravity;
    body.linear_velocity += world_.gravity * world_.dt;
    s.v_pre = body.linear_velocity;
    s.w_pre = body.angular_velocity;
  }

  Placement placement(std::size_t i) const {
    const RigidBody& body = world_.rigid_bodies[i];
    const BodyState& s = states_[i];
    return {&body.shape, s.poly ? &*s.poly : nullptr, body.position, s.rotation};
  }

  double motion_bound(std::size_t i) const {
    const RigidBody& b = world_.rigid_bodies[i];
    return world_.dt * (b.linear_velocity.norm() +
                        b.angular_velocity.norm() * bounding_radius(b.shape));
  }

  void find_contacts() {
    const auto& bodies = world_.rigid_bodies;
    const std::size_t n = bodies.size();
    if (world_.ground) {
      const Plane plane{world_.ground->normal, world_.ground->offset};
      for (std::size_t i = 0; i < n; ++i) {
        if (bodies[i].is_static) continue;
        const double margin = kBaseMargin + motion_bound(i);
        for (const auto& p : collide(plane, placement(i), margin))
          add_contact(-1, static_cast<int>(i), p);
      }
    }
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        if (bodies[i].is_static && bodies[j].is_static) continue;
        const double margin = kBaseMargin + motion_bound(i) + motion_bound(j);
        const double reach = bounding_radius(bodies[i].shape) + bounding_radius(bodies[j].shape);
        if ((bodies[i].position - bodies[j].position).norm() - reach > margin) continue;
        for (const auto& p : collide(placement(i), placement(j), margin))
          add_contact(static_cast<int>(i), static_cast<int>(j), p);
      }
    }
  }

  void add_contact(int a, int b, const ContactPoint& p) {
    ContactConstraint c;
    c.a = a;
    c.b = b;
    c.point = p.position;
    c.normal = p.normal;
    c.separation = p.separation;
    contacts_.push_back(c);
  }

  Vec3 point_velocity(int i, const Vec3& r) const {
    if (i < 0) return Vec3::Zero();
    const RigidBody& b = world_.rigid_bodies[i];
    return b.linear_velocity + b.angular_velocity.cross(r);
  }

  Vec3 relative_velocity(const ContactConstraint& c) const {
    return point_velocity(c.b, c.rb) - point_velocity(c.a, c.ra);
  }

  double normal_velocity(const ContactConstraint& c) const {
    return relative_velocity(c).dot(c.normal);
  }

  double effective_mass(const ContactConstraint& c, const Vec3& dir) const {
    double k = 0.0;
    for (const auto& [idx, r] : {std::pair{c.a, c.ra}, std::pair{c.b, c.rb}}) {
      if (idx < 0) continue;
      const BodyState& s = states_[idx];
      const Vec3 rn = r.cross(dir);
      k += s.inv_mass + rn.dot(s.inv_inertia * rn);
    }
    return k > 0.0 ? 1.0 / k : 0.0;
  }

  void prepare_contact(ContactConstraint& c) {
    const auto& bodies = world_.rigid_bodies;
    c.ra = c.a >= 0 ? Vec3(c.point - bodies[c.a].position) : Vec3::Zero();
    c.rb = c.point - bodies[c.b].position;
    tangent_basis(c.normal, &c.t1, &c.t2);
    c.normal_mass = effective_mass(c, c.normal);
    c.t1_mass = effective_mass(c, c.t1);
    c.t2_mass = effective_mass(c, c.t2);

    const double friction_a = c.a >= 0 ? bodies[c.a].friction : world_.ground->friction;
    const double restitution_a = c.a >= 0 ? bodies[c.a].restitution : world_.ground->restitution;
    c.friction = std::sqrt(friction_a * bodies[c.b].friction);
    c.restitution = std::max(restitution_a, bodies[c.b].restitution);

    // Normal speed at the moment of touching. For a contact that is still
    // open at the start of the step, integrate the relative gravitational
    // acceleration across the gap so the bounce uses the true impact speed.
    const Vec3 ga = c.a >= 0 ? states_[c.a].gravity : Vec3::Zero();
    const Vec3 gb = states_[c.b].gravity;
    const double accel = (gb - ga).dot(c.normal);
    const double vn_after = normal_velocity(c);
    const double vn_before = vn_after - accel * world_.dt;
    if (c.separation > 0.0 && (vn_before < 0.0 || accel < 0.0)) {
      const double disc = vn_before * vn_before - 2.0 * accel * c.separation;
      c.approach_speed = -std::sqrt(std::max(disc, 0.0));
    } else {
      // Penetrating, or an open gap that is not closing: no reconstruction.
      c.approach_speed = vn_after;
    }
  }

  Vec3 local_point(const ContactConstraint& c) const {
    return states_[c.b].rotation.transpose() * c.rb;
  }

  void warm_start(ContactConstraint& c) {
    const Vec3 local = local_point(c);
    const double reach = 0.1 * bounding_radius(world_.rigid_bodies[c.b].shape);
    const CachedImpulse* best = nullptr;
    double best_d2 = reach * reach;
    for (const auto& w : world_.warm_start) {
      if (w.a != c.a || w.b != c.b) continue;
      const double d2 = (w.local_point - local).squaredNorm();
      if (d2 < best_d2) best_d2 = d2, best = &w;
    }
    if (!best) return;
    c.lambda_n = best->normal;
    const double limit = c.friction * c.lambda_n;
    c.lambda_t1 = std::clamp(best->friction.dot(c.t1), -limit, limit);
    c.lambda_t2 = std::clamp(best->friction.dot(c.t2), -limit, limit);
    apply_impulse(c, c.normal * c.lambda_n + c.t1 * c.lambda_t1 + c.t2 * c.lambda_t2);
  }

  void save_warm_start() {
    world_.warm_start.clear();
    for (const auto& c : contacts_) {
      if (c.lambda_n <= 0.0) continue;
      world_.warm_start.push_back(
          {c.a, c.b, local_point(c), c.lambda_n, c.t1 * c.lambda_t1 + c.t2 * c.lambda_t2});
    }
  }

  void apply_impulse(const ContactConstraint& c, const Vec3& impulse) {
    auto& bodies = world_.rigid_bodies;
    if (c.a >= 0 && !bodies[c.a].is_static) {
      const BodyState& s = states_[c.a];
      bodies[c.a].linear_velocity -= impulse * s.inv_mass;
      bodies[c.a].angular_velocity -= s.inv_inertia * c.ra.cross(impulse);
    }
    if (!bodies[c.b].is_static) {
      const BodyState& s = states_[c.b];
      bodies[c.b].linear_velocity += impulse * s.inv_mass;
      bodies[c.b].angular_velocity += s.inv_inertia * c.rb.cross(impulse);
    }
  }

  void solve_velocity(ContactConstraint& c) {
    // Friction: four-sided pyramid, each tangent clamped to mu * lambda_n.
    const double limit = c.friction * c.lambda_n;
    for (auto [dir, mass, lambda] :
         {std::tuple{c.t1, c.t1_mass, &c.lambda_t1}, std::tuple{c.t2, c.t2_mass, &c.lambda_t2}}) {
      const double vt = relative_velocity(c).dot(dir);
      const double updated = std::clamp(*lambda - mass * vt, -limit, limit);
      apply_impulse(c, dir * (updated - *lambda));
      *lambda = updated;
    }
    // Open contacts may close at most their gap during this step.
    const double target = c.separation > 0.0 ? -c.separation / world_.dt : 0.0;
    const double vn = normal_velocity(c);
    const double updated = std::max(c.lambda_n + c.normal_mass * (target - vn), 0.0);
    apply_impulse(c, c.normal * (updated - c.lambda_n));
    c.lambda_n = updated;
  }

  void apply_restitution(ContactConstraint& c) {
    if (c.restitution <= 0.0 || c.lambda_n <= 0.0 ||
        c.approach_speed > -kRestitutionThreshold) {
      return;
    }
    const double vn = normal_velocity(c);
    const double target = -c.restitution * c.approach_speed;
    const double updated = std::max(c.lambda_n + c.normal_mass * (target - vn), 0.0);
    apply_impulse(c, c.normal * (updated - c.lambda_n));
    c.lambda_n = updated;
  }

  void integrate_positions() {
    const double dt = world_.dt;
    for (std::size_t i = 0; i < world_.rigid_bodies.size(); ++i) {
      RigidBody& b = world_.rigid_bodies[i];
      if (b.is_static) continue;
      // Bodies in free flight follow the exact ballistic arc; the velocity
      // already holds a full step of gravity, so half of it is taken back.
      Vec3 displacement = b.linear_velocity * dt;
      if (!states_[i].touched) displacement -= 0.5 * world_.gravity * dt * dt;
      b.position += displacement;
      states_[i].turn = integrate_rotation(Quat::Identity(), b.angular_velocity * dt);
      b.orientation = integrate_rotation(b.orientation, b.angular_velocity * dt);
    }
  }

  // Restitution impulses are computed with the start-of-step inertia and
  // lever arms. Turning their spin change with the body keeps it consistent
  // with the rotated inertia, so a bounce with e <= 1 cannot add energy.
  void turn_restitution_spin() {
    for (std::size_t i = 0; i < world_.rigid_bodies.size(); ++i) {
      RigidBody& b = world_.rigid_bodies[i];
      if (b.is_static) continue;
      const BodyState& s = states_[i];
      b.angular_velocity = s.w_solved + s.turn * (b.angular_velocity - s.w_solved);
    }
  }

  // Two solver artifacts can add energy: per-point Newton targets at several
  // simultaneous contacts overshoot, and a warm-start impulse the iterations
  // have not fully undone leaves excess. Within each contact island the
  // response is scaled back until kinetic energy is no more than it was
  // before contact; one scale per island keeps the island's momentum.
  void limit_contact_energy() {
    const auto& bodies = world_.rigid_bodies;
    const std::size_t n = bodies.size();
    std::vector<std::size_t> parent(n);
    std::iota(parent.begin(), parent.end(), std::size_t{0});
    const auto root = [&](std::size_t i) {
      while (parent[i] != i) i = parent[i] = parent[parent[i]];
      return i;
    };
    for (const auto& c : contacts_) {
      if (c.lambda_n <= 0.0 || c.a < 0 || bodies[c.a].is_static || bodies[c.b].is_static) continue;
      parent[root(static_cast<std::size_t>(c.a))] = root(static_cast<std::size_t>(c.b));
    }
    // Kinetic energy along solved + beta * (final - solved) is
    // c0 + c1 * beta + c2 * beta^2, measured against the pre-contact energy;
    // along pre + gamma * (solved - pre) it is g1 * gamma + g2 * gamma^2.
    std::vector<double> c0(n, 0.0), c1(n, 0.0), c2(n, 0.0), g1(n, 0.0), g2(n, 0.0);
    const auto energy = [](double m, const Mat3& inertia, const Vec3& v, const Vec3& w) {
      return 0.5 * m * v.squaredNorm() + 0.5 * w.dot(inertia * w);
    };
    for (std::size_t i = 0; i < n; ++i) {
      if (bodies[i].is_static || !states_[i].touched) continue;
      const BodyState& s = states_[i];
      const double m = bodies[i].mass;
      const Vec3 dv = bodies[i].linear_velocity - s.v_solved;
      const Vec3 dw = bodies[i].angular_velocity - s.w_solved;
      const std::size_t r = root(i);
      c0[r] += energy(m, s.inertia, s.v_solved, s.w_solved) - energy(m, s.inertia, s.v_pre, s.w_pre);
      c1[r] += m * s.v_solved.dot(dv) + s.w_solved.dot(s.inertia * dw);
      c2[r] += energy(m, s.inertia, dv, dw);
      const Vec3 sv = s.v_solved - s.v_pre, sw = s.w_solved - s.w_pre;
      g1[r] += m * s.v_pre.dot(sv) + s.w_pre.dot(s.inertia * sw);
      g2[r] += energy(m, s.inertia, sv, sw);
    }
    std::vector<double> beta(n, 1.0), gamma(n, 1.0);
    for (std::size_t r = 0; r < n; ++r) {
      if (root(r) != r || c0[r] + c1[r] + c2[r] <= 0.0) continue;
      if (c0[r] > 0.0) {
        // The solve itself gained energy: no bounce, and the solve is
        // pulled back toward the pre-contact state (g2 > 0 since c0 > 0).
        beta[r] = 0.0;
        gamma[r] = std::clamp(-g1[r] / g2[r], 0.0, 1.0);
      } else if (c2[r] <= 0.0) {
        beta[r] = 0.0;
      } else {
        // c2 > 0 and c0 < 0: exactly one positive root.
        const double disc = c1[r] * c1[r] - 4.0 * c2[r] * c0[r];
        beta[r] = std::clamp((-c1[r] + std::sqrt(disc)) / (2.0 * c2[r]), 0.0, 1.0);
      }
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (bodies[i].is_static || !states_[i].touched) continue;
      const double b = beta[root(i)], g = gamma[root(i)];
      if (b == 1.0) continue;
      RigidBody& body = world_.rigid_bodies[i];
      const BodyState& s = states_[i];
      const Vec3 v_base = s.v_pre + g * (s.v_solved - s.v_pre), w_base = s.w_pre + g * (s.w_solved - s.w_pre);
      body.linear_velocity = v_base + b * (body.linear_velocity - s.v_solved);
      body.angular_velocity = w_base + b * (body.angular_velocity - s.w_solved);
    }
  }

  void correct_positions() {
    auto& bodies = world_.rigid_bodies;
    std::vector<Vec3> dx(bodies.size(), Vec3::Zero()), dtheta(bodies.size(), Vec3::Zero());
    auto shift = [&](int i, const Vec3& r) -> Vec3 {
      if (i < 0) return Vec3::Zero();
      return dx[i] + dtheta[i].cross(r);
    };
    for (const auto& c : contacts_) {
      const double sep = c.separation + c.vn_solved * world_.dt +
                         c.normal.dot(shift(c.b, c.rb) - shift(c.a, c.ra));
      const double depth = -sep - kPenetrationSlop;
      if (depth <= 0.0 || c.normal_mass <= 0.0) continue;
      const Vec3 p = c.normal * (kPositionCorrectionFactor * depth * c.normal_mass);
      if (c.a >= 0 && !bodies[c.a].is_static) {
        dx[c.a] -= p * states_[c.a].inv_mass;
        dtheta[c.a] -= states_[c.a].inv_inertia * c.ra.cross(p);
      }
      if (!bodies[c.b].is_static) {
        dx[c.b] += p * states_[c.b].inv_mass;
        dtheta[c.b] += states_[c.b].inv_inertia * c.rb.cross(p);
      }
    }
    for (std::size_t i = 0; i < bodies.size(); ++i) {
      if (bodies[i].is_static) continue;
      bodies[i].position += dx[i];
      // The spin turns with the body so the body-frame angular velocity, and
      // with it the rotational energy, is unchanged by the correction.
      const Quat turn = integrate_rotation(Quat::Identity(), dtheta[i]);
      bodies[i].orientation = (turn * bodies[i].orientation).normalized();
      bodies[i].angular_velocity = turn * bodies[i].angular_velocity;
    }
  }

  World& world_;
  std::vector<BodyState> states_;
  std::vector<ContactConstraint> contacts_;
};

// ---- Spring systems: linearized backward Euler, conjugate gradient ------

struct SpringBlocks {
  std::vector<Mat3> stiffness;  // dF_a/dx_b, positive semidefinite
  std::vector<Mat3> damping;
};

SpringBlocks spring_blocks(const std::vector<SpringNode>& nodes, const std::vector<Spring>& springs) {
  SpringBlocks out;
  out.stiffness.reserve(springs.size());
  out.damping.reserve(springs.size());
  for (const auto& s : springs) {
    const Vec3 d = nodes[s.b].position - nodes[s.a].position;
    const double len = d.norm();
    const Vec3 u = len > 1e-12 ? Vec3(d / len) : Vec3::UnitX();
    const Mat3 uu = u * u.transpose();
    // The geometric term is dropped under compression to keep the system
    // positive definite.
    const double geometric = len > 1e-12 ? std::max(0.0, 1.0 - s.rest_length / len) : 0.0;
    out.stiffness.push_back(s.stiffness * (uu + geometric * (Mat3::Identity() - uu)));
    out.damping.push_back(s.damping * uu);
  }
  return out;
}

void step_spring_system(std::vector<SpringNode>& nodes, const std::vector<Spring>& springs,
                        const Vec3& gravity, double dt, double air_damping) {
  const std::size_t n = nodes.size();
  if (n == 0) return;
  const SpringBlocks blocks = spring_blocks(nodes, springs);

  using Field = std::vector<Vec3>;
  auto laplacian = [&](const std::vector<Mat3>& mats, const Field& x, Field& out) {
    for (std::size_t k = 0; k < springs.size(); ++k) {
      const Vec3 d = mats[k] * (x[springs[k].a] - x[springs[k].b]);
      out[springs[k].a] += d;
      out[springs[k].b] -= d;
    }
  };

  Field velocity(n);
  for (std::size_t i = 0; i < n; ++i) velocity[i] = nodes[i].velocity;

  // Right-hand side dt * f0 - dt^2 * K v0.
  Field rhs(n, Vec3::Zero());
  for (std::size_t k = 0; k < springs.size(); ++k) {
    const Spring& s = springs[k];
    const Vec3 d = nodes[s.b].position - nodes[s.a].position;
    const double len = d.norm();
    if (len < 1e-12) continue;
    const Vec3 u = d / len;
    const double tension = s.stiffness * (len - s.rest_length) +
                           s.damping * (nodes[s.b].velocity - nodes[s.a].velocity).dot(u);
    rhs[s.a] += dt * tension * u;
    rhs[s.b] -= dt * tension * u;
  }
  Field kv(n, Vec3::Zero());
  laplacian(blocks.stiffness, velocity, kv);
  for (std::size_t i = 0; i < n; ++i) {
    const double m = nodes[i].mass;
    rhs[i] += dt * m * (gravity - air_damping * nodes[i].velocity) - dt * dt * kv[i];
    if (nodes[i].pinned) rhs[i].setZero();
  }

  std::vector<Mat3> system(springs.size());
  for (std::size_t k = 0; k < springs.size(); ++k)
    system[k] = dt * blocks.damping[k] + dt * dt * blocks.stiffness[k];

  auto apply = [&](const Field& x, Field& out) {
    for (std::size_t i = 0; i < n; ++i) out[i] = nodes[i].mass * (1.0 + dt * air_damping) * x[i];
    laplacian(system, x, out);
    for (std::size_t i = 0; i < n; ++i)
      if (nodes[i].pinned) out[i].setZero();
  };

  Field precond(n, Vec3::Zero());
  for (std::size_t i = 0; i < n; ++i) precond[i] = Vec3::Constant(nodes[i].mass * (1.0 + dt * air_damping));
  for (std::size_t k = 0; k < springs.size(); ++k) {
    precond[springs[k].a] += system[k].diagonal();
    precond[springs[k].b] += system[k].diagonal();
  }

  // Preconditioned conjugate gradient on the filtered system.
  Field x(n, Vec3::Zero()), r = rhs, z(n), p(n), ap(n);
  auto dot = [&](const Field& a, const Field& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += a[i].dot(b[i]);
    return s;
  };
  for (std::size_t i = 0; i < n; ++i) z[i] = r[i].cwiseQuotient(precond[i]);
  p = z;
  double rz = dot(r, z);
  const double tolerance = 1e-20 * std::max(dot(rhs, rhs), 1e-300);
  for (int it = 0; it < 400 && dot(r, r) > tolerance; ++it) {
    apply(p, ap);
    const double pap = dot(p, ap);
    if (pap <= 0.0) break;
    const double alpha = rz / pap;
    for (std::size_t i = 0; i < n; ++i) {
      x[i] += alpha * p[i];
      r[i] -= alpha * ap[i];
    }
    for (std::size_t i = 0; i < n; ++i) z[i] = r[i].cwiseQuotient(precond[i]);
    const double rz_next = dot(r, z);
    const double beta = rz_next / rz;
    rz = rz_next;
    for (std::size_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
  }

  for (std::size_t i = 0; i < n; ++i) {
    if (nodes[i].pinned) {
      nodes[i].velocity.setZero();
      continue;
    }
    nodes[i].velocity += x[i];
    nodes[i].position += dt * nodes[i].velocity;
  }
}

void resolve_node_contact(SpringNode& node, const Vec3& normal, double depth, const Vec3& surface_velocity,
                          double friction) {
  node.position += normal * depth;
  const Vec3 rel = node.velocity - surface_velocity;
  const double vn = rel.dot(normal);
  if (vn >= 0.0) return;
  Vec3 vt = rel - vn * normal;
  const double vt_len = vt.norm();
  const double max_drop = friction * -vn;
  vt = vt_len <= max_drop ? Vec3::Zero() : Vec3(vt * (1.0 - max_drop / vt_len));
  node.velocity = surface_velocity + vt;
}

void collide_nodes(World& world, std::vector<SpringNode>& nodes, double radius, double friction) {
  std::vector<std::optional<Polyhedron>> polys(world.rigid_bodies.size());
  std::vector<Mat3> rotations(world.rigid_bodies.size());
  for (std::size_t i = 0; i < world.rigid_bodies.size(); ++i) {
    const auto& b = world.rigid_bodies[i];
    rotations[i] = b.orientation.toRotationMatrix();
    if (const auto* box = std::get_if<Box>(&b.shape)) polys[i] = make_polyhedron(*box);
    else if (const auto* prism = std::get_if<ConvexPrism>(&b.shape)) polys[i] = make_polyhedron(*prism);
  }
  for (auto& node : nodes) {
    if (node.pinned) continue;
    if (world.ground) {
      const auto& g = *world.ground;
      const double dist = g.normal.dot(node.position) - g.offset;
      if (dist < radius) {
        resolve_node_contact(node, g.normal, radius - dist, Vec3::Zero(),
                             std::sqrt(g.friction * friction));
      }
    }
    for (std::size_t i = 0; i < world.rigid_bodies.size(); ++i) {
      const auto& b = world.rigid_bodies[i];
      if ((node.position - b.position).norm() > bounding_radius(b.shape) + radius) continue;
      const Placement place{&b.shape, polys[i] ? &*polys[i] : nullptr, b.position, rotations[i]};
      Vec3 n;
      const double dist = signed_distance(place, node.position, &n);
      if (dist >= radius) continue;
      const Vec3 surface_v = b.linear_velocity + b.angular_velocity.cross(node.position - b.position);
      resolve_node_contact(node, n, radius - dist, surface_v, std::sqrt(b.friction * friction));
    }
  }
}

Vec3 centroid(const std::vector<SpringNode>& nodes, Vec3* mean_velocity) {
  Vec3 x = Vec3::Zero(), v = Vec3::Zero();
  double m = 0.0;
  for (const auto& n : nodes) {
    x += n.mass * n.position;
    v += n.mass * n.velocity;
    m += n.mass;
  }
  if (mean_velocity) *mean_velocity = m > 0.0 ? Vec3(v / m) : Vec3::Zero();
  return m > 0.0 ? Vec3(x / m) : Vec3::Zero();
}

bool bad(const Vec3& p) { return !p.allFinite() || p.norm() > kBlowupLimit; }

void check_blowup(const World& world) {
  for (const auto& b : world.rigid_bodies) {
    if (bad(b.position) || !b.linear_velocity.allFinite() || !b.angular_velocity.allFinite()) {
      throw NumericalBlowup(world.step_index, "rigid body " + b.id + " diverged");
    }
  }
  for (const auto& s : world.soft_bodies)
    for (const auto& n : s.nodes)
      if (bad(n.position)) throw NumericalBlowup(world.step_index, "soft body " + s.id + " diverged");
  for (const auto& c : world.cloths)
    for (const auto& n : c.nodes)
      if (bad(n.position)) throw NumericalBlowup(world.step_index, "cloth " + c.id + " diverged");
}

bool connected(std::size_t n, const std::vector<Spring>& springs) {
  if (n == 0) return false;
  std::vector<std::vector<int>> adj(n);
  for (const auto& s : springs) adj[s.a].push_back(s.b), adj[s.b].push_back(s.a);
  std::vector<char> seen(n, 0);
  std::queue<int> q;
  q.push(0);
  seen[0] = 1;
  std::size_t count = 1;
  while (!q.empty()) {
    const int i = q.front();
    q.pop();
    for (int j : adj[i])
      if (!seen[j]) seen[j] = 1, ++count, q.push(j);
  }
  return count == n;
}

}  // namespace

RigidBody RigidBody::make(std::string id, Shape shape, double mass, const Vec3& position,
                          const Quat& orientation) {
  RigidBody b;
  b.id = std::move(id);
  b.inertia = inertia_tensor(shape, mass);
  b.shape = std::move(shape);
  b.mass = mass;
  b.position = position;
  b.orientation = orientation.normalized();
  return b;
}

SpringStiffness springs_from_elastic_moduli(double elastic_modulus, double poisson_nu,
                                            double lattice_spacing, double node_mass) {
  if (!(elastic_modulus > 0.0) || !std::isfinite(elastic_modulus)) {
    throw Error(ErrorCode::ParameterOutOfRange, "elastic modulus must be positive");
  }
  if (!(poisson_nu >= 0.0 && poisson_nu < 0.5)) {
    throw Error(ErrorCode::ParameterOutOfRange, "poisson ratio must be in [0, 0.5)");
  }
  if (!(lattice_spacing > 0.0)) {
    throw Error(ErrorCode::ParameterOutOfRange, "lattice spacing must be positive");
  }
  if (!(node_mass > 0.0)) throw Error(ErrorCode::ParameterOutOfRange, "node mass must be positive");
  SpringStiffness s;
  s.k_structural = elastic_modulus * lattice_spacing;
  s.k_shear = s.k_structural * poisson_nu / (1.0 - poisson_nu);
  s.damping = 0.1 * std::sqrt(s.k_structural * node_mass);
  return s;
}

SoftBody make_soft_body(std::string id, const Shape& shape, const Vec3& position,
                        const Quat& orientation, double lattice_spacing,
                        const ElasticParameters& params) {
  if (!(lattice_spacing > 0.0)) {
    throw Error(ErrorCode::ParameterOutOfRange, "lattice spacing must be positive");
  }
  Vec3 half;
  const ConvexPrism* prism = std::get_if<ConvexPrism>(&shape);
  if (const auto* box = std::get_if<Box>(&shape)) {
    half = box->half_extents;
  } else if (prism) {
    Vec2 lo = Vec2::Constant(1e300), hi = Vec2::Constant(-1e300);
    for (const auto& p : prism->outline) lo = lo.cwiseMin(p), hi = hi.cwiseMax(p);
    half = Vec3(std::max(-lo.x(), hi.x()), std::max(-lo.y(), hi.y()), 0.5 * prism->thickness);
  } else {
    throw Error(ErrorCode::UnsupportedShape, "soft bodies need a box or prism shape");
  }

  std::array<int, 3> count;
  Vec3 step;
  for (int k = 0; k < 3; ++k) {
    count[k] = std::max(2, static_cast<int>(std::lround(2.0 * half[k] / lattice_spacing)) + 1);
    step[k] = 2.0 * half[k] / (count[k] - 1);
  }
  auto inside = [&](const Vec3& p) {
    if (!prism) return true;
    const auto& poly = prism->outline;
    for (std::size_t i = 0; i < poly.size(); ++i) {
      const Vec2& a = poly[i];
      const Vec2& b = poly[(i + 1) % poly.size()];
      const double cross = (b.x() - a.x()) * (p.y() - a.y()) - (b.y() - a.y()) * (p.x() - a.x());
      if (cross < -1e-9) return false;
    }
    return true;
  };

  const Mat3 rot = orientation.normalized().toRotationMatrix();
  std::vector<int> index(static_cast<std::size_t>(count[0] * count[1] * count[2]), -1);
  auto cell = [&](int i, int j, int k) { return (k * count[1] + j) * count[0] + i; };
  SoftBody body;
  body.id = std::move(id);
  body.friction = params.friction;
  body.restitution = params.restitution;
  for (int k = 0; k < count[2]; ++k)
    for (int j = 0; j < count[1]; ++j)
      for (int i = 0; i < count[0]; ++i) {
        const Vec3 local(-half.x() + i * step.x(), -half.y() + j * step.y(), -half.z() + k * step.z());
        if (!inside(local)) continue;
        index[cell(i, j, k)] = static_cast<int>(body.nodes.size());
        body.nodes.push_back({rot * local + position, Vec3::Zero(), 0.0, false});
      }
  if (body.nodes.size() < 2) {
    throw Error(ErrorCode::ParameterOutOfRange, body.id + ": lattice too coarse for the shape");
  }
  const double total_mass = params.density * volume(shape);
  const double node_mass = total_mass / static_cast<double>(body.nodes.size());
  for (auto& n : body.nodes) n.mass = node_mass;

  const double spacing = step.sum() / 3.0;
  const SpringStiffness k =
      springs_from_elastic_moduli(params.elastic_modulus, params.poisson_nu, spacing, node_mass);
  auto link = [&](int a, int b, double stiffness) {
    if (a < 0 || b < 0 || stiffness <= 0.0) return;
    body.springs.push_back({a, b, stiffness, (body.nodes[b].position - body.nodes[a].position).norm(),
                            k.damping});
  };
  auto at = [&](int i, int j, int kk) {
    if (i < 0 || j < 0 || kk < 0 || i >= count[0] || j >= count[1] || kk >= count[2]) return -1;
    return index[cell(i, j, kk)];
  };
  for (int kk = 0; kk < count[2]; ++kk)
    for (int j = 0; j < count[1]; ++j)
      for (int i = 0; i < count[0]; ++i) {
        const int here = at(i, j, kk);
        if (here < 0) continue;
        link(here, at(i + 1, j, kk), k.k_structural);
        link(here, at(i, j + 1, kk), k.k_structural);
        link(here, at(i, j, kk + 1), k.k_structural);
        link(here, at(i + 1, j + 1, kk), k.k_shear);
        link(at(i + 1, j, kk), at(i, j + 1, kk), k.k_shear);
        link(here, at(i + 1, j, kk + 1), k.k_shear);
        link(at(i + 1, j, kk), at(i, j, kk + 1), k.k_shear);
        link(here, at(i, j + 1, kk + 1), k.k_shear);
        link(at(i, j + 1, kk), at(i, j, kk + 1), k.k_shear);
      }
  if (!connected(body.nodes.size(), body.springs)) {
    throw Error(ErrorCode::ParameterOutOfRange, body.id + ": spring lattice is not connected");
  }

  if (!prism) {
    // Boundary quads of the lattice, split into triangles.
    auto quad = [&](int a, int b, int c, int d) {
      body.surface.push_back({a, b, c});
      body.surface.push_back({a, c, d});
    };
    const int nx = count[0], ny = count[1], nz = count[2];
    for (int j = 0; j + 1 < ny; ++j)
      for (int i = 0; i + 1 < nx; ++i) {
        quad(at(i, j, 0), at(i, j + 1, 0), at(i + 1, j + 1, 0), at(i + 1, j, 0));
        quad(at(i, j, nz - 1), at(i + 1, j, nz - 1), at(i + 1, j + 1, nz - 1), at(i, j + 1, nz - 1));
      }
    for (int kk = 0; kk + 1 < nz; ++kk)
      for (int i = 0; i + 1 < nx; ++i) {
        quad(at(i, 0, kk), at(i + 1, 0, kk), at(i + 1, 0, kk + 1), at(i, 0, kk + 1));
        quad(at(i, ny - 1, kk), at(i, ny - 1, kk + 1), at(i + 1, ny - 1, kk + 1), at(i + 1, ny - 1, kk));
      }
    for (int kk = 0; kk + 1 < nz; ++kk)
      for (int j = 0; j + 1 < ny; ++j) {
        quad(at(0, j, kk), at(0, j, kk + 1), at(0, j + 1, kk + 1), at(0, j + 1, kk));
        quad(at(nx - 1, j, kk), at(nx - 1, j + 1, kk), at(nx - 1, j + 1, kk + 1), at(nx - 1, j, kk + 1));
      }
  }
  return body;
}

Cloth make_cloth(std::string id, int rows, int cols, double spacing, const Vec3& origin,
                 const Vec3& u_axis, const Vec3& v_axis, double thickness,
                 const ElasticParameters& params, const std::vector<std::pair<int, int>>& pinned) {
  if (rows < 2 || cols < 2) throw Error(ErrorCode::ParameterOutOfRange, "cloth needs rows, cols >= 2");
  if (!(spacing > 0.0) || !(thickness > 0.0)) {
    throw Error(ErrorCode::ParameterOutOfRange, "cloth spacing and thickness must be positive");
  }
  Cloth cloth;
  cloth.id = std::move(id);
  cloth.rows = rows;
  cloth.cols = cols;
  cloth.friction = params.friction;
  cloth.thickness = thickness;
  const Vec3 u = u_axis.normalized(), v = v_axis.normalized();
  const double area = (rows - 1) * (cols - 1) * spacing * spacing;
  const double node_mass = params.density * thickness * area / (rows * cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c)
      cloth.nodes.push_back({origin + u * (c * spacing) + v * (r * spacing), Vec3::Zero(), node_mass, false});
  for (const auto& [r, c] : pinned) {
    if (r < 0 || c < 0 || r >= rows || c >= cols) {
      throw Error(ErrorCode::IndexOutOfRange, "pinned node outside the cloth grid");
    }
    cloth.nodes[cloth.node_index(r, c)].pinned = true;
  }

  // In-plane membrane: the lattice spacing argument is the sheet thickness,
  // giving k = E * t per spring.
  const SpringStiffness k =
      springs_from_elastic_moduli(params.elastic_modulus, params.poisson_nu, thickness, node_mass);
  const double k_bend = 1e-3 * k.k_structural;
  auto link = [&](int r0, int c0, int r1, int c1, double stiffness) {
    if (r1 < 0 || c1 < 0 || r1 >= rows || c1 >= cols || stiffness <= 0.0) return;
    const int a = cloth.node_index(r0, c0), b = cloth.node_index(r1, c1);
    cloth.springs.push_back({a, b, stiffness, (cloth.nodes[b].position - cloth.nodes[a].position).norm(),
                             k.damping});
  };
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      link(r, c, r, c + 1, k.k_structural);
      link(r, c, r + 1, c, k.k_structural);
      link(r, c, r + 1, c + 1, k.k_shear);
      if (c + 1 < cols) link(r, c + 1, r + 1, c, k.k_shear);
      link(r, c, r, c + 2, k_bend);
      link(r, c, r + 2, c, k_bend);
    }
  return cloth;
}

void validate(const World& world) {
  if (!(world.dt > 0.0 && world.dt <= 1.0 / 60.0 + 1e-15)) {
    throw Error(ErrorCode::ParameterOutOfRange, "dt must be in (0, 1/60]");
  }
  if (world.solver_iterations < 1) {
    throw Error(ErrorCode::ParameterOutOfRange, "solver_iterations must be >= 1");
  }
  if (!world.gravity.allFinite()) throw Error(ErrorCode::ParameterOutOfRange, "gravity not finite");
  for (const auto& b : world.rigid_bodies) {
    if (!b.is_static && !(b.mass > 0.0 && std::isfinite(b.mass))) {
      throw Error(ErrorCode::ParameterOutOfRange, b.id + ": mass must be positive");
    }
    if (!b.is_static && Eigen::LLT<Mat3>(b.inertia).info() != Eigen::Success) {
      throw Error(ErrorCode::ParameterOutOfRange, b.id + ": inertia not positive definite");
    }
    if (std::abs(b.orientation.norm() - 1.0) > 1e-9) {
      throw Error(ErrorCode::ParameterOutOfRange, b.id + ": orientation is not a unit quaternion");
    }
  }
  for (const auto& c : world.cloths)
    if (c.rows < 2 || c.cols < 2) throw Error(ErrorCode::ParameterOutOfRange, c.id + ": bad grid");
}

Frame snapshot(const World& world) {
  Frame f;
  f.index = world.step_index;
  f.time = static_cast<double>(world.step_index) * world.dt;
  for (const auto& b : world.rigid_bodies)
    f.bodies.push_back({b.id, b.position, b.orientation, b.linear_velocity, b.angular_velocity});
  auto deformable = [&](const std::string& id, const std::vector<SpringNode>& nodes) {
    Vec3 v;
    const Vec3 x = centroid(nodes, &v);
    f.bodies.push_back({id, x, Quat::Identity(), v, Vec3::Zero()});
    std::vector<Vec3> pts;
    pts.reserve(nodes.size());
    for (const auto& n : nodes) pts.push_back(n.position);
    f.deformable_nodes.push_back(std::move(pts));
  };
  for (const auto& s : world.soft_bodies) deformable(s.id, s.nodes);
  for (const auto& c : world.cloths) deformable(c.id, c.nodes);
  return f;
}

Frame step(World& world) {
  validate(world);
  std::vector<ContactRecord> contacts = RigidSolver(world).run();

  for (auto& s : world.soft_bodies) {
    step_spring_system(s.nodes, s.springs, world.gravity, world.dt, s.air_damping);
    collide_nodes(world, s.nodes, 0.0, s.friction);
  }
  for (auto& c : world.cloths) {
    step_spring_system(c.nodes, c.springs, world.gravity, world.dt, c.air_damping);
    collide_nodes(world, c.nodes, 0.5 * c.thickness, c.friction);
  }

  ++world.step_index;
  check_blowup(world);
  Frame f = snapshot(world);
  f.contacts = std::move(contacts);
  return f;
}

std::size_t step_count(double duration, double dt) {
  if (!(duration > 0.0) || !std::isfinite(duration)) {
    throw Error(ErrorCode::ParameterOutOfRange, "duration must be positive");
  }
  // Tolerate representation error so duration = n * dt gives n steps.
  return static_cast<std::size_t>(std::floor(duration / dt + 1e-9));
}

std::vector<Frame> simulate(World& world, double duration) {
  validate(world);
  const std::size_t n = step_count(duration, world.dt);
  std::vector<Frame> frames;
  frames.reserve(n);
  for (std::size_t i = 0; i < n; ++i) frames.push_back(step(world));
  return frames;
}

void apply_gesture_impulse(World& world, const std::string& body_id, const Vec3& v_obj) {
  if (!v_obj.allFinite()) throw Error(ErrorCode::ParameterOutOfRange, "velocity not finite");
  for (auto& b : world.rigid_bodies) {
    if (b.id != body_id) continue;
    if (b.is_static) throw Error(ErrorCode::ParameterOutOfRange, body_id + " is static");
    b.linear_velocity = v_obj;
    return;
  }
  auto set_nodes = [&](std::vector<SpringNode>& nodes) {
    for (auto& n : nodes)
      if (!n.pinned) n.velocity = v_obj;
  };
  for (auto& s : world.soft_bodies)
    if (s.id == body_id) return set_nodes(s.nodes);
  for (auto& c : world.cloths)
    if (c.id == body_id) return set_nodes(c.nodes);
  throw Error(ErrorCode::UnknownBody, body_id);
}

double kinetic_energy(const World& world) {
  double e = 0.0;
  for (const auto& b : world.rigid_bodies) {
    if (b.is_static) continue;
    const Mat3 r = b.orientation.toRotationMatrix();
    const Vec3 w_body = r.transpose() * b.angular_velocity;
    e += 0.5 * b.mass * b.linear_velocity.squaredNorm() + 0.5 * w_body.dot(b.inertia * w_body);
  }
  auto nodes_ke = [&](const std::vector<SpringNode>& nodes) {
    for (const auto& n : nodes) e += 0.5 * n.mass * n.velocity.squaredNorm();
  };
  for (const auto& s : world.soft_bodies) nodes_ke(s.nodes);
  for (const auto& c : world.cloths) nodes_ke(c.nodes);
  return e;
}

double mechanical_energy(const World& world) {
  double e = kinetic_energy(world);
  for (const auto& b : world.rigid_bodies)
    if (!b.is_static) e -= b.mass * world.gravity.dot(b.position);
  auto spring_pe = [&](const std::vector<SpringNode>& nodes, const std::vector<Spring>& springs) {
    for (const auto& n : nodes) e -= n.mass * world.gravity.dot(n.position);
    for (const auto& s : springs) {
      const double stretch = (nodes[s.b].position - nodes[s.a].position).norm() - s.rest_length;
      e += 0.5 * s.stiffness * stretch * stretch;
    }
  };
  for (const auto& s : world.soft_bodies) spring_pe(s.nodes, s.springs);
  for (const auto& c : world.cloths) spring_pe(c.nodes, c.springs);
  return e;
}

Vec3 linear_momentum(const World& world) {
  Vec3 p = Vec3::Zero();
  for (const auto& b : world.rigid_bodies)
    if (!b.is_static) p += b.mass * b.linear_velocity;
  for (const auto& s : world.soft_bodies)
    for (const auto& n : s.nodes) p += n.mass * n.velocity;
  for (const auto& c : world.cloths)
    for (const auto& n : c.nodes) p += n.mass * n.velocity;
  return p;
}

}  // namespace sketchplay::physics
