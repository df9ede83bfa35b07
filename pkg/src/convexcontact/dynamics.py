"""Rigid bodies, mass matrices, contact Jacobians and the per-step problem.

Worlds are either planar (dim 2: generalized velocity [vx, vy, omega] per
free body) or spatial (dim 3: [vx, vy, vz, wx, wy, wz], world-frame angular
velocity, orientation as a unit quaternion w-first).  Prescribed bodies
carry no degrees of freedom; their surface motion enters contact constraints
through the bias term only.

`assemble_problem` runs the collision pass and freezes one StepProblem: the
mass matrix A, the free-motion velocity v* = v0 + dt * A^-1 * f_ext, and per
contact the frame Jacobian blocks, bias, penetration and previous-step
normal impulse (matched by (body pair, feature), zero for fresh contacts).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .collision import Shape, detect_contacts, quaternion_matrix
from .normal_laws import DiscreteNormal, HuntCrossley
from .potentials import ContactData, FrictionParams

__all__ = [
    "Body",
    "World",
    "ContactKinematics",
    "StepProblem",
    "assemble_problem",
    "delassus_diagonal",
    "advance_state",
    "kinetic_energy",
]


@dataclass
class Body:
    """One rigid body; inertia is a scalar in 2D, scalar or 3x3 matrix in 3D."""

    name: str
    shape: Shape
    position: np.ndarray
    orientation: object = 0.0  # angle (2D) or quaternion wxyz (3D)
    velocity: Optional[np.ndarray] = None
    mass: float = 0.0
    inertia: object = 0.0
    motion: str = "free"  # "free" | "prescribed"
    # Spatial velocity of a prescribed body as a function of time, used for
    # contact bias terms (e.g. a conveyor surface).  Shape (3,) in 2D worlds,
    # (6,) in 3D worlds.
    prescribed_velocity: Optional[Callable[[float], np.ndarray]] = None

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=float)
        dim = self.position.size
        if self.velocity is None:
            self.velocity = np.zeros(3 if dim == 2 else 6)
        self.velocity = np.asarray(self.velocity, dtype=float)
        if self.motion not in ("free", "prescribed"):
            raise ValueError(f"motion must be 'free' or 'prescribed', got {self.motion}")
        if self.motion == "free" and not self.mass > 0.0:
            raise ValueError(f"free body {self.name!r} must have positive mass")
        if dim == 3 and self.motion == "free":
            self.orientation = np.asarray(self.orientation, dtype=float)


@dataclass
class World:
    """Bodies plus the shared contact material and detection margin."""

    dim: int
    bodies: list
    gravity: np.ndarray = None
    stiffness: float = 1e7
    dissipation: float = 0.0
    friction: FrictionParams = field(default_factory=lambda: FrictionParams(mu=0.5))
    margin: float = 1e-3
    time: float = 0.0

    def __post_init__(self):
        if self.dim not in (2, 3):
            raise ValueError(f"dim must be 2 or 3, got {self.dim}")
        if self.gravity is None:
            g = np.zeros(self.dim)
            g[-1] = -9.81
            self.gravity = g
        self.gravity = np.asarray(self.gravity, dtype=float)

    @property
    def free_bodies(self) -> list[int]:
        return [i for i, b in enumerate(self.bodies) if b.motion == "free"]

    @property
    def nv_per_body(self) -> int:
        return 3 if self.dim == 2 else 6


@dataclass
class ContactKinematics:
    """Frame, Jacobian blocks and bias for one contact."""

    body_a: int
    body_b: int
    frame: np.ndarray  # rows: tangent(s), then normal
    point: np.ndarray
    x0: float
    feature: int
    blocks: list  # (dof offset, dim x nv_body Jacobian block)
    bias: np.ndarray
    key: tuple

    def velocity(self, v: np.ndarray) -> np.ndarray:
        v_c = self.bias.copy()
        for off, jac in self.blocks:
            v_c += jac @ v[off:off + jac.shape[1]]
        return v_c


@dataclass
class StepProblem:
    """Frozen convex step problem: 0.5*|v - v*|_A^2 + sum of contact costs."""

    dim: int
    dt: float
    model: str
    n_v: int
    a_blocks: list  # (offset, mass matrix block) per free body
    v0: np.ndarray
    v_star: np.ndarray
    contacts: list  # (ContactKinematics, ContactData)

    @property
    def A(self) -> np.ndarray:
        a = np.zeros((self.n_v, self.n_v))
        for off, blk in self.a_blocks:
            a[off:off + blk.shape[0], off:off + blk.shape[1]] = blk
        return a

    def apply_A(self, v: np.ndarray) -> np.ndarray:
        out = np.zeros_like(v)
        for off, blk in self.a_blocks:
            n = blk.shape[0]
            out[off:off + n] = blk @ v[off:off + n]
        return out


def _skew(r):
    return np.array([[0.0, -r[2], r[1]], [r[2], 0.0, -r[0]], [-r[1], r[0], 0.0]])


def _tangent_frame(normal: np.ndarray) -> np.ndarray:
    """Orthonormal contact frame, tangent rows first, normal last."""
    n = np.asarray(normal, dtype=float)
    if n.size == 2:
        return np.array([[-n[1], n[0]], n])
    ref = np.zeros(3)
    ref[int(np.argmin(np.abs(n)))] = 1.0
    t1 = np.cross(n, ref)
    t1 /= np.linalg.norm(t1)
    t2 = np.cross(n, t1)
    return np.array([t1, t2, n])


def _point_jacobian(dim: int, r: np.ndarray) -> np.ndarray:
    """Maps a body's generalized velocity to the velocity of a point at offset r."""
    if dim == 2:
        return np.array([[1.0, 0.0, -r[1]], [0.0, 1.0, r[0]]])
    return np.hstack([np.eye(3), -_skew(r)])


def _point_velocity(dim: int, spatial: np.ndarray, r: np.ndarray) -> np.ndarray:
    if dim == 2:
        vx, vy, w = spatial
        return np.array([vx - w * r[1], vy + w * r[0]])
    return spatial[:3] + np.cross(spatial[3:], r)


def mass_matrix(body: Body, dim: int) -> np.ndarray:
    if dim == 2:
        return np.diag([body.mass, body.mass, float(body.inertia)])
    rot = quaternion_matrix(body.orientation)
    inertia = body.inertia
    i_body = float(inertia) * np.eye(3) if np.isscalar(inertia) else np.asarray(inertia, dtype=float)
    m = np.zeros((6, 6))
    m[:3, :3] = body.mass * np.eye(3)
    m[3:, 3:] = rot @ i_body @ rot.T
    return m


def assemble_problem(world: World, dt: float, model: str,
                     prev_impulses: Optional[dict] = None,
                     external: Optional[dict] = None) -> StepProblem:
    """Collision pass plus momentum/contact assembly for one implicit step.

    prev_impulses maps contact keys to the previous-step normal impulse;
    external maps body index to an extra generalized force.  Prescribed
    surface velocities are sampled at the step midpoint (the mean surface
    velocity over the step): one-sided sampling would add a tracking error
    during stiction that dominates every model's convergence constant.
    """
    if not dt > 0.0:
        raise ValueError(f"dt must be positive, got {dt}")
    prev_impulses = prev_impulses or {}
    nvb = world.nv_per_body
    offsets = {}
    a_blocks = []
    for idx in world.free_bodies:
        offsets[idx] = len(offsets) * nvb
    n_v = nvb * len(offsets)

    v0 = np.zeros(n_v)
    v_star = np.zeros(n_v)
    for idx, off in offsets.items():
        body = world.bodies[idx]
        m = mass_matrix(body, world.dim)
        if not np.isfinite(m).all() or np.linalg.eigvalsh(m).min() <= 0.0:
            raise ValueError(f"mass matrix of body {body.name!r} is not SPD")
        a_blocks.append((off, m))
        force = np.zeros(nvb)
        force[:world.dim] = body.mass * world.gravity
        if external and idx in external:
            force = force + np.asarray(external[idx], dtype=float)
        v0[off:off + nvb] = body.velocity
        v_star[off:off + nvb] = body.velocity + dt * np.linalg.solve(m, force)

    kins = []
    for c in detect_contacts(world.bodies, world.margin):
        frame = _tangent_frame(c.normal)
        blocks = []
        bias = np.zeros(world.dim)
        for idx, sign in ((c.body_a, 1.0), (c.body_b, -1.0)):
            body = world.bodies[idx]
            r = c.point - body.position
            if body.motion == "free":
                blocks.append((offsets[idx], sign * frame @ _point_jacobian(world.dim, r)))
            elif body.prescribed_velocity is not None:
                spatial = np.asarray(body.prescribed_velocity(world.time + 0.5 * dt), dtype=float)
                bias += sign * frame @ _point_velocity(world.dim, spatial, r)
        kins.append(ContactKinematics(
            body_a=c.body_a, body_b=c.body_b, frame=frame, point=c.point,
            x0=c.x0, feature=c.feature, blocks=blocks, bias=bias, key=c.key,
        ))

    law = HuntCrossley(world.stiffness, world.dissipation)
    friction = world.friction
    if model == "lagged_regularized" and not friction.regularize_impacts:
        from dataclasses import replace
        friction = replace(friction, regularize_impacts=True)

    contacts = []
    for kin, w in zip(kins, _delassus_from(kins, a_blocks, world.dim)):
        data = ContactData(
            normal=DiscreteNormal.from_penetration(law, kin.x0, dt),
            friction=friction,
            gamma_n0=prev_impulses.get(kin.key, 0.0),
            delassus_w=w,
            dim=world.dim,
        )
        contacts.append((kin, data))

    return StepProblem(dim=world.dim, dt=dt, model=model, n_v=n_v,
                       a_blocks=a_blocks, v0=v0, v_star=v_star, contacts=contacts)


def _delassus_from(kins, a_blocks, dim) -> np.ndarray:
    inv = {off: np.linalg.inv(blk) for off, blk in a_blocks}
    out = np.zeros(len(kins))
    for i, kin in enumerate(kins):
        w = np.zeros((dim, dim))
        for off, jac in kin.blocks:
            w += jac @ inv[off] @ jac.T
        out[i] = np.trace(w) / dim
        if not out[i] > 0.0:
            raise ValueError("contact with no effective mass; check free-body pairing")
    return out


def delassus_diagonal(problem: StepProblem) -> np.ndarray:
    """Per-contact scalar w_i = trace(J_i A^-1 J_i^T) / dim."""
    return _delassus_from([kin for kin, _ in problem.contacts], problem.a_blocks, problem.dim)


def _quat_mul(p, q):
    pw, px, py, pz = p
    qw, qx, qy, qz = q
    return np.array([
        pw * qw - px * qx - py * qy - pz * qz,
        pw * qx + px * qw + py * qz - pz * qy,
        pw * qy - px * qz + py * qw + pz * qx,
        pw * qz + px * qy - py * qx + pz * qw,
    ])


def advance_state(body: Body, v_next: np.ndarray, dt: float) -> Body:
    """First-order state advance: explicit position update from the new velocity."""
    if body.motion != "free":
        return body
    v_next = np.asarray(v_next, dtype=float)
    dim = body.position.size
    body.velocity = v_next.copy()
    body.position = body.position + dt * v_next[:dim]
    if dim == 2:
        body.orientation = float(body.orientation) + dt * v_next[2]
    else:
        omega = np.append(0.0, v_next[3:])
        q = body.orientation + dt * 0.5 * _quat_mul(omega, body.orientation)
        body.orientation = q / np.linalg.norm(q)
    return body


def kinetic_energy(world: World) -> float:
    total = 0.0
    for idx in world.free_bodies:
        body = world.bodies[idx]
        v = body.velocity
        if world.dim == 2:
            total += 0.5 * body.mass * float(v[:2] @ v[:2]) + 0.5 * float(body.inertia) * v[2] ** 2
        else:
            m = mass_matrix(body, 3)
            total += 0.5 * float(v @ m @ v)
    return total
