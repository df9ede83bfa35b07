"""Benchmark scenarios with paper-grade default parameters.

Four parameterized setups:

belt
    A 1 kg, 5 cm box resting on a conveyor surface oscillating along x at
    1 Hz with 0.2 m amplitude (peak surface speed ~1.26 m/s), mu = 0.7.
    The belt is a prescribed half-space; its surface velocity enters the
    contact bias only.  The box contacts through its two lower corners.

falling_sphere
    A 0.5 kg disk, 5 cm diameter, released with its center 5 cm above the
    ground and horizontal speed 2 m/s, mu = 0.5.  It impacts, slides, and
    rolls once friction has spun it up.  Disk inertia m r^2 / 2.

sliding_rod
    A slender rod (0.5 m, 0.3 kg, inertia m L^2 / 12) starts at 30 degrees
    with its lower tip on the ground, sliding at 10 m/s with mu = 2.3
    (above the 4/3 threshold): friction drives the tip into the ground,
    the normal force blows up, the rod jams and then jumps.

clutter
    Spheres (10 cm diameter, 0.524 kg) dropped in columns into an
    80x80x80 cm box of half-space walls; 3D, seeded layout jitter.

All scenarios default to k = 1e7 N/m, v_s = 1e-4 m/s, sigma = 1e-3.
Detection margins are sized per scenario so that the coupled models'
action-at-distance contacts stay in the active set at the largest study
time steps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .collision import Box, HalfSpace, Rod, Sphere
from .dynamics import Body, World, advance_state, assemble_problem
from .potentials import (
    MODEL_IDS,
    FrictionParams,
    effective_stiction_tolerance,
    sap_stiction_tolerance,
)
from .solver import SolveOptions, solve_step

__all__ = [
    "SCENARIO_IDS",
    "ScenarioSpec",
    "Trajectory",
    "ScenarioError",
    "Simulation",
    "run_scenario",
]

SCENARIO_IDS = ("belt", "falling_sphere", "sliding_rod", "clutter")

# scenario -> (dt, duration, dissipation d, tau_d, mu, margin)
_DEFAULTS = {
    "belt": (1e-2, 3.0, 500.0, 1e-3, 0.7, 0.045),
    "falling_sphere": (2e-3, 0.45, 500.0, 1e-3, 0.5, 0.03),
    "sliding_rod": (1e-5, 0.15, 0.2, 4e-6, 2.3, 0.02),
    "clutter": (2e-3, 3.0, 10.0, 1e-4, 1.0, 0.05),
}


class ScenarioError(RuntimeError):
    """A scenario step failed to converge; carries the step index."""


@dataclass(frozen=True)
class ScenarioSpec:
    """Scenario id, model id, step size and physical parameter overrides.

    Fields left at None resolve to the scenario defaults above.
    """

    scenario: str
    model: str = "lagged"
    dt: Optional[float] = None
    duration: Optional[float] = None
    stiffness: float = 1e7
    dissipation: Optional[float] = None
    tau_d: Optional[float] = None
    mu: Optional[float] = None
    v_s: float = 1e-4
    sigma: float = 1e-3
    seed: int = 0
    n_bodies: int = 12
    margin: Optional[float] = None

    def __post_init__(self):
        if self.scenario not in SCENARIO_IDS:
            raise ValueError(f"unknown scenario {self.scenario!r}; expected one of {SCENARIO_IDS}")
        if self.model not in MODEL_IDS:
            raise ValueError(f"unknown model {self.model!r}; expected one of {MODEL_IDS}")

    def resolve(self) -> "ScenarioSpec":
        dt, duration, d, tau_d, mu, margin = _DEFAULTS[self.scenario]
        return replace(
            self,
            dt=self.dt if self.dt is not None else dt,
            duration=self.duration if self.duration is not None else duration,
            dissipation=self.dissipation if self.dissipation is not None else d,
            tau_d=self.tau_d if self.tau_d is not None else tau_d,
            mu=self.mu if self.mu is not None else mu,
            margin=self.margin if self.margin is not None else margin,
        )

    def key(self) -> tuple:
        s = self.resolve()
        return (s.scenario, s.model, s.dt, s.duration, s.stiffness, s.dissipation,
                s.tau_d, s.mu, s.v_s, s.sigma, s.seed, s.n_bodies, s.margin)

    def physics_key(self) -> tuple:
        """Everything that defines the physical setup, ignoring model and dt."""
        s = self.resolve()
        return (s.scenario, s.duration, s.stiffness, s.dissipation, s.tau_d, s.mu,
                s.v_s, s.sigma, s.seed, s.n_bodies)

    def as_dict(self) -> dict:
        s = self.resolve()
        return {k: getattr(s, k) for k in (
            "scenario", "model", "dt", "duration", "stiffness", "dissipation",
            "tau_d", "mu", "v_s", "sigma", "seed", "n_bodies", "margin")}


def _friction(spec: ScenarioSpec) -> FrictionParams:
    return FrictionParams(
        mu=spec.mu, v_s=spec.v_s, sigma=spec.sigma, tau_d=spec.tau_d,
        regularize_impacts=(spec.model == "lagged_regularized"),
    )


def build_world(spec: ScenarioSpec) -> World:
    spec = spec.resolve()
    if spec.scenario == "belt":
        return _build_belt(spec)
    if spec.scenario == "falling_sphere":
        return _build_falling_sphere(spec)
    if spec.scenario == "sliding_rod":
        return _build_sliding_rod(spec)
    return _build_clutter(spec)


def _build_belt(spec: ScenarioSpec) -> World:
    freq, amplitude = 1.0, 0.2
    peak = 2.0 * math.pi * freq * amplitude

    # Belt position A*sin(w t): the surface starts at full speed, so the
    # run opens with an energetic slip episode that exercises the models'
    # sliding artifacts before settling into the stick-slip cycle.
    def surface_velocity(t, _peak=peak, _w=2.0 * math.pi * freq):
        return np.array([_peak * math.cos(_w * t), 0.0, 0.0])

    belt = Body("belt", HalfSpace((0.0, 1.0), 0.0), np.zeros(2),
                motion="prescribed", prescribed_velocity=surface_velocity)
    side = 0.05
    mass = 1.0
    inertia = mass * (side ** 2 + side ** 2) / 12.0
    # The box starts on the model's own sliding-equilibrium branch for the
    # initial surface speed: the coupled models support a sliding contact at
    # a slip-dependent height, and dropping them at the resting penetration
    # would fire a large vertical transient at t = 0.
    half = side / 2.0
    w = (2.0 / mass + half ** 2 / inertia + 1.0 / mass) / 2.0
    x0 = _sliding_equilibrium_penetration(spec, load=0.5 * mass * 9.81,
                                          slip=peak, w=w)
    box = Body("box", Box((half, half)), np.array([0.0, half - x0]), 0.0,
               mass=mass, inertia=inertia)
    return World(dim=2, bodies=[belt, box], stiffness=spec.stiffness,
                 dissipation=spec.dissipation, friction=_friction(spec),
                 margin=spec.margin)


def _build_falling_sphere(spec: ScenarioSpec) -> World:
    ground = Body("ground", HalfSpace((0.0, 1.0), 0.0), np.zeros(2), motion="prescribed")
    radius, mass = 0.025, 0.5
    disk = Body("disk", Sphere(radius), np.array([0.0, 0.05]), 0.0,
                velocity=np.array([2.0, 0.0, 0.0]),
                mass=mass, inertia=0.5 * mass * radius ** 2)
    return World(dim=2, bodies=[ground, disk], stiffness=spec.stiffness,
                 dissipation=spec.dissipation, friction=_friction(spec),
                 margin=spec.margin)


def _sliding_equilibrium_penetration(spec: ScenarioSpec, load: float,
                                     slip: float, w: float) -> float:
    """Penetration at which the model's impulse carries `load` under steady slide.

    The strongly coupled models support a sliding contact at a finite
    negative penetration (the gliding artifact), so starting a fast-sliding
    body at zero gap would put it far off its own equilibrium branch and
    fire it ballistic.  Solved by bisection on the monotone impulse.
    """
    from .normal_laws import DiscreteNormal, HuntCrossley
    from .potentials import ContactData, evaluate

    law = HuntCrossley(spec.stiffness, spec.dissipation)
    v_c = np.array([-slip, 0.0])
    target = spec.dt * load

    def impulse(x0):
        data = ContactData(normal=DiscreteNormal.from_penetration(law, x0, spec.dt),
                           friction=_friction(spec), gamma_n0=target,
                           delassus_w=w, dim=2)
        return evaluate(spec.model, data, v_c).gamma[-1] - target

    lo, hi = -0.5, 0.02
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if impulse(mid) < 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _build_sliding_rod(spec: ScenarioSpec) -> World:
    ground = Body("ground", HalfSpace((0.0, 1.0), 0.0), np.zeros(2), motion="prescribed")
    length, mass = 0.5, 0.3
    inertia = mass * length ** 2 / 12.0
    phi0 = math.radians(30.0)
    speed = 10.0
    # Axis points down-forward: the leading (+x) tip touches the ground and
    # the center of mass trails above and behind it.  Friction then torques
    # the tip into the ground (the jam regime needs mu > 4/3).
    r_x = 0.5 * length * math.cos(phi0)
    r_y = -0.5 * length * math.sin(phi0)
    # Quasi-static tip load during steady slide (tip acceleration zero).
    load = 9.81 / (1.0 / mass + r_x * (r_x + spec.mu * r_y) / inertia)
    w = (2.0 / mass + (r_x ** 2 + r_y ** 2) / inertia) / 2.0
    x0 = _sliding_equilibrium_penetration(spec, load, speed, w)
    rod = Body("rod", Rod(length),
               np.array([0.0, 0.5 * length * math.sin(phi0) - x0]), -phi0,
               velocity=np.array([speed, 0.0, 0.0]),
               mass=mass, inertia=inertia)
    return World(dim=2, bodies=[ground, rod], stiffness=spec.stiffness,
                 dissipation=spec.dissipation, friction=_friction(spec),
                 margin=spec.margin)


# Near-touching triangular cluster first (drops into a wedged pile that
# actually settles), outer ring for larger counts.
_COLUMN_XY = [(0.0, 0.0), (0.105, 0.0), (0.0525, 0.0909), (-0.105, 0.0),
              (-0.0525, 0.0909), (0.0, -0.105), (0.21, 0.0), (-0.21, 0.0),
              (0.105, -0.105), (0.0, 0.21)]


def _build_clutter(spec: ScenarioSpec) -> World:
    if not 1 <= spec.n_bodies <= 40:
        raise ValueError("clutter supports 1..40 spheres")
    half = 0.4
    walls = [
        Body("floor", HalfSpace((0.0, 0.0, 1.0), 0.0), np.zeros(3), motion="prescribed"),
        Body("wall-x", HalfSpace((1.0, 0.0, 0.0), -half), np.zeros(3), motion="prescribed"),
        Body("wall+x", HalfSpace((-1.0, 0.0, 0.0), -half), np.zeros(3), motion="prescribed"),
        Body("wall-y", HalfSpace((0.0, 1.0, 0.0), -half), np.zeros(3), motion="prescribed"),
        Body("wall+y", HalfSpace((0.0, -1.0, 0.0), -half), np.zeros(3), motion="prescribed"),
    ]
    rng = np.random.default_rng(spec.seed)
    radius, mass = 0.05, 0.524
    spheres = []
    for i in range(spec.n_bodies):
        cx, cy = _COLUMN_XY[(i // 4) % len(_COLUMN_XY)]
        level = i % 4
        jitter = rng.uniform(-2e-3, 2e-3, size=2)
        center = np.array([cx + jitter[0], cy + jitter[1], 0.055 + 0.105 * level])
        spheres.append(Body(f"sphere{i}", Sphere(radius), center,
                            np.array([1.0, 0.0, 0.0, 0.0]),
                            mass=mass, inertia=0.4 * mass * radius ** 2))
    return World(dim=3, bodies=walls + spheres, stiffness=spec.stiffness,
                 dissipation=spec.dissipation, friction=_friction(spec),
                 margin=spec.margin)


@dataclass
class Trajectory:
    """Uniformly sampled run: states at step boundaries, contact channels per step.

    Contact channels are (n_steps, n_keys) arrays aligned with `keys`, NaN
    where a contact is absent.  Forces are reported as impulse / dt.
    """

    spec: ScenarioSpec
    times: np.ndarray
    q: np.ndarray
    v: np.ndarray
    q_layout: list  # (body name, kind "2d"|"3d", column offset)
    masses: list
    inertias: list
    keys: list
    v_n: np.ndarray
    v_t: np.ndarray
    f_n: np.ndarray
    f_t: np.ndarray
    x0: np.ndarray
    eps_s: np.ndarray
    iterations: np.ndarray
    condition_number: np.ndarray
    cost: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def dt(self) -> float:
        return self.spec.dt

    @property
    def step_times(self) -> np.ndarray:
        """End-of-step times aligned with the contact channel arrays."""
        return self.times[1:]

    def active(self) -> np.ndarray:
        """(n_steps, n_keys) mask of contacts carrying a positive impulse."""
        return np.nan_to_num(self.f_n, nan=0.0) > 0.0

    def kinetic_energy(self) -> np.ndarray:
        ke = np.zeros(self.v.shape[0])
        col = 0
        for (name, kind, _), mass, inertia in zip(self.q_layout, self.masses, self.inertias):
            if kind == "2d":
                vel = self.v[:, col:col + 3]
                ke += 0.5 * mass * (vel[:, 0] ** 2 + vel[:, 1] ** 2)
                ke += 0.5 * float(inertia) * vel[:, 2] ** 2
                col += 3
            else:
                vel = self.v[:, col:col + 6]
                ke += 0.5 * mass * np.einsum("ij,ij->i", vel[:, :3], vel[:, :3])
                ine = float(inertia) if np.isscalar(inertia) else None
                if ine is not None:
                    ke += 0.5 * ine * np.einsum("ij,ij->i", vel[:, 3:], vel[:, 3:])
                else:
                    raise NotImplementedError("KE with full inertia tensors is not needed here")
                col += 6
        return ke


class Simulation:
    """Owns the world, the contact-impulse memory and the recorders."""

    def __init__(self, spec: ScenarioSpec, options: Optional[SolveOptions] = None):
        self.spec = spec.resolve()
        self.world = build_world(self.spec)
        self.options = options or SolveOptions(compute_condition_number=True)
        self.memory = self._seed_memory()
        self.step_index = 0
        self._free = [self.world.bodies[i] for i in self.world.free_bodies]
        self._records: list = []
        self._states = [self._state_row()]

    def _seed_memory(self) -> dict:
        """Previous-step impulses for contacts already present at t = 0.

        A body initialized resting or sliding has been in contact before the
        run started, so the lag seeds from the state-based impulse
        dt * f_n(x0, xdot0) instead of zero (zero would give the lagged
        model one friction-free step at t = 0, a large transient when the
        run starts mid-slip).
        """
        from .normal_laws import discrete_impulse

        problem = assemble_problem(self.world, self.spec.dt, self.spec.model)
        return {kin.key: discrete_impulse(data.normal, kin.velocity(problem.v0)[-1])
                for kin, data in problem.contacts}

    def _state_row(self):
        qs, vs = [], []
        for body in self._free:
            qs.extend(np.atleast_1d(body.position))
            qs.extend(np.atleast_1d(body.orientation))
            vs.extend(body.velocity)
        return np.array(qs), np.array(vs)

    def assemble(self):
        return assemble_problem(self.world, self.spec.dt, self.spec.model,
                                prev_impulses=self.memory)

    def step(self):
        problem = self.assemble()
        sol = solve_step(problem, opts=self.options)
        if not sol.converged:
            raise ScenarioError(
                f"step {self.step_index} (t = {self.world.time:.6g}) did not converge: "
                f"{sol.diagnostic}; config {self.spec.as_dict()}")

        record = {}
        memory = {}
        for (kin, data), gamma in zip(problem.contacts, sol.impulses):
            v_c = kin.velocity(sol.v)
            gamma_n = float(gamma[-1])
            memory[kin.key] = gamma_n
            if self.spec.model == "sap":
                eps = sap_stiction_tolerance(data, gamma_n)
            else:
                eps = effective_stiction_tolerance(data)
            record[kin.key] = (
                float(v_c[-1]),
                float(np.linalg.norm(v_c[:-1])),
                gamma_n / self.spec.dt,
                float(np.linalg.norm(gamma[:-1])) / self.spec.dt,
                kin.x0,
                eps,
            )
        self.memory = memory
        nvb = self.world.nv_per_body
        for slot, idx in enumerate(self.world.free_bodies):
            advance_state(self.world.bodies[idx], sol.v[slot * nvb:(slot + 1) * nvb],
                          self.spec.dt)
        self.world.time += self.spec.dt
        self.step_index += 1
        self._records.append((record, sol.iterations, sol.condition_number, sol.cost))
        self._states.append(self._state_row())
        return sol

    def run(self) -> "Trajectory":
        n_steps = int(round(self.spec.duration / self.spec.dt))
        while self.step_index < n_steps:
            self.step()
        return self.trajectory()

    def trajectory(self) -> "Trajectory":
        spec = self.spec
        n = len(self._records)
        times = spec.dt * np.arange(n + 1)
        q = np.array([row[0] for row in self._states])
        v = np.array([row[1] for row in self._states])

        layout, col = [], 0
        masses, inertias = [], []
        for body in self._free:
            kind = "2d" if self.world.dim == 2 else "3d"
            layout.append((body.name, kind, col))
            col += 3 if kind == "2d" else 7
            masses.append(body.mass)
            inertias.append(body.inertia)

        keys = sorted({k for record, *_ in self._records for k in record})
        index = {k: i for i, k in enumerate(keys)}
        chan = {name: np.full((n, len(keys)), np.nan) for name in
                ("v_n", "v_t", "f_n", "f_t", "x0", "eps_s")}
        iters = np.zeros(n, dtype=int)
        cond = np.full(n, np.nan)
        cost = np.zeros(n)
        for i, (record, it, cn, c) in enumerate(self._records):
            iters[i] = it
            cond[i] = np.nan if cn is None else cn
            cost[i] = c
            for key, vals in record.items():
                j = index[key]
                for name, val in zip(("v_n", "v_t", "f_n", "f_t", "x0", "eps_s"), vals):
                    chan[name][i, j] = val

        return Trajectory(
            spec=spec, times=times, q=q, v=v, q_layout=layout,
            masses=masses, inertias=inertias, keys=keys,
            v_n=chan["v_n"], v_t=chan["v_t"], f_n=chan["f_n"], f_t=chan["f_t"],
            x0=chan["x0"], eps_s=chan["eps_s"],
            iterations=iters, condition_number=cond, cost=cost,
            meta={"stop_criterion": self.options.rel_tol,
                  "config": spec.as_dict(),
                  "belt_contact": "two lower corners" if spec.scenario == "belt" else None},
        )


def run_scenario(spec: ScenarioSpec, options: Optional[SolveOptions] = None) -> Trajectory:
    """Run a scenario to completion; raises ScenarioError on non-convergence."""
    return Simulation(spec, options).run()
