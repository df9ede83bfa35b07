"""Executable checks that the contact models really derive from potentials.

Three checks run over a deterministic cloud of randomized contact states:

* check_gradient -- the impulse equals minus the finite-difference gradient
  of the cost (a potential exists and the code implements its gradient).
* check_curl     -- the finite-difference velocity Jacobian of the impulse
  is symmetric (the field is irrotational).  The same pass also compares
  that Jacobian against minus the analytic Hessian.
* check_psd      -- the analytic Hessian is positive semi-definite (the
  potential is convex).

Finite differences use 4th-order central stencils: the friction models have
third derivatives of order 1/eps_s^2, and the tight stiction tolerances used
in practice (1e-4 m/s) would swamp a 2nd-order stencil's truncation error.
States within 10 * h of a regime boundary (impulse kinks, cone boundaries)
are excluded; one-sided derivatives are meaningless to compare there.

The deliberately non-integrable `naive` field is accepted by check_curl as a
negative control: on sliding states with dissipation it must FAIL symmetry.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
from scipy.integrate import quad

from .normal_laws import DiscreteNormal, HuntCrossley, discrete_impulse, transition_velocity
from .potentials import (
    MODEL_IDS,
    ContactData,
    FrictionParams,
    effective_stiction_tolerance,
    evaluate,
    naive_impulse,
)

__all__ = [
    "SamplingSpec",
    "ValidationReport",
    "FIELD_IDS",
    "check_gradient",
    "check_curl",
    "check_psd",
    "canonical_data",
    "barrier_antiderivative",
]

# Impulse fields accepted by check_curl; the potential-backed models plus the
# naive coupled field that serves as the negative control.
FIELD_IDS = MODEL_IDS + ("naive",)


@dataclass(frozen=True)
class SamplingSpec:
    """Deterministic random contact states.

    Speeds are log-uniform in [speed_low, speed_high]; the previous-step
    penetration is uniform in [x0_low, x0_high] and resampled per state.
    regime "mixed" covers stiction, sliding, approach and separation;
    "sliding" restricts to sliding states deep inside the active region,
    where the naive field's asymmetry shows.
    """

    samples: int = 10_000
    seed: int = 0
    speed_low: float = 1e-6
    speed_high: float = 10.0
    x0_low: float = 0.0
    x0_high: float = 1e-3
    regime: str = "mixed"

    def __post_init__(self):
        if self.samples <= 0:
            raise ValueError("samples must be positive")
        if self.regime not in ("mixed", "sliding"):
            raise ValueError(f"unknown regime {self.regime!r}")


@dataclass
class ValidationReport:
    """Worst-case errors over the sampled states."""

    max_gradient_error: float = 0.0
    max_hessian_error: float = 0.0
    max_curl_asymmetry: float = 0.0
    min_hessian_eigenvalue: float = np.inf
    min_scaled_eigenvalue: float = np.inf
    samples: int = 0
    skipped: int = 0
    seed: int = 0
    worst_case_state: Optional[dict] = field(default=None, repr=False)

    def as_dict(self) -> dict:
        out = {
            "max_gradient_error": self.max_gradient_error,
            "max_hessian_error": self.max_hessian_error,
            "max_curl_asymmetry": self.max_curl_asymmetry,
            "min_hessian_eigenvalue": self.min_hessian_eigenvalue,
            "min_scaled_eigenvalue": self.min_scaled_eigenvalue,
            "samples": self.samples,
            "skipped": self.skipped,
            "seed": self.seed,
        }
        if self.worst_case_state is not None:
            out["worst_v_c"] = np.array2string(self.worst_case_state["v_c"], precision=17)
            out["worst_x0"] = self.worst_case_state["x0"]
        return out


def canonical_data(dim: int = 3, dt: float = 0.01) -> ContactData:
    """Reference contact data for the released validation suite."""
    law = HuntCrossley(stiffness=1e7, dissipation=50.0)
    normal = DiscreteNormal.from_penetration(law, x0=5e-4, dt=dt)
    friction = FrictionParams(mu=0.5, v_s=1e-4, sigma=1e-3, tau_d=1e-3)
    # Previous normal impulse at the midpoint penetration scale.
    return ContactData(normal=normal, friction=friction,
                       gamma_n0=dt * law.stiffness * 5e-4, delassus_w=1.0, dim=dim)


def _unit_tangent(rng, tdim):
    if tdim == 1:
        return np.array([rng.choice([-1.0, 1.0])])
    v = rng.normal(size=tdim)
    return v / np.linalg.norm(v)


def _loguniform(rng, lo, hi):
    return float(np.exp(rng.uniform(np.log(lo), np.log(hi))))


def sample_states(data: ContactData, spec: SamplingSpec):
    """Yield (per-state ContactData, v_c) pairs, deterministic in the seed."""
    rng = np.random.default_rng(spec.seed)
    tdim = data.dim - 1
    eps = effective_stiction_tolerance(data)
    for _ in range(spec.samples):
        x0 = rng.uniform(spec.x0_low, spec.x0_high)
        normal = DiscreteNormal.from_penetration(data.normal.law, x0, data.normal.dt)
        state = replace(data, normal=normal)
        vhat = transition_velocity(normal)
        if spec.regime == "sliding":
            vt_mag = _loguniform(rng, max(100.0 * eps, 1e-3), spec.speed_high)
            v_n = vhat - _loguniform(rng, 1e-2, 1.0)
        else:
            if rng.uniform() < 0.25:
                vt_mag = rng.uniform(0.0, eps)
            else:
                vt_mag = _loguniform(rng, spec.speed_low, spec.speed_high)
            v_n = rng.choice([-1.0, 1.0]) * _loguniform(rng, spec.speed_low, spec.speed_high)
        v_c = np.append(vt_mag * _unit_tangent(rng, tdim), v_n)
        yield state, v_c


def _fd_step(v_c, feature_scale):
    # Base step 1e-6 * max(1, |v|), capped so the 5-point stencil stays well
    # inside the tangential feature (soft-norm curvature lives at scales
    # max(eps_s, |v_t|)); otherwise states with large |v_n| and near-stiction
    # slip see O(1e-5) steps against O(1e-4) features and truncation blows
    # past the targets.  The 0.005 factor keeps 4th-order truncation at
    # (h/feature)^4 ~ 1e-9 relative while roundoff stays orders below.
    v_t = np.asarray(v_c[:-1], dtype=float)
    cap = 0.005 * max(feature_scale, float(np.linalg.norm(v_t)))
    return min(1e-6 * max(1.0, float(np.linalg.norm(v_c))), max(cap, 1e-9))


def _fd_point(f, v_c, i, h):
    vals = []
    for k in (-2, -1, 1, 2):
        u = v_c.copy()
        u[i] += k * h
        vals.append(np.asarray(f(u), dtype=float))
    fm2, fm1, fp1, fp2 = vals
    return ((fm2 - fp2) + 8.0 * (fp1 - fm1)) / (12.0 * h)


def _fd_gradient(f, v_c, h):
    return np.array([_fd_point(f, v_c, i, h) for i in range(v_c.size)])


def _fd_jacobian(f, v_c, h):
    return np.stack([_fd_point(f, v_c, i, h) for i in range(v_c.size)], axis=-1)


def _hc_kinks(normal: DiscreteNormal):
    kinks = [normal.x0 / normal.dt]
    if isinstance(normal.law, HuntCrossley) and normal.law.dissipation > 0.0:
        kinks.append(1.0 / normal.law.dissipation)
    return kinks


def kink_distance(field_id: str, data: ContactData, v_c) -> float:
    """Velocity-space distance from v_c to the nearest Hessian discontinuity."""
    v_t, v_n = np.asarray(v_c[:-1]), float(v_c[-1])
    fp = data.friction
    if field_id in ("lagged", "lagged_regularized", "naive"):
        return min(abs(v_n - kink) for kink in _hc_kinks(data.normal))
    if field_id == "similar":
        eps = effective_stiction_tolerance(data)
        z = v_n - fp.mu * (np.sqrt(float(v_t @ v_t) + eps * eps) - eps)
        scale = np.sqrt(1.0 + fp.mu ** 2)
        return min(abs(z - kink) for kink in _hc_kinks(data.normal)) / scale
    if field_id == "sap":
        law = data.normal.law
        dt = data.normal.dt
        r_t = fp.sigma * data.delassus_w
        r_n = 1.0 / (dt * (dt + fp.tau_d) * law.stiffness)
        y_t = -v_t / r_t
        y_n = (data.normal.x0 / (dt + fp.tau_d) - v_n) / r_n
        ny_t = float(np.linalg.norm(y_t))
        mu_hat = fp.mu * r_t / r_n
        g_stick = ny_t - fp.mu * y_n
        g_sep = y_n + mu_hat * ny_t
        d_stick = abs(g_stick) / np.hypot(1.0 / r_t, fp.mu / r_n)
        d_sep = abs(g_sep) / np.hypot(mu_hat / r_t, 1.0 / r_n)
        return min(d_stick, d_sep)
    raise ValueError(f"unknown field id {field_id!r}")


def _impulse_fn(field_id: str, state: ContactData):
    if field_id == "naive":
        return lambda u: naive_impulse(state, u)
    return lambda u: evaluate(field_id, state, u).gamma


def check_gradient(model: str, data: ContactData, states: SamplingSpec) -> ValidationReport:
    """Worst relative mismatch between -FD(cost gradient) and the impulse."""
    if model not in MODEL_IDS:
        raise ValueError(f"unknown model id {model!r}")
    report = ValidationReport(seed=states.seed)
    floor = 1e-12
    for state, v_c in sample_states(data, states):
        h = _fd_step(v_c, effective_stiction_tolerance(state))
        if kink_distance(model, state, v_c) < 10.0 * h:
            report.skipped += 1
            continue
        out = evaluate(model, state, v_c)
        grad = _fd_gradient(lambda u: evaluate(model, state, u).cost, v_c, h)
        err = float(np.linalg.norm(grad + out.gamma)) / max(float(np.linalg.norm(out.gamma)), floor)
        report.samples += 1
        if err > report.max_gradient_error:
            report.max_gradient_error = err
            report.worst_case_state = {"v_c": v_c, "x0": state.normal.x0}
    return report


def check_curl(impulse_field: str, data: ContactData, states: SamplingSpec) -> ValidationReport:
    """Worst relative asymmetry of the FD velocity Jacobian of the impulse.

    Frobenius norms throughout.  For potential-backed fields the same pass
    also records the worst mismatch between the FD Jacobian and minus the
    analytic Hessian.
    """
    if impulse_field not in FIELD_IDS:
        raise ValueError(f"unknown impulse field {impulse_field!r}")
    has_hessian = impulse_field != "naive"
    report = ValidationReport(seed=states.seed)
    for state, v_c in sample_states(data, states):
        h = _fd_step(v_c, effective_stiction_tolerance(state))
        if kink_distance(impulse_field, state, v_c) < 10.0 * h:
            report.skipped += 1
            continue
        jac = _fd_jacobian(_impulse_fn(impulse_field, state), v_c, h)
        njac = float(np.linalg.norm(jac))
        report.samples += 1
        if njac > 0.0:
            asym = float(np.linalg.norm(jac - jac.T)) / njac
            if asym > report.max_curl_asymmetry:
                report.max_curl_asymmetry = asym
                report.worst_case_state = {"v_c": v_c, "x0": state.normal.x0}
        if has_hessian:
            hess = evaluate(impulse_field, state, v_c).hessian
            scale = max(float(np.linalg.norm(hess)), 1e-9)
            herr = float(np.linalg.norm(jac + hess)) / scale
            report.max_hessian_error = max(report.max_hessian_error, herr)
    return report


def check_psd(model: str, data: ContactData, states: SamplingSpec) -> ValidationReport:
    """Minimum Hessian eigenvalue over the sampled states.

    Pass criterion: min eigenvalue >= -1e-10 * |H| per state, tracked by
    min_scaled_eigenvalue >= -1e-10.
    """
    if model not in MODEL_IDS:
        raise ValueError(f"unknown model id {model!r}")
    report = ValidationReport(seed=states.seed)
    for state, v_c in sample_states(data, states):
        hess = evaluate(model, state, v_c).hessian
        eigs = np.linalg.eigvalsh(hess)
        scaled = eigs[0] / max(float(np.linalg.norm(hess)), 1e-30)
        report.samples += 1
        if eigs[0] < report.min_hessian_eigenvalue:
            report.min_hessian_eigenvalue = float(eigs[0])
        if scaled < report.min_scaled_eigenvalue:
            report.min_scaled_eigenvalue = float(scaled)
            report.worst_case_state = {"v_c": v_c, "x0": state.normal.x0}
    return report


def barrier_antiderivative(dn: DiscreteNormal, v_n: float, v_ref: float) -> float:
    """N(v_n) - N(v_ref) for barrier laws, by numeric quadrature of n.

    The barrier laws have no closed-form antiderivative under the implicit
    penetration substitution; this quadrature form is for validation only.
    """
    val, _ = quad(lambda u: discrete_impulse(dn, u), v_ref, v_n,
                  limit=500, epsabs=1e-15, epsrel=1e-12)
    return val
