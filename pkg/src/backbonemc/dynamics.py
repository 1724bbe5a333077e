"""Nonlinear single-degree-of-freedom oscillator models and free-decay integration.

Six model variants are supported, all of the form ``m*xdd + F(x, xd[, z]) = 0``
with zero external forcing:

- cubic stiffness:            F = c1*v + k1*x + k2*x^3
- dry friction:               F = c1*v + k1*x + c2*sign(v)
- quadratic damping + cubic:  F = c1*v + k1*x + c2*v*|v| + k2*x^3
- hysteretic (Bouc-Wen):      F = c1*v + k1*x + (1-alpha)*k1*z,
                              zd = A*v - beta*|v|*|z|^(n-1)*z - gamma*v*|z|^n
- empirical polynomial:       F = c1*v + k1*x + k2*x^2 + c2*|v|*v + k3*x^3 + c3*v^3
- cantilever with magnets:    F = c*v + KL*x - kn*x^3   (softening)

Integration is fixed-step classic Runge-Kutta (4th order), compiled with numba:
a posterior evaluation needs one full decay simulation, so the inner loop is the
hot path of the whole pipeline.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import ConfigError, DivergenceError

__all__ = [
    "ModelKind",
    "Param",
    "ParameterVector",
    "State",
    "ModelSpec",
    "TimeSeries",
    "BeamProperties",
    "restoring_force",
    "boucwen_zdot",
    "integrate_free_decay",
    "galerkin_constants",
    "stiffness_from_frequency",
]


class ModelKind(str, enum.Enum):
    CUBIC_STIFFNESS = "cubic_stiffness"
    DRY_FRICTION = "dry_friction"
    QUAD_DAMP_CUBIC = "quad_damp_cubic"
    BOUC_WEN = "bouc_wen"
    EMPIRICAL = "empirical"
    CANTILEVER_MAGNET = "cantilever_magnet"


# Canonical parameter order per kind; this is also the packing order for the
# integration kernel, so do not reorder.
REQUIRED_PARAMS: dict[ModelKind, tuple[str, ...]] = {
    ModelKind.CUBIC_STIFFNESS: ("m", "k1", "k2", "c1"),
    ModelKind.DRY_FRICTION: ("m", "k1", "c1", "c2"),
    ModelKind.QUAD_DAMP_CUBIC: ("m", "k1", "k2", "c1", "c2"),
    ModelKind.BOUC_WEN: ("m", "k1", "c1", "A", "alpha", "beta", "gamma", "n"),
    ModelKind.EMPIRICAL: ("m", "k1", "k2", "k3", "c1", "c2", "c3"),
    ModelKind.CANTILEVER_MAGNET: ("m", "c", "KL", "kn"),
}

PARAM_UNITS: dict[ModelKind, dict[str, str]] = {
    ModelKind.CUBIC_STIFFNESS: {"m": "kg", "k1": "N/m", "k2": "N/m^3", "c1": "Ns/m"},
    ModelKind.DRY_FRICTION: {"m": "kg", "k1": "N/m", "c1": "Ns/m", "c2": "N"},
    ModelKind.QUAD_DAMP_CUBIC: {
        "m": "kg", "k1": "N/m", "k2": "N/m^3", "c1": "Ns/m", "c2": "Ns^2/m^2",
    },
    ModelKind.BOUC_WEN: {
        "m": "kg", "k1": "N/m", "c1": "Ns/m",
        "A": "-", "alpha": "-", "beta": "1/m", "gamma": "1/m", "n": "-",
    },
    ModelKind.EMPIRICAL: {
        "m": "kg", "k1": "N/m", "k2": "N/m^2", "k3": "N/m^3",
        "c1": "Ns/m", "c2": "Ns^2/m^2", "c3": "Ns^3/m^3",
    },
    ModelKind.CANTILEVER_MAGNET: {"m": "kg", "c": "Ns/m", "KL": "N/m", "kn": "N/m^3"},
}

_KIND_CODES: dict[ModelKind, int] = {kind: i for i, kind in enumerate(ModelKind)}

# Name of the stiffness that sets the small-amplitude frequency, per kind.
_LINEAR_STIFFNESS: dict[ModelKind, str] = {
    kind: ("KL" if kind is ModelKind.CANTILEVER_MAGNET else "k1") for kind in ModelKind
}


@dataclass(frozen=True)
class Param:
    """One named model parameter with its unit label (labels are not converted)."""

    name: str
    value: float
    unit: str = ""


@dataclass(frozen=True)
class ParameterVector:
    """Ordered collection of named parameters with unique names."""

    entries: tuple[Param, ...]

    def __post_init__(self):
        names = [p.name for p in self.entries]
        if len(set(names)) != len(names):
            raise ConfigError(f"duplicate parameter names: {sorted(names)}")
        for p in self.entries:
            if not math.isfinite(p.value):
                raise ConfigError(f"parameter {p.name!r} is not finite: {p.value!r}")

    @classmethod
    def from_dict(cls, values: dict[str, float], units: dict[str, str] | None = None):
        units = units or {}
        return cls(tuple(Param(n, float(v), units.get(n, "")) for n, v in values.items()))

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(p.name for p in self.entries)

    def value(self, name: str) -> float:
        for p in self.entries:
            if p.name == name:
                return p.value
        raise ConfigError(f"unknown parameter name: {name!r}")

    def as_dict(self) -> dict[str, float]:
        return {p.name: p.value for p in self.entries}

    def with_updates(self, updates: dict[str, float]) -> "ParameterVector":
        known = set(self.names)
        unknown = set(updates) - known
        if unknown:
            raise ConfigError(f"unknown parameter name(s): {sorted(unknown)}")
        return ParameterVector(
            tuple(
                Param(p.name, float(updates.get(p.name, p.value)), p.unit)
                for p in self.entries
            )
        )


@dataclass(frozen=True)
class State:
    """Instantaneous oscillator state; z is the hysteretic internal variable."""

    x: float
    v: float
    z: float = 0.0

    def __post_init__(self):
        if not all(math.isfinite(c) for c in (self.x, self.v, self.z)):
            raise ConfigError(f"non-finite initial state: {self!r}")


@dataclass(frozen=True)
class ModelSpec:
    """A model kind plus a complete parameter vector for it.

    ``friction_smoothing_eps`` > 0 replaces sign(v) in the dry-friction model by
    tanh(v/eps); the default 0 keeps the exact discontinuity with sign(0) = 0.
    """

    kind: ModelKind
    params: ParameterVector
    friction_smoothing_eps: float = 0.0

    def __post_init__(self):
        required = REQUIRED_PARAMS[self.kind]
        have = set(self.params.names)
        missing = set(required) - have
        extra = have - set(required)
        if missing or extra:
            raise ConfigError(
                f"{self.kind.value} requires parameters {list(required)}; "
                f"missing {sorted(missing)}, unexpected {sorted(extra)}"
            )
        if self.params.value("m") <= 0:
            raise ConfigError("mass m must be positive")
        if self.kind is ModelKind.BOUC_WEN and self.params.value("n") < 1:
            raise ConfigError("Bouc-Wen exponent n must be >= 1")

    # -- convenience constructors (default m = 1 kg for the numerical cases) --

    @classmethod
    def cubic_stiffness(cls, k1: float, k2: float, c1: float, m: float = 1.0):
        return cls._build(ModelKind.CUBIC_STIFFNESS, m=m, k1=k1, k2=k2, c1=c1)

    @classmethod
    def dry_friction(cls, k1: float, c1: float, c2: float, m: float = 1.0,
                     smoothing_eps: float = 0.0):
        spec = cls._build(ModelKind.DRY_FRICTION, m=m, k1=k1, c1=c1, c2=c2)
        if smoothing_eps:
            spec = ModelSpec(spec.kind, spec.params, friction_smoothing_eps=smoothing_eps)
        return spec

    @classmethod
    def quad_damp_cubic(cls, k1: float, k2: float, c1: float, c2: float, m: float = 1.0):
        return cls._build(ModelKind.QUAD_DAMP_CUBIC, m=m, k1=k1, k2=k2, c1=c1, c2=c2)

    @classmethod
    def boucwen(cls, k1: float, c1: float, A: float, alpha: float, beta: float,
                gamma: float, n: float = 1.0, m: float = 1.0):
        return cls._build(
            ModelKind.BOUC_WEN, m=m, k1=k1, c1=c1, A=A, alpha=alpha, beta=beta,
            gamma=gamma, n=n,
        )

    @classmethod
    def empirical(cls, k1: float, k2: float, k3: float, c1: float, c2: float,
                  c3: float, m: float = 1.0):
        return cls._build(ModelKind.EMPIRICAL, m=m, k1=k1, k2=k2, k3=k3,
                          c1=c1, c2=c2, c3=c3)

    @classmethod
    def cantilever_magnet(cls, KL: float, kn: float, c: float, m: float):
        return cls._build(ModelKind.CANTILEVER_MAGNET, m=m, c=c, KL=KL, kn=kn)

    @classmethod
    def _build(cls, kind: ModelKind, **values: float):
        units = PARAM_UNITS[kind]
        ordered = {name: values[name] for name in REQUIRED_PARAMS[kind]}
        return cls(kind, ParameterVector.from_dict(ordered, units))

    # -- derived quantities --

    @property
    def mass(self) -> float:
        return self.params.value("m")

    @property
    def linear_stiffness(self) -> float:
        return self.params.value(_LINEAR_STIFFNESS[self.kind])

    @property
    def natural_frequency(self) -> float:
        """Small-amplitude angular frequency sqrt(k/m) in rad/s."""
        k = self.linear_stiffness
        if k <= 0:
            raise ConfigError("linear stiffness must be positive to define a period")
        return math.sqrt(k / self.mass)

    @property
    def linear_period(self) -> float:
        return 2.0 * math.pi / self.natural_frequency

    def with_params(self, updates: dict[str, float]) -> "ModelSpec":
        return ModelSpec(self.kind, self.params.with_updates(updates),
                         self.friction_smoothing_eps)

    def kernel_args(self) -> tuple[int, np.ndarray]:
        """Integer kind code and packed float parameter array for the kernels."""
        p = [self.params.value(name) for name in REQUIRED_PARAMS[self.kind]]
        if self.kind is ModelKind.DRY_FRICTION:
            p.append(self.friction_smoothing_eps)
        return _KIND_CODES[self.kind], np.asarray(p, dtype=np.float64)


@dataclass
class TimeSeries:
    """Uniformly sampled free-decay response."""

    dt: float
    t0: float
    x: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=np.float64)
        self.v = np.asarray(self.v, dtype=np.float64)
        if self.dt <= 0:
            raise ConfigError("dt must be positive")
        if self.x.shape != self.v.shape or self.x.size < 2:
            raise ConfigError("x and v must have equal length >= 2")

    @property
    def t(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.x.size)

    def to_csv(self) -> str:
        from ._io import csv_text

        return csv_text(["t", "x"], zip(self.t.tolist(), self.x.tolist()))

    @classmethod
    def from_csv(cls, text: str) -> "TimeSeries":
        """Parse a two-column (t, x) CSV; velocity is reconstructed by finite
        differences and only used where a caller explicitly needs it."""
        lines = [ln for ln in text.strip().splitlines() if ln.strip()]
        if len(lines) < 3:
            raise ConfigError("time-series CSV needs a header and >= 2 rows")
        rows = np.array([[float(c) for c in ln.split(",")] for ln in lines[1:]])
        t, x = rows[:, 0], rows[:, 1]
        steps = np.diff(t)
        dt = float(steps[0])
        if dt <= 0 or not np.allclose(steps, dt, rtol=1e-6, atol=1e-12):
            raise ConfigError("time column must be uniformly increasing")
        v = np.gradient(x, dt)
        return cls(dt=dt, t0=float(t[0]), x=x, v=v)


@dataclass(frozen=True)
class BeamProperties:
    """Geometry and material data of the cantilever test article.

    Lengths in m, E in Pa, densities in kg/m^3, damping in Ns/m, masses in kg.
    Ms/Ls (sensor mass and its position) and Mt (tip magnets) may be zero.
    """

    L: float
    b: float
    h: float
    E: float
    rho: float
    rho0: float = 0.0
    h0: float = 0.0
    D0: float = 0.0
    c_a: float = 0.0
    Ms: float = 0.0
    Ls: float = 0.0
    Mt: float = 0.0

    def __post_init__(self):
        for name in ("L", "b", "h", "E", "rho"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"beam property {name} must be positive")
        if self.Ls > self.L:
            raise ConfigError("sensor position Ls cannot exceed beam length L")


# ---------------------------------------------------------------------------
# numba kernels

@njit(cache=True)
def _force(kind: int, p: np.ndarray, x: float, v: float, z: float) -> float:
    if kind == 0:  # cubic stiffness: m,k1,k2,c1
        return p[3] * v + p[1] * x + p[2] * x * x * x
    elif kind == 1:  # dry friction: m,k1,c1,c2,eps
        if p[4] > 0.0:
            s = math.tanh(v / p[4])
        else:
            s = 0.0
            if v > 0.0:
                s = 1.0
            elif v < 0.0:
                s = -1.0
        return p[2] * v + p[1] * x + p[3] * s
    elif kind == 2:  # quadratic damping + cubic stiffness: m,k1,k2,c1,c2
        return p[3] * v + p[1] * x + p[4] * v * abs(v) + p[2] * x * x * x
    elif kind == 3:  # Bouc-Wen: m,k1,c1,A,alpha,beta,gamma,n
        return p[2] * v + p[1] * x + (1.0 - p[4]) * p[1] * z
    elif kind == 4:  # empirical polynomial: m,k1,k2,k3,c1,c2,c3
        return (p[4] * v + p[1] * x + p[2] * x * x + p[5] * abs(v) * v
                + p[3] * x * x * x + p[6] * v * v * v)
    else:  # cantilever with magnets: m,c,KL,kn
        return p[1] * v + p[2] * x - p[3] * x * x * x


@njit(cache=True)
def _zdot(kind: int, p: np.ndarray, x: float, v: float, z: float) -> float:
    if kind == 3:
        A, beta, gamma, n = p[3], p[5], p[6], p[7]
        az = abs(z)
        return A * v - beta * abs(v) * az ** (n - 1.0) * z - gamma * v * az ** n
    return 0.0


@njit(cache=True)
def _rk4_decay(kind: int, p: np.ndarray, x0: float, v0: float, z0: float,
               dt: float, n_steps: int, stop_amp: float, win_steps: int):
    """Integrate the free decay; returns (x, v, last_index, status).

    status: 0 = ran to n_steps, 1 = non-finite state at last_index,
    2 = stopped early because a full window's peak |x| fell below stop_amp.
    """
    xs = np.empty(n_steps + 1)
    vs = np.empty(n_steps + 1)
    x, v, z = x0, v0, z0
    xs[0] = x
    vs[0] = v
    m = p[0]
    half = 0.5 * dt
    sixth = dt / 6.0
    wmax = abs(x)
    wcount = 0
    used = n_steps
    status = 0
    for i in range(1, n_steps + 1):
        k1x = v
        k1v = -_force(kind, p, x, v, z) / m
        k1z = _zdot(kind, p, x, v, z)

        x2 = x + half * k1x
        v2 = v + half * k1v
        z2 = z + half * k1z
        k2x = v2
        k2v = -_force(kind, p, x2, v2, z2) / m
        k2z = _zdot(kind, p, x2, v2, z2)

        x3 = x + half * k2x
        v3 = v + half * k2v
        z3 = z + half * k2z
        k3x = v3
        k3v = -_force(kind, p, x3, v3, z3) / m
        k3z = _zdot(kind, p, x3, v3, z3)

        x4 = x + dt * k3x
        v4 = v + dt * k3v
        z4 = z + dt * k3z
        k4x = v4
        k4v = -_force(kind, p, x4, v4, z4) / m
        k4z = _zdot(kind, p, x4, v4, z4)

        x = x + sixth * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
        v = v + sixth * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)
        z = z + sixth * (k1z + 2.0 * k2z + 2.0 * k3z + k4z)
        xs[i] = x
        vs[i] = v
        if not (np.isfinite(x) and np.isfinite(v) and np.isfinite(z)):
            used = i
            status = 1
            break
        if stop_amp > 0.0:
            ax = abs(x)
            if ax > wmax:
                wmax = ax
            wcount += 1
            if wcount >= win_steps:
                if wmax < stop_amp:
                    used = i
                    status = 2
                    break
                wmax = ax
                wcount = 0
    return xs, vs, used, status


# ---------------------------------------------------------------------------
# operations

def restoring_force(spec: ModelSpec, s: State) -> float:
    """Total non-inertial force so that the equation of motion is m*a = -force."""
    kind, p = spec.kernel_args()
    return float(_force(kind, p, s.x, s.v, s.z))


def boucwen_zdot(spec: ModelSpec, s: State) -> float:
    """Rate of the hysteretic internal variable for the Bouc-Wen model."""
    if spec.kind is not ModelKind.BOUC_WEN:
        raise ConfigError("boucwen_zdot applies only to the bouc_wen kind")
    kind, p = spec.kernel_args()
    return float(_zdot(kind, p, s.x, s.v, s.z))


def integrate_free_decay(
    spec: ModelSpec,
    ic: State,
    t_end: float | None = None,
    dt: float | None = None,
    stop_amplitude: float = 0.0,
) -> TimeSeries:
    """Integrate the unforced equations of motion with fixed-step RK4.

    Defaults: dt = T_lin/200 and t_end = 400*T_lin, where T_lin is the
    small-amplitude period. If ``stop_amplitude`` > 0, integration ends once
    the peak |x| over a full period-sized window stays below it, which
    truncates the quiet tail without changing any earlier sample.

    Raises DivergenceError naming the step if the state becomes non-finite.
    """
    T_lin = spec.linear_period
    if dt is None:
        dt = T_lin / 200.0
    if dt <= 0:
        raise ConfigError("dt must be positive")
    if t_end is None:
        t_end = 400.0 * T_lin
    if t_end < 10.0 * T_lin:
        warnings.warn(
            f"t_end = {t_end:.4g} s is below 10 linear periods ({10 * T_lin:.4g} s); "
            "the decay may be too short to extract a backbone",
            stacklevel=2,
        )
    n_steps = max(2, int(round(t_end / dt)))
    win_steps = max(8, int(round(1.2 * T_lin / dt)))
    kind, p = spec.kernel_args()
    xs, vs, used, status = _rk4_decay(
        kind, p, ic.x, ic.v, ic.z, dt, n_steps, stop_amplitude, win_steps
    )
    if status == 1:
        raise DivergenceError(
            f"non-finite state at step {used} (t = {used * dt:.6g} s) for "
            f"{spec.kind.value} with params {spec.params.as_dict()}",
            step=used,
            time=used * dt,
        )
    return TimeSeries(dt=dt, t0=0.0, x=xs[: used + 1].copy(), v=vs[: used + 1].copy())


def galerkin_constants(beam: BeamProperties, quad_points: int = 1000) -> tuple[float, float, float]:
    """Reduced modal mass, stiffness and damping of the beam via the assumed
    shape phi(x) = sin(pi*x/L).

    Uses composite Simpson quadrature with ``quad_points`` intervals; the
    sensor point mass enters as Ms*phi(Ls)^2. The tip-magnet mass multiplies
    phi(L) = 0 under this shape and therefore drops out. phi'''' is evaluated
    analytically as (pi/L)^4 * phi.
    """
    from scipy.integrate import simpson

    if quad_points < 100:
        raise ConfigError("quad_points must be >= 100")
    n = quad_points + (quad_points % 2)  # Simpson needs an even interval count
    x = np.linspace(0.0, beam.L, n + 1)
    phi = np.sin(np.pi * x / beam.L)
    phi_sq_integral = float(simpson(phi * phi, x=x))

    M_l = beam.rho * beam.b * beam.h
    m = M_l * phi_sq_integral + beam.Ms * math.sin(math.pi * beam.Ls / beam.L) ** 2
    I = beam.b * beam.h**3 / 12.0
    k_m = beam.E * I * (math.pi / beam.L) ** 4 * phi_sq_integral
    c = beam.c_a * phi_sq_integral
    return m, k_m, c


def stiffness_from_frequency(m: float, omega_n: float) -> float:
    """Net linear stiffness m*omega_n^2 implied by a measured natural frequency."""
    if m <= 0 or omega_n <= 0:
        raise ConfigError("m and omega_n must be positive")
    return m * omega_n**2
