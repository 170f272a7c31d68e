"""Catalog of momentum-only Hamiltonians ``H(p)`` with structure constants.

Every evaluator takes ``p`` with the vector index first, ``p.shape == (n, ...)``,
and returns an array of shape ``p.shape[1:]``.  Gradients keep the leading axis.
Scalars and 1D arrays are read as a batch of one-dimensional momenta.

Structure constants refer to the four growth/convexity conditions

* (H1) ``D_pH(p).p - H(p) >= C1 |p|^gamma - C~1``
* (H2), (H3) involve x-derivatives of ``H`` and are trivially satisfied here
* (H4) ``D2H(p) xi.xi >= C4 |p|^(gamma-2) |xi|^2 - C~4``
"""

from __future__ import annotations

import math
from collections.abc import Callable
from dataclasses import dataclass, field

import numpy as np

from .errors import StructureError

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class RadialProfile:
    """``H(p) = phi(|p|)`` with ``phi`` and its derivative on ``r >= 0``."""

    phi: Callable[[np.ndarray], np.ndarray]
    dphi: Callable[[np.ndarray], np.ndarray]
    monotone_speed: bool = True


@dataclass(frozen=True)
class StructureConstants:
    C1: float | None = None
    C1t: float | None = None
    C2: float | None = None
    C2t: float | None = None
    C3: float | None = None
    C3t: float | None = None
    C4: float | None = None
    C4t: float | None = None

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


@dataclass(frozen=True, eq=False)
class HamiltonianSpec:
    id: str
    evaluate: Callable[[np.ndarray], np.ndarray]
    gradient: Callable[[np.ndarray], np.ndarray]
    gamma: float
    constants: StructureConstants = field(default_factory=StructureConstants)
    convex: bool = True
    legendre_available: bool = True
    coercive: bool = True
    profile: RadialProfile | None = None
    legendre_closed_form: Callable[[np.ndarray], np.ndarray] | None = None
    description: str = ""

    def __call__(self, p) -> np.ndarray:
        return self.evaluate(_as_vectors(p))

    @property
    def conjugate_exponent(self) -> float:
        return self.gamma / (self.gamma - 1.0) if self.gamma > 1 else math.inf

    def speed_bound(self, lower: np.ndarray, upper: np.ndarray) -> np.ndarray:
        """Upper bound of ``|dH/dp_k|`` over the momentum box ``[lower, upper]``, per axis."""
        lower = np.atleast_1d(np.asarray(lower, dtype=float))
        upper = np.atleast_1d(np.asarray(upper, dtype=float))
        n = lower.size
        if self.profile is not None and self.profile.monotone_speed:
            rmax = math.sqrt(float(np.sum(np.maximum(np.abs(lower), np.abs(upper)) ** 2)))
            return np.full(n, float(self.profile.dphi(np.array(rmax))))
        axes = [np.linspace(lo, hi, 257 if n == 1 else 65) for lo, hi in zip(lower, upper)]
        p = np.stack(np.meshgrid(*axes, indexing="ij")).reshape(n, -1)
        return np.abs(self.gradient(p)).max(axis=1)


def _as_vectors(p) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    return p[None] if p.ndim <= 1 else p


def _norm(p: np.ndarray) -> np.ndarray:
    if p.shape[0] == 1:
        return np.abs(p[0])
    return np.sqrt(np.sum(p * p, axis=0))


def _radial(id_: str, profile: RadialProfile, **kwargs) -> HamiltonianSpec:
    def evaluate(p):
        return profile.phi(_norm(p))

    def gradient(p):
        r = _norm(p)
        safe = np.where(r > 0, r, 1.0)
        return p * np.where(r > 0, profile.dphi(r) / safe, 0.0)

    return HamiltonianSpec(id_, evaluate, gradient, profile=profile, **kwargs)


def power_hamiltonian(gamma: float, id_: str | None = None) -> HamiltonianSpec:
    """``H(p) = |p|^gamma / gamma`` with conjugate ``|q|^gamma' / gamma'``."""
    g = float(gamma)
    if g <= 1:
        raise StructureError("power members need gamma > 1")
    gc = g / (g - 1.0)
    if g == 2.0:
        profile = RadialProfile(lambda r: 0.5 * r * r, lambda r: r)
    else:
        profile = RadialProfile(lambda r: r**g / g, lambda r: r ** (g - 1.0))
    return _radial(
        id_ or f"power-{g:g}",
        profile,
        gamma=g,
        constants=StructureConstants(
            C1=(g - 1.0) / g, C1t=0.0, C2=0.0, C2t=0.0, C3=0.0, C3t=0.0,
            C4=min(1.0, g - 1.0), C4t=0.0,
        ),
        legendre_closed_form=lambda q: _norm(q) ** gc / gc,
        description=f"|p|^{g:g}/{g:g}",
    )


def eikonal_hamiltonian() -> HamiltonianSpec:
    profile = RadialProfile(lambda r: r, lambda r: np.ones_like(r))
    return _radial(
        "eikonal", profile, gamma=1.0, convex=True, legendre_available=False,
        coercive=False, description="|p|",
    )


def nonconvex_hamiltonian() -> HamiltonianSpec:
    """``((|p|^2 - 1)^2 - 1) / (|p|^2 + 1)``, a quadratic-growth nonconvex member."""

    def phi(r):
        s = r * r
        return (s * s - 2.0 * s) / (s + 1.0)

    def dphi(r):
        s = r * r
        return 2.0 * r * (s * s + 2.0 * s - 2.0) / (s + 1.0) ** 2

    return _radial(
        "nonconvex",
        RadialProfile(phi, dphi, monotone_speed=False),
        gamma=2.0,
        constants=StructureConstants(
            C1=1.0, C1t=6.0, C2=0.0, C2t=0.0, C3=0.0, C3t=0.0, C4=2.0, C4t=6.0,
        ),
        convex=False,
        legendre_available=False,
        description="((|p|^2-1)^2-1)/(|p|^2+1)",
    )


def zero_hamiltonian() -> HamiltonianSpec:
    profile = RadialProfile(lambda r: np.zeros_like(r), lambda r: np.zeros_like(r))
    return _radial(
        "zero", profile, gamma=2.0, legendre_available=False, coercive=False,
        description="0",
    )


def _build_catalog() -> dict[str, HamiltonianSpec]:
    members = [
        power_hamiltonian(1.5),
        power_hamiltonian(2.0),
        power_hamiltonian(3.0),
        power_hamiltonian(2.0, "quadratic"),
        eikonal_hamiltonian(),
        nonconvex_hamiltonian(),
        zero_hamiltonian(),
    ]
    return {h.id: h for h in members}


CATALOG: dict[str, HamiltonianSpec] = _build_catalog()


def get_hamiltonian(id_: str) -> HamiltonianSpec:
    try:
        return CATALOG[id_]
    except KeyError:
        known = ", ".join(sorted(CATALOG))
        raise KeyError(f"unknown hamiltonian {id_!r} (known: {known})") from None


# -- structure verification ---------------------------------------------------

def default_samples(dim: int = 1, count: int = 1000, p_max: float = 10.0) -> np.ndarray:
    """Momenta with ``|p|`` covering ``[0, p_max]``: a signed line in 1D, rays in 2D."""
    r = np.linspace(0.0, p_max, count)
    if dim == 1:
        return np.concatenate([-r[::-1], r])[None]
    angles = np.linspace(0.0, 2.0 * np.pi, 13)[:-1]
    pts = [np.stack([r * np.cos(a), r * np.sin(a)]) for a in angles]
    return np.concatenate(pts, axis=1)


def fd_hessian(H: HamiltonianSpec, p: np.ndarray) -> np.ndarray:
    """Fourth-order central differences of the gradient, shape ``(n, n, m)``."""
    n = p.shape[0]
    delta = 1e-4 * np.maximum(_norm(p), 1e-3)
    out = np.empty((n, n, p.shape[1]))
    for k in range(n):
        e = np.zeros((n, 1))
        e[k] = 1.0
        step = e * delta
        g = (
            -H.gradient(p + 2 * step) + 8 * H.gradient(p + step)
            - 8 * H.gradient(p - step) + H.gradient(p - 2 * step)
        ) / (12.0 * delta)
        out[:, k] = g
    return out


@dataclass(frozen=True)
class AssumptionCheck:
    name: str
    status: str  # "passed", "failed", "not declared", "trivially satisfied"
    min_slack: float | None = None
    worst_p: tuple[float, ...] | None = None

    @property
    def ok(self) -> bool:
        return self.status != "failed"


def verify_structure(
    H: HamiltonianSpec, samples: np.ndarray | None = None, tol: float = 1e-8,
) -> dict[str, AssumptionCheck]:
    """Minimal slack of each declared structure condition over ``samples``."""
    p = default_samples() if samples is None else _as_vectors(samples)
    if p.ndim == 1:
        p = p[None]
    c = H.constants
    report: dict[str, AssumptionCheck] = {}
    r = _norm(p)

    def record(name, slack, mask=None):
        if mask is not None:
            slack = np.where(mask, slack, np.inf)
        k = int(np.argmin(slack))
        s = float(slack[k])
        status = "passed" if s >= -tol else "failed"
        report[name] = AssumptionCheck(name, status, s, tuple(float(v) for v in p[:, k]))

    if c.C1 is None or c.C1t is None:
        report["H1"] = AssumptionCheck("H1", "not declared")
    else:
        lhs = np.sum(H.gradient(p) * p, axis=0) - H.evaluate(p)
        record("H1", lhs - (c.C1 * r**H.gamma - c.C1t))
    for name in ("H2", "H3"):
        report[name] = AssumptionCheck(name, "trivially satisfied", 0.0)
    if c.C4 is None or c.C4t is None:
        report["H4"] = AssumptionCheck("H4", "not declared")
    else:
        mask = r > 0 if H.gamma < 2 else None
        q = np.where(r > 0, p, 1e-3) if mask is not None else p
        hess = fd_hessian(H, q)
        lam = np.linalg.eigvalsh(np.moveaxis(hess, -1, 0)).min(axis=1)
        with np.errstate(divide="ignore"):
            weight = _norm(q) ** (H.gamma - 2.0)
        record("H4", lam - (c.C4 * weight - c.C4t), mask)
    return report


def gradient_mismatch(H: HamiltonianSpec, samples: np.ndarray | None = None) -> float:
    """Largest relative gap between ``H.gradient`` and central differences of ``H``."""
    p = default_samples() if samples is None else _as_vectors(samples)
    grad = H.gradient(p)
    worst = 0.0
    for k in range(p.shape[0]):
        delta = 1e-5 * np.maximum(np.abs(p[k]), 1.0)
        e = np.zeros_like(p)
        e[k] = delta
        fd = (H.evaluate(p + e) - H.evaluate(p - e)) / (2.0 * delta)
        mask = np.abs(grad[k]) > 1e-3
        if not H.coercive or H.gamma < 2:
            # nonsmooth at the origin
            mask &= _norm(p) > 1e-2
        rel = np.abs(fd - grad[k]) / np.maximum(np.abs(grad[k]), 1.0)
        worst = max(worst, float(np.max(np.where(mask, rel, 0.0))))
    return worst


# -- Legendre transform ------------------------------------------------------

def golden_max(func, a, b, tol: float = 1e-12, iters: int = 200):
    """Vectorised golden-section search for the maximiser of unimodal ``func`` on ``[a, b]``."""
    a = np.array(a, dtype=float)
    b = np.array(b, dtype=float)
    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc, fd = func(c), func(d)
    for _ in range(iters):
        if np.all(np.abs(b - a) <= tol * np.maximum(1.0, np.abs(a))):
            break
        left = fc > fd
        a, b = np.where(left, a, c), np.where(left, d, b)
        c, d = b - GOLDEN * (b - a), a + GOLDEN * (b - a)
        fc, fd = func(c), func(d)
    x = 0.5 * (a + b)
    return x, func(x)


def legendre(H: HamiltonianSpec, q, method: str = "auto", q_max: float = 20.0) -> np.ndarray:
    """Fenchel conjugate ``sup_p (p.q - H(p))``.

    Parameters
    ----------
    q : array_like
        Dual vectors, vector index first; scalars and 1D arrays are one-dimensional.
    method : {"auto", "numeric"}
        ``auto`` uses the closed form when the member carries one.
    """
    if not H.convex:
        raise StructureError(f"{H.id} is not convex; its conjugate does not invert it")
    if not H.legendre_available and H.legendre_closed_form is None:
        raise StructureError(f"{H.id} has no finite conjugate")
    q = _as_vectors(q)
    if np.any(_norm(q) > q_max * (1 + 1e-12)):
        raise StructureError(f"|q| exceeds q_max={q_max}")
    if method == "auto" and H.legendre_closed_form is not None:
        return H.legendre_closed_form(q)
    if H.profile is not None:
        return _legendre_radial(H.profile, _norm(q))
    return _legendre_coordinate(H, q)


def _legendre_radial(profile: RadialProfile, qn: np.ndarray) -> np.ndarray:
    qn = np.asarray(qn, dtype=float)
    flat = qn.reshape(-1)
    # bracket: the maximiser s* solves phi'(s) = |q|
    hi = np.ones_like(flat)
    for _ in range(200):
        grow = profile.dphi(hi) < flat
        if not grow.any():
            break
        hi = np.where(grow, 2.0 * hi, hi)
    s = np.linspace(0.0, 1.0, 257)[:, None] * hi[None]
    vals = s * flat[None] - profile.phi(s)
    k = np.argmax(vals, axis=0)
    step = hi / 256.0
    a = np.maximum(s[k, np.arange(flat.size)] - step, 0.0)
    b = s[k, np.arange(flat.size)] + step
    _, best = golden_max(lambda x: x * flat - profile.phi(x), a, b, tol=1e-14)
    return np.maximum(best, np.max(vals, axis=0)).reshape(qn.shape)


def _legendre_coordinate(H: HamiltonianSpec, q: np.ndarray, sweeps: int = 60) -> np.ndarray:
    n = q.shape[0]
    flat = q.reshape(n, -1)
    p = np.zeros_like(flat)
    for _ in range(sweeps):
        for k in range(n):
            def obj(x, k=k):
                trial = p.copy()
                trial[k] = x
                return np.sum(trial * flat, axis=0) - H.evaluate(trial)

            width = np.maximum(4.0 * np.abs(p[k]), 4.0) + np.abs(flat[k])
            p[k], _ = golden_max(obj, p[k] - width, p[k] + width, tol=1e-13)
    value = np.sum(p * flat, axis=0) - H.evaluate(p)
    return value.reshape(q.shape[1:])
