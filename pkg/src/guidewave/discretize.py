"""Longitudinal grid, damping profiles, discrete operators and weighted norms.

The unbounded axis is truncated to (-X, X) with a homogeneous cap at the
ends; interior nodes carry the unknowns.  Shipped damping profiles keep the
absorption effective in the outer part of the box so that outgoing energy is
absorbed before it can reflect off the cap.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import diags as sparse_diags
from scipy.sparse.linalg import splu

from .errors import SolveError

#: smoothing width of the hole profile edge
HOLE_EDGE_WIDTH = 2.0


def japanese_bracket(x: np.ndarray) -> np.ndarray:
    """<x> = (1 + x^2)^(1/2)."""
    return np.sqrt(1.0 + np.square(x))


@dataclass(frozen=True)
class Grid1D:
    """Uniform interior grid on (-X, X) with a homogeneous cap at +-X."""

    X: float
    N: int

    def __post_init__(self):
        if self.N < 16:
            raise ValueError(f"grid needs N >= 16 interior points, got N={self.N}")
        if self.X <= 0:
            raise ValueError(f"half-width must be positive, got X={self.X}")

    @property
    def h(self) -> float:
        return 2.0 * self.X / (self.N + 1)

    @property
    def xs(self) -> np.ndarray:
        return -self.X + self.h * np.arange(1, self.N + 1)

    def refine(self, factor: float) -> "Grid1D":
        """Wider box at (nearly) the same spacing, for truncation guards."""
        return Grid1D(X=self.X * factor, N=int(round((self.N + 1) * factor)) - 1)


@dataclass(frozen=True)
class DampingProfile:
    """Absorption index a(x) >= 0 sampled on a grid.

    kinds:
      constant       a = level everywhere
      longrange(rho) a = 1 - (1/2)<x>^(-rho); tends to 1, floor c0 = 1/2
      hole(r, rho)   a = 0 on |x| <= r, C1 ramp of width 2, longrange envelope
    """

    kind: str
    rho: float
    r: float
    c0: float
    level: float
    samples: np.ndarray = field(repr=False)

    @classmethod
    def build(cls, grid: Grid1D, kind: str, rho: float = 2.0, r: float = 5.0,
              c0: float = 0.5, level: float = 1.0) -> "DampingProfile":
        x = grid.xs
        if kind == "constant":
            a = np.full(grid.N, float(level))
        elif kind == "longrange":
            if rho <= 0:
                raise ValueError(f"longrange decay rate must be positive, got rho={rho}")
            a = 1.0 - 0.5 * japanese_bracket(x) ** (-rho)
        elif kind == "hole":
            if r <= 0:
                raise ValueError(f"hole radius must be positive, got r={r}")
            ramp = np.clip((np.abs(x) - r) / HOLE_EDGE_WIDTH, 0.0, 1.0) ** 2
            a = ramp * (1.0 - 0.5 * japanese_bracket(x) ** (-rho))
        else:
            raise ValueError(f"unknown damping kind {kind!r}")
        return cls(kind=kind, rho=rho, r=r, c0=c0, level=level, samples=a)

    def hypothesis_constants(self, grid: Grid1D) -> dict[str, float]:
        """Empirical constants of the absorption hypothesis on this grid.

        C0 bounds |a - 1|<x>^rho, C1 bounds |a'|<x>^(rho+1) with a' by
        centered differences.  Reported, never enforced.
        """
        x = grid.xs
        w = japanese_bracket(x)
        c_0 = float(np.max(np.abs(self.samples - 1.0) * w ** self.rho))
        da = np.gradient(self.samples, grid.h)
        c_1 = float(np.max(np.abs(da) * w ** (self.rho + 1.0)))
        return {"C0": c_0, "C1": c_1}

    def effective_radius(self) -> float:
        """Radius outside which a >= c0 for the shipped profiles."""
        if self.kind == "hole":
            return self.r + HOLE_EDGE_WIDTH
        return 0.0


@dataclass(frozen=True)
class WeightSpec:
    """Weight exponents instantiating the energy-decay hypotheses (d = 1)."""

    delta1: float = 0.0
    delta2: float = 0.0
    s1: float = 0.0
    s2: float = 0.0
    s: float = 0.0
    kappa: float = 1.1

    def validate_decay_hypotheses(self, d: int = 1, rho: float = math.inf) -> None:
        """Raise ValueError naming every violated hypothesis."""
        bad = []
        half_d = d / 2.0
        if not (0.0 <= self.s1 <= half_d):
            bad.append(f"s1 in [0, d/2]: s1={self.s1}, d={d}")
        if not (0.0 <= self.s2 <= half_d):
            bad.append(f"s2 in [0, d/2]: s2={self.s2}, d={d}")
        if not self.kappa > 1.0:
            bad.append(f"kappa > 1: kappa={self.kappa}")
        if self.s > 1.0:
            bad.append(f"s <= 1: s={self.s}")
        if not (0.0 <= self.s < min(d, rho)):
            bad.append(f"s < min(d, rho): s={self.s}, min(d, rho)={min(d, rho)}")
        if self.delta1 < self.kappa * self.s1 + self.s - 1e-12:
            bad.append(f"delta1 >= kappa*s1 + s: delta1={self.delta1} < {self.kappa * self.s1 + self.s}")
        if self.delta2 < self.kappa * self.s2 + self.s - 1e-12:
            bad.append(f"delta2 >= kappa*s2 + s: delta2={self.delta2} < {self.kappa * self.s2 + self.s}")
        if bad:
            raise ValueError("weight hypotheses violated: " + "; ".join(bad))


# second- and first-derivative stencil coefficients by order
_D2_STENCILS = {2: [-2.0, 1.0], 4: [-5.0 / 2.0, 4.0 / 3.0, -1.0 / 12.0]}
_D1_STENCILS = {2: [1.0 / 2.0], 4: [2.0 / 3.0, -1.0 / 12.0]}


@dataclass(frozen=True)
class BandedLaplacian:
    """Symmetric negative-semidefinite stencil for d^2/dx^2, cap at +-X.

    ``diags[m]`` is the m-th superdiagonal (length N - m); values beyond the
    cap are taken as zero, which truncates the Toeplitz stencil and keeps it
    symmetric and <= 0.
    """

    grid: Grid1D
    order: int
    diags: tuple[np.ndarray, ...]

    @property
    def halfbw(self) -> int:
        return len(self.diags) - 1

    def apply(self, u: np.ndarray) -> np.ndarray:
        out = self.diags[0] * u
        for m in range(1, len(self.diags)):
            out[:-m] += self.diags[m] * u[m:]
            out[m:] += self.diags[m] * u[:-m]
        return out

    def quadratic_form(self, u: np.ndarray, h_weight: bool = True) -> float:
        """<-D2 u, u> (nonnegative), optionally with the h quadrature weight."""
        q = -float(np.real(np.vdot(u, self.apply(u))))
        q = max(q, 0.0)
        return q * self.grid.h if h_weight else q

    def as_dense(self) -> np.ndarray:
        n = self.grid.N
        a = np.diag(self.diags[0])
        for m in range(1, len(self.diags)):
            a += np.diag(self.diags[m], m) + np.diag(self.diags[m], -m)
        assert a.shape == (n, n)
        return a


def laplacian_1d(grid: Grid1D, order: int = 4, end_bc: str = "dirichlet_cap") -> BandedLaplacian:
    """Banded discrete d^2/dx^2 on the interior nodes."""
    if order not in _D2_STENCILS:
        raise ValueError(f"stencil order must be 2 or 4, got {order}")
    if end_bc != "dirichlet_cap":
        raise ValueError(f"only the homogeneous cap is supported, got {end_bc!r}")
    coeffs = _D2_STENCILS[order]
    h2 = grid.h ** 2
    diags = tuple(np.full(grid.N - m, c / h2) for m, c in enumerate(coeffs))
    return BandedLaplacian(grid=grid, order=order, diags=diags)


def gradient_1d(u: np.ndarray, grid: Grid1D, order: int = 4) -> np.ndarray:
    """Centered first derivative with zero extension at the cap."""
    if order not in _D1_STENCILS:
        raise ValueError(f"stencil order must be 2 or 4, got {order}")
    out = np.zeros_like(np.asarray(u, dtype=np.result_type(u, float)))
    for m, c in enumerate(_D1_STENCILS[order], start=1):
        cm = c / grid.h
        out[:-m] += cm * u[m:]
        out[m:] -= cm * u[:-m]
    return out


@dataclass(frozen=True)
class ShiftedOperator:
    """Discrete -d^2/dx^2 + lam - i z a(x) - z^2 acting on one mode.

    Complex symmetric banded matrix.  The sparse LU factorization is computed
    on the first solve and cached; the adjoint solve reuses it with the
    conjugate-transpose triangular sweeps.
    """

    grid: Grid1D
    lap: BandedLaplacian
    lam: float
    z: complex
    a: np.ndarray = field(repr=False)
    diag: np.ndarray = field(repr=False)
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def halfbw(self) -> int:
        return self.lap.halfbw

    def apply(self, u: np.ndarray) -> np.ndarray:
        out = -self.lap.apply(np.asarray(u, dtype=complex))
        out += self.diag * u
        return out

    def apply_adjoint(self, u: np.ndarray) -> np.ndarray:
        return np.conj(self.apply(np.conj(u)))

    def _factor(self):
        fac = self._cache.get("lu")
        if fac is None:
            offsets = range(-self.halfbw, self.halfbw + 1)
            bands = []
            for off in offsets:
                m = abs(off)
                band = np.full(self.grid.N - m, -self.lap.diags[m][0], dtype=complex) \
                    if m else (self.diag - self.lap.diags[0]).astype(complex)
                bands.append(band)
            mat = sparse_diags(bands, list(offsets), format="csc")
            try:
                fac = splu(mat)
            except Exception as exc:  # singular factorization
                raise SolveError(f"sparse factorization failed at z={self.z}: {exc}") from exc
            self._cache["lu"] = fac
        return fac

    def _checked(self, u: np.ndarray, f: np.ndarray, adjoint: bool, rtol: float) -> np.ndarray:
        nf = float(np.linalg.norm(f))
        if nf > 0.0:
            lhs = self.apply_adjoint(u) if adjoint else self.apply(u)
            res = float(np.linalg.norm(lhs - f)) / nf
            if not np.isfinite(res) or res > rtol:
                cond_est = float(np.linalg.norm(u)) / nf
                raise SolveError(
                    f"near-singular solve at z={self.z}: residual {res:.3e}, "
                    f"norm amplification ~{cond_est:.3e}")
        return u

    def solve(self, f: np.ndarray, rtol: float = 1e-10) -> np.ndarray:
        f = np.asarray(f, dtype=complex)
        u = self._factor().solve(f)
        return self._checked(u, f, False, rtol)

    def solve_adjoint(self, f: np.ndarray, rtol: float = 1e-10) -> np.ndarray:
        f = np.asarray(f, dtype=complex)
        u = self._factor().solve(f, trans="H")
        return self._checked(u, f, True, rtol)

    def dense(self) -> np.ndarray:
        return -self.lap.as_dense() + np.diag(self.diag)


def mode_operator(grid: Grid1D, lam: float, damping: DampingProfile, z: complex,
                  order: int = 4, mass: float = 0.0) -> ShiftedOperator:
    """Assemble the shifted operator for transverse eigenvalue ``lam``.

    Mode decoupling requires an x-only absorption index, which the 1D
    ``DampingProfile`` guarantees by construction; raw arrays of any other
    shape are rejected.
    """
    a = damping.samples
    if a.shape != (grid.N,):
        raise ValueError(
            f"damping must be sampled on the x-grid only (shape ({grid.N},)), got {a.shape}")
    z = complex(z)
    lam_eff = lam + mass * mass
    diag = lam_eff - 1j * z * a - z * z
    lap = laplacian_1d(grid, order=order)
    return ShiftedOperator(grid=grid, lap=lap, lam=lam_eff, z=z, a=a, diag=diag)


def weight(grid: Grid1D, delta: float) -> np.ndarray:
    """Samples of <x>^delta on the grid."""
    return japanese_bracket(grid.xs) ** delta


def weighted_norm(u: np.ndarray, grid: Grid1D, delta: float, flavor: str = "L2",
                  v: np.ndarray | None = None, order: int = 4) -> float:
    """Quadrature norm with the literal weight <x>^delta.

    Pass delta < 0 for the decaying weights of the energy spaces (the
    positive-delta direction grows, as used on initial data).  Flavors:

      L2       ||<x>^d u||
      grad+L2  (||<x>^d u'||^2 + ||<x>^d v||^2)^(1/2)   (energy-space style)
      H1-full  (||<x>^d u||^2 + ||<x>^d u'||^2 + ||<x>^d v||^2)^(1/2)

    v defaults to zero; u' is the centered stencil of the given order.
    """
    u = np.asarray(u)
    if u.shape != (grid.N,):
        raise ValueError(f"expected samples of shape ({grid.N},), got {u.shape}")
    w = weight(grid, delta)
    h = grid.h

    def wsq(f):
        return h * float(np.sum(np.abs(w * f) ** 2))

    if flavor == "L2":
        return math.sqrt(wsq(u))
    if flavor not in ("grad+L2", "H1-full"):
        raise ValueError(f"unknown norm flavor {flavor!r}")
    total = wsq(gradient_1d(u, grid, order=order))
    if v is not None:
        v = np.asarray(v)
        if v.shape != (grid.N,):
            raise ValueError(f"expected v of shape ({grid.N},), got {v.shape}")
        total += wsq(v)
    if flavor == "H1-full":
        total += wsq(u)
    return math.sqrt(total)
