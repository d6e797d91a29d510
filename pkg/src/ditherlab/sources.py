"""Correlated pair sources supported on a centered square.

Three families cover the test surface:

* ``truncated-gaussian``: a bivariate normal conditioned on the square,
  with cell masses and moments computed by tensor Gauss-Legendre panels.
* ``uniform-square``: uniform marginals with a bilinear density tilt that
  dials correlation; every rectangle mass has a closed form, which makes
  this family the analytic oracle for the quadrature path.
* ``discrete-grid``: a finite set of weighted atoms, where cell masses are
  exact placements and block entropies can be enumerated.

All sources expose the same surface: ``sample``, ``moments``,
``rect_mass_grid`` over half-open rectangles, and (for the continuous
families) a first-coordinate or second-coordinate marginal density.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigError, DomainError, SamplerCapError

__all__ = [
    "SecondOrderStats",
    "Marginal1D",
    "JointSource",
    "TruncatedGaussianSource",
    "UniformSquareSource",
    "DiscreteGridSource",
    "make_source",
]

_STATS_SLACK = 1e-9


@dataclass(frozen=True)
class SecondOrderStats:
    """Raw first and second moments of a pair (means plus E[v_i v_j])."""

    m1: float
    m2: float
    s11: float
    s22: float
    s12: float

    def __post_init__(self) -> None:
        if self.s11 < -_STATS_SLACK or self.s22 < -_STATS_SLACK:
            raise DomainError("second moments must be nonnegative")
        limit = math.sqrt(max(self.s11, 0.0) * max(self.s22, 0.0))
        if abs(self.s12) > limit * (1.0 + 1e-9) + _STATS_SLACK:
            raise DomainError(
                f"cross moment {self.s12} violates the Cauchy-Schwarz limit {limit}"
            )
        central1 = self.s11 - self.m1 * self.m1
        central2 = self.s22 - self.m2 * self.m2
        if central1 < -_STATS_SLACK or central2 < -_STATS_SLACK:
            raise DomainError("means are inconsistent with the second moments")
        central_limit = math.sqrt(max(central1, 0.0) * max(central2, 0.0))
        central_cross = self.s12 - self.m1 * self.m2
        if abs(central_cross) > central_limit * (1.0 + 1e-9) + _STATS_SLACK:
            raise DomainError(
                f"central cross moment {central_cross} violates the "
                f"Cauchy-Schwarz limit {central_limit}"
            )

    @property
    def var1(self) -> float:
        return max(self.s11 - self.m1 * self.m1, 0.0)

    @property
    def var2(self) -> float:
        return max(self.s22 - self.m2 * self.m2, 0.0)

    @property
    def cov12(self) -> float:
        return self.s12 - self.m1 * self.m2


@dataclass(frozen=True)
class Marginal1D:
    """A single-coordinate density on [-halfwidth, halfwidth]."""

    halfwidth: float
    density: Callable[[np.ndarray], np.ndarray]


@lru_cache(maxsize=32)
def _gl_rule(order: int) -> tuple[np.ndarray, np.ndarray]:
    nodes, weights = np.polynomial.legendre.leggauss(order)
    return nodes, weights


def _grid_quadrature_fixed(
    func: Callable[[np.ndarray, np.ndarray], np.ndarray],
    edges1: np.ndarray,
    edges2: np.ndarray,
    order: int,
) -> np.ndarray:
    nodes, weights = _gl_rule(order)
    half1 = 0.5 * np.diff(edges1)
    mid1 = 0.5 * (edges1[:-1] + edges1[1:])
    half2 = 0.5 * np.diff(edges2)
    mid2 = 0.5 * (edges2[:-1] + edges2[1:])
    pts1 = mid1[:, None] + half1[:, None] * nodes[None, :]
    pts2 = mid2[:, None] + half2[:, None] * nodes[None, :]
    wts1 = half1[:, None] * weights[None, :]
    wts2 = half2[:, None] * weights[None, :]
    out = np.empty((len(half1), len(half2)))
    # Row-chunked evaluation keeps the (cells1, order, cells2, order) tensor
    # from exhausting memory at high refinement orders.
    chunk = max(1, int(2**22 / max(1, order * order * len(half2))))
    for start in range(0, len(half1), chunk):
        stop = min(start + chunk, len(half1))
        values = func(
            pts1[start:stop, :, None, None],
            pts2[None, None, :, :],
        )
        out[start:stop] = np.einsum(
            "aq,br,aqbr->ab", wts1[start:stop], wts2, values, optimize=True
        )
    return out


def grid_quadrature(
    func: Callable[[np.ndarray, np.ndarray], np.ndarray],
    edges1: np.ndarray,
    edges2: np.ndarray,
    rel_tol: float = 1e-9,
    max_nodes: int = 1024,
) -> np.ndarray:
    """Integral of ``func`` over every cell of an edge grid.

    Tensor Gauss-Legendre per cell, doubling the node count until the
    largest cell value moves by less than ``rel_tol`` relative to the
    largest magnitude seen, or the per-axis cap is reached.
    """
    order = 8
    previous = None
    while True:
        current = _grid_quadrature_fixed(func, edges1, edges2, min(order, max_nodes))
        if previous is not None:
            scale = max(float(np.max(np.abs(current))), 1e-300)
            if float(np.max(np.abs(current - previous))) <= rel_tol * scale:
                return current
        if order >= max_nodes:
            return current
        previous = current
        order *= 2


def _clip_edges(edges: np.ndarray, halfwidth: float) -> np.ndarray:
    return np.clip(edges, -halfwidth, halfwidth)


class JointSource:
    """Common surface for pair sources. Concrete families subclass this."""

    kind: str = "abstract"
    halfwidth: float
    is_discrete: bool = False

    def sample(
        self, count: int, rng: np.random.Generator, attempt_cap: int = 1000
    ) -> np.ndarray:
        raise NotImplementedError

    def moments(self) -> SecondOrderStats:
        raise NotImplementedError

    def rect_mass_grid(self, edges1: np.ndarray, edges2: np.ndarray) -> np.ndarray:
        """Probability of [edges1[i], edges1[i+1]) x [edges2[j], edges2[j+1])."""
        raise NotImplementedError

    def rect_mass(self, lo1: float, hi1: float, lo2: float, hi2: float) -> float:
        grid = self.rect_mass_grid(np.array([lo1, hi1]), np.array([lo2, hi2]))
        return float(grid[0, 0])

    def marginal(self, user: int) -> Marginal1D:
        raise DomainError(f"source kind {self.kind!r} has no continuous marginal")

    def describe(self) -> dict:
        raise NotImplementedError


def _rejection_rounds(
    count: int,
    propose: Callable[[int], np.ndarray],
    attempt_cap: int,
    what: str,
) -> np.ndarray:
    """Accumulate accepted rows from ``propose`` until ``count`` are drawn.

    Each round proposes at least as many candidates as remain, so the round
    count bounds the attempts spent on any single output sample.
    """
    taken: list[np.ndarray] = []
    have = 0
    for _ in range(attempt_cap):
        accepted = propose(max(2 * (count - have), 64))
        if accepted.shape[0] > 0:
            taken.append(accepted)
            have += accepted.shape[0]
        if have >= count:
            block = np.concatenate(taken, axis=0)
            return block[:count]
    raise SamplerCapError(
        f"{what}: rejection sampling exhausted {attempt_cap} attempts per sample; "
        "the source is too concentrated outside its support square"
    )


class TruncatedGaussianSource(JointSource):
    """Bivariate normal with per-coordinate scales and correlation,
    conditioned on the square [-halfwidth, halfwidth]^2.

    Masses and moments come from panelized Gauss-Legendre quadrature; the
    sampler is exact rejection from the untruncated normal.
    """

    kind = "truncated-gaussian"

    def __init__(
        self,
        halfwidth: float,
        sigma1: float,
        sigma2: float,
        rho: float,
        quad_rel_tol: float = 1e-9,
        quad_max_nodes: int = 1024,
        panels: int = 16,
    ) -> None:
        if halfwidth <= 0.0:
            raise DomainError(f"halfwidth must be positive, got {halfwidth}")
        if sigma1 <= 0.0 or sigma2 <= 0.0:
            raise DomainError("scales must be positive")
        if not -1.0 < rho < 1.0:
            raise DomainError(f"correlation must lie strictly inside (-1, 1), got {rho}")
        self.halfwidth = float(halfwidth)
        self.sigma1 = float(sigma1)
        self.sigma2 = float(sigma2)
        self.rho = float(rho)
        self.quad_rel_tol = float(quad_rel_tol)
        self.quad_max_nodes = int(quad_max_nodes)
        self._panel_edges = np.linspace(-self.halfwidth, self.halfwidth, panels + 1)
        self._norm: float | None = None
        self._moments: SecondOrderStats | None = None

    def _raw_density(self, x1: np.ndarray, x2: np.ndarray) -> np.ndarray:
        u = np.asarray(x1) / self.sigma1
        v = np.asarray(x2) / self.sigma2
        r = self.rho
        quad_form = (u * u - 2.0 * r * u * v + v * v) / (1.0 - r * r)
        base = 2.0 * math.pi * self.sigma1 * self.sigma2 * math.sqrt(1.0 - r * r)
        return np.exp(-0.5 * quad_form) / base

    def _normalization(self) -> float:
        if self._norm is None:
            grid = grid_quadrature(
                self._raw_density,
                self._panel_edges,
                self._panel_edges,
                self.quad_rel_tol,
                self.quad_max_nodes,
            )
            self._norm = float(grid.sum())
        return self._norm

    def density(self, x1: np.ndarray, x2: np.ndarray) -> np.ndarray:
        inside = (np.abs(np.asarray(x1)) <= self.halfwidth) & (
            np.abs(np.asarray(x2)) <= self.halfwidth
        )
        return np.where(inside, self._raw_density(x1, x2) / self._normalization(), 0.0)

    def rect_mass_grid(self, edges1: np.ndarray, edges2: np.ndarray) -> np.ndarray:
        e1 = _clip_edges(np.asarray(edges1, dtype=np.float64), self.halfwidth)
        e2 = _clip_edges(np.asarray(edges2, dtype=np.float64), self.halfwidth)
        grid = grid_quadrature(
            self._raw_density, e1, e2, self.quad_rel_tol, self.quad_max_nodes
        )
        return grid / self._normalization()

    def moments(self) -> SecondOrderStats:
        if self._moments is None:
            norm = self._normalization()

            def weighted(power1: int, power2: int) -> float:
                def integrand(x1: np.ndarray, x2: np.ndarray) -> np.ndarray:
                    return (x1**power1) * (x2**power2) * self._raw_density(x1, x2)

                grid = grid_quadrature(
                    integrand,
                    self._panel_edges,
                    self._panel_edges,
                    self.quad_rel_tol,
                    self.quad_max_nodes,
                )
                return float(grid.sum()) / norm

            self._moments = SecondOrderStats(
                m1=weighted(1, 0),
                m2=weighted(0, 1),
                s11=weighted(2, 0),
                s22=weighted(0, 2),
                s12=weighted(1, 1),
            )
        return self._moments

    def sample(
        self, count: int, rng: np.random.Generator, attempt_cap: int = 1000
    ) -> np.ndarray:
        root = math.sqrt(1.0 - self.rho * self.rho)

        def propose(batch: int) -> np.ndarray:
            normals = rng.standard_normal((batch, 2))
            x1 = self.sigma1 * normals[:, 0]
            x2 = self.sigma2 * (self.rho * normals[:, 0] + root * normals[:, 1])
            keep = (np.abs(x1) <= self.halfwidth) & (np.abs(x2) <= self.halfwidth)
            return np.column_stack([x1[keep], x2[keep]])

        return _rejection_rounds(count, propose, attempt_cap, self.kind)

    def marginal(self, user: int) -> Marginal1D:
        if user not in (1, 2):
            raise DomainError(f"user must be 1 or 2, got {user}")
        norm = self._normalization()
        edges = self._panel_edges
        nodes, weights = _gl_rule(64)
        half = 0.5 * np.diff(edges)
        mid = 0.5 * (edges[:-1] + edges[1:])
        other_pts = (mid[:, None] + half[:, None] * nodes[None, :]).ravel()
        other_wts = (half[:, None] * weights[None, :]).ravel()

        def density(xs: np.ndarray) -> np.ndarray:
            xs = np.asarray(xs, dtype=np.float64)
            flat = xs.ravel()[:, None]
            if user == 1:
                values = self._raw_density(flat, other_pts[None, :])
            else:
                values = self._raw_density(other_pts[None, :], flat)
            out = values @ other_wts / norm
            out = np.where(np.abs(xs.ravel()) <= self.halfwidth, out, 0.0)
            return out.reshape(xs.shape)

        return Marginal1D(halfwidth=self.halfwidth, density=density)

    def describe(self) -> dict:
        return {
            "kind": self.kind,
            "halfwidth": self.halfwidth,
            "sigma1": self.sigma1,
            "sigma2": self.sigma2,
            "rho": self.rho,
        }


class UniformSquareSource(JointSource):
    """Uniform marginals on the square with a bilinear correlation tilt.

    The density is (1 + tilt * x1 * x2 / halfwidth^2) / (2 halfwidth)^2 for
    tilt in [-1, 1], giving correlation tilt/3 and closed-form rectangle
    masses. Both marginals are exactly uniform.
    """

    kind = "uniform-square"

    def __init__(self, halfwidth: float, tilt: float = 0.0) -> None:
        if halfwidth <= 0.0:
            raise DomainError(f"halfwidth must be positive, got {halfwidth}")
        if not -1.0 <= tilt <= 1.0:
            raise DomainError(f"tilt must lie in [-1, 1], got {tilt}")
        self.halfwidth = float(halfwidth)
        self.tilt = float(tilt)

    def density(self, x1: np.ndarray, x2: np.ndarray) -> np.ndarray:
        a = self.halfwidth
        inside = (np.abs(np.asarray(x1)) <= a) & (np.abs(np.asarray(x2)) <= a)
        values = (1.0 + self.tilt * np.asarray(x1) * np.asarray(x2) / (a * a)) / (
            4.0 * a * a
        )
        return np.where(inside, values, 0.0)

    def rect_mass_grid(self, edges1: np.ndarray, edges2: np.ndarray) -> np.ndarray:
        a = self.halfwidth
        e1 = _clip_edges(np.asarray(edges1, dtype=np.float64), a)
        e2 = _clip_edges(np.asarray(edges2, dtype=np.float64), a)
        len1 = np.diff(e1) / (2.0 * a)
        len2 = np.diff(e2) / (2.0 * a)
        quad1 = np.diff(e1 * e1) / (4.0 * a * a)
        quad2 = np.diff(e2 * e2) / (4.0 * a * a)
        return np.outer(len1, len2) + self.tilt * np.outer(quad1, quad2)

    def moments(self) -> SecondOrderStats:
        a = self.halfwidth
        return SecondOrderStats(
            m1=0.0,
            m2=0.0,
            s11=a * a / 3.0,
            s22=a * a / 3.0,
            s12=self.tilt * a * a / 9.0,
        )

    def sample(
        self, count: int, rng: np.random.Generator, attempt_cap: int = 1000
    ) -> np.ndarray:
        a = self.halfwidth
        ceiling = 1.0 + abs(self.tilt)

        def propose(batch: int) -> np.ndarray:
            x1 = rng.uniform(-a, a, size=batch)
            x2 = rng.uniform(-a, a, size=batch)
            height = rng.uniform(0.0, ceiling, size=batch)
            keep = height <= 1.0 + self.tilt * x1 * x2 / (a * a)
            return np.column_stack([x1[keep], x2[keep]])

        return _rejection_rounds(count, propose, attempt_cap, self.kind)

    def marginal(self, user: int) -> Marginal1D:
        if user not in (1, 2):
            raise DomainError(f"user must be 1 or 2, got {user}")
        a = self.halfwidth

        def density(xs: np.ndarray) -> np.ndarray:
            xs = np.asarray(xs, dtype=np.float64)
            return np.where(np.abs(xs) <= a, 1.0 / (2.0 * a), 0.0)

        return Marginal1D(halfwidth=a, density=density)

    def describe(self) -> dict:
        return {"kind": self.kind, "halfwidth": self.halfwidth, "tilt": self.tilt}


class DiscreteGridSource(JointSource):
    """Finitely many weighted atoms inside the square. Masses are exact."""

    kind = "discrete-grid"
    is_discrete = True

    def __init__(self, halfwidth: float, atoms: Sequence[tuple[float, float, float]]) -> None:
        if halfwidth <= 0.0:
            raise DomainError(f"halfwidth must be positive, got {halfwidth}")
        if not atoms:
            raise DomainError("at least one atom is required")
        table = np.asarray(atoms, dtype=np.float64)
        if table.ndim != 2 or table.shape[1] != 3:
            raise DomainError("atoms must be (x1, x2, weight) triples")
        if np.any(np.abs(table[:, :2]) > halfwidth):
            raise DomainError("atoms must lie inside the support square")
        if np.any(table[:, 2] < 0.0):
            raise DomainError("atom weights must be nonnegative")
        total = float(table[:, 2].sum())
        if not math.isclose(total, 1.0, rel_tol=0.0, abs_tol=1e-9):
            raise DomainError(f"atom weights must sum to 1, got {total}")
        self.halfwidth = float(halfwidth)
        self.points = table[:, :2].copy()
        self.weights = table[:, 2] / total

    def rect_mass_grid(self, edges1: np.ndarray, edges2: np.ndarray) -> np.ndarray:
        e1 = np.asarray(edges1, dtype=np.float64)
        e2 = np.asarray(edges2, dtype=np.float64)
        out = np.zeros((len(e1) - 1, len(e2) - 1))
        idx1 = np.searchsorted(e1, self.points[:, 0], side="right") - 1
        idx2 = np.searchsorted(e2, self.points[:, 1], side="right") - 1
        keep = (idx1 >= 0) & (idx1 < len(e1) - 1) & (idx2 >= 0) & (idx2 < len(e2) - 1)
        np.add.at(out, (idx1[keep], idx2[keep]), self.weights[keep])
        return out

    def moments(self) -> SecondOrderStats:
        x1 = self.points[:, 0]
        x2 = self.points[:, 1]
        w = self.weights
        return SecondOrderStats(
            m1=float(w @ x1),
            m2=float(w @ x2),
            s11=float(w @ (x1 * x1)),
            s22=float(w @ (x2 * x2)),
            s12=float(w @ (x1 * x2)),
        )

    def sample(
        self, count: int, rng: np.random.Generator, attempt_cap: int = 1000
    ) -> np.ndarray:
        ids = rng.choice(len(self.weights), size=count, p=self.weights)
        return self.points[ids].copy()

    def describe(self) -> dict:
        return {
            "kind": self.kind,
            "halfwidth": self.halfwidth,
            "atoms": [
                [float(x1), float(x2), float(w)]
                for (x1, x2), w in zip(self.points, self.weights)
            ],
        }


_SOURCE_PARAMS = {
    "truncated-gaussian": {"halfwidth", "sigma1", "sigma2", "rho", "quad_rel_tol", "quad_max_nodes"},
    "uniform-square": {"halfwidth", "tilt"},
    "discrete-grid": {"halfwidth", "atoms"},
}


def make_source(kind: str, **params) -> JointSource:
    """Build a source from configuration-flavored keyword parameters."""
    allowed = _SOURCE_PARAMS.get(kind)
    if allowed is not None:
        unknown = set(params) - allowed
        if unknown:
            raise ConfigError(
                f"source kind {kind!r} does not accept {sorted(unknown)}"
            )
    try:
        if kind == "truncated-gaussian":
            return TruncatedGaussianSource(
                halfwidth=params["halfwidth"],
                sigma1=params["sigma1"],
                sigma2=params["sigma2"],
                rho=params.get("rho", 0.0),
                quad_rel_tol=params.get("quad_rel_tol", 1e-9),
                quad_max_nodes=params.get("quad_max_nodes", 1024),
            )
        if kind == "uniform-square":
            return UniformSquareSource(
                halfwidth=params["halfwidth"], tilt=params.get("tilt", 0.0)
            )
        if kind == "discrete-grid":
            return DiscreteGridSource(
                halfwidth=params["halfwidth"], atoms=params["atoms"]
            )
    except KeyError as missing:
        raise ConfigError(f"source kind {kind!r} is missing parameter {missing}") from None
    except DomainError as err:
        raise ConfigError(str(err)) from None
    raise ConfigError(f"unknown source kind {kind!r}")
