"""Canal and rotational hypersurfaces built from center curves and radius profiles.

A hypersurface is the envelope of the spheres ``(Z - z(s))^2 = eps R(s)^2``
(``eps = -1`` in Minkowski space, ``+1`` in Euclidean space). The envelope is
solved in closed form along each spherical generator and parametrised by
``s`` plus intrinsic generator coordinates:

* elliptic / euclidean: ``n-1`` sphere angles ``(theta_1, ..., theta_{n-2}, phi)``
* hyperbolic: ``(chi, theta_1, ..., phi)`` on the unit hyperboloid
* parabolic: flat coordinates ``w`` in the spacelike frame

Every point comes with an order-3 jet of the position in all ``n`` chart
parameters, which is what the curvature code consumes.
"""

import itertools
import math
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from canalqc.errors import ConstructionError, DegeneracyError, EvaluationError, UsageError
from canalqc.exprlang import ProfileSpec, ValidationReport, chebyshev_points, validate_profile
from canalqc.numkit import (
    Jet,
    Signature,
    causal_character,
    inner,
    orthonormal_complement_frame,
    pseudo_null_frame,
)

KINDS = ("elliptic", "hyperbolic", "parabolic", "euclidean")

_CENTER_CHARACTER = {"elliptic": "timelike", "hyperbolic": "spacelike", "parabolic": "lightlike"}

UNIT_SPEED_TOL = 1e-9
ANGLE_MARGIN = 0.3
SLICE_CACHE_SIZE = 4096


@dataclass(frozen=True)
class CanalSpec:
    ambient: Signature
    kind: str
    center: tuple
    radius: ProfileSpec
    s_domain: tuple
    generator_ranges: tuple = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise UsageError(f"unknown canal kind {self.kind!r}")
        if len(self.center) != self.ambient.total_dim:
            raise UsageError(
                f"{len(self.center)} center coordinates for ambient dimension "
                f"{self.ambient.total_dim}"
            )
        want_lorentz = self.kind != "euclidean"
        if self.ambient.is_lorentzian != want_lorentz:
            raise UsageError(f"{self.kind} hypersurfaces live in {'Minkowski' if want_lorentz else 'Euclidean'} space")
        if self.n < 2:
            raise UsageError("hypersurface dimension must be at least 2")

    @property
    def n(self):
        return self.ambient.total_dim - 1

    @classmethod
    def from_strings(cls, kind, center, radius, s_domain, ambient=None, generator_ranges=None):
        dim = len(center)
        if ambient is None:
            ambient = "euclidean" if kind == "euclidean" else "minkowski"
        if isinstance(ambient, str):
            ambient = Signature.euclidean(dim) if ambient == "euclidean" else Signature.minkowski(dim)
        dom = (float(s_domain[0]), float(s_domain[1]))
        return cls(
            ambient=ambient,
            kind=kind,
            center=tuple(ProfileSpec.from_source(str(c), dom) for c in center),
            radius=ProfileSpec.from_source(str(radius), dom),
            s_domain=dom,
            generator_ranges=None if generator_ranges is None else tuple(map(tuple, generator_ranges)),
        )

    def ranges(self):
        """Parameter ranges of the generator coordinates (chart singularities excluded)."""
        if self.generator_ranges is not None:
            return self.generator_ranges
        m = self.n - 1
        if self.kind == "parabolic":
            return ((-0.5, 0.5),) * m
        if self.kind == "hyperbolic":
            return ((0.3, 1.0),) + _sphere_ranges(m - 1)
        return _sphere_ranges(m)


def _sphere_ranges(m):
    if m <= 0:
        return ()
    polar = (ANGLE_MARGIN, math.pi - ANGLE_MARGIN)
    return (polar,) * (m - 1) + ((-1.2, 1.2),)


@dataclass
class ChartPoint:
    """A point on a canal hypersurface together with its chart jet.

    ``params`` is ``(s, *generator_coords)``; ``jet`` is the order-3 Taylor
    expansion of the position in those ``n`` parameters.
    """

    params: tuple
    position: np.ndarray
    jet: Jet
    center: np.ndarray
    radius: float
    radius_slope: float
    tangent: np.ndarray
    signature: Signature
    kind: str
    index: tuple = field(default=None)

    @property
    def eps(self):
        return -1.0 if self.signature.is_lorentzian else 1.0


@dataclass
class Embedding:
    """Any chart of a hypersurface: a position jet plus the ambient signature."""

    jet: Jet
    signature: Signature
    center: np.ndarray = None
    radius: float = None


# ---------------------------------------------------------------------------
# small helpers that work on floats and jets alike


def _sin(x):
    return x.sin() if isinstance(x, Jet) else math.sin(x)


def _cos(x):
    return x.cos() if isinstance(x, Jet) else math.cos(x)


def sphere_point(angles):
    """Unit vector in R^(m+1) from m angles ``(theta_1, ..., theta_{m-1}, phi)``.

    The polar angles measure from the last axis; ``phi`` turns in the plane of
    the first two axes, so ``theta = pi/2, phi = 0`` is the first axis.
    """
    m = len(angles)
    if m == 0:
        return [1.0]
    x = [None] * (m + 1)
    prefix = 1.0
    for j in range(1, m):
        x[m - j + 1] = prefix * _cos(angles[j - 1])
        prefix = prefix * _sin(angles[j - 1])
    x[1] = prefix * _sin(angles[m - 1])
    x[0] = prefix * _cos(angles[m - 1])
    return x


def sphere_angles(x):
    """Inverse of :func:`sphere_point` for a unit vector."""
    x = np.asarray(x, dtype=float)
    m = len(x) - 1
    angles = []
    for j in range(1, m):
        top = x[m - j + 1]
        rest = np.linalg.norm(x[: m - j + 1])
        angles.append(math.atan2(rest, top))
    angles.append(math.atan2(x[1], x[0]))
    return tuple(angles)


class CanalChart:
    """Closed-form envelope chart of a :class:`CanalSpec`.

    The Gram-Schmidt pivots of the generator frame are frozen at a reference
    parameter so the chart stays a single smooth map over the whole domain.
    """

    def __init__(self, spec, s_ref=None):
        self.spec = spec
        self.sig = spec.ambient
        self.n = spec.n
        if s_ref is None:
            s_ref = 0.5 * (spec.s_domain[0] + spec.s_domain[1])
        self.s_ref = float(s_ref)
        self._cache = {}
        self._lock = threading.Lock()
        t_ref = self._tangent_value(self.s_ref)
        if spec.kind == "parabolic":
            _, _, self.pivots = pseudo_null_frame(t_ref, self.sig, with_pivots=True)
            self.time_slot = None
        else:
            frame, self.pivots = orthonormal_complement_frame(t_ref, self.sig, with_pivots=True)
            slots = [i for i, f in enumerate(frame) if inner(f, f, self.sig) < 0]
            self.time_slot = slots[0] if slots else None

    def _center_jet(self, s0, order):
        return Jet.stack([c.jet(s0, order) for c in self.spec.center], axis=-1)

    def _tangent_value(self, s0):
        return self._center_jet(s0, 1).diff(0).value

    def profile(self, s0):
        """Univariate order-3 jets (z, t, R, R') at ``s0``."""
        try:
            z4 = self._center_jet(s0, 4)
            r4 = self.spec.radius.jet(s0, 4)
        except EvaluationError as exc:
            raise ConstructionError(f"generating data undefined at s={s0:.17g}: {exc}") from exc
        return z4.truncate(3), z4.diff(0), r4.truncate(3), r4.diff(0)

    def check(self, s0, t, r, rp):
        """Raise ConstructionError if the generating data is invalid at s0."""
        kind = self.spec.kind
        if not r > 0:
            raise ConstructionError(f"R > 0 violated at s={s0:.17g} (R={r:.6g})")
        if kind == "elliptic" and not rp * rp > 1:
            raise ConstructionError(f"R'^2 > 1 violated at s={s0:.17g} (R'={rp:.6g})")
        if kind == "parabolic" and rp == 0:
            raise ConstructionError(f"R' != 0 violated at s={s0:.17g}; envelope degenerates")
        if kind == "euclidean" and not rp * rp < 1:
            raise ConstructionError(f"R'^2 < 1 violated at s={s0:.17g} (R'={rp:.6g})")
        if kind in _CENTER_CHARACTER:
            char = causal_character(t, self.sig)
            if char != _CENTER_CHARACTER[kind]:
                raise ConstructionError(
                    f"center curve is {char} at s={s0:.17g}; {kind} type needs {_CENTER_CHARACTER[kind]}"
                )

    def _slice(self, s0):
        """Checked profile jets and frame at ``s0``, memoised (pure in ``s0``)."""
        hit = self._cache.get(s0)
        if hit is None:
            z, t, r, rp = self.profile(s0)
            self.check(s0, t.value, float(r.value), float(rp.value))
            m, frame = self.frame(t)
            hit = (z, t, r, rp, m, frame)
            with self._lock:
                if len(self._cache) >= SLICE_CACHE_SIZE:
                    self._cache.clear()
                self._cache[s0] = hit
        return hit

    def frame(self, t):
        """Generator frame along the center curve (jets or arrays)."""
        if self.spec.kind == "parabolic":
            m, e = pseudo_null_frame(t, self.sig, pivots=self.pivots)
            return m, e
        frame = orthonormal_complement_frame(t, self.sig, pivots=self.pivots)
        if self.time_slot is not None:
            frame = [frame[self.time_slot]] + [f for i, f in enumerate(frame) if i != self.time_slot]
        return None, frame

    def frame_at(self, s0):
        """Frame values at ``s0``: (m or None, list of vectors)."""
        _, t, _, _ = self.profile(s0)
        m, e = self.frame(t.value)
        return m, e

    def point(self, params, index=None):
        params = tuple(float(p) for p in params)
        n = self.n
        if len(params) != n:
            raise UsageError(f"expected {n} chart parameters, got {len(params)}")
        s0, coords = params[0], params[1:]
        z, t, r, rp, m, frame = self._slice(s0)
        r0, rp0 = float(r.value), float(rp.value)
        kind = self.spec.kind

        def up(j):
            return j.embed(n, 0)

        u = [Jet.variable(i + 1, c, n) for i, c in enumerate(coords)]
        if kind == "parabolic":
            w = None
            ww = Jet.constant(0.0, n)
            for ui, ei in zip(u, frame):
                term = ui * up(ei)
                w = term if w is None else w + term
                ww = ww + ui * ui
            rr = up(r * rp)
            lam = -(up(r * r) + ww) / (2.0 * rr)
            pos = up(z) + lam * up(t) - rr * up(m)
            if w is not None:
                pos = pos + w
        else:
            if kind == "elliptic":
                lam, mu = -(r * rp), r * (rp * rp - 1.0).sqrt()
            elif kind == "hyperbolic":
                lam, mu = r * rp, r * (rp * rp + 1.0).sqrt()
            else:
                lam, mu = -(r * rp), r * (1.0 - rp * rp).sqrt()
            if kind == "hyperbolic":
                chi, rest = u[0], u[1:]
                ys = sphere_point(rest)
                direction = chi.cosh() * up(frame[0])
                for y, e in zip(ys, frame[1:]):
                    direction = direction + (chi.sinh() * y) * up(e)
            else:
                xs = sphere_point(u)
                direction = None
                for x, e in zip(xs, frame):
                    term = up(e) * x
                    direction = term if direction is None else direction + term
            pos = up(z + lam * t) + up(mu) * direction
        return ChartPoint(
            params=params,
            position=pos.value.copy(),
            jet=pos,
            center=z.value.copy(),
            radius=r0,
            radius_slope=rp0,
            tangent=t.value.copy(),
            signature=self.sig,
            kind=kind,
            index=index,
        )

    # -- ambient directions -> generator coordinates
    def coords_from_direction(self, s0, direction):
        """Generator coordinates for an ambient direction vector at ``s0``."""
        d = np.asarray(direction, dtype=float)
        m, frame = self.frame_at(s0)
        comps = np.array([inner(d, e, self.sig) * np.sign(inner(e, e, self.sig)) for e in frame])
        kind = self.spec.kind
        if kind == "parabolic":
            return tuple(comps)
        if kind == "hyperbolic":
            c0 = comps[0]
            if c0 <= 0:
                raise UsageError("direction is not on the future sheet of the unit hyperboloid")
            chi = math.acosh(max(c0, 1.0))
            rest = comps[1:]
            nrm = np.linalg.norm(rest)
            if len(rest) <= 1:
                return (chi,)
            y = rest / nrm if nrm > 0 else np.eye(len(rest))[0]
            return (chi,) + sphere_angles(y)
        nrm = np.linalg.norm(comps)
        return sphere_angles(comps / nrm)


def _resolve_coords(chart, s, u):
    u = np.asarray(u, dtype=float).ravel()
    if len(u) == chart.n - 1:
        return tuple(u)
    if len(u) == chart.sig.total_dim:
        return chart.coords_from_direction(s, u)
    raise UsageError(
        f"expected {chart.n - 1} generator coordinates or an ambient vector of length {chart.sig.total_dim}"
    )


def _eval_kind(kind, spec, s, u):
    if spec.kind != kind:
        raise UsageError(f"spec is of {spec.kind} type, not {kind}")
    chart = CanalChart(spec, s_ref=s)
    return chart.point((s,) + _resolve_coords(chart, s, u))


def eval_elliptic(spec, s, u):
    """Envelope point ``z - R R' t + R sqrt(R'^2 - 1) u`` (timelike unit center tangent)."""
    return _eval_kind("elliptic", spec, s, u)


def eval_hyperbolic(spec, s, v):
    """Envelope point ``z + R R' t + R sqrt(R'^2 + 1) v`` with ``v`` on the unit hyperboloid."""
    return _eval_kind("hyperbolic", spec, s, v)


def eval_parabolic(spec, s, w):
    """Envelope point ``z + lam t - R R' m + w`` for a lightlike center tangent."""
    return _eval_kind("parabolic", spec, s, w)


def eval_euclidean(spec, s, u):
    """Envelope point ``z - R R' t + R sqrt(1 - R'^2) u`` in Euclidean space."""
    return _eval_kind("euclidean", spec, s, u)


EVALUATORS = {
    "elliptic": eval_elliptic,
    "hyperbolic": eval_hyperbolic,
    "parabolic": eval_parabolic,
    "euclidean": eval_euclidean,
}


def envelope_residuals(p):
    """Defects of ``(Z-z)^2 = eps R^2`` and ``(Z-z).t = -eps R R'`` at a chart point."""
    d = p.position - p.center
    eps = p.eps
    r1 = inner(d, d, p.signature) - eps * p.radius**2
    r2 = inner(d, p.tangent, p.signature) + eps * p.radius * p.radius_slope
    return r1, r2


def constructed_normal(p):
    return -(p.position - p.center) / p.radius


def constructed_xi(p):
    """Unit tangent ``(t - R' N)/|t - R' N|`` along the center direction."""
    nrm = constructed_normal(p)
    v = p.tangent - p.radius_slope * nrm
    q = inner(v, v, p.signature)
    if q <= 0:
        raise DegeneracyError("t - R'N is not spacelike")
    return v / math.sqrt(q)


# ---------------------------------------------------------------------------
# parabolic hyperspheres


def eval_parabolic_hypersphere(q, w):
    """Point ``(w, |w|^2/(2q))`` of P(q) in the lightlike-hyperplane coordinates."""
    if not q > 0:
        raise UsageError("parabolic hypersphere needs q > 0")
    w = np.asarray(w, dtype=float)
    return np.concatenate([w, [float(w @ w) / (2.0 * q)]])


def parabolic_hypersphere_embedding(q, w):
    """P(q) inside Minkowski space, with ``t = e0 + e1`` and ``e_i`` the axes 2..n."""
    if not q > 0:
        raise UsageError("parabolic hypersphere needs q > 0")
    w = np.asarray(w, dtype=float)
    m = len(w)
    dim = m + 2
    sig = Signature.minkowski(dim)
    t = np.zeros(dim)
    t[0] = t[1] = 1.0
    pos = Jet.constant(np.zeros(dim), m)
    height = Jet.constant(0.0, m)
    for i, wi in enumerate(w):
        var = Jet.variable(i, wi, m)
        e = np.zeros(dim)
        e[i + 2] = 1.0
        pos = pos + var * e
        height = height + var * var
    pos = pos + (height / (2.0 * q)) * t
    return Embedding(jet=pos, signature=sig)


# ---------------------------------------------------------------------------
# validation and grids


def validate_spec(spec, samples=16):
    """Check the radius rules and the center-curve tangent at Chebyshev samples."""
    report = validate_profile(spec.radius, spec.kind, samples)
    if not report.valid:
        return report
    chart_sig = spec.ambient
    pts = chebyshev_points(spec.s_domain[0], spec.s_domain[1], samples)
    for s in pts:
        try:
            t = Jet.stack([c.jet(s, 1) for c in spec.center], axis=-1).diff(0).value
        except EvaluationError as exc:
            return ValidationReport(False, spec.kind, tuple(pts), (float(s), str(exc)))
        if not np.any(t):
            return ValidationReport(False, spec.kind, tuple(pts), (float(s), "center curve is singular (z' = 0)"))
        if spec.kind in _CENTER_CHARACTER:
            char = causal_character(t, chart_sig)
            if char != _CENTER_CHARACTER[spec.kind]:
                return ValidationReport(
                    False, spec.kind, tuple(pts),
                    (float(s), f"center tangent is {char}, {spec.kind} type needs {_CENTER_CHARACTER[spec.kind]}"),
                )
        if spec.kind != "parabolic":
            q = abs(inner(t, t, chart_sig))
            if abs(q - 1.0) > UNIT_SPEED_TOL:
                return ValidationReport(
                    False, spec.kind, tuple(pts), (float(s), f"center curve is not unit speed (|z'^2|={q:.12g})")
                )
    return report


def is_rotational(spec, samples=8, tol=1e-12):
    """True when the center curve is a straight line (z'' = 0 at every sample)."""
    for s in chebyshev_points(spec.s_domain[0], spec.s_domain[1], samples):
        acc = Jet.stack([c.jet(s, 2) for c in spec.center], axis=-1).diff(0).diff(0).value
        if np.max(np.abs(acc)) > tol:
            return False
    return True


def grid_axes(spec, resolution):
    n = spec.n
    if isinstance(resolution, int):
        resolution = (resolution,) * n
    resolution = tuple(int(r) for r in resolution)
    if len(resolution) != n:
        raise UsageError(f"resolution needs {n} entries, got {len(resolution)}")
    if any(r < 1 for r in resolution):
        raise UsageError("resolution entries must be positive")
    ranges = (spec.s_domain,) + tuple(spec.ranges())
    axes = []
    for (lo, hi), r in zip(ranges, resolution):
        axes.append(np.array([0.5 * (lo + hi)]) if r == 1 else np.linspace(lo, hi, r))
    return axes


def sample_grid(spec, resolution, threads=1):
    """Chart points on a tensor grid, in lexicographic index order."""
    report = validate_spec(spec)
    if not report.valid:
        raise ConstructionError(f"invalid spec: {report.message}")
    axes = grid_axes(spec, resolution)
    chart = CanalChart(spec)
    indices = list(itertools.product(*[range(len(a)) for a in axes]))

    def build(idx):
        params = tuple(float(a[i]) for a, i in zip(axes, idx))
        try:
            return chart.point(params, index=idx)
        except (ConstructionError, DegeneracyError) as exc:
            raise ConstructionError(f"grid index {idx}: {exc}") from exc

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(build, indices))
    return [build(idx) for idx in indices]


def point_record(p):
    return {
        "index": list(p.index) if p.index is not None else None,
        "params": list(p.params),
        "position": p.position.tolist(),
        "center": p.center.tolist(),
        "radius": p.radius,
    }
