"""Detection and verification of quasi-constant sectional curvature.

A Riemannian manifold has quasi-constant sectional curvature when

    R = a pi + b Phi,
    pi(X,Y,Z,U)  = g(Y,Z) g(X,U) - g(X,Z) g(Y,U),
    Phi(X,Y,Z,U) = g(Y,Z) eta(X) eta(U) - g(X,Z) eta(Y) eta(U)
                   + g(X,U) eta(Y) eta(Z) - g(Y,U) eta(X) eta(Z),

with ``eta = g(xi, .)`` for a unit field ``xi``.  The Ricci operator then has
the eigenvalue ``(n-1)a + b`` on the complement of ``xi`` and ``(n-1)(a+b)``
on ``xi``, which is how :func:`detect_qc` recovers ``(a, b, xi)``.

Field derivatives (``da``, ``db``, ``d eta``, ``nabla xi`` ...) are taken by
central differences on a small local stencil around each grid point; the
stencil points only need intrinsic curvature.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields, replace
from typing import Optional

import numpy as np

from canalqc.curvature import (
    NORM_FLOOR,
    analyze_point,
    induced_metric,
    orthonormal_frame,
    ricci_scalar_weyl,
    riemann_intrinsic,
    tangent_jets,
    tensor_norm,
)
from canalqc.errors import (
    CanalQCError,
    ConstantCurvature,
    DegeneracyError,
    NotQC,
    UsageError,
)
from canalqc.numkit import canonical_sign, inner, sym_eigen
from canalqc.shapes import CanalChart, constructed_xi, grid_axes

STENCIL_STEP = 1e-3


@dataclass(frozen=True)
class Tolerances:
    """Named numeric thresholds; every field can be overridden from the CLI."""

    fit: float = 1e-8
    cluster: float = 1e-6
    constant_b: float = 1e-10
    classify: float = 1e-6
    class_qc: float = 1e-7
    gauss: float = 1e-8
    weyl: float = 1e-8
    structure: float = 1e-5
    subproj_fail: float = 1e-3
    codazzi: float = 1e-5
    embedding: float = 1e-8
    isometry: float = 1e-6
    grad_tau: float = 1e-4
    stencil_step: float = STENCIL_STEP

    @classmethod
    def names(cls):
        return tuple(f.name for f in fields(cls))

    def override(self, **kw):
        unknown = set(kw) - set(self.names())
        if unknown:
            raise UsageError(f"unknown tolerance name(s): {', '.join(sorted(unknown))}")
        return replace(self, **{k: float(v) for k, v in kw.items()})


@dataclass(frozen=True)
class QCDecomposition:
    a: float
    b: float
    xi: np.ndarray
    fit_residual: float
    spectrum: np.ndarray
    k: Optional[float] = None
    class_label: Optional[int] = None

    @property
    def horizontal(self):
        """Eigenvalue of the Ricci operator on the complement of xi."""
        return float(self.spectrum[0])


@dataclass(frozen=True)
class StructureResiduals:
    r_da: float = 0.0
    r_deta_hor: float = 0.0
    r_theta: float = 0.0
    r_umb: float = 0.0
    r_dk: float = 0.0
    r_subproj_db: float = 0.0
    r_geodesic: float = 0.0
    r_deta_full: float = 0.0

    @classmethod
    def maximum(cls, items):
        items = list(items)
        if not items:
            return cls()
        return cls(**{f.name: max(getattr(r, f.name) for r in items) for f in fields(cls)})

    def as_dict(self):
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @property
    def qc_part(self):
        """Residuals of identities every QC hypersurface satisfies."""
        return max(self.r_da, self.r_deta_hor, self.r_theta, self.r_umb, self.r_dk)

    @property
    def subprojective_part(self):
        return max(self.r_subproj_db, self.r_geodesic, self.r_deta_full)


@dataclass(frozen=True)
class PointClassification:
    label: str
    alpha: float
    beta: float
    multiplicity_gap: float


@dataclass(frozen=True)
class EmbeddingData:
    h_synthetic: np.ndarray
    alpha: float
    beta_coeff: float
    recovered_center: np.ndarray
    recovered_radius: float
    codazzi_residual: Optional[float] = None


# ---------------------------------------------------------------------------
# algebraic QC tensors


def qc_pi(g):
    g = np.asarray(g, dtype=float)
    return np.einsum("jk,il->ijkl", g, g) - np.einsum("ik,jl->ijkl", g, g)


def qc_phi(g, eta):
    g = np.asarray(g, dtype=float)
    eta = np.asarray(eta, dtype=float)
    ee = np.outer(eta, eta)
    return (
        np.einsum("jk,il->ijkl", g, ee)
        - np.einsum("ik,jl->ijkl", g, ee)
        + np.einsum("il,jk->ijkl", g, ee)
        - np.einsum("jl,ik->ijkl", g, ee)
    )


def qc_tensor(a, b, g, xi):
    """R = a pi + b Phi for the unit vector ``xi`` (contravariant components)."""
    g = np.asarray(g, dtype=float)
    eta = g @ np.asarray(xi, dtype=float)
    return a * qc_pi(g) + b * qc_phi(g, eta)


# ---------------------------------------------------------------------------
# detection


def _split_spectrum(vals, rel_tol):
    """Locate the (n-1)-fold cluster in ascending ``vals``.

    Returns ``(cluster_slice, simple_index, spread)`` or ``None``.
    """
    n = len(vals)
    scale = max(float(np.max(np.abs(vals))), NORM_FLOOR)
    low = (slice(0, n - 1), n - 1, float(vals[n - 2] - vals[0]))
    high = (slice(1, n), 0, float(vals[n - 1] - vals[1]))
    cands = [c for c in (low, high) if c[2] <= rel_tol * scale]
    if not cands:
        return None
    return min(cands, key=lambda c: c[2])


def qc_from_ricci(rho, g, tol=None):
    """(a, b, xi, spectrum) from the Ricci operator alone.

    ``spectrum`` is ``(lambda_horizontal, lambda_xi)``.  Raises NotQC when the
    multiplicity pattern is not ``(n-1, 1)`` and ConstantCurvature when ``b``
    vanishes.
    """
    tol = tol or Tolerances()
    n = g.shape[0]
    if n < 3:
        raise UsageError("QC detection needs dimension at least 3")
    vals, vecs = sym_eigen(rho, g)
    split = _split_spectrum(vals, tol.cluster)
    if split is None:
        raise NotQC(
            "Ricci spectrum does not have an eigenvalue of multiplicity n-1",
            spectrum=tuple(float(v) for v in vals),
        )
    cluster, simple, _ = split
    lam_h = float(np.mean(vals[cluster]))
    lam_x = float(vals[simple])
    b = (lam_x - lam_h) / (n - 2)
    a = (lam_h - b) / (n - 1)
    scale = max(1.0, float(np.max(np.abs(vals))))
    if abs(b) < tol.constant_b * scale:
        raise ConstantCurvature(a + b)
    xi = canonical_sign(vecs[:, simple])
    return a, b, xi, np.array([lam_h, lam_x]), vecs[:, cluster]


def detect_qc(cd, tol=None):
    """Recover ``(a, b, xi)`` from curvature data and measure the QC fit."""
    tol = tol or Tolerances()
    g = cd.metric.g
    if g.shape[0] < 4:
        raise UsageError("QC verdicts need n >= 4")
    a, b, xi, spec, _ = qc_from_ricci(cd.ricci_operator, g, tol)
    model = qc_tensor(a, b, g, xi)
    resid = tensor_norm(cd.riemann - model, g) / max(tensor_norm(cd.riemann, g), NORM_FLOOR)
    if not resid <= tol.fit:
        raise NotQC(f"QC fit residual {resid:.3g} exceeds {tol.fit:.3g}", spectrum=tuple(spec), residual=resid)
    return QCDecomposition(a=a, b=b, xi=xi, fit_residual=resid, spectrum=spec)


def classify_qc(a, k, tol=1e-7):
    """Class 1..4 of a QC manifold from ``a`` and ``a + k^2``."""
    s = a + k * k
    if a > tol:
        return 1
    if a < -tol and s > tol:
        return 2
    if s < -tol:
        return 3
    if abs(s) <= tol:
        return 4
    # a in [-tol, tol] with a + k^2 > tol: the listed order leaves this open
    return 2 if s > tol else 4


def classify_point(spectrum, n=None, tol=1e-6):
    """Label a hypersurface point from its shape-operator eigenvalues."""
    vals = np.sort(np.asarray(spectrum, dtype=float))
    n = len(vals) if n is None else n
    if len(vals) != n or n < 4:
        raise UsageError(f"need n >= 4 eigenvalues, got {len(vals)}")
    full = float(vals[-1] - vals[0])
    low = float(vals[n - 2] - vals[0])
    high = float(vals[n - 1] - vals[1])
    if full <= tol:
        alpha, beta, gap = float(np.mean(vals)), 0.0, full
    elif min(low, high) <= tol:
        if low <= high:
            alpha, beta, gap = float(np.mean(vals[: n - 1])), float(vals[n - 1]), low
        else:
            alpha, beta, gap = float(np.mean(vals[1:])), float(vals[0]), high
        beta -= alpha
    else:
        return PointClassification("not_conformally_flat", float("nan"), float("nan"), min(low, high))
    a0, b0 = abs(alpha) <= tol, abs(beta) <= tol
    if a0 and b0:
        label = "hyperplane"
    elif b0:
        label = "hypersphere"
    elif a0:
        label = "developable"
    else:
        label = "canal"
    return PointClassification(label, alpha, beta, gap)


def recover_embedding(p, qc, cd, floor=1e-12):
    """Center and radius of the osculating hypersphere, plus the synthetic h."""
    eps = cd.eps
    ea = eps * qc.a
    if ea <= floor:
        branch = "Minkowski (a < 0)" if eps < 0 else "Euclidean (a > 0)"
        raise UsageError(f"a = {qc.a:.6g} is outside the {branch} branch")
    alpha = math.sqrt(ea)
    beta = eps * qc.b / alpha
    g = cd.metric.g
    eta = g @ qc.xi
    h = alpha * g + beta * np.outer(eta, eta)
    radius = 1.0 / alpha
    center = p.jet.value + radius * cd.normal
    return EmbeddingData(
        h_synthetic=h,
        alpha=alpha,
        beta_coeff=beta,
        recovered_center=center,
        recovered_radius=radius,
    )


# ---------------------------------------------------------------------------
# local stencil


@dataclass(frozen=True)
class _Sample:
    g: np.ndarray
    a: float
    b: float
    xi: np.ndarray
    tau: float


def _sample(chart, params, tol, b_override=None):
    p = chart.point(params)
    m = induced_metric(p)
    rho, tau, _ = ricci_scalar_weyl(riemann_intrinsic(m), m, weyl=False)
    a, b, xi, _, _ = qc_from_ricci(rho, m.g, tol)
    if b_override is not None:
        b = float(b_override(tuple(params), b))
    return _Sample(m.g, a, b, xi, tau)


def _offsets(n):
    out = []
    for i in range(n):
        for step in (-2, -1, 1, 2):
            d = [0] * n
            d[i] = step
            out.append(tuple(d))
    for i in range(n):
        for j in range(i + 1, n):
            for step in (1, -1):
                d = [0] * n
                d[i] = d[j] = step
                out.append(tuple(d))
    return out


def _axis(n, i, step):
    d = [0] * n
    d[i] = step
    return tuple(d)


class _Stencil:
    """Finite-difference derivatives of arbitrary per-sample quantities."""

    def __init__(self, samples, center, n, h):
        self.s = samples
        self.c = center
        self.n = n
        self.h = h

    def d1(self, f):
        """Array ``out[i, ...] = d_i f`` (fourth-order central differences)."""
        rows = []
        for i in range(self.n):
            fm2, fm1 = f(self.s[_axis(self.n, i, -2)]), f(self.s[_axis(self.n, i, -1)])
            fp1, fp2 = f(self.s[_axis(self.n, i, 1)]), f(self.s[_axis(self.n, i, 2)])
            rows.append((fm2 - 8.0 * fm1 + 8.0 * fp1 - fp2) / (12.0 * self.h))
        return np.array(rows)

    def hessian(self, f):
        n, h = self.n, self.h
        f0 = f(self.c)
        out = np.zeros((n, n))
        for i in range(n):
            vals = [f(self.s[_axis(n, i, k)]) for k in (-2, -1, 1, 2)]
            out[i, i] = (-vals[0] + 16.0 * vals[1] - 30.0 * f0 + 16.0 * vals[2] - vals[3]) / (12.0 * h * h)
        for i in range(n):
            for j in range(i + 1, n):
                pp = f(self.s[tuple(1 if q in (i, j) else 0 for q in range(n))])
                mm = f(self.s[tuple(-1 if q in (i, j) else 0 for q in range(n))])
                si = f(self.s[_axis(n, i, 1)]) + f(self.s[_axis(n, i, -1)])
                sj = f(self.s[_axis(n, j, 1)]) + f(self.s[_axis(n, j, -1)])
                out[i, j] = out[j, i] = (pp + mm - si - sj + 2.0 * f0) / (2.0 * h * h)
        return out


@dataclass(frozen=True)
class LocalStructure:
    """Per-point derivative data and identity defects."""

    k_alpha: float
    k_beta: float
    residuals: StructureResiduals
    codazzi: Optional[float]
    grad_tau_defect: Optional[float]
    horizontal: np.ndarray = field(repr=False, default=None)


def _eta(smp):
    return smp.g @ smp.xi


def _h_synthetic(smp, eps):
    alpha = math.sqrt(eps * smp.a)
    beta = eps * smp.b / alpha
    eta = _eta(smp)
    return alpha * smp.g + beta * np.outer(eta, eta)


def local_structure(chart, params, center_xi, gamma, tol=None, b_override=None, eps=None):
    """Evaluate the QC structure identities at ``params`` on a local stencil.

    ``center_xi`` fixes the orientation of xi (k changes sign with it);
    ``gamma`` is the Christoffel array at the point.
    """
    tol = tol or Tolerances()
    n = len(params)
    h = tol.stencil_step
    base = np.asarray(params, dtype=float)
    center = _sample(chart, tuple(base), tol, b_override)
    xi_c = np.asarray(center_xi, dtype=float)
    if center.xi @ center.g @ xi_c < 0:
        center = replace(center, xi=-center.xi)
    samples = {tuple([0] * n): center}
    for off in _offsets(n):
        smp = _sample(chart, tuple(base + h * np.asarray(off, dtype=float)), tol, b_override)
        if smp.xi @ smp.g @ xi_c < 0:
            smp = replace(smp, xi=-smp.xi)
        samples[off] = smp
    st = _Stencil(samples, center, n, h)

    g, a, b, xi = center.g, center.a, center.b, center.xi
    ginv = np.linalg.inv(g)
    da = st.d1(lambda q: q.a)
    db = st.d1(lambda q: q.b)
    dtau = st.d1(lambda q: q.tau)
    dxi = st.d1(lambda q: q.xi)  # dxi[mu, nu] = d_mu xi^nu
    deta = st.d1(_eta)  # deta[mu, nu] = d_mu eta_nu
    hess_a = st.hessian(lambda q: q.a)

    # horizontal g-orthonormal basis (columns)
    proj = np.eye(n) - np.outer(xi, g @ xi)
    cols = []
    for v in np.eye(n):
        w = proj @ v
        for c in cols:
            w = w - (c @ g @ w) * c
        q = w @ g @ w
        if q > 1e-20:
            cols.append(w / math.sqrt(q))
        if len(cols) == n - 1:
            break
    horiz = np.array(cols).T

    nabla_xi = (dxi + np.einsum("nml,l->mn", gamma, xi)).T  # [nu, mu] = (nabla_mu xi)^nu
    d_eta = deta - deta.T  # d eta(X, Y) = X^mu Y^nu d_eta[mu, nu]

    if abs(b) < NORM_FLOOR:
        raise DegeneracyError("b vanishes; k is undefined")
    k_alpha = float(xi @ da) / (2.0 * b)

    def gnorm(v):
        return math.sqrt(max(float(v @ g @ v), 0.0))

    umb = [nabla_xi @ horiz[:, i] - k_alpha * horiz[:, i] for i in range(n - 1)]
    k_beta = float(np.mean([horiz[:, i] @ g @ (nabla_xi @ horiz[:, i]) for i in range(n - 1)]))
    dk = (dxi @ da + hess_a @ xi) / (2.0 * b) - k_alpha * db / b

    r_deta_hor = max(
        (abs(horiz[:, i] @ d_eta @ horiz[:, j]) for i in range(n - 1) for j in range(i + 1, n - 1)),
        default=0.0,
    )
    e = np.column_stack([xi, horiz])
    res = StructureResiduals(
        r_da=float(np.max(np.abs(horiz.T @ da))),
        r_deta_hor=float(r_deta_hor),
        r_theta=float(np.max(np.abs(b * (xi @ d_eta @ horiz) - horiz.T @ db))),
        r_umb=float(max(gnorm(u) for u in umb)),
        r_dk=float(np.max(np.abs(horiz.T @ dk))),
        r_subproj_db=float(np.max(np.abs(horiz.T @ db))),
        r_geodesic=gnorm(nabla_xi @ xi),
        r_deta_full=float(np.linalg.norm(e.T @ d_eta @ e)),
    )

    codazzi = None
    if eps is not None and eps * a > NORM_FLOOR:
        if all(eps * q.a > NORM_FLOOR for q in samples.values()):
            hs = _h_synthetic(center, eps)
            dh = st.d1(lambda q: _h_synthetic(q, eps))  # [l, m, n]
            cov = dh - np.einsum("slm,sn->lmn", gamma, hs) - np.einsum("sln,ms->lmn", gamma, hs)
            defect = cov - np.einsum("lmn->mln", cov)
            codazzi = float(np.max(np.abs(np.einsum("lmn,la,mb,nc->abc", defect, e, e, e))))

    grad_def = None
    grad = ginv @ dtau
    gn = gnorm(grad)
    if gn > 1e-8:
        grad_def = 1.0 - abs(float(grad @ g @ xi)) / gn

    return LocalStructure(
        k_alpha=k_alpha,
        k_beta=k_beta,
        residuals=res,
        codazzi=codazzi,
        grad_tau_defect=grad_def,
        horizontal=horiz,
    )


# ---------------------------------------------------------------------------
# grid analysis


@dataclass
class PointAnalysis:
    index: tuple
    params: tuple
    point: object = None
    curvature: object = None
    qc: Optional[QCDecomposition] = None
    local: Optional[LocalStructure] = None
    embedding: Optional[EmbeddingData] = None
    classification: Optional[PointClassification] = None
    xi_alignment: Optional[float] = None
    flags: tuple = ()
    error: Optional[str] = None

    @property
    def ok(self):
        return self.error is None and self.qc is not None and self.local is not None


@dataclass
class GridAnalysis:
    spec: object
    resolution: tuple
    points: list
    tolerances: Tolerances

    @property
    def valid(self):
        return [p for p in self.points if p.ok]

    @property
    def structure(self):
        return StructureResiduals.maximum(p.local.residuals for p in self.valid)

    @property
    def codazzi(self):
        vals = [p.local.codazzi for p in self.valid if p.local.codazzi is not None]
        return max(vals) if vals else None

    def _max(self, fn):
        vals = [fn(p) for p in self.valid]
        vals = [v for v in vals if v is not None]
        return max(vals) if vals else None

    @property
    def fit_residual(self):
        return self._max(lambda p: p.qc.fit_residual)

    @property
    def gauss_residual(self):
        return self._max(lambda p: p.curvature.gauss_residual)

    @property
    def weyl_ratio(self):
        return self._max(lambda p: p.curvature.weyl_ratio)

    @property
    def k_discrepancy(self):
        return self._max(lambda p: abs(p.local.k_alpha - p.local.k_beta))

    @property
    def xi_alignment_defect(self):
        return self._max(lambda p: p.xi_alignment)

    @property
    def grad_tau_defect(self):
        return self._max(lambda p: p.local.grad_tau_defect)

    @property
    def class_labels(self):
        return sorted({p.qc.class_label for p in self.valid})

    def embedding_consistency(self):
        """(center spread per generator, center error, radius error), maxima over the grid."""
        groups = {}
        for p in self.valid:
            if p.embedding is not None:
                groups.setdefault(p.index[0], []).append(p)
        spread = center_err = radius_err = 0.0
        for pts in groups.values():
            cs = np.array([p.embedding.recovered_center for p in pts])
            spread = max(spread, float(np.max(np.abs(cs - cs[0]))))
            for p in pts:
                center_err = max(center_err, float(np.max(np.abs(p.embedding.recovered_center - p.point.center))))
                radius_err = max(radius_err, abs(p.embedding.recovered_radius - p.point.radius))
        if not groups:
            return None
        return spread, center_err, radius_err


def analyze_point_full(chart, params, index=(), tol=None, b_override=None):
    """Full per-point pipeline at one chart parameter."""
    tol = tol or Tolerances()
    out = PointAnalysis(index=tuple(index), params=tuple(float(x) for x in params))
    flags = []
    try:
        p = chart.point(params, index=index)
        out.point = p
        cd = analyze_point(p)
        out.curvature = cd
        out.classification = classify_point(cd.shape_values, tol=tol.classify)
        qc = detect_qc(cd, tol)
        # orient xi along the geometric structure vector built from the center curve
        push = tangent_jets(p.jet).value.T @ qc.xi
        ref = constructed_xi(p)
        cosine = inner(push, ref, p.signature)
        if cosine < 0:
            qc = replace(qc, xi=-qc.xi)
            cosine = -cosine
        out.xi_alignment = 1.0 - min(abs(cosine), 1.0)
        if qc.spectrum[1] == 0.0 or abs(qc.spectrum[1]) < tol.constant_b:
            flags.append("zero_ricci_root")
        try:
            out.embedding = recover_embedding(p, qc, cd)
        except UsageError:
            flags.append("no_embedding_branch")
        loc = local_structure(
            chart,
            params,
            qc.xi,
            cd.christoffel,
            tol,
            b_override=b_override,
            eps=cd.eps,
        )
        if b_override is not None:
            qc = replace(qc, b=float(b_override(tuple(params), qc.b)))
        qc = replace(qc, k=loc.k_alpha, class_label=classify_qc(qc.a, loc.k_alpha, tol.class_qc))
        out.qc = qc
        out.local = loc
        if out.embedding is not None and loc.codazzi is not None:
            out.embedding = replace(out.embedding, codazzi_residual=loc.codazzi)
    except ConstantCurvature as exc:
        flags.append("constant_curvature")
        out.error = str(exc)
    except NotQC as exc:
        flags.append("not_qc")
        out.error = str(exc)
    except CanalQCError as exc:
        flags.append("degenerate")
        out.error = str(exc)
    except (np.linalg.LinAlgError, ZeroDivisionError, ValueError) as exc:
        flags.append("degenerate")
        out.error = f"{type(exc).__name__}: {exc}"
    out.flags = tuple(flags)
    return out


def analyze_grid(spec, resolution, threads=1, tol=None, b_override=None):
    """Two-phase grid analysis: per-point curvature, then stencil-based identities."""
    tol = tol or Tolerances()
    axes = grid_axes(spec, resolution)
    res = tuple(len(ax) for ax in axes)
    if min(res) < 3:
        raise UsageError("structure checks need at least 3 points per axis")
    chart = CanalChart(spec)
    indices = list(np.ndindex(*res))

    def work(idx):
        params = tuple(float(axes[i][j]) for i, j in enumerate(idx))
        return analyze_point_full(chart, params, idx, tol, b_override)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            points = list(pool.map(work, indices))
    else:
        points = [work(i) for i in indices]
    return GridAnalysis(spec=spec, resolution=res, points=points, tolerances=tol)


def structure_residuals(grid):
    return grid.structure


def codazzi_residual(grid):
    eps = -1.0 if grid.spec.ambient.is_lorentzian else 1.0
    bad = [p for p in grid.valid if eps * p.qc.a <= 0]
    if bad:
        raise UsageError(f"sign of a inconsistent with the {'Minkowski' if eps < 0 else 'Euclidean'} branch")
    return grid.codazzi


def estimate_k(grid):
    """Per-point (k via xi(a)/2b, k via the umbilicity fit, discrepancy)."""
    return [
        (p.index, p.local.k_alpha, p.local.k_beta, abs(p.local.k_alpha - p.local.k_beta))
        for p in grid.valid
    ]


@dataclass(frozen=True)
class IsometryVerdict:
    passed: bool
    max_a_defect: float
    max_b_defect: float
    max_xi_defect: float
    per_point: tuple


def xi_isometry_check(source, target, correspondence=None, differential=None, tol=1e-6):
    """Check that matched points carry equal (a, b) and matching structure vectors.

    ``correspondence`` lists ``(i, j)`` pairs of point positions in the two
    grids (default: identity); ``differential(i)`` returns the Jacobian that
    pushes chart components of the source point forward (default: identity).
    """
    sp, tp = source.points, target.points
    if correspondence is None:
        if len(sp) != len(tp):
            raise UsageError(f"grid sizes differ ({len(sp)} vs {len(tp)})")
        correspondence = [(i, i) for i in range(len(sp))]
    rows = []
    for i, j in correspondence:
        p, q = sp[i], tp[j]
        if not (p.ok and q.ok):
            continue
        jac = np.eye(len(p.qc.xi)) if differential is None else np.asarray(differential(i))
        v = jac @ p.qc.xi
        g = q.curvature.metric.g
        cos = abs(float(v @ g @ q.qc.xi)) / math.sqrt(float(v @ g @ v) * float(q.qc.xi @ g @ q.qc.xi))
        rows.append((i, j, abs(p.qc.a - q.qc.a), abs(p.qc.b - q.qc.b), 1.0 - cos))
    if not rows:
        return IsometryVerdict(False, math.inf, math.inf, math.inf, ())
    da = max(r[2] for r in rows)
    dbv = max(r[3] for r in rows)
    dx = max(r[4] for r in rows)
    return IsometryVerdict(da <= tol and dbv <= tol and dx <= tol, da, dbv, dx, tuple(rows))
