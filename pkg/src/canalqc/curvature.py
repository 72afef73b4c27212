"""Intrinsic and extrinsic curvature of a hypersurface chart at a point.

Conventions:

* ``R[i, j, k, l] = g(R(d_i, d_j) d_k, d_l)`` with
  ``R(X, Y) = [nabla_X, nabla_Y] - nabla_[X,Y]``; the unit sphere has
  ``R(u, v, v, u) = +1`` and constant curvature ``c`` means ``R = c * pi`` with
  ``pi(X,Y,Z,U) = g(Y,Z) g(X,U) - g(X,Z) g(Y,U)``.
* Gauss decomposition ``D_{Z_i} Z_j = Gamma^k_ij Z_k + h_ij N`` with
  ``eps = <N, N>``, so ``h(x, y) = eps g(Ax, y)`` and
  ``R = eps (h(Y,Z) h(X,U) - h(X,Z) h(Y,U))``.
"""

from dataclasses import dataclass

import numpy as np

from canalqc.errors import DegeneracyError, UsageError
from canalqc.numkit import Jet, inner, sym_eigen

NORM_FLOOR = 1e-12


@dataclass(frozen=True)
class MetricJet:
    g: np.ndarray  # g[i, j]
    dg: np.ndarray  # dg[l, i, j] = d_l g_ij
    ddg: np.ndarray  # ddg[l, m, i, j] = d_l d_m g_ij

    @property
    def dim(self):
        return self.g.shape[0]

    @property
    def inverse(self):
        return np.linalg.inv(self.g)


@dataclass
class CurvatureData:
    metric: MetricJet
    christoffel: np.ndarray
    riemann: np.ndarray
    ricci_operator: np.ndarray
    scalar: float
    weyl: np.ndarray
    normal: np.ndarray
    second_ff: np.ndarray
    shape: np.ndarray
    shape_values: np.ndarray
    shape_vectors: np.ndarray
    gauss_residual: float
    weyl_ratio: float
    eps: float

    @property
    def dim(self):
        return self.metric.dim

    @property
    def shape_spectrum(self):
        return list(zip(self.shape_values, self.shape_vectors.T))


def tangent_jets(jet):
    """Jet with value shape ``(nvars, d)`` holding all first partials of ``jet``."""
    return Jet.stack([jet.diff(i) for i in range(jet.nvars)], axis=0)


def induced_metric(p):
    """First fundamental form and its first two derivative levels from the chart jet."""
    zd = tangent_jets(p.jet)
    diag = p.signature.diag
    left = Jet(zd.coeffs[:, :, None, :], zd.nvars, zd.order)
    right = Jet(zd.coeffs[:, None, :, :] * diag, zd.nvars, zd.order)
    gj = (left * right).sum(-1)
    g = gj.value.copy()
    g = 0.5 * (g + g.T)
    dg = gj.derivatives(1)
    ddg = gj.derivatives(2)
    vals = np.linalg.eigvalsh(g)
    if not vals[0] > 1e-12 * max(abs(vals[-1]), NORM_FLOOR):
        raise DegeneracyError(f"induced metric is not positive definite (eigenvalues {vals[0]:.3g}..{vals[-1]:.3g})")
    return MetricJet(g=g, dg=dg, ddg=ddg)


def _first_kind(dg):
    # Gamma_{m,jk} = 1/2 (d_j g_mk + d_k g_mj - d_m g_jk)
    return 0.5 * (
        np.einsum("jmk->mjk", dg) + np.einsum("kmj->mjk", dg) - dg
    )


def christoffel(m):
    """Gamma[k, i, j] = Gamma^k_ij of the Levi-Civita connection."""
    try:
        ginv = np.linalg.inv(m.g)
    except np.linalg.LinAlgError as exc:
        raise DegeneracyError("singular metric") from exc
    return np.einsum("km,mij->kij", ginv, _first_kind(m.dg))


def riemann_intrinsic(m):
    """Fully covariant Riemann tensor from the metric and its derivatives."""
    ginv = np.linalg.inv(m.g)
    gam1 = _first_kind(m.dg)  # [m, j, k]
    gam = np.einsum("lm,mjk->ljk", ginv, gam1)
    # d_i Gamma_{m,jk}
    dgam1 = 0.5 * (
        np.einsum("ijmk->imjk", m.ddg) + np.einsum("ikmj->imjk", m.ddg) - np.einsum("imjk->imjk", m.ddg)
    )
    dginv = -np.einsum("la,iab,bm->ilm", ginv, m.dg, ginv)
    # dgam[i, l, j, k] = d_i Gamma^l_jk
    dgam = np.einsum("ilm,mjk->iljk", dginv, gam1) + np.einsum("lm,imjk->iljk", ginv, dgam1)
    # (R(d_i, d_j) d_k)^l
    rup = (
        np.einsum("iljk->lijk", dgam)
        - np.einsum("jlik->lijk", dgam)
        + np.einsum("lim,mjk->lijk", gam, gam)
        - np.einsum("ljm,mik->lijk", gam, gam)
    )
    return np.einsum("lm,mijk->ijkl", m.g, rup)


def kulkarni_nomizu(h, k):
    """(h o k)(X,Y,Z,U) = h(Y,Z)k(X,U) + h(X,U)k(Y,Z) - h(X,Z)k(Y,U) - h(Y,U)k(X,Z)."""
    return (
        np.einsum("jk,il->ijkl", h, k)
        + np.einsum("il,jk->ijkl", h, k)
        - np.einsum("ik,jl->ijkl", h, k)
        - np.einsum("jl,ik->ijkl", h, k)
    )


def gauss_product(h):
    """h(Y,Z) h(X,U) - h(X,Z) h(Y,U); equals half the Kulkarni-Nomizu square."""
    return np.einsum("jk,il->ijkl", h, h) - np.einsum("ik,jl->ijkl", h, h)


def gauss_check(r_intrinsic, h, eps):
    """Relative Frobenius defect of the Gauss equation."""
    diff = r_intrinsic - eps * gauss_product(h)
    return float(np.linalg.norm(diff) / max(np.linalg.norm(r_intrinsic), NORM_FLOOR))


def orthonormal_frame(g):
    """Columns form a g-orthonormal basis (inverse transpose Cholesky factor)."""
    low = np.linalg.cholesky(g)
    return np.linalg.inv(low).T


def frame_components(t, e):
    """Components of a covariant tensor in the frame whose vectors are the columns of ``e``."""
    out = t
    for _ in range(t.ndim):
        out = np.tensordot(out, e, axes=([0], [0]))
    return out


def tensor_norm(t, g):
    """Norm of a covariant tensor measured with the metric."""
    return float(np.linalg.norm(frame_components(t, orthonormal_frame(g))))


def ricci_scalar_weyl(r, m, weyl=True):
    """Return ``(rho, tau, W)``; ``rho[a, k]`` is the Ricci operator acting on column vectors.

    The Weyl tensor is ``None`` below dimension 4 or when ``weyl`` is false.
    """
    g = m.g
    n = g.shape[0]
    ginv = np.linalg.inv(g)
    ric = np.einsum("il,ijkl->jk", ginv, r)
    ric = 0.5 * (ric + ric.T)
    rho = ginv @ ric
    tau = float(np.trace(rho))
    if n < 4 or not weyl:
        return rho, tau, None
    w = (
        r
        - kulkarni_nomizu(ric, g) / (n - 2)
        + tau * kulkarni_nomizu(g, g) / (2.0 * (n - 1) * (n - 2))
    )
    return rho, tau, w


def sectional_curvature(r, g, u, v):
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    g = g.g if isinstance(g, MetricJet) else np.asarray(g)
    den = (u @ g @ u) * (v @ g @ v) - (u @ g @ v) ** 2
    if den <= 1e-14 * max((u @ g @ u) * (v @ g @ v), NORM_FLOOR):
        raise UsageError("degenerate plane")
    return float(np.einsum("ijkl,i,j,k,l->", r, u, v, v, u) / den)


def unit_normal(p):
    """Unit normal, oriented as -(Z - z)/R when center data is present."""
    sig = p.signature
    zd = tangent_jets(p.jet).value  # [mu, a]
    rows = zd * sig.diag
    _, svals, vt = np.linalg.svd(rows)
    if svals[-1] < 1e-12 * max(svals[0], NORM_FLOOR):
        raise DegeneracyError("tangent map is rank deficient")
    nvec = vt[-1]
    q = inner(nvec, nvec, sig)
    if abs(q) < 1e-12:
        raise DegeneracyError("normal is lightlike")
    nvec = nvec / np.sqrt(abs(q))
    center = getattr(p, "center", None)
    radius = getattr(p, "radius", None)
    if center is not None and radius is not None:
        ref = -(p.jet.value - center) / radius
        if float(np.dot(nvec, ref)) < 0:
            nvec = -nvec
    else:
        nz = np.flatnonzero(np.abs(nvec) > 1e-12 * np.abs(nvec).max())
        if nvec[nz[0]] < 0:
            nvec = -nvec
    return nvec, (1.0 if q > 0 else -1.0)


def extrinsic_data(p, m=None):
    """(N, h, A) at a chart point; ``A[k, i]`` acts on column vectors."""
    if m is None:
        m = induced_metric(p)
    nvec, eps = unit_normal(p)
    second = p.jet.derivatives(2)  # [i, j, a]
    h = eps * np.einsum("ija,a->ij", second, nvec * p.signature.diag)
    h = 0.5 * (h + h.T)
    shape = eps * np.linalg.solve(m.g, h)
    return nvec, h, shape, eps


def analyze_point(p):
    """Full CurvatureData bundle at a chart point."""
    m = induced_metric(p)
    gam = christoffel(m)
    r = riemann_intrinsic(m)
    rho, tau, w = ricci_scalar_weyl(r, m)
    nvec, h, shape, eps = extrinsic_data(p, m)
    vals, vecs = sym_eigen(shape, m.g)
    rnorm = tensor_norm(r, m.g)
    wratio = float("nan") if w is None else tensor_norm(w, m.g) / max(rnorm, NORM_FLOOR)
    return CurvatureData(
        metric=m,
        christoffel=gam,
        riemann=r,
        ricci_operator=rho,
        scalar=tau,
        weyl=w,
        normal=nvec,
        second_ff=h,
        shape=shape,
        shape_values=vals,
        shape_vectors=vecs,
        gauss_residual=gauss_check(r, h, eps),
        weyl_ratio=wratio,
        eps=eps,
    )


def generator_metric_point(p):
    """The generator through ``p`` (chart with ``s`` frozen) as a chart of its own."""
    from canalqc.shapes import Embedding

    keep = tuple(range(1, p.jet.nvars))
    return Embedding(jet=p.jet.restrict(keep), signature=p.signature)


def intrinsic_curvature_of(emb):
    """(MetricJet, Riemann) of any chart, without extrinsic data."""
    m = induced_metric(emb)
    return m, riemann_intrinsic(m)


def generator_curvature(spec, s, coords=None):
    """Sectional curvature of the spherical generator at parameter ``s``.

    Evaluated on every coordinate 2-plane of the generator chart; returns the
    mean, and raises DegeneracyError if the planes disagree (the generator
    must have constant curvature).
    """
    from canalqc.shapes import CanalChart

    chart = CanalChart(spec, s_ref=s)
    if coords is None:
        coords = tuple(0.5 * (lo + hi) for lo, hi in spec.ranges())
    p = chart.point((s,) + tuple(coords))
    gm, r = intrinsic_curvature_of(generator_metric_point(p))
    k = gm.dim
    if k < 2:
        raise UsageError("generator must have dimension at least 2")
    eye = np.eye(k)
    ks = [sectional_curvature(r, gm.g, eye[i], eye[j]) for i in range(k) for j in range(i + 1, k)]
    spread = max(ks) - min(ks)
    if spread > 1e-8 * max(1.0, max(abs(x) for x in ks)):
        raise DegeneracyError(f"generator curvature is not constant (spread {spread:.3g})")
    return float(np.mean(ks))
