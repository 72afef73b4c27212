import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given
from hypothesis import strategies as st

from canalqc.curvature import (
    MetricJet,
    analyze_point,
    christoffel,
    extrinsic_data,
    gauss_check,
    gauss_product,
    generator_curvature,
    induced_metric,
    intrinsic_curvature_of,
    ricci_scalar_weyl,
    riemann_intrinsic,
    sectional_curvature,
    tangent_jets,
)
from canalqc.errors import DegeneracyError, UsageError
from canalqc.fixtures import demo_spec
from canalqc.numkit import Jet, Signature, sym_eigen
from canalqc.qclab import qc_pi, qc_tensor
from canalqc.shapes import (
    CanalChart,
    CanalSpec,
    Embedding,
    constructed_xi,
    eval_elliptic,
    parabolic_hypersphere_embedding,
)


def chart(fn, point, dim, sig=None):
    """Embedding whose position is ``fn`` applied to coordinate jets at ``point``."""
    vars_ = [Jet.variable(i, x, len(point)) for i, x in enumerate(point)]
    comps = fn(*vars_)
    jet = Jet.stack(
        [c if isinstance(c, Jet) else Jet.constant(float(c), len(point)) for c in comps], axis=-1
    )
    return Embedding(jet=jet, signature=sig or Signature.euclidean(dim))


def sphere(theta, phi, radius=1.0):
    return chart(
        lambda t, f: (radius * t.sin() * f.cos(), radius * t.sin() * f.sin(), radius * t.cos()),
        (theta, phi),
        3,
    )


# --- oracle: the round sphere, computed symbolically


def _sphere_oracle():
    th, ph = sp.symbols("theta phi")
    pos = sp.Matrix([sp.sin(th) * sp.cos(ph), sp.sin(th) * sp.sin(ph), sp.cos(th)])
    x = (th, ph)
    tangents = [pos.diff(v) for v in x]
    g = sp.Matrix(2, 2, lambda i, j: sp.simplify(tangents[i].dot(tangents[j])))
    ginv = g.inv()
    gam = [
        [
            [
                sp.simplify(
                    sum(
                        ginv[k, m] * (g[m, i].diff(x[j]) + g[m, j].diff(x[i]) - g[i, j].diff(x[m]))
                        for m in range(2)
                    )
                    / 2
                )
                for j in range(2)
            ]
            for i in range(2)
        ]
        for k in range(2)
    ]
    return (th, ph), g, gam


SPHERE = _sphere_oracle()


@pytest.mark.parametrize("theta, phi", [(0.7, 0.2), (1.3, -2.0), (2.2, 0.9)])
def test_sphere_against_symbolic(theta, phi):
    (th, ph), g_sym, gam_sym = SPHERE
    subs = {th: theta, ph: phi}
    m = induced_metric(sphere(theta, phi))
    assert np.allclose(m.g, np.array(g_sym.subs(subs), dtype=float), atol=1e-14)
    assert np.allclose(m.g, np.diag([1.0, math.sin(theta) ** 2]), atol=1e-14)
    gam = christoffel(m)
    ref = np.array([[[float(gam_sym[k][i][j].subs(subs)) for j in range(2)] for i in range(2)] for k in range(2)])
    assert np.allclose(gam, ref, atol=1e-12)
    assert gam[0, 1, 1] == pytest.approx(-math.sin(theta) * math.cos(theta))
    assert gam[1, 0, 1] == pytest.approx(1.0 / math.tan(theta))
    r = riemann_intrinsic(m)
    assert sectional_curvature(r, m.g, [1, 0], [0, 1]) == pytest.approx(1.0, abs=1e-12)


def test_sphere_of_radius_two():
    m, r = intrinsic_curvature_of(sphere(1.0, 0.3, radius=2.0))
    assert sectional_curvature(r, m.g, [1, 0], [0.3, 1]) == pytest.approx(0.25, abs=1e-12)


def test_flat_plane():
    emb = chart(lambda u, v: (u, v, 0.0), (0.4, -0.2), 3)
    m = induced_metric(emb)
    assert np.allclose(m.g, np.eye(2)) and not m.dg.any() and not m.ddg.any()
    assert not christoffel(m).any()
    r = riemann_intrinsic(m)
    assert not r.any()
    _, h, _, eps = extrinsic_data(emb, m)
    assert gauss_check(r, h, eps) == 0.0


def test_rank_deficient_chart():
    emb = chart(lambda u, v: (u + v, u + v, 0.0), (0.1, 0.1), 3)
    with pytest.raises(DegeneracyError):
        induced_metric(emb)


# --- oracle: graph hypersurfaces, whose curvature follows from the Hessian of f


def _graph_f(x, y, w, sin):
    return 0.3 * x * x * y + 0.5 * sin(w) * x + 0.2 * y**3 - 0.4 * w * w


@given(st.floats(-1, 1), st.floats(-1, 1), st.floats(-1, 1))
def test_graph_riemann_against_hessian_formula(x0, y0, w0):
    xs = sp.symbols("x y w")
    f = _graph_f(*xs, sp.sin)
    at = dict(zip(xs, (x0, y0, w0)))
    grad = np.array([float(f.diff(v).subs(at)) for v in xs])
    hess = np.array([[float(f.diff(a, b).subs(at)) for b in xs] for a in xs])
    expected = gauss_product(hess) / (1.0 + grad @ grad)
    emb = chart(lambda x, y, w: (x, y, w, _graph_f(x, y, w, lambda j: j.sin())), (x0, y0, w0), 4)
    m = induced_metric(emb)
    assert np.allclose(m.g, np.eye(3) + np.outer(grad, grad), atol=1e-13)
    r = riemann_intrinsic(m)
    assert np.allclose(r, expected, atol=1e-12)


def test_riemann_symmetries_and_bianchi():
    p = CanalChart(demo_spec("hyperbola_center")).point((1.02, 1.1, 1.9, 0.3))
    r = riemann_intrinsic(induced_metric(p))
    scale = np.abs(r).max()
    assert np.allclose(r, -r.transpose(1, 0, 2, 3), atol=1e-12 * scale)
    assert np.allclose(r, -r.transpose(0, 1, 3, 2), atol=1e-12 * scale)
    assert np.allclose(r, r.transpose(2, 3, 0, 1), atol=1e-12 * scale)
    bianchi = r + r.transpose(1, 2, 0, 3) + r.transpose(2, 0, 1, 3)
    assert np.abs(bianchi).max() < 1e-12 * scale


# --- extrinsic data on canal points


ELL = CanalSpec.from_strings("elliptic", ("s", "0", "0", "0", "0"), "s^2", (0.9, 1.1))


def test_elliptic_normal_example():
    p = eval_elliptic(ELL, 1.0, [0, 1, 0, 0, 0])
    nvec, _, shape, eps = extrinsic_data(p)
    assert eps == -1.0
    assert np.allclose(nvec, [2, -math.sqrt(3), 0, 0, 0], atol=1e-12)
    m = induced_metric(p)
    vals, _ = sym_eigen(shape, m.g)
    # three horizontal eigenvalues 1/R = 1, one along xi
    assert np.sum(np.isclose(vals, 1.0, atol=1e-10)) == 3


def test_round_hypersphere_is_umbilic():
    r0 = 1.7

    def pos(a, b, c, d):
        return (
            r0 * a.cos(),
            r0 * a.sin() * b.cos(),
            r0 * a.sin() * b.sin() * c.cos(),
            r0 * a.sin() * b.sin() * c.sin() * d.cos(),
            r0 * a.sin() * b.sin() * c.sin() * d.sin(),
        )

    emb = chart(pos, (0.9, 1.2, 1.4, 0.3), 5)
    _, _, shape, _ = extrinsic_data(emb)
    assert np.allclose(np.abs(shape), np.eye(4) / r0, atol=1e-12)


@pytest.mark.parametrize("name", ["elliptic", "hyperbolic", "parabolic", "euclidean", "circle_center"])
def test_gauss_equation_on_canal_points(name):
    p = CanalChart(demo_spec(name)).point((0.95, 1.2, 1.8, -0.4))
    cd = analyze_point(p)
    assert cd.gauss_residual < 1e-8
    assert np.all(np.linalg.eigvalsh(cd.metric.g) > 0)


# --- curvature contractions of synthetic quasi-constant tensors


def _random_metric(rng, n):
    b = rng.normal(size=(n, n))
    return b @ b.T + n * np.eye(n)


def _unit_xi(rng, g):
    v = rng.normal(size=g.shape[0])
    return v / math.sqrt(v @ g @ v)


def _flat_jet(g):
    n = g.shape[0]
    return MetricJet(g=g, dg=np.zeros((n, n, n)), ddg=np.zeros((n, n, n, n)))


def test_ricci_spectrum_of_synthetic_qc_tensor():
    rng = np.random.default_rng(7)
    g = _random_metric(rng, 4)
    r = qc_tensor(-1.0, 0.6, g, _unit_xi(rng, g))
    rho, tau, w = ricci_scalar_weyl(r, _flat_jet(g))
    vals = np.sort(np.linalg.eigvals(rho).real)
    assert np.allclose(vals, [-2.4, -2.4, -2.4, -1.2], atol=1e-12)
    assert tau == pytest.approx(-8.4)
    assert np.abs(w).max() < 1e-12


def test_constant_curvature_ricci():
    g = _random_metric(np.random.default_rng(3), 5)
    rho, tau, w = ricci_scalar_weyl(0.7 * qc_pi(g), _flat_jet(g))
    assert np.allclose(rho, 4 * 0.7 * np.eye(5), atol=1e-12)
    assert tau == pytest.approx(5 * 4 * 0.7)
    assert np.abs(w).max() < 1e-12


def test_weyl_skipped_in_dimension_three():
    g = np.eye(3)
    _, _, w = ricci_scalar_weyl(qc_pi(g), _flat_jet(g))
    assert w is None


@given(st.integers(0, 2**32 - 1), st.sampled_from([4, 5]))
def test_sectional_curvature_of_qc_tensor(seed, n):
    rng = np.random.default_rng(seed)
    a, b = rng.uniform(-2, 2, size=2)
    g = _random_metric(rng, n)
    xi = _unit_xi(rng, g)
    r = qc_tensor(a, b, g, xi)
    u, v = rng.normal(size=(2, n))
    # orthonormalise the plane and read off the xi component it contains
    u = u / math.sqrt(u @ g @ u)
    v = v - (u @ g @ v) * u
    v = v / math.sqrt(v @ g @ v)
    eta = g @ xi
    cos2 = (eta @ u) ** 2 + (eta @ v) ** 2
    assert sectional_curvature(r, g, u, v) == pytest.approx(a + b * cos2, abs=1e-10)


def test_degenerate_plane_rejected():
    with pytest.raises(UsageError):
        sectional_curvature(np.zeros((2, 2, 2, 2)), np.eye(2), [1, 0], [2, 0])


def test_canal_sectional_curvatures():
    # elliptic demo at s = 1 with R = 1: a = -1/R^2, b from the detected decomposition
    p = eval_elliptic(ELL, 1.0, [0, 1, 0, 0, 0])
    m = induced_metric(p)
    r = riemann_intrinsic(m)
    zd = tangent_jets(p.jet).value
    xi = np.linalg.lstsq(zd.T, constructed_xi(p), rcond=None)[0]
    xi = xi / math.sqrt(xi @ m.g @ xi)
    # a horizontal plane: two g-orthogonal vectors orthogonal to xi
    basis = np.eye(4)
    horiz = []
    for v in basis:
        v = v - (v @ m.g @ xi) * xi
        for h in horiz:
            v = v - (v @ m.g @ h) * h
        if v @ m.g @ v > 1e-8:
            horiz.append(v / math.sqrt(v @ m.g @ v))
    assert sectional_curvature(r, m.g, horiz[0], horiz[1]) == pytest.approx(-1.0, abs=1e-10)
    # planes through xi: a + b with b = (R'^2 - 1)/(R^2 (R R'' + R'^2 - 1)) = 3/5
    for h in horiz:
        assert sectional_curvature(r, m.g, xi, h) == pytest.approx(-0.4, abs=1e-10)


# --- generators


@pytest.mark.parametrize(
    "name, expected", [("elliptic", 1.0 / 3.0), ("hyperbolic", -0.2), ("parabolic", 0.0)]
)
def test_generator_curvature(name, expected):
    assert generator_curvature(demo_spec(name), 1.0) == pytest.approx(expected, abs=1e-8)


def test_parabolic_hypersphere_is_flat():
    for q, w in [(1.0, (0.2, -0.1, 0.4)), (2.5, (1.0, 0.5, -0.3))]:
        m, r = intrinsic_curvature_of(parabolic_hypersphere_embedding(q, w))
        assert np.allclose(m.g, np.eye(3), atol=1e-14)
        assert np.abs(r).max() < 1e-12
