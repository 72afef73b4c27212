"""Signature-aware linear algebra and truncated Taylor (jet) arithmetic.

Everything geometric in the package sits on two primitives defined here:

* :class:`Signature` and the helpers around it (:func:`inner`, frames) for
  Euclidean space and Minkowski space with the time axis at index 0;
* :class:`Jet`, a dense truncated multivariate Taylor expansion. Arithmetic on
  jets is exact truncation, so partial derivatives of composed maps come out
  without any finite-difference error.

Jets carry an optional trailing shape, so a point map ``R^v -> R^d`` is a
single jet whose coefficient array has shape ``(L, d)``.
"""

import functools
import itertools
import math
from dataclasses import dataclass

import numpy as np

from canalqc.errors import DegeneracyError, UsageError

ORDER = 3

LIGHTLIKE_TOL = 1e-10
PIVOT_TOL = 1e-10


@dataclass(frozen=True)
class Signature:
    total_dim: int
    time_axes: frozenset = frozenset()

    def __post_init__(self):
        if self.total_dim < 1:
            raise UsageError("total_dim must be positive")
        object.__setattr__(self, "time_axes", frozenset(self.time_axes))
        if any(i < 0 or i >= self.total_dim for i in self.time_axes):
            raise UsageError(f"time axes {sorted(self.time_axes)} out of range")

    @classmethod
    def euclidean(cls, dim):
        return cls(dim)

    @classmethod
    def minkowski(cls, dim):
        return cls(dim, frozenset({0}))

    @property
    def is_lorentzian(self):
        return len(self.time_axes) == 1

    @property
    def diag(self):
        d = np.ones(self.total_dim)
        for i in self.time_axes:
            d[i] = -1.0
        return d

    @property
    def name(self):
        return "minkowski" if self.is_lorentzian else "euclidean"


# ---------------------------------------------------------------------------
# jets


@functools.lru_cache(maxsize=None)
def monomials(nvars, order):
    """Multi-indices of total degree <= order, graded then lexicographic."""
    out = []
    for deg in range(order + 1):
        for combo in itertools.combinations_with_replacement(range(nvars), deg):
            alpha = [0] * nvars
            for v in combo:
                alpha[v] += 1
            out.append(tuple(alpha))
    return tuple(out)


class _Tables:
    def __init__(self, nvars, order):
        monos = monomials(nvars, order)
        self.monos = monos
        self.index = {m: i for i, m in enumerate(monos)}
        self.size = len(monos)
        degs = [sum(m) for m in monos]
        ii, jj, kk = [], [], []
        for i, a in enumerate(monos):
            for j, b in enumerate(monos):
                if degs[i] + degs[j] <= order:
                    ii.append(i)
                    jj.append(j)
                    kk.append(self.index[tuple(x + y for x, y in zip(a, b))])
        # product pairs sorted by target monomial, so a product is one reduceat
        perm = np.argsort(np.array(kk), kind="stable")
        self.ii = np.array(ii)[perm]
        self.jj = np.array(jj)[perm]
        kk = np.array(kk)[perm]
        self.starts = np.flatnonzero(np.r_[True, kk[1:] != kk[:-1]])
        self.factorial = np.array(
            [math.prod(math.factorial(x) for x in m) for m in monos], dtype=float
        )


@functools.lru_cache(maxsize=None)
def _tables(nvars, order):
    return _Tables(nvars, order)


@functools.lru_cache(maxsize=None)
def _diff_map(nvars, order, var):
    # coefficient of beta in d/dx_var is (beta_var + 1) * c[beta + e_var]
    src, fac = [], []
    hi = _tables(nvars, order).index
    for beta in monomials(nvars, order - 1):
        up = list(beta)
        up[var] += 1
        src.append(hi[tuple(up)])
        fac.append(beta[var] + 1.0)
    return np.array(src), np.array(fac)


@functools.lru_cache(maxsize=None)
def _derivative_map(nvars, order, k):
    # all ordered k-tuples of variables -> (monomial index, multinomial factor)
    tab = _tables(nvars, order)
    idx, fac = [], []
    for tup in itertools.product(range(nvars), repeat=k):
        alpha = [0] * nvars
        for v in tup:
            alpha[v] += 1
        alpha = tuple(alpha)
        idx.append(tab.index[alpha])
        fac.append(math.prod(math.factorial(x) for x in alpha))
    return np.array(idx), np.array(fac, dtype=float)


def _pad(c, ndim):
    """Insert unit axes after the coefficient axis so the value rank is ``ndim``."""
    extra = ndim - (c.ndim - 1)
    if extra <= 0:
        return c
    return c.reshape(c.shape[:1] + (1,) * extra + c.shape[1:])


def _align(a, b):
    nd = max(a.ndim, b.ndim) - 1
    return _pad(a, nd), _pad(b, nd)


def _falling(p, k):
    out = 1.0
    for i in range(k):
        out *= p - i
    return out


class Jet:
    """Truncated Taylor expansion of a (possibly array-valued) map at a point.

    ``coeffs[i]`` is the Taylor coefficient ``f^(alpha)/alpha!`` for the i-th
    monomial of :func:`monomials` (``nvars``, ``order``); trailing axes of
    ``coeffs`` are the value shape.
    """

    __slots__ = ("coeffs", "nvars", "order")
    __array_ufunc__ = None

    def __init__(self, coeffs, nvars, order=ORDER):
        coeffs = np.asarray(coeffs, dtype=float)
        if coeffs.shape[0] != _tables(nvars, order).size:
            raise UsageError(
                f"expected {_tables(nvars, order).size} coefficients for "
                f"{nvars} variables at order {order}, got {coeffs.shape[0]}"
            )
        self.coeffs = coeffs
        self.nvars = nvars
        self.order = order

    @classmethod
    def constant(cls, value, nvars, order=ORDER):
        value = np.asarray(value, dtype=float)
        c = np.zeros((_tables(nvars, order).size,) + value.shape)
        c[0] = value
        return cls(c, nvars, order)

    @classmethod
    def variable(cls, index, value, nvars, order=ORDER):
        c = np.zeros(_tables(nvars, order).size)
        c[0] = value
        if order >= 1:
            c[1 + index] = 1.0
        return cls(c, nvars, order)

    @classmethod
    def stack(cls, jets, axis=0):
        jets = list(jets)
        first = jets[0]
        for j in jets[1:]:
            first._check(j)
        ax = axis if axis < 0 else axis + 1
        return cls(np.stack([j.coeffs for j in jets], axis=ax), first.nvars, first.order)

    # -- basic accessors
    @property
    def shape(self):
        return self.coeffs.shape[1:]

    @property
    def value(self):
        return self.coeffs[0]

    def __repr__(self):
        return f"Jet(nvars={self.nvars}, order={self.order}, value={self.value!r})"

    def __getitem__(self, key):
        if not isinstance(key, tuple):
            key = (key,)
        return Jet(self.coeffs[(slice(None),) + key], self.nvars, self.order)

    def __len__(self):
        return self.coeffs.shape[1]

    def __iter__(self):
        for i in range(len(self)):
            yield self[i]

    def sum(self, axis=-1):
        ax = axis if axis < 0 else axis + 1
        return Jet(self.coeffs.sum(axis=ax), self.nvars, self.order)

    # -- arithmetic
    def _check(self, other):
        if other.nvars != self.nvars or other.order != self.order:
            raise UsageError(
                f"jet mismatch: ({self.nvars}, {self.order}) vs ({other.nvars}, {other.order})"
            )

    def _lift(self, other):
        if isinstance(other, Jet):
            self._check(other)
            return other.coeffs
        c = np.zeros((self.coeffs.shape[0],) + np.shape(other))
        c[0] = other
        return c

    def _new(self, coeffs):
        return Jet(coeffs, self.nvars, self.order)

    def __add__(self, other):
        a, b = _align(self.coeffs, self._lift(other))
        return self._new(a + b)

    __radd__ = __add__

    def __sub__(self, other):
        a, b = _align(self.coeffs, self._lift(other))
        return self._new(a - b)

    def __rsub__(self, other):
        a, b = _align(self.coeffs, self._lift(other))
        return self._new(b - a)

    def __neg__(self):
        return self._new(-self.coeffs)

    def __pos__(self):
        return self

    def __mul__(self, other):
        if not isinstance(other, Jet):
            other = np.asarray(other, dtype=float)
            return self._new(_pad(self.coeffs, other.ndim) * other)
        self._check(other)
        tab = _tables(self.nvars, self.order)
        a, b = _align(self.coeffs, other.coeffs)
        return self._new(np.add.reduceat(a[tab.ii] * b[tab.jj], tab.starts, axis=0))

    __rmul__ = __mul__

    def __truediv__(self, other):
        if not isinstance(other, Jet):
            other = np.asarray(other, dtype=float)
            return self._new(_pad(self.coeffs, other.ndim) / other)
        return self * other.reciprocal()

    def __rtruediv__(self, other):
        return self.reciprocal() * other

    def __pow__(self, p):
        if isinstance(p, (int, np.integer)):
            if p < 0:
                return self.reciprocal() ** (-p)
            out = Jet.constant(np.ones(self.shape), self.nvars, self.order)
            base = self
            while p:
                if p & 1:
                    out = out * base
                p >>= 1
                if p:
                    base = base * base
            return out
        return self.power(float(p))

    # -- elementary functions
    def _compose(self, derivs):
        """f(self) given [f(x0), f'(x0), ..., f^(order)(x0)] at x0 = self.value."""
        delta = Jet(self.coeffs.copy(), self.nvars, self.order)
        delta.coeffs[0] = 0.0
        out = np.zeros_like(self.coeffs)
        out[0] = derivs[0]
        term = delta
        for k in range(1, self.order + 1):
            out = out + term.coeffs * (derivs[k] / math.factorial(k))
            if k < self.order:
                term = term * delta
        return Jet(out, self.nvars, self.order)

    def sin(self):
        x = self.value
        cyc = [np.sin(x), np.cos(x), -np.sin(x), -np.cos(x)]
        return self._compose([cyc[k % 4] for k in range(self.order + 1)])

    def cos(self):
        x = self.value
        cyc = [np.cos(x), -np.sin(x), -np.cos(x), np.sin(x)]
        return self._compose([cyc[k % 4] for k in range(self.order + 1)])

    def sinh(self):
        x = self.value
        cyc = [np.sinh(x), np.cosh(x)]
        return self._compose([cyc[k % 2] for k in range(self.order + 1)])

    def cosh(self):
        x = self.value
        cyc = [np.cosh(x), np.sinh(x)]
        return self._compose([cyc[k % 2] for k in range(self.order + 1)])

    def exp(self):
        e = np.exp(self.value)
        return self._compose([e] * (self.order + 1))

    def log(self):
        x = self.value
        if np.any(x <= 0):
            raise ValueError("log of non-positive jet")
        d = [np.log(x)]
        for k in range(1, self.order + 1):
            d.append((-1) ** (k - 1) * math.factorial(k - 1) / x**k)
        return self._compose(d)

    def power(self, p):
        """Real power ``self**p``; needs a positive base unless p is a whole number."""
        x = self.value
        if float(p).is_integer() and p >= 0:
            return self ** int(p)
        if np.any(x <= 0) and not float(p).is_integer():
            raise ValueError("non-integer power of non-positive jet")
        if np.any(x == 0):
            raise ValueError("negative power of zero")
        return self._compose([_falling(p, k) * x ** (p - k) for k in range(self.order + 1)])

    def sqrt(self):
        return self.power(0.5)

    def reciprocal(self):
        if np.any(self.value == 0):
            raise ZeroDivisionError("reciprocal of a jet with zero value")
        return self.power(-1.0)

    # -- derivatives and re-embedding
    def diff(self, var):
        """Jet of one lower order for the partial derivative along ``var``."""
        if self.order == 0:
            raise UsageError("cannot differentiate an order-0 jet")
        src, fac = _diff_map(self.nvars, self.order, var)
        c = self.coeffs[src] * fac.reshape((-1,) + (1,) * len(self.shape))
        return Jet(c, self.nvars, self.order - 1)

    def derivatives(self, k):
        """Array of all k-th partial derivatives, shape ``(nvars,)*k + self.shape``."""
        if k > self.order:
            raise UsageError(f"order-{self.order} jet has no derivatives of order {k}")
        idx, fac = _derivative_map(self.nvars, self.order, k)
        vals = self.coeffs[idx] * fac.reshape((-1,) + (1,) * len(self.shape))
        return vals.reshape((self.nvars,) * k + self.shape)

    def truncate(self, order):
        if order > self.order:
            raise UsageError("cannot raise jet order by truncation")
        n = _tables(self.nvars, order).size
        return Jet(self.coeffs[:n].copy(), self.nvars, order)

    def restrict(self, keep):
        """Restrict to the affine slice where only the variables ``keep`` move."""
        keep = tuple(keep)
        tab = _tables(self.nvars, self.order)
        rows = []
        for beta in monomials(len(keep), self.order):
            alpha = [0] * self.nvars
            for pos, v in enumerate(keep):
                alpha[v] = beta[pos]
            rows.append(tab.index[tuple(alpha)])
        return Jet(self.coeffs[rows], len(keep), self.order)

    def embed(self, nvars, var):
        """Lift a univariate jet into ``nvars`` variables along variable ``var``."""
        if self.nvars != 1:
            raise UsageError("embed needs a univariate jet")
        tab = _tables(nvars, self.order)
        c = np.zeros((tab.size,) + self.shape)
        for k in range(self.order + 1):
            alpha = [0] * nvars
            alpha[var] = k
            c[tab.index[tuple(alpha)]] = self.coeffs[k]
        return Jet(c, nvars, self.order)


def is_jet(x):
    return isinstance(x, Jet)


def value_of(x):
    return x.value if isinstance(x, Jet) else np.asarray(x, dtype=float)


def _sqrt(x):
    return x.sqrt() if isinstance(x, Jet) else math.sqrt(float(x))


# ---------------------------------------------------------------------------
# signature-aware vectors


def inner(u, v, sig):
    """Pseudo-Euclidean inner product; accepts arrays or vector-valued jets."""
    if not isinstance(u, Jet):
        u = np.asarray(u, dtype=float)
    if not isinstance(v, Jet):
        v = np.asarray(v, dtype=float)
    du = u.shape[-1] if u.shape else 0
    dv = v.shape[-1] if v.shape else 0
    if du != sig.total_dim or dv != sig.total_dim:
        raise UsageError(f"dimension mismatch: {du}, {dv} vs signature {sig.total_dim}")
    if isinstance(v, Jet) and not isinstance(u, Jet):
        u, v = v, u
    if isinstance(u, Jet):
        return (u * (v * sig.diag)).sum(-1)
    return float(np.dot(u * sig.diag, v))


def causal_character(v, sig, tol=LIGHTLIKE_TOL):
    v = value_of(v)
    scale = float(np.dot(v, v))
    if scale == 0.0:
        raise UsageError("causal character of the zero vector is undefined")
    q = inner(v, v, sig)
    if abs(q) <= tol * scale:
        return "lightlike"
    return "timelike" if q < 0 else "spacelike"


def _basis(d, i):
    e = np.zeros(d)
    e[i] = 1.0
    return e


def _complete(project, sig, wanted, pivots):
    """Gram-Schmidt over canonical basis vectors after applying ``project``.

    With ``pivots=None`` the canonical basis is scanned in order and vectors
    whose residual norm falls below PIVOT_TOL are skipped; otherwise exactly
    the given basis indices are used (so a chart can freeze its choice).
    """
    d = sig.total_dim
    frame, norms, used = [], [], []
    candidates = range(d) if pivots is None else pivots
    for i in candidates:
        r = project(_basis(d, i))
        for f, eps in zip(frame, norms):
            r = r - f * (inner(r, f, sig) * eps)
        # second pass: a nearly dependent candidate loses relative accuracy in the first
        size = math.sqrt(abs(float(value_of(inner(r, r, sig))))) + float(np.abs(value_of(r)).max())
        if size > PIVOT_TOL:
            r = project(r / size)
            for f, eps in zip(frame, norms):
                r = r - f * (inner(r, f, sig) * eps)
            r = r * size
        q = inner(r, r, sig)
        qv = float(value_of(q))
        if abs(qv) < PIVOT_TOL**2:
            if pivots is not None:
                raise DegeneracyError(f"frozen pivot e{i} became degenerate")
            continue
        eps = 1.0 if qv > 0 else -1.0
        frame.append(r / _sqrt(q * eps))
        norms.append(eps)
        used.append(i)
        if len(frame) == wanted:
            break
    if len(frame) != wanted:
        raise DegeneracyError(f"could only build {len(frame)} of {wanted} frame vectors")
    return frame, norms, tuple(used)


def orthonormal_complement_frame(t, sig, pivots=None, with_pivots=False):
    """Orthonormal frame of the orthogonal complement of a non-null vector ``t``.

    Works on plain arrays or on vector jets (then each frame vector is a jet
    and the frame is differentiable in the jet variables).
    """
    t = t if isinstance(t, Jet) else np.asarray(t, dtype=float)
    if causal_character(t, sig) == "lightlike":
        raise UsageError("t is lightlike; use pseudo_null_frame")
    tt = inner(t, t, sig)

    def project(b):
        return b - t * (inner(b, t, sig) / tt)

    frame, _, used = _complete(project, sig, sig.total_dim - 1, pivots)
    return (frame, used) if with_pivots else frame


def pseudo_null_frame(t, sig, pivots=None, with_pivots=False):
    """Null partner ``m`` with <t, m> = -1 and a spacelike frame orthogonal to both."""
    if not sig.is_lorentzian:
        raise UsageError("pseudo-null frames need a Lorentzian signature")
    t = t if isinstance(t, Jet) else np.asarray(t, dtype=float)
    if causal_character(t, sig) != "lightlike":
        raise UsageError("t is not lightlike")
    flip = -sig.diag  # +1 on the time axis, -1 on space axes
    m_raw = t * flip
    m = m_raw / (-inner(t, m_raw, sig))

    def project(b):
        return b + t * inner(b, m, sig) + m * inner(b, t, sig)

    frame, norms, used = _complete(project, sig, sig.total_dim - 2, pivots)
    if any(eps < 0 for eps in norms):
        raise DegeneracyError("pseudo-null complement is not spacelike")
    return (m, frame, used) if with_pivots else (m, frame)


# ---------------------------------------------------------------------------
# eigen-decomposition


def jacobi_eigh(a, tol=1e-13, max_sweeps=100):
    """Cyclic Jacobi eigen-decomposition of a real symmetric matrix.

    Returns unsorted eigenvalues and the matrix of eigenvectors (columns).
    """
    a = np.array(a, dtype=float)
    n = a.shape[0]
    v = np.eye(n)
    scale = max(np.linalg.norm(a), np.finfo(float).tiny)
    for _ in range(max_sweeps):
        off = np.linalg.norm(a - np.diag(np.diag(a)))
        if off <= tol * scale:
            return np.diag(a).copy(), v
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                diff = a[q, q] - a[p, p]
                if abs(apq) < 1e-150 * abs(diff):
                    t = apq / diff
                else:
                    theta = diff / (2.0 * apq)
                    t = math.copysign(1.0, theta) / (abs(theta) + math.hypot(theta, 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                ap = a[:, p].copy()
                aq = a[:, q].copy()
                a[:, p] = c * ap - s * aq
                a[:, q] = s * ap + c * aq
                ap = a[p, :].copy()
                aq = a[q, :].copy()
                a[p, :] = c * ap - s * aq
                a[q, :] = s * ap + c * aq
                vp = v[:, p].copy()
                vq = v[:, q].copy()
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq
    raise DegeneracyError(f"Jacobi iteration did not converge in {max_sweeps} sweeps")


def canonical_sign(v):
    """Flip ``v`` so that its first largest-magnitude component is positive."""
    v = np.asarray(v, dtype=float)
    i = int(np.argmax(np.abs(v)))
    return -v if v[i] < 0 else v


def sym_eigen(op, metric=None):
    """Spectrum of an operator that is self-adjoint w.r.t. a positive-definite metric.

    ``op[k, i]`` acts on column vectors. Returns ascending eigenvalues and
    g-orthonormal eigenvectors as columns, each sign-canonicalised.
    """
    op = np.asarray(op, dtype=float)
    n = op.shape[0]
    g = np.eye(n) if metric is None else np.asarray(metric, dtype=float)
    ga = g @ op
    scale = max(np.abs(ga).max(), np.finfo(float).tiny)
    if np.abs(ga - ga.T).max() > 1e-12 * scale:
        raise UsageError("operator is not self-adjoint with respect to the metric")
    try:
        low = np.linalg.cholesky(g)
    except np.linalg.LinAlgError as exc:
        raise UsageError("metric is not positive definite") from exc
    linv = np.linalg.inv(low)
    c = linv @ ga @ linv.T
    c = 0.5 * (c + c.T)
    vals, q = jacobi_eigh(c)
    order = np.argsort(vals, kind="stable")
    vals = vals[order]
    vecs = linv.T @ q[:, order]
    for j in range(n):
        vecs[:, j] = canonical_sign(vecs[:, j])
    return vals, vecs
