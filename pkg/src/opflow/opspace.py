"""Operator-space algebra: Hilbert–Schmidt geometry, superoperators and
positive-semi-definite operator metrics.

Operators are plain complex :class:`numpy.ndarray` square matrices.  A
*superoperator* is a linear map on operator space, stored as a sum of
left/right multiplication factor pairs ``A -> sum_i L_i A R_i`` with an
optional dense ``dim^2 x dim^2`` matrix in the row-major vectorization
convention ``vec(A)[d*n + m] = A[n, m]`` (so the dense matrix of
``A -> L A R`` is ``kron(L, R.T)``).

An :class:`OperatorMetric` P defines the (possibly degenerate) inner product

    (A|B) = <A, P B>_HS = Tr(A^dag P B),

whose kernel is quotiented away by projecting onto the image of P (the
"effective" element).  Metrics built from a density-matrix pair, from a Gibbs
state or from the Kubo (Mori) weights all commute with the Liouvillian of the
Hamiltonian that generated them, which is what makes the spectral form of the
speed limit available.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

__all__ = [
    "as_operator",
    "is_hermitian",
    "hs_inner",
    "hs_norm",
    "commutator",
    "vectorize",
    "unvectorize",
    "SuperOp",
    "identity_superop",
    "liouvillian",
    "super_liouvillian",
    "EffectiveElement",
    "OperatorMetric",
    "hs_metric",
    "metric_from_rho",
    "gibbs_metric",
    "kubo_metric",
    "p_inner",
    "seminorm",
    "effective_project",
    "PAULI_X",
    "PAULI_Y",
    "PAULI_Z",
    "PAULI_I",
]

#: Relative tolerance for Hermiticity / PSD predicates.
HERMITICITY_TOL = 1e-10

#: A matrix is accepted as PSD when its smallest eigenvalue is above
#: ``-PSD_TOL`` times its spectral radius.
PSD_TOL = 1e-10

#: Metric eigenvalues below ``KERNEL_TOL_FACTOR`` times the largest eigenvalue
#: are treated as exact kernel directions.
KERNEL_TOL_FACTOR = 1e-12

#: Largest Hilbert-space dimension for which superoperators are densified
#: without an explicit override.
DENSE_DIM_LIMIT = 12

PAULI_I = np.eye(2, dtype=complex)
PAULI_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
PAULI_Y = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex)
PAULI_Z = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)


# ---------------------------------------------------------------------------
# operator helpers
# ---------------------------------------------------------------------------

def as_operator(a, dim: int | None = None) -> np.ndarray:
    """Coerce ``a`` to a square complex array, optionally checking its size."""
    a = np.asarray(a, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"operator must be a square matrix, got shape {a.shape}")
    if dim is not None and a.shape[0] != dim:
        raise ValueError(f"operator has dimension {a.shape[0]}, expected {dim}")
    return a


def is_hermitian(a, tol: float = HERMITICITY_TOL) -> bool:
    """True when ``a`` equals its adjoint up to ``tol`` (relative)."""
    a = np.asarray(a)
    scale = max(np.abs(a).max(), 1.0)
    return bool(np.abs(a - a.conj().T).max() <= tol * scale)


def hs_inner(a, b) -> complex:
    """Hilbert–Schmidt inner product ``Tr(a^dag b)``, antilinear in ``a``."""
    return complex(np.vdot(np.asarray(a), np.asarray(b)))


def hs_norm(a) -> float:
    """Hilbert–Schmidt (Frobenius) norm."""
    return float(np.linalg.norm(np.asarray(a)))


def commutator(a, b) -> np.ndarray:
    return a @ b - b @ a


def vectorize(a) -> np.ndarray:
    """Row-major vectorization of ``a`` normalized to unit 2-norm.

    Raises
    ------
    ValueError
        If ``a`` is the zero operator.
    """
    v = np.asarray(a, dtype=complex).reshape(-1)
    n = np.linalg.norm(v)
    if n == 0.0:
        raise ValueError("cannot normalize the zero operator")
    return v / n


def unvectorize(v, dim: int) -> np.ndarray:
    """Inverse of row-major vectorization (no normalization)."""
    v = np.asarray(v, dtype=complex)
    if v.size != dim * dim:
        raise ValueError(f"vector of length {v.size} is not dim^2 = {dim * dim}")
    return v.reshape(dim, dim)


def _check_psd(rho: np.ndarray, what: str) -> None:
    if not is_hermitian(rho):
        raise ValueError(f"{what} must be Hermitian")
    w = np.linalg.eigvalsh(rho)
    radius = max(np.abs(w).max(), np.finfo(float).tiny)
    if w.min() < -PSD_TOL * radius:
        raise ValueError(
            f"{what} is not positive semi-definite "
            f"(min eigenvalue {w.min():.3e}, radius {radius:.3e})"
        )


# ---------------------------------------------------------------------------
# superoperators
# ---------------------------------------------------------------------------

class SuperOp:
    """Linear map on ``dim x dim`` operators.

    Parameters
    ----------
    dim : int
        Hilbert-space dimension the map acts on.
    pairs : sequence of (L, R) arrays, optional
        Factor pairs; the map is ``A -> sum_i L_i A R_i``.
    dense : ndarray, optional
        Dense ``dim^2 x dim^2`` matrix in the row-major convention.  At least
        one of ``pairs`` / ``dense`` must be given.
    """

    def __init__(self, dim: int, pairs=None, dense=None, name: str = ""):
        self.dim = int(dim)
        self.name = name
        if pairs is None and dense is None:
            raise ValueError("need factor pairs or a dense matrix")
        self.pairs = None
        if pairs is not None:
            self.pairs = [
                (as_operator(l, dim), as_operator(r, dim)) for (l, r) in pairs
            ]
        self._dense = None
        if dense is not None:
            dense = np.asarray(dense, dtype=complex)
            if dense.shape != (dim * dim, dim * dim):
                raise ValueError(
                    f"dense superoperator must be {dim**2} x {dim**2}, "
                    f"got {dense.shape}"
                )
            self._dense = dense

    @classmethod
    def from_dense(cls, dense, name: str = "") -> "SuperOp":
        dense = np.asarray(dense, dtype=complex)
        dim = int(round(np.sqrt(dense.shape[0])))
        return cls(dim, dense=dense, name=name)

    def apply(self, a) -> np.ndarray:
        """Apply the map to an operator."""
        a = as_operator(a, self.dim)
        if self.pairs is not None:
            out = np.zeros_like(a)
            for l, r in self.pairs:
                out += l @ a @ r
            return out
        return unvectorize(self._dense @ a.reshape(-1), self.dim)

    __call__ = apply

    def dense(self, max_dim: int | None = DENSE_DIM_LIMIT) -> np.ndarray:
        """Dense matrix in the row-major convention.

        Guarded by ``max_dim`` (pass ``None`` to force densification of a
        large map; the matrix has ``dim^4`` entries).
        """
        if self._dense is None:
            if max_dim is not None and self.dim > max_dim:
                raise ValueError(
                    f"refusing to densify a dim={self.dim} superoperator "
                    f"({self.dim**4} entries); pass max_dim=None to override"
                )
            acc = np.zeros((self.dim**2, self.dim**2), dtype=complex)
            for l, r in self.pairs:
                acc += np.kron(l, r.T)
            self._dense = acc
        return self._dense

    def is_hermitian(self, tol: float = HERMITICITY_TOL) -> bool:
        """Hermiticity w.r.t. the HS inner product (dense adjoint)."""
        d = self.dense()
        return is_hermitian(d, tol)

    def __repr__(self) -> str:  # pragma: no cover - debugging aid
        kind = "dense" if self.pairs is None else f"{len(self.pairs)} pairs"
        label = f" {self.name!r}" if self.name else ""
        return f"<SuperOp{label} dim={self.dim} ({kind})>"


def identity_superop(dim: int) -> SuperOp:
    eye = np.eye(dim, dtype=complex)
    return SuperOp(dim, pairs=[(eye, eye)], name="identity")


def liouvillian(h) -> SuperOp:
    """Commutator map ``A -> [h, A]`` as a superoperator."""
    h = as_operator(h)
    eye = np.eye(h.shape[0], dtype=complex)
    return SuperOp(h.shape[0], pairs=[(h, eye), (-eye, h)], name="liouvillian")


def super_liouvillian(l: SuperOp | np.ndarray) -> SuperOp:
    """Commutator-with-``l`` map acting one level up, on superoperators.

    ``l`` may be a :class:`SuperOp` (densified first) or a plain matrix such
    as the tridiagonal Liouvillian of a Krylov chain; the result is the
    commutator map on that matrix space, representable densely for spectral
    analysis.
    """
    if isinstance(l, SuperOp):
        l = l.dense()
    return liouvillian(l)


# ---------------------------------------------------------------------------
# metrics
# ---------------------------------------------------------------------------

@dataclass
class EffectiveElement:
    """An operator with its kernel component removed.

    Attributes
    ----------
    projection : ndarray
        Component of ``source`` in the image of the metric.
    source : ndarray
        The original operator.
    """

    projection: np.ndarray
    source: np.ndarray


class OperatorMetric:
    """PSD superoperator P defining ``(a|b) = <a, P b>_HS``.

    The eigensystem (``eigvals``, ``eigvecs`` with eigenvectors as columns of
    a ``dim^2 x dim^2`` unitary, row-major convention) is either supplied by a
    structured constructor or computed lazily from the dense matrix.  Kernel
    directions are those with eigenvalue below ``kernel_tol``.
    """

    def __init__(
        self,
        p: SuperOp,
        eigen_system: tuple[np.ndarray, np.ndarray] | None = None,
        kernel_tol_factor: float = KERNEL_TOL_FACTOR,
        center=None,
        apply_fn=None,
        name: str = "",
    ):
        self.p = p
        self.dim = p.dim
        self.name = name or p.name
        self.kernel_tol_factor = float(kernel_tol_factor)
        self._apply_fn = apply_fn
        self._eig = None
        if eigen_system is not None:
            vals = np.asarray(eigen_system[0], dtype=float)
            vecs = np.asarray(eigen_system[1], dtype=complex)
            self._eig = (vals, vecs)
        self._center = center
        self._clusters = None

    # -- basic maps ---------------------------------------------------------

    def apply(self, a) -> np.ndarray:
        """P applied to an operator."""
        if self._apply_fn is not None:
            return self._apply_fn(as_operator(a, self.dim))
        return self.p.apply(a)

    def inner(self, a, b) -> complex:
        """The metric inner product ``(a|b) = <a, P b>_HS``."""
        return hs_inner(a, self.apply(b))

    def seminorm(self, a) -> float:
        """Seminorm ``sqrt((a|a))``; checks the value is numerically real."""
        val = self.inner(a, a)
        scale = max(abs(val), 1.0)
        if abs(val.imag) > 1e-10 * scale:
            raise ValueError(f"(a|a) has imaginary part {val.imag:.3e}")
        return float(np.sqrt(max(val.real, 0.0)))

    def center(self, a) -> np.ndarray:
        """Centering map attached to the metric (identity unless set)."""
        if self._center is None:
            return as_operator(a, self.dim)
        return self._center(as_operator(a, self.dim))

    # -- spectral structure -------------------------------------------------

    def eigen_system(self) -> tuple[np.ndarray, np.ndarray]:
        """Eigenvalues (descending) and eigenvectors of the dense matrix."""
        if self._eig is None:
            d = self.p.dense()
            vals, vecs = np.linalg.eigh(d)
            order = np.argsort(vals)[::-1]
            self._eig = (vals[order].astype(float), vecs[:, order])
        return self._eig

    @property
    def kernel_tol(self) -> float:
        vals, _ = self.eigen_system()
        top = max(float(vals.max()), np.finfo(float).tiny)
        return self.kernel_tol_factor * top

    def _support_mask(self) -> np.ndarray:
        vals, _ = self.eigen_system()
        return vals > self.kernel_tol

    def spectrum(self, cluster_rtol: float = 1e-8):
        """Distinct nonzero eigenvalues with their eigenprojectors.

        Returns a list of ``(p_k, Pi_k)`` with ``Pi_k`` dense ``dim^2 x dim^2``
        projectors; eigenvalues within ``cluster_rtol`` (relative to the
        largest) of each other share a projector.
        """
        if self._clusters is None:
            vals, vecs = self.eigen_system()
            mask = self._support_mask()
            atol = cluster_rtol * max(float(vals.max()), np.finfo(float).tiny)
            clusters: list[tuple[float, np.ndarray]] = []
            idx = np.nonzero(mask)[0]
            start = 0
            while start < len(idx):
                stop = start + 1
                while stop < len(idx) and abs(
                    vals[idx[stop]] - vals[idx[stop - 1]]
                ) <= atol:
                    stop += 1
                cols = vecs[:, idx[start:stop]]
                proj = cols @ cols.conj().T
                clusters.append((float(vals[idx[start:stop]].mean()), proj))
                start = stop
            self._clusters = clusters
        return self._clusters

    def kernel_projector(self) -> np.ndarray:
        """Dense projector onto the kernel of P."""
        vals, vecs = self.eigen_system()
        cols = vecs[:, ~self._support_mask()]
        return cols @ cols.conj().T

    def image_projector_apply(self, a) -> np.ndarray:
        """Project an operator onto the image of P (kernel removed)."""
        a = as_operator(a, self.dim)
        vals, vecs = self.eigen_system()
        mask = self._support_mask()
        coeff = vecs.conj().T @ a.reshape(-1)
        coeff[~mask] = 0.0
        return unvectorize(vecs @ coeff, self.dim)

    def project_effective(self, a) -> EffectiveElement:
        """Effective element: ``a`` with its metric-kernel component removed."""
        a = as_operator(a, self.dim)
        return EffectiveElement(projection=self.image_projector_apply(a), source=a)

    def is_positive_definite(self) -> bool:
        return bool(self._support_mask().all())

    def dense(self) -> np.ndarray:
        return self.p.dense()

    def __repr__(self) -> str:  # pragma: no cover - debugging aid
        return f"<OperatorMetric {self.name!r} dim={self.dim}>"


# -- constructors -----------------------------------------------------------

def hs_metric(dim: int) -> OperatorMetric:
    """The flat Hilbert–Schmidt metric (P = identity superoperator)."""
    vals = np.ones(dim * dim)
    vecs = np.eye(dim * dim, dtype=complex)
    return OperatorMetric(
        identity_superop(dim), eigen_system=(vals, vecs), name="hs"
    )


def metric_from_rho(rho1, rho2) -> OperatorMetric:
    """Metric ``P A = rho1 A rho2`` from a pair of PSD operators.

    The eigensystem is assembled analytically from the eigendecompositions of
    the factors: eigenvalues ``lam1_n * lam2_m`` with eigenoperators
    ``|u_n><w_m|``.
    """
    rho1 = as_operator(rho1)
    rho2 = as_operator(rho2, rho1.shape[0])
    _check_psd(rho1, "rho1")
    _check_psd(rho2, "rho2")
    w1, u1 = np.linalg.eigh(rho1)
    w2, u2 = np.linalg.eigh(rho2)
    vals = np.kron(w1, w2)
    vecs = np.kron(u1, u2.conj())
    order = np.argsort(vals)[::-1]
    p = SuperOp(rho1.shape[0], pairs=[(rho1, rho2)], name="rho-pair")
    return OperatorMetric(
        p, eigen_system=(np.clip(vals[order], 0.0, None), vecs[:, order])
    )


def gibbs_metric(h, beta: float) -> OperatorMetric:
    """Thermal metric ``P A = A e^{-beta h}/Z``.

    In the energy eigenbasis the weight on ``|E_n><E_m|`` is
    ``exp(-beta E_m)/Z``; the metric is positive definite and commutes with
    the Liouvillian of ``h``.
    """
    h = as_operator(h)
    if not is_hermitian(h):
        raise ValueError("Hamiltonian must be Hermitian")
    energies = np.linalg.eigvalsh(h)
    # shift before exponentiating to avoid overflow at large beta
    shifted = energies - energies.min()
    z = np.exp(-beta * shifted).sum()
    rho = scipy.linalg.expm(-beta * (h - energies.min() * np.eye(len(h)))) / z
    rho = 0.5 * (rho + rho.conj().T)
    m = metric_from_rho(np.eye(len(h), dtype=complex), rho)
    m.name = "gibbs"
    return m


def _kubo_weights(energies: np.ndarray, beta: float) -> np.ndarray:
    """Kubo weight matrix W_nm on |E_n><E_m| pairs.

    ``W_nm = (e^{-beta E_n} - e^{-beta E_m}) / (beta Z (E_m - E_n))`` with the
    degenerate limit ``e^{-beta E_n}/Z`` taken when ``|E_m - E_n| beta`` drops
    below 1e-8.
    """
    shifted = energies - energies.min()
    boltz = np.exp(-beta * shifted)
    z = boltz.sum()
    en = shifted[:, None]
    em = shifted[None, :]
    x = beta * (em - en)
    # W_nm = e^{-beta E_m}/Z * (e^{x} - 1)/x  with x = beta (E_m - E_n)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(np.abs(x) < 1e-8, 1.0 + x / 2.0, np.expm1(x) / np.where(x == 0.0, 1.0, x))
    return (boltz[None, :] / z) * ratio


def kubo_metric(h, beta: float) -> OperatorMetric:
    """Kubo–Mori metric with its thermal centering map.

    The inner product uses the weights of :func:`_kubo_weights` in the energy
    eigenbasis; the attached centering map ``a -> a - <a>_beta * 1`` (thermal
    average) removes the identity direction, reproducing the canonical Kubo
    correlation product on centered observables.
    """
    h = as_operator(h)
    if not is_hermitian(h):
        raise ValueError("Hamiltonian must be Hermitian")
    if beta <= 0:
        raise ValueError("kubo_metric needs beta > 0")
    energies, v = np.linalg.eigh(h)
    w = _kubo_weights(energies, beta)
    dim = len(h)

    vdag = v.conj().T

    def apply_fn(a: np.ndarray) -> np.ndarray:
        return v @ (w * (vdag @ a @ v)) @ vdag

    # dense matrix via the energy-pair eigenbasis
    u = np.kron(v, v.conj())
    vals = w.reshape(-1)
    order = np.argsort(vals)[::-1]
    dense = (u * vals[None, :]) @ u.conj().T
    dense = 0.5 * (dense + dense.conj().T)
    p = SuperOp(dim, dense=dense, name="kubo")

    shifted = energies - energies.min()
    boltz = np.exp(-beta * shifted)
    pops = boltz / boltz.sum()
    eye = np.eye(dim, dtype=complex)

    def center(a: np.ndarray) -> np.ndarray:
        avg = complex(np.sum(pops * np.diagonal(vdag @ a @ v)))
        return a - avg * eye

    return OperatorMetric(
        p,
        eigen_system=(vals[order], u[:, order]),
        center=center,
        apply_fn=apply_fn,
        name="kubo",
    )


# -- function-style wrappers over the metric methods ------------------------

def p_inner(metric: OperatorMetric, a, b) -> complex:
    """Metric inner product ``(a|b)``."""
    return metric.inner(a, b)


def seminorm(metric: OperatorMetric, a) -> float:
    """Metric seminorm of ``a``."""
    return metric.seminorm(a)


def effective_project(metric: OperatorMetric, a) -> EffectiveElement:
    """Kernel-free representative of ``a`` under the metric."""
    return metric.project_effective(a)
