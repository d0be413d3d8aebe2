"""Krylov-complexity engine: operator Lanczos, complexity chains and the
closed su(2) family.

The Lanczos recursion on operator space (Hilbert–Schmidt inner product, full
re-orthogonalization) maps a Hamiltonian/seed pair onto a finite chain of
couplings ``b_n``; on that chain the Liouvillian is the symmetric tridiagonal
matrix ``L``, the complexity operator ``K = diag(0..D-1)`` and
``B = [K, L]`` the antisymmetric hopping imbalance.  Two chain identities
hold for *any* couplings:

    [K, L] = B,   [K, B] = L,   [L, B] = diag(2(b_n^2 - b_{n-1}^2)),

so the algebra closes onto ``[L, B] = alpha K + gamma 1`` exactly when
``b_n^2 = alpha n(n-1)/4 + gamma n/2`` — the su(2) family (``alpha < 0``
compact, finite chains of length D when ``2 gamma = |alpha| (D-1)``).

For closed chains the Heisenberg-evolved complexity operator stays in
``span{1, K, B}``:

    K_t = cos(w0 t) K + (gamma/alpha)(cos(w0 t) - 1) 1
          + (sin(w0 t)/w0) iB,        w0 = sqrt(|alpha|),  alpha < 0,

and the growth rate obeys the dispersion bound ``|dK/dt| <= 2 b_1 DeltaK``,
saturated by the su(2) family.  The speed-limit machinery applies one level
up (the chain is an operator space of its own); the trace-subtracted bound is
exactly tight: rhs = t on the first branch.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .opspace import as_operator, commutator, hs_inner, hs_norm

__all__ = [
    "Chain",
    "KrylovBasis",
    "lanczos",
    "AlgebraParams",
    "su2_chain",
    "ComplexityTrajectory",
    "complexity_trajectory",
    "ClosureCheck",
    "algebra_closure_check",
    "super_heisenberg_K",
    "closed_form_K",
    "complexity_velocity",
    "complexity_autocorr",
    "kbar_autocorr",
    "OqslKCurves",
    "oqsl_K",
    "span_residual",
    "stationary_kernel",
]

#: Lanczos terminates when the next coupling drops below this times b_1.
LANCZOS_TERMINATION_RTOL = 1e-8


# ---------------------------------------------------------------------------
# chains
# ---------------------------------------------------------------------------

@dataclass
class Chain:
    """Complexity chain: couplings ``b`` of a length-D Krylov space."""

    b: np.ndarray

    def __post_init__(self):
        self.b = np.asarray(self.b, dtype=float)
        if self.b.ndim != 1:
            raise ValueError("b must be a 1-d array of couplings")

    @property
    def d(self) -> int:
        return len(self.b) + 1

    def liouvillian_matrix(self) -> np.ndarray:
        """Symmetric tridiagonal L with off-diagonals b."""
        return (
            np.diag(self.b.astype(complex), 1) + np.diag(self.b.astype(complex), -1)
        )

    def k_matrix(self) -> np.ndarray:
        return np.diag(np.arange(self.d, dtype=complex))

    def b_matrix(self) -> np.ndarray:
        """B = [K, L]: lower diagonal +b, upper diagonal -b."""
        return np.diag(self.b.astype(complex), -1) - np.diag(self.b.astype(complex), 1)

    def eigen_system(self):
        if self.d == 1:
            return np.zeros(1), np.eye(1)
        return scipy.linalg.eigh_tridiagonal(np.zeros(self.d), self.b)


@dataclass
class KrylovBasis:
    """Result of the operator-space Lanczos recursion."""

    basis: list  # list of (d, d) operators
    b: np.ndarray
    chain: Chain = field(init=False)

    def __post_init__(self):
        self.b = np.asarray(self.b, dtype=float)
        self.chain = Chain(self.b)

    @property
    def d(self) -> int:
        return len(self.basis)

    def gram(self) -> np.ndarray:
        return np.array(
            [[hs_inner(x, y) for y in self.basis] for x in self.basis]
        )

    def liouvillian_gram(self, h) -> np.ndarray:
        """Matrix elements <O_i | [h, O_j]> of the Liouvillian in this basis."""
        h = as_operator(h)
        return np.array(
            [
                [hs_inner(x, commutator(h, y)) for y in self.basis]
                for x in self.basis
            ]
        )


def lanczos(h, o0, tol: float | None = None, max_dim: int | None = None) -> KrylovBasis:
    """Operator-space Lanczos with full re-orthogonalization.

    Parameters
    ----------
    h : ndarray
        Hermitian generator; the recursion applies ``[h, .]``.
    o0 : ndarray
        Seed operator (normalized internally if needed).
    tol : float, optional
        Absolute termination threshold for the next coupling; defaults to
        ``1e-8 * b_1`` once b_1 is known.
    max_dim : int, optional
        Hard cap on the chain length (defaults to ``dim^2``).

    Returns
    -------
    KrylovBasis
        Orthonormal basis ``O_0 .. O_{D-1}`` and couplings ``b_1 .. b_{D-1}``.
    """
    h = as_operator(h)
    o0 = as_operator(o0, h.shape[0])
    n0 = hs_norm(o0)
    if n0 == 0.0:
        raise ValueError("seed operator is zero")
    basis = [o0 / n0]
    bs: list[float] = []
    cap = max_dim if max_dim is not None else h.shape[0] ** 2
    threshold = tol
    while len(basis) < cap:
        cand = commutator(h, basis[-1])
        # full re-orthogonalization, twice for numerical hygiene
        for _ in range(2):
            for q in basis:
                cand = cand - hs_inner(q, cand) * q
        bn = hs_norm(cand)
        if threshold is None:
            threshold = LANCZOS_TERMINATION_RTOL * max(bn, np.finfo(float).tiny)
        if bn < threshold:
            break
        bs.append(bn)
        basis.append(cand / bn)
    return KrylovBasis(basis=basis, b=np.array(bs))


# ---------------------------------------------------------------------------
# su(2) family
# ---------------------------------------------------------------------------

@dataclass
class AlgebraParams:
    """Closure parameters (alpha, gamma) of a finite complexity chain.

    A finite chain of length ``d`` requires ``alpha < 0`` and
    ``2 gamma = |alpha| (d - 1)`` (so that ``b_d = 0``).
    """

    alpha: float
    gamma: float
    d: int

    def __post_init__(self):
        if self.d < 2:
            raise ValueError("chain length must be at least 2")
        if self.alpha >= 0:
            raise ValueError("finite chains need alpha < 0")
        if abs(2 * self.gamma - abs(self.alpha) * (self.d - 1)) > 1e-10 * max(
            abs(self.alpha) * (self.d - 1), 1.0
        ):
            raise ValueError(
                "inconsistent closure: need 2*gamma = |alpha|*(d-1), got "
                f"gamma={self.gamma}, alpha={self.alpha}, d={self.d}"
            )

    @classmethod
    def su2(cls, alpha: float, d: int) -> "AlgebraParams":
        """Finite su(2) chain parameters with gamma fixed by (alpha, d)."""
        if alpha >= 0:
            raise ValueError("finite chains need alpha < 0")
        return cls(alpha=float(alpha), gamma=abs(alpha) * (d - 1) / 2.0, d=int(d))

    @property
    def omega0(self) -> float:
        return float(np.sqrt(abs(self.alpha)))

    def couplings(self) -> np.ndarray:
        n = np.arange(1, self.d, dtype=float)
        radicand = self.alpha * n * (n - 1) / 4.0 + self.gamma * n / 2.0
        return np.sqrt(np.clip(radicand, 0.0, None))


def su2_chain(params: AlgebraParams) -> Chain:
    """Chain with ``b_n = sqrt(alpha n(n-1)/4 + gamma n/2)``."""
    return Chain(params.couplings())


# ---------------------------------------------------------------------------
# complexity dynamics
# ---------------------------------------------------------------------------

@dataclass
class ComplexityTrajectory:
    """Complexity observables of a chain wavefunction started at site 0.

    ``residual = 2 b_1 DeltaK - |dK/dt|`` is the dispersion-bound slack,
    non-negative for every chain and identically zero on the su(2) family.
    """

    times: np.ndarray
    k: np.ndarray
    delta_k: np.ndarray
    dkdt: np.ndarray
    residual: np.ndarray
    b1: float
    amplitudes: np.ndarray | None = None


def complexity_trajectory(
    chain: Chain, times, keep_amplitudes: bool = False
) -> ComplexityTrajectory:
    """Evolve ``phi(t) = e^{iLt} e_0`` and record K, DeltaK and dK/dt.

    The growth rate is computed exactly as ``dK/dt = i <phi| B |phi>`` (no
    finite differences), so the dispersion-bound residual carries only
    roundoff noise.
    """
    times = np.asarray(times, dtype=float)
    w, vecs = chain.eigen_system()
    v0 = vecs[0, :]  # overlaps <eigvec | e_0>
    phases = np.exp(1j * np.outer(w, times))  # (D, T)
    amps = vecs @ (phases * v0[:, None])  # (D, T)
    sites = np.arange(chain.d, dtype=float)
    prob = np.abs(amps) ** 2
    k = sites @ prob
    k2 = (sites**2) @ prob
    delta_k = np.sqrt(np.clip(k2 - k**2, 0.0, None))
    # (B a)_j = b_{j-1} a_{j-1} - b_j a_{j+1}
    b = chain.b
    b_amps = np.zeros_like(amps)
    if chain.d > 1:
        b_amps[1:, :] += b[:, None] * amps[:-1, :]
        b_amps[:-1, :] -= b[:, None] * amps[1:, :]
    dkdt = np.real(1j * np.einsum("jt,jt->t", amps.conj(), b_amps))
    b1 = float(b[0]) if chain.d > 1 else 0.0
    residual = 2.0 * b1 * delta_k - np.abs(dkdt)
    return ComplexityTrajectory(
        times=times,
        k=k,
        delta_k=delta_k,
        dkdt=dkdt,
        residual=residual,
        b1=b1,
        amplitudes=amps if keep_amplitudes else None,
    )


# ---------------------------------------------------------------------------
# algebra closure and super-Heisenberg flow
# ---------------------------------------------------------------------------

@dataclass
class ClosureCheck:
    """Best-fit closure parameters and residuals of the chain identities."""

    alpha: float
    gamma: float
    closure_residual: float
    kl_residual: float
    kb_residual: float

    @property
    def closed(self) -> bool:
        return self.closure_residual < 1e-10


def algebra_closure_check(chain: Chain) -> ClosureCheck:
    """Fit ``[L, B] = alpha K + gamma 1`` and report identity residuals.

    ``[K, L] = B`` and ``[K, B] = L`` hold for every chain; the closure
    residual measures how far ``[L, B]`` (always diagonal) deviates from a
    linear function of the site index.
    """
    l = chain.liouvillian_matrix()
    k = chain.k_matrix()
    b = chain.b_matrix()
    lb = commutator(l, b)
    kl = commutator(k, l)
    kb = commutator(k, b)
    scale = max(hs_norm(lb), np.finfo(float).tiny)
    diag = np.real(np.diag(lb))
    sites = np.arange(chain.d, dtype=float)
    alpha, gamma = np.polyfit(sites, diag, 1)
    model = alpha * k + gamma * np.eye(chain.d)
    return ClosureCheck(
        alpha=float(alpha),
        gamma=float(gamma),
        closure_residual=float(hs_norm(lb - model) / scale),
        kl_residual=float(hs_norm(kl - b) / max(hs_norm(b), np.finfo(float).tiny)),
        kb_residual=float(hs_norm(kb - l) / max(hs_norm(l), np.finfo(float).tiny)),
    )


def super_heisenberg_K(chain: Chain, t: float) -> np.ndarray:
    """Dense evolution ``K_t = e^{-iLt} K e^{iLt}`` of the complexity operator."""
    w, vecs = chain.eigen_system()
    u = vecs @ (np.exp(-1j * w * float(t))[:, None] * vecs.conj().T)
    return u @ chain.k_matrix() @ u.conj().T


def closed_form_K(params: AlgebraParams, chain: Chain, t: float) -> np.ndarray:
    """Closed-form ``K_t`` in span{1, K, B} for a closed (su(2)) chain.

    For ``alpha < 0`` with ``w0 = sqrt(|alpha|)``:

        K_t = cos(w0 t) K + (gamma/alpha)(cos(w0 t) - 1) 1
              + (sin(w0 t)/w0) iB.
    """
    k = chain.k_matrix()
    b = chain.b_matrix()
    eye = np.eye(chain.d, dtype=complex)
    w0 = params.omega0
    c, s = np.cos(w0 * t), np.sin(w0 * t)
    return c * k + (params.gamma / params.alpha) * (c - 1.0) * eye + (s / w0) * (
        1j * b
    )


def complexity_velocity(chain: Chain) -> tuple[float, float]:
    """Average complexity speeds ``(V_K, V_Kbar)`` of a chain.

    ``V_K = ||B|| / ||K||`` and the trace-subtracted
    ``V_Kbar = ||B|| / ||K - (Tr K / D) 1||``.
    """
    b_norm_sq = 2.0 * float(np.sum(chain.b**2))
    sites = np.arange(chain.d, dtype=float)
    k_norm_sq = float(np.sum(sites**2))
    kbar_norm_sq = k_norm_sq - sites.sum() ** 2 / chain.d
    return (
        float(np.sqrt(b_norm_sq / k_norm_sq)),
        float(np.sqrt(b_norm_sq / kbar_norm_sq)),
    )


def complexity_autocorr(params: AlgebraParams, t) -> np.ndarray:
    """Closed-form autocorrelation ``(K_0 | K_t)`` of an su(2) chain.

    ``(||K||^2 + (gamma/alpha) Tr K) cos(w0 t) - (gamma/alpha) Tr K`` for
    ``alpha < 0``; e.g. D=3, alpha=-1 gives ``2 cos t + 3``.
    """
    t = np.asarray(t, dtype=float)
    d = params.d
    k_norm_sq = d * (d - 1) * (2 * d - 1) / 6.0
    k_trace = d * (d - 1) / 2.0
    r = (params.gamma / params.alpha) * k_trace
    return (k_norm_sq + r) * np.cos(params.omega0 * t) - r


def kbar_autocorr(params: AlgebraParams, t) -> np.ndarray:
    """Trace-subtracted autocorrelation ``||Kbar||^2 cos(w0 t)`` (a geodesic)."""
    t = np.asarray(t, dtype=float)
    d = params.d
    kbar_norm_sq = d * (d * d - 1) / 12.0
    return kbar_norm_sq * np.cos(params.omega0 * t)


@dataclass
class OqslKCurves:
    """Speed-limit curves for the complexity operator on an su(2) chain."""

    times: np.ndarray
    rhs_plain: np.ndarray
    rhs_subtracted: np.ndarray

    @property
    def gap_plain(self) -> np.ndarray:
        return self.times - self.rhs_plain

    @property
    def gap_subtracted(self) -> np.ndarray:
        return self.times - self.rhs_subtracted


def oqsl_K(params: AlgebraParams, times) -> OqslKCurves:
    """Evaluate ``t >= rhs(t)`` for plain and trace-subtracted complexity.

    The plain bound has a strictly growing gap (K has a stationary
    component along the identity); the trace-subtracted operator moves on a
    great circle, so its bound is exactly tight: rhs = t on the first branch
    ``t in [0, pi/w0]``.

    Raises
    ------
    ValueError
        If any time lies outside the first arccos branch.
    """
    times = np.atleast_1d(np.asarray(times, dtype=float))
    w0 = params.omega0
    if times.min() < 0 or times.max() > np.pi / w0 * (1 + 1e-12):
        raise ValueError(
            f"times must lie in the first branch [0, pi/w0 = {np.pi / w0:.6g}]"
        )
    d = params.d
    k_norm_sq = d * (d - 1) * (2 * d - 1) / 6.0
    v_k, v_kbar = complexity_velocity(su2_chain(params))
    overlap = complexity_autocorr(params, times) / k_norm_sq
    rhs_plain = np.arccos(np.clip(overlap, -1.0, 1.0)) / v_k
    sub_overlap = kbar_autocorr(params, times) / (d * (d * d - 1) / 12.0)
    rhs_sub = np.arccos(np.clip(sub_overlap, -1.0, 1.0)) / v_kbar
    return OqslKCurves(times=times, rhs_plain=rhs_plain, rhs_subtracted=rhs_sub)


# ---------------------------------------------------------------------------
# span structure
# ---------------------------------------------------------------------------

def span_residual(chain: Chain, m) -> float:
    """Relative distance of ``m`` from span{1, K, B} (least squares)."""
    m = as_operator(m, chain.d)
    cols = np.stack(
        [
            np.eye(chain.d, dtype=complex).reshape(-1),
            chain.k_matrix().reshape(-1),
            chain.b_matrix().reshape(-1),
        ],
        axis=1,
    )
    target = m.reshape(-1)
    _, res, _, _ = np.linalg.lstsq(cols, target, rcond=None)
    if len(res):
        dist = float(np.sqrt(res[0]))
    else:
        coef = np.linalg.pinv(cols) @ target
        dist = float(np.linalg.norm(cols @ coef - target))
    return dist / max(float(np.linalg.norm(target)), np.finfo(float).tiny)


def stationary_kernel(chain: Chain) -> tuple[int, float]:
    """Kernel of the super-Liouvillian restricted to span{1, K, B}.

    Returns the kernel dimension and the overlap of the kernel direction with
    the identity (1.0 when the kernel is exactly the identity direction, as
    for closed chains — this is what makes the plain bound non-tight).
    """
    l = chain.liouvillian_matrix()
    basis = [
        np.eye(chain.d, dtype=complex),
        chain.k_matrix(),
        chain.b_matrix(),
    ]
    basis = [x / hs_norm(x) for x in basis]
    cols = np.stack([x.reshape(-1) for x in basis], axis=1)
    images = np.stack([commutator(l, x).reshape(-1) for x in basis], axis=1)
    # restriction matrix: images expressed in the (orthonormalized) span
    coef, _, _, _ = np.linalg.lstsq(cols, images, rcond=None)
    _, svals, vh = np.linalg.svd(coef)
    smax = max(float(svals.max()), np.finfo(float).tiny)
    null = svals < 1e-10 * smax
    dim = int(null.sum())
    overlap = 0.0
    if dim:
        direction = vh[-1].conj()
        # overlap with the identity direction in span coordinates
        gram = cols.conj().T @ cols
        e_id = np.zeros(3, dtype=complex)
        e_id[0] = 1.0
        num = abs(direction.conj() @ gram @ e_id)
        den = np.sqrt(
            abs(direction.conj() @ gram @ direction) * abs(e_id.conj() @ gram @ e_id)
        )
        overlap = float(num / den)
    return dim, overlap
