"""Isospectral Hamiltonian renormalization flows and their diagnostics.

Integrates double-bracket flows ``dH/dl = [eta(H), H]`` for two canonical
generator choices:

* **Wegner**: ``eta = [diag(H), H]`` — drives the Hamiltonian towards
  diagonal, off-diagonal weight decaying at squared-gap rates, with an exact
  dephasing identity for the off-diagonal purity.
* **Toda**: ``eta_nm = sgn(m - n) H_nm`` — preserves a tridiagonal band
  exactly and sorts the spectrum along the diagonal; partial traces grow
  monotonically.

Both flows move on a sphere of constant Hilbert–Schmidt norm, so the angle
``theta(l)`` swept from ``H(0)`` is bounded by the integrated speed
``int_0^l ||[eta, H]|| / ||H|| ds`` — a flow-scale speed limit.  The
tridiagonal *tight family* saturates this bound: it is the great-circle
solution of the Toda equations

    h_n(l) = -(2 h1/(N-1)) (n - (N+1)/2) sin(theta(l)),
    v_n(l) = sqrt(n (N-n)) h1 cos(theta(l)) / (N-1),
    sin(theta(l)) = tanh(2 h1 l/(N-1) + artanh(sin(theta_0))),

whose angle equals the velocity integral exactly.  The same tridiagonal data
embeds into an XY spin chain whose single-flip sector reproduces the matrix.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.integrate
import scipy.linalg

from .opspace import as_operator, hs_norm, is_hermitian

__all__ = [
    "FlowInvariantError",
    "TridiagonalHamiltonian",
    "wegner_generator",
    "toda_generator",
    "toda_rhs",
    "FlowTrajectory",
    "integrate_flow",
    "convergence_horizon",
    "offdiag_overlap",
    "dephasing_rate_check",
    "flow_oqsl",
    "TightFamily",
    "toda_tight_family",
    "XYEmbedding",
    "xy_embed",
    "random_tridiagonal",
]

#: Default local error control for the embedded 5(4) Runge-Kutta integrator.
DEFAULT_RTOL = 1e-9
DEFAULT_ATOL = 1e-12

#: Monitored relative drift of spectrum / norm along a trajectory; drift
#: beyond 100x this aborts the integration with diagnostics.
INVARIANT_RTOL = 1e-8

#: Hard cap for automatically chosen flow horizons.
HORIZON_CAP = 2000.0


class FlowInvariantError(RuntimeError):
    """An isospectral-flow invariant broke down during integration."""


# ---------------------------------------------------------------------------
# tridiagonal data
# ---------------------------------------------------------------------------

@dataclass
class TridiagonalHamiltonian:
    """Real symmetric tridiagonal matrix in (diagonal, off-diagonal) form."""

    diag: np.ndarray
    offdiag: np.ndarray

    def __post_init__(self):
        self.diag = np.asarray(self.diag, dtype=float)
        self.offdiag = np.asarray(self.offdiag, dtype=float)
        if self.diag.ndim != 1 or self.offdiag.ndim != 1:
            raise ValueError("diag and offdiag must be 1-d arrays")
        if len(self.offdiag) != len(self.diag) - 1:
            raise ValueError(
                f"offdiag length {len(self.offdiag)} != n-1 = {len(self.diag) - 1}"
            )

    @property
    def n(self) -> int:
        return len(self.diag)

    def to_matrix(self) -> np.ndarray:
        m = np.diag(self.diag.astype(complex))
        idx = np.arange(self.n - 1)
        m[idx, idx + 1] = self.offdiag
        m[idx + 1, idx] = self.offdiag
        return m

    @classmethod
    def from_matrix(cls, m, band_tol: float = 1e-10) -> "TridiagonalHamiltonian":
        m = as_operator(m)
        if not is_hermitian(m):
            raise ValueError("matrix is not Hermitian")
        scale = max(np.abs(m).max(), 1.0)
        if np.abs(m.imag).max() > band_tol * scale:
            raise ValueError("matrix has complex entries")
        band = np.tril(m.real, -2) + np.triu(m.real, 2)
        if np.abs(band).max() > band_tol * scale:
            raise ValueError("matrix has weight outside the tridiagonal band")
        return cls(diag=np.diag(m.real).copy(), offdiag=np.diag(m.real, 1).copy())

    def hs_norm(self) -> float:
        return float(np.sqrt(np.sum(self.diag**2) + 2 * np.sum(self.offdiag**2)))

    def eigenvalues(self) -> np.ndarray:
        return scipy.linalg.eigh_tridiagonal(self.diag, self.offdiag, eigvals_only=True)


# ---------------------------------------------------------------------------
# generators
# ---------------------------------------------------------------------------

def wegner_generator(h) -> np.ndarray:
    """Wegner generator ``eta = [diag(H), H]``, i.e. ``eta_nm = (H_nn - H_mm) H_nm``."""
    h = as_operator(h)
    diag = np.diag(np.diag(h))
    return diag @ h - h @ diag


def toda_generator(h) -> np.ndarray:
    """Toda generator ``eta_nm = sgn(m - n) H_nm`` (upper positive)."""
    if isinstance(h, TridiagonalHamiltonian):
        h = h.to_matrix()
    h = as_operator(h)
    return np.triu(h, 1) - np.tril(h, -1)


def toda_rhs(tri: TridiagonalHamiltonian) -> tuple[np.ndarray, np.ndarray]:
    """Toda flow equations in band coordinates.

    ``dh_n/dl = 2 (v_n^2 - v_{n-1}^2)`` (boundary couplings zero) and
    ``dv_n/dl = v_n (h_{n+1} - h_n)``.
    """
    v2 = tri.offdiag**2
    dh = 2.0 * (np.append(v2, 0.0) - np.append(0.0, v2))
    dv = tri.offdiag * (tri.diag[1:] - tri.diag[:-1])
    return dh, dv


def _resolve_generator(kind):
    if callable(kind):
        return kind, getattr(kind, "__name__", "custom")
    if kind == "wegner":
        return wegner_generator, "wegner"
    if kind == "toda":
        return toda_generator, "toda"
    raise ValueError(f"unknown generator kind {kind!r}")


def convergence_horizon(h0, kind: str = "wegner") -> float:
    """Default flow horizon from the smallest distinct-eigenvalue gap.

    Wegner off-diagonal weight decays at squared-gap rates (horizon
    ``40/gap^2``); Toda couplings decay at linear-gap rates (``40/gap``).
    Capped at ``HORIZON_CAP``.
    """
    if isinstance(h0, TridiagonalHamiltonian):
        evals = h0.eigenvalues()
    else:
        evals = np.linalg.eigvalsh(as_operator(h0))
    spread = max(evals.max() - evals.min(), np.finfo(float).tiny)
    gaps = np.diff(np.sort(evals))
    gaps = gaps[gaps > 1e-8 * spread]
    if len(gaps) == 0:
        return 10.0
    gap = float(gaps.min())
    horizon = 40.0 / gap**2 if kind == "wegner" else 40.0 / gap
    return float(min(horizon, HORIZON_CAP))


# ---------------------------------------------------------------------------
# trajectories
# ---------------------------------------------------------------------------

@dataclass
class FlowTrajectory:
    """Sampled flow with diagnostics.

    ``velocity_integral`` is ``int_0^l ||[eta, H]||/||H(0)|| ds`` accumulated
    by the integrator itself (augmented state), not by post-hoc quadrature;
    ``theta`` is the Hilbert–Schmidt angle from ``H(0)``.
    """

    kind: str
    ls: np.ndarray
    samples: np.ndarray  # (K, N, N) dense Hermitian samples
    theta: np.ndarray
    velocity_integral: np.ndarray
    offdiag_sq: np.ndarray
    norm0: float
    stalled: bool
    tridiagonal: bool
    spectral_drift: float
    norm_drift: float
    tri_diag: np.ndarray | None = None  # (K, N) when tridiagonal
    tri_offdiag: np.ndarray | None = None  # (K, N-1) when tridiagonal
    meta: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.samples.shape[-1]

    def matrix(self, k: int) -> np.ndarray:
        return self.samples[k]

    def final_tridiagonal(self) -> TridiagonalHamiltonian:
        if not self.tridiagonal:
            raise ValueError("trajectory was not integrated in band coordinates")
        return TridiagonalHamiltonian(self.tri_diag[-1], self.tri_offdiag[-1])


def _offdiag_sq(m: np.ndarray) -> float:
    return float(np.sum(np.abs(m) ** 2) - np.sum(np.abs(np.diag(m)) ** 2))


def integrate_flow(
    h0,
    kind: str = "wegner",
    l_max: float | None = None,
    n_samples: int = 401,
    rtol: float = DEFAULT_RTOL,
    atol: float = DEFAULT_ATOL,
    invariant_rtol: float = INVARIANT_RTOL,
    check_invariants: bool = True,
) -> FlowTrajectory:
    """Integrate ``dH/dl = [eta(H), H]`` with an embedded RK 5(4) stepper.

    ``h0`` may be a dense Hermitian matrix or a
    :class:`TridiagonalHamiltonian`; Toda flows on tridiagonal input run in
    exact band coordinates (the band cannot leak).  Dense flows re-Hermitize
    the state inside the right-hand side and at every sample.  The running
    speed integral rides along as an extra ODE component.

    Raises
    ------
    FlowInvariantError
        If the integrator fails, or spectrum/norm drift exceeds
        ``100 * invariant_rtol``.
    """
    tri_mode = isinstance(h0, TridiagonalHamiltonian) and kind == "toda"
    gen_fn, kind_name = _resolve_generator(kind)

    if isinstance(h0, TridiagonalHamiltonian):
        h0m = h0.to_matrix()
    else:
        h0m = as_operator(h0)
        if not is_hermitian(h0m):
            raise ValueError("h0 must be Hermitian")
        h0m = 0.5 * (h0m + h0m.conj().T)
    n = h0m.shape[0]
    norm0 = hs_norm(h0m)
    if norm0 == 0.0:
        raise ValueError("h0 must be nonzero")
    if l_max is None:
        l_max = convergence_horizon(h0, kind_name)
    ls = np.linspace(0.0, float(l_max), int(n_samples))

    eta0 = gen_fn(h0m if not tri_mode else h0)
    if isinstance(eta0, TridiagonalHamiltonian):  # pragma: no cover - defensive
        eta0 = eta0.to_matrix()
    stalled = hs_norm(eta0) <= 1e-12 * norm0 and _offdiag_sq(h0m) > 1e-12 * norm0**2

    if tri_mode:
        samples, tri_d, tri_o, vel = _integrate_toda_band(h0, ls, rtol, atol)
    else:
        samples, vel = _integrate_dense(h0m, gen_fn, ls, rtol, atol)
        tri_d = tri_o = None

    # Angle via the chord formula 2*atan2(||v-u||, ||v+u||) on unit vectors:
    # well conditioned at theta = 0 where arccos(overlap) loses half the digits.
    norms = np.linalg.norm(samples.reshape(len(samples), -1), axis=1)
    unit = samples / norms[:, None, None]
    u0 = unit[0]
    theta = 2.0 * np.arctan2(
        np.linalg.norm(unit - u0, axis=(1, 2)),
        np.linalg.norm(unit + u0, axis=(1, 2)),
    )
    off = np.array([_offdiag_sq(m) for m in samples])

    ev0 = np.sort(np.linalg.eigvalsh(h0m))
    scale = max(np.abs(ev0).max(), np.finfo(float).tiny)
    drift = 0.0
    for m in samples[1:]:
        ev = np.sort(np.linalg.eigvalsh(m))
        drift = max(drift, float(np.abs(ev - ev0).max()) / scale)
    norms = np.array([hs_norm(m) for m in samples])
    norm_drift = float(np.abs(norms - norm0).max() / norm0)

    if check_invariants:
        worst = max(drift, norm_drift)
        if worst > 100 * invariant_rtol:
            raise FlowInvariantError(
                f"isospectrality/norm drift {worst:.3e} exceeds "
                f"{100 * invariant_rtol:.1e} (kind={kind_name}, l_max={l_max})"
            )

    return FlowTrajectory(
        kind=kind_name,
        ls=ls,
        samples=samples,
        theta=theta,
        velocity_integral=vel,
        offdiag_sq=off,
        norm0=norm0,
        stalled=bool(stalled),
        tridiagonal=tri_mode,
        spectral_drift=drift,
        norm_drift=norm_drift,
        tri_diag=tri_d,
        tri_offdiag=tri_o,
        meta={"rtol": rtol, "atol": atol, "l_max": float(l_max)},
    )


def _integrate_dense(h0m, gen_fn, ls, rtol, atol):
    n = h0m.shape[0]
    norm0 = hs_norm(h0m)

    def pack(h, s):
        return np.concatenate([h.real.reshape(-1), h.imag.reshape(-1), [s]])

    def unpack(y):
        h = y[: n * n].reshape(n, n) + 1j * y[n * n : 2 * n * n].reshape(n, n)
        return h

    def rhs(_l, y):
        h = unpack(y)
        h = 0.5 * (h + h.conj().T)
        eta = gen_fn(h)
        dh = eta @ h - h @ eta
        return pack(dh, hs_norm(dh) / norm0)

    sol = scipy.integrate.solve_ivp(
        rhs,
        (ls[0], ls[-1]),
        pack(h0m, 0.0),
        method="RK45",
        t_eval=ls,
        rtol=rtol,
        atol=atol,
    )
    if not sol.success:
        raise FlowInvariantError(f"integrator failed: {sol.message}")
    samples = np.empty((len(ls), n, n), dtype=complex)
    for k in range(len(ls)):
        h = unpack(sol.y[:, k])
        samples[k] = 0.5 * (h + h.conj().T)
    vel = sol.y[-1].copy()
    return samples, vel


def _integrate_toda_band(tri0: TridiagonalHamiltonian, ls, rtol, atol):
    n = tri0.n
    norm0 = tri0.hs_norm()

    def rhs(_l, y):
        tri = TridiagonalHamiltonian(y[:n], y[n : 2 * n - 1])
        dh, dv = toda_rhs(tri)
        speed = np.sqrt(np.sum(dh**2) + 2 * np.sum(dv**2)) / norm0
        return np.concatenate([dh, dv, [speed]])

    y0 = np.concatenate([tri0.diag, tri0.offdiag, [0.0]])
    sol = scipy.integrate.solve_ivp(
        rhs, (ls[0], ls[-1]), y0, method="RK45", t_eval=ls, rtol=rtol, atol=atol
    )
    if not sol.success:
        raise FlowInvariantError(f"integrator failed: {sol.message}")
    tri_d = sol.y[:n].T.copy()
    tri_o = sol.y[n : 2 * n - 1].T.copy()
    vel = sol.y[-1].copy()
    samples = np.empty((len(ls), n, n), dtype=complex)
    for k in range(len(ls)):
        samples[k] = TridiagonalHamiltonian(tri_d[k], tri_o[k]).to_matrix()
    return samples, tri_d, tri_o, vel


# ---------------------------------------------------------------------------
# diagnostics
# ---------------------------------------------------------------------------

def offdiag_overlap(traj: FlowTrajectory) -> np.ndarray:
    """Off-diagonal share ``1 - ||diag(H)||^2 / ||H||^2`` along the flow.

    Monotonically non-increasing under the Wegner flow; its decay rate is the
    gap-weighted off-diagonal purity.
    """
    diag_sq = np.array([np.sum(np.abs(np.diag(m)) ** 2) for m in traj.samples])
    total_sq = np.array([hs_norm(m) ** 2 for m in traj.samples])
    return 1.0 - diag_sq / total_sq


def dephasing_rate_check(traj: FlowTrajectory, stencil: int = 5) -> dict:
    """Check the Wegner dephasing identity on a sampled trajectory.

    Compares a high-order finite-difference derivative of the off-diagonal
    purity ``Tr H_off^2`` with the analytic rate
    ``-2 sum_{ij} (H_ii - H_jj)^2 |H_ij|^2`` pointwise (interior points).

    Returns a dict with ``max_residual`` and the two series.  Refuses
    non-Wegner trajectories: the identity does not hold for the Toda
    generator.
    """
    if traj.kind != "wegner":
        raise ValueError(
            f"dephasing identity holds for the Wegner flow only (kind={traj.kind!r})"
        )
    ls = traj.ls
    dl = np.diff(ls)
    if np.abs(dl - dl[0]).max() > 1e-9 * dl[0]:
        raise ValueError("dephasing check needs a uniform grid")
    h = dl[0]
    p = traj.offdiag_sq
    if stencil == 5 and len(p) >= 5:
        interior = slice(2, len(p) - 2)
        dp = (p[:-4] - 8 * p[1:-3] + 8 * p[3:-1] - p[4:]) / (12 * h)
    else:
        interior = slice(1, len(p) - 1)
        dp = (p[2:] - p[:-2]) / (2 * h)
    analytic = np.empty(len(p))
    for k, m in enumerate(traj.samples):
        eps = np.real(np.diag(m))
        gaps_sq = (eps[:, None] - eps[None, :]) ** 2
        analytic[k] = -2.0 * float(np.sum(gaps_sq * np.abs(m) ** 2))
    resid = dp - analytic[interior]
    return {
        "max_residual": float(np.abs(resid).max()),
        "numeric": dp,
        "analytic": analytic[interior],
        "ls": ls[interior],
    }


def flow_oqsl(traj: FlowTrajectory) -> np.ndarray:
    """Speed-limit scale ``l_qsl(l) = l * theta(l) / velocity_integral(l)``.

    Satisfies ``l_qsl(l) <= l`` — the angle swept never exceeds the
    integrated speed.  Zero where the flow has not moved.
    """
    out = np.zeros_like(traj.ls)
    mask = traj.velocity_integral > 0
    out[mask] = traj.ls[mask] * traj.theta[mask] / traj.velocity_integral[mask]
    return out


# ---------------------------------------------------------------------------
# tight family
# ---------------------------------------------------------------------------

@dataclass
class TightFamily:
    """Great-circle Toda solution saturating the flow speed limit.

    The field/coupling profile is linear/semicircular in the site index with
    a single angle ``theta(l)`` obeying ``theta' = rate * cos(theta)``,
    ``rate = 2 h1/(N-1)``, i.e.
    ``sin(theta(l)) = tanh(rate * l + artanh(sin(theta_0)))``.
    """

    n: int
    h1: float
    theta0: float

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("need at least two sites")
        if self.h1 <= 0:
            raise ValueError("h1 must be positive")
        if not -np.pi / 2 < self.theta0 < np.pi / 2:
            raise ValueError("theta0 must lie in (-pi/2, pi/2)")

    @property
    def rate(self) -> float:
        return 2.0 * self.h1 / (self.n - 1)

    def theta(self, l) -> np.ndarray:
        """Flow angle at scale ``l`` (vectorized)."""
        c = np.arctanh(np.sin(self.theta0))
        return np.arcsin(np.tanh(self.rate * np.asarray(l, dtype=float) + c))

    def state(self, theta: float) -> TridiagonalHamiltonian:
        """Family member at angle ``theta``."""
        idx = np.arange(1, self.n + 1, dtype=float)
        h = -self.rate * (idx - (self.n + 1) / 2.0) * np.sin(theta)
        j = np.arange(1, self.n, dtype=float)
        v = np.sqrt(j * (self.n - j)) * self.h1 * np.cos(theta) / (self.n - 1)
        return TridiagonalHamiltonian(diag=h, offdiag=v)

    @property
    def initial(self) -> TridiagonalHamiltonian:
        return self.state(self.theta0)


def toda_tight_family(n: int, h1: float, theta0: float = 0.0) -> TightFamily:
    """Construct the bound-saturating Toda family (see :class:`TightFamily`)."""
    return TightFamily(n=n, h1=h1, theta0=theta0)


# ---------------------------------------------------------------------------
# XY spin-chain embedding
# ---------------------------------------------------------------------------

@dataclass
class XYEmbedding:
    """XY chain realizing a tridiagonal Hamiltonian in its single-flip sector.

    ``full`` is the ``2^N x 2^N`` chain Hamiltonian
    ``(1/2) sum_n v_n (X_n X_{n+1} + Y_n Y_{n+1}) + (1/2) sum_n h_n Z_n``,
    ``magnetization`` the conserved ``sum_n Z_n``, and ``sector`` the block on
    the one-spin-up subspace shifted by ``(sum_n h_n / 2) * 1`` so that its
    entries are exactly ``(h, v)`` (the shift vanishes for traceless fields).
    """

    full: np.ndarray
    magnetization: np.ndarray
    sector: np.ndarray
    commutator_residual: float


def _kron_chain(ops) -> np.ndarray:
    out = ops[0]
    for op in ops[1:]:
        out = np.kron(out, op)
    return out


def xy_embed(v, h) -> XYEmbedding:
    """Embed tridiagonal data ``(h, v)`` into an XY spin chain.

    Builds the chain Hamiltonian explicitly (dense, so N is desk-scale),
    checks that it commutes with total magnetization, and extracts the
    single-flip sector in site order.
    """
    h = np.asarray(h, dtype=float)
    v = np.asarray(v, dtype=float)
    n = len(h)
    if len(v) != n - 1:
        raise ValueError("need len(v) == len(h) - 1")
    if n > 12:
        raise ValueError("XY embedding is dense in 2^N — keep N <= 12")
    from .opspace import PAULI_I, PAULI_X, PAULI_Y, PAULI_Z

    eye = [PAULI_I] * n

    def site_op(op, k):
        factors = list(eye)
        factors[k] = op
        return _kron_chain(factors)

    def bond_op(op, k):
        factors = list(eye)
        factors[k] = op
        factors[k + 1] = op
        return _kron_chain(factors)

    dim = 2**n
    full = np.zeros((dim, dim), dtype=complex)
    for k in range(n - 1):
        full += 0.5 * v[k] * (bond_op(PAULI_X, k) + bond_op(PAULI_Y, k))
    for k in range(n):
        full += 0.5 * h[k] * site_op(PAULI_Z, k)

    mag = np.zeros((dim, dim), dtype=complex)
    for k in range(n):
        mag += site_op(PAULI_Z, k)

    comm = full @ mag - mag @ full
    resid = float(np.abs(comm).max() / max(np.abs(full).max(), 1.0))

    # basis index with spin k up (all others down): all bits set except bit k
    idx = [(dim - 1) - (1 << (n - 1 - k)) for k in range(n)]
    sector = full[np.ix_(idx, idx)] + (h.sum() / 2.0) * np.eye(n)
    return XYEmbedding(
        full=full, magnetization=mag, sector=sector, commutator_residual=resid
    )


# ---------------------------------------------------------------------------
# random instances
# ---------------------------------------------------------------------------

def random_tridiagonal(
    n: int, seed: int, traceless: bool = False
) -> TridiagonalHamiltonian:
    """Random tridiagonal Hamiltonian with entries uniform on [-1, 1].

    Uses numpy's PCG64 generator seeded with ``seed``; ``traceless``
    subtracts the mean of the diagonal.
    """
    rng = np.random.default_rng(seed)
    diag = rng.uniform(-1.0, 1.0, size=n)
    off = rng.uniform(-1.0, 1.0, size=n - 1)
    if traceless:
        diag = diag - diag.mean()
    return TridiagonalHamiltonian(diag=diag, offdiag=off)
