"""Geometric speed limits for unitary operator flows.

A *path* is a discretized Heisenberg evolution ``A_t`` generated by
``dA/dt = i [H_t, A_t]`` together with a PSD operator metric.  The angle
swept by the effective (kernel-free) operator on the metric sphere divided by
the time-averaged speed gives a lower bound on the evolution time:

    tau >= sqrt(C(0)) * arccos(Re C(tau) / C(0)) / V_tau

with ``C(t)`` the metric autocorrelation and ``V_tau`` the average metric
speed.  Subtracting stationary components (any admissible constant part ``S``,
or optimally the projection ``P_0`` onto the Liouvillian kernel inside the
metric's image) tightens the bound; the three bounds are ordered

    tau >= tau_oref >= tau_ref >= tau_qsl.

The spectral form expresses the plain bound through Bohr frequencies and
metric weights when the metric commutes with the Liouvillian.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .opspace import (
    OperatorMetric,
    SuperOp,
    as_operator,
    commutator,
    hs_inner,
    hs_norm,
    liouvillian,
    unvectorize,
)

__all__ = [
    "PathInvariantError",
    "FlowPath",
    "heisenberg_path",
    "autocorrelation",
    "avg_velocity",
    "tau_qsl",
    "tau_refined",
    "tau_qsl_spectral",
    "StationaryDecomposition",
    "stationary_component",
    "krylov_dimension",
    "bohr_components",
    "SpeedLimitReport",
    "speed_limit_report",
    "SaturationReport",
    "saturation_check",
]

#: Excess beyond [-1, 1] tolerated before a clamped arccos argument is
#: treated as a genuine violation.
ARCCOS_EXCESS_TOL = 1e-9

#: Relative tolerance for the norm-preservation check along a path.
NORM_PRESERVATION_RTOL = 1e-8

#: Liouvillian eigenvalues closer than this (relative to the largest Bohr
#: frequency) are clustered into one eigenspace.
FREQUENCY_CLUSTER_RTOL = 1e-8

#: Relative support threshold when counting eigenspaces.
SUPPORT_TOL = 1e-8


class PathInvariantError(ValueError):
    """A structural invariant of a flow path is violated."""


def clamped_arccos(x: float, excess_tol: float = ARCCOS_EXCESS_TOL) -> float:
    """arccos with clamping of small numerical excess beyond [-1, 1].

    Excess larger than ``excess_tol`` is treated as a real violation and
    raises, so clamping never hides a broken identity.
    """
    x = float(x)
    if abs(x) > 1.0 + excess_tol:
        raise ValueError(
            f"arccos argument {x!r} exceeds [-1, 1] beyond tolerance {excess_tol}"
        )
    return float(np.arccos(np.clip(x, -1.0, 1.0)))


# ---------------------------------------------------------------------------
# paths
# ---------------------------------------------------------------------------

@dataclass
class FlowPath:
    """Sampled operator trajectory with its generator and metric.

    Attributes
    ----------
    times : ndarray
        Strictly increasing grid starting at 0.
    states : ndarray, shape (K, d, d)
        Operator samples ``A_{t_k}``.
    generators : ndarray, shape (K, d, d)
        Hermitian generator at each grid point (``H_t``, or ``-i eta`` for a
        flow written as ``dH/dl = [eta, H]``).
    metric : OperatorMetric
    """

    times: np.ndarray
    states: np.ndarray
    generators: np.ndarray
    metric: OperatorMetric

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.states = np.asarray(self.states, dtype=complex)
        self.generators = np.asarray(self.generators, dtype=complex)
        k = len(self.times)
        if k < 2:
            raise PathInvariantError("a path needs at least two grid points")
        if not (len(self.states) == len(self.generators) == k):
            raise PathInvariantError("times/states/generators lengths differ")
        if abs(self.times[0]) > 1e-12:
            raise PathInvariantError("path must start at t = 0")
        if np.any(np.diff(self.times) <= 0):
            raise PathInvariantError("times must be strictly increasing")
        norms = np.array([self.metric.seminorm(s) for s in self.states])
        top = norms.max()
        if top > 0 and (top - norms.min()) > NORM_PRESERVATION_RTOL * top:
            raise PathInvariantError(
                "norm preservation violated along the path "
                f"(spread {(top - norms.min()) / top:.3e} relative)"
            )
        self._seminorms = norms

    @property
    def tau(self) -> float:
        return float(self.times[-1])

    @property
    def dim(self) -> int:
        return self.states.shape[-1]

    def constant_generator(self, rtol: float = 1e-10) -> bool:
        g0 = self.generators[0]
        scale = max(np.abs(g0).max(), 1.0)
        return bool(np.abs(self.generators - g0).max() <= rtol * scale)


def heisenberg_path(
    h, a0, tau: float, n_points: int = 129, metric: OperatorMetric | None = None
) -> FlowPath:
    """Exact Heisenberg evolution ``A_t = e^{iHt} A_0 e^{-iHt}`` on a grid.

    The initial operator is passed through the metric's centering map first
    (a no-op except for the Kubo metric).  Propagation is spectrally exact, so
    the metric speed along the path is constant whenever the metric commutes
    with the Liouvillian of ``h``.
    """
    h = as_operator(h)
    if metric is None:
        from .opspace import hs_metric

        metric = hs_metric(h.shape[0])
    a0 = metric.center(as_operator(a0, h.shape[0]))
    if tau <= 0:
        raise ValueError("tau must be positive")
    energies, v = np.linalg.eigh(h)
    a_eig = v.conj().T @ a0 @ v
    times = np.linspace(0.0, float(tau), int(n_points))
    omega = energies[:, None] - energies[None, :]
    states = np.empty((len(times), *h.shape), dtype=complex)
    for k, t in enumerate(times):
        states[k] = v @ (np.exp(1j * omega * t) * a_eig) @ v.conj().T
    gens = np.broadcast_to(h, states.shape).copy()
    return FlowPath(times=times, states=states, generators=gens, metric=metric)


def autocorrelation(path: FlowPath) -> np.ndarray:
    """Metric autocorrelation ``C(t_k) = (A_0 | A_{t_k})``."""
    a0 = path.states[0]
    return np.array([path.metric.inner(a0, s) for s in path.states])


def avg_velocity(path: FlowPath) -> float:
    """Time-averaged metric speed ``(1/tau) \\int ||[H_t, A_t]||_P dt``.

    Composite trapezoid on the path's own grid; refine the grid before
    calling if the speed varies quickly.
    """
    speeds = np.array(
        [
            path.metric.seminorm(commutator(g, s))
            for g, s in zip(path.generators, path.states)
        ]
    )
    return float(np.trapezoid(speeds, path.times) / path.tau)


# ---------------------------------------------------------------------------
# scalar bounds
# ---------------------------------------------------------------------------

def tau_qsl(c0: float, c_tau: complex, v: float) -> float:
    """Plain speed-limit time from C(0), C(tau) and the average speed.

    Returns 0 for a stationary path (``v <= 0``).
    """
    c0 = float(c0)
    if c0 <= 0:
        raise ValueError("C(0) must be positive")
    if v <= 0:
        return 0.0
    angle = clamped_arccos(np.real(c_tau) / c0)
    return float(np.sqrt(c0) * angle / v)


def tau_refined(c0: float, c_tau: complex, s_norm: float, v: float) -> float:
    """Refined bound with an admissible stationary component of norm ``s_norm``.

    Raises
    ------
    ValueError
        If ``s_norm**2 >= c0`` — the path is fully stationary and the refined
        bound is undefined.
    """
    c0 = float(c0)
    s2 = float(s_norm) ** 2
    c_eff = c0 - s2
    if c_eff <= 0:
        raise ValueError(
            "stationary component exhausts C(0); refined bound undefined"
        )
    if v <= 0:
        return 0.0
    angle = clamped_arccos((np.real(c_tau) - s2) / c_eff)
    return float(np.sqrt(c_eff) * angle / v)


def tau_qsl_spectral(
    metric: OperatorMetric,
    h,
    a,
    tau: float,
    comm_tol: float = 1e-8,
) -> float:
    """Spectral form of the plain bound for a metric commuting with ``[h, .]``.

    Decomposes the (centered, kernel-free) operator over Bohr-frequency
    eigenspaces with metric weights ``v_alpha`` and evaluates

        tau_qsl = arccos(Re sum_alpha v_alpha e^{i w_alpha tau})
                  / sqrt(sum_alpha v_alpha w_alpha^2).

    Raises
    ------
    ValueError
        If the metric does not commute with the Liouvillian of ``h`` (checked
        blockwise in the energy-pair basis at relative ``comm_tol``).
    """
    h = as_operator(h)
    d = h.shape[0]
    energies, vmat = np.linalg.eigh(h)
    a = metric.center(as_operator(a, d))
    a_eig = (vmat.conj().T @ a @ vmat).reshape(-1)

    u = np.kron(vmat, vmat.conj())
    p_pair = u.conj().T @ metric.dense() @ u
    p_pair = 0.5 * (p_pair + p_pair.conj().T)

    omegas = (energies[:, None] - energies[None, :]).reshape(-1)
    clusters = _cluster_indices(omegas)
    scale = max(np.abs(p_pair).max(), np.finfo(float).tiny)
    weights = []
    comps = []
    freqs = []
    for idx in clusters:
        block = p_pair[np.ix_(idx, idx)]
        off = p_pair[np.ix_(idx, [j for j in range(d * d) if j not in set(idx)])]
        if np.abs(off).max() > comm_tol * scale:
            raise ValueError(
                "metric does not commute with the Liouvillian "
                f"(cross-frequency block {np.abs(off).max():.3e})"
            )
        w, q = np.linalg.eigh(block)
        comp = q.conj().T @ a_eig[idx]
        weights.append(np.clip(w, 0.0, None))
        comps.append(comp)
        freqs.append(np.full(len(idx), omegas[idx].mean()))
    weights = np.concatenate(weights)
    comps = np.concatenate(comps)
    freqs = np.concatenate(freqs)

    mass = weights * np.abs(comps) ** 2
    c0 = mass.sum()
    if c0 <= 0:
        raise ValueError("operator has zero metric norm")
    v_alpha = mass / c0
    denom = np.sqrt(np.sum(v_alpha * freqs**2))
    if denom == 0.0:
        return 0.0
    overlap = np.sum(v_alpha * np.exp(1j * freqs * float(tau)))
    return float(clamped_arccos(overlap.real) / denom)


def _cluster_indices(values: np.ndarray, rtol: float = FREQUENCY_CLUSTER_RTOL):
    """Group indices of ``values`` into clusters of nearly equal entries."""
    values = np.asarray(values, dtype=float)
    atol = rtol * max(np.abs(values).max(), np.finfo(float).tiny)
    order = np.argsort(values)
    groups: list[list[int]] = []
    for i in order:
        if groups and abs(values[i] - values[groups[-1][-1]]) <= atol:
            groups[-1].append(int(i))
        else:
            groups.append([int(i)])
    return groups


# ---------------------------------------------------------------------------
# stationary structure
# ---------------------------------------------------------------------------

@dataclass
class StationaryDecomposition:
    """Split of an effective operator into stationary and moving parts.

    ``s`` is the admissible identity component, ``p0`` the metric-orthogonal
    projection onto ker(L) inside the metric's image (the optimal stationary
    part) and ``v0 = a_hat - p0`` the initial moving part.
    """

    s: np.ndarray
    p0: np.ndarray
    v0: np.ndarray


def stationary_component(
    metric: OperatorMetric,
    l: SuperOp | np.ndarray,
    a_hat,
    kernel_svd_rtol: float = 1e-10,
) -> StationaryDecomposition:
    """Project ``a_hat`` onto the stationary subspace ker(L) ∩ im(P).

    The Liouvillian kernel is taken from the singular vectors of the dense
    superoperator below ``kernel_svd_rtol`` times the largest singular value;
    kernel vectors are pushed into the metric's image and re-orthonormalized
    with respect to the metric inner product before projecting.
    """
    if isinstance(l, SuperOp):
        ldense = l.dense()
    else:
        ldense = np.asarray(l, dtype=complex)
    d = metric.dim
    a_hat = as_operator(a_hat, d)

    _, svals, vh = np.linalg.svd(ldense)
    smax = max(float(svals.max()), np.finfo(float).tiny)
    null_rows = vh[svals < kernel_svd_rtol * smax]

    # identity component (always admissible)
    eye = np.eye(d, dtype=complex)
    eye_im = metric.image_projector_apply(eye)
    denom = metric.inner(eye, eye).real
    if denom > metric.kernel_tol:
        s = (metric.inner(eye, a_hat) / denom) * eye_im
    else:
        s = np.zeros_like(a_hat)

    if len(null_rows) == 0:
        p0 = np.zeros_like(a_hat)
        return StationaryDecomposition(s=s, p0=p0, v0=a_hat - p0)

    cand = [metric.image_projector_apply(unvectorize(row.conj(), d)) for row in null_rows]
    gram = np.array([[metric.inner(x, y) for y in cand] for x in cand])
    gram = 0.5 * (gram + gram.conj().T)
    gvals, gvecs = np.linalg.eigh(gram)
    gtop = max(float(gvals.max()), np.finfo(float).tiny)
    keep = gvals > 1e-12 * gtop
    basis = []
    for k in np.nonzero(keep)[0]:
        vec = sum(gvecs[i, k] * cand[i] for i in range(len(cand)))
        basis.append(vec / np.sqrt(gvals[k]))
    p0 = np.zeros_like(a_hat)
    for b in basis:
        p0 = p0 + metric.inner(b, a_hat) * b
    return StationaryDecomposition(s=s, p0=p0, v0=a_hat - p0)


def bohr_components(
    h,
    a,
    cluster_rtol: float = FREQUENCY_CLUSTER_RTOL,
    support_tol: float = SUPPORT_TOL,
):
    """Decompose ``a`` over Bohr-frequency eigenspaces of ``[h, .]``.

    Returns a list of ``(omega, component)`` with nontrivial Hilbert–Schmidt
    support (relative threshold ``support_tol``), omega ascending.
    """
    h = as_operator(h)
    a = as_operator(a, h.shape[0])
    energies, v = np.linalg.eigh(h)
    a_eig = v.conj().T @ a @ v
    omega = energies[:, None] - energies[None, :]
    clusters = _cluster_indices(omega.reshape(-1), cluster_rtol)
    total = hs_norm(a)
    out = []
    for idx in clusters:
        mask = np.zeros(omega.size, dtype=bool)
        mask[idx] = True
        comp_eig = np.where(mask.reshape(omega.shape), a_eig, 0.0)
        comp = v @ comp_eig @ v.conj().T
        if hs_norm(comp) > support_tol * max(total, np.finfo(float).tiny):
            out.append((float(omega.reshape(-1)[idx].mean()), comp))
    return out


def krylov_dimension(
    l: SuperOp | np.ndarray,
    a_hat,
    support_tol: float = SUPPORT_TOL,
) -> int:
    """Number of Liouvillian eigenspaces on which ``a_hat`` has support.

    This is the dimension of the Krylov space generated from ``a_hat`` —
    equivalently, for a Hermitian seed, the real dimension of the subspace
    explored by the flow.  Requires a Hermitian (dense) superoperator.
    """
    if isinstance(l, SuperOp):
        ldense = l.dense()
    else:
        ldense = np.asarray(l, dtype=complex)
    scale = max(np.abs(ldense).max(), 1.0)
    if np.abs(ldense - ldense.conj().T).max() > 1e-10 * scale:
        raise ValueError("krylov_dimension expects a Hermitian superoperator")
    vals, vecs = np.linalg.eigh(ldense)
    d = int(round(np.sqrt(ldense.shape[0])))
    a_vec = as_operator(a_hat, d).reshape(-1)
    coeff = vecs.conj().T @ a_vec
    total = np.linalg.norm(coeff)
    count = 0
    for idx in _cluster_indices(vals):
        if np.linalg.norm(coeff[idx]) > support_tol * max(total, np.finfo(float).tiny):
            count += 1
    return count


# ---------------------------------------------------------------------------
# reports
# ---------------------------------------------------------------------------

@dataclass
class SpeedLimitReport:
    """All scalar outputs of a speed-limit evaluation on one path."""

    tau: float
    tau_qsl: float
    tau_ref: float
    tau_oref: float
    avg_velocity: float
    angle: float
    autocorr0: float
    autocorr_tau: complex
    identity_norm: float
    stationary_norm: float
    stationary: bool
    constant_generator: bool
    metric_name: str = ""

    def to_record(self) -> dict:
        """Flat key/value record (JSON- and CSV-friendly)."""
        return {
            "tau": self.tau,
            "tau_qsl": self.tau_qsl,
            "tau_ref": self.tau_ref,
            "tau_oref": self.tau_oref,
            "avg_velocity": self.avg_velocity,
            "angle": self.angle,
            "autocorr0": self.autocorr0,
            "autocorr_tau_re": float(np.real(self.autocorr_tau)),
            "autocorr_tau_im": float(np.imag(self.autocorr_tau)),
            "identity_norm": self.identity_norm,
            "stationary_norm": self.stationary_norm,
            "stationary": self.stationary,
            "constant_generator": self.constant_generator,
            "metric": self.metric_name,
        }


def speed_limit_report(path: FlowPath) -> SpeedLimitReport:
    """Evaluate the plain, refined and optimally refined bounds on a path.

    For a constant generator the optimal stationary part ``P_0`` is the
    metric projection onto the Liouvillian kernel; for time-dependent
    generators the kernel is not invariant and the report falls back to the
    identity component (with a warning).
    """
    metric = path.metric
    corr = autocorrelation(path)
    c0c = corr[0]
    if abs(c0c.imag) > 1e-10 * max(abs(c0c), 1.0):
        raise PathInvariantError("C(0) is not numerically real")
    c0 = float(c0c.real)
    if c0 <= 0:
        raise PathInvariantError("initial operator has zero metric norm")
    c_tau = complex(corr[-1])
    v = avg_velocity(path)

    a_hat0 = metric.project_effective(path.states[0]).projection
    const_gen = path.constant_generator()
    if const_gen:
        dec = stationary_component(metric, liouvillian(path.generators[0]), a_hat0)
        s, p0 = dec.s, dec.p0
    else:
        warnings.warn(
            "time-dependent generator: falling back to the identity "
            "stationary component",
            stacklevel=2,
        )
        eye = np.eye(path.dim, dtype=complex)
        denom = metric.inner(eye, eye).real
        if denom > metric.kernel_tol:
            s = (metric.inner(eye, a_hat0) / denom) * metric.image_projector_apply(eye)
        else:
            s = np.zeros_like(a_hat0)
        p0 = s

    s_norm = metric.seminorm(s)
    p0_norm = metric.seminorm(p0)

    stationary = v * path.tau < 1e-12 * np.sqrt(c0)
    angle = clamped_arccos(c_tau.real / c0)
    t_qsl = 0.0 if stationary else tau_qsl(c0, c_tau, v)
    if stationary or c0 - p0_norm**2 <= 1e-14 * c0:
        stationary = True
        t_ref = 0.0
        t_oref = 0.0
    else:
        t_ref = tau_refined(c0, c_tau, s_norm, v)
        t_oref = tau_refined(c0, c_tau, p0_norm, v)

    return SpeedLimitReport(
        tau=path.tau,
        tau_qsl=t_qsl,
        tau_ref=t_ref,
        tau_oref=t_oref,
        avg_velocity=v,
        angle=angle,
        autocorr0=c0,
        autocorr_tau=c_tau,
        identity_norm=s_norm,
        stationary_norm=p0_norm,
        stationary=stationary,
        constant_generator=const_gen,
        metric_name=metric.name,
    )


@dataclass
class SaturationReport:
    """Diagnostics for saturation of the optimally refined bound."""

    two_eigenspace: bool
    krylov_dim: int
    equality_gap: float
    omega: float
    orthogonality_residual: float
    norm_mismatch: float
    structure_residual: float
    degenerate_frequencies: bool
    report: SpeedLimitReport = field(repr=False)


def saturation_check(path: FlowPath) -> SaturationReport:
    """Test whether a constant-generator path saturates the optimal bound.

    When the moving part of the effective operator lives on exactly two
    Liouvillian eigenspaces (+/- omega), the path is a metric-sphere arc

        A_hat_t = P_0 + cos(theta) X + sin(theta) Y,   theta = omega t,

    and ``tau_oref`` equals ``tau`` within the first monotonic arc.  The
    report carries the eigenspace count, the admissibility orthogonality
    residuals, the arc-structure residual and the gap ``tau - tau_oref``.
    """
    if not path.constant_generator():
        raise ValueError("saturation_check needs a constant generator")
    metric = path.metric
    h = path.generators[0]
    rep = speed_limit_report(path)

    a_hat0 = metric.project_effective(path.states[0]).projection
    dec = stationary_component(metric, liouvillian(h), a_hat0)
    comps = bohr_components(h, dec.v0)
    kdim = len(comps)

    omegas = np.array([w for w, _ in comps])
    degenerate = False
    if len(omegas) > 1:
        gaps = np.diff(np.sort(omegas))
        wmax = np.abs(omegas).max()
        degenerate = bool(gaps.min() < 100 * FREQUENCY_CLUSTER_RTOL * wmax)

    two = kdim == 2 and abs(omegas.sum()) <= 1e-8 * np.abs(omegas).max()
    ortho = 0.0
    mismatch = 0.0
    structure = 0.0
    omega = float(np.abs(omegas).max()) if len(omegas) else 0.0
    if two:
        p_minus, p_plus = comps[0][1], comps[1][1]  # omegas ascending
        x = p_plus + p_minus
        y = 1j * (p_plus - p_minus)
        nx, ny = metric.seminorm(x), metric.seminorm(y)
        scale = max(nx, ny, np.finfo(float).tiny) ** 2
        ortho = max(
            abs(np.real(metric.inner(dec.p0, x))) / scale,
            abs(np.real(metric.inner(dec.p0, y))) / scale,
            abs(np.real(metric.inner(p_plus, p_minus))) / scale,
        )
        mismatch = abs(nx - ny) / max(nx, ny)
        # exact arc structure at every sampled time
        dev = 0.0
        for t, state in zip(path.times, path.states):
            a_hat_t = metric.project_effective(state).projection
            model = dec.p0 + np.exp(1j * omega * t) * p_plus + np.exp(
                -1j * omega * t
            ) * p_minus
            dev = max(dev, hs_norm(a_hat_t - model))
        structure = dev / max(hs_norm(a_hat0), np.finfo(float).tiny)

    return SaturationReport(
        two_eigenspace=bool(two),
        krylov_dim=kdim,
        equality_gap=float(path.tau - rep.tau_oref),
        omega=omega,
        orthogonality_residual=float(ortho),
        norm_mismatch=float(mismatch),
        structure_residual=float(structure),
        degenerate_frequencies=degenerate,
        report=rep,
    )
