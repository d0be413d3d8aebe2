"""Seeded, deterministic experiment runner.

Each subcommand writes CSV files with a commented metadata block (plus a JSON
sidecar where a run has scalar results), re-validates every emitted file
against its inequality contracts, and exits 0 on success, 2 on
configuration/input errors, 3 on numerical invariant failures.  Stochastic
commands require ``--seed`` (numpy PCG64); equal configurations produce
byte-identical output.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .fileio import (
    format_float,
    read_csv,
    read_operator,
    write_csv,
    write_json_record,
)
from .flows import (
    FlowInvariantError,
    flow_oqsl,
    integrate_flow,
    offdiag_overlap,
    random_tridiagonal,
    toda_tight_family,
)
from .krylov import (
    AlgebraParams,
    complexity_trajectory,
    complexity_autocorr,
    complexity_velocity,
    lanczos,
    oqsl_K,
    su2_chain,
)
from .opspace import gibbs_metric, hs_metric, is_hermitian, kubo_metric
from .oqsl import (
    PathInvariantError,
    heisenberg_path,
    krylov_dimension,
    saturation_check,
    speed_limit_report,
)
from .opspace import liouvillian

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

#: Absolute slack admitted when re-validating inequality columns (roundoff
#: headroom only; genuine violations are orders of magnitude larger).
BOUND_SLACK = 1e-9


class ValidationError(RuntimeError):
    """An emitted file violates its inequality contract."""


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------

def _meta_common(args, **extra) -> dict:
    meta = {"tool": "opflow", "version": __version__, "command": args.command}
    meta.update(extra)
    return meta


def _parse_n_list(text: str) -> list[int]:
    try:
        values = [int(tok) for tok in text.split(",") if tok.strip()]
    except ValueError as exc:
        raise ValueError(f"bad --n list {text!r}") from exc
    if not values or any(v < 2 for v in values):
        raise ValueError("--n entries must be integers >= 2")
    return values


def _emit_svg(path: Path, xlabel: str, ylabel: str, series: dict) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams["svg.hashsalt"] = "opflow"
    fig, ax = plt.subplots(figsize=(5.0, 3.2))
    for label, (x, y) in series.items():
        ax.plot(x, y, label=label, linewidth=1.2)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.legend(frameon=False, fontsize=8)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def _validate_flow_csv(path: Path) -> None:
    meta, cols = read_csv(path)
    theta, bound = cols["theta"], cols["bound"]
    if np.any(theta > bound + BOUND_SLACK):
        worst = float((theta - bound).max())
        raise ValidationError(f"{path.name}: theta exceeds bound by {worst:.3e}")
    if np.any(cols["l_qsl"] > cols["l"] + BOUND_SLACK):
        raise ValidationError(f"{path.name}: l_qsl exceeds l")
    if meta.get("kind") == "wegner":
        overlap = cols["offdiag_overlap"]
        if np.any(np.diff(overlap) > BOUND_SLACK):
            raise ValidationError(f"{path.name}: off-diagonal share not monotone")


def _validate_krylov_csv(path: Path) -> None:
    _, cols = read_csv(path)
    if np.any(cols["dispersion_residual"] < -1e-8):
        worst = float(cols["dispersion_residual"].min())
        raise ValidationError(f"{path.name}: dispersion bound violated ({worst:.3e})")
    if "gap_plain" in cols:
        if np.any(cols["gap_plain"] < -BOUND_SLACK):
            raise ValidationError(f"{path.name}: plain speed-limit gap negative")
        if np.any(np.abs(cols["gap_subtracted"]) > BOUND_SLACK):
            worst = float(np.abs(cols["gap_subtracted"]).max())
            raise ValidationError(
                f"{path.name}: trace-subtracted bound not tight ({worst:.3e})"
            )


def _validate_bound_record(path: Path, record: dict) -> None:
    chain = (
        record["tau"] + BOUND_SLACK >= record["tau_oref"] - BOUND_SLACK
        and record["tau_oref"] >= record["tau_ref"] - BOUND_SLACK
        and record["tau_ref"] >= record["tau_qsl"] - BOUND_SLACK
        and record["tau_qsl"] >= -BOUND_SLACK
    )
    if not chain:
        raise ValidationError(f"{path.name}: bound ordering chain violated: {record}")


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def run_bound(args) -> int:
    h = read_operator(args.hamiltonian)
    a = read_operator(args.operator)
    if not is_hermitian(h):
        raise ValueError("Hamiltonian file is not Hermitian")
    if args.metric in ("gibbs", "kubo") and (args.beta is None or args.beta <= 0):
        raise ValueError(f"--metric {args.metric} requires --beta > 0")
    if args.metric == "hs":
        metric = hs_metric(h.shape[0])
    elif args.metric == "gibbs":
        metric = gibbs_metric(h, args.beta)
    else:
        metric = kubo_metric(h, args.beta)

    path = heisenberg_path(h, a, args.tau, n_points=args.points, metric=metric)
    rep = speed_limit_report(path)
    sat = saturation_check(path)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    record = rep.to_record()
    record.update(
        {
            "two_eigenspace": sat.two_eigenspace,
            "krylov_dim": sat.krylov_dim,
            "equality_gap": sat.equality_gap,
            "omega": sat.omega,
        }
    )
    report_path = out / "bound_report.json"
    write_json_record(report_path, record)

    from .oqsl import autocorrelation

    corr = autocorrelation(path)
    csv_path = out / "bound_autocorr.csv"
    write_csv(
        csv_path,
        {
            "t": path.times,
            "autocorr_re": corr.real,
            "autocorr_im": corr.imag,
        },
        meta=_meta_common(
            args,
            metric=args.metric,
            beta="" if args.beta is None else format_float(args.beta),
            tau=format_float(args.tau),
            points=args.points,
        ),
    )
    _validate_bound_record(report_path, record)
    print(f"wrote {report_path} and {csv_path}")
    return EXIT_OK


def _run_flow_command(args, kind: str) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for n in _parse_n_list(args.n):
        tri = random_tridiagonal(n, args.seed, traceless=args.traceless)
        traj = integrate_flow(
            tri,
            kind=kind,
            l_max=args.l_max,
            n_samples=args.samples,
            rtol=args.rtol,
            atol=args.atol,
        )
        lqsl = flow_oqsl(traj)
        overlap = offdiag_overlap(traj)
        name = f"{kind}_n{n}_seed{args.seed}.csv"
        csv_path = out / name
        meta = _meta_common(
            args,
            kind=kind,
            n=n,
            seed=args.seed,
            traceless=str(bool(args.traceless)).lower(),
            l_max=format_float(traj.meta["l_max"]),
            samples=args.samples,
            rtol=format_float(traj.meta["rtol"]),
            atol=format_float(traj.meta["atol"]),
            prng="numpy PCG64",
            spectral_drift=format_float(traj.spectral_drift),
            norm_drift=format_float(traj.norm_drift),
            stalled=str(traj.stalled).lower(),
        )
        write_csv(
            csv_path,
            {
                "l": traj.ls,
                "theta": traj.theta,
                "bound": traj.velocity_integral,
                "l_qsl": lqsl,
                "offdiag_sq": traj.offdiag_sq,
                "offdiag_overlap": overlap,
            },
            meta=meta,
        )
        write_json_record(csv_path.with_suffix(".meta.json"), meta)
        _validate_flow_csv(csv_path)
        written.append(csv_path)
        if args.emit_svg:
            _emit_svg(
                csv_path.with_suffix(".svg"),
                "l",
                "angle",
                {
                    "theta": (traj.ls, traj.theta),
                    "bound": (traj.ls, traj.velocity_integral),
                },
            )
    for p in written:
        print(f"wrote {p}")
    return EXIT_OK


def run_wegner(args) -> int:
    return _run_flow_command(args, "wegner")


def run_toda(args) -> int:
    return _run_flow_command(args, "toda")


def run_toda_tight(args) -> int:
    fam = toda_tight_family(args.n, args.h1, args.theta0)
    l_max = args.l_max if args.l_max is not None else 2.0 * (args.n - 1) / args.h1
    traj = integrate_flow(
        fam.initial,
        kind="toda",
        l_max=l_max,
        n_samples=args.samples,
        rtol=args.rtol,
        atol=args.atol,
    )
    theta_family = fam.theta(traj.ls)
    resid = np.empty(len(traj.ls))
    for k, th in enumerate(theta_family):
        ref = fam.state(th)
        resid[k] = max(
            np.abs(traj.tri_diag[k] - ref.diag).max(),
            np.abs(traj.tri_offdiag[k] - ref.offdiag).max(),
        )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / f"toda_tight_n{args.n}.csv"
    meta = _meta_common(
        args,
        n=args.n,
        h1=format_float(args.h1),
        theta0=format_float(args.theta0),
        rate=format_float(fam.rate),
        l_max=format_float(l_max),
        samples=args.samples,
    )
    write_csv(
        csv_path,
        {
            "l": traj.ls,
            "theta": traj.theta,
            "theta_family": theta_family,
            "bound": traj.velocity_integral,
            "l_qsl": flow_oqsl(traj),
            "family_residual": resid,
        },
        meta=meta,
    )
    write_json_record(csv_path.with_suffix(".meta.json"), meta)

    meta_read, cols = read_csv(csv_path)
    sat_gap = np.abs(
        cols["theta"] - (cols["theta_family"] - args.theta0)
    ).max()
    if sat_gap > 1e-8:
        raise ValidationError(
            f"{csv_path.name}: angle does not match the analytic family "
            f"({sat_gap:.3e})"
        )
    if cols["family_residual"].max() > 1e-6:
        raise ValidationError(
            f"{csv_path.name}: trajectory left the analytic family "
            f"({cols['family_residual'].max():.3e})"
        )
    if np.any(cols["theta"] > cols["bound"] + BOUND_SLACK):
        raise ValidationError(f"{csv_path.name}: theta exceeds bound")
    if args.emit_svg:
        _emit_svg(
            csv_path.with_suffix(".svg"),
            "l",
            "angle",
            {
                "theta": (traj.ls, traj.theta),
                "bound": (traj.ls, traj.velocity_integral),
            },
        )
    print(f"wrote {csv_path}")
    return EXIT_OK


def run_krylov_su2(args) -> int:
    if args.alpha >= 0:
        raise ValueError("--alpha must be negative (compact family)")
    params = AlgebraParams.su2(args.alpha, args.dim)
    chain = su2_chain(params)
    t_max = args.t_max
    if t_max is None:
        t_max = 0.999 * np.pi / params.omega0
    if t_max > np.pi / params.omega0:
        raise ValueError(
            f"--t-max beyond the first branch (pi/w0 = {np.pi / params.omega0:.6g})"
        )
    times = np.linspace(0.0, t_max, args.samples)
    traj = complexity_trajectory(chain, times)
    curves = oqsl_K(params, times)
    autocorr = complexity_autocorr(params, times)
    v_k, v_kbar = complexity_velocity(chain)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / f"krylov_su2_d{args.dim}.csv"
    meta = _meta_common(
        args,
        dim=args.dim,
        alpha=format_float(args.alpha),
        gamma=format_float(params.gamma),
        b1=format_float(chain.b[0]),
        v_k=format_float(v_k),
        v_kbar=format_float(v_kbar),
        samples=args.samples,
        t_max=format_float(t_max),
    )
    write_csv(
        csv_path,
        {
            "t": times,
            "k": traj.k,
            "delta_k": traj.delta_k,
            "dkdt": traj.dkdt,
            "dispersion_residual": traj.residual,
            "autocorr": autocorr,
            "rhs_plain": curves.rhs_plain,
            "rhs_subtracted": curves.rhs_subtracted,
            "gap_plain": curves.gap_plain,
            "gap_subtracted": curves.gap_subtracted,
        },
        meta=meta,
    )
    write_json_record(csv_path.with_suffix(".meta.json"), meta)
    _validate_krylov_csv(csv_path)
    if args.emit_svg:
        _emit_svg(
            csv_path.with_suffix(".svg"),
            "t",
            "complexity",
            {"K": (times, traj.k), "2 b1 dK": (times, 2 * chain.b[0] * traj.delta_k)},
        )
    print(f"wrote {csv_path}")
    return EXIT_OK


def run_krylov_lanczos(args) -> int:
    h = read_operator(args.hamiltonian)
    o0 = read_operator(args.operator)
    if not is_hermitian(h):
        raise ValueError("Hamiltonian file is not Hermitian")
    kb = lanczos(h, o0)
    chain = kb.chain
    if chain.d < 2:
        raise ValueError("seed operator commutes with the Hamiltonian; chain is trivial")
    t_max = args.t_max if args.t_max is not None else 10.0 / chain.b[0]
    times = np.linspace(0.0, t_max, args.samples)
    traj = complexity_trajectory(chain, times)

    gram = kb.gram()
    ortho = float(np.abs(gram - np.eye(kb.d)).max())
    kdim = krylov_dimension(liouvillian(h), kb.basis[0])

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / "krylov_lanczos.csv"
    meta = _meta_common(
        args,
        chain_dim=kb.d,
        b1=format_float(chain.b[0]),
        orthonormality_residual=format_float(ortho),
        eigenspace_support_dim=kdim,
        samples=args.samples,
        t_max=format_float(t_max),
    )
    write_csv(
        csv_path,
        {
            "t": times,
            "k": traj.k,
            "delta_k": traj.delta_k,
            "dkdt": traj.dkdt,
            "dispersion_residual": traj.residual,
        },
        meta=meta,
    )
    write_json_record(csv_path.with_suffix(".meta.json"), meta)
    _validate_krylov_csv(csv_path)
    print(f"wrote {csv_path}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="opflow",
        description="Operator speed limits, Hamiltonian flows and Krylov complexity",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument(
            "--config",
            default=None,
            help="key = value file supplying defaults for this subcommand",
        )

    p = sub.add_parser("bound", help="speed-limit report for one evolution")
    p.add_argument("--hamiltonian", required=True, help="operator file (.txt/.npy)")
    p.add_argument("--operator", required=True, help="operator file (.txt/.npy)")
    p.add_argument("--metric", choices=("hs", "gibbs", "kubo"), default="hs")
    p.add_argument("--beta", type=float, default=None, help="inverse temperature")
    p.add_argument("--tau", type=float, required=True, help="evolution time")
    p.add_argument("--points", type=int, default=257, help="time-grid points")
    add_common(p)
    p.set_defaults(func=run_bound)

    for kind in ("wegner", "toda"):
        p = sub.add_parser(kind, help=f"{kind} flow on a random tridiagonal matrix")
        p.add_argument("--n", required=True, help="matrix size, or comma list for a sweep")
        p.add_argument("--seed", type=int, required=True, help="PCG64 seed")
        p.add_argument("--traceless", action="store_true")
        p.add_argument("--l-max", type=float, default=None)
        p.add_argument("--samples", type=int, default=401)
        p.add_argument("--rtol", type=float, default=1e-9)
        p.add_argument("--atol", type=float, default=1e-12)
        p.add_argument("--emit-svg", action="store_true")
        add_common(p)
        p.set_defaults(func=run_wegner if kind == "wegner" else run_toda)

    p = sub.add_parser("toda-tight", help="bound-saturating Toda family")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--h1", type=float, default=1.0)
    p.add_argument("--theta0", type=float, default=0.0)
    p.add_argument("--l-max", type=float, default=None)
    p.add_argument("--samples", type=int, default=401)
    # the 1e-8 family-angle contract needs headroom below default tolerances
    p.add_argument("--rtol", type=float, default=1e-11)
    p.add_argument("--atol", type=float, default=1e-13)
    p.add_argument("--emit-svg", action="store_true")
    add_common(p)
    p.set_defaults(func=run_toda_tight)

    p = sub.add_parser("krylov-su2", help="closed su(2) complexity chain")
    p.add_argument("--dim", type=int, required=True, help="chain length D")
    p.add_argument("--alpha", type=float, default=-1.0)
    p.add_argument("--t-max", type=float, default=None)
    p.add_argument("--samples", type=int, default=801)
    p.add_argument("--emit-svg", action="store_true")
    add_common(p)
    p.set_defaults(func=run_krylov_su2)

    p = sub.add_parser("krylov-lanczos", help="Lanczos chain from (H, O0) files")
    p.add_argument("--hamiltonian", required=True)
    p.add_argument("--operator", required=True)
    p.add_argument("--t-max", type=float, default=None)
    p.add_argument("--samples", type=int, default=801)
    add_common(p)
    p.set_defaults(func=run_krylov_lanczos)

    return parser


def _config_flags(path: str) -> list[str]:
    """Translate a ``key = value`` file into CLI flags."""
    flags: list[str] = []
    text = Path(path).read_text()
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"bad config line {raw!r} (expected key = value)")
        key, _, value = line.partition("=")
        key = key.strip().replace("_", "-")
        value = value.strip()
        if key == "config":
            continue
        if value.lower() in ("true", "false"):
            if value.lower() == "true":
                flags.append(f"--{key}")
        else:
            flags.extend([f"--{key}", value])
    return flags


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if getattr(args, "config", None):
            flags = _config_flags(args.config)
            pos = argv.index(args.command) + 1
            args = parser.parse_args(argv[:pos] + flags + argv[pos:])
        return args.func(args)
    except (ValidationError, FlowInvariantError, PathInvariantError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ValueError, OSError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
