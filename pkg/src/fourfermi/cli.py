"""Command-line front end.

Single binary with subcommands ``build``, ``groundstate``, ``correlator``,
``dla``, ``resources``, and ``cost-sweep``.  Structured results are JSON,
curves and traces are CSV, and report-style outputs additionally render a
matplotlib figure next to the delimited data.

Every output embeds its run manifest (command, spec, config, seed, tool
version).  The manifest hash excludes the wall-clock timestamp, so repeated
runs with identical inputs produce byte-identical JSON.

Exit codes: 0 success, 2 bad input, 3 capacity exceeded, 4 missing
artifact, 5 non-convergence.
"""

from __future__ import annotations

import argparse
import datetime
import hashlib
import json
import sys
from dataclasses import dataclass
from pathlib import Path

from . import __version__
from .models import Model, ModelSpec, build_hamiltonian, term_counts

EXIT_OK = 0
EXIT_BAD_INPUT = 2
EXIT_CAPACITY = 3
EXIT_MISSING_ARTIFACT = 4
EXIT_NON_CONVERGENCE = 5


# ---------------------------------------------------------------------------
# manifest plumbing
# ---------------------------------------------------------------------------


@dataclass
class RunManifest:
    command: str
    spec: dict | None
    config: dict
    seed: int
    tool_version: str = __version__

    def payload(self) -> dict:
        """Hash-stable portion of the manifest (no timestamp)."""
        return {
            "command": self.command,
            "spec": self.spec,
            "config": self.config,
            "seed": self.seed,
            "tool_version": self.tool_version,
        }

    def sha256(self) -> str:
        blob = json.dumps(self.payload(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()

    def resolved(self) -> dict:
        """Full manifest for --dry-run display; includes the timestamp,
        which is deliberately outside the hashed payload."""
        d = self.payload()
        d["manifest_sha256"] = self.sha256()
        d["timestamp"] = datetime.datetime.now(
            datetime.timezone.utc
        ).isoformat()
        return d


def _write_json(path: Path, data: dict, manifest: RunManifest) -> None:
    data = dict(data)
    data["manifest"] = manifest.payload()
    data["manifest_sha256"] = manifest.sha256()
    path.write_text(json.dumps(data, indent=1, sort_keys=True) + "\n")


def _figure():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


# ---------------------------------------------------------------------------
# argument handling
# ---------------------------------------------------------------------------


def _add_spec_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--model", choices=[m.value for m in Model], required=True)
    p.add_argument("--L", type=int, required=True)
    p.add_argument("--Nf", type=int, required=True)
    p.add_argument("--m", type=float, default=0.5)
    p.add_argument("--g", type=float, default=0.0)


def _add_common_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--out", type=Path, default=Path("."),
                   help="output directory")
    p.add_argument("--dry-run", action="store_true",
                   help="print the resolved manifest and exit")


def _spec_from(args) -> ModelSpec:
    return ModelSpec(Model(args.model), args.L, args.Nf, args.m, args.g)


def _outdir(args) -> Path:
    args.out.mkdir(parents=True, exist_ok=True)
    return args.out


def _limit_threads(args):
    if args.threads is None:
        return None
    import threadpoolctl

    return threadpoolctl.threadpool_limits(limits=args.threads)


def _dry_run(args, manifest: RunManifest) -> bool:
    if args.dry_run:
        print(json.dumps(manifest.resolved(), indent=1))
        return True
    return False


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_build(args) -> int:
    spec = _spec_from(args)
    manifest = RunManifest("build", json.loads(spec.to_json()), {}, args.seed)
    if _dry_run(args, manifest):
        return EXIT_OK
    out = _outdir(args)
    h = build_hamiltonian(spec)
    (out / "hamiltonian.txt").write_text(h.to_text())
    report = term_counts(spec, verify=True)
    _write_json(out / "counts.json", report.to_dict(), manifest)
    print(f"wrote {out / 'hamiltonian.txt'} and {out / 'counts.json'}")
    return EXIT_OK


def cmd_groundstate(args) -> int:
    from . import avqite
    from .statevector import save_statevector

    spec = _spec_from(args)
    cfg = avqite.AvqiteConfig(
        dtau=args.dtau, dtau_fine=args.dtau_fine,
        fine_below=args.fine_below,
        l2_cut=args.l2cut, v_cut=args.vcut,
        ridge=args.ridge, max_steps=args.max_steps,
        refresh_every=args.refresh, shortlist=args.shortlist,
        max_parameters=args.max_params,
    )
    config = {"method": args.method, "pool": args.pool,
              "precision": args.precision, **cfg.to_dict()}
    manifest = RunManifest(
        "groundstate", json.loads(spec.to_json()), config, args.seed
    )
    if _dry_run(args, manifest):
        return EXIT_OK
    out = _outdir(args)
    with_threads = _limit_threads(args)
    try:
        if args.method == "exact":
            from .exact import ground_state_for

            res = ground_state_for(spec, seed=args.seed)
            _write_json(
                out / "groundstate.json",
                json.loads(res.summary_json()),
                manifest,
            )
            if args.state_out:
                save_statevector(args.state_out, res.ground_state)
            print(f"energy {res.ground_energy:.6f} (gap {res.gap:.6f})")
        else:
            res = avqite.run(
                spec, cfg, args.pool, seed=args.seed,
                progress=args.progress, precision=args.precision,
            )
            _write_json(out / "avqite.json", res.summary_dict(), manifest)
            res.write_trace_csv(out / "avqite_trace.csv")
            _plot_trace(res, out / "avqite_trace.png")
            if args.state_out:
                from .statevector import StateVector

                save_statevector(
                    args.state_out,
                    StateVector(spec.n_qubits,
                                res.ansatz.current.astype(complex)),
                )
            fid = "n/a" if res.fidelity is None else f"{res.fidelity:.6f}"
            print(f"energy {res.energy:.6f} fidelity {fid} "
                  f"ops {res.ansatz.n_parameters} "
                  f"converged {res.converged}")
    finally:
        if with_threads is not None:
            with_threads.unregister()
    return EXIT_OK


def _plot_trace(res, path: Path) -> None:
    plt = _figure()
    fig, (ax1, ax2) = plt.subplots(2, 1, sharex=True, figsize=(6, 6))
    steps = [r.step for r in res.trace]
    ax1.plot(steps, [r.energy for r in res.trace], marker=".")
    if res.exact_energy is not None:
        ax1.axhline(res.exact_energy, ls="--", color="gray", label="exact")
        ax1.legend()
    ax1.set_ylabel("energy")
    ax2.semilogy(steps, [max(r.l2, 1e-16) for r in res.trace], marker=".")
    ax2.set_ylabel(r"$L^2$")
    ax2.set_xlabel("step")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def cmd_correlator(args) -> int:
    from .observables import correlator_profile, write_correlator_csv

    spec = _spec_from(args)
    config = {"state": str(args.state) if args.state else None,
              "method": args.method}
    manifest = RunManifest(
        "correlator", json.loads(spec.to_json()), config, args.seed
    )
    if _dry_run(args, manifest):
        return EXIT_OK
    out = _outdir(args)
    if args.state is not None:
        from .statevector import load_statevector

        if not Path(args.state).exists():
            print(f"state file not found: {args.state}", file=sys.stderr)
            return EXIT_MISSING_ARTIFACT
        state = load_statevector(args.state)
        if state.n_qubits != spec.n_qubits:
            raise ValueError(
                f"state has {state.n_qubits} qubits, spec needs "
                f"{spec.n_qubits}"
            )
        psi = state.amplitudes
    else:
        from .exact import ground_state_for

        psi = ground_state_for(spec, seed=args.seed).ground_state.amplitudes
    rows = correlator_profile(psi, spec)
    write_correlator_csv(out / "correlator.csv", rows)
    _plot_correlator(rows, out / "correlator.png")
    for r, c, cn in rows:
        print(f"r={r} C={c:+.6e} C/C0={cn:+.6e}")
    return EXIT_OK


def _plot_correlator(rows, path: Path) -> None:
    plt = _figure()
    fig, ax = plt.subplots(figsize=(5, 4))
    rs = [r for r, _, _ in rows]
    ax.plot(rs, [max(abs(cn), 1e-16) for _, _, cn in rows], marker="o")
    ax.set_yscale("log")
    ax.set_xlabel("r")
    ax.set_ylabel("|C(r)/C(0)|")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def cmd_dla(args) -> int:
    from .dla import free_theory_dla, verify_dla

    spec = _spec_from(args)
    manifest = RunManifest("dla", json.loads(spec.to_json()), {}, args.seed)
    if _dry_run(args, manifest):
        return EXIT_OK
    out = _outdir(args)
    if spec.g == 0:
        report = free_theory_dla(spec)
        matches = None
    else:
        matches, report = verify_dla(spec)
    data = json.loads(report.to_json())
    data["matches_prediction"] = matches
    _write_json(out / "dla.json", data, manifest)
    print(f"closure dimension {report.closure_dimension} "
          f"(predicted {report.predicted_dimension})")
    return EXIT_OK


def cmd_resources(args) -> int:
    from . import resources as rs

    spec = _spec_from(args)
    config = {"t": args.t, "epsilon": args.epsilon, "order": args.order}
    manifest = RunManifest(
        "resources", json.loads(spec.to_json()), config, args.seed
    )
    if _dry_run(args, manifest):
        return EXIT_OK
    out = _outdir(args)
    h = build_hamiltonian(spec)
    report = rs.model_gate_report(spec, h)
    part = rs.color_clusters(h)
    bound = rs.commutator_bound(part, "norm_product")
    report.commutator_bound = bound
    report.trotter_steps_p1 = rs.trotter_steps(bound, args.t, args.epsilon, 1)
    data = json.loads(report.to_json())
    data["lcu_one_norm"] = rs.lcu_one_norm(h)
    data["qsvt_degree"] = rs.qsvt_degree(
        rs.lcu_one_norm(h), args.t, args.epsilon
    )
    prep, select, walk = rs.select_prep_cost_model(spec.L, spec.Nf)
    data["select_prep"] = {"prep": prep, "select": select, "walk": walk}
    _write_json(out / "resources.json", data, manifest)
    print(f"Gamma={report.gamma} CX/step={report.cx_count} "
          f"rotations/step={report.rotation_count} "
          f"steps(p=1)={report.trotter_steps_p1}")
    return EXIT_OK


def cmd_cost_sweep(args) -> int:
    from . import resources as rs

    config = {"axis": args.axis, "values": args.values, "L": args.L,
              "Nf": args.Nf, "t": args.t, "epsilon": args.epsilon,
              "order": args.order}
    manifest = RunManifest("cost-sweep", None, config, args.seed)
    if _dry_run(args, manifest):
        return EXIT_OK
    out = _outdir(args)
    curve = rs.cost_curve(
        args.axis, args.values, L=args.L, Nf=args.Nf, t=args.t,
        eps=args.epsilon, p=args.order,
    )
    curve.write_csv(out / "cost_sweep.csv")
    _plot_costs(curve, out / "cost_sweep.png")
    for x, pf, q in curve.points:
        print(f"{curve.axis}={x:g} cost_pf={pf:.4e} cost_qsvt={q:.4e}")
    return EXIT_OK


def _plot_costs(curve, path: Path) -> None:
    plt = _figure()
    fig, ax = plt.subplots(figsize=(5, 4))
    xs = [x for x, _, _ in curve.points]
    ax.loglog(xs, [pf for _, pf, _ in curve.points], marker="o",
              label="product formula")
    ax.loglog(xs, [q for _, _, q in curve.points], marker="s",
              label="QSVT")
    ax.set_xlabel(curve.axis)
    ax.set_ylabel("cost (model units)")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="fourfermi",
        description="Lattice Thirring / Gross-Neveu simulation and "
                    "resource-estimation toolkit",
    )
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("build", help="build the Hamiltonian and term counts")
    _add_spec_args(p)
    _add_common_args(p)
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("groundstate", help="exact or AVQITE ground state")
    _add_spec_args(p)
    p.add_argument("--method", choices=("exact", "avqite"), default="exact")
    p.add_argument("--pool", choices=("yy_yyz", "xy_yyz"), default="yy_yyz")
    p.add_argument("--dtau", type=float, default=0.02)
    p.add_argument("--dtau-fine", type=float, default=None,
                   help="smaller step used once max|V| < --fine-below")
    p.add_argument("--fine-below", type=float, default=0.0)
    p.add_argument("--l2cut", type=float, default=1e-2)
    p.add_argument("--vcut", type=float, default=1e-4)
    p.add_argument("--ridge", type=float, default=1e-6)
    p.add_argument("--max-steps", type=int, default=500)
    p.add_argument("--refresh", type=int, default=1)
    p.add_argument("--shortlist", type=int, default=64)
    p.add_argument("--max-params", type=int, default=None)
    p.add_argument("--precision", choices=("double", "single"),
                   default="double")
    p.add_argument("--progress", action="store_true")
    p.add_argument("--state-out", type=Path, default=None,
                   help="save the resulting statevector to this file")
    _add_common_args(p)
    p.set_defaults(func=cmd_groundstate)

    p = sub.add_parser("correlator", help="condensate correlator profile")
    _add_spec_args(p)
    p.add_argument("--state", type=Path, default=None,
                   help="statevector file; defaults to the exact "
                        "ground state")
    p.add_argument("--method", choices=("exact",), default="exact")
    _add_common_args(p)
    p.set_defaults(func=cmd_correlator)

    p = sub.add_parser("dla", help="dynamical Lie algebra closure")
    _add_spec_args(p)
    _add_common_args(p)
    p.set_defaults(func=cmd_dla)

    p = sub.add_parser("resources", help="Trotter/QSVT resource report")
    _add_spec_args(p)
    p.add_argument("--t", type=float, default=100.0)
    p.add_argument("--epsilon", type=float, default=1e-6)
    p.add_argument("--order", type=int, default=1)
    _add_common_args(p)
    p.set_defaults(func=cmd_resources)

    p = sub.add_parser("cost-sweep", help="asymptotic cost-model curves")
    p.add_argument("--axis", choices=("L", "t"), default="L")
    p.add_argument("--values", type=float, nargs="+",
                   default=[10, 30, 100, 300, 1000])
    p.add_argument("--L", type=float, default=100.0)
    p.add_argument("--Nf", type=float, default=6.0)
    p.add_argument("--t", type=float, default=100.0)
    p.add_argument("--epsilon", type=float, default=1e-6)
    p.add_argument("--order", type=int, default=10)
    _add_common_args(p)
    p.set_defaults(func=cmd_cost_sweep)

    return ap


def main(argv=None) -> int:
    from .exact import NonConvergenceError
    from .pauli import CapacityError

    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:  # argparse uses 2 for usage errors already
        return int(exc.code or 0)
    try:
        return args.func(args)
    except CapacityError as exc:
        print(f"capacity exceeded: {exc}", file=sys.stderr)
        return EXIT_CAPACITY
    except NonConvergenceError as exc:
        print(f"did not converge: {exc}", file=sys.stderr)
        return EXIT_NON_CONVERGENCE
    except FileNotFoundError as exc:
        print(f"missing artifact: {exc}", file=sys.stderr)
        return EXIT_MISSING_ARTIFACT
    except (ValueError, json.JSONDecodeError) as exc:
        print(f"bad input: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT


if __name__ == "__main__":
    sys.exit(main())
