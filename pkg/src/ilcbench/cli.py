"""Batch runner: ``ilcbench {check,run,analyze,profile} --config FILE``.

Exit codes: 0 success, 1 I/O error, 2 config error, 3 divergence,
4 certification failure when the config requires a pass.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from pathlib import Path

import numpy as np

from .config import (
    ScenarioConfig,
    basis_spec,
    build_filters,
    build_reference,
    build_scenario,
    learning_model,
    load_config,
)
from .errors import ConfigError, IlcError, InfeasibleDesignError
from .ilc import check_convergence, run_ilc
from .ilc_basis import feedforward_from_params, run_basis_ilc
from .repro import collect_ensemble, performance_bound
from .signal_lti import freq_response, lifted_matrix

EXIT_OK, EXIT_IO, EXIT_CONFIG, EXIT_DIVERGED, EXIT_CERT = 0, 1, 2, 3, 4
DEFAULT_OUT = "ilcbench_out"


def _write_json(path: Path, obj):
    path.write_text(json.dumps(obj, sort_keys=True, indent=2) + "\n", encoding="utf-8")


def _write_csv(path: Path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(x)) if not isinstance(x, (int, np.integer)) else int(x) for x in row])


def sustained_growth(norms, run: int = 3, factor: float = 2.0):
    """First task of ``run`` consecutive rises that end above ``factor``
    times the best norm seen before; ``None`` if there is none.

    The factor keeps noise-level wiggles around a converged floor from being
    read as divergence.
    """
    norms = np.asarray(norms, dtype=float)
    for k in range(1, norms.size - run + 1):
        seg = norms[k - 1: k + run]
        if np.all(np.diff(seg) > 0) and seg[-1] > factor * norms[:k].min():
            return k
    return None


def resolve_out(cfg: ScenarioConfig, out: str | None) -> Path:
    root = out or cfg.output_dir or os.environ.get("ILCBENCH_OUT") or DEFAULT_OUT
    return Path(root) / cfg.name


def _analysis(cfg, sc, r, out: Path):
    ens_spec = cfg.ensemble
    rep = performance_bound(collect_ensemble(sc, r, ens_spec.n_exp, first_task=ens_spec.first_task))
    _write_json(out / "analysis.json", rep.to_dict())
    return rep


def _check(cfg, sc, out: Path):
    L, Q, grid, mask = build_filters(cfg, sc)
    rep = check_convergence(freq_response(sc.PS, grid), L, Q, mask)
    d = rep.to_dict()
    d["preview_samples"] = L.n_preview
    d["l_truncation_error"] = L.truncation_error
    _write_json(out / "convergence.json", d)
    return L, Q, rep


def run_experiment(cfg: ScenarioConfig, verb: str = "run", out: str | None = None,
                   log=None) -> int:
    """Execute one configured experiment and write its artifacts.

    Returns the process exit status.
    """
    log = log or (lambda msg: None)
    out_dir = resolve_out(cfg, out)
    out_dir.mkdir(parents=True, exist_ok=True)
    sc = build_scenario(cfg)
    prof = build_reference(cfg)
    r = prof.position

    if verb == "profile":
        cols = [prof.position, prof.velocity, prof.acceleration, prof.jerk]
        header = ["t", "pos", "vel", "acc", "jerk"]
        if prof.snap is not None:
            cols.append(prof.snap)
            header.append("snap")
        _write_csv(out_dir / "profile.csv", header,
                   zip(r.t, *[c.samples for c in cols]))
        log(f"profile: {len(r)} samples -> {out_dir / 'profile.csv'}")
        return EXIT_OK

    if verb == "analyze":
        if cfg.ensemble is None:
            raise ConfigError("analyze needs an 'ensemble' section", violations=["ensemble: missing"])
        rep = _analysis(cfg, sc, r, out_dir)
        log(f"analyze: ||m_e|| = {rep.mean_norm:.4g}, residual rms = {rep.residual_rms:.4g}")
        return EXIT_OK

    if cfg.ilc is None:
        raise ConfigError(f"'{verb}' needs an 'ilc' section", violations=["ilc: missing"])
    il = cfg.ilc

    if verb == "check":
        _, _, rep = _check(cfg, sc, out_dir)
        log(f"check: sup rho = {rep.sup_rho:.4g} -> {rep.verdict}")
        return EXIT_CERT if (il.require_convergence and not rep.passed) else EXIT_OK

    if verb != "run":
        raise ValueError(f"unknown verb {verb!r}")

    if cfg.ensemble is not None:
        _analysis(cfg, sc, r, out_dir)

    status = EXIT_OK
    summary = {"method": il.method}
    if il.method == "signal":
        L, Q, rep = _check(cfg, sc, out_dir)
        if il.require_convergence and not rep.passed:
            status = EXIT_CERT
        h = run_ilc(sc, r, L, Q, il.alpha, il.n_iter)
        rows = h.rows()
        if il.save_signals:
            sig_dir = out_dir / "signals"
            sig_dir.mkdir(exist_ok=True)
            for j, (e, f) in enumerate(zip(h.e, h.f)):
                _write_csv(sig_dir / f"{j}.csv", ["t", "r", "e", "f"],
                           zip(r.t, r.samples, e.samples, f.samples))
        norms = h.e_norms
        summary.update(sup_rho=rep.sup_rho, verdict=rep.verdict)
    else:
        spec = basis_spec(cfg)
        J = lifted_matrix(learning_model(cfg, sc), len(r))
        thetas, errs = run_basis_ilc(sc, prof, spec, J, il.n_iter, w_e=il.w_e, w_dtheta=il.w_dtheta)
        norms = np.array([e.norm() for e in errs])
        rows = [(j, float(norms[j]), feedforward_from_params(t, prof, spec).norm())
                for j, t in enumerate(thetas)]
        _write_csv(out_dir / "theta.csv", ["task"] + list(spec.generators),
                   [(j, *t) for j, t in enumerate(thetas)])
        h = None
    _write_csv(out_dir / "history.csv", ["task", "e_norm_2", "f_norm_2"], rows)

    growth = sustained_growth(norms)
    flagged = bool(h is not None and h.diverged)
    diverged = flagged or growth is not None
    rising = np.flatnonzero(np.diff(norms) > 0)
    summary.update(
        n_tasks=int(norms.size),
        final_e_norm_2=float(norms[-1]),
        first_rising_task=int(rising[0] + 1) if rising.size else None,
        sustained_growth_from=growth,
        threshold_exceeded=flagged,
        diverged=diverged,
    )
    if diverged:
        status = EXIT_DIVERGED
    summary["exit_status"] = status
    _write_json(out_dir / "run.json", summary)
    log(f"run: {norms.size} tasks, final ||e|| = {norms[-1]:.4g}" + (", diverged" if diverged else ""))
    return status


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="ilcbench", description="Run ILC experiments from JSON configs.")
    ap.add_argument("verb", choices=["check", "run", "analyze", "profile"])
    ap.add_argument("--config", required=True, help="path to the JSON config")
    ap.add_argument("--out", default=None, help="output root (default: config, then $ILCBENCH_OUT)")
    ap.add_argument("--seed-override", type=int, default=None, help="replace the disturbance seed")
    ap.add_argument("--quiet", action="store_true")
    args = ap.parse_args(argv)
    log = (lambda m: None) if args.quiet else (lambda m: print(m))
    try:
        cfg = load_config(args.config)
        if args.seed_override is not None:
            if args.seed_override < 0:
                raise ConfigError("seed must be >= 0", violations=["--seed-override: must be >= 0"])
            dist = cfg.disturbance.model_copy(update={"seed": args.seed_override})
            cfg = cfg.model_copy(update={"disturbance": dist})
        return run_experiment(cfg, args.verb, args.out, log)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InfeasibleDesignError as exc:
        print(f"certification failed: {exc}", file=sys.stderr)
        return EXIT_CERT
    except IlcError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
