"""Batch command-line runner: ``tsmdp <command> --scenario example3 ...``.

Every command writes CSV/JSON files into ``--output-dir`` together with a
manifest echoing the configuration, so a rerun with the same manifest gives
byte-identical files.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .assumptions import DROPPED_FACTOR, check_assumption2, relative_entropy
from .planner import solve
from .regret import (
    EPS_TAIL,
    check_proposition1,
    frozen_belief_residual_regret,
    posterior_error_curve,
    proposition1_bound,
    regret_report,
)
from .scenarios import ScenarioError, load_scenario
from .thompson import ORACLE, THOMPSON, FixedControl, first_sample_wrong, run_batch

log = logging.getLogger("tsmdp")

COMMANDS = ("solve", "simulate", "regret", "learn-curve", "bound-check", "check-assumptions", "decompose")
EXIT_OK, EXIT_USAGE, EXIT_INVALID, EXIT_STRICT = 0, 1, 2, 3


class UsageError(Exception):
    pass


@dataclass
class ExperimentConfig:
    command: str
    scenario: str = "example3"
    horizon: int = 100
    runs: int = 1000
    seed: int = 0
    n_values: list = field(default_factory=lambda: [1, 5, 10, 20])
    condition_first_sample_wrong: bool = False
    output_dir: str = "out"
    eps_tail: float = EPS_TAIL
    beta_override: float | None = None
    policy: str = "thompson"
    per_run: bool = False
    strict: bool = False
    force: bool = False

    def validate(self):
        if self.command not in COMMANDS:
            raise UsageError(f"unknown command {self.command!r}")
        if self.runs < 1 or self.horizon < 1 or not self.eps_tail > 0:
            raise UsageError("need runs >= 1, horizon >= 1, eps-tail > 0")


class _Writer:
    def __init__(self, cfg: ExperimentConfig):
        self.dir = Path(cfg.output_dir)
        self.force = cfg.force
        self.manifest = f"manifest-{cfg.command}.json"
        self.files: list[str] = []

    def _target(self, name: str) -> Path:
        path = self.dir / name
        if path.exists() and not self.force:
            raise UsageError(f"{path} exists; pass --force to overwrite")
        self.files.append(name)
        return path

    def csv(self, name: str, header: list[str], rows) -> None:
        path = self._target(name)
        with path.open("w", newline="") as fh:
            fh.write(f"# manifest: {self.manifest}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([_fmt(v) for v in row])

    def json(self, name: str, obj) -> None:
        self._target(name).write_text(json.dumps(obj, indent=2, sort_keys=True, default=_fmt) + "\n")


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, np.bool_):
        return bool(v)
    return v


def _policy(cfg: ExperimentConfig, s):
    name = cfg.policy.lower()
    if name == "oracle":
        return ORACLE
    if name == "thompson":
        return THOMPSON
    if name.startswith("fixed:"):
        label = cfg.policy.split(":", 1)[1]
        if label not in s.controls:
            raise UsageError(f"unknown control label {label!r}; choose from {s.controls}")
        return FixedControl(s.control_index(label))
    raise UsageError(f"unknown policy {cfg.policy!r} (oracle, thompson, fixed:<control>)")


def _cmd_solve(cfg, s, out):
    plan = solve(s)
    rows = [
        (s.params[p], s.states[x], plan.values[p, x], s.controls[plan.policies[p, x]])
        for p in range(s.n_params)
        for x in range(s.n_states)
    ]
    out.csv("solve.csv", ["param", "state", "value", "control"], rows)
    return True


def _cmd_simulate(cfg, s, out):
    cond = first_sample_wrong(s) if cfg.condition_first_sample_wrong else None
    batch = run_batch(s, _policy(cfg, s), cfg.horizon, cfg.runs, cfg.seed, condition=cond)
    pcols = [f"belief_{p}" for p in s.params]
    if cfg.per_run:
        for i in range(len(batch)):
            tr = batch[i]
            rows = [
                (t, s.states[tr.states[t]], s.params[tr.samples[t]], s.controls[tr.controls[t]], tr.rewards[t], *tr.beliefs[t])
                for t in range(len(tr))
            ]
            out.csv(f"run_{i:05d}.csv", ["period", "state", "sample", "control", "reward", *pcols], rows)
    mean_r = batch.rewards.mean(axis=0)
    mean_b = batch.beliefs[:, :-1].mean(axis=0)
    out.csv(
        "simulate.csv",
        ["period", "mean_reward", *[f"mean_{c}" for c in pcols]],
        [(t, mean_r[t], *mean_b[t]) for t in range(batch.horizon)],
    )
    out.json("simulate-summary.json", {"runs": len(batch), "attempts": batch.attempts, "acceptance_rate": batch.acceptance_rate})
    return True


def _reports(cfg, s):
    cond = first_sample_wrong(s) if cfg.condition_first_sample_wrong else None
    return [regret_report(s, n, max(cfg.runs, 2), cfg.seed, condition=cond, eps=cfg.eps_tail) for n in cfg.n_values]


def _cmd_regret(cfg, s, out):
    cond = first_sample_wrong(s) if cfg.condition_first_sample_wrong else None
    reports = _reports(cfg, s)
    rows = []
    for r in reports:
        frozen = frozen_belief_residual_regret(s, r.n, max(cfg.runs, 2), cfg.seed, condition=cond, eps=cfg.eps_tail)
        rows.append((
            r.n, r.finite_time.mean, r.state.mean, r.residual.mean, r.residual_td.mean, r.total.mean,
            r.finite_time.std_error, r.state.std_error, r.residual.std_error, r.residual_td.std_error,
            r.total.std_error, frozen.mean, frozen.std_error,
        ))
    out.csv(
        "regret.csv",
        ["n", "finite_time", "state", "residual", "residual_td", "total",
         "finite_time_se", "state_se", "residual_se", "residual_td_se", "total_se",
         "residual_frozen", "residual_frozen_se"],
        rows,
    )
    return _identity_summary(reports, out)


def _identity_summary(reports, out):
    checks = []
    ok = True
    for r in reports:
        ident = r.identity_holds()
        nonneg = r.residual.mean >= -3 * r.residual.std_error
        agree = abs(r.residual.mean - r.residual_td.mean) <= 3 * np.hypot(r.residual.std_error, r.residual_td.std_error)
        ok &= ident and nonneg and agree
        checks.append({
            "n": r.n, "identity_gap": r.identity_gap.mean, "identity_gap_se": r.identity_gap.std_error,
            "identity_holds": ident, "residual_nonnegative": nonneg, "estimators_agree": bool(agree),
        })
    out.json("identity-check.json", {"all_passed": bool(ok), "checks": checks})
    return bool(ok)


def _cmd_decompose(cfg, s, out):
    reports = _reports(cfg, s)
    rows = [
        (r.n, r.finite_time.mean + r.state.mean + r.residual.mean, r.total.mean,
         r.identity_gap.mean, r.identity_gap.std_error, r.identity_holds())
        for r in reports
    ]
    out.csv("decompose.csv", ["n", "sum_of_components", "total", "gap", "gap_se", "holds"], rows)
    return _identity_summary(reports, out)


def _curve(cfg, s):
    cond = first_sample_wrong(s) if cfg.condition_first_sample_wrong else None
    return posterior_error_curve(s, cfg.horizon, max(cfg.runs, 10), cfg.seed, condition=cond)


def _cmd_learn_curve(cfg, s, out):
    c = _curve(cfg, s)
    fitted = c.fitted(c.periods) if c.fit_ok else np.full(len(c.periods), np.nan)
    out.csv(
        "learn-curve.csv",
        ["t", "error", "error_se", "fitted_bound"],
        zip(c.periods, c.error, c.std_error, fitted),
    )
    out.json("learn-curve-fit.json", {"fitted_a": c.fitted_a, "fitted_b": c.fitted_b, "fit_ok": c.fit_ok})
    return c.fit_ok and c.fitted_b > 0


def _cmd_bound_check(cfg, s, out):
    c = _curve(cfg, s)
    if not c.fit_ok:
        out.json("bound-check.json", {"fit_ok": False})
        return False
    check = check_proposition1(s, c, _reports(cfg, s))
    out.csv(
        "bound-check.csv",
        ["n", "residual", "residual_se", "bound", "pass"],
        [(n, e.mean, e.std_error, b, p) for n, e, b, p in zip(check.n, check.estimates, check.bounds, check.passed)],
    )
    out.json("bound-check.json", {
        "fit_ok": True, "fitted_a": c.fitted_a, "fitted_b": c.fitted_b,
        "all_passed": check.all_passed, "failing_n": check.failing,
    })
    return check.all_passed and c.fitted_b > 0


def _cmd_check_assumptions(cfg, s, out):
    rep = check_assumption2(s)
    rows = []
    for (x, u, g), k in sorted(rep.entropy_matrix.items()):
        k_alt = relative_entropy(s, x, u, s.true_param, g, convention=DROPPED_FACTOR)
        rows.append((s.states[x], s.controls[u], s.params[s.true_param], s.params[g], k, k_alt))
    out.csv(
        "entropy-matrix.csv",
        ["state", "control", "true_param", "other_param", "relative_entropy", "relative_entropy_dropped_factor"],
        rows,
    )
    body = rep.to_dict(s)
    body["status"] = "satisfied" if rep.satisfied else "violated"
    out.json("assumptions.json", body)
    return rep.satisfied


HANDLERS = {
    "solve": _cmd_solve,
    "simulate": _cmd_simulate,
    "regret": _cmd_regret,
    "decompose": _cmd_decompose,
    "learn-curve": _cmd_learn_curve,
    "bound-check": _cmd_bound_check,
    "check-assumptions": _cmd_check_assumptions,
}


def run_experiment(cfg: ExperimentConfig) -> int:
    """Run one command; returns the process exit code."""
    try:
        cfg.validate()
        s = load_scenario(cfg.scenario)
        if cfg.beta_override is not None:
            if not 0 <= cfg.beta_override < 1:
                raise UsageError("--beta-override must lie in [0, 1)")
            s = s.with_beta(cfg.beta_override)
    except ScenarioError as exc:
        log.error("%s", exc)
        return EXIT_INVALID
    except UsageError as exc:
        log.error("%s", exc)
        return EXIT_USAGE
    out = _Writer(cfg)
    try:
        out.dir.mkdir(parents=True, exist_ok=True)
        manifest_path = out.dir / out.manifest
        if manifest_path.exists() and not cfg.force:
            raise UsageError(f"{manifest_path} exists; pass --force to overwrite")
        passed = HANDLERS[cfg.command](cfg, s, out)
    except UsageError as exc:
        log.error("%s", exc)
        return EXIT_USAGE
    manifest = {
        # --force is a write mode, not part of the experiment
        "config": {k: v for k, v in asdict(cfg).items() if k != "force"},
        "version": __version__,
        "scenario": s.name,
        "beta": s.beta,
        "seed": cfg.seed,
        "files": out.files,
        "checks_passed": bool(passed),
    }
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    log.info("%s: wrote %d files to %s (checks %s)", cfg.command, len(out.files), out.dir, "passed" if passed else "FAILED")
    if cfg.strict and not passed:
        return EXIT_STRICT
    return EXIT_OK


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="tsmdp", description="Thompson sampling regret experiments on parametrized MDPs.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--scenario", default="example3", help="built-in name (example1/2/3) or JSON file")
    p.add_argument("--horizon", type=int, default=100)
    p.add_argument("--runs", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n", dest="n_values", type=_int_list, default=[1, 5, 10, 20], help="e.g. 1,5,10,20")
    p.add_argument("--beta-override", type=float, default=None)
    p.add_argument("--condition-first-sample-wrong", action="store_true")
    p.add_argument("--output-dir", default="out")
    p.add_argument("--eps-tail", type=float, default=EPS_TAIL)
    p.add_argument("--policy", default="thompson", help="simulate only: oracle, thompson or fixed:<control label>")
    p.add_argument("--per-run", action="store_true", help="simulate only: one CSV per run")
    p.add_argument("--strict", action="store_true", help="exit 3 when a check fails")
    p.add_argument("--force", action="store_true", help="overwrite existing outputs")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = vars(build_parser().parse_args(argv))
    logging.basicConfig(level=logging.INFO if args.pop("verbose") else logging.WARNING, format="%(levelname)s %(message)s")
    return run_experiment(ExperimentConfig(**args))


if __name__ == "__main__":
    sys.exit(main())
