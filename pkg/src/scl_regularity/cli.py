"""Command-line front end.

    scl-regularity run --config run.ini --out out/
    scl-regularity times --config run.ini --out out/

Each analysis writes one CSV (17 significant digits) into the output
directory; ``manifest.json`` records the config hash, the library version
and every check with its tolerance and outcome.  The exit status is 0 when
all checks pass, 1 when a check fails and 2 for configuration errors.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .config import ANALYSES, ConfigError, RunConfig, load_config
from .exact import ExactSolution, interaction_times, kruzkov_secant_check, pair_crossing_times
from .flux import FluxSpec, effective_flux, nondegeneracy_exponent
from .fv import convergence_study, godunov_solve, Grid1D
from .profile import PlanarProfile
from .seminorm import (SeminormQuery, kappa_closed_form, lemma2_check, lemma2_samples, rung_scale,
                       truncated_besov, truncation_fit)
from .staircase import BlowupParams, build_riemann, build_single_box, build_tiling

logger = logging.getLogger(__name__)


@dataclass
class Check:
    name: str
    value: float
    tolerance: str
    passed: bool


@dataclass
class AnalysisOutput:
    header: list[str]
    rows: list[list]
    checks: list[Check] = field(default_factory=list)
    extra_files: dict[str, str] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)


def fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.17g}"
    return str(v)


# ---------------------------------------------------------------------------
# building blocks from the config
# ---------------------------------------------------------------------------


def blowup_params(cfg: RunConfig) -> BlowupParams:
    p = cfg.params
    construction = "prop2" if cfg.run.construction == "prop2" else "prop1"
    return BlowupParams(construction=construction, zeta=p.zeta, d=p.d, eps=p.eps, R=p.R, N=p.N,
                        n_max=p.n_max, box_half_width=p.box_half_width, inner_fraction=p.inner_fraction)


def flux_spec(cfg: RunConfig, params: BlowupParams | None = None) -> FluxSpec:
    f = cfg.flux
    family = f.family
    if family is None:
        family = "prop2-pair" if cfg.run.construction in ("prop2", "lemma1-riemann") else "power-law"
    if f.u_bound is not None:
        bound = f.u_bound
    elif cfg.run.construction == "lemma1-riemann":
        bound = 2.0 * max(abs(cfg.riemann.a), abs(cfg.riemann.b), 1e-3)
    else:
        params = blowup_params(cfg) if params is None else params
        bound = 2.0 * max(params.sigma_max, params.tail_value)
    if family == "power-law":
        return FluxSpec.power_law(cfg.params.zeta, cfg.params.d, bound)
    if family == "prop2-pair":
        return FluxSpec.prop2_pair(bound)
    return FluxSpec.polynomial(f.coefficient_lists(), bound)


def initial_profile(cfg: RunConfig) -> tuple[PlanarProfile, FluxSpec, BlowupParams | None]:
    if cfg.run.construction == "lemma1-riemann":
        spec = flux_spec(cfg)
        direction = cfg.flux.direction or (1.0, -1.0)
        prof = build_riemann(cfg.riemann.a, cfg.riemann.b, direction, cfg.riemann.box_half_width,
                             cfg.params.inner_fraction)
        return prof, spec, None
    params = blowup_params(cfg)
    spec = flux_spec(cfg, params)
    prof = build_single_box(params, spec, cfg.flux.direction)
    return prof, spec, params


# ---------------------------------------------------------------------------
# analyses
# ---------------------------------------------------------------------------


def analysis_build(cfg: RunConfig, threads: int) -> AnalysisOutput:
    prof, spec, params = initial_profile(cfg)
    rows = [[prof.edges[k], "const", prof.value[k], prof.rung[k]] for k in range(prof.n_pieces)]
    out = AnalysisOutput(["m_left", "kind", "value", "rung"], rows)
    out.extra_files["profile.txt"] = prof.to_text()
    out.checks.append(Check("values_nonnegative", float(prof.value.min()), ">= 0", bool(prof.value.min() >= 0)))
    return out


def analysis_times(cfg: RunConfig, threads: int) -> AnalysisOutput:
    prof, spec, params = initial_profile(cfg)
    sol = ExactSolution.from_profile(prof, spec, params)
    s = sol.schedule
    rows = [["t_bruteforce", s.t_bruteforce], ["t1_prime", s.t1_prime], ["t0", s.t0]]
    out = AnalysisOutput(["quantity", "value"], rows)
    out.checks.append(Check("t0_positive", s.t0, "> 0", s.t0 > 0))
    out.checks.append(Check("lax_admissible", float(s.lax_admissible(sol.flux)), "== 1", s.lax_admissible(sol.flux)))
    if params is not None and spec.family != "polynomial":
        t_n, t_tilde = interaction_times(params, spec)
        n = np.arange(params.start, params.last + 1)
        t_char, t_shock = pair_crossing_times(params, sol.flux, n)
        rows[0:0] = [["t_n", t_n], ["t_tilde_n", t_tilde], ["t_tilde_n_actual_min", float(t_shock.min())]]
        closed = min(t_n, t_tilde)
        rel = abs(s.t_bruteforce - closed) / closed
        out.checks.append(Check("bruteforce_matches_closed_form", rel, "<= 1e-12", rel <= 1e-12))
    return out


def analysis_exact_eval(cfg: RunConfig, threads: int) -> AnalysisOutput:
    prof, spec, params = initial_profile(cfg)
    sol = ExactSolution.from_profile(prof, spec, params)
    t = cfg.exact_eval.t_fraction * sol.t0
    xi = np.asarray(prof.direction)
    finite = prof.edges[np.isfinite(prof.edges)]
    m = np.linspace(finite.min(), finite.max(), cfg.exact_eval.samples)
    x = np.outer(m / float(xi @ xi), xi) + np.asarray(prof.box_center)
    u = sol.evaluate(x, t)
    rows = [list(xx) + [mm, t, uu] for xx, mm, uu in zip(x, m, u)]
    header = [f"x{i + 1}" for i in range(len(xi))] + ["m", "t", "u"]
    out = AnalysisOutput(header, rows)
    now = sol.at(t)
    lo = finite.min() - 1.0 - sol.schedule.max_speed * t
    hi = finite.max() + 1.0 + sol.schedule.max_speed * t
    m0 = float(prof.antiderivative(np.array([hi]), lo, hi)[0])
    m1 = float(now.antiderivative(np.array([hi]), lo, hi)[0])
    err = abs(m1 - m0)
    out.checks.append(Check("mass_conservation", err, "<= 1e-10", err <= 1e-10))
    return out


def analysis_validate(cfg: RunConfig, threads: int) -> AnalysisOutput:
    v = cfg.validate
    prof, spec, params = initial_profile(cfg)
    sol = ExactSolution.from_profile(prof, spec, params)
    t = v.t_fraction * sol.t0
    lo, hi = validation_domain(prof, v.pad)
    vmax = float(np.max(np.abs(sol.flux.dg(np.linspace(*prof.state_range(), 257)))))
    window = (lo + vmax * t, hi - vmax * t)
    rows_cs = convergence_study(prof, sol.at(t), sol.flux, lo, hi, t, v.cells, window, v.cfl)
    rows = [[r.cells, r.dm, r.l1_error, r.observed_order] for r in rows_cs]
    out = AnalysisOutput(["cells", "dm", "L1_error", "observed_order"], rows)
    orders = [r.observed_order for r in rows_cs[1:]]
    ok = all(v.order_min <= o <= v.order_max for o in orders)
    out.checks.append(Check("observed_order", min(orders), f"in [{v.order_min}, {v.order_max}]", ok))
    fin = rows_cs[-1].l1_error
    out.checks.append(Check("finest_error", fin, f"< {v.error_max}", fin < v.error_max))
    res = godunov_solve(prof, sol.flux, Grid1D(lo, hi, v.cells[-1], t, v.cfl))
    viol = res.max_principle_violations()
    out.checks.append(Check("max_principle_violations", viol, "== 0", viol == 0))
    return out


def validation_domain(prof: PlanarProfile, pad: float) -> tuple[float, float]:
    """First breakpoint to the last finite staircase breakpoint, padded.

    For the staircases the right end is where the constant tail starts;
    states are nonnegative so all waves move right and outflow is exact
    there.
    """
    edges = prof.edges[np.isfinite(prof.edges)]
    right = edges[-2] if prof.meta.get("construction") in ("prop1", "prop2") else edges[-1]
    return float(edges[0] - pad), float(right + pad)


def analysis_seminorm(cfg: RunConfig, threads: int) -> AnalysisOutput:
    sn = cfg.seminorm
    prof, spec, params = initial_profile(cfg)
    if params is None:
        raise ConfigError("seminorm needs a staircase construction")
    sol = ExactSolution.from_profile(prof, spec, params)
    t = sn.t_fraction * sol.t0
    now = sol.at(t)
    h_min = sn.h_min if sn.h_min is not None else float(rung_scale(params, params.last))
    h_max = sn.h_max if sn.h_max is not None else 1.0
    q = SeminormQuery(s=sn.s, p=sn.p, theta=sn.theta, axis=sn.axis, h_min=h_min, h_max=h_max,
                      per_decade=sn.per_decade, n_max=params.last)
    res = truncated_besov(now, q)
    kappa = kappa_closed_form(params, sn.s, sn.p, sn.theta)
    rows = [[h, lp, f, S] for h, lp, f, S in zip(res.h, res.lp_diff, res.integrand, res.S)]
    out = AnalysisOutput(["h", "lp_diff", "integrand", "S_cumulative"], rows)
    monotone = bool(np.all(np.diff(res.S) <= 0))
    out.checks.append(Check("S_monotone", float(monotone), "nonincreasing in h_min", monotone))
    kappa_fitted = res.kappa_fitted
    if sn.truncations is not None:
        # growth across truncations with the additive constant fitted out
        fit = truncation_fit(params, sn.truncations, [sn.s], sn.p, sn.theta, sn.axis, h_max, sn.per_decade,
                             sn.t_fraction, threads)[0]
        kappa_fitted = fit.kappa_fitted
        out.extra_files["seminorm_truncations.csv"] = _csv_text(
            ["n_max", "h_min", "S"], [[n, h, S] for n, h, S in zip(fit.n_max, fit.h_min, fit.S)])
        if sn.s < 1.0 / params.k:
            out.checks.append(Check("kappa_bounded", kappa_fitted, f"<= {sn.bounded_tol}",
                                    kappa_fitted <= sn.bounded_tol))
        else:
            err = abs(kappa_fitted - kappa)
            out.checks.append(Check("kappa_matches", err, f"<= {sn.tol}", err <= sn.tol))
    out.extra_files["seminorm_summary.csv"] = _csv_text(
        ["s", "p", "theta", "kappa_closed_form", "kappa_fitted"],
        [[sn.s, sn.p, sn.theta, kappa, kappa_fitted]])
    return out


def analysis_nondegeneracy(cfg: RunConfig, threads: int) -> AnalysisOutput:
    nd = cfg.nondegeneracy
    prof, spec, _ = initial_profile(cfg)
    # default R0: twice the sup norm of the configured initial data
    lo, hi = prof.state_range()
    r0 = nd.r0 if nd.r0 is not None else 2.0 * max(abs(lo), abs(hi))
    spec = FluxSpec(spec.dimension, spec.family, max(spec.u_bound, r0), spec.zeta, spec.coefficients)
    deltas = np.logspace(np.log10(nd.delta_min), np.log10(nd.delta_max), nd.n_deltas)
    res = nondegeneracy_exponent(spec, r0, deltas, nd.sphere_samples, nd.v_grid, threads=threads)
    rows = [[d, m] for d, m in zip(res.deltas, res.measures)]
    out = AnalysisOutput(["delta", "measure"], rows)
    out.extra_files["nondegeneracy_summary.csv"] = _csv_text(
        ["alpha", "C", "degenerate"] + [f"worst_{i}" for i in range(len(res.worst_direction))],
        [[res.alpha, res.constant, res.degenerate] + list(res.worst_direction)])
    if res.degenerate:
        out.checks.append(Check("nondegenerate", 0.0, "not degenerate", False))
    else:
        expected = nd.expected
        if expected is None and spec.family == "power-law":
            expected = 1.0 / (spec.zeta + spec.dimension)
        elif expected is None and spec.family == "prop2-pair":
            expected = 1.0 / 3.0
        ok = 0 < res.alpha <= 1
        out.checks.append(Check("alpha_in_unit_interval", res.alpha, "in (0, 1]", ok))
        if expected is not None:
            err = abs(res.alpha - expected)
            out.checks.append(Check("alpha_matches", err, f"<= {nd.tol}", err <= nd.tol))
    return out


def analysis_check_lemmas(cfg: RunConfig, threads: int) -> AnalysisOutput:
    x, beta = lemma2_samples(cfg.check_lemmas.samples, cfg.run.seed)
    first, second = lemma2_check(x, beta)
    v1, v2 = int(np.count_nonzero(~first)), int(np.count_nonzero(~second))
    rows = [["lemma2_first", len(x), v1], ["lemma2_second", len(x), v2]]
    out = AnalysisOutput(["check", "samples", "violations"], rows)
    out.checks.append(Check("lemma2_first", v1, "== 0", v1 == 0))
    out.checks.append(Check("lemma2_second", v2, "== 0", v2 == 0))
    prof, spec, params = initial_profile(cfg)
    sol = ExactSolution.from_profile(prof, spec, params)
    sched = sol.schedule
    ok = all(kruzkov_secant_check(sol.flux, sched.left[j], sched.right[j]) for j in sched.shocks)
    rows.append(["kruzkov_shocks", len(sched.shocks), 0 if ok else 1])
    out.checks.append(Check("kruzkov_shocks", float(ok), "all shocks entropic", ok))
    lax = sched.lax_admissible(sol.flux)
    rows.append(["lax_shocks", len(sched.shocks), 0 if lax else 1])
    out.checks.append(Check("lax_shocks", float(lax), "all shocks admissible", lax))
    return out


def analysis_tiling(cfg: RunConfig, threads: int) -> AnalysisOutput:
    if cfg.run.construction == "lemma1-riemann":
        raise ConfigError("tiling needs a staircase construction")
    params = blowup_params(cfg)
    tiling = build_tiling(params, cfg.tiling.K, time_gap=cfg.tiling.time_gap)
    l1 = tiling.l1_partial_sums
    certs = [np.nan] + list(tiling.certificates)
    rows = [[k + 1, b.params.R, b.params.start, b.offset, b.half_width, b.t0, certs[k], l1[k]]
            for k, b in enumerate(tiling.boxes)]
    out = AnalysisOutput(["box", "R", "N", "offset", "half_width", "t0", "certificate", "l1_partial_sum"], rows)
    gaps = np.diff(tiling.t0)
    ok_gap = bool(np.all(gaps > cfg.tiling.time_gap))
    out.checks.append(Check("t0_gaps", float(gaps.min()) if len(gaps) else np.inf,
                            f"> {cfg.tiling.time_gap}", ok_gap))
    out.checks.append(Check("disjoint", float(tiling.disjoint()), "boxes disjoint", tiling.disjoint()))
    ok_cert = all(c > b.t0 for c, b in zip(tiling.certificates, tiling.boxes[1:]))
    out.checks.append(Check("separation", float(ok_cert), "gap/(2V) > t0 of the next box", ok_cert))
    bound = tiling.l1_analytic_bound
    out.checks.append(Check("l1_partial_sums", float(l1[-1]), f"<= {bound:.17g}", bool(l1[-1] <= bound)))
    return out


RUNNERS = {
    "build": analysis_build,
    "times": analysis_times,
    "exact-eval": analysis_exact_eval,
    "validate": analysis_validate,
    "seminorm": analysis_seminorm,
    "nondegeneracy": analysis_nondegeneracy,
    "check-lemmas": analysis_check_lemmas,
    "tiling": analysis_tiling,
}


# ---------------------------------------------------------------------------
# orchestration
# ---------------------------------------------------------------------------


def _csv_text(header, rows) -> str:
    import io

    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([fmt(v) for v in r])
    return buf.getvalue()


def run(cfg: RunConfig, out_dir, threads: int = 1) -> int:
    """Run every requested analysis; return the exit status."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "config.ini").write_text(cfg.to_ini(), encoding="utf-8")
    manifest = {"config_sha256": cfg.digest(), "version": __version__, "analyses": []}
    status = 0
    for name in cfg.run.analyses:
        logger.info("running %s", name)
        try:
            res = RUNNERS[name](cfg, threads)
        except ConfigError:
            raise
        except ValueError as exc:
            manifest["analyses"].append({"name": name, "passed": False, "error": str(exc), "checks": []})
            status = 1
            continue
        fname = f"{name}.csv"
        (out_dir / fname).write_text(_csv_text(res.header, res.rows), encoding="utf-8")
        for extra, text in res.extra_files.items():
            (out_dir / extra).write_text(text, encoding="utf-8")
        manifest["analyses"].append({
            "name": name,
            "file": fname,
            "passed": res.passed,
            "checks": [{"name": c.name, "value": fmt(c.value), "tolerance": c.tolerance, "passed": bool(c.passed)}
                       for c in res.checks],
        })
        if not res.passed:
            status = 1
    failures = [a["name"] for a in manifest["analyses"] if not a["passed"]]
    manifest["failures"] = failures
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return status


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="scl-regularity", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("run",) + ANALYSES:
        sp = sub.add_parser(name, help="all analyses listed in [run]" if name == "run" else f"the {name} analysis")
        sp.add_argument("--config", required=False, help="INI file (defaults for every missing key)")
        sp.add_argument("--out", default="out", help="output directory")
        sp.add_argument("--threads", type=int, default=1, help="worker threads for parallel scans")
        sp.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args.config) if args.config else RunConfig()
        if args.command != "run":
            cfg = cfg.with_analyses([args.command])
        if args.threads < 1:
            raise ConfigError("--threads must be >= 1")
        status = run(cfg, args.out, args.threads)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if status:
        print(f"failed checks, see {Path(args.out) / 'manifest.json'}", file=sys.stderr)
    return status


if __name__ == "__main__":
    sys.exit(main())
