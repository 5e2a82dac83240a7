"""Command-line front end.

    jumpcurv {curvature,bound,simulate,verify,transport} --config cfg.json
             [--seed N] [--replicas N] [--workers N] [--out DIR] [--format json|csv]

Exit codes: 0 ok, 1 usage or config error, 2 bound inapplicable
(sigma <= 0, infinite V^2, failed assumption), 3 verification refuted.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import bounds
from .config import ConfigError, ExperimentConfig, build_metric, build_model, build_observable
from .curvature import (
    AssumptionAFailure,
    BoundInapplicable,
    CurvatureCertificate,
    birth_death_curvature,
    check_assumption_A,
    estimate_curvature_numeric,
    jump_bound_b,
    jump_constants,
    second_moment_V2,
    tensorize,
)
from .jump_process import BirthDeathRates, ProductChain, stationary_distribution, stationary_measure
from .metric_space import PathMetric, ProductMetric, TrivialMetric, lipschitz_seminorm, lipschitz_seminorm_finite
from .simulate import run_replicas, tail_from_deviations
from .transport import DiscreteMeasure, dual_certificate, wasserstein_path_1d, wasserstein_primal

EXIT_OK, EXIT_USAGE, EXIT_INAPPLICABLE, EXIT_REFUTED = 0, 1, 2, 3


def _as_path_metric(metric, comp):
    if isinstance(metric, PathMetric):
        return metric
    if isinstance(metric, TrivialMetric) and comp.states is not None and len(comp.states) == 2:
        # on a two-point space the trivial metric is the unit path metric
        return PathMetric.classical()
    return None


def _component_triple(comp, base, cfg: ExperimentConfig):
    path = _as_path_metric(base, comp) if isinstance(comp, BirthDeathRates) else None
    if path is not None:
        cert = birth_death_curvature(comp, path, cfg.truncation)
        jc = jump_constants(comp, path, cfg.truncation)
        return cert, jc.b, jc.V2
    cert = estimate_curvature_numeric(comp, base, cfg.t_grid, tol=cfg.tol)
    b, _ = jump_bound_b(comp, base, cfg.truncation)
    v2, _ = second_moment_V2(comp, base, cfg.truncation)
    return cert, b, v2


@dataclass
class Setup:
    config: ExperimentConfig
    model: object
    metric: object
    certificate: CurvatureCertificate
    b: float | None = None
    V2: float | None = None


def certify(cfg: ExperimentConfig) -> Setup:
    model = build_model(cfg.model)
    metric = build_metric(cfg.metric, model)
    if isinstance(model, ProductChain):
        triples = [_component_triple(c, metric.base, cfg) for c in model.components]
        sig, b, v2 = tensorize([(c.sigma, bi, vi) for c, bi, vi in triples], model.dim)
        first = triples[0][0]
        cert = CurvatureCertificate(
            sig, "tensorized", repr(metric), first.truncation,
            tuple((c.sigma, bi, vi) for c, bi, vi in triples), None,
            attained=all(c.attained for c, _, _ in triples),
            tail_verified=all(c.tail_verified for c, _, _ in triples),
        )
        return Setup(cfg, model, metric, cert, b, v2)
    if isinstance(model, BirthDeathRates):
        path = _as_path_metric(metric, model)
        if path is None:
            raise ConfigError("birth-death models need a path metric (or trivial on two states)")
        return Setup(cfg, model, path, birth_death_curvature(model, path, cfg.truncation))
    cert = estimate_curvature_numeric(model, metric, cfg.t_grid, tol=cfg.tol)
    return Setup(cfg, model, metric, cert)


def run_curvature(cfg: ExperimentConfig) -> CurvatureCertificate:
    return certify(cfg).certificate


@dataclass
class Constants:
    sigma: float
    b: float
    V2: float
    lip: float
    mean_dist: float
    mean_dist_tol: float
    pi_phi: float
    kind: str
    K: float | None = None
    C_A: float | None = None

    def params(self) -> bounds.BoundParams:
        return bounds.BoundParams(self.sigma, self.b, self.V2, self.lip, self.mean_dist, self.mean_dist_tol)

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def assemble(setup: Setup) -> Constants:
    cfg, model, metric, cert = setup.config, setup.model, setup.metric, setup.certificate
    sigma = cert.sigma
    if not sigma > 0:
        raise BoundInapplicable(f"curvature {sigma} is not positive")
    phi = build_observable(cfg.observable)
    x0 = cfg.x0
    K = C_A = None
    if isinstance(model, BirthDeathRates) and model.states is None:
        jc = jump_constants(model, metric, cfg.truncation)
        b, v2 = jc.b, jc.V2
        sn = lipschitz_seminorm(phi.vector, metric, cfg.truncation)
        lip = sn.value
        sm = stationary_measure(model)
        zs = np.arange(len(sm.probs))
        cum = metric.cumulative(zs)
        ux0 = float(metric.cumulative([x0])[0])
        mean_dist = float(np.dot(np.abs(cum - ux0), sm.probs))
        far = metric.distance(int(x0), 2 * len(zs))
        mean_dist_tol = sm.tail_mass * max(1.0, far)
        pi_phi = float(np.dot(phi.vector(zs), sm.probs))
        kind = "thm26"
        if cfg.bound in ("auto", "cor47"):
            try:
                a = check_assumption_A(model, metric, cfg.truncation)
                K, C_A, kind = a.K, a.C_A, "cor47"
                b, v2 = a.b, a.V2
            except AssumptionAFailure:
                if cfg.bound == "cor47":
                    raise
    else:
        states = model.states
        if setup.b is not None:
            b, v2 = setup.b, setup.V2
        else:
            b, _ = jump_bound_b(model, metric, cfg.truncation)
            v2, _ = second_moment_V2(model, metric, cfg.truncation)
        lip = lipschitz_seminorm_finite(phi, metric, states)
        pi = stationary_distribution(model)
        mean_dist = float(sum(p * metric.distance(x0, z) for z, p in zip(states, pi)))
        mean_dist_tol = 0.0
        pi_phi = float(sum(p * phi(z) for z, p in zip(states, pi)))
        kind = "thm26"
        if cfg.bound == "cor47":
            raise ConfigError("cor47 bound needs an infinite birth-death model")
    if not (b > 0 and v2 > 0 and math.isfinite(v2)):
        raise BoundInapplicable(f"jump constants b={b}, V2={v2} unusable")
    return Constants(sigma, b, v2, lip, mean_dist, mean_dist_tol, pi_phi, kind, K, C_A)


def run_bound(cfg: ExperimentConfig) -> tuple[bounds.BoundCurve, Constants, CurvatureCertificate]:
    setup = certify(cfg)
    consts = assemble(setup)
    if consts.lip == 0:
        y = np.asarray(cfg.y_grid, dtype=float)
        curve = bounds.BoundCurve(cfg.t, y, np.full(len(y), math.inf), np.zeros(len(y)), 0.0, 0.0, consts.kind)
    else:
        curve = bounds.bound_curve(consts.params(), cfg.t, cfg.y_grid, consts.kind)
    return curve, consts, setup.certificate


def run_simulate(cfg: ExperimentConfig) -> dict:
    model = build_model(cfg.model)
    phi = build_observable(cfg.observable)
    means, finals = run_replicas(model, cfg.x0, cfg.t, cfg.replicas, cfg.seed, phi, cfg.workers)
    return {
        "config_hash": cfg.digest(),
        "replicas": cfg.replicas,
        "seed": cfg.seed,
        "t": cfg.t,
        "mean_of_means": float(means.mean()),
        "std_of_means": float(means.std(ddof=1)) if len(means) > 1 else 0.0,
        "means": means,
        "finals": finals,
    }


def _verdict(count: int, upper: float, bound: float) -> str:
    # a zero bound (constant observable) is an exact claim: no exceedances at all
    if bound == 0.0:
        return "pass" if count == 0 else "fail"
    return "pass" if upper <= bound else "fail"


def run_verify(cfg: ExperimentConfig) -> dict:
    curve, consts, cert = run_bound(cfg)
    model = build_model(cfg.model)
    phi = build_observable(cfg.observable)
    means, _ = run_replicas(model, cfg.x0, cfg.t, cfg.replicas, cfg.seed, phi, cfg.workers)
    dev = np.abs(means - consts.pi_phi)
    tail = tail_from_deviations(dev, cfg.y_grid, cfg.alpha, cfg.seed, curve.bias)
    raw = tail_from_deviations(dev, cfg.y_grid, cfg.alpha, cfg.seed, 0.0)
    verdicts = [_verdict(c, u, p) for c, u, p in zip(tail.counts, tail.upper, curve.bound)]
    return {
        "config_hash": cfg.digest(),
        "config": cfg.to_dict(),
        "curvature": cert.to_dict(),
        "constants": consts.to_dict(),
        "bound": curve.to_dict(),
        "tail": tail.to_dict(),
        "raw_deviation_counts": [int(c) for c in raw.counts],
        "verdicts": verdicts,
        "verdict": "consistent" if all(v == "pass" for v in verdicts) else "refuted",
        "notes": ["ergodicity and curvature tails are checked numerically on a truncation"],
    }


def _measure(desc) -> DiscreteMeasure:
    support = [tuple(s) if isinstance(s, list) else s for s in desc["support"]]
    return DiscreteMeasure(tuple(support), np.asarray(desc["weights"], dtype=float))


def run_transport(cfg: ExperimentConfig) -> dict:
    if not cfg.transport:
        raise ConfigError("transport subcommand needs a 'transport' block with 'mu' and 'nu'")
    metric = metric_from_config(cfg)
    mu, nu = _measure(cfg.transport["mu"]), _measure(cfg.transport["nu"])
    W, plan = wasserstein_primal(mu, nu, metric)
    cert = dual_certificate(mu, nu, metric, W, tol=1e-9)
    out = {
        "config_hash": cfg.digest(),
        "W": W,
        "plan": {"rows": list(plan.rows), "cols": list(plan.cols), "coupling": plan.coupling.tolist()},
        "dual": {
            "support": list(cert.support),
            "potential": cert.potential.tolist(),
            "lipschitz": cert.lipschitz,
            "dual_value": cert.dual_value,
            "gap": cert.gap,
            "verified": cert.verified,
        },
    }
    if isinstance(metric, PathMetric):
        out["W_1d"] = wasserstein_path_1d(mu, nu, metric)
    return out


def metric_from_config(cfg: ExperimentConfig):
    from .metric_space import metric_from_dict
    return metric_from_dict(cfg.metric)


# -- output --------------------------------------------------------------------

def _json(obj) -> str:
    def default(o):
        if isinstance(o, np.ndarray):
            return o.tolist()
        if isinstance(o, (np.floating, np.integer)):
            return o.item()
        if isinstance(o, tuple):
            return list(o)
        raise TypeError(f"not JSON serializable: {type(o)}")

    return json.dumps(obj, sort_keys=True, indent=2, default=default, allow_nan=True) + "\n"


def bound_csv(curve: bounds.BoundCurve) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["y", "exponent", "bound", "bias"])
    for row in curve.rows():
        w.writerow([repr(v) for v in row])
    return buf.getvalue()


def _rows_csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def make_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="jumpcurv", description=__doc__.splitlines()[0] if __doc__ else None)
    p.add_argument("command", choices=["curvature", "bound", "simulate", "verify", "transport"])
    p.add_argument("--config", required=True, help="JSON experiment config (schema 1)")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.add_argument("--replicas", type=int, help="override the replica count")
    p.add_argument("--workers", type=int, help="simulation worker processes")
    p.add_argument("--out", type=Path, help="directory for output files")
    p.add_argument("--format", choices=["json", "csv"], default="json")
    return p


def _write(out: Path | None, name: str, text: str):
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        (out / name).write_text(text)


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    try:
        cfg = ExperimentConfig.load(args.config)
        if args.seed is not None:
            cfg.seed = args.seed
        if args.replicas is not None:
            cfg.replicas = args.replicas
        if args.workers is not None:
            cfg.workers = args.workers
    except (OSError, ValueError, TypeError, KeyError) as exc:
        print(f"jumpcurv: bad config: {exc}", file=sys.stderr)
        return EXIT_USAGE

    try:
        return _dispatch(args, cfg)
    except BoundInapplicable as exc:
        print(f"jumpcurv: bound inapplicable: {exc}", file=sys.stderr)
        return EXIT_INAPPLICABLE
    except (ConfigError, KeyError) as exc:
        print(f"jumpcurv: config error: {exc}", file=sys.stderr)
        return EXIT_USAGE


def _dispatch(args, cfg: ExperimentConfig) -> int:
    out = args.out
    if args.command == "curvature":
        cert = run_curvature(cfg)
        payload = cert.to_dict()
        payload["config_hash"] = cfg.digest()
        text = _json(payload)
        _write(out, "curvature.json", text)
        sys.stdout.write(text)
        if not cert.sigma > 0:
            print(f"jumpcurv: curvature {cert.sigma} <= 0 (argmin x={cert.argmin}); bounds do not apply",
                  file=sys.stderr)
            return EXIT_INAPPLICABLE
        return EXIT_OK

    if args.command == "bound":
        curve, consts, cert = run_bound(cfg)
        text_csv = bound_csv(curve)
        payload = {"config_hash": cfg.digest(), "bound": curve.to_dict(), "constants": consts.to_dict(),
                   "curvature": {"sigma": cert.sigma, "method": cert.method}}
        text_json = _json(payload)
        _write(out, "bound.csv", text_csv)
        _write(out, "bound.json", text_json)
        sys.stdout.write(text_csv if args.format == "csv" else text_json)
        return EXIT_OK

    if args.command == "simulate":
        res = run_simulate(cfg)
        means, finals = res.pop("means"), res.pop("finals")
        text_json = _json(res)
        text_csv = _rows_csv(["replica", "empirical_mean", "final_state"],
                             [[i, repr(float(m)), f] for i, (m, f) in enumerate(zip(means, finals))])
        _write(out, "simulate.json", text_json)
        _write(out, "means.csv", text_csv)
        if out is not None:
            from .simulate import simulate_path, replica_rng
            path = simulate_path(build_model(cfg.model), cfg.x0, cfg.t, replica_rng(cfg.seed, 0))
            _write(out, "path.csv", _rows_csv(["time", "state"], [[repr(t), x] for t, x in path.csv_rows()]))
        sys.stdout.write(text_csv if args.format == "csv" else text_json)
        return EXIT_OK

    if args.command == "verify":
        report = run_verify(cfg)
        text = _json(report)
        _write(out, "report.json", text)
        if args.format == "csv":
            rows = zip(report["tail"]["y"], report["tail"]["counts"], report["tail"]["upper"],
                       report["bound"]["bound"], report["verdicts"])
            sys.stdout.write(_rows_csv(["y", "count", "upper", "bound", "verdict"],
                                       [[repr(a), c, repr(u), repr(b), v] for a, c, u, b, v in rows]))
        else:
            sys.stdout.write(text)
        if report["verdict"] == "refuted":
            bad = [y for y, v in zip(report["tail"]["y"], report["verdicts"]) if v == "fail"]
            print(f"jumpcurv: REFUTED at y = {bad}; the bound is proven, so this indicates a bug",
                  file=sys.stderr)
            return EXIT_REFUTED
        return EXIT_OK

    res = run_transport(cfg)
    text = _json(res)
    _write(out, "transport.json", text)
    sys.stdout.write(text)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
