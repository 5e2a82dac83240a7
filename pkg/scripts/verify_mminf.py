"""Monte Carlo check of the M/M/infinity deviation bound (sqrt observable,
inverse-square-root path metric).  Writes report.json and prints the per-y table."""

import argparse
from pathlib import Path

from jumpcurv.cli import _json, run_verify
from jumpcurv.config import ExperimentConfig

CONFIG = Path(__file__).resolve().parents[1] / "configs" / "ac5_mminf.json"


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", type=Path, default=CONFIG)
    ap.add_argument("--replicas", type=int)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--out", type=Path, default=Path("out/mminf"))
    args = ap.parse_args()
    cfg = ExperimentConfig.load(args.config)
    if args.replicas:
        cfg.replicas = args.replicas
    cfg.workers = args.workers
    report = run_verify(cfg)
    args.out.mkdir(parents=True, exist_ok=True)
    (args.out / "report.json").write_text(_json(report))
    print(f"{'y':>6} {'count':>7} {'upper':>12} {'bound':>12}  verdict")
    for y, c, u, b, v in zip(report["tail"]["y"], report["tail"]["counts"], report["tail"]["upper"],
                             report["bound"]["bound"], report["verdicts"]):
        print(f"{y:6.2f} {c:7d} {u:12.4e} {b:12.4e}  {v}")
    print("verdict:", report["verdict"])


if __name__ == "__main__":
    main()
