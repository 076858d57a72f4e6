"""Command-line driver.

    semicomplete run --config hare --sampler scd2 --out runs/hare
    semicomplete simulate --out gibbon_sim --seed 3
    semicomplete summarize runs/hare

A run reads a JSON configuration (a path, or the name of a bundled one such
as ``hare``), applies command-line overrides, samples every chain, and writes
``chain<k>.csv`` traces with JSON sidecars plus ``summary.txt`` and
``summary.json``. On failure the partial outputs are removed.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import shutil
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from importlib import resources
from pathlib import Path


from . import __version__
from .data import (
    GIBBON_N_TRUE,
    GIBBON_SIGMA_TRUE,
    expand_frequencies,
    gibbon_geometry,
    simulate_secr,
)
from .diagnostics import summarize
from .io import read_detections, read_geometry, read_histories, read_trace, write_detections, write_points, write_trace
from .model import (
    Beta,
    CaptureData,
    DataError,
    InverseGamma,
    NegBinomial,
    Normal,
    Poisson,
    Power,
    PriorSpec,
    SurveyGeometry,
    TruncJeffreys,
    Uniform,
)
from .samplers import SAMPLERS, SamplerConfig, Trace, check_scd2_prior

MODELS = ("mh", "secr")
N_PRIORS = ("jeffreys", "power", "poisson", "negbin")


@dataclass
class RunConfig:
    model: str = "mh"
    sampler: str = "scd2"
    data: dict = field(default_factory=dict)
    priors: dict = field(default_factory=dict)
    sampler_config: dict = field(default_factory=dict)
    out: str = "semicomplete_out"
    workers: int = 1
    base_dir: Path = field(default_factory=Path.cwd)

    def validate(self) -> None:
        if self.model not in MODELS:
            raise DataError(f"model must be one of {MODELS}, got {self.model!r}")
        if self.sampler not in SAMPLERS:
            raise DataError(f"sampler must be one of {tuple(SAMPLERS)}, got {self.sampler!r}")
        if self.workers < 1:
            raise DataError("workers must be >= 1")

    def path(self, key: str) -> Path:
        if key not in self.data:
            raise DataError(f"data.{key} is required for model {self.model!r}")
        p = Path(self.data[key])
        p = p if p.is_absolute() else self.base_dir / p
        if not p.exists():
            raise DataError(f"data file not found: {p}")
        return p


def bundled_config_path(name: str) -> Path | None:
    ref = resources.files("semicomplete") / "configs" / f"{name}.json"
    return Path(str(ref)) if ref.is_file() else None


def load_config(path: str | None) -> RunConfig:
    if path is None:
        return RunConfig()
    p = Path(path)
    if not p.exists():
        bundled = bundled_config_path(path)
        if bundled is None:
            raise DataError(f"config not found: {path}")
        p = bundled
    try:
        raw = json.loads(p.read_text())
    except json.JSONDecodeError as e:
        raise DataError(f"{p}: invalid JSON ({e})") from None
    known = {"model", "sampler", "data", "priors", "sampler_config", "out", "workers"}
    unknown = set(raw) - known
    if unknown:
        raise DataError(f"{p}: unknown config keys {sorted(unknown)}")
    return RunConfig(**raw, base_dir=p.parent)


def build_priors(spec: dict) -> PriorSpec:
    spec = dict(spec)
    n = dict(spec.pop("n_prior", {"type": "jeffreys", "M": 1000}))
    kind = n.pop("type", "jeffreys")
    try:
        if kind == "jeffreys":
            n_prior = TruncJeffreys(int(n.pop("M", 1000)))
        elif kind == "power":
            n_prior = Power(float(n.pop("c")), int(n.pop("M", 1000)))
        elif kind == "poisson":
            n_prior = Poisson(float(n.pop("lam")))
        elif kind == "negbin":
            n_prior = NegBinomial(float(n.pop("r")), float(n.pop("p")))
        else:
            raise DataError(f"n_prior type must be one of {N_PRIORS}, got {kind!r}")
    except KeyError as e:
        raise DataError(f"n_prior {kind!r} needs parameter {e}") from None
    if n:
        raise DataError(f"unknown n_prior fields {sorted(n)}")
    try:
        out = PriorSpec(
            n_prior=n_prior,
            alpha_prior=Normal(**spec.pop("alpha", {})),
            sigma2_prior=InverseGamma(**spec.pop("sigma2", {})),
            sigma_prior=Uniform(**spec.pop("sigma", {})),
            psi_prior=Beta(**spec.pop("psi", {})),
        )
    except TypeError as e:
        raise DataError(f"bad prior hyperparameters: {e}") from None
    if spec:
        raise DataError(f"unknown prior keys {sorted(spec)}")
    return out


def build_sampler_config(spec: dict) -> SamplerConfig:
    spec = dict(spec)
    if "fixed" in spec:
        spec["fixed"] = tuple(spec["fixed"])
    try:
        return SamplerConfig(**spec)
    except TypeError as e:
        raise DataError(f"bad sampler_config: {e}") from None


def load_data(cfg: RunConfig) -> tuple[CaptureData, SurveyGeometry | None]:
    d = cfg.data
    if cfg.model == "mh":
        if "frequencies" in d:
            if "occasions" not in d:
                raise DataError("data.occasions is required with data.frequencies")
            return expand_frequencies(tuple(d["frequencies"]), int(d["occasions"])), None
        return read_histories(cfg.path("histories")), None
    if d.get("geometry") == "gibbon":
        geometry = gibbon_geometry()
    else:
        if "cell_area" not in d:
            raise DataError("data.cell_area is required for SECR")
        geometry = read_geometry(cfg.path("detectors"), cfg.path("mask"), float(d["cell_area"]))
    if "occasions" not in d:
        raise DataError("data.occasions is required for SECR")
    data = read_detections(cfg.path("detections"), geometry.J, int(d["occasions"]))
    return data, geometry


def _run_one_chain(args) -> Trace:
    sampler, data, geometry, priors, config, chain = args
    return SAMPLERS[sampler](data, geometry, priors, config, chain_ids=[chain])[0]


def sample(cfg: RunConfig, data, geometry, priors, config) -> list[Trace]:
    runner = SAMPLERS[cfg.sampler]
    if cfg.workers == 1 or config.chains == 1:
        return runner(data, geometry, priors, config)
    jobs = [(cfg.sampler, data, geometry, priors, config, c) for c in range(config.chains)]
    with ProcessPoolExecutor(max_workers=min(cfg.workers, config.chains)) as ex:
        return list(ex.map(_run_one_chain, jobs))


def format_report(rows: dict, cfg: RunConfig, config: SamplerConfig, wall: float, n: int) -> str:
    lines = [
        f"model={cfg.model} sampler={cfg.sampler} n={n} chains={config.chains} "
        f"iterations={config.iterations} burn_in={config.burn_in} thin={config.thin} seed={config.seed}",
        f"wall time {wall:.1f} s; ESS counts stored (thinned) samples summed over chains",
        "",
        f"{'param':<8} {'mean':>10} {'median':>10} {'SD':>10} {'95% CI':>24} {'ESS':>10} {'ESS/s':>8} {'PSRF':>7}",
    ]
    for name, s in rows.items():
        ci = f"({_num(s['ci_low'])}, {_num(s['ci_high'])})"
        lines.append(f"{name:<8} {s['mean']:>10.4g} {_num(s['median']):>10} {s['sd']:>10.4g} {ci:>24} "
                     f"{s['ess']:>10.0f} {s['ess_per_second']:>8.2f} {s['psrf']:>7.4f}")
    return "\n".join(lines) + "\n"


def _num(v: float) -> str:
    return str(int(v)) if float(v).is_integer() else f"{v:.4g}"


def summarize_traces(traces: list[Trace], wall: float) -> dict:
    rows = {}
    for name in traces[0].names:
        rows[name] = summarize([t[name] for t in traces], wall).row()
    return rows


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    for key in ("model", "sampler", "out", "workers"):
        v = getattr(args, key)
        if v is not None:
            setattr(cfg, key, v)
    overrides = {
        "iterations": args.iterations, "burn_in": args.burn_in, "thin": args.thin,
        "chains": args.chains, "seed": args.seed, "q": args.quadrature_order, "M": args.upper_bound_m,
    }
    cfg.sampler_config.update({k: v for k, v in overrides.items() if v is not None})
    if args.n_prior is not None:
        cfg.priors["n_prior"] = parse_n_prior(args.n_prior)
    if args.upper_bound_m is not None:
        npr = dict(cfg.priors.get("n_prior", {"type": "jeffreys"}))
        if npr.get("type", "jeffreys") in ("jeffreys", "power"):
            npr["M"] = args.upper_bound_m
        cfg.priors["n_prior"] = npr
    cfg.validate()
    priors = build_priors(cfg.priors)
    config = build_sampler_config(cfg.sampler_config)
    if cfg.sampler == "scd2":
        check_scd2_prior(priors)
    data, geometry = load_data(cfg)
    if (cfg.model == "secr") != data.spatial:
        raise DataError(f"data do not match model {cfg.model!r}")

    out = Path(cfg.out)
    created = not out.exists()
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    try:
        start = time.perf_counter()
        traces = sample(cfg, data, geometry, priors, config)
        wall = time.perf_counter() - start
        echo = {
            "version": __version__,
            "model": cfg.model,
            "sampler": cfg.sampler,
            "data": cfg.data,
            "priors": cfg.priors,
            "sampler_config": asdict(config),
        }
        for t in traces:
            p = out / f"chain{t.chain}.csv"
            written += [p, p.with_suffix(".csv.json")]
            write_trace(t, p, {"config": echo, **({"meta": t.meta} if t.meta else {})})
        rows = summarize_traces(traces, wall)
        report = format_report(rows, cfg, config, wall, data.n)
        written += [out / "summary.txt", out / "summary.json"]
        (out / "summary.txt").write_text(report)
        (out / "summary.json").write_text(json.dumps(
            {"wall_seconds": wall, "n": data.n, "summary": rows, "config": echo},
            indent=2, sort_keys=True, default=str) + "\n")
    except BaseException:
        for p in written:
            p.unlink(missing_ok=True)
        if created:
            shutil.rmtree(out, ignore_errors=True)
        raise
    sys.stdout.write(report)
    return 0


def parse_n_prior(text: str) -> dict:
    """``jeffreys``, ``jeffreys:M``, ``power:c[,M]``, ``poisson:lam`` or ``negbin:r,p``."""
    kind, _, rest = text.partition(":")
    vals = [v for v in rest.split(",") if v] if rest else []
    try:
        if kind == "jeffreys":
            return {"type": kind, **({"M": int(vals[0])} if vals else {})}
        if kind == "power":
            return {"type": kind, "c": float(vals[0]), **({"M": int(vals[1])} if len(vals) > 1 else {})}
        if kind == "poisson":
            return {"type": kind, "lam": float(vals[0])}
        if kind == "negbin":
            return {"type": kind, "r": float(vals[0]), "p": float(vals[1])}
    except (IndexError, ValueError):
        raise DataError(f"cannot parse --n-prior {text!r}") from None
    raise DataError(f"--n-prior must start with one of {N_PRIORS}")


def cmd_simulate(args) -> int:
    geometry = gibbon_geometry()
    data = simulate_secr(geometry, args.sigma, args.n_true, args.occasions, args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_detections(data, out / "detections.csv")
    write_points(geometry.detectors, out / "detectors.csv")
    write_points(geometry.mask, out / "mask.csv")
    cfg = {
        "model": "secr",
        "sampler": "scd2",
        "data": {"detections": "detections.csv", "detectors": "detectors.csv", "mask": "mask.csv",
                 "cell_area": geometry.cell_area, "occasions": args.occasions},
        "priors": {"n_prior": {"type": "jeffreys", "M": 1000}, "sigma": {"low": 0.0, "high": 10.0}},
        "sampler_config": {"iterations": 100000, "burn_in": 10000, "chains": 3, "seed": 1},
        "out": "run",
    }
    (out / "config.json").write_text(json.dumps(cfg, indent=2) + "\n")
    sys.stdout.write(f"simulated n={data.n} of N={args.n_true} (sigma={args.sigma}, seed={args.seed}) "
                     f"into {out}\n")
    return 0


def cmd_summarize(args) -> int:
    out = Path(args.dir)
    paths = sorted(out.glob("chain*.csv"), key=lambda p: int(p.stem[5:]))
    if not paths:
        raise DataError(f"no chain*.csv traces in {out}")
    traces = [read_trace(p) for p in paths]
    wall = sum(t.wall_seconds for t in traces)
    rows = summarize_traces(traces, wall if wall > 0 else math.nan)
    for name, s in rows.items():
        sys.stdout.write(f"{name}: " + ", ".join(f"{k}={v:.6g}" for k, v in s.items()) + "\n")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="semicomplete", description="Semi-complete data likelihood MCMC "
                                "for closed-population abundance.")
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = p.add_subparsers(dest="command", required=True)

    d = SamplerConfig()
    r = sub.add_parser("run", help="sample a posterior and write traces and a summary",
                       description="Flags override values from the config file.")
    r.add_argument("--config", help="JSON config path or bundled name (hare)")
    r.add_argument("--model", choices=MODELS, help="model (config value, else mh)")
    r.add_argument("--sampler", choices=tuple(SAMPLERS), help="sampler (config value, else scd2)")
    r.add_argument("--iterations", type=int, help=f"sweeps per chain incl. burn-in (default {d.iterations})")
    r.add_argument("--burn-in", type=int, help=f"burn-in sweeps (default {d.burn_in})")
    r.add_argument("--thin", type=int, help=f"keep every k-th post-burn-in sweep (default {d.thin})")
    r.add_argument("--chains", type=int, help=f"number of chains (default {d.chains})")
    r.add_argument("--seed", type=int, help=f"master seed (default {d.seed})")
    r.add_argument("--out", help="output directory (default semicomplete_out)")
    r.add_argument("--quadrature-order", type=int, help=f"Gauss-Hermite nodes for M_h (default {d.q})")
    r.add_argument("--upper-bound-m", type=int,
                   help=f"super-population size M and upper bound of the N prior (default {d.M})")
    r.add_argument("--n-prior", help="prior on N: jeffreys[:M], power:c[,M], poisson:lam, negbin:r,p "
                                     "(default jeffreys:1000)")
    r.add_argument("--workers", type=int, help="processes for running chains in parallel (default 1)")
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("simulate", help="simulate SECR data on the gibbon survey layout",
                       formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    s.add_argument("--out", required=True, help="output directory")
    s.add_argument("--seed", type=int, default=1)
    s.add_argument("--sigma", type=float, default=GIBBON_SIGMA_TRUE, help="half-normal scale (km)")
    s.add_argument("--n-true", type=int, default=GIBBON_N_TRUE, help="number of groups")
    s.add_argument("--occasions", type=int, default=1)
    s.set_defaults(func=cmd_simulate)

    m = sub.add_parser("summarize", help="summarise the traces in an output directory")
    m.add_argument("dir")
    m.set_defaults(func=cmd_summarize)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (DataError, OSError) as e:
        sys.stderr.write(f"semicomplete: error: {e}\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
