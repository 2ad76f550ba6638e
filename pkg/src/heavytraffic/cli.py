"""Command-line driver.

    heavytraffic simulate | verify | limit-sample | residual-grid | ssc-scan

Exit codes: 0 success (all checks pass), 1 a check failed or the run broke,
2 invalid configuration.
"""

from __future__ import annotations

import argparse
import hashlib
import logging
import sys
from pathlib import Path

import numpy as np

from .config import ConfigError, ExperimentConfig, load_config_file
from .ensemble import StationaryEnsemble, batch_means_se, concatenate
from .limit_theory import LimitLaw, closed_form_residual, load_frequency_grid, random_frequencies, save_frequency_grid
from .replicas import run_replicas
from .reporting import Report, Row, svg_line_chart
from .stochastics import RngStream
from .transform_lab import Metric, compare_to_limit, empirical_residual, residual_params, ssc_report

log = logging.getLogger("heavytraffic")

CONFIG_FLAGS = {
    "system": "system",
    "n": "n",
    "nu": "nu",
    "mu": "mu",
    "gamma": "gamma",
    "boundary": "boundary",
    "arrivals": "arrivals",
    "a_max": "a_max",
    "eps": "eps",
    "seed": "seeds",
    "samples": "n_samples",
    "burn_in": "burn_in",
    "thin": "thin",
    "replicas": "replicas",
    "workers": "workers",
    "grid": "grid",
    "grid_size": "grid_size",
    "law_samples": "law_samples",
    "out": "out",
}


def _add_system_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="TOML file; flags override its values")
    p.add_argument("--system", choices=["switch", "threeq", "nsys"])
    p.add_argument("--n", type=int, help="switch port count")
    p.add_argument("--nu", help="comma-separated boundary rates, or 'uniform' (switch)")
    p.add_argument("--mu", help="N-system service rates, e.g. 1,1")
    p.add_argument("--gamma", type=float, help="N-system direction of approach")
    p.add_argument("--boundary", choices=["F1", "F2", "F3"], help="N-system capacity face")
    p.add_argument("--arrivals", choices=["bernoulli", "uniform", "deterministic"])
    p.add_argument("--a-max", type=int, dest="a_max")
    p.add_argument("--eps", help="comma-separated heavy-traffic parameters")
    p.add_argument("--seed", type=int, action="append", help="base seed (repeatable)")
    p.add_argument("--samples", type=float, help="samples per replica (1e6 accepted)")
    p.add_argument("--burn-in", type=float, dest="burn_in")
    p.add_argument("--thin", type=float)
    p.add_argument("--replicas", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--out", help="output directory")
    p.add_argument("--plots", action="store_true", help="also write SVG charts")


def _add_verify_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--grid", help="JSON frequency grid")
    p.add_argument("--grid-size", type=int, dest="grid_size")
    p.add_argument("--law-samples", type=float, dest="law_samples")
    p.add_argument("--no-limit", action="store_true", help="skip the limit-law comparison")
    p.add_argument("--limiting-variance", action="store_true", help="use variances at nu rather than at eps")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="heavytraffic", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="write stationary ensembles (CSV + JSON metadata)")
    _add_system_args(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("verify", help="exact identities, closed forms, residuals, SSC and limit comparison")
    _add_system_args(p)
    _add_verify_args(p)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("residual-grid", help="empirical functional-equation residuals over a frequency grid")
    _add_system_args(p)
    _add_verify_args(p)
    p.set_defaults(func=cmd_residual_grid)

    p = sub.add_parser("ssc-scan", help="moments of the perpendicular component across eps")
    _add_system_args(p)
    p.set_defaults(func=cmd_ssc_scan)

    p = sub.add_parser("limit-sample", help="draw from a heavy-traffic limit law")
    p.add_argument("--law", required=True, choices=["switch", "threeq", "nsys-F1", "nsys-F2", "nsys-F3"])
    p.add_argument("--n", type=int, default=2)
    p.add_argument("--sigma2", default="1", help="switch: one variance; threeq: 's2,s3'")
    p.add_argument("--gamma", type=float, default=1.0)
    p.add_argument("--samples", type=float, default=1e5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="CSV file to write")
    p.set_defaults(func=cmd_limit_sample)
    return parser


def make_config(args) -> ExperimentConfig:
    file_values = load_config_file(args.config) if getattr(args, "config", None) else {}
    overrides = {}
    for flag, key in CONFIG_FLAGS.items():
        if hasattr(args, flag):
            overrides[key] = getattr(args, flag)
    if getattr(args, "no_limit", False):
        overrides["compare_limit"] = False
    if getattr(args, "limiting_variance", False):
        overrides["limiting_variance"] = True
    if getattr(args, "plots", False):
        overrides["plots"] = True
    return ExperimentConfig.from_sources(file_values, overrides)


def _ensemble(cfg: ExperimentConfig, eps: float) -> StationaryEnsemble:
    """All seeds of the config at one eps, merged."""
    parts = [run_replicas(cfg.spec(eps), seed, cfg.replicas, cfg.workers, **cfg.sim_kwargs()) for seed in cfg.seeds]
    return parts[0] if len(parts) == 1 else concatenate(parts)


def _combined_hash(hashes) -> str:
    return hashlib.sha256("".join(hashes).encode()).hexdigest()[:16]


# -- subcommands -------------------------------------------------------------------


def cmd_simulate(args) -> int:
    cfg = make_config(args)
    out = Path(cfg.out)
    for eps in cfg.eps:
        for seed in cfg.seeds:
            ens = run_replicas(cfg.spec(eps), seed, cfg.replicas, cfg.workers, **cfg.sim_kwargs())
            csv_path, _ = ens.to_csv(out / f"{cfg.system}_eps{eps:g}_seed{seed}.csv")
            print(f"{csv_path}  ({len(ens)} samples)")
    return 0


def _law_for(cfg: ExperimentConfig, ens: StationaryEnsemble) -> LimitLaw | None:
    params = residual_params(ens, limiting=cfg.limiting_variance)
    if cfg.system == "switch":
        return LimitLaw.switch(cfg.n, params["sigma2"])
    if cfg.system == "threeq":
        s1, s2, s3 = params["sigma2"]
        return LimitLaw.threeq(s2, s3, s1)
    return LimitLaw.nsys(cfg.boundary, cfg.gamma, cfg.mu)


def _frequencies(cfg: ExperimentConfig):
    if cfg.grid:
        return load_frequency_grid(cfg.grid, cfg.system, cfg.n)
    return random_frequencies(cfg.system, cfg.grid_size, RngStream(cfg.seeds[0], 2**20).generator(), n=cfg.n)


def _identity_rows(rep: Report, ens: StationaryEnsemble, eps: float, tag: str) -> None:
    if ens.system == "switch":
        n = int(ens.metadata["n"])
        U = ens.u.reshape(len(ens), n, n, order="F").astype(float)  # U[:, i, j]
        for i in range(n):
            x = U[:, i, :].sum(axis=1)
            rep.check_z(f"AppB2-unused-service-input{i + 1}{tag}", x.mean(), eps, batch_means_se(x))
        for j in range(n):
            x = U[:, :, j].sum(axis=1)
            rep.check_z(f"AppB2-unused-service-output{j + 1}{tag}", x.mean(), eps, batch_means_se(x))
    elif ens.system == "threeq":
        for k in (1, 2):
            x = ens.u[:, k].astype(float)
            rep.check_z(f"AppA2-unused-service-q{k + 1}{tag}", x.mean(), eps, batch_means_se(x))
        rep.check_abs(f"AppA2-u1-zero{tag}", float(ens.u[:, 0].sum()), 0.5)
    else:
        meta = ens.metadata
        mu1, mu2 = meta["mu"]
        gamma = float(meta["gamma"])
        ind = ens.indicators.astype(float)
        if meta.get("boundary", "F3") == "F3":
            rep.check_z(f"AppD3-P(q1<=q2){tag}", ind[:, 0].mean(), eps, batch_means_se(ind[:, 0]))
            x = mu2 * ind[:, 1] + mu1 * ind[:, 2]
            rep.check_z(f"AppD3-boundary-identity{tag}", x.mean(), gamma * eps * (mu1 + mu2), batch_means_se(x))
        rep.add(Row(f"AppD3-P(q2=0)/eps{tag}", ind[:, 1].mean() / eps, gamma * (mu1 + mu2) / mu2, note="limit p1"))
        rep.add(Row(f"AppD3-P(q1=q2=0)/eps{tag}", ind[:, 2].mean() / eps, 0.0, note="limit p2"))


def cmd_verify(args) -> int:
    cfg = make_config(args)
    out = Path(cfg.out)
    rep = Report(f"verify {cfg.system}")
    freqs = _frequencies(cfg)
    hashes = []
    trend: dict[str, list] = {}
    for eps in cfg.eps:
        tag = f"@eps={eps:g}"
        ens = _ensemble(cfg, eps)
        hashes.append(ens.metadata_hash())
        _identity_rows(rep, ens, eps, tag)
        law = _law_for(cfg, ens)

        if law.kind.value != "nsys-F1" and law.kind.value != "nsys-F2" and law.hypothesis_ok:
            label = {"switch": "AppB4", "threeq": "AppA5", "nsys": "AppD5"}[cfg.system]
            grid = random_frequencies(cfg.system, 200, np.random.default_rng(0), n=cfg.n)
            worst = max(abs(closed_form_residual(law, f)) for f in grid)
            rep.check_abs(f"{label}-closed-form-residual{tag}", worst, 1e-12)
            params = residual_params(ens, limiting=cfg.limiting_variance)
            for k, f in enumerate(freqs):
                r = empirical_residual(ens, f, params=params)
                rep.add(Row(f"FE-residual-pt{k}{tag}", abs(r.value), 0.0, r.band / 2, note="|residual|; std_error is the undoubled band"))
                trend.setdefault(f"pt{k}", []).append(abs(r.value))

        ssc = ssc_report(ens, orders=(2,))
        for name, moments in ssc.items():
            m = moments[2]
            rep.add(Row(f"SSC-E|q_perp({name})|^2{tag}" if name != "q" else f"SSC-E|q|^2{tag}", m["mean"], None, m["se"]))
            trend.setdefault(f"ssc-{name}", []).append(m["mean"])

        if cfg.compare_limit:
            res = compare_to_limit(ens, eps, law, cfg.law_samples, RngStream(cfg.seeds[0], 2**21).generator())
            for metric in (Metric.KS, Metric.W1, Metric.MOMENT1):
                d = res[metric]
                for lab, v in zip(d.labels, d.values):
                    rep.add(Row(f"Limit-{metric.value}-{lab}{tag}", float(v)))
    rep.metadata_hash = _combined_hash(hashes)
    stem = out / f"verify_{cfg.system}"
    jp, cp = rep.write(stem)
    if cfg.plots and len(cfg.eps) > 1:
        series = {k: (cfg.eps, v) for k, v in trend.items() if k.startswith("pt")}
        if series:
            svg_line_chart(stem.with_name(stem.name + "_residuals.svg"), series, "eps", "|residual|", "functional-equation residual", logx=True)
        series = {k: (cfg.eps, v) for k, v in trend.items() if k.startswith("ssc-") and k != "ssc-q"}
        svg_line_chart(stem.with_name(stem.name + "_ssc.svg"), series, "eps", "E|q_perp|^2", "state space collapse", logx=True)
    print(rep.format_table())
    print(f"\nwrote {jp} and {cp}")
    return 0 if rep.passed else 1


def cmd_residual_grid(args) -> int:
    cfg = make_config(args)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    freqs = _frequencies(cfg)
    save_frequency_grid(out / f"grid_{cfg.system}.json", freqs)
    lines = ["eps,point,re,im,abs,band,metadata_hash"]
    series: dict[str, tuple[list, list]] = {}
    for eps in cfg.eps:
        ens = _ensemble(cfg, eps)
        h = ens.metadata_hash()
        params = residual_params(ens, limiting=cfg.limiting_variance)
        for k, f in enumerate(freqs):
            r = empirical_residual(ens, f, params=params)
            lines.append(f"{eps:g},{k},{r.value.real:.10g},{r.value.imag:.10g},{abs(r.value):.10g},{r.band:.10g},{h}")
            xs, ys = series.setdefault(f"pt{k}", ([], []))
            xs.append(eps)
            ys.append(abs(r.value))
    path = out / f"residual_grid_{cfg.system}.csv"
    path.write_text("\n".join(lines) + "\n")
    print("\n".join(lines))
    if cfg.plots and len(cfg.eps) > 1:
        svg_line_chart(path.with_suffix(".svg"), series, "eps", "|residual|", f"{cfg.system} residuals", logx=True)
    return 0


def cmd_ssc_scan(args) -> int:
    cfg = make_config(args)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    lines = ["eps,set,r,mean,std_error,metadata_hash"]
    series: dict[str, tuple[list, list]] = {}
    for eps in cfg.eps:
        ens = _ensemble(cfg, eps)
        h = ens.metadata_hash()
        for name, moments in ssc_report(ens).items():
            for r, m in moments.items():
                lines.append(f"{eps:g},{name},{r},{m['mean']:.10g},{m['se']:.10g},{h}")
                if r == 2:
                    xs, ys = series.setdefault(name, ([], []))
                    xs.append(eps)
                    ys.append(m["mean"])
    path = out / f"ssc_scan_{cfg.system}.csv"
    path.write_text("\n".join(lines) + "\n")
    print("\n".join(lines))
    if cfg.plots and len(cfg.eps) > 1:
        perp = {k: v for k, v in series.items() if k != "q"}
        svg_line_chart(path.with_suffix(".svg"), perp, "eps", "second moment", f"{cfg.system} perpendicular component", logx=True)
    return 0


def cmd_limit_sample(args) -> int:
    n_samples = int(args.samples)
    if n_samples < 1:
        raise ConfigError("field 'samples' must be >= 1")
    sig = [float(s) for s in str(args.sigma2).split(",")]
    if args.law == "switch":
        law = LimitLaw.switch(args.n, sig[0])
    elif args.law == "threeq":
        if len(sig) != 2:
            raise ConfigError("threeq needs --sigma2 s2,s3")
        law = LimitLaw.threeq(*sig)
    else:
        law = LimitLaw.nsys(args.law[-2:], args.gamma)
    X = law.sample(n_samples, RngStream(args.seed).generator())
    path = Path(args.out)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = ",".join(f"q_{k + 1}" for k in range(X.shape[1]))
    np.savetxt(path, X, fmt="%.10g", delimiter=",", header=header, comments="")
    print(f"{path}  ({n_samples} draws of {law.kind.value}; column means {np.round(X.mean(axis=0), 4).tolist()})")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - surfaced as exit code 1
        log.debug("run failed", exc_info=True)
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
