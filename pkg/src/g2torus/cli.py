"""Batch experiment runner.

Usage::

    g2torus <command> [mode] [--flags] [--config file]

Commands: identities, geodesic ivp|bvp, hessian, curvature, flow,
contraction, m3, counterexample, volbound, validate.

A config file holds flat ``key=value`` lines (``#`` starts a comment); flags
given on the command line override it. A run manifest written by an earlier
run is also accepted as a config, which replays that run. Profiles are
either files in the profile text format or inline Fourier specs
``k:a:b,k:a:b,...`` for ``sum a cos(2 pi k x) + b sin(2 pi k x)``.

Exit codes: 0 ok, 1 config or validation error, 2 numerical failure,
3 invariant violated.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import platform
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .errors import (BudgetExhausted, DegenerateDensity, MassMismatch, NoRotation,
                     PositivityLost, ShockDetected, StiffnessAbort)
from .profile import Grid, Profile, load_profile

COMMANDS = ("identities", "geodesic", "hessian", "curvature", "flow", "contraction",
            "m3", "counterexample", "volbound", "validate")
GEODESIC_MODES = ("ivp", "bvp")

DEFAULTS = {
    "mode": "ivp",
    "n": 128,
    "t_final": 0.5,
    "dt": 1e-3,
    "chi": "hitchin",
    "u0": "0:1:0",
    "u1": "0:1:0,1:0:0.2",
    "f0": "1:0:0.1",
    "g0": "1:0.1:0",
    "seed": 42,
    "budget": 0,
    "trials": 20,
    "steps": 20,
    "u": 1.0,
    "out": "g2torus-out",
}
INT_KEYS = {"n", "seed", "budget", "trials", "steps"}
FLOAT_KEYS = {"t_final", "dt", "u"}
PROFILE_KEYS = ("u0", "u1", "f0", "g0")


class ConfigError(ValueError):
    """Invalid experiment configuration."""


class InvariantViolation(AssertionError):
    """A checked invariant failed on computed output."""


# ---------------------------------------------------------------------------
# configuration


def parse_config_text(text: str) -> dict:
    """Flat ``key=value`` lines, or a run manifest in JSON."""
    if text.lstrip().startswith("{"):
        data = json.loads(text)
        return {k: v for k, v in data.get("config", data).items() if v is not None}
    out = {}
    for num, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"config line {num}: expected key=value, got {line!r}")
        key, val = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        out["command" if key == "subcommand" else key] = val
    return out


def _coerce(cfg: dict) -> dict:
    out = dict(cfg)
    for k in INT_KEYS & out.keys():
        try:
            out[k] = int(out[k])
        except (TypeError, ValueError):
            raise ConfigError(f"{k} must be an integer, got {out[k]!r}") from None
    for k in FLOAT_KEYS & out.keys():
        try:
            out[k] = float(out[k])
        except (TypeError, ValueError):
            raise ConfigError(f"{k} must be a number, got {out[k]!r}") from None
    return out


def validate_config(cfg: dict) -> list[str]:
    """Schema and file checks only; returns every violation found."""
    errs = []
    cmd = cfg.get("command")
    if not cmd:
        errs.append("missing subcommand")
    elif cmd not in COMMANDS or cmd == "validate":
        errs.append(f"unknown subcommand {cmd!r}")
    if cmd == "geodesic" and cfg.get("mode") not in GEODESIC_MODES:
        errs.append(f"geodesic mode must be ivp or bvp, got {cfg.get('mode')!r}")
    try:
        c = _coerce(cfg)
    except ConfigError as e:
        return errs + [str(e)]
    n = c.get("n", DEFAULTS["n"])
    if n < 16 or n & (n - 1):
        errs.append(f"n must be a power of two >= 16, got {n}")
        n = DEFAULTS["n"]
    for k in ("t_final", "dt"):
        if k in c and c[k] < 0:
            errs.append(f"{k} must be non-negative")
    if c.get("dt", 1.0) == 0:
        errs.append("dt must be positive")
    for k in ("trials", "steps", "budget"):
        if k in c and c[k] < 0:
            errs.append(f"{k} must be non-negative")
    if "u" in c and c["u"] <= 0:
        errs.append("u must be positive")
    if "chi" in c:
        from .flows import parse_chi

        try:
            parse_chi(str(c["chi"]))
        except ValueError as e:
            errs.append(str(e))
    for k in PROFILE_KEYS:
        if k in c:
            try:
                _profile_source(str(c[k]), n)
            except (ValueError, OSError) as e:
                errs.append(f"{k}: {e}")
    sweep = c.get("sweep")
    if sweep:
        try:
            _parse_sweep(sweep)
        except ConfigError as e:
            errs.append(str(e))
    return errs


def _parse_sweep(spec: str):
    if "=" not in spec:
        raise ConfigError(f"sweep must look like param=a,b,c, got {spec!r}")
    key, vals = spec.split("=", 1)
    key = key.strip().replace("-", "_")
    vals = [v.strip() for v in vals.split(",") if v.strip()]
    if not vals:
        raise ConfigError("sweep has no values")
    return key, vals


def _profile_source(spec: str, n: int):
    path = Path(spec)
    if path.is_file():
        p = load_profile(path, n=n)
        if p.n != n:
            raise ValueError(f"file {spec} has {p.n} samples but n={n}")
        return p.values
    modes = {}
    for tok in spec.split(","):
        parts = tok.strip().split(":")
        if len(parts) != 3:
            raise ValueError(f"{spec!r} is neither a file nor an inline k:a:b list")
        k = int(parts[0])
        if k < 0 or k >= n // 2:
            raise ValueError(f"mode {k} not representable on n={n}")
        a, b = modes.get(k, (0.0, 0.0))
        modes[k] = (a + float(parts[1]), b + float(parts[2]))
    return Profile.from_fourier(Grid(n), modes).values


def _inputs_hash(cfg: dict) -> str:
    h = hashlib.sha256()
    h.update(json.dumps(cfg, sort_keys=True, default=str).encode())
    for k in PROFILE_KEYS:
        p = Path(str(cfg.get(k, "")))
        if cfg.get(k) and p.is_file():
            h.update(p.read_bytes())
    return h.hexdigest()


def _finite(o):
    if isinstance(o, float) and not np.isfinite(o):
        return None
    if isinstance(o, dict):
        return {k: _finite(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_finite(v) for v in o]
    if isinstance(o, np.ndarray):
        return _finite(o.tolist())
    return o


def _dump(obj, path: Path) -> None:
    """Strict JSON; non-finite floats become null."""
    text = json.dumps(_finite(obj), indent=2, sort_keys=True, default=_jsonable, allow_nan=False)
    path.write_text(text + "\n")


def _jsonable(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer, np.bool_)):
        return o.item()
    return str(o)


def _sha(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


# ---------------------------------------------------------------------------
# commands; each returns a list of artifact paths


def cmd_identities(c, out: Path):
    from .forms7 import identity_suite

    flt = identity_suite(seed=c["seed"], trials=c["trials"], n=c["n"])
    ext = identity_suite(seed=c["seed"], trials=min(c["trials"], 10), exact=True)
    ok = max(flt.values()) < 1e-8 and max(ext.values()) == 0
    res = {"seed": c["seed"], "trials": c["trials"], "float_max_error": flt,
           "exact_max_error": ext, "tolerance": 1e-8, "pass": ok}
    _dump(res, out / "identities.json")
    if not ok:
        raise InvariantViolation("identity suite error above tolerance")
    return ["identities.json"]


def cmd_geodesic(c, out: Path):
    from .geometry import discrete_circular_ot, geodesic_bvp, geodesic_ivp

    if c["mode"] == "ivp":
        path = geodesic_ivp(c["u0"], c["f0"], c["t_final"], dt=c["dt"],
                            store_every=max(1, int(round(c["t_final"] / c["dt"] / 50)) if c["dt"] else 1))
    else:
        path = geodesic_bvp(c["u0"], c["u1"], steps=c["steps"])
    path.to_csv(out / "geodesic.csv")
    summ = path.summary()
    summ.update({
        "mode": c["mode"],
        "burgers_residual_max": float(np.max(path.burgers_residuals())),
        "hj_variance_max": float(np.max(path.hj_variances())),
        "geodesic_residual_max": float(np.max(path.geodesic_residuals())),
        "mass_drift": float(np.max(np.abs(path.mass_series() - path.mass_series()[0]))),
        "meta": path.meta,
    })
    if c["mode"] == "bvp":
        summ["discrete_ot_cost"] = discrete_circular_ot(c["u0"], c["u1"])
    _dump(summ, out / "summary.json")
    if max(summ["hessian_series"]) > 1e-12:
        raise InvariantViolation("volume Hessian positive along geodesic")
    return ["geodesic.csv", "summary.json"]


def cmd_hessian(c, out: Path):
    from .geometry import hessian_vol, vtt_integrand_decomposition

    val = hessian_vol(c["u0"], c["f0"])
    w = np.cbrt(c["u0"]) / 18
    parts = vtt_integrand_decomposition(c["u0"], c["f0"])
    res = {"hessian_vol": val,
           "decomposition": {k: float(np.mean(w * v)) for k, v in zip(("main", "I1", "I2"), parts)}}
    _dump(res, out / "hessian.json")
    if val > 1e-12:
        raise InvariantViolation(f"volume Hessian {val:.3e} is positive")
    return ["hessian.json"]


def cmd_curvature(c, out: Path):
    from .geometry import sectional_curvature

    k = sectional_curvature(c["u0"], c["f0"], c["g0"])
    _dump({"sectional_curvature": k}, out / "curvature.json")
    if k < -1e-12:
        raise InvariantViolation(f"sectional curvature {k:.3e} is negative")
    return ["curvature.json"]


def cmd_flow(c, out: Path):
    from .flows import flow_run, parse_chi, write_flow_csv

    chi = parse_chi(c["chi"])
    states = flow_run(c["u0"], chi, c["t_final"], samples=max(2, c["steps"] + 1))
    write_flow_csv(states, out / "flow.csv")
    vol = np.array([s.vol_chi for s in states])
    mono = bool(np.all(np.diff(vol) >= -1e-10))
    _dump({"chi": chi.name, "t_final": c["t_final"], "vol_chi": vol, "monotone": mono,
           "final_sup_dev": float(np.max(np.abs(states[-1].u - 1.0)))}, out / "flow.json")
    if not mono:
        raise InvariantViolation("weighted volume decreased along the flow")
    return ["flow.csv", "flow.json"]


def cmd_contraction(c, out: Path):
    from .flows import length_contraction_experiment

    T = c["t_final"] if c["t_final"] > 0 else 0.02
    # output spacing 5e-4 keeps the time difference well inside tolerance
    rep = length_contraction_experiment(c["u0"], c["f0"], chi=c["chi"], T=T,
                                        samples=max(41, int(round(T / 5e-4)) + 1))
    rep.write(out / "contraction.json")
    if max(rep.formula_value) > 1e-8:
        raise InvariantViolation("length grows along the flow")
    if rep.rel_err > 1e-3:
        raise InvariantViolation(f"contraction formula off by {rep.rel_err:.3e}")
    return ["contraction.json"]


def cmd_m3(c, out: Path):
    from .rng import SplitMix64, random_density, random_tangent
    from .triples import TripleState, m3_hessian

    rng = SplitMix64(c["seed"])
    vals = []
    for _ in range(c["trials"]):
        u = np.array([random_density(rng, c["n"]) for _ in range(3)])
        f = np.array([random_tangent(rng, c["n"]) for _ in range(3)])
        vals.append(m3_hessian(TripleState(u, f, c["chi"])))
    _dump({"chi": c["chi"], "seed": c["seed"], "hessians": vals, "max": max(vals) if vals else 0.0},
          out / "m3.json")
    if vals and max(vals) > 1e-12:
        raise InvariantViolation("product-space Hessian positive")
    return ["m3.json"]


def cmd_counterexample(c, out: Path):
    from .triples import counterexample_report, nonconcavity_search

    search = nonconcavity_search(c["chi"], budget=c["budget"], seed=c["seed"])
    rep = counterexample_report(c["chi"], c["u"], search)
    _dump(rep, out / "counterexample.json")
    return ["counterexample.json"]


def cmd_volbound(c, out: Path):
    from .triples import volume_bound_check

    u = c["u0"]
    n = len(u)
    q = np.zeros((3, 3, n))
    q[0, 0] = 1.0
    q[1, 1] = 1.0
    q[2, 2] = u
    rep = volume_bound_check(q)
    _dump(rep, out / "volbound.json")
    if not rep["holds"]:
        raise InvariantViolation("volume bound violated")
    return ["volbound.json"]


HANDLERS = {
    "identities": cmd_identities, "geodesic": cmd_geodesic, "hessian": cmd_hessian,
    "curvature": cmd_curvature, "flow": cmd_flow, "contraction": cmd_contraction,
    "m3": cmd_m3, "counterexample": cmd_counterexample, "volbound": cmd_volbound,
}


# ---------------------------------------------------------------------------
# driver


def _versions() -> dict:
    import scipy

    return {"g2torus": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "python": platform.python_version()}


def run_one(cfg: dict) -> int:
    """Run a single validated config; returns the exit code."""
    c = dict(DEFAULTS)
    c.update(_coerce(cfg))
    c.pop("sweep", None)
    out = Path(c["out"])
    out.mkdir(parents=True, exist_ok=True)
    resolved = {k: c[k] for k in sorted(c) if k != "out"}
    for k in PROFILE_KEYS:
        c[k] = _profile_source(str(c[k]), c["n"])
    np.seterr(all="ignore")
    status, message, artifacts = 0, "ok", []
    try:
        artifacts = HANDLERS[c["command"]](c, out)
    except InvariantViolation as e:
        status, message = 3, f"InvariantViolation: {e}"
    except (ShockDetected, PositivityLost, StiffnessAbort, BudgetExhausted, NoRotation) as e:
        status, message = 2, f"{type(e).__name__}: {e}"
    except (MassMismatch, DegenerateDensity, ValueError) as e:
        status, message = 1, f"{type(e).__name__}: {e}"
    artifacts = [a for a in artifacts if (out / a).exists()]
    manifest = {
        "config": resolved,
        "inputs_hash": _inputs_hash(resolved),
        "seed": c["seed"],
        "versions": _versions(),
        "status": status,
        "message": message,
        "artifacts": {a: _sha(out / a) for a in artifacts},
    }
    _dump(manifest, out / "manifest.json")
    if status:
        print(message, file=sys.stderr)
    return status


def run(cfg: dict) -> int:
    errs = validate_config(cfg)
    if errs:
        for e in errs:
            print(f"config error: {e}", file=sys.stderr)
        return 1
    sweep = cfg.get("sweep")
    if not sweep:
        return run_one(cfg)
    key, vals = _parse_sweep(sweep)
    base = Path(str(cfg.get("out", DEFAULTS["out"])))
    jobs = []
    for v in vals:
        sub = dict(cfg, **{key: v, "out": str(base / f"{key}={v}")})
        sub.pop("sweep")
        errs = validate_config(sub)
        if errs:
            for e in errs:
                print(f"config error ({key}={v}): {e}", file=sys.stderr)
            return 1
        jobs.append(sub)
    with ThreadPoolExecutor(max_workers=min(8, len(jobs))) as pool:
        codes = list(pool.map(run_one, jobs))
    base.mkdir(parents=True, exist_ok=True)
    _dump({"sweep": key, "values": vals, "exit_codes": codes}, base / "sweep.json")
    return max(codes)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="g2torus", description="G2 torus-fibration geometry experiments.")
    p.add_argument("command", nargs="?", help="one of: " + ", ".join(COMMANDS))
    p.add_argument("mode", nargs="?", help="ivp or bvp for the geodesic command")
    p.add_argument("--config", help="key=value file or a previous run manifest")
    p.add_argument("--n", type=int)
    p.add_argument("--t-final", dest="t_final", type=float)
    p.add_argument("--dt", type=float)
    p.add_argument("--chi", help="power:p, hitchin, heat or linear")
    p.add_argument("--u0")
    p.add_argument("--u1")
    p.add_argument("--f0")
    p.add_argument("--g0")
    p.add_argument("--u", type=float, help="density value for the counterexample matrix")
    p.add_argument("--seed", type=int)
    p.add_argument("--budget", type=int)
    p.add_argument("--trials", type=int)
    p.add_argument("--steps", type=int)
    p.add_argument("--out")
    p.add_argument("--sweep", help="param=a,b,c fans out one run per value")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_intermixed_args(argv)
    cfg = {}
    if args.config:
        try:
            cfg = parse_config_text(Path(args.config).read_text())
        except (OSError, ValueError) as e:
            print(f"config error: {e}", file=sys.stderr)
            return 1
    flags = {k: v for k, v in vars(args).items() if v is not None and k not in ("config", "command", "mode")}
    cfg.update(flags)
    command = args.command
    if command == "validate":
        errs = validate_config(cfg)
        for e in errs:
            print(f"config error: {e}", file=sys.stderr)
        if not errs:
            print("config ok")
        return 1 if errs else 0
    if command:
        cfg["command"] = command
    if args.mode:
        cfg["mode"] = args.mode
    if cfg.get("command") == "geodesic":
        cfg.setdefault("mode", DEFAULTS["mode"])
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
