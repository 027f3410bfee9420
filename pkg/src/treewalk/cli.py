"""
Command-line experiment runner.

    treewalk <experiment> --config <path.json> --out <dir> [--threads N] [--seed S]

Experiments: identity-check, spectrum, mourre, wave, full-report.

Exit codes: 0 success, 1 an acceptance check failed, 2 invalid configuration,
3 capacity exceeded. Every report embeds the fully resolved configuration and
the library version; timings go to a separate ``run.log``.
"""

from __future__ import annotations

import argparse
import copy
import json
import logging
import math
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Iterable, Sequence

import numpy as np

from . import __version__
from .coins import CoinConfigError, CoinField
from .conjugate import (
    apply_A0,
    apply_A_tilde,
    apply_A_via_J,
    commutator_form,
    verify_second_difference,
)
from .operators import (
    apply_J,
    apply_J_star,
    apply_U0,
    apply_U0_inv,
    apply_Utilde0,
    apply_Utilde0_inv,
    apply_V,
    factor_V,
    hs_norm_sq_ball,
    hs_norm_sq_closed_form,
    Dynamics,
)
from .scattering import (
    WaveMode,
    adjoint_wave_apply,
    chain_and_completeness_check,
    channel_masses,
    convergence_study,
    intertwining_defect,
    wave_apply,
)
from .spectral import (
    ArcFilter,
    SpectralWindow,
    density_estimate,
    moments,
    mourre_rayleigh,
    mourre_sweep,
    point_spectrum_scan,
    smooth_sum_diagnostic,
)
from .states import TripleState, WalkState, random_local_state, random_triple_state
from .tree import CapacityError, TreeWord, ball

__all__ = ["ConfigError", "ExperimentConfig", "run", "main", "EXPERIMENTS"]

log = logging.getLogger("treewalk")

EXPERIMENTS = ("identity-check", "spectrum", "mourre", "wave", "full-report")

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_CAPACITY = 0, 1, 2, 3


class ConfigError(ValueError):
    pass


DEFAULT_COIN = {
    "preset": "smooth-decay",
    "C1": [0.3, 1.1, 2.0],
    "C2": [-0.7, 0.5, 1.9],
    "C3": [2.4, -1.3, 0.8],
    "eps": [1.0, 1.0, 1.0],
    "g": 0.5,
}

DEFAULT_TOLERANCES = {
    "commutator": 1e-12,
    "factorization": 1e-12,
    "hilbert_schmidt": 1e-10,
    "duality": 1e-12,
    "isometry": 1e-12,
    "rayleigh": 1e-10,
    "defect_exponent_max": -0.8,
    "slope_max": -1.3,
    "tail_max": 0.05,
    "density_floor": 0.01,
    "modulus": 1e-6,
    "boundary": 1e-4,
    "stability": 1e-3,
    "flattening": 1e-3,
    "drop": 1e-9,
}

DEFAULTS: dict[str, Any] = {
    "experiment": None,
    "seed": 0,
    "coin": DEFAULT_COIN,
    # identity-check
    "radius": 14,
    "n_random": 100,
    "random_radius": 3,
    "hs_radius": 12,
    "hs_s": 0.75,
    # spectrum
    "probes": [{"random": {"radius": 2}}],
    "evolve_steps": 4,
    "moments_N": 64,
    "grid_size": 512,
    "kernel": "jackson",
    "scan_radius": 8,
    "interior_margin": 2,
    "smooth_s": 1.0,
    "smooth_N": 56,
    "smooth_degree": 4,
    "smooth_window": {"center": 0.0, "half_width": math.pi / 2},
    # mourre
    "windows": [{"center": 2 * math.pi * c / 5, "half_width": math.pi / 3} for c in range(5)],
    "degree": 8,
    "free_probes": 10,
    "mourre_radii": [4, 8, 16],
    "mourre_probes": 4,
    "mourre_constant": None,
    # wave
    "wave_probes": [{"site": "e", "spin": 1}, {"site": "e", "spin": 2}, {"site": "e", "spin": 3}],
    "n_max": 16,
    "fit_window": [4, 16],
    "tail_from": 8,
    "modes": ["triple", "shift", "tilde"],
    "directions": ["+", "-"],
    "duality_n": [0, 4, 8, 12],
    # output
    "dump_states": False,
    "tolerances": DEFAULT_TOLERANCES,
}


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------


def _expect(cond: bool, msg: str) -> None:
    if not cond:
        raise ConfigError(msg)


def _is_int(v) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


def _is_num(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated experiment configuration; ``values`` holds every field with defaults applied."""

    values: dict

    def __getitem__(self, key: str):
        return self.values[key]

    @classmethod
    def from_dict(cls, raw: dict, experiment: str | None = None, seed: int | None = None) -> "ExperimentConfig":
        _expect(isinstance(raw, dict), "config must be a JSON object")
        unknown = sorted(set(raw) - set(DEFAULTS) - {"version"})
        _expect(not unknown, f"unknown config fields: {unknown}")
        v = copy.deepcopy(DEFAULTS)
        for key, val in raw.items():
            if key == "version":
                continue
            if key == "tolerances":
                _expect(isinstance(val, dict), "tolerances must be an object")
                bad = sorted(set(val) - set(DEFAULT_TOLERANCES))
                _expect(not bad, f"unknown tolerances: {bad}")
                v["tolerances"].update(val)
            else:
                v[key] = copy.deepcopy(val)
        if experiment is not None:
            _expect(experiment in EXPERIMENTS, f"unknown experiment {experiment!r}")
            _expect(
                raw.get("experiment") in (None, experiment),
                f"config is for {raw.get('experiment')!r}, not {experiment!r}",
            )
            v["experiment"] = experiment
        if seed is not None:
            v["seed"] = seed
        cls._validate(v)
        try:
            coin = CoinField.from_config(dict(v["coin"], seed=v["coin"].get("seed", v["seed"])))
        except (CoinConfigError, KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"coin: {exc}") from exc
        v["coin"] = coin.to_config()
        v["probes"] = [_resolve_probe(p, v["seed"], i) for i, p in enumerate(v["probes"])]
        v["wave_probes"] = [_resolve_probe(p, v["seed"], 1000 + i) for i, p in enumerate(v["wave_probes"])]
        return cls(v)

    @staticmethod
    def _validate(v: dict) -> None:
        _expect(v["experiment"] in EXPERIMENTS, f"experiment must be one of {EXPERIMENTS}")
        _expect(_is_int(v["seed"]) and v["seed"] >= 0, "seed must be a nonnegative integer")
        _expect(isinstance(v["coin"], dict), "coin must be an object")
        for key in ("radius", "n_random", "random_radius", "hs_radius", "evolve_steps", "moments_N",
                    "grid_size", "scan_radius", "interior_margin", "smooth_N", "smooth_degree",
                    "degree", "free_probes", "mourre_probes", "n_max", "tail_from"):
            _expect(_is_int(v[key]) and v[key] >= 0, f"{key} must be a nonnegative integer")
        _expect(v["radius"] <= 22, "radius must be at most 22")
        _expect(v["scan_radius"] <= 9, "scan_radius must be at most 9 (the stability check uses radius + 1)")
        _expect(v["grid_size"] >= 2 * v["moments_N"] + 1, "grid_size must be at least 2 * moments_N + 1")
        _expect(v["kernel"] in ("jackson", "fejer"), "kernel must be 'jackson' or 'fejer'")
        for key in ("hs_s", "smooth_s"):
            _expect(_is_num(v[key]), f"{key} must be a number")
        _expect(v["smooth_s"] > 0.5 or v["smooth_s"] == 0, "smooth_s must exceed 1/2 (0 is the negative control)")
        _expect(v["mourre_constant"] is None or _is_num(v["mourre_constant"]), "mourre_constant must be a number")
        for w in v["windows"] + [v["smooth_window"]]:
            _expect(isinstance(w, dict) and set(w) == {"center", "half_width"}, "windows need center and half_width")
            _expect(_is_num(w["center"]) and _is_num(w["half_width"]) and 0 < w["half_width"] <= math.pi,
                    "window half_width must lie in (0, pi]")
        _expect(isinstance(v["mourre_radii"], list) and all(_is_int(r) and r >= 3 for r in v["mourre_radii"]),
                "mourre_radii must be integers >= 3")
        _expect(len(v["fit_window"]) == 2 and all(_is_int(x) for x in v["fit_window"]), "fit_window must be [lo, hi]")
        _expect(set(v["modes"]) <= {"triple", "shift", "tilde"} and v["modes"], "modes must name wave modes")
        _expect(set(v["directions"]) <= {"+", "-"} and v["directions"], "directions must be '+' or '-'")
        _expect(all(_is_int(n) and n >= 0 for n in v["duality_n"]), "duality_n must be nonnegative integers")
        _expect(isinstance(v["dump_states"], bool), "dump_states must be a boolean")
        for key, val in v["tolerances"].items():
            _expect(_is_num(val), f"tolerance {key} must be a number")
        for p in v["probes"] + v["wave_probes"]:
            _expect(isinstance(p, dict), "probes must be objects")


def _resolve_probe(p: dict, seed: int, index: int) -> dict:
    if "random" in p:
        _expect(set(p) == {"random"}, f"random probe takes no other fields: {p}")
        r = dict(p["random"])
        bad = set(r) - {"radius", "n_sites", "seed"}
        _expect(not bad, f"unknown random probe fields {sorted(bad)}")
        r.setdefault("radius", 2)
        r.setdefault("n_sites", None)
        r.setdefault("seed", seed * 7919 + index)
        return {"random": r}
    _expect(set(p) <= {"site", "spin", "amp"} and "site" in p, f"probe needs 'site' (and 'spin' or 'amp'): {p}")
    try:
        TreeWord.parse(p["site"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    if "amp" in p:
        _expect(len(p["amp"]) == 3, "probe amp must have three [re, im] pairs")
        return {"site": p["site"], "amp": p["amp"]}
    _expect(p.get("spin") in (1, 2, 3), "probe spin must be 1, 2 or 3")
    return {"site": p["site"], "spin": p["spin"]}


def build_probe(p: dict) -> WalkState:
    if "random" in p:
        r = p["random"]
        return random_local_state(np.random.default_rng(r["seed"]), r["radius"], r["n_sites"])
    if "amp" in p:
        vec = np.array([complex(a[0], a[1]) for a in p["amp"]])
        phi = WalkState(np.array([TreeWord.parse(p["site"]).key]), vec[None, :])
        return phi / phi.norm()
    return WalkState.delta(p["site"], p["spin"])


# ---------------------------------------------------------------------------
# Helpers
# ---------------------------------------------------------------------------


def _pmap(fn: Callable, items: Sequence, threads: int) -> list:
    """Ordered parallel map; results do not depend on ``threads``."""
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _clean(obj):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else ("inf" if x > 0 else "-inf" if x < 0 else "nan")
    return obj


def _csv(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(repr(float(x)) if isinstance(x, (float, np.floating)) else str(x) for x in row))
    return "\n".join(lines) + "\n"


def _check(passed: bool, **details) -> dict:
    return {"pass": bool(passed), **details}


class Outputs:
    """Collects files in memory; written once the run finishes."""

    def __init__(self) -> None:
        self.files: dict[str, str] = {}

    def add(self, name: str, text: str) -> None:
        self.files[name] = text


def _windows(cfg) -> list[SpectralWindow]:
    return [SpectralWindow(w["center"], w["half_width"]) for w in cfg["windows"]]


# ---------------------------------------------------------------------------
# Experiments
# ---------------------------------------------------------------------------


def exp_identity_check(cfg: ExperimentConfig, cf: CoinField, out: Outputs, threads: int) -> dict:
    tol = cfg["tolerances"]
    checks: dict[str, dict] = {}

    t0 = time.perf_counter()
    sd = verify_second_difference(cfg["radius"])
    out.add("second_difference.json", json.dumps(_clean(sd), indent=2) + "\n")
    checks["second_difference"] = _check(
        not sd["failures"], radius=sd["radius"], checked=sd["checked"], failures=len(sd["failures"])
    )
    log.info("second difference over ball(%d): %.2fs", cfg["radius"], time.perf_counter() - t0)

    rng = np.random.default_rng(cfg["seed"])
    R = cfg["random_radius"]
    triples = [random_triple_state(rng, R) for _ in range(cfg["n_random"])]
    walks = [random_local_state(rng, R) for _ in range(cfg["n_random"])]

    def comm(pair):
        Phi, phi = pair
        k0 = commutator_form(lambda P: apply_U0(cf, P), lambda P: apply_U0_inv(cf, P), apply_A0, Phi) - Phi * 2.0
        kt = commutator_form(lambda p: apply_Utilde0(cf, p), lambda p: apply_Utilde0_inv(cf, p), apply_A_tilde, phi) - phi * 2.0
        return k0.norm() / Phi.norm(), kt.norm() / phi.norm()

    res = _pmap(comm, list(zip(triples, walks)), threads)
    u0 = max(r[0] for r in res)
    ut = max(r[1] for r in res)
    checks["commutator_U0"] = _check(u0 <= tol["commutator"], max_relative_defect=u0)
    checks["commutator_Utilde0"] = _check(ut <= tol["commutator"], max_relative_defect=ut)

    jj = max((apply_J(apply_J_star(phi)) - phi).norm() for phi in walks)
    jsj = 0.0
    for Phi in triples:
        expect = TripleState(tuple(c.restrict_class(k + 1) for k, c in enumerate(Phi)))
        jsj = max(jsj, apply_J_star(apply_J(Phi)).max_abs_diff(expect))
    checks["J_J_star"] = _check(jj == 0.0, max_error=jj)
    checks["J_star_J"] = _check(jsj == 0.0, max_error=jsj)

    dev = max(apply_A_via_J(phi).max_abs_diff(apply_A_tilde(phi)) for phi in walks)
    checks["A_equals_A_tilde"] = _check(dev == 0.0, max_deviation=dev)

    fac = factor_V(cf, ball(R + 1))
    resid = max((apply_V(cf, Phi) - fac.apply_G_star(fac.apply_G0(Phi))).norm() / Phi.norm() for Phi in triples)
    checks["V_factorization"] = _check(resid <= tol["factorization"], max_relative_residual=resid)
    hs = hs_norm_sq_ball(cfg["hs_s"], ball(cfg["hs_radius"]))
    closed = hs_norm_sq_closed_form(cfg["hs_s"], cfg["hs_radius"])
    checks["hilbert_schmidt"] = _check(
        abs(hs - closed) <= tol["hilbert_schmidt"], ball_sum=hs, closed_form=closed, difference=abs(hs - closed)
    )
    return checks


def exp_spectrum(cfg: ExperimentConfig, cf: CoinField, out: Outputs, threads: int) -> dict:
    tol = cfg["tolerances"]
    checks: dict[str, dict] = {}
    N = cfg["moments_N"]

    # free reference: a single channel delta at the root
    Phi = TripleState.single(1, WalkState.delta("e", 1))
    m0 = moments(lambda P: apply_U0(cf, P), lambda P: apply_U0_inv(cf, P), Phi, N, source="U0, delta_e x e1")
    nonzero = float(np.max(np.abs(np.delete(m0.values, N)))) if N else 0.0
    theta, rho0 = density_estimate(m0, cfg["grid_size"], cfg["kernel"])
    flat = float(np.max(np.abs(rho0 - m0[0].real / (2 * math.pi))))
    checks["free_moments_vanish"] = _check(nonzero == 0.0, max_abs_moment=nonzero, N=N)
    checks["free_density_flat"] = _check(flat <= 1e-10, max_deviation=flat, kernel=cfg["kernel"])
    out.add("density_free.csv", _csv(["theta", "density"], zip(theta, rho0)))

    dyn = Dynamics(cf, drop_tol=0.0 if cf.is_diagonal else tol["drop"])
    floor = tol["density_floor"] / (2 * math.pi)

    def one(item):
        i, spec = item
        phi = build_probe(spec)
        for _ in range(cfg["evolve_steps"]):
            phi = dyn.U(phi)
        phi = phi / phi.norm()
        m = moments(dyn.U, dyn.U_inv, phi, N, exact=dyn.exact, source=f"probe {i}")
        th, rho = density_estimate(m, cfg["grid_size"], cfg["kernel"])
        return i, phi, m, rho

    minima = []
    for i, phi, m, rho in _pmap(one, list(enumerate(cfg["probes"])), threads):
        out.add(f"density_probe{i}.csv", _csv(["theta", "density"], zip(theta, rho)))
        out.add(f"moments_probe{i}.csv", _csv(["n", "re", "im"], ((n, c.real, c.imag) for n, c in zip(range(-N, N + 1), m.values))))
        if cfg["dump_states"]:
            out.add(f"states/probe{i}.jsonl", phi.to_jsonl())
        minima.append({"probe": i, "min_density": float(rho.min()), "integral": float(rho.mean() * 2 * math.pi), "exact": m.exact})
    checks["density_positive"] = _check(
        all(x["min_density"] >= floor for x in minima), floor=floor, probes=minima, drop_tol=dyn.drop_tol
    )

    t0 = time.perf_counter()
    R = cfg["scan_radius"]
    scan = point_spectrum_scan(
        cf, R, cfg["interior_margin"], tol["modulus"], tol["boundary"], tol["stability"]
    )
    log.info("point spectrum scan at R=%d: %.2fs", R, time.perf_counter() - t0)
    out.add("scan.json", json.dumps(_clean([c.to_dict() for c in scan]), indent=2) + "\n")
    checks["point_spectrum"] = _check(
        all(c.stable for c in scan),
        radius=R,
        candidates=len(scan),
        stable=sum(bool(c.stable) for c in scan),
        thresholds={"modulus": tol["modulus"], "boundary": tol["boundary"], "stability": tol["stability"]},
    )

    # locally smooth partial sums for U_0 and for U, window away from candidates
    w = SpectralWindow(cfg["smooth_window"]["center"], cfg["smooth_window"]["half_width"])
    f = ArcFilter.make(w, cfg["smooth_degree"])
    clear = not any(w.contains(c.phase) for c in scan)
    s, Ns = cfg["smooth_s"], cfg["smooth_N"]
    free = smooth_sum_diagnostic(s, Phi, f, Ns, lambda P: apply_U0(cf, P), lambda P: apply_U0_inv(cf, P))
    pert = smooth_sum_diagnostic(s, WalkState.delta("e", 1), f, Ns, dyn.U, dyn.U_inv)
    for name, rep in (("free", free), ("perturbed", pert)):
        out.add(f"smooth_sums_{name}.csv", _csv(["m", "increment", "partial_sum"], zip(range(Ns + 1), rep.increments, rep.partial_sums)))
    checks["smooth_sums"] = _check(
        free.flattening_ratio < tol["flattening"] and (pert.flattening_ratio < tol["flattening"] or not clear),
        window_clear_of_candidates=clear,
        free=free.to_dict(),
        perturbed=pert.to_dict(),
    )
    return checks


def exp_mourre(cfg: ExperimentConfig, cf: CoinField, out: Outputs, threads: int) -> dict:
    tol = cfg["tolerances"]
    checks: dict[str, dict] = {}
    rng = np.random.default_rng(cfg["seed"] + 1)
    free_probes = [random_triple_state(rng, 2) for _ in range(cfg["free_probes"])]

    def free_window(w):
        f = ArcFilter.make(w, cfg["degree"])
        return mourre_rayleigh(f, free_probes, lambda P: apply_U0(cf, P), lambda P: apply_U0_inv(cf, P), apply_A0)

    reports = _pmap(free_window, _windows(cfg), threads)
    worst = max(abs(q - 2.0) for r in reports for q in r.quotients if q is not None)
    imag = max(abs(q) for r in reports for q in r.imag_parts if q is not None)
    skipped = sum(len(r.skipped) for r in reports)
    checks["free_quotients"] = _check(
        worst <= tol["rayleigh"] and imag <= tol["rayleigh"], max_deviation=worst, max_imag=imag, skipped=skipped
    )

    sweep = mourre_sweep(
        cf, cfg["mourre_radii"], _windows(cfg), cfg["degree"], cfg["mourre_probes"], cfg["seed"], cfg["mourre_constant"]
    )
    out.add("mourre.csv", _csv(["radius", "defect", "min_quotient"], zip(sweep.radii, sweep.defects, sweep.min_quotients)))
    if cf.decay_constant == 0.0 and not cf.defects:
        ok = max(sweep.defects) <= tol["rayleigh"]
    else:
        ok = sweep.bound_holds and sweep.slope is not None and sweep.slope <= tol["defect_exponent_max"]
    checks["perturbed_quotients"] = _check(ok, **sweep.to_dict())
    return checks


def _triple_probe(phi: WalkState) -> TripleState:
    t = TripleState.diagonal(phi)
    return t / t.norm()


def exp_wave(cfg: ExperimentConfig, cf: CoinField, out: Outputs, threads: int) -> dict:
    tol = cfg["tolerances"]
    checks: dict[str, dict] = {}
    probes = [build_probe(p) for p in cfg["wave_probes"]]
    jobs = [(tag, d, i) for tag in cfg["modes"] for d in cfg["directions"] for i in range(len(probes))]

    def study(job):
        tag, d, i = job
        mode = WaveMode(tag, d)
        x = _triple_probe(probes[i]) if tag == "triple" else probes[i] / probes[i].norm()
        return job, convergence_study(
            mode, x, cfg["n_max"], cf, tuple(cfg["fit_window"]), cfg["tail_from"], tol["slope_max"], tol["tail_max"]
        )

    summaries = []
    shift_iso = 0.0
    verdicts_ok = True
    for (tag, d, i), rec in _pmap(study, jobs, threads):
        sign = "plus" if d == "+" else "minus"
        out.add(f"convergence_{tag}_{sign}_probe{i}.csv", rec.to_csv())
        summaries.append({"probe": i, **rec.summary()})
        if tag == "shift":
            shift_iso = max(shift_iso, float(rec.isometry_defects.max()))
        if tag == "triple" and d == "+":
            verdicts_ok &= rec.verdict == "converged"
    checks["convergence"] = _check(verdicts_ok, studies=summaries)
    if "shift" in cfg["modes"]:
        checks["shift_isometry"] = _check(shift_iso <= tol["isometry"], max_isometry_defect=shift_iso)

    # finite-n duality <W_n x, psi> = <x, W_n^* psi>
    rng = np.random.default_rng(cfg["seed"] + 2)
    psi = random_local_state(rng, 2)
    phi = random_local_state(rng, 2)
    dual = 0.0
    for tag in cfg["modes"]:
        for d in cfg["directions"]:
            mode = WaveMode(tag, d)
            x = _triple_probe(phi) if tag == "triple" else phi
            for n in cfg["duality_n"]:
                lhs = wave_apply(mode, n, x, cf).inner(psi)
                rhs = x.inner(adjoint_wave_apply(n, psi, cf, mode))
                dual = max(dual, abs(lhs - rhs))
    checks["adjoint_duality"] = _check(dual <= tol["duality"], max_error=dual, n=cfg["duality_n"])

    inter = {}
    for tag in cfg["modes"]:
        x = _triple_probe(probes[0]) if tag == "triple" else probes[0] / probes[0].norm()
        inter[tag] = [[intertwining_defect(WaveMode(tag, "+"), x, n, cf, m) for m in (1, 2, 3)] for n in range(0, cfg["n_max"] + 1, 4)]
    chain = chain_and_completeness_check([p / p.norm() for p in probes], min(cfg["n_max"], 8), cf)
    masses = channel_masses(probes[0] / probes[0].norm(), cfg["n_max"], cf, 0.0 if cf.is_diagonal else tol["drop"])
    out.add("channel_masses.csv", _csv(["n", "branch1", "branch2", "branch3"], ((n, *row) for n, row in enumerate(masses["masses"]))))
    checks["identification"] = _check(chain["jj_star_defect"] == 0.0, **chain)
    return {
        **checks,
        "diagnostics": {
            "intertwining": {"n": list(range(0, cfg["n_max"] + 1, 4)), "m": [1, 2, 3], "defects": inter},
            "channel_masses": {
                "final": masses["masses"][-1],
                "window_variation": masses["window_variation"],
                "raw_variation": masses["raw_variation"],
            },
        },
    }


RUNNERS = {
    "identity-check": [exp_identity_check],
    "spectrum": [exp_spectrum],
    "mourre": [exp_mourre],
    "wave": [exp_wave],
    "full-report": [exp_identity_check, exp_spectrum, exp_mourre, exp_wave],
}


# ---------------------------------------------------------------------------
# Entry points
# ---------------------------------------------------------------------------


def execute(cfg: ExperimentConfig, threads: int = 1) -> tuple[dict, dict[str, str]]:
    """Run the configured experiment; returns the report and the extra output files."""
    cf = CoinField.from_config(cfg["coin"])
    out = Outputs()
    sections = {}
    for fn in RUNNERS[cfg["experiment"]]:
        name = fn.__name__.removeprefix("exp_").replace("_", "-")
        t0 = time.perf_counter()
        sections[name] = fn(cfg, cf, out, threads)
        log.info("%s finished in %.2fs", name, time.perf_counter() - t0)
    passed = all(
        c["pass"] for sec in sections.values() for key, c in sec.items() if key != "diagnostics"
    )
    report = {
        "version": __version__,
        "experiment": cfg["experiment"],
        "passed": passed,
        "config": cfg.values,
        "results": sections,
    }
    return _clean(report), out.files


def run(experiment: str, config_path: str | Path, out_dir: str | Path, threads: int = 1, seed: int | None = None) -> int:
    out_dir = Path(out_dir)
    try:
        try:
            raw = json.loads(Path(config_path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config: {exc}") from exc
        cfg = ExperimentConfig.from_dict(raw, experiment, seed)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    out_dir.mkdir(parents=True, exist_ok=True)
    handler = logging.FileHandler(out_dir / "run.log", mode="w")
    handler.setFormatter(logging.Formatter("%(asctime)s %(levelname)s %(message)s"))
    log.addHandler(handler)
    log.setLevel(logging.INFO)
    try:
        t0 = time.perf_counter()
        try:
            report, files = execute(cfg, threads)
        except CapacityError as exc:
            print(f"capacity error: {exc}", file=sys.stderr)
            log.error("capacity error: %s", exc)
            return EXIT_CAPACITY
        for name, text in files.items():
            path = out_dir / name
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(text)
        (out_dir / "report.json").write_text(json.dumps(report, indent=2) + "\n")
        log.info("total %.2fs, passed=%s", time.perf_counter() - t0, report["passed"])
        print(f"{experiment}: {'pass' if report['passed'] else 'FAIL'} -> {out_dir / 'report.json'}")
        return EXIT_OK if report["passed"] else EXIT_FAIL
    finally:
        log.removeHandler(handler)
        handler.close()


def main(argv: Sequence[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="treewalk", description="Quantum walk experiments on the degree-3 tree.")
    parser.add_argument("experiment", choices=EXPERIMENTS)
    parser.add_argument("--config", required=True, help="JSON config file")
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--threads", type=int, default=1)
    parser.add_argument("--seed", type=int, default=None, help="overrides the config seed")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    if args.threads < 1:
        print("config error: --threads must be positive", file=sys.stderr)
        return EXIT_CONFIG
    return run(args.experiment, args.config, args.out, args.threads, args.seed)


if __name__ == "__main__":
    sys.exit(main())
