"""Experiment plumbing: deterministic seeds, file emission, and sweeps.

Every output byte is a pure function of the configuration and the master
seed. Derived seeds are the first 8 bytes, little-endian, of
SHA-256(LE64(master_seed) || label-utf8 || LE64(x)); randomness everywhere
else comes from numpy's default PCG64 generator seeded with such a value.
Files are written to a temporary name and renamed into place, and every
command emits a manifest with SHA-256 checksums of its outputs.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import struct
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import __version__
from .analysis import (
    check_error_length_bound,
    check_residual_bound,
    compute_params,
    contradiction_check,
    expected_error_sweep,
    inversion_residual_stats,
    sample_xs,
)
from .invert import RunReport, run_av_inv, run_inv
from .ops import build_pseudo_identity
from .perm import build_permutation

ENV_OUT_DIR = "QPERMINV_OUT_DIR"
ENV_WORKERS = "QPERMINV_WORKERS"

ARTIFACT_NAME = "qperminv"

RUN_CSV_COLUMNS = (
    "n", "family", "perm_seed", "a", "b", "bad_size", "j_seed",
    "x", "success_prob", "v2_norm", "first_failing_stage",
)

SWEEP_CSV_COLUMNS = (
    "n", "family", "perm_seed", "k", "a", "b", "bad_size", "j_seed",
    "x_mode", "x_count", "mean_success_prob", "mean_v2_norm", "max_v2_norm",
    "exceed_threshold", "exceed_count", "mean_error_len_tagged", "mean_error_len_plain",
)


def derive_seed(master_seed: int, label: str, x: int = 0) -> int:
    payload = struct.pack("<Q", master_seed & (2**64 - 1))
    payload += label.encode("utf-8")
    payload += struct.pack("<Q", x & (2**64 - 1))
    digest = hashlib.sha256(payload).digest()
    return struct.unpack("<Q", digest[:8])[0]


def fmt17(value) -> str:
    return format(float(value), ".17g")


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return fmt17(value)
    return str(value)


def sha256_text(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def atomic_write_text(path: str, text: str) -> None:
    path = os.fspath(path)
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)


def resolve_out_dir(flag_value: str | None) -> str:
    env = os.environ.get(ENV_OUT_DIR)
    return env if env else (flag_value if flag_value else ".")


def resolve_workers(flag_value: int | None) -> int:
    env = os.environ.get(ENV_WORKERS)
    if env:
        return max(1, int(env))
    return max(1, flag_value or 1)


def write_manifest(command: str, config_echo: dict, derived_seeds: dict, outputs: dict, manifest_path: str) -> None:
    """outputs maps basename -> file text (already written)."""
    manifest = {
        "artifact": ARTIFACT_NAME,
        "version": __version__,
        "command": command,
        "config": config_echo,
        "derived_seeds": derived_seeds,
        "outputs": {name: f"sha256:{sha256_text(text)}" for name, text in outputs.items()},
    }
    atomic_write_text(manifest_path, json.dumps(manifest, sort_keys=True, indent=2) + "\n")


def run_reports_to_csv(reports: list[RunReport]) -> str:
    lines = [",".join(RUN_CSV_COLUMNS)]
    for rep in sorted(reports, key=lambda r: r.x):
        row = (
            rep.n, rep.family, rep.perm_seed, rep.a, rep.b, rep.bad_size, rep.j_seed,
            rep.x, rep.success_prob, rep.v2_norm, rep.first_failing_stage,
        )
        lines.append(",".join(_cell(v) for v in row))
    return "\n".join(lines) + "\n"


def _run_chunk(args) -> list[RunReport]:
    perm, jop, xs, k, trace, threshold = args
    if jop is None:
        return [run_inv(perm, x, k=k, trace=trace, threshold=threshold) for x in xs]
    return [run_av_inv(perm, x, jop, trace=trace, threshold=threshold) for x in xs]


def run_batch(perm, jop, xs, k, trace, threshold, workers: int = 1) -> list[RunReport]:
    """Per-x runs, optionally fanned out to worker processes. Reports come
    back in ascending-x order regardless of the worker count."""
    xs = [int(x) for x in sorted(xs)]
    workers = max(1, workers)
    if workers == 1 or len(xs) < 2 * workers:
        return _run_chunk((perm, jop, xs, k, trace, threshold))
    bounds = [len(xs) * i // workers for i in range(workers + 1)]
    chunks = [xs[bounds[i]:bounds[i + 1]] for i in range(workers) if bounds[i] < bounds[i + 1]]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        parts = list(pool.map(_run_chunk, [(perm, jop, c, k, trace, threshold) for c in chunks]))
    return [rep for part in parts for rep in part]


SWEEP_CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["master_seed", "grid"],
    "properties": {
        "master_seed": {"type": "integer", "minimum": 0},
        "k": {"type": "integer", "minimum": 1},
        "grid": {
            "type": "object",
            "additionalProperties": False,
            "required": ["n", "family", "a", "bad_size"],
            "properties": {
                "n": {"type": "array", "items": {"type": "integer", "minimum": 2, "maximum": 16}},
                "family": {
                    "type": "array",
                    "items": {"enum": ["identity", "bit-reversal", "xor-mask", "affine-gf2", "random"]},
                },
                "a": {"type": "array", "items": {"type": "number", "minimum": 0, "maximum": 1}},
                "bad_size": {"type": "array", "items": {"type": "integer", "minimum": 0}},
            },
        },
        "perm_seed": {"type": "integer"},
        "j_seed": {"type": "integer"},
        "bad_mode": {"enum": ["full-rotation", "random-angle"]},
        "angle_mode": {"enum": ["worst-case", "random"]},
        "x_mode": {
            "oneOf": [
                {"const": "all"},
                {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["sample"],
                    "properties": {"sample": {"type": "integer", "minimum": 1}},
                },
            ]
        },
        "exceed_threshold": {"type": "number", "exclusiveMinimum": 0},
        "out": {"type": "string"},
    },
}

SWEEP_DEFAULTS = {
    "k": 1,
    "bad_mode": "full-rotation",
    "angle_mode": "worst-case",
    "x_mode": "all",
    "exceed_threshold": 0.5,
}


def validate_sweep_config(config: dict) -> dict:
    import jsonschema

    try:
        jsonschema.validate(config, SWEEP_CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        raise ValueError(exc.message) from exc
    merged = dict(SWEEP_DEFAULTS)
    merged.update(config)
    for n in merged["grid"]["n"]:
        if n % 2 != 0:
            raise ValueError(f"grid n values must be even, got {n}")
    return merged


def load_sweep_config(path: str) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        return validate_sweep_config(json.load(fh))


def sweep_rows(config: dict, workers: int = 1) -> tuple[list[list[str]], dict]:
    """Evaluate a sweep grid; rows come back in grid (lexicographic) order."""
    master = config["master_seed"]
    k = config["k"]
    grid = config["grid"]
    derived: dict[str, int] = {}
    rows = []
    for n in grid["n"]:
        j_seed = config.get("j_seed")
        if j_seed is None:
            label = f"pseudo-identity/n={n}"
            j_seed = derive_seed(master, label)
            derived[label] = j_seed
        if config["x_mode"] == "all":
            xs = None
            x_mode, x_count = "all", 1 << n
        else:
            label = f"xs/n={n}"
            xs_seed = derive_seed(master, label)
            derived[label] = xs_seed
            xs = sample_xs(n, config["x_mode"]["sample"], xs_seed)
            x_mode, x_count = "sample", len(xs)
        for family in grid["family"]:
            perm_seed = config.get("perm_seed")
            if perm_seed is None:
                label = f"perm/{family}/n={n}"
                perm_seed = derive_seed(master, label)
                derived[label] = perm_seed
            perm = build_permutation(family, n, seed=perm_seed)
            for a in grid["a"]:
                for bad_size in grid["bad_size"]:
                    if bad_size > (1 << n):
                        raise ValueError(f"bad_size {bad_size} exceeds 2^{n}")
                    b = bad_size / (1 << n)
                    jop = build_pseudo_identity(
                        n, k, a=a, b=b,
                        bad_mode=config["bad_mode"], angle_mode=config["angle_mode"],
                        seed=j_seed,
                    )
                    reports = run_batch(perm, jop, xs if xs is not None else range(1 << n),
                                        k, False, 0.0, workers)
                    v2 = np.asarray([r.v2_norm for r in reports])
                    succ = np.asarray([r.success_prob for r in reports])
                    tagged = [
                        expected_error_sweep(perm, jop, j, with_tagged=True, xs=xs).mean_error_len
                        for j in range(n // 2)
                    ]
                    plain = [
                        expected_error_sweep(perm, jop, j, with_tagged=False, xs=xs).mean_error_len
                        for j in range(1, n // 2 + 1)
                    ]
                    rows.append([
                        _cell(n), family, _cell(perm_seed), _cell(k), _cell(float(a)),
                        _cell(b), _cell(bad_size), _cell(j_seed), x_mode, _cell(x_count),
                        _cell(float(succ.mean())), _cell(float(v2.mean())), _cell(float(v2.max())),
                        _cell(float(config["exceed_threshold"])),
                        _cell(int(np.count_nonzero(v2 > config["exceed_threshold"]))),
                        _cell(float(np.mean(tagged))), _cell(float(np.mean(plain))),
                    ])
    return rows, derived


def sweep_to_csv(rows: list[list[str]]) -> str:
    lines = [",".join(SWEEP_CSV_COLUMNS)]
    lines.extend(",".join(row) for row in rows)
    return "\n".join(lines) + "\n"


def _check_entry(name: str, measured: float, bound: float, passed: bool) -> dict:
    return {
        "name": name,
        "measured": float(measured),
        "bound": float(bound),
        "margin": float(bound - measured),
        "pass": bool(passed),
    }


def lemma_battery(n_max: int = 8, count: int = 200, seed: int = 0, k: int = 1) -> list[dict]:
    """The check-lemmas battery: randomized bound suites, exhaustive
    expectation identities, residual aggregates, and the parameter calculus."""
    rng = np.random.default_rng(derive_seed(seed, "lemma-suite"))
    a_choices = (0.0, 1e-6, 1e-3)
    b_choices = (0.0, 1.0 / 16.0, 1.0 / 4.0)
    worst_len = None
    worst_perp = None
    len_viol = perp_viol = 0
    for _ in range(count):
        n = 2 * int(rng.integers(1, n_max // 2 + 1))
        a = a_choices[rng.integers(0, len(a_choices))]
        b = b_choices[rng.integers(0, len(b_choices))]
        jop = build_pseudo_identity(
            n, k, a=a, b=b,
            bad_mode=("full-rotation", "random-angle")[rng.integers(0, 2)],
            angle_mode=("worst-case", "random")[rng.integers(0, 2)],
            seed=int(rng.integers(0, 2**32)),
        )
        size = 1 << n
        s_size = int(rng.integers(1, size + 1))
        support = rng.choice(size, size=s_size, replace=False)
        flipped = rng.choice(support, size=int(rng.integers(0, s_size + 1)), replace=False)
        rep = check_error_length_bound(jop, support, flipped)
        if not rep.passed:
            len_viol += 1
        if worst_len is None or rep.margin < worst_len.margin:
            worst_len = rep
        res = check_residual_bound(jop, support, flipped)
        if not res.passed:
            perp_viol += 1
        if worst_perp is None or res.margin < worst_perp.margin:
            worst_perp = res
    checks = [
        _check_entry("error-length-bound", worst_len.measured, worst_len.bound, len_viol == 0),
        _check_entry("orthogonal-residual-bound", worst_perp.perp_norm, worst_perp.error_len,
                     perp_viol == 0),
    ]

    n = n_max
    a_small = 2.0 ** (-2 * n)
    worst_ratio_err = 0.0
    worst_mean = None
    mean_ok = True
    ratio_ok = True
    for bad_size in (1, 2, 4):
        jop = build_pseudo_identity(
            n, k, a=a_small, b=bad_size / (1 << n),
            seed=derive_seed(seed, f"battery-jop/n={n}/bad={bad_size}"),
        )
        perm = build_permutation("random", n, seed=derive_seed(seed, f"battery-perm/n={n}"))
        for with_tagged, j_values in ((True, range(n // 2)), (False, range(1, n // 2 + 1))):
            for j in j_values:
                summary = expected_error_sweep(perm, jop, j, with_tagged=with_tagged)
                ratio_ok = ratio_ok and summary.ratio_exact
                worst_ratio_err = max(
                    worst_ratio_err, abs(float(summary.mean_ratio - summary.expected_ratio))
                )
                mean_ok = mean_ok and summary.error_bound_ok
                if worst_mean is None or (summary.error_bound - summary.mean_error_len) < (
                    worst_mean.error_bound - worst_mean.mean_error_len
                ):
                    worst_mean = summary
    checks.append(_check_entry("overlap-ratio-identity", worst_ratio_err, 1e-12, ratio_ok))
    checks.append(_check_entry("mean-error-length-bound", worst_mean.mean_error_len,
                               worst_mean.error_bound, mean_ok))

    worst_res = None
    res_ok = True
    markov_ok = True
    worst_markov = (0.0, 0.0)
    for bad_size in (1, 2, 4):
        b = bad_size / (1 << n)
        q = (1.0 / b) ** 0.25 / math.sqrt(2.0 * n)
        jop = build_pseudo_identity(
            n, k, a=0.0, b=b, seed=derive_seed(seed, f"battery-jop/n={n}/bad={bad_size}"),
        )
        perm = build_permutation("random", n, seed=derive_seed(seed, f"battery-perm/n={n}"))
        summary = inversion_residual_stats(perm, jop, q)
        if summary.residual_bound_applicable:
            res_ok = res_ok and summary.residual_bound_ok
        if worst_res is None or (summary.residual_bound - summary.mean_v2) < (
            worst_res.residual_bound - worst_res.mean_v2
        ):
            worst_res = summary
        markov_ok = markov_ok and summary.markov_ok
        if summary.markov_count - summary.markov_limit > worst_markov[0] - worst_markov[1]:
            worst_markov = (float(summary.markov_count), float(summary.markov_limit))
    checks.append(_check_entry("mean-residual-bound", worst_res.mean_v2,
                               worst_res.residual_bound, res_ok))
    checks.append(_check_entry("residual-markov-count", worst_markov[0], worst_markov[1], markov_ok))

    worst_q_err = 0.0
    for r in range(1, 21):
        for n_p in range(2, 21, 2):
            worst_q_err = max(worst_q_err, abs(compute_params(r, n_p).q - (r + 1)))
    checks.append(_check_entry("parameter-identity", worst_q_err, 1e-12, worst_q_err <= 1e-12))
    all_contra = all(contradiction_check(r) for r in range(1, 101))
    checks.append(_check_entry("failure-count-inequality", 0.0 if all_contra else 1.0, 0.5,
                               all_contra))
    return checks
