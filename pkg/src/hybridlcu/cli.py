"""Command-line entry point: seeded runs, ``key = value`` configs, CSV outputs.

Every subcommand writes CSVs whose final line is a metadata comment with
the seed and package version, and reruns with the same seed reproduce the
files byte for byte regardless of --workers (shot ranges and sweep cells
are split contiguously and merged in submission order).
"""

from __future__ import annotations

import argparse
import math
import pathlib
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import __version__, estimate, gsp, hybrid, lchs, lcu
from . import partition as partition_mod
from . import qcore, qed, qlss

__all__ = [
    "ConfigError",
    "InvariantViolation",
    "RunConfig",
    "parse_config_text",
    "build_run_config",
    "cmd_demo",
    "cmd_lchs",
    "cmd_qlss",
    "cmd_gsp",
    "cmd_qed",
    "cmd_partitions",
    "main",
]

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INVARIANT = 3

DEFAULT_SHOTS = 20000

# Monte-Carlo mean may sit this many standard errors from the analytic
# value before the demo cross-check is declared broken.
MC_SIGMAS = 6.0


class ConfigError(Exception):
    """Bad flag, unknown or missing config key, out-of-range parameter."""


class InvariantViolation(RuntimeError):
    """A numerical cross-check failed at its pinned tolerance."""


# ---------------------------------------------------------------------------
# config files

_RUN_KEYS = {"run.seed": "u64", "run.shots": "int", "run.out": "str", "run.workers": "int"}

_PARAM_KEYS: dict[str, dict[str, str]] = {
    "demo": {"demo.m": "int", "demo.dim": "int", "demo.epsilon": "float", "demo.delta": "float"},
    "lchs": {
        "lchs.l_norm": "float",
        "lchs.t": "float",
        "lchs.epsilon": "float",
        "lchs.points": "int",
        "lchs.p_assumed": "float",
    },
    "qlss": {"qlss.kappas": "floats", "qlss.epsilon": "float", "qlss.dim": "int"},
    "gsp": {"gsp.dim": "int", "gsp.delta": "float", "gsp.p0": "float", "gsp.epsilon": "float"},
    "qed": {
        "qed.r_values": "floats",
        "qed.pz_min": "float",
        "qed.pz_max": "float",
        "qed.pz_points": "int",
        "qed.codewords": "int",
    },
    "partitions": {"partitions.m": "int", "partitions.dim": "int"},
}


def _coerce(key: str, kind: str, raw: str):
    try:
        if kind == "int":
            return int(raw)
        if kind == "u64":
            value = int(raw)
            if not 0 <= value < 2**64:
                raise ConfigError(f"{key} = {raw} outside the 64-bit range")
            return value
        if kind == "float":
            return float(raw)
        if kind == "floats":
            parts = [p.strip() for p in raw.split(",") if p.strip()]
            if not parts:
                raise ConfigError(f"{key} needs at least one value")
            return tuple(float(p) for p in parts)
        return raw
    except ConfigError:
        raise
    except ValueError:
        raise ConfigError(f"cannot parse {key} = {raw!r} as {kind}") from None


def parse_config_text(text: str) -> dict[str, str]:
    """Line-oriented ``key = value`` pairs; '#' comments; dotted keys."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        out[key] = value
    return out


_MISSING = object()


@dataclass
class RunConfig:
    subcommand: str
    seed: int
    shots: int
    out_dir: pathlib.Path
    workers: int
    params: dict = field(default_factory=dict)
    emit_plot_script: bool = False

    def get(self, key: str, default=_MISSING):
        if key in self.params:
            return self.params[key]
        if default is _MISSING:
            raise ConfigError(f"missing config key {key!r}")
        return default


def build_run_config(args: argparse.Namespace) -> RunConfig:
    file_cfg: dict[str, str] = {}
    if args.config is not None:
        path = pathlib.Path(args.config)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        file_cfg = parse_config_text(path.read_text())
    known = dict(_RUN_KEYS)
    known.update(_PARAM_KEYS[args.subcommand])
    unknown = sorted(set(file_cfg) - set(known))
    if unknown:
        raise ConfigError(f"unknown config keys for {args.subcommand}: {', '.join(unknown)}")
    coerced = {key: _coerce(key, known[key], value) for key, value in file_cfg.items()}

    def pick(flag_value, key, default):
        return flag_value if flag_value is not None else coerced.get(key, default)

    seed = pick(args.seed, "run.seed", 0)
    if not 0 <= seed < 2**64:
        raise ConfigError(f"seed {seed} outside the 64-bit range")
    shots = pick(args.shots, "run.shots", DEFAULT_SHOTS)
    if shots < 1:
        raise ConfigError("shots must be >= 1")
    workers = pick(args.workers, "run.workers", 1)
    if workers < 1:
        raise ConfigError("workers must be >= 1")
    out_dir = pathlib.Path(pick(args.out, "run.out", "."))
    params = {key: value for key, value in coerced.items() if not key.startswith("run.")}
    return RunConfig(
        subcommand=args.subcommand,
        seed=seed,
        shots=shots,
        out_dir=out_dir,
        workers=workers,
        params=params,
        emit_plot_script=args.emit_plot_script,
    )


# ---------------------------------------------------------------------------
# deterministic worker pools


def _chunk_ranges(total: int, workers: int) -> list[tuple[int, int]]:
    """Contiguous (start, count) chunks covering range(total) in order."""
    bounds = [total * i // workers for i in range(workers + 1)]
    return [(lo, hi - lo) for lo, hi in zip(bounds, bounds[1:]) if hi > lo]


def _sample_parallel(sampler: hybrid.Sampler, seed: int, shots: int, workers: int, stream: int) -> hybrid.SampleArrays:
    """Shot range split across a thread pool; per-shot substreams make the
    merged arrays identical for every worker count."""
    chunks = _chunk_ranges(shots, workers)
    if len(chunks) == 1:
        return sampler.sample_shots(seed, shots, stream=stream)
    with ThreadPoolExecutor(max_workers=len(chunks)) as pool:
        parts = list(pool.map(lambda c: sampler.sample_shots(seed, c[1], start=c[0], stream=stream), chunks))
    return hybrid.SampleArrays.concat(parts)


# ---------------------------------------------------------------------------
# random demo instances (artifact plumbing, not part of the numerics)


def _haar_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    z = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def _random_instance(m: int, dim: int, rng: np.random.Generator):
    """Decomposition, pure state and unit-norm observable from one stream."""
    coeffs = rng.uniform(0.2, 1.0, size=m)
    dec = lcu.LcuDecomposition.from_terms(coeffs, [_haar_unitary(dim, rng) for _ in range(m)])
    psi = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    psi /= np.linalg.norm(psi)
    h = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    h = (h + h.conj().T) / 2.0
    h /= np.abs(np.linalg.eigvalsh(h)).max()
    return dec, psi, h


def _partition_a_star(part: partition_mod.Partition) -> int:
    widths = [math.ceil(math.log2(len(g))) if len(g) > 1 else 0 for g in part.groups]
    return max(widths)


def _write_partition_csv(path, rows, seed: int) -> None:
    with open(path, "w") as fh:
        fh.write("partition,a_star,R,R_minus_P\n")
        for text, a_star, r, gap in rows:
            # the partition text form uses commas inside groups, so quote it
            fh.write(f'"{text}",{a_star},{r:.17g},{gap:.17g}\n')
        fh.write(f"# seed={seed} version={__version__}\n")


def _partition_scan_rows(dec: lcu.LcuDecomposition, psi: np.ndarray) -> list[tuple[str, int, float, float]]:
    p_value = partition_mod.reduction_factor(dec, partition_mod.Partition.coherent(dec.m), psi)
    rows = []
    for part in partition_mod.enumerate_partitions(dec.m):
        r_value = partition_mod.reduction_factor(dec, part, psi)
        rows.append((part.to_text(), _partition_a_star(part), r_value, r_value - p_value))
    return rows


# ---------------------------------------------------------------------------
# subcommands


def cmd_demo(config: RunConfig) -> None:
    """Random instance, partition scan, three-way cross-check, estimation."""
    m = config.get("demo.m", 4)
    dim = config.get("demo.dim", 4)
    if not 1 <= m <= 6:
        raise ConfigError(f"demo.m = {m} outside 1..6")
    if not 2 <= dim <= 8:
        raise ConfigError(f"demo.dim = {dim} outside 2..8")
    epsilon = config.get("demo.epsilon", 0.05)
    delta = config.get("demo.delta", 0.05)
    rng = np.random.default_rng(config.seed)
    dec, psi, obs = _random_instance(m, dim, rng)

    _write_partition_csv(config.out_dir / "demo_partitions.csv", _partition_scan_rows(dec, psi), config.seed)

    # three-way cross-check on a two-group split (richer pair circuits
    # than the coherent or fully randomized extremes)
    if m >= 2:
        half = (m + 1) // 2
        part = partition_mod.Partition([tuple(range(half)), tuple(range(half, m))], m)
    else:
        part = partition_mod.Partition.coherent(m)
    channel = hybrid.HybridChannel(dec, part)
    analytic = hybrid.exact_expectation(channel, psi, obs, backend="analytic")
    circuit = hybrid.exact_expectation(channel, psi, obs, backend="circuit")
    if abs(analytic - circuit) > qcore.TOL.cross_backend:
        raise InvariantViolation(f"analytic {analytic!r} vs circuit {circuit!r} disagree")

    sampler = hybrid.Sampler(channel, psi, obs)
    batch_obs = _sample_parallel(sampler, config.seed, config.shots, config.workers, stream=0)
    mc = float(batch_obs.g.mean())
    se = math.sqrt(max(estimate.sample_variance(batch_obs.g), 1e-30) / batch_obs.n)
    if abs(mc - analytic) > MC_SIGMAS * se + 1e-12:
        raise InvariantViolation(f"monte-carlo mean {mc} is {abs(mc - analytic) / se:.1f} sigma from {analytic}")
    print(f"cross-check ok: analytic={analytic:.12g} circuit={circuit:.12g} mc={mc:.12g} (N={batch_obs.n})")

    sampler_one = hybrid.Sampler(channel, psi, np.eye(dim))
    batch_one = _sample_parallel(sampler_one, config.seed, config.shots, config.workers, stream=1)
    batch = estimate.SampleBatch(batch_obs.g, batch_one.g, seed=config.seed)
    est_cfg = estimate.EstimationConfig(epsilon=epsilon, delta=delta, bound_c=1.0)
    reports = [
        estimate.estimate_numerator(batch, dec.one_norm, est_cfg),
        estimate.estimate_ratio(batch, est_cfg),
    ]
    estimate.write_report_csv(config.out_dir / "demo_reports.csv", reports, config.seed, __version__)
    hybrid.write_shot_csv(config.out_dir / "demo_shots.csv", batch_obs, __version__)
    print(f"demo: wrote demo_partitions.csv demo_reports.csv demo_shots.csv in {config.out_dir}")


def cmd_partitions(config: RunConfig) -> None:
    """Exhaustive table of partition, ancilla width a*, R, R - P."""
    m = config.get("partitions.m", 5)
    dim = config.get("partitions.dim", 4)
    if not 1 <= m <= 8:
        raise ConfigError(f"partitions.m = {m} outside 1..8")
    if not 2 <= dim <= 8:
        raise ConfigError(f"partitions.dim = {dim} outside 2..8")
    rng = np.random.default_rng(config.seed)
    dec, psi, _ = _random_instance(m, dim, rng)
    rows = _partition_scan_rows(dec, psi)
    _write_partition_csv(config.out_dir / "partitions.csv", rows, config.seed)
    print(f"partitions: {len(rows)} rows for m={m} in {config.out_dir}")


def cmd_lchs(config: RunConfig) -> None:
    rows = lchs.fig_sweep(
        l_norm=config.get("lchs.l_norm", 2.0),
        t=config.get("lchs.t", 3.0),
        epsilon=config.get("lchs.epsilon", 5e-5),
        points=config.get("lchs.points", 60),
        p_assumed=config.get("lchs.p_assumed", 1e-2),
    )
    lchs.write_sweep_csv(config.out_dir / "lchs_bound.csv", rows, config.seed, __version__)
    print(f"lchs: {len(rows)} rows, M from {rows[0].m} to {rows[-1].m}, in {config.out_dir}")


def cmd_qlss(config: RunConfig) -> None:
    kappas = config.get("qlss.kappas", (4.0, 8.0, 16.0, 32.0))
    rows = qlss.sweep(
        kappas,
        epsilon=config.get("qlss.epsilon", 1e-2),
        dim=config.get("qlss.dim", 8),
        seed=config.seed,
    )
    qlss.write_table_csv(config.out_dir / "qlss_table.csv", rows, config.seed, __version__)
    line = f"qlss: {len(rows)} rows"
    if len(rows) >= 2:
        slope_int, slope_conv = qlss.fit_exponents(rows)
        line += f", log-log slopes R_int {slope_int:.3f} P {slope_conv:.3f}"
    print(line + f", in {config.out_dir}")


def cmd_gsp(config: RunConfig) -> None:
    dim = config.get("gsp.dim", 16)
    delta = config.get("gsp.delta", 0.2)
    p0 = config.get("gsp.p0", 0.5)
    epsilon = config.get("gsp.epsilon", 1e-3)
    h_matrix, psi = gsp.random_gsp_instance(dim, delta, p0, seed=config.seed)
    report = gsp.hybrid_gsp(gsp.GspConfig(h_matrix=h_matrix, p0=p0, epsilon=epsilon), psi)
    gsp.write_report_rows_csv(config.out_dir / "gsp_report.csv", [report], config.seed, __version__)
    print(f"gsp: final distance {report.final_distance:.3e}, R {report.r_factor:.6f}, in {config.out_dir}")


def cmd_qed(config: RunConfig) -> None:
    r_values = config.get("qed.r_values", (0.1, 0.2, 0.3))
    grid_keys = ("qed.pz_min", "qed.pz_max", "qed.pz_points")
    if any(key in config.params for key in grid_keys):
        # a partial grid spec is an error naming the absent key
        pz_grid = np.geomspace(
            config.get("qed.pz_min"), config.get("qed.pz_max"), config.get("qed.pz_points")
        )
    else:
        pz_grid = np.geomspace(1e-3, 1e-1, 10)
    codewords = config.get("qed.codewords", 32)
    if codewords < 1:
        raise ConfigError("qed.codewords must be >= 1")
    rows = _qed_sweep_parallel(tuple(r_values), pz_grid, codewords, config.seed, config.workers)
    qed.write_sweep_csv(config.out_dir / "qed_sweep.csv", rows, config.seed, __version__)
    print(f"qed: {len(rows)} rows, in {config.out_dir}")


def _qed_sweep_parallel(r_values, pz_grid, codewords: int, seed: int, workers: int) -> list[qed.SweepRow]:
    """Cells split by bias ratio; the codeword set depends only on the seed,
    so per-ratio calls concatenate to the single-call row list exactly."""
    if workers <= 1 or len(r_values) <= 1:
        return qed.fig_sweep(r_values, pz_grid, codewords, seed)
    with ThreadPoolExecutor(max_workers=min(workers, len(r_values))) as pool:
        parts = pool.map(lambda r: qed.fig_sweep((r,), pz_grid, codewords, seed), r_values)
        return [row for part in parts for row in part]


# ---------------------------------------------------------------------------
# plot stubs

_PLOT_STUB = '''#!/usr/bin/env python3
"""Plot stub; reads the CSVs next to this file. Edit freely."""

import csv
import pathlib

import matplotlib.pyplot as plt

HERE = pathlib.Path(__file__).resolve().parent
FILES = {files!r}

for name in FILES:
    rows = list(csv.reader((HERE / name).open()))
    header, body = rows[0], [r for r in rows[1:] if not r[0].startswith("#")]
    try:
        xs = [float(r[0]) for r in body]
    except ValueError:
        print("skipping", name, "(non-numeric first column)")
        continue
    fig, ax = plt.subplots()
    for col in range(1, len(header)):
        try:
            ax.plot(xs, [float(r[col]) for r in body], label=header[col])
        except ValueError:
            continue
    ax.set_xlabel(header[0])
    ax.legend(fontsize=7)
    out = HERE / (pathlib.Path(name).stem + ".png")
    fig.savefig(out, dpi=150)
    print("wrote", out)
'''

_OUTPUT_FILES = {
    "demo": ["demo_partitions.csv", "demo_reports.csv", "demo_shots.csv"],
    "partitions": ["partitions.csv"],
    "lchs": ["lchs_bound.csv"],
    "qlss": ["qlss_table.csv"],
    "gsp": ["gsp_report.csv"],
    "qed": ["qed_sweep.csv"],
}


def _emit_plot_script(config: RunConfig) -> None:
    path = config.out_dir / f"plot_{config.subcommand}.py"
    path.write_text(_PLOT_STUB.format(files=_OUTPUT_FILES[config.subcommand]))
    print(f"plot stub: {path}")


# ---------------------------------------------------------------------------
# entry point

_HANDLERS = {
    "demo": cmd_demo,
    "lchs": cmd_lchs,
    "qlss": cmd_qlss,
    "gsp": cmd_gsp,
    "qed": cmd_qed,
    "partitions": cmd_partitions,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hybridlcu",
        description="Hybrid coherent/randomized LCU drivers with seeded CSV output.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="subcommand", required=True)
    descriptions = {
        "demo": "random LCU instance: partition scan, cross-checks, estimation reports",
        "lchs": "Hamiltonian-simulation bound-vs-nodes sweep",
        "qlss": "linear-systems reduction-factor table over condition numbers",
        "gsp": "two-stage ground-state filter report",
        "qed": "Steane-code biased-noise sweep",
        "partitions": "exhaustive partition table with ancilla widths and R",
    }
    for name, desc in descriptions.items():
        p = sub.add_parser(name, help=desc)
        p.add_argument("--config", metavar="PATH", help="key = value config file")
        p.add_argument("--seed", type=int, metavar="U64")
        p.add_argument("--shots", type=int, metavar="N")
        p.add_argument("--out", metavar="DIR")
        p.add_argument("--workers", type=int, metavar="N")
        p.add_argument("--emit-plot-script", action="store_true")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = build_run_config(args)
        config.out_dir.mkdir(parents=True, exist_ok=True)
        _HANDLERS[config.subcommand](config)
        if config.emit_plot_script:
            _emit_plot_script(config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (InvariantViolation, AssertionError, hybrid.DegenerateRoundError) as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except ValueError as exc:
        # module-level validation (bad kappa, eps >= p0, ...) is a config problem
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
