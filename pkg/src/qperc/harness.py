"""Monte Carlo experiment orchestration with reproducible seeding.

Every experiment cell gets its streams from the pure mixing function
``SeedSequence(master_seed, spawn_key=(cell_index, rep_index, party))``, so
reruns with the same master seed are byte-identical and cells could be
evaluated in any order or in parallel without changing the output.  Training
sets are drawn once per dataset spec (spawn key (DATASET_KEY, index)) and
shared by all cells, mirroring the convention that repetitions average over
protocol randomness on a fixed set.

Results are flat CSV rows (one metric per row) with a fixed column set; see
``ResultRow``.  Plotting is out of scope: the CSVs carry the exact series
needed to redraw the figures.
"""

from __future__ import annotations

import csv
import io
import time
from dataclasses import dataclass, field

import numpy as np

from . import privacy
from .baselines import (
    BaselineMethod,
    UniformNoise,
    empirical_grid,
    reconstruct_1d,
    reconstruct_2d,
    train_baseline,
)
from .data import GENERATORS, parse_dataset_spec
from .noise import parse_generator
from .perceptron import train_quantum
from .protocol import BobStrategy, ProtocolParams, run_data_system
from .qstate import RegisterLayout

DATASET_KEY = 0xDA7A  # spawn-key namespace for dataset draws

EXPERIMENT_KINDS = (
    "protocol-detection", "fig3-rounds", "fig4-compare", "thm2-sweep",
    "leak-expectation", "recon-compare",
)

FULL_DELTA_GRID = [2.0 ** e for e in range(-10, 8)]          # 1/1024 .. 128
DESK_DELTA_GRID = [2.0 ** e for e in
                   (-10, -8, -6, -4, -2, -1, 0, 1, 3, 5, 6, 7)]  # 12 points
FIG4_DELTA_GRID = [2.0 ** e for e in (-10, -4, 0, 3, 6)]

CSV_COLUMNS = [
    "experiment", "dataset", "generator", "delta", "attack", "n", "k", "n2",
    "scope", "metric", "value", "std_error", "reps", "trials",
]


@dataclass
class ExperimentSpec:
    kind: str
    datasets: list = field(default_factory=list)
    generators: list = field(default_factory=list)
    deltas: list = field(default_factory=list)
    attack: str = ""
    n: int = 8
    k: int = 2
    n2_values: list = field(default_factory=list)
    scopes: list = field(default_factory=lambda: ["attribute", "example"])
    reps: int = 20
    trials: int = 100000
    sequences: int = 10000
    train_size: int = 64
    T: int = 40000
    grid_size: int = 20
    recon_delta: float = 1.0
    master_seed: int = 0

    def __post_init__(self):
        if self.kind not in EXPERIMENT_KINDS:
            raise ValueError(f"unknown experiment kind {self.kind!r}")
        if self.reps < 1:
            raise ValueError("reps must be >= 1")


@dataclass
class ResultRow:
    experiment: str
    metric: str
    value: float
    std_error: float = 0.0
    dataset: str = ""
    generator: str = ""
    delta: float | None = None
    attack: str = ""
    n: int | None = None
    k: int | None = None
    n2: int | None = None
    scope: str = ""
    reps: int | None = None
    trials: int | None = None

    def __post_init__(self):
        if not np.isfinite(self.value):
            raise ValueError("metric value must be finite")
        if self.std_error < 0:
            raise ValueError("standard error must be >= 0")

    def to_csv_fields(self):
        def fmt(v):
            if v is None or v == "":
                return ""
            if isinstance(v, float):
                return repr(v)
            return str(v)
        return [fmt(getattr(self, col)) for col in CSV_COLUMNS]

    @staticmethod
    def from_csv_fields(fields):
        kw = dict(zip(CSV_COLUMNS, fields))
        for key in ("delta", "value", "std_error"):
            kw[key] = float(kw[key]) if kw[key] != "" else (0.0 if key != "delta" else None)
        for key in ("n", "k", "n2", "reps", "trials"):
            kw[key] = int(kw[key]) if kw[key] != "" else None
        return ResultRow(**kw)


def rows_to_csv(rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for row in rows:
        writer.writerow(row.to_csv_fields())
    return buf.getvalue()


def read_csv(text):
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    if header != CSV_COLUMNS:
        raise ValueError(f"unexpected CSV header {header!r}")
    return [ResultRow.from_csv_fields(fields) for fields in reader]


def cell_rng(master_seed, cell_index, rep_index, party=0):
    """The documented stream mixer: independent stream per (cell, rep, party)."""
    seq = np.random.SeedSequence(master_seed,
                                 spawn_key=(cell_index, rep_index, party))
    return np.random.default_rng(seq)


def dataset_for(spec_str, master_seed, index, train_size):
    """Dataset draw shared by all cells of an experiment (one per spec)."""
    if spec_str.startswith("file:") or ":" in spec_str and "seed=" in spec_str:
        return parse_dataset_spec(spec_str, default_n=train_size)
    name = spec_str.split(":")[0]
    if name not in GENERATORS:
        return parse_dataset_spec(spec_str, default_n=train_size)
    rng = np.random.default_rng(
        np.random.SeedSequence(master_seed, spawn_key=(DATASET_KEY, index)))
    n = train_size
    for part in spec_str.split(":")[1:]:
        key, _, value = part.partition("=")
        if key == "N":
            n = int(value)
    return GENERATORS[name](n, rng)


def parse_attack(spec, n, k):
    """Build a BobStrategy from a CLI string such as
    "measure-subset:scope=example:n2=4" or "entangle-copy:qubits=1,2,3"."""
    parts = spec.split(":")
    kind = parts[0]
    opts = {}
    for part in parts[1:]:
        key, _, value = part.partition("=")
        opts[key] = value
    if kind == "honest":
        return BobStrategy.honest()
    if kind == "guess-mu":
        return BobStrategy.guess_mu()
    if kind == "measure-and-resend":
        return BobStrategy.measure_and_resend()
    if kind in ("measure-subset", "entangle-copy"):
        if "qubits" in opts:
            qubits = tuple(int(q) for q in opts["qubits"].split(","))
        else:
            scope = opts.get("scope", "example")
            n2 = int(opts.get("n2", n))
            qubits = privacy.attack_qubits(n, n2, k, scope)
        maker = (BobStrategy.measure_subset if kind == "measure-subset"
                 else BobStrategy.entangle_copy)
        if "rounds" in opts:
            rounds = frozenset(int(r) for r in opts["rounds"].split(","))
            return maker(qubits, attack_rounds=rounds)
        return maker(qubits)
    raise ValueError(f"unknown attack spec {spec!r}")


def _msb_oracle(nk):
    return lambda d: (d >> (nk - 1)) & 1


def _mc_mean(values):
    values = np.asarray(values, dtype=float)
    se = float(values.std(ddof=1) / np.sqrt(len(values))) if len(values) > 1 else 0.0
    return float(values.mean()), se


def _binomial(successes, trials):
    p = successes / trials
    return p, float(np.sqrt(max(p * (1 - p), 1e-12) / trials))


# ---------------------------------------------------------------------------
# Experiment bodies
# ---------------------------------------------------------------------------


def _run_thm2_sweep(spec):
    rows = []
    layout = RegisterLayout(spec.n, spec.k)
    nk = layout.data_qubits
    cell = 0
    for scope in spec.scopes:
        for n2 in spec.n2_values:
            strategy = BobStrategy.measure_subset(
                privacy.attack_qubits(spec.n, n2, spec.k, scope))
            params = ProtocolParams(
                layout, f_int=_msb_oracle(nk),
                alice_rng=cell_rng(spec.master_seed, cell, 0, 0),
                bob_rng=cell_rng(spec.master_seed, cell, 0, 1))
            arng = cell_rng(spec.master_seed, cell, 0, 2)
            detected = 0
            for _ in range(spec.trials):
                x = int(arng.integers(1 << nk))
                if run_data_system(x, params, strategy).detected:
                    detected += 1
            rate, se = _binomial(detected, spec.trials)
            common = dict(experiment=spec.kind, attack="measure-subset",
                          n=spec.n, k=spec.k, n2=n2, scope=scope,
                          trials=spec.trials)
            rows.append(ResultRow(metric="detection_rate", value=rate,
                                  std_error=se, **common))
            rows.append(ResultRow(
                metric="detection_rate_formula",
                value=privacy.detection_probability(spec.n, n2, spec.k, scope),
                **common))
            cell += 1
    return rows


def _run_leak_expectation(spec):
    n2 = spec.n2_values[0] if spec.n2_values else 4
    layout = RegisterLayout(spec.n, spec.k)
    nk = layout.data_qubits
    strategy = BobStrategy.measure_subset(
        privacy.attack_qubits(spec.n, n2, spec.k, "example"))
    params = ProtocolParams(layout, f_int=_msb_oracle(nk),
                            alice_rng=cell_rng(spec.master_seed, 0, 0, 0),
                            bob_rng=cell_rng(spec.master_seed, 0, 0, 1))
    arng = cell_rng(spec.master_seed, 0, 0, 2)
    counts = []
    for _ in range(spec.sequences):
        read = 0
        while True:
            x = int(arng.integers(1 << nk))
            if run_data_system(x, params, strategy).detected:
                break
            read += 1
        counts.append(read)
    mean, se = _mc_mean(counts)
    common = dict(experiment=spec.kind, attack="measure-subset", n=spec.n,
                  k=spec.k, n2=n2, scope="example", trials=spec.sequences)
    return [
        ResultRow(metric="examples_read_before_detection", value=mean,
                  std_error=se, **common),
        ResultRow(metric="examples_read_formula",
                  value=privacy.expected_leak_count(spec.n, n2, spec.k),
                  **common),
    ]


def _run_protocol_detection(spec):
    layout = RegisterLayout(spec.n, spec.k)
    nk = layout.data_qubits
    strategy = parse_attack(spec.attack, spec.n, spec.k)
    params = ProtocolParams(layout, f_int=_msb_oracle(nk),
                            alice_rng=cell_rng(spec.master_seed, 0, 0, 0),
                            bob_rng=cell_rng(spec.master_seed, 0, 0, 1))
    arng = cell_rng(spec.master_seed, 0, 0, 2)
    detected = 0
    passed_reading = 0
    for _ in range(spec.trials):
        x = int(arng.integers(1 << nk))
        outcome = run_data_system(x, params, strategy)
        if outcome.detected:
            detected += 1
        elif outcome.attack_info.get("read_ok", bool(outcome.leaked_bits)):
            passed_reading += 1
    common = dict(experiment=spec.kind, attack=spec.attack, n=spec.n,
                  k=spec.k, trials=spec.trials)
    rate, se = _binomial(detected, spec.trials)
    rows = [ResultRow(metric="detection_rate", value=rate, std_error=se, **common)]
    rate, se = _binomial(spec.trials - detected, spec.trials)
    rows.append(ResultRow(metric="pass_rate", value=rate, std_error=se, **common))
    rate, se = _binomial(passed_reading, spec.trials)
    rows.append(ResultRow(metric="pass_while_reading_rate", value=rate,
                          std_error=se, **common))
    return rows


def _train_metric_rows(spec, cell, dataset_name, series_name, delta, records):
    rounds = [r.rounds for r in records]
    terminating = [1.0 if r.terminated else 0.0 for r in records]
    success = [1.0 if r.success else 0.0 for r in records]
    updates = [r.updates for r in records]
    common = dict(experiment=spec.kind, dataset=dataset_name,
                  generator=series_name, delta=delta, reps=len(records))
    rows = []
    for metric, values in (("avg_rounds", rounds),
                           ("terminating_probability", terminating),
                           ("success_probability", success),
                           ("avg_updates", updates)):
        mean, se = _mc_mean(values)
        rows.append(ResultRow(metric=metric, value=mean, std_error=se, **common))
    return rows


def _run_fig3(spec):
    rows = []
    cell = 0
    for d_idx, ds in enumerate(spec.datasets):
        tset = dataset_for(ds, spec.master_seed, d_idx, spec.train_size)
        for gen_spec in spec.generators:
            for delta in spec.deltas:
                gen = parse_generator(f"{gen_spec}:delta={delta}")
                records = []
                for rep in range(spec.reps):
                    _, record, _ = train_quantum(
                        tset, gen,
                        alice_rng=cell_rng(spec.master_seed, cell, rep, 0),
                        bob_rng=cell_rng(spec.master_seed, cell, rep, 1),
                        T=spec.T, protocol_mode="fast")
                    records.append(record)
                rows.extend(_train_metric_rows(spec, cell, ds, gen_spec,
                                               delta, records))
                cell += 1
    return rows


FIG4_SERIES = ("quantum-R0", "uniform", "normal", "recon1d", "recon2d")


def _run_fig4(spec):
    rows = []
    cell = 0
    for d_idx, ds in enumerate(spec.datasets):
        tset = dataset_for(ds, spec.master_seed, d_idx, spec.train_size)
        for series in FIG4_SERIES:
            for delta in spec.deltas:
                records = []
                if series == "quantum-R0":
                    gen = parse_generator(f"R0:delta={delta}")
                    for rep in range(spec.reps):
                        _, record, _ = train_quantum(
                            tset, gen,
                            alice_rng=cell_rng(spec.master_seed, cell, rep, 0),
                            bob_rng=cell_rng(spec.master_seed, cell, rep, 1),
                            T=spec.T, protocol_mode="fast")
                        records.append(record)
                else:
                    method = BaselineMethod(series, delta,
                                            grid_size=spec.grid_size)
                    for rep in range(spec.reps):
                        records.extend(train_baseline(
                            tset, method,
                            rng=cell_rng(spec.master_seed, cell, rep, 0),
                            T=spec.T, reps=1))
                rows.extend(_train_metric_rows(spec, cell, ds, series, delta,
                                               records))
                cell += 1
    return rows


def _set3_truth_grid(edges, master_seed):
    """Ground-truth cell masses for the correlated band, from a large clean
    sample (independent Monte Carlo oracle)."""
    rng = np.random.default_rng(
        np.random.SeedSequence(master_seed, spawn_key=(DATASET_KEY, 333)))
    n = 400000
    r1 = rng.uniform(0.0, 0.5, size=n)
    x2 = rng.uniform(0.0, 8.0, size=n)
    x1 = x2 + r1
    return empirical_grid(np.column_stack([x1, x2]), edges)


def _run_recon_compare(spec):
    """Correlated-data reconstruction: joint 2-D versus per-axis marginals."""
    delta = spec.recon_delta
    L = spec.grid_size
    noise = UniformNoise(delta)
    l1_1d, l1_2d, wins = [], [], []
    for rep in range(spec.reps):
        rng = cell_rng(spec.master_seed, 0, rep, 0)
        n = spec.train_size
        r1 = rng.uniform(0.0, 0.5, size=n)
        x2 = rng.uniform(0.0, 8.0, size=n)
        clean = np.column_stack([x2 + r1, x2])
        distorted = clean + rng.uniform(-delta, delta, size=clean.shape)

        edges = [np.linspace(0.0 - 3 * delta, 8.5 + 3 * delta, L + 1),
                 np.linspace(0.0 - 3 * delta, 8.0 + 3 * delta, L + 1)]
        truth = _set3_truth_grid(edges, spec.master_seed)

        joint = reconstruct_2d(distorted, noise, L=L, edges=edges)
        marg = [reconstruct_1d(distorted[:, a], noise, L=L, edges=edges[a])
                for a in range(2)]
        product = np.outer(marg[0].masses, marg[1].masses)
        err2 = float(np.abs(joint.masses - truth.masses).sum())
        err1 = float(np.abs(product - truth.masses).sum())
        l1_2d.append(err2)
        l1_1d.append(err1)
        wins.append(1.0 if err2 < err1 else 0.0)

    common = dict(experiment=spec.kind, dataset="set3-band",
                  delta=delta, reps=spec.reps)
    rows = []
    for metric, values in (("recon_l1_1d", l1_1d), ("recon_l1_2d", l1_2d),
                           ("recon_2d_wins", wins)):
        mean, se = _mc_mean(values)
        rows.append(ResultRow(metric=metric, value=mean, std_error=se, **common))

    slope = recon2d_runtime_slope(spec.train_size, seed=spec.master_seed)
    rows.append(ResultRow(metric="recon2d_runtime_loglog_slope", value=slope,
                          **common))
    return rows


def recon2d_runtime_slope(n=1024, grid_sizes=(96, 128, 192, 256, 384),
                          iterations=30, seed=0):
    """Log-log slope of reconstruct_2d wall time against L (expect ~2).

    Grid sizes are chosen large enough that the quadratic sweep work
    dominates fixed overhead; each point takes the best of three runs.
    """
    rng = np.random.default_rng(seed)
    samples = rng.uniform(0.0, 8.0, size=(n, 2))
    noise = UniformNoise(1.0)
    reconstruct_2d(samples, noise, L=grid_sizes[0], iterations=2, tol=0.0)  # warm up
    times = []
    for L in grid_sizes:
        best = float("inf")
        for _ in range(5):
            t0 = time.perf_counter()
            reconstruct_2d(samples, noise, L=L, iterations=iterations, tol=0.0)
            best = min(best, time.perf_counter() - t0)
        times.append(best)
    logs_l = np.log(np.asarray(grid_sizes, float))
    logs_t = np.log(np.asarray(times))
    slope, _ = np.polyfit(logs_l, logs_t, 1)
    return float(slope)


def run_experiment(spec):
    """Dispatch an ExperimentSpec; returns the list of ResultRows."""
    body = {
        "thm2-sweep": _run_thm2_sweep,
        "leak-expectation": _run_leak_expectation,
        "protocol-detection": _run_protocol_detection,
        "fig3-rounds": _run_fig3,
        "fig4-compare": _run_fig4,
        "recon-compare": _run_recon_compare,
    }[spec.kind]
    return body(spec)


def write_rows(rows, path):
    with open(path, "w", newline="") as fh:
        fh.write(rows_to_csv(rows))


# ---------------------------------------------------------------------------
# Figure reproduction presets
# ---------------------------------------------------------------------------


def reproduce_spec(figure, full=False, master_seed=0):
    """Desk-scale (or --full) experiment presets for each reproducible figure."""
    if figure == "fig3":
        return ExperimentSpec(
            kind="fig3-rounds", datasets=["gen1", "gen2", "gen3"],
            generators=["R0", "R1", "R2", "R3", "R4"],
            deltas=FULL_DELTA_GRID if full else DESK_DELTA_GRID,
            reps=100 if full else 20, master_seed=master_seed)
    if figure == "fig4":
        return ExperimentSpec(
            kind="fig4-compare", datasets=["gen1", "gen2", "gen3"],
            deltas=FULL_DELTA_GRID if full else FIG4_DELTA_GRID,
            reps=100 if full else 5, master_seed=master_seed)
    if figure == "thm2":
        return ExperimentSpec(kind="thm2-sweep", n=8, k=2,
                              n2_values=[2, 4, 8],
                              trials=100000 if full else 20000,
                              master_seed=master_seed)
    if figure == "leak":
        return ExperimentSpec(kind="leak-expectation", n=8, k=2,
                              n2_values=[4],
                              sequences=10000 if full else 2000,
                              master_seed=master_seed)
    if figure == "recon":
        return ExperimentSpec(kind="recon-compare", train_size=1024,
                              recon_delta=1.0, grid_size=20, reps=20,
                              master_seed=master_seed)
    raise ValueError(f"unknown figure {figure!r}")
