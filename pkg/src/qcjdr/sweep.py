"""Seeded experiment sweeps and their CSV / manifest artifacts."""

import csv
import io
import json
import math
import platform
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields

import numpy as np

from . import __version__
from .config import SCHEMA_VERSION, ExperimentConfig
from .decoder import cost, decode_error, make_codebook
from .limits import n_helstrom
from .physmodel import transduction_channel

UNITARY = "U"


@dataclass(frozen=True)
class ResultRow:
    index: int
    rmpn: float
    temperature: float
    n: int
    M: int
    L: str
    p_err: float
    p_n_helstrom: float
    tau: float
    t_star: float
    J: float
    seed: int
    wall_time: float
    status: str = "ok"
    message: str = ""


def row_seed(root, index):
    """Per-row seed derived from the root seed and the grid position only."""
    return int(np.random.SeedSequence([int(root), int(index)]).generate_state(1)[0])


def sweep_tasks(cfg):
    """Grid points in emission order: temperature, then rmpn, then depth."""
    depths = [str(int(L)) for L in cfg.layers]
    if cfg["circuit"]["include_unitary"]:
        depths.append(UNITARY)
    tasks = []
    for T in cfg.temperatures:
        for r in cfg.rmpn_values():
            for L in depths:
                index = len(tasks)
                tasks.append({"index": index, "temperature": float(T), "rmpn": r, "L": L,
                              "seed": row_seed(cfg["seed"], index)})
    return tasks


def _train_opts(cfg, L, seed):
    o = cfg["optimizer"]
    if L == UNITARY:
        return {"restarts": int(o["unitary_restarts"]), "max_iters": int(o["max_iters"]),
                "seed": seed}
    return {"restarts": int(o["restarts"]), "max_iters": int(o["max_iters"]),
            "tol": float(o["tol"]), "learning_rate": float(o["learning_rate"]), "seed": seed,
            "topology": cfg["circuit"]["topology"]}


def channel_for(cfg, temperature):
    return transduction_channel(cfg.transducer(temperature), **cfg.channel_options())


def evaluate_point(cfg, rmpn, temperature, L, seed, noise=None):
    """Train one decoder; returns the codebook, the ``decode_error`` details and,
    when ``noise`` is given, the objective of the trained decoder under it."""
    cb = cfg["codebook"]
    book = make_codebook(int(cb["n"]), int(cb["M"]), cb["kind"], int(cb["seed"]))
    decoder = "unitary" if L == UNITARY else int(L)
    details = decode_error(rmpn, channel_for(cfg, temperature), book, decoder=decoder,
                           jc_cfg=cfg.jc_config(), train_opts=_train_opts(cfg, L, seed),
                           return_details=True)
    noisy_J = None
    if noise is not None:
        noisy_J = cost(details["result"].decoder(), details["states"], book, noise)
    return book, details, noisy_J


def _run_task(tree, task):
    cfg = ExperimentConfig(tree)
    cb = cfg["codebook"]
    n, M = int(cb["n"]), int(cb["M"])
    start = time.perf_counter()
    base = dict(index=task["index"], rmpn=task["rmpn"], temperature=task["temperature"],
                n=n, M=M, L=task["L"], seed=task["seed"])
    try:
        noise = cfg.noise_model()
        _, details, noisy_J = evaluate_point(cfg, task["rmpn"], task["temperature"], task["L"],
                                             task["seed"], None if noise.is_ideal else noise)
        J = details["J"] if noisy_J is None else noisy_J
        pair = details["pair"]
        row = ResultRow(p_err=1.0 - J, p_n_helstrom=n_helstrom(task["rmpn"], n) if n >= 2 else math.nan,
                        tau=pair.tau, t_star=pair.t_star, J=J,
                        wall_time=time.perf_counter() - start, **base)
    except Exception as exc:  # recorded per row; the sweep carries on
        nan = math.nan
        row = ResultRow(p_err=nan, p_n_helstrom=nan, tau=nan, t_star=nan, J=nan,
                        wall_time=time.perf_counter() - start, status="error",
                        message=f"{type(exc).__name__}: {exc}", **base)
    return row


def run_sweep(cfg, jobs=None):
    """Evaluate every grid point; rows come back sorted by grid index."""
    tasks = sweep_tasks(cfg)
    jobs = int(jobs or cfg["jobs"])
    if jobs <= 1 or len(tasks) <= 1:
        rows = [_run_task(cfg.tree, t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_run_task, [cfg.tree] * len(tasks), tasks))
    return sorted(rows, key=lambda r: r.index)


def _fmt(value):
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, np.integer):
        return str(int(value))
    return str(value)


def write_csv(rows, columns, stream, kind):
    """Comma-separated table preceded by a ``# schema_version`` comment line."""
    stream.write(f"# schema_version={SCHEMA_VERSION} table={kind}\n")
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        record = asdict(row) if hasattr(row, "__dataclass_fields__") else row
        writer.writerow([_fmt(record[c]) for c in columns])


def sweep_columns(timing=False):
    names = [f.name for f in fields(ResultRow)]
    return names if timing else [c for c in names if c != "wall_time"]


def csv_text(rows, columns, kind):
    buf = io.StringIO()
    write_csv(rows, columns, buf, kind)
    return buf.getvalue()


def manifest(cfg, command, extra=None):
    """Structured run record: resolved configuration, seeds and versions."""
    import scipy
    import sklearn

    record = {
        "schema_version": SCHEMA_VERSION,
        "command": command,
        "config": cfg.tree,
        "config_hash": cfg.digest(),
        "seed": cfg["seed"],
        "versions": {
            "qcjdr": __version__,
            "python": sys.version.split()[0],
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "scikit-learn": sklearn.__version__,
            "platform": platform.platform(),
        },
    }
    record.update(extra or {})
    return record


def dump_json(record, path):
    with open(path, "w") as fh:
        json.dump(record, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def noise_rows(cfg):
    """Noise-free training, then evaluation with and without the configured noise."""
    noise = cfg.noise_model()
    cb = cfg["codebook"]
    n = int(cb["n"])
    rows = []
    for task in sweep_tasks(cfg):
        _, details, noisy_J = evaluate_point(cfg, task["rmpn"], task["temperature"], task["L"],
                                             task["seed"], noise)
        rows.append({
            "index": task["index"], "rmpn": task["rmpn"], "temperature": task["temperature"],
            "n": n, "M": int(cb["M"]), "L": task["L"],
            "p1": noise.p1, "p2": noise.p2, "pm": noise.pm,
            "p_err_ideal": 1.0 - details["J"], "p_err_noisy": 1.0 - noisy_J,
            "p_n_helstrom": n_helstrom(task["rmpn"], n) if n >= 2 else math.nan,
            "seed": task["seed"],
        })
    return rows


NOISE_COLUMNS = ["index", "rmpn", "temperature", "n", "M", "L", "p1", "p2", "pm",
                 "p_err_ideal", "p_err_noisy", "p_n_helstrom", "seed"]
CAPACITY_COLUMNS = ["rmpn", "c1", "holevo_optical", "jdr_ideal", "jdr_channel"]


def _capacity_row(tree, rmpn):
    from .limits import c1_capacity, capacity_config, holevo_bpsk_optical, jdr_capacity
    from .physmodel import TransductionChannel

    cfg = ExperimentConfig(tree)
    jc = capacity_config(cfg.jc_config())
    channel = channel_for(cfg, cfg["temperature"])
    return {"rmpn": rmpn, "c1": c1_capacity(rmpn), "holevo_optical": holevo_bpsk_optical(rmpn),
            "jdr_ideal": jdr_capacity(rmpn, TransductionChannel.ideal(), jc),
            "jdr_channel": jdr_capacity(rmpn, channel, jc)}


def capacity_rows(cfg, jobs=None):
    c = cfg["capacity"]
    grid = [float(r) for r in np.geomspace(c["start"], c["stop"], int(c["num"]))] if c["num"] else []
    jobs = int(jobs or cfg["jobs"])
    if jobs <= 1 or len(grid) <= 1:
        return [_capacity_row(cfg.tree, r) for r in grid]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_capacity_row, [cfg.tree] * len(grid), grid))


# --- trained-model artifact -------------------------------------------------

def model_record(result, cfg, rmpn, temperature, seed, book):
    """JSON-ready record of a trained decoder."""
    record = {
        "schema_version": SCHEMA_VERSION,
        "J": result.J,
        "seed": seed,
        "config_hash": cfg.digest(),
        "rmpn": rmpn,
        "temperature": temperature,
        "codebook": {"n": book.n, "codewords": book.codewords, "output_map": book.output_map,
                     "measured_qubits": book.measured_qubits},
    }
    if result.layout is not None:
        lay = result.layout
        record["kind"] = "circuit"
        record["layout"] = {"n": lay.n, "edges": lay.edges, "schedule": lay.schedule,
                            "layers": lay.layers}
        record["angles"] = np.asarray(result.params).tolist()
    else:
        U = np.asarray(result.params)
        record["kind"] = "unitary"
        record["unitary"] = {"real": U.real.tolist(), "imag": U.imag.tolist()}
    return record


def load_model(path):
    """Rebuild the decoder stored by ``model_record``: a ``Circuit`` or a unitary."""
    from .decoder import Circuit
    from .qsim import CircuitLayout

    with open(path) as fh:
        record = json.load(fh)
    if record.get("kind") == "circuit":
        lay = record["layout"]
        layout = CircuitLayout(
            n=lay["n"],
            edges=tuple(tuple(e) for e in lay["edges"]),
            schedule=tuple(tuple(tuple(e) for e in step) for step in lay["schedule"]),
            layers=lay["layers"],
        )
        return Circuit(layout, np.array(record["angles"])), record
    if record.get("kind") == "unitary":
        u = record["unitary"]
        return np.array(u["real"]) + 1j * np.array(u["imag"]), record
    raise ValueError(f"{path}: not a model artifact")
