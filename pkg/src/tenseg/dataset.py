"""Supervised datasets: sampled cable actuation -> (coordinates, forces, frequencies)."""
from __future__ import annotations

import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .modal import modal_analysis
from .numerics import make_rng, uniform
from .statics import EquilibriumState, SolverConfig, form_find
from .topology import Structure

FORCE_SCALE = 1e3  # N
FREQ_SCALE = 1e6

# cable rest-length change ranges (m) per benchmark, one entry per actuated cable
BENCHMARK_RANGES = {
    "dbar": [(-1.0, 0.0)] * 2,
    "prism": [(-0.15, 0.0)] * 3,
    "lander": [(-0.3, 0.0)] * 2,
}


class DatasetGenerationError(RuntimeError):
    def __init__(self, index: int, dl0, cause: Exception):
        self.index = index
        self.dl0 = list(np.asarray(dl0, dtype=float))
        super().__init__(f"sample {index} (dl0={self.dl0}) failed: {cause}")


@dataclass(frozen=True)
class SamplingSpec:
    ranges: tuple[tuple[float, float], ...]
    sample_count: int
    seed: int = 0

    def __post_init__(self):
        if self.sample_count < 1:
            raise ValueError("sample_count must be >= 1")
        for lo, hi in self.ranges:
            if lo > hi:
                raise ValueError(f"empty range [{lo}, {hi}]")

    @classmethod
    def benchmark(cls, name: str, sample_count: int, seed: int = 0) -> "SamplingSpec":
        return cls(tuple(BENCHMARK_RANGES[name]), sample_count, seed)

    def draw(self) -> np.ndarray:
        """All inputs up front, row by row from one seeded stream.

        Row ``i`` does not depend on ``sample_count``, so a smaller dataset
        with the same seed is a prefix of a larger one.
        """
        lo, hi = np.array(self.ranges, dtype=float).T
        rng = make_rng(self.seed)
        return uniform(rng, lo, hi, size=(self.sample_count, len(self.ranges)))


@dataclass
class Dataset:
    inputs: np.ndarray
    outputs: np.ndarray
    layout: tuple[int, int, int]  # coords, forces, frequencies
    force_scale: float = FORCE_SCALE
    freq_scale: float = FREQ_SCALE
    seed: int = 0
    fingerprint: str = ""
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.inputs = np.atleast_2d(np.asarray(self.inputs, dtype=float))
        self.outputs = np.atleast_2d(np.asarray(self.outputs, dtype=float))
        self.layout = tuple(int(v) for v in self.layout)
        if self.outputs.shape[1] != sum(self.layout):
            raise ValueError(f"layout {self.layout} does not match {self.outputs.shape[1]} output columns")
        if self.inputs.shape[0] != self.outputs.shape[0]:
            raise ValueError("inputs and outputs differ in row count")

    def __len__(self) -> int:
        return self.inputs.shape[0]

    @property
    def groups(self) -> dict[str, slice]:
        c, f, w = self.layout
        return {"coords": slice(0, c), "forces": slice(c, c + f), "freqs": slice(c + f, c + f + w)}

    def subset(self, rows) -> "Dataset":
        return replace(self, inputs=self.inputs[rows], outputs=self.outputs[rows], meta=dict(self.meta))

    def head(self, n: int) -> "Dataset":
        return self.subset(slice(0, n))

    def denormalized(self) -> dict[str, np.ndarray]:
        g = self.groups
        return {
            "coords": self.outputs[:, g["coords"]].copy(),
            "forces": self.outputs[:, g["forces"]] * self.force_scale,
            "freqs": self.outputs[:, g["freqs"]] * self.freq_scale,
        }

    def header(self) -> list[str]:
        c, f, w = self.layout
        cols = [f"dl_{i + 1}" for i in range(self.inputs.shape[1])]
        cols += [f"coord_{i + 1}" for i in range(c)]
        cols += [f"force_{i + 1}" for i in range(f)]
        cols += [f"freq_{i + 1}" for i in range(w)]
        return cols

    def save(self, path: str | Path) -> Path:
        """Write ``<path>`` (CSV) and the ``.meta.json`` sidecar next to it."""
        path = Path(path)
        table = np.hstack([self.inputs, self.outputs])
        np.savetxt(path, table, fmt="%.17g", delimiter=",", header=",".join(self.header()), comments="")
        meta = {
            "layout": {"coords": self.layout[0], "forces": self.layout[1], "frequencies": self.layout[2]},
            "n_inputs": self.inputs.shape[1],
            "force_scale": self.force_scale,
            "freq_scale": self.freq_scale,
            "seed": self.seed,
            "structure_fingerprint": self.fingerprint,
            **self.meta,
        }
        meta_path(path).write_text(json.dumps(meta, indent=2))
        return path

    @classmethod
    def load(cls, path: str | Path) -> "Dataset":
        path = Path(path)
        meta = json.loads(meta_path(path).read_text())
        table = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        k = meta["n_inputs"]
        lay = meta["layout"]
        extra = {key: v for key, v in meta.items() if key not in
                 ("layout", "n_inputs", "force_scale", "freq_scale", "seed", "structure_fingerprint")}
        return cls(
            inputs=table[:, :k],
            outputs=table[:, k:],
            layout=(lay["coords"], lay["forces"], lay["frequencies"]),
            force_scale=meta["force_scale"],
            freq_scale=meta["freq_scale"],
            seed=meta["seed"],
            fingerprint=meta["structure_fingerprint"],
            meta=extra,
        )


def meta_path(csv_path: str | Path) -> Path:
    p = Path(csv_path)
    return p.with_name(p.stem + ".meta.json")


def rigid_mode_count(s: Structure) -> int:
    return 6 if len(s.free_nodes) == s.n_nodes else 0


def align_to_reference(coords: np.ndarray, reference: np.ndarray) -> np.ndarray:
    """Remove the rigid-body part of a free-floating solution.

    Centres the configuration on the origin and applies the proper rotation
    that best superimposes it on the (centred) reference geometry.
    """
    P = coords - coords.mean(axis=1, keepdims=True)
    Q = reference - reference.mean(axis=1, keepdims=True)
    H = P @ Q.T
    Uh, _, Vt = np.linalg.svd(H)
    D = np.eye(3)
    D[2, 2] = np.sign(np.linalg.det(Vt.T @ Uh.T)) or 1.0
    R = Vt.T @ D @ Uh.T
    return R @ P


def reduced_coordinates(s: Structure, state: EquilibriumState) -> np.ndarray:
    """Coordinate outputs: ``(a, b)`` half-diagonals for the D-bar, all coordinates otherwise."""
    coords = state.coords
    if rigid_mode_count(s):
        coords = align_to_reference(coords, s.nodes)
    if s.name == "dbar":
        return np.array([coords[0, 0], coords[1, 1]])
    return coords[:, list(s.free_nodes)].T.reshape(-1)


def output_layout(s: Structure) -> tuple[int, int, int]:
    n_coords = 2 if s.name == "dbar" else 3 * len(s.free_nodes)
    return n_coords, s.n_members, 3 * len(s.free_nodes) - rigid_mode_count(s)


def solve_sample(s: Structure, dl0, cfg: SolverConfig | None = None) -> dict[str, np.ndarray]:
    """Un-normalized outputs for one actuation."""
    state = form_find(s, dl0, cfg=cfg)
    modes = modal_analysis(s, state)
    # drop the rigid-body eigenvalues (smallest magnitude), keep the rest
    mags = np.sort(np.abs(modes.eigenvalues))[rigid_mode_count(s):]
    return {
        "coords": reduced_coordinates(s, state),
        "forces": state.member_forces.copy(),
        "freqs": np.sqrt(mags),
        "residual": np.array(state.residual_norm),
        "zero_modes": np.array(modes.zero_mode_count),
    }


def _solve_rows(args):
    s, rows, start, cfg = args
    out = []
    for offset, dl0 in enumerate(rows):
        try:
            r = solve_sample(s, dl0, cfg)
        except Exception as exc:  # noqa: BLE001 - re-raised with the sample context
            raise DatasetGenerationError(start + offset, dl0, exc) from exc
        out.append(np.concatenate([r["coords"], r["forces"], r["freqs"]]))
    return out


def default_workers() -> int:
    return int(os.environ.get("TENSEG_THREADS", "1") or 1)


def generate(
    s: Structure,
    spec: SamplingSpec,
    cfg: SolverConfig | None = None,
    workers: int | None = None,
) -> Dataset:
    """Sample actuations, solve each one, and normalize the outputs.

    Results do not depend on ``workers``: inputs are drawn before any solve
    and rows are reassembled in index order.
    """
    cfg = cfg or SolverConfig()
    if len(spec.ranges) != len(s.actuated):
        raise ValueError(f"{len(spec.ranges)} ranges for {len(s.actuated)} actuated cables")
    X = spec.draw()
    workers = workers or default_workers()
    if workers > 1 and len(X) > 1:
        chunks = np.array_split(np.arange(len(X)), min(workers * 4, len(X)))
        jobs = [(s, X[c], int(c[0]), cfg) for c in chunks if len(c)]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = [r for part in pool.map(_solve_rows, jobs) for r in part]
    else:
        rows = _solve_rows((s, X, 0, cfg))
    raw = np.vstack(rows)
    layout = output_layout(s)
    c, f, _ = layout
    Y = raw.copy()
    Y[:, c : c + f] /= FORCE_SCALE
    Y[:, c + f :] /= FREQ_SCALE
    return Dataset(
        inputs=X,
        outputs=Y,
        layout=layout,
        seed=spec.seed,
        fingerprint=s.fingerprint(),
        meta={"structure": s.name, "ranges": [list(r) for r in spec.ranges], "solver": asdict(cfg)},
    )


def split(d: Dataset, train_fraction: float = 0.8, seed: int = 0) -> tuple[Dataset, Dataset]:
    """Shuffle rows with a seeded permutation; the first ``floor(fraction n)`` rows train."""
    if not 0.0 < train_fraction < 1.0:
        raise ValueError("train_fraction must lie in (0, 1)")
    n_train = int(np.floor(train_fraction * len(d)))
    if n_train == 0 or n_train == len(d):
        raise ValueError(f"split of {len(d)} rows at {train_fraction} leaves an empty part")
    perm = make_rng(seed).permutation(len(d))
    return d.subset(perm[:n_train]), d.subset(perm[n_train:])
