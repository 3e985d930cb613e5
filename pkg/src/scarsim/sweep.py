"""Grid sweep over (mu_i, mu_f) quenches producing the dynamical phase map.

Per cell: the ground state of the initial-potential chain is quenched under
the final-potential chain and four ergodicity layers are extracted: the
fidelity spread, the windowed mean-square density deviation from the thermal
value, the inverse participation ratio, and the diagonal-vs-canonical
density gap. Ground states are cached per row and eigendecompositions per
column, so each cell is a handful of small dense products. Results are
deterministic and independent of the thread count.
"""

from __future__ import annotations

import concurrent.futures
import dataclasses
import json
import os
import threading
import time
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .basis import BoundaryCondition, SymmetrySector, build_sector, enumerate_basis
from .ensembles import diagonal_ensemble_n, solve_beta
from .errors import ScarsimError
from .observables import QuenchRecord, WindowSpec, delta_F, ipr, msd_n
from .operators import HamiltonianParams, build_pxp, number_operator
from .propagation import TimeGrid, eig_decompose, evolve_exact
from .spectroscopy import ground_state

ALL_LAYERS = ("delta_f", "msd_n", "ipr", "delta_n")
SCHEMA_VERSION = 1


def parse_range(spec: str) -> np.ndarray:
    """Parse ``start:stop:step`` into an inclusive grid of exact multiples."""
    parts = spec.split(":")
    if len(parts) != 3:
        raise ValueError(f"range must be start:stop:step, got {spec!r}")
    start, stop, step = (float(p) for p in parts)
    if step <= 0:
        raise ValueError(f"range step must be positive, got {step}")
    count = int(np.floor((stop - start) / step + 1e-9)) + 1
    if count < 1:
        raise ValueError(f"empty range {spec!r}")
    return start + step * np.arange(count)


@dataclass
class SweepConfig:
    """Everything one sweep needs; JSON-serializable for reproducibility."""

    n_sites: int = 14
    bc: str = "pbc"
    mu_i_range: str = "-6:6:0.25"
    mu_f_range: str = "-6:6:0.25"
    t_max: float = 20.0
    dt: float = 0.05
    delta_f_window: tuple = (1.0, 20.0)
    msd_window: tuple = (10.0, 20.0)
    layers: tuple = ALL_LAYERS
    threads: int | None = None
    sector: bool = True
    out: str = "sweep.csv"
    schema: int = SCHEMA_VERSION

    def mu_i_values(self) -> np.ndarray:
        return parse_range(self.mu_i_range)

    def mu_f_values(self) -> np.ndarray:
        return parse_range(self.mu_f_range)

    def resolved_threads(self) -> int:
        if self.threads:
            return int(self.threads)
        env = os.environ.get("SCARSIM_THREADS")
        if env:
            return max(1, int(env))
        return min(8, os.cpu_count() or 1)

    @classmethod
    def from_dict(cls, data: dict) -> "SweepConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown sweep config keys: {sorted(unknown)}")
        merged = cls(**data)
        if merged.schema != SCHEMA_VERSION:
            raise ValueError(f"unsupported sweep schema {merged.schema}")
        for name in ("delta_f_window", "msd_window", "layers"):
            setattr(merged, name, tuple(getattr(merged, name)))
        bad = set(merged.layers) - set(ALL_LAYERS)
        if bad:
            raise ValueError(f"unknown layers {sorted(bad)}; choose from {ALL_LAYERS}")
        return merged

    def to_dict(self) -> dict:
        data = dataclasses.asdict(self)
        data["delta_f_window"] = list(self.delta_f_window)
        data["msd_window"] = list(self.msd_window)
        data["layers"] = list(self.layers)
        return data


@dataclass
class SweepCell:
    """One grid point; layer values are None when skipped or failed."""

    mu_i: float
    mu_f: float
    delta_f: float | None = None
    msd_n: float | None = None
    ipr: float | None = None
    delta_n: float | None = None
    status: str = "ok"
    message: str = ""
    wall_s: float = 0.0


class _SweepEngine:
    """Shared immutable caches plus per-row/per-column memoization."""

    def __init__(self, config: SweepConfig):
        self.config = config
        bc = BoundaryCondition.coerce(config.bc)
        basis = enumerate_basis(config.n_sites, bc)
        if config.sector and bc is BoundaryCondition.PERIODIC:
            self.space = build_sector(basis, k=0, p=+1)
            self.number = self.space.project_matrix(number_operator(basis)).toarray()
        else:
            self.space = basis
            self.number = None  # diagonal handled via popcounts
        self.basis = basis
        self.bc = bc
        self._gs_cache: dict[float, np.ndarray] = {}
        self._eig_cache: dict[float, object] = {}
        self._lock = threading.Lock()
        self.times = TimeGrid(0.0, config.t_max, config.dt).times()

    def ground(self, mu_i: float) -> np.ndarray:
        with self._lock:
            hit = self._gs_cache.get(mu_i)
        if hit is not None:
            return hit
        _, vec = ground_state(build_pxp(self.space, HamiltonianParams(mu=mu_i, bc=self.bc)))
        with self._lock:
            self._gs_cache[mu_i] = vec
        return vec

    def eig(self, mu_f: float):
        with self._lock:
            hit = self._eig_cache.get(mu_f)
        if hit is not None:
            return hit
        dec = eig_decompose(build_pxp(self.space, HamiltonianParams(mu=mu_f, bc=self.bc)),
                            validate=False)
        with self._lock:
            self._eig_cache[mu_f] = dec
        return dec

    def density_series(self, trajectory: np.ndarray) -> np.ndarray:
        if self.number is not None:
            return np.real(np.einsum("ti,ij,tj->t", trajectory.conj(),
                                     self.number, trajectory))
        pops = self.basis.popcounts() / self.basis.n_sites
        return (np.abs(trajectory) ** 2) @ pops

    def run_cell(self, mu_i: float, mu_f: float) -> SweepCell:
        tic = time.perf_counter()
        cell = self._run_cell(mu_i, mu_f)
        cell.wall_s = time.perf_counter() - tic
        return cell

    def _run_cell(self, mu_i: float, mu_f: float) -> SweepCell:
        cfg = self.config
        cell = SweepCell(mu_i=float(mu_i), mu_f=float(mu_f))
        errors = []
        try:
            psi0 = self.ground(mu_i)
            dec = self.eig(mu_f)
        except ScarsimError as exc:
            cell.status = "failed"
            cell.message = str(exc)
            return cell

        needs_series = {"delta_f", "msd_n"} & set(cfg.layers)
        record = None
        if needs_series:
            trajectory = evolve_exact(dec, psi0, self.times)
            fid = np.abs(trajectory @ psi0.conj()) ** 2
            dens = self.density_series(trajectory)
            record = QuenchRecord(times=self.times, fidelity=np.real(fid),
                                  density_n=dens, entropy=np.zeros(0),
                                  mu_i=mu_i, mu_f=mu_f, n_sites=cfg.n_sites)

        if "delta_f" in cfg.layers:
            try:
                cell.delta_f = delta_F(record, WindowSpec(*cfg.delta_f_window))
            except ScarsimError as exc:
                errors.append(f"delta_f: {exc}")
        if "ipr" in cfg.layers:
            try:
                cell.ipr = ipr(psi0, dec)
            except ScarsimError as exc:
                errors.append(f"ipr: {exc}")

        canonical = None
        if {"msd_n", "delta_n"} & set(cfg.layers):
            e_target = float(np.real(np.sum(np.abs(dec.coefficients(psi0)) ** 2
                                            * dec.eigenvalues)))
            try:
                canonical = solve_beta(dec, e_target)
            except ScarsimError as exc:
                errors.append(f"thermal: {exc}")
        if "msd_n" in cfg.layers and canonical is not None:
            try:
                cell.msd_n = msd_n(record, canonical.n_th, WindowSpec(*cfg.msd_window))
            except ScarsimError as exc:
                errors.append(f"msd_n: {exc}")
        if "delta_n" in cfg.layers and canonical is not None:
            try:
                cell.delta_n = diagonal_ensemble_n(psi0, dec,
                                                   warn_on_degeneracy=False) - canonical.n_th
            except ScarsimError as exc:
                errors.append(f"delta_n: {exc}")

        if errors:
            cell.status = "failed"
            cell.message = "; ".join(errors)
        return cell


def run_sweep(config: SweepConfig) -> list[SweepCell]:
    """Run every grid cell; output is ordered mu_i-major regardless of threads."""
    engine = _SweepEngine(config)
    mu_is = config.mu_i_values()
    mu_fs = config.mu_f_values()
    # warm the per-column eigendecompositions serially: they dominate setup
    for mu_f in mu_fs:
        engine.eig(float(mu_f))
    grid = [(float(a), float(b)) for a in mu_is for b in mu_fs]
    results: list[SweepCell | None] = [None] * len(grid)
    threads = config.resolved_threads()
    if threads <= 1:
        for i, (a, b) in enumerate(grid):
            results[i] = engine.run_cell(a, b)
    else:
        with concurrent.futures.ThreadPoolExecutor(max_workers=threads) as pool:
            futures = {pool.submit(engine.run_cell, a, b): i
                       for i, (a, b) in enumerate(grid)}
            for fut in concurrent.futures.as_completed(futures):
                results[futures[fut]] = fut.result()
    return results  # type: ignore[return-value]


def _fmt(value: float | None) -> str:
    return "" if value is None else format(value, ".12g")


def write_outputs(cells: list[SweepCell], config: SweepConfig,
                  wall_time: float | None = None) -> tuple[str, str]:
    """Write the CSV table and a JSON metadata companion; returns both paths.

    The CSV is byte-stable for identical configs: fixed header, grid order,
    12 significant digits. Run-dependent facts (wall time, version) go to
    the JSON file only.
    """
    csv_path = config.out
    meta_path = os.path.splitext(csv_path)[0] + ".meta.json"
    try:
        with open(csv_path, "w", encoding="utf-8") as fh:
            fh.write("mu_i,mu_f,delta_f,msd_n,ipr,delta_n,status\n")
            for cell in cells:
                fh.write(",".join([
                    _fmt(cell.mu_i), _fmt(cell.mu_f), _fmt(cell.delta_f),
                    _fmt(cell.msd_n), _fmt(cell.ipr), _fmt(cell.delta_n),
                    cell.status,
                ]) + "\n")
        meta = {
            "config": config.to_dict(),
            "version": __version__,
            "wall_time_s": wall_time,
            "n_cells": len(cells),
            "n_failed": sum(1 for c in cells if c.status != "ok"),
            "written_at": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
            "evolution_space": "k=0,p=+1 sector" if config.sector else "full basis",
        }
        with open(meta_path, "w", encoding="utf-8") as fh:
            json.dump(meta, fh, indent=2)
            fh.write("\n")
    except OSError as exc:
        raise ScarsimError(f"writing sweep outputs to {csv_path!r} failed: {exc}") from exc
    return csv_path, meta_path
