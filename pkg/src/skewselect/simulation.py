"""Skewed-cluster simulation engine and replicated-study harness.

Datasets are drawn from a mixture of multivariate variance-gamma components
(clustering variables), plus independent gamma "nonsense" variables and an
optional "noisy" variable that is a linear blend of a clustering variable and
Gaussian noise. A variance-gamma draw is
    X = mu + Y*alpha + sqrt(Y)*U,  Y ~ gamma(shape, rate=psi/2),  U ~ N(0, Sigma),
so E[X] = mu + (2*shape/psi)*alpha. The nonsense variables are specified as
generalized-inverse-Gaussian (shape, 0, psi) laws, which for zero second
parameter coincide with gamma(shape, rate=psi/2); they are sampled through
the gamma sampler via that identity.
"""

from __future__ import annotations

import json
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from ._emcore import EmConfig
from .datasets import DataMatrix, LabeledDataset
from .gaussian_mixture import hard_labels
from .metrics import ari
from .vscc import SelectionResult, vscc_gaussian, vscc_manly

__all__ = [
    "VarianceGammaComponent",
    "SimulationSpec",
    "ReplicateRecord",
    "MethodSummary",
    "StudySummary",
    "METHOD_NAMES",
    "sample_gamma",
    "sample_variance_gamma",
    "generate_dataset",
    "default_study_spec",
    "run_study",
]

_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class VarianceGammaComponent:
    """Parameters of one multivariate variance-gamma mixture component."""

    mu: np.ndarray
    sigma: np.ndarray
    alpha: np.ndarray
    shape: float
    psi: float
    weight: float

    def __post_init__(self):
        mu = np.asarray(self.mu, dtype=float)
        sigma = np.asarray(self.sigma, dtype=float)
        alpha = np.asarray(self.alpha, dtype=float)
        p = mu.shape[0]
        if mu.ndim != 1 or alpha.shape != (p,) or sigma.shape != (p, p):
            raise ValueError("mu, alpha must be p-vectors and sigma p-by-p")
        np.linalg.cholesky(sigma)
        if not self.shape > 0 or not self.psi > 0:
            raise ValueError("shape and psi must be positive")
        if not 0 < self.weight < 1:
            raise ValueError("weight must lie in (0, 1)")
        for arr in (mu, sigma, alpha):
            arr.flags.writeable = False
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "alpha", alpha)

    @property
    def p(self) -> int:
        return self.mu.shape[0]

    @property
    def mean(self) -> np.ndarray:
        """E[X] = mu + (2*shape/psi)*alpha."""
        return self.mu + (2.0 * self.shape / self.psi) * self.alpha


@dataclass(frozen=True)
class SimulationSpec:
    """Recipe for one simulated dataset.

    nonsense entries are (shape, psi) pairs sampled as gamma(shape, psi/2);
    noisy is (source column index, mix weight a, noise sd s) producing
    a*V_source + (1-a)*Z with Z ~ N(0, s^2).
    """

    components: tuple[VarianceGammaComponent, ...]
    nonsense: tuple[tuple[float, float], ...]
    noisy: tuple[int, float, float] | None
    n: int
    seed: int

    def __post_init__(self):
        object.__setattr__(self, "components", tuple(self.components))
        object.__setattr__(self, "nonsense",
                           tuple((float(a), float(b)) for a, b in self.nonsense))
        if self.noisy is not None:
            src, a, s = self.noisy
            object.__setattr__(self, "noisy", (int(src), float(a), float(s)))
        if not self.components:
            raise ValueError("need at least one component")
        weights = [c.weight for c in self.components]
        if abs(sum(weights) - 1.0) > 1e-12:
            raise ValueError(f"component weights must sum to 1, got {sum(weights)}")
        p = self.components[0].p
        if any(c.p != p for c in self.components):
            raise ValueError("all components must share the same dimension")
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if self.noisy is not None:
            src, a, s = self.noisy
            if not 0 <= src < self.p_total - 1:
                raise ValueError(f"noisy source index {src} out of range")
            if not s > 0:
                raise ValueError("noise sd must be positive")

    @property
    def p_clustering(self) -> int:
        return self.components[0].p

    @property
    def p_total(self) -> int:
        return (self.p_clustering + len(self.nonsense)
                + (1 if self.noisy is not None else 0))

    @property
    def column_names(self) -> tuple[str, ...]:
        return tuple(f"V{j + 1}" for j in range(self.p_total))


def default_study_spec(n: int = 500, seed: int = 0) -> SimulationSpec:
    """The benchmark recipe: three skewed 2-D clusters, two gamma nonsense
    variables, and one variable correlated with V1 but carrying no separation."""
    components = (
        VarianceGammaComponent(
            mu=np.array([2.0, 3.0]), sigma=np.eye(2),
            alpha=np.array([1.0, 4.0]), shape=4.0, psi=8.0, weight=0.4),
        VarianceGammaComponent(
            mu=np.array([5.0, 3.0]), sigma=np.eye(2),
            alpha=np.array([4.0, 4.0]), shape=4.0, psi=8.0, weight=0.4),
        VarianceGammaComponent(
            mu=np.array([5.0, 15.0]), sigma=2.0 * np.eye(2),
            alpha=np.array([0.1, 0.1]), shape=3.0, psi=6.0, weight=0.2),
    )
    return SimulationSpec(
        components=components,
        nonsense=((3.0, 6.0), (1.0, 2.0)),
        noisy=(0, 0.6, 5.0),
        n=n,
        seed=seed,
    )


def sample_gamma(n: int, shape: float, rate: float,
                 rng: np.random.Generator) -> np.ndarray:
    """n i.i.d. gamma draws with the given shape and rate (mean shape/rate)."""
    if not shape > 0:
        raise ValueError(f"shape must be positive, got {shape}")
    if not rate > 0:
        raise ValueError(f"rate must be positive, got {rate}")
    if n < 1:
        raise ValueError("n must be >= 1")
    return rng.gamma(shape, 1.0 / rate, size=n)


def sample_variance_gamma(n: int, comp: VarianceGammaComponent,
                          rng: np.random.Generator) -> np.ndarray:
    """n draws of mu + Y*alpha + sqrt(Y)*U with gamma mixing variable Y."""
    y = sample_gamma(n, comp.shape, comp.psi / 2.0, rng)
    L = np.linalg.cholesky(comp.sigma)
    u = rng.standard_normal((n, comp.p)) @ L.T
    return comp.mu + y[:, None] * comp.alpha + np.sqrt(y)[:, None] * u


def generate_dataset(spec: SimulationSpec) -> LabeledDataset:
    """Draw one dataset; deterministic for a fixed spec (seed included)."""
    rng = np.random.default_rng(spec.seed & _MASK64)
    n = spec.n
    G = len(spec.components)
    weights = np.array([c.weight for c in spec.components])
    labels0 = rng.choice(G, size=n, p=weights)
    X = np.empty((n, spec.p_total))
    pc = spec.p_clustering
    for g, comp in enumerate(spec.components):
        rows = labels0 == g
        m = int(rows.sum())
        if m:
            X[rows, :pc] = sample_variance_gamma(m, comp, rng)
    col = pc
    for shape, psi in spec.nonsense:
        X[:, col] = sample_gamma(n, shape, psi / 2.0, rng)
        col += 1
    if spec.noisy is not None:
        src, a, s = spec.noisy
        X[:, col] = a * X[:, src] + (1.0 - a) * rng.normal(0.0, s, size=n)
    return LabeledDataset(DataMatrix(X, spec.column_names), labels0 + 1)


METHOD_NAMES = ("vscc", "vscc-manly-full", "vscc-manly-forward",
                "vscc-manly-backward")


def _run_method(name: str, X: DataMatrix, g_range, config: EmConfig) -> SelectionResult:
    if name == "vscc":
        return vscc_gaussian(X, g_range, config)
    mode = name.removeprefix("vscc-manly-")
    return vscc_manly(X, g_range, mode, config)


@dataclass(frozen=True)
class ReplicateRecord:
    """One method run on one simulated dataset."""

    method: str
    replicate: int
    dataset_seed: int
    g: int | None
    ari: float | None
    variables: tuple[str, ...] | None
    error: str | None = None


@dataclass(frozen=True)
class MethodSummary:
    """Aggregates for one method across replicates."""

    method: str
    n: int
    replicates: int
    failures: int
    mean_g: float
    modal_g: int
    mean_ari: float
    sd_ari: float
    selection_counts: tuple[tuple[str, int], ...]


@dataclass(frozen=True)
class StudySummary:
    """Full study output: per-method rows plus the raw replicate records."""

    n: int
    replicates: int
    seed: int
    variable_names: tuple[str, ...]
    rows: tuple[MethodSummary, ...]
    records: tuple[ReplicateRecord, ...]

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "replicates": self.replicates,
            "seed": self.seed,
            "variable_names": list(self.variable_names),
            "rows": [
                {
                    "method": r.method,
                    "n": r.n,
                    "replicates": r.replicates,
                    "failures": r.failures,
                    "mean_g": r.mean_g,
                    "modal_g": r.modal_g,
                    "mean_ari": r.mean_ari,
                    "sd_ari": r.sd_ari,
                    "selection_counts": dict(r.selection_counts),
                }
                for r in self.rows
            ],
            "records": [
                {
                    "method": rec.method,
                    "replicate": rec.replicate,
                    "dataset_seed": rec.dataset_seed,
                    "g": rec.g,
                    "ari": rec.ari,
                    "variables": None if rec.variables is None else list(rec.variables),
                    "error": rec.error,
                }
                for rec in self.records
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    def to_csv(self) -> str:
        header = ["method", "n", "replicates", "failures", "mean_g", "modal_g",
                  "mean_ari", "sd_ari"]
        header += [f"count_{v}" for v in self.variable_names]
        lines = [",".join(header)]
        for r in self.rows:
            counts = dict(r.selection_counts)
            cells = [r.method, str(r.n), str(r.replicates), str(r.failures),
                     repr(r.mean_g), str(r.modal_g), repr(r.mean_ari),
                     repr(r.sd_ari)]
            cells += [str(counts.get(v, 0)) for v in self.variable_names]
            lines.append(",".join(cells))
        return "\n".join(lines) + "\n"


def _derive_seed(base: int, *key: int) -> int:
    ss = np.random.SeedSequence(entropy=base & _MASK64, spawn_key=tuple(key))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def _run_replicate(args) -> list[ReplicateRecord]:
    spec, replicate, methods, g_list, config = args
    dataset_seed = _derive_seed(spec.seed, replicate, 0)
    config_seed = _derive_seed(spec.seed, replicate, 1)
    data = generate_dataset(replace(spec, seed=dataset_seed))
    cfg = replace(config, seed=config_seed)
    records = []
    for method in methods:
        try:
            result = _run_method(method, data.data, g_list, cfg)
            labels = hard_labels(result.final_fit.responsibilities)
            records.append(ReplicateRecord(
                method=method,
                replicate=replicate,
                dataset_seed=dataset_seed,
                g=result.final_fit.n_components,
                ari=ari(labels, data.labels),
                variables=result.chosen_subset,
            ))
        except Exception as err:  # record the failed cell, keep the study alive
            records.append(ReplicateRecord(
                method=method,
                replicate=replicate,
                dataset_seed=dataset_seed,
                g=None,
                ari=None,
                variables=None,
                error=f"{type(err).__name__}: {err}",
            ))
    return records


def run_study(spec: SimulationSpec, replicates: int, methods, g_range,
              config: EmConfig, threads: int = 1) -> StudySummary:
    """Run each method once per freshly generated replicate and aggregate.

    Replicate seeds derive from (spec.seed, replicate index), so results are
    reproducible and independent of the worker count. A failed method run is
    recorded as a failed cell, not raised.
    """
    if replicates < 1:
        raise ValueError("replicates must be >= 1")
    methods = tuple(methods)
    if not methods:
        raise ValueError("methods must be nonempty")
    unknown = [m for m in methods if m not in METHOD_NAMES]
    if unknown:
        raise ValueError(f"unknown methods {unknown}; expected {METHOD_NAMES}")
    g_list = tuple(sorted(set(int(g) for g in g_range)))
    tasks = [(spec, r, methods, g_list, config) for r in range(replicates)]
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            chunks = list(pool.map(_run_replicate, tasks))
    else:
        chunks = [_run_replicate(t) for t in tasks]
    records = tuple(rec for chunk in chunks for rec in chunk)

    rows = []
    for method in methods:
        hits = [r for r in records if r.method == method and r.error is None]
        failures = sum(1 for r in records
                       if r.method == method and r.error is not None)
        if hits:
            gs = [r.g for r in hits]
            aris = np.array([r.ari for r in hits])
            mean_g = float(np.mean(gs))
            modal_g = min(Counter(gs).most_common(),
                          key=lambda kv: (-kv[1], kv[0]))[0]
            mean_ari = float(aris.mean())
            sd_ari = float(aris.std(ddof=1)) if len(hits) > 1 else 0.0
        else:
            mean_g = float("nan")
            modal_g = 0
            mean_ari = float("nan")
            sd_ari = float("nan")
        counts = tuple(
            (v, sum(1 for r in hits if v in r.variables))
            for v in spec.column_names
        )
        rows.append(MethodSummary(
            method=method, n=spec.n, replicates=replicates, failures=failures,
            mean_g=mean_g, modal_g=modal_g, mean_ari=mean_ari, sd_ari=sd_ari,
            selection_counts=counts,
        ))
    return StudySummary(
        n=spec.n, replicates=replicates, seed=spec.seed,
        variable_names=spec.column_names, rows=tuple(rows), records=records,
    )
