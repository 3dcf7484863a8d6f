"""Planted multi-task dictionary data with subject-level regression targets."""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .encode import PatchGrouping, max_pool
from .train import Dictionary


@dataclass
class SyntheticSpec:
    """Generator settings.

    Every task sees the same ``n_subjects`` subjects, each owning an equal
    contiguous run of that task's ``samples_per_task`` patches.  Targets are a
    sparse linear function of the subjects' absmax-pooled planted codes,
    taken from the last task (``target_source="last"``) or from all tasks
    side by side (``"all"``).
    """

    n_tasks: int = 3
    p: int = 32
    shared_atoms: int = 8
    individual_atoms: int = 8
    sparsity: int = 3
    samples_per_task: int = 2000
    n_subjects: int = 100
    noise: float = 0.01
    n_targets: int = 2
    target_sparsity: int = 4
    target_noise: float = 0.1
    target_source: str = "last"
    seed: int = 0

    def __post_init__(self):
        counts = (self.n_tasks, self.p, self.sparsity, self.samples_per_task,
                  self.n_subjects, self.n_targets, self.target_sparsity)
        if min(counts) < 1 or self.shared_atoms < 0 or self.individual_atoms < 0:
            raise ValueError("all counts must be >= 1")
        if self.shared_atoms + self.individual_atoms < 1:
            raise ValueError("dictionary must have at least one atom")
        if self.sparsity > self.shared_atoms + self.individual_atoms:
            raise ValueError("sparsity exceeds the number of atoms")
        if self.n_subjects > self.samples_per_task:
            raise ValueError("more subjects than patches per task")
        if self.noise < 0 or self.target_noise < 0:
            raise ValueError("noise levels must be >= 0")
        if self.target_source not in ("last", "all"):
            raise ValueError("target_source must be 'last' or 'all'")

    @property
    def n_atoms(self):
        return self.shared_atoms + self.individual_atoms

    def to_dict(self):
        return asdict(self)


@dataclass
class SyntheticData:
    tasks: list
    groupings: list
    subjects: list
    targets: np.ndarray
    target_names: list
    dictionaries: list
    codes: list
    weights: np.ndarray
    spec: SyntheticSpec


def _unit_columns(rng, p, k):
    A = rng.standard_normal((p, k))
    return A / np.linalg.norm(A, axis=0)


def generate_synthetic(spec):
    """Draw a planted MSCC model and sample data from it.

    Returns
    -------
    SyntheticData
    """
    rng = np.random.default_rng(spec.seed)
    shared = _unit_columns(rng, spec.p, spec.shared_atoms)
    subjects = [f"s{k:04d}" for k in range(spec.n_subjects)]
    owner = np.arange(spec.samples_per_task) * spec.n_subjects // spec.samples_per_task
    grouping = PatchGrouping.from_labels([subjects[k] for k in owner], subjects)

    tasks, dictionaries, codes, groupings, pooled = [], [], [], [], []
    for _ in range(spec.n_tasks):
        atoms = np.hstack([shared, _unit_columns(rng, spec.p, spec.individual_atoms)])
        Z = np.zeros((spec.n_atoms, spec.samples_per_task))
        for i in range(spec.samples_per_task):
            support = rng.choice(spec.n_atoms, size=spec.sparsity, replace=False)
            Z[support, i] = rng.standard_normal(spec.sparsity)
        X = atoms @ Z + spec.noise * rng.standard_normal((spec.p, spec.samples_per_task))
        tasks.append(np.asfortranarray(X))
        dictionaries.append(Dictionary(atoms, spec.shared_atoms))
        codes.append(Z)
        groupings.append(grouping)
        pooled.append(max_pool(Z, grouping).features)

    F = pooled[-1] if spec.target_source == "last" else np.hstack(pooled)
    weights = np.zeros((F.shape[1], spec.n_targets))
    for k in range(spec.n_targets):
        support = rng.choice(F.shape[1], size=min(spec.target_sparsity, F.shape[1]),
                             replace=False)
        weights[support, k] = rng.standard_normal(support.size)
    signal = F @ weights
    targets = signal + spec.target_noise * rng.standard_normal(signal.shape)
    names = [f"score{k + 1}" for k in range(spec.n_targets)]
    return SyntheticData(tasks, groupings, subjects, targets, names, dictionaries, codes,
                         weights, spec)
