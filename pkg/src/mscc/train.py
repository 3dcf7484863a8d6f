"""Multi-task stochastic coordinate coding (MSCC).

Each task ``t`` owns a dictionary ``D_t = [shared | individual_t]``.  The
shared block is common to every task; it is threaded through the tasks as a
single array ``phi`` that each task copies in before touching a sample and
writes back afterwards.  Per sample the code is refreshed by a few cyclic
coordinate-descent passes and the active atoms take one SGD step whose rate
is the inverse of the accumulated Hessian diagonal.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import _cd
from .linalg import SparseCode, as_feature_matrix

logger = logging.getLogger(__name__)

# column norms may exceed 1 by rounding after projection
NORM_SLACK = 1e-12


@dataclass
class MsccConfig:
    """Hyperparameters of MSCC training.

    ``individual_atoms`` is either one count used for every task or one count
    per task.
    """

    lam: float = 0.1
    epochs: int = 10
    ccd_full_passes: int = 1
    ccd_support_passes: int = 3
    shared_atoms: int = 1000
    individual_atoms: int | Sequence[int] = 1000
    seed: int = 0
    shuffle: bool = False

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError("lam must be positive")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.ccd_full_passes < 1:
            raise ValueError("ccd_full_passes must be >= 1")
        if self.ccd_support_passes < 0:
            raise ValueError("ccd_support_passes must be >= 0")
        if self.shared_atoms < 0:
            raise ValueError("shared_atoms must be >= 0")
        if np.any(np.asarray(self.individual_atoms) < 0):
            raise ValueError("individual_atoms must be >= 0")

    def individual_counts(self, n_tasks):
        counts = np.broadcast_to(np.asarray(self.individual_atoms, dtype=int), (n_tasks,))
        if np.ndim(self.individual_atoms) and len(self.individual_atoms) != n_tasks:
            raise ValueError(
                f"{len(self.individual_atoms)} individual atom counts for {n_tasks} tasks")
        return [int(c) for c in counts]


@dataclass
class Dictionary:
    """Task dictionary ``[shared | individual]`` stored as one ``(p, l)`` array."""

    atoms: np.ndarray
    n_shared: int

    def __post_init__(self):
        self.atoms = np.asfortranarray(self.atoms, dtype=np.float64)
        if self.atoms.ndim != 2 or not 0 <= self.n_shared <= self.atoms.shape[1]:
            raise ValueError("invalid dictionary layout")

    @property
    def p(self):
        return self.atoms.shape[0]

    @property
    def n_atoms(self):
        return self.atoms.shape[1]

    @property
    def n_individual(self):
        return self.n_atoms - self.n_shared

    @property
    def shared(self):
        return self.atoms[:, : self.n_shared]

    @property
    def individual(self):
        return self.atoms[:, self.n_shared:]

    def column_norms(self):
        return np.linalg.norm(self.atoms, axis=0)

    def copy(self):
        return Dictionary(self.atoms.copy(order="F"), self.n_shared)


@dataclass
class TrainerState:
    phi: np.ndarray
    hessian_diag: list[np.ndarray]
    epoch: int = 0


@dataclass
class TrainResult:
    dictionaries: list[Dictionary]
    codes: list[np.ndarray]
    objective_trace: list[float]
    state: TrainerState
    config: MsccConfig = field(repr=False)


def _check_tasks(tasks):
    tasks = [as_feature_matrix(X, f"task {t}") for t, X in enumerate(tasks)]
    if not tasks:
        raise ValueError("at least one task is required")
    p = tasks[0].shape[0]
    for t, X in enumerate(tasks):
        if X.shape[0] != p:
            raise ValueError(f"task {t} has {X.shape[0]} features, expected {p}")
    return tasks


def _draw_columns(rng, columns, count, what):
    """Pick ``count`` distinct nonzero columns, skipping zero-norm candidates."""
    if count == 0:
        return np.empty((columns.shape[0], 0))
    if count > columns.shape[1]:
        raise ValueError(f"{what}: need {count} columns, only {columns.shape[1]} available")
    picked = []
    for j in rng.permutation(columns.shape[1]):
        col = columns[:, j]
        nrm = np.linalg.norm(col)
        if nrm > 0:
            picked.append(col / nrm)
            if len(picked) == count:
                return np.column_stack(picked)
    raise ValueError(f"{what}: only {len(picked)} nonzero columns, need {count}")


def init_dictionaries(tasks, config, rng_seed=None):
    """Random-patch initialization.

    The shared block is drawn from the pooled columns of all tasks, each
    individual block from its own task; every picked column is scaled to unit
    norm.  Uses ``config.seed`` when ``rng_seed`` is None.
    """
    tasks = _check_tasks(tasks)
    rng = np.random.default_rng(config.seed if rng_seed is None else rng_seed)
    shared = _draw_columns(rng, np.hstack(tasks), config.shared_atoms, "shared block")
    dictionaries = []
    for t, (X, n_ind) in enumerate(zip(tasks, config.individual_counts(len(tasks)))):
        individual = _draw_columns(rng, X, n_ind, f"individual block of task {t}")
        atoms = np.hstack([shared, individual])
        if atoms.shape[1] == 0:
            raise ValueError(f"task {t} would get an empty dictionary")
        dictionaries.append(Dictionary(atoms, config.shared_atoms))
    return dictionaries


def update_sparse_code(dictionary, x, z, config):
    """Refresh one sample's code by CCD, warm-started from ``z``.

    Runs ``config.ccd_full_passes`` passes over every coordinate, then
    ``config.ccd_support_passes`` passes over the resulting support.

    Returns
    -------
    code : SparseCode
    support : ndarray of int
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (dictionary.p,) or z.length != dictionary.n_atoms:
        raise ValueError("sample or code does not match dictionary shape")
    zd = z.to_dense()
    support = _cd.ccd_update(dictionary.atoms, x, zd, config.lam,
                             config.ccd_full_passes, config.ccd_support_passes)
    return SparseCode(zd.size, support, zd[support]), support


def update_dictionary(dictionary, x, z, state, task):
    """One SGD step on the atoms active in ``z``.

    ``state.hessian_diag[task]`` accumulates ``z**2``; each active atom moves
    against the residual with rate ``1 / H[mu, mu]`` and is projected back
    into the unit ball.  The shared block is written through to ``state.phi``.
    Returns a new Dictionary.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (dictionary.p,) or z.length != dictionary.n_atoms:
        raise ValueError("sample or code does not match dictionary shape")
    out = dictionary.copy()
    _cd.sgd_update(out.atoms, state.hessian_diag[task], x, z.to_dense(), z.indices)
    assert np.all(state.hessian_diag[task][z.indices] > 0)
    state.phi = out.shared.copy(order="F")
    return out


def objective(tasks, dictionaries, codes, lam):
    """``sum_t 0.5 ||X_t - D_t Z_t||_F^2 + lam sum_t ||Z_t||_1``."""
    if not len(tasks) == len(dictionaries) == len(codes):
        raise ValueError("tasks, dictionaries and codes differ in length")
    total = 0.0
    for X, D, Z in zip(tasks, dictionaries, codes):
        atoms = D.atoms if isinstance(D, Dictionary) else np.asarray(D)
        X = np.asarray(X, dtype=np.float64)
        Z = np.asarray(Z, dtype=np.float64)
        if atoms.shape[0] != X.shape[0] or atoms.shape[1] != Z.shape[0] or Z.shape[1] != X.shape[1]:
            raise ValueError("shape mismatch between task, dictionary and codes")
        R = X - atoms @ Z
        total += 0.5 * float(np.sum(R * R)) + lam * float(np.abs(Z).sum())
    return total


def train(tasks, config, dictionaries=None):
    """Learn shared + individual dictionaries over several feature matrices.

    Parameters
    ----------
    tasks : list of ndarray, each (p, n_t)
    config : MsccConfig
    dictionaries : list of Dictionary, optional
        Starting point; random-patch initialization when omitted.

    Returns
    -------
    TrainResult
        Dictionaries (shared blocks all equal to the final ``phi``), the last
        code of every sample as dense ``(l_t, n_t)`` arrays, and the objective
        recorded at the end of each epoch.
    """
    tasks = _check_tasks(tasks)
    if dictionaries is None:
        dictionaries = init_dictionaries(tasks, config)
    else:
        dictionaries = [d.copy() for d in dictionaries]
    n_shared = dictionaries[0].n_shared
    if any(d.n_shared != n_shared or d.p != tasks[0].shape[0] for d in dictionaries):
        raise ValueError("dictionaries disagree on the shared block or feature dimension")

    state = TrainerState(
        phi=dictionaries[0].shared.copy(order="F"),
        hessian_diag=[np.zeros(d.n_atoms) for d in dictionaries],
    )
    codes = [np.zeros((d.n_atoms, X.shape[1]), order="F") for d, X in zip(dictionaries, tasks)]
    order_rng = np.random.default_rng(config.seed)
    trace = []
    for epoch in range(config.epochs):
        for t, (X, D) in enumerate(zip(tasks, dictionaries)):
            if config.shuffle:
                order = order_rng.permutation(X.shape[1])
            else:
                order = np.arange(X.shape[1])
            # nothing else touches phi while task t runs, so copying it in once
            # per task pass is the same as copying it in before every sample
            D.atoms[:, :n_shared] = state.phi
            _cd.task_epoch(D.atoms, state.hessian_diag[t], X, codes[t], order,
                           config.lam, config.ccd_full_passes, config.ccd_support_passes)
            state.phi = D.shared.copy(order="F")
        state.epoch = epoch + 1
        for D in dictionaries:
            D.atoms[:, :n_shared] = state.phi
        trace.append(objective(tasks, dictionaries, codes, config.lam))
        logger.debug("epoch %d objective %.6g", epoch + 1, trace[-1])

    for D in dictionaries:
        D.atoms[:, :n_shared] = state.phi
    return TrainResult(dictionaries, codes, trace, state, config)
