"""Test-time sparse coding against frozen dictionaries and per-subject pooling."""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from . import _cd
from .linalg import as_feature_matrix

logger = logging.getLogger(__name__)

POOL_MODES = ("absmax", "signedmax")


@dataclass(frozen=True)
class PatchGrouping:
    """Which subject each patch (column) belongs to.

    ``subjects`` fixes the output order of pooling; by default it is the order
    of first appearance in ``subject_of``.
    """

    subject_of: tuple
    subjects: tuple

    @classmethod
    def from_labels(cls, labels, subjects=None):
        labels = tuple(str(s) for s in labels)
        if not labels:
            raise ValueError("empty grouping")
        if subjects is None:
            subjects = tuple(dict.fromkeys(labels))
        else:
            subjects = tuple(str(s) for s in subjects)
            if len(set(subjects)) != len(subjects):
                raise ValueError("duplicate subject identifiers")
            unknown = set(labels) - set(subjects)
            if unknown:
                raise ValueError(f"unknown subject identifier(s): {sorted(unknown)[:5]}")
            empty = set(subjects) - set(labels)
            if empty:
                raise ValueError(f"subject(s) without patches: {sorted(empty)[:5]}")
        return cls(labels, subjects)

    @property
    def patch_count(self):
        return len(self.subject_of)

    def subject_index(self):
        """Integer position in ``subjects`` of every patch."""
        pos = {s: k for k, s in enumerate(self.subjects)}
        return np.fromiter((pos[s] for s in self.subject_of), dtype=np.int64,
                           count=self.patch_count)

    def select(self, keep):
        """Restrict to the patches of the subjects in ``keep`` (order kept).

        Returns the sub-grouping and the boolean patch mask.
        """
        keep = [str(s) for s in keep]
        wanted = set(keep)
        mask = np.fromiter((s in wanted for s in self.subject_of), dtype=bool,
                           count=self.patch_count)
        labels = [s for s, m in zip(self.subject_of, mask) if m]
        present = set(labels)
        return PatchGrouping.from_labels(labels, [s for s in keep if s in present]), mask


@dataclass
class SubjectFeatureTable:
    subjects: list
    features: np.ndarray
    targets: np.ndarray | None = None
    target_names: list | None = None

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        if len(set(self.subjects)) != len(self.subjects):
            raise ValueError("duplicate subject identifiers")
        if self.features.shape[0] != len(self.subjects):
            raise ValueError("one feature row per subject required")


def encode(dictionary, patches, lam, tol=1e-6, max_sweeps=200, return_sweeps=False):
    """Solve the Lasso coding problem for every patch at a fixed dictionary.

    Cyclic coordinate descent from zero; a column stops once its largest
    coordinate change falls below ``tol``.  Columns that exhaust
    ``max_sweeps`` are logged and returned as they stand.

    Returns
    -------
    Z : ndarray, shape (l, n)
    sweeps : ndarray of int, shape (n,)
        Only with ``return_sweeps``; -1 marks a column that did not converge.
    """
    atoms = getattr(dictionary, "atoms", dictionary)
    atoms = np.asfortranarray(atoms, dtype=np.float64)
    X = as_feature_matrix(patches, "patches")
    if X.shape[0] != atoms.shape[0]:
        raise ValueError(f"patches have {X.shape[0]} rows, dictionary has {atoms.shape[0]}")
    Z = np.zeros((atoms.shape[1], X.shape[1]), order="F")
    sweeps = np.zeros(X.shape[1], dtype=np.int64)
    _cd.encode_columns(atoms, X, Z, float(lam), float(tol), int(max_sweeps), sweeps)
    failed = int(np.sum(sweeps < 0))
    if failed:
        logger.warning("%d of %d columns did not converge in %d sweeps",
                       failed, X.shape[1], max_sweeps)
    return (Z, sweeps) if return_sweeps else Z


def max_pool(codes, grouping, mode="absmax"):
    """Reduce patch codes to one vector per subject.

    ``absmax`` keeps, per coordinate, the value of largest magnitude (sign
    preserved, earliest patch on ties); ``signedmax`` keeps the plain maximum.
    """
    if mode not in POOL_MODES:
        raise ValueError(f"unknown pooling mode {mode!r}")
    codes = np.asarray(codes, dtype=np.float64)
    if codes.ndim != 2 or codes.shape[1] != grouping.patch_count:
        raise ValueError(f"{codes.shape[1] if codes.ndim == 2 else '?'} code columns "
                         f"for {grouping.patch_count} patches")
    owner = grouping.subject_index()
    out = np.empty((len(grouping.subjects), codes.shape[0]))
    for k in range(len(grouping.subjects)):
        block = codes[:, owner == k]
        if mode == "absmax":
            pick = np.argmax(np.abs(block), axis=1)
            out[k] = block[np.arange(block.shape[0]), pick]
        else:
            out[k] = block.max(axis=1)
    return SubjectFeatureTable(list(grouping.subjects), out)
