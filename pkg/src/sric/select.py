"""Model families and criterion-based selection.

A model family is an ordered list of candidates, each the in-sample optimum
over some subspace of portfolio weights. Selection picks the candidate with
the highest sric (or the lowest aic) at the family's common horizon. Ties
break toward the smaller parameter count, then the smaller index: when two
models explain the data equally well, prefer the parsimonious one.

The k convention propagates from the estimators module: a candidate spanned
by d basis vectors has k = d - 1 Sharpe-relevant parameters. That asymmetry
against the aic penalty 2(k+1) is deliberate and load-bearing.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import SampleEstimate
from .errors import DomainError, EmptyFamilyError
from .estimators import Criterion, aic, sric
from .mvopt import max_insample_sharpe_subspace


@dataclass(frozen=True, eq=False)
class ModelCandidate:
    """One fitted model: its label, in-sample Sharpe, parameter count, and weights."""

    label: str
    rho_hat: float
    k: int
    theta_hat: np.ndarray
    basis_dim: int

    def __post_init__(self):
        if self.rho_hat < 0:
            raise DomainError(f"rho_hat must be >= 0, got {self.rho_hat}")
        if self.basis_dim < 1:
            raise DomainError(f"basis_dim must be positive, got {self.basis_dim}")


@dataclass(frozen=True)
class SelectionResult:
    """Outcome of one selection: chosen index, scores, and tie diagnostics."""

    chosen_index: int
    criterion: Criterion
    criterion_values: tuple[float, ...]
    tie_broken: bool


def build_nested_family(est: SampleEstimate, bases) -> list[ModelCandidate]:
    """Fit one candidate per basis; k = (number of columns) - 1.

    bases is an ordered list of column-vector matrices, typically nested
    coordinate prefixes. Rank errors from degenerate bases propagate.
    """
    candidates = []
    for i, basis in enumerate(bases):
        b = np.asarray(basis, dtype=float)
        if b.ndim == 1:
            b = b[:, None]
        theta_hat, rho_hat = max_insample_sharpe_subspace(est, b)
        d = b.shape[1]
        candidates.append(
            ModelCandidate(
                label=f"model-{i + 1}",
                rho_hat=rho_hat,
                k=d - 1,
                theta_hat=theta_hat,
                basis_dim=d,
            )
        )
    return candidates


def select(candidates, criterion: Criterion, horizon_years: float) -> SelectionResult:
    """Pick the best candidate: argmax of sric or argmin of aic.

    Ties break toward smaller k, then smaller index. Sentinel-valued
    candidates (sric at zero Sharpe with k > 0) lose to any finite value.
    """
    candidates = list(candidates)
    if not candidates:
        raise EmptyFamilyError("cannot select from an empty candidate list")
    if criterion is Criterion.SRIC:
        scores = [sric(c.rho_hat, c.k, horizon_years) for c in candidates]
        keyed = scores
    elif criterion is Criterion.AIC:
        scores = [aic(c.rho_hat, c.k, horizon_years) for c in candidates]
        keyed = [-s for s in scores]
    else:
        raise DomainError(f"selection supports SRIC and AIC, got {criterion!r}")

    best = 0
    for i in range(1, len(candidates)):
        if keyed[i] > keyed[best]:
            best = i
        elif keyed[i] == keyed[best] and candidates[i].k < candidates[best].k:
            best = i
    tie_broken = any(
        keyed[i] == keyed[best] for i in range(len(candidates)) if i != best
    )
    return SelectionResult(
        chosen_index=best,
        criterion=criterion,
        criterion_values=tuple(scores),
        tie_broken=tie_broken,
    )
