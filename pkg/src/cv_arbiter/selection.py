"""The selection engine: criterion, per-split evaluation, and the three
selection rules (single split, averaging, voting).

Within one plan every procedure sees exactly the same splits, and each
procedure is fitted once per split.  Ties always break toward the
lowest procedure index.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import AllProceduresFailed, CvArbiterError, NonFinitePrediction
from .estimators import FittedModel, ProcedureSpec, fit_procedure
from .scenarios import Sample
from .splits import SelectionScheme, SplitPlan, SplitSchedule, make_splits


def cv_criterion(model: FittedModel, eval_x: np.ndarray, eval_y: np.ndarray) -> float:
    """Sum of squared prediction errors on the evaluation points.

    Residuals at floating-point noise level (within 1e-12 of the data
    scale) count as an exact fit and return exactly 0, so competing
    perfect fits tie deterministically instead of being ranked by
    rounding noise.
    """
    eval_x = np.asarray(eval_x, dtype=float)
    eval_y = np.asarray(eval_y, dtype=float)
    if len(eval_x) < 1 or len(eval_x) != len(eval_y):
        raise ValueError("evaluation vectors must be nonempty and equal length")
    pred = model.predict(eval_x)
    if not np.all(np.isfinite(pred)):
        raise NonFinitePrediction(f"{model.label or 'model'} predicted non-finite values")
    resid = eval_y - pred
    if np.max(np.abs(resid)) <= 1e-12 * (1.0 + np.max(np.abs(eval_y))):
        return 0.0
    return float(np.sum(resid**2))


@dataclass(frozen=True)
class SelectionOutcome:
    """Result of one selection run.

    ``per_split_criteria`` is (splits x procedures); columns of
    disqualified procedures are NaN.  ``votes`` counts per-split wins
    (they sum to the split count) and ``averaged`` is the per-procedure
    mean criterion over splits.
    """

    selected: int
    per_split_criteria: np.ndarray
    votes: np.ndarray
    averaged: np.ndarray
    scheme_used: str
    schedule_used: str
    disqualified: dict[int, str] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "selected": self.selected,
            "votes": self.votes.tolist(),
            "averaged": [None if not np.isfinite(v) else v for v in self.averaged],
            "scheme": self.scheme_used,
            "schedule": self.schedule_used,
            "splits": len(self.per_split_criteria),
            "disqualified": {str(k): v for k, v in self.disqualified.items()},
        }


def _criteria_matrix(
    procedures: list[ProcedureSpec], sample: Sample, plan: SplitPlan
) -> tuple[np.ndarray, dict[int, str]]:
    """Fit every procedure on every split's estimation half and score it.

    A procedure that fails on any split is disqualified outright (its
    column becomes NaN); package errors disqualify, anything else
    propagates.
    """
    n_splits, n_procs = len(plan), len(procedures)
    crit = np.full((n_splits, n_procs), np.nan)
    disqualified: dict[int, str] = {}
    for j, spec in enumerate(procedures):
        try:
            for i, (est, ev) in enumerate(plan.splits):
                sub = Sample(x=sample.x[est], y=sample.y[est])
                model = fit_procedure(spec, sub)
                crit[i, j] = cv_criterion(model, sample.x[ev], sample.y[ev])
        except CvArbiterError as exc:
            crit[:, j] = np.nan
            disqualified[j] = f"{type(exc).__name__}: {exc}"
    if len(disqualified) == n_procs:
        raise AllProceduresFailed(
            "; ".join(f"{procedures[j].id}: {msg}" for j, msg in disqualified.items())
        )
    return crit, disqualified


def _masked(values: np.ndarray) -> np.ndarray:
    return np.where(np.isnan(values), np.inf, values)


def tally_votes(crit: np.ndarray) -> np.ndarray:
    """Per-split winners (argmin, lowest index on ties), counted per column."""
    winners = np.argmin(_masked(crit), axis=1)
    return np.bincount(winners, minlength=crit.shape[1])


def averaged_criteria(crit: np.ndarray) -> np.ndarray:
    """Column means over splits; NaN columns stay NaN."""
    return crit.mean(axis=0)


def _outcome(crit, disqualified, selected, plan, schedule_id) -> SelectionOutcome:
    return SelectionOutcome(
        selected=int(selected),
        per_split_criteria=crit,
        votes=tally_votes(crit),
        averaged=averaged_criteria(crit),
        scheme_used=plan.scheme_id,
        schedule_used=schedule_id,
        disqualified=disqualified,
    )


def select_single(
    procedures: list[ProcedureSpec],
    sample: Sample,
    schedule: SplitSchedule,
    stream: np.random.Generator,
) -> SelectionOutcome:
    """Fit on one split's estimation half, select the criterion argmin."""
    plan = make_splits(sample.n, schedule, SelectionScheme("single", "single"), stream)
    crit, dq = _criteria_matrix(procedures, sample, plan)
    return _outcome(crit, dq, np.argmin(_masked(crit[0])), plan, schedule.id)


def select_averaging(
    procedures: list[ProcedureSpec], sample: Sample, plan: SplitPlan,
    schedule_id: str = "",
) -> SelectionOutcome:
    """Average the criterion over all splits, then select the argmin.

    The mean is over splits, unweighted, even when k-fold evaluation
    sizes differ by one.
    """
    if len(plan) < 1:
        raise ValueError("plan must contain at least one split")
    crit, dq = _criteria_matrix(procedures, sample, plan)
    return _outcome(crit, dq, np.argmin(_masked(averaged_criteria(crit))), plan, schedule_id)


def select_voting(
    procedures: list[ProcedureSpec], sample: Sample, plan: SplitPlan,
    schedule_id: str = "",
) -> SelectionOutcome:
    """Pick each split's winner, then select the plurality winner.

    Vote ties resolve toward the lowest procedure index, the
    two-candidate rule being: procedure 0 wins when it wins at least
    half the splits.
    """
    if len(plan) < 1:
        raise ValueError("plan must contain at least one split")
    crit, dq = _criteria_matrix(procedures, sample, plan)
    votes = tally_votes(crit)
    return _outcome(crit, dq, np.argmax(votes), plan, schedule_id)


def run_selection(
    procedures: list[ProcedureSpec],
    sample: Sample,
    schedule: SplitSchedule,
    scheme: SelectionScheme,
    stream: np.random.Generator,
) -> SelectionOutcome:
    """Generate splits for the scheme and run the matching selector."""
    if scheme.aggregate == "single":
        return select_single(procedures, sample, schedule, stream)
    plan = make_splits(sample.n, schedule, scheme, stream)
    if scheme.aggregate == "average":
        return select_averaging(procedures, sample, plan, schedule.id)
    return select_voting(procedures, sample, plan, schedule.id)
