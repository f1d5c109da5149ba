"""Rebalance a training set to equal grant rates and correct biased labels.

Favored-granted (FG) and deprived-rejected (DR) rows are undersampled until
both groups are granted at the same rate, removing the rows with the highest
counterfactual bias first and keeping the favored/deprived size ratio.
Counterfactually unfair FR and DG rows are then dropped and refilled: DG from
removed DR rows whose prediction flips with the sensitive value (relabelled as
granted), topped up by synthesis; FR purely by synthesis.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, replace
from fractions import Fraction
from typing import Callable

import numpy as np

from .cblist import CBList
from .dataset import Dataset, partition
from .errors import InfeasibleRebalanceError, SynthesisError, ValidationError
from .synth import SynthConfig, synthesize

log = logging.getLogger(__name__)

BIAS_THRESHOLD = 1.0


@dataclass(frozen=True)
class RemovalPlan:
    fg_remove: int
    dr_remove: int
    counts_before: tuple[int, int, int, int]  # (FG, FR, DG, DR)

    @property
    def gap(self) -> Fraction:
        fg, fr, dg, dr = self.counts_before
        return grant_gap(fg, fr, dg, dr, self.fg_remove, self.dr_remove)


@dataclass(frozen=True)
class DebiasReport:
    removal_plan: RemovalPlan | None
    fr_removed: int
    dg_removed: int
    dr_flipped_to_dg: int
    synthesized_dg: int
    synthesized_fr: int
    final_counts: tuple[int, int, int, int]  # (FG, FR, DG, DR)

    def to_dict(self) -> dict:
        out = asdict(self)
        if self.removal_plan is not None:
            out["removal_plan"]["gap"] = float(self.removal_plan.gap)
        return out


def grant_gap(fg, fr, dg, dr, a=0, b=0) -> Fraction:
    """Exact |P(grant | favored) - P(grant | deprived)| after removing a FG and b DR rows."""
    fav = Fraction(fg - a, fg + fr - a)
    dep = Fraction(dg, dg + dr - b)
    return abs(fav - dep)


def _quadratic_roots(fg, fr, dg, dr) -> tuple[float, ...]:
    # substitute a = r x into the equal-rate condition and solve for x
    r = (fg + fr) / (dg + dr)
    qa = r
    qb = -(fg + r * dr)
    qc = fg * dr - dg * fr
    disc = qb * qb - 4 * qa * qc
    if disc < 0:
        # a double root can land a few ulps below zero
        if disc < -1e-12 * qb * qb:
            return ()
        disc = 0.0
    sq = math.sqrt(disc)
    # numerically stable pair
    q = -0.5 * (qb + math.copysign(sq, qb))
    roots = {q / qa}
    if q != 0:
        roots.add(qc / q)
    return tuple(sorted(roots))


def compute_removals(fg: int, fr: int, dg: int, dr: int) -> RemovalPlan:
    """How many FG and DR rows to drop so that both groups share one grant rate.

    The favored/deprived size ratio is preserved up to integer rounding: the
    FG count removed is within half a row of ``ratio * DR count removed``.
    """
    counts = (fg, fr, dg, dr)
    if min(counts) < 0:
        raise ValidationError(f"subgroup counts must be non-negative, got {counts}")
    nf, nd = fg + fr, dg + dr
    if nf < 1 or nd < 1:
        raise ValidationError(f"both groups need at least one row, got {counts}")
    if Fraction(fg, nf) <= Fraction(dg, nd):
        if Fraction(fg, nf) < Fraction(dg, nd):
            log.warning("deprived grant rate exceeds favored rate %s; nothing removed", counts)
        return RemovalPlan(0, 0, counts)

    roots = _quadratic_roots(*counts)
    r = nf / nd
    eps = 1e-9 * max(1, nf, nd)
    # a root that empties either group is no plan at all
    feasible = [x for x in roots if -eps <= x <= dr + eps and -eps <= r * x <= fg + eps
                and x < nd - eps and r * x < nf - eps]
    if not feasible:
        raise InfeasibleRebalanceError(
            f"no removal count in [0, {dr}] equalizes grant rates for {counts}; roots {roots}", roots)
    x = min(feasible)

    best = None
    for rounding in (_a_low, _a_high):
        for b, a in _crossing_candidates(counts, rounding, x):
            key = (grant_gap(fg, fr, dg, dr, a, b), abs(a * nd - b * nf), a + b, a)
            if best is None or key < best[0]:
                best = (key, a, b)
    _, a, b = best
    return RemovalPlan(a, b, counts)


def _a_low(b, nf, nd):
    # smallest a with |a nd - b nf| <= nd / 2
    return -((-(2 * b * nf - nd)) // (2 * nd))


def _a_high(b, nf, nd):
    return (2 * b * nf + nd) // (2 * nd)


def _crossing_candidates(counts, rounding, x):
    """Integer plans around the sign change of the (monotone) rate difference.

    Along one rounding branch, a(b) is non-decreasing in b, so the favored rate
    falls and the deprived rate rises as b grows; the best |difference| sits at
    the sign change, possibly spread over a plateau of equal values.
    """
    fg, fr, dg, dr = counts
    nf, nd = fg + fr, dg + dr

    def feasible(b):
        if b < 0 or b > dr or b >= nd:
            return False
        a = rounding(b, nf, nd)
        return 0 <= a <= fg and a < nf

    def diff(b):
        a = rounding(b, nf, nd)
        return Fraction(fg - a, nf - a) - Fraction(dg, nd - b)

    if not feasible(0):
        return []
    b = min(max(int(round(x)), 0), dr)
    while b > 0 and not feasible(b):
        b -= 1
    if diff(b) >= 0:
        while feasible(b + 1) and diff(b + 1) >= 0:
            b += 1
    else:
        while b > 0 and diff(b) < 0:
            b -= 1
    # b is the last non-negative point; b + 1 (if feasible) the first negative one
    out = []
    top = diff(b)
    lo = b
    while lo > 0 and diff(lo - 1) == top:
        lo -= 1
    out.extend(range(lo, b + 1))
    if feasible(b + 1):
        bottom = diff(b + 1)
        hi = b + 1
        while feasible(hi + 1) and diff(hi + 1) == bottom:
            hi += 1
        out.extend(range(b + 1, hi + 1))
    return [(bb, rounding(bb, nf, nd)) for bb in out]


def subgroup_counts(d: Dataset, s: str | None = None) -> tuple[int, int, int, int]:
    """(FG, FR, DG, DR) sizes."""
    n_dr, n_dg, n_fr, n_fg = partition(d, s).counts
    return n_fg, n_fr, n_dg, n_dr


def _ranked_ids(cblist: CBList, ids: np.ndarray) -> list[int]:
    wanted = set(int(i) for i in ids)
    return [e.row_id for e in cblist.entries if e.row_id in wanted]


def rebalance(train: Dataset, cblist: CBList, plan: RemovalPlan, s: str | None = None):
    """Drop the top-ranked FG and DR rows. Returns (dataset, removed_dr, removed_fg)."""
    part = partition(train, s)
    if plan.fg_remove > len(part.fg) or plan.dr_remove > len(part.dr):
        raise ValidationError(
            f"plan removes ({plan.fg_remove}, {plan.dr_remove}) but FG/DR hold ({len(part.fg)}, {len(part.dr)})")
    fg_ids = _ranked_ids(cblist, train.row_ids[part.fg])[:plan.fg_remove]
    dr_ids = _ranked_ids(cblist, train.row_ids[part.dr])[:plan.dr_remove]
    if len(fg_ids) < plan.fg_remove or len(dr_ids) < plan.dr_remove:
        raise ValidationError("bias list does not cover every training row")
    removed_fg = train.take(np.flatnonzero(np.isin(train.row_ids, fg_ids)))
    removed_dr = train.take(np.flatnonzero(np.isin(train.row_ids, dr_ids)))
    return train.drop_ids(fg_ids + dr_ids), removed_dr, removed_fg


def correct_labels(rebalanced: Dataset, cblist: CBList, removed_dr: Dataset,
                   synth_cfg: SynthConfig = SynthConfig(), s: str | None = None,
                   synthesizer: Callable[..., Dataset] = synthesize):
    """Replace counterfactually unfair FR/DG rows. Returns (dataset, report)."""
    scores = cblist.by_id()
    missing = [int(i) for i in np.concatenate([rebalanced.row_ids, removed_dr.row_ids]) if int(i) not in scores]
    if missing:
        raise ValidationError(f"bias list lacks {len(missing)} row(s), e.g. row_id {missing[0]}")
    part = partition(rebalanced, s)
    cb = np.array([scores[int(i)].cbtest for i in rebalanced.row_ids])
    fr_bad = part.fr[cb[part.fr] > BIAS_THRESHOLD]
    dg_bad = part.dg[cb[part.dg] > BIAS_THRESHOLD]
    kept = rebalanced.take(np.setdiff1d(np.arange(rebalanced.n), np.concatenate([fr_bad, dg_bad])))

    # strongest-evidence flips first; surplus candidates stay removed
    candidates = [i for i in _ranked_ids(cblist, removed_dr.row_ids) if scores[i].cftest == 1]
    chosen = candidates[:len(dg_bad)]
    flipped = removed_dr.take(np.flatnonzero(np.isin(removed_dr.row_ids, chosen)))
    flipped = flipped.with_labels(np.ones(flipped.n, dtype=np.int64))

    next_id = max(int(cblist_max_id(cblist)), rebalanced.next_row_id() - 1, removed_dr.next_row_id() - 1) + 1
    kept_part = partition(kept, s)
    n_dg = len(dg_bad) - flipped.n
    n_fr = len(fr_bad)
    try:
        dg_pool = kept.take(kept_part.dg).concat(flipped)
        syn_dg = synthesizer(dg_pool, n_dg, replace(synth_cfg, seed=2 * synth_cfg.seed), next_id, s)
        syn_fr = synthesizer(kept.take(kept_part.fr), n_fr,
                             replace(synth_cfg, seed=2 * synth_cfg.seed + 1), next_id + n_dg, s)
    except SynthesisError as exc:
        raise SynthesisError(f"label correction refill failed: {exc}") from exc

    out = kept.concat(flipped, syn_dg, syn_fr)
    report = DebiasReport(
        removal_plan=None,
        fr_removed=len(fr_bad),
        dg_removed=len(dg_bad),
        dr_flipped_to_dg=flipped.n,
        synthesized_dg=syn_dg.n,
        synthesized_fr=syn_fr.n,
        final_counts=subgroup_counts(out, s),
    )
    return out, report


def cblist_max_id(cblist: CBList) -> int:
    return max((e.row_id for e in cblist.entries), default=-1)


def debias(train: Dataset, cblist: CBList, s: str | None = None,
           synth_cfg: SynthConfig = SynthConfig()):
    """Full rebalance + label correction. Returns (dataset, report)."""
    plan = compute_removals(*subgroup_counts(train, s))
    rebalanced, removed_dr, _ = rebalance(train, cblist, plan, s)
    out, report = correct_labels(rebalanced, cblist, removed_dr, synth_cfg, s)
    return out, replace(report, removal_plan=plan)
