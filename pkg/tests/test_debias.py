import logging
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cfsa.cblist import BiasScore, CBList, build_cblist
from cfsa.classifier import TrainConfig
from cfsa.debias import (compute_removals, correct_labels, debias, grant_gap, rebalance,
                         subgroup_counts)
from cfsa.errors import InfeasibleRebalanceError, SynthesisError
from cfsa.fixtures import FixtureSpec, gen_biased, oracle_removals
from cfsa.synth import SynthConfig

from conftest import toy_dataset

counts = st.integers(0, 400)


def handmade(groups, cbtests, cftests=None, seed=0):
    """Dataset with the given subgroup per row plus a hand-written bias list."""
    rng = np.random.default_rng(seed)
    n = len(groups)
    s = np.array([1.0 if g[0] == "F" else 0.0 for g in groups])
    y = np.array([1 if g[1] == "G" else 0 for g in groups])
    d = toy_dataset(np.column_stack([rng.random((n, 2)), s]), y)
    cftests = cftests or [int(c > 1) for c in cbtests]
    entries = [BiasScore(i, cftests[i], cbtests[i] - cftests[i], cbtests[i], groups[i]) for i in range(n)]
    entries.sort(key=lambda e: (-e.cbtest, e.row_id))
    return d, CBList(tuple(entries), 5, 0)


class TestComputeRemovals:
    def test_worked_example(self):
        plan = compute_removals(200, 300, 50, 450)
        assert (plan.fg_remove, plan.dr_remove) == (150, 150)
        assert Fraction(200 - 150, 500 - 150) == Fraction(50, 500 - 150) == Fraction(1, 7)
        assert plan.gap == 0

    def test_balanced(self):
        assert (compute_removals(100, 100, 50, 50).fg_remove, compute_removals(100, 100, 50, 50).dr_remove) == (0, 0)

    def test_inverted_rates_give_zero_plan(self, caplog):
        with caplog.at_level(logging.WARNING):
            plan = compute_removals(10, 90, 60, 40)
        assert (plan.fg_remove, plan.dr_remove) == (0, 0)
        assert "exceeds" in caplog.text

    def test_infeasible_reports_roots(self):
        # every favored row granted, no deprived row granted: only emptying a group equalizes
        with pytest.raises(InfeasibleRebalanceError) as info:
            compute_removals(11, 0, 0, 5)
        assert info.value.roots == pytest.approx((5.0,))

    def test_random_tuples_match_oracle(self):
        rng = np.random.default_rng(2024)
        checked = 0
        while checked < 100:
            fg, fr, dg, dr = (int(v) for v in rng.integers(0, 2000, 4))
            if fg + fr == 0 or dg + dr == 0:
                continue
            plan = compute_removals(fg, fr, dg, dr)
            a, b = oracle_removals(fg, fr, dg, dr)
            assert plan.gap == grant_gap(fg, fr, dg, dr, a, b)
            checked += 1

    @settings(max_examples=200, deadline=None)
    @given(fg=counts, fr=counts, dg=counts, dr=counts)
    def test_plan_invariants(self, fg, fr, dg, dr):
        if fg + fr == 0 or dg + dr == 0:
            return
        try:
            plan = compute_removals(fg, fr, dg, dr)
        except InfeasibleRebalanceError:
            a, b = oracle_removals(fg, fr, dg, dr)
            assert grant_gap(fg, fr, dg, dr, a, b) == grant_gap(fg, fr, dg, dr)
            return
        nf, nd = fg + fr, dg + dr
        assert 0 <= plan.fg_remove <= fg and 0 <= plan.dr_remove <= dr
        assert plan.gap <= grant_gap(fg, fr, dg, dr)
        # favored/deprived ratio kept within half a row
        assert abs(2 * plan.fg_remove * nd - 2 * plan.dr_remove * nf) <= nd
        a, b = oracle_removals(fg, fr, dg, dr)
        assert plan.gap <= grant_gap(fg, fr, dg, dr, a, b) + Fraction(1, 10**12)


class TestRebalance:
    def test_zero_plan_identity(self):
        d, cb = handmade(["FG", "FR", "DG", "DR"], [0.1, 0.2, 0.3, 0.4])
        plan = compute_removals(*subgroup_counts(d))
        out, removed_dr, removed_fg = rebalance(d, cb, type(plan)(0, 0, plan.counts_before))
        np.testing.assert_array_equal(out.row_ids, d.row_ids)
        assert removed_dr.n == removed_fg.n == 0

    def test_top_ranked_fg_removed(self):
        d, cb = handmade(["FG", "FG", "FG", "DR"], [1.4, 0.9, 0.2, 0.0])
        plan = type(compute_removals(1, 1, 1, 1))(1, 0, (3, 0, 0, 1))
        out, _, removed_fg = rebalance(d, cb, plan)
        assert removed_fg.row_ids.tolist() == [0]
        assert sorted(out.row_ids.tolist()) == [1, 2, 3]

    def test_removal_counts_restore_equal_rates(self):
        rng = np.random.default_rng(5)
        groups = ["FG"] * 200 + ["FR"] * 300 + ["DG"] * 50 + ["DR"] * 450
        d, cb = handmade(groups, list(rng.random(1000) * 2))
        plan = compute_removals(*subgroup_counts(d))
        out, removed_dr, removed_fg = rebalance(d, cb, plan)
        fg, fr, dg, dr = subgroup_counts(out)
        assert (fg, fr, dg, dr) == (50, 300, 50, 300)
        assert Fraction(fg, fg + fr) == Fraction(dg, dg + dr)
        # monotone removal within each subgroup
        score = cb.by_id()
        kept_fg = [score[i].cbtest for i in out.row_ids if score[i].subgroup == "FG"]
        assert min(score[i].cbtest for i in removed_fg.row_ids) >= max(kept_fg)
        kept_dr = [score[i].cbtest for i in out.row_ids if score[i].subgroup == "DR"]
        assert min(score[i].cbtest for i in removed_dr.row_ids) >= max(kept_dr)


def correction_case(dg_bad, flip_candidates, extra_dg=6, extra_fr=6):
    groups, scores, flips = [], [], []
    for _ in range(dg_bad):
        groups.append("DG"); scores.append(1.5); flips.append(1)
    for _ in range(extra_dg):
        groups.append("DG"); scores.append(0.2); flips.append(0)
    for _ in range(extra_fr):
        groups.append("FR"); scores.append(0.1); flips.append(0)
    groups += ["FG"] * 6; scores += [0.3] * 6; flips += [0] * 6
    n_keep = len(groups)
    for k in range(flip_candidates):
        groups.append("DR"); scores.append(1.9 - 0.1 * k); flips.append(1)
    groups += ["DR"] * 2; scores += [0.4, 0.3]; flips += [0, 0]
    d, cb = handmade(groups, scores, flips)
    kept = d.take(np.arange(n_keep))
    removed_dr = d.take(np.arange(n_keep, d.n))
    return kept, cb, removed_dr


class TestCorrectLabels:
    def test_nothing_unfair(self):
        d, cb = handmade(["FG", "FR", "DG", "DR", "DG", "FR"], [0.5, 0.2, 0.9, 0.1, 0.3, 1.0])
        out, rep = correct_labels(d, cb, d.take(np.empty(0, dtype=int)))
        np.testing.assert_array_equal(out.row_ids, d.row_ids)
        assert rep.synthesized_dg == rep.synthesized_fr == rep.dr_flipped_to_dg == 0

    def test_flips_capped_by_removed_dg(self):
        kept, cb, removed_dr = correction_case(dg_bad=3, flip_candidates=5)
        out, rep = correct_labels(kept, cb, removed_dr)
        assert (rep.dg_removed, rep.dr_flipped_to_dg, rep.synthesized_dg) == (3, 3, 0)
        score = cb.by_id()
        flipped = [i for i in out.row_ids if i in set(removed_dr.row_ids.tolist())]
        # strongest evidence first
        assert sorted(score[i].cbtest for i in flipped) == pytest.approx([1.7, 1.8, 1.9])
        for i in flipped:
            row = np.flatnonzero(out.row_ids == i)[0]
            src = np.flatnonzero(removed_dr.row_ids == i)[0]
            assert out.labels[row] == 1
            np.testing.assert_array_equal(out.features[row], removed_dr.features[src])

    def test_shortfall_synthesized(self):
        kept, cb, removed_dr = correction_case(dg_bad=4, flip_candidates=1)
        before = subgroup_counts(kept)
        out, rep = correct_labels(kept, cb, removed_dr, SynthConfig(seed=3))
        assert (rep.dr_flipped_to_dg, rep.synthesized_dg) == (1, 3)
        assert subgroup_counts(out)[2] == before[2]
        assert out.synthetic.sum() == 3
        assert len(set(out.row_ids.tolist())) == out.n

    def test_fr_replaced_by_synthesis(self):
        groups = ["FR"] * 8 + ["FG"] * 4 + ["DG"] * 4 + ["DR"] * 4
        scores = [1.6, 1.2] + [0.1] * 18
        d, cb = handmade(groups, scores)
        out, rep = correct_labels(d, cb, d.take(np.empty(0, dtype=int)))
        assert rep.fr_removed == rep.synthesized_fr == 2
        assert subgroup_counts(out) == subgroup_counts(d)
        assert not set(out.row_ids.tolist()) & {0, 1}

    def test_synthesis_failure_has_context(self):
        groups = ["FR", "FG", "FG", "DG", "DR"]
        d, cb = handmade(groups, [1.5, 0.1, 0.1, 0.1, 0.1])
        with pytest.raises(SynthesisError, match="refill"):
            correct_labels(d, cb, d.take(np.empty(0, dtype=int)))


class TestDebiasPipeline:
    @pytest.mark.parametrize("seed", [7, 8])
    def test_wae_and_conservation(self, seed):
        data, _ = gen_biased(FixtureSpec(seed=seed))
        cb = build_cblist(data, "sex", 5, TrainConfig(seed=seed))
        out, rep = debias(data, cb, "sex", SynthConfig(seed=seed))
        fg, fr, dg, dr = rep.final_counts
        gap = abs(Fraction(fg, fg + fr) - Fraction(dg, dg + dr))
        assert gap <= Fraction(1, min(fg + fr, dg + dr))
        plan = rep.removal_plan
        expected = (data.n - plan.fg_remove - plan.dr_remove - rep.fr_removed - rep.dg_removed
                    + rep.dr_flipped_to_dg + rep.synthesized_fr + rep.synthesized_dg)
        assert out.n == expected
        assert rep.dr_flipped_to_dg + rep.synthesized_dg == rep.dg_removed
        assert rep.synthesized_fr == rep.fr_removed
        assert len(set(out.row_ids.tolist())) == out.n
        assert rep.to_dict()["removal_plan"]["gap"] == pytest.approx(float(plan.gap))
