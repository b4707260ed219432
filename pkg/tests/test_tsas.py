"""Search oracles: tau fixtures + brute force, group arithmetic, two-step search."""

import math

import numpy as np
import pytest

from gaiakit import tsas
from gaiakit.archspace import AR50, AR77, Architecture, Grid, SubSpace
from gaiakit.costmodel import latency_fit, total_gflops
from gaiakit.errors import AllTied, NoFeasibleGroup, SamplingExhausted
from gaiakit.evaluator import EvalResult, Fidelity, SimulatedEvaluator, SimulatorConfig, latent_quality

from refdata import PUBLISHED_ROWS, arch_of


def brute_force_tau(pairs):
    """Literal double loop; the independent oracle for kendall_tau."""
    n = len(pairs)
    conc = disc = tx = ty = 0
    for i in range(n):
        for j in range(i + 1, n):
            dx = (pairs[i][0] > pairs[j][0]) - (pairs[i][0] < pairs[j][0])
            dy = (pairs[i][1] > pairs[j][1]) - (pairs[i][1] < pairs[j][1])
            if dx == 0:
                tx += 1
            if dy == 0:
                ty += 1
            if dx * dy > 0:
                conc += 1
            elif dx * dy < 0:
                disc += 1
    n0 = n * (n - 1) // 2
    denom = math.sqrt((n0 - tx) * (n0 - ty))
    if denom == 0:
        raise ZeroDivisionError
    return (conc - disc) / denom


def test_tau_fixtures():
    assert tsas.kendall_tau([(1, 1), (2, 2), (3, 3)]) == 1.0
    assert tsas.kendall_tau([(1, 3), (2, 2), (3, 1)]) == -1.0
    assert tsas.kendall_tau([(1, 2), (2, 1), (3, 4), (4, 3), (5, 5)]) == pytest.approx(0.6)
    with pytest.raises(AllTied):
        tsas.kendall_tau([(1, 5), (1, 7), (1, 2)])
    with pytest.raises(ValueError):
        tsas.kendall_tau([(1, 1)])


def test_tau_matches_brute_force_on_random_lists():
    rng = np.random.default_rng(42)
    for trial in range(30):
        n = int(rng.integers(2, 40))
        # small integer range forces plenty of ties
        pairs = [(int(a), int(b)) for a, b in rng.integers(0, 6, size=(n, 2))]
        try:
            expected = brute_force_tau(pairs)
        except ZeroDivisionError:
            with pytest.raises(AllTied):
                tsas.kendall_tau(pairs)
            continue
        assert abs(tsas.kendall_tau(pairs) - expected) <= 1e-12


def test_constraint_components():
    arch = arch_of(PUBLISHED_ROWS[0])  # 131.5 GFLOPs at our counting
    g = total_gflops(arch)
    assert tsas.Constraint().satisfied(arch)
    assert tsas.Constraint(flops=(g - 1, g + 1)).satisfied(arch)
    assert not tsas.Constraint(flops=(0.0, g)).satisfied(arch)  # half-open top
    assert tsas.Constraint(scale=(800, 800)).satisfied(arch)
    assert not tsas.Constraint(scale=(400, 720)).satisfied(arch)
    assert tsas.Constraint(member_of=AR50).satisfied(AR50.anchor)
    assert not tsas.Constraint(member_of=AR77).satisfied(AR50.anchor)
    model = latency_fit([(arch_of(r), r[5]) for r in PUBLISHED_ROWS])
    tight = tsas.Constraint(latency=(model, 20.0))
    loose = tsas.Constraint(latency=(model, 60.0))
    assert loose.satisfied(arch) and not tight.satisfied(arch)


def test_search_config_validation():
    with pytest.raises(ValueError):
        tsas.SearchConfig(k=0)
    with pytest.raises(ValueError):
        tsas.SearchConfig(keep=0.0)
    with pytest.raises(ValueError):
        tsas.SearchConfig(keep=1.2)
    with pytest.raises(ValueError):
        tsas.SearchConfig(k=10, attempt_cap=5)


def test_feasible_groups_counts():
    assert len(tsas.feasible_groups(AR50)) == 65  # 5 scales x totals 10..22
    only_560 = tsas.feasible_groups(AR50, tsas.Constraint(scale=(560, 560)))
    assert len(only_560) == 13
    assert all(k.scale == 560 for k in only_560)
    with pytest.raises(NoFeasibleGroup):
        tsas.feasible_groups(AR50, tsas.Constraint(flops=(0.0, 0.001)))


def test_feasible_groups_exhaustive_on_tiny_groups():
    # single-member groups: the needle must be found without luck
    tiny = SubSpace(
        "tiny",
        (Grid(2, 2, 1),) * 4,
        (Grid(32, 32, 16), Grid(48, 48, 16), Grid(96, 96, 32),
         Grid(192, 192, 64), Grid(384, 384, 128)),
        Grid(400, 480, 80),
        Architecture((2, 2, 2, 2), (32, 48, 96, 192, 384), 400),
    )
    member = Architecture((2, 2, 2, 2), (32, 48, 96, 192, 384), 480)
    g = total_gflops(member)
    keys = tsas.feasible_groups(tiny, tsas.Constraint(flops=(g - 1e-9, g + 1e-9)))
    assert keys == frozenset({tsas.GroupKey(480, 8)})


class _FlopsEvaluator:
    """Metric = GFLOPs: noiseless and strictly monotone in cost."""

    def evaluate(self, req):
        return EvalResult(req.id, total_gflops(req.arch), "gflops", 0.0, "simulated")


def _noiseless():
    return SimulatedEvaluator(SimulatorConfig.noiseless(), study_seed=0)


def test_two_step_counts_and_budget():
    _, trace = tsas.two_step_search(AR50, tsas.Constraint(), _noiseless())
    assert trace.direct_evals == 65 * 5 == 325
    assert trace.fast_evals == math.ceil(0.5 * 65) == 33
    assert len(trace.shortlist) == 33
    assert trace.budget_units == pytest.approx(325 * 0.01 + 33 * 0.2)
    assert all(len(g.samples) == 5 for g in trace.groups)


def test_two_step_noiseless_winner_is_trace_argmax():
    winner, trace = tsas.two_step_search(AR50, tsas.Constraint(), _noiseless(), jobs=1)
    pool = [a for g in trace.groups for a, _ in g.samples]
    oracle = min(pool, key=lambda a: (-latent_quality(a), total_gflops(a), a.key))
    assert winner == oracle
    assert any(e.arch == winner for e in trace.shortlist)


def test_two_step_deterministic_and_parallel_identical():
    cfg = tsas.SearchConfig(seed=7)
    con = tsas.Constraint(flops=(40.0, 120.0))
    r1 = tsas.two_step_search(AR50, con, _noiseless(), cfg)
    r2 = tsas.two_step_search(AR50, con, _noiseless(), cfg)
    r3 = tsas.two_step_search(AR50, con, _noiseless(), cfg, jobs=4)
    assert r1 == r2 == r3
    different = tsas.two_step_search(AR50, con, _noiseless(), tsas.SearchConfig(seed=8))
    assert different[1].groups != r1[1].groups  # fresh seed, fresh samples


def test_two_step_trace_archs_satisfy_everything():
    con = tsas.Constraint(flops=(40.0, 90.0), scale=(400, 560))
    _, trace = tsas.two_step_search(AR50, con, _noiseless())
    for g in trace.groups:
        for arch, _ in g.samples:
            assert con.satisfied(arch)
            assert AR50.contains(arch)
            assert arch.scale == g.key.scale
            assert arch.total_depth == g.key.total_depth


def test_monotone_evaluator_optimality_under_flops_cap():
    con = tsas.Constraint(flops=(0.0, 100.0))
    winner, trace = tsas.two_step_search(AR50, con, _FlopsEvaluator())
    flops = [total_gflops(a) for g in trace.groups for a, _ in g.samples]
    assert total_gflops(winner) == max(flops)
    assert max(flops) < 100.0


def test_two_step_pools_multiple_spaces():
    _, trace = tsas.two_step_search(
        [AR50, AR77], tsas.Constraint(), _noiseless(), tsas.SearchConfig(k=2))
    names = {g.space for g in trace.groups}
    assert names == {"ar50", "ar77"}
    assert len(trace.groups) == 65 + 85  # AR77: 5 scales x totals 17..33
    assert trace.direct_evals == 150 * 2
    assert trace.fast_evals == math.ceil(0.5 * 150)


def test_single_member_group_contributes_what_it_found():
    tiny = SubSpace(
        "one",
        (Grid(2, 2, 1),) * 4,
        (Grid(32, 32, 16), Grid(48, 48, 16), Grid(96, 96, 32),
         Grid(192, 192, 64), Grid(384, 384, 128)),
        Grid(400, 400, 80),
        Architecture((2, 2, 2, 2), (32, 48, 96, 192, 384), 400),
    )
    winner, trace = tsas.two_step_search(tiny, tsas.Constraint(), _noiseless())
    assert winner == tiny.anchor
    assert trace.direct_evals == 1 and trace.fast_evals == 1


def test_sample_group_exhaustion_raises():
    rng = np.random.default_rng(0)
    with pytest.raises(SamplingExhausted):
        tsas.sample_group(
            AR50, tsas.GroupKey(400, 10), tsas.Constraint(flops=(0.0, 0.001)),
            k=5, rng=rng, attempt_cap=50)


def test_trace_serialization_is_deterministic():
    _, trace = tsas.two_step_search(
        AR50, tsas.Constraint(scale=(400, 400)), _noiseless())
    lines = trace.to_lines()
    assert lines == trace.to_lines()
    assert lines[-2].startswith("winner\t")
    assert lines[-1].startswith("budget\tdirect=")
    assert sum(1 for l in lines if l.startswith("direct\t")) == trace.direct_evals
    assert sum(1 for l in lines if l.startswith("fast\t")) == trace.fast_evals


def test_ranking_study_noiseless_gives_perfect_tau():
    rep = tsas.ranking_study(
        lambda seed: SimulatedEvaluator(SimulatorConfig.noiseless(), seed),
        AR50, n_models=12, seeds=(0, 1))
    for fid in (Fidelity.DIRECT, Fidelity.FAST):
        assert rep.taus[fid] == (1.0, 1.0)
        assert rep.mean_tau(fid) == 1.0
    assert len(rep.rows) == 24
    assert len(rep.scatter_points(Fidelity.FAST)) == 24
    csv = rep.to_csv_lines()
    assert csv[0] == "seed,arch,full,direct,fast"
    assert len(csv) == 25


def test_ranking_study_accepts_fixed_evaluator_and_validates():
    rep = tsas.ranking_study(SimulatedEvaluator(study_seed=3), AR50, 10, seeds=(5,))
    assert set(rep.taus) == {Fidelity.DIRECT, Fidelity.FAST}
    assert all(-1.0 <= t <= 1.0 for ts in rep.taus.values() for t in ts)
    with pytest.raises(ValueError):
        tsas.ranking_study(SimulatedEvaluator(), AR50, 5)
    with pytest.raises(ValueError):
        tsas.ranking_study(SimulatedEvaluator(), AR50, 10, seeds=())
