import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import od_from
from odkanon.errors import InconsistentInputs
from odkanon.generalize import EXHAUSTED, REACHED_K, SparseGeneralizer, anonymize, other_axis, select_axis
from odkanon.hexgrid import SyntheticHierarchy
from odkanon.model import Mode, ODEntry, SparseOD
from odkanon.treebuild import DESTINATION, ORIGIN, build_tree

H = SyntheticHierarchy(3)
P = H.parse


def trees(od, h=H):
    return build_tree(od, h, ORIGIN), build_tree(od, h, DESTINATION)


def run(vols, k, h=H):
    od = od_from(vols, h)
    return anonymize(od, *trees(od, h), k)


def test_one_step_example():
    res = run({("R/0/1", "R/1/1"): 3, ("R/0/2", "R/1/1"): 4, ("R/0/1", "R/1/2"): 6}, 5, SyntheticHierarchy(2))
    assert res.terminated == REACHED_K and res.steps == 1
    assert {str(a): str(b) for a, b in res.origin_map.items()} == {"R/0/1": "R/0", "R/0/2": "R/0"}
    assert all(a == b for a, b in res.destination_map.items())
    assert {(str(o), str(d)): e.count for (o, d), e in res.matrix.entries.items()} == {
        ("R/0", "R/1/1"): 7,
        ("R/0", "R/1/2"): 6,
    }


def test_already_anonymous():
    res = run({("R/0/1/1", "R/1/1/1"): 5, ("R/0/1/2", "R/1/1/1"): 7}, 5)
    assert res.steps == 0 and res.terminated == REACHED_K
    assert all(a == b for a, b in res.origin_map.items())


def test_single_pair_exhausts():
    res = run({("R/0/1/1", "R/1/1/1"): 1}, 10)
    assert res.terminated == EXHAUSTED and res.min_volume == 1
    assert [(str(o), str(d), v) for o, d, v in res.below_k] == [("R/0/1/1", "R/1/1/1", 1)]


def test_select_axis_examples():
    assert select_axis(10, 10, 1.0, DESTINATION) == ORIGIN
    assert select_axis(10, 10, 1.0, ORIGIN) == DESTINATION
    assert select_axis(10, 10, 1.0, None) == ORIGIN
    assert select_axis(20, 10, 1.0, ORIGIN) == ORIGIN
    assert select_axis(10, 10, 2.0, DESTINATION) == DESTINATION
    # inside the band on both edges
    assert select_axis(103, 100, 1.0, ORIGIN) == DESTINATION
    assert select_axis(97, 100, 1.0, DESTINATION) == ORIGIN
    assert other_axis(ORIGIN) == DESTINATION


def gen_for(vols, k=100):
    od = od_from(vols, H)
    return SparseGeneralizer(od, *trees(od), k)


def test_best_group_minimum_cost():
    g = gen_for({("R/0/0/1", "R/5/0/0"): 3, ("R/0/0/2", "R/5/0/0"): 4, ("R/0/1/1", "R/5/0/0"): 2})
    parent, cost = g.best_group(ORIGIN)
    assert (str(parent), cost) == ("R/0/1", 2)


def test_best_group_tie_uses_canonical_order():
    g = gen_for({("R/0/3/1", "R/5/0/0"): 5, ("R/0/2/1", "R/5/0/0"): 5})
    assert str(g.best_group(ORIGIN)[0]) == "R/0/2"


def test_inconsistent_group_skipped():
    g = gen_for({("R/0/0/0", "R/5/0/0"): 1, ("R/0/0/1", "R/5/0/0"): 1, ("R/0/1/0", "R/5/0/0"): 9})
    g.apply_merge(ORIGIN, P("R/0/0"))
    # R/0 now holds live R/0/0 but R/0/1/0 still sits below it unmerged
    st = g.axes[ORIGIN]
    assert not st.consistent(P("R/0"))
    assert str(g.best_group(ORIGIN)[0]) == "R/0/1"
    g.apply_merge(ORIGIN, P("R/0/1"))
    assert str(g.best_group(ORIGIN)[0]) == "R/0"


def test_merge_sums_columns():
    g = gen_for({("R/0/0/1", "R/5/0/1"): 3, ("R/0/0/1", "R/5/0/2"): 6, ("R/0/0/2", "R/5/0/1"): 4})
    g.apply_merge(ORIGIN, P("R/0/0"))
    col = g.axes[ORIGIN].lines[P("R/0/0")]
    assert {str(d): v for d, v in col.items()} == {"R/5/0/1": 7, "R/5/0/2": 6}
    assert g.axes[DESTINATION].lines[P("R/5/0/1")] == {P("R/0/0"): 7}


def test_unary_merge_relabels():
    g = gen_for({("R/0/0/1", "R/5/0/1"): 3, ("R/0/1/1", "R/5/0/1"): 4})
    g.apply_merge(ORIGIN, P("R/0/0"))
    assert g.axes[ORIGIN].lines[P("R/0/0")] == {P("R/5/0/1"): 3}
    assert g.shape() == (2, 1)


def test_inconsistent_inputs():
    od = od_from({("R/0/0/1", "R/5/0/1"): 3}, H)
    other = od_from({("R/0/0/1", "R/5/0/1"): 4}, H)
    with pytest.raises(InconsistentInputs):
        anonymize(od, *trees(other), 2)


leaf = st.sampled_from([f"R/{a}/{b}/{c}" for a in (0, 1, 4) for b in (0, 2, 5) for c in range(7)])
matrices = st.dictionaries(st.tuples(leaf, leaf), st.integers(1, 5), min_size=1, max_size=40)


def antichain(zones):
    zs = list(zones)
    return not any(a != b and H.is_ancestor(a, b) for a in zs for b in zs)


@settings(max_examples=60, deadline=None)
@given(matrices, st.integers(2, 12))
def test_generalization_properties(vols, k):
    od = od_from(vols, H)
    to, td = trees(od)
    g = SparseGeneralizer(od, to, td, k)
    total = od.total_volume()
    last = None
    steps = []
    while g.n_below > 0:
        n_o, n_d = g.shape()
        axis = select_axis(n_o, n_d, g.initial_ratio, last)
        best = g.best_group(axis)
        if best is None:
            axis = other_axis(axis)
            best = g.best_group(axis)
            if best is None:
                break
        before = g.shape()
        size = len(g.axes[axis].members[best[0]])
        g.apply_merge(axis, best[0])
        after = g.shape()
        i = 0 if axis == ORIGIN else 1
        assert before[i] - after[i] == size - 1
        assert sum(sum(line.values()) for line in g.axes[ORIGIN].lines.values()) == total
        assert sum(sum(line.values()) for line in g.axes[DESTINATION].lines.values()) == total
        steps.append((axis, best[0]))
        last = axis

    res = anonymize(od, to, td, k)
    assert [(a, p) for a, p, _ in res.merges] == steps
    assert res.matrix.total_volume() == total
    for axis, tree, m in ((ORIGIN, to, res.origin_map), (DESTINATION, td, res.destination_map)):
        assert antichain(set(m.values()))
        assert set(m) == set(tree.data_leaves())
        assert all(z == leaf or H.is_ancestor(z, leaf) for leaf, z in m.items())
    if res.terminated == REACHED_K:
        assert min(res.matrix.volumes().values()) >= k
    else:
        assert res.below_k


@settings(max_examples=30, deadline=None)
@given(matrices, st.integers(2, 12))
def test_unit_weights_match_participant_mode(vols, k):
    od_p = od_from(vols, H)
    od_w = SparseOD({key: ODEntry(e.count, float(e.count)) for key, e in od_p.entries.items()}, Mode.POPULATION)
    a = anonymize(od_p, *trees(od_p), k)
    b = anonymize(od_w, *trees(od_w), float(k))
    assert a.origin_map == b.origin_map and a.destination_map == b.destination_map
    assert [m[:2] for m in a.merges] == [m[:2] for m in b.merges]
