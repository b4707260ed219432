"""Label-space oracles: hand-computed cosines, 3-dataset fixture, overrides."""

import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from gaiakit import labelspace as lsp
from gaiakit.errors import (
    DimensionMismatch,
    DuplicateDataset,
    EmptyInput,
    MissingToken,
    UnknownCategoryInOverride,
    ZeroVector,
)

# Unit vectors chosen so every similarity below is hand-checkable:
#   car=(1,0,0)  dog=(0,1,0)  bus=(0.6,0.8,0)
#   automobile=(0.96,0.28,0): cos(car)=0.96, cos(bus)=0.576+0.224=0.800 (edge)
#   tram=(0.8,0,0.6):         cos(car)=0.80 exactly, cos(bus)=0.48 -> novel
#   puppy=(0.28,0.96,0):      cos(dog)=0.96, cos(bus)=0.168+0.768=0.936 -> ambiguous
TOKENS = {
    "car": (1.0, 0.0, 0.0),
    "dog": (0.0, 1.0, 0.0),
    "bus": (0.6, 0.8, 0.0),
    "automobile": (0.96, 0.28, 0.0),
    "tram": (0.8, 0.0, 0.6),
    "puppy": (0.28, 0.96, 0.0),
    "zebra": (0.0, 0.0, 1.0),
    "police": (0.0, 1.0, 0.0),
    "truck": (0.9, 0.43, 0.0),
    "cat": (0.0, 1.0, 0.0),
    "lorry": (0.95, 0.31, 0.0),
    "piano": (0.0, 0.0, 1.0),
    "wagon": (1.0, 0.0, 0.0),
    "van": (0.95, 0.28, 0.0),
}


@pytest.fixture
def table():
    return lsp.EmbeddingTable(TOKENS)


@pytest.fixture
def three_spaces():
    return [
        lsp.LabelSpace("alpha", ("car", "dog", "bus")),
        lsp.LabelSpace("beta", ("automobile", "tram")),
        lsp.LabelSpace("gamma", ("puppy",)),
    ]


def test_embed_single_token_identity(table):
    assert np.allclose(lsp.embed_category("car", table), (1, 0, 0))


def test_embed_multi_token_mean_renormalized(table):
    v = lsp.embed_category("police car", table)
    assert np.allclose(v, (1 / math.sqrt(2), 1 / math.sqrt(2), 0))
    assert math.isclose(float(np.linalg.norm(v)), 1.0, abs_tol=1e-12)


def test_embed_missing_token(table):
    with pytest.raises(MissingToken):
        lsp.embed_category("unicorn", table)
    with pytest.raises(MissingToken):
        lsp.embed_category("   ", table)


def test_embed_fallback_used_for_unknown_tokens():
    t = lsp.EmbeddingTable({"car": (1.0, 0.0)}, fallback=(0.0, 1.0))
    assert np.allclose(lsp.embed_category("unicorn", t), (0, 1))


def test_embed_opposite_tokens_zero_mean():
    t = lsp.EmbeddingTable({"up": (0.0, 1.0), "down": (0.0, -1.0)})
    with pytest.raises(ZeroVector):
        lsp.embed_category("up down", t)


def test_cosine_fixtures():
    assert lsp.cosine_similarity((0.6, 0.8), (0.6, 0.8)) == pytest.approx(1.0)
    assert lsp.cosine_similarity((1, 0), (0, 1)) == 0.0
    assert lsp.cosine_similarity((1, 0), (0.8, 0.6)) == pytest.approx(0.8)
    with pytest.raises(DimensionMismatch):
        lsp.cosine_similarity((1, 0), (1, 0, 0))
    with pytest.raises(ZeroVector):
        lsp.cosine_similarity((0, 0), (1, 0))


def test_single_space_passthrough(table):
    u, rep = lsp.build_unified([lsp.LabelSpace("a", ("car", "dog"))], table)
    assert u.categories == ("car", "dog")
    assert rep.matches == () and rep.novel == ()
    assert u.provenance == {("a", "car"): 0, ("a", "dog"): 1}


def test_two_space_example(table):
    spaces = [
        lsp.LabelSpace("A", ("car", "dog")),
        lsp.LabelSpace("B", ("automobile", "zebra")),
    ]
    u, rep = lsp.build_unified(spaces, table)
    assert u.categories == ("car", "dog", "zebra")
    (m,) = rep.matches
    assert (m.dataset, m.source, m.unified) == ("B", "automobile", "car")
    assert m.similarity == pytest.approx(0.96)
    (n,) = rep.novel
    assert (n.dataset, n.source, n.unified_index) == ("B", "zebra", 2)


def test_three_space_fixture_hand_derived(table, three_spaces):
    u, rep = lsp.build_unified(three_spaces, table)
    assert u.categories == ("car", "dog", "bus", "tram")
    assert u.provenance == {
        ("alpha", "car"): 0, ("alpha", "dog"): 1, ("alpha", "bus"): 2,
        ("beta", "automobile"): 0, ("beta", "tram"): 3, ("gamma", "puppy"): 1,
    }
    by_src = {(m.dataset, m.source): m for m in rep.matches}
    assert by_src[("beta", "automobile")].similarity == pytest.approx(0.96)
    assert by_src[("gamma", "puppy")].unified == "dog"
    assert [(n.dataset, n.source) for n in rep.novel] == [("beta", "tram")]
    # tram's best score is exactly 0.8 against car: strict threshold keeps it novel
    tram_v = lsp.embed_category("tram", table)
    assert lsp.cosine_similarity(tram_v, lsp.embed_category("car", table)) == pytest.approx(0.8)
    (amb,) = rep.ambiguous
    assert (amb.dataset, amb.source) == ("gamma", "puppy")
    assert [name for name, _ in amb.candidates] == ["dog", "bus"]
    assert rep.collisions == ()


def test_remerge_identical_content_is_idempotent(table, three_spaces):
    u, _ = lsp.build_unified(three_spaces, table)
    again, ext, rep = lsp.merge_new_dataset(
        u, lsp.LabelSpace("delta", ("automobile", "tram")), table
    )
    assert again.categories == u.categories
    assert ext == lsp.HeadExtension(prefix_length=4, appended=())
    assert {(m.source, m.unified) for m in rep.matches} == {
        ("automobile", "car"), ("tram", "tram")}


def test_merge_examples(table):
    u, _ = lsp.build_unified([lsp.LabelSpace("a", ("car", "dog"))], table)
    u2, ext, rep = lsp.merge_new_dataset(u, lsp.LabelSpace("b", ("truck",)), table)
    assert u2.categories == ("car", "dog")
    assert ext.appended == ()
    assert rep.matches[0].unified == "car"
    assert rep.matches[0].similarity == pytest.approx(0.9, abs=0.01)

    u3, _ = lsp.build_unified([lsp.LabelSpace("a", ("car",))], table)
    u4, ext4, _ = lsp.merge_new_dataset(u3, lsp.LabelSpace("c", ("cat",)), table)
    assert u4.categories == ("car", "cat")
    assert ext4 == lsp.HeadExtension(prefix_length=1, appended=("cat",))

    with pytest.raises(DuplicateDataset):
        lsp.merge_new_dataset(u4, lsp.LabelSpace("a", ("dog",)), table)


def test_same_dataset_collision_next_best_then_novel(table, three_spaces):
    u, _ = lsp.build_unified(three_spaces, table)
    # wagon takes car at 1.0; van's argmax is car too, next-best is bus (0.8017)
    u2, ext, rep = lsp.merge_new_dataset(
        u, lsp.LabelSpace("fleet", ("wagon", "van")), table
    )
    assert ext.appended == ()
    by_src = {m.source: m for m in rep.matches}
    assert by_src["wagon"].unified == "car"
    assert by_src["van"].unified == "bus"
    (coll,) = rep.collisions
    assert (coll.source, coll.blocked, coll.resolution) == ("van", "car", "bus")

    # sedan takes car; coupe's only candidate is car -> forced novel
    t = lsp.EmbeddingTable(
        {"car": (1, 0, 0), "dog": (0, 1, 0), "sedan": (1, 0, 0),
         "coupe": (0.96, 0.28, 0)})
    base, _ = lsp.build_unified([lsp.LabelSpace("a", ("car", "dog"))], t)
    u3, ext3, rep3 = lsp.merge_new_dataset(
        base, lsp.LabelSpace("k", ("sedan", "coupe")), t)
    assert u3.categories == ("car", "dog", "coupe")
    assert ext3.appended == ("coupe",)
    (coll3,) = rep3.collisions
    assert (coll3.source, coll3.blocked, coll3.resolution) == ("coupe", "car", "novel:coupe")


def test_build_unified_errors(table):
    with pytest.raises(EmptyInput):
        lsp.build_unified([], table)
    with pytest.raises(DuplicateDataset):
        lsp.build_unified(
            [lsp.LabelSpace("a", ("car",)), lsp.LabelSpace("a", ("dog",))], table
        )


def test_largest_space_tie_breaks_lexicographically(table):
    u, _ = lsp.build_unified(
        [lsp.LabelSpace("b", ("dog", "zebra")), lsp.LabelSpace("a", ("car", "bus"))],
        table,
    )
    assert u.categories[:2] == ("car", "bus")  # 'a' wins the size tie


def test_surgery_plan(table):
    u, _ = lsp.build_unified([lsp.LabelSpace("a", ("car", "dog"))], table)
    plan = lsp.head_surgery_plan(u, lsp.LabelSpace("t", ("lorry", "piano", "dog")), table)
    lorry, piano, dog = plan.entries
    assert lorry.decision == lsp.Exact(0)  # 0.9507 > 0.8
    assert isinstance(piano.decision, lsp.Nearest)
    assert piano.decision.index == 0  # both sims 0.0; tie -> lowest index
    assert piano.decision.similarity == pytest.approx(0.0)
    assert dog.decision == lsp.Exact(1)
    assert plan.indices() == (0, 0, 1)
    with pytest.raises(EmptyInput):
        lsp.head_surgery_plan(
            lsp.UnifiedLabelSpace((), {}), lsp.LabelSpace("t", ("car",)), table)


def test_override_parsing():
    ovs = lsp.parse_overrides([
        "# comment", "",
        "accept beta:automobile",
        "reject beta:automobile",
        "redirect beta:automobile -> dog",
    ])
    assert [o.action for o in ovs] == ["accept", "reject", "redirect"]
    assert ovs[2] == lsp.Override("redirect", "beta", "automobile", "dog")
    with pytest.raises(ValueError):
        lsp.parse_overrides(["redirect beta:automobile"])  # missing target
    with pytest.raises(ValueError):
        lsp.parse_overrides(["explode beta:automobile"])
    with pytest.raises(ValueError):
        lsp.parse_overrides(["accept automobile"])  # no dataset


def test_apply_overrides(table, three_spaces):
    u, rep = lsp.build_unified(three_spaces, table)

    same_u, same_rep = lsp.apply_overrides(u, rep, (), table)
    assert same_u == u and same_rep == rep

    ov = lsp.parse_overrides(["reject beta:automobile"])
    u2, rep2 = lsp.apply_overrides(u, rep, ov, table)
    assert u2.categories == ("car", "dog", "bus", "tram", "automobile")
    assert u2.provenance[("beta", "automobile")] == 4
    assert ("beta", "automobile") not in {(m.dataset, m.source) for m in rep2.matches}
    assert ("beta", "automobile") in {(n.dataset, n.source) for n in rep2.novel}

    ov = lsp.parse_overrides(["redirect beta:automobile -> dog"])
    u3, rep3 = lsp.apply_overrides(u, rep, ov, table)
    assert u3.provenance[("beta", "automobile")] == 1
    m = {(x.dataset, x.source): x for x in rep3.matches}[("beta", "automobile")]
    assert m.unified == "dog" and m.similarity == pytest.approx(0.28)

    # redirecting a novel append removes the orphaned unified row
    ov = lsp.parse_overrides(["redirect beta:tram -> bus"])
    u4, rep4 = lsp.apply_overrides(u, rep, ov, table)
    assert u4.categories == ("car", "dog", "bus")
    assert u4.provenance[("beta", "tram")] == 2
    m4 = {(x.dataset, x.source): x for x in rep4.matches}[("beta", "tram")]
    assert m4.unified == "bus" and m4.similarity == pytest.approx(0.48)
    assert set(u4.provenance.values()) == {0, 1, 2}

    with pytest.raises(UnknownCategoryInOverride):
        lsp.apply_overrides(u, rep, lsp.parse_overrides(["accept beta:ghost"]), table)
    with pytest.raises(UnknownCategoryInOverride):
        lsp.apply_overrides(
            u, rep, lsp.parse_overrides(["redirect beta:automobile -> ghost"]), table)


def test_serialization_round_trips(table, three_spaces):
    u, rep = lsp.build_unified(three_spaces, table)
    assert lsp.unified_from_lines(lsp.unified_to_lines(u)) == u
    # serialization is deterministic, byte for byte
    assert lsp.unified_to_lines(u) == lsp.unified_to_lines(u)
    assert lsp.report_to_lines(rep) == lsp.report_to_lines(rep)
    plan = lsp.head_surgery_plan(u, lsp.LabelSpace("t", ("lorry", "piano")), table)
    lines = lsp.surgery_to_lines(plan)
    assert lines[0].startswith("lorry\texact\t0")
    assert lines[1] == "piano\tnearest\t3\t0.600000"  # tram is piano's nearest
    with pytest.raises(ValueError):
        lsp.unified_from_lines(["C\t0\tcar", "C\t2\tdog"])  # index gap


def test_label_space_and_embedding_files(tmp_path):
    space = lsp.label_space_from_lines(
        ["#dataset: roads", "car", "", "# a comment", "bus"], default_id="file-stem")
    assert space == lsp.LabelSpace("roads", ("car", "bus"))
    space2 = lsp.label_space_from_lines(["car"], default_id="stem")
    assert space2.dataset_id == "stem"

    t = lsp.EmbeddingTable.from_lines(["2 2", "car 1 0", "dog 0 1"])
    assert t.dim == 2 and "car" in t and len(t) == 2
    t2 = lsp.EmbeddingTable.from_lines(["car 1 0", "dog 0 1"])  # headerless
    assert t2.dim == 2
    with pytest.raises(ValueError):
        lsp.EmbeddingTable.from_lines(["3 2", "car 1 0"])  # count mismatch
    with pytest.raises(ValueError):
        lsp.EmbeddingTable.from_lines(["car 1 0", "car 0 1"])  # duplicate
    with pytest.raises(DimensionMismatch):
        lsp.EmbeddingTable.from_lines(["car 1 0", "dog 0 1 0"])
    with pytest.raises(ZeroVector):
        lsp.EmbeddingTable.from_lines(["car 0 0"])


# --- properties ---------------------------------------------------------------

_tokens = [f"t{i}" for i in range(8)]


@st.composite
def random_world(draw):
    vecs = {}
    for t in _tokens:
        v = draw(
            st.tuples(st.integers(-3, 3), st.integers(-3, 3), st.integers(-3, 3))
            .filter(lambda x: any(x)))
        vecs[t] = tuple(float(c) for c in v)
    n_spaces = draw(st.integers(1, 3))
    spaces = []
    for i in range(n_spaces):
        cats = draw(
            st.lists(st.sampled_from(_tokens), min_size=1, max_size=6, unique=True))
        spaces.append(lsp.LabelSpace(f"ds{i}", tuple(cats)))
    return lsp.EmbeddingTable(vecs), spaces


@given(random_world())
def test_size_bounds_and_provenance_totality(world):
    table, spaces = world
    u, rep = lsp.build_unified(spaces, table)
    sizes = [len(s.categories) for s in spaces]
    assert max(sizes) <= len(u) <= sum(sizes)
    assert len(u.provenance) == sum(sizes)
    for s in spaces:
        for c in s.categories:
            assert (s.dataset_id, c) in u.provenance
    assert set(u.provenance.values()) == set(range(len(u)))
    # every non-initial category appears in exactly one of matches/novel
    initial = sorted(spaces, key=lambda s: (-len(s.categories), s.dataset_id))[0]
    tagged = [(m.dataset, m.source) for m in rep.matches]
    tagged += [(n.dataset, n.source) for n in rep.novel]
    assert len(tagged) == len(set(tagged))
    assert len(tagged) == sum(sizes) - len(initial.categories)
    assert u.categories[: len(initial.categories)] == initial.categories


@given(random_world())
def test_threshold_monotonicity_and_idempotence(world):
    table, spaces = world
    lo, _ = lsp.build_unified(spaces, table, threshold=0.5)
    hi, _ = lsp.build_unified(spaces, table, threshold=0.9)
    assert len(lo) <= len(hi)
    # re-merging identical content (fresh id) never grows the space
    u, _ = lsp.build_unified(spaces, table)
    clone = lsp.LabelSpace("clone", spaces[0].categories)
    u2, ext, _ = lsp.merge_new_dataset(u, clone, table)
    assert len(u2) == len(u)
    assert ext.appended == ()


@given(random_world())
def test_deterministic_byte_identical(world):
    table, spaces = world
    u1, r1 = lsp.build_unified(spaces, table)
    u2, r2 = lsp.build_unified(spaces, table)
    assert lsp.unified_to_lines(u1) == lsp.unified_to_lines(u2)
    assert lsp.report_to_lines(r1) == lsp.report_to_lines(r2)
