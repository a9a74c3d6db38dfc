from fractions import Fraction

import pytest

from cantor import (
    GenerationInfo,
    GenerationTree,
    TreeNode,
    assign_measure,
    block_family,
    build_generation,
    build_tree,
    derive_params,
    enlarge_rate,
    local_exponent,
    mass_distribution_check,
    measure_of_prefix,
    periodic_prefix_witness,
    recurrence_block_family,
)
from cylinders import ParamCylinder
from errors import ConstructionError, DomainError, NotCloseEnoughError
from numeric import RealEnclosure, poly_eval, unit_polynomial
from recurrence import recurrence_time
from words import DigitWord, is_self_admissible, walk_self_admissible

BETA0 = (1, 0, 1, 0, 1, 0, 1, 0, 1)
BETA1 = (1, 1, 0, 0, 0, 0, 0, 0, 1)


@pytest.fixture
def params():
    return derive_params(BETA0, BETA1, 0, 2, 128)


@pytest.fixture
def params_x0_one():
    return derive_params((1, 1, 1, 1, 0, 1), (1, 1, 1, 1, 1, 0, 1), 1, 2, 128)


def test_derive_params(params):
    assert params.M == 2
    assert params.q == 7
    assert params.star2 == (1, 0)
    assert params.block_count == 3
    assert params.ell == 12
    assert params.m0 == 9
    assert params.root_word == DigitWord((1, 1, 0, 0, 0, 0, 0, 0, 0))
    assert params.gap.hi_fraction < Fraction(1, 2)
    assert params.beta0.enclosure.certainly_lt(params.beta2.enclosure)
    assert params.beta2.enclosure.certainly_lt(params.beta1.enclosure)
    report = params.to_json()
    assert report["block_count"] == 3
    assert report["x0"] == "0"


def test_derive_params_rejects_far_bases():
    with pytest.raises(NotCloseEnoughError) as err:
        derive_params((1, 1), (2, 0, 1), 0, 2, 128)
    assert err.value.gap > 0.5


def test_derive_params_rejects_bad_input():
    with pytest.raises(DomainError):
        derive_params(BETA1, BETA0, 0, 2, 128)
    with pytest.raises(DomainError):
        derive_params(BETA0, BETA0, 0, 2, 128)
    with pytest.raises(DomainError):
        derive_params(BETA0, BETA1, 2, 2, 128)
    with pytest.raises(DomainError):
        derive_params(BETA0, BETA1, 0, 0, 128)


def test_block_family(params):
    blocks = list(block_family(params))
    assert len(blocks) == 3
    for u in blocks:
        assert len(u) == params.ell
        assert u.digits[:3] == (0, 0, 1)
        assert u.digits[-3:] == (1, 0, 0)
    assert len(set(blocks)) == 3


def test_recurrence_block_family(params_x0_one):
    assert params_x0_one.M == 5
    assert params_x0_one.q == 5
    assert params_x0_one.gap is None
    blocks = list(recurrence_block_family(params_x0_one, 12))
    assert len(blocks) == 4
    for u in blocks:
        assert len(u) == 12
        assert u.digits[:5] == (0, 1, 0, 1, 0)
        assert u.digits[-5:] == (0,) * 5


def test_enlarge_rate():
    assert enlarge_rate(10, 4, 3, 5, 2) == {"z": 1, "j": 1, "ell": 12, "enlargement": 2}
    assert enlarge_rate(3, 4, 3, 5, 2)["enlargement"] == 0
    with pytest.raises(DomainError):
        enlarge_rate(10, 4, 3, 5, 0)


def test_periodic_prefix_witness():
    result = periodic_prefix_witness((2, 1), 1)
    assert result["word"] == [2, 1, 2, 1]
    assert result["hit"] is True
    assert result["shared_prefix"] is True
    assert result["sample_check"] is True
    assert "sampled" not in result
    assert result["trivial"] is False
    assert periodic_prefix_witness((2, 1), 0)["trivial"] is True
    with pytest.raises(ConstructionError):
        periodic_prefix_witness((1, 0, 1), 1)


def test_witness_hit_follows_the_shared_prefix():
    result = periodic_prefix_witness((2, 1), 2, suffix=1)
    assert result["reach"] == 5
    assert result["word"] == [2, 1, 2, 1, 2, 1, 2]
    assert result["hit"] is result["shared_prefix"] is True


def _manual_tree(params):
    blocks = list(block_family(params))
    root = TreeNode(0, params.root_word, 0, "root", None, Fraction(1))
    nodes = [root]
    for a in blocks:
        for b in blocks:
            nodes.append(TreeNode(len(nodes), DigitWord(params.root_word.digits + a.digits + b.digits), 1, "stem", 0))
    for stem in list(nodes[1:]):
        nodes.append(TreeNode(len(nodes), DigitWord(stem.word.digits + (0,)), 1, "leaf", stem.id))
    info = GenerationInfo(1, 33, 2, 0, 33, RealEnclosure.exact(Fraction(1, 1000)), 9)
    return GenerationTree(params, tuple(nodes), (info,)), blocks


def test_assign_measure(params):
    tree, blocks = _manual_tree(params)
    tree = assign_measure(tree)
    leaves = tree.leaves()
    assert len(leaves) == 9
    assert all(leaf.mu == Fraction(1, 9) for leaf in leaves)
    assert sum(leaf.mu for leaf in leaves) == 1
    assert measure_of_prefix(tree, params.root_word.digits + blocks[0].digits) == Fraction(1, 3)
    assert measure_of_prefix(tree, params.root_word) == 1
    assert tree.children(0)[0].kind == "stem"


def test_local_exponents(params):
    tree, blocks = _manual_tree(params)
    tree = assign_measure(tree)
    leaf = tree.leaves()[0]
    result = local_exponent(tree, leaf.id, 21)
    assert result["mu"] == "1/3"
    assert 0 < result["ratio_lo"] <= result["ratio_hi"]
    assert result["bound"] > 0
    with pytest.raises(DomainError):
        local_exponent(tree, 1, 21)
    with pytest.raises(DomainError):
        local_exponent(tree, leaf.id, leaf.order)

    table = mass_distribution_check(tree, [21])
    assert len(table) == 9
    assert (table["mu"] == "1/3").all()


def test_build_generation_checks_order(params):
    tree = GenerationTree.start(params)
    with pytest.raises(DomainError):
        build_generation(tree, k=2)
    with pytest.raises(DomainError):
        build_generation(tree, n_k=params.m0 + params.ell - 1)


@pytest.mark.slow
def test_build_tree_one_generation(params):
    tree = build_tree(params, 1)
    leaves = tree.leaves()
    assert tree.depth == 1
    assert len(leaves) == 9
    assert sum(leaf.mu for leaf in leaves) == 1
    for leaf in leaves:
        assert leaf.word.digits[: params.m0] == params.root_word.digits
        assert is_self_admissible(leaf.word)
        certificates = leaf.certificates
        assert certificates["hit"] and certificates["full_recurrence"]
        assert certificates["candidates"] >= 1
        assert isinstance(certificates["diameter"], bool)
        assert "sample_check" in certificates


def _full_words(top):
    for n in range(2, top + 1):
        for w in walk_self_admissible(n, range(1, 3)):
            if recurrence_time(w).is_full:
                yield w


@pytest.fixture(scope="module")
def witness_words():
    words = list(_full_words(10))
    return words[:: len(words) // 20][:20]


@pytest.mark.parametrize("z", [1, 2, 3])
def test_witnesses_hit_for_full_recurrence_words(witness_words, z):
    assert len(witness_words) == 20
    for w in witness_words:
        result = periodic_prefix_witness(w, z)
        assert is_self_admissible(result["word"]), w
        assert result["reach"] == z * len(w)
        assert result["hit"] is True, w
        assert result["sample_check"] is True, w


@pytest.mark.slow
@pytest.mark.parametrize("x0", [Fraction(0), Fraction(3, 10)])
def test_two_generations_with_longer_free_blocks(x0):
    params = derive_params(BETA0, BETA1, x0, 4, 128)
    tree = GenerationTree.start(params)
    tree = build_generation(tree, n_k=params.m0 + params.ell)
    tree = build_generation(tree, n_k=tree.generations[-1].m + params.ell)
    assert tree.depth == 2
    assert len(tree.leaves()) == params.block_count**2

    for node in tree.nodes:
        children = tree.children(node.id)
        if children:
            assert sum(child.mu for child in children) == node.mu, node.id

    for leaf in tree.leaves(1) + tree.leaves(2):
        stem = tree.node(leaf.parent)
        info = tree.generations[leaf.generation - 1]
        c = ParamCylinder(leaf.word, 512)
        poly = unit_polynomial(stem.word)
        lo, hi = poly_eval(poly, c.left.enclosure), poly_eval(poly, c.right.enclosure)
        center = RealEnclosure.exact(x0, 512)
        assert (center - info.radius).certainly_lt(lo), leaf.id
        assert hi.certainly_le(center + info.radius), leaf.id
        assert leaf.certificates["hit"] and leaf.certificates["full_recurrence"]
        assert isinstance(leaf.certificates["diameter"], bool)
