"""Desk-scale Cantor subsets of the hitting set and the uniform measure they carry."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from itertools import cycle, product
from multiprocessing import Pool

import pandas as pd
from mpmath.libmp import round_ceiling, round_floor

from cylinders import ParamCylinder, orbit_image
from errors import BoundaryUndetermined, CertificationError, ConstructionError, DomainError, NotCloseEnoughError
from expansion import digits_of_one
from numeric import (
    CAP_BITS,
    DEFAULT_PREC,
    PolyRoot,
    RealEnclosure,
    UnitRoot,
    as_fraction,
    from_fraction,
    integer_coefficients,
    poly_eval,
    solve_unit_equation,
    unit_polynomial,
)
from recurrence import maximal_extension, recurrence_time, right_endpoint_word
from targets import AffineRate
from words import (
    DigitWord,
    adjacent_self_admissible,
    as_word,
    count_admissible,
    enumerate_admissible,
    is_admissible,
    is_self_admissible,
)

logger = logging.getLogger(__name__)


# --- Parameters ---
@dataclass(frozen=True)
class ConstructionParams:
    """Everything the generations are built from.

    ``root_word`` is the generation-0 word: the first M digits of the expansion of 1 in
    base beta1 followed by q zeros. ``star2`` is the period of the infinite expansion of 1
    in base beta2, the right end of the order-M cylinder around beta0.
    """

    beta0: UnitRoot
    beta1: UnitRoot
    x0: Fraction
    N: int
    M: int
    q: int
    beta2: UnitRoot
    star2: tuple
    ell: int
    root_word: DigitWord
    expansion1: tuple
    gap: RealEnclosure | None
    rate: object = field(default_factory=lambda: AffineRate(1))
    schedule: tuple = ()
    prec: int = DEFAULT_PREC

    @property
    def m0(self) -> int:
        return self.M + self.q

    @property
    def block_count(self) -> int:
        return count_admissible(cycle(self.star2), self.N)

    def to_json(self) -> dict:
        return {
            "beta0": self.beta0.enclosure.to_json(),
            "beta1": self.beta1.enclosure.to_json(),
            "beta2": self.beta2.enclosure.to_json(),
            "beta0_word": self.beta0.word.to_json(),
            "beta1_word": self.beta1.word.to_json(),
            "x0": str(self.x0),
            "N": self.N,
            "M": self.M,
            "q": self.q,
            "ell": self.ell,
            "star2": list(self.star2),
            "root_word": self.root_word.to_json(),
            "block_count": self.block_count,
            "closeness_gap": self.gap.to_json() if self.gap is not None else None,
        }


def _padded(expansion, depth: int) -> tuple:
    digits = expansion.raw_digits.digits[:depth]
    return digits + (0,) * (depth - len(digits))


def _separated(a: PolyRoot, b: PolyRoot, prec: int) -> bool:
    """Certify a < b, refining both brackets up to the cap."""
    bits = prec
    while True:
        if a.enclosure.certainly_lt(b.enclosure):
            return True
        if b.enclosure.certainly_le(a.enclosure) or bits >= CAP_BITS:
            return False
        bits = min(2 * bits, CAP_BITS)
        a, b = a.refine(bits), b.refine(bits)


def derive_params(beta0_word, beta1_word, x0, N: int, prec: int = DEFAULT_PREC, rate=None, schedule=()) -> ConstructionParams:
    """Construction parameters from two words naming nearby bases beta0 < beta1.

    Raises:
        DomainError: degenerate or misordered bases, x0 outside [0, 1].
        NotCloseEnoughError: beta1 (beta1 - beta0) / (beta0 - 1)**2 > (1 - x0) / 2.
        ConstructionError: no nonzero digit of the beta1 expansion after M.
    """
    w0, w1 = as_word(beta0_word), as_word(beta1_word)
    x0 = Fraction(x0)
    if not 0 <= x0 <= 1:
        raise DomainError(f"x0={x0} outside [0, 1]")
    if N < 1:
        raise DomainError("free block length N must be >= 1")
    for w in (w0, w1):
        if not is_self_admissible(w):
            raise DomainError(f"{w} is not self-admissible")
    if w0 == w1:
        raise DomainError("beta0 and beta1 coincide; need beta0 < beta1")
    beta0 = solve_unit_equation(w0, prec)
    beta1 = solve_unit_equation(w1, prec)
    if beta0.at_boundary or beta1.at_boundary:
        raise DomainError("bases must lie above 1")
    if not _separated(beta0, beta1, prec):
        raise DomainError("beta0 must be smaller than beta1")

    depth = 4 * max(len(w0), len(w1)) + 8
    expansions = [digits_of_one(beta, depth, prec) for beta in (beta0, beta1)]
    for exp in expansions:
        if exp.is_simple_parry:
            logger.info("Expansion of 1 with digits %s is finite; it is used zero-padded", exp.raw_digits)
    e0, e1 = (_padded(exp, depth) for exp in expansions)
    M = next((i for i in range(1, depth + 1) if e0[i - 1] != e1[i - 1]), None)
    if M is None:
        raise DomainError(f"expansions agree on {depth} digits; beta0 and beta1 are too close to separate")
    if e0[M - 1] > e1[M - 1]:
        raise CertificationError("expansion order disagrees with the base order")
    nonzero = [p for p in range(M + 1, depth + 1) if e1[p - 1]]
    if not nonzero:
        raise ConstructionError(
            "expansion of 1 in base beta1 has no nonzero digit after the disagreement",
            diagnostics={"M": M, "depth": depth},
        )
    q = max(M, nonzero[0] - M)

    gap = None
    if x0 < 1:
        b0, b1 = beta0.enclosure, beta1.enclosure
        gap = b1 * (b1 - b0) / (b0 - 1) ** 2
        allowed = (1 - x0) / 2
        if not gap.hi_fraction <= allowed:
            raise NotCloseEnoughError(
                f"betas not close enough: gap {gap.render()} exceeds (1 - x0)/2 = {float(allowed):g}",
                gap=float(gap.hi_fraction),
            )

    head = DigitWord(e0[:M])
    if recurrence_time(head).tau != M:
        raise CertificationError(f"recurrence time of {head} differs from M={M}")
    beta2 = solve_unit_equation(right_endpoint_word(head), prec)
    if not (_separated(beta0, beta2, prec) and _separated(beta2, beta1, prec)):
        raise CertificationError("beta2 is not strictly between beta0 and beta1")

    params = ConstructionParams(
        beta0=beta0,
        beta1=beta1,
        x0=x0,
        N=N,
        M=M,
        q=q,
        beta2=beta2,
        star2=head.digits,
        ell=4 * M + 2 + N,
        root_word=DigitWord(e1[:M] + (0,) * q),
        expansion1=e1,
        gap=gap,
        rate=rate if rate is not None else AffineRate(1),
        schedule=tuple(schedule),
        prec=prec,
    )
    logger.info("Construction: M=%d q=%d ell=%d blocks=%d", M, q, params.ell, params.block_count)
    return params


# --- Block families ---
def block_family(params: ConstructionParams):
    """Blocks (0^M, 1, 0^M, a, 0^M, 1, 0^M) with a admissible for beta2."""
    M = params.M
    zeros = (0,) * M
    for a in enumerate_admissible(cycle(params.star2), params.N):
        u = zeros + (1,) + zeros + a.digits + zeros + (1,) + zeros
        if not is_admissible(u, cycle(params.star2)):
            raise CertificationError(f"block {u} is not admissible for beta2")
        yield DigitWord(u)


def recurrence_block_family(params: ConstructionParams, ell: int):
    """Blocks (o, free digits, 0^M) of length ell for the x0 = 1 construction.

    o = (0^r1, 1, 0^r2, 1, 0^r3), where r1, r2, r3 are the gaps between the first four
    nonzero digits of the expansion of 1 in base beta1; these must lie in the common prefix.
    """
    e1, M = params.expansion1, params.M
    positions = [p for p in range(1, M) if e1[p - 1]][:4]
    if len(positions) < 4:
        raise ConstructionError(
            "common prefix of the two expansions has fewer than four nonzero digits",
            diagnostics={"M": M, "prefix": list(e1[: M - 1])},
        )
    r1, r2, r3 = (b - a for a, b in zip(positions, positions[1:]))
    head = (0,) * r1 + (1,) + (0,) * r2 + (1,) + (0,) * r3
    free = ell - len(head) - M
    if free < 0:
        raise DomainError(f"block length {ell} shorter than {len(head) + M}")
    ceiling = cycle(params.star2)
    tails = enumerate_admissible(ceiling, free) if free else [DigitWord((0,))]
    for a in tails:
        u = head + (a.digits if free else ()) + (0,) * M
        if is_admissible(u, cycle(params.star2)):
            yield DigitWord(u)


# --- Generation tree ---
@dataclass(frozen=True)
class TreeNode:
    id: int
    word: DigitWord
    generation: int
    kind: str
    parent: int | None
    mu: Fraction | None = None
    certificates: dict = field(default_factory=dict)

    @property
    def order(self) -> int:
        return len(self.word)

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "word": self.word.to_json(),
            "order": self.order,
            "generation": self.generation,
            "kind": self.kind,
            "parent": self.parent,
            "mu": str(self.mu) if self.mu is not None else None,
            "certificates": self.certificates,
        }


@dataclass(frozen=True)
class GenerationInfo:
    k: int
    n: int
    t: int
    i: int
    ell_n: int
    radius: RealEnclosure
    stems: int

    @property
    def m(self) -> int:
        return self.n + self.ell_n

    def to_json(self) -> dict:
        return {
            "k": self.k,
            "n": self.n,
            "t": self.t,
            "i": self.i,
            "ell_n": self.ell_n,
            "m": self.m,
            "radius": self.radius.to_json(),
            "stems": self.stems,
        }


@dataclass(frozen=True)
class GenerationTree:
    params: ConstructionParams
    nodes: tuple
    generations: tuple = ()

    @classmethod
    def start(cls, params: ConstructionParams) -> "GenerationTree":
        root = TreeNode(0, params.root_word, 0, "root", None, Fraction(1))
        return cls(params, (root,))

    @property
    def depth(self) -> int:
        return len(self.generations)

    def leaves(self, k: int | None = None) -> list:
        k = self.depth if k is None else k
        kind = "root" if k == 0 else "leaf"
        return [node for node in self.nodes if node.generation == k and node.kind == kind]

    def children(self, node_id: int) -> list:
        return [node for node in self.nodes if node.parent == node_id]

    def node(self, node_id: int) -> TreeNode:
        return self.nodes[node_id]

    def to_json(self) -> dict:
        return {
            "params": self.params.to_json(),
            "generations": [g.to_json() for g in self.generations],
            "nodes": [node.to_json() for node in self.nodes],
        }


def _working_bits(params: ConstructionParams, order: int) -> int:
    scale = math.log2(float(params.beta1.enclosure.hi_fraction))
    return min(params.prec + math.ceil(order * scale) + 32, CAP_BITS)


@dataclass(frozen=True)
class _LeafTask:
    stem: DigitWord
    n: int
    ell_n: int
    x0: Fraction
    radius: RealEnclosure
    beta0: RealEnclosure
    beta1: RealEnclosure
    M: int
    bits: int


def _image(stem_poly, c: ParamCylinder):
    return poly_eval(stem_poly, c.left.enclosure), poly_eval(stem_poly, c.right.enclosure)


def _top_word(task: _LeafTask, stem_cyl: ParamCylinder) -> DigitWord:
    """Order-(n + l) word of the base where the stem's orbit point reaches x0 + r."""
    stem_poly = unit_polynomial(task.stem)
    order = task.n + task.ell_n
    level = as_fraction(task.radius.lo)
    for attempt in range(4):
        shifted = list(stem_poly[:-1]) + [Fraction(stem_poly[-1]) - task.x0 - level]
        coeffs = integer_coefficients(shifted)
        seed = PolyRoot.bracket(coeffs, stem_cyl.left.lo, stem_cyl.right.hi, task.bits)
        try:
            expansion = digits_of_one(seed, order, task.bits)
        except BoundaryUndetermined:
            logger.info("Seed for %s on a cylinder boundary, nudging (attempt %d)", task.stem, attempt + 1)
            level = level * (1 - Fraction(1, 2**16))
            continue
        digits = expansion.record.digits.digits[:order]
        return DigitWord(digits + (0,) * (order - len(digits)))
    raise ConstructionError("seed stays on cylinder boundaries", diagnostics={"stem": str(task.stem)})


def _search_leaf(task: _LeafTask) -> tuple:
    """Largest full-recurrence extension of the stem whose image sits in B(x0, r).

    The diameter bound is checked on every full-recurrence candidate scanned on the way down.
    """
    n, order = task.n, task.n + task.ell_n
    stem_poly = unit_polynomial(task.stem)
    stem_cyl = ParamCylinder(task.stem, task.bits)
    image = orbit_image(stem_cyl)
    gamma_ok = image.sup.lo_fraction > (task.x0 + 1) / 2
    if not gamma_ok:
        raise ConstructionError(
            "orbit image of the stem does not reach (x0 + 1)/2",
            diagnostics={"stem": str(task.stem), "sup": image.sup.render()},
        )
    lower = RealEnclosure.exact(task.x0, task.bits) - task.radius
    upper = RealEnclosure.exact(task.x0, task.bits) + task.radius
    diameter_cap = task.beta0 ** (-task.ell_n) * 4

    cur = _top_word(task, stem_cyl)
    if cur.digits[:n] != task.stem.digits:
        raise ConstructionError(
            "seed expansion left the stem cylinder", diagnostics={"stem": str(task.stem), "seed": str(cur)}
        )
    limit = 2 * order + 2
    candidates, diameter_ok = 0, True
    for scanned in range(limit):
        if recurrence_time(cur).is_full:
            c = ParamCylinder(cur, task.bits)
            lo, hi = _image(stem_poly, c)
            candidates += 1
            diameter_ok = diameter_ok and (hi - lo).certainly_le(diameter_cap)
            if lower.certainly_lt(lo) and hi.certainly_le(upper):
                samples = _sampled_hits(stem_poly, c, lower, upper)
                const = (task.beta0 - 1) ** 2 / task.beta0
                floor = const * task.beta1 ** (-(order + task.M + 1))
                certificates = {
                    "hit": True,
                    "sample_check": samples,
                    "full_recurrence": True,
                    "self_admissible": is_self_admissible(cur),
                    "diameter": diameter_ok,
                    "candidates": candidates,
                    "gamma": gamma_ok,
                    "length_floor": floor.certainly_le(c.length),
                    "scanned": scanned,
                }
                return cur, certificates
        cur = adjacent_self_admissible(cur, "pred")
        if cur is None or cur.digits[:n] != task.stem.digits:
            break
    raise ConstructionError(
        "no full-recurrence extension inside the target ball",
        diagnostics={"stem": str(task.stem), "n": n, "ell_n": task.ell_n, "scanned": limit, "radius": task.radius.render()},
    )


def _sampled_hits(stem_poly, c: ParamCylinder, lower, upper, samples: int = 4) -> bool:
    lo_q, hi_q = as_fraction(c.left.lo), as_fraction(c.right.hi)
    for j in range(samples):
        a = from_fraction(lo_q + (hi_q - lo_q) * Fraction(j, samples), c.prec, round_floor)
        b = from_fraction(lo_q + (hi_q - lo_q) * Fraction(j + 1, samples), c.prec, round_ceiling)
        value = poly_eval(stem_poly, RealEnclosure(a, b, c.prec))
        if not (lower.certainly_lt(value) and value.certainly_lt(upper)):
            return False
    return True


def _stems(parent: TreeNode, blocks: list, t: int, i: int):
    for choice in product(blocks, repeat=t):
        digits = parent.word.digits
        for u in choice:
            digits = digits + u.digits
        yield DigitWord(digits + (0,) * i)


def build_generation(tree: GenerationTree, k: int | None = None, n_k: int | None = None, jobs: int = 1) -> GenerationTree:
    """Grow generation k: every stem gets exactly one leaf extension of order n_k + l_{n_k}."""
    params = tree.params
    k = tree.depth + 1 if k is None else k
    if k != tree.depth + 1:
        raise DomainError(f"next generation is {tree.depth + 1}, asked for {k}")
    m_prev = params.m0 if k == 1 else tree.generations[-1].m
    if n_k is None:
        n_k = params.schedule[k - 1] if len(params.schedule) >= k else m_prev + 2 * params.ell
    t, i = divmod(n_k - m_prev, params.ell)
    if t < 1:
        raise DomainError(f"n_{k}={n_k} leaves no room for a block after order {m_prev}")
    ell_n = params.rate(n_k)
    bits = _working_bits(params, n_k + ell_n)
    beta0 = params.beta0.refine(bits).enclosure
    beta1 = params.beta1.refine(bits).enclosure
    radius = beta0 ** (-ell_n) * (4 * (n_k + ell_n))
    allowed = (1 - params.x0) / 2
    if not radius.hi_fraction < allowed:
        raise ConstructionError(
            "target radius not below (1 - x0)/2; increase n_k or the rate",
            diagnostics={"k": k, "n_k": n_k, "ell_n": ell_n, "radius": radius.render()},
        )

    blocks = list(block_family(params))
    parents = tree.leaves(k - 1)
    nodes = list(tree.nodes)
    tasks, stem_ids = [], []
    for parent in parents:
        for stem in _stems(parent, blocks, t, i):
            if not is_self_admissible(stem):
                raise ConstructionError("stem is not self-admissible", diagnostics={"stem": str(stem)})
            node = TreeNode(len(nodes), stem, k, "stem", parent.id)
            nodes.append(node)
            stem_ids.append(node.id)
            tasks.append(_LeafTask(stem, n_k, ell_n, params.x0, radius, beta0, beta1, params.M, bits))
    logger.info("Generation %d: %d stems of order %d, leaves of order %d", k, len(tasks), n_k, n_k + ell_n)

    if jobs > 1 and len(tasks) > 1:
        with Pool(processes=jobs) as pool:
            results = pool.map(_search_leaf, tasks)
    else:
        results = [_search_leaf(task) for task in tasks]
    for stem_id, (word, certificates) in zip(stem_ids, results):
        nodes.append(TreeNode(len(nodes), word, k, "leaf", stem_id, certificates=certificates))

    info = GenerationInfo(k, n_k, t, i, ell_n, radius, len(tasks))
    return assign_measure(replace(tree, nodes=tuple(nodes), generations=tree.generations + (info,)))


def build_tree(params: ConstructionParams, generations: int = 1, jobs: int = 1) -> GenerationTree:
    tree = GenerationTree.start(params)
    for _ in range(generations):
        tree = build_generation(tree, jobs=jobs)
    return tree


# --- Measure ---
def assign_measure(tree: GenerationTree) -> GenerationTree:
    """Uniform split: each stem gets parent / |U|**t, each leaf inherits its stem's mass."""
    count = tree.params.block_count
    nodes = list(tree.nodes)
    for idx, node in enumerate(nodes):
        if node.kind == "root":
            mu = Fraction(1)
        elif node.kind == "stem":
            t = tree.generations[node.generation - 1].t
            mu = nodes[node.parent].mu / Fraction(count) ** t
        else:
            mu = nodes[node.parent].mu
        nodes[idx] = replace(node, mu=mu)
    return replace(tree, nodes=tuple(nodes))


def measure_of_prefix(tree: GenerationTree, word) -> Fraction:
    """Mass of the cylinder of `word`: total mass of deepest leaves meeting it."""
    prefix = as_word(word).digits
    total = Fraction(0)
    for leaf in tree.leaves():
        digits = leaf.word.digits
        if digits[: len(prefix)] == prefix or prefix[: len(digits)] == digits:
            total += leaf.mu
    return total


def local_exponent(tree: GenerationTree, leaf_id: int, depth: int) -> dict:
    """log mu(I_depth) / log |I_(depth+1)| along a leaf, next to the lower-bound heuristic."""
    leaf = tree.node(leaf_id)
    if leaf.kind not in ("leaf", "root"):
        raise DomainError(f"node {leaf_id} is a {leaf.kind}, not a leaf")
    if depth < 1 or depth >= leaf.order:
        raise DomainError(f"depth must lie in [1, {leaf.order - 1}]")
    params = tree.params
    mu = measure_of_prefix(tree, leaf.word.digits[:depth])
    c = ParamCylinder(DigitWord(leaf.word.digits[: depth + 1]), _working_bits(params, depth + 1))
    length = c.length
    log_mu = math.log(mu.numerator) - math.log(mu.denominator)
    log_lo = math.log(float(length.lo_fraction)) if length.lo_fraction > 0 else -math.inf
    log_hi = math.log(float(length.hi_fraction))
    ratios = [log_mu / log_lo if math.isfinite(log_lo) else 0.0, log_mu / log_hi]
    alpha = float(params.rate.alpha)
    bound = (
        (1 / (1 + alpha))
        * math.log(float(params.beta2.enclosure.mid))
        / math.log(float(params.beta1.enclosure.mid))
        * params.N
        / params.ell
    )
    return {
        "leaf": leaf_id,
        "depth": depth,
        "mu": str(mu),
        "length": length.render(),
        "ratio_lo": min(ratios),
        "ratio_hi": max(ratios),
        "bound": bound,
    }


def mass_distribution_check(tree: GenerationTree, depths) -> pd.DataFrame:
    rows = [local_exponent(tree, leaf.id, d) for leaf in tree.leaves() for d in depths if 1 <= d < leaf.order]
    return pd.DataFrame(rows)


# --- x0 = 1 ---
def enlarge_rate(ell_n: int, n: int, m_prev: int, block_len: int, t: int) -> dict:
    """Smallest z*n + m_prev + j*block_len >= ell_n with z >= 0 and 0 <= j < t."""
    if t < 1 or n < 1:
        raise DomainError("need t >= 1 and n >= 1")
    z = 0
    while True:
        for j in range(t):
            value = z * n + m_prev + j * block_len
            if value >= ell_n:
                return {"z": z, "j": j, "ell": value, "enlargement": value - ell_n}
        z += 1


def periodic_prefix_witness(w, z: int, params: ConstructionParams | None = None, suffix: int = 0, prec: int = DEFAULT_PREC) -> dict:
    """w repeated z + 1 times plus a suffix of its own prefix; certifies |T^n 1 - 1| < beta**-(z n + suffix).

    Every base in the witness cylinder expands 1 with a prefix shared by its n-th shift,
    which is what the digit check below records and what decides `hit`. `sample_check`
    evaluates the inequality at four points of the cylinder and proves nothing on its own.
    """
    w = as_word(w)
    if z < 0 or suffix < 0:
        raise DomainError("z and suffix must be nonnegative")
    if not is_self_admissible(w) or not recurrence_time(w).is_full:
        raise ConstructionError(f"{w} is not a self-admissible word of full recurrence time", diagnostics={"word": str(w)})
    n = len(w)
    reach = z * n + suffix
    witness = maximal_extension(w, n * (z + 1) + suffix)
    if not is_self_admissible(witness):
        raise ConstructionError(f"periodic word {witness} is not self-admissible", diagnostics={"word": str(w)})
    result = {"word": witness.to_json(), "n": n, "z": z, "suffix": suffix, "reach": reach}
    if reach == 0:
        result.update(shared_prefix=True, sample_check=True, hit=True, trivial=True)
        return result
    shared = witness.digits[n : n + reach] == witness.digits[:reach]
    bits = min(prec + math.ceil(len(witness) * math.log2(w[0] + 1)) + 32, CAP_BITS)
    c = ParamCylinder(witness, bits)
    poly = unit_polynomial(w)
    hi_q = as_fraction(c.left.hi)
    width = c.length.lo_fraction
    points = [c.left.enclosure] + [
        RealEnclosure.exact(hi_q + width * Fraction(j, 4), bits) for j in (1, 2, 3)
    ]
    sample_check = True
    for beta in points:
        distance = 1 - poly_eval(poly, beta)
        if not distance.certainly_lt(beta ** (-reach)):
            sample_check = False
            break
    if shared and not sample_check:
        logger.warning("Witness %s shares its prefix but a sampled point misses the bound", w)
    result.update(shared_prefix=shared, sample_check=sample_check, hit=shared, trivial=False)
    if params is not None:
        result["inside_window"] = params.beta0.enclosure.certainly_lt(c.left.enclosure) and c.right.enclosure.certainly_lt(
            params.beta1.enclosure
        )
    return result
