"""Block splitting, homological solves, weight operator, decay diagnostics."""

import random
from fractions import Fraction as Fr

import pytest

from toruskit.exact import QQi
from toruskit.errors import BoxMismatch, IntraClusterEntry
from toruskit.homological import (
    BlockMatrix,
    cluster_weight_operator,
    commutator,
    decay_profile,
    dn_split,
    homological_residual,
    norm_equivalence_constants,
    random_cross_cluster_matrix,
    solve_homological,
    verify_remainder_support,
)
from toruskit.clusters import build_partition
from toruskit.lattice import mu, new_lattice

B2 = new_lattice([[1, 0], [0, 1]])
DELTA = Fr(1, 10)


def partition(radius=8):
    return build_partition(B2, radius, DELTA, enforce_delta_bound=False)


def test_split_diagonal_matrix():
    part = partition()
    Q = BlockMatrix.from_entries(8, 2, {((1, 1), (1, 1)): QQi(2, 0),
                                        ((0, 1), (0, 1)): QQi(0, 3)})
    q_d, q_nd = dn_split(Q, part)
    assert q_nd.entries == {}
    assert q_d == Q


def test_split_recombines():
    part = partition()
    rng = random.Random(0)
    Q = random_cross_cluster_matrix(part, 60, rng)
    extra = BlockMatrix.from_entries(8, 2, {((2, 2), (2, 2)): QQi(1, 1)})
    Q = Q + extra
    q_d, q_nd = dn_split(Q, part)
    assert q_d + q_nd == Q
    # idempotence of the split
    assert dn_split(q_d, part) == (q_d, BlockMatrix(8, 2, {}))
    assert dn_split(q_nd, part) == (BlockMatrix(8, 2, {}), q_nd)


def test_split_box_mismatch():
    part = partition()
    Q = BlockMatrix.from_entries(4, 2, {((0, 0), (1, 1)): QQi(1, 0)})
    with pytest.raises(BoxMismatch):
        dn_split(Q, part)


def test_solve_large_gap_entry():
    part = partition()
    W = BlockMatrix.from_entries(8, 2, {((0, 0), (3, 4)): QQi(1, 0)})
    sol = solve_homological(B2, W, part, DELTA)
    # eigenvalue gap 25 clears the threshold (|j|+|j'|)^0.1 / 4
    assert sol.X.get((0, 0), (3, 4)) == QQi(Fr(1, 25), 0)
    assert sol.R.entries == {}


def test_solve_equal_eigenvalues_go_to_remainder():
    part = partition()
    assert mu(B2, (3, 4)) == mu(B2, (5, 0))
    assert part.cluster_of((3, 4)) != part.cluster_of((5, 0))
    W = BlockMatrix.from_entries(8, 2, {((3, 4), (5, 0)): QQi(2, -1)})
    sol = solve_homological(B2, W, part, DELTA)
    assert sol.X.entries == {}
    assert sol.R.get((3, 4), (5, 0)) == QQi(-2, 1)


def test_solve_zero_matrix():
    part = partition()
    sol = solve_homological(B2, BlockMatrix(8, 2, {}), part, DELTA)
    assert sol.X.entries == {} and sol.R.entries == {}


def test_solve_rejects_intra_cluster():
    part = partition()
    members = next(c.members for c in part.clusters if len(c.members) > 1)
    W = BlockMatrix.from_entries(8, 2, {(members[0], members[1]): QQi(1, 0)})
    with pytest.raises(IntraClusterEntry):
        solve_homological(B2, W, part, DELTA)


def test_homological_identity_exact():
    part = partition()
    rng = random.Random(1)
    W = random_cross_cluster_matrix(part, 120, rng)
    sol = solve_homological(B2, W, part, DELTA)
    assert homological_residual(B2, W, sol) is None
    assert not (set(sol.X.entries) & set(sol.R.entries))
    assert set(sol.X.entries) | set(sol.R.entries) == set(W.entries)
    # every kept entry replays the gap threshold, every dropped one fails it
    from toruskit.exact import ge_pow
    for (j, j2) in sol.X.entries:
        gap = abs(mu(B2, j2) - mu(B2, j))
        s = max(abs(x) for x in j) + max(abs(x) for x in j2)
        assert ge_pow(4 * gap, s, DELTA)


def test_weight_operator_values_and_commutator():
    part = partition()
    weight = cluster_weight_operator(part)
    # singletons carry their own squared sup-norm
    singleton = next(c for c in part.clusters
                     if len(c.members) == 1 and c.M_alpha > 2)
    j = singleton.members[0]
    assert weight.get(j, j) == singleton.M_alpha**2
    # the origin cluster contains the unit modes, so its weight is 1
    origin = part.clusters[part.cluster_of((0, 0))]
    assert origin.M_alpha == 1
    for j in origin.members:
        assert weight.get(j, j) == 1
    rng = random.Random(2)
    Q = random_cross_cluster_matrix(part, 80, rng)
    q_d, _ = dn_split(Q + BlockMatrix.from_entries(
        8, 2, {((1, 0), (0, 1)): QQi(1, 2)}), part)
    assert commutator(q_d, weight).entries == {}


def test_norm_equivalence_reported():
    part = partition()
    c, C = norm_equivalence_constants(part, r=2.0)
    assert 0 < c <= C


def test_decay_profile_identity():
    entries = {((i, j), (i, j)): Fr(1)
               for i in range(-3, 4) for j in range(-3, 4)}
    Q = BlockMatrix.from_entries(3, 2, entries)
    prof = decay_profile(Q, sigma=2.0, n_list=[1, 3])
    expected = max(1.0 / (1 + 2 * max(abs(i), abs(j))) ** 2
                   for i in range(-3, 4) for j in range(-3, 4))
    assert prof.seminorms[1] == pytest.approx(expected)
    assert prof.seminorms[3] == pytest.approx(expected)
    assert prof.seminorms[1] <= 1.0


def test_decay_profile_single_entry():
    Q = BlockMatrix.from_entries(6, 1, {((6,), (0,)): Fr(1)})
    prof = decay_profile(Q, sigma=1.5, n_list=[2], s_list=[1])
    assert prof.seminorms[2] == pytest.approx((1 + 6) ** 2 / (1 + 6) ** 1.5)
    assert prof.s_norms[1.0] == pytest.approx(6.0)  # max(1,|h|)^s * |v|


def test_decay_profile_zero():
    prof = decay_profile(BlockMatrix(3, 1, {}), sigma=0.0, n_list=[1, 2])
    assert all(v == 0.0 for v in prof.seminorms.values())


def test_remainder_support_clean_and_negative():
    part = partition()
    rng = random.Random(3)
    W = random_cross_cluster_matrix(part, 120, rng)
    sol = solve_homological(B2, W, part, DELTA)
    assert verify_remainder_support(sol) == []
    # an artificial near-diagonal remainder entry must be flagged; at
    # delta = 1/2 the support floor sqrt(10)/2 exceeds the offset 1
    bad = BlockMatrix.from_entries(8, 2, {((5, 0), (5, 1)): QQi(1, 0)})
    from toruskit.homological import HomologicalSolution
    fake = HomologicalSolution(X=BlockMatrix(8, 2, {}), R=bad, delta=Fr(1, 2))
    assert verify_remainder_support(fake) == [((5, 0), (5, 1))]


def test_triplet_round_trip():
    part = partition()
    rng = random.Random(4)
    Q = random_cross_cluster_matrix(part, 30, rng)
    again = BlockMatrix.from_triplets(8, 2, Q.to_triplets())
    assert again == Q
