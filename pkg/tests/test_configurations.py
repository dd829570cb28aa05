"""
Tests for edge configurations, loops, clusters and spins
"""
from functools import reduce
from operator import xor

import numpy as np
import pytest

from hexloop.configurations import (
    EdgeConfig,
    SpinConfig,
    bits_matrix,
    brute_force_even_count,
    component_counts,
    component_labels,
    components,
    count_even_subgraphs,
    count_faces,
    decompose_loops,
    is_loop_config,
    loops_from_spins,
    matrix_indices,
    max_surrounding_loop,
    origin_loop_length,
    origin_sizes,
    spin_edge_domains,
    spins_from_loops,
)
from hexloop.errors import DomainMismatch, NotEven
from hexloop.hexlattice import HexVertex


def _outer_loop(domain):
    return EdgeConfig(domain, reduce(xor, domain.face_masks))


def _face(domain, q, r):
    return EdgeConfig.face_boundary(domain, domain.face_index[(q, r)])


def test_hex_codec_puts_edge_zero_first(single_hex):
    assert EdgeConfig.full(single_hex).to_hex() == "fc"
    assert EdgeConfig.from_edges(single_hex, [0]).to_hex() == "80"
    assert EdgeConfig.empty(single_hex).to_hex() == "00"
    cfg = EdgeConfig.from_edges(single_hex, [1, 4])
    assert EdgeConfig.from_hex(single_hex, cfg.to_hex()) == cfg


def test_hex_codec_rejects_bad_input(single_hex):
    with pytest.raises(ValueError):
        EdgeConfig.from_hex(single_hex, "fd")
    with pytest.raises(ValueError):
        EdgeConfig.from_hex(single_hex, "fc0")


def test_bits_must_fit_domain(single_hex):
    with pytest.raises(ValueError):
        EdgeConfig(single_hex, 1 << 6)
    with pytest.raises(ValueError):
        EdgeConfig.from_edges(single_hex, [6])


def test_set_operations_need_same_domain(single_hex, two_hex):
    a = EdgeConfig.from_edges(single_hex, [0, 1])
    b = EdgeConfig.from_edges(single_hex, [1, 2])
    assert (a | b).edges() == [0, 1, 2]
    assert (a & b).edges() == [1]
    assert (a & b).issubset(a)
    with pytest.raises(DomainMismatch):
        a | EdgeConfig.empty(two_hex)


def test_single_hexagon_is_one_loop(single_hex):
    full = EdgeConfig.full(single_hex)
    assert is_loop_config(full)
    decomposition = decompose_loops(full)
    assert decomposition.count == 1
    assert decomposition.loops[0].length == 6
    assert origin_loop_length(full) == 6
    assert max_surrounding_loop(full) == 6


def test_empty_configuration(single_hex):
    empty = EdgeConfig.empty(single_hex)
    assert decompose_loops(empty).count == 0
    assert origin_loop_length(empty) == 1
    assert max_surrounding_loop(empty) == 0


def test_non_even_configuration_is_rejected(single_hex):
    path = EdgeConfig.from_edges(single_hex, [0])
    assert not is_loop_config(path)
    with pytest.raises(NotEven):
        decompose_loops(path)
    with pytest.raises(NotEven):
        max_surrounding_loop(path)


def test_surrounding_loop_uses_ray_parity(hex_ball1):
    outer = _outer_loop(hex_ball1)
    assert outer.size == 18
    # the origin is an interior vertex, so the outer loop surrounds it without touching it
    assert origin_loop_length(outer) == 1
    assert max_surrounding_loop(outer) == 18


def test_loop_beside_origin_does_not_surround(hex_ball1):
    assert max_surrounding_loop(_face(hex_ball1, 1, -1)) == 0
    assert max_surrounding_loop(_face(hex_ball1, 0, 0)) == 6


def test_surrounding_loop_picks_the_largest(hex_ball1):
    notched = EdgeConfig(hex_ball1, _outer_loop(hex_ball1).bits ^ _face(hex_ball1, 1, -1).bits)
    assert decompose_loops(notched).count == 1
    assert max_surrounding_loop(notched) == 18
    nested = EdgeConfig(hex_ball1, _outer_loop(hex_ball1).bits | _face(hex_ball1, 0, 0).bits)
    assert decompose_loops(nested).count == 2
    assert max_surrounding_loop(nested) == 18


def test_surrounding_loop_at_other_vertex(hex_ball1):
    loop = _face(hex_ball1, 1, -1)
    assert max_surrounding_loop(loop, HexVertex(1, -1, 0)) == 6
    with pytest.raises(ValueError):
        max_surrounding_loop(loop, HexVertex(9, 9, 0))


def test_spin_round_trip(hex_ball1):
    outer = _outer_loop(hex_ball1)
    spins = spins_from_loops(outer)
    assert spins.values == (-1,) * hex_ball1.num_faces
    assert loops_from_spins(spins) == outer
    single = SpinConfig.from_minus_faces(hex_ball1, [3])
    assert loops_from_spins(single) == EdgeConfig.face_boundary(hex_ball1, 3)
    assert SpinConfig.from_bits(hex_ball1, single.to_bits()) == single


def test_spin_edge_domains(hex_ball1):
    plus, minus = spin_edge_domains(SpinConfig.from_minus_faces(hex_ball1, range(hex_ball1.num_faces)))
    assert plus.size == 0
    assert minus.size == hex_ball1.num_edges - len(hex_ball1.boundary)
    plus, minus = spin_edge_domains(SpinConfig.all_plus(hex_ball1))
    assert plus == EdgeConfig.full(hex_ball1)
    assert minus.size == 0


def test_components(single_hex):
    empty = components(EdgeConfig.empty(single_hex))
    assert (empty.k, empty.origin_size) == (6, 1)
    full = components(EdgeConfig.full(single_hex))
    assert (full.k, full.origin_size) == (1, 6)


def test_even_subgraph_count(two_hex):
    full = EdgeConfig.full(two_hex)
    assert count_even_subgraphs(full) == 4
    assert brute_force_even_count(full) == 4
    tree = EdgeConfig.from_edges(two_hex, [0, 1, 2])
    assert count_even_subgraphs(tree) == brute_force_even_count(tree) == 1


@pytest.mark.parametrize("fixture,faces", [("single_hex", 2), ("two_hex", 3), ("hex_ball1", 8)])
def test_face_count_of_full_graph(request, fixture, faces):
    domain = request.getfixturevalue(fixture)
    assert count_faces(EdgeConfig.full(domain)) == faces
    assert count_faces(EdgeConfig.empty(domain)) == 1


def test_face_count_matches_euler(two_hex):
    rng = np.random.default_rng(3)
    for bits in rng.integers(0, 1 << two_hex.num_edges, size=40):
        cfg = EdgeConfig(two_hex, int(bits))
        stats = components(cfg)
        assert count_faces(cfg) == cfg.size - two_hex.num_vertices + stats.k + 1


def test_vectorised_helpers_agree(single_hex):
    indices = np.arange(1 << single_hex.num_edges)
    matrix = bits_matrix(indices, single_hex.num_edges)
    assert np.array_equal(matrix_indices(matrix), indices)
    labels = component_labels(matrix, single_hex)
    counts = component_counts(labels)
    sizes = origin_sizes(labels, single_hex.origin_index)
    for i in indices:
        stats = components(EdgeConfig(single_hex, int(i)))
        assert counts[i] == stats.k
        assert sizes[i] == stats.origin_size


def test_even_count_matches_brute_force_on_random_subgraphs(two_hex, hex_ball1):
    rng = np.random.default_rng(21)
    for domain, draws in ((two_hex, 60), (hex_ball1, 15)):
        for _ in range(draws):
            keep = rng.random(domain.num_edges) < (0.6 if domain is two_hex else 0.3)
            cfg = EdgeConfig.from_edges(domain, np.flatnonzero(keep).tolist())
            assert count_even_subgraphs(cfg) == brute_force_even_count(cfg)


def test_batched_labels_agree_with_scipy_components(hex_ball1):
    rng = np.random.default_rng(8)
    matrix = rng.random((200, hex_ball1.num_edges)) < 0.45
    counts = component_counts(component_labels(matrix, hex_ball1))
    for row, count in zip(matrix_indices(matrix), counts):
        assert components(EdgeConfig(hex_ball1, int(row))).k == count
