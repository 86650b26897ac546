import math
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tenseg.topology import (
    BAR_AREA,
    STRING_AREA,
    DegenerateGeometryError,
    InvalidParameterError,
    MemberSpec,
    Structure,
    generate_dbar,
    generate_lander,
    generate_prism,
    member_geometry,
)


def test_dbar_geometry(dbar):
    np.testing.assert_allclose(dbar.nodes[:, 0], [1, 0, 0], atol=1e-15)
    np.testing.assert_allclose(dbar.nodes[:, 1], [0, 1, 0], atol=1e-15)
    lengths, _, _ = member_geometry(dbar)
    np.testing.assert_allclose(lengths, [math.sqrt(2)] * 4 + [2, 2], rtol=1e-15)
    assert (dbar.n_bars, dbar.n_strings, dbar.n_members) == (4, 2, 6)
    assert dbar.actuated == (0, 1)


@pytest.mark.parametrize("gen", [generate_dbar, generate_prism, generate_lander])
def test_connectivity_rows(gen):
    s = gen()
    np.testing.assert_array_equal(s.C.sum(axis=1), 0)
    for row in s.C:
        nz = np.flatnonzero(row)
        assert len(nz) == 2
        assert row[nz[0]] == -1 and row[nz[1]] == 1
    Ea = s.selection_matrix()
    np.testing.assert_array_equal(Ea.T @ Ea, np.eye(Ea.shape[1]))
    np.testing.assert_array_equal(Ea.T @ s.n, s.n[s.free_dofs])


def test_member_counts_match_output_dimensions(benchmarks):
    assert {k: s.n_members for k, s in benchmarks.items()} == {"dbar": 6, "prism": 12, "lander": 30}


def test_prism_layout(prism):
    assert prism.n_nodes == 6 and prism.n_members == 12
    assert (prism.n_bars, prism.n_strings) == (3, 9)
    degree = Counter(i for pair in prism.strings for i in pair)
    assert all(degree[i] == 3 for i in range(6))
    assert all(prism.strings[a][0] < 3 <= prism.strings[a][1] for a in prism.actuated)


def test_prism_zero_twist_vertical_length():
    s = generate_prism(0.25, 0.5, 0.0)
    lengths, _, _ = member_geometry(s)
    vertical = s.n_bars + s.actuated[0]
    assert s.pairs[vertical] == (0, 4)
    assert lengths[vertical] == pytest.approx(math.sqrt(0.25 + 0.1875), rel=1e-15)


def test_lander_counts(lander):
    assert (lander.n_nodes, lander.n_bars, lander.n_strings, lander.n_members) == (12, 6, 24, 30)


def test_lander_string_graph_is_4_regular_and_bars_match(lander):
    degree = Counter(i for pair in lander.strings for i in pair)
    assert sorted(degree.values()) == [4] * 12
    bar_nodes = [i for pair in lander.bars for i in pair]
    assert sorted(bar_nodes) == list(range(12))


def test_lander_wiring_example(lander):
    N = lander.nodes.T
    L, d = 1.0, 0.5

    def index(p):
        hits = np.flatnonzero(np.all(np.abs(N - p) < 1e-12, axis=1))
        assert len(hits) == 1
        return int(hits[0])

    hub = index([L / 2, d / 2, 0])
    expected = {index(p) for p in ([0, L / 2, d / 2], [0, L / 2, -d / 2], [d / 2, 0, L / 2], [d / 2, 0, -L / 2])}
    neighbours = {j if i == hub else i for i, j in lander.strings if hub in (i, j)}
    assert neighbours == expected
    acted = {lander.strings[a] for a in lander.actuated}
    assert acted == {tuple(sorted((hub, index([0, L / 2, d / 2])))), tuple(sorted((hub, index([d / 2, 0, L / 2]))))}


def test_lander_brute_force_adjacency(lander):
    """Rebuild the string graph from coordinates alone: each node links to the
    4 nearest nodes lying on bars of the other two axes."""
    N = lander.nodes.T
    edges = set()
    for i in range(12):
        dist = np.linalg.norm(N - N[i], axis=1)
        dist[[j for j in range(12) if j // 4 == i // 4]] = np.inf
        for j in np.argsort(dist)[:4]:
            edges.add(tuple(sorted((i, int(j)))))
    assert edges == set(lander.strings)


def test_materials(dbar):
    bars = dbar.members[:4]
    strings = dbar.members[4:]
    assert all(m.area == pytest.approx(math.pi * (0.01**2 - 0.008**2)) for m in bars)
    assert all(m.area == pytest.approx(math.pi * 0.002**2) for m in strings)
    assert BAR_AREA > STRING_AREA
    assert all(m.density == 7850.0 and m.youngs_modulus == 200e9 for m in dbar.members)
    assert dbar.masses[4] == pytest.approx(7850.0 * STRING_AREA * 2.0)


@pytest.mark.parametrize(
    "call",
    [
        lambda: generate_dbar(0.0),
        lambda: generate_dbar(-1.0),
        lambda: generate_prism(0.0, 0.5),
        lambda: generate_prism(0.25, -0.5),
        lambda: generate_lander(1.0, 1.0),
        lambda: generate_lander(1.0, 0.0),
        lambda: generate_lander(-1.0, 0.5),
    ],
)
def test_invalid_parameters(call):
    with pytest.raises(InvalidParameterError):
        call()


def test_structure_validation():
    nodes = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0]], dtype=float).T
    m = MemberSpec("bar", 1.0, 1.0, 1.0, 1.0)
    with pytest.raises(InvalidParameterError, match="isolated"):
        Structure(nodes, ((0, 1),), (), (m,), (0, 1, 2))
    with pytest.raises(InvalidParameterError, match="duplicate"):
        Structure(nodes, ((0, 1), (1, 0)), (), (m, m), (0, 1, 2))
    with pytest.raises(InvalidParameterError):
        MemberSpec("bar", 1.0, 0.0, 1.0, 1.0)


def test_single_member_geometry():
    from oracles import single_member

    s = single_member([0, 0, 0], [1, 0, 0])
    lengths, U, BD = member_geometry(s)
    assert lengths[0] == 1.0
    np.testing.assert_array_equal(U[:, 0], [1, 0, 0])
    np.testing.assert_array_equal(BD[:, 0], [1, 0, 0])


def test_degenerate_member():
    from oracles import single_member

    s = single_member([0, 0, 0], [1, 0, 0])
    with pytest.raises(DegenerateGeometryError):
        member_geometry(s, np.zeros((3, 2)))


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-10, 10), min_size=3, max_size=3))
def test_lengths_translation_invariant(shift):
    s = generate_lander()
    base, _, _ = member_geometry(s)
    moved, _, _ = member_geometry(s, s.nodes + np.array(shift)[:, None])
    np.testing.assert_allclose(moved, base, rtol=1e-12, atol=1e-12)


@pytest.mark.parametrize("gen", [generate_dbar, generate_prism, generate_lander])
def test_generators_deterministic_and_roundtrip(gen, tmp_path):
    a, b = gen(), gen()
    assert a.nodes.tobytes() == b.nodes.tobytes()
    assert a.fingerprint() == b.fingerprint()
    a.save(tmp_path / "s.json")
    c = Structure.load(tmp_path / "s.json")
    assert c.fingerprint() == a.fingerprint()
    np.testing.assert_array_equal(c.nodes, a.nodes)


def test_flattened_vector_matches_columns(prism):
    n = prism.n
    for i in range(prism.n_nodes):
        np.testing.assert_array_equal(n[3 * i : 3 * i + 3], prism.nodes[:, i])
