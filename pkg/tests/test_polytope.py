import math
from fractions import Fraction

import pytest

from wsdlab.polytope import (
    DegenerateDualError,
    Polytope,
    connected_kernel_generators,
    dual_polytope,
    enumerate_facets,
    finite_coset_representatives,
    has_property_sd,
    kernel_data,
    lattice_maps,
    simplex_pair,
    smith_normal_form,
    verify_duality_identities,
)


def brute_kernel_count(mat, denom):
    """Count kernel points on the (1/denom)-grid of the torus by enumeration.

    Independent of the Smith-form route: walks all denom^cols grid points and
    tests membership directly.  Only usable for small matrices.
    """
    rows = len(mat)
    cols = len(mat[0])
    count = 0
    idx = [0] * cols
    total = denom**cols
    for k in range(total):
        x = k
        for j in range(cols):
            idx[j] = x % denom
            x //= denom
        ok = True
        for i in range(rows):
            s = sum(mat[i][j] * idx[j] for j in range(cols))
            if s % denom != 0:
                ok = False
                break
        if ok:
            count += 1
    return count


def test_simplex_pair_small_cases():
    p1, d1 = simplex_pair(1)
    assert p1.vertices == ((1,), (-1,))
    assert d1.vertices == ((1,), (-1,))
    p2, d2 = simplex_pair(2)
    assert p2.vertices == ((2, -1), (-1, 2), (-1, -1))
    assert d2.vertices == ((1, 0), (0, 1), (-1, -1))


@pytest.mark.parametrize("n", range(1, 7))
def test_simplex_pair_structure(n):
    p, d = simplex_pair(n)
    assert p.vertex_count == d.vertex_count == n + 1
    assert p.affine_rank() == d.affine_rank() == n
    # vertex sums vanish coordinatewise: both simplices are balanced
    for poly in (p, d):
        assert all(sum(col) == 0 for col in zip(*poly.vertices))


def test_polytope_rejects_bad_input():
    with pytest.raises(ValueError):
        Polytope(((1, 0), (1, 0)))
    with pytest.raises(ValueError):
        Polytope(((1, 0), (0,)))


def test_lattice_maps_match_hand_matrices():
    m = lattice_maps(2)
    assert m.primal.matrix == ((1, 0, -1), (0, 1, -1))
    assert m.dual.matrix == ((2, -1, -1), (-1, 2, -1))
    assert m.primal_t.matrix == ((1, 0), (0, 1), (-1, -1))
    m1 = lattice_maps(1)
    assert m1.primal.matrix == ((1, -1),)
    assert m1.dual.matrix == ((1, -1),)


@pytest.mark.parametrize("n", range(1, 7))
def test_duality_identities(n):
    rep = verify_duality_identities(n)
    assert rep.passed, rep.failures
    assert rep.composite == tuple(
        tuple((n + 1) if i == j else 0 for j in range(n)) for i in range(n)
    )


def test_smith_normal_form_reconstructs():
    mats = [
        ((2, -1, -1), (-1, 2, -1)),
        ((1, 0, -1), (0, 1, -1)),
        ((6, 4), (4, 6)),
        ((0, 0), (0, 0)),
        ((3,),),
    ]
    for mat in mats:
        snf = smith_normal_form(mat)
        m, n = len(mat), len(mat[0])
        # U M V == D, exactly
        um = [
            [sum(snf.u[i][k] * mat[k][j] for k in range(m)) for j in range(n)]
            for i in range(m)
        ]
        umv = [
            [sum(um[i][k] * snf.v[k][j] for k in range(n)) for j in range(n)]
            for i in range(m)
        ]
        assert tuple(tuple(r) for r in umv) == snf.d
        diag = snf.diagonal
        assert all(d >= 0 for d in diag)
        for a, b in zip(diag, diag[1:]):
            if b != 0:
                assert a != 0 and b % a == 0
        # off-diagonal must vanish
        for i in range(m):
            for j in range(n):
                if i != j:
                    assert snf.d[i][j] == 0


def test_kernel_data_examples():
    m = lattice_maps(2)
    kd = kernel_data(m.primal)
    assert (kd.connected_rank, kd.torsion_invariants) == (1, ())
    kd = kernel_data(m.dual)
    assert (kd.connected_rank, kd.torsion_invariants) == (1, (3,))
    assert kd.component_group_order == 3
    assert kd.group_order == math.inf
    kd = kernel_data(((0,),))
    assert (kd.connected_rank, kd.torsion_invariants) == (1, ())


@pytest.mark.parametrize("n", [1, 2, 3])
def test_kernel_data_against_grid_enumeration(n):
    """Grid-count oracle: on a (1/L)-grid a kernel with connected rank c and
    component order t meets the grid in t * L^c points, provided every torsion
    invariant divides L."""
    maps = lattice_maps(n)
    for lm in (maps.primal, maps.dual):
        kd = kernel_data(lm)
        L = 12
        assert all(L % t == 0 for t in kd.torsion_invariants)
        expected = kd.component_group_order * L**kd.connected_rank
        assert brute_kernel_count(lm.matrix, L) == expected


@pytest.mark.parametrize("n", [1, 2, 3])
def test_composite_kernel_order_brute_force(n):
    """The composite map kernel has order (n+1)^n; enumerate it directly on
    the (1/(n+1))-grid, where the whole kernel lives."""
    maps = lattice_maps(n)
    comp = tuple(
        tuple(
            sum(maps.primal.matrix[i][k] * maps.dual_t.matrix[k][j] for k in range(n + 1))
            for j in range(n)
        )
        for i in range(n)
    )
    assert brute_kernel_count(comp, n + 1) == (n + 1) ** n
    kd = kernel_data(comp)
    assert kd.group_order == (n + 1) ** n


def test_finite_coset_representatives_are_kernel_points():
    m = lattice_maps(2).dual
    reps = finite_coset_representatives(m)
    assert len(reps) == 3
    for rep in reps:
        img = [
            sum(Fraction(m.matrix[i][j]) * rep[j] for j in range(3)) for i in range(2)
        ]
        assert all(f.denominator == 1 for f in img)
    # distinct modulo the diagonal circle: differences must not be constant
    (g,) = connected_kernel_generators(m)
    assert g in ((1, 1, 1), (-1, -1, -1))
    for i in range(3):
        for j in range(i + 1, 3):
            diff = [a - b for a, b in zip(reps[i], reps[j])]
            assert len({f % 1 for f in diff}) > 1


def test_connected_generators_span_real_kernel():
    m = lattice_maps(3).primal
    gens = connected_kernel_generators(m)
    assert len(gens) == 1
    g = gens[0]
    assert all(sum(row[j] * g[j] for j in range(4)) == 0 for row in m.matrix)


def test_dual_polytope_of_simplices():
    for n in range(1, 5):
        p, d = simplex_pair(n)
        dv = dual_polytope(p)
        assert sorted(tuple(int(f) for f in v) for v in dv) == sorted(d.vertices)
        pv = dual_polytope(d)
        assert sorted(tuple(int(f) for f in v) for v in pv) == sorted(p.vertices)


def test_facet_enumeration_square():
    sq = Polytope(((1, 1), (-1, 1), (-1, -1), (1, -1)))
    facets = enumerate_facets(sq)
    assert len(facets) == 4
    dv = dual_polytope(sq)
    assert sorted(dv) == sorted(
        [
            (Fraction(1), Fraction(0)),
            (Fraction(-1), Fraction(0)),
            (Fraction(0), Fraction(1)),
            (Fraction(0), Fraction(-1)),
        ]
    )


@pytest.mark.parametrize("n", range(1, 7))
def test_simplices_have_property_sd(n):
    p, _ = simplex_pair(n)
    verdict = has_property_sd(p)
    assert verdict.holds, verdict.diagnostic
    assert verdict.kernel_order == (n + 1) ** n
    # and the roles are symmetric
    _, d = simplex_pair(n)
    assert has_property_sd(d).holds


def test_property_sd_square_diagnostic():
    sq = Polytope(((1, 1), (-1, 1), (-1, -1), (1, -1)))
    verdict = has_property_sd(sq)
    assert verdict.clauses["dual_integral"] is True
    assert verdict.clauses["counts_and_dims_match"] is True
    assert verdict.clauses["kernel_finite"] is True
    assert verdict.holds
    assert sorted(tuple(int(x) for x in v) for v in verdict.dual_vertices) == sorted(
        [(1, 0), (-1, 0), (0, 1), (0, -1)]
    )


def test_property_sd_rejects_origin_on_boundary():
    tri = Polytope(((0, 0), (1, 0), (0, 1)))
    verdict = has_property_sd(tri)
    assert not verdict.holds
    assert "interior" in verdict.diagnostic


def test_property_sd_scaled_simplex_fails_integrality():
    # doubling the primal simplex halves the dual, which stops being integral
    p, _ = simplex_pair(2)
    big = Polytope(tuple(tuple(2 * x for x in v) for v in p.vertices))
    verdict = has_property_sd(big)
    assert not verdict.holds
    assert verdict.clauses["dual_integral"] is False


def test_dual_polytope_raises_without_interior_origin():
    with pytest.raises(DegenerateDualError):
        dual_polytope(Polytope(((0, 0), (1, 0), (0, 1))))


def test_not_full_dimensional_rejected():
    flat = Polytope(((0, 0), (1, 0), (2, 0)))
    with pytest.raises(ValueError):
        has_property_sd(flat)
