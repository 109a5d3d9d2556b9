import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from papir.field import (
    FieldElement,
    FieldMismatchError,
    PrimeField,
    SingularMatrixError,
    fadd,
    finv,
    fmul,
    is_prime,
    mat_vec_apply,
    next_prime,
    solve_square_system,
    vandermonde,
)

from oracles import solve_mod_brute

GF7 = PrimeField(7)


def el(v, f=GF7):
    return FieldElement(v, f)


@pytest.mark.parametrize("a,b,expected", [(3, 5, 1), (0, 4, 4), (6, 1, 0)])
def test_fadd_examples(a, b, expected):
    assert fadd(el(a), el(b)) == el(expected)


@pytest.mark.parametrize("a,b,expected", [(2, 4, 1), (1, 6, 6), (0, 5, 0)])
def test_fmul_examples(a, b, expected):
    assert fmul(el(a), el(b)) == el(expected)


@pytest.mark.parametrize("a,expected", [(2, 4), (1, 1), (3, 5)])
def test_finv_examples(a, expected):
    assert finv(el(a)) == el(expected)


def test_finv_zero_raises():
    with pytest.raises(ZeroDivisionError):
        finv(el(0))


def test_operators_match_functions():
    a, b = el(5), el(3)
    assert a + b == el(1)
    assert a - b == el(2)
    assert b - a == el(5)
    assert a * b == el(1)
    assert -a == el(2)
    assert a.inverse() == el(3)


def test_mismatched_moduli_rejected():
    with pytest.raises(FieldMismatchError):
        fadd(el(1), FieldElement(1, PrimeField(11)))
    with pytest.raises(FieldMismatchError):
        fmul(el(1), el(2), PrimeField(11))


def test_non_canonical_element_rejected():
    with pytest.raises(ValueError):
        FieldElement(7, GF7)


@pytest.mark.parametrize("q", [1, 4, 9, 15, 561])
def test_composite_modulus_rejected(q):
    with pytest.raises(ValueError):
        PrimeField(q)


def test_primality_against_sieve():
    limit = 5000
    sieve = [True] * limit
    sieve[0] = sieve[1] = False
    for i in range(2, int(limit**0.5) + 1):
        if sieve[i]:
            sieve[i * i :: i] = [False] * len(sieve[i * i :: i])
    assert [n for n in range(limit) if is_prime(n)] == [n for n in range(limit) if sieve[n]]
    assert is_prime(2**61 - 1)
    assert not is_prime(3215031751)  # strong pseudoprime to bases 2, 3, 5, 7


@pytest.mark.parametrize("n,expected", [(0, 2), (2, 2), (6, 7), (12, 13), (20, 23), (60, 61)])
def test_next_prime(n, expected):
    assert next_prime(n) == expected


@pytest.mark.parametrize("q", [7, 61, 101])
def test_inverse_property_exhaustive(q):
    f = PrimeField(q)
    for a in range(1, q):
        assert fmul(el(a, f), finv(el(a, f))) == el(1, f)


@given(st.sampled_from([7, 61, 101, 2**31 - 1]), st.integers(0, 2**40), st.integers(0, 2**40), st.integers(0, 2**40))
def test_field_axioms(q, a, b, c):
    f = PrimeField(q)
    a, b, c = el(a % q, f), el(b % q, f), el(c % q, f)
    assert a + b == b + a
    assert (a + b) + c == a + (b + c)
    assert a * (b + c) == a * b + a * c
    assert a - a == el(0, f)


def test_solve_identity():
    b = [(3,), (1,), (6,)]
    I = [[1, 0, 0], [0, 1, 0], [0, 0, 1]]
    assert solve_square_system(I, b, GF7) == b


def test_solve_hand_example():
    # x1 + x2 = 4, x1 + 3 x2 = 2 over GF(7)
    assert solve_square_system([[1, 1], [1, 3]], [(4,), (2,)], GF7) == [(5,), (6,)]


def test_solve_needs_row_swap():
    A = [[0, 1], [1, 0]]
    assert solve_square_system(A, [(2,), (3,)], GF7) == [(3,), (2,)]


def test_singular_matrix_raises():
    with pytest.raises(SingularMatrixError):
        solve_square_system([[1, 2], [1, 2]], [(1,), (1,)], GF7)
    with pytest.raises(SingularMatrixError):
        solve_square_system([[0, 0], [0, 1]], [(0,), (1,)], GF7)


def test_solve_shape_errors():
    with pytest.raises(ValueError):
        solve_square_system([[1, 2]], [(1,)], GF7)
    with pytest.raises(ValueError):
        solve_square_system([[1]], [(1,), (2,)], GF7)


@pytest.mark.parametrize("q", [7, 61, 101])
def test_solve_random_invertible(q):
    f = PrimeField(q)
    r = random.Random(q)
    done = 0
    while done < 100:
        k = r.randint(1, 5)
        n = r.randint(1, 3)
        A = [[r.randrange(q) for _ in range(k)] for _ in range(k)]
        x = [tuple(r.randrange(q) for _ in range(n)) for _ in range(k)]
        b = mat_vec_apply(A, x, f)
        try:
            got = solve_square_system(A, b, f)
        except SingularMatrixError:
            continue
        assert got == x
        done += 1


def test_solve_agrees_with_exhaustive_search():
    r = random.Random(3)
    for _ in range(40):
        A = [[r.randrange(7) for _ in range(2)] for _ in range(2)]
        b = [r.randrange(7) for _ in range(2)]
        hits = solve_mod_brute(A, b, 7)
        if len(hits) == 1:
            assert solve_square_system(A, [(v,) for v in b], GF7) == [(v,) for v in hits[0]]
        else:
            with pytest.raises(SingularMatrixError):
                solve_square_system(A, [(v,) for v in b], GF7)


@given(st.data())
def test_vandermonde_submatrices_invertible(data):
    q = data.draw(st.sampled_from([7, 11, 61]))
    f = PrimeField(q)
    k = data.draw(st.integers(1, min(q, 6)))
    pts = data.draw(st.lists(st.integers(0, q - 1), min_size=k, max_size=k, unique=True))
    V = vandermonde(pts, k, f)
    x = [(i,) for i in range(k)]
    assert solve_square_system(V, mat_vec_apply(V, x, f), f) == x


def test_vandermonde_rows():
    V = vandermonde([1, 2, 3], 2, GF7)
    assert V == [[1, 1, 1], [1, 2, 3]]
