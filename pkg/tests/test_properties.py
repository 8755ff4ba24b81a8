"""Property-based checks of the total functions at the decoding boundary."""
import math

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from crudesched import parse_instance
from crudesched.model import decode_genome, decode_tank_slot, encode_decisions
from crudesched.oracle import oracle_fitness
from crudesched.simulate import Evaluator, proportional_withdrawal

from conftest import tiny_doc

_INSTANCE = parse_instance(tiny_doc())
_DIM = _INSTANCE.layout.dimension

anything = st.floats(allow_nan=True, allow_infinity=False, width=32)


@given(st.floats(allow_nan=True, allow_infinity=True), st.integers(1, 50))
def test_slot_decoding_is_total(value, n_tanks):
    slot = decode_tank_slot(value, n_tanks)
    assert 0 <= slot <= n_tanks


@settings(max_examples=200, deadline=None)
@given(st.lists(anything, min_size=_DIM, max_size=_DIM))
def test_decode_encode_is_stable(values):
    g = np.asarray(values, dtype=float)
    decs = decode_genome(g, _INSTANCE)
    g2 = encode_decisions(decs, _INSTANCE)
    decs2 = decode_genome(g2, _INSTANCE)
    for a, b in zip(decs, decs2):
        assert a.rt_slots == b.rt_slots
        assert a.ct_slots == b.ct_slots


@settings(max_examples=100, deadline=None)
@given(st.lists(anything, min_size=_DIM, max_size=_DIM))
def test_evaluation_is_total_and_matches_oracle(values):
    g = np.asarray(values, dtype=float)
    fit = Evaluator(_INSTANCE).evaluate(g)
    assert fit.cvn >= 0 and fit.cv >= 0.0 and fit.objective >= 0.0
    ref = oracle_fitness(_INSTANCE, g)
    assert fit.cvn == ref.cvn
    assert math.isclose(fit.cv, ref.cv, abs_tol=1e-9)
    assert fit.objective == ref.objective


@given(
    st.dictionaries(st.integers(1, 5),
                    st.floats(0.0, 1e6, allow_nan=False), max_size=5),
    st.floats(0.0, 1e6, allow_nan=False),
)
def test_withdrawal_conserves_mass(contents, draw):
    out = proportional_withdrawal(contents, draw)
    total = sum(contents.values())
    assert math.isclose(
        sum(out.values()), min(draw, total) if total > 0 else 0.0,
        rel_tol=1e-12, abs_tol=1e-12,
    )
    assert all(v >= 0.0 for v in out.values())
