"""Hypothesis strategies shared by the test modules."""
from hypothesis import strategies as st

from netfib.dsl import FUNCTIONS, BinOp, Call, InputVar, Neg, Num, Param, SelfVar

names = st.from_regex(r"[A-Za-z_][A-Za-z0-9_.]{0,6}", fullmatch=True)
# parse never yields a negative literal (a leading minus is Neg), so keep them non-negative
literals = st.floats(min_value=0.0, allow_nan=False, allow_infinity=False).map(lambda v: Num(abs(v)))
leaves = st.one_of(
    literals,
    st.integers(0, 5).map(SelfVar),
    st.builds(InputVar, st.integers(0, 3), st.integers(0, 3)),
    names.map(Param),
)
exprs = st.recursive(
    leaves,
    lambda sub: st.one_of(
        sub.map(Neg),
        st.builds(BinOp, st.sampled_from("+-*/^"), sub, sub),
        st.builds(Call, st.sampled_from(sorted(FUNCTIONS)), sub),
    ),
    max_leaves=24,
)
