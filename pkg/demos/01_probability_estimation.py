"""Estimating sequence probabilities with add-one, add-half, and the mixture.

Walks through the small worked examples that motivate each estimator:
conditionals after 01010, chain-rule joint probabilities, fixed-order
Markov pricing, and the order-weighted mixture that needs no order choice.
"""

import numpy as np

from uctseries import (
    Alphabet,
    KtState,
    MultiSample,
    SymbolSeq,
    kt_log2prob,
    laplace_cond_log2prob,
    laplace_log2prob,
    r_cond_log2prob,
    r_log2prob,
)

binary = Alphabet.of_size(2)
x = SymbolSeq.from_labels(binary, "01010")

print("=== Add-one (Laplace) estimator ===")
print("after x = 01010:")
for a in range(2):
    p = 2 ** laplace_cond_log2prob(a, x)
    print(f"  P(next = {a}) = {p:.6f}")
print(f"joint: L(01010)  = {2 ** laplace_log2prob(x):.8f}  (exactly 1/60)")
x6 = SymbolSeq.from_labels(binary, "010101")
print(f"joint: L(010101) = {2 ** laplace_log2prob(x6):.8f}  (exactly 1/140)")

print()
print("=== Add-half estimator, order 0 ===")
st = KtState(binary, 0).consume(x)
print(f"P(next = 0 | 01010) = {2 ** st.conditional_log2prob(0):.6f}  (7/12)")
print(f"joint: K0(01010) = {2 ** kt_log2prob(x, 0):.8f}  (3/256)")

print()
print("=== Markov orders on one sequence ===")
y = SymbolSeq.from_labels(binary, "00101100111010")
for m in range(4):
    print(f"  order {m}: K{m}(x) = {2 ** kt_log2prob(y, m):.3e}")

print()
print("=== Several independent samples (no concatenation) ===")
ms = MultiSample([
    SymbolSeq.from_labels(binary, "0101"),
    SymbolSeq.from_labels(binary, "101"),
])
for m in range(5):
    print(f"  K{m}(0101 <> 101) = {2 ** kt_log2prob(ms, m):.6f}")
print(f"  mixture: R(0101 <> 101) = {2 ** r_log2prob(ms):.6f}")

print()
print("=== The mixture uses sample evidence for prediction ===")
print(f"unconditional R(01)          = {2 ** r_log2prob(SymbolSeq.from_labels(binary, '01')):.5f}")
cond = 2 ** r_cond_log2prob([0, 1], ms)
print(f"R(01 | 0101 <> 101)          = {cond:.5f}")
print("(the alternating samples make a fresh 01 much more likely)")

print()
print("=== Per-letter codelength approaches the entropy rate ===")
rng = np.random.default_rng(0)
from uctseries import MarkovSource

chain = MarkovSource(binary, 1, [[0.85, 0.15], [0.15, 0.85]])
for t in (100, 1000, 10000, 100000):
    z = chain.sample(t, rng)
    bits = -r_log2prob(z) / t
    print(f"  t = {t:6d}: {bits:.4f} bits/letter (entropy rate {chain.entropy_rate():.4f})")
