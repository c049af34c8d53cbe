"""Smoke test for the divlab Python module.

Build and install first:  cd crates/py && maturin build --release && pip install <wheel>
Then run:                 python3 python/smoke_test.py
"""

import math
from fractions import Fraction

import divlab


def brute_hq(x, y, z, allowed):
    def in_s(n):
        m, p = n, 2
        while p * p <= m:
            while m % p == 0:
                if not allowed(p):
                    return False
                m //= p
            p += 1
        return m == 1 or allowed(m)

    return sum(
        1
        for n in range(1, x + 1)
        if in_s(n) and any(n % d == 0 for d in range(y + 1, z + 1))
    )


def main():
    all_primes = divlab.PrimeSet("all", 10_000)
    one_mod_4 = divlab.PrimeSet("congruence:4:1", 10_000)
    assert abs(one_mod_4.delta - 0.5) < 1e-12
    assert one_mod_4.members()[:4] == [5, 13, 17, 29]

    for ps, allowed in [(all_primes, lambda p: True), (one_mod_4, lambda p: p % 4 == 1)]:
        for x, y, z in [(20, 3, 6), (500, 10, 25), (2000, 40, 80)]:
            got = divlab.count_hq(ps, x, y, z)
            assert got == divlab.count_hq(ps, x, y, z, method="exhaustive")
            assert got == brute_hq(x, y, z, allowed), (ps, x, y, z)

    n = 30
    table = {a * b for a in range(1, n + 1) for b in range(1, n + 1)}
    assert divlab.count_aq(all_primes, n) == len(table)

    divs = divlab.divisors_of(12)
    assert divs == [1, 2, 3, 4, 6, 12]
    assert divlab.w_count(12) == sum(1 for d in divs for e in divs if e <= 2 * d and d <= 2 * e)
    assert divlab.l_measure(1) == math.log(2)

    lam, v = 7, 10
    exact = sum(Fraction(lam) ** k / math.factorial(k) * (v - k + 1) for k in range(1, v + 1)) / v
    assert abs(divlab.poisson_sum(lam, v) - float(exact)) < 1e-12 * float(exact)
    assert abs(divlab.key_identity_rhs(lam, v) - float(exact)) < 1e-12 * float(exact)
    assert abs(divlab.g_exponent(1.0) - (1 - (1 + math.log(math.log(2))) / math.log(2))) < 1e-15
    assert divlab.classify_regime(10_000, 10_000)["regime"] == "iii"

    pmf = sum(math.exp(k * math.log(100) - 100 - math.lgamma(k + 1)) for k in range(101))
    assert abs(divlab.partial_poisson(100, 0) - pmf) < 1e-12

    exact_q = divlab.qk_exact(0.5, 2.0, 2)
    # P(ξ_1 ≥ 1/4, ξ_2 ≥ 3/4) for two ordered uniforms, integrated by hand
    assert abs(exact_q - 5 / 16) < 1e-15
    est = divlab.qk_mc(0.5, 2.0, 2, 200_000, 11)
    assert abs(est["estimate"] - exact_q) <= 4 * est["std_error"]
    assert est == divlab.qk_mc(0.5, 2.0, 2, 200_000, 11)

    tables = divlab.run_experiment('experiment = "poisson-phase"\nlambda = [100.0]\nv = [100.0]\n')
    assert tables["poisson_regimes"].splitlines()[1].split(",")[3] == "iii"

    results = divlab.verify("key-identity,phase-predictor")
    assert [r[0] for r in results] == ["C1:key-identity", "C6:phase-predictor"]
    assert all(r[1] for r in results)

    try:
        divlab.count_hq(all_primes, 10**6, 1, 2)
    except ValueError as e:
        assert "10000" in str(e)
    else:
        raise AssertionError("expected a range error")

    print("smoke test passed")


if __name__ == "__main__":
    main()
