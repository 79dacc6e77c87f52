"""Smoke test for the blochnet Python extension.

Build and install first, e.g. `maturin develop -m crates/python/Cargo.toml`,
then run `python python/smoke_test.py`.
"""

import math

import blochnet


def close(a, b, tol):
    assert abs(a - b) <= tol, f"{a} vs {b}"


def main():
    n = 12
    chain = blochnet.Network.chain(n)
    expected = sorted(-2.0 * math.cos(math.pi * j / (n + 1)) for j in range(1, n + 1))
    for e, x in zip(chain.eigenvalues(), expected):
        close(e, x, 1e-12)

    net = blochnet.Network.ybeam(100, 100, 100, 1 / math.sqrt(2), 1 / math.sqrt(2))
    assert net.chain_labels() == ["A", "B", "C"]
    psi = blochnet.gaussian_packet(net, "A", 50.0, 0.1)
    (later,) = blochnet.evolve(net, psi, [45.0])
    close(sum(abs(a) ** 2 for a in later), 1.0, 1e-10)
    assert blochnet.reflection_factor(net, psi, 45.0) < 1e-3
    assert blochnet.concurrence(net, later) > 0.99

    t, r = blochnet.film_coefficients(200, math.pi / 3, 0.1)
    close(t + r, 1.0, 1e-6)

    params = dict(n=0, theta=math.pi / 5, input=6, arm=5)
    ring = blochnet.matched_network("q-quarter-flux", **params)
    dec = blochnet.reduce(ring, "q-quarter-flux", **params)
    assert dec.residual <= 1e-12, dec.report()
    assert sum(dec.lengths) == ring.dim

    print("blochnet python smoke test: ok")


if __name__ == "__main__":
    main()
