"""Verification suites: brute-force oracles against factorized forwards.

Each suite draws its own seeded stream, so adding or reordering suites
never changes another suite's trials.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from functools import reduce

import numpy as np

from .models import (
    CcpParams,
    PiNetParams,
    additive_forward_cols,
    ccp_forward,
    ccp_forward_cols,
    concat_linear_forward,
    init_ccp,
    init_chain,
    init_concat_linear,
    init_ncp,
    init_pinet,
    model_parameters,
    ncp_forward,
    ncp_forward_cols,
    pinet_forward,
    pinet_forward_cols,
    product_compose,
    spade_config,
    spade_forward,
    spade_forward_cols,
    with_parameters,
)
from .autodiff import finite_diff_check
from .oracle import build_order2_coupled_tensors, degree_probe, eval_explicit
from .rng import stream
from .tensors import hadamard, khatri_rao_chain


@dataclass
class SuiteResult:
    suite: str
    trials: int
    max_deviation: float
    tolerance: float
    passed: bool
    seconds: float
    details: dict = field(default_factory=dict)

    def report_row(self) -> dict:
        return {
            "suite": self.suite,
            "trials": self.trials,
            "max_deviation": self.max_deviation,
            "tolerance": self.tolerance,
            "verdict": "pass" if self.passed else "fail",
            "seconds": round(self.seconds, 3),
            **({"details": self.details} if self.details else {}),
        }


def run_claim1(seed: int = 0, draws: int = 200, pairs: int = 10) -> SuiteResult:
    """Order-2 coupled factorization equals its materialized tensors."""
    t0 = time.perf_counter()
    rng = stream(seed, "verify", 0)
    max_dev = 0.0
    for _ in range(draws):
        d1, d2, k, o = (int(v) for v in rng.integers(1, 6, size=4))
        p = init_ccp(rng, (d1, d2), k, o, order=2)
        p.head_bias = rng.uniform(-1.0, 1.0, o)
        oracle = build_order2_coupled_tensors(p)
        for _ in range(pairs):
            z1, z2 = rng.uniform(-1, 1, d1), rng.uniform(-1, 1, d2)
            dev = np.max(
                np.abs(eval_explicit(oracle, [z1, z2]) - ccp_forward(p, [z1, z2]))
            )
            max_dev = max(max_dev, float(dev))
    return SuiteResult(
        "claim1-equivalence",
        draws * pairs,
        max_dev,
        1e-9,
        max_dev < 1e-9,
        time.perf_counter() - t0,
    )


def run_lemma1(seed: int = 0, trials: int = 100) -> SuiteResult:
    """Khatri-Rao transpose products collapse to Hadamard chains."""
    t0 = time.perf_counter()
    rng = stream(seed, "verify", 1)
    max_dev = 0.0
    for _ in range(trials):
        n = int(rng.integers(2, 4))
        rows = rng.integers(1, 7, size=n)
        k, l = (int(v) for v in rng.integers(1, 7, size=2))
        a = [rng.uniform(-1, 1, (int(r), k)) for r in rows]
        b = [rng.uniform(-1, 1, (int(r), l)) for r in rows]
        lhs = khatri_rao_chain(a).T @ khatri_rao_chain(b)
        rhs = reduce(hadamard, (ai.T @ bi for ai, bi in zip(a, b)))
        max_dev = max(max_dev, float(np.max(np.abs(lhs - rhs))))
    return SuiteResult(
        "lemma1", trials, max_dev, 1e-10, max_dev < 1e-10, time.perf_counter() - t0
    )


def _joint_ray_probe(rng, forward, dims, expected):
    base = rng.uniform(-1, 1, sum(dims))
    direction = rng.uniform(-1, 1, sum(dims))
    splits = np.cumsum(dims)[:-1]

    def f(x):
        return forward(np.split(x, splits))

    return degree_probe(f, base, direction, max_order=expected + 2)


def run_degree_law(seed: int = 0, instances: int = 20) -> SuiteResult:
    """Recursion depth sets the polynomial degree; chained blocks multiply it."""
    t0 = time.perf_counter()
    rng = stream(seed, "verify", 2)
    mismatches = []
    trials = 0

    def check(label, forward, dims, expected):
        nonlocal trials
        trials += 1
        got = _joint_ray_probe(rng, forward, dims, expected)
        if got != expected:
            mismatches.append({"case": label, "expected": expected, "got": got})

    for order in range(1, 5):
        for i in range(instances):
            d1, d2 = (int(v) for v in rng.integers(2, 5, size=2))
            k = int(rng.integers(2, 6))
            o = int(rng.integers(1, 4))
            ccp = init_ccp(rng, (d1, d2), k, o, order)
            check(
                f"ccp order {order} [{i}]",
                lambda zs, p=ccp: ccp_forward(p, zs),
                (d1, d2),
                order,
            )
            ncp = init_ncp(rng, (d1, d2), k, o, order)
            check(
                f"ncp order {order} [{i}]",
                lambda zs, p=ncp: ncp_forward(p, zs),
                (d1, d2),
                order,
            )
    for block_orders in ((2, 2), (2, 2, 2)):
        expected = int(np.prod(block_orders))
        for i in range(instances):
            spec = init_chain(
                rng, (2, 2), block_orders, rank=3, hidden_dim=3, out_dim=2
            )
            check(
                f"chain {block_orders} [{i}]",
                lambda zs, s=spec: product_compose(s, zs),
                (2, 2),
                expected,
            )
    max_dev = float(
        max((abs(m["got"] - m["expected"]) for m in mismatches), default=0)
    )
    return SuiteResult(
        "degree-law",
        trials,
        max_dev,
        0.0,
        not mismatches,
        time.perf_counter() - t0,
        details={"mismatches": mismatches} if mismatches else {},
    )


def run_reductions(seed: int = 0, instances: int = 50) -> SuiteResult:
    """Zeroed or renormalized couplings collapse to the simpler recursions."""
    t0 = time.perf_counter()
    rng = stream(seed, "verify", 3)
    max_dev = 0.0
    for _ in range(instances):
        d1, d2, k, o = (int(v) for v in rng.integers(2, 5, size=4))
        order = int(rng.integers(2, 4))
        # multiplicative-skip recursion with a silent second input
        p = init_ccp(rng, (d1, d2), k, o, order)
        for n in range(order):
            p.input_maps[n][1] = np.zeros_like(p.input_maps[n][1])
        single = PiNetParams(
            input_maps=[p.input_maps[n][0] for n in range(order)],
            head=p.head,
            head_bias=p.head_bias,
        )
        # three-variable recursion with a silent third input
        p3 = init_ccp(rng, (d1, d2, d2), k, o, order)
        for n in range(order):
            p3.input_maps[n][2] = np.zeros_like(p3.input_maps[n][2])
        p2 = CcpParams(
            input_maps=[row[:2] for row in p3.input_maps],
            head=p3.head,
            head_bias=p3.head_bias,
        )
        # gated recursion pinned to the conditioning-by-gating layout
        g = init_ncp(rng, (d1, d2), k, o, order)
        cfg = spade_config(g)
        for _ in range(3):
            z1, z2 = rng.uniform(-1, 1, d1), rng.uniform(-1, 1, d2)
            z3 = np.zeros(d2)
            devs = [
                np.max(np.abs(ccp_forward(p, [z1, z2 * 0]) - pinet_forward(single, z1))),
                np.max(np.abs(ccp_forward(p3, [z1, z2, z3]) - ccp_forward(p2, [z1, z2]))),
                np.max(np.abs(ncp_forward(cfg, [z1, z2]) - spade_forward(g, z1, z2))),
            ]
            max_dev = max(max_dev, float(max(devs)))
    return SuiteResult(
        "reductions",
        instances * 3,
        max_dev,
        1e-12,
        max_dev < 1e-12,
        time.perf_counter() - t0,
    )


def run_affineness(seed: int = 0, rays: int = 50) -> SuiteResult:
    """Additive and concat baselines have vanishing second differences on
    every ray; a generic multiplicative recursion of order >= 2 does not."""
    t0 = time.perf_counter()
    rng = stream(seed, "verify", 4)
    d1, d2, k, o = 4, 3, 5, 3
    baseline_max = 0.0
    curved = 0
    for _ in range(rays):
        order = int(rng.integers(2, 4))
        add = init_ncp(rng, (d1, d2), k, o, order)
        lin = init_concat_linear(rng, (d1, d2), o)
        ccp = init_ccp(rng, (d1, d2), k, o, order)
        base = rng.uniform(-1, 1, d1 + d2)
        direction = rng.uniform(-1, 1, d1 + d2)

        def second_diff(forward):
            vals = [
                float(np.sum(forward([x[:d1], x[d1:]])))
                for x in (base, base + direction, base + 2.0 * direction)
            ]
            return abs(vals[0] - 2.0 * vals[1] + vals[2])

        baseline_max = max(
            baseline_max,
            second_diff(lambda zs: additive_forward_cols(add, [z[:, None] for z in zs])),
            second_diff(lambda zs: concat_linear_forward(lin, zs)),
        )
        if second_diff(lambda zs: ccp_forward(ccp, zs)) > 1e-3:
            curved += 1
    fraction = curved / rays
    passed = baseline_max < 1e-9 and fraction >= 0.95
    return SuiteResult(
        "affineness",
        rays,
        baseline_max,
        1e-9,
        passed,
        time.perf_counter() - t0,
        details={"curved_fraction": fraction},
    )


def run_gradients(seed: int = 0, instances: int = 20) -> SuiteResult:
    """Tape gradients agree with central differences for every variant.

    Parameters and inputs are drawn at half scale: the squared-output loss
    is affine-per-coordinate for the non-tanh variants, so the check's only
    error source is rounding noise eps*|f|/h, and keeping the graph small
    keeps that noise under the relative-error floor for every coordinate.
    """
    t0 = time.perf_counter()
    rng = stream(seed, "verify", 5)
    max_err = 0.0
    batch = 3
    for _ in range(instances):
        d1, d2, k, o = 3, 2, 3, 2
        z = [rng.uniform(-0.5, 0.5, (d1, batch)), rng.uniform(-0.5, 0.5, (d2, batch))]
        zs = rng.uniform(-0.5, 0.5, (d1, batch))
        cases = []
        ccp = init_ccp(rng, (d1, d2), k, o, order=3)
        cases.append((ccp, lambda m: ccp_forward_cols(m, z)))
        ncp = init_ncp(rng, (d1, d2), k, o, order=3)
        cases.append((ncp, lambda m: ncp_forward_cols(m, z)))
        pin = init_pinet(rng, d1, k, o, order=3)
        cases.append((pin, lambda m: pinet_forward_cols(m, zs)))
        add = init_ncp(rng, (d1, d2), k, o, order=3)
        cases.append((add, lambda m: additive_forward_cols(m, z)))
        spd = init_ncp(rng, (d1, d2), k, o, order=3)
        cases.append((spd, lambda m: spade_forward_cols(m, z[0], z[1])))
        chain = init_chain(
            rng, (d1, d2), (2, 2), rank=k, hidden_dim=3, out_dim=o,
            output_activation="tanh",
        )
        cases.append((chain, lambda m: product_compose(m, z)))
        for model, forward in cases:
            arrays = model_parameters(model)
            for arr in arrays.values():
                arr *= 0.5

            def f(values, model=model, forward=forward):
                out = forward(with_parameters(model, values))
                return (out * out).sum()

            max_err = max(max_err, finite_diff_check(f, arrays, h=1e-5))
    return SuiteResult(
        "gradients",
        instances * 6,
        max_err,
        1e-5,
        max_err < 1e-5,
        time.perf_counter() - t0,
    )


SUITES = {
    "claim1-equivalence": run_claim1,
    "lemma1": run_lemma1,
    "degree-law": run_degree_law,
    "reductions": run_reductions,
    "affineness": run_affineness,
    "gradients": run_gradients,
}


def run_suites(names=None, seed: int = 0) -> list[SuiteResult]:
    names = list(names) if names else list(SUITES)
    unknown = [n for n in names if n not in SUITES]
    if unknown:
        raise ValueError(
            f"unknown suite(s) {unknown}; available: {list(SUITES)}"
        )
    return [SUITES[n](seed=seed) for n in names]
