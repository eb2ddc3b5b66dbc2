"""Smoke test for the expfact extension module.

Build and run from the repository root:

    cargo build -p expfact-py --release --features extension-module
    cp target/release/libexpfact_py.so python/expfact.so
    python3 python/smoke_test.py
"""

import cmath
import json
import os
import sys

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import expfact  # noqa: E402


def check(cond, what):
    if not cond:
        raise SystemExit(f"FAIL: {what}")
    print(f"ok   {what}")


def main():
    sp = expfact.Space.circle_path(64)
    check(len(sp) == 64, "circle space has 64 samples")

    # upper triangular with diagonal (e^{p}, e^{-p}): the triangular route
    samples = []
    for z in sp.coords():
        p = 0.3 * z
        samples.append([[cmath.exp(p), 1 + z], [0, cmath.exp(-p)]])
    a = expfact.Matrix.from_samples(sp, samples)
    f = a.factorize_triangular(0.25)
    check(f.verified and f.residual < 1e-7, f"triangular route verified (residual {f.residual:.1e})")
    check((f.b1.exp() @ f.b2.exp()).max_diff(a) < 1e-7, "exp(B1) exp(B2) reproduces A")

    # the general route on a full matrix with det in the identity component
    fp = expfact.Space.finite_points(4)
    m = expfact.Matrix.from_samples(fp, [[[2, 1 + k], [k * 0.5j, 1]] for k in range(4)])
    g = m.factorize(eps=0.25, seed=0)
    check(g.verified, f"general route verified (residual {g.residual:.1e})")
    verified, residual = expfact.verify_certificate(g.certificate_json())
    check(verified and residual == g.residual, "certificate rechecks from JSON")

    cert = json.loads(g.certificate_json())
    cert["factors"][0]["entries"][0] = {"poly": [[3.0, 0.0]]}
    check(not expfact.verify_certificate(json.dumps(cert))[0], "tampered certificate is rejected")

    b, _ = m.single_exp()
    check(b.exp().max_diff(m) < 1e-9, "single logarithm on finite points")

    spec = m.to_spec_json()
    check(expfact.Matrix.from_spec_json(spec).max_diff(m) == 0.0, "spec JSON round trip")
    check(len(m.spectrum()) == 8, "spectrum has n x samples points")

    passed, table = expfact.t_counterexample(65)
    check(passed, "T counterexample suite")
    print(table)

    try:
        expfact.Matrix.from_spec_json("{}")
    except ValueError:
        check(True, "bad spec raises ValueError")
    else:
        check(False, "bad spec raises ValueError")


if __name__ == "__main__":
    main()
