"""Smoke test for the `rkl` extension module.

Build and install first:

    cd crates/py && maturin build --release -o dist && pip install dist/rkl-*.whl
"""

import math
import tempfile

import rkl


def close(a, b, tol):
    return abs(a - b) <= tol


def main():
    # rank one: D(λ) = 1 - λc with c = ∫a² = sqrt(π/2)
    k = rkl.Kernel("rank1")
    c = math.sqrt(math.pi / 2)
    op = rkl.Operator(k, n=4)
    for lam in (0.0, 0.3, 0.5):
        assert close(op.determinant(lam), 1 - lam * c, 1e-10)
    r = op.resolvent(0.3)
    assert close(r(0.2, -0.4), math.exp(-0.04 - 0.16) / (1 - 0.3 * c), 1e-10)
    assert close(op.resolvent(0.3, method="neumann", terms=80)(0.2, -0.4), r(0.2, -0.4), 1e-10)

    # finite rank Hermitian: characteristic values 1/μ
    frh = rkl.Kernel("finite_rank_hermitian", {"mu1": 0.8, "mu2": 0.3})
    assert frh.hermitian
    fop = rkl.Operator(frh, n=5)
    roots = sorted(z.real for z in fop.characteristic_values(re=(0.5, 4.0), im=(-0.5, 0.5), grid=30))
    assert len(roots) == 2 and close(roots[0], 1.25, 1e-6) and close(roots[1], 1 / 0.3, 1e-6), roots
    try:
        fop.solve(1.25, [1.0] * len(fop))
    except rkl.CharacteristicValueError:
        pass
    else:
        raise AssertionError("solve at a characteristic value must raise")

    # φ₁ ⊗ φ₁ from the window around μ₁
    e = fop.spectral_projection(0.5, 1.0)
    assert close(e(0.0, 0.0), 1 / math.sqrt(math.pi), 1e-8)

    # manufactured solve
    f0 = [math.exp(-x * x) for x in fop.nodes]
    g = [a - 0.7 * b for a, b in zip(f0, _apply(frh, fop, f0))]
    f = fop.solve(0.7, g)
    assert max(abs(a - b) for a, b in zip(f, f0)) < 1e-9

    # Example 1 Carleman norm: τ(s)² = c_ε² ε³/3 + e^{-2ε}/2 for ε = 1
    ex = rkl.Kernel("example1", {"eps": 1.0})
    tau, _ = ex.carleman_norms(3.0)
    assert close(tau * tau, 5 / 6 * math.exp(-2), 1e-9)

    rep = rkl.convergence_study(rkl.Kernel("gauss_bump", {"sigma": 1.0}), 0.3, [1, 2, 3])
    assert rep["verdict"]["tail_decreasing"], rep["verdict"]

    with tempfile.TemporaryDirectory() as tmp:
        files = rkl.run_config(
            'command = "determinant"\n[kernel]\nid = "rank1"\n',
            [f'output.dir="{tmp}"', "params.lambda=0.0"],
        )
        assert any(p.endswith("determinant.json") for p in files), files

    print("python smoke test passed")


def _apply(kernel, op, f):
    xs, ws = op.nodes, op.weights
    return [sum(kernel(s, x) * w * v for x, w, v in zip(xs, ws, f)) for s in xs]


if __name__ == "__main__":
    main()
