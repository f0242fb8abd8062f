"""Smoke test for the game_rates_py extension module."""

import json
import math

import game_rates_py as gr


def main():
    g = gr.Game.bilinear([[2.0, 0.0], [0.0, 1.0]])
    assert g.dim == 4 and (g.d1, g.d2) == (2, 2)
    spec = sorted(abs(z.imag) for z in g.spectrum())
    assert all(abs(z.real) < 1e-12 for z in g.spectrum())
    assert math.isclose(spec[0], 1.0) and math.isclose(spec[-1], 2.0)

    c = g.constants()
    eta = 0.25 / c["lipschitz"]
    traj = gr.run("eg", g, [1.0, 1.0, 1.0, 1.0], eta=eta, steps=200)
    d = traj["distances"]
    bound = 1.0 - 1.0 / (64.0 * 4.0)
    assert all(b * b <= a * a * bound + 1e-9 for a, b in zip(d, d[1:]))

    gd = gr.run("gd", g, [1.0, 0.0, 0.0, 1.0], eta=0.1, steps=20)
    gd_d = gd["distances"]
    assert all(b > a for a, b in zip(gd_d, gd_d[1:]))

    pred = gr.predict("eg", g, eta)
    assert pred["theorem"] == "bilinear_corollary"

    m = gr.Game.random_monotone(6, 4, seed=3)
    assert 0.0 <= gr.improvement_ratio(m) <= 1.0
    assert gr.global_rate(m, "eg", 0.25 / m.constants()["lipschitz"]) < 1.0
    assert gr.Game.from_json(m.to_json()).jacobian() == m.jacobian()

    report = gr.verify_lower_bound(1e-4, 1.0, 3, "convex")
    assert report["consistent"]
    mm = gr.minimax_radius([complex(1.0), complex(3.0)], 0)
    assert abs(mm["value"] - 0.5) < 1e-8
    assert gr.lagrange_lower_bound([1.0, 5.0, 9.0, 3.0]) > 0.0

    try:
        gr.Game.in_between(2.0)
    except ValueError:
        pass
    else:
        raise AssertionError("expected ValueError")

    print(json.dumps({"smoke_test": "ok"}))


if __name__ == "__main__":
    main()
