"""Quick end-to-end check of the pyebtrain extension."""

import math

import pyebtrain as eb


def main():
    dist, gains, shifts = eb.draw_scenario(5, seed=1)
    assert len(dist) == len(gains) == len(shifts) == 5

    star = eb.optimal_power(gains, shifts)
    aligned = eb.harvested_power(gains, shifts, [t + 0.3 for t in shifts])
    assert math.isclose(aligned, star, rel_tol=1e-12)

    target = 1.0
    out = eb.run_interval(lambda psi: 2 + 2 * math.cos(psi - target), windows=8)
    err = abs(math.remainder(out["final_phase"] - target, 2 * math.pi))
    assert err <= eb.error_bound(16, 1, "a2") + 1e-12, err

    seq = eb.run_sequential(gains, shifts, slots_per_interval=32)
    assert seq.efficiency > 0.9999 and seq.training_slots == 32 * 4
    par = eb.run_parallel(gains, shifts, 0.5, intervals=60, slots_per_interval=8, seed=2)
    rpp = eb.run_rpp(gains, shifts, slots=200, seed=3)
    for run in (seq, par, rpp):
        assert 0 < run.final_power <= run.optimal_power * (1 + 1e-12)

    n = eb.equal_gain_required_slots(5, 0.99)
    assert abs(n - 9.6188) < 1e-3, n
    assert eb.efficiency_lower_bound(gains, 16) <= 1.0

    table = eb.run_experiment("coin", trials=3, seed=1, settings={"p": "0.2, 0.8"})
    assert table["columns"][0] == "p"
    assert {row[0] for row in table["rows"]} == {0.2, 0.8}

    try:
        eb.run_sequential([1.0], [0.0], 8)
    except ValueError:
        pass
    else:
        raise AssertionError("single ET accepted")

    print(f"ok: seq eta={seq.efficiency:.6f} par eta={par.efficiency:.4f} rpp eta={rpp.efficiency:.4f}")


if __name__ == "__main__":
    main()
