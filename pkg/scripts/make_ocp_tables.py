"""Regenerate the bundled half-cell OCP tables.

Both curves are sampled from published closed-form fits (Chen et al., J.
Electrochem. Soc. 167 (2020) 080534) for a graphite | NMC811 pair. The
graphite stage-2 to stage-1 step is centred at x = 0.5 (LiC12) instead of
the fit's 0.61, which follows that paper's own stoichiometry scaling.
"""
from pathlib import Path

import numpy as np

DATA = Path(__file__).resolve().parents[1] / "src" / "cellident" / "model" / "data"


def graphite(x):
    return (
        1.9793 * np.exp(-39.3631 * x)
        + 0.2482
        - 0.0909 * np.tanh(29.8538 * (x - 0.1234))
        - 0.04478 * np.tanh(14.9159 * (x - 0.2769))
        - 0.0205 * np.tanh(30.4444 * (x - 0.5))
    )


def nmc811(x):
    return (
        -0.8090 * x
        + 4.4875
        - 0.0428 * np.tanh(18.5138 * (x - 0.5542))
        - 17.7326 * np.tanh(15.7890 * (x - 0.3117))
        + 17.5842 * np.tanh(15.9308 * (x - 0.3120))
    )


def grid():
    # dense where the curves bend hardest (low lithiation)
    x = np.concatenate(
        [
            np.linspace(0.0, 0.1, 41),
            np.linspace(0.1, 0.4, 61)[1:],
            np.linspace(0.4, 1.0, 61)[1:],
        ]
    )
    return np.round(x, 6)


def write(name, fn):
    x = grid()
    rows = ["stoichiometry,potential_V"]
    rows += [f"{xi:.6f},{fn(xi):.10f}" for xi in x]
    (DATA / name).write_text("\n".join(rows) + "\n")


if __name__ == "__main__":
    write("graphite_ocp.csv", graphite)
    write("nmc811_ocp.csv", nmc811)
