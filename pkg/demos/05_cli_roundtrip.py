"""Drive the command-line interface end to end from Python.

Writes an experiment config, runs the selfcheck and a small convergence
study through the same entry point the `softlangevin` console script uses,
and prints the artifacts it produced.
"""

import json
import pathlib
import tempfile

from softlangevin import cli


def main():
    config = {
        "d": 2,
        "k": 1,
        "gamma": 1.0,
        "beta": 1.0,
        "alpha": 1.0,
        "u_kind": "cross_sine",
        "u_amplitude": 0.5,
        "mechanism": "phase_space_confinement",
        "epsilons": [0.2, 0.1, 0.05],
        "q0": [0.0, 1.0],
        "p0": [0.0, 0.0],
        "horizon_T": 1.0,
        "dt": 0.005,
        "n_paths": 1000,
        "metrics": ["pointwise_l2_q1", "pathwise_sup_l2_unconstrained"],
        "seed": 7,
        "format": "csv",
        "output_path": ".",
    }

    print("== selfcheck ==")
    code = cli.main(["selfcheck"])
    print(f"exit code {code}\n")

    with tempfile.TemporaryDirectory() as tmp:
        out = pathlib.Path(tmp)
        cfg_path = out / "config.json"
        cfg_path.write_text(json.dumps(config, indent=2))

        print("== converge ==")
        code = cli.main(["converge", "--config", str(cfg_path), "--out", tmp])
        print(f"exit code {code}")
        for path in sorted(out.iterdir()):
            if path.name == "config.json":
                continue
            print(f"\n--- {path.name} ---")
            text = path.read_text()
            print(text if len(text) < 2000 else text[:2000] + "...")

        summary = json.loads((out / "converge_summary.json").read_text())
        for res in summary["results"]:
            print(
                f"{res['metric']}: slope {res['slope']:.3f},"
                f" floor {res['floor_detected']}"
            )


if __name__ == "__main__":
    main()
