"""Regenerate the bundled example dataset in src/sglmidas/data."""

import json
from pathlib import Path

import numpy as np

from sglmidas.cli import write_project
from sglmidas.simulation import pseudo_empirical_panel

OUT = Path(__file__).resolve().parents[1] / "src" / "sglmidas" / "data"


def main():
    rng = np.random.default_rng(7)
    # the last quarter has covariates but no realized target yet
    panel = pseudo_empirical_panel(rng, n_covariates=8, n_periods=81)
    cfg_path = write_project(
        panel, OUT, series={"q": 2, "degree": 2, "leads": {"2m": 1, "1m": 2, "eoq": 3}}, unobserved=1,
        ar_lags=1, penalize_intercept=False,
        cv={"n_folds": 5, "alpha_grid": [0.0, 0.25, 0.5, 0.75, 1.0], "n_lambda": 50},
        window=60, seed=0, output="out",
    )
    for old, new in (("target.csv", "example_target.csv"), ("covariates.csv", "example_covariates.csv"),
                     ("config.json", "example_config.json")):
        (OUT / old).replace(OUT / new)
    cfg = json.loads((OUT / "example_config.json").read_text())
    cfg["target"], cfg["covariates"] = "example_target.csv", "example_covariates.csv"
    (OUT / "example_config.json").write_text(json.dumps(cfg, indent=2) + "\n")
    scenario = {"T": 50, "n_noise": 7, "degree": 5, "replications": 500, "seed": 20240101}
    (OUT / "baseline_scenario.json").write_text(json.dumps(scenario, indent=2) + "\n")


if __name__ == "__main__":
    main()
