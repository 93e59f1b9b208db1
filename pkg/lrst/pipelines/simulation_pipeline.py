import logging
import os
from dataclasses import replace
from typing import Dict, Optional

import pandas as pd

from lrst import __version__
from lrst.tools.trial_simulator.experiments import run_power_experiment, run_type1_experiment
from lrst.utils.config import (
    SimulationConfig,
    parse_simulation_config,
    simulation_config_to_dict,
    write_simulation_config,
)
from lrst.utils.report import plot_data, power_table, type1_table, write_json

logger = logging.getLogger(__name__)


class SimulationPipeline:
    def __init__(
        self,
        config: SimulationConfig,
        seed: Optional[int] = None,
        n_reps: Optional[int] = None,
        threads: Optional[int] = None,
        progress: bool = False,
    ):
        """
        Initialize the pipeline; ``seed``, ``n_reps`` and ``threads`` override the configuration.
        """
        overrides = {"seed": seed, "n_reps": n_reps, "threads": threads}
        self.config = replace(config, **{k: v for k, v in overrides.items() if v is not None})
        self.progress = progress

    @classmethod
    def from_file(cls, path: str, **kwargs) -> "SimulationPipeline":
        return cls(parse_simulation_config(path), **kwargs)

    def run(self) -> pd.DataFrame:
        config = self.config
        logger.info(
            f"Running {config.kind} experiment '{config.name}': {config.n_reps} replicates, "
            f"seed={config.seed}, threads={config.threads}"
        )
        common = dict(
            n_values=config.n_values,
            arm_sizes=config.arm_sizes,
            n_reps=config.n_reps,
            seed=config.seed,
            variants=config.variants,
            control_fraction=config.control_fraction,
            threads=config.threads,
            progress=self.progress,
        )
        if config.kind == "type1":
            return run_type1_experiment(config.model, alpha_values=config.alphas, **common)
        return run_power_experiment(
            config.model,
            config.effect,
            multipliers=config.multipliers,
            rho_values=config.rho_values,
            alpha_values=config.alphas,
            **common,
        )

    def save(self, frame: pd.DataFrame, out_dir: str) -> Dict[str, str]:
        """
        Write the long table, the published-layout table, plot-ready data, the resolved config and a JSON
        record embedding all of them.
        """
        os.makedirs(out_dir, exist_ok=True)
        name = self.config.name
        paths = {
            "rates": os.path.join(out_dir, f"{name}_rates.csv"),
            "table": os.path.join(out_dir, f"{name}_table.csv"),
            "config": os.path.join(out_dir, f"{name}_resolved.cfg"),
            "json": os.path.join(out_dir, f"{name}.json"),
        }
        table = type1_table(frame) if self.config.kind == "type1" else power_table(frame)
        frame.to_csv(paths["rates"], index=False)
        table.to_csv(paths["table"], index=False)
        if self.config.kind == "power":
            paths["plot"] = os.path.join(out_dir, f"{name}_plot.csv")
            plot_data(frame).to_csv(paths["plot"], index=False)
        write_simulation_config(self.config, paths["config"])
        write_json(
            {
                "version": __version__,
                "config": simulation_config_to_dict(self.config),
                "seed": self.config.seed,
                "rates": frame.to_dict(orient="records"),
                "table": table.to_dict(orient="records"),
            },
            paths["json"],
        )
        for kind, path in paths.items():
            logger.info(f"Saved {kind}: {path}")
        return paths

    def __call__(self, out_dir: Optional[str] = None) -> pd.DataFrame:
        frame = self.run()
        if out_dir is not None:
            self.save(frame, out_dir)
        return frame
