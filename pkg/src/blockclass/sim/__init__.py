from blockclass.sim.runner import build_sim_engine, run_simulation, seed_demo_data
from blockclass.sim.scenario import SimulationScenario

__all__ = ["SimulationScenario", "build_sim_engine", "run_simulation", "seed_demo_data"]
