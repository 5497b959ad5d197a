"""Day-ahead DER coordination via demand/supply power bounds on radial grids.

A global controller learns a linear power-flow model from (simulated) smart
meter data, derives per-node hourly demand boxes from history, and solves a
maximum-volume axis-aligned box program to hand each node supply bounds that
guarantee network limits under the linear model. Local controllers dispatch
storage, EV charging and flexible thermal load every 15 minutes within those
bounds. Perfect-foresight centralized and cost-greedy local controllers
bracket the scheme's performance.
"""

from .demand import DemandBox, NoHistory, compute_demand_bounds
from .der import BoundsViolation, EVCharger, StorageUnit, ThermalFlexLoad
from .dispatch import LCState, LCWeights, dispatch_step
from .engine import RunConfig, SimulationReport, run, run_compare, run_ensemble
from .history import LoadHistory
from .linmodel import LinearPFModel, SplitModel, fit_linear_model, split_pos_neg
from .network import Network, generate_radial_network, validate_topology
from .powerflow import Injection, NonConvergence, PFSolution, solve_pf
from .reactive import ReactiveBoundModel, fit_reactive_bounds
from .scenario import Knobs, Scenario, generate_scenario
from .supply import (
    BoxProblem, Infeasible, SolverStall, SupplyBox, compute_day_ahead_bounds,
    solve_supply_bounds,
)
from .tariff import TOUTariff

__version__ = "0.1.0"
