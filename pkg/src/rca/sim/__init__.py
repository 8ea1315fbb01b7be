from .scenario import SimScenario, generate_fleet, load_scenario  # noqa: F401
from .core import ScenarioSim  # noqa: F401
