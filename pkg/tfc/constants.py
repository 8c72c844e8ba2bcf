"""Default parameters for the team formation solvers and generators."""

DEFAULT_FEAS_TOL: float = 1e-7
DEFAULT_INT_TOL: float = 1e-9
DEFAULT_LP_ENGINE: str = "auto"  # auto | simplex | highs
DEFAULT_SIMPLEX_MAX_CELLS: int = 4_000_000
DEFAULT_LP_ITERATION_FACTOR: int = 50
DEFAULT_EXACT_NODE_BUDGET: int = 2_000_000
DEFAULT_ENUMERATION_LIMIT: int = 10_000_000
DEFAULT_SEED: int = 0

ALGORITHMS: tuple[str, ...] = ("exact", "pipage-l1", "rpipage-l2", "greedy", "random")
DEFAULT_ALGORITHM: str = "rpipage-l2"
RANDOMIZED_ALGORITHMS: frozenset[str] = frozenset({"rpipage-l2", "random"})

# Compact
DEFAULT_SUPERNODE_SIZE: int = 100
PREFERENCE_MERGE_TOL: float = 0.1

# Synth-TF
SYNTH_BLOCKS: int = 10
SYNTH_BLOCK_SIZE: int = 100
SYNTH_TASKS: int = 10
SYNTH_P_IN: float = 0.99
SYNTH_P_OUT: float = 1e-5
SYNTH_CAPACITY_SLACK: float = 1.5
SYNTH_ALPHA: float = 1.0

# Company: male share per department (IT/Sales male dominated, HR/PR female dominated)
COMPANY_DEPARTMENTS: tuple[str, ...] = ("IT", "Sales", "HR", "PR")
COMPANY_MALE_SHARE: dict[str, float] = {"IT": 0.68, "Sales": 0.67, "HR": 0.32, "PR": 0.33}
COMPANY_DEPARTMENT_SIZE: int = 1000
COMPANY_SWITCH_PROBABILITY: float = 0.01
COMPANY_ALPHA: float = 2.0

# Education-style
EDUCATION_STUDENTS: int = 28
EDUCATION_PROJECTS: int = 6
EDUCATION_GROUP_SIZE: int = 4
EDUCATION_P_IN: float = 0.8
EDUCATION_P_OUT: float = 0.01
EDUCATION_SHUFFLES: int = 2
EDUCATION_ALPHA: float = 10.0

# File schemas
INSTANCE_SCHEMA: str = "tfc-instance v1"
ASSIGNMENT_SCHEMA: str = "tfc-assignment v1"
REPORT_SCHEMA: str = "tfc-report v1"
SWEEP_SCHEMA: str = "tfc-sweep v1"
RANKINGS_SCHEMA: str = "tfc-rankings v1"
FRIENDS_SCHEMA: str = "tfc-friends v1"
CAPACITIES_SCHEMA: str = "tfc-capacities v1"
EVALUATE_SCHEMA: str = "tfc-evaluate v1"
GROUPS_SCHEMA: str = "tfc-groups v1"
