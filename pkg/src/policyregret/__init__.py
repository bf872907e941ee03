"""Partially identified regret intervals for decision policies under
confounding and selective labels."""

from .assumptions import (
    BoundingFunctions,
    CausalAssumption,
    UncertaintySet,
    bounding_functions,
    map_to_uncertainty_set,
    set_size,
)
from .bounds import BoundSelector, baseline_interval, delta_interval, separation_bound
from .core import (
    ConfigError,
    DataError,
    NumericError,
    ObservationalDataset,
    PerformanceMeasure,
    PolicyRegretError,
    PositivityError,
    RegretInterval,
    ZeroDenominatorError,
    load_dataset,
    parse_measure,
)
from .estimation import (
    EstimationConfig,
    RegretReport,
    bootstrap_ci,
    cross_fit_regret,
    dr_vstat_bound,
    plugin_vstat_bound,
    subgroup_report,
)
from .nuisance import ClassifierConfig, NuisanceModels, fit_classifier, fit_nuisances
from .synthetic import (
    OracleSample,
    SyntheticWorld,
    coverage_experiment,
    design_sensitivity,
    generate,
    healthcare_schema_dataset,
    oracle_regret,
    random_uncertainty_fixture,
    separation_characterization,
    violation_sweep,
)
from .vstats import (
    IdentifiedVStats,
    VStatTable,
    delta_value,
    estimate_identified,
    measure_value,
)

__version__ = "0.1.0"
