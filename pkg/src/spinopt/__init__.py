"""Spatially resolved sensitivity analysis and optimal spin-subset selection
for inhomogeneously controlled quantum-sensor ensembles, with structured-
illumination hologram synthesis and shot-noise Monte Carlo validation."""

from .ensemble import (
    EnsembleCurve,
    SensorEnsemble,
    SubsetMask,
    ensemble_sensitivity,
    ensemble_signal_scan,
    eta_ens_of_mask,
    marginal_gain_test,
    metrology_gain,
    optimal_subset,
    threshold_consistency,
)
from .errors import (
    ConfigError,
    EmptyRegionError,
    ExcludedSensorError,
    FieldFormatError,
    SpinoptError,
)
from .fields import (
    AntennaSpec,
    GridSpec,
    NVFrame,
    ScalarField2D,
    biot_savart_rabi_map,
    export_field_map,
    import_field_map,
    loop_b_field,
    normalized_deviation,
    region_uniformity,
    uniformity_region,
)
from .holography import (
    HologramConfig,
    HologramPlan,
    IterationLog,
    camera_feedback,
    gerchberg_saxton,
    hologram_for_subset,
    mraf_step,
    nonuniformity,
    power_efficiency,
    propagate,
    synthesize,
)
from .photophysics import (
    PopulationState,
    RateModelParams,
    ReadoutWindow,
    evolve_populations,
    illumination_penalty,
    mean_photons,
    readout_contrast,
    saturation_pumping_rate,
    steady_state_populations,
)
from .protocols import (
    CWParams,
    EchoParams,
    PulseError,
    RamseyParams,
    cw_sensitivity,
    cw_steady_state,
    echo_sensitivity,
    echo_sensitivity_perfect_pi,
    echo_signal,
    optimal_saturation,
    pulse_error,
    ramsey_sensitivity,
    ramsey_signal,
    sensitivity_map,
)
from .shotnoise import (
    MCConfig,
    PoissonChannel,
    ensemble_fisher,
    fisher_information,
    ramsey_channel,
    simulate_estimator,
    subset_vs_full_mc,
)

__version__ = "0.1.0"
