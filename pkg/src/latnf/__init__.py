"""Truncated lattice Hamiltonians: spectra, resonances, normal forms, dynamics."""

from .lattice import (
    Lattice,
    MAX_POINTS,
    conjugate,
    conjugate_key,
    enumerate_lattice,
    extended_indexes,
    is_real_pairing,
    point_distance,
    real_state,
)
from .frequencies import (
    AsymptoticFit,
    Beam,
    GroundState,
    SpectralMultiplier,
    SpectrumTable,
    TableModel,
    TorusLaplacian,
    build_spectrum,
    fit_asymptotics,
    floor_comparability,
    floor_norm,
    frequency,
    spectrum_to_csv,
)
from .bands import (
    BandPartition,
    band_map,
    band_of,
    band_partition,
    check_band_invariants,
)
from .clusters import (
    ClusterPartition,
    block_index_map,
    block_of,
    build_clusters,
    certify_dyadic,
    cluster_summary,
    clusters_to_csv,
    clusters_to_json,
    high_mode_blocks,
    separation_margin,
)
from .resonance import (
    MeasureEstimate,
    MultiplierEnsemble,
    NonresonanceCertificate,
    certificate_to_json,
    certify_nonresonance,
    estimate_resonant_measure,
    ground_state_divisor_function,
    is_block_nonresonant,
    is_resonant_W,
    ordering_permutation,
    small_divisor,
    validate_cutoff,
)
from .forms import (
    PolyHamiltonian,
    SymmetricForm,
    add_forms,
    band_superactions,
    block_superactions,
    canonical_key,
    conjugate_form,
    decompose_by_high_order,
    derivative_maps,
    evaluate,
    form_from_jsonl,
    form_to_jsonl,
    is_real_coefficients,
    localized_norm,
    make_form,
    mass_form,
    nls_quartic,
    poisson_bracket,
    polarized_evaluate,
    polarized_vector_field,
    poly_evaluate,
    poly_from_forms,
    poly_vector_field,
    quadratic_hamiltonian,
    random_form,
    scale_form,
    scaled_norm,
    sobolev_norm,
    split_state,
    superaction_form,
    vector_field,
    vector_field_seminorm,
    zero_form,
)
from .estimates import (
    high_order_decay,
    random_state,
    separation_cutoff_bound,
    verify_bilinear_eigen,
    verify_tame,
)
from .normalform import (
    NormalFormConfig,
    NormalFormResult,
    check_superaction_commutation,
    choose_cutoff,
    classify_term,
    lie_transform,
    normalform_manifest,
    normalize,
    solve_homological,
    transform_state,
)
from .dynamics import (
    SimulationConfig,
    StabilityReport,
    TrajectoryRecord,
    bogoliubov,
    ground_state_reduce,
    integrate_beam,
    integrate_nls,
    integrate_normal_form,
    orbital_distance,
    reconstruct_ground_state,
    rk4_reference,
    stability_experiment,
    superactions,
    trajectory_to_csv,
)
from .config import ConfigError, apply_overrides, default_config, load_config
from .manifest import build_manifest, file_sha256, inventory, spawn_seed, write_manifest

__version__ = "0.1.0"
