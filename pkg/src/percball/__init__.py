"""Ball shapes in highly supercritical bond percolation.

Simulation toolkit tying together four exactly-coupled layers:

* discrete-time parallel exclusion dynamics on Z (:mod:`percball.tasep`),
* last-passage percolation with geometric waits (:mod:`percball.lpp`),
* the diagonal-enriched lattice whose distances encode the particle
  current (:mod:`percball.cross`),
* plain bond percolation with chemical distances (:mod:`percball.percolation`),

plus canonical geodesics and their open-path bypasses
(:mod:`percball.geodesics`) and a seeded Monte Carlo harness with a CLI
(:mod:`percball.experiments`).
"""

from .backend import NUMBA_ENABLED, backend_name
from .cross import (
    CrossConfig,
    DistanceField,
    SafeRegionError,
    cross_distance,
    cross_distance_limit,
    distance_current_identity,
    extract_particles,
    sample_cross,
)
from .experiments import (
    BallBoundary,
    ExperimentSpec,
    MuEstimate,
    SimulationError,
    estimate_mu,
    geodesic_sample,
    run_experiment,
    run_verify,
    shape_scan,
)
from .geodesics import (
    BypassResult,
    DualClusterSet,
    GeodesicPath,
    ModifiedPath,
    bad_edges_of,
    bound_statistics,
    build_geodesic,
    bypass,
    classify_edges,
    dual_clusters,
    eliminate_diagonals,
    resample_unbiased,
)
from .lpp import (
    PassageTable,
    WeightGrid,
    passage_times,
    psi,
    sample_weights,
    tasep_from_lpp,
    verify_coupling,
)
from .percolation import (
    UNREACHABLE,
    BondConfig,
    ClusterLabeling,
    chemical_distance,
    derive_cross,
    distance_field,
    label_clusters,
    sample_bonds,
)
from .tasep import (
    CurrentTable,
    ParticleField,
    Trajectory,
    current,
    current_limit,
    run_tasep,
    tasep_init,
    tasep_step,
)

__version__ = "0.1.0"
