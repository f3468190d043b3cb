"""Cache placement and cooperative transmission in clustered small-cell networks."""

from ._accel import USE_NUMBA, backend_name
from .config import SystemConfig, load_config, parse_config
from .errors import (ApproximationDomainError, CompCacheError, ConfigError, DivergenceError,
                     DomainError, PreconditionWarning)
from .experiments import FIGURES, METRICS, ExperimentRecord, run_figure, run_point
from .interference import (ClusterGeometry, PathlossModel, cluster_size_pmf,
                           laplace_interference, sample_ordered_distances,
                           sample_unordered_distances)
from .optimize import (OptimizationResult, PowerModel, average_over_k, cache_service_prob,
                       energy_efficiency, grid_search_rho, maximize_ee, no_cache_ee,
                       rho_star_service, service_prob)
from .popularity import (CachePlan, ZipfPopularity, approx_range_probs, cache_hit_prob,
                         cache_range_probs, zipf_pm)
from .scdp import (ScdpEstimate, SirTargets, scdp_jt, scdp_pt_os, scdp_pt_ss,
                   scdp_quadrature)
from .sim import SimProtocol, draw_realization, estimate_scdp_sim, simulate

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
