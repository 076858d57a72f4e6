from .core import (
    SamplerConfig,
    Trace,
    adaptive_rw_update,
    chain_rng,
    gibbs_update_N_negbin,
    gibbs_update_psi,
    gibbs_update_z,
)
from .families import MhFamily, SecrFamily, make_family
from .scd import check_scd2_prior, run_scd1, run_scd2
from .superpop import run_cdde, run_cdr

SAMPLERS = {"scd1": run_scd1, "scd2": run_scd2, "cdr": run_cdr, "cdde": run_cdde}
