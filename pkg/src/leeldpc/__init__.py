"""Lee-metric coding toolkit over integer residue rings Z/qZ."""

from . import bounds, channels, cli, codes, de, decoders, ring, sim, spectrum
from .bounds import (
    BoundCurve,
    LambdaDist,
    evaluate_curve,
    lambda_dist,
    lee_weight_law,
    pep,
    pep_worstcase,
    rcu_constant_md,
    rcu_constant_ml,
    rcu_memoryless,
    sphere_packing,
    union_bound,
    union_bound_exact,
)
from .channels import (
    Channel,
    constant_weight_channel,
    likelihood_matrix,
    likelihood_vec,
    memoryless_channel,
    sample_constant_weight,
    sample_memoryless,
    trial_stream,
)
from .codes import (
    EnsembleSpec,
    TannerCode,
    is_codeword,
    peg_construct,
    sample_code,
    syndrome,
)
from .de import (
    bp_de_montecarlo,
    shannon_limit,
    smp_de,
    threshold_search,
)
from .decoders import (
    SmpParams,
    bp_decode,
    bp_decode_batch,
    lsf_decode,
    lsf_decode_batch,
    smp_decode,
    smp_decode_batch,
)
from .ring import (
    RingSpec,
    ball_size,
    entropy,
    entropy_rate_H,
    entropy_rate_H_plus,
    expected_lee_weight,
    kl_divergence,
    lee_weight,
    solve_boltzmann,
    sphere_size,
    surface_spectrum,
    tv_distance,
    vector_lee_weight,
    volume_spectrum,
)

from .spectrum import (
    CheckGenFn,
    LeeType,
    OrbitProfile,
    avg_type_enumerator,
    avg_weight_enumerator,
    check_count,
    check_gen_fn,
    enumerate_types,
    growth_rate_alpha,
    growth_rate_phi,
    growth_rate_spectrum,
    lee_type,
    random_code_growth_rate,
    type_transfer_fraction,
    type_transfer_prob,
    write_spectrum_csv,
)
from .sim import (
    ConfigError,
    ExperimentConfig,
    SimRecord,
    TraceMismatch,
    parse_kv_text,
    replay_trial,
    run_bounds,
    run_simulation,
    run_spectrum,
    run_thresholds,
    smp_schedule,
    wilson_halfwidth,
)

__version__ = "0.1.0"
