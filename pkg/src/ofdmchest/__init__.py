"""Doubly-selective OFDM channel estimation with bidirectional recurrent
interpolators, plus the link-level machinery to train and evaluate them:
frame assembly, Jakes-faded channel synthesis, classical pilot estimators,
from-scratch BPTT training, BER/NMSE Monte-Carlo sweeps, and analytic
complexity accounting."""

from .channel import (
    ChannelProfile,
    ChannelRealization,
    NoiseSpec,
    Scenario,
    apply_channel,
    default_profile,
    generate_channel,
    load_profile,
    packaged_profile,
    scenario,
)
from .estimator_api import BiRnnChannelEstimator
from .estimators import (
    DftBasis,
    EstimatorInput,
    PilotEstimates,
    als_pilot,
    assemble_input,
    estimate_pilots,
    linear_interp_estimate,
    ls_pilot,
    nmse,
    stack_real,
    unstack_real,
    wi_estimate,
)
from .evaluation import (
    BerReport,
    EstimatorChoice,
    ber_sweep,
    equalize_and_demap,
    rayleigh_qpsk_reference,
    run_link_sim,
    write_ber_csv,
)
from .complexity import als_cost, build_report, reference_counts, scheme_total, unit_cost
from .modem import (
    Frame,
    ModulationScheme,
    PilotConfig,
    build_frame,
    demap_symbols,
    extract_payload_bits,
    get_scheme,
    make_pilot_config,
    make_pilot_sequence,
    map_bits,
)
from .rnn import (
    RnnModel,
    birnn_forward,
    cell_step,
    estimate_channel,
    forward_batch,
    init_model,
    load_model,
    save_model,
)
from .training import (
    Dataset,
    TrainingConfig,
    adam_step,
    backward,
    generate_dataset,
    grad_check,
    load_dataset,
    mse_loss,
    save_dataset,
    train,
)

__version__ = "0.1.0"
