"""Unsupervised lexical learning from raw audio with an information-coupled GAN.

A generator maps a latent vector — a small code block (one-hot class or
binary feature string) plus uniform noise — to a fixed-length waveform.
A Wasserstein critic with a gradient penalty supplies the adversarial
signal, and a separate classifier network must recover the code from the
generated audio, which couples the code channels to acoustic structure.
Everything (forward passes, gradients, the optimizer, the statistics) is
plain numpy, with scipy only for distributions and rank correlation.
"""

__version__ = "0.1.0"

from .audio import AudioClip, load_wav, slice_and_pad, write_wav
from .corpus import (
    CorpusError,
    PreparedCorpus,
    load_prepared,
    prepare_corpus,
    prepare_from_arrays,
    save_prepared,
    token_hash,
    verify_no_leakage,
)
from .gradcheck import grad_check
from .latent import (
    BINARY,
    ONE_HOT,
    LatentSpec,
    code_vector,
    decode_hard,
    enumerate_hard_codes,
    sample_latent_batch,
    sample_noise,
)
from .layers import Network
from .models import (
    Checkpoint,
    CheckpointError,
    ModelConfig,
    build_critic,
    build_generator,
    build_qnet,
    desk_model,
    discriminate,
    generate,
    load_checkpoint,
    paper_model,
    q_forward,
    save_checkpoint,
)
from .probe import (
    ClassificationRecord,
    InterpolationSweep,
    TrendSummary,
    band_energy_ratio,
    classify_clips,
    classify_corpus,
    generate_code_table,
    generate_marginal,
    generate_with_code,
    interpolate_features,
    interpolation_grid,
    onset_band_ratio,
    random_z_sweeps,
    read_classification_csv,
    sweep_trend,
    trend_pass_count,
    write_classification_csv,
)
from .stats import (
    GroupedProportions,
    PeakMatch,
    PermutationTest,
    RegressionFit,
    aic_compare,
    cluster_purity,
    code_class_fits,
    contingency_table,
    feature_capacity_check,
    fit_logistic,
    fit_multinomial,
    g_statistic,
    grouped_feature_test,
    peak_match,
    peak_match_counts,
    permutation_independence,
    proportion_logit_ci,
)
from .tensor import Adam, Tensor
from .toywords import (
    TemplateClassifier,
    fit_template_classifier,
    make_toy_corpus,
    make_toy_tokens,
    toy_classes,
    write_toy_corpus,
)
from .train import (
    ConfigError,
    NumericalError,
    TrainConfig,
    TrainLogRecord,
    d_loss,
    gradient_penalty,
    init_state,
    q_loss,
    q_loss_from_logits,
    train,
    train_step,
)
