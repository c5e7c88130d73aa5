"""Disentangling grammatical signals from transformer sentence embeddings.

A numpy-only toolkit for BLM multiple-choice problems: data loading and
synthesis, embedding stores with 1D->2D reshaping, a small reverse-mode
autodiff core (linear / 3D / 2D convolution, Adam), continuous + discrete
(Gumbel-Softmax) latent sampling with closed-form KL terms, max-margin
training, F1 evaluation, and latent-masking analysis with Cohen's kappa.
"""

from .autodiff import Tensor, grad_check
from .data import (BLMInstance, DatasetSplit, SentenceRecord, SynthConfig,
                   load_dataset, save_dataset, split_dataset, synth_generate)
from .errors import (BlmError, ConfigError, DataError, NumericError,
                     ShapeError, StoreError)
from .latent import (LatentCode, LatentSpec, gaussian_sample,
                     gumbel_softmax_sample, joint_sample, kl_categorical_uniform,
                     kl_gaussian, mask_latent, parse_latent_spec)
from .layers import (AdamState, LayerParams, adam_step, conv2d_forward,
                     conv3d_forward, conv_init, linear_forward, linear_init)
from .model import (BaselineConfig, BaselineModel, EncoderDecoder,
                    EncoderDecoderConfig, Prediction, make_batch,
                    max_margin_loss, predict, score, total_loss)
from .store import (EmbeddingStore, InstanceTensors, Shape2D, assemble_instance,
                    read_store, reshape_2d, write_store)
from .training import (Checkpoint, EvalResult, MultiRunResult, TrainConfig,
                       evaluate, multi_run, restore_model, train)
from .analysis import (ErrorBreakdown, KappaMatrix, MaskingRun, cohens_kappa,
                       emit_report, error_breakdown, kappa_matrix,
                       masking_analysis)
from .checkpoint import load_checkpoint, save_checkpoint

__version__ = "0.1.0"
