"""rfrlkit: a small, self-contained deep-learning kit for robust
feature-representation training on layered grayscale images.

From-scratch reverse-mode autodiff over numpy arrays, convolution and
transposed-convolution kernels (compiled extension with a pure numpy
fallback), an encoder/decoder classifier with attention skip sums, a
three-headed loss, Adam with reduce-on-plateau, a portable synthetic
dataset with a distribution shift, macro metrics, class-activation
heatmaps, and a deterministic CLI harness.
"""

from .backend import BACKEND
from .config import ExperimentConfig, config_to_text, parse_config, read_config
from .data import (AugmentConfig, Dataset, Holdout, KFold, Sample,
                   SyntheticSpec, augment, augment_image, export_dataset,
                   load_dataset, split, synth_generate)
from .errors import (ConfigError, ContractError, DatasetError, FormatError,
                     NumericsError, RfrlError, ShapeError)
from .explain import Heatmap, gradcam, gradcam_pp
from .gradcheck import finite_diff_grad, run_suite
from .layers import (Conv2dParams, ConvT2dParams, conv2d, conv2d_transpose,
                     dense, global_avg_pool, relu, sigmoid, softmax)
from .losses import LossReport, cross_entropy, frs_loss, mse, total_loss
from .metrics import ConfusionMatrix, confusion, metrics
from .model import (ForwardTaps, LossSwitches, ModelConfig, RfrlModel,
                    build_model, count_params, forward)
from .optim import Adam, PlateauState, plateau_update
from .rng import PortableRng
from .serialize import (load_checkpoint, read_tensor_file, save_checkpoint,
                        write_tensor_file)
from .tensor import (ComputationTape, GradMap, Tensor, backward, ewise,
                     matmul, no_grad, tensor)
from .train import evaluate, load_model_checkpoint, make_datasets, run_train

__version__ = "0.1.0"
