"""cubenn: compact 3D convolutional networks for hyperspectral pixel classification.

Everything numeric is implemented on plain numpy float32 arrays: volumetric
convolution forward/backward, momentum SGD with L1 regularization, stepped
learning rates, stratified splits, the training/evaluation harness, and
head-only transfer learning with frozen feature extractors.
"""

__version__ = "0.1.0"

from .data import (Dataset, DatasetSplit, GroundTruth, HyperCube, SplitConfig,
                   epoch_batches, extract_batch, extract_voxel, labels_at, pair,
                   read_hsc, read_hsg, scale, stratified_split, write_hsc, write_hsg)
from .errors import (CheckpointError, CubennError, DatasetError,
                     InvalidArchitectureError, InvalidGeometryError,
                     ShapeMismatchError)
from .layers import (Conv3d, Dense, Dropout, conv3d_backward, conv3d_forward,
                     cross_entropy, dropout_forward, relu, relu_backward, size_out,
                     softmax, softmax_cross_entropy)
from .netspec import (LayerSpec, Network, NetworkSpec, build, format_spec,
                      param_count, parse_spec, registry, shape_trace, validate)
from .optim import L1Penalty, LrSchedule, SgdMomentum, apply_l1, init_msra, lr_at
from .tensor import Prng, Tensor, reshape, sample_indices_without_replacement
from .train import (ConfusionMatrix, RunReport, RunSummary, TrainConfig,
                    averaged_runs, classify_map, early_point, evaluate, run)
from .transfer import (Checkpoint, fine_tune, load, read_checkpoint, save,
                       write_checkpoint)
