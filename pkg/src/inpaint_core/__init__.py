from .engine import InpaintRunner
from .ini_configuration import IniConfiguration
from .logging import StandardLogger, StandardLoggerFactory
from .workflow import StandardWorkflowManager
from .errors import (InpaintError, ShapeError, NonFiniteError, FloFormatError, ConfigError,
                     DatasetError, CheckpointError, PathCollisionError, EmptyRegionError)
from .run_config import RunConfig, DataSpec, Schedule

# Define base public API
__all__ = [
    'InpaintRunner',
    'IniConfiguration',
    'StandardLogger',
    'StandardLoggerFactory',
    'StandardWorkflowManager',
    'RunConfig',
    'DataSpec',
    'Schedule',
    'InpaintError',
    'ShapeError',
    'NonFiniteError',
    'FloFormatError',
    'ConfigError',
    'DatasetError',
    'CheckpointError',
    'PathCollisionError',
    'EmptyRegionError',
]

# Autodiff core
try:
    from .tensor import Tensor, Parameter, no_grad, detect_anomaly
    from .nn import Module
    from .optim import Adam, MultiStepSchedule
    from .gradcheck import finite_diff_gradcheck, gradcheck_parameters
    from .checkpoint import save_checkpoint, load_checkpoint
    __all__.extend(['Tensor', 'Parameter', 'no_grad', 'detect_anomaly', 'Module', 'Adam',
                    'MultiStepSchedule', 'finite_diff_gradcheck', 'gradcheck_parameters',
                    'save_checkpoint', 'load_checkpoint'])
except ImportError:
    pass

# Flow data - requires Pillow for frame and mask images, scipy for the Laplace solve
try:
    from .flow_io import FlowField, read_flo_file, write_flo_file, flow_to_color
    from .flow_ops import laplacian_fill, laplacian_fill_frame, canny, fb_consistency
    from .synthetic import random_scene, gen_synthetic_scene
    from .metrics import metric_epe, metric_psnr, metric_ssim
    __all__.extend(['FlowField', 'read_flo_file', 'write_flo_file', 'flow_to_color', 'laplacian_fill',
                    'laplacian_fill_frame', 'canny', 'fb_consistency', 'random_scene',
                    'gen_synthetic_scene', 'metric_epe', 'metric_psnr', 'metric_ssim'])
except ImportError:
    # Pillow or scipy not installed - flow data helpers not available
    pass

# Networks and objectives
try:
    from .lafc import LafcConfig, LafcNet
    from .transformer import FgtConfig, FgtNet
    from .objectives import LossWeights, Discriminator, spectrum_group_analysis
    __all__.extend(['LafcConfig', 'LafcNet', 'FgtConfig', 'FgtNet', 'LossWeights', 'Discriminator',
                    'spectrum_group_analysis'])
except ImportError:
    pass

# Pipeline flows - one per CLI command
try:
    from .pipeline_flows import (GenDataFlow, TrainLafcFlow, TrainFgtFlow, InferFlow, EvalFlow,
                                 GradcheckFlow)
    __all__.extend(['GenDataFlow', 'TrainLafcFlow', 'TrainFgtFlow', 'InferFlow', 'EvalFlow',
                    'GradcheckFlow'])
except ImportError:
    pass

# CSV utilities and clip tracking
try:
    from .csv_utils import write_rows_csv, read_rows_csv
    from .clip_collection import ClipCollection, ClipItem, ClipStatus
    __all__.extend(['write_rows_csv', 'read_rows_csv', 'ClipCollection', 'ClipItem', 'ClipStatus'])
except ImportError:
    pass
