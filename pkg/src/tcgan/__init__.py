"""Timestamp-conditioned GAN augmentation for irregularly sampled time series.

A small numpy library: a tape-based autodiff core (``tensor``), series data and
synthesis (``series``), the T-CGAN itself (``gan``), comparison augmenters
(``baselines``), the measuring classifier (``classifier``) and the experiment
harness (``evaluation``). ``tcgan.cli`` wires them to the command line.
"""

from .baselines import SlicingConfig, WarpConfig, slicing_augment, time_warp, warping_augment
from .classifier import ClassifierConfig, train_classifier
from .evaluation import AurocResult, ExperimentSpec, auroc, run_experiment, tstr_protocol
from .gan import TcganConfig, TcganModel, sample, train_tcgan
from .series import IrregularSeries, LabeledDataset, SynthesisParams, load_csv, make_synthetic_dataset, save_csv

__version__ = "0.1.0"
