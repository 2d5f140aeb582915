"""Label-skew heterogeneity, battery-constrained selection and class imbalance in federated learning."""

from .battery import FleetConfig, PoolState, advance_pool, available_pool, init_pool, select_from_pool, simulate_windowed_delta
from .dataset import LabeledDataset, class_counts, load_cifar10_binary, make_synthetic_blobs
from .imbalance import (
    DeltaSummary,
    GroupedSelection,
    delta_vs_selection_size,
    grouped_distribution,
    imbalance_degree,
    mean_delta_random_selection,
)
from .kernels import BACKEND
from .partition import (
    ClientShards,
    PartitionSpec,
    client_label_distribution,
    dirichlet_partition,
    homogeneous_partition,
    sorted_mean_distribution,
)

__version__ = "0.1.0"
