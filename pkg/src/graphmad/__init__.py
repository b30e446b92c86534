"""Graph data augmentation through graphon descriptors and clusterpath mixup."""

__version__ = "0.1.0"

from .cvxclust import (
    ClusterPath,
    FusionWeights,
    LambdaGrid,
    build_weights,
    optimality_residual,
    solve_at,
    trace_clusterpath,
)
from .graph_io import (
    Dataset,
    LabeledGraph,
    SoftLabeledGraph,
    load_soft_labels,
    load_tudataset,
    write_augmented_dataset,
)
from .graphon import (
    DescriptorSet,
    Graphon,
    build_descriptor_set,
    devectorize,
    estimate_graphon,
    sample_graph,
    vectorize,
)
from .mixpath import (
    ExtendedClusterPath,
    LabelPath,
    build_extended_path,
    build_label_paths,
    collapse_branches,
    compute_rate,
    label_at,
    select_branch_lambda,
)
from .mixup import (
    ClassGraphonSet,
    LambdaSource,
    MixupSpec,
    estimate_class_graphons,
    generate,
    linear_graphon_mix,
    linear_label_mix,
    logit_label_mix,
    sigmoid_label_mix,
)

__all__ = [
    "__version__",
    "ClassGraphonSet",
    "ClusterPath",
    "Dataset",
    "DescriptorSet",
    "ExtendedClusterPath",
    "FusionWeights",
    "Graphon",
    "LabeledGraph",
    "LabelPath",
    "LambdaGrid",
    "LambdaSource",
    "MixupSpec",
    "SoftLabeledGraph",
    "build_descriptor_set",
    "build_extended_path",
    "build_label_paths",
    "build_weights",
    "collapse_branches",
    "compute_rate",
    "devectorize",
    "estimate_class_graphons",
    "estimate_graphon",
    "generate",
    "label_at",
    "linear_graphon_mix",
    "linear_label_mix",
    "load_soft_labels",
    "load_tudataset",
    "logit_label_mix",
    "optimality_residual",
    "sample_graph",
    "select_branch_lambda",
    "sigmoid_label_mix",
    "solve_at",
    "trace_clusterpath",
    "vectorize",
    "write_augmented_dataset",
]
