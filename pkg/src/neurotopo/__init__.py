"""Topological analysis of fluorescence microscopy images.

Core: cubical complexes of binary masks, homology over Z/2 and Z, discrete
vector field reduction, persistent homology and zigzag H0. On top of that:
synapse counting, nucleus counting, neuron localization and neuron-structure
extraction, a batch CLI and an HTTP preview service for interactive tuning.
"""

from .images import BinaryImage, DimensionMismatch, GrayImage, ImageStack, band_threshold, max_projection, median_filter, region_mode
from .labeling import ComponentLabeling, ComponentStats, component_stats, label_components
from .cubical import ChainBoundaryMatrix, CubicalComplex, build_complex, euler_characteristic
from .homology import HomologyResult, betti_mod2, count_components_homological, homology_integral, smith_normal_form
from .dvf import CriticalComplex, DiscreteVectorField, InvalidFieldError, apply_field, build_greedy_dvf, reduced_betti, validate_field
from .persistence import Barcode, Filtration, ZigzagIntervals, build_filtration, persistent_components, persistent_homology, zigzag_h0
from .pipelines import (
    LocateParams,
    LocationReport,
    NucleusParams,
    NucleusReport,
    RoiPolyline,
    StructureResult,
    SynapseReport,
    count_nuclei,
    count_synapses,
    extract_structure,
    locate_neurons,
    percent_change,
)
from .pnm import ImageFormatError, load_gray, load_image, save_image, save_mask

__version__ = "0.1.0"
