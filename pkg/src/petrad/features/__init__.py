from .discretize import DiscretizationSpec, GreyLevelVolume, discretize
from .extract import (N_FEATURES, ExtractionConfig, FeatureMatrix, FeatureVector, extract_all,
                      feature_names, read_feature_csv, write_feature_csv)
from .firstorder import FOS_NAMES, fos_features
from .shape import SHAPE_NAMES, shape_features
from .texture import (GLCM_NAMES, GLRLM_NAMES, GLSZM_NAMES, NGTDM_NAMES, glcm_features,
                      glcm_matrices, glrlm_features, glrlm_matrices, glszm_features,
                      glszm_matrix, ngtdm_features, ngtdm_vectors)
from .wavelet import SUBBANDS, decimate_mask, wavelet_decompose, wavelet_reconstruct

__all__ = [
    "DiscretizationSpec", "GreyLevelVolume", "discretize", "N_FEATURES", "ExtractionConfig",
    "FeatureMatrix", "FeatureVector", "extract_all", "feature_names", "read_feature_csv",
    "write_feature_csv", "FOS_NAMES", "fos_features", "SHAPE_NAMES", "shape_features",
    "GLCM_NAMES", "GLRLM_NAMES", "GLSZM_NAMES", "NGTDM_NAMES", "glcm_features",
    "glcm_matrices", "glrlm_features", "glrlm_matrices", "glszm_features", "glszm_matrix",
    "ngtdm_features", "ngtdm_vectors", "SUBBANDS", "decimate_mask", "wavelet_decompose",
    "wavelet_reconstruct",
]
