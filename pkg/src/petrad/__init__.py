"""PET/CT radiomics and prognosis workbench.

Subpackages cover the full chain from raw PET/CT volumes to benchmarked
predictions: ``imaging`` (I/O and preprocessing), ``phantom`` (synthetic
cohorts), ``features`` (handcrafted radiomics), ``cr_models`` (feature
selectors and classifiers), ``harness`` (grid protocol and metrics),
``autodiff`` (reverse-mode differentiation) and ``dlr`` (two-branch 3D CNN).
"""

__version__ = "0.1.0"
