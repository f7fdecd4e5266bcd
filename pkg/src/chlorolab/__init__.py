"""Weak chlorophyll-fluorescence labeling and desk-scale neural regression.

Pipeline: load multispectral captures, compute NDVI, cut vegetation tiles,
fit generative models (GMM / K-NN / KDE) on a small ground-truth set of
(date, NDVI, CF) triples, sample weak CF labels for unlabeled tiles, then
train and evaluate small neural regressors on those labels.

Kept import-light on purpose: submodules pull in numpy, the package root
does not, so the CLI can pin thread environment variables first.
"""

__version__ = "0.1.0"
