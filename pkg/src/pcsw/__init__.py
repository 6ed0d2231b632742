"""pcsw: polycrystal surrogate workbench.

Synthetic 2D polycrystal microstructures, a plane-strain crystal-plasticity
finite-element solver for mean-field stress-strain curves, single-crystal
basis-response sampling, and DeepONet-style surrogates (single-crystal-response
branch and material-property branch) trained on the simulated curves.
"""

__version__ = "0.1.0"
