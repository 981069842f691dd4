"""Delsarte-Darboux transmutation for parametric matrix differential operator pairs.

Submodules: ``fields`` (sampled fields with exact derivatives), ``algebra``
(differential and Volterra-tail operators), ``concomitant`` (bilinear
concomitants and closed forms), ``geometry`` (paths, surfaces, quadrature),
``transmutation`` (kernels and wave dressing), ``dressing`` (dressed
operators and checks), ``instances`` (heat/KdV seeds and solitons), ``io``
and ``cli``.
"""

__version__ = "0.1.0"
